"""SplitMix64: a counter-based 64-bit generator with integer-only state.

The random function generator draws from this instead of a platform RNG so
that a seed produces the same trees everywhere.  State advances by the
golden-ratio increment; each output is the standard SplitMix64 finalizer of
the counter.  Floats are built from the top 53 bits of an integer draw.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def below(self, k: int) -> int:
        """Integer in ``[0, k)`` via multiply-shift (no modulo bias beyond 2**-64)."""
        return (self.next_u64() * k) >> 64

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u
