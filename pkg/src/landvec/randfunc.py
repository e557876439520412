"""Random expression-tree objective functions.

Trees are built from a fixed grammar:

* binary ``add sub mul div``; unary ``sin cos exp log sqrt abs square neg``
* terminals: a variable ``x<i>`` or a constant drawn uniformly from
  ``constant_range``.

Node kinds are drawn 40% binary / 30% unary / 30% terminal.  A node at level
``max_depth`` is forced to be a terminal and one above ``min_depth`` is forced
to be an operator.  Terminals are variables with probability 0.7.

All randomness comes from :class:`~landvec.rng.SplitMix64`, so a seed gives
the same tree on every platform.  Evaluation uses protected operators and
clips every intermediate result to ``[-VALUE_CAP, VALUE_CAP]`` so the output
is always finite.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, GeneratorExhaustedError, ParseError, UsageError
from .rng import SplitMix64
from .sampling import normalize_array, rescale, sobol_points

BINARY = ("add", "sub", "mul", "div")
UNARY = ("sin", "cos", "exp", "log", "sqrt", "abs", "square", "neg")
ARITY = {**{op: 2 for op in BINARY}, **{op: 1 for op in UNARY}}

PROTECT_EPS = 1e-9
EXP_CLAMP = 50.0
VALUE_CAP = 1e100
MAX_REJECTIONS = 1000
MIN_DISTINCT = 10
MIN_STD = 1e-6


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Op:
    name: str
    args: tuple


Node = Union[Var, Const, Op]


def node_depth(node: Node) -> int:
    if isinstance(node, Op):
        return 1 + max(node_depth(a) for a in node.args)
    return 1


def node_size(node: Node) -> int:
    if isinstance(node, Op):
        return 1 + sum(node_size(a) for a in node.args)
    return 1


def max_var_index(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Op):
        return max(max_var_index(a) for a in node.args)
    return -1


@dataclass(frozen=True)
class FunctionExpr:
    root: Node
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise UsageError("input dimension must be positive")
        if max_var_index(self.root) >= self.d:
            raise DimensionError(
                f"variable x{max_var_index(self.root)} out of range for d={self.d}"
            )

    @property
    def depth(self) -> int:
        return node_depth(self.root)

    @property
    def size(self) -> int:
        return node_size(self.root)

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class GeneratorConfig:
    d: int
    seed: int = 0
    max_depth: int = 12
    min_depth: int = 2
    constant_range: tuple[float, float] = (-5.0, 5.0)
    # design used by the degeneracy filter
    doe_m: int = 8
    lower: float = -5.0
    upper: float = 5.0

    def __post_init__(self):
        if self.d < 1:
            raise UsageError(f"dimension must be positive, got {self.d}")
        if not 1 <= self.min_depth <= self.max_depth:
            raise UsageError("require 1 <= min_depth <= max_depth")
        lo, hi = self.constant_range
        if not lo < hi:
            raise UsageError("constant_range must be a non-empty interval")


# -- evaluation -------------------------------------------------------------

def _div(a, b):
    ok = np.abs(b) > PROTECT_EPS
    return np.where(ok, a / np.where(ok, b, 1.0), 1.0)


def _log(a):
    mag = np.abs(a)
    ok = mag > PROTECT_EPS
    return np.where(ok, np.log(np.where(ok, mag, 1.0)), 0.0)


_UNARY_FN = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": lambda a: np.exp(np.minimum(a, EXP_CLAMP)),
    "log": _log,
    "sqrt": lambda a: np.sqrt(np.abs(a)),
    "abs": np.abs,
    "square": np.square,
    "neg": np.negative,
}
_BINARY_FN = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": _div}


def _eval(node: Node, cols: np.ndarray) -> np.ndarray:
    if isinstance(node, Var):
        return cols[node.index]
    if isinstance(node, Const):
        return np.full(cols.shape[1], node.value)
    if len(node.args) == 1:
        out = _UNARY_FN[node.name](_eval(node.args[0], cols))
    else:
        out = _BINARY_FN[node.name](_eval(node.args[0], cols), _eval(node.args[1], cols))
    return np.clip(out, -VALUE_CAP, VALUE_CAP)


def evaluate(expr: FunctionExpr, points) -> np.ndarray:
    """Evaluate ``expr`` on every row of ``points`` (``n x d``)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != expr.d:
        raise DimensionError(f"points have shape {pts.shape}, expression expects d={expr.d}")
    with np.errstate(all="ignore"):
        return np.array(_eval(expr.root, pts.T), dtype=np.float64)


# -- generation --------------------------------------------------------------

def _grow(rng: SplitMix64, cfg: GeneratorConfig, level: int) -> Node:
    if level >= cfg.max_depth:
        kind = "terminal"
    else:
        r = rng.below(100)
        if level < cfg.min_depth:
            kind = "binary" if r < 57 else "unary"  # 40:30 renormalized
        else:
            kind = "binary" if r < 40 else "unary" if r < 70 else "terminal"
    if kind == "terminal":
        if rng.below(10) < 7:
            return Var(rng.below(cfg.d))
        return Const(rng.uniform(*cfg.constant_range))
    if kind == "binary":
        name = BINARY[rng.below(len(BINARY))]
        left = _grow(rng, cfg, level + 1)
        right = _grow(rng, cfg, level + 1)
        return Op(name, (left, right))
    name = UNARY[rng.below(len(UNARY))]
    return Op(name, (_grow(rng, cfg, level + 1),))


def filter_design(cfg: GeneratorConfig) -> np.ndarray:
    return rescale(sobol_points(cfg.doe_m, cfg.d), cfg.lower, cfg.upper)


def is_degenerate(values: np.ndarray) -> bool:
    if not np.all(np.isfinite(values)):
        return True
    y = normalize_array(values)
    return np.unique(y).size < MIN_DISTINCT or float(np.std(y)) < MIN_STD


def generate_with_attempts(cfg: GeneratorConfig, design=None) -> tuple[FunctionExpr, int]:
    """Generate a non-degenerate tree; also return how many candidates were rejected."""
    pts = filter_design(cfg) if design is None else design
    seeds = SplitMix64(cfg.seed)
    for attempt in range(MAX_REJECTIONS + 1):
        rng = SplitMix64(seeds.next_u64())
        expr = FunctionExpr(_grow(rng, cfg, 1), cfg.d)
        if not is_degenerate(evaluate(expr, pts)):
            return expr, attempt
    raise GeneratorExhaustedError(
        f"no non-degenerate function after {MAX_REJECTIONS} rejections (seed {cfg.seed})"
    )


def generate(cfg: GeneratorConfig) -> FunctionExpr:
    return generate_with_attempts(cfg)[0]


# -- text form ---------------------------------------------------------------

def _fmt_const(v: float) -> str:
    return f"{v:.17g}"


def _ser(node: Node, out: list[str]) -> None:
    if isinstance(node, Var):
        out.append(f"x{node.index}")
    elif isinstance(node, Const):
        out.append(_fmt_const(node.value))
    else:
        out.append(f"({node.name}")
        for a in node.args:
            out.append(" ")
            _ser(a, out)
        out.append(")")


def serialize(expr: FunctionExpr | Node) -> str:
    out: list[str] = []
    _ser(expr.root if isinstance(expr, FunctionExpr) else expr, out)
    return "".join(out)


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_VAR = re.compile(r"x(\d+)\Z")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", pos)
        if m.group(0).strip() == "":
            break
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), start))
        pos = m.end()
    return tokens


def parse(text: str, d: int | None = None) -> FunctionExpr:
    """Parse prefix notation such as ``(add x0 0.5)``.

    ``d`` defaults to one more than the largest variable index.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 0)
    pos = 0

    def atom(tok: str, off: int) -> Node:
        m = _VAR.match(tok)
        if m:
            return Var(int(m.group(1)))
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(f"unknown token {tok!r}", off) from None
        if not math.isfinite(val):
            raise ParseError(f"non-finite constant {tok!r}", off)
        return Const(val)

    def expr() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", len(text))
        tok, off = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'", off)
        if tok != "(":
            return atom(tok, off)
        if pos >= len(tokens):
            raise ParseError("missing operator", len(text))
        name, name_off = tokens[pos]
        if name not in ARITY:
            raise ParseError(f"unknown operator {name!r}", name_off)
        pos += 1
        args = []
        while pos < len(tokens) and tokens[pos][0] != ")":
            args.append(expr())
        if pos >= len(tokens):
            raise ParseError("missing ')'", len(text))
        if len(args) != ARITY[name]:
            raise ParseError(
                f"operator {name!r} takes {ARITY[name]} argument(s), got {len(args)}",
                name_off,
            )
        pos += 1
        return Op(name, tuple(args))

    root = expr()
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    if d is None:
        d = max(1, max_var_index(root) + 1)
    return FunctionExpr(root, d)


def write_suite(path, exprs, header: dict | None = None) -> None:
    lines = []
    if header:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in header.items()))
    lines.extend(serialize(e) for e in exprs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def read_suite(path, d: int | None = None) -> tuple[list[FunctionExpr], dict]:
    """Read a suite file; ``key=value`` pairs in comment lines are returned as metadata."""
    meta: dict[str, str] = {}
    texts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            texts.append(line)
    if d is None and "d" in meta:
        d = int(meta["d"])
    exprs = [parse(t) for t in texts]
    if d is None:
        d = max((e.d for e in exprs), default=1)
    return [FunctionExpr(e.root, d) for e in exprs], meta


# -- suites ------------------------------------------------------------------

def generate_suite(count: int, d: int, seed: int = 0, m: int = 8, lower=-5.0, upper=5.0):
    """``count`` functions; function ``i`` uses seed ``seed + i``.

    Returns the expressions, their normalized values on the rescaled Sobol
    design of size ``2**m`` and the total number of rejected candidates.
    """
    if count < 1:
        raise UsageError(f"count must be at least 1, got {count}")
    pts = rescale(sobol_points(m, d), lower, upper)
    exprs, rows, rejected = [], [], 0
    for i in range(count):
        cfg = GeneratorConfig(d, seed=seed + i, doe_m=m, lower=lower, upper=upper)
        expr, attempts = generate_with_attempts(cfg, pts)
        exprs.append(expr)
        rows.append(normalize_array(evaluate(expr, pts)))
        rejected += attempts
    return exprs, np.array(rows), rejected
