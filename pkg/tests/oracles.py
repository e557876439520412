"""Independent reference implementations used as test oracles."""

import math

import numpy as np

from landvec.vae import loss_and_grads

# Published Joe-Kuo rows (d: s, a, m_1..m_s) for the first few dimensions.
JOE_KUO = {
    2: (1, 0, (1,)),
    3: (2, 1, (1, 3)),
    4: (3, 1, (1, 3, 1)),
    5: (3, 2, (1, 1, 1)),
    6: (4, 1, (1, 1, 3, 3)),
    7: (4, 4, (1, 3, 5, 13)),
}


def reference_sobol(n, d, bits=32):
    """Textbook Sobol construction: x_i = XOR of v_k over the set bits of gray(i)."""
    dirs = [[1 << (bits - 1 - k) for k in range(bits)]]
    for j in range(2, d + 1):
        s, a, m0 = JOE_KUO[j]
        m = list(m0)
        for k in range(s, bits):
            val = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                val ^= ((a >> (s - 1 - i)) & 1) * (m[k - i] << i)
            m.append(val)
        dirs.append([m[k] << (bits - 1 - k) for k in range(bits)])
    pts = []
    for i in range(n):
        g = i ^ (i >> 1)
        row = []
        for v in dirs:
            acc = 0
            for k in range(bits):
                if (g >> k) & 1:
                    acc ^= v[k]
            row.append(acc / 2.0**bits)
        pts.append(row)
    return np.array(pts)


def fd_gradients(model, X, eps, beta, h=1e-5):
    """Central finite differences of the batch loss w.r.t. every parameter.

    h=1e-5 balances truncation (O(h^2)) against round-off (O(eps_mach * loss / h)).
    """
    out = []
    for p in model.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_and_grads(model, X, eps, beta)[0]
            flat[i] = old - h
            down = loss_and_grads(model, X, eps, beta)[0]
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def brute_force_nearest(latents, query, k):
    dists = [(math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(row, query))), i)
             for i, row in enumerate(latents)]
    dists.sort()
    return [(i, d) for d, i in dists[:k]]


def best_gini_split(x, y):
    """Exhaustive threshold search on one feature; returns (weighted gini, threshold)."""
    best = (math.inf, None)
    values = sorted(set(x))
    for lo, hi in zip(values, values[1:]):
        t = (lo + hi) / 2
        left = [c for v, c in zip(x, y) if v <= t]
        right = [c for v, c in zip(x, y) if v > t]
        score = 0.0
        for part in (left, right):
            counts = {c: part.count(c) for c in set(part)}
            score += len(part) * (1 - sum((n / len(part)) ** 2 for n in counts.values()))
        best = min(best, (score / len(x), t))
    return best


def random_small_model(kind, seed, n=16, ls=2):
    """Freshly initialized model with random biases (zero biases put ReLUs on their kink)."""
    from landvec.vae import build_model

    model = build_model(kind, n, ls, seed=seed)
    rng = np.random.Generator(np.random.PCG64([seed, 99]))
    for layer in model.layers:
        layer.b[:] = rng.normal(0.0, 0.3, layer.b.shape)
    return model
