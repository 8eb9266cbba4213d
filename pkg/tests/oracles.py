"""Independent oracles shared by the unit and acceptance suites.

These deliberately avoid the code paths they check: randomized operators are
enumerated exhaustively and gradients are compared to finite differences.
"""

import itertools

import numpy as np


def enumerate_randk(x, k):
    """All outcomes of RandK with their probabilities."""
    d = len(x)
    subsets = list(itertools.combinations(range(d), k))
    prob = 1.0 / len(subsets)
    outcomes = []
    for subset in subsets:
        out = np.zeros(d)
        idx = list(subset)
        out[idx] = (d / k) * np.asarray(x)[idx]
        outcomes.append((out, prob))
    return outcomes


def enumerate_dither(x, p):
    """All outcomes of lp-dithering with their probabilities."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    norm = np.linalg.norm(x) if p == "l2" else np.abs(x).max()
    probs = np.abs(x) / norm
    outcomes = []
    for bits in itertools.product((0, 1), repeat=d):
        pr = 1.0
        out = np.zeros(d)
        for i, b in enumerate(bits):
            pr *= probs[i] if b else 1.0 - probs[i]
            if b:
                out[i] = norm * np.sign(x[i])
        if pr > 0.0:
            outcomes.append((out, pr))
    return outcomes


def enumerated_mean(outcomes):
    return sum(pr * out for out, pr in outcomes)


def enumerated_err2(outcomes, x):
    return sum(pr * np.sum((out - np.asarray(x)) ** 2) for out, pr in outcomes)


def fd_gradient(fn, x, h=1e-6):
    """Central finite differences."""
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)
