"""Finite-sum l2-regularized logistic regression, sharding and reference solve.

The objective is

    f(x) = (1/N) sum_r log(1 + exp(-y_r <a_r, x>)) + (mu/2) ||x||^2

split across n workers holding m = N/n samples each, so that
f = (1/n) sum_i f_i and f_i = (1/m) sum_j f_ij with the regularizer folded
into every component.  All logistic terms are computed overflow-safely.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class ParseError(ValueError):
    """LIBSVM ingestion failure, carrying the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class Dataset:
    """Row-indexed sparse feature matrix with +-1 labels."""

    features: sp.csr_matrix  # N x d
    labels: np.ndarray  # in {-1, +1}
    name: str = "unnamed"

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class Shard:
    """One worker's slice: row indices into the parent dataset."""

    rows: np.ndarray
    worker_id: int


def parse_libsvm(source, name: str = "unnamed") -> Dataset:
    """Parse LIBSVM text ("label idx:val ...", 1-based indices) into a Dataset.

    0/1 labels are remapped to -1/+1.  Malformed tokens, duplicate indices
    within a line and empty input raise :class:`ParseError` with the line
    number.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    data, indices, indptr, labels = [], [], [0], []
    max_index = 0
    n_lines = 0
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ParseError(lineno, f"non-numeric label {parts[0]!r}")
        if label in (0.0, 1.0):
            label = 1.0 if label == 1.0 else -1.0
        elif label not in (-1.0, 1.0):
            raise ParseError(lineno, f"label {label} not in {{0,1,-1,+1}}")
        seen = set()
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed feature token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(lineno, f"non-numeric token {tok!r}")
            if idx < 1:
                raise ParseError(lineno, f"index {idx} not 1-based")
            if idx in seen:
                raise ParseError(lineno, f"duplicate index {idx}")
            seen.add(idx)
            indices.append(idx - 1)
            data.append(val)
            max_index = max(max_index, idx)
        indptr.append(len(data))
        labels.append(label)
        n_lines += 1
    if n_lines == 0:
        raise ParseError(0, "empty input")
    mat = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices), np.asarray(indptr)),
        shape=(n_lines, max_index),
    )
    return Dataset(mat, np.asarray(labels), name=name)


def shard_dataset(
    ds: Dataset, n: int, seed: int, target_rows: int | None = None
) -> list[Shard]:
    """Shuffle by seed, truncate to n*floor(N/n) rows (or an explicit target
    divisible by n) and split contiguously into n equal shards."""
    N = ds.n_samples
    if n < 1 or n > N:
        raise ValueError(f"cannot split {N} rows into {n} shards")
    keep = n * (N // n) if target_rows is None else int(target_rows)
    if keep > N or keep % n != 0 or keep < n:
        raise ValueError(f"target_rows={keep} invalid for N={N}, n={n}")
    perm = np.random.default_rng(seed).permutation(N)[:keep]
    m = keep // n
    return [Shard(np.sort(perm[i * m : (i + 1) * m]), i) for i in range(n)]


def _power_iteration(A: sp.csr_matrix, rel_tol: float = 1e-10, max_iter: int = 10000):
    """Top eigenvalue of A^T A by deterministic power iteration."""
    d = A.shape[1]
    v = np.full(d, 1.0 / np.sqrt(d))
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, 0.0
        v_new = w / norm
        lam_new = float(v_new @ (A.T @ (A @ v_new)))
        rel = abs(lam_new - lam) / max(lam_new, 1e-300)
        lam, v = lam_new, v_new
        if rel < rel_tol:
            return lam, rel
    return lam, rel


def smoothness_constants(ds: Dataset, mu: float):
    """(L, lambda_max, L_max_component) for the regularized logistic loss.

    L = mu + lambda_max(A^T A) / (4N); the per-sample constant is
    mu + max_r ||a_r||^2 / 4.
    """
    lam_max, _ = _power_iteration(ds.features)
    N = ds.n_samples
    row_sq = np.asarray(ds.features.multiply(ds.features).sum(axis=1)).ravel()
    L = mu + lam_max / (4.0 * N)
    L_max_component = mu + float(row_sq.max()) / 4.0
    return L, lam_max, L_max_component


@dataclass
class ReferenceSolution:
    """High-precision optimum with per-worker gradients cached at x*."""

    x_star: np.ndarray
    f_star: float
    grad_i_star: np.ndarray  # (n, d), worker gradients at x*
    achieved_grad_norm: float
    tol: float
    iterations: int

    @property
    def converged(self) -> bool:
        return self.achieved_grad_norm <= self.tol


class LogisticProblem:
    """Sharded regularized logistic regression with worker-level gradients."""

    def __init__(self, ds: Dataset, shards: list[Shard], mu: float):
        self.dataset = ds
        self.shards = shards
        self.mu = float(mu)
        self.n = len(shards)
        self.m = len(shards[0].rows)
        if any(len(s.rows) != self.m for s in shards):
            raise ValueError("shards must have equal length")
        self.d = ds.dim
        self.name = ds.name
        all_rows = np.concatenate([s.rows for s in shards])
        self.A = ds.features[all_rows].tocsr()  # (n*m, d), rows grouped by worker
        self.A.sort_indices()
        self.y = ds.labels[all_rows]
        self._shard_mats = [self.A[i * self.m : (i + 1) * self.m] for i in range(self.n)]
        self._shard_y = [self.y[i * self.m : (i + 1) * self.m] for i in range(self.n)]
        # raw CSR arrays for fast single-row access in the inner loops
        self._indptr = self.A.indptr
        self._indices = self.A.indices
        self._data = self.A.data
        # dense row cache when affordable; sparse row math otherwise
        self._dense = (
            self.A.toarray() if self.A.shape[0] * self.d <= 4_000_000 else None
        )
        self.L, self.lambda_max, self.L_max_component = smoothness_constants(
            Dataset(self.A, self.y), mu
        )

    # -- values and gradients ------------------------------------------------

    def loss(self, x: np.ndarray) -> float:
        margins = self.A @ x
        vals = np.logaddexp(0.0, -self.y * margins)
        return float(vals.mean() + 0.5 * self.mu * (x @ x))

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        margins = self.A @ x
        coef = -self.y * expit(-self.y * margins)
        return np.asarray(self.A.T @ coef) / (self.n * self.m) + self.mu * x

    def grad_worker(self, i: int, x: np.ndarray) -> np.ndarray:
        Ai, yi = self._shard_mats[i], self._shard_y[i]
        coef = -yi * expit(-yi * (Ai @ x))
        return np.asarray(Ai.T @ coef) / self.m + self.mu * x

    def loss_component(self, i: int, j: int, x: np.ndarray) -> float:
        r = i * self.m + j
        lo, hi = self._indptr[r], self._indptr[r + 1]
        margin = self._data[lo:hi] @ x[self._indices[lo:hi]]
        return float(
            np.logaddexp(0.0, -self.y[r] * margin) + 0.5 * self.mu * (x @ x)
        )

    @staticmethod
    def _coef(yr: float, margin: float) -> float:
        """Overflow-safe -y * sigmoid(-y * margin)."""
        t = yr * margin
        if t >= 0.0:
            s = math.exp(-t)
            return -yr * s / (1.0 + s)
        return -yr / (1.0 + math.exp(t))

    def grad_component(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        r = i * self.m + j
        yr = self.y[r]
        if self._dense is not None:
            row = self._dense[r]
            g = self.mu * x  # fresh array
            g += self._coef(yr, row @ x) * row
            return g
        lo, hi = self._indptr[r], self._indptr[r + 1]
        idx = self._indices[lo:hi]
        dat = self._data[lo:hi]
        g = self.mu * x  # fresh array
        g[idx] += self._coef(yr, dat @ x[idx]) * dat
        return g

    def component_grad_diff(self, i: int, j: int, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """grad_ij(x) - grad_ij(w), fused for the control-variate estimators."""
        r = i * self.m + j
        yr = self.y[r]
        if self._dense is not None:
            row = self._dense[r]
            c = self._coef(yr, row @ x) - self._coef(yr, row @ w)
            g = self.mu * (x - w)
            g += c * row
            return g
        lo, hi = self._indptr[r], self._indptr[r + 1]
        idx = self._indices[lo:hi]
        dat = self._data[lo:hi]
        c = self._coef(yr, dat @ x[idx]) - self._coef(yr, dat @ w[idx])
        g = self.mu * (x - w)
        g[idx] += c * dat
        return g

    def grad_batch(self, i: int, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Mean component gradient over a batch of shard-local indices."""
        Ai, yi = self._shard_mats[i], self._shard_y[i]
        sub = Ai[idx]
        yb = yi[idx]
        coef = -yb * expit(-yb * (sub @ x))
        return np.asarray(sub.T @ coef) / len(idx) + self.mu * x

    def component_grads(self, i: int, x: np.ndarray) -> np.ndarray:
        """(m, d) dense matrix of all component gradients of worker i at x."""
        Ai, yi = self._shard_mats[i], self._shard_y[i]
        coef = -yi * expit(-yi * (Ai @ x))
        dense = Ai.multiply(coef[:, None]).toarray()
        dense += self.mu * x[None, :]
        return dense

    # -- theoretical constants ------------------------------------------------

    def expected_smoothness_bound(self) -> float:
        """Upper bound on the expected-smoothness constant for uniform
        single-component sampling: the worst per-sample smoothness."""
        return self.L_max_component


def loss(prob, x):
    return prob.loss(x)


def grad_full(prob, x):
    return prob.grad_full(x)


def grad_worker(prob, i, x):
    return prob.grad_worker(i, x)


def grad_component(prob, i, j, x):
    return prob.grad_component(i, j, x)


def expected_smoothness_bound(prob) -> float:
    return prob.expected_smoothness_bound()


class ReferenceToleranceError(RuntimeError):
    """solve_reference hit its iteration cap above the requested tolerance."""

    def __init__(self, achieved: float, tol: float):
        super().__init__(
            f"reference solve stalled at ||grad|| = {achieved:.3e} > tol {tol:.1e}"
        )
        self.achieved = achieved


def solve_reference(prob, tol: float = 1e-12, max_iter: int = 2_000_000) -> ReferenceSolution:
    """Deterministic full-gradient descent with stepsize 1/L down to
    ||grad f(x)|| <= tol (or the iteration cap, flagged on the result)."""
    x = np.zeros(prob.d)
    gamma = 1.0 / prob.L
    it = 0
    g = prob.grad_full(x)
    norm = float(np.linalg.norm(g))
    while norm > tol and it < max_iter:
        x = x - gamma * g
        g = prob.grad_full(x)
        norm = float(np.linalg.norm(g))
        it += 1
    grads = np.stack([prob.grad_worker(i, x) for i in range(prob.n)])
    return ReferenceSolution(
        x_star=x,
        f_star=prob.loss(x),
        grad_i_star=grads,
        achieved_grad_norm=norm,
        tol=tol,
        iterations=it,
    )


# ---------------------------------------------------------------------------
# synthetic instances and starting points
# ---------------------------------------------------------------------------

MU_RULE = "rule"  # mu = 1e-4 * lambda_max(A^T A) / (4N)


def regularization_from_rule(ds: Dataset) -> float:
    lam_max, _ = _power_iteration(ds.features)
    return 1e-4 * lam_max / (4.0 * ds.n_samples)


def make_synthetic_dataset(
    n: int, m: int, d: int, seed: int, label_flip: float = 0.1
) -> Dataset:
    """N = n*m rows a_r = b + z_r: a shared component b plus unit-sphere noise
    of radius sqrt(d) orthogonal to it, so every row has the same norm.

    The shared component keeps the per-sample smoothness within a small factor
    of the average L (as in the benchmark LIBSVM sets), which is what makes
    the 1/L stepsize workable for the batch-1 estimators.  Labels come from a
    hyperplane orthogonal to b, with a flipped fraction providing gradient
    noise at the optimum.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 91]))
    N = n * m
    if d < 2:
        A = rng.standard_normal((N, d))
        w = rng.standard_normal(d)
    else:
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        b = np.sqrt(d) * u
        Z = rng.standard_normal((N, d))
        Z -= np.outer(Z @ u, u)
        Z *= np.sqrt(d) / np.linalg.norm(Z, axis=1, keepdims=True)
        A = b[None, :] + Z
        w = rng.standard_normal(d)
        w -= (w @ u) * u  # so the shared component carries no label signal
    y = np.sign(A @ w + 0.5 * rng.standard_normal(N))
    y[y == 0] = 1.0
    flips = rng.random(N) < label_flip
    y[flips] = -y[flips]
    return Dataset(sp.csr_matrix(A), y, name=f"synthetic(n={n},m={m},d={d},seed={seed})")


def make_synthetic_problem(
    n: int,
    m: int,
    d: int,
    mu: float | str = MU_RULE,
    seed: int = 0,
    label_flip: float = 0.1,
) -> LogisticProblem:
    ds = make_synthetic_dataset(n, m, d, seed, label_flip)
    mu_val = regularization_from_rule(ds) if mu == MU_RULE else float(mu)
    shards = shard_dataset(ds, n, seed)
    return LogisticProblem(ds, shards, mu_val)


def build_problem_from_dataset(
    ds: Dataset, n: int, mu: float | str = MU_RULE, seed: int = 0,
    target_rows: int | None = None,
) -> LogisticProblem:
    mu_val = regularization_from_rule(ds) if mu == MU_RULE else float(mu)
    shards = shard_dataset(ds, n, seed, target_rows=target_rows)
    return LogisticProblem(ds, shards, mu_val)


def initial_point(prob, ref: ReferenceSolution | None, mode: str, seed: int) -> np.ndarray:
    """x0 = 0, or a seeded direction scaled by bisection so that
    f(x0) - f* lands in [9, 11]."""
    if mode == "zero":
        return np.zeros(prob.d)
    if mode != "gap10":
        raise ValueError(f"unknown x0 mode {mode!r}")
    if ref is None:
        raise ValueError("gap10 starting point needs a reference solution")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    u = rng.standard_normal(prob.d)
    u /= np.linalg.norm(u)
    gap = lambda s: prob.loss(ref.x_star + s * u) - ref.f_star
    lo, hi = 0.0, 1.0
    while gap(hi) < 11.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise RuntimeError("could not reach target gap along the seeded direction")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if 9.0 <= g <= 11.0:
            return ref.x_star + mid * u
        if g < 9.0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("bisection failed to land in the [9, 11] gap window")
