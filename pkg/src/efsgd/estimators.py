"""Per-worker gradient estimators and their auxiliary state updates.

estimate() is pure apart from advancing the worker's random streams: it never
mutates worker state, so unbiasedness can be checked by redrawing at a fixed
iterate.  State transitions (DIANA shift, LSVRG reference point, error buffer)
are applied by the engine using what estimate() returns.

For methods whose estimator itself contains a quantizer draw (D-SGD-DIANA,
D-LSVRG-DIANA, VR-DIANA, the double-quantized DIANA), one draw serves both the
estimator and the shift update.  EC-SGD-DIANA and friends use the raw gradient
difference in g_i and quantize only inside the shift update, so there the draw
happens in update_shift().
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from efsgd.compressors import RngStream, quantize
from efsgd.methods import MethodSpec


@dataclass
class Estimate:
    """One worker's estimator evaluation."""

    g: np.ndarray  # the estimator g_i^k
    evals: int  # component-gradient evaluations spent
    g_hat: np.ndarray | None = None  # pre-shift estimator (DIANA methods)
    delta: np.ndarray | None = None  # quantized shift increment, when g uses it
    sampled: int | None = None  # component index drawn (LSVRG/VR)
    new_row_grad: np.ndarray | None = None  # grad at x of the sampled row (SAGA)


@dataclass
class WorkerState:
    """Mutable per-worker state owned by exactly one logical worker."""

    worker_id: int
    rng_sample: RngStream
    rng_refresh: RngStream
    rng_quant: RngStream
    e: np.ndarray | None = None  # EC error buffer
    h: np.ndarray | None = None  # DIANA shift
    w_ref: np.ndarray | None = None  # LSVRG reference point
    ref_grad: np.ndarray | None = None  # cached grad_worker(w_ref)
    saga_table: np.ndarray | None = None  # (m, d) per-row gradients
    saga_mean: np.ndarray | None = None
    delay_buffer: deque = field(default_factory=deque)


def init_worker_states(spec: MethodSpec, prob, x0: np.ndarray, seed: int):
    """Fresh worker states at x0.  Returns (states, init_evals_total).

    LSVRG-style methods pay m evaluations per worker for the initial reference
    gradient; SAGA seeds its table at x0 for the same price.  Shifts start at
    h_i = 0.
    """
    md = spec.definition
    states = []
    init_evals = 0
    for i in range(prob.n):
        ws = WorkerState(
            worker_id=i,
            rng_sample=RngStream(seed, i, "sampling"),
            rng_refresh=RngStream(seed, i, "refresh"),
            rng_quant=RngStream(seed, i, "quantizer"),
        )
        if md.family == "ec":
            ws.e = np.zeros(prob.d)
        if md.uses_shift:
            ws.h = np.zeros(prob.d)
        if md.uses_ref_point:
            if md.saga:
                ws.saga_table = prob.component_grads(i, x0)
                ws.saga_mean = ws.saga_table.mean(axis=0)
            else:
                ws.w_ref = x0.copy()
                ws.ref_grad = prob.grad_worker(i, x0)
            init_evals += prob.m
        states.append(ws)
    return states, init_evals


def _batch_grad(ws: WorkerState, spec: MethodSpec, x, prob):
    """Uniform mini-batch (without replacement) or full-shard gradient."""
    i = ws.worker_id
    if spec.batch >= prob.m:
        return prob.grad_worker(i, x), prob.m
    if spec.batch == 1:
        j = int(ws.rng_sample.integers(prob.m))
        return prob.grad_component(i, j, x), 1
    idx = ws.rng_sample.choice_without_replacement(prob.m, spec.batch)
    return prob.grad_batch(i, idx, x), spec.batch


def _lsvrg_ghat(ws: WorkerState, x, prob):
    """Control-variate estimator against the cached reference gradient."""
    i = ws.worker_id
    l = int(ws.rng_sample.integers(prob.m))
    g = prob.component_grad_diff(i, l, x, ws.w_ref) + ws.ref_grad
    return g, l


class StarOracleMissing(RuntimeError):
    pass


def estimate(
    ws: WorkerState,
    spec: MethodSpec,
    x: np.ndarray,
    prob,
    ref=None,
    hbar: np.ndarray | None = None,
) -> Estimate:
    """Evaluate g_i^k at x.  Advances RNG streams; mutates no other state."""
    est = spec.estimator
    i = ws.worker_id
    if spec.definition.needs_star:
        if ref is None or not ref.converged:
            raise StarOracleMissing(
                f"{spec.name} needs a reference solution within tolerance"
            )

    if est == "sgd":
        g, evals = _batch_grad(ws, spec, x, prob)
        return Estimate(g=g, evals=evals)

    if est == "gdstar":
        g = prob.grad_worker(i, x) - ref.grad_i_star[i]
        return Estimate(g=g, evals=prob.m)

    if est == "sgd_diana":
        ghat, evals = _batch_grad(ws, spec, x, prob)
        return Estimate(g=ghat - ws.h + hbar, evals=evals, g_hat=ghat)

    if est == "lsvrg":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        return Estimate(g=ghat, evals=2, sampled=l)

    if est == "lsvrg_star":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        return Estimate(g=ghat - ref.grad_i_star[i], evals=2, sampled=l)

    if est == "lsvrg_diana":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        return Estimate(g=ghat - ws.h + hbar, evals=2, g_hat=ghat, sampled=l)

    if est == "qsgd":
        ghat, evals = _batch_grad(ws, spec, x, prob)
        # the -grad_i(x*) term of the analysis cancels in the average and is
        # dropped at runtime
        return Estimate(g=quantize(spec.quantizer, ghat, ws.rng_quant), evals=evals)

    if est == "qsgd_star":
        ghat, evals = _batch_grad(ws, spec, x, prob)
        g = quantize(spec.quantizer, ghat - ref.grad_i_star[i], ws.rng_quant)
        return Estimate(g=g, evals=evals)

    if est == "qlsvrg":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        return Estimate(
            g=quantize(spec.quantizer, ghat, ws.rng_quant), evals=2, sampled=l
        )

    if est == "qlsvrg_star":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        g = quantize(spec.quantizer, ghat - ref.grad_i_star[i], ws.rng_quant)
        return Estimate(g=g, evals=2, sampled=l)

    if est in ("diana_q", "dianasr_dq"):
        ghat, evals = _batch_grad(ws, spec, x, prob)
        delta = quantize(spec.quantizer, ghat - ws.h, ws.rng_quant)
        return Estimate(g=ws.h + delta, evals=evals, g_hat=ghat, delta=delta)

    if est == "lsvrg_diana_q":
        ghat, l = _lsvrg_ghat(ws, x, prob)
        delta = quantize(spec.quantizer, ghat - ws.h, ws.rng_quant)
        return Estimate(g=ws.h + delta, evals=2, g_hat=ghat, delta=delta, sampled=l)

    if est == "vr_diana":
        l = int(ws.rng_sample.integers(prob.m))
        row_grad = prob.grad_component(i, l, x)
        if spec.definition.saga:
            old = ws.saga_table[l]
            ghat = row_grad - old + ws.saga_mean
        else:
            ghat = row_grad - prob.grad_component(i, l, ws.w_ref) + ws.ref_grad
        delta = quantize(spec.quantizer, ghat - ws.h, ws.rng_quant)
        return Estimate(
            g=ws.h + delta,
            evals=2,
            g_hat=ghat,
            delta=delta,
            sampled=l,
            new_row_grad=row_grad,
        )

    raise ValueError(f"unknown estimator {est!r}")


def update_shift(
    ws: WorkerState, spec: MethodSpec, g_hat: np.ndarray, delta: np.ndarray | None = None
) -> np.ndarray:
    """Apply h_i <- h_i + alpha * Q(g_hat - h_i) and return the increment.

    When the estimator already drew its quantized difference, the same
    realization is reused; otherwise one independent draw is made here.
    """
    if delta is None:
        delta = quantize(spec.quantizer, g_hat - ws.h, ws.rng_quant)
    ws.h = ws.h + spec.alpha * delta
    return delta


def update_lsvrg_reference(
    ws: WorkerState,
    spec: MethodSpec,
    x: np.ndarray,
    prob,
    shared_coin: bool | None = None,
    sampled: int | None = None,
    new_row_grad: np.ndarray | None = None,
) -> tuple[bool, int]:
    """Refresh the reference state after a step.  Returns (refreshed, evals).

    LSVRG-style: with probability p (own coin, or the shared master coin for
    the loopless VR variant) the reference point jumps to x and the shard
    gradient is recomputed at m evaluations.  SAGA: only the sampled row of
    the gradient table is replaced, reusing the gradient computed in
    estimate(), at no extra cost.
    """
    if spec.definition.saga:
        old = ws.saga_table[sampled].copy()
        ws.saga_table[sampled] = new_row_grad
        ws.saga_mean = ws.saga_mean + (new_row_grad - old) / prob.m
        return True, 0
    coin = shared_coin
    if coin is None:
        coin = bool(ws.rng_refresh.random() < spec.p)
    if coin:
        ws.w_ref = x.copy()
        ws.ref_grad = prob.grad_worker(ws.worker_id, x)
        return True, prob.m
    return False, 0
