"""Parameter-server simulation: the unified error-feedback iteration loop.

Every method runs the same skeleton:

    each worker computes g_i^k;
    the family rule turns it into the transmitted v_i^k
        plain:  v_i = gamma * g_i
        ec:     v_i = C(e_i + gamma * g_i),  e_i += gamma * g_i - v_i
        delay:  v_i = gamma * g_i^{k - tau}  (0 while k < tau)
    x^{k+1} = x^k - (1/n) sum_i v_i^k

with the double-quantized DIANA variant additionally passing the aggregated
estimator through the master-side quantizer.  Aggregation is performed in
ascending worker id for floating-point determinism.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from efsgd.compressors import RngStream, bit_cost, compress, quantize
from efsgd.estimators import (
    StarOracleMissing,
    estimate,
    init_worker_states,
    update_lsvrg_reference,
    update_shift,
)
from efsgd.methods import MethodSpec, resolve_method
from efsgd.objectives import ReferenceSolution, initial_point


class DivergenceError(RuntimeError):
    """The iterate went non-finite; carries the offending iteration index."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration


@dataclass
class StepInfo:
    g: np.ndarray  # averaged estimator applied this step
    v: np.ndarray  # averaged transmitted update


class Simulation:
    """One method on one problem: workers, master state and counters."""

    def __init__(
        self,
        prob,
        spec: MethodSpec,
        seed: int,
        ref: ReferenceSolution | None = None,
        x0: np.ndarray | None = None,
        float_bits: int = 64,
        keep_worker_history: bool = False,
    ):
        spec.validate(prob.d, prob.m)
        if spec.definition.needs_star and (ref is None or not ref.converged):
            raise StarOracleMissing(
                f"{spec.name} requires a reference solution within tolerance"
            )
        self.prob = prob
        self.spec = spec
        self.ref = ref
        self.seed = seed
        self.x = np.zeros(prob.d) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.workers, self.grad_evals = init_worker_states(spec, prob, self.x, seed)
        self.hbar = np.zeros(prob.d) if spec.definition.uses_shift else None
        self.master_rng = RngStream(seed, 0, "master")
        self.k = 0
        self.bits_up = 0
        self.bits_down = 0
        self.float_bits = float_bits
        self._up_per_iter, self._down_per_iter = self._iteration_bits()
        self._star_component_grads = None  # lazy (n, m, d) cache for sigma2
        self.last = None  # StepInfo of the most recent step
        self.keep_worker_history = keep_worker_history
        self.worker_history: list[dict] = []  # per-step g_i / v_i snapshots

    # -- communication cost ----------------------------------------------------

    def _iteration_bits(self) -> tuple[int, int]:
        """Closed-form per-iteration (uplink total, downlink) bit costs."""
        spec, d, fb = self.spec, self.prob.d, self.float_bits
        md = spec.definition
        dense = d * fb
        if md.family == "ec":
            up = bit_cost(spec.compressor, d, fb)
            if md.uses_shift:
                up += bit_cost(spec.quantizer, d, fb)
        elif md.quantized_estimator:
            up = bit_cost(spec.quantizer, d, fb)
        else:
            up = dense
        down = bit_cost(spec.quantizer2, d, fb) if md.estimator == "dianasr_dq" else dense
        return up * self.prob.n, down

    # -- diagnostics -----------------------------------------------------------

    def mean_error(self) -> np.ndarray:
        md = self.spec.definition
        e = np.zeros(self.prob.d)
        if md.family == "ec":
            for ws in self.workers:
                e += ws.e
        elif md.family == "delay":
            for ws in self.workers:
                for buf in ws.delay_buffer:
                    e += buf
        return e / self.prob.n

    def perturbed_iterate(self) -> np.ndarray:
        """x_tilde = x - mean_i e_i, satisfying x_tilde^{k+1} = x_tilde^k - gamma g^k."""
        return self.x - self.mean_error()

    def sigma1_sq(self) -> float | None:
        """Shift error (1/n) sum ||h_i - grad_i(x*)||^2."""
        if self.hbar is None or self.ref is None:
            return None
        tot = 0.0
        for ws in self.workers:
            diff = ws.h - self.ref.grad_i_star[ws.worker_id]
            tot += float(diff @ diff)
        return tot / self.prob.n

    def _star_grads(self, i: int) -> np.ndarray:
        if self._star_component_grads is None:
            self._star_component_grads = {}
        if i not in self._star_component_grads:
            self._star_component_grads[i] = self.prob.component_grads(
                i, self.ref.x_star
            )
        return self._star_component_grads[i]

    def sigma2_sq(self) -> float | None:
        """Reference error (1/(nm)) sum_ij ||grad_ij(w_i) - grad_ij(x*)||^2."""
        md = self.spec.definition
        if not md.uses_ref_point or self.ref is None:
            return None
        tot = 0.0
        for ws in self.workers:
            gstar = self._star_grads(ws.worker_id)
            table = (
                ws.saga_table
                if md.saga
                else self.prob.component_grads(ws.worker_id, ws.w_ref)
            )
            diff = table - gstar
            tot += float(np.sum(diff * diff))
        return tot / (self.prob.n * self.prob.m)

    def shift_mean_consistent(self, tol: float = 1e-12) -> bool:
        if self.hbar is None:
            return True
        mean = np.mean([ws.h for ws in self.workers], axis=0)
        return bool(np.max(np.abs(mean - self.hbar)) <= tol * max(1.0, np.max(np.abs(self.hbar))))

    # -- the iteration ---------------------------------------------------------

    def step(self) -> StepInfo:
        prob, spec = self.prob, self.spec
        md = spec.definition
        x = self.x

        ests = [
            estimate(ws, spec, x, prob, self.ref, self.hbar) for ws in self.workers
        ]
        self.grad_evals += sum(est.evals for est in ests)

        if md.uses_shift:
            acc = np.zeros(prob.d)
            for ws, est in zip(self.workers, ests):
                acc += update_shift(ws, spec, est.g_hat, est.delta)
            self.hbar = self.hbar + spec.alpha * acc / prob.n

        if md.uses_ref_point:
            shared = None
            if md.shared_refresh_coin:
                shared = bool(self.master_rng.random() < spec.p)
            for ws, est in zip(self.workers, ests):
                _, ev = update_lsvrg_reference(
                    ws, spec, x, prob, shared, est.sampled, est.new_row_grad
                )
                self.grad_evals += ev

        g_mean = np.zeros(prob.d)
        for est in ests:
            g_mean += est.g
        g_mean /= prob.n

        v_list = None
        if md.family == "plain":
            if md.estimator == "dianasr_dq":
                g_mean = quantize(spec.quantizer2, g_mean, self.master_rng)
            v = spec.gamma * g_mean
        elif md.family == "ec":
            v = np.zeros(prob.d)
            v_list = []
            for ws, est in zip(self.workers, ests):
                c_in = ws.e + spec.gamma * est.g
                vi = compress(spec.compressor, c_in)
                ws.e = c_in - vi
                v += vi
                v_list.append(vi)
            v /= prob.n
        else:  # delay
            v = np.zeros(prob.d)
            v_list = []
            for ws, est in zip(self.workers, ests):
                ws.delay_buffer.append(spec.gamma * est.g)
                vi = (
                    ws.delay_buffer.popleft()
                    if self.k >= spec.tau
                    else np.zeros(prob.d)
                )
                v += vi
                v_list.append(vi)
            v /= prob.n

        if self.keep_worker_history:
            self.worker_history.append(
                {
                    "g": [est.g.copy() for est in ests],
                    "v": None if v_list is None else [vi.copy() for vi in v_list],
                }
            )

        self.x = x - v
        if not np.all(np.isfinite(self.x)):
            raise DivergenceError(self.k)
        self.bits_up += self._up_per_iter
        self.bits_down += self._down_per_iter
        self.k += 1
        self.last = StepInfo(g=g_mean, v=v)
        return self.last


# ---------------------------------------------------------------------------
# traces and the run driver
# ---------------------------------------------------------------------------

TRACE_COLUMNS = (
    "k",
    "f_gap",
    "dist2",
    "bits_up",
    "bits_down",
    "grad_evals",
    "sigma1_sq",
    "sigma2_sq",
)


@dataclass
class TraceRow:
    k: int
    f_gap: float
    dist2: float
    bits_up: int
    bits_down: int
    grad_evals: int
    sigma1_sq: float | None = None
    sigma2_sq: float | None = None
    tilde_gap: float | None = None


@dataclass
class RunTrace:
    rows: list[TraceRow]
    config: dict
    problem_info: dict
    final_x: np.ndarray | None = None

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        out = [",".join(TRACE_COLUMNS)]
        for r in self.rows:
            cells = [
                str(r.k),
                repr(float(r.f_gap)),
                repr(float(r.dist2)),
                str(r.bits_up),
                str(r.bits_down),
                str(r.grad_evals),
                "" if r.sigma1_sq is None else repr(float(r.sigma1_sq)),
                "" if r.sigma2_sq is None else repr(float(r.sigma2_sq)),
            ]
            out.append(",".join(cells))
        return "\n".join(out) + "\n"

    def manifest(self) -> dict:
        return {
            "config": self.config,
            "problem": self.problem_info,
            "final": {
                "k": self.final.k,
                "f_gap": self.final.f_gap,
                "grad_evals": self.final.grad_evals,
                "epochs": self.final.grad_evals
                / (self.problem_info["n"] * self.problem_info["m"]),
            },
        }


@dataclass
class RunConfig:
    """Everything needed to reproduce one run on an already-built problem."""

    method: str
    seed: int = 0
    gamma: float | None = None  # None -> 1/L
    alpha: float | None = None  # None -> 1/(omega+1)
    p: float | None = None  # None -> 1/m
    tau: int = 0
    batch: int | None = None
    compressor: str = "identity"
    quantizer: str = "identity"
    quantizer2: str = "identity"
    iterations: int | None = None
    max_epochs: float | None = None
    record_every: int = 1
    sigma_diagnostics: bool = False
    x0_mode: str = "zero"
    target_gap: float | None = None
    float_bits: int = 64
    label: str | None = None

    def __post_init__(self):
        if self.iterations is None and self.max_epochs is None:
            raise ValueError("need iterations or max_epochs")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def resolve_spec(self, prob) -> MethodSpec:
        return resolve_method(
            self.method,
            gamma=self.gamma if self.gamma is not None else 1.0 / prob.L,
            alpha=self.alpha,
            p=self.p,
            tau=self.tau,
            batch=self.batch,
            compressor=self.compressor,
            quantizer=self.quantizer,
            quantizer2=self.quantizer2,
            d=prob.d,
            m=prob.m,
        )

    def resolved_dict(self, spec: MethodSpec) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "gamma": spec.gamma,
            "alpha": spec.alpha,
            "p": spec.p,
            "tau": spec.tau,
            "batch": spec.batch,
            "compressor": str(spec.compressor),
            "quantizer": str(spec.quantizer),
            "quantizer2": str(spec.quantizer2),
            "iterations": self.iterations,
            "max_epochs": self.max_epochs,
            "record_every": self.record_every,
            "sigma_diagnostics": self.sigma_diagnostics,
            "x0_mode": self.x0_mode,
            "target_gap": self.target_gap,
            "float_bits": self.float_bits,
        }


def run(prob, cfg: RunConfig, ref: ReferenceSolution) -> RunTrace:
    """Execute a configured run; fully reproducible from (cfg, problem, seed)."""
    spec = cfg.resolve_spec(prob)
    x0 = initial_point(prob, ref, cfg.x0_mode, cfg.seed)
    sim = Simulation(prob, spec, cfg.seed, ref=ref, x0=x0, float_bits=cfg.float_bits)
    budget = (
        cfg.max_epochs * prob.n * prob.m if cfg.max_epochs is not None else None
    )
    max_iter = cfg.iterations if cfg.iterations is not None else None

    rows: list[TraceRow] = []

    def record():
        f_gap = prob.loss(sim.x) - ref.f_star
        dist2 = float(np.sum((sim.x - ref.x_star) ** 2))
        row = TraceRow(
            k=sim.k,
            f_gap=f_gap,
            dist2=dist2,
            bits_up=sim.bits_up,
            bits_down=sim.bits_down,
            grad_evals=sim.grad_evals,
        )
        if cfg.sigma_diagnostics:
            row.sigma1_sq = sim.sigma1_sq()
            row.sigma2_sq = sim.sigma2_sq()
        if spec.family in ("ec", "delay"):
            xt = sim.perturbed_iterate()
            row.tilde_gap = float(np.sum((xt - ref.x_star) ** 2))
        rows.append(row)
        return f_gap

    record()
    while True:
        if max_iter is not None and sim.k >= max_iter:
            break
        if budget is not None and sim.grad_evals >= budget:
            break
        sim.step()
        at_stride = sim.k % cfg.record_every == 0
        done = (max_iter is not None and sim.k >= max_iter) or (
            budget is not None and sim.grad_evals >= budget
        )
        if at_stride or done:
            f_gap = record()
            if cfg.target_gap is not None and f_gap < cfg.target_gap:
                break

    info = {
        "name": prob.name,
        "n": prob.n,
        "m": prob.m,
        "d": prob.d,
        "mu": prob.mu,
        "L": prob.L,
        "lambda_max": prob.lambda_max,
        "f_star": ref.f_star,
        "ref_grad_norm": ref.achieved_grad_norm,
    }
    return RunTrace(
        rows=rows,
        config=cfg.resolved_dict(spec),
        problem_info=info,
        final_x=sim.x.copy(),
    )


def averaging_weights(eta: float, K: int) -> np.ndarray:
    """Normalized weights w_k = (1 - eta)^{-(k+1)} for k = 0..K (computed
    relative to w_K so large K cannot overflow); uniform when eta = 0."""
    if eta <= 0.0:
        return np.full(K + 1, 1.0 / (K + 1))
    rel = (1.0 - eta) ** (K - np.arange(K + 1))
    return rel / rel.sum()


def weighted_average_iterate(
    iterates, mu: float, gamma: float, rho1: float, rho2: float
) -> np.ndarray:
    """Exponentially weighted average with w_k = (1 - eta)^{-(k+1)},
    eta = min(gamma*mu/2, rho1/4, rho2/4); the plain mean when eta = 0."""
    xs = np.asarray(iterates, dtype=float)
    K = xs.shape[0] - 1
    eta = min(gamma * mu / 2.0, rho1 / 4.0, rho2 / 4.0)
    w = averaging_weights(eta, K)
    return (w[:, None] * xs).sum(axis=0)
