"""Method registry: the 19 supported variants plus full-gradient aliases.

A method is (transmission family) x (gradient estimator):

* family "plain"  -- v_i = gamma * g_i (no error state);
* family "ec"     -- v_i = C(e_i + gamma * g_i), error fed back;
* family "delay"  -- v_i = gamma * g_i^{k - tau} from a stale buffer.

Full-gradient variants (ec-gd, ec-gd-diana, d-qgdstar, d-gd-diana, gd) are the
same estimators with batch = m and share their parent's theory row.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from efsgd.compressors import (
    ContractiveCompressor,
    IDENTITY_COMPRESSOR,
    IDENTITY_QUANTIZER,
    OperatorConfigError,
    UnbiasedQuantizer,
    parse_operator,
)


@dataclass(frozen=True)
class MethodDef:
    name: str
    family: str  # "plain" | "ec" | "delay"
    estimator: str
    theory_key: str
    uses_shift: bool = False
    uses_ref_point: bool = False
    needs_star: bool = False
    quantized_estimator: bool = False  # Q draw is part of g_i itself
    full_grad: bool = False
    saga: bool = False
    shared_refresh_coin: bool = False  # VR variant 1: one coin for all workers


def _d(name, family, estimator, theory_key=None, **kw) -> MethodDef:
    return MethodDef(name, family, estimator, theory_key or name, **kw)


_DEFS = [
    _d("sgd", "plain", "sgd", theory_key="ec-sgd"),
    _d("gd", "plain", "sgd", theory_key="ec-sgd", full_grad=True),
    _d("ec-sgd", "ec", "sgd"),
    _d("ec-gd", "ec", "sgd", theory_key="ec-sgd", full_grad=True),
    _d("ec-sgdsr", "ec", "sgd"),
    _d("ec-gdstar", "ec", "gdstar", needs_star=True, full_grad=True),
    _d("ec-sgd-diana", "ec", "sgd_diana", uses_shift=True),
    _d("ec-gd-diana", "ec", "sgd_diana", theory_key="ec-sgd-diana",
       uses_shift=True, full_grad=True),
    _d("ec-sgdsr-diana", "ec", "sgd_diana", uses_shift=True),
    _d("ec-lsvrg", "ec", "lsvrg", uses_ref_point=True),
    _d("ec-lsvrgstar", "ec", "lsvrg_star", uses_ref_point=True, needs_star=True),
    _d("ec-lsvrg-diana", "ec", "lsvrg_diana", uses_shift=True, uses_ref_point=True),
    _d("dianasr-dq", "plain", "dianasr_dq", uses_shift=True,
       quantized_estimator=True),
    _d("vr-diana-lsvrg", "plain", "vr_diana", theory_key="vr-diana",
       uses_shift=True, uses_ref_point=True, quantized_estimator=True,
       shared_refresh_coin=True),
    _d("vr-diana-saga", "plain", "vr_diana", theory_key="vr-diana",
       uses_shift=True, uses_ref_point=True, quantized_estimator=True, saga=True),
    _d("d-sgd", "delay", "sgd"),
    _d("d-sgdsr", "delay", "sgd"),
    _d("d-qsgd", "delay", "qsgd", quantized_estimator=True),
    _d("d-qsgdstar", "delay", "qsgd_star", needs_star=True,
       quantized_estimator=True),
    _d("d-qgdstar", "delay", "qsgd_star", theory_key="d-qsgdstar",
       needs_star=True, quantized_estimator=True, full_grad=True),
    _d("d-sgd-diana", "delay", "diana_q", uses_shift=True,
       quantized_estimator=True),
    _d("d-gd-diana", "delay", "diana_q", theory_key="d-sgd-diana",
       uses_shift=True, quantized_estimator=True, full_grad=True),
    _d("d-lsvrg", "delay", "lsvrg", uses_ref_point=True),
    _d("d-qlsvrg", "delay", "qlsvrg", uses_ref_point=True,
       quantized_estimator=True),
    _d("d-qlsvrgstar", "delay", "qlsvrg_star", uses_ref_point=True,
       needs_star=True, quantized_estimator=True),
    _d("d-lsvrg-diana", "delay", "lsvrg_diana_q", uses_shift=True,
       uses_ref_point=True, quantized_estimator=True),
]

REGISTRY: dict[str, MethodDef] = {m.name: m for m in _DEFS}


def method_names() -> list[str]:
    return sorted(REGISTRY)


class MethodConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """A method variant with its resolved hyperparameters."""

    definition: MethodDef
    gamma: float
    alpha: float = 1.0  # shift stepsize, DIANA only
    p: float = 0.0  # reference refresh probability, LSVRG only
    tau: int = 0  # delay, D family only
    batch: int = 1
    compressor: ContractiveCompressor = IDENTITY_COMPRESSOR
    quantizer: UnbiasedQuantizer = IDENTITY_QUANTIZER  # worker-side Q
    quantizer2: UnbiasedQuantizer = IDENTITY_QUANTIZER  # master-side Q2

    @property
    def name(self) -> str:
        return self.definition.name

    @property
    def family(self) -> str:
        return self.definition.family

    @property
    def estimator(self) -> str:
        return self.definition.estimator

    def validate(self, d: int, m: int) -> None:
        md = self.definition
        if self.gamma <= 0:
            raise MethodConfigError("gamma must be positive")
        if md.family == "delay" and self.tau < 0:
            raise MethodConfigError("tau must be >= 0")
        if md.family != "delay" and self.tau != 0:
            raise MethodConfigError(f"{md.name} does not take a delay")
        if md.family != "ec" and self.compressor.kind != "identity":
            raise MethodConfigError(f"{md.name} does not take a compressor")
        if self.batch < 1 or self.batch > m:
            raise MethodConfigError(f"batch must be in [1, m={m}]")
        if md.uses_ref_point and not md.saga and not 0.0 <= self.p <= 1.0:
            raise MethodConfigError("refresh probability p must be in [0, 1]")
        self.compressor.delta(d)  # raises when k > d
        if md.uses_shift:
            omega = self.quantizer.omega(d)
            if not 0.0 < self.alpha <= 1.0 / (omega + 1.0) + 1e-12:
                raise MethodConfigError(
                    f"alpha={self.alpha} violates alpha <= 1/(omega+1) = "
                    f"{1.0 / (omega + 1.0):.6g} for {self.quantizer}"
                )


def resolve_method(
    name: str,
    gamma: float,
    *,
    alpha: float | None = None,
    p: float | None = None,
    tau: int = 0,
    batch: int | None = None,
    compressor: str | ContractiveCompressor = "identity",
    quantizer: str | UnbiasedQuantizer = "identity",
    quantizer2: str | UnbiasedQuantizer = "identity",
    d: int | None = None,
    m: int | None = None,
) -> MethodSpec:
    """Build a validated MethodSpec from a config-string method name.

    Defaults follow the experimental protocol: p = 1/m for LSVRG-style
    reference points, alpha = 1/(omega+1) for DIANA shifts, batch = m for
    full-gradient variants.  Passing d and m validates against the problem.
    """
    if name not in REGISTRY:
        raise MethodConfigError(f"unknown method {name!r}")
    md = REGISTRY[name]

    def _op(v, want_quant):
        if isinstance(v, str):
            v = parse_operator(v)
        if want_quant and isinstance(v, ContractiveCompressor):
            if v.kind != "identity":
                raise MethodConfigError(f"{v} is not an unbiased quantizer")
            return IDENTITY_QUANTIZER
        if not want_quant and isinstance(v, UnbiasedQuantizer):
            if v.kind != "identity":
                raise MethodConfigError(f"{v} is not a contractive compressor")
            return IDENTITY_COMPRESSOR
        return v

    comp = _op(compressor, want_quant=False)
    q1 = _op(quantizer, want_quant=True)
    q2 = _op(quantizer2, want_quant=True)

    if md.full_grad:
        if m is None:
            raise MethodConfigError(f"{name} is a full-gradient method; need m")
        batch = m
    elif batch is None:
        batch = 1

    if md.uses_shift:
        if alpha is None:
            if d is None:
                raise MethodConfigError("need d to default alpha = 1/(omega+1)")
            alpha = 1.0 / (q1.omega(d) + 1.0)
    else:
        alpha = 1.0

    if md.uses_ref_point and not md.saga:
        if p is None:
            if m is None:
                raise MethodConfigError("need m to default p = 1/m")
            p = 1.0 / m
    else:
        p = 0.0

    spec = MethodSpec(
        definition=md,
        gamma=gamma,
        alpha=float(alpha),
        p=float(p),
        tau=int(tau),
        batch=int(batch),
        compressor=comp,
        quantizer=q1,
        quantizer2=q2,
    )
    if d is not None and m is not None:
        spec.validate(d, m)
    return spec


def with_gamma(spec: MethodSpec, gamma: float) -> MethodSpec:
    return replace(spec, gamma=gamma)
