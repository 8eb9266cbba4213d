"""Machine-readable parameter table and theoretical maximum-stepsize calculator.

For each of the 19 method variants this module evaluates

* the parameter row (A', B1', B2', rho1, rho2, C1, C2, G, and for the EC
  family the finite-sum-level constants A, A~, B1, B~1, B2, B~2) at given
  problem constants,
* the method's stated maximum stepsize, taken verbatim from its convergence
  statement,
* the generic family-level bound for comparison, and
* the Lyapunov coefficients M1 = 4 B1'/(3 rho1), M2 = 4 (B2' + 4G/3)/(3 rho2),
  eta = min(gamma*mu/2, rho1/4, rho2/4).

Where a stated M-value disagrees with the generic formula (EC-LSVRG states
M2 = 4/p while the generic gives 8/(3p)) the report carries both and a flag
rather than silently picking one.  The uniform-variance constants (D-terms)
appear in the statements but are not computed here; they depend on unknowable
optimum quantities and only shift the noise floor, not the stepsize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class UnknownMethodError(ValueError):
    pass


class SingularConstraintError(ValueError):
    """A stepsize constraint is undefined at the given constants."""

    def __init__(self, constraint: str):
        super().__init__(f"constraint {constraint} is singular at these constants")
        self.constraint = constraint


@dataclass(frozen=True)
class Constants:
    """Problem and method constants feeding the table.

    Lexp is the expected-smoothness constant; omega/omega2 are the worker and
    master quantizer variances; regime selects the convex vs strongly-convex
    parameter sets where a method states both.
    """

    L: float
    mu: float = 0.0
    Lexp: float | None = None
    delta: float = 1.0
    omega: float = 0.0
    omega2: float = 0.0
    alpha: float = 1.0
    p: float = 1.0
    tau: int = 0
    n: int = 1
    m: int = 1
    regime: str = "convex"  # "convex" | "strongly_convex"

    @property
    def kappa(self) -> float:
        if self.mu <= 0:
            raise SingularConstraintError("kappa = L/mu with mu = 0")
        return self.L / self.mu

    @property
    def lexp(self) -> float:
        if self.Lexp is None:
            raise ValueError("this method needs the expected smoothness constant Lexp")
        return self.Lexp


@dataclass
class AssumptionParams:
    """One row of the parameter table, evaluated numerically.

    The finite-sum-level fields (A, A_tilde, B systems without primes) are
    populated for the EC family only; elsewhere they are None.
    """

    method: str
    A_prime: float
    B1_prime: float = 0.0
    B2_prime: float = 0.0
    rho1: float = 1.0
    rho2: float = 1.0
    C1: float = 0.0
    C2: float = 0.0
    G: float = 0.0
    A: float | None = None
    A_tilde: float | None = None
    B1: float | None = None
    B1_tilde: float | None = None
    B2: float | None = None
    B2_tilde: float | None = None

    def as_dict(self) -> dict:
        keys = (
            "A_prime", "B1_prime", "B2_prime", "rho1", "rho2",
            "C1", "C2", "G", "A", "A_tilde", "B1", "B1_tilde", "B2", "B2_tilde",
        )
        return {"method": self.method, **{k: getattr(self, k) for k in keys}}


@dataclass
class LyapunovCoefficients:
    M1: float
    M2: float
    eta: float


THEORY_METHODS = (
    "ec-sgdsr", "ec-sgd", "ec-gdstar", "ec-sgd-diana", "ec-sgdsr-diana",
    "ec-lsvrg", "ec-lsvrgstar", "ec-lsvrg-diana",
    "d-sgdsr", "d-sgd", "d-qsgd", "d-qsgdstar", "d-sgd-diana",
    "d-lsvrg", "d-qlsvrg", "d-qlsvrgstar", "d-lsvrg-diana",
    "dianasr-dq", "vr-diana",
)

# full-gradient aliases share their parent's table row
_ALIASES = {
    "ec-gd": "ec-sgd",
    "gd": "ec-sgd",
    "sgd": "ec-sgd",
    "ec-gd-diana": "ec-sgd-diana",
    "d-qgdstar": "d-qsgdstar",
    "d-gd-diana": "d-sgd-diana",
    "vr-diana-lsvrg": "vr-diana",
    "vr-diana-saga": "vr-diana",
}

FAMILY = {name: name.split("-")[0] for name in THEORY_METHODS}
FAMILY.update({"dianasr-dq": "plain", "vr-diana": "plain"})


def canonical(method: str) -> str:
    method = method.lower()
    method = _ALIASES.get(method, method)
    if method not in THEORY_METHODS:
        raise UnknownMethodError(f"no theory row for method {method!r}")
    return method


def params_for(method: str, c: Constants) -> AssumptionParams:
    """Evaluate the parameter-table row of a method at the given constants."""
    m = canonical(method)
    L, n = c.L, c.n
    if m == "ec-sgdsr":
        return AssumptionParams(m, A_prime=2 * c.lexp, A=2 * L,
                                A_tilde=3 * (c.lexp + L), B1=0, B1_tilde=0,
                                B2=0, B2_tilde=0)
    if m == "ec-sgd":
        scale = 1.0 if c.regime == "convex" else c.kappa
        return AssumptionParams(m, A_prime=2 * L * scale, A=2 * L * scale,
                                A_tilde=6 * L * scale, B1=0, B1_tilde=0,
                                B2=0, B2_tilde=0)
    if m == "ec-gdstar":
        return AssumptionParams(m, A_prime=L, A=L, A_tilde=0.0, B1=0,
                                B1_tilde=0, B2=0, B2_tilde=0)
    if m == "ec-sgd-diana":
        return AssumptionParams(m, A_prime=L, rho1=c.alpha, C1=L * c.alpha,
                                A=2 * L, A_tilde=0.0, B1=2.0, B1_tilde=0,
                                B2=0, B2_tilde=0)
    if m == "ec-sgdsr-diana":
        return AssumptionParams(m, A_prime=2 * c.lexp, rho1=c.alpha,
                                C1=2 * c.alpha * (3 * c.lexp + 4 * L),
                                A=2 * L, A_tilde=3 * (c.lexp + L), B1=2.0,
                                B1_tilde=0, B2=0, B2_tilde=0)
    if m == "ec-lsvrg":
        return AssumptionParams(m, A_prime=2 * L, B2_prime=2.0, rho2=c.p,
                                C2=L * c.p, A=2 * L, A_tilde=12 * L, B1=0,
                                B1_tilde=0, B2=0, B2_tilde=3.0)
    if m == "ec-lsvrgstar":
        return AssumptionParams(m, A_prime=2 * L, B2_prime=2.0, rho2=c.p,
                                C2=L * c.p, A=L, A_tilde=2 * L, B1=0,
                                B1_tilde=0, B2=0, B2_tilde=2.0)
    if m == "ec-lsvrg-diana":
        return AssumptionParams(m, A_prime=2 * L, B2_prime=2.0, rho1=c.alpha,
                                rho2=c.p, C1=3 * L * c.alpha, C2=L * c.p,
                                G=2.0, A=2 * L, A_tilde=3 * L, B1=2.0,
                                B1_tilde=3.0, B2=0, B2_tilde=3.0)
    if m == "d-sgdsr":
        return AssumptionParams(m, A_prime=2 * c.lexp)
    if m == "d-sgd":
        scale = 1.0 if c.regime == "convex" else c.kappa
        return AssumptionParams(m, A_prime=2 * L * scale)
    if m == "d-qsgd":
        return AssumptionParams(m, A_prime=L * (1 + 2 * c.omega / n))
    if m == "d-qsgdstar":
        return AssumptionParams(m, A_prime=L * (1 + c.omega / n))
    if m == "d-sgd-diana":
        return AssumptionParams(m, A_prime=L * (1 + 2 * c.omega / n),
                                B1_prime=2 * c.omega / n, rho1=c.alpha,
                                C1=L * c.alpha)
    if m == "d-lsvrg":
        return AssumptionParams(m, A_prime=2 * L, B2_prime=2.0, rho2=c.p,
                                C2=L * c.p)
    if m in ("d-qlsvrg", "d-qlsvrgstar"):
        w = 1 + 2 * c.omega / n
        return AssumptionParams(m, A_prime=2 * L * w, B2_prime=2.0 * w,
                                rho2=c.p, C2=L * c.p)
    if m == "d-lsvrg-diana":
        w = 1 + 2 * c.omega / n
        # G = 2 is forced by the stated M2 = 8(7 + 6 omega/n)/(9p)
        return AssumptionParams(m, A_prime=2 * L * w,
                                B1_prime=2 * c.omega / n, B2_prime=2.0 * w,
                                rho1=c.alpha, rho2=c.p, C1=3 * L * c.alpha,
                                C2=L * c.p, G=2.0)
    if m == "dianasr-dq":
        w1, w2 = c.omega, c.omega2
        return AssumptionParams(m,
                                A_prime=c.lexp * (1 + w2) * (2 + 3 * w1 / n),
                                B1_prime=3 * w1 * (1 + w2) / n, rho1=c.alpha,
                                C1=c.alpha * (3 * c.lexp + 4 * L))
    if m == "vr-diana":
        w = c.omega
        return AssumptionParams(m, A_prime=L * (1 + (4 * w + 2) / n),
                                B1_prime=2 * (w + 1) / n, B2_prime=2 * w / n,
                                rho1=c.alpha, rho2=1.0 / c.m,
                                C1=4 * c.alpha * L, C2=L / c.m, G=2.0)
    raise UnknownMethodError(m)


def lyapunov(params: AssumptionParams, gamma: float, mu: float) -> LyapunovCoefficients:
    M1 = 4 * params.B1_prime / (3 * params.rho1)
    M2 = 4 * (params.B2_prime + 4 * params.G / 3.0) / (3 * params.rho2)
    eta = min(gamma * mu / 2.0, params.rho1 / 4.0, params.rho2 / 4.0)
    return LyapunovCoefficients(M1=M1, M2=M2, eta=eta)


# stated-by-the-statement M values that differ from the generic formula
_STATED_M2 = {"ec-lsvrg": lambda c: 4.0 / c.p}


def stated_lyapunov_mismatch(method: str, c: Constants) -> dict | None:
    """Where the per-method statement and the generic M formula disagree,
    return both values; None when they agree."""
    m = canonical(method)
    if m in _STATED_M2:
        params = params_for(m, c)
        generic = lyapunov(params, gamma=0.0, mu=0.0).M2
        stated = _STATED_M2[m](c)
        if not math.isclose(generic, stated, rel_tol=1e-12):
            return {"M2_stated": stated, "M2_generic": generic}
    return None


def _inv(label: str, value: float) -> float:
    """1/value with singularity reporting."""
    if value <= 0:
        raise SingularConstraintError(label)
    return 1.0 / value


def _one_minus(label: str, q: float) -> float:
    if q >= 1.0:
        raise SingularConstraintError(f"1/(1-{label})")
    return 1.0 - q


def max_stepsize(method: str, c: Constants) -> float:
    """The method's stated maximum stepsize, evaluated numerically.

    Delay-family constraints of the form 1/sqrt(tau * ...) are vacuous at
    tau = 0 and drop out of the min; p = 1 or alpha = 1 in a 1/(1-p) or
    1/(1-alpha) term raises SingularConstraintError naming the constraint.
    """
    m = canonical(method)
    L, d_, n = c.L, c.delta, c.n
    if m == "ec-sgdsr":
        lex = c.lexp
        return min(1 / (8 * lex),
                   d_ / (4 * math.sqrt(6 * L * (4 * L + 3 * d_ * (lex + L)))))
    if m == "ec-sgd":
        if c.regime == "convex":
            return d_ / (8 * L * math.sqrt(6 + 9 * d_))
        k = c.kappa
        return min(1 / (8 * k * L), d_ / (8 * L * math.sqrt(3 * k * (2 + 3 * d_))))
    if m == "ec-gdstar":
        return d_ / (8 * L * math.sqrt(3))
    if m == "ec-sgd-diana":
        om = _one_minus("alpha", c.alpha)
        return min(1 / (4 * L),
                   d_ * math.sqrt(om) / (8 * L * math.sqrt(6 * (3 - c.alpha))))
    if m == "ec-sgdsr-diana":
        lex = c.lexp
        om = _one_minus("alpha", c.alpha)
        inner = 4 * L + 3 * d_ * (lex + L) + 16 * (3 * lex + 4 * L) / om
        return min(1 / (4 * lex), d_ / (4 * math.sqrt(6 * L * inner)))
    if m == "ec-lsvrg":
        op = _one_minus("p", c.p)
        return min(1 / (24 * L),
                   d_ / (8 * L * math.sqrt(3 * (2 + 3 * d_ * (2 + 1 / op)))))
    if m == "ec-lsvrgstar":
        op = _one_minus("p", c.p)
        return min(3 / (56 * L),
                   d_ / (8 * L * math.sqrt(3 * (1 + d_ * (1 + 2 / op)))))
    if m == "ec-lsvrg-diana":
        oa = _one_minus("alpha", c.alpha)
        op = _one_minus("p", c.p)
        inner = (4 + 3 * d_ + (2 / oa) * (3 + 4 / op) * (4 + 3 * d_)
                 + 6 * d_ / op)
        return min(9 / (296 * L), d_ / (4 * L * math.sqrt(6 * inner)))
    if m == "d-sgdsr":
        lex = c.lexp
        first = 1 / (8 * lex)
        if c.tau == 0:
            return first
        return min(first, 1 / (8 * math.sqrt(L * c.tau * (L * c.tau + 2 * lex))))
    if m == "d-sgd":
        if c.regime == "convex":
            if c.tau == 0:
                return 1 / (8 * L)  # the generic 1/(4 A') constraint
            return 1 / (8 * L * math.sqrt(2 * c.tau * (c.tau + 2)))
        k = c.kappa
        first = 1 / (8 * k * L)
        if c.tau == 0:
            return first
        return min(first, 1 / (8 * L * math.sqrt(2 * c.tau * (c.tau + 2 * k))))
    if m == "d-qsgd":
        first = 1 / (4 * L * (1 + 2 * c.omega / n))
        if c.tau == 0:
            return first
        return min(first,
                   1 / (8 * L * math.sqrt(2 * c.tau * (c.tau + 1 + 2 * c.omega / n))))
    if m == "d-qsgdstar":
        first = 1 / (4 * L * (1 + c.omega / n))
        if c.tau == 0:
            return first
        return min(first,
                   1 / (8 * L * math.sqrt(c.tau * (c.tau + 1 + c.omega / n))))
    if m == "d-sgd-diana":
        oa = _one_minus("alpha", c.alpha)
        first = 1 / (4 * L * (1 + 14 * c.omega / (3 * n)))
        if c.tau == 0:
            return first
        inner = 2 * c.tau * (1 + c.tau + 2 * c.omega / n + 4 * c.omega / (n * oa))
        return min(first, 1 / (8 * L * math.sqrt(inner)))
    if m == "d-lsvrg":
        op = _one_minus("p", c.p)
        first = 3 / (56 * L)
        if c.tau == 0:
            return first
        return min(first, 1 / (8 * L * math.sqrt(c.tau * (2 + c.tau + 4 / op))))
    if m in ("d-qlsvrg", "d-qlsvrgstar"):
        op = _one_minus("p", c.p)
        w = 1 + 2 * c.omega / n
        first = 3 / (56 * L * w)
        if c.tau == 0:
            return first
        return min(first,
                   1 / (8 * L * math.sqrt(c.tau * (c.tau + 2 * w * (1 + 2 / op)))))
    if m == "d-lsvrg-diana":
        oa = _one_minus("alpha", c.alpha)
        op = _one_minus("p", c.p)
        first = 1 / (8 * L * (37 / 9 + 24 * c.omega / (3 * n)))
        if c.tau == 0:
            return first
        inner = c.tau * (2 + c.tau + 4 / op
                         + (4 * c.omega / n) * (1 + 3 / oa + 2 / op + 4 / (oa * op)))
        return min(first, 1 / (8 * L * math.sqrt(inner)))
    if m == "dianasr-dq":
        lex = c.lexp
        w1, w2 = c.omega, c.omega2
        return 1 / (4 * (1 + w2) * (lex * (2 + 15 * w1 / n) + 16 * L * w1 / n))
    if m == "vr-diana":
        return 3 / (L * (41 / 3 + (52 * c.omega + 35) / n))
    raise UnknownMethodError(m)


def generic_max_stepsize(method: str, c: Constants) -> float:
    """The family-level bound, computed from the parameter row: the Theorem-1
    constraint 1/(4(A' + C1 M1 + C2 M2)) combined with the EC- or
    delay-family lemma condition.  Exposed alongside the stated value for
    comparison; minor constant gaps between the two are expected."""
    m = canonical(method)
    params = params_for(m, c)
    coeffs = lyapunov(params, gamma=0.0, mu=0.0)
    bound = _inv(
        "4(A' + C1*M1 + C2*M2)",
        4 * (params.A_prime + params.C1 * coeffs.M1 + params.C2 * coeffs.M2),
    )
    fam = FAMILY[m]
    if fam == "ec":
        if c.mu > 0:
            bound = min(bound, c.delta / (4 * c.mu))
        r1, r2 = params.rho1, params.rho2
        term1 = 0.0
        if params.C1 or (params.G and params.C2):
            inner = params.C1 / r1
            if params.G and params.C2:
                inner += 2 * params.G * params.C2 / (r2 * _one_minus("rho2", r2))
            term1 = (2 / _one_minus("rho1", r1)) * inner * (
                2 * params.B1 / c.delta + params.B1_tilde
            )
        term2 = 0.0
        if params.C2:
            term2 = (2 * params.C2 * (2 * params.B2 / c.delta + params.B2_tilde)
                     / (r2 * _one_minus("rho2", r2)))
        S = 2 * params.A / c.delta + params.A_tilde + term1 + term2
        bound = min(bound, math.sqrt(c.delta / (96 * c.L * S)))
    elif fam == "d":
        if c.mu > 0 and c.tau > 0:
            bound = min(bound, 1 / (2 * c.tau * c.mu))
        if c.tau > 0:
            r1, r2 = params.rho1, params.rho2
            A_hat = params.A_prime + c.L * c.tau
            S = A_hat
            if params.B1_prime and params.C1:
                S += 2 * params.B1_prime * params.C1 / (r1 * _one_minus("rho1", r1))
            if params.B2_prime and params.C2:
                S += 2 * params.B2_prime * params.C2 / (r2 * _one_minus("rho2", r2))
            if params.B1_prime and params.G and params.C2:
                S += (4 * params.B1_prime * params.G * params.C2
                      / (r2 * _one_minus("rho1", r1) * _one_minus("rho2", r2)))
            bound = min(bound, 1 / (8 * math.sqrt(c.L * c.tau * S)))
    return bound


def stepsize_report(method: str, c: Constants, gamma: float | None = None) -> dict:
    """Full JSON-ready report: table row, stated and generic gamma_max,
    Lyapunov coefficients at gamma, and any stated-vs-generic M flags."""
    m = canonical(method)
    params = params_for(m, c)
    g_max = max_stepsize(m, c)
    g = gamma if gamma is not None else g_max
    coeffs = lyapunov(params, g, c.mu)
    report = {
        "method": m,
        "params": params.as_dict(),
        "gamma_max": g_max,
        "gamma_max_generic": generic_max_stepsize(m, c),
        "gamma": g,
        "lyapunov": {"M1": coeffs.M1, "M2": coeffs.M2, "eta": coeffs.eta},
    }
    mismatch = stated_lyapunov_mismatch(m, c)
    if mismatch is not None:
        report["lyapunov_mismatch"] = mismatch
    return report
