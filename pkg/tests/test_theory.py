"""Parameter table and stepsize calculator against hand-evaluated values."""

import math

import numpy as np
import pytest

from efsgd.theory import (
    Constants,
    SingularConstraintError,
    THEORY_METHODS,
    UnknownMethodError,
    generic_max_stepsize,
    lyapunov,
    max_stepsize,
    params_for,
    stated_lyapunov_mismatch,
    stepsize_report,
)


BASE = Constants(
    L=1.0, mu=0.01, Lexp=4.0, delta=0.25, omega=3.0, omega2=1.0,
    alpha=0.2, p=0.1, tau=2, n=10, m=20,
)


# ---------------------------------------------------------------------------
# table rows
# ---------------------------------------------------------------------------

def test_row_ec_gdstar():
    row = params_for("ec-gdstar", BASE)
    assert row.A_prime == 1.0
    assert row.B1_prime == row.B2_prime == row.C1 == row.C2 == 0.0
    assert row.rho1 == row.rho2 == 1.0


def test_row_ec_lsvrg():
    row = params_for("ec-lsvrg", BASE)
    assert row.A_prime == 2.0
    assert row.B2_prime == 2.0
    assert row.rho2 == BASE.p
    assert row.C2 == BASE.L * BASE.p


def test_row_d_sgd_diana():
    row = params_for("d-sgd-diana", BASE)
    assert row.B1_prime == pytest.approx(2 * BASE.omega / BASE.n)
    assert row.C1 == pytest.approx(BASE.L * BASE.alpha)
    assert row.rho1 == BASE.alpha


def test_row_vr_diana():
    row = params_for("vr-diana", BASE)
    assert row.A_prime == pytest.approx(1 + (4 * 3.0 + 2) / 10)
    assert row.B1_prime == pytest.approx(2 * 4 / 10)
    assert row.B2_prime == pytest.approx(2 * 3 / 10)
    assert row.rho2 == pytest.approx(1 / 20)
    assert row.G == 2.0


def test_footnote_convention_rho_one_zeroes_families():
    for name in THEORY_METHODS:
        row = params_for(name, BASE)
        if row.rho1 == 1.0:
            assert row.B1_prime == 0.0 and row.C1 == 0.0 and row.G == 0.0
        if row.rho2 == 1.0:
            assert row.B2_prime == 0.0 and row.C2 == 0.0


def test_aliases_share_rows():
    a = params_for("ec-gd-diana", BASE)
    b = params_for("ec-sgd-diana", BASE)
    assert a.as_dict() == b.as_dict()
    assert params_for("d-qgdstar", BASE).as_dict() == params_for("d-qsgdstar", BASE).as_dict()


def test_unknown_method():
    with pytest.raises(UnknownMethodError):
        params_for("ec-madeup", BASE)


# ---------------------------------------------------------------------------
# stepsize spot checks (hand-evaluated from the stated formulas)
# ---------------------------------------------------------------------------

def test_stepsize_ec_gdstar():
    c = Constants(L=1.0, delta=1.0)
    assert max_stepsize("ec-gdstar", c) == pytest.approx(1 / (8 * math.sqrt(3)), abs=1e-12)


def test_stepsize_d_sgd_tau2():
    c = Constants(L=1.0, tau=2)
    assert max_stepsize("d-sgd", c) == pytest.approx(1.0 / 32.0, abs=1e-12)


def test_stepsize_ec_sgd_diana():
    c = Constants(L=1.0, delta=1.0, alpha=0.5)
    expected = min(0.25, math.sqrt(0.5) / (8 * math.sqrt(6 * 2.5)))
    assert max_stepsize("ec-sgd-diana", c) == pytest.approx(expected, abs=1e-12)


def test_stepsize_positive_everywhere():
    for name in THEORY_METHODS:
        g = max_stepsize(name, BASE)
        assert np.isfinite(g) and g > 0.0, name


def test_stepsize_monotone_in_L_tau_omega():
    for name in THEORY_METHODS:
        prev = None
        for L in (0.5, 1.0, 2.0, 8.0):
            g = max_stepsize(name, Constants(
                L=L, mu=0.01, Lexp=4 * L, delta=0.25, omega=3.0, omega2=1.0,
                alpha=0.2, p=0.1, tau=2, n=10, m=20))
            if prev is not None:
                assert g <= prev + 1e-15, (name, "L")
            prev = g
        prev = None
        for tau in (0, 1, 2, 5, 17):
            g = max_stepsize(name, Constants(
                L=1.0, mu=0.01, Lexp=4.0, delta=0.25, omega=3.0, omega2=1.0,
                alpha=0.2, p=0.1, tau=tau, n=10, m=20))
            if prev is not None:
                assert g <= prev + 1e-15, (name, "tau")
            prev = g
        prev = None
        for omega in (0.0, 1.0, 4.0, 16.0):
            # alpha held fixed at a value feasible for the whole omega grid
            g = max_stepsize(name, Constants(
                L=1.0, mu=0.01, Lexp=4.0, delta=0.25, omega=omega, omega2=omega,
                alpha=1.0 / 17.0, p=0.1, tau=2, n=10, m=20))
            if prev is not None:
                assert g <= prev + 1e-15, (name, "omega")
            prev = g


def test_identity_operators_never_hurt():
    ident = Constants(L=1.0, mu=0.01, Lexp=4.0, delta=1.0, omega=0.0,
                      omega2=0.0, alpha=0.2, p=0.1, tau=2, n=10, m=20)
    for name in THEORY_METHODS:
        assert max_stepsize(name, ident) >= max_stepsize(name, BASE) - 1e-15, name


def test_singular_constraints_reported():
    with pytest.raises(SingularConstraintError) as exc:
        max_stepsize("ec-lsvrg", Constants(L=1.0, delta=0.5, p=1.0))
    assert "p" in str(exc.value)
    with pytest.raises(SingularConstraintError):
        max_stepsize("ec-sgd-diana", Constants(L=1.0, delta=0.5, alpha=1.0))


def test_strongly_convex_regime_branches():
    cvx = Constants(L=1.0, mu=0.1, delta=0.5, regime="convex")
    sc = Constants(L=1.0, mu=0.1, delta=0.5, regime="strongly_convex")
    assert max_stepsize("ec-sgd", sc) < max_stepsize("ec-sgd", cvx)
    assert params_for("ec-sgd", sc).A_prime == pytest.approx(2 * 10.0)
    assert max_stepsize("d-sgd", sc) < max_stepsize("d-sgd", Constants(L=1.0, tau=0))


# ---------------------------------------------------------------------------
# Lyapunov coefficients
# ---------------------------------------------------------------------------

def test_lyapunov_zero_when_no_variance_terms():
    row = params_for("ec-gdstar", BASE)
    co = lyapunov(row, gamma=0.1, mu=1.0)
    assert co.M1 == 0.0 and co.M2 == 0.0


def test_eta_saturates_at_quarter():
    row = params_for("ec-gdstar", BASE)  # rho1 = rho2 = 1
    co = lyapunov(row, gamma=100.0, mu=1.0)
    assert co.eta == 0.25


def test_ec_lsvrg_m2_mismatch_flagged():
    c = Constants(L=1.0, delta=0.5, p=1 / 20)
    row = params_for("ec-lsvrg", c)
    co = lyapunov(row, gamma=0.01, mu=0.0)
    # generic formula: 4 * 2 / (3p)
    assert co.M2 == pytest.approx(8.0 / (3.0 * c.p))
    flag = stated_lyapunov_mismatch("ec-lsvrg", c)
    assert flag is not None
    assert flag["M2_stated"] == pytest.approx(4.0 / c.p)
    assert flag["M2_generic"] == pytest.approx(8.0 / (3.0 * c.p))


def test_vr_diana_m_values_match_statement():
    c = Constants(L=1.0, omega=3.0, alpha=0.25, n=10, m=20)
    co = lyapunov(params_for("vr-diana", c), gamma=0.01, mu=0.0)
    assert co.M1 == pytest.approx(8 * (c.omega + 1) / (3 * c.n * c.alpha))
    assert co.M2 == pytest.approx(8 * c.omega * c.m / (3 * c.n) + 32 * c.m / 9)
    assert stated_lyapunov_mismatch("vr-diana", c) is None


# ---------------------------------------------------------------------------
# generic family bounds
# ---------------------------------------------------------------------------

def test_generic_bound_positive_and_finite():
    for name in THEORY_METHODS:
        g = generic_max_stepsize(name, BASE)
        assert np.isfinite(g) and g > 0.0, name


def test_plain_family_generic_is_theorem1_constraint():
    c = Constants(L=1.0, mu=0.0, Lexp=4.0, omega=3.0, omega2=1.0, alpha=0.2,
                  n=10, m=20)
    row = params_for("dianasr-dq", c)
    co = lyapunov(row, 0.0, 0.0)
    expected = 1.0 / (4 * (row.A_prime + row.C1 * co.M1 + row.C2 * co.M2))
    assert generic_max_stepsize("dianasr-dq", c) == pytest.approx(expected)


def test_stepsize_report_shape():
    rep = stepsize_report("ec-lsvrg", Constants(L=2.0, mu=0.01, delta=0.2, p=0.05))
    assert rep["method"] == "ec-lsvrg"
    assert rep["gamma_max"] > 0
    assert rep["gamma_max_generic"] > 0
    assert "lyapunov_mismatch" in rep
    assert set(rep["lyapunov"]) == {"M1", "M2", "eta"}
