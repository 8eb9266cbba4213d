import re

import numpy as np
import pytest

from efsgd.objectives import make_synthetic_problem, solve_reference

_CRITERION_TITLES = {
    1: "operator contracts",
    2: "reduction equivalences",
    3: "perturbed-iterate identity",
    4: "exact convergence of linearly convergent methods",
    5: "noise-floor ordering",
    6: "gradient correctness",
    7: "stepsize-formula spot checks",
    8: "estimator unbiasedness",
    9: "determinism",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    pattern = re.compile(r"test_criterion_(\d+)")
    seen = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = pattern.search(getattr(rep, "nodeid", ""))
            if m:
                seen[int(m.group(1))] = "PASS" if outcome == "passed" else "FAIL"
    if seen:
        terminalreporter.section("acceptance criteria")
        for num in sorted(seen):
            title = _CRITERION_TITLES.get(num, "")
            terminalreporter.write_line(f"criterion {num:2d} [{title}]: {seen[num]}")


class QuadraticProblem:
    """Test double with the same surface as LogisticProblem.

    f_ij(x) = 0.5 ||x - c_ij||^2, so f is 1-smooth, 1-strongly convex and the
    optimum is the mean of the centers.  Lets trivial engine/solver examples
    (pure gradient steps, closed-form optima) run without touching data.
    """

    def __init__(self, centers: np.ndarray, name: str = "quadratic"):
        self.centers = np.asarray(centers, dtype=float)  # (n, m, d)
        self.n, self.m, self.d = self.centers.shape
        self.mu = 1.0
        self.L = 1.0
        self.lambda_max = 1.0
        self.L_max_component = 1.0
        self.name = name
        self._mean = self.centers.reshape(-1, self.d).mean(axis=0)

    def loss(self, x):
        diffs = x[None, None, :] - self.centers
        return float(0.5 * np.mean(np.sum(diffs**2, axis=-1)))

    def grad_full(self, x):
        return x - self._mean

    def grad_worker(self, i, x):
        return x - self.centers[i].mean(axis=0)

    def grad_component(self, i, j, x):
        return x - self.centers[i, j]

    def component_grad_diff(self, i, j, x, w):
        return x - w

    def grad_batch(self, i, idx, x):
        return x - self.centers[i][idx].mean(axis=0)

    def component_grads(self, i, x):
        return x[None, :] - self.centers[i]

    def expected_smoothness_bound(self):
        return 1.0


def make_quadratic(n=2, m=3, d=4, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    return QuadraticProblem(spread * rng.standard_normal((n, m, d)))


@pytest.fixture(scope="session")
def quad_factory():
    return make_quadratic


@pytest.fixture(scope="session")
def small_problem():
    """Tiny well-conditioned logistic instance shared across test modules."""
    return make_synthetic_problem(n=4, m=6, d=5, mu=0.1, seed=3)


@pytest.fixture(scope="session")
def small_reference(small_problem):
    return solve_reference(small_problem, tol=1e-12)


@pytest.fixture(scope="session")
def desk_problem():
    """The seeded synthetic instance of the experimental protocol."""
    from efsgd.plans import synthetic_instance

    return synthetic_instance()


@pytest.fixture(scope="session")
def desk_reference(desk_problem):
    return solve_reference(desk_problem, tol=1e-13)
