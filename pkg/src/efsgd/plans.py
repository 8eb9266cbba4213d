"""Experiment plans: flat key-value plan files and the figure presets.

A plan is one problem instance plus a list of runs sharing it (and sharing
one reference solve).  Plan files are a flat, diffable text format::

    # comment
    problem = synthetic        # or a dataset name: a9a, mushrooms, ...
    n = 20
    m = 50                     # synthetic only
    d = 20                     # synthetic only
    instance_seed = 1
    mu = rule                  # the 1e-4 * lambda_max/(4N) rule, or a number
    epochs = 500
    seeds = 0,1,2
    gamma = auto               # 1/L
    record_every = 20

    [run]
    method = ec-sgd
    compressor = topk:1

    [run]
    method = ec-lsvrg-diana
    compressor = topk:1
    quantizer = dither:l2

Global keys give defaults; each [run] block overrides them for one method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from efsgd.engine import RunConfig
from efsgd.objectives import (
    LogisticProblem,
    build_problem_from_dataset,
    make_synthetic_problem,
)


class PlanError(ValueError):
    pass


SYNTHETIC_DEFAULTS = dict(n=20, m=50, d=20, seed=1, label_flip=0.1)


def synthetic_instance(
    n: int | None = None,
    m: int | None = None,
    d: int | None = None,
    seed: int | None = None,
    mu="rule",
    label_flip: float | None = None,
) -> LogisticProblem:
    """The built-in seeded synthetic instance (defaults n=20, m=50, d=20)."""
    cfg = dict(SYNTHETIC_DEFAULTS)
    if n is not None:
        cfg["n"] = n
    if m is not None:
        cfg["m"] = m
    if d is not None:
        cfg["d"] = d
    if seed is not None:
        cfg["seed"] = seed
    if label_flip is not None:
        cfg["label_flip"] = label_flip
    return make_synthetic_problem(
        n=cfg["n"], m=cfg["m"], d=cfg["d"], mu=mu, seed=cfg["seed"],
        label_flip=cfg["label_flip"],
    )


@dataclass
class ProblemSource:
    kind: str  # "synthetic" | "dataset"
    n: int = 20
    m: int = 50
    d: int = 20
    instance_seed: int = 1
    mu: object = "rule"
    dataset: str = ""
    label_flip: float = SYNTHETIC_DEFAULTS["label_flip"]

    def build(self, cache_dir: Path | None = None, fetch: bool = False) -> LogisticProblem:
        if self.kind == "synthetic":
            return synthetic_instance(
                self.n, self.m, self.d, self.instance_seed, self.mu, self.label_flip
            )
        from efsgd.datasets import load_dataset

        ds, target_rows = load_dataset(self.dataset, cache_dir=cache_dir, fetch=fetch)
        return build_problem_from_dataset(
            ds, self.n, mu=self.mu, seed=self.instance_seed, target_rows=target_rows
        )


@dataclass
class ExperimentPlan:
    """Runs sharing one problem instance and one reference solution."""

    name: str
    source: ProblemSource
    runs: list[RunConfig]
    ref_tol: float = 1e-12

    def labels(self) -> list[str]:
        return [r.label for r in self.runs]


_GLOBAL_KEYS = {
    "problem", "n", "m", "d", "instance_seed", "mu", "seeds", "epochs",
    "iterations", "gamma", "record_every", "x0", "sigma_diagnostics",
    "target_gap", "ref_tol", "label_flip", "name",
}
_RUN_KEYS = {
    "method", "gamma", "alpha", "p", "tau", "batch", "compressor",
    "quantizer", "quantizer2", "epochs", "iterations", "record_every",
    "seeds", "x0", "sigma_diagnostics", "target_gap", "label",
}


def _parse_kv_blocks(text: str):
    globals_: dict[str, str] = {}
    blocks: list[dict[str, str]] = []
    current = globals_
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[run]":
            current = {}
            blocks.append(current)
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PlanError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = key.strip(), value.strip()
        allowed = _GLOBAL_KEYS if current is globals_ else _RUN_KEYS
        if key not in allowed:
            raise PlanError(f"line {lineno}: unknown key {key!r}")
        current[key] = value
    if not blocks:
        raise PlanError("plan has no [run] blocks")
    return globals_, blocks


def _num(value: str):
    try:
        return int(value)
    except ValueError:
        return float(value)


def parse_plan(text: str, name: str = "plan") -> ExperimentPlan:
    g, blocks = _parse_kv_blocks(text)
    problem = g.get("problem", "synthetic")
    if problem == "synthetic":
        source = ProblemSource(
            kind="synthetic",
            n=int(g.get("n", SYNTHETIC_DEFAULTS["n"])),
            m=int(g.get("m", SYNTHETIC_DEFAULTS["m"])),
            d=int(g.get("d", SYNTHETIC_DEFAULTS["d"])),
            instance_seed=int(g.get("instance_seed", SYNTHETIC_DEFAULTS["seed"])),
            mu=g.get("mu", "rule") if g.get("mu", "rule") == "rule" else float(g["mu"]),
            label_flip=float(g.get("label_flip", SYNTHETIC_DEFAULTS["label_flip"])),
        )
    else:
        source = ProblemSource(
            kind="dataset",
            dataset=problem,
            n=int(g.get("n", 20)),
            instance_seed=int(g.get("instance_seed", 1)),
            mu=g.get("mu", "rule") if g.get("mu", "rule") == "rule" else float(g["mu"]),
        )

    runs: list[RunConfig] = []
    for idx, block in enumerate(blocks):
        merged = {**g, **block}
        if "method" not in merged:
            raise PlanError(f"[run] block {idx + 1} is missing 'method'")
        seeds = [int(s) for s in str(merged.get("seeds", "0")).split(",") if s != ""]
        gamma_s = merged.get("gamma", "auto")
        gamma = None if gamma_s in ("auto", "1/L") else float(gamma_s)
        epochs = merged.get("epochs")
        iterations = merged.get("iterations")
        for seed in seeds:
            label = merged.get("label", merged["method"])
            runs.append(
                RunConfig(
                    method=merged["method"],
                    seed=seed,
                    gamma=gamma,
                    alpha=float(merged["alpha"]) if "alpha" in merged else None,
                    p=float(merged["p"]) if "p" in merged else None,
                    tau=int(merged.get("tau", 0)),
                    batch=int(merged["batch"]) if "batch" in merged else None,
                    compressor=merged.get("compressor", "identity"),
                    quantizer=merged.get("quantizer", "identity"),
                    quantizer2=merged.get("quantizer2", "identity"),
                    iterations=int(iterations) if iterations else None,
                    max_epochs=float(epochs) if epochs else None,
                    record_every=int(merged.get("record_every", 1)),
                    sigma_diagnostics=str(merged.get("sigma_diagnostics", "false")).lower()
                    in ("1", "true", "yes"),
                    x0_mode=merged.get("x0", "zero"),
                    target_gap=float(merged["target_gap"]) if "target_gap" in merged else None,
                    label=f"{label}-s{seed}" if len(seeds) > 1 else label,
                )
            )
    return ExperimentPlan(
        name=g.get("name", name),
        source=source,
        runs=runs,
        ref_tol=float(g.get("ref_tol", 1e-12)),
    )


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    return parse_plan(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# presets reproducing the experimental protocol
# ---------------------------------------------------------------------------

def topk_size(d: int) -> int:
    """TopK keeps max(1, ceil(d/100)) coordinates."""
    return max(1, math.ceil(d / 100))


FIG1_METHODS = ("ec-sgd", "ec-sgd-diana", "ec-lsvrg", "ec-lsvrg-diana")
FIG2_METHODS = ("ec-gd", "ec-gdstar", "ec-gd-diana")
DIANA_QUANTIZER = "dither:l2"


def preset(name: str, workers: int | None = None) -> ExperimentPlan:
    """Named experiment presets: fig1-synthetic, fig2-synthetic,
    fig1-<dataset>, fig2-<dataset> for the catalogued datasets.

    Protocol: gamma = 1/L, mu by the 1e-4 rule, batch 1, uniform sampling,
    p = 1/m, alpha = 1/(omega+1), TopK(max(1, ceil(d/100))).  Budgets are in
    epochs and chosen at desk scale (the qualitative orderings, not wall-time
    parity with the original figures, are the target).
    """
    from efsgd.datasets import DATASETS

    kind, sep, target = name.partition("-")
    if kind not in ("fig1", "fig2") or not sep:
        raise PlanError(f"unknown preset {name!r}")
    if target == "synthetic":
        src = ProblemSource(kind="synthetic", **{
            "n": workers or SYNTHETIC_DEFAULTS["n"],
            "m": SYNTHETIC_DEFAULTS["m"],
            "d": SYNTHETIC_DEFAULTS["d"],
            "instance_seed": SYNTHETIC_DEFAULTS["seed"],
        })
        d = src.d
        epochs = 400.0 if kind == "fig1" else 3000.0
        seeds = [0, 1, 2, 3, 4] if kind == "fig1" else [0]
        record_every = 50 if kind == "fig1" else 5
    elif target in DATASETS:
        src = ProblemSource(kind="dataset", dataset=target, n=workers or 20)
        d = DATASETS[target].d
        epochs = 30.0 if kind == "fig1" else 300.0
        seeds = [0, 1, 2] if kind == "fig1" else [0]
        record_every = 200 if kind == "fig1" else 2
    else:
        raise PlanError(f"unknown preset target {target!r}")

    comp = f"topk:{topk_size(d)}"
    methods = FIG1_METHODS if kind == "fig1" else FIG2_METHODS
    runs = []
    for method in methods:
        needs_q = "diana" in method
        for seed in seeds:
            runs.append(
                RunConfig(
                    method=method,
                    seed=seed,
                    compressor=comp,
                    quantizer=DIANA_QUANTIZER if needs_q else "identity",
                    max_epochs=epochs,
                    record_every=record_every,
                    label=f"{method}-s{seed}" if len(seeds) > 1 else method,
                )
            )
    return ExperimentPlan(name=name, source=src, runs=runs)


PRESET_NAMES = tuple(
    [f"{kind}-synthetic" for kind in ("fig1", "fig2")]
    + [
        f"{kind}-{ds}"
        for kind in ("fig1", "fig2")
        for ds in ("a9a", "w8a", "gisette", "mushrooms", "madelon", "phishing")
    ]
)
