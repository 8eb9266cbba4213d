"""Command-line experiment harness.

Subcommands:

* ``run PLAN``            execute a plan file: one CSV + JSON per run, a
                          manifest, and a convergence figure
* ``preset NAME``         same, for a named figure preset
* ``stepsize METHOD``     print the parameter row and gamma_max as JSON
* ``solve-ref``           solve a problem to high precision and report it
* ``plot CSV...``         render CSV traces into a figure
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from efsgd import theory
from efsgd.engine import RunConfig, run
from efsgd.objectives import solve_reference
from efsgd.plans import (
    ExperimentPlan,
    PRESET_NAMES,
    PlanError,
    ProblemSource,
    load_plan,
    preset,
)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def execute_plan(
    plan: ExperimentPlan,
    out_dir: Path,
    cache_dir: Path | None = None,
    fetch: bool = False,
    figures: bool = True,
    quiet: bool = False,
) -> dict:
    """Run every configuration of a plan; returns the manifest dict.

    The problem instance and its reference solution are built once and shared.
    Output files are written atomically (tmp + rename) per run.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    prob = plan.source.build(cache_dir=cache_dir, fetch=fetch)
    ref = solve_reference(prob, tol=plan.ref_tol)
    star_needed = any("star" in r.method for r in plan.runs)
    if star_needed and not ref.converged:
        raise RuntimeError(
            f"reference solve reached ||grad|| = {ref.achieved_grad_norm:.2e} "
            f"> {plan.ref_tol:.1e}; star methods in this plan cannot run"
        )
    manifest = {
        "plan": plan.name,
        "problem": {
            "name": prob.name,
            "n": prob.n,
            "m": prob.m,
            "d": prob.d,
            "mu": prob.mu,
            "L": prob.L,
            "lambda_max": prob.lambda_max,
            "f_star": ref.f_star,
            "ref_grad_norm": ref.achieved_grad_norm,
            "ref_tol": plan.ref_tol,
        },
        "runs": [],
    }
    csv_paths = []
    for cfg in plan.runs:
        label = cfg.label or f"{cfg.method}-s{cfg.seed}"
        t_run = time.time()
        trace = run(prob, cfg, ref)
        csv_path = out_dir / f"{label}.csv"
        tmp = csv_path.with_suffix(".csv.tmp")
        tmp.write_text(trace.to_csv())
        tmp.rename(csv_path)
        _write_json(out_dir / f"{label}.json", trace.manifest())
        entry = {
            "label": label,
            "csv": csv_path.name,
            "config": trace.config,
            "final_f_gap": trace.final.f_gap,
            "final_epochs": trace.final.grad_evals / (prob.n * prob.m),
            "wall_clock_s": round(time.time() - t_run, 3),
        }
        manifest["runs"].append(entry)
        csv_paths.append((csv_path, label))
        if not quiet:
            print(
                f"  {label:24s} f_gap={trace.final.f_gap:.3e} "
                f"epochs={entry['final_epochs']:.0f} ({entry['wall_clock_s']}s)"
            )
    manifest["wall_clock_s"] = round(time.time() - t0, 3)
    _write_json(out_dir / "manifest.json", manifest)
    if figures:
        from efsgd.figures import render_figure

        for x_axis in ("epochs", "bits_up"):
            render_figure(
                [(p, lbl) for p, lbl in csv_paths],
                out_dir / f"{plan.name}-{x_axis}.png",
                x_axis=x_axis,
                title=plan.name,
            )
    return manifest


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    p.add_argument("--cache-dir", type=Path, default=None, help="dataset cache dir")
    p.add_argument("--fetch", action="store_true", help="allow dataset downloads")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="efsgd", description="compressed/delayed distributed SGD lab"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a plan file")
    p_run.add_argument("plan", type=Path)
    _add_common(p_run)

    p_preset = sub.add_parser("preset", help="execute a named preset")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--workers", type=int, default=None, help="override n")
    _add_common(p_preset)

    p_step = sub.add_parser("stepsize", help="theoretical stepsize report")
    p_step.add_argument("method")
    p_step.add_argument("--L", type=float, required=True)
    p_step.add_argument("--mu", type=float, default=0.0)
    p_step.add_argument("--Lexp", type=float, default=None)
    p_step.add_argument("--delta", type=float, default=1.0)
    p_step.add_argument("--omega", type=float, default=0.0)
    p_step.add_argument("--omega2", type=float, default=0.0)
    p_step.add_argument("--alpha", type=float, default=1.0)
    p_step.add_argument("--p", type=float, default=1.0)
    p_step.add_argument("--tau", type=int, default=0)
    p_step.add_argument("--n", type=int, default=1)
    p_step.add_argument("--m", type=int, default=1)
    p_step.add_argument("--gamma", type=float, default=None)
    p_step.add_argument(
        "--regime", choices=["convex", "strongly_convex"], default="convex"
    )

    p_ref = sub.add_parser("solve-ref", help="high-precision reference solve")
    p_ref.add_argument("--dataset", default=None, help="catalogued dataset name")
    p_ref.add_argument(
        "--synthetic", default=None, metavar="n,m,d,seed",
        help="synthetic instance parameters",
    )
    p_ref.add_argument("--workers", type=int, default=20)
    p_ref.add_argument("--mu", default="rule")
    p_ref.add_argument("--tol", type=float, default=1e-12)
    p_ref.add_argument("--cache-dir", type=Path, default=None)
    p_ref.add_argument("--fetch", action="store_true")

    p_plot = sub.add_parser("plot", help="render trace CSVs to a figure")
    p_plot.add_argument("csvs", nargs="+", type=Path)
    p_plot.add_argument("--labels", default=None, help="comma-separated labels")
    p_plot.add_argument("--x", choices=["epochs", "bits_up", "k"], default="epochs")
    p_plot.add_argument("--out", type=Path, default=Path("figure.png"))
    p_plot.add_argument("--title", default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        plan = load_plan(args.plan)
        print(f"plan {plan.name}: {len(plan.runs)} runs")
        execute_plan(
            plan, args.out, cache_dir=args.cache_dir, fetch=args.fetch,
            figures=not args.no_figures,
        )
        return 0

    if args.command == "preset":
        plan = preset(args.name, workers=args.workers)
        print(f"preset {plan.name}: {len(plan.runs)} runs")
        execute_plan(
            plan, args.out, cache_dir=args.cache_dir, fetch=args.fetch,
            figures=not args.no_figures,
        )
        return 0

    if args.command == "stepsize":
        consts = theory.Constants(
            L=args.L, mu=args.mu, Lexp=args.Lexp, delta=args.delta,
            omega=args.omega, omega2=args.omega2, alpha=args.alpha, p=args.p,
            tau=args.tau, n=args.n, m=args.m, regime=args.regime,
        )
        print(json.dumps(theory.stepsize_report(args.method, consts, args.gamma), indent=2))
        return 0

    if args.command == "solve-ref":
        if (args.dataset is None) == (args.synthetic is None):
            parser.error("need exactly one of --dataset / --synthetic")
        mu = args.mu if args.mu == "rule" else float(args.mu)
        if args.synthetic:
            n, m, d, seed = (int(v) for v in args.synthetic.split(","))
            source = ProblemSource(kind="synthetic", n=n, m=m, d=d, instance_seed=seed, mu=mu)
        else:
            source = ProblemSource(kind="dataset", dataset=args.dataset, n=args.workers, mu=mu)
        prob = source.build(cache_dir=args.cache_dir, fetch=args.fetch)
        t0 = time.time()
        ref = solve_reference(prob, tol=args.tol)
        print(json.dumps({
            "problem": prob.name,
            "n": prob.n, "m": prob.m, "d": prob.d,
            "mu": prob.mu, "L": prob.L, "lambda_max": prob.lambda_max,
            "f_star": ref.f_star,
            "grad_norm": ref.achieved_grad_norm,
            "iterations": ref.iterations,
            "converged": ref.converged,
            "wall_clock_s": round(time.time() - t0, 3),
        }, indent=2))
        return 0 if ref.converged else 1

    if args.command == "plot":
        from efsgd.figures import render_figure

        labels = (
            args.labels.split(",") if args.labels
            else [p.stem for p in args.csvs]
        )
        if len(labels) != len(args.csvs):
            parser.error("--labels count must match the number of CSVs")
        render_figure(
            list(zip(args.csvs, labels)), args.out, x_axis=args.x, title=args.title
        )
        print(f"wrote {args.out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
