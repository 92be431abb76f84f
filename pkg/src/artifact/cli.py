"""Command-line front end.

Every run is driven by a single ``--seed``; sub-seeds are derived from it with
``numpy.random.SeedSequence`` spawn keys, so identical arguments give
byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytic, annealing, glauber, instances, ising_exact, reduction

SUBCOMMANDS = ("analytic", "gen-instance", "exact", "glauber", "anneal", "test", "experiment", "figure1")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    input_path: Optional[str] = None
    output_path: Optional[str] = None

    @property
    def fmt(self) -> str:
        return self.params.get("format", "json")


def figure1(etas: Sequence[float], grid_points: int) -> list[dict]:
    """Rows (eta, x, f_eta(x)) on a uniform grid over [0, 1] for each eta."""
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    if not etas:
        raise ValueError("need at least one eta")
    xs = np.linspace(0.0, 1.0, grid_points)
    rows = []
    for eta in etas:
        fs = analytic.f_eta(float(eta), xs)
        rows.extend({"eta": float(eta), "x": float(x), "f": float(f)} for x, f in zip(xs, fs))
    return rows


def _need(cfg: RunConfig, *keys: str) -> None:
    missing = [k for k in keys if cfg.params.get(k) is None]
    if missing:
        raise UsageError(f"{cfg.subcommand}: missing required option(s) " + ", ".join("--" + k for k in missing))


def _need_input(cfg: RunConfig) -> Path:
    if not cfg.input_path:
        raise UsageError(f"{cfg.subcommand}: --in PATH is required")
    return Path(cfg.input_path)


def _to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _flat_rows(d: dict, prefix: str = "") -> list[dict]:
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flat_rows(v, key + "."))
        else:
            rows.append({"key": key, "value": json.dumps(v)})
    return rows


def _run(cfg: RunConfig) -> tuple[dict, Optional[list[dict]]]:
    """Execute the subcommand; returns the JSON payload and optional CSV rows."""
    p = cfg.params
    sub = cfg.subcommand
    seed = int(p.setdefault("seed", 0))

    if sub == "analytic":
        _need(cfg, "eta")
        p.setdefault("beta", -0.9)
        p.setdefault("gamma", 2.0)
        params = analytic.ModelParams(p["eta"], p["beta"], p["gamma"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", analytic.VacuousBoundWarning)
            report = analytic.constants(params)
        out = {"report": report.to_dict()}
        bounds = reduction.predicted_bounds(params)
        out["predicted_bounds"] = bounds._asdict()
        if params.eta > 1.0 and report.delta > 0:
            out["gamma_for_delta"] = analytic.choose_gamma(params.eta, report.delta)
        return out, None

    if sub == "gen-instance":
        _need(cfg, "n", "gamma")
        arm = p.setdefault("arm", "planted")
        if arm == "planted":
            _need(cfg, "beta")
            inst = instances.sample_planted(p["n"], p["beta"], p["gamma"], seed)
        else:
            inst = instances.sample_null(p["n"], p["gamma"], seed)
        # instance fields sit at top level so the output is itself an instance file
        return inst.to_dict(include_spike=not p.get("no_spike")), None

    if sub == "exact":
        J = instances.read_matrix(_need_input(cfg))
        return {"summary": ising_exact.exact_summary(J).to_dict()}, None

    if sub == "glauber":
        J = instances.read_matrix(_need_input(cfg))
        sweeps = p.setdefault("sweeps", 10 * J.n)
        if p.get("mixing"):
            p.setdefault("samples", 10_000)
            rep = glauber.mixing_report(J, sweeps, method=p["method"], n_samples=p["samples"], seed=seed)
            return {"mixing": rep.to_dict()}, None
        x = glauber.sample(J.J, sweeps, seed)
        return {"sample": [int(v) for v in x]}, [{"site": i, "spin": int(v)} for i, v in enumerate(x)]

    if sub == "anneal":
        J = instances.read_matrix(_need_input(cfg))
        sched = annealing.default_schedule(J.J, p.setdefault("target_error", 0.05))
        est = annealing.estimate_log_Zhat(J.J, sched, seed)
        out = est.to_dict()
        out["log_Z"] = est.log_Z(J.n)
        out["pressure"] = est.log_Zhat / J.n
        return {"estimate": out}, [{"step": k, "log_ratio": r} for k, r in enumerate(est.per_step_log_ratios)]

    if sub == "test":
        _need(cfg, "eta")
        inst = instances.read_instance(_need_input(cfg))
        p.setdefault("beta", inst.beta)
        p.setdefault("gamma", inst.gamma)
        params = analytic.ModelParams(p["eta"], p["beta"], p["gamma"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", analytic.VacuousBoundWarning)
            report = analytic.constants(params)
        outcome = reduction.run_test(inst.observed(), params.eta, report, p["approximator"], seed=seed)
        return {"outcome": outcome.to_dict()}, None

    if sub == "experiment":
        _need(cfg, "n", "trials", "eta", "beta", "gamma")
        params = analytic.ModelParams(p["eta"], p["beta"], p["gamma"])
        summary = reduction.run_experiment(p["n"], p["trials"], params, p["approximator"], seed)
        rows = [
            {"trial": r.trial, "arm": r.arm, "statistic": r.statistic, "verdict": r.verdict, "bbp_baseline": r.bbp_baseline}
            for r in summary.records
        ]
        return {"summary": summary.to_dict()}, rows

    if sub == "figure1":
        etas = p.setdefault("etas", [0.8, 0.9, 1.0, 1.1, 1.2, 1.4])
        rows = figure1(etas, p["grid_points"])
        curves = []
        for eta in etas:
            mine = [r for r in rows if r["eta"] == float(eta)]
            curves.append({"eta": float(eta), "x": [r["x"] for r in mine], "f": [r["f"] for r in mine]})
        return {"curves": curves}, rows

    raise UsageError(f"unknown subcommand {sub!r}")


def dispatch(config: RunConfig) -> int:
    """Run one subcommand; 0 on success, 1 on a module error, 2 on a usage error."""
    try:
        payload, rows = _run(config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if config.fmt == "csv":
        text = _to_csv(rows if rows is not None else _flat_rows(payload))
    else:
        doc = {
            "inputs": {
                "subcommand": config.subcommand,
                "params": config.params,
                "input_path": config.input_path,
            }
        }
        doc.update(payload)
        text = json.dumps(doc, indent=2) + "\n"

    if config.output_path:
        Path(config.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _float_list(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int)
    common.add_argument("--eta", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int)
    common.add_argument("--sweeps", type=int)
    common.add_argument("--target-error", type=float)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--in", dest="input_path", metavar="PATH")
    common.add_argument("--out", dest="output_path", metavar="PATH")

    parser = argparse.ArgumentParser(prog="isingred", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    subs.add_parser("analytic", parents=[common], help="closed-form constants for (eta, beta, gamma)")
    gen = subs.add_parser("gen-instance", parents=[common], help="sample a spiked Wishart instance")
    gen.add_argument("--arm", choices=("planted", "null"), default="planted")
    gen.add_argument("--no-spike", action="store_true", help="omit the hidden spike from the output")
    subs.add_parser("exact", parents=[common], help="exact pressure of a matrix file")
    gl = subs.add_parser("glauber", parents=[common], help="Glauber sample or mixing report")
    gl.add_argument("--mixing", action="store_true")
    gl.add_argument("--method", choices=("exact-kernel", "empirical-histogram"), default="exact-kernel")
    gl.add_argument("--samples", type=int)
    subs.add_parser("anneal", parents=[common], help="annealing estimate of log Zhat")
    for name in ("test", "experiment"):
        sp = subs.add_parser(name, parents=[common])
        sp.add_argument("--approximator", choices=reduction.APPROXIMATORS, default="exact-oracle")
    fig = subs.add_parser("figure1", parents=[common], help="curves f_eta(x) on [0, 1]")
    fig.add_argument("--etas", type=_float_list)
    fig.add_argument("--grid-points", type=int, default=201)
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    sub = ns.pop("subcommand")
    input_path = ns.pop("input_path")
    output_path = ns.pop("output_path")
    params = {k: v for k, v in ns.items() if v is not None and v is not False}
    return RunConfig(subcommand=sub, params=params, input_path=input_path, output_path=output_path)


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
