"""Batch driver: validate -> (m, w) -> alternative -> minimize or mountain pass -> verify.

Usage::

    solve [CONFIG] [--mode M] [--preset P] [--out DIR] [--seed S] [--grid-n N]

Writes ``report.json``, ``solution.csv`` (``t,u,du``) and, for a
mountain-pass run, ``family.csv`` into the output directory. Exit status
is 0 when every produced candidate passes verification, 1 on pipeline
failure or failed verification, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .conditions import (Branch, check_cor1, check_cor2_variants, classify_alternative,
                         resolve_alpha)
from .config import RunConfig, build_grid, build_problem, parse_config
from .errors import ConfigError, SolverError
from .grid import PeriodicPath, write_path_csv
from .mountainpass import StringOptions, select_endpoints, string_search, write_family_csv
from .optimize import DescentOptions, minimize_over_K, minimize_over_W
from .problem import validate_hypotheses
from .verify import verify_solution

SCHEMA = "phiperiodic.report/1"
logger = logging.getLogger("phiperiodic")


@dataclass
class CriticalPointReport:
    kind: str
    path: PeriodicPath
    critical_value: float
    residual: float
    converged: bool
    details: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "critical_value": self.critical_value,
                "mean": self.path.mean, "max_abs_du": float(np.max(np.abs(self.path.d))),
                "residual": self.residual, "converged": self.converged,
                "details": self.details}


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _options(cfg: RunConfig):
    tol = cfg.tolerances
    margin = cfg.grid.get("margin", 1e-6)
    descent = DescentOptions(
        max_iters=tol.get("max_iters", 50_000), step_init=tol.get("step_init", 0.1),
        grad_tol=tol.get("grad_tol", 1e-8), restarts=tol.get("restarts", 8),
        seed=cfg.seed, margin=margin)
    string = StringOptions(images=tol.get("images", 33),
                           max_iters=tol.get("string_max_iters", 5000),
                           grad_tol=tol.get("grad_tol", 1e-8), margin=margin)
    return descent, string


class _Stages:
    def __init__(self, report: dict):
        self.report = report
        self.timings = report.setdefault("timings", {})

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = round((time.perf_counter() - t0) * 1e3, 3)


def run(cfg: RunConfig, write_files: bool = True):
    """Execute the pipeline for a validated config.

    Returns
    -------
    report : dict
        The JSON-ready run report.
    exit_code : int
    """
    spec = build_problem(cfg)
    grid = build_grid(cfg, spec)
    descent, string = _options(cfg)
    tol = cfg.tolerances
    probes = tol.get("probes", 1000)
    out_dir = Path(cfg.output_dir)

    report: dict = {
        "versions": {"schema": SCHEMA, "phiperiodic": __version__, "numpy": np.__version__},
        "config": cfg.resolved(),
        "problem": {"name": spec.name, "T": spec.T, "N": grid.N,
                    "phi": spec.phi_model.name, "a": spec.phi_model.a, "k": spec.phi_model.k},
        "errors": [],
    }
    stages = _Stages(report)
    results: list = []
    verifications: dict = {}

    def fail(stage, exc):
        report["errors"].append({"stage": stage, "type": type(exc).__name__,
                                 "message": str(exc)})
        logger.error("%s failed: %s", stage, exc)

    try:
        report["hypotheses"] = stages.run("hypotheses", validate_hypotheses, spec).to_dict()
    except SolverError as exc:
        fail("hypotheses", exc)

    alt = None
    w_tilde = None
    alpha_error = None
    try:
        alpha = resolve_alpha(spec)
    except SolverError as exc:
        alpha, alpha_error = None, exc
        if cfg.mode != "minimize":
            fail("alpha", exc)
    try:
        if alpha is not None and cfg.mode != "minimize":
            alt = stages.run("alternative", classify_alternative, spec, grid, descent,
                             tol.get("tol_border", 1e-7))
            w_tilde = alt.w_tilde.path
            report.update(m=alt.m, beta=alt.beta, alphaT=alt.alphaT,
                          alternative=alt.to_dict())
            report["corollary1"] = stages.run("corollary1", check_cor1, spec, grid,
                                              w_tilde).to_dict()
        else:
            w_res, m = stages.run("m", minimize_over_W, spec, grid, descent, "J")
            w_tilde = w_res.path
            report["m"] = m
        if alpha is None:
            report["corollary2"] = {"unavailable": f"alpha unavailable: {alpha_error}"}
        else:
            report["corollary2"] = {
                k: (v.to_dict() if hasattr(v, "to_dict") else v)
                for k, v in stages.run("corollary2", check_cor2_variants, spec, grid,
                                       report["m"]).items()}
    except SolverError as exc:
        fail("alternative", exc)

    if cfg.mode == "auto":
        if alt is None:
            todo = []
        elif alt.branch is Branch.MINIMUM:
            todo = ["minimize"]
        elif alt.branch is Branch.MOUNTAIN_PASS:
            todo = ["mountainpass"]
        else:
            todo = ["minimize", "mountainpass"]
    elif cfg.mode == "conditions-only":
        todo = []
    else:
        todo = [cfg.mode]

    if write_files and (todo or cfg.mode == "conditions-only"):
        out_dir.mkdir(parents=True, exist_ok=True)

    for task in todo:
        try:
            if task == "minimize":
                res = stages.run("minimize", minimize_over_K, spec, grid, descent)
                cp = CriticalPointReport("minimum", res.path, res.value,
                                         res.projected_grad_norm, res.converged,
                                         res.to_dict())
            else:
                if alt is None:
                    alt = stages.run("alternative", classify_alternative, spec, grid,
                                     descent, tol.get("tol_border", 1e-7))
                A, B, n1 = stages.run("endpoints", select_endpoints, spec, grid,
                                      alt.w_tilde.path, alt.beta,
                                      tol.get("endpoint_margin", 0.5))
                mp = stages.run("string", string_search, spec, grid, A, B, string)
                details = mp.to_dict()
                details.update(n1=n1, I_A=float(mp.values[0]), I_B=float(mp.values[-1]),
                               c_minus_beta=mp.c_hat - alt.beta)
                cp = CriticalPointReport("mountain-pass", mp.saddle, mp.c_hat,
                                         mp.saddle_grad_norm, mp.converged, details)
                if write_files:
                    write_family_csv(mp, out_dir / "family.csv")
            results.append(cp)
            ver = stages.run(f"verify-{task}", verify_solution, spec, grid, cp.path,
                             probes=probes, seed=cfg.seed, w_tilde=w_tilde,
                             el_tol=tol.get("el_tol"), ci_tol=tol.get("ci_tol", 1e-8),
                             margin=descent.margin)
            verifications[cp.kind] = ver
        except SolverError as exc:
            fail(task, exc)

    if results:
        report["result"] = results[0].to_dict()
        if len(results) > 1:
            report["results"] = [r.to_dict() for r in results]
        report["verification"] = verifications[results[0].kind].to_dict()
        if len(verifications) > 1:
            report["verifications"] = {k: v.to_dict() for k, v in verifications.items()}
        if write_files:
            write_path_csv(results[0].path, grid, out_dir / "solution.csv")
            for extra in results[1:]:
                write_path_csv(extra.path, grid, out_dir / f"solution-{extra.kind}.csv")

    if report["errors"]:
        code = 1
    elif todo:
        code = 0 if len(verifications) == len(todo) and all(
            v.verdict for v in verifications.values()) else 1
    else:
        code = 0
    report["exit_code"] = code
    report = _clean(report)
    if write_files:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report, code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solve", description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", help="INI-style or JSON configuration file")
    p.add_argument("--mode", choices=("auto", "minimize", "mountainpass", "conditions-only"))
    p.add_argument("--preset", help="named problem preset")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-n", type=int, dest="grid_n")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    if args.preset:
        text = _with_preset(text, args.preset)
    cfg = parse_config(text) if text.strip() else RunConfig()
    if args.mode:
        cfg.mode = args.mode
    if args.out:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.grid_n is not None:
        cfg.grid["N"] = args.grid_n
    return cfg.validate()


def _with_preset(text: str, name: str) -> str:
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data.setdefault("problem", {})["preset"] = name
        return json.dumps(data)
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.strip() == "[problem]":
            lines.insert(i + 1, f"preset = {name}")
            return "\n".join(lines)
    return text + f"\n[problem]\npreset = {name}\n"


def main(argv: Optional[list] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        spec_check = build_problem(cfg)
        del spec_check
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    report, code = run(cfg)
    summary = report.get("alternative", {}).get("branch", "-")
    verdict = report.get("verification", {}).get("verdict", "-")
    print(f"branch: {summary}  verification: {verdict}  "
          f"report: {os.path.join(cfg.output_dir, 'report.json')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
