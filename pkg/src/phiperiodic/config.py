"""Run configuration: parsing, defaults, and problem construction.

The native format is INI-style (``key = value`` lines, ``[section]``
headers). Keys placed before the first header belong to ``[run]``. JSON
with the same nesting is accepted as well::

    mode = auto
    seed = 0

    [problem]
    preset = strong-resonance-repulsive
    T = 8*pi
    h = "0.05*cos(t/4)"

    [grid]
    N = 256
"""

from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import ConfigError
from .expr import Expression, constant_value
from .grid import DEFAULT_MARGIN, PeriodicGrid
from .problem import (PRESETS, Forcing, Nonlinearity, ProblemSpec, builtin_relativistic,
                      preset)

MODES = ("auto", "minimize", "mountainpass", "conditions-only")

PROBLEM_KEYS = {"preset", "f", "F", "h", "T", "phi", "a", "k", "alpha", "A"}
GRID_KEYS = {"N", "margin"}
RUN_KEYS = {"mode", "seed", "output_dir"}
TOLERANCE_KEYS = {
    "grad_tol": float, "max_iters": int, "restarts": int, "step_init": float,
    "probes": int, "tol_border": float, "el_tol": float, "ci_tol": float,
    "images": int, "string_max_iters": int, "endpoint_margin": float,
}


@dataclass
class RunConfig:
    problem: dict = field(default_factory=dict)
    grid: dict = field(default_factory=lambda: {"N": 256, "margin": DEFAULT_MARGIN})
    mode: str = "auto"
    seed: int = 0
    output_dir: str = "solver-out"
    tolerances: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        N = self.grid.get("N", 256)
        if int(N) != N or N < 8:
            raise ConfigError(f"grid N must be an integer >= 8, got {N}")
        margin = self.grid.get("margin", DEFAULT_MARGIN)
        if not 0 < margin <= 0.1:
            raise ConfigError(f"grid margin must lie in (0, 0.1], got {margin}")
        if not self.problem.get("preset") and not self.problem.get("f"):
            raise ConfigError("problem needs either a preset or an expression for f")
        if self.problem.get("preset") and self.problem["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {self.problem['preset']!r}; "
                              f"choose from {', '.join(PRESETS)}")
        if self.problem.get("preset") and self.problem.get("f"):
            raise ConfigError("give either a preset or f, not both")
        T = period_of(self.problem)
        if T is not None and not T > 0:
            raise ConfigError(f"period T must be positive, got {T}")
        if not self.problem.get("preset") and T is None:
            raise ConfigError("problem.T is required for expression problems")
        return self


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def _number(value, key: str, kind=float):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        out = value
    else:
        text = _unquote(str(value))
        try:
            out = kind(text)
        except ValueError:
            if kind is int:
                raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
            out = constant_value(text)
    if kind is int and int(out) != out:
        raise ConfigError(f"{key}: expected an integer, got {out!r}")
    return kind(out)


def period_of(problem: dict) -> Optional[float]:
    if "T" not in problem or problem["T"] is None:
        return None
    return _number(problem["T"], "problem.T")


def _from_sections(sections: dict) -> RunConfig:
    cfg = RunConfig()
    known = {"run", "problem", "grid", "tolerances"}
    for name in sections:
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")

    def keys_ok(section, allowed):
        for key in sections.get(section, {}):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    keys_ok("run", RUN_KEYS)
    keys_ok("problem", PROBLEM_KEYS)
    keys_ok("grid", GRID_KEYS)
    keys_ok("tolerances", set(TOLERANCE_KEYS))

    run = sections.get("run", {})
    if "mode" in run:
        cfg.mode = _unquote(str(run["mode"]))
    if "seed" in run:
        cfg.seed = _number(run["seed"], "seed", int)
    if "output_dir" in run:
        cfg.output_dir = _unquote(str(run["output_dir"]))

    problem = {}
    for key, value in sections.get("problem", {}).items():
        if isinstance(value, str):
            value = _unquote(value)
        problem[key] = value
    cfg.problem = problem

    grid = dict(cfg.grid)
    for key, value in sections.get("grid", {}).items():
        grid[key] = _number(value, f"grid.{key}", int if key == "N" else float)
    cfg.grid = grid

    cfg.tolerances = {key: _number(value, f"tolerances.{key}", TOLERANCE_KEYS[key])
                      for key, value in sections.get("tolerances", {}).items()}
    return cfg


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"duplicate key {key!r}")
        out[key] = value
    return out


def parse_config(text: str) -> RunConfig:
    """Parse INI-style or JSON configuration text into a validated RunConfig.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, duplicate keys, or
        invalid values; the message names the offending key (and line for
        the INI format).
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
        sections = {"run": {k: v for k, v in data.items() if not isinstance(v, dict)}}
        sections.update({k: v for k, v in data.items() if isinstance(v, dict)})
        return _from_sections(sections).validate()

    parser = configparser.ConfigParser(strict=True, interpolation=None,
                                       inline_comment_prefixes=("#",),
                                       default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}] "
                          f"(line {exc.lineno - 1})") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}] (line {exc.lineno - 1})") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc.message}") from None
    sections = {name: dict(parser[name]) for name in parser.sections()}
    return _from_sections(sections).validate()


def build_problem(cfg: RunConfig) -> ProblemSpec:
    """Turn the ``[problem]`` block into a ProblemSpec."""
    p = cfg.problem
    T = period_of(p)
    a = _number(p.get("a", 1.0), "problem.a")
    A = _number(p.get("A", 1.0), "problem.A")
    phi = p.get("phi", "relativistic")
    if phi != "relativistic":
        raise ConfigError(f"unknown phi preset {phi!r} (available: relativistic)")
    phi_model = builtin_relativistic(a)
    if "k" in p:
        k_text = str(p["k"]).strip().lower()
        k = None if k_text in ("none", "") else _number(p["k"], "problem.k")
        phi_model = type(phi_model)(**{**phi_model.__dict__, "k": k})

    forcing = None
    consts = {"A": A}
    if T is not None:
        consts["T"] = T
    if "h" in p:
        h_expr = Expression(str(p["h"]), consts)
        forcing = Forcing.from_h(lambda t, e=h_expr: e(t), name=str(p["h"]))

    try:
        if p.get("preset"):
            spec = preset(p["preset"], T=T, forcing=forcing, A=A, a=a)
            return ProblemSpec(spec.T, phi_model, spec.nonlinearity, spec.forcing, spec.name)
        f_expr = Expression(str(p["f"]), consts)
        F_expr = Expression(str(p["F"]), consts) if p.get("F") else None
        alpha = _number(p["alpha"], "problem.alpha") if "alpha" in p else None
        nl = Nonlinearity.from_maps(
            f=lambda t, s, e=f_expr: e(t, s),
            F=None if F_expr is None else (lambda t, s, e=F_expr: e(t, s)),
            alpha=alpha, T=T, name=str(p["f"]))
        if forcing is None:
            forcing = Forcing(h=lambda t: 0.0 * t, H=lambda t: 0.0 * t, name="0")
        return ProblemSpec(T, phi_model, nl, forcing, name="expression")
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def build_grid(cfg: RunConfig, spec: ProblemSpec) -> PeriodicGrid:
    return PeriodicGrid(int(cfg.grid.get("N", 256)), spec.T)
