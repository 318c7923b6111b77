"""Scenario files: sectioned key/value text read with configparser.

Every value is a number, a preset name or a short list; there are no
embedded expressions.  ``Scenario.to_ini`` writes a file that parses back to
an equal scenario.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import ValidationError
from .geometry import METRIC_PRESETS, make_metric
from .targets import LOOP_KINDS, make_loop, make_target

RUN_KINDS = ("solve", "homotopy", "certify", "sweep", "geodesics")
TARGET_KINDS = ("disc", "ellipse", "polygon")


@dataclass(frozen=True)
class MetricSpec:
    preset: str = "flat"
    params: tuple = ()

    def build(self):
        return make_metric(self.preset, **dict(self.params))


@dataclass(frozen=True)
class Scenario:
    name: str
    run: str = "solve"
    description: str = ""
    sigma: MetricSpec = field(default_factory=MetricSpec)
    rho: MetricSpec = field(default_factory=MetricSpec)
    target_kind: str = "disc"
    target_params: tuple = (("radius", 1.0),)
    boundary_start: str = "arclength"
    start_warp: float = 0.0
    boundary_end: str = "arclength"
    end_warp: float = 0.0
    p: float = 2.0
    eps: float = 0.0
    eps_list: tuple = (0.4, 0.2, 0.1, 0.05, 0.025, 0.0)
    n: int = 64
    max_iters: int = 20000
    rel_grad_tol: float = 1e-9
    steps: int = 16
    bisection_cap: int = 6
    exponent_only: bool = False
    n_exp: int | None = None
    levels: tuple = (0.9, 0.7, 0.5, 0.3)
    noise_floor: bool = True
    seed: int = 0

    # builders
    def build_target(self):
        params = dict(self.target_params)
        if self.target_kind == "polygon":
            params["vertices"] = [complex(x, y) for x, y in params["vertices"]]
        return make_target(self.target_kind, **params)

    def loops(self, grid):
        target = self.build_target()
        start = make_loop(target, grid.boundary_s, self.boundary_start, self.start_warp)
        end = make_loop(target, grid.boundary_s, self.boundary_end, self.end_warp)
        return start, end

    def with_grid(self, n: int | None) -> "Scenario":
        return self if n is None else validate(replace(self, n=int(n)))

    # serialization
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["scenario"] = {"name": self.name, "run": self.run, "description": self.description}
        for key, spec in (("sigma", self.sigma), ("rho", self.rho)):
            cp[key] = {"preset": spec.preset, **{k: _fmt(v) for k, v in spec.params}}
        tgt = {"kind": self.target_kind}
        for k, v in self.target_params:
            tgt[k] = "; ".join(f"{_fmt(x)}, {_fmt(y)}" for x, y in v) if k == "vertices" else _fmt(v)
        cp["target"] = tgt
        cp["boundary"] = {"start": self.boundary_start, "start_warp": _fmt(self.start_warp),
                          "end": self.boundary_end, "end_warp": _fmt(self.end_warp)}
        cp["params"] = {"p": _fmt(self.p), "eps": _fmt(self.eps),
                        "eps_list": ", ".join(_fmt(e) for e in self.eps_list)}
        cp["grid"] = {"n": str(self.n)}
        cp["solver"] = {"max_iters": str(self.max_iters), "rel_grad_tol": _fmt(self.rel_grad_tol)}
        cp["homotopy"] = {"steps": str(self.steps), "bisection_cap": str(self.bisection_cap),
                          "exponent_only": str(self.exponent_only).lower()}
        cp["certify"] = {"n_exp": "auto" if self.n_exp is None else str(self.n_exp),
                         "levels": ", ".join(_fmt(x) for x in self.levels)}
        cp["sweep"] = {"noise_floor": str(self.noise_floor).lower(), "seed": str(self.seed)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


_KNOWN = {
    "scenario": {"name", "run", "description"},
    "target": {"kind", "radius", "a", "b", "vertices"},
    "boundary": {"start", "start_warp", "end", "end_warp"},
    "params": {"p", "eps", "eps_list"},
    "grid": {"n"},
    "solver": {"max_iters", "rel_grad_tol"},
    "homotopy": {"steps", "bisection_cap", "exponent_only"},
    "certify": {"n_exp", "levels"},
    "sweep": {"noise_floor", "seed"},
}


def _num(cp, section, key, default, kind=float):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    try:
        val = kind(raw)
    except ValueError:
        raise ValidationError(f"{section}.{key}", f"expected a {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(val):
        raise ValidationError(f"{section}.{key}", "must be finite")
    return val


def _bool(cp, section, key, default):
    if not cp.has_option(section, key):
        return default
    try:
        return cp.getboolean(section, key)
    except ValueError:
        raise ValidationError(f"{section}.{key}", "expected true or false") from None


def _floats(cp, section, key, default):
    if not cp.has_option(section, key):
        return default
    try:
        return tuple(float(x) for x in cp.get(section, key).split(",") if x.strip())
    except ValueError:
        raise ValidationError(f"{section}.{key}", "expected a comma separated list of numbers") from None


def _metric(cp, section) -> MetricSpec:
    if not cp.has_section(section):
        return MetricSpec()
    items = dict(cp.items(section))
    preset = items.pop("preset", "flat")
    params = []
    for k, v in sorted(items.items()):
        if preset == "custom" and k == "preset_name":
            params.append(("preset", v))
            continue
        try:
            params.append((k, float(v)))
        except ValueError:
            raise ValidationError(f"{section}.{k}", f"expected a number, got {v!r}") from None
    return MetricSpec(preset, tuple(params))


def parse(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError("config", f"cannot parse: {exc}") from None
    for section in cp.sections():
        if section in ("sigma", "rho"):
            continue
        if section not in _KNOWN:
            raise ValidationError(section, "unknown section")
        for key in cp[section]:
            if key not in _KNOWN[section]:
                raise ValidationError(f"{section}.{key}", "unknown key")
    if not cp.has_option("scenario", "name"):
        raise ValidationError("scenario.name", "missing")
    kind = cp.get("target", "kind", fallback="disc")
    tparams = []
    if kind == "disc":
        tparams.append(("radius", _num(cp, "target", "radius", 1.0)))
    elif kind == "ellipse":
        tparams += [("a", _num(cp, "target", "a", 1.0)), ("b", _num(cp, "target", "b", 0.6))]
    elif kind == "polygon":
        raw = cp.get("target", "vertices", fallback="")
        try:
            verts = tuple(tuple(float(c) for c in pair.split(",")) for pair in raw.split(";") if pair.strip())
        except ValueError:
            raise ValidationError("target.vertices", "expected 'x, y; x, y; ...'") from None
        if any(len(v) != 2 for v in verts):
            raise ValidationError("target.vertices", "every vertex needs two coordinates")
        tparams.append(("vertices", verts))
    n_exp_raw = cp.get("certify", "n_exp", fallback="auto").strip()
    sc = Scenario(
        name=cp.get("scenario", "name"),
        run=cp.get("scenario", "run", fallback="solve"),
        description=cp.get("scenario", "description", fallback=""),
        sigma=_metric(cp, "sigma"),
        rho=_metric(cp, "rho"),
        target_kind=kind,
        target_params=tuple(tparams),
        boundary_start=cp.get("boundary", "start", fallback="arclength"),
        start_warp=_num(cp, "boundary", "start_warp", 0.0),
        boundary_end=cp.get("boundary", "end", fallback="arclength"),
        end_warp=_num(cp, "boundary", "end_warp", 0.0),
        p=_num(cp, "params", "p", 2.0),
        eps=_num(cp, "params", "eps", 0.0),
        eps_list=_floats(cp, "params", "eps_list", Scenario.__dataclass_fields__["eps_list"].default),
        n=_num(cp, "grid", "n", 64, int),
        max_iters=_num(cp, "solver", "max_iters", 20000, int),
        rel_grad_tol=_num(cp, "solver", "rel_grad_tol", 1e-9),
        steps=_num(cp, "homotopy", "steps", 16, int),
        bisection_cap=_num(cp, "homotopy", "bisection_cap", 6, int),
        exponent_only=_bool(cp, "homotopy", "exponent_only", False),
        n_exp=None if n_exp_raw == "auto" else _num(cp, "certify", "n_exp", None, int),
        levels=_floats(cp, "certify", "levels", (0.9, 0.7, 0.5, 0.3)),
        noise_floor=_bool(cp, "sweep", "noise_floor", True),
        seed=_num(cp, "sweep", "seed", 0, int),
    )
    return validate(sc)


def validate(sc: Scenario) -> Scenario:
    if not sc.name.strip():
        raise ValidationError("scenario.name", "must not be empty")
    if sc.run not in RUN_KINDS:
        raise ValidationError("scenario.run", f"must be one of {', '.join(RUN_KINDS)}")
    for key, spec in (("sigma", sc.sigma), ("rho", sc.rho)):
        if spec.preset not in METRIC_PRESETS and spec.preset != "custom":
            raise ValidationError(f"{key}.preset", f"unknown metric preset {spec.preset!r}")
        try:
            spec.build()
        except (TypeError, ValueError) as exc:
            raise ValidationError(key, str(exc)) from None
    if sc.target_kind not in TARGET_KINDS:
        raise ValidationError("target.kind", f"must be one of {', '.join(TARGET_KINDS)}")
    for k, v in sc.target_params:
        if k != "vertices" and not v > 0:
            raise ValidationError(f"target.{k}", "must be positive")
    try:
        target = sc.build_target()
    except ValueError as exc:
        raise ValidationError("target.vertices" if sc.target_kind == "polygon" else "target", str(exc)) from None
    if not target.is_convex():
        raise ValidationError("target", "target region is not convex")
    for key, kind, warp in (("start", sc.boundary_start, sc.start_warp), ("end", sc.boundary_end, sc.end_warp)):
        if kind not in LOOP_KINDS:
            raise ValidationError(f"boundary.{key}", f"must be one of {', '.join(LOOP_KINDS)}")
        if kind == "warped" and not abs(warp) < 1:
            raise ValidationError(f"boundary.{key}_warp", "boundary speed must stay positive (|warp| < 1)")
        if kind == "angle" and sc.target_kind == "polygon":
            raise ValidationError(f"boundary.{key}", "angle parametrization needs a disc or ellipse")
    if not sc.p >= 2:
        raise ValidationError("params.p", f"must be >= 2, got {sc.p}")
    if not 0 <= sc.eps < 1:
        raise ValidationError("params.eps", f"must lie in [0, 1), got {sc.eps}")
    if any(not 0 <= e < 1 for e in sc.eps_list):
        raise ValidationError("params.eps_list", "entries must lie in [0, 1)")
    if sc.run == "sweep" and 0.0 not in sc.eps_list:
        raise ValidationError("params.eps_list", "must contain 0 as the reference")
    if sc.run == "homotopy" and not sc.eps > 0:
        raise ValidationError("params.eps", "homotopy needs eps > 0")
    if sc.n < 8:
        raise ValidationError("grid.n", f"must be >= 8, got {sc.n}")
    if sc.max_iters < 1:
        raise ValidationError("solver.max_iters", "must be positive")
    if not sc.rel_grad_tol > 0:
        raise ValidationError("solver.rel_grad_tol", "must be positive")
    if sc.steps < 1:
        raise ValidationError("homotopy.steps", "must be positive")
    if sc.bisection_cap < 0:
        raise ValidationError("homotopy.bisection_cap", "must be nonnegative")
    if sc.n_exp is not None and sc.n_exp < 1:
        raise ValidationError("certify.n_exp", "must be a positive integer or auto")
    if any(not 0 < r < 1 for r in sc.levels):
        raise ValidationError("certify.levels", "radii must lie in (0, 1)")
    return sc


# ------------------------------------------------------------------ bundle


def _bundle():
    return resources.files("rkcmap") / "scenarios"


def list_scenarios() -> list:
    return sorted(p.name[:-4] for p in _bundle().iterdir() if p.name.endswith(".ini"))


def bundled_text(name: str) -> str:
    path = _bundle() / f"{name}.ini"
    if not path.is_file():
        raise ValidationError("scenario", f"unknown scenario {name!r}")
    return path.read_text()


def load(name_or_path: str) -> Scenario:
    """A bundled scenario name or a path to a scenario file."""
    if name_or_path in list_scenarios():
        return parse(bundled_text(name_or_path))
    try:
        with open(name_or_path) as fh:
            return parse(fh.read())
    except FileNotFoundError:
        raise ValidationError("config", f"no scenario or file named {name_or_path!r}") from None


def describe(name: str) -> str:
    return parse(bundled_text(name)).to_ini()
