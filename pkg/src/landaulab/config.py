"""Run configuration: TOML/JSON parsing and whole-file validation.

Validation is exhaustive: every problem in the file is reported at once with
its key path, unknown keys are rejected, and numeric ranges are checked before
any computation starts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import equilibria as eq
from .dynamics import CosineData, InitialData, SimulationConfig, SpikeMode
from .errors import ConfigError
from .norms import WeightParams

EXPERIMENTS = ("free", "simulate", "roots", "penrose", "green", "echo",
               "certify", "norms-report")
SCHEMA_VERSION = 1

_FAMILY_ALIASES = {
    "gaussian": eq.GAUSSIAN,
    "two-stream": eq.TWO_STREAM,
    "two_stream": eq.TWO_STREAM,
    "custom-tabulated": eq.CUSTOM,
}


@dataclass
class RunConfig:
    """A fully validated run description."""

    experiment: str
    equilibrium: dict
    riesz: dict
    grid: dict
    data: dict
    norms: dict | None
    output: dict
    dynamics: dict
    linear: dict
    echo: dict
    certify: dict
    raw: dict = dc_field(repr=False, default_factory=dict)

    def profile(self) -> eq.EquilibriumProfile:
        e = self.equilibrium
        return eq.EquilibriumProfile(
            family=_FAMILY_ALIASES[e["family"]], v0=e.get("v0", 0.0),
            width=e.get("width", 1.0), mass=e.get("mass", 1.0),
            theta0=e.get("theta0"))

    def initial_data(self) -> InitialData:
        d = self.data
        spikes = tuple(SpikeMode(int(m["k"]), float(m["eta"]), complex(m["amplitude"]))
                       for m in d.get("modes", []))
        cosine = None
        if "closed_form" in d:
            cf = d["closed_form"]
            cosine = CosineData(k=int(cf.get("k", 1)),
                                amplitude=float(cf["amplitude"]),
                                width=float(cf.get("width", 1.0)))
        return InitialData(spikes=spikes, cosine=cosine)

    def weight_params(self) -> WeightParams | None:
        if self.norms is None:
            return None
        n = self.norms
        return WeightParams(sigma=n.get("sigma", 1.0), lambda0=n.get("lambda0", 0.3),
                            delta=n.get("delta", 0.3), theta1=n.get("theta1", 0.1),
                            theta2=n.get("theta2", max(0.15, n.get("theta1", 0.1))))

    def simulation_config(self, snapshot_dir=None) -> SimulationConfig:
        g, dyn = self.grid, self.dynamics
        free = self.experiment == "free"
        return SimulationConfig(
            profile=self.profile(), data=self.initial_data(),
            alpha=self.riesz.get("alpha", 2.0),
            k_max=int(g["K"]), t_final=float(g["T"]), dt=float(g["dt"]),
            j_max=int(g["J"]) if "J" in g else None,
            mu_coupling=False if free else dyn.get("mu_coupling", True),
            quadratic_coupling=False if free else dyn.get("quadratic_coupling", True),
            scheme=dyn.get("scheme", "ab3"),
            weights=self.weight_params(),
            checkpoint_every=int(self.output.get("checkpoint_every", 20)),
            snapshot_dir=snapshot_dir,
            snapshot_mode=self.output.get("snapshots", "none"),
            blowup_limit=dyn.get("blowup_limit", 1e6))


class _Checker:
    def __init__(self):
        self.problems: list[str] = []

    def fail(self, path, message):
        self.problems.append(f"{path}: {message}")

    def section(self, raw, path, known):
        for key in raw:
            if key not in known:
                self.fail(f"{path}.{key}" if path else key, "unknown key")

    def number(self, raw, path, key, lo=None, hi=None, required=False,
               integer=False, lo_strict=None, message=None):
        if key not in raw:
            if required:
                self.fail(f"{path}.{key}", "missing required key")
            return None
        v = raw[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
            return None
        if integer and int(v) != v:
            self.fail(f"{path}.{key}", "expected an integer")
            return None
        bad = ((lo is not None and v < lo) or (hi is not None and v > hi)
               or (lo_strict is not None and v <= lo_strict))
        if bad:
            self.fail(f"{path}.{key}", message or _range_text(key, lo, hi, lo_strict))
            return None
        return v


def _range_text(key, lo, hi, lo_strict):
    if lo is not None and hi is not None:
        return f"{key} must lie in [{lo:g}, {hi:g}]"
    if lo_strict is not None:
        return f"{key} must be > {lo_strict:g}"
    if lo is not None:
        return f"{key} must be >= {lo:g}"
    return f"{key} must be <= {hi:g}"


def load_config(path) -> RunConfig:
    """Parse and validate a TOML or JSON run configuration file."""
    path = Path(path)
    text = path.read_bytes()
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text.decode())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    return validate(raw)


def validate(raw: dict) -> RunConfig:
    """Validate a raw mapping; raises ConfigError listing every problem at once."""
    c = _Checker()
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a table"])

    top_known = {"schema_version", "experiment", "equilibrium", "riesz", "grid",
                 "data", "norms", "output", "dynamics", "linear", "echo", "certify"}
    c.section(raw, "", top_known)

    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        c.fail("schema_version", f"unsupported schema version {version}")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        c.fail("experiment", f"must be one of {', '.join(EXPERIMENTS)}")

    equilibrium = _check_equilibrium(c, raw.get("equilibrium"))
    riesz = _check_riesz(c, raw.get("riesz"))
    grid = _check_grid(c, raw.get("grid"), experiment)
    data = _check_data(c, raw.get("data"), experiment)
    norms = _check_norms(c, raw.get("norms"))
    output = _check_output(c, raw.get("output"))
    dynamics = _check_dynamics(c, raw.get("dynamics"))
    linear = _check_linear(c, raw.get("linear"), experiment)
    echo = _check_echo(c, raw.get("echo"), experiment)
    certify = _check_certify(c, raw.get("certify"), experiment)

    if c.problems:
        raise ConfigError(c.problems)
    return RunConfig(experiment=experiment, equilibrium=equilibrium, riesz=riesz,
                     grid=grid, data=data, norms=norms, output=output,
                     dynamics=dynamics, linear=linear, echo=echo, certify=certify,
                     raw=raw)


def _check_equilibrium(c, sec):
    if sec is None:
        c.fail("equilibrium", "missing required section")
        return {}
    c.section(sec, "equilibrium", {"family", "v0", "width", "mass", "theta0"})
    fam = sec.get("family")
    if fam not in _FAMILY_ALIASES:
        c.fail("equilibrium.family",
               f"must be one of {', '.join(sorted(set(_FAMILY_ALIASES)))}")
    c.number(sec, "equilibrium", "width", lo_strict=0.0)
    c.number(sec, "equilibrium", "mass", lo_strict=0.0)
    c.number(sec, "equilibrium", "theta0", lo_strict=0.0)
    c.number(sec, "equilibrium", "v0")
    return dict(sec)


def _check_riesz(c, sec):
    if sec is None:
        c.fail("riesz", "missing required section")
        return {}
    c.section(sec, "riesz", {"alpha"})
    c.number(sec, "riesz", "alpha", lo=0.0, hi=2.0, required=True,
             message="riesz.alpha must lie in [0,2]")
    return dict(sec)


def _check_grid(c, sec, experiment):
    needs_grid = experiment in ("free", "simulate", "echo", "norms-report")
    if sec is None:
        if needs_grid:
            c.fail("grid", "missing required section")
        return {}
    c.section(sec, "grid", {"K", "T", "dt", "J"})
    c.number(sec, "grid", "K", lo=1, required=needs_grid, integer=True)
    c.number(sec, "grid", "T", lo_strict=0.0, required=needs_grid)
    c.number(sec, "grid", "dt", lo_strict=0.0, required=needs_grid)
    c.number(sec, "grid", "J", lo=1, integer=True)
    return dict(sec)


def _check_data(c, sec, experiment):
    needs_data = experiment in ("free", "simulate", "norms-report")
    if sec is None:
        if needs_data:
            c.fail("data", "missing required section")
        return {}
    c.section(sec, "data", {"modes", "closed_form"})
    if needs_data and "modes" not in sec and "closed_form" not in sec:
        c.fail("data", "needs either modes or closed_form")
    modes = sec.get("modes", [])
    if not isinstance(modes, list):
        c.fail("data.modes", "expected a list of {k, eta, amplitude} tables")
    else:
        for i, m in enumerate(modes):
            if not isinstance(m, dict):
                c.fail(f"data.modes[{i}]", "expected a table")
                continue
            c.section(m, f"data.modes[{i}]", {"k", "eta", "amplitude"})
            k = c.number(m, f"data.modes[{i}]", "k", required=True, integer=True)
            if k == 0:
                c.fail(f"data.modes[{i}].k", "spike modes must have k != 0")
            c.number(m, f"data.modes[{i}]", "eta", required=True)
            c.number(m, f"data.modes[{i}]", "amplitude", required=True)
    if "closed_form" in sec:
        cf = sec["closed_form"]
        if not isinstance(cf, dict):
            c.fail("data.closed_form", "expected a table")
        else:
            c.section(cf, "data.closed_form", {"kind", "k", "amplitude", "width"})
            if cf.get("kind", "cosine") != "cosine":
                c.fail("data.closed_form.kind", "only the cosine kind is defined")
            c.number(cf, "data.closed_form", "k", integer=True)
            c.number(cf, "data.closed_form", "amplitude", required=True)
            c.number(cf, "data.closed_form", "width", lo_strict=0.0)
    return dict(sec)


def _check_norms(c, sec):
    if sec is None:
        return None
    c.section(sec, "norms", {"sigma", "lambda0", "delta", "theta1", "theta2"})
    c.number(sec, "norms", "sigma", lo=0.0)
    c.number(sec, "norms", "lambda0", lo_strict=0.0)
    c.number(sec, "norms", "delta", lo_strict=0.0, hi=0.499999,
             message="delta must lie in (0, 1/2)")
    t1 = c.number(sec, "norms", "theta1", lo_strict=0.0)
    t2 = c.number(sec, "norms", "theta2", lo_strict=0.0)
    if t1 is not None and t2 is not None and t1 > t2:
        c.fail("norms.theta1", "theta1 must not exceed theta2 "
                               "(the exponential trade requires theta1 <= theta2)")
    return dict(sec)


def _check_output(c, sec):
    if sec is None:
        return {"dir": "out"}
    c.section(sec, "output", {"dir", "checkpoint_every", "snapshots"})
    if "dir" in sec and not isinstance(sec["dir"], str):
        c.fail("output.dir", "expected a path string")
    c.number(sec, "output", "checkpoint_every", lo=1, integer=True)
    snaps = sec.get("snapshots", "none")
    if snaps not in ("none", "final", "all"):
        c.fail("output.snapshots", "must be one of none, final, all")
    out = dict(sec)
    out.setdefault("dir", "out")
    return out


def _check_dynamics(c, sec):
    if sec is None:
        return {}
    c.section(sec, "dynamics", {"mu_coupling", "quadratic_coupling", "scheme",
                                "blowup_limit"})
    for key in ("mu_coupling", "quadratic_coupling"):
        if key in sec and not isinstance(sec[key], bool):
            c.fail(f"dynamics.{key}", "expected a boolean")
    if sec.get("scheme", "ab3") not in ("ab3", "rk4"):
        c.fail("dynamics.scheme", "must be 'ab3' or 'rk4'")
    c.number(sec, "dynamics", "blowup_limit", lo_strict=0.0)
    return dict(sec)


def _check_linear(c, sec, experiment):
    needs = experiment in ("roots", "penrose", "green")
    if sec is None:
        if needs:
            c.fail("linear", "missing required section")
        return {}
    c.section(sec, "linear", {"k_list", "probes", "box", "t_max", "dt"})
    for key in ("k_list", "probes"):
        if key in sec:
            v = sec[key]
            if not isinstance(v, list) or not v or \
                    any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
                c.fail(f"linear.{key}", "expected a nonempty list of numbers")
            elif any(x == 0 for x in v):
                c.fail(f"linear.{key}", "wavenumbers must be nonzero")
    if experiment == "roots" and "probes" not in sec:
        c.fail("linear.probes", "missing required key")
    if experiment == "penrose" and "k_list" not in sec:
        c.fail("linear.k_list", "missing required key")
    if experiment == "green":
        if "k_list" not in sec:
            c.fail("linear.k_list", "missing required key")
        c.number(sec, "linear", "t_max", lo_strict=0.0, required=True)
        c.number(sec, "linear", "dt", lo_strict=0.0, required=True)
    if "box" in sec:
        box = sec["box"]
        if not isinstance(box, dict):
            c.fail("linear.box", "expected a table")
        else:
            c.section(box, "linear.box", {"re_min", "re_max", "im_min", "im_max"})
            for key in ("re_min", "re_max", "im_min", "im_max"):
                c.number(box, "linear.box", key, required=True)
    elif experiment == "roots":
        c.fail("linear.box", "missing required key")
    return dict(sec)


def _check_echo(c, sec, experiment):
    if sec is None:
        if experiment == "echo":
            c.fail("echo", "missing required section")
        return {}
    c.section(sec, "echo", {"pulses", "mu_coupling"})
    pulses = sec.get("pulses")
    if not isinstance(pulses, list) or len(pulses) != 2:
        c.fail("echo.pulses", "expected exactly two pulse tables")
    else:
        for i, p in enumerate(pulses):
            c.section(p, f"echo.pulses[{i}]", {"k", "eta", "amplitude"})
            k = c.number(p, f"echo.pulses[{i}]", "k", required=True, integer=True)
            if k == 0:
                c.fail(f"echo.pulses[{i}].k", "pulse modes must be nonzero")
            c.number(p, f"echo.pulses[{i}]", "eta", required=True)
            c.number(p, f"echo.pulses[{i}]", "amplitude", required=True)
        ks = [p.get("k") for p in pulses if isinstance(p.get("k"), (int, float))]
        if len(ks) == 2 and ks[0] + ks[1] == 0:
            c.fail("echo.pulses", "k1 + k2 = 0 carries no field; no echo mode")
    if "mu_coupling" in sec and not isinstance(sec["mu_coupling"], bool):
        c.fail("echo.mu_coupling", "expected a boolean")
    return dict(sec)


def _check_certify(c, sec, experiment):
    if sec is None:
        if experiment == "certify":
            c.fail("certify", "missing required section")
        return {}
    c.section(sec, "certify", {"bound", "k_max", "t_max", "t_points"})
    if sec.get("bound") not in ("exp-bd", "CR1", "CR1-riesz", "CR2"):
        c.fail("certify.bound", "must be one of exp-bd, CR1, CR1-riesz, CR2")
    c.number(sec, "certify", "k_max", lo=1, integer=True)
    c.number(sec, "certify", "t_max", lo_strict=0.0)
    c.number(sec, "certify", "t_points", lo=3, integer=True)
    return dict(sec)
