"""Experiment configuration: a TOML file with one task per run.

Grammar (all sections optional except ``[domain]``)::

    task = "spectrum"            # spectrum | resolvent | evolve | carleman
    seed = 0

    [domain]
    dim = 2                      # 1 or 2
    nx = 31                      # nodes along x (1D: n)
    ny = 31
    lx = 1.0                     # 1D: interval length
    ly = 1.0
    damped_side = "right"        # 1D: left | right | both
    damped_range = [0.0, 0.5]    # 2D only

    [coefficients]
    kind = "identity"            # identity | constant | samples
    matrix = [[1.0, 0.0], [0.0, 1.0]]   # kind = "constant"
    path = "coeffs.csv"          # kind = "samples", columns x, y, a11, a12, a22

    [damping]
    kind = "constant"            # constant | zero
    value = 1.0

    [output]
    dir = "out"

Task tables ``[spectrum]``, ``[resolvent]``, ``[evolve]`` and ``[carleman]``
hold the task parameters; defaults are listed in ``TASK_DEFAULTS``.
Relative paths in the file resolve against its directory; ``--out`` on the
command line is taken as given.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .domain import CoefficientField, DampingProfile, build_interval, build_rectangle, validate_coefficients
from .errors import ConfigurationError

__all__ = ["TASKS", "CARLEMAN_ACTIONS", "TASK_DEFAULTS", "ExperimentConfig", "load_config", "parse_config"]

TASKS = ("spectrum", "resolvent", "evolve", "carleman")
CARLEMAN_ACTIONS = ("verify-weight", "profile", "pointwise", "identity", "global")

TASK_DEFAULTS = {
    "spectrum": {"zero_radius": 1e-6, "dense_limit": 4000},
    "resolvent": {"tau_min": 1.0, "tau_max": 30.0, "steps": 59, "method": "auto", "dense_limit": 1000,
                  "probe_taus": [], "probe_C": 0.0},
    "evolve": {"T": 200.0, "dt": 0.05, "t_max": 0.0, "equilibrium": "conserved", "initial": "default"},
    "carleman": {"action": "pointwise", "direction": [1.0, 0.0], "offset": 0.1, "mu": 8.0, "lambda_c": 30.0,
                 "ns": 20, "reading": "min", "mu_min": 1.0, "mu_max": 10.0, "mu_count": 21,
                 "eps": [0.25, 0.5, 1.0, 2.0], "n_random": 5, "gap_csv": False, "nq": 16},
}

_TOP_KEYS = {"task", "seed", "domain", "coefficients", "damping", "output", *TASKS}
_DOMAIN_KEYS = {"dim", "nx", "ny", "lx", "ly", "damped_side", "damped_range"}


@dataclass
class ExperimentConfig:
    """Validated configuration; ``raw`` is the parsed file as read."""

    task: str
    seed: int
    domain_section: dict
    coefficients_section: dict
    damping_section: dict
    params: dict
    output_dir: Path
    base_dir: Path
    raw: dict = field(repr=False)
    inputs: list = field(default_factory=list)

    def build_domain(self):
        d = self.domain_section
        if d["dim"] == 1:
            return build_interval(d["nx"], d["lx"], d.get("damped_side", "right"))
        rng = d.get("damped_range")
        return build_rectangle(d["nx"], d["ny"], d["lx"], d["ly"], d.get("damped_side", "right"),
                               None if rng is None else tuple(rng))

    def build_coefficients(self, domain):
        c = self.coefficients_section
        kind = c.get("kind", "identity")
        if kind == "identity":
            field_ = CoefficientField.identity(domain)
        elif kind == "constant":
            field_ = CoefficientField.constant(domain, c["matrix"])
        else:
            field_ = CoefficientField.from_csv(domain, self.base_dir / c["path"])
        validate_coefficients(field_)
        return field_

    def build_damping(self, domain):
        c = self.damping_section
        if c.get("kind", "constant") == "zero":
            return DampingProfile.zero(domain)
        return DampingProfile.constant(domain, c.get("value", 1.0))

    def echo(self):
        """Normalized copy of the effective configuration (JSON-friendly)."""
        return {
            "task": self.task,
            "seed": self.seed,
            "domain": dict(self.domain_section),
            "coefficients": dict(self.coefficients_section),
            "damping": dict(self.damping_section),
            self.task: dict(self.params),
        }


def _err(key, msg):
    return ConfigurationError(f"config key '{key}': {msg}")


def _expect(section, key, types, where):
    v = section[key]
    if isinstance(v, bool) and bool not in types:
        raise _err(f"{where}.{key}", f"expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(v, types):
        raise _err(f"{where}.{key}", f"expected {'/'.join(t.__name__ for t in types)}, got {type(v).__name__}")
    return v


def parse_config(raw, task=None, seed=None, out=None, base_dir="."):
    """Validate a parsed TOML mapping; CLI overrides win over file values.

    Raises
    ------
    ConfigurationError
        Naming the offending key.
    """
    raw = copy.deepcopy(raw)
    base_dir = Path(base_dir)
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise _err(sorted(unknown)[0], "unknown key")
    file_task = raw.get("task")
    if task is None:
        task = file_task
    elif file_task is not None and file_task != task:
        raise _err("task", f"config says {file_task!r} but {task!r} was requested")
    if task not in TASKS:
        raise _err("task", f"must be one of {', '.join(TASKS)}, got {task!r}")
    extra = [t for t in TASKS if t in raw and t != task]
    if extra:
        raise _err(extra[0], f"section for a second task; exactly one task per run ({task!r})")

    if seed is None:
        seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise _err("seed", f"must be a nonnegative integer, got {seed!r}")

    if "domain" not in raw:
        raise _err("domain", "section is required")
    dom = dict(raw["domain"])
    bad = set(dom) - _DOMAIN_KEYS
    if bad:
        raise _err(f"domain.{sorted(bad)[0]}", "unknown key")
    if "dim" not in dom:
        raise _err("domain.dim", "is required")
    dim = _expect(dom, "dim", (int,), "domain")
    if dim not in (1, 2):
        raise _err("domain.dim", f"must be 1 or 2, got {dim}")
    for k in ("nx",) + (("ny",) if dim == 2 else ()):
        if k not in dom:
            raise _err(f"domain.{k}", "is required")
        if _expect(dom, k, (int,), "domain") < 3:
            raise _err(f"domain.{k}", "must be at least 3")
    for k in ("lx",) + (("ly",) if dim == 2 else ()):
        dom.setdefault(k, 1.0)
        if not _expect(dom, k, (int, float), "domain") > 0:
            raise _err(f"domain.{k}", "must be positive")
        dom[k] = float(dom[k])
    if dim == 1:
        for k in ("ny", "ly", "damped_range"):
            if k in dom:
                raise _err(f"domain.{k}", "not valid for dim = 1")
        dom.setdefault("damped_side", "right")
        if dom["damped_side"] not in ("left", "right", "both"):
            raise _err("domain.damped_side", "must be left, right or both for dim = 1")
    else:
        dom.setdefault("damped_side", "right")
        if dom["damped_side"] not in ("left", "right", "bottom", "top"):
            raise _err("domain.damped_side", "must be left, right, bottom or top")
        if "damped_range" in dom:
            r = dom["damped_range"]
            if not (isinstance(r, list) and len(r) == 2 and all(isinstance(v, (int, float)) for v in r)):
                raise _err("domain.damped_range", "must be a pair of numbers")
            dom["damped_range"] = [float(r[0]), float(r[1])]

    inputs = []
    coef = dict(raw.get("coefficients", {"kind": "identity"}))
    kind = coef.get("kind", "identity")
    if kind not in ("identity", "constant", "samples"):
        raise _err("coefficients.kind", f"must be identity, constant or samples, got {kind!r}")
    coef["kind"] = kind
    if kind == "constant" and "matrix" not in coef:
        raise _err("coefficients.matrix", "is required for kind = 'constant'")
    if kind == "samples":
        if "path" not in coef:
            raise _err("coefficients.path", "is required for kind = 'samples'")
        p = base_dir / coef["path"]
        if not p.is_file():
            raise _err("coefficients.path", f"file not found: {p}")
        inputs.append(p)

    damp = dict(raw.get("damping", {"kind": "constant", "value": 1.0}))
    dk = damp.get("kind", "constant")
    if dk not in ("constant", "zero"):
        raise _err("damping.kind", f"must be constant or zero, got {dk!r}")
    damp["kind"] = dk
    if dk == "constant":
        damp.setdefault("value", 1.0)
        if not _expect(damp, "value", (int, float), "damping") >= 0:
            raise _err("damping.value", "must be nonnegative")
        damp["value"] = float(damp["value"])

    params = dict(TASK_DEFAULTS[task])
    given = dict(raw.get(task, {}))
    bad = set(given) - set(params)
    if bad:
        raise _err(f"{task}.{sorted(bad)[0]}", "unknown key")
    for k, v in given.items():
        d = params[k]
        if isinstance(d, bool):
            ok = isinstance(v, bool)
        elif isinstance(d, float):
            ok = isinstance(v, (int, float)) and not isinstance(v, bool)
            v = float(v) if ok else v
        elif isinstance(d, int):
            ok = isinstance(v, int) and not isinstance(v, bool)
        elif isinstance(d, list):
            ok = isinstance(v, list)
        else:
            ok = isinstance(v, type(d))
        if not ok:
            raise _err(f"{task}.{k}", f"expected {type(d).__name__}, got {type(v).__name__}")
        params[k] = v
    if task == "carleman" and params["action"] not in CARLEMAN_ACTIONS:
        raise _err("carleman.action", f"must be one of {', '.join(CARLEMAN_ACTIONS)}")
    if task == "resolvent" and params["method"] not in ("auto", "dense-SVD", "inverse-iteration"):
        raise _err("resolvent.method", "must be auto, dense-SVD or inverse-iteration")
    if task == "evolve" and params["initial"] not in ("default", "zero"):
        raise _err("evolve.initial", "must be default or zero")
    if task == "evolve" and params["equilibrium"] not in ("conserved", "mean"):
        raise _err("evolve.equilibrium", "must be conserved or mean")

    if out is None:
        out = Path(raw.get("output", {}).get("dir", "out"))
        if not out.is_absolute():
            out = base_dir / out
    out = Path(out)
    return ExperimentConfig(task, seed, dom, coef, damp, params, out, base_dir, raw, inputs)


def load_config(path, task=None, seed=None, out=None):
    """Read and validate a TOML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from exc
    cfg = parse_config(raw, task, seed, out, base_dir=path.parent)
    cfg.inputs.insert(0, path)
    return cfg
