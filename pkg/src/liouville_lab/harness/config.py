"""Experiment configuration: a JSON document with five blocks and a suite name.

Every key is optional and falls back to the reference configuration
(``d=1``, ``L=16`` open chain, ``V_+`` uniform on ``[0, 1]``, ``E=0.1``,
``eta=1``, ``M=8``, ``I=[-2, 0]``).  Unknown keys are rejected, and every
validation problem is reported with its dotted key path.

Layout::

    {
      "geometry":   {"d": 1, "L": 16, "a": 1.0, "boundary": "open"},
      "disorder":   {"v_plus": {"distribution": "uniform", "max": 1.0},
                     "v_minus": {"distribution": "uniform", "max": 0.0},
                     "link_disorder": 0.0, "B": 0.0, "dimerization": 0.0,
                     "form_bound_alpha": 0.0,
                     "M": 8, "master_seed": 0},
      "field":      {"E": [0.1], "eta": 1.0},
      "propagator": {"interval": [-2.0, 0.0], "k0": 4, "tol": 8e-6, "cap": 16384},
      "liouville":  {"beta": "inf", "E_F": 4.6, "t_min": -8.0,
                     "quadrature_order": 8, "t_grid": [-2.0, -1.5, -1.0, -0.5, 0.0]},
      "suite": "acceptance"
    }
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..lattice_model import DisorderModel, FieldProfile, LatticeGeometry
from ..liouville import EquilibriumSpec

SUITES = ("smoke", "acceptance", "convergence")

DEFAULTS: dict = {
    "geometry": {"d": 1, "L": 16, "a": 1.0, "boundary": "open"},
    "disorder": {
        "v_plus": {"distribution": "uniform", "max": 1.0},
        "v_minus": {"distribution": "uniform", "max": 0.0},
        "link_disorder": 0.0,
        "B": 0.0,
        "dimerization": 0.0,
        "form_bound_alpha": 0.0,
        "M": 8,
        "master_seed": 0,
    },
    "field": {"E": [0.1], "eta": 1.0},
    "propagator": {"interval": [-2.0, 0.0], "k0": 4, "tol": 8e-6, "cap": 16384},
    "liouville": {
        "beta": "inf",
        "E_F": 4.6,
        "t_min": -8.0,
        "quadrature_order": 8,
        "t_grid": [-2.0, -1.5, -1.0, -0.5, 0.0],
    },
    "suite": "acceptance",
}

DISTRIBUTIONS = ("uniform",)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def _merge(base: dict, override: dict, path: str, errors: list) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        p = f"{path}.{key}" if path else key
        if key not in base:
            errors.append((p, "unknown key"))
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                errors.append((p, "must be an object"))
                continue
            out[key] = _merge(base[key], value, p, errors)
        else:
            out[key] = value
    return out


def _number(raw: dict, path: str, errors: list, *, integer=False, allow_inf=False):
    keys = path.split(".")
    value = raw
    for k in keys:
        value = value[k]
    if allow_inf and value in ("inf", "Infinity", None):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append((path, "must be a number"))
        return None
    if integer and not float(value).is_integer():
        errors.append((path, "must be an integer"))
        return None
    if not math.isfinite(value) and not (allow_inf and value == math.inf):
        errors.append((path, "must be finite"))
        return None
    return int(value) if integer else float(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``raw`` is the fully merged JSON document."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError([("", "configuration must be a JSON object")])
        errors: list = []
        raw = _merge(DEFAULTS, data, "", errors)
        if not errors:
            _validate(raw, errors)
        if errors:
            raise ConfigError(errors)
        return cls(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read and validate a JSON file.  ``OSError`` propagates for I/O problems."""
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([("", f"invalid JSON: {exc}")]) from None
        return cls.from_dict(data)

    @classmethod
    def reference(cls, **overrides) -> "ExperimentConfig":
        return cls.from_dict(overrides)

    def override(self, data: dict) -> "ExperimentConfig":
        """Apply a partial document on top of this one (used for CLI flags)."""
        errors: list = []
        raw = _merge(self.raw, data, "", errors)
        if errors:
            raise ConfigError(errors)
        return ExperimentConfig.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2)

    # -- typed views ------------------------------------------------------

    @property
    def suite(self) -> str:
        return self.raw["suite"]

    @property
    def geometry(self) -> LatticeGeometry:
        g = self.raw["geometry"]
        L = g["L"]
        shape = tuple(L) if isinstance(L, list) else (L,) * g["d"]
        return LatticeGeometry(shape, spacing=float(g["a"]), boundary=g["boundary"])

    @property
    def disorder(self) -> DisorderModel:
        d = self.raw["disorder"]
        return DisorderModel(
            v_plus_max=float(d["v_plus"]["max"]),
            v_minus_max=float(d["v_minus"]["max"]),
            link_disorder=float(d["link_disorder"]),
            magnetic_field=float(d["B"]),
            dimerization=float(d["dimerization"]),
        )

    @property
    def realizations(self) -> int:
        return int(self.raw["disorder"]["M"])

    @property
    def master_seed(self) -> int:
        return int(self.raw["disorder"]["master_seed"])

    @property
    def profile(self) -> FieldProfile:
        f = self.raw["field"]
        return FieldProfile([float(e) for e in f["E"]], float(f["eta"]))

    @property
    def interval(self) -> tuple:
        lo, hi = self.raw["propagator"]["interval"]
        return float(lo), float(hi)

    @property
    def equilibrium(self) -> EquilibriumSpec:
        lv = self.raw["liouville"]
        beta = math.inf if lv["beta"] in ("inf", "Infinity", None) else float(lv["beta"])
        return EquilibriumSpec(beta, float(lv["E_F"]))


def _validate(raw: dict, errors: list) -> None:
    g = raw["geometry"]
    d = _number(raw, "geometry.d", errors, integer=True)
    if d is not None and not 1 <= d <= 3:
        errors.append(("geometry.d", "must be 1, 2 or 3"))
    L = g["L"]
    Ls = L if isinstance(L, list) else [L]
    if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in Ls):
        errors.append(("geometry.L", "must be a positive integer or a list of them"))
    elif isinstance(L, list) and d is not None and len(L) != d:
        errors.append(("geometry.L", f"needs {d} entries"))
    a = _number(raw, "geometry.a", errors)
    if a is not None and not a > 0:
        errors.append(("geometry.a", "must be > 0"))
    if g["boundary"] not in ("open", "periodic"):
        errors.append(("geometry.boundary", "must be 'open' or 'periodic'"))

    dis = raw["disorder"]
    for name in ("v_plus", "v_minus"):
        block = dis[name]
        if not isinstance(block, dict) or set(block) - {"distribution", "max"}:
            errors.append((f"disorder.{name}", "expects keys 'distribution' and 'max'"))
            continue
        if block.get("distribution", "uniform") not in DISTRIBUTIONS:
            errors.append((f"disorder.{name}.distribution", f"must be one of {DISTRIBUTIONS}"))
        m = _number(raw, f"disorder.{name}.max", errors)
        if m is not None and m < 0:
            errors.append((f"disorder.{name}.max", "must be >= 0"))
    for name in ("link_disorder",):
        v = _number(raw, f"disorder.{name}", errors)
        if v is not None and v < 0:
            errors.append((f"disorder.{name}", "must be >= 0"))
    _number(raw, "disorder.B", errors)
    dim = _number(raw, "disorder.dimerization", errors)
    if dim is not None and not 0 <= dim < 1:
        errors.append(("disorder.dimerization", "must lie in [0, 1)"))
    alpha = _number(raw, "disorder.form_bound_alpha", errors)
    if alpha is not None and not 0 <= alpha < 1:
        errors.append(("disorder.form_bound_alpha", "must satisfy 0 <= alpha < 1"))
    M = _number(raw, "disorder.M", errors, integer=True)
    if M is not None and M < 1:
        errors.append(("disorder.M", "must be >= 1"))
    seed = _number(raw, "disorder.master_seed", errors, integer=True)
    if seed is not None and seed < 0:
        errors.append(("disorder.master_seed", "must be >= 0"))

    E = raw["field"]["E"]
    if not isinstance(E, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in E):
        errors.append(("field.E", "must be a list of numbers"))
    elif d is not None and len(E) != d:
        errors.append(("field.E", f"needs {d} entries"))
    eta = _number(raw, "field.eta", errors)
    if eta is not None and not eta > 0:
        errors.append(("field.eta", "must be > 0"))

    p = raw["propagator"]
    iv = p["interval"]
    if not (isinstance(iv, list) and len(iv) == 2 and all(isinstance(v, (int, float)) for v in iv)):
        errors.append(("propagator.interval", "must be [lo, hi]"))
    elif not iv[0] < iv[1]:
        errors.append(("propagator.interval", "must satisfy lo < hi"))
    k0 = _number(raw, "propagator.k0", errors, integer=True)
    if k0 is not None and k0 < 1:
        errors.append(("propagator.k0", "must be >= 1"))
    tol = _number(raw, "propagator.tol", errors)
    if tol is not None and not tol > 0:
        errors.append(("propagator.tol", "must be > 0"))
    cap = _number(raw, "propagator.cap", errors, integer=True)
    if cap is not None and k0 is not None and cap < k0:
        errors.append(("propagator.cap", "must be >= k0"))

    lv = raw["liouville"]
    beta = _number(raw, "liouville.beta", errors, allow_inf=True)
    if beta is not None and not beta > 0:
        errors.append(("liouville.beta", "must be > 0"))
    _number(raw, "liouville.E_F", errors)
    t_min = _number(raw, "liouville.t_min", errors)
    if t_min is not None and not t_min < 0:
        errors.append(("liouville.t_min", "must be < 0"))
    q = _number(raw, "liouville.quadrature_order", errors, integer=True)
    if q is not None and q < 1:
        errors.append(("liouville.quadrature_order", "must be >= 1"))
    grid = lv["t_grid"]
    if not isinstance(grid, list) or not grid or not all(isinstance(v, (int, float)) for v in grid):
        errors.append(("liouville.t_grid", "must be a non-empty list of numbers"))
    elif t_min is not None and min(grid) <= t_min:
        errors.append(("liouville.t_grid", "every time must exceed liouville.t_min"))

    if raw["suite"] not in SUITES:
        errors.append(("suite", f"must be one of {SUITES}"))

    if not errors:
        try:
            ExperimentConfig(raw).geometry
            ExperimentConfig(raw).disorder.sample(ExperimentConfig(raw).geometry, 0)
        except ValueError as exc:
            errors.append(("geometry", str(exc)))


def as_jsonable(value: Any):
    """Floats with ``inf``/``nan`` become strings so reports stay strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: as_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_jsonable(v) for v in value]
    return value
