"""Run configuration: YAML file plus flag overrides, domain specifications."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields

import jsonschema
import numpy as np
import yaml

from . import green
from .errors import ConfigError, NumericError
from .realization import FullLaplacian, PinnedLaplacian, SyntheticRealization

__all__ = ["RunConfig", "load_config", "make_model", "make_domain", "parse_lambda_grid",
           "config_hash", "REPORT_SCHEMA", "validate_report"]

MODELS = ("pinned", "full", "synthetic")
COMMANDS = ("spectrum", "flow", "instability", "certify", "audit")


@dataclass
class RunConfig:
    command: str = "spectrum"
    model: str = "pinned"
    quad_order: int = 96
    domain: object = "friedrichs"
    base: object = "friedrichs"
    count: int = 5
    lambda_grid: object = None
    truncation: int = 20000
    seed: int = 0
    M: float = 5.0
    n_samples: int = 200
    sample_scale: float = 5.0
    n_scan: int = 10
    witness_lambda: float = -1000.0
    oracle: bool = False
    oracle_n: int = 4000
    tolerances: dict = field(default_factory=lambda: {"rank": 1e-8, "structure": 1e-10})
    synthetic: dict = field(default_factory=lambda: {
        "eig_scale": float(np.pi**2), "eig_power": 2.0, "row_powers": [1.0]})
    out_dir: str = "runs"

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("quad_order", "count", "truncation", "n_samples", "n_scan", "oracle_n"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {v!r}")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.quad_order < 16:
            raise ConfigError("quad_order must be >= 16")
        if self.oracle and self.oracle_n < 100:
            raise ConfigError("oracle_n must be >= 100")
        try:
            self.M = float(self.M)
            self.witness_lambda = float(self.witness_lambda)
            self.sample_scale = float(self.sample_scale)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.M < 0:
            raise ConfigError("M must be >= 0")
        if self.lambda_grid is not None:
            self.lambda_grid = parse_lambda_grid(self.lambda_grid).tolist()
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
    known = {f.name for f in fields(RunConfig)}
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


def parse_lambda_grid(spec) -> np.ndarray:
    """A list of numbers, a comma string, or ``geom:a:b:n`` / ``lin:a:b:n``."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        try:
            return np.array([float(v) for v in spec])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad lambda grid: {exc}") from None
    if not isinstance(spec, str):
        raise ConfigError(f"bad lambda grid {spec!r}")
    s = spec.strip()
    m = re.fullmatch(r"(geom|lin):([^:]+):([^:]+):(\d+)", s)
    try:
        if m:
            a, b, n = float(m.group(2)), float(m.group(3)), int(m.group(4))
            if m.group(1) == "lin":
                return np.linspace(a, b, n)
            if a * b <= 0:
                raise ConfigError("geometric grid endpoints must share a sign")
            return np.sign(a) * np.geomspace(abs(a), abs(b), n)
        return np.array([float(v) for v in s.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad lambda grid {spec!r}: {exc}") from None


# -- models and domains ----------------------------------------------------------

def make_model(cfg: RunConfig):
    if cfg.model == "pinned":
        return PinnedLaplacian(cfg.quad_order)
    if cfg.model == "full":
        return FullLaplacian(cfg.quad_order)
    syn = cfg.synthetic or {}
    try:
        scale = float(syn.get("eig_scale", np.pi**2))
        power = float(syn.get("eig_power", 2.0))
        rows = [float(p) for p in syn.get("row_powers", [1.0])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic parameters: {exc}") from None
    return SyntheticRealization.from_rules(
        lambda k: scale * k**power, [lambda k, p=p: k**p for p in rows], cfg.truncation)


_NAMED = {
    "pinned": {
        "dirichlet": [[0, 1]],
        "neumann": [[1, 0]],
    },
    "full": {
        "dirichlet": [[0, 1, 0, 0], [0, 0, 0, 1]],
        "neumann": [[1, 0, 0, 0], [0, 0, 1, 0]],
        "periodic": [[1, 0, 1, 0], [0, 1, 0, 1]],
        "dirichlet-neumann": [[0, 1, 0, 0], [0, 0, 1, 0]],
        "neumann-dirichlet": [[1, 0, 0, 0], [0, 0, 0, 1]],
    },
}


def _num(v) -> complex:
    try:
        if isinstance(v, str):
            return complex(v.replace(" ", "").replace("i", "j"))
        return complex(v)
    except (TypeError, ValueError):
        raise ConfigError(f"not a number: {v!r}") from None


def _matrix(v, shape_hint: int | None = None) -> np.ndarray:
    a = np.array([[_num(x) for x in np.atleast_1d(row)] for row in np.atleast_1d(v)]
                 if isinstance(v, (list, tuple)) else [[_num(v)]])
    if a.ndim == 1:
        a = a[None, :]
    return a


def make_domain(model, spec) -> green.LagrangianDomain:
    """Build a selfadjoint domain from a name, ``robin(a, b)``, or a mapping.

    Mappings: ``{trace_matrix: [[...], ...]}`` (rows are trace vectors) or
    ``{chart: {base: <spec>, sigma: [[...]]}}``.  ``chart(<name>, s)`` is the
    scalar shorthand for d = 1.
    """
    if isinstance(model, SyntheticRealization):
        raise ConfigError("the synthetic model has no boundary conditions")
    try:
        return _make_domain(model, spec)
    except NumericError as exc:
        raise ConfigError(f"domain {spec!r} is not a selfadjoint domain: {exc}") from None


def _make_domain(model, spec):
    if isinstance(spec, dict):
        if "trace_matrix" in spec or "trace-matrix" in spec:
            rows = _matrix(spec.get("trace_matrix", spec.get("trace-matrix")))
            return _lagrangian(model, rows)
        if "chart" in spec:
            ch = spec["chart"]
            if not isinstance(ch, dict) or "base" not in ch or "sigma" not in ch:
                raise ConfigError("chart needs 'base' and 'sigma'")
            return _chart(model, _make_domain(model, ch["base"]), _matrix(ch["sigma"]))
        if "robin" in spec:
            a, b = spec["robin"]
            return _robin(model, float(a), float(b))
        raise ConfigError(f"unknown domain mapping keys {sorted(spec)}")
    if not isinstance(spec, str):
        raise ConfigError(f"bad domain spec {spec!r}")
    s = spec.strip().lower()
    if s == "friedrichs":
        return model.friedrichs()
    m = re.fullmatch(r"robin\(\s*([^,]+),\s*([^)]+)\)", s)
    if m:
        return _robin(model, float(m.group(1)), float(m.group(2)))
    m = re.fullmatch(r"chart\(\s*([a-z\-]+)\s*,\s*([^)]+)\)", s)
    if m:
        return _chart(model, _make_domain(model, m.group(1)), _matrix(m.group(2)))
    named = _NAMED[model.name]
    if s not in named:
        raise ConfigError(f"unknown domain {spec!r} for the {model.name} model; "
                          f"known: {sorted(named) + ['friedrichs', 'robin(a, b)']}")
    return _lagrangian(model, np.array(named[s], dtype=complex))


def _lagrangian(model, rows):
    if rows.shape[1] != len(model.trace_rows):
        raise ConfigError(f"trace vectors need {len(model.trace_rows)} entries")
    if rows.shape[0] != model.d:
        raise ConfigError(f"the {model.name} model needs {model.d} trace vectors")
    return model.lagrangian(rows)


def _robin(model, a: float, b: float):
    # a u(0) + b u'(0) = 0 (and a u(1) - b u'(1) = 0 for the full model)
    if a == 0 and b == 0:
        raise ConfigError("robin(0, 0) is not a boundary condition")
    if model.name == "pinned":
        return model.lagrangian([[b, -a]])
    return model.lagrangian([[b, -a, 0, 0], [0, 0, b, a]])


def _chart(model, base, sigma):
    if sigma.shape != (model.d, model.d):
        raise ConfigError(f"sigma must be {model.d} x {model.d}")
    return green.graph_domain(green.GraphChart(base, sigma))


# -- report schema ---------------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "command", "config", "config_hash", "status",
                 "exit_code", "results", "diagnostics"],
    "properties": {
        "tool": {"type": "string"},
        "version": {"type": "string"},
        "command": {"enum": list(COMMANDS)},
        "config": {"type": "object"},
        "config_hash": {"type": "string"},
        "status": {"enum": ["ok", "config-error", "numeric-error", "not-certifiable"]},
        "exit_code": {"enum": [0, 2, 3, 4]},
        "results": {"type": "object"},
        "diagnostics": {"type": "object"},
        "error": {"type": "string"},
    },
}

def validate_report(rep: dict) -> list[str]:
    """Problems found when checking ``rep`` against :data:`REPORT_SCHEMA`."""
    validator = jsonschema.Draft7Validator(REPORT_SCHEMA)
    return [f"{'/'.join(map(str, e.path)) or 'report'}: {e.message}"
            for e in validator.iter_errors(rep)]
