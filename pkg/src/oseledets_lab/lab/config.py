"""Flat YAML experiment configuration with schema validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace

import yaml

from ..dynamics import BaseMap, Observable, RoofFunction, SuspensionFlow
from ..errors import ConfigError

SCHEMA = "oseledets-lab/1"
KINDS = ("lyapunov", "regularity", "entropy", "lp-test", "perron-demo", "certify-b", "smooth-majorant", "report")
# keys that change where or how fast results are produced, never what they are
NON_SEMANTIC = ("workers", "out")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    schema: str = SCHEMA
    # flow
    A: tuple = ((2, 1), (1, 1))
    kappa: float = 0.0
    roof_r0: float = 1.0
    roof_terms: tuple = ()  # rows of (k1, k2, amp, phase)
    # observable
    u_const: float = 0.0
    u_terms: tuple = ((1, 0, 0.5, 0.0, 0),)  # rows of (k1, k2, a, b, j)
    # sampling and horizons
    eps: tuple = (0.25,)
    delta: float = 0.05
    T: float = 1000.0
    T_max: float = 200.0
    N: int = 1000
    seed: int = 0
    workers: int = 1
    out: str = "results"
    allow_degenerate: bool = False
    # entropy and tails
    t_max: float = 4.0
    t_step: float = 0.05
    n_periodic: int = 12
    mc_T: float = 50.0
    mc_N: int = 0  # 0 skips the Monte Carlo pressure curve
    hill_k: int = 500
    # perron demo
    systems: int = 50
    k_max: int = 5
    # certify-b
    T_grid: tuple = (50.0, 100.0, 200.0, 400.0, 800.0)
    # smooth-majorant
    grid_csv: str = ""
    grid_n: int = 64

    def flow(self) -> SuspensionFlow:
        base = BaseMap(self.A, self.kappa)
        roof = RoofFunction(self.roof_r0, tuple(((int(r[0]), int(r[1])), r[2], r[3]) for r in self.roof_terms))
        return SuspensionFlow(base, roof)

    def observable(self) -> Observable:
        return Observable(self.u_const, tuple(((int(r[0]), int(r[1])), r[2], r[3], int(r[4])) for r in self.u_terms))

    def semantic_dict(self) -> dict:
        d = asdict(self)
        for k in NON_SEMANTIC:
            d.pop(k)
        return d

    def sha256(self) -> str:
        blob = json.dumps(_plain(self.semantic_dict()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(x):
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


def _tuplify(x):
    return tuple(_tuplify(v) for v in x) if isinstance(x, (list, tuple)) else x


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT = {"N", "seed", "workers", "n_periodic", "mc_N", "hill_k", "systems", "k_max", "grid_n"}
_FLOAT = {"kappa", "roof_r0", "u_const", "delta", "T", "T_max", "t_max", "t_step", "mc_T"}
_ROWS = {"A": 2, "roof_terms": 4, "u_terms": 5}


def _check_number(name, v, integer):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", field=name)
    if integer:
        if float(v) != int(v):
            raise ConfigError(f"expected an integer, got {v!r}", field=name)
        return int(v)
    if not math.isfinite(float(v)):
        raise ConfigError("must be finite", field=name)
    return float(v)


def validate(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping", field="")
    schema = raw.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}", field="schema")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}", field="kind")
    vals = {}
    for key, v in raw.items():
        if key not in _FIELDS:
            raise ConfigError("unknown key", field=key)
        if key in _INT:
            v = _check_number(key, v, True)
        elif key in _FLOAT:
            v = _check_number(key, v, False)
        elif key in _ROWS:
            if not isinstance(v, (list, tuple)):
                raise ConfigError("expected a list of rows", field=key)
            for i, row in enumerate(v):
                if not isinstance(row, (list, tuple)) or len(row) != _ROWS[key]:
                    raise ConfigError(f"row must have {_ROWS[key]} entries", field=f"{key}[{i}]")
                for j, e in enumerate(row):
                    _check_number(f"{key}[{i}][{j}]", e, False)
            v = _tuplify(v)
        elif key in ("eps", "T_grid"):
            v = v if isinstance(v, (list, tuple)) else [v]
            v = tuple(_check_number(f"{key}[{i}]", e, False) for i, e in enumerate(v))
            if not v:
                raise ConfigError("must not be empty", field=key)
        elif key == "allow_degenerate" and not isinstance(v, bool):
            raise ConfigError("expected true or false", field=key)
        vals[key] = v
    cfg = ExperimentConfig(**vals)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: ExperimentConfig):
    positive = {"N": cfg.N, "workers": cfg.workers, "T": cfg.T, "T_max": cfg.T_max, "delta": cfg.delta,
                "t_max": cfg.t_max, "t_step": cfg.t_step, "mc_T": cfg.mc_T, "hill_k": cfg.hill_k,
                "systems": cfg.systems, "k_max": cfg.k_max, "grid_n": cfg.grid_n, "n_periodic": cfg.n_periodic}
    for name, v in positive.items():
        if v <= 0:
            raise ConfigError("must be positive", field=name)
    if cfg.n_periodic > 14:
        raise ConfigError("periodic-orbit sums are limited to n <= 14", field="n_periodic")
    if cfg.mc_N < 0:
        raise ConfigError("must be >= 0", field="mc_N")
    try:
        BaseMap(cfg.A, cfg.kappa)
    except ValueError as exc:
        raise ConfigError(str(exc), field="kappa" if "kappa" in str(exc) else "A") from exc
    try:
        RoofFunction(cfg.roof_r0, tuple(((int(r[0]), int(r[1])), r[2], r[3]) for r in cfg.roof_terms))
    except ValueError as exc:
        raise ConfigError(str(exc), field="roof_terms") from exc
    flow = cfg.flow()
    u = cfg.observable()
    if cfg.kind in ("regularity", "lp-test") and not cfg.allow_degenerate:
        chi = flow.chi(u)
        top = u.sup_norm - chi
        for i, e in enumerate(cfg.eps):
            if not 0 < e < top:
                raise ConfigError(f"eps must lie in (0, {top:.6g})", field=f"eps[{i}]")
    if cfg.kind in ("certify-b", "smooth-majorant") and cfg.delta >= 1:
        raise ConfigError("delta must be < 1", field="delta")


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", field="") from exc
    raw = dict(raw or {})
    for k, v in overrides.items():
        if v is not None:
            raw[k] = v
    return validate(raw)


def with_kind(cfg: ExperimentConfig, kind: str) -> ExperimentConfig:
    return replace(cfg, kind=kind)
