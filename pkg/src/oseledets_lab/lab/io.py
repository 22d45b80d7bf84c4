"""Bit-stable result emission: CSV tables, JSON summary and provenance."""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SCHEMA, ExperimentConfig

VERSION = "0.1.0"


@dataclass
class Table:
    header: tuple
    rows: list


@dataclass
class ResultBundle:
    kind: str
    summary: dict
    tables: dict = field(default_factory=dict)  # name -> Table
    passed: bool | None = None  # set by check kinds

    def table(self, name: str) -> Table:
        return self.tables[name]


def provenance(cfg: ExperimentConfig) -> dict:
    return {"config_sha256": cfg.sha256(), "seed": cfg.seed, "version": VERSION}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(t: Table) -> str:
    lines = [",".join(t.header)]
    lines += [",".join(_fmt(v) for v in row) for row in t.rows]
    return "\n".join(lines) + "\n"


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def summary_text(bundle: ResultBundle, cfg: ExperimentConfig) -> str:
    doc = {
        "schema": SCHEMA,
        "kind": bundle.kind,
        "passed": bundle.passed,
        "provenance": provenance(cfg),
        "config": cfg.semantic_dict(),
        "summary": bundle.summary,
        "tables": sorted(bundle.tables),
    }
    return json.dumps(_json_safe(doc), sort_keys=True, indent=2) + "\n"


def run_dir_name(cfg: ExperimentConfig) -> str:
    return f"{cfg.kind}-{cfg.sha256()[:12]}"


def write_bundle(bundle: ResultBundle, cfg: ExperimentConfig, out) -> Path:
    """Write into a temporary sibling directory, then move it into place.

    Readers never observe a half-written run.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    final = out / run_dir_name(cfg)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        for name, t in sorted(bundle.tables.items()):
            (tmp / f"{name}.csv").write_text(csv_text(t), encoding="utf-8")
        (tmp / "summary.json").write_text(summary_text(bundle, cfg), encoding="utf-8")
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return final


def read_summaries(out) -> list:
    out = Path(out)
    if not out.is_dir():
        return []
    docs = []
    for p in sorted(out.glob("*/summary.json")):
        if p.parent.name.startswith("."):
            continue
        with open(p, encoding="utf-8") as fh:
            docs.append((p.parent.name, json.load(fh)))
    return docs
