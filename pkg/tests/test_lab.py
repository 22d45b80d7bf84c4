from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oseledets_lab.errors import ConfigError, InsufficientSamples, NoData, TooFewExceedances
from oseledets_lab.lab.cli import main
from oseledets_lab.lab.config import load_config, validate
from oseledets_lab.lab.io import Table, csv_text
from oseledets_lab.lab.parallel import tree_sum
from oseledets_lab.lab.runner import run
from oseledets_lab.lab.tails import hill_from_logs, hill_profile, hill_tail_index, lp_report

LOG_LAMBDA = math.log((3 + math.sqrt(5)) / 2)


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# config ---------------------------------------------------------------------


def test_defaults_validate():
    cfg = validate({"kind": "regularity"})
    assert cfg.eps == (0.25,) and cfg.schema == "oseledets-lab/1"


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"kind": "nope"}, "kind"),
        ({"kind": "regularity", "schema": "v0"}, "schema"),
        ({"kind": "regularity", "bogus": 1}, "bogus"),
        ({"kind": "regularity", "N": 1.5}, "N"),
        ({"kind": "regularity", "N": 0}, "N"),
        ({"kind": "regularity", "eps": [0.1, 0.7]}, "eps[1]"),
        ({"kind": "regularity", "u_terms": [[1, 0, 0.5]]}, "u_terms[0]"),
        ({"kind": "regularity", "A": [[1, 0], [0, 1]]}, "A"),
        ({"kind": "regularity", "roof_r0": 0.1, "roof_terms": [[1, 0, 0.5, 0]]}, "roof_terms"),
        ({"kind": "regularity", "T_max": "long"}, "T_max"),
    ],
)
def test_config_errors_name_the_field(raw, field):
    with pytest.raises(ConfigError) as info:
        validate(raw)
    assert info.value.field == field


def test_degenerate_branch_can_be_requested():
    cfg = validate({"kind": "regularity", "eps": [0.7], "allow_degenerate": True})
    assert cfg.eps == (0.7,)


def test_hash_ignores_workers_and_out(tmp_path):
    p = _write(tmp_path, "kind: lyapunov\nN: 2\n")
    a = load_config(p, workers=1, out="a")
    b = load_config(p, workers=4, out="b")
    assert a.sha256() == b.sha256()
    assert load_config(p, seed=5).sha256() != a.sha256()


def test_invalid_yaml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "kind: [unclosed\n"))


# tails ----------------------------------------------------------------------


def test_hill_on_exact_pareto():
    x = np.random.default_rng(1).pareto(2.0, 100_000) + 1.0
    est = hill_tail_index(x, 1000)
    assert est.p_hat == pytest.approx(2.0, abs=0.15)
    assert est.ci_low < est.p_hat < est.ci_high


def test_hill_is_seeded():
    x = np.random.default_rng(2).pareto(3.0, 5000) + 1.0
    assert hill_tail_index(x, 200, seed=4) == hill_tail_index(x, 200, seed=4)


def test_hill_rejects_constant_and_small_samples():
    with pytest.raises(TooFewExceedances):
        hill_tail_index(np.full(1000, 3.0), 100)
    with pytest.raises(TooFewExceedances):
        hill_tail_index(np.arange(1.0, 11.0), 6)
    with pytest.raises(ValueError):
        hill_tail_index(np.array([1.0, -1.0, 2.0, 3.0]), 1)


def test_exponential_tail_drifts_with_k():
    # lighter than any power law: the estimate keeps growing as k shrinks
    x = np.random.default_rng(3).exponential(1.0, 100_000) + 1.0
    prof = hill_profile(np.log(x), [10_000, 1000, 100])
    assert prof[0] < prof[1] < prof[2]


@given(st.floats(1.0, 5.0))
def test_hill_is_scale_invariant(c):
    logs = np.log(np.random.default_rng(0).pareto(2.0, 2000) + 1.0)
    a = hill_from_logs(logs, 100, n_boot=10)
    b = hill_from_logs(logs + math.log(c), 100, n_boot=10)
    assert a.p_hat == pytest.approx(b.p_hat, rel=1e-9)


class _FlatProfile:
    def H_at(self, a):
        return np.atleast_1d(np.full(np.shape(np.atleast_1d(a)), 0.3))


def test_lp_report_sentinel_for_bounded_records():
    z = np.zeros(2000)
    rep = lp_report(z, z, np.zeros(2000, dtype=bool), _FlatProfile(), 0.25, 0.0, 0.5)
    assert math.isinf(rep.hill_T.p_hat) and rep.T_pass and rep.D_pass


def test_lp_report_needs_untruncated_records():
    z = np.zeros(100)
    with pytest.raises(InsufficientSamples):
        lp_report(z, z, np.arange(100) < 5, _FlatProfile(), 0.25, 0.0, 0.5)


# io and parallel ------------------------------------------------------------


def test_csv_formatting():
    text = csv_text(Table(("a", "b", "c"), [(1, 0.1, True)]))
    assert text == "a,b,c\n1,0.10000000000000001,1\n"


def test_tree_sum_is_order_fixed():
    v = np.random.default_rng(0).standard_normal(1001)
    assert tree_sum(v) == tree_sum(list(v))
    assert tree_sum(v) == pytest.approx(v.sum(), abs=1e-12)
    assert tree_sum([]) == 0.0


# runner and cli -------------------------------------------------------------


def test_lyapunov_run():
    b = run(validate({"kind": "lyapunov", "N": 2, "T": 3000.0, "seed": 1}))
    assert b.summary["lambda_plus"] == pytest.approx(LOG_LAMBDA, abs=2e-3)
    assert b.summary["lambda_minus"] == pytest.approx(-LOG_LAMBDA, abs=2e-3)


def test_report_without_runs(tmp_path):
    with pytest.raises(NoData):
        run(validate({"kind": "report", "out": str(tmp_path / "empty")}))


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, "kind: smooth-majorant\ndelta: 0.05\ngrid_n: 64\n")
    bad = _write(tmp_path, "kind: regularity\neps: [2.0]\n", "bad.yaml")
    tight = _write(tmp_path, "kind: smooth-majorant\ndelta: 0.001\ngrid_n: 32\n", "tight.yaml")
    out = tmp_path / "out"
    assert main(["smooth-majorant", "--config", str(good), "--out", str(out)]) == 0
    assert main(["regularity", "--config", str(bad), "--out", str(out)]) == 2
    assert main(["smooth-majorant", "--config", str(tight), "--out", str(out)]) == 3
    assert main(["report", "--config", str(good), "--out", str(out)]) == 0
    assert main(["report", "--config", str(good), "--out", str(tmp_path / "none")]) == 1
    runs = sorted(p.name for p in out.iterdir())
    assert not any(r.startswith(".partial") for r in runs)
    summary = json.loads((out / [r for r in runs if r.startswith("report")][0] / "summary.json").read_text())
    assert summary["schema"] == "oseledets-lab/1" and summary["summary"]["runs"] == 2


def test_outputs_identical_across_runs_and_workers(tmp_path):
    cfg = _write(tmp_path, "kind: regularity\nN: 4500\nT_max: 40\neps: [0.1, 0.3]\nseed: 9\n")
    dirs = []
    for i, w in enumerate((1, 2, 1)):
        out = tmp_path / f"o{i}"
        assert main(["regularity", "--config", str(cfg), "--out", str(out), "--workers", str(w)]) == 0
        (d,) = list(out.iterdir())
        dirs.append(d)
    files = sorted(p.name for p in dirs[0].iterdir())
    assert files == ["regularity.csv", "summary.json"]
    for name in files:
        ref = (dirs[0] / name).read_bytes()
        assert all((d / name).read_bytes() == ref for d in dirs[1:])
