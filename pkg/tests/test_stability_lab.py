import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import power_law_points
from dtnlab import ExperimentConfig, StabilityReport, fit_exponent, run_sweep, verify_bounds
from dtnlab.potentials import compact_bump, gaussian_bump
from dtnlab.stability_lab import ConfigError, FitRefusal

BUMP = compact_bump(1.0, (0.02, -0.03), 0.35, order=5)


def small_config(**kw):
    base = dict(perturbation=BUMP, eps=(0.1, 0.01, 0.001), n=32, p_max=48.0, n_p=193, i2_band=(12.0, 32.0, 5))
    base.update(kw)
    return ExperimentConfig(**base)


def test_exact_power_law():
    pts = power_law_points(2.5, 3.0, [1e-1, 1e-2, 1e-3, 1e-4])
    assert fit_exponent(pts).slope == pytest.approx(-3.0, abs=1e-10)


def test_constant_points():
    assert fit_exponent([(1e-1, 0.5), (1e-3, 0.5), (1e-5, 0.5)]).slope == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_noisy_power_law(seed):
    deltas = np.geomspace(1e-2, 1e-8, 8)
    noise = 1 + 0.05 * np.random.default_rng(seed).uniform(-1, 1, len(deltas))
    assert fit_exponent(power_law_points(1.0, 3.0, deltas, noise)).slope == pytest.approx(-3.0, abs=0.2)


def test_fit_refusals():
    with pytest.raises(FitRefusal):
        fit_exponent([(1e-2, 1.0), (1e-3, 0.5)])
    with pytest.raises(FitRefusal, match="decades"):
        fit_exponent([(1e-2, 1.0), (5e-3, 0.5), (2e-3, 0.3)])
    with pytest.raises(FitRefusal):
        fit_exponent([(1e-2, 1.0), (1e-3, 0.0), (1e-5, 0.3)])


@pytest.mark.parametrize(
    "kw,path",
    [
        (dict(eps=(0.1, 0.1)), "$.eps"),
        (dict(eps=(0.01, 0.1)), "$.eps"),
        (dict(eps=()), "$.eps"),
        (dict(m=2), "$.m"),
        (dict(alpha=1.0), "$.alpha"),
        (dict(i2_band=(12.0, 80.0, 5)), "$.i2_band"),
    ],
)
def test_config_validation(kw, path):
    with pytest.raises(ConfigError) as info:
        small_config(**kw)
    assert info.value.path == path


def test_config_round_trip_and_strict_keys():
    cfg = small_config(background=gaussian_bump(0.2, (0, 0), 0.1))
    assert ExperimentConfig.from_dict(cfg.to_dict()).hash() == cfg.hash()
    bad = cfg.to_dict() | {"colour": "red"}
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(bad)
    assert "colour" in str(info.value)
    nested = cfg.to_dict()
    nested["perturbation"] = dict(nested["perturbation"], sigma=1)
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(nested)
    assert info.value.path.startswith("$.perturbation")


def test_hash_ignores_plumbing():
    assert small_config(workers=2, output_dir="/tmp/x").hash() == small_config().hash()
    assert small_config(seed=1).hash() != small_config().hash()


def test_identical_potentials_give_exact_record():
    rep = run_sweep(small_config(eps=(0.0,)))
    (rec,) = rep.records
    assert rec.status == "exact" and rec.delta == 0 and rec.sup_err == 0
    ledger = verify_bounds(rep)
    assert ledger.passed


def test_small_sweep_shape():
    rep = run_sweep(small_config())
    assert [r.status for r in rep.records] == ["ok"] * 3
    deltas = [r.delta for r in rep.records]
    assert deltas[0] > deltas[1] > deltas[2]
    errs = [r.sup_err for r in rep.records]
    assert errs[-1] <= errs[0]
    ledger = verify_bounds(rep)
    for name in ("triangle", "reconstruction_triangle", "delta_monotone", "stabilizing", "I2_slope"):
        assert ledger[name].passed, ledger[name]
    assert rep.fits["alpha1"] == pytest.approx(3 / 5) and rep.fits["alpha2"] == 3
    assert all(line.startswith(("PASS", "FAIL")) for line in ledger.lines())


def test_report_is_deterministic_and_round_trips(tmp_path):
    cfg = small_config(eps=(0.1, 0.001))
    a, b = run_sweep(cfg), run_sweep(cfg)
    assert a.to_json() == b.to_json()
    assert StabilityReport.from_json(a.to_json()).to_json() == a.to_json()
    paths = a.write(tmp_path)
    assert json.loads(paths[0].read_text())["config_hash"] == cfg.hash()
    header = paths[1].read_text().splitlines()[0].split(",")
    assert header[:6] == ["eps", "delta", "rho", "sup_err", "I1", "I2"]


def test_worker_pool_matches_serial():
    serial = run_sweep(small_config(eps=(0.1, 0.001)))
    pooled = run_sweep(small_config(eps=(0.1, 0.001), workers=2))
    assert pooled.to_json() == serial.to_json()


def test_guard_failure_is_flagged():
    well = compact_bump(-1.0, (0.0, 0.0), 0.45, order=5)
    # amplitudes straddling the first Dirichlet eigenvalue crossing are flagged, not raised
    rep = run_sweep(small_config(perturbation=well, eps=tuple(np.linspace(80.0, 20.0, 61))))
    statuses = {r.status for r in rep.records}
    assert "guard_failed" in statuses and "ok" in statuses
    bad = [r for r in rep.records if r.status == "guard_failed"]
    assert all(r.guard_margin <= 0 for r in bad)
