import numpy as np
import pytest

from ppm_demod.analytic import cpn_error_baseline, dd_error, helstrom_ppm, policy_error_grid
from ppm_demod.core import DetectorModel, ModulationConfig, NullingMode, NullingPolicy
from ppm_demod.optimizer import optimize_policy

IDEAL = DetectorModel()


def brute_force(config, det, n0_max, gain_max, points=400):
    n0 = np.linspace(0.0, n0_max, points)[:, None]
    gain = np.linspace(1.0, gain_max, points if gain_max > 1 else 1)[None, :]
    return float(np.min(policy_error_grid(config, det, n0, gain)))


@pytest.mark.parametrize("N", [0.1, 0.5, 1.0])
def test_type1_matches_fine_grid(N):
    cfg = ModulationConfig(4, N)
    res = optimize_policy(cfg, IDEAL, "type1", n0_max=2.0)
    assert res.p_error_star <= brute_force(cfg, IDEAL, 2.0, 1.0) * (1 + 1e-9)
    assert res.gain_star == 1.0 and res.mode is NullingMode.TYPE1


def test_type2_matches_fine_grid_and_beats_baseline_and_dd():
    cfg = ModulationConfig(4, 0.5)
    res = optimize_policy(cfg, IDEAL, "type2", n0_max=1.0, gain_max=4.0)
    assert res.p_error_star <= brute_force(cfg, IDEAL, 1.0, 4.0, points=200) * (1 + 1e-6)
    assert res.p_error_star < cpn_error_baseline(4, 0.5)
    assert res.p_error_star < dd_error(cfg, IDEAL)
    assert res.p_error_star >= helstrom_ppm(4, 0.5)
    assert res.converged


def test_no_nulling_budget_gives_baseline():
    cfg = ModulationConfig(4, 1.0)
    res = optimize_policy(cfg, IDEAL, "type1", n0_max=0.0)
    assert (res.n0_star, res.gain_star) == (0.0, 1.0)
    assert res.p_error_star == pytest.approx(cpn_error_baseline(4, 1.0), rel=1e-15)
    assert res.policy == NullingPolicy.baseline()


def test_unit_gain_cap_reduces_type2_to_type1():
    cfg = ModulationConfig(4, 0.3)
    t1 = optimize_policy(cfg, IDEAL, "type1")
    t2 = optimize_policy(cfg, IDEAL, "type2", gain_max=1.0)
    assert t2.p_error_star == t1.p_error_star and t2.gain_star == 1.0


@pytest.mark.parametrize("N", [0.05, 0.2, 1.0, 3.0, 8.0])
def test_nested_ordering(N):
    cfg = ModulationConfig(4, N)
    t1 = optimize_policy(cfg, IDEAL, "type1").p_error_star
    t2 = optimize_policy(cfg, IDEAL, "type2").p_error_star
    assert helstrom_ppm(4, N) <= t2 + 1e-12
    assert t2 <= t1 + 1e-12
    assert t1 <= cpn_error_baseline(4, N) + 1e-12


def test_dark_counts_and_loss_are_handled():
    cfg, det = ModulationConfig(8, 2.0), DetectorModel(0.7, 1e-4)
    res = optimize_policy(cfg, det, "type2")
    base = policy_error_grid(cfg, det, 0.0, 1.0)
    assert res.p_error_star <= base
    assert 0.0 <= res.n0_star and 1.0 <= res.gain_star <= 10.0


def test_baseline_mode_is_rejected():
    with pytest.raises(ValueError):
        optimize_policy(ModulationConfig(4, 1.0), IDEAL, "baseline")
