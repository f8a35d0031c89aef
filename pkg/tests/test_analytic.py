import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import closed_form_oracle, dd_oracle, recursion_oracle
from ppm_demod.analytic import (
    DarkFreeRequired,
    cpn_error,
    cpn_error_baseline,
    cpn_error_darkfree,
    dd_error,
    dd_error_ideal,
    helstrom_ppm,
    p_no_click,
    policy_error_grid,
    symbol_error,
    transition_probs,
)
from ppm_demod.core import ClickProbs, DetectorModel, DomainError, ModulationConfig, NullingPolicy

# values frozen from 60-digit mpmath evaluation
DD_4_1 = 0.27590958087858174
HELSTROM_4_1 = 0.08052384772817755
CPN_4_1 = 0.15779476620923864
Q0_REF = 0.034855842202236266  # N=1, n0=0.2, G=1.5, eta=0.9, Pd=1e-5
Q1_REF = 0.39491894574257088


def test_reference_values():
    assert dd_error_ideal(4, 1.0) == pytest.approx(DD_4_1, rel=1e-15)
    assert helstrom_ppm(4, 1.0) == pytest.approx(HELSTROM_4_1, rel=1e-14)
    assert cpn_error_baseline(4, 1.0) == pytest.approx(CPN_4_1, rel=1e-15)


def test_no_click_with_squeezing_at_vacuum():
    # 1/sqrt(G) for eta=1, G=2 and an empty slot
    assert p_no_click(0.0, 2.0, DetectorModel()) == pytest.approx(1 / math.sqrt(2), rel=1e-15)


def test_transition_probabilities_reference():
    cfg = ModulationConfig(4, 1.0)
    clicks = transition_probs(cfg, NullingPolicy.type2(0.2, 1.5), DetectorModel(0.9, 1e-5))
    assert clicks.q0 == pytest.approx(Q0_REF, rel=1e-13)
    assert clicks.q1 == pytest.approx(Q1_REF, rel=1e-13)


def test_baseline_transitions():
    clicks = transition_probs(ModulationConfig(8, 2.0), NullingPolicy.baseline(), DetectorModel(1.0, 1e-4))
    assert clicks.q0 == pytest.approx((1 - 1e-4) * math.exp(-2.0), rel=1e-15)
    assert clicks.q1 == pytest.approx(1e-4, rel=1e-12)


def test_squeezing_requires_nonnegative_probability():
    with pytest.raises(DomainError):
        p_no_click(-1.0, 1.0, DetectorModel())


@pytest.mark.parametrize("M", [2, 3, 4, 8, 16, 64])
@pytest.mark.parametrize("N", [0.0, 0.05, 1.0, 7.5, 30.0])
def test_baseline_matches_recursion(M, N):
    expected = float(recursion_oracle(M, N, math.exp(-N), 0.0, 1.0, 0.0))
    assert cpn_error_baseline(M, N) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_baseline_small_N_does_not_cancel():
    # for tiny N the error is (M-1)/M minus O(N^...)
    assert cpn_error_baseline(4, 1e-12) == pytest.approx(0.75, rel=1e-11)
    assert cpn_error_baseline(4, 0.0) == 0.75


CASES = [
    (2, 0.5, 0.3, 0.05, 1.0, 1e-3),
    (4, 1.0, Q0_REF, Q1_REF, 0.9, 1e-5),
    (8, 3.0, 0.02, 0.001, 0.7, 1e-2),
    (16, 0.2, 0.6, 0.1, 1.0, 1e-6),
    (5, 2.0, 0.9, 0.0, 0.5, 0.2),
]


@pytest.mark.parametrize("M,N,q0,q1,eta,pd", CASES)
def test_dark_noise_form_matches_both_oracles(M, N, q0, q1, eta, pd):
    got = cpn_error(ModulationConfig(M, N), ClickProbs(q0, q1), DetectorModel(eta, pd))
    assert got == pytest.approx(float(recursion_oracle(M, N, q0, q1, eta, pd)), rel=1e-12)
    assert got == pytest.approx(float(closed_form_oracle(M, N, q0, q1, eta, pd)), rel=1e-12)


@pytest.mark.parametrize("M,N,q0,q1,eta,_", CASES)
def test_dark_free_form_matches_both_oracles(M, N, q0, q1, eta, _):
    got = cpn_error_darkfree(ModulationConfig(M, N), ClickProbs(q0, q1), eta)
    assert got == pytest.approx(float(recursion_oracle(M, N, q0, q1, eta, 0.0)), rel=1e-12)
    assert got == pytest.approx(float(closed_form_oracle(M, N, q0, q1, eta, 0.0)), rel=1e-12)


def test_dark_noise_form_refuses_zero_pd():
    with pytest.raises(DarkFreeRequired):
        cpn_error(ModulationConfig(4, 1.0), ClickProbs(0.3, 0.0), DetectorModel(1.0, 0.0))


def test_dispatcher_picks_form_by_pd():
    cfg = ModulationConfig(4, 1.0)
    policy = NullingPolicy.type1(0.1)
    assert symbol_error(cfg, policy, DetectorModel()) == pytest.approx(
        cpn_error_darkfree(cfg, transition_probs(cfg, policy, DetectorModel()), 1.0), rel=1e-15
    )
    # the dark-noise form tends smoothly to the dark-free one
    gaps = [abs(symbol_error(cfg, policy, DetectorModel(1.0, pd)) - symbol_error(cfg, policy, DetectorModel()))
            for pd in (1e-4, 1e-6, 1e-8)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-7


@pytest.mark.parametrize("M,N,eta,pd", [(2, 1.0, 1.0, 0.1), (4, 25.0, 1.0, 1e-5), (8, 0.3, 0.6, 0.05), (4, 1.0, 1.0, 0.0)])
def test_dd_matches_binomial_oracle(M, N, eta, pd):
    got = dd_error(ModulationConfig(M, N), DetectorModel(eta, pd))
    assert got == pytest.approx(float(dd_oracle(M, N, eta, pd)), rel=1e-12)


def test_policy_grid_broadcasts_like_scalar_calls():
    cfg, det = ModulationConfig(4, 1.0), DetectorModel(0.9, 1e-5)
    n0 = np.array([0.0, 0.1, 0.5])[:, None]
    gain = np.array([1.0, 1.5, 3.0])[None, :]
    grid = policy_error_grid(cfg, det, n0, gain)
    assert grid.shape == (3, 3)
    for i in range(3):
        for j in range(3):
            g = float(gain[0, j])
            policy = NullingPolicy(float(n0[i, 0]), g, "type2" if g > 1 else "type1")
            assert grid[i, j] == pytest.approx(symbol_error(cfg, policy, det), rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(
    M=st.integers(2, 64),
    N=st.floats(0.0, 40.0),
    n0=st.floats(0.0, 5.0),
    gain=st.floats(1.0, 10.0),
    eta=st.floats(0.01, 1.0),
    pd=st.sampled_from([0.0, 1e-9, 1e-5, 1e-2]),
)
def test_errors_are_probabilities(M, N, n0, gain, eta, pd):
    cfg, det = ModulationConfig(M, N), DetectorModel(eta, pd)
    mode = "type2" if gain > 1 else "type1"
    for value in (symbol_error(cfg, NullingPolicy(n0, gain, mode), det), dd_error(cfg, det), helstrom_ppm(M, N)):
        assert 0.0 <= value <= 1.0


@settings(max_examples=200, deadline=None)
@given(M=st.integers(2, 64), N=st.floats(0.0, 40.0))
def test_ideal_ordering(M, N):
    # the quantum limit lower-bounds both receivers; nulling never loses to DD
    hel, cpn, dd = helstrom_ppm(M, N), cpn_error_baseline(M, N), dd_error_ideal(M, N)
    assert hel <= cpn * (1 + 1e-12) + 1e-300
    assert cpn <= dd * (1 + 1e-12) + 1e-300
