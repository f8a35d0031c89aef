import math

import numpy as np
import pytest

from ppm_demod.capacity import (
    FAMILIES,
    UnavailableFamily,
    blahut_arimoto,
    efficiency_sweep,
    family_points,
    holevo_pure_loss,
    mark_envelope,
    mary_symmetric_capacity,
    mutual_information,
    ppm_dd_erasure_capacity,
)
from ppm_demod.core import DetectorModel, DomainError, ModulationConfig
from ppm_demod.simulator import ReceiverSpec, channel_matrix

# frozen from mpmath
G_HALF = 1.3774437510817343
ERASURE_4_1 = 1.2642411176571154


def test_holevo_function():
    assert holevo_pure_loss(1.0) == 2.0
    assert holevo_pure_loss(0.5) == pytest.approx(G_HALF, rel=1e-15)
    assert holevo_pure_loss(0.0) == 0.0
    with pytest.raises(DomainError):
        holevo_pure_loss(-1.0)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.25, 0.5])
def test_binary_erasure_channel(eps):
    W = np.array([[1 - eps, 0.0, eps], [0.0, 1 - eps, eps]])
    bits, prior = blahut_arimoto(W, 1e-10)
    assert bits == pytest.approx(1 - eps, abs=1e-9)
    assert np.allclose(prior, 0.5)


def test_binary_symmetric_channel_against_entropy_formula():
    p = 0.11
    h = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
    bits, _ = blahut_arimoto(np.array([[1 - p, p], [p, 1 - p]]), 1e-12)
    assert bits == pytest.approx(1 - h, abs=1e-10)


def test_asymmetric_z_channel():
    # Z channel with crossover 1/2 has capacity log2(5/4)
    bits, prior = blahut_arimoto(np.array([[1.0, 0.0], [0.5, 0.5]]), 1e-12)
    assert bits == pytest.approx(math.log2(1.25), abs=1e-10)
    assert prior[1] == pytest.approx(0.4, abs=1e-5)


def test_lower_bound_history_is_monotone():
    history = []
    W = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.2, 0.2, 0.6]])
    bits, _ = blahut_arimoto(W, 1e-10, history=history)
    assert len(history) > 1
    assert all(b >= a - 1e-15 for a, b in zip(history, history[1:]))
    assert history[-1] <= bits + 1e-9


def test_cost_multiplier_moves_prior_to_cheap_symbol():
    W = np.array([[0.9, 0.1], [0.1, 0.9]])
    _, free = blahut_arimoto(W, 1e-10)
    _, taxed = blahut_arimoto(W, 1e-10, cost=[1.0, 0.0], multiplier=1.0)
    assert taxed[1] > free[1]


def test_tolerance_domain():
    with pytest.raises(DomainError):
        blahut_arimoto(np.eye(2), 0.0)
    with pytest.raises(DomainError):
        blahut_arimoto(np.eye(2), 0.1)


def test_erasure_closed_form_and_blahut_arimoto():
    assert ppm_dd_erasure_capacity(4, 1.0) == pytest.approx(ERASURE_4_1, rel=1e-15)
    W = channel_matrix(ReceiverSpec("dd", ModulationConfig(4, 1.0), erasure_output=True))
    assert blahut_arimoto(W, 1e-10)[0] == pytest.approx(ERASURE_4_1, abs=1e-8)
    # with dark counts the erasure channel loses capacity
    assert ppm_dd_erasure_capacity(4, 1.0, DetectorModel(1.0, 1e-3)) < ERASURE_4_1


@pytest.mark.parametrize("pe", [0.0, 0.05, 0.3, 0.75])
def test_symmetric_capacity_matches_blahut_arimoto(pe):
    M = 4
    W = np.full((M, M), pe / (M - 1))
    np.fill_diagonal(W, 1 - pe)
    assert mary_symmetric_capacity(M, pe) == pytest.approx(blahut_arimoto(W, 1e-12)[0], abs=1e-9)
    assert mutual_information(W, np.full(M, 0.25)) == pytest.approx(mary_symmetric_capacity(M, pe), abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_respects_the_holevo_limit(family):
    det = DetectorModel()
    for N in (0.1, 1.0, 4.0):
        for p in family_points(family, 8, N, det, multipliers=(0.0, 1.0, 4.0)):
            # per-slot photon number N/M (or N per mode for the ultimate curve)
            assert p.spectral_eff <= holevo_pure_loss(p.N / p.M) + 1e-12
            assert 0.0 <= p.zero_prior < 1.0


def test_zero_codeword_lowers_mean_photon_number():
    pts = family_points("ppm-dd-zero", 8, 2.0, DetectorModel(), multipliers=(0.0, 8.0))
    assert pts[1].zero_prior > pts[0].zero_prior
    assert pts[1].N < pts[0].N <= 2.0
    assert all(p.pulse_N == 2.0 for p in pts)


def test_envelope_is_pareto_front():
    pts = efficiency_sweep("ppm-dd", (4, 16), [0.5, 2.0])
    flagged = [p for p in pts if p.envelope]
    assert flagged
    for p in flagged:
        assert not any(q.photon_eff > p.photon_eff and q.spectral_eff > p.spectral_eff for q in pts)
    assert mark_envelope(pts) == pts


def test_sweep_ordering_and_domain():
    pts = efficiency_sweep("ppm-helstrom", (4, 8), [1.0, 2.0])
    assert [(p.N, p.M) for p in pts] == [(1.0, 4), (1.0, 8), (2.0, 4), (2.0, 8)]
    with pytest.raises(DomainError):
        efficiency_sweep("ppm-dd", (2,), [1.0])
    with pytest.raises(DomainError):
        efficiency_sweep("ppm-dd", (4,), [0.0])
    with pytest.raises(DomainError):
        efficiency_sweep("no-such-family", (4,), [1.0])


@pytest.mark.parametrize("family", ["ook-holevo", "ppm-holevo"])
def test_unavailable_families(family):
    with pytest.raises(UnavailableFamily, match="not computable"):
        efficiency_sweep(family, (4,), [1.0])
