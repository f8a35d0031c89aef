"""Closed-form symbol error probabilities and click statistics for PPM receivers.

The array-level helpers (``*_array``) broadcast over numpy inputs and back the
optimizer's grid search; the scalar functions take the domain types from
:mod:`ppm_demod.core`.
"""
from __future__ import annotations

import math

import numpy as np

from .core import (
    ClickProbs,
    DetectorModel,
    DomainError,
    ModulationConfig,
    NullingMode,
    NullingPolicy,
    derived_n1,
)

# Below this dark-click probability the dark-noise closed form is ill-posed.
PD_DARKFREE_THRESHOLD = 1e-12


class DarkFreeRequired(DomainError):
    """Raised when the dark-noise closed form is asked to run with Pd ~ 0."""


def dd_error_ideal(M: int, N: float) -> float:
    """Shot-noise-limited direct-detection error, ((M-1)/M) exp(-N)."""
    return (M - 1) / M * math.exp(-N)


def helstrom_ppm(M: int, N: float) -> float:
    """Minimum error probability over all quantum measurements for M-ary PPM.

    Evaluated as (M-1) e^{-2N} / (a + b)^2 with a = sqrt(1 + (M-1)e^{-N}),
    b = sqrt(1 - e^{-N}), which equals ((M-1)/M^2)(a - b)^2 but does not lose
    precision when a and b both approach 1.
    """
    x = math.exp(-N)
    a = math.sqrt(1.0 + (M - 1) * x)
    b = math.sqrt(-math.expm1(-N))
    return (M - 1) * x * x / (a + b) ** 2


def cpn_error_baseline(M: int, N: float) -> float:
    """Exact-nulling CPN error with an ideal detector,
    (1/M)[(1 - e^{-N})^M + M e^{-N} - 1]."""
    if M <= 1:
        return 0.0
    x = math.exp(-N)
    if M * x < 1e-3:
        # (1-x)^M - 1 + Mx by its binomial tail; terms shrink by at least M*x
        total, term = 0.0, 1.0
        for k in range(1, M + 1):
            term *= -x * (M - k + 1) / k
            if k >= 2:
                total += term
        return total / M
    if x == 1.0:
        # N below half an ulp of 1: the correction to (M-1)/M is invisible
        return (M - 1) / M
    return (math.expm1(M * math.log1p(-x)) + M * x) / M


def no_click_array(n_int, gain, eta: float, pd: float):
    """Vectorized no-click probability of an SPD behind a PSA (phase 0)."""
    n_int = np.asarray(n_int, dtype=float)
    G = np.asarray(gain, dtype=float)
    root_g1 = np.sqrt(G - 1.0)
    amp = np.sqrt(G) + root_g1
    prefactor = (1.0 - pd) / np.sqrt(G - (1.0 - eta) ** 2 * (G - 1.0))
    rate = eta * amp * amp / (1.0 + eta * root_g1 * amp)
    return prefactor * np.exp(-rate * n_int)


def p_no_click(n_int: float, gain: float, det: DetectorModel) -> float:
    """Probability that a gated SPD registers no click on a slot holding
    ``n_int`` mean photons after phase-sensitive amplification by ``gain``.

    The dark term uses ``det.pd`` directly as the (1 - lambda_d * tau) factor.
    For ``gain == 1`` this reduces to (1 - Pd) exp(-eta * n_int).
    """
    if n_int < 0.0 or gain < 1.0:
        raise DomainError(f"need n_int >= 0 and gain >= 1, got {n_int!r}, {gain!r}")
    if gain == 1.0:
        return (1.0 - det.pd) * math.exp(-det.eta * n_int)
    p0 = float(no_click_array(n_int, gain, det.eta, det.pd))
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"no-click probability {p0!r} outside [0, 1]")
    return p0


def transition_probs(config: ModulationConfig, policy: NullingPolicy, det: DetectorModel) -> ClickProbs:
    """q0 / q1 for a nulled slot: q0 is evaluated at the nulled-empty photon
    number n1, q1 is one minus the no-click probability at the residue n0."""
    n1 = derived_n1(config, policy)
    q0 = p_no_click(n1, policy.gain, det)
    q1 = 1.0 - p_no_click(policy.n0, policy.gain, det)
    return ClickProbs(q0=q0, q1=min(max(q1, 0.0), 1.0))


def _pulse_click(N: float, eta: float, pd: float) -> float:
    """1 - (1 - Pd) e^{-eta N}: click probability of a directly detected pulse slot."""
    return -math.expm1(math.log1p(-pd) - eta * N)


def _power_table(base, M: int):
    """``base[..., None] ** (M-2-j)`` for j = 0..M-2 (empty when M < 2)."""
    j = np.arange(max(M - 1, 0))
    return np.asarray(base, float)[..., None] ** (M - 2 - j), j


def cpn_error_array(M: int, N: float, q0, q1, eta: float, pd: float):
    """Vectorized CPN symbol error with per-slot dark clicks.

    Evaluates

        P_M = (1/M)[A(1-B^{M-1})/(1-B) + mu D (mu^{M-1}-B^{M-1})/(mu-B)
                    + ((M-1)C - MCB + CB^M)/(1-B)^2]

    with A = 1 - (q0/Pd)(1-(1-Pd)e^{-eta N}), D = q1 - A, B = 1 - q0, C = q0,
    mu = 1 - Pd. The three ratios are summed as the finite geometric series
    they stand for and the 1/Pd carried by A and D is cancelled analytically,
    so the result stays accurate for q0 -> 0, q0 -> Pd and Pd -> 0.
    """
    if pd < PD_DARKFREE_THRESHOLD:
        raise DarkFreeRequired(f"Pd = {pd!r} is below {PD_DARKFREE_THRESHOLD}; use cpn_error_darkfree")
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    if M <= 1:
        return np.zeros(np.broadcast(q0, q1).shape)
    B = 1.0 - q0
    mu = 1.0 - pd
    s = _pulse_click(N, eta, pd)
    b_pow, j = _power_table(B, M)
    # sum_j mu^j B^(M-2-j) = (mu^{M-1} - B^{M-1}) / (mu - B)
    g_mu = (b_pow * mu ** j).sum(axis=-1)
    # sum_j B^(M-2-j) (1 - mu^{j+1}) / Pd, the part of A*G(1) - mu*A*G(mu) scaled by 1/Pd
    r = (b_pow * (-np.expm1((j + 1) * math.log1p(-pd)) / pd)).sum(axis=-1)
    # sum_i i B^(M-1-i) = ((M-1) - MB + B^M) / (1-B)^2
    s3 = (b_pow * (j + 1)).sum(axis=-1)
    total = r * (pd - q0 * s) + mu * q1 * g_mu + q0 * s3
    return np.clip(total / M, 0.0, 1.0)


def cpn_error_darkfree_array(M: int, N: float, q0, q1, eta: float):
    """Vectorized dark-free CPN error,
    P_M = (1/M)[D'(1-B'^{M-1})/(1-B') + ((M-1)C' - MC'B' + C'B'^M)/(1-B')^2]
    with B' = 1 - q0, C' = q0 e^{-eta N}, D' = q1, summed termwise."""
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    if M <= 1:
        return np.zeros(np.broadcast(q0, q1).shape)
    b_pow, j = _power_table(1.0 - q0, M)
    g1 = b_pow.sum(axis=-1)
    s3 = (b_pow * (j + 1)).sum(axis=-1)
    total = q1 * g1 + q0 * math.exp(-eta * N) * s3
    return np.clip(total / M, 0.0, 1.0)


def cpn_error(config: ModulationConfig, clicks: ClickProbs, det: DetectorModel) -> float:
    """Mean CPN symbol error for equally likely symbols with dark clicks (Pd > 0).

    Raises :class:`DarkFreeRequired` when ``det.pd`` is below 1e-12.
    """
    return float(cpn_error_array(config.M, config.N, clicks.q0, clicks.q1, det.eta, det.pd))


def cpn_error_darkfree(config: ModulationConfig, clicks: ClickProbs, eta: float) -> float:
    """Mean CPN symbol error in the Pd = 0 limit; ``clicks`` must be dark-free."""
    return float(cpn_error_darkfree_array(config.M, config.N, clicks.q0, clicks.q1, eta))


def symbol_error(config: ModulationConfig, policy: NullingPolicy, det: DetectorModel) -> float:
    """CPN error for a nulling policy, choosing the dark-free form when Pd ~ 0."""
    clicks = transition_probs(config, policy, det)
    if det.pd < PD_DARKFREE_THRESHOLD:
        return cpn_error_darkfree(config, clicks, det.eta)
    return cpn_error(config, clicks, det)


def policy_error_grid(config: ModulationConfig, det: DetectorModel, n0, gain):
    """CPN error on a broadcast grid of (n0, gain) values."""
    n0 = np.asarray(n0, float)
    gain = np.asarray(gain, float)
    n1 = (np.sqrt(n0) + math.sqrt(config.N)) ** 2
    q0 = np.clip(no_click_array(n1, gain, det.eta, det.pd), 0.0, 1.0)
    q1 = np.clip(1.0 - no_click_array(n0, gain, det.eta, det.pd), 0.0, 1.0)
    if det.pd < PD_DARKFREE_THRESHOLD:
        return cpn_error_darkfree_array(config.M, config.N, q0, q1, det.eta)
    return cpn_error_array(config.M, config.N, q0, q1, det.eta, det.pd)


def dd_correct_probability(M: int, N: float, eta: float, pd: float) -> float:
    """Probability that the SPD direct-detection receiver picks the pulse slot.

    The pulse slot clicks with probability s, each of the M-1 empty slots with
    Pd. The receiver picks uniformly among clicked slots, or among all M when
    nothing clicks. With b empty-slot clicks the pulse slot wins with
    probability 1/(1+b), and E[1/(1+b)] = (1 - (1-Pd)^M) / (M Pd).
    """
    s = _pulse_click(N, eta, pd)
    if pd == 0.0:
        tie_share = 1.0
    else:
        tie_share = -math.expm1(M * math.log1p(-pd)) / (M * pd)
    none_clicked = (1.0 - s) * (1.0 - pd) ** (M - 1)
    return s * tie_share + none_clicked / M


def dd_error(config: ModulationConfig, det: DetectorModel) -> float:
    """Exact direct-detection symbol error with a binary-outcome SPD and dark clicks."""
    if det.pd == 0.0:
        # (1-s)(M-1)/M with 1-s = e^{-eta N}; avoids 1 - (1 - small)
        return (config.M - 1) / config.M * math.exp(-det.eta * config.N)
    p = 1.0 - dd_correct_probability(config.M, config.N, det.eta, det.pd)
    return min(max(p, 0.0), 1.0)


def baseline_policy_error(config: ModulationConfig, det: DetectorModel) -> float:
    return symbol_error(config, NullingPolicy(mode=NullingMode.BASELINE), det)
