import mpmath as mp
import pytest

mp.mp.dps = 60


def recursion_oracle(M, N, q0, q1, eta, pd):
    """Symbol error by iterating the one-slot-at-a-time recursion in high
    precision, starting from P_1 = 0 (one hypothesis left is never wrong)."""
    N, q0, q1, eta, pd = map(mp.mpf, (N, q0, q1, eta, pd))
    empty = mp.e ** (-eta * N)
    P = mp.mpf(0)
    for m in range(2, M + 1):
        if pd == 0:
            scan = q0 * empty
            first = q1
        else:
            tail = 1 - (1 - pd) ** (m - 1)
            scan = q0 * (1 - (1 - (1 - pd) * empty) * tail / ((m - 1) * pd))
            first = (1 - q1) * tail + q1
        P = first / m + mp.mpf(m - 1) / m * (scan + (1 - q0) * P)
    return P


def closed_form_oracle(M, N, q0, q1, eta, pd):
    """Literal transcription of the solved recursion, evaluated in 60-digit
    arithmetic so the cancellations are harmless."""
    N, q0, q1, eta, pd = map(mp.mpf, (N, q0, q1, eta, pd))
    e = mp.e ** (-eta * N)
    B, C = 1 - q0, q0
    tail = (M - 1) * C - M * C * B + C * B**M
    if pd == 0:
        Cp = q0 * e
        tail = (M - 1) * Cp - M * Cp * B + Cp * B**M
        return (q1 * (1 - B ** (M - 1)) / (1 - B) + tail / (1 - B) ** 2) / M
    mu = 1 - pd
    A = 1 - (q0 / pd) * (1 - mu * e)
    D = q1 - A
    return (A * (1 - B ** (M - 1)) / (1 - B) + mu * D * (mu ** (M - 1) - B ** (M - 1)) / (mu - B) + tail / (1 - B) ** 2) / M


def dd_oracle(M, N, eta, pd):
    """Direct-detection error: sum over how many empty slots click, with
    uniform tie-breaking among clicked (or, if none clicked, all) slots."""
    N, eta, pd = map(mp.mpf, (N, eta, pd))
    s = 1 - (1 - pd) * mp.e ** (-eta * N)
    correct = mp.mpf(0)
    for k in range(M):
        w = mp.binomial(M - 1, k) * pd**k * (1 - pd) ** (M - 1 - k)
        correct += w * s / (k + 1)
        if k == 0:
            correct += w * (1 - s) / M
    return 1 - correct


@pytest.fixture
def oracles():
    return {"recursion": recursion_oracle, "closed": closed_form_oracle, "dd": dd_oracle}
