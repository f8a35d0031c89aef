"""Capacities of the receiver-induced PPM channels and the
photon-efficiency / spectral-efficiency tradeoff curves built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .analytic import dd_error, helstrom_ppm
from .core import ConfusionMatrix, DetectorModel, DomainError, ModulationConfig
from .simulator import ReceiverKind, ReceiverSpec, channel_matrix

LN2 = math.log(2.0)
DEFAULT_M_LIST = (4, 8, 16, 32, 64, 128)
# bits per photon; 0 is the plain capacity, larger values trade rate for photons
DEFAULT_MULTIPLIERS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

FAMILIES = (
    "holevo-ultimate",
    "ppm-dd",
    "ppm-dd-erasure",
    "ppm-helstrom",
    "ppm-cpn",
    "ppm-dd-zero",
    "ppm-cpn-zero",
    "ppm-dd-zero-mapped",
    "ppm-cpn-zero-mapped",
)
UNAVAILABLE_FAMILIES = {
    "ook-holevo": "Holevo limit of the on-off-keying alphabet",
    "ppm-holevo": "Holevo limit of the PPM alphabet",
}


class UnavailableFamily(DomainError):
    """The requested curve needs quantum computations not provided here."""


@dataclass(frozen=True)
class EfficiencyPoint:
    """One point of a tradeoff curve.

    ``N`` is the mean received photon number per symbol; it equals the pulse
    photon number ``pulse_N`` unless the zero codeword carries prior mass
    ``zero_prior``. ``M`` is 1 for the modulation-free Holevo curve.
    """

    family: str
    M: int
    N: float
    bits_per_symbol: float
    photon_eff: float
    spectral_eff: float
    pulse_N: float
    zero_prior: float = 0.0
    envelope: bool = False


def holevo_pure_loss(N: float) -> float:
    """Holevo capacity of the pure-loss bosonic channel in bits per mode,
    g(N) = (1+N) log2(1+N) - N log2 N."""
    if N < 0.0:
        raise DomainError("N must be >= 0")
    if N == 0.0:
        return 0.0
    return ((1.0 + N) * math.log1p(N) - N * math.log(N)) / LN2


def _xlog2x(p: float) -> float:
    return p * math.log2(p) if p > 0.0 else 0.0


def mary_symmetric_capacity(M: int, pe: float) -> float:
    """Capacity (bits/symbol) of the M-ary symmetric channel whose error mass
    ``pe`` is spread evenly over the M-1 wrong symbols."""
    if pe < 0.0 or pe > (M - 1) / M + 1e-15:
        raise DomainError(f"symbol error {pe!r} outside [0, (M-1)/M]")
    pe = min(pe, (M - 1) / M)
    wrong = pe * math.log2(pe / (M - 1)) if pe > 0.0 else 0.0
    return max(0.0, math.log2(M) + _xlog2x(1.0 - pe) + wrong)


def _as_matrix(channel) -> np.ndarray:
    W = channel.entries if isinstance(channel, ConfusionMatrix) else np.asarray(channel, dtype=float)
    if W.ndim != 2:
        raise DomainError("channel must be a matrix")
    if np.any(W.sum(axis=1) <= 0.0):
        raise DomainError("channel has an all-zero row")
    return W / W.sum(axis=1, keepdims=True)


def _divergences(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    """D(W(.|x) || q) in bits for each input x."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0.0, W * np.log2(W / q), 0.0)
    return terms.sum(axis=1)


def mutual_information(channel, prior) -> float:
    """I(X;Y) in bits for an input distribution ``prior``."""
    W = _as_matrix(channel)
    p = np.asarray(prior, dtype=float)
    return float(np.dot(p, _divergences(W, p @ W)))


def blahut_arimoto(
    channel,
    tol: float = 1e-9,
    *,
    cost: Optional[Sequence[float]] = None,
    multiplier: float = 0.0,
    max_iter: int = 200_000,
    history: Optional[list] = None,
):
    """Capacity of a discrete memoryless channel and the achieving prior.

    Iterates until the gap between the upper bound max_x D_x and the lower
    bound log2 sum_x p_x 2^{D_x} drops below ``tol``. With a ``cost`` vector
    the objective becomes I(X;Y) - multiplier * E[cost] and the returned prior
    maximizes that instead; the returned rate is always I(X;Y) in bits.
    ``history`` (if given) receives the lower bound of every iteration.
    """
    if not 0.0 < tol <= 1e-3:
        raise DomainError("tol must lie in (0, 1e-3]")
    W = _as_matrix(channel)
    n = W.shape[0]
    penalty = np.zeros(n) if cost is None else multiplier * np.asarray(cost, dtype=float)
    p = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        e = _divergences(W, p @ W) - penalty
        top = e.max()
        weights = p * np.exp2(e - top)
        lower = top + math.log2(weights.sum())
        if history is not None:
            history.append(lower)
        p = weights / weights.sum()
        if top - lower < tol:
            break
    return mutual_information(W, p), p


def ppm_dd_erasure_capacity(M: int, N: float, det: DetectorModel = DetectorModel()) -> float:
    """PPM with direct detection when a slot-silent symbol is kept as an
    erasure: (1 - e^{-eta N}) log2 M for a dark-free detector."""
    if det.pd == 0.0:
        return -math.expm1(-det.eta * N) * math.log2(M)
    spec = ReceiverSpec(ReceiverKind.DIRECT_DETECTION, ModulationConfig(M, N), det, erasure_output=True)
    return blahut_arimoto(channel_matrix(spec), 1e-9)[0]


def _point(family: str, M: int, pulse_N: float, bits: float, zero_prior: float = 0.0) -> EfficiencyPoint:
    mean_n = pulse_N * (1.0 - zero_prior)
    bits = max(bits, 0.0)
    return EfficiencyPoint(
        family=family,
        M=M,
        N=mean_n,
        bits_per_symbol=bits,
        photon_eff=bits / mean_n if mean_n > 0.0 else 0.0,
        spectral_eff=bits / M,
        pulse_N=pulse_N,
        zero_prior=zero_prior,
    )


def _receiver_spec(family: str, M: int, N: float, det: DetectorModel) -> ReceiverSpec:
    kind = ReceiverKind.CPN if "cpn" in family else ReceiverKind.DIRECT_DETECTION
    return ReceiverSpec(
        kind,
        ModulationConfig(M, N),
        det,
        include_zero_codeword="zero" in family,
        erasure_output=family.endswith("-mapped"),
    )


def family_points(family: str, M: int, N: float, det: DetectorModel, tol: float = 1e-6,
                  multipliers: Sequence[float] = DEFAULT_MULTIPLIERS) -> List[EfficiencyPoint]:
    """All points a family contributes at one (M, N)."""
    check_family(family)
    if family == "holevo-ultimate":
        return [_point(family, 1, N, holevo_pure_loss(N))]
    config = ModulationConfig(M, N)
    if family == "ppm-dd":
        return [_point(family, M, N, mary_symmetric_capacity(M, dd_error(config, det)))]
    if family == "ppm-helstrom":
        return [_point(family, M, N, mary_symmetric_capacity(M, helstrom_ppm(M, N)))]
    if family == "ppm-dd-erasure":
        return [_point(family, M, N, ppm_dd_erasure_capacity(M, N, det))]
    spec = _receiver_spec(family, M, N, det)
    W = channel_matrix(spec)
    if not spec.include_zero_codeword:
        return [_point(family, M, N, blahut_arimoto(W, tol)[0])]
    cost = np.full(spec.n_inputs, N)
    cost[-1] = 0.0
    points = []
    for lam in multipliers:
        bits, prior = blahut_arimoto(W, tol, cost=cost, multiplier=lam)
        points.append(_point(family, M, N, bits, zero_prior=float(prior[-1])))
    return points


def check_family(family: str) -> None:
    if family in UNAVAILABLE_FAMILIES:
        raise UnavailableFamily(
            f"{family} ({UNAVAILABLE_FAMILIES[family]}) is not computable from the published formulas"
        )
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def mark_envelope(points: Iterable[EfficiencyPoint]) -> List[EfficiencyPoint]:
    """Flag the Pareto-optimal points (no other point has both higher photon
    and higher spectral efficiency)."""
    points = list(points)
    order = sorted(range(len(points)), key=lambda i: (-points[i].photon_eff, -points[i].spectral_eff))
    best = -math.inf
    flags = [False] * len(points)
    for i in order:
        if points[i].spectral_eff > best:
            flags[i] = True
            best = points[i].spectral_eff
    return [
        EfficiencyPoint(**{**p.__dict__, "envelope": f}) for p, f in zip(points, flags)
    ]


def efficiency_sweep(
    family: str,
    M_list: Sequence[int] = DEFAULT_M_LIST,
    N_grid: Sequence[float] = (),
    det: DetectorModel = DetectorModel(),
    *,
    tol: float = 1e-6,
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
) -> List[EfficiencyPoint]:
    """Tradeoff points of one family over the (M, N) grid.

    Points are ordered by grid index (N outer, M inner); the Pareto envelope
    across all M and N is flagged, which is the curve optimized over M.
    """
    check_family(family)
    if any(M < 4 for M in M_list) and family != "holevo-ultimate":
        raise DomainError("PPM orders in the sweep must be >= 4")
    if any(N <= 0.0 for N in N_grid):
        raise DomainError("photon numbers in the sweep must be > 0")
    points: List[EfficiencyPoint] = []
    for N in N_grid:
        Ms = (1,) if family == "holevo-ultimate" else M_list
        for M in Ms:
            points.extend(family_points(family, M, float(N), det, tol, multipliers))
    return mark_envelope(points)
