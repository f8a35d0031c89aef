"""Domain types shared by the receiver models.

All types are frozen dataclasses; construction validates the fields and
raises :class:`DomainError` for out-of-range values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

ROW_SUM_TOL = 1e-12

# The PSA phase is pinned at zero; the click statistics below assume it.
PSA_PHASE = 0.0


class DomainError(ValueError):
    """A parameter lies outside its physical or mathematical domain."""


def _check_probability(name: str, value: float, *, open_upper: bool = False) -> None:
    if not math.isfinite(value) or value < 0.0 or value > 1.0 or (open_upper and value == 1.0):
        bound = "[0, 1)" if open_upper else "[0, 1]"
        raise DomainError(f"{name} must lie in {bound}, got {value!r}")


@dataclass(frozen=True)
class ModulationConfig:
    """PPM order ``M`` and mean received photon number ``N`` per pulse."""

    M: int
    N: float
    slot_seconds: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 2:
            raise DomainError(f"PPM order M must be an integer >= 2, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if not math.isfinite(self.N) or self.N < 0.0:
            raise DomainError(f"mean photon number N must be >= 0, got {self.N!r}")
        if self.slot_seconds is not None and not (self.slot_seconds > 0.0 and math.isfinite(self.slot_seconds)):
            raise DomainError(f"slot_seconds must be > 0, got {self.slot_seconds!r}")


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector with quantum efficiency ``eta`` and gated
    per-slot dark-click probability ``pd``."""

    eta: float = 1.0
    pd: float = 0.0

    def __post_init__(self) -> None:
        _check_probability("eta", self.eta)
        _check_probability("pd", self.pd, open_upper=True)

    @property
    def dark_free(self) -> "DetectorModel":
        return DetectorModel(eta=self.eta, pd=0.0)


class NullingMode(str, Enum):
    BASELINE = "baseline"
    TYPE1 = "type1"
    TYPE2 = "type2"


@dataclass(frozen=True)
class NullingPolicy:
    """Constant nulling parameters applied at every level of the CPN tree.

    ``n0`` is the residual mean photon number left in a pulse-bearing slot
    after displaced nulling, ``gain`` the phase-sensitive amplifier gain.
    """

    n0: float = 0.0
    gain: float = 1.0
    mode: NullingMode = NullingMode.BASELINE

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", NullingMode(self.mode))
        if not math.isfinite(self.n0) or self.n0 < 0.0:
            raise DomainError(f"n0 must be >= 0, got {self.n0!r}")
        if not math.isfinite(self.gain) or self.gain < 1.0:
            raise DomainError(f"PSA gain must be >= 1, got {self.gain!r}")
        if self.mode is NullingMode.BASELINE and (self.n0 != 0.0 or self.gain != 1.0):
            raise DomainError("baseline nulling requires n0 = 0 and gain = 1")
        if self.mode is NullingMode.TYPE1 and self.gain != 1.0:
            raise DomainError("type 1 nulling requires gain = 1")

    @classmethod
    def baseline(cls) -> "NullingPolicy":
        return cls()

    @classmethod
    def type1(cls, n0: float) -> "NullingPolicy":
        return cls(n0=n0, gain=1.0, mode=NullingMode.TYPE1)

    @classmethod
    def type2(cls, n0: float, gain: float) -> "NullingPolicy":
        return cls(n0=n0, gain=gain, mode=NullingMode.TYPE2)

    @property
    def theta(self) -> float:
        return PSA_PHASE


@dataclass(frozen=True)
class ClickProbs:
    """Root-node transition probabilities of a nulled slot.

    q0: no-click probability when the nulled slot carried no pulse.
    q1: click probability when the nulled slot carried the pulse.
    """

    q0: float
    q1: float

    def __post_init__(self) -> None:
        _check_probability("q0", self.q0)
        _check_probability("q1", self.q1)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Receiver-induced discrete memoryless channel.

    ``entries[k, j]`` is Pr[declare j | transmit k]. When ``erasure_column``
    is set the last column is the "no decision" outcome.
    """

    entries: np.ndarray
    erasure_column: bool = False
    input_labels: tuple = field(default=(), compare=False)

    def __post_init__(self) -> None:
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2:
            raise DomainError("channel matrix must be two-dimensional")
        n_in, n_out = P.shape
        if n_in < 2 or n_out < n_in - 1:
            # an all-zero codeword row may be added without a matching column
            raise DomainError(f"invalid channel shape {P.shape}")
        if not np.all(np.isfinite(P)) or P.min() < 0.0 or P.max() > 1.0:
            raise DomainError("channel entries must lie in [0, 1]")
        dev = np.abs(P.sum(axis=1) - 1.0).max()
        if dev > ROW_SUM_TOL:
            raise DomainError(f"channel rows must sum to 1 (max deviation {dev:.3g})")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def inputs(self) -> int:
        return self.entries.shape[0]

    @property
    def outputs(self) -> int:
        return self.entries.shape[1]

    def error_probability(self, prior=None) -> float:
        """Mean probability that the declared symbol differs from the sent one.

        Input ``k`` counts as correct only when output ``k`` is declared; an
        erasure is always an error.
        """
        n = min(self.inputs, self.outputs)
        w = np.full(self.inputs, 1.0 / self.inputs) if prior is None else np.asarray(prior, float)
        correct = float(np.dot(w[:n], np.diag(self.entries)[:n]))
        return max(0.0, 1.0 - correct)


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    trials: int
    seed: int
    std_err: float = field(init=False)

    def __post_init__(self) -> None:
        if self.trials <= 0:
            raise DomainError("trials must be positive")
        _check_probability("p_hat", self.p_hat)
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "std_err", math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.trials))

    def z_score(self, reference: float) -> float:
        if self.std_err == 0.0:
            # a degenerate estimate agrees only with itself
            return 0.0 if abs(self.p_hat - reference) < 1.0 / self.trials else math.inf
        return (self.p_hat - reference) / self.std_err


def derived_n1(config: ModulationConfig, policy: NullingPolicy) -> float:
    """Mean photon number of an empty slot after displaced nulling, (sqrt(n0) + sqrt(N))**2."""
    return (math.sqrt(policy.n0) + math.sqrt(config.N)) ** 2
