"""Exact and Monte Carlo models of the PPM receivers.

Three routes produce a receiver's confusion matrix:

* :func:`enumerate_exact` walks every path of the receiver's decision rule
  (the CPN tree via :func:`cpn_decision_tree_step`, all 2**M click patterns
  for direct detection). It is the exact oracle for the closed forms.
* :func:`channel_matrix` fills the same matrix in polynomial time from the
  path structure so that large PPM orders stay tractable.
* :func:`simulate` draws Bernoulli slot clicks from a counter-based generator
  and runs the decision rule trial by trial.

All three take their slot click probabilities from :class:`SlotModel`.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .analytic import transition_probs
from .core import (
    ConfusionMatrix,
    DetectorModel,
    DomainError,
    McEstimate,
    ModulationConfig,
    NullingPolicy,
)

logger = logging.getLogger(__name__)

MAX_ENUMERATION_M = 20
DEFAULT_SHARD_TRIALS = 1 << 16
THREADS_ENV = "PPM_DEMOD_THREADS"


class ReceiverKind(str, Enum):
    DIRECT_DETECTION = "dd"
    CPN = "cpn"


@dataclass(frozen=True)
class ReceiverSpec:
    """A receiver together with the channel it sees.

    ``include_zero_codeword`` appends an all-empty input symbol (last row).
    ``erasure_output`` routes the "no click anywhere" outcome to an extra last
    column instead of the receiver's normal declaration; with the zero
    codeword present that column is the zero-codeword declaration.
    """

    kind: ReceiverKind
    config: ModulationConfig
    det: DetectorModel = field(default_factory=DetectorModel)
    policy: NullingPolicy = field(default_factory=NullingPolicy)
    include_zero_codeword: bool = False
    erasure_output: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ReceiverKind(self.kind))

    @property
    def n_inputs(self) -> int:
        return self.config.M + int(self.include_zero_codeword)

    @property
    def n_outputs(self) -> int:
        return self.config.M + int(self.erasure_output)


@dataclass(frozen=True)
class SlotModel:
    """Click probability of one gated slot, by whether the slot is nulled and
    whether it carries the pulse."""

    nulled_pulse: float
    nulled_empty: float
    direct_pulse: float
    direct_empty: float

    def click_probability(self, nulled, pulse):
        # works elementwise on numpy boolean arrays as well as on plain bools
        return np.where(
            nulled,
            np.where(pulse, self.nulled_pulse, self.nulled_empty),
            np.where(pulse, self.direct_pulse, self.direct_empty),
        )[()]


def slot_model(spec: ReceiverSpec) -> SlotModel:
    det, N = spec.det, spec.config.N
    direct_pulse = -math.expm1(math.log1p(-det.pd) - det.eta * N)
    if spec.kind is ReceiverKind.CPN:
        clicks = transition_probs(spec.config, spec.policy, det)
        nulled_pulse, nulled_empty = clicks.q1, 1.0 - clicks.q0
    else:
        nulled_pulse = nulled_empty = math.nan
    return SlotModel(nulled_pulse, nulled_empty, direct_pulse, det.pd)


# --- CPN decision tree ------------------------------------------------------


class TreeState(NamedTuple):
    """Position in the CPN tree: the next slot to detect, the current
    hypothesis, and whether the receiver is nulling or scanning."""

    M: int
    hypothesis: int
    slot: int
    scanning: bool = False
    silent: bool = True

    @classmethod
    def start(cls, M: int) -> "TreeState":
        return cls(M, 0, 0)


class Declaration(NamedTuple):
    symbol: int
    silent: bool


def cpn_decision_tree_step(state: TreeState, click: bool) -> Union[TreeState, Declaration]:
    """Advance the CPN receiver by one slot outcome (slots are 0-based).

    While nulling, a click rules out the current hypothesis and the receiver
    moves on to null the next slot; once a single hypothesis is left it is
    declared without further measurement. A silent nulled slot switches to a
    plain scan of the remaining slots where the first click decides. When the
    slots run out the current hypothesis is declared.
    """
    M, h, slot, scanning, silent = state
    last = M - 1
    if not scanning:
        if click:
            if h + 1 == last:
                return Declaration(last, False)
            return TreeState(M, h + 1, h + 1, False, False)
        if slot == last:
            return Declaration(h, silent)
        return TreeState(M, h, slot + 1, True, silent)
    if click:
        return Declaration(slot, False)
    if slot == last:
        return Declaration(h, silent)
    return TreeState(M, h, slot + 1, True, silent)


def _output_column(spec: ReceiverSpec, decl: Declaration) -> int:
    if spec.erasure_output and decl.silent:
        return spec.config.M
    return decl.symbol


def _enumerate_cpn_row(spec: ReceiverSpec, model: SlotModel, pulse_slot: Optional[int]) -> np.ndarray:
    row = np.zeros(spec.n_outputs)
    stack = [(TreeState.start(spec.config.M), 1.0)]
    while stack:
        state, prob = stack.pop()
        p_click = float(model.click_probability(not state.scanning, state.slot == pulse_slot))
        for click, p in ((True, p_click), (False, 1.0 - p_click)):
            if p == 0.0:
                continue
            nxt = cpn_decision_tree_step(state, click)
            if isinstance(nxt, Declaration):
                row[_output_column(spec, nxt)] += prob * p
            else:
                stack.append((nxt, prob * p))
    return row


def _enumerate_dd_row(spec: ReceiverSpec, model: SlotModel, pulse_slot: Optional[int]) -> np.ndarray:
    M = spec.config.M
    patterns = (np.arange(1 << M)[:, None] >> np.arange(M)) & 1
    pulse = np.arange(M) == pulse_slot
    p_click = model.click_probability(False, pulse)
    weights = np.prod(np.where(patterns == 1, p_click, 1.0 - p_click), axis=1)
    n_clicked = patterns.sum(axis=1)
    row = np.zeros(spec.n_outputs)
    hit = n_clicked > 0
    row[:M] = (weights[hit, None] * patterns[hit] / n_clicked[hit, None]).sum(axis=0)
    silent = weights[~hit].sum()
    if spec.erasure_output:
        row[M] += silent
    else:
        row[:M] += silent / M
    return row


def _pulse_slots(spec: ReceiverSpec) -> list:
    slots: list = list(range(spec.config.M))
    if spec.include_zero_codeword:
        slots.append(None)
    return slots


def enumerate_exact(spec: ReceiverSpec) -> ConfusionMatrix:
    """Exact confusion matrix by summing the probabilities of every
    decision-rule path. Rejects ``M > 20``."""
    if spec.config.M > MAX_ENUMERATION_M:
        raise DomainError(f"exact enumeration supports M <= {MAX_ENUMERATION_M}, got {spec.config.M}")
    model = slot_model(spec)
    row_fn = _enumerate_cpn_row if spec.kind is ReceiverKind.CPN else _enumerate_dd_row
    rows = [row_fn(spec, model, k) for k in _pulse_slots(spec)]
    return ConfusionMatrix(np.array(rows), erasure_column=spec.erasure_output)


# --- polynomial-time channel matrices ---------------------------------------


def _cpn_row(spec: ReceiverSpec, model: SlotModel, pulse_slot: Optional[int]) -> np.ndarray:
    M = spec.config.M
    pulse = np.arange(M) == pulse_slot
    nulled = model.click_probability(True, pulse)
    direct = model.click_probability(False, pulse)
    row = np.zeros(spec.n_outputs)
    # probability of arriving at "null slot r" after clicks on nulled slots 0..r-1
    reach = np.concatenate(([1.0], np.cumprod(nulled[:-1])))
    row[M - 1] += reach[M - 1]
    for r in range(M - 1):
        base = reach[r] * (1.0 - nulled[r])
        if base == 0.0:
            continue
        rest = direct[r + 1:]
        survive = np.concatenate(([1.0], np.cumprod(1.0 - rest)))
        row[r + 1:M] += base * survive[:-1] * rest
        if r == 0 and spec.erasure_output:
            row[M] += base * survive[-1]
        else:
            row[r] += base * survive[-1]
    return row


def _dd_row(spec: ReceiverSpec, model: SlotModel, pulse_slot: Optional[int]) -> np.ndarray:
    M, pd = spec.config.M, model.direct_empty
    row = np.zeros(spec.n_outputs)
    if pulse_slot is None:
        silent = (1.0 - pd) ** M
        row[:M] = (1.0 - silent) / M
    else:
        s = model.direct_pulse
        tie_share = 1.0 if pd == 0.0 else -math.expm1(M * math.log1p(-pd)) / (M * pd)
        silent = (1.0 - s) * (1.0 - pd) ** (M - 1)
        hit = s * tie_share
        # the M-1 empty slots are exchangeable
        row[:M] = (1.0 - hit - silent) / (M - 1)
        row[pulse_slot] = hit
    if spec.erasure_output:
        row[M] = silent
    else:
        row[:M] += silent / M
    return row


def channel_matrix(spec: ReceiverSpec) -> ConfusionMatrix:
    """Receiver confusion matrix in O(M^3) (CPN) or O(M^2) (DD) time."""
    model = slot_model(spec)
    row_fn = _cpn_row if spec.kind is ReceiverKind.CPN else _dd_row
    rows = np.array([row_fn(spec, model, k) for k in _pulse_slots(spec)])
    rows = np.clip(rows, 0.0, 1.0)
    rows /= rows.sum(axis=1, keepdims=True)
    return ConfusionMatrix(rows, erasure_column=spec.erasure_output)


# --- Monte Carlo ------------------------------------------------------------


def shard_generator(seed: int, shard: int) -> np.random.Generator:
    """Philox stream for one shard: the key is the seed, the counter is
    advanced by ``shard`` jumps of 2**128 draws."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(shard))


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, os.cpu_count() or 1)


def _run_cpn(M: int, model: SlotModel, sym: np.ndarray, u: np.ndarray, erasure: bool) -> np.ndarray:
    n = sym.size
    h = np.zeros(n, dtype=np.int64)
    scanning = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    silent = np.ones(n, dtype=bool)
    declared = np.full(n, -1, dtype=np.int64)
    for i in range(M):
        active = ~done
        nulled = active & ~scanning
        click = u[:, i] < model.click_probability(nulled, sym == i)
        rule_out = nulled & click
        h[rule_out] = i + 1
        silent[active & click] = False
        if i + 1 == M - 1:
            declared[rule_out] = M - 1
            done |= rule_out
        scanning |= nulled & ~click
        hit = active & scanning & ~nulled & click
        declared[hit] = i
        done |= hit
    rest = ~done
    declared[rest] = h[rest]
    if erasure:
        declared[rest & silent] = M
    return declared


def _run_dd(M: int, model: SlotModel, sym: np.ndarray, u: np.ndarray, v: np.ndarray, erasure: bool) -> np.ndarray:
    pulse = sym[:, None] == np.arange(M)
    click = u < model.click_probability(False, pulse)
    n_clicked = click.sum(axis=1)
    pick = np.floor(v * np.maximum(n_clicked, 1)).astype(np.int64)
    declared = np.argmax(np.cumsum(click, axis=1) > pick[:, None], axis=1)
    none = n_clicked == 0
    declared[none] = M if erasure else np.minimum(np.floor(v[none] * M).astype(np.int64), M - 1)
    return declared


def _simulate_shard(spec: ReceiverSpec, model: SlotModel, prior, seed: int, shard: int, trials: int) -> np.ndarray:
    rng = shard_generator(seed, shard)
    M = spec.config.M
    sym = rng.choice(spec.n_inputs, size=trials, p=prior)
    u = rng.random((trials, M))
    v = rng.random(trials)
    if spec.kind is ReceiverKind.CPN:
        declared = _run_cpn(M, model, sym, u, spec.erasure_output)
    else:
        declared = _run_dd(M, model, sym, u, v, spec.erasure_output)
    counts = np.zeros((spec.n_inputs, spec.n_outputs), dtype=np.int64)
    # the zero codeword is drawn as index M and carries no pulse
    np.add.at(counts, (sym, declared), 1)
    return counts


def simulate(
    spec: ReceiverSpec,
    trials: int,
    seed: int,
    *,
    prior: Optional[Sequence[float]] = None,
    shards: Optional[int] = None,
    workers: Optional[int] = None,
) -> tuple:
    """Monte Carlo estimate of the symbol error probability.

    Returns ``(McEstimate, ConfusionMatrix or None)``; the empirical matrix is
    None when some input symbol was never drawn. Results depend only on
    ``(seed, trials, shards)``, never on the number of worker threads.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    if prior is None:
        prior = np.full(spec.n_inputs, 1.0 / spec.n_inputs)
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (spec.n_inputs,) or prior.min() < 0 or abs(prior.sum() - 1.0) > 1e-12:
        raise DomainError("prior must be a probability vector over the inputs")
    if shards is None:
        shards = -(-trials // DEFAULT_SHARD_TRIALS)
    shards = max(1, min(shards, trials))
    sizes = [trials // shards + (1 if i < trials % shards else 0) for i in range(shards)]
    model = slot_model(spec)
    n_workers = min(workers or worker_count(), shards)

    def run(i: int) -> np.ndarray:
        return _simulate_shard(spec, model, prior, seed, i, sizes[i])

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, range(shards)))
    else:
        parts = [run(i) for i in range(shards)]
    counts = np.sum(parts, axis=0)

    n = min(spec.n_inputs, spec.n_outputs)
    errors = trials - int(np.trace(counts[:n, :n]))
    estimate = McEstimate(p_hat=errors / trials, trials=trials, seed=seed)
    row_totals = counts.sum(axis=1)
    if np.any(row_totals == 0):
        return estimate, None
    return estimate, ConfusionMatrix(counts / row_totals[:, None], erasure_column=spec.erasure_output)
