"""Slotted random access on a collision channel: QoS admission, FTP/ATP
contention, optimal-scheduling baseline, frame traces and batch statistics.

A frame collects exactly one packet from each admitted user.  Per slot,
every user still holding a packet transmits independently with the
scheme's probability; exactly one transmitter is a success (that user
leaves the pool), two or more collide, zero is an idle slot.  Idle and
collision slots cost one time unit each, same as success slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import channel, streams
from .params import EnergyModel, Experiment

IDLE, SUCCESS, COLLISION = "idle", "success", "collision"


@dataclass(frozen=True)
class SlotRecord:
    kind: str            # idle | success | collision
    transmitters: int    # packet transmissions in this slot
    remaining: int       # users still holding a packet at slot start
    p: float             # per-user transmission probability in force
    waiting: int         # holders charged idle energy this slot
    user: int = -1       # succeeding user id (success slots only)


@dataclass
class FrameTrace:
    """Per-slot log of one frame plus its conserved totals."""

    scheme: str
    k_admitted: int
    slots: List[SlotRecord] = field(default_factory=list)

    @property
    def total_slots(self) -> int:
        return len(self.slots)

    @property
    def total_transmissions(self) -> int:
        return sum(s.transmitters for s in self.slots)

    @property
    def success_count(self) -> int:
        return sum(1 for s in self.slots if s.kind == SUCCESS)

    @property
    def total_waiting(self) -> int:
        return sum(s.waiting for s in self.slots)

    def per_user_energy(self, model: EnergyModel) -> float:
        if self.k_admitted == 0:
            return 0.0
        return account_energy(self, model) / self.k_admitted


def admit_users(exp: Experiment, trial: int, seed: Optional[int] = None
                ) -> Tuple[int, np.ndarray]:
    """QoS admission: keep the users whose SNR exceeds gamma_qos.

    Every provisioned user gets an independent channel draw (fresh per
    frame); `admission = average` in the config compares the mean SNR
    instead of an instantaneous draw.
    """
    cfg = exp.protocol
    seed = cfg.seed if seed is None else seed
    n = cfg.n_total
    if cfg.admission == "average" or cfg.gamma_qos == 0.0:
        # gamma_qos = 0 admits everyone (SNR > 0 almost surely); the
        # average mode needs no random draw at all.
        if cfg.admission == "average" and exp.link.avg_snr <= cfg.gamma_qos:
            return 0, np.array([], dtype=int)
        return n, np.arange(n)
    gammas = channel.draw_snr_batch(
        exp, n,
        streams.substream(seed, trial, streams.ADMISSION, streams.ABSORPTION),
        streams.substream(seed, trial, streams.ADMISSION, streams.FADING),
        streams.substream(seed, trial, streams.ADMISSION, streams.MISALIGNMENT))
    ids = np.flatnonzero(gammas > cfg.gamma_qos)
    return ids.size, ids


def run_frame(scheme: str, k: int, rng: np.random.Generator) -> FrameTrace:
    """Simulate one frame for k admitted users under the given scheme.

    Slot outcomes inside a contention stage are i.i.d. with the number of
    transmitters Binomial(remaining, p), so stages are drawn in batches
    and cut at the first success.
    """
    if scheme not in ("ftp", "atp", "optimal"):
        raise ValueError(f"unknown scheme {scheme!r}")
    trace = FrameTrace(scheme=scheme, k_admitted=k)
    if k == 0:
        return trace
    pool = list(range(k))

    if scheme == "optimal":
        # centralized scheduling: one user polled per slot, nobody idles
        trace.slots = [SlotRecord(SUCCESS, 1, k - i, 1.0, 0, uid)
                       for i, uid in enumerate(pool)]
        return trace

    p_fixed = 1.0 / k
    while pool:
        remaining = len(pool)
        p = p_fixed if scheme == "ftp" else 1.0 / remaining
        _run_stage(trace, pool, remaining, p, rng)
    return trace


def _run_stage(trace, pool, remaining, p, rng):
    """Slots until one success with `remaining` users at probability p."""
    ps = remaining * p * (1.0 - p) ** (remaining - 1)
    batch = max(8, min(10_000, int(3.0 / max(ps, 1e-9))))
    while True:
        ms = rng.binomial(remaining, p, size=batch)
        hit = np.flatnonzero(ms == 1)
        end = hit[0] if hit.size else batch
        for m in ms[:end]:
            m = int(m)
            kind = IDLE if m == 0 else COLLISION
            trace.slots.append(SlotRecord(kind, m, remaining, p, remaining - m))
        if hit.size:
            uid = pool.pop(int(rng.integers(len(pool))))
            trace.slots.append(
                SlotRecord(SUCCESS, 1, remaining, p, remaining - 1, uid))
            return


def account_energy(trace: FrameTrace, model: EnergyModel) -> float:
    """Frame energy: unit mode counts transmissions; realistic mode charges
    e_tx per transmission, e_ack per success, e_idle per waiting holder-slot."""
    if not model.realistic:
        return float(trace.total_transmissions)
    return (model.e_tx_uj * trace.total_transmissions
            + model.e_ack_uj * trace.success_count
            + model.e_idle_uj * trace.total_waiting)


@dataclass(frozen=True)
class AggregateStats:
    """Across-trial means with standard errors (sample std / sqrt(n))."""

    scheme: str
    n_trials: int
    mean_delay: float
    se_delay: float
    mean_transmissions: float
    se_transmissions: float
    mean_energy_units: float
    se_energy_units: float
    mean_energy_uj: float
    se_energy_uj: float
    mean_k_admitted: float

    def mean_energy(self, model: EnergyModel) -> float:
        return self.mean_energy_uj if model.realistic else self.mean_energy_units


@dataclass(frozen=True)
class TrialRow:
    trial: int
    scheme: str
    k_admitted: int
    total_slots: int
    total_transmissions: int
    energy_units: float
    energy_uj: float


def run_batch(exp: Experiment, collect_rows: bool = False
              ) -> Tuple[AggregateStats, List[TrialRow]]:
    """Run `trials` independent frames; deterministic given (seed, config).

    Each trial owns named substreams for admission and contention, so the
    aggregate is independent of execution order.  K_admitted = 0 frames
    contribute zero delay/energy and stay in the averages.
    """
    cfg = exp.protocol
    unit = EnergyModel(realistic=False)
    realistic = EnergyModel(realistic=True, e_tx_uj=cfg.energy.e_tx_uj,
                            e_ack_uj=cfg.energy.e_ack_uj,
                            e_idle_uj=cfg.energy.e_idle_uj)
    delays = np.empty(cfg.trials)
    txs = np.empty(cfg.trials)
    e_uj = np.empty(cfg.trials)
    ks = np.empty(cfg.trials)
    rows: List[TrialRow] = []
    for t in range(cfg.trials):
        k_adm, _ = admit_users(exp, t)
        rng = streams.substream(cfg.seed, t, streams.PROTOCOL)
        trace = run_frame(cfg.scheme, k_adm, rng)
        delays[t] = trace.total_slots
        txs[t] = trace.total_transmissions
        e_uj[t] = account_energy(trace, realistic)
        ks[t] = k_adm
        if collect_rows:
            rows.append(TrialRow(t, cfg.scheme, k_adm, trace.total_slots,
                                 trace.total_transmissions,
                                 account_energy(trace, unit), float(e_uj[t])))
    stats = AggregateStats(
        scheme=cfg.scheme, n_trials=cfg.trials,
        mean_delay=float(delays.mean()), se_delay=_se(delays),
        mean_transmissions=float(txs.mean()), se_transmissions=_se(txs),
        mean_energy_units=float(txs.mean()), se_energy_units=_se(txs),
        mean_energy_uj=float(e_uj.mean()), se_energy_uj=_se(e_uj),
        mean_k_admitted=float(ks.mean()))
    return stats, rows


def _se(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(x.std(ddof=1) / math.sqrt(x.size))
