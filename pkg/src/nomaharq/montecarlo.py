"""Monte Carlo ground truth for the HARQ-CC NOMA and OMA outage events.

Trials are split into fixed-size chunks. Every chunk draws from its own
generator, derived from ``(seed, user, chunk index)``, and reports integer
event counts (or per-chunk weight sums for importance sampling). Results
are therefore identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import SystemConfig, draw_gains, sinr_user1, sinr_user2_sic

DEFAULT_TRIALS = 1_000_000
ESCALATED_TRIALS = 10_000_000
MIN_EVENTS = 100
DEFAULT_CHUNK = 250_000
_Z95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class SimPlan:
    trials: int
    t_rounds: int = 1
    seed: int = 0
    chunk_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1 or self.t_rounds < 1 or self.workers < 1:
            raise ValueError("trials, t_rounds and workers must all be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.chunk_size is None:
            object.__setattr__(self, "chunk_size", min(self.trials, DEFAULT_CHUNK))
        if self.chunk_size < 1 or self.chunk_size > self.trials:
            raise ValueError(f"chunk_size must lie in [1, trials], got {self.chunk_size}")

    def chunks(self) -> list:
        """``(index, size)`` for every chunk; the last one may be short."""
        full, rest = divmod(self.trials, self.chunk_size)
        out = [(i, self.chunk_size) for i in range(full)]
        if rest:
            out.append((full, rest))
        return out

    def with_trials(self, trials: int) -> "SimPlan":
        return SimPlan(trials, self.t_rounds, self.seed, min(self.chunk_size, trials), self.workers)

    def with_rounds(self, t_rounds: int) -> "SimPlan":
        return SimPlan(self.trials, t_rounds, self.seed, self.chunk_size, self.workers)


def chunk_stream(seed: int, user: int, chunk: int) -> np.random.Generator:
    """Independent generator for one (user, chunk) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(user, chunk))))


def wilson_interval(p_hat: float, n: float, z: float = _Z95) -> tuple:
    if n <= 0:
        return (0.0, 1.0)
    denom = 1 + z * z / n
    centre = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    return (min(lo, p_hat), max(hi, p_hat))


@dataclass(frozen=True)
class OutageEstimate:
    """A probability with its provenance.

    For importance-sampled estimates ``std_err`` is the weighted-sample
    standard error and ``effective_trials`` is the plain-MC trial count
    with the same error; the Wilson interval uses the latter.
    """

    p_hat: float
    trials: int
    std_err: float
    ci95: tuple
    source: str = "mc"
    effective_trials: float | None = None

    @classmethod
    def from_counts(cls, events: int, trials: int) -> "OutageEstimate":
        p = events / trials
        return cls(p, trials, math.sqrt(p * (1 - p) / trials), wilson_interval(p, trials), "mc", float(trials))

    @classmethod
    def from_weighted(cls, mean: float, variance: float, trials: int) -> "OutageEstimate":
        p = min(1.0, max(0.0, mean))
        se = math.sqrt(max(variance, 0.0) / trials)
        n_eff = p * (1 - p) / se**2 if se > 0 else float(trials)
        return cls(p, trials, se, wilson_interval(p, n_eff), "mc", n_eff)

    @classmethod
    def analytic(cls, p: float) -> "OutageEstimate":
        return cls(p, 0, 0.0, (p, p), "analytic", None)

    def agrees_with(self, value: float, n_se: float = 3.0, rel: float = 0.0) -> bool:
        return abs(self.p_hat - value) <= max(n_se * self.std_err, rel * abs(value))


def _run_chunks(plan: SimPlan, work):
    tasks = plan.chunks()
    if plan.workers == 1 or len(tasks) == 1:
        return [work(i, n) for i, n in tasks]
    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        return list(pool.map(lambda task: work(*task), tasks))


def _count(plan: SimPlan, user: int, lam: float, is_outage) -> OutageEstimate:
    def work(index, size):
        gains = draw_gains(lam, chunk_stream(plan.seed, user, index), (size, plan.t_rounds))
        return int(np.count_nonzero(is_outage(gains)))

    return OutageEstimate.from_counts(sum(_run_chunks(plan, work)), plan.trials)


def _user1_outage_mask(gains: np.ndarray, cfg: SystemConfig, threshold: float) -> np.ndarray:
    return sinr_user1(gains, cfg).sum(axis=1) <= threshold


def _user2_outage_mask(gains: np.ndarray, cfg: SystemConfig, thr1: float, thr2: float) -> np.ndarray:
    to_user1, own = sinr_user2_sic(gains, cfg)
    sic_ok = to_user1.sum(axis=1) > thr1
    own_ok = own.sum(axis=1) > thr2
    return ~(sic_ok & own_ok)


def simulate_outage_user1(cfg: SystemConfig, plan: SimPlan) -> OutageEstimate:
    """Fraction of trials whose combined user-1 SINR stays at or below ``2**(T R1) - 1``."""
    thr = cfg.threshold(1, plan.t_rounds)
    return _count(plan, 1, cfg.lambda1, lambda g: _user1_outage_mask(g, cfg, thr))


def simulate_outage_user2(cfg: SystemConfig, plan: SimPlan, tilt: float | None = None) -> OutageEstimate:
    """Joint SIC-then-own-decode outage of user 2 on shared per-round draws.

    ``tilt`` in (0, 1] switches to importance sampling: gains are drawn with
    mean ``tilt * lambda2`` and reweighted by the likelihood ratio. Use
    :func:`suggest_tilt` for a reasonable value at high SNR.
    """
    thr1 = cfg.threshold(1, plan.t_rounds)
    thr2 = cfg.threshold(2, plan.t_rounds)
    lam = cfg.lambda2
    if tilt is None:
        return _count(plan, 2, lam, lambda g: _user2_outage_mask(g, cfg, thr1, thr2))
    if not 0 < tilt <= 1:
        raise ValueError("tilt must lie in (0, 1]")

    def work(index, size):
        gains = draw_gains(lam * tilt, chunk_stream(plan.seed, 2, index), (size, plan.t_rounds))
        mask = _user2_outage_mask(gains, cfg, thr1, thr2)
        log_w = plan.t_rounds * math.log(tilt) + gains[mask].sum(axis=1) * (1 - tilt) / (lam * tilt)
        w = np.exp(log_w)
        return float(w.sum()), float(np.sum(w * w))

    parts = _run_chunks(plan, work)
    s1 = float(np.sum([p[0] for p in parts]))
    s2 = float(np.sum([p[1] for p in parts]))
    n = plan.trials
    mean = s1 / n
    var = (s2 / n - mean * mean) * n / max(n - 1, 1)
    return OutageEstimate.from_weighted(mean, var, n)


def suggest_tilt(cfg: SystemConfig, t_rounds: int) -> float:
    """Proposal scale putting the mean gain sum at user 2's own-decode boundary."""
    boundary = cfg.threshold(2, t_rounds) / (cfg.alpha2 * cfg.rho)
    return min(1.0, boundary / (t_rounds * cfg.lambda2))


def simulate_oma(cfg: SystemConfig, user: int, plan: SimPlan) -> OutageEstimate:
    """OMA outage: half-resource rate on the summed per-round SNRs.

    Reuses the NOMA draw streams of the same user, so NOMA-vs-OMA
    comparisons at equal seed see common random numbers.
    """
    thr = cfg.threshold(user, plan.t_rounds, oma=True)
    lam = cfg.lam(user)
    return _count(plan, user, lam, lambda g: cfg.rho * g.sum(axis=1) <= thr)


def simulate(cfg: SystemConfig, plan: SimPlan, kind: str, **kwargs) -> OutageEstimate:
    if kind == "user1":
        return simulate_outage_user1(cfg, plan)
    if kind == "user2":
        return simulate_outage_user2(cfg, plan, **kwargs)
    if kind == "oma1":
        return simulate_oma(cfg, 1, plan)
    if kind == "oma2":
        return simulate_oma(cfg, 2, plan)
    raise ValueError(f"unknown simulation kind {kind!r}")


def simulate_escalating(
    cfg: SystemConfig,
    plan: SimPlan,
    kind: str,
    escalated_trials: int = ESCALATED_TRIALS,
    min_events: int = MIN_EVENTS,
) -> OutageEstimate:
    """Run ``plan``; rerun with ``escalated_trials`` if fewer than ``min_events`` outages were seen."""
    est = simulate(cfg, plan, kind)
    if est.p_hat * est.trials < min_events and escalated_trials > plan.trials:
        est = simulate(cfg, plan.with_trials(escalated_trials), kind)
    return est


@dataclass
class ProtocolStats:
    """Round-count histogram and per-user outages of the ACK/NACK protocol.

    ``rounds_used_histogram[t-1]`` counts packets finished after ``t`` rounds;
    the final bucket (index ``t_max``) counts discarded packets.
    """

    t_max: int
    rounds_used_histogram: np.ndarray
    user1_outage: OutageEstimate
    user2_outage: OutageEstimate
    packets: int = field(init=False)

    def __post_init__(self):
        self.packets = int(self.rounds_used_histogram.sum())

    @property
    def discarded(self) -> int:
        return int(self.rounds_used_histogram[-1])

    @property
    def mean_rounds(self) -> float:
        """Average transmissions per packet, discarded packets counting ``t_max``."""
        rounds = np.arange(1, self.t_max + 2)
        rounds[-1] = self.t_max
        return float(np.dot(rounds, self.rounds_used_histogram) / self.packets)


def _first_success(ok: np.ndarray) -> np.ndarray:
    """Zero-based round of the first success, or ``ok.shape[1]`` if none."""
    any_ok = ok.any(axis=1)
    return np.where(any_ok, ok.argmax(axis=1), ok.shape[1])


def simulate_protocol(
    cfg: SystemConfig,
    t_max: int,
    packets: int,
    seed: int = 0,
    chunk_size: int | None = None,
    workers: int = 1,
) -> ProtocolStats:
    """Round-by-round HARQ-CC with joint ACK and discard after ``t_max`` rounds.

    Each packet carries a fixed rate target ``2**(t_max R) - 1`` per user on
    the combined SINR. A user that has ACKed ignores further copies; user 2
    attempts its own message only once user 1's message clears SIC. The
    random streams match :func:`simulate_outage_user1` and
    :func:`simulate_outage_user2` with ``t_rounds = t_max``.
    """
    plan = SimPlan(packets, t_max, seed, chunk_size, workers)
    thr1 = cfg.threshold(1, t_max)
    thr2 = cfg.threshold(2, t_max)

    def work(index, size):
        g1 = draw_gains(cfg.lambda1, chunk_stream(seed, 1, index), (size, t_max))
        g2 = draw_gains(cfg.lambda2, chunk_stream(seed, 2, index), (size, t_max))
        ok1 = np.cumsum(sinr_user1(g1, cfg), axis=1) > thr1
        to_user1, own = sinr_user2_sic(g2, cfg)
        ok2 = (np.cumsum(to_user1, axis=1) > thr1) & (np.cumsum(own, axis=1) > thr2)
        done1 = _first_success(ok1)
        done2 = _first_success(ok2)
        finished = np.maximum(done1, done2)
        hist = np.bincount(finished, minlength=t_max + 1)
        return hist, int(np.count_nonzero(done1 == t_max)), int(np.count_nonzero(done2 == t_max))

    parts = _run_chunks(plan, work)
    hist = np.sum([p[0] for p in parts], axis=0).astype(np.int64)
    fail1 = sum(p[1] for p in parts)
    fail2 = sum(p[2] for p in parts)
    return ProtocolStats(
        t_max=t_max,
        rounds_used_histogram=hist,
        user1_outage=OutageEstimate.from_counts(fail1, packets),
        user2_outage=OutageEstimate.from_counts(fail2, packets),
    )
