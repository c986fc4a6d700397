"""NOMA-vs-OMA decision rules and empirical diversity order."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .model import SystemConfig

_TIE_RTOL = 1e-12


def k_function(t: int, alpha2: float, rate2: float) -> float:
    """Gap between the NOMA and OMA Erlang arguments for user 2.

    Negative means NOMA beats OMA for the near user after ``t`` rounds.
    """
    _check_alpha2(alpha2)
    if t < 1 or rate2 <= 0:
        raise ValueError("k_function needs t >= 1 and rate2 > 0")
    return (2.0 ** (t * rate2) - 1) / alpha2 - 2.0 ** (2 * t * rate2) + 1


def l_function(alpha2, rate2: float, t: int):
    """``k_function`` read as a function of the power share; accepts arrays."""
    a = np.asarray(alpha2, dtype=float)
    if np.any((a <= 0) | (a >= 1)):
        raise ValueError("alpha2 must lie in (0, 1)")
    if t < 1 or rate2 <= 0:
        raise ValueError("l_function needs t >= 1 and rate2 > 0")
    out = (2.0 ** (t * rate2) - 1) / a - 2.0 ** (2 * t * rate2) + 1
    return float(out) if out.ndim == 0 else out


def alpha2_threshold(t: int, rate2: float) -> float:
    """Power share of user 2 at which NOMA and OMA tie: ``1/(2**(t R2) + 1)``."""
    if t < 1 or rate2 <= 0:
        raise ValueError("alpha2_threshold needs t >= 1 and rate2 > 0")
    return 1.0 / (2.0 ** (t * rate2) + 1)


def g_function(rate2: float) -> float:
    """Single-round threshold ``(2**R - 1)/(2**(2R) - 1)``; tends to 1/2 as R -> 0."""
    if rate2 < 0:
        raise ValueError("rate2 must be non-negative")
    if rate2 == 0:
        return 0.5
    return math.expm1(rate2 * math.log(2)) / math.expm1(2 * rate2 * math.log(2))


SUP_G = g_function(0.0)


def _rounds_bound(alpha2: float, rate2: float) -> float:
    _check_alpha2(alpha2)
    if rate2 <= 0:
        raise ValueError("rate2 must be positive")
    return math.log2((1 - alpha2) / alpha2) / rate2


def _snap(bound: float) -> float:
    nearest = round(bound)
    if math.isclose(bound, nearest, rel_tol=_TIE_RTOL, abs_tol=_TIE_RTOL):
        return float(nearest)
    return bound


def min_rounds(alpha2: float, rate2: float) -> int:
    """Smallest T strictly above ``log2((1-a2)/a2)/R2``; at a tie NOMA is not yet better."""
    bound = _snap(_rounds_bound(alpha2, rate2))
    if bound < 1:
        return 1
    return int(math.floor(bound)) + 1


def min_rounds_tie(alpha2: float, rate2: float) -> int:
    """Smallest T with ``K(T) <= 0``, i.e. NOMA no worse than OMA."""
    bound = _snap(_rounds_bound(alpha2, rate2))
    return max(1, int(math.ceil(bound)))


@dataclass
class TradeoffReport:
    alpha2: float
    rate2: float
    k_values: dict = field(default_factory=dict)
    t_min: int = 1
    t_min_tie: int = 1
    alpha2_threshold: float = 0.5
    sup_g: float = SUP_G

    def to_dict(self) -> dict:
        return {
            "alpha2": self.alpha2,
            "rate2": self.rate2,
            "k_values": {str(t): v for t, v in self.k_values.items()},
            "t_min": self.t_min,
            "t_min_tie": self.t_min_tie,
            "alpha2_threshold": self.alpha2_threshold,
            "sup_g": self.sup_g,
        }


def tradeoff_report(alpha2: float, rate2: float, t_rounds: int = 1, t_max: int | None = None) -> TradeoffReport:
    """K over ``1..t_max``, both minimum-round conventions and the alpha2 threshold at ``t_rounds``."""
    t_min = min_rounds(alpha2, rate2)
    t_max = max(t_max or 0, t_min)
    return TradeoffReport(
        alpha2=alpha2,
        rate2=rate2,
        k_values={t: k_function(t, alpha2, rate2) for t in range(1, t_max + 1)},
        t_min=t_min,
        t_min_tie=min_rounds_tie(alpha2, rate2),
        alpha2_threshold=alpha2_threshold(t_rounds, rate2),
    )


@dataclass(frozen=True)
class SingleRoundComparison:
    noma_better: bool
    p_noma: float
    p_oma: float


def single_round_comparison(cfg: SystemConfig) -> SingleRoundComparison:
    """User 1 at T = 1: NOMA wins exactly when ``beta > 2**R1``."""
    return SingleRoundComparison(
        noma_better=cfg.beta > 2.0**cfg.rate1,
        p_noma=analytic.outage_noma_single(cfg, 1),
        p_oma=analytic.outage_oma(cfg, 1, 1),
    )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int

    @property
    def diversity_order(self) -> float:
        return -self.slope


def diversity_slope(points, window=(30.0, 50.0), floor: float = 0.0) -> SlopeFit:
    """Least-squares slope of log10(outage) against log10(rho) inside a dB window.

    ``points`` holds ``(rho_linear, probability)`` pairs. Probabilities at or
    below ``floor`` are dropped before fitting.
    """
    lo_db, hi_db = window
    rho = np.array([p[0] for p in points], dtype=float)
    prob = np.array([p[1] for p in points], dtype=float)
    db = 10 * np.log10(rho)
    keep = (db >= lo_db - 1e-9) & (db <= hi_db + 1e-9) & (prob > floor)
    if keep.sum() < 4:
        raise ValueError(f"need at least 4 points in [{lo_db}, {hi_db}] dB, got {int(keep.sum())}")
    prob_in = prob[keep]
    if np.any((prob_in <= 0) | (prob_in >= 1)):
        raise ValueError("probabilities must lie in (0, 1) for a log-log fit")
    xs = np.log10(rho[keep])
    ys = np.log10(prob_in)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), min(1.0, max(0.0, r2)), (lo_db, hi_db), int(keep.sum()))


def _check_alpha2(alpha2):
    if not 0 < alpha2 < 1:
        raise ValueError(f"alpha2 must lie in (0, 1), got {alpha2}")
