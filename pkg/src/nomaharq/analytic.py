"""Closed-form and semi-analytic outage probabilities.

User 1 under chase combining has no closed form: the Laplace transform of
one round's SINR is discretised with Gauss-Chebyshev quadrature, raised to
the T-th power by multinomial expansion over compositions of T, and
inverted with the Gaver-Stehfest method. User 2 (high SNR) and OMA reduce
to Erlang CDFs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np
from scipy import special

from .model import SystemConfig

DEFAULT_NODES = 20
DEFAULT_TERMS = 10
MAX_STEHFEST_TERMS = 18
DEFAULT_BUDGET = 10_000_000

# rows of the composition matrix handled per vectorised block
_BLOCK_ELEMENTS = 4_000_000


class ResourceBudgetError(RuntimeError):
    pass


def chebyshev_nodes(n: int) -> np.ndarray:
    """Gauss-Chebyshev (first kind) nodes ``cos((2i-1) pi / (2n))``, i = 1..n."""
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    i = np.arange(1, n + 1)
    return np.cos((2 * i - 1) * np.pi / (2 * n))


def chebyshev_integrate(func, n: int) -> float:
    """Approximate the plain integral of ``func`` over [-1, 1].

    The rule is ``pi/n * sum f(x_i) sqrt(1 - x_i**2)``.
    """
    x = chebyshev_nodes(n)
    return float(np.pi / n * np.sum(func(x) * np.sqrt((1 - x) * (1 + x))))


@lru_cache(maxsize=None)
def _stehfest_exact(l_terms: int) -> tuple:
    half = l_terms // 2
    weights = []
    for k in range(1, l_terms + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** (half + 1), math.factorial(half)) * (
                math.comb(half, j) * math.comb(2 * j, j) * math.comb(j, k - j)
            )
        weights.append((-1) ** (half + k) * acc)
    return tuple(weights)


def stehfest_weights(l_terms: int) -> np.ndarray:
    """Gaver-Stehfest weights for an even number of terms.

    Computed in exact rational arithmetic and rounded once, so the only
    cancellation left is the one inherent to using them.
    """
    if l_terms % 2 or not 2 <= l_terms <= MAX_STEHFEST_TERMS:
        raise ValueError(f"Stehfest term count must be even and in [2, {MAX_STEHFEST_TERMS}], got {l_terms}")
    return np.array([float(w) for w in _stehfest_exact(l_terms)])


def stehfest_invert(transform, t: float, l_terms: int = DEFAULT_TERMS) -> float:
    """Invert a Laplace transform at ``t > 0`` with the Gaver-Stehfest sum."""
    if t <= 0:
        raise ValueError("Stehfest inversion needs t > 0")
    w = stehfest_weights(l_terms)
    k = np.arange(1, l_terms + 1)
    a = math.log(2.0) / t
    return float(a * np.sum(w * np.array([transform(a * kk) for kk in k])))


@dataclass(frozen=True)
class QuadratureSpec:
    n_nodes: int = DEFAULT_NODES
    l_terms: int = DEFAULT_TERMS
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    stehfest_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", chebyshev_nodes(self.n_nodes))
        object.__setattr__(self, "stehfest_weights", stehfest_weights(self.l_terms))
        self.nodes.setflags(write=False)
        self.stehfest_weights.setflags(write=False)


@dataclass(frozen=True)
class Composition:
    """One way of writing T as an ordered sum of N non-negative parts."""

    parts: tuple
    eta: int

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def log_eta(self) -> float:
        return math.lgamma(self.total + 1) - sum(math.lgamma(j + 1) for j in self.parts)


def multinomial(parts) -> int:
    out = math.factorial(sum(parts))
    for j in parts:
        out //= math.factorial(j)
    return out


def count_compositions(t: int, n: int) -> int:
    return math.comb(t + n - 1, n - 1)


def _parts(t: int, n: int):
    if n == 1:
        yield (t,)
        return
    for first in range(t, -1, -1):
        for rest in _parts(t - first, n - 1):
            yield (first,) + rest


def compositions(t: int, n: int) -> Iterator[Composition]:
    """Every composition of ``t`` into ``n`` parts, first part descending.

    ``(t, 0, ..., 0)`` comes first and ``(0, ..., 0, t)`` last.
    """
    if t < 1 or n < 1:
        raise ValueError(f"compositions need t >= 1 and n >= 1, got t={t}, n={n}")
    for parts in _parts(t, n):
        yield Composition(parts, multinomial(parts))


@lru_cache(maxsize=32)
def composition_matrix(t: int, n: int) -> np.ndarray:
    """All compositions as an int array of shape ``(C(t+n-1, n-1), n)``.

    Same row order as :func:`compositions`.
    """
    if n == 1:
        out = np.array([[t]], dtype=np.int64)
    elif t == 0:
        out = np.zeros((1, n), dtype=np.int64)
    else:
        blocks = []
        for first in range(t, -1, -1):
            sub = composition_matrix(t - first, n - 1)
            blocks.append(np.hstack([np.full((sub.shape[0], 1), first, dtype=np.int64), sub]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def _log_multinomial(rows: np.ndarray) -> np.ndarray:
    t = rows.sum(axis=1)
    return special.gammaln(t + 1) - special.gammaln(rows + 1).sum(axis=1)


def cdf_sinr_single(y: float, cfg: SystemConfig, user: int = 1) -> float:
    """CDF of one round's SINR for user 1's message, received at ``user``."""
    if y < 0:
        raise ValueError(f"SINR must be non-negative, got {y}")
    if y == 0:
        return 0.0
    if y >= cfg.beta:
        return 1.0
    lam = cfg.lam(user)
    return float(-math.expm1(-y / (lam * cfg.rho * (cfg.alpha1 - cfg.alpha2 * y))))


def pdf_sinr_single(y, cfg: SystemConfig, user: int = 1):
    y = np.asarray(y, dtype=float)
    lam = cfg.lam(user)
    inside = (y > 0) & (y < cfg.beta)
    gap = np.where(inside, cfg.alpha1 - cfg.alpha2 * y, 1.0)
    dens = cfg.alpha1 / (lam * cfg.rho * gap**2) * np.exp(-y / (lam * cfg.rho * gap))
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def _log_node_weights(cfg: SystemConfig, x: np.ndarray) -> np.ndarray:
    """``log(c * C(x_n))``: log quadrature mass of each node.

    ``2 a1 - a2 beta (x + 1)`` simplifies to ``a1 (1 - x)``, and the
    ``exp(1/(a2 lam rho))`` factor of ``c`` is merged with the exponential
    of ``C(x)`` so neither overflows at low SNR.
    """
    lam_rho = cfg.lambda1 * cfg.rho
    n = x.size
    log_c = math.log(2 * cfg.alpha1 * cfg.beta * math.pi / (n * lam_rho))
    gap = cfg.alpha1 * (1 - x)
    log_sqrt = 0.5 * (np.log1p(-x) + np.log1p(x))
    merged_exp = -(1 + x) / ((1 - x) * cfg.alpha2 * lam_rho)
    return log_c + log_sqrt - 2 * np.log(gap) + merged_exp


def laplace_sinr_single(s: float, cfg: SystemConfig, quad: QuadratureSpec | None = None) -> float:
    """Quadrature approximation of ``E[exp(-s * SINR)]`` for user 1."""
    if s < 0:
        raise ValueError("transform variable must be non-negative")
    quad = quad or QuadratureSpec()
    x = quad.nodes
    log_terms = _log_node_weights(cfg, x) - s * cfg.beta * (x + 1) / 2
    return float(np.sum(np.exp(log_terms)))


def _stehfest_step_integral(shift2: np.ndarray, r: float, quad: QuadratureSpec) -> np.ndarray:
    """Integral over (0, r) of the inverse transform of ``exp(-s * shift2 / 2)``.

    Stehfest inversion inside, Gauss-Chebyshev over (0, r) outside.
    ``shift2`` is ``sum_n j_n beta (x_n + 1)``.
    """
    x = quad.nodes
    n = x.size
    ln2 = math.log(2.0)
    k = np.arange(1, quad.l_terms + 1)
    prefactor = np.pi * ln2 * np.sqrt((1 - x) * (1 + x)) / (n * (1 + x))
    scale = ln2 / (r * (1 + x))
    out = np.empty(shift2.shape[0])
    rows = max(1, _BLOCK_ELEMENTS // (n * k.size))
    with np.errstate(under="ignore"):
        for lo in range(0, shift2.shape[0], rows):
            z = shift2[lo : lo + rows, None] * scale[None, :]
            inner = np.exp(-z[:, :, None] * k[None, None, :]) @ quad.stehfest_weights
            out[lo : lo + rows] = inner @ prefactor
    return out


def outage_user1_analytic(
    cfg: SystemConfig,
    t_rounds: int,
    quad: QuadratureSpec | None = None,
    threshold_override: float | None = None,
    literal: bool = False,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """Outage of the far user after ``t_rounds`` chase-combined rounds.

    The default threshold is ``2**(T R1) - 1``. ``literal=True`` keeps the
    extra ``1/r`` factor of the published closed form, for comparison
    only; it does not reduce to the exact single-round CDF.
    """
    if t_rounds < 1:
        raise ValueError("t_rounds must be >= 1")
    quad = quad or QuadratureSpec()
    r = cfg.threshold(1, t_rounds) if threshold_override is None else float(threshold_override)
    if r <= 0:
        raise ValueError("outage threshold must be positive")
    if r >= t_rounds * cfg.beta:
        return 1.0

    n_rows = count_compositions(t_rounds, quad.n_nodes)
    if t_rounds * n_rows > budget:
        raise ResourceBudgetError(
            f"T={t_rounds} with N={quad.n_nodes} nodes needs {n_rows} compositions "
            f"(cost {t_rounds * n_rows} > budget {budget}); reduce N or T"
        )

    x = quad.nodes
    rows = composition_matrix(t_rounds, quad.n_nodes)
    log_weight = _log_multinomial(rows) + rows @ _log_node_weights(cfg, x)
    shift2 = rows @ (cfg.beta * (x + 1))
    q = _stehfest_step_integral(shift2, r, quad)
    with np.errstate(under="ignore"):
        total = float(np.sum(np.exp(log_weight) * q))
    if literal:
        total /= r
    return min(1.0, max(0.0, total))


def regularized_lower_gamma(a: float, x: float) -> float:
    """``P(a, x) = gamma(a, x) / Gamma(a)``."""
    if a <= 0 or x < 0:
        raise ValueError(f"regularized_lower_gamma needs a > 0 and x >= 0, got a={a}, x={x}")
    return float(special.gammainc(a, x))


class HighSnrOutage(NamedTuple):
    probability: float
    valid: bool


def theorem2_condition(cfg: SystemConfig, t_rounds: int) -> bool:
    """Whether user 1's rate is low enough for SIC at user 2 to be asymptotically free."""
    return math.log2(cfg.alpha1 * t_rounds / cfg.alpha2 + 1) / t_rounds > cfg.rate1


def outage_user2_highsnr(cfg: SystemConfig, t_rounds: int) -> HighSnrOutage:
    """High-SNR outage of the near user: an Erlang CDF in its own SNR."""
    if t_rounds < 1:
        raise ValueError("t_rounds must be >= 1")
    arg = cfg.threshold(2, t_rounds) / (cfg.alpha2 * cfg.lambda2 * cfg.rho)
    return HighSnrOutage(regularized_lower_gamma(t_rounds, arg), theorem2_condition(cfg, t_rounds))


def outage_oma(cfg: SystemConfig, user: int, t_rounds: int) -> float:
    """OMA outage with chase combining; each user gets half the resource."""
    if t_rounds < 1:
        raise ValueError("t_rounds must be >= 1")
    arg = cfg.threshold(user, t_rounds, oma=True) / (cfg.lam(user) * cfg.rho)
    return regularized_lower_gamma(t_rounds, arg)


def outage_noma_single(cfg: SystemConfig, user: int = 1) -> float:
    """Single-round NOMA outage of user 1's message at ``user`` (exact)."""
    return cdf_sinr_single(cfg.single_round_threshold(1), cfg, user)
