"""System parameters, channel statistics and per-round SINR maps.

Both the analytic and the Monte Carlo engines build on this module. All
internal quantities use linear SNR; dB conversion is a CLI concern.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SUM_TOL = 1e-12


def pathloss_mean(d: float, zeta: float) -> float:
    """Mean channel gain ``1 / (1 + d**zeta)`` of a Rayleigh link."""
    if d <= 0 or zeta < 0 or not math.isfinite(d) or not math.isfinite(zeta):
        raise ValueError(f"pathloss_mean needs d > 0 and zeta >= 0, got d={d}, zeta={zeta}")
    return 1.0 / (1.0 + d**zeta)


def db_to_linear(db):
    if np.ndim(db):
        return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return 10.0 ** (float(db) / 10.0)


def linear_to_db(x):
    if np.ndim(x):
        return 10.0 * np.log10(np.asarray(x, dtype=float))
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """Two-user downlink NOMA link.

    User 1 is the far (weak) user and gets the larger power share.
    Validation happens once, here; downstream code trusts the fields.
    """

    alpha1: float
    alpha2: float
    rho: float
    d1: float
    d2: float
    zeta: float
    rate1: float
    rate2: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if abs(self.alpha1 + self.alpha2 - 1.0) > _SUM_TOL:
            raise ValueError(f"alpha1 + alpha2 must equal 1, got {self.alpha1 + self.alpha2!r}")
        if not self.alpha1 > self.alpha2:
            raise ValueError("user 1 (far user) must receive more power: alpha1 > alpha2")
        for name in ("rho", "d1", "d2", "zeta", "rate1", "rate2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite positive number, got {v}")
        if self.d1 < self.d2:
            raise ValueError(f"user 1 must be the far user: d1 >= d2, got d1={self.d1}, d2={self.d2}")

    @property
    def lambda1(self) -> float:
        return pathloss_mean(self.d1, self.zeta)

    @property
    def lambda2(self) -> float:
        return pathloss_mean(self.d2, self.zeta)

    @property
    def beta(self) -> float:
        """Upper bound alpha1/alpha2 of any SINR for user 1's message."""
        return self.alpha1 / self.alpha2

    @property
    def rho_db(self) -> float:
        return linear_to_db(self.rho)

    def lam(self, user: int) -> float:
        return _pick(user, self.lambda1, self.lambda2)

    def rate(self, user: int) -> float:
        return _pick(user, self.rate1, self.rate2)

    def single_round_threshold(self, user: int) -> float:
        """``2**R_j - 1``."""
        return 2.0 ** self.rate(user) - 1.0

    def threshold(self, user: int, t_rounds: int, oma: bool = False) -> float:
        """Accumulated-SINR outage threshold after ``t_rounds`` rounds.

        NOMA uses ``2**(T R) - 1``; OMA halves the resource so the
        exponent doubles to ``2**(2 T R) - 1``.
        """
        factor = 2 if oma else 1
        return 2.0 ** (factor * t_rounds * self.rate(user)) - 1.0

    def with_rho(self, rho: float) -> "SystemConfig":
        return self.replace(rho=rho)

    def replace(self, **changes) -> "SystemConfig":
        fields = self.to_dict(derived=False)
        fields.update(changes)
        return SystemConfig(**fields)

    def to_dict(self, derived: bool = True) -> dict:
        out = {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "rho": self.rho,
            "d1": self.d1,
            "d2": self.d2,
            "zeta": self.zeta,
            "rate1": self.rate1,
            "rate2": self.rate2,
        }
        if derived:
            out["lambda1"] = self.lambda1
            out["lambda2"] = self.lambda2
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        return cls(**normalize_config_dict(data, require_all=True))

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), indent=2, **kwargs)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "SystemConfig":
        return cls.from_dict(load_config_dict(text_or_path))


_CONFIG_FIELDS = ("alpha1", "alpha2", "rho", "d1", "d2", "zeta", "rate1", "rate2")


def normalize_config_dict(data: dict, require_all: bool = False) -> dict:
    """Validate raw JSON keys and resolve ``rho_db`` into linear ``rho``.

    Derived ``lambda1``/``lambda2`` keys are accepted but must agree with
    the distances; they are dropped from the result.
    """
    allowed = set(_CONFIG_FIELDS) | {"rho_db", "lambda1", "lambda2"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "rho" in data and "rho_db" in data:
        raise ValueError("config may give 'rho' or 'rho_db', not both")

    out = {k: float(v) for k, v in data.items() if k in _CONFIG_FIELDS}
    if "rho_db" in data:
        out["rho"] = float(db_to_linear(float(data["rho_db"])))
    if require_all:
        missing = [k for k in _CONFIG_FIELDS if k not in out]
        if missing:
            raise ValueError(f"config is missing fields: {missing}")

    for lam_key, d_key in (("lambda1", "d1"), ("lambda2", "d2")):
        if lam_key in data and d_key in out and "zeta" in out:
            expected = pathloss_mean(out[d_key], out["zeta"])
            if not math.isclose(float(data[lam_key]), expected, rel_tol=1e-9):
                raise ValueError(f"{lam_key}={data[lam_key]} disagrees with {d_key}/zeta (expected {expected})")
    return out


def load_config_dict(text_or_path) -> dict:
    if isinstance(text_or_path, Path) or (isinstance(text_or_path, str) and not text_or_path.lstrip().startswith("{")):
        text = Path(text_or_path).read_text()
    else:
        text = text_or_path
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("config JSON must be an object")
    return data


def _pick(user: int, first, second):
    if user == 1:
        return first
    if user == 2:
        return second
    raise ValueError(f"user index must be 1 or 2, got {user}")


def _superposed_sinr(gain_sq, cfg: SystemConfig):
    g = np.asarray(gain_sq, dtype=float)
    return cfg.alpha1 * g / (cfg.alpha2 * g + 1.0 / cfg.rho)


def sinr_user1(gain_sq, cfg: SystemConfig):
    """SINR of user 1 decoding its own message, user 2 treated as noise.

    Works elementwise on arrays; scalars in, float out.
    """
    out = _superposed_sinr(gain_sq, cfg)
    return float(out) if out.ndim == 0 else out


def sinr_user2_sic(gain_sq, cfg: SystemConfig):
    """``(SINR for user 1's message at user 2, SNR of user 2's own message)``.

    The second entry assumes user 1's message was cancelled first.
    """
    g = np.asarray(gain_sq, dtype=float)
    first = _superposed_sinr(g, cfg)
    second = cfg.alpha2 * cfg.rho * g
    if g.ndim == 0:
        return float(first), float(second)
    return first, second


@dataclass(frozen=True)
class ChannelDraw:
    gain_sq: float

    def __post_init__(self):
        if self.gain_sq < 0:
            raise ValueError("gain_sq must be non-negative")


def draw_gains(lam: float, stream: np.random.Generator, size=None):
    """``|h|**2`` samples: exponential with mean ``lam``."""
    if lam <= 0:
        raise ValueError(f"mean gain must be positive, got {lam}")
    return stream.exponential(scale=lam, size=size)


def draw_channel(lam: float, stream: np.random.Generator) -> ChannelDraw:
    return ChannelDraw(float(draw_gains(lam, stream)))
