"""Outage analysis of two-user downlink NOMA with HARQ chase combining."""
from .analytic import (
    QuadratureSpec,
    ResourceBudgetError,
    cdf_sinr_single,
    outage_oma,
    outage_user1_analytic,
    outage_user2_highsnr,
)
from .model import SystemConfig, pathloss_mean
from .montecarlo import OutageEstimate, SimPlan, simulate_protocol

__all__ = [
    "OutageEstimate",
    "QuadratureSpec",
    "ResourceBudgetError",
    "SimPlan",
    "SystemConfig",
    "cdf_sinr_single",
    "outage_oma",
    "outage_user1_analytic",
    "outage_user2_highsnr",
    "pathloss_mean",
    "simulate_protocol",
]
