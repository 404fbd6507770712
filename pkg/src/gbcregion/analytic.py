"""Closed-form pieces of the optimal distortion region.

All D1-dependent functions accept a scalar or an array and return the
same shape (a Python float for scalar input).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .curves import DistortionPoint, SourceTag
from .model import ProblemInstance

__all__ = [
    "DomainError",
    "Regime",
    "RegimeReport",
    "DistortionPoint",
    "SourceTag",
    "d1_min",
    "d1_max",
    "d2_floor",
    "window_endpoints",
    "classify_regime",
    "d2_uncoded_frontier",
    "d2_hybrid_frontier",
    "d2_star",
    "gamma_threshold",
    "genie_region",
]

# slack when checking that D1 lies inside a closed interval
DOMAIN_RTOL = 1e-12
# negative discriminants this small (relative to P^2) are treated as zero
DISC_RTOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain where a formula applies."""


class Regime(str, Enum):
    UNCODED_EVERYWHERE = "UncodedEverywhere"
    HYBRID_WINDOW = "HybridWindow"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    d1_min: float
    d1_max: float
    d1_minus: float | None = None
    d1_plus: float | None = None

    @property
    def has_window(self) -> bool:
        return self.regime is Regime.HYBRID_WINDOW

    def as_dict(self) -> dict:
        return {"regime": self.regime.value, "d1_min": self.d1_min,
                "d1_max": self.d1_max, "d1_minus": self.d1_minus,
                "d1_plus": self.d1_plus}


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def d1_min(inst: ProblemInstance) -> float:
    """Smallest D1 reachable, i.e. with receiver 2 ignored."""
    return inst.N1 * inst.sigma2 / (inst.P + inst.N1)


def d1_max(inst: ProblemInstance) -> float:
    """D1 of the pure analog S2 scheme; beyond it D2 is at its floor."""
    P, N1 = inst.P, inst.N1
    return inst.sigma2 * ((1.0 - inst.rho ** 2) * P + N1) / (P + N1)


def d2_floor(inst: ProblemInstance) -> float:
    """sigma2 N2 / (P + N2): best D2 even without receiver 1."""
    return inst.sigma2 * inst.N2 / (inst.P + inst.N2)


def _discriminant(inst: ProblemInstance) -> float:
    P, N1, rho = inst.P, inst.N1, inst.rho
    disc = P * P - (P + 2.0 * N1) ** 2 * rho * rho
    if -DISC_RTOL * P * P <= disc < 0.0:
        disc = 0.0
    return disc


def window_endpoints(inst: ProblemInstance) -> tuple[float, float] | None:
    """Roots (D1-, D1+) of the uncoded-optimality quadratic, or None.

    Defined whenever the discriminant is nonnegative, which includes the
    regime boundary where both roots coincide. The lower root comes from
    the product ``D1- D1+ = sigma2^2 (1-rho^2) N1 / (P+N1)`` to avoid
    cancellation.
    """
    disc = _discriminant(inst)
    if disc < 0:
        return None
    P, N1, s2, r2 = inst.P, inst.N1, inst.sigma2, inst.rho ** 2
    root = math.sqrt(disc * (1.0 - r2))
    plus = s2 * ((P + 2.0 * N1) * (1.0 - r2) + root) / (2.0 * (P + N1))
    minus = s2 * s2 * (1.0 - r2) * N1 / ((P + N1) * plus)
    return minus, plus


def classify_regime(inst: ProblemInstance) -> RegimeReport:
    """Regime of the instance and, when present, the hybrid window [D1-, D1+].

    The window exists iff ``P > 2 rho N1 / (1 - rho)``.
    """
    lo, hi = d1_min(inst), d1_max(inst)
    ends = window_endpoints(inst)
    if not inst.P > inst.regime_threshold or ends is None:
        return RegimeReport(Regime.UNCODED_EVERYWHERE, lo, hi)
    return RegimeReport(Regime.HYBRID_WINDOW, lo, hi, *ends)


def _check_range(D1, lo, hi, what):
    D1 = np.asarray(D1, dtype=float)
    bad = (D1 < lo * (1 - DOMAIN_RTOL)) | (D1 > hi * (1 + DOMAIN_RTOL)) | ~np.isfinite(D1)
    if np.any(bad):
        raise DomainError(f"{what}: D1 must lie in [{lo!r}, {hi!r}], "
                          f"got {D1[bad].ravel()[:3]}")
    return np.clip(D1, lo, hi)


def d2_uncoded_frontier(inst: ProblemInstance, D1):
    """Best D2 of the uncoded scheme at distortion D1 on [D1min, D1max]."""
    D1 = _check_range(D1, d1_min(inst), d1_max(inst), "uncoded frontier")
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    t = (P + N1) * D1 / (P * s2) - N1 / P
    # both radicands vanish only at the interval ends; clip rounding noise
    left = np.sqrt(np.maximum(1.0 - t, 0.0))
    right = np.sqrt(np.maximum(rho * rho / (1.0 - rho * rho) * t, 0.0))
    val = s2 * ((left - right) ** 2 * (1.0 - rho * rho) * P / (P + N2) + N2 / (P + N2))
    return _out(val)


def d2_hybrid_frontier(inst: ProblemInstance, D1):
    """Genie-aided lower bound on D2, achieved by the hybrid scheme in the window."""
    D1 = np.asarray(D1, dtype=float)
    if np.any(D1 <= 0):
        raise DomainError("hybrid frontier requires D1 > 0")
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    return _out(s2 / (P + N2) * (N1 * (1.0 - rho * rho) * s2 / D1 + N2 - N1))


def d2_star(inst: ProblemInstance, D1, report: RegimeReport | None = None):
    """Minimum achievable D2 for each D1 >= D1min.

    The hybrid branch is used on the closed window [D1-, D1+]; the
    uncoded frontier elsewhere up to D1max, and the D2 floor beyond.
    """
    rep = classify_regime(inst) if report is None else report
    D1 = np.asarray(D1, dtype=float)
    if np.any(D1 < rep.d1_min * (1 - DOMAIN_RTOL)) or not np.all(np.isfinite(D1)):
        raise DomainError(f"D1 below D1min={rep.d1_min!r} is not achievable")
    D1 = np.maximum(D1, rep.d1_min)
    out = np.full(D1.shape, d2_floor(inst))
    mid = D1 <= rep.d1_max
    if np.any(mid):
        out[mid] = d2_uncoded_frontier(inst, D1[mid])
    if rep.has_window:
        win = (D1 >= rep.d1_minus) & (D1 <= rep.d1_plus)
        if np.any(win):
            out[win] = d2_hybrid_frontier(inst, D1[win])
    return _out(out)


def gamma_threshold(D1, sigma2: float, rho: float):
    """SNR threshold below which some uncoded scheme matches any pair at D1.

    Infinite for ``D1 >= sigma2 (1 - rho^2)``.
    """
    D1 = np.asarray(D1, dtype=float)
    if np.any(D1 <= 0):
        raise DomainError("gamma_threshold requires D1 > 0")
    c = sigma2 * (1.0 - rho * rho)
    inside = D1 < c
    safe = np.where(inside, D1, 0.5 * c)
    num = sigma2 * c - 2.0 * safe * c + safe * safe
    val = np.where(inside, num / (safe * (c - safe)), np.inf)
    return _out(val)


def genie_region(inst: ProblemInstance, alpha):
    """Corner point (D_{1|2}, D2) of the genie-aided bound for power split alpha.

    ``alpha`` is the fraction of power on the layer only receiver 1 needs.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)) or not np.all(np.isfinite(a)):
        raise DomainError("power split alpha must lie in [0, 1]")
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    d12 = s2 * (1.0 - rho * rho) / (1.0 + a * P / N1)
    d2 = s2 / (1.0 + (1.0 - a) * P / (a * P + N2))
    return _out(d12), _out(d2)
