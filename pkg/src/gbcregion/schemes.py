"""Transmission schemes: uncoded, hybrid digital-analog, and separation.

Each scheme maps its parameters to the pair of mean-squared errors seen by
the two receivers. The hybrid scheme superimposes an analog layer
``alpha_t S1 + beta_t S2`` on a digital layer ``Xd = gamma_t (S2 + U)``
that carries a quantized description of S2; its idealized coding layer
is reduced to the requirement that the rate window be nonempty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .analytic import DomainError, classify_regime, d1_max, d1_min
from .curves import DistortionPoint, RegionCurve, SourceTag
from .model import EstimatorCoeffs, ProblemInstance, gaussian_mi, hybrid_joint_law, mmse_estimate

__all__ = [
    "InfeasibleParams",
    "PureAnalog",
    "UncodedParams",
    "HybridParams",
    "SchemeDistortions",
    "analog_power",
    "uncoded_distortions",
    "uncoded_alpha_for_d1",
    "hybrid_from_uncoded",
    "q_star",
    "solve_gamma",
    "make_hybrid_params",
    "rate_terms",
    "hybrid_distortions",
    "hybrid_closed_form",
    "alpha_sq_window",
    "optimal_hybrid_params",
    "separation_baseline",
    "max_beta",
    "hybrid_sweep",
]

# analog power within this relative distance of P counts as saturating
POWER_RTOL = 1e-12
# allowed excess of I(S2;Xd) over I(Xd;Y2), in nats
RATE_ATOL = 1e-10


class InfeasibleParams(ValueError):
    """Scheme parameters violate the power or rate constraint."""


class PureAnalog(InfeasibleParams):
    """Analog layer uses all the power; no digital layer can be added."""


@dataclass(frozen=True)
class UncodedParams:
    """Direction (alpha, 1 - alpha) of the scaled uncoded mapping."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"uncoded alpha must lie in [0, 1], got {self.alpha}")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha


@dataclass(frozen=True)
class HybridParams:
    """Hybrid scheme knobs.

    ``gamma_t == 0`` with ``Q == inf`` encodes the pure-analog limit.
    ``rate_window`` is ``(I(S2; Xd), I(Xd; Y2))`` in nats; any rate in
    between makes the digital layer decodable at both receivers.
    """

    alpha_t: float
    beta_t: float
    gamma_t: float
    Q: float
    rate_window: tuple

    @property
    def is_pure_analog(self) -> bool:
        return self.gamma_t == 0.0

    def as_dict(self) -> dict:
        return {"alpha_t": self.alpha_t, "beta_t": self.beta_t,
                "gamma_t": self.gamma_t, "Q": self.Q,
                "rate_window": list(self.rate_window)}


@dataclass(frozen=True)
class SchemeDistortions:
    d1: float
    d2: float
    coeffs: tuple | None = None


def analog_power(inst: ProblemInstance, alpha_t: float, beta_t: float) -> float:
    return inst.sigma2 * (alpha_t ** 2 + beta_t ** 2 + 2.0 * inst.rho * alpha_t * beta_t)


def uncoded_distortions(inst: ProblemInstance, up: UncodedParams) -> SchemeDistortions:
    a, b = up.alpha, up.beta
    if a == 0.0 and b == 0.0:
        raise DomainError("uncoded direction (0, 0) carries nothing")
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    den = a * a + 2.0 * a * b * rho + b * b
    d1 = s2 * (P * b * b * (1 - rho * rho) / ((P + N1) * den) + N1 / (P + N1))
    d2 = s2 * (P * a * a * (1 - rho * rho) / ((P + N2) * den) + N2 / (P + N2))
    # E[Sk | Yk] = Cov(Sk, Yk) / Var(Yk) Yk
    scale = math.sqrt(P / (s2 * den))
    w1 = scale * s2 * (a + rho * b) / (P + N1)
    w2 = scale * s2 * (rho * a + b) / (P + N2)
    return SchemeDistortions(d1, d2, (EstimatorCoeffs(0.0, w1), EstimatorCoeffs(0.0, w2)))


def uncoded_alpha_for_d1(inst: ProblemInstance, D1: float, xtol: float = 1e-12) -> float:
    """Uncoded direction whose receiver-1 distortion equals ``D1``.

    D1 decreases monotonically in alpha from D1max (alpha=0) to D1min
    (alpha=1), so plain bisection suffices.
    """
    lo, hi = d1_min(inst), d1_max(inst)
    if not lo * (1 - 1e-12) <= D1 <= hi * (1 + 1e-12):
        raise DomainError(f"target D1={D1} outside [{lo}, {hi}]")
    f = lambda a: uncoded_distortions(inst, UncodedParams(a)).d1 - D1  # noqa: E731
    if f(1.0) >= 0:
        return 1.0
    if f(0.0) <= 0:
        return 0.0
    return bisect(f, 0.0, 1.0, xtol=xtol)


def hybrid_from_uncoded(inst: ProblemInstance, up: UncodedParams) -> HybridParams:
    """Uncoded scheme written as a hybrid scheme with no digital layer."""
    c = math.sqrt(inst.P / analog_power(inst, up.alpha, up.beta))
    return HybridParams(c * up.alpha, c * up.beta, 0.0, math.inf, (0.0, 0.0))


def q_star(inst: ProblemInstance, alpha_t: float, beta_t: float) -> float:
    """Smallest quantization-noise variance keeping the digital layer decodable.

    Raises
    ------
    PureAnalog
        If the analog layer already uses the full power.
    InfeasibleParams
        If the analog layer alone exceeds the power budget.
    """
    P, s2 = inst.P, inst.sigma2
    slack = P - analog_power(inst, alpha_t, beta_t)
    if abs(slack) <= POWER_RTOL * P:
        raise PureAnalog("analog layer saturates the power constraint")
    if slack < 0:
        raise InfeasibleParams(f"analog power exceeds P by {-slack:.3g}")
    return s2 * ((1 - inst.rho ** 2) * alpha_t ** 2 * s2 + inst.N2) / slack


def solve_gamma(inst: ProblemInstance, alpha_t: float, beta_t: float, Q: float) -> float:
    """Digital scale making the total transmit power exactly P."""
    s2 = inst.sigma2
    c = analog_power(inst, alpha_t, beta_t) - inst.P
    if c > POWER_RTOL * inst.P:
        raise InfeasibleParams(f"analog power exceeds P by {c:.3g}")
    if c >= 0 or math.isinf(Q):
        return 0.0
    a = s2 + Q
    b = 2.0 * s2 * (alpha_t * inst.rho + beta_t)
    # positive root written without subtracting nearly equal terms
    return -2.0 * c / (b + math.sqrt(b * b - 4.0 * a * c))


def rate_terms(inst: ProblemInstance, hp) -> dict:
    """I(S2;Xd), I(Xd;Y1) and I(Xd;Y2) on the Gaussian joint law, in nats."""
    joint = hybrid_joint_law(inst, hp)
    return {
        "I_S2_Xd": gaussian_mi(joint, ["S2"], ["Xd"]),
        "I_Xd_Y1": gaussian_mi(joint, ["Xd"], ["Y1"]),
        "I_Xd_Y2": gaussian_mi(joint, ["Xd"], ["Y2"]),
    }


def make_hybrid_params(inst: ProblemInstance, alpha_t: float, beta_t: float,
                       Q: float | None = None) -> HybridParams:
    """Complete (alpha_t, beta_t) into hybrid parameters at full power.

    ``Q`` defaults to the smallest decodable value. When the analog layer
    saturates the budget, the pure-analog parameters are returned.
    """
    if alpha_t < 0 or beta_t < 0:
        raise DomainError("analog weights must be nonnegative")
    if Q is None:
        try:
            Q = q_star(inst, alpha_t, beta_t)
        except PureAnalog:
            # within rounding of the budget: put the analog layer exactly on it
            c = math.sqrt(inst.P / analog_power(inst, alpha_t, beta_t))
            return HybridParams(c * alpha_t, c * beta_t, 0.0, math.inf, (0.0, 0.0))
    elif not Q > 0:
        raise DomainError(f"Q must be > 0, got {Q}")
    gamma_t = solve_gamma(inst, alpha_t, beta_t, Q)
    if gamma_t == 0.0:
        return HybridParams(alpha_t, beta_t, 0.0, math.inf, (0.0, 0.0))
    partial = HybridParams(alpha_t, beta_t, gamma_t, Q, (math.nan, math.nan))
    r = rate_terms(inst, partial)
    return HybridParams(alpha_t, beta_t, gamma_t, Q, (r["I_S2_Xd"], r["I_Xd_Y2"]))


def _check_feasible(inst: ProblemInstance, hp: HybridParams) -> None:
    if analog_power(inst, hp.alpha_t, hp.beta_t) > inst.P * (1 + POWER_RTOL):
        raise InfeasibleParams("analog power exceeds P")
    total = hybrid_joint_law(inst, hp).var("X")
    if total > inst.P * (1 + 1e-9):
        raise InfeasibleParams(f"total power {total!r} exceeds P={inst.P!r}")
    lo, hi = hp.rate_window
    if not hp.is_pure_analog and lo > hi + RATE_ATOL:
        raise InfeasibleParams(
            f"digital layer not decodable: I(S2;Xd)={lo:.6g} > I(Xd;Y2)={hi:.6g}")


def hybrid_closed_form(inst: ProblemInstance, alpha_t, beta_t):
    """Receiver distortions of the hybrid scheme with Q = Q*, in closed form.

    Vectorizes over ``alpha_t``/``beta_t``. At analog saturation the
    expression is the continuous pure-analog limit.
    """
    at = np.asarray(alpha_t, dtype=float)
    bt = np.asarray(beta_t, dtype=float)
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    r2 = 1.0 - rho * rho
    cross = bt * bt + 2.0 * at * bt * rho
    num = r2 * (N1 * P - cross * N1 * s2 + bt * bt * N2 * s2
                + r2 * at * at * bt * bt * s2 * s2) + N1 * N2
    den = (r2 * at * at * (P + N1) * s2 + P * N1 + N1 * N2
           + (at * at + cross) * (N2 - N1) * s2)
    d1 = s2 * num / den
    d2 = s2 * (at * at * r2 * s2 + N2) / (P + N2)
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def hybrid_distortions(inst: ProblemInstance, hp: HybridParams,
                       route: str = "mmse") -> SchemeDistortions:
    """Distortions of the hybrid scheme.

    Parameters
    ----------
    route : {"mmse", "closed"}
        ``"mmse"`` estimates each Sk linearly from ``(Xd, alpha_t S1 +
        beta_t S2 + Zk)`` on the joint law; this is the defining
        computation and works for any feasible ``Q``. ``"closed"``
        evaluates the closed forms, which assume ``Q = Q*``.

    Raises
    ------
    InfeasibleParams
        If the power budget is exceeded or the rate window is empty.
    """
    _check_feasible(inst, hp)
    if route == "closed":
        if not hp.is_pure_analog:
            qs = q_star(inst, hp.alpha_t, hp.beta_t)
            if not math.isclose(hp.Q, qs, rel_tol=1e-9):
                raise ValueError("closed-form distortions require Q = Q*")
        d1, d2 = hybrid_closed_form(inst, hp.alpha_t, hp.beta_t)
        return SchemeDistortions(d1, d2)
    if route != "mmse":
        raise ValueError(f"unknown route {route!r}")
    joint = hybrid_joint_law(inst, hp)
    out, coeffs = [], []
    for k in (1, 2):
        c, mse = mmse_estimate(joint, f"S{k}", ["Xd", f"Y{k}"])
        # Yk = Xd + analog_k, so c0 Xd + c1 Yk = (c0 + c1) Xd + c1 analog_k
        a = 0.0 if hp.is_pure_analog else float(c[0] + c[1])
        coeffs.append(EstimatorCoeffs(a, float(c[1])))
        out.append(mse)
    return SchemeDistortions(out[0], out[1], tuple(coeffs))


def alpha_sq_window(inst: ProblemInstance) -> tuple[float, float] | None:
    """Range of alpha_t^2 for which the matched beta_t respects the power budget."""
    P, N1, s2, rho = inst.P, inst.N1, inst.sigma2, inst.rho
    r2 = 1.0 - rho * rho
    disc = P * P - (P + 2.0 * N1) ** 2 * rho * rho
    if disc < 0:
        if disc < -1e-12 * P * P:
            return None
        disc = 0.0
    root = math.sqrt(disc * r2)
    base = r2 * P - 2.0 * rho * rho * N1
    return (base - root) / (2.0 * r2 * s2), (base + root) / (2.0 * r2 * s2)


def optimal_hybrid_params(inst: ProblemInstance, D1: float) -> HybridParams:
    """Hybrid parameters attaining the genie-aided bound at ``D1``.

    Only defined on the hybrid window [D1-, D1+]; outside it the uncoded
    scheme is optimal (see :func:`uncoded_alpha_for_d1`).
    """
    rep = classify_regime(inst)
    if not rep.has_window:
        raise DomainError("instance has no hybrid window; the uncoded scheme is optimal")
    if not rep.d1_minus * (1 - 1e-12) <= D1 <= rep.d1_plus * (1 + 1e-12):
        raise DomainError(
            f"D1={D1} outside the hybrid window [{rep.d1_minus}, {rep.d1_plus}]; "
            "alpha_t^2 window violated")
    s2, rho, N1 = inst.sigma2, inst.rho, inst.N1
    c = s2 * (1.0 - rho * rho)
    a2 = max(N1 / D1 - N1 / c, 0.0)
    lo, hi = alpha_sq_window(inst)
    span = max(hi, 1e-300)
    if not lo - 1e-9 * span <= a2 <= hi + 1e-9 * span:
        raise DomainError(f"alpha_t^2={a2} outside admissible window [{lo}, {hi}]")
    alpha_t = math.sqrt(a2)
    if alpha_t == 0.0:
        if rho > 0:
            raise DomainError("alpha_t = 0 needs an unbounded beta_t")
        beta_t = 0.0
    else:
        beta_t = N1 * rho / (alpha_t * c)
    return make_hybrid_params(inst, alpha_t, beta_t)


def separation_baseline(inst: ProblemInstance, lam: float) -> SchemeDistortions:
    """Separate source and channel coding with broadcast power split ``lam``.

    A fraction ``lam`` of the power carries the private description of S1
    (decoded only by receiver 1) and the rest the common description of
    S2. S1 is described conditionally on the reconstruction of S2.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"power split must lie in [0, 1], got {lam}")
    P, N1, N2, s2, rho = inst.P, inst.N1, inst.N2, inst.sigma2, inst.rho
    r2 = 0.5 * math.log1p((1.0 - lam) * P / (lam * P + N2))
    r1 = 0.5 * math.log1p(lam * P / N1)
    d2 = s2 * math.exp(-2.0 * r2)
    d1 = s2 * (1.0 - rho * rho * (1.0 - d2 / s2)) * math.exp(-2.0 * r1)
    return SchemeDistortions(d1, d2)


def max_beta(inst: ProblemInstance, alpha_t: float) -> float:
    """Largest beta_t for which the analog layer fits the power budget."""
    q = inst.P / inst.sigma2 - alpha_t * alpha_t
    if q <= 0:
        raise InfeasibleParams(
            f"alpha_t={alpha_t} leaves no power (needs alpha_t^2 sigma2 < P)")
    ra = inst.rho * alpha_t
    return q / (ra + math.sqrt(ra * ra + q))


def hybrid_sweep(inst: ProblemInstance, alpha_t: float, n_beta: int) -> RegionCurve:
    """Hybrid distortions for fixed ``alpha_t`` and beta_t in [0, max_beta].

    D2 does not depend on beta_t, so the curve is a horizontal segment.
    The ``param`` column holds beta_t.
    """
    if n_beta < 2:
        raise ValueError("n_beta must be >= 2")
    if alpha_t < 0:
        raise InfeasibleParams("alpha_t must be nonnegative")
    betas = np.linspace(0.0, max_beta(inst, alpha_t), n_beta)
    d1, d2 = hybrid_closed_form(inst, np.full(n_beta, alpha_t), betas)
    pts = [DistortionPoint(float(x), float(y), SourceTag.HYBRID, float(b))
           for x, y, b in zip(d1, d2, betas)]
    return RegionCurve(pts, {"scheme": "hybrid_sweep", "alpha_t": alpha_t,
                             "n_beta": n_beta})
