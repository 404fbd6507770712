"""Problem instances and Gaussian second-moment kernels.

Everything downstream (scheme distortions, rate checks, simulation
estimators) reduces to linear algebra on small covariance matrices. This
module holds the validated problem description, a labelled covariance
container, the joint law of the hybrid scheme, and the two kernels built
on top of it: linear MMSE estimation and Gaussian mutual information.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "InvalidInstance",
    "SingularObservation",
    "ProblemInstance",
    "make_instance",
    "GaussianVector",
    "EstimatorCoeffs",
    "JOINT_LABELS",
    "hybrid_joint_law",
    "mmse_estimate",
    "gaussian_mi",
]

# relative eigenvalue cutoff for pseudo-inverses and rank decisions
EIG_CUTOFF = 1e-12
# tolerance on negative eigenvalues when validating PSD input
PSD_TOL = 1e-10

JOINT_LABELS = ("S1", "S2", "Xd", "X", "Y1", "Y2")


class InvalidInstance(ValueError):
    """Raised when problem parameters violate the model's constraints."""


class SingularObservation(np.linalg.LinAlgError):
    """Observation covariance is singular and pseudo-inverse is disabled."""


@dataclass(frozen=True)
class ProblemInstance:
    """One broadcast problem: power, source variance/correlation, noises.

    Build through :func:`make_instance`, which validates the constraints.
    """

    P: float
    sigma2: float
    rho: float
    N1: float
    N2: float

    @property
    def source_cov(self) -> np.ndarray:
        s = self.sigma2
        return np.array([[s, self.rho * s], [self.rho * s, s]])

    @property
    def regime_threshold(self) -> float:
        """Power level 2*rho*N1/(1-rho) separating the two regimes."""
        return 2.0 * self.rho * self.N1 / (1.0 - self.rho)

    def as_dict(self) -> dict:
        return {"P": self.P, "sigma2": self.sigma2, "rho": self.rho,
                "N1": self.N1, "N2": self.N2}


def make_instance(P, sigma2, rho, N1, N2) -> ProblemInstance:
    """Validate raw scalars and return a :class:`ProblemInstance`.

    Raises
    ------
    InvalidInstance
        If any value is non-finite, a variance is not positive,
        ``rho`` is outside ``[0, 1)`` or ``N1 > N2``. The message names
        the violated constraint.
    """
    vals = {"P": P, "sigma2": sigma2, "rho": rho, "N1": N1, "N2": N2}
    for name, v in vals.items():
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise InvalidInstance(f"{name} must be a real number, got {v!r}") from None
        if not math.isfinite(v):
            raise InvalidInstance(f"{name} must be finite, got {v}")
        vals[name] = v
    for name in ("P", "sigma2", "N1", "N2"):
        if vals[name] <= 0:
            raise InvalidInstance(f"{name} must be > 0, got {vals[name]}")
    if not 0.0 <= vals["rho"] < 1.0:
        raise InvalidInstance(f"rho must lie in [0, 1), got {vals['rho']}")
    if vals["N1"] > vals["N2"]:
        raise InvalidInstance(
            f"N1 <= N2 required (receiver 1 is the strong user), "
            f"got N1={vals['N1']} > N2={vals['N2']}")
    return ProblemInstance(**vals)


@dataclass(frozen=True)
class GaussianVector:
    """Zero-mean jointly Gaussian vector described by its covariance."""

    labels: tuple
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        cov = np.array(self.cov, dtype=float)
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be unique: {labels}")
        if cov.shape != (len(labels), len(labels)):
            raise ValueError(
                f"covariance shape {cov.shape} does not match {len(labels)} labels")
        scale = max(float(np.max(np.abs(cov))), 1.0) if cov.size else 1.0
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * scale):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if cov.size:
            w = np.linalg.eigvalsh(cov)
            if w[0] < -PSD_TOL * max(np.trace(cov), 1e-300):
                raise ValueError(
                    f"covariance is not positive semidefinite (min eigenvalue {w[0]:.3g})")
        cov.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "cov", cov)

    def index(self, names: Sequence[str]) -> list[int]:
        try:
            return [self.labels.index(n) for n in names]
        except ValueError:
            missing = [n for n in names if n not in self.labels]
            raise KeyError(f"unknown labels {missing}; have {self.labels}") from None

    def sub(self, rows: Sequence[str], cols: Sequence[str] | None = None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.cov[np.ix_(self.index(rows), self.index(cols))]

    def var(self, name: str) -> float:
        i = self.labels.index(name)
        return float(self.cov[i, i])


@dataclass(frozen=True)
class EstimatorCoeffs:
    """Linear reconstruction ``a * X_d + b * (analog part + noise)``."""

    a: float
    b: float


def hybrid_joint_law(inst: ProblemInstance, hp) -> GaussianVector:
    """Covariance of (S1, S2, Xd, X, Y1, Y2) under the hybrid mapping.

    ``Xd = gamma_t (S2 + U)``, ``X = alpha_t S1 + beta_t S2 + Xd`` and
    ``Yk = X + Zk`` with ``U`` independent of everything, ``Var(U) = Q``.
    ``hp`` only needs ``alpha_t``, ``beta_t``, ``gamma_t`` and ``Q``
    attributes. With ``gamma_t == 0`` the digital layer is absent and
    ``Q`` is ignored (it may be infinite).
    """
    a, b, g = float(hp.alpha_t), float(hp.beta_t), float(hp.gamma_t)
    Q = float(hp.Q) if g != 0.0 else 0.0
    # independent basis (S1, S2, U, Z1, Z2)
    base = np.zeros((5, 5))
    base[:2, :2] = inst.source_cov
    base[2, 2] = Q
    base[3, 3] = inst.N1
    base[4, 4] = inst.N2
    mix = np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, g, g, 0.0, 0.0],
        [a, b + g, g, 0.0, 0.0],
        [a, b + g, g, 1.0, 0.0],
        [a, b + g, g, 0.0, 1.0],
    ])
    return GaussianVector(JOINT_LABELS, mix @ base @ mix.T)


def _spectral_pinv(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    cut = EIG_CUTOFF * max(w[-1], 0.0)
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    return (v * inv) @ v.T


def mmse_estimate(joint: GaussianVector, target: str, observed: Sequence[str],
                  pinv: bool = True) -> tuple[np.ndarray, float]:
    """Linear MMSE estimate of ``target`` from the ``observed`` components.

    Parameters
    ----------
    joint : GaussianVector
    target : str
        Label of the estimated component.
    observed : sequence of str
        Labels of the observations.
    pinv : bool
        Fall back to a spectral pseudo-inverse when the observation
        covariance is singular (eigenvalues below ``1e-12`` times the
        largest are dropped). Zero-variance observations then get a zero
        coefficient.

    Returns
    -------
    coeffs : ndarray
        Weights ``c`` such that ``c @ observed`` is the estimate.
    mmse : float
        Resulting mean-squared error, clipped at zero.
    """
    observed = list(observed)
    s_oo = joint.sub(observed)
    s_ot = joint.sub(observed, [target])[:, 0]
    w = np.linalg.eigvalsh(s_oo)
    if w[0] > EIG_CUTOFF * max(w[-1], 0.0):
        coeffs = np.linalg.solve(s_oo, s_ot)
    elif pinv:
        coeffs = _spectral_pinv(s_oo) @ s_ot
    else:
        raise SingularObservation(
            f"observation covariance of {observed} is singular")
    mmse = joint.var(target) - float(coeffs @ s_ot)
    return coeffs, max(mmse, 0.0)


def _logdet(m: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        return -math.inf
    return float(val)


def gaussian_mi(joint: GaussianVector, group_a: Sequence[str],
                group_b: Sequence[str]) -> float:
    """Mutual information I(A; B) in nats for jointly Gaussian groups.

    Components with (numerically) zero variance carry no information and
    are dropped first. Returns ``inf`` when the remaining groups share a
    deterministic linear relation.
    """
    group_a, group_b = list(group_a), list(group_b)
    if not group_a or not group_b:
        raise ValueError("both groups must be nonempty")
    if set(group_a) & set(group_b):
        raise ValueError("groups must be disjoint")
    scale = float(np.max(np.diag(joint.cov)))
    keep = lambda g: [n for n in g if joint.var(n) > EIG_CUTOFF * scale]  # noqa: E731
    group_a, group_b = keep(group_a), keep(group_b)
    if not group_a or not group_b:
        return 0.0
    la = _logdet(joint.sub(group_a))
    lb = _logdet(joint.sub(group_b))
    lab = _logdet(joint.sub(group_a + group_b))
    if lab == -math.inf:
        return math.inf
    return max(0.5 * (la + lb - lab), 0.0)
