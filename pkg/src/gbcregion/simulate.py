"""Monte Carlo validation of scheme distortions and of the worst-case property.

Samples are drawn in fixed-size chunks, each with its own child seed of a
``SeedSequence``, so a batch depends only on ``(seed, n)`` and never on
the thread count. All source and noise families share the same uniform
draws (mapped through different inverse CDFs), which couples the
Gaussian control run to the non-Gaussian runs for the same seed.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, ndtri

from .model import ProblemInstance, hybrid_joint_law, mmse_estimate
from .schemes import HybridParams, hybrid_distortions

__all__ = [
    "DistributionFamily",
    "SampleBatch",
    "StreamingMoments",
    "EmpiricalDistortions",
    "WorstCaseReport",
    "sample_batch",
    "empirical_distortions",
    "knn_entropy",
    "knn_conditional_entropy",
    "worst_case_check",
]

CHUNK = 1 << 16
ENTROPY_SLACK = 0.02


class DistributionFamily(str, Enum):
    """Zero-mean, unit-variance base law mixed to the target covariance."""

    GAUSSIAN = "gaussian"
    UNIFORM_LINEAR = "uniform"
    LAPLACE_LINEAR = "laplace"

    @property
    def notes(self) -> str:
        return {
            "gaussian": "standard normal base variates",
            "uniform": "uniform on [-sqrt3, sqrt3], Cholesky-mixed",
            "laplace": "Laplace with scale 1/sqrt2, Cholesky-mixed",
        }[self.value]

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        if self is DistributionFamily.GAUSSIAN:
            return ndtri(u)
        if self is DistributionFamily.UNIFORM_LINEAR:
            return math.sqrt(3.0) * (2.0 * u - 1.0)
        c = u - 0.5
        return -np.sign(c) * np.log1p(-2.0 * np.abs(c)) / math.sqrt(2.0)


@dataclass(frozen=True)
class SampleBatch:
    n: int
    S1: np.ndarray = field(repr=False)
    S2: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    Z1: np.ndarray = field(repr=False)
    Z2: np.ndarray = field(repr=False)
    family: DistributionFamily = DistributionFamily.GAUSSIAN
    seed: int = 0

    def chunks(self):
        for lo in range(0, self.n, CHUNK):
            yield slice(lo, min(lo + CHUNK, self.n))


def _n_threads(threads):
    return max(1, int(threads or os.cpu_count() or 1))


def sample_batch(inst: ProblemInstance, hp: HybridParams, family, n: int,
                 seed: int, threads: int | None = None) -> SampleBatch:
    """Draw ``n`` i.i.d. samples of (S1, S2, U, Z1, Z2).

    Sources and channel noises follow ``family`` with exactly the model
    covariances; U is always Gaussian with variance ``hp.Q`` (all zeros in
    the pure-analog case).
    """
    family = DistributionFamily(family)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    chol = np.linalg.cholesky(inst.source_cov)
    q_std = 0.0 if hp.is_pure_analog else math.sqrt(hp.Q)
    n1_std, n2_std = math.sqrt(inst.N1), math.sqrt(inst.N2)
    cols = {k: np.empty(n) for k in ("S1", "S2", "U", "Z1", "Z2")}
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    children = np.random.SeedSequence(seed).spawn(len(bounds))

    def fill(job):
        (lo, hi), ss = job
        rng = np.random.Generator(np.random.Philox(ss))
        m = hi - lo
        # uniforms strictly inside (0, 1) so every inverse CDF is finite
        u = rng.random((4, m))
        u[u == 0.0] = 2.0 ** -54
        g = rng.standard_normal(m)
        base = family.from_uniform(u)
        src = chol @ base[:2]
        cols["S1"][lo:hi] = src[0]
        cols["S2"][lo:hi] = src[1]
        cols["U"][lo:hi] = q_std * g
        cols["Z1"][lo:hi] = n1_std * base[2]
        cols["Z2"][lo:hi] = n2_std * base[3]

    jobs = list(zip(bounds, children))
    workers = min(_n_threads(threads), len(jobs))
    if workers == 1:
        for job in jobs:
            fill(job)
    else:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(fill, jobs))
    return SampleBatch(n, family=family, seed=seed, **cols)


class StreamingMoments:
    """Running mean and covariance of a fixed set of columns.

    Chunks are merged with the pairwise update of Chan et al., so the
    result does not depend on chunk order beyond float reassociation.
    """

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros((dim, dim))

    @classmethod
    def from_data(cls, data: np.ndarray) -> "StreamingMoments":
        acc = cls(data.shape[0])
        acc.n = data.shape[1]
        acc.mean = data.mean(axis=1)
        d = data - acc.mean[:, None]
        acc.m2 = d @ d.T
        return acc

    def merge(self, other: "StreamingMoments") -> "StreamingMoments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.n * other.n / n)
        self.n = n
        return self

    def cov(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.m2, np.nan)
        return self.m2 / (self.n - 1)

    def sem(self) -> np.ndarray:
        """Standard error of each column mean."""
        return np.sqrt(np.diag(self.cov()) / self.n)


@dataclass(frozen=True)
class EmpiricalDistortions:
    d1: float
    d2: float
    coeffs: tuple
    se1: float
    se2: float
    n: int
    power: float
    power_se: float
    orthogonality: float

    def as_dict(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "se1": self.se1, "se2": self.se2,
                "n": self.n, "power": self.power, "power_se": self.power_se,
                "max_abs_error_obs_correlation": self.orthogonality,
                "coeffs": [{"a": c.a, "b": c.b} for c in self.coeffs]}


# column layout of the per-chunk statistics
_E1SQ, _E2SQ, _XSQ, _E1, _E2, _XD, _A1, _A2 = range(8)


def empirical_distortions(inst: ProblemInstance, hp: HybridParams,
                          batch: SampleBatch, threads: int | None = None) -> EmpiricalDistortions:
    """Per-receiver MSE of the fixed linear reconstructions on ``batch``.

    Reconstruction is ``a_k Xd + b_k (alpha_t S1 + beta_t S2 + Zk)`` with
    the coefficients of the Gaussian analysis; the digital codeword is
    assumed decoded.
    """
    coeffs = hybrid_distortions(inst, hp).coeffs
    (c1, c2) = coeffs

    def stats(sl):
        s1, s2, u = batch.S1[sl], batch.S2[sl], batch.U[sl]
        analog = hp.alpha_t * s1 + hp.beta_t * s2
        xd = hp.gamma_t * (s2 + u)
        a1 = analog + batch.Z1[sl]
        a2 = analog + batch.Z2[sl]
        e1 = s1 - (c1.a * xd + c1.b * a1)
        e2 = s2 - (c2.a * xd + c2.b * a2)
        x = analog + xd
        return StreamingMoments.from_data(np.vstack([e1 * e1, e2 * e2, x * x, e1, e2, xd, a1, a2]))

    slices = list(batch.chunks())
    workers = min(_n_threads(threads), len(slices))
    if workers == 1:
        parts = [stats(sl) for sl in slices]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(stats, slices))
    acc = StreamingMoments(8)
    for p in parts:
        acc.merge(p)

    sem = acc.sem() if acc.n > 1 else np.full(8, np.nan)
    orth = math.nan
    if acc.n > 2:
        cov = acc.cov()
        corr = []
        for e, obs in ((_E1, (_XD, _A1)), (_E2, (_XD, _A2))):
            for o in obs:
                denom = math.sqrt(cov[e, e] * cov[o, o])
                if denom > 0:
                    corr.append(abs(cov[e, o]) / denom)
        orth = max(corr) if corr else math.nan
    return EmpiricalDistortions(
        d1=float(acc.mean[_E1SQ]), d2=float(acc.mean[_E2SQ]), coeffs=coeffs,
        se1=float(sem[_E1SQ]), se2=float(sem[_E2SQ]), n=acc.n,
        power=float(acc.mean[_XSQ]), power_se=float(sem[_XSQ]), orthogonality=orth)


def knn_entropy(x: np.ndarray, k: int = 5, workers: int = 1) -> float:
    """Kozachenko-Leonenko differential entropy estimate in nats.

    Uses the max-norm, so the unit ball volume is ``2**d``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample size {n}")
    tree = cKDTree(x)
    dist, _ = tree.query(x, k=k + 1, p=np.inf, workers=workers)
    eps = dist[:, k]
    eps = eps[eps > 0]
    return float(digamma(n) - digamma(k) + d * math.log(2.0) + d * np.mean(np.log(eps)))


def knn_conditional_entropy(x: np.ndarray, y: np.ndarray, k: int = 5,
                            workers: int = 1) -> float:
    """h(X | Y) for scalar X, Y as h(R, Y) - h(Y) with R the linear residual.

    Regressing out Y and standardizing both coordinates leaves the
    conditional entropy unchanged up to the known log-scale term, and
    keeps the kNN estimator in its well-conditioned range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y = y - y.mean()
    x = x - x.mean()
    coef = float(x @ y / (y @ y))
    r = x - coef * y
    sr, sy = float(r.std()), float(y.std())
    joint = np.column_stack([r / sr, y / sy])
    return (knn_entropy(joint, k, workers) - knn_entropy(y / sy, k, workers)
            + math.log(sr))


def _gauss_entropy(var: float) -> float:
    return 0.5 * math.log(2.0 * math.pi * math.e * var)


@dataclass
class WorstCaseReport:
    family: DistributionFamily
    n: int
    k_nn: int
    seed: int
    analytic: dict
    empirical: dict
    z_scores: dict
    distortion_ok: bool
    entropy: dict | None
    rate_feasible: dict | None
    slack: float

    @property
    def passed(self) -> bool:
        ok = self.distortion_ok
        if self.entropy is not None:
            ok = ok and self.entropy["gap_rx2"] <= self.slack
            ok = ok and all(self.rate_feasible.values())
        return ok

    def as_dict(self) -> dict:
        return {"family": self.family.value, "n": self.n, "k_nn": self.k_nn,
                "seed": self.seed, "analytic": self.analytic,
                "empirical": self.empirical, "z_scores": self.z_scores,
                "distortion_ok": self.distortion_ok, "entropy": self.entropy,
                "rate_feasible": self.rate_feasible, "slack": self.slack,
                "passed": self.passed}


def worst_case_check(inst: ProblemInstance, hp: HybridParams, family, n: int,
                     k_nn: int = 5, seed: int = 0, slack: float = ENTROPY_SLACK,
                     z_max: float = 3.0, threads: int | None = None) -> WorstCaseReport:
    """Check the computable consequences of the worst-case property.

    For a matched-covariance ``family`` this reports

    * the empirical distortions under the Gaussian-optimal linear
      reconstructions, compared with the Gaussian closed forms;
    * the kNN estimate of h(Xd*|Yk*) minus the same estimate on the
      coupled Gaussian control batch, which should not be positive;
    * the implied decodability margin I(S2*;Xd*) - I(Xd*;Yk*) for each
      receiver, i.e. the gap plus the Gaussian margin, against ``slack``.
    """
    family = DistributionFamily(family)
    if n < 10 * k_nn:
        raise ValueError(f"n={n} too small for the entropy estimator (need >= {10 * k_nn})")
    workers = _n_threads(threads)
    analytic = hybrid_distortions(inst, hp)
    batch = sample_batch(inst, hp, family, n, seed, threads)
    emp = empirical_distortions(inst, hp, batch, threads)
    z1 = (emp.d1 - analytic.d1) / emp.se1
    z2 = (emp.d2 - analytic.d2) / emp.se2
    entropy = rate_ok = None
    if not hp.is_pure_analog:
        control = (batch if family is DistributionFamily.GAUSSIAN
                   else sample_batch(inst, hp, DistributionFamily.GAUSSIAN, n, seed, threads))
        joint = hybrid_joint_law(inst, hp)
        h_u = _gauss_entropy(hp.gamma_t ** 2 * hp.Q)
        entropy, rate_ok = {"h_gamma_U": h_u}, {}
        for k in (1, 2):
            est = {}
            for tag, b in (("family", batch), ("control", control)):
                xd = hp.gamma_t * (b.S2 + b.U)
                y = hp.alpha_t * b.S1 + hp.beta_t * b.S2 + xd + (b.Z1 if k == 1 else b.Z2)
                est[tag] = knn_conditional_entropy(xd, y, k_nn, workers)
            _, cvar = mmse_estimate(joint, "Xd", [f"Y{k}"])
            h_gauss = _gauss_entropy(cvar)
            gap = est["family"] - est["control"]
            margin = gap + (h_gauss - h_u)
            entropy.update({f"h_family_rx{k}": est["family"],
                            f"h_control_rx{k}": est["control"],
                            f"h_gaussian_analytic_rx{k}": h_gauss,
                            f"gap_rx{k}": gap, f"rate_margin_rx{k}": margin})
            rate_ok[f"rx{k}"] = margin <= slack
    return WorstCaseReport(
        family=family, n=n, k_nn=k_nn, seed=seed,
        analytic={"d1": analytic.d1, "d2": analytic.d2},
        empirical=emp.as_dict(), z_scores={"d1": z1, "d2": z2},
        distortion_ok=bool(abs(z1) <= z_max and abs(z2) <= z_max),
        entropy=entropy, rate_feasible=rate_ok, slack=slack)
