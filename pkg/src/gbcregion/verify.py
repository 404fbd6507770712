"""Invariant checks over one or many problem instances.

Each check returns a :class:`Check` with the worst residual seen and the
tolerance it is held to; the CLI turns a list of them into a JSON report
and an exit status.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import analytic as an
from .model import ProblemInstance, hybrid_joint_law, make_instance
from .schemes import (analog_power, hybrid_closed_form, hybrid_distortions, make_hybrid_params,
                      optimal_hybrid_params, rate_terms, separation_baseline)

PROFILES = {
    "fast": {"d1_grid": 1000, "genie_points": 10_000, "matching_points": 10,
             "formula_params": 50, "sep_points": 51},
    "full": {"d1_grid": 10_000, "genie_points": 100_000, "matching_points": 50,
             "formula_params": 200, "sep_points": 101},
}


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    tolerance: float
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.margin = float(self.margin)

    def as_dict(self):
        return asdict(self)


def random_instance(rng: np.random.Generator, regime: an.Regime | None = None) -> ProblemInstance:
    """Draw a valid instance, optionally forcing its regime."""
    if regime is None:
        regime = an.Regime.HYBRID_WINDOW if rng.random() < 0.5 else an.Regime.UNCODED_EVERYWHERE
    while True:
        rho = rng.uniform(0.0, 0.95)
        N1 = math.exp(rng.uniform(math.log(0.05), math.log(2.0)))
        N2 = N1 * rng.uniform(1.0, 5.0)
        s2 = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
        thr = 2.0 * rho * N1 / (1.0 - rho)
        if regime is an.Regime.HYBRID_WINDOW:
            P = thr * rng.uniform(1.05, 20.0) + rng.uniform(0.01, 0.5)
        else:
            if thr < 1e-3:
                continue
            P = thr * rng.uniform(0.05, 0.95)
        inst = make_instance(P, s2, rho, N1, N2)
        if an.classify_regime(inst).regime is regime:
            return inst


def check_continuity(inst, hybrid=an.d2_hybrid_frontier) -> Check:
    rep = an.classify_regime(inst)
    if not rep.has_window:
        return Check("branch_continuity", True, 0.0, 1e-9, "no hybrid window")
    m = max(abs(an.d2_uncoded_frontier(inst, e) - hybrid(inst, e))
            for e in (rep.d1_minus, rep.d1_plus)) / inst.sigma2
    return Check("branch_continuity", m < 1e-9, m, 1e-9)


def check_threshold_equivalence(inst, n_grid: int) -> Check:
    """Uncoded-threshold test agrees with the hybrid-window membership."""
    rep = an.classify_regime(inst)
    grid = np.linspace(0.0, 1.2 * inst.sigma2, n_grid + 1)[1:]
    below = inst.P / inst.N1 <= an.gamma_threshold(grid, inst.sigma2, inst.rho)
    if rep.has_window:
        outside = (grid <= rep.d1_minus) | (grid >= rep.d1_plus)
        near = ((np.abs(grid - rep.d1_minus) <= 1e-9 * rep.d1_minus)
                | (np.abs(grid - rep.d1_plus) <= 1e-9 * rep.d1_plus))
    else:
        outside = np.ones_like(grid, dtype=bool)
        near = np.zeros_like(grid, dtype=bool)
    bad = int(np.count_nonzero((below != outside) & ~near))
    return Check("threshold_equivalence", bad == 0, float(bad), 0.0,
                 f"{bad} of {n_grid} grid points disagree")


def check_genie_elimination(inst, n_points: int, hybrid=an.d2_hybrid_frontier) -> Check:
    """Genie corner points lie on the hybrid outer bound."""
    alpha = np.linspace(0.0, 1.0, n_points)
    d12, d2 = an.genie_region(inst, alpha)
    m = float(np.max(np.abs(d2 - hybrid(inst, d12))))
    return Check("genie_elimination", m < 1e-6, m, 1e-6)


def check_hybrid_matching(inst, n_points: int, hybrid=an.d2_hybrid_frontier) -> list[Check]:
    rep = an.classify_regime(inst)
    if not rep.has_window:
        return [Check("hybrid_matching", True, 0.0, 1e-9, "no hybrid window"),
                Check("power_tightness", True, 0.0, 1e-12, "no hybrid window"),
                Check("rate_tightness", True, 0.0, 1e-10, "no hybrid window")]
    match = power = rate = 0.0
    degraded_ok = True
    for D1 in np.linspace(rep.d1_minus, rep.d1_plus, n_points):
        hp = optimal_hybrid_params(inst, float(D1))
        d = hybrid_distortions(inst, hp)
        match = max(match, abs(d.d1 - D1) / D1,
                    abs(d.d2 - hybrid(inst, D1)) / d.d2)
        power = max(power, abs(hybrid_joint_law(inst, hp).var("X") - inst.P) / inst.P)
        if not hp.is_pure_analog:
            r = rate_terms(inst, hp)
            rate = max(rate, abs(r["I_S2_Xd"] - r["I_Xd_Y2"]))
            degraded_ok &= r["I_S2_Xd"] <= r["I_Xd_Y1"] + 1e-10
    return [Check("hybrid_matching", match < 1e-9, match, 1e-9),
            Check("power_tightness", power < 1e-12, power, 1e-12),
            Check("rate_tightness", rate < 1e-10 and degraded_ok, rate, 1e-10,
                  "" if degraded_ok else "strong receiver cannot decode")]


def random_feasible_params(inst, rng, count: int):
    """Random (alpha_t, beta_t) with analog power strictly below P."""
    out = []
    while len(out) < count:
        a, b = rng.uniform(0, 1, 2) * math.sqrt(inst.P / inst.sigma2)
        frac = analog_power(inst, a, b) / inst.P
        if 1e-3 < frac < 0.99:
            out.append((a, b))
    return out


def check_formula_vs_mmse(inst, rng, count: int) -> Check:
    worst = 0.0
    for a, b in random_feasible_params(inst, rng, count):
        hp = make_hybrid_params(inst, a, b)
        d = hybrid_distortions(inst, hp)
        c1, c2 = hybrid_closed_form(inst, a, b)
        worst = max(worst, abs(d.d1 - c1) / c1, abs(d.d2 - c2) / c2)
    return Check("formula_vs_mmse", worst < 1e-9, worst, 1e-9)


def check_separation(inst, n_points: int, star=an.d2_star) -> Check:
    worst = -math.inf
    for lam in np.linspace(0.0, 1.0, n_points):
        s = separation_baseline(inst, float(lam))
        worst = max(worst, star(inst, s.d1) - s.d2)
    return Check("separation_dominated", worst <= 1e-9, worst, 1e-9)


def check_monotone(inst, n_grid: int) -> Check:
    rep = an.classify_regime(inst)
    grid = np.linspace(rep.d1_min, 1.2 * rep.d1_max, n_grid)
    d = an.d2_star(inst, grid, rep)
    rise = float(np.max(np.diff(d)))
    return Check("frontier_monotone", rise <= 1e-12, max(rise, 0.0), 1e-12)


def verify_instance(inst: ProblemInstance, profile: str = "fast", seed: int = 0,
                    corrupt: bool = False) -> list[Check]:
    """Run every check on one instance.

    ``corrupt`` perturbs the hybrid frontier by one part in a million; it
    exists so the harness itself can be tested.
    """
    cfg = PROFILES[profile]
    hybrid = an.d2_hybrid_frontier
    if corrupt:
        hybrid = lambda i, d: an.d2_hybrid_frontier(i, d) * (1 + 1e-6)  # noqa: E731
    rng = np.random.default_rng(seed)
    checks = [check_continuity(inst, hybrid),
              check_threshold_equivalence(inst, cfg["d1_grid"]),
              check_genie_elimination(inst, cfg["genie_points"], hybrid)]
    checks += check_hybrid_matching(inst, cfg["matching_points"], hybrid)
    checks.append(check_formula_vs_mmse(inst, rng, cfg["formula_params"]))
    checks.append(check_separation(inst, cfg["sep_points"]))
    checks.append(check_monotone(inst, cfg["d1_grid"]))
    return checks


def summarize(per_instance: list[list[Check]]) -> list[Check]:
    """Collapse per-instance checks to the worst margin per check name."""
    merged: dict[str, Check] = {}
    for checks in per_instance:
        for c in checks:
            prev = merged.get(c.name)
            if prev is None:
                merged[c.name] = Check(c.name, c.passed, c.margin, c.tolerance, c.detail)
            else:
                prev.passed &= c.passed
                if c.margin > prev.margin:
                    prev.margin, prev.detail = c.margin, c.detail
    return list(merged.values())
