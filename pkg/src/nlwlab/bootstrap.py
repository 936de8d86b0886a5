"""Arithmetic skeleton of the decay bootstrap.

The decay argument upgrades the modulus g1(r) = sup_t sup_{alpha >= r}
alpha^a |u| through a convexity step

    g1(r) <= kappa * g1(r/2) + C g1(r/2)^p,
    kappa = (1/2) [ (3/2)^{1-a} + (1/2)^{1-a} ] = 1 - 2 theta_p < 1,

and an exponent iteration beta_{n+1} = gamma_n beta_n p with
gamma_n = (1-a) / (1-a + beta_n (p-1)), which climbs monotonically to the
critical decay rate 1 - a.  This module evaluates those pieces exactly
(optionally in extended precision, selected by NLWLAB_PRECISION), and checks
them empirically on simulated trajectories through the decay moduli.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from nlwlab.core import Trajectory
from nlwlab.norms import g_moduli

__all__ = [
    "ConvexityReport",
    "ExponentSequence",
    "GRecursionReport",
    "contraction_constant",
    "convexity_step_check",
    "decay_fit",
    "exponent_iteration",
    "g_recursion_verify",
    "working_dtype",
]


def working_dtype():
    """Float type for the bootstrap arithmetic, from NLWLAB_PRECISION (f64 | extended)."""
    choice = os.environ.get("NLWLAB_PRECISION", "f64")
    if choice == "f64":
        return np.float64
    if choice == "extended":
        return np.longdouble
    raise ValueError(f"NLWLAB_PRECISION must be 'f64' or 'extended', got {choice!r}")


def contraction_constant(p: float):
    """Contraction factor of the convexity step and its gap to 1.

    Returns (value, theta_p) with value = (1/2)[(3/2)^{1-a} + (1/2)^{1-a}]
    and theta_p = (1 - value)/2.  The value is strictly inside (0, 1) for
    every p >= 5 and degenerates to 1 as p -> infinity.
    """
    if not (np.isfinite(p) and p >= 5.0):
        raise ValueError(f"p must be a finite real >= 5, got {p}")
    dt = working_dtype()
    one = dt(1.0)
    a = dt(2.0) / (dt(p) - one)
    value = (dt(1.5) ** (one - a) + dt(0.5) ** (one - a)) / dt(2.0)
    theta = (one - value) / dt(2.0)
    return float(value), float(theta)


@dataclass(frozen=True)
class ExponentSequence:
    """Iterates of the decay-exponent recursion.

    beta[n+1] = gamma[n] * beta[n] * p with
    gamma[n] = (1-a) / (1-a + beta[n] (p-1)); gamma is evaluated at every
    iterate (including the last).  For beta[0] < 1-a the betas increase
    strictly toward 1-a with gamma_n * p > 1 at every step; beta[0] = 1-a is
    the fixed point and yields a constant sequence with gamma = 1/p.
    """

    p: float
    beta: tuple
    gamma: tuple
    converged: bool
    limit_gap: float

    def to_csv(self) -> str:
        lines = ["n,beta,gamma"]
        for n, (b, g) in enumerate(zip(self.beta, self.gamma)):
            lines.append(f"{n},{float(b)!r},{float(g)!r}")
        return "\n".join(lines) + "\n"


def exponent_iteration(p: float, beta0: float, n_max: int = 100000,
                       tol: float = 1e-12) -> ExponentSequence:
    """Run the exponent recursion from beta0 until within tol of 1 - a.

    Requires p >= 5 and 0 < beta0 <= 1 - a (the upper endpoint is the fixed
    point; starting beyond it leaves the regime the recursion models).
    Convergence is geometric near the fixed point, so the default cap is
    generous.  Arithmetic runs in :func:`working_dtype`.
    """
    if not (np.isfinite(p) and p >= 5.0):
        raise ValueError(f"p must be a finite real >= 5, got {p}")
    dt = working_dtype()
    one = dt(1.0)
    pp = dt(p)
    a = dt(2.0) / (pp - one)
    limit = one - a
    b0 = dt(beta0)
    # a caller computing 1 - a in coarser arithmetic can land an ulp above
    # the fixed point; read that as the fixed point rather than rejecting it
    slack = dt(4.0) * dt(np.finfo(np.float64).eps) * limit
    if limit < b0 <= limit + slack:
        b0 = limit
    if not (b0 > 0.0 and b0 <= limit):
        raise ValueError(f"beta0 must lie in (0, 1 - a] = (0, {float(limit)}], got {beta0}")
    if n_max < 1:
        raise ValueError("n_max must be positive")
    betas = [b0]
    gammas = []
    b = b0
    converged = abs(b - limit) < tol
    for _ in range(n_max):
        if converged:
            break
        g = limit / (limit + b * (pp - one))
        gammas.append(g)
        b = g * b * pp
        betas.append(b)
        converged = abs(b - limit) < tol
    # gamma at the final iterate, so the two columns stay aligned
    gammas.append(limit / (limit + betas[-1] * (pp - one)))
    return ExponentSequence(
        p=float(p),
        beta=tuple(float(x) for x in betas),
        gamma=tuple(float(x) for x in gammas),
        converged=bool(converged),
        limit_gap=float(abs(betas[-1] - limit)),
    )


@dataclass(frozen=True)
class ConvexityReport:
    """Empirical convexity-step audit over dyadic g1 samples.

    c_p is the smallest constant making
    g1(r) <= kappa g1(r/2) + c_p g1(r/2)^p hold for every sampled pair;
    a pair is "applicable" once c_p g1(r/2)^{p-1} <= theta, and there the
    linearized contraction g1(r) <= (1 - theta) g1(r/2) is checked.
    activation_radius is the smallest sampled r with an applicable pair
    (None if the nonlinear term dominates everywhere).
    """

    kappa: float
    theta: float
    c_p: float
    pairs: tuple
    activation_radius: float | None
    linearized_ok: bool

    def to_json(self) -> str:
        payload = {
            "kappa": self.kappa,
            "theta": self.theta,
            "c_p": self.c_p,
            "pairs": list(self.pairs),
            "activation_radius": self.activation_radius,
            "linearized_ok": self.linearized_ok,
        }
        return json.dumps(payload, indent=2) + "\n"


def convexity_step_check(radii, g1_values, p: float) -> ConvexityReport:
    """Audit the convexity step on g1 sampled at halving radii.

    radii must decrease by exact factors of 2 (r, r/2, r/4, ...) and
    g1_values must be non-decreasing along them (g1 is non-increasing in r;
    non-monotone input is rejected as ill-formed).
    """
    radii = [float(x) for x in radii]
    vals = [float(x) for x in g1_values]
    if len(radii) != len(vals) or len(radii) < 2:
        raise ValueError("need matching radii/values with at least two samples")
    for r0, r1 in zip(radii, radii[1:]):
        if abs(r1 - 0.5 * r0) > 1e-9 * r0:
            raise ValueError("radii must halve at each step")
    if any(v < 0 for v in vals):
        raise ValueError("g1 samples must be nonnegative")
    if any(v1 < v0 for v0, v1 in zip(vals, vals[1:])):
        raise ValueError("g1 samples must be non-decreasing as the radius halves")
    kappa, theta = contraction_constant(p)
    required = []
    for (g_big, g_half) in zip(vals, vals[1:]):
        if g_half == 0.0:
            required.append(0.0)
        else:
            required.append(max(0.0, (g_big - kappa * g_half) / g_half ** p))
    c_p = max(required)
    pairs = []
    activation = None
    linear_ok = True
    for k, (g_big, g_half) in enumerate(zip(vals, vals[1:])):
        applicable = c_p * g_half ** (p - 1.0) <= theta
        holds = g_big <= (1.0 - theta) * g_half * (1.0 + 1e-12)
        if applicable:
            if not holds:
                linear_ok = False
            if activation is None or radii[k] < activation:
                activation = radii[k]
        pairs.append({
            "r": radii[k],
            "g1_r": g_big,
            "g1_half": g_half,
            "c_required": required[k],
            "linearized_applicable": applicable,
            "linearized_holds": holds,
        })
    return ConvexityReport(kappa=kappa, theta=theta, c_p=c_p, pairs=tuple(pairs),
                           activation_radius=activation, linearized_ok=linear_ok)


@dataclass(frozen=True)
class GRecursionReport:
    """Ratios g2 / g1^p and g3 / g1^p over dyadic windows of a trajectory."""

    radii: tuple
    g1: tuple
    g2: tuple
    g3: tuple
    ratio2: tuple
    ratio3: tuple
    spread: float | None
    vacuous: bool

    def to_json(self) -> str:
        payload = {
            "radii": list(self.radii),
            "g1": list(self.g1),
            "g2": list(self.g2),
            "g3": list(self.g3),
            "ratio2": list(self.ratio2),
            "ratio3": list(self.ratio3),
            "spread": self.spread,
            "vacuous": self.vacuous,
        }
        return json.dumps(payload, indent=2) + "\n"


def g_recursion_verify(traj: Trajectory, radii=None) -> GRecursionReport:
    """Check that g2, g3 behave like multiples of g1^p across dyadic windows.

    Samples g1, g2, g3 at halving radii (default: R/4, R/8, ... while the
    window stays a few grid cells wide; at least 4 windows required) and
    reports the ratios and their spread max/min.  A trajectory that is
    identically below the support floor is reported as vacuous.
    """
    grid = traj.grid
    if radii is None:
        radii = []
        r = grid.R / 4.0
        while r >= 8.0 * grid.h:
            radii.append(r)
            r *= 0.5
    radii = [float(x) for x in radii]
    if len(radii) < 4:
        raise ValueError(
            f"need at least 4 dyadic windows, the grid supports {len(radii)}")
    g1, g2, g3 = g_moduli(traj, radii)
    p = traj.params.p
    if max(g1.max(), g2.max(), g3.max()) == 0.0:
        return GRecursionReport(radii=tuple(radii), g1=tuple(g1), g2=tuple(g2),
                                g3=tuple(g3), ratio2=(), ratio3=(),
                                spread=None, vacuous=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio2 = np.where(g1 > 0, g2 / g1 ** p, np.inf)
        ratio3 = np.where(g1 > 0, g3 / g1 ** p, np.inf)
    both = np.concatenate([ratio2, ratio3])
    positive = both[both > 0]
    spread = float(positive.max() / positive.min()) if positive.size else None
    return GRecursionReport(
        radii=tuple(radii),
        g1=tuple(float(x) for x in g1),
        g2=tuple(float(x) for x in g2),
        g3=tuple(float(x) for x in g3),
        ratio2=tuple(float(x) for x in ratio2),
        ratio3=tuple(float(x) for x in ratio3),
        spread=spread,
        vacuous=False,
    )


def decay_fit(traj: Trajectory, r_min: float = 1.0):
    """Fit sup_t |u(r, t)| ~ C0 / r over the window [r_min, R/4].

    Returns (C0, slope): C0 = max of r |u(r, t)| over stored states and grid
    nodes in the window, and slope = least-squares slope of
    log sup_t |u| against log r over all window nodes with a nonzero sup.
    r_min >= 1 required; for an identically zero window, (0, 0) is returned.
    """
    grid = traj.grid
    if r_min < 1.0:
        raise ValueError("the fit window starts at r_min >= 1")
    r = grid.r
    mask = (r >= r_min - 1e-12) & (r <= grid.R / 4.0 + 1e-12)
    if np.count_nonzero(mask) < 2:
        raise ValueError("fit window contains fewer than two grid nodes")
    sup_u = np.zeros(grid.n + 1)
    for s in traj.states:
        np.maximum(sup_u, np.abs(s.u), out=sup_u)
    rr = r[mask]
    ss = sup_u[mask]
    C0 = float(np.max(rr * ss))
    pos = ss > 0
    if np.count_nonzero(pos) < 2:
        return C0, 0.0
    slope = float(np.polyfit(np.log(rr[pos]), np.log(ss[pos]), 1)[0])
    return C0, slope
