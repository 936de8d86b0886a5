"""Conserved energy, localized space-time identities, the virial functional,
and support/Hardy quantities.

All integrals are radial quadratures: a 3D integral of a radial density f is
4 pi * trapezoid(f r^2 dr) on the grid, with the r^2 weight killing the
origin endpoint, and d_r u is the centered difference (one-sided at the
ends).  The localized identities use a fixed quintic smoothstep cutoff so
residual numbers are reproducible across implementations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from nlwlab.core import RadialState, Trajectory

__all__ = [
    "DiagnosticRecord",
    "diagnostic_record",
    "energy",
    "localized_identity_residuals",
    "records_to_csv",
    "residual_sweep_to_json",
    "smooth_cutoff",
    "smooth_cutoff_gradient",
    "support_and_hardy",
    "virial",
    "virial_rate",
]

SUPPORT_FLOOR = 1e-12


def smooth_cutoff(r, Rc: float):
    """Radial cutoff phi(r) = q(r / Rc): 1 on [0, Rc], 0 beyond 2 Rc.

    q is the quintic smoothstep, C^2 across the junctions:
    q(x) = 1 - (10 y^3 - 15 y^4 + 6 y^5) with y = x - 1 on [1, 2].
    """
    x = np.asarray(r, dtype=float) / Rc
    y = np.clip(x - 1.0, 0.0, 1.0)
    return 1.0 - y ** 3 * (10.0 - 15.0 * y + 6.0 * y * y)


def smooth_cutoff_gradient(r, Rc: float):
    """d/dr of :func:`smooth_cutoff` (supported on Rc <= r <= 2 Rc)."""
    x = np.asarray(r, dtype=float) / Rc
    y = np.clip(x - 1.0, 0.0, 1.0)
    return -(30.0 * y * y - 60.0 * y ** 3 + 30.0 * y ** 4) / Rc


def _radial_integral(density: np.ndarray, r: np.ndarray, h: float) -> float:
    return float(4.0 * np.pi * np.trapezoid(density * r * r, dx=h))


def energy(state: RadialState) -> float:
    """Conserved energy of the flow.

    E = 4 pi * int [ (d_r u)^2 / 2 + v^2 / 2 + mu |u|^{p+1} / (p+1) ] r^2 dr.

    For the focusing sign (mu = -1) the potential term enters negatively and
    E is not coercive; conservation still holds and downstream reports label
    the value "non-coercive" so drift checks are not misread as positivity.
    """
    r, h = state.grid.r, state.grid.h
    p, mu = state.params.p, state.params.mu
    du = np.gradient(state.u, h)
    density = 0.5 * du * du + 0.5 * state.v * state.v \
        + mu * np.abs(state.u) ** (p + 1.0) / (p + 1.0)
    return _radial_integral(density, r, h)


def virial(state: RadialState) -> float:
    """Virial functional z = 4 pi * int (u + r d_r u) v r^2 dr."""
    r, h = state.grid.r, state.grid.h
    du = np.gradient(state.u, h)
    return _radial_integral((state.u + r * du) * state.v, r, h)


def virial_rate(state: RadialState) -> float:
    """Closed-form dz/dt along the flow.

    z' = 4 pi * int [ -v^2/2 - (d_r u)^2/2 - mu (1 - 3/(p+1)) |u|^{p+1} ] r^2 dr,
    which is strictly negative for nonzero defocusing states with v = 0
    (note 3/(p+1) < 1 for p > 2).
    """
    r, h = state.grid.r, state.grid.h
    p, mu = state.params.p, state.params.mu
    du = np.gradient(state.u, h)
    density = -0.5 * state.v * state.v - 0.5 * du * du \
        - mu * (1.0 - 3.0 / (p + 1.0)) * np.abs(state.u) ** (p + 1.0)
    return _radial_integral(density, r, h)


def _identity_sides(state: RadialState, Rc: float):
    """Left-side functionals (Q_i, Q_ii, Q_iii) and right sides at one time."""
    r, h = state.grid.r, state.grid.h
    p, mu = state.params.p, state.params.mu
    u, v = state.u, state.v
    du = np.gradient(u, h)
    phi = smooth_cutoff(r, Rc)
    phip = smooth_cutoff_gradient(r, Rc)
    up1 = np.abs(u) ** (p + 1.0)

    I = lambda f: _radial_integral(f, r, h)
    q_i = I(phi * (0.5 * v * v + 0.5 * du * du + mu * up1 / (p + 1.0)))
    q_ii = I(phi * u * v)
    q_iii = I(phi * (r * du) * v)
    rhs_i = I(-phip * du * v)
    rhs_ii = I(phi * (v * v - du * du - mu * up1) - u * phip * du)
    # the x.grad(phi) (d_t u)^2 term carries coefficient -1/2 (consistency of
    # the finite-difference residual on smooth data is the arbiter; the
    # coefficient -1 leaves an O(1) defect)
    rhs_iii = I(-1.5 * phi * v * v - 0.5 * r * phip * v * v
                + 0.5 * phi * du * du - 0.5 * r * phip * du * du
                + mu * (3.0 / (p + 1.0)) * phi * up1
                + mu * (1.0 / (p + 1.0)) * r * phip * up1)
    return (q_i, q_ii, q_iii), (rhs_i, rhs_ii, rhs_iii)


def localized_identity_residuals(traj: Trajectory, Rc: float, t: float):
    """Finite-difference defects of the three localized identities at time t.

    For each identity, the left side is a cutoff space integral Q(t) and the
    right side a quadrature of local densities:

      i)   Q = int phi [ v^2/2 + (d_r u)^2/2 + mu |u|^{p+1}/(p+1) ]
           (localized energy; flux through the cutoff shell),
      ii)  Q = int phi u v,
      iii) Q = int phi (r d_r u) v  (the radial multiplier).

    Residual = | (Q(t+h) - Q(t-h)) / (2h) - rhs(t) |, one value per identity;
    O(h^2) on smooth solutions, zero for the zero solution.  Requires the
    three layers t-h, t, t+h among the stored snapshots and 2 Rc <= R.
    """
    if not (Rc > 0.0) or 2.0 * Rc > traj.grid.R:
        raise ValueError("cutoff must satisfy 0 < 2 Rc <= R")
    h = traj.grid.h
    before = traj.state_at(t - h)
    here = traj.state_at(t)
    after = traj.state_at(t + h)
    q_lo, _ = _identity_sides(before, Rc)
    q_hi, _ = _identity_sides(after, Rc)
    _, rhs = _identity_sides(here, Rc)
    return tuple(
        float(abs((hi - lo) / (2.0 * h) - rr))
        for hi, lo, rr in zip(q_hi, q_lo, rhs)
    )


def support_and_hardy(state: RadialState):
    """Support radius and the Hardy-weighted mass.

    Returns (support_radius, hardy_value): the largest r_j where
    max(|u_j|, |v_j|) > 1e-12 (0 for an identically small field), and
    4 pi * int u^2 dr, the radial form of int u^2 / |x|^2.  The 1D Hardy
    inequality bounds the latter by 4 * ||d_r u||_{L^2}^2.
    """
    r, h = state.grid.r, state.grid.h
    mask = np.maximum(np.abs(state.u), np.abs(state.v)) > SUPPORT_FLOOR
    idx = np.nonzero(mask)[0]
    support = float(r[idx[-1]]) if idx.size else 0.0
    hardy = float(4.0 * np.pi * np.trapezoid(state.u * state.u, dx=h))
    return support, hardy


@dataclass(frozen=True)
class DiagnosticRecord:
    """One row of the diagnostics report at a snapshot time.

    z_rate_lhs is the centered finite-difference dz/dt from neighboring
    snapshots; z_rate_rhs the closed-form rate; the three identity residuals
    are evaluated at the cutoff radius Rc the record was built with.
    """

    t: float
    energy: float
    virial: float
    z_rate_lhs: float
    z_rate_rhs: float
    res_i: float
    res_ii: float
    res_iii: float
    support_radius: float
    hardy_bound: float

    def __post_init__(self) -> None:
        for name in ("t", "energy", "virial", "z_rate_lhs", "z_rate_rhs",
                     "res_i", "res_ii", "res_iii", "support_radius", "hardy_bound"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"diagnostic field {name} is not finite")


def diagnostic_record(traj: Trajectory, t: float, Rc: float) -> DiagnosticRecord:
    """Assemble the full diagnostic row at a stored time t (t +- h also stored)."""
    h = traj.grid.h
    state = traj.state_at(t)
    z_lo = virial(traj.state_at(t - h))
    z_hi = virial(traj.state_at(t + h))
    res = localized_identity_residuals(traj, Rc, t)
    support, hardy = support_and_hardy(state)
    if support > traj.grid.R:
        raise ValueError("support radius exceeds the grid")
    return DiagnosticRecord(
        t=float(t),
        energy=energy(state),
        virial=virial(state),
        z_rate_lhs=float((z_hi - z_lo) / (2.0 * h)),
        z_rate_rhs=virial_rate(state),
        res_i=res[0],
        res_ii=res[1],
        res_iii=res[2],
        support_radius=support,
        hardy_bound=hardy,
    )


def records_to_csv(records, mu: int | None = None) -> str:
    """CSV serialization; a leading comment flags the non-coercive focusing energy."""
    lines = []
    if mu is not None and mu < 0:
        lines.append("# energy: non-coercive (focusing sign)")
    lines.append("t,E,z,z_rate_lhs,z_rate_rhs,res_i,res_ii,res_iii,support_radius,hardy_bound")
    for rec in records:
        lines.append(",".join(repr(float(getattr(rec, name))) for name in (
            "t", "energy", "virial", "z_rate_lhs", "z_rate_rhs",
            "res_i", "res_ii", "res_iii", "support_radius", "hardy_bound")))
    return "\n".join(lines) + "\n"


def residual_sweep_to_json(traj: Trajectory, cutoffs, times) -> str:
    """Identity residuals over a (Rc, t) sweep, keyed by 'Rc=..,t=..'."""
    sweep = {}
    for Rc in cutoffs:
        for t in times:
            res = localized_identity_residuals(traj, Rc, t)
            sweep[f"Rc={float(Rc)!r},t={float(t)!r}"] = list(res)
    return json.dumps(sweep, indent=2) + "\n"
