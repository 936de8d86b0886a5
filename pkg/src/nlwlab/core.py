"""Equation parameters, radial grids, field states, and exact reference solutions.

The equation under study is the radial semilinear wave equation in three space
dimensions,

    (d_t^2 - Delta) u + mu |u|^{p-1} u = 0,    p >= 5,

with mu = +1 (defocusing) or mu = -1 (focusing).  Its scaling symmetry
u -> lam^{-a} u(x/lam, t/lam), a = 2/(p-1), fixes the critical Sobolev exponent
s_p = 3/2 - 2/(p-1).  Everything downstream works with the reduced field
w = r * u on a uniform radial grid; a state stores (u, v = d_t u) and derives w.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EquationParams",
    "RadialGrid",
    "RadialState",
    "StepLog",
    "Trajectory",
    "even_origin_value",
    "load_state",
    "make_params",
    "reference_W",
    "reference_ode_blowup",
    "save_state",
    "scale_state",
    "state_from_text",
    "state_to_text",
]


@dataclass(frozen=True)
class EquationParams:
    """Exponent data for the equation. Build through :func:`make_params`.

    Attributes
    ----------
    p : float
        Nonlinearity exponent, p >= 5.
    mu : int
        Sign of the nonlinearity: +1 defocusing, -1 focusing.
    a : float
        Scaling rate 2 / (p - 1); u scales like lam^{-a}.
    m : float
        Dual exponent (p - 1) / 2, so that a * m = 1.
    s_p : float
        Critical Sobolev regularity 3/2 - 2/(p - 1).
    alpha_p : float
        Critical decay rate s_p - 1/2 = 1 - 2/(p - 1).
    """

    p: float
    mu: int
    a: float
    m: float
    s_p: float
    alpha_p: float


def make_params(p: float, mu: int) -> EquationParams:
    """Validate (p, mu) and derive the scaling exponents.

    The derived values satisfy a * m = 1 and m * (2 - a * p) = -1 up to
    rounding; s_p lies in [7/6, 3/2) for p in [5, inf).
    """
    p = float(p)
    if not np.isfinite(p) or p < 5.0:
        raise ValueError(f"p must be a finite real >= 5, got {p}")
    if mu not in (-1, 1):
        raise ValueError(f"mu must be +1 or -1, got {mu}")
    a = 2.0 / (p - 1.0)
    m = (p - 1.0) / 2.0
    s_p = 1.5 - a
    return EquationParams(p=p, mu=int(mu), a=a, m=m, s_p=s_p, alpha_p=s_p - 0.5)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_j = j * h for j = 0..n (n + 1 nodes, outer radius R = n*h)."""

    h: float
    n: int
    _r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.h) and self.h > 0.0):
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.n < 2:
            raise ValueError(f"need at least 3 nodes, got n = {self.n}")
        r = np.arange(self.n + 1, dtype=float) * self.h
        r.setflags(write=False)
        object.__setattr__(self, "_r", r)

    @property
    def r(self) -> np.ndarray:
        """Node coordinates, read-only, shape (n + 1,)."""
        return self._r

    @property
    def R(self) -> float:
        """Outer radius n * h."""
        return self.n * self.h


def _readonly(x, n_nodes: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True)
    if arr.shape != (n_nodes,):
        raise ValueError(f"{name} must have shape ({n_nodes},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RadialState:
    """Snapshot (u, v = d_t u) of the field at time t on a radial grid.

    Arrays are defensively copied and read-only.  The reduced field
    w = r * u always vanishes at the origin node.
    """

    grid: RadialGrid
    params: EquationParams
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        if not np.isfinite(self.t):
            raise ValueError(f"time must be finite, got {self.t}")
        n_nodes = self.grid.n + 1
        object.__setattr__(self, "u", _readonly(self.u, n_nodes, "u"))
        object.__setattr__(self, "v", _readonly(self.v, n_nodes, "v"))

    @property
    def w(self) -> np.ndarray:
        """Reduced field w = r * u (w[0] = 0 identically)."""
        w = self.grid.r * self.u
        w.setflags(write=False)
        return w


@dataclass(frozen=True, eq=False)
class StepLog:
    """Per-step scalar diagnostics of an evolution run.

    One entry per time layer: time, conserved energy, virial functional,
    max |u| over the grid, and the support radius (largest r with
    max(|u|, |v|) > 1e-12, or 0 for an empty field).
    """

    t: np.ndarray
    energy: np.ndarray
    virial: np.ndarray
    max_abs_u: np.ndarray
    support_radius: np.ndarray

    def __post_init__(self) -> None:
        cols = ("t", "energy", "virial", "max_abs_u", "support_radius")
        n = len(self.t)
        for name in cols:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"step log column {name} has mismatched length")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_csv(self) -> str:
        """Serialize as CSV with shortest round-trip decimals."""
        lines = ["t,E,z,max_abs_u,support_radius"]
        for k in range(len(self.t)):
            lines.append(
                ",".join(
                    repr(float(col[k]))
                    for col in (self.t, self.energy, self.virial, self.max_abs_u, self.support_radius)
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "StepLog":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0] != "t,E,z,max_abs_u,support_radius":
            raise ValueError("unrecognized step log header")
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        data = np.array(rows, dtype=float).reshape(len(rows), 5)
        return cls(
            t=data[:, 0],
            energy=data[:, 1],
            virial=data[:, 2],
            max_abs_u=data[:, 3],
            support_radius=data[:, 4],
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An evolution run: snapshot states plus the per-step scalar log.

    Snapshot times are strictly increasing and all states share one grid and
    one parameter set.  ``linear`` records whether the nonlinearity was
    switched off for the run (diagnostics that reconstruct the source need
    to know).
    """

    grid: RadialGrid
    params: EquationParams
    states: tuple
    log: StepLog
    linear: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise ValueError("trajectory needs at least one snapshot")
        times = [s.t for s in self.states]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        for s in self.states:
            if s.grid != self.grid:
                raise ValueError("snapshot grid differs from trajectory grid")
            if s.params != self.params:
                raise ValueError("snapshot parameters differ from trajectory parameters")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def state_at(self, t: float) -> RadialState:
        """Snapshot at time t; raises if t was not stored."""
        tol = 1e-9 * max(self.grid.h, 1.0)
        for s in self.states:
            if abs(s.t - t) <= tol:
                return s
        raise KeyError(f"no snapshot stored at t = {t}")


def even_origin_value(f1: float, f2: float):
    """Quadratic even extrapolation to r = 0 from the first two interior values."""
    return (4.0 * f1 - f2) / 3.0


def scale_state(state: RadialState, lam: float) -> RadialState:
    """Apply the scaling symmetry u -> lam^{-a} u(x/lam, t/lam).

    Returns the state on the dilated grid (spacing lam * h, same node count),
    with u' = lam^{-a} u, v' = lam^{-a-1} v, t' = lam * t.  Node j of the new
    grid sits at lam * r_j, so r^a |u| is preserved node-wise up to rounding.
    """
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValueError(f"scaling factor must be positive, got {lam}")
    a = state.params.a
    grid = RadialGrid(h=state.grid.h * lam, n=state.grid.n)
    return RadialState(
        grid=grid,
        params=state.params,
        t=lam * state.t,
        u=state.u * lam ** (-a),
        v=state.v * lam ** (-a - 1.0),
    )


def reference_W(grid: RadialGrid) -> RadialState:
    """Static ground state W(r) = (1 + r^2/3)^{-1/2} of the focusing quintic equation.

    Satisfies Delta W = -W^5, decays like sqrt(3)/r (so r * W -> sqrt(3)), and is
    an exact steady solution for p = 5, mu = -1.  Returned with v = 0 at t = 0.
    """
    r = grid.r
    u = 1.0 / np.sqrt(1.0 + r * r / 3.0)
    return RadialState(
        grid=grid,
        params=make_params(5.0, -1),
        t=0.0,
        u=u,
        v=np.zeros_like(u),
    )


def reference_ode_blowup(params: EquationParams, T: float, t):
    """Space-independent focusing blowup u(t) = c_p (T - t)^{-a}.

    Solves u'' = |u|^{p-1} u (the equation with mu = -1 and no spatial
    variation) with c_p^{p-1} = a (a + 1); for p = 5, c_p = (3/4)^{1/4}.
    Accepts scalar or array t < T.
    """
    if params.mu != -1:
        raise ValueError("the reference blowup solves the focusing equation (mu = -1)")
    t = np.asarray(t, dtype=float)
    if np.any(t >= T):
        raise ValueError("the reference blowup is defined for t < T only")
    a = params.a
    c_p = (a * (a + 1.0)) ** (1.0 / (params.p - 1.0))
    out = c_p * (T - t) ** (-a)
    return float(out) if out.ndim == 0 else out


# --- state serialization -----------------------------------------------------
#
# Text format: first line is a JSON header (p, mu, h, n, t), then one row per
# node "r u v" with repr() decimals, so a write/read cycle is bit-exact.


def state_to_text(state: RadialState) -> str:
    header = {
        "p": state.params.p,
        "mu": state.params.mu,
        "h": state.grid.h,
        "n": state.grid.n,
        "t": state.t,
    }
    lines = ["# " + json.dumps(header)]
    r = state.grid.r
    for j in range(state.grid.n + 1):
        lines.append(f"{float(r[j])!r} {float(state.u[j])!r} {float(state.v[j])!r}")
    return "\n".join(lines) + "\n"


def state_from_text(text: str) -> RadialState:
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing JSON header line")
    header = json.loads(lines[0].lstrip("#").strip())
    for key in ("p", "mu", "h", "n", "t"):
        if key not in header:
            raise ValueError(f"header is missing field {key!r}")
    grid = RadialGrid(h=float(header["h"]), n=int(header["n"]))
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(rows) != grid.n + 1:
        raise ValueError(f"expected {grid.n + 1} node rows, found {len(rows)}")
    data = np.array([[float(tok) for tok in row] for row in rows])
    if data.shape[1] != 3:
        raise ValueError("node rows must have three columns: r u v")
    if not np.array_equal(data[:, 0], grid.r):
        raise ValueError("node coordinates do not match the header grid")
    return RadialState(
        grid=grid,
        params=make_params(float(header["p"]), int(header["mu"])),
        t=float(header["t"]),
        u=data[:, 1],
        v=data[:, 2],
    )


def save_state(state: RadialState, path) -> None:
    """Write a state to a text file (see :func:`state_to_text` for the format)."""
    with open(path, "w") as fh:
        fh.write(state_to_text(state))


def load_state(path) -> RadialState:
    """Read a state written by :func:`save_state`; the cycle is bit-exact."""
    with open(path) as fh:
        return state_from_text(fh.read())
