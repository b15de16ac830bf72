"""Limit 1D rod models and their equilibrium solver.

Three scaling regimes share one quadratic bending/twist energy

    I_bend = 1/2 int_0^L kappa^T Q1 kappa,   kappa = (v2'', v3'', w'),

and differ only in how the axial average u enters:

  * sub-critical (2 < alpha < 3): the stretching constraint
    u' + (|v2'|^2 + |v3'|^2)/2 = 0 is enforced; infeasible states get
    energy +inf.
  * critical (alpha = 3): the stretching term
    E_mod/2 int (u' + (|v2'|^2+|v3'|^2)/2)^2 is added; at equilibrium it
    vanishes and u is recovered by integrating the constraint.
  * super-critical (alpha > 3): the linear term E_mod/2 int (u')^2; with
    purely transverse loads u = 0.

With transverse load densities f2, f3 the Euler-Lagrange system reduces in
all regimes to the same clamped bending/twist problem for (v2, v3, w); the
solver uses cubic Hermite elements for v2, v3 and P1 for w and u on a
uniform grid, clamped at x = 0 (value and slope), natural at x = L.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cell import ReducedStiffness
from .errors import ConfigError, InputError, NumericalError

__all__ = [
    "AlphaRegime",
    "RodLoads",
    "RodState",
    "parse_load",
    "solve_equilibrium",
    "recover_u",
    "energy_alpha",
    "el_residuals",
    "stress_moments_1d",
]


class AlphaRegime(enum.Enum):
    SUB_CRITICAL = "sub_critical"
    CRITICAL = "critical"
    SUPER_CRITICAL = "super_critical"

    @classmethod
    def from_alpha(cls, alpha: float) -> "AlphaRegime":
        alpha = float(alpha)
        if not np.isfinite(alpha) or alpha <= 2.0:
            raise InputError(f"load exponent must be finite and > 2, got {alpha}")
        if alpha < 3.0:
            return cls.SUB_CRITICAL
        if alpha == 3.0:
            return cls.CRITICAL
        return cls.SUPER_CRITICAL


def parse_load(spec):
    """Turn a load spec into a callable density x -> value.

    Accepted: a number (constant), a callable, or one of the preset strings
    "const:c", "linear:a,b" (a + b x), "sin:amp,k" (amp sin(k x)).
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if not isinstance(spec, str):
        raise InputError(f"unsupported load spec {spec!r}")
    name, _, rest = spec.partition(":")
    try:
        params = [float(p) for p in rest.split(",")] if rest else []
    except ValueError:
        raise InputError(f"malformed load parameters in {spec!r}") from None
    if name == "const" and len(params) == 1:
        c = params[0]
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if name == "linear" and len(params) == 2:
        a, b = params
        return lambda x: a + b * np.asarray(x, dtype=float)
    if name == "sin" and len(params) == 2:
        amp, k = params
        return lambda x: amp * np.sin(k * np.asarray(x, dtype=float))
    raise InputError(f"unknown load preset {spec!r}")


@dataclass(frozen=True)
class RodLoads:
    """Transverse load densities (f2, f3); no axial component."""

    f2: object = 0.0
    f3: object = 0.0

    def densities(self):
        return parse_load(self.f2), parse_load(self.f3)


# ---------------------------------------------------------------------------
# Hermite grid machinery

# 3-point Gauss rule on [0, 1]: exact through degree 5
_GP = 0.5 + 0.5 * np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GW = np.array([5.0, 8.0, 5.0]) / 18.0


def _hermite_values(s: np.ndarray, h: float) -> np.ndarray:
    """Rows: the four cubic shape functions (value-left, slope-left,
    value-right, slope-right) at local coordinates s in [0, 1]."""
    s = np.asarray(s, dtype=float)
    return np.stack([
        1.0 - 3.0 * s**2 + 2.0 * s**3,
        h * s * (1.0 - s) ** 2,
        3.0 * s**2 - 2.0 * s**3,
        h * s**2 * (s - 1.0),
    ])


def _hermite_d1(s: np.ndarray, h: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.stack([
        (-6.0 * s + 6.0 * s**2) / h,
        (1.0 - 4.0 * s + 3.0 * s**2),
        (6.0 * s - 6.0 * s**2) / h,
        (3.0 * s**2 - 2.0 * s),
    ])


def _hermite_d2(s: np.ndarray, h: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.stack([
        (-6.0 + 12.0 * s) / h**2,
        (-4.0 + 6.0 * s) / h,
        (6.0 - 12.0 * s) / h**2,
        (-2.0 + 6.0 * s) / h,
    ])


@dataclass
class RodState:
    """Nodal fields on a uniform axial grid.

    v2, v3 carry values and slopes (cubic Hermite); w and u are P1.
    """

    length: float
    v2: np.ndarray
    v2p: np.ndarray
    v3: np.ndarray
    v3p: np.ndarray
    w: np.ndarray
    u: np.ndarray
    alpha: float = 3.0
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.v2)
        for name in ("v2p", "v3", "v3p", "w", "u"):
            if len(getattr(self, name)) != n:
                raise InputError("all nodal arrays must share one grid")
        if n < 2 or self.length <= 0.0:
            raise InputError("need at least two nodes and positive length")

    @property
    def n_elements(self) -> int:
        return len(self.v2) - 1

    @property
    def h(self) -> float:
        return self.length / self.n_elements

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, len(self.v2))

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        e = np.clip((x / self.h).astype(int), 0, self.n_elements - 1)
        s = x / self.h - e
        return e, s

    def _hermite_eval(self, vals, slopes, x, deriv=0):
        e, s = self._locate(x)
        basis = (_hermite_values, _hermite_d1, _hermite_d2)[deriv](s, self.h)
        dofs = np.stack([vals[e], slopes[e], vals[e + 1], slopes[e + 1]])
        return np.sum(basis * dofs, axis=0)

    def eval_v2(self, x, deriv=0):
        return self._hermite_eval(self.v2, self.v2p, x, deriv)

    def eval_v3(self, x, deriv=0):
        return self._hermite_eval(self.v3, self.v3p, x, deriv)

    def eval_w(self, x):
        e, s = self._locate(x)
        return (1.0 - s) * self.w[e] + s * self.w[e + 1]

    def eval_u(self, x):
        e, s = self._locate(x)
        return (1.0 - s) * self.u[e] + s * self.u[e + 1]

    def eval_w_prime(self, x):
        e, _ = self._locate(x)
        return (self.w[e + 1] - self.w[e]) / self.h

    def eval_u_prime(self, x):
        e, _ = self._locate(x)
        return (self.u[e + 1] - self.u[e]) / self.h

    def curvatures(self, x) -> np.ndarray:
        """(v2'', v3'', w') stacked on the last axis."""
        return np.stack(
            [self.eval_v2(x, 2), self.eval_v3(x, 2), self.eval_w_prime(x)], axis=-1
        )


def _check_stiffness(stiffness: ReducedStiffness) -> None:
    q1 = np.asarray(stiffness.Q1, dtype=float)
    if q1.shape != (3, 3) or not np.allclose(q1, q1.T, atol=1e-12 * max(1.0, np.abs(q1).max())):
        raise ConfigError("Q1 must be a symmetric 3x3 matrix")
    if np.linalg.eigvalsh(q1).min() <= 0.0:
        raise ConfigError("Q1 must be positive definite")
    if stiffness.E_mod <= 0.0:
        raise ConfigError("stretch modulus must be positive")


def _element_tables(length: float, n: int):
    h = length / n
    B = np.zeros((len(_GP), 3, 10))  # kappa = B @ local dofs at each Gauss pt
    d2 = _hermite_d2(_GP, h)  # (4, q)
    for q in range(len(_GP)):
        B[q, 0, 0:4] = d2[:, q]
        B[q, 1, 4:8] = d2[:, q]
        B[q, 2, 8] = -1.0 / h
        B[q, 2, 9] = 1.0 / h
    vals = _hermite_values(_GP, h)  # (4, q)
    return h, B, vals


def _local_maps(n: int):
    e = np.arange(n)
    loc = np.empty((n, 10), dtype=int)
    loc[:, 0] = 5 * e
    loc[:, 1] = 5 * e + 1
    loc[:, 2] = 5 * (e + 1)
    loc[:, 3] = 5 * (e + 1) + 1
    loc[:, 4] = 5 * e + 2
    loc[:, 5] = 5 * e + 3
    loc[:, 6] = 5 * (e + 1) + 2
    loc[:, 7] = 5 * (e + 1) + 3
    loc[:, 8] = 5 * e + 4
    loc[:, 9] = 5 * (e + 1) + 4
    return loc


def _assemble(stiffness: ReducedStiffness, loads: RodLoads, length: float, n: int):
    h, B, vals = _element_tables(length, n)
    q1 = np.asarray(stiffness.Q1, dtype=float)
    ke = np.zeros((10, 10))
    for q in range(len(_GP)):
        ke += _GW[q] * h * B[q].T @ q1 @ B[q]
    loc = _local_maps(n)
    ndof = 5 * (n + 1)
    rows = np.repeat(loc, 10, axis=1).ravel()
    cols = np.tile(loc, (1, 10)).ravel()
    data = np.tile(ke.ravel(), n)
    K = sp.csr_matrix((data, (rows, cols)), shape=(ndof, ndof))

    f2, f3 = loads.densities()
    x0 = h * np.arange(n)
    xq = x0[:, None] + h * _GP[None, :]  # (n, q)
    fe = np.zeros((n, 10))
    f2q = np.broadcast_to(np.asarray(f2(xq), dtype=float), xq.shape)
    f3q = np.broadcast_to(np.asarray(f3(xq), dtype=float), xq.shape)
    for q in range(len(_GP)):
        fe[:, 0:4] += _GW[q] * h * f2q[:, q, None] * vals[:, q][None, :]
        fe[:, 4:8] += _GW[q] * h * f3q[:, q, None] * vals[:, q][None, :]
    F = np.zeros(ndof)
    np.add.at(F, loc.ravel(), fe.ravel())
    return K, F


def solve_equilibrium(stiffness: ReducedStiffness, loads: RodLoads, alpha: float,
                      length: float, n_elements: int) -> RodState:
    """Clamped equilibrium of the limit model; u filled per the regime."""
    regime = AlphaRegime.from_alpha(alpha)
    _check_stiffness(stiffness)
    if n_elements < 1:
        raise InputError("need at least one element")
    if not (np.isfinite(length) and length > 0.0):
        raise InputError("length must be positive")
    n = int(n_elements)
    K, F = _assemble(stiffness, loads, length, n)
    free = np.arange(5, 5 * (n + 1))
    Kr = K[np.ix_(free, free)].tocsc()
    Fr = F[free]
    try:
        lu = spla.splu(Kr)
    except RuntimeError as exc:
        raise NumericalError(f"singular rod system: {exc}") from None
    x = lu.solve(Fr)
    for _ in range(2):
        x += lu.solve(Fr - Kr @ x)
    rnorm = float(np.linalg.norm(Kr @ x - Fr))
    rel = rnorm / max(np.linalg.norm(Fr), 1e-300)
    knorm = float(np.abs(Kr).sum(axis=1).max())
    backward = rnorm / max(knorm * np.linalg.norm(x) + np.linalg.norm(Fr), 1e-300)
    if backward > 1e-11:
        raise NumericalError(f"rod solve did not converge: backward error {backward:.3e}")
    full = np.zeros(5 * (n + 1))
    full[free] = x
    dofs = full.reshape(n + 1, 5)
    state = RodState(
        length=float(length),
        v2=dofs[:, 0].copy(),
        v2p=dofs[:, 1].copy(),
        v3=dofs[:, 2].copy(),
        v3p=dofs[:, 3].copy(),
        w=dofs[:, 4].copy(),
        u=np.zeros(n + 1),
        alpha=float(alpha),
        residuals={"linear_system_rel": rel, "backward_error": backward},
    )
    if regime is not AlphaRegime.SUPER_CRITICAL:
        state.u = recover_u(state, alpha)
    return state


def recover_u(state: RodState, alpha: float) -> np.ndarray:
    """Axial average from the stretching relation.

    For 2 < alpha <= 3: u(x) = -1/2 int_0^x (|v2'|^2 + |v3'|^2); the
    elementwise integrals use the 3-point rule, exact for the quartic
    integrand.  For alpha > 3: u = 0.
    """
    if AlphaRegime.from_alpha(alpha) is AlphaRegime.SUPER_CRITICAL:
        return np.zeros(len(state.v2))
    n, h = state.n_elements, state.h
    x0 = h * np.arange(n)
    xq = x0[:, None] + h * _GP[None, :]
    sq = state.eval_v2(xq, 1) ** 2 + state.eval_v3(xq, 1) ** 2
    increments = -0.5 * h * np.sum(_GW[None, :] * sq, axis=1)
    u = np.zeros(n + 1)
    u[1:] = np.cumsum(increments)
    return u


def energy_alpha(state: RodState, stiffness: ReducedStiffness, loads: RodLoads,
                 alpha: float, constraint_tol: float = 1e-8) -> float:
    """Value of the regime functional; +inf for an infeasible sub-critical
    state (elementwise average of the stretching constraint above tol)."""
    regime = AlphaRegime.from_alpha(alpha)
    _check_stiffness(stiffness)
    n, h = state.n_elements, state.h
    x0 = h * np.arange(n)
    xq = x0[:, None] + h * _GP[None, :]
    kap = state.curvatures(xq)  # (n, q, 3)
    q1 = np.asarray(stiffness.Q1, dtype=float)
    bend = 0.5 * h * np.sum(_GW[None, :] * np.einsum(
        "eqi,ij,eqj->eq", kap, q1, kap))
    f2, f3 = loads.densities()
    f2q = np.broadcast_to(np.asarray(f2(xq), dtype=float), xq.shape)
    f3q = np.broadcast_to(np.asarray(f3(xq), dtype=float), xq.shape)
    load = h * np.sum(_GW[None, :] * (f2q * state.eval_v2(xq) + f3q * state.eval_v3(xq)))
    total = bend - load

    slope_sq = state.eval_v2(xq, 1) ** 2 + state.eval_v3(xq, 1) ** 2
    up = state.eval_u_prime(xq)
    mismatch = up + 0.5 * slope_sq
    if regime is AlphaRegime.SUB_CRITICAL:
        elem_avg = np.sum(_GW[None, :] * mismatch, axis=1)
        if np.max(np.abs(elem_avg)) > constraint_tol:
            return float("inf")
        return float(total)
    if regime is AlphaRegime.CRITICAL:
        stretch = 0.5 * stiffness.E_mod * h * np.sum(_GW[None, :] * mismatch**2)
        return float(total + stretch)
    stretch = 0.5 * stiffness.E_mod * h * np.sum(_GW[None, :] * up**2)
    return float(total + stretch)


def el_residuals(state: RodState, stiffness: ReducedStiffness, loads: RodLoads,
                 alpha: float) -> dict:
    """Blockwise equilibrium residuals of the discrete system.

    eq1a: max elementwise average of the stretching relation (regime
    dependent); eq2a/eq2b: weak bending residuals for v2/v3; eq3: the twist
    block.  The weak residuals are relative to the load vector norm.
    """
    regime = AlphaRegime.from_alpha(alpha)
    _check_stiffness(stiffness)
    n = state.n_elements
    K, F = _assemble(stiffness, loads, state.length, n)
    full = np.empty(5 * (n + 1))
    dofs = np.stack([state.v2, state.v2p, state.v3, state.v3p, state.w], axis=1)
    full[:] = dofs.ravel()
    r = K @ full - F
    free = np.arange(5, 5 * (n + 1))
    rfree = r[free]
    scale = max(float(np.linalg.norm(F[free])), 1e-300)
    kinds = free % 5
    out = {
        "eq2a": float(np.linalg.norm(rfree[kinds <= 1]) / scale),
        "eq2b": float(np.linalg.norm(rfree[(kinds == 2) | (kinds == 3)]) / scale),
        "eq3": float(np.linalg.norm(rfree[kinds == 4]) / scale),
    }
    h = state.h
    x0 = h * np.arange(n)
    xq = x0[:, None] + h * _GP[None, :]
    if regime is AlphaRegime.SUPER_CRITICAL:
        out["eq1a"] = float(np.max(np.abs(np.diff(state.u)))) / h
    else:
        slope_sq = state.eval_v2(xq, 1) ** 2 + state.eval_v3(xq, 1) ** 2
        up = np.diff(state.u) / h
        avg = up + 0.5 * np.sum(_GW[None, :] * slope_sq, axis=1)
        out["eq1a"] = float(np.max(np.abs(avg)))
    return out


def stress_moments_1d(state: RodState, stiffness: ReducedStiffness,
                      x=None) -> dict:
    """Section stress moments along the rod from the cell moment matrix.

    Returns arrays over the evaluation points (element midpoints by
    default): the six first moments int x2 E_1j, int x3 E_1j of the limit
    stress, plus the twist moment tilde_13 - hat_12.  Requires a stiffness
    computed from a mesh (carrying moment_matrix).
    """
    if stiffness.moment_matrix is None:
        raise InputError("reduced stiffness carries no cell moment data")
    if x is None:
        x = (np.arange(state.n_elements) + 0.5) * state.h
    x = np.asarray(x, dtype=float)
    kap = state.curvatures(x)  # (m, 3)
    mom = np.asarray(stiffness.moment_matrix, dtype=float) @ kap.T  # (6, m)
    return {
        "x": x,
        "tilde_11": mom[0],
        "tilde_12": mom[1],
        "tilde_13": mom[2],
        "hat_11": mom[3],
        "hat_12": mom[4],
        "hat_13": mom[5],
        "twist": mom[2] - mom[4],
    }
