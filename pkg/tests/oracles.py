"""Independent oracles used to freeze expected values.

Everything here is deliberately written from first principles with no imports
from the package internals beyond plain numpy/scipy, so test expectations are
produced by a second route:

* finite-difference gradients/Hessians of scalar matrix functions,
* a brute-force pattern search for 6-dimensional quadratic minimization,
* a scalar Saint-Venant torsion solver (warping function FEM),
* cumulative-quadrature integration of the clamped-free bending ODE.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


# ---------------------------------------------------------------------------
# finite differences


def fd_gradient(f, X: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f at matrix/vector X."""
    X = np.asarray(X, dtype=float)
    g = np.zeros_like(X)
    it = np.nditer(X, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        Xp = X.copy()
        Xm = X.copy()
        Xp[idx] += step
        Xm[idx] -= step
        g[idx] = (f(Xp) - f(Xm)) / (2 * step)
    return g


def fd_bilinear_hessian(f, X: np.ndarray, H: np.ndarray, K: np.ndarray,
                        step: float = 1e-4) -> float:
    """Mixed central second difference D^2 f(X)[H, K]."""
    t = step
    return (
        f(X + t * H + t * K)
        - f(X + t * H - t * K)
        - f(X - t * H + t * K)
        + f(X - t * H - t * K)
    ) / (4 * t * t)


# ---------------------------------------------------------------------------
# brute-force quadratic minimization (for the stretch stiffness)


def pattern_search_min(f, x0: np.ndarray, span: float = 2.0, rounds: int = 40,
                       grid: int = 5) -> tuple[np.ndarray, float]:
    """Coordinate grid search with geometric shrinking.

    Scans a `grid`-point lattice per coordinate over [x-span, x+span],
    keeps the best point, halves the span, repeats.  Robust for smooth
    convex functions; accuracy ~ span * 2**(-rounds) in the argmin.
    """
    x = np.asarray(x0, dtype=float).copy()
    best = f(x)
    for _ in range(rounds):
        for i in range(x.size):
            xs = x[i] + np.linspace(-span, span, grid)
            for xi in xs:
                trial = x.copy()
                trial[i] = xi
                v = f(trial)
                if v < best:
                    best = v
                    x = trial
        span *= 0.5
    return x, best


def stretch_stiffness_bruteforce(mu: float, lam: float) -> float:
    """min over a, b in R^3 of Q3(e1 | a | b), by pattern search.

    Q3(H) = 2 mu |sym H|^2 + lam (tr H)^2 evaluated directly.
    """

    def q3(H):
        s = 0.5 * (H + H.T)
        return 2 * mu * np.sum(s * s) + lam * np.trace(H) ** 2

    def f(z):
        H = np.zeros((3, 3))
        H[:, 0] = [1.0, 0.0, 0.0]
        H[:, 1] = z[:3]
        H[:, 2] = z[3:]
        return q3(H)

    _, val = pattern_search_min(f, np.zeros(6))
    return val


# ---------------------------------------------------------------------------
# scalar Saint-Venant torsion constant (independent warping-function FEM)


def torsion_constant_scalar(vertices: np.ndarray, triangles: np.ndarray) -> float:
    """J = min over warping phi of int (d2 phi - x3)^2 + (d3 phi + x2)^2.

    Standard scalar P1 FEM: solve the Neumann problem K phi = b with the
    mean pinned, then evaluate the functional.  Torsional rigidity is mu*J.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    nv = len(vertices)
    rows, cols, vals = [], [], []
    b = np.zeros(nv)
    areas = np.zeros(len(triangles))
    grads = np.zeros((len(triangles), 3, 2))
    for t, tri in enumerate(triangles):
        p = vertices[tri]
        J = np.array([p[1] - p[0], p[2] - p[0]]).T
        detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        area = 0.5 * abs(detJ)
        areas[t] = area
        Jinv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / detJ
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]) @ Jinv  # (3,2)
        grads[t] = g
        c = p.mean(axis=0)  # centroid
        # source: int grad phi . (x3, -x2); constant-per-element via centroid
        src = np.array([c[1], -c[0]])
        for i in range(3):
            b[tri[i]] += area * g[i] @ src
            for j in range(3):
                rows.append(tri[i])
                cols.append(tri[j])
                vals.append(area * g[i] @ g[j])
    K = sp.csr_matrix((vals, (rows, cols)), shape=(nv, nv))
    # pin node 0 to fix the constant
    K = K.tolil()
    K[0, :] = 0.0
    K[0, 0] = 1.0
    b[0] = 0.0
    phi = spla.spsolve(K.tocsr(), b)
    # evaluate J = int (d2 phi - x3)^2 + (d3 phi + x2)^2 with 3-midpoint rule
    total = 0.0
    for t, tri in enumerate(triangles):
        p = vertices[tri]
        gphi = phi[tri] @ grads[t]  # (2,)
        mids = np.array([(p[0] + p[1]) / 2, (p[1] + p[2]) / 2, (p[2] + p[0]) / 2])
        w = areas[t] / 3.0
        for m in mids:
            total += w * ((gphi[0] - m[1]) ** 2 + (gphi[1] + m[0]) ** 2)
    return total


# ---------------------------------------------------------------------------
# clamped-free bending ODE by cumulative quadrature


def cantilever_deflection_quadrature(f2, length: float, stiffness: float,
                                     n: int = 20001) -> tuple[np.ndarray, np.ndarray]:
    """Integrate (stiffness * v'')'' = f2 with clamped-free data.

    Moment form: m = stiffness * v'', m'' = f2, m(L) = m'(L) = 0.
    Returns (x, v) on a uniform n-point grid using cumulative trapezoids.
    """
    x = np.linspace(0.0, length, n)
    f = np.asarray([f2(xi) for xi in x], dtype=float)

    def cumtrapz0(y):
        out = np.zeros_like(y)
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
        return out

    F = cumtrapz0(f)
    mp = -(F[-1] - F)          # m'(x) = -int_x^L f dt
    Mp = cumtrapz0(mp)
    m = -(Mp[-1] - Mp)         # m(x)  = -int_x^L m' dt
    vpp = m / stiffness
    vp = cumtrapz0(vpp)
    v = cumtrapz0(vp)
    return x, v


# ---------------------------------------------------------------------------
# analytic triangle moments (degree <= 2), classic vertex formulas


def triangle_moment_quadratic(p: np.ndarray, cxx: float, cxy: float, cyy: float,
                              cx: float = 0.0, cy: float = 0.0, c0: float = 0.0) -> float:
    """Exact integral over the triangle p (3,2) of
    cxx x^2 + cxy x y + cyy y^2 + cx x + cy y + c0."""
    p = np.asarray(p, dtype=float)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    x, y = p[:, 0], p[:, 1]
    ixx = area / 12.0 * (np.sum(x * x) + np.sum(x) ** 2)
    iyy = area / 12.0 * (np.sum(y * y) + np.sum(y) ** 2)
    ixy = area / 12.0 * (np.sum(x * y) + np.sum(x) * np.sum(y))
    ix = area / 3.0 * np.sum(x)
    iy = area / 3.0 * np.sum(y)
    return cxx * ixx + cxy * ixy + cyy * iyy + cx * ix + cy * iy + c0 * area
