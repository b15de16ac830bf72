"""Cross-section cell problem and reduced rod stiffness.

For a skew matrix F parameterized by kappa = (a, b, c),

    F = [[0, -a, -b],
         [a,  0, -c],
         [b,  c,  0]],

the expanded first-column field over the section is

    x2 F e2 + x3 F e3 = (-a x2 - b x3, -c x3, c x2),

which is THE sign convention used throughout this package (a couples to
bending about x3, b to bending about x2, c to twist).  The relaxed section
energy is

    Q1(kappa) = min over beta of int_S Q3( x2 F e2 + x3 F e3 | d2 beta | d3 beta )

with beta ranging over vector fields with int beta = int d2 beta =
int d3 beta = 0 (the class that makes the minimizer unique).  The minimizer
is computed with P1 elements and the nine mean constraints enforced by
Lagrange multipliers; the resulting stress rows satisfy a pure-Neumann
problem whose discrete residual `verify_neumann` reports.

The stretch stiffness E_mod = min over a, b of Q3(e1 | a | b) is the
1D modulus multiplying the stretching term of the limit functionals; for the
isotropic tensor it equals mu (3 lam + 2 mu) / (lam + mu).

Useful identity (used by the 1D stress moments): at the cell minimizer,
int_S x2 E_11 = -(Q1 kappa)_1 and int_S x3 E_11 = -(Q1 kappa)_2, exactly
also in the discrete setting, because the warp basis itself is an admissible
test field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, InputError, MeshError, NumericalError
from .material import ElasticTensor
from .section import CrossSection, check_normalized, moments

__all__ = [
    "SkewParam",
    "CellSolution",
    "ReducedStiffness",
    "young_modulus",
    "solve_cell",
    "q1_matrix",
    "verify_neumann",
    "stress_elements",
]


@dataclass(frozen=True)
class SkewParam:
    """Skew matrix coordinates: a = F[1,0], b = F[2,0], c = F[2,1]."""

    a: float
    b: float
    c: float

    @property
    def matrix(self) -> np.ndarray:
        a, b, c = self.a, self.b, self.c
        return np.array([[0.0, -a, -b], [a, 0.0, -c], [b, c, 0.0]])

    def first_column_field(self, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
        """(-a x2 - b x3, -c x3, c x2) stacked on the last axis."""
        x2 = np.asarray(x2, dtype=float)
        x3 = np.asarray(x3, dtype=float)
        return np.stack(
            [-self.a * x2 - self.b * x3, -self.c * x3, self.c * x2], axis=-1
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])


def young_modulus(tensor: ElasticTensor) -> float:
    """min over a, b in R^3 of Q3(e1 | a | b) via a 6x6 Schur complement.

    The 9x9 Gram matrix of Q3 in the entry basis is partitioned into the
    fixed first column (e1) and the six free entries of columns 2 and 3;
    eliminating the free block leaves the minimum value.
    """
    basis = np.zeros((9, 3, 3))
    for idx in range(9):
        basis[idx, idx // 3, idx % 3] = 1.0
    gram = np.array([[tensor.contract(basis[i], basis[j]) for j in range(9)]
                     for i in range(9)])
    vec_idx = lambda i, j: 3 * i + j
    fixed = [vec_idx(i, 0) for i in range(3)]
    free = [vec_idx(i, j) for i in range(3) for j in (1, 2)]
    f = np.array([1.0, 0.0, 0.0])  # e1 in the fixed slots
    Gff = gram[np.ix_(fixed, fixed)]
    Gfz = gram[np.ix_(fixed, free)]
    Gzz = gram[np.ix_(free, free)]
    # Gzz is singular on the in-plane rotation generator; the minimum is
    # still attained because the coupling is orthogonal to that kernel.
    g = Gfz.T @ f
    z, *_ = np.linalg.lstsq(Gzz, g, rcond=None)
    if np.linalg.norm(Gzz @ z - g) > 1e-10 * max(np.linalg.norm(g), 1.0):
        raise ConfigError("quadratic form is unbounded below on the free block")
    val = float(f @ Gff @ f - g @ z)
    return val


# ---------------------------------------------------------------------------
# FEM scaffolding


class _SectionFEM:
    """Per-triangle P1 data: gradients, areas, quadrature, constraints."""

    def __init__(self, section: CrossSection):
        v = section.vertices
        tri = section.triangles
        p = v[tri]  # (nt, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(np.abs(det) < 1e-14):
            raise MeshError(
                f"degenerate triangles at {np.nonzero(np.abs(det) < 1e-14)[0].tolist()[:10]}"
            )
        self.section = section
        self.tri = tri
        self.areas = 0.5 * det
        # gradients of the three barycentric shape functions
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        jinv = np.empty((len(tri), 2, 2))
        jinv[:, 0, 0] = d2[:, 1]
        jinv[:, 0, 1] = -d2[:, 0]
        jinv[:, 1, 0] = -d1[:, 1]
        jinv[:, 1, 1] = d1[:, 0]
        jinv /= det[:, None, None]
        self.grads = np.einsum("kj,tji->tki", ref, jinv)  # (nt, 3, 2)
        self.qpts = 0.5 * (p + np.roll(p, -1, axis=1))  # (nt, 3, 2)
        self.qw = np.repeat(self.areas[:, None] / 3.0, 3, axis=1)
        self.centroids = p.mean(axis=1)
        self.nv = section.n_vertices

    def constraint_matrix(self) -> sp.csr_matrix:
        """Nine rows: int beta_a, int d2 beta_a, int d3 beta_a (a = 0,1,2)."""
        nv, tri = self.nv, self.tri
        lumped = np.zeros(nv)
        np.add.at(lumped, tri.ravel(), np.repeat(self.areas / 3.0, 3))
        g2 = np.zeros(nv)
        g3 = np.zeros(nv)
        np.add.at(g2, tri.ravel(), (self.areas[:, None] * self.grads[:, :, 0]).ravel())
        np.add.at(g3, tri.ravel(), (self.areas[:, None] * self.grads[:, :, 1]).ravel())
        rows, cols, vals = [], [], []
        for a in range(3):
            for r, coeff in enumerate((lumped, g2, g3)):
                nz = np.nonzero(coeff)[0]
                rows.extend([3 * r + a] * len(nz))
                cols.extend((3 * nz + a).tolist())
                vals.extend(coeff[nz].tolist())
        return sp.csr_matrix((vals, (rows, cols)), shape=(9, 3 * nv))


def _assemble_stiffness(fem: _SectionFEM, tensor: ElasticTensor) -> sp.csr_matrix:
    mu, lam = tensor.mu, tensor.lam
    nt = len(fem.tri)
    m = np.zeros((nt, 3, 3))  # per node k the row vector (0, b_k, c_k)
    m[:, :, 1] = fem.grads[:, :, 0]
    m[:, :, 2] = fem.grads[:, :, 1]
    dot = np.einsum("tki,tli->tkl", m, m)
    eye = np.eye(3)
    blocks = (
        mu * np.einsum("tkl,ab->tklab", dot, eye)
        + mu * np.einsum("tkb,tla->tklab", m, m)
        + lam * np.einsum("tka,tlb->tklab", m, m)
    )
    blocks *= 2.0 * fem.areas[:, None, None, None, None]
    rows = (3 * fem.tri[:, :, None, None, None] + np.arange(3)[None, None, None, :, None])
    rows = np.broadcast_to(rows, blocks.shape)
    cols = (3 * fem.tri[:, None, :, None, None] + np.arange(3)[None, None, None, None, :])
    cols = np.broadcast_to(cols, blocks.shape)
    K = sp.csr_matrix(
        (blocks.ravel(), (rows.ravel(), cols.ravel())),
        shape=(3 * fem.nv, 3 * fem.nv),
    )
    return K


def _linear_term(fem: _SectionFEM, tensor: ElasticTensor, kappa: SkewParam) -> np.ndarray:
    """f with f^T beta = int 2 (L M_d) : (0 | d2 beta | d3 beta)."""
    mu, lam = tensor.mu, tensor.lam
    dbar = kappa.first_column_field(fem.centroids[:, 0], fem.centroids[:, 1])  # (nt, 3)
    b = fem.grads[:, :, 0]
    c = fem.grads[:, :, 1]
    f = np.zeros(3 * fem.nv)
    w = fem.areas[:, None]
    np.add.at(f, 3 * fem.tri + 0,
              2.0 * mu * w * (dbar[:, 1:2] * b + dbar[:, 2:3] * c))
    np.add.at(f, 3 * fem.tri + 1, 2.0 * lam * w * dbar[:, 0:1] * b)
    np.add.at(f, 3 * fem.tri + 2, 2.0 * lam * w * dbar[:, 0:1] * c)
    return f


def _pure_moment_cross(fem: _SectionFEM, tensor: ElasticTensor,
                       ki: SkewParam, kj: SkewParam) -> float:
    """int_S L(M_d_i) : M_d_j with M_d = (d | 0 | 0)."""
    mu, lam = tensor.mu, tensor.lam
    di = ki.first_column_field(fem.qpts[..., 0], fem.qpts[..., 1])
    dj = kj.first_column_field(fem.qpts[..., 0], fem.qpts[..., 1])
    dens = (2 * mu + lam) * di[..., 0] * dj[..., 0] + mu * (
        di[..., 1] * dj[..., 1] + di[..., 2] * dj[..., 2]
    )
    return float(np.sum(fem.qw * dens))


@dataclass
class CellSolution:
    kappa: SkewParam
    warp: np.ndarray  # (nv, 3), in the zero-mean class
    energy: float
    constraint_residual: float
    system_residual: float


@dataclass
class ReducedStiffness:
    """1D stiffness data: stretch modulus and 3x3 bending/twist matrix.

    warp_basis holds the three unit cell solutions (a=1, b=1, c=1) when the
    stiffness was computed from a mesh; synthetic instances carry None and
    refuse operations that need the interior fields.  moment_matrix maps
    kappa to the six quadrature moments int x2 E_1j and int x3 E_1j
    (rows tilde_11, tilde_12, tilde_13, hat_11, hat_12, hat_13).
    """

    E_mod: float
    Q1: np.ndarray
    section: CrossSection | None = None
    tensor: ElasticTensor | None = None
    warp_basis: np.ndarray | None = None  # (3, nv, 3)
    moment_matrix: np.ndarray | None = None  # (4, 3)
    mesh_stats: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @classmethod
    def synthetic(cls, E_mod: float, q1_diag) -> "ReducedStiffness":
        return cls(E_mod=float(E_mod), Q1=np.diag(np.asarray(q1_diag, dtype=float)))

    def to_json(self, path: str) -> None:
        payload = {
            "schema_version": 1,
            "E_mod": self.E_mod,
            "Q1": np.asarray(self.Q1).tolist(),
            "mesh_stats": self.mesh_stats,
            "residuals": self.residuals,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "ReducedStiffness":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("schema_version") != 1:
            raise ConfigError(
                f"unsupported reduced-stiffness schema {payload.get('schema_version')!r}"
            )
        q1 = np.asarray(payload["Q1"], dtype=float)
        if q1.shape != (3, 3):
            raise InputError("Q1 must be 3x3")
        return cls(
            E_mod=float(payload["E_mod"]),
            Q1=q1,
            mesh_stats=payload.get("mesh_stats", {}),
            residuals=payload.get("residuals", {}),
        )


class _CellWorkspace:
    """Factorized saddle system shared by the three basis solves."""

    def __init__(self, section: CrossSection, tensor: ElasticTensor):
        self.fem = _SectionFEM(section)
        self.tensor = tensor
        self.K = _assemble_stiffness(self.fem, tensor)
        self.C = self.fem.constraint_matrix()
        n = self.K.shape[0]
        saddle = sp.bmat([[self.K, self.C.T], [self.C, None]], format="csc")
        try:
            self.lu = spla.splu(saddle)
        except RuntimeError as exc:
            raise MeshError(f"singular constrained cell system: {exc}") from None
        self.n = n
        self.saddle = saddle

    def solve(self, kappa: SkewParam) -> CellSolution:
        fem, tensor = self.fem, self.tensor
        f = _linear_term(fem, tensor, kappa)
        rhs = np.concatenate([-f, np.zeros(9)])
        x = self.lu.solve(rhs)
        # two rounds of iterative refinement for the constraint block
        for _ in range(2):
            r = rhs - self.saddle @ x
            x = x + self.lu.solve(r)
        beta = x[: self.n]
        cres = float(np.max(np.abs(self.C @ beta)))
        sres = float(
            np.linalg.norm(self.saddle @ x - rhs)
            / max(np.linalg.norm(rhs), 1e-300)
        )
        if cres > 1e-10:
            raise NumericalError(f"cell constraints not met: residual {cres:.3e}")
        c0 = _pure_moment_cross(fem, tensor, kappa, kappa)
        energy = float(c0 + f @ beta + 0.5 * beta @ (self.K @ beta))
        return CellSolution(
            kappa=kappa,
            warp=beta.reshape(-1, 3),
            energy=energy,
            constraint_residual=cres,
            system_residual=sres,
        )

    def energy_of(self, kappa: SkewParam, warp: np.ndarray) -> float:
        """Section energy of an arbitrary warp field (need not be feasible).

        The energy is invariant under the four-dimensional kernel
        (constant shifts and the in-plane rotation), so the mean
        constraints do not affect the value.
        """
        beta = np.asarray(warp, dtype=float).reshape(-1)
        f = _linear_term(self.fem, self.tensor, kappa)
        c0 = _pure_moment_cross(self.fem, self.tensor, kappa, kappa)
        return float(c0 + f @ beta + 0.5 * beta @ (self.K @ beta))


def solve_cell(kappa: SkewParam, section: CrossSection,
               tensor: ElasticTensor) -> CellSolution:
    """Minimize the section energy at skew parameter kappa.

    Requires a normalized section.  The returned energy is Q1(kappa).
    """
    check_normalized(section)
    return _CellWorkspace(section, tensor).solve(kappa)


def _basis_stress_at_qpts(fem: _SectionFEM, tensor: ElasticTensor,
                          kappa: SkewParam, warp: np.ndarray) -> np.ndarray:
    """E = L( d | d2 beta | d3 beta ) at the quadrature points, (nt, 3, 3, 3)."""
    d = kappa.first_column_field(fem.qpts[..., 0], fem.qpts[..., 1])  # (nt,3,3)
    bw = warp[fem.tri]  # (nt, 3nodes, 3comp)
    g2 = np.einsum("tkc,tk->tc", bw, fem.grads[:, :, 0])  # (nt, 3)
    g3 = np.einsum("tkc,tk->tc", bw, fem.grads[:, :, 1])
    M = np.zeros((len(fem.tri), 3, 3, 3))  # (tri, qp, row, col)
    M[..., 0] = d
    M[..., 1] = g2[:, None, :]
    M[..., 2] = g3[:, None, :]
    return tensor.apply(M)


def stress_elements(rs: ReducedStiffness, kappa) -> np.ndarray:
    """Centroid stress per triangle for curvature kappa, shape (nt, 3, 3)."""
    if rs.warp_basis is None or rs.section is None:
        raise InputError("reduced stiffness carries no warp_basis")
    fem = _SectionFEM(rs.section)
    kap = np.asarray(kappa, dtype=float)
    units = [SkewParam(1, 0, 0), SkewParam(0, 1, 0), SkewParam(0, 0, 1)]
    total = np.zeros((len(fem.tri), 3, 3))
    for ki, wi, coef in zip(units, rs.warp_basis, kap):
        if coef == 0.0:
            continue
        Eq = _basis_stress_at_qpts(fem, rs.tensor, ki, wi)  # (nt, 3qp, 3, 3)
        total += coef * Eq.mean(axis=1)  # linear in x -> centroid = qp mean
    return total


def verify_neumann(section: CrossSection, efield: np.ndarray) -> float:
    """Relative weak-form residual of the section equilibrium of a stress.

    efield holds one 3x3 stress per triangle (centroid value).  The residual
    pairs rows 2 and 3 of the stress against the gradients of every nodal P1
    test field (pure Neumann: no test is constrained away) and is normalized
    by the natural load scale sum_t area_t |E_t| |grad N|.
    """
    efield = np.asarray(efield, dtype=float)
    fem = _SectionFEM(section)
    if efield.shape != (len(fem.tri), 3, 3):
        raise InputError(f"expected stress shape {(len(fem.tri), 3, 3)}, got {efield.shape}")
    r = np.zeros(3 * fem.nv)
    w = fem.areas[:, None]
    for a in range(3):
        contrib = w * (
            efield[:, None, a, 1] * fem.grads[:, :, 0]
            + efield[:, None, a, 2] * fem.grads[:, :, 1]
        )
        np.add.at(r, 3 * fem.tri + a, contrib)
    scale = float(
        np.sum(fem.areas * np.linalg.norm(efield, axis=(1, 2))
               * np.linalg.norm(fem.grads, axis=(1, 2)))
    )
    return float(np.linalg.norm(r) / max(scale, 1e-300))


def q1_matrix(section: CrossSection, tensor: ElasticTensor) -> ReducedStiffness:
    """Assemble the full reduced stiffness from the three basis cell solves."""
    check_normalized(section)
    ws = _CellWorkspace(section, tensor)
    units = [SkewParam(1, 0, 0), SkewParam(0, 1, 0), SkewParam(0, 0, 1)]
    sols = [ws.solve(k) for k in units]
    fs = [_linear_term(ws.fem, tensor, k) for k in units]
    betas = [s.warp.ravel() for s in sols]
    Q1 = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            val = (
                _pure_moment_cross(ws.fem, tensor, units[i], units[j])
                + 0.5 * (fs[i] @ betas[j] + fs[j] @ betas[i])
                + 0.5 * betas[i] @ (ws.K @ betas[j])
            )
            Q1[i, j] = Q1[j, i] = val
    asym = 0.0  # symmetrized by construction above
    for i in range(3):
        # evaluate the diagonal both ways as a consistency check
        asym = max(asym, abs(Q1[i, i] - sols[i].energy) / max(abs(Q1[i, i]), 1e-300))

    warp_basis = np.stack([s.warp for s in sols])
    # rows: int x2 E_1j (j = 1..3) then int x3 E_1j; columns follow the basis
    mom = np.empty((6, 3))
    neu = 0.0
    for i, (k, s) in enumerate(zip(units, sols)):
        Eq = _basis_stress_at_qpts(ws.fem, tensor, k, s.warp)
        x2 = ws.fem.qpts[..., 0]
        x3 = ws.fem.qpts[..., 1]
        w = ws.fem.qw
        for j in range(3):
            mom[j, i] = np.sum(w * x2 * Eq[..., 0, j])
            mom[3 + j, i] = np.sum(w * x3 * Eq[..., 0, j])
        neu = max(neu, verify_neumann(section, Eq.mean(axis=1)))

    m = moments(section)
    rs = ReducedStiffness(
        E_mod=young_modulus(tensor),
        Q1=Q1,
        section=section,
        tensor=tensor,
        warp_basis=warp_basis,
        moment_matrix=mom,
        mesh_stats={
            "vertices": section.n_vertices,
            "triangles": section.n_triangles,
            "area": m.area,
            "I2": m.I2,
            "I3": m.I3,
            "I23": m.I23,
            "muS": m.muS,
        },
        residuals={
            "cell_constraint_max": max(s.constraint_residual for s in sols),
            "cell_system_rel": max(s.system_residual for s in sols),
            "neumann_rel": neu,
            "q1_diag_consistency": asym,
        },
    )
    return rs
