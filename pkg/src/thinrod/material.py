"""Frame-indifferent stored-energy densities for hyperelastic rods.

Two isotropic families are provided, a compressible neo-Hookean density and a
St. Venant-Kirchhoff density augmented with a log-determinant term.  Both are
zero exactly on the rotation group, blow up as ``det F -> 0+``, and linearize
to the same isotropic elasticity tensor

    L H = 2 mu sym(H) + lam tr(H) Id.

Energies are evaluated internally from the displacement gradient
``e = F - Id``: the quantities ``(|F|^2 - 3)/2 = tr e + |e|^2/2`` and
``det F - 1 = tr e + inv2(e) + det e`` are exact polynomial identities in
``e``, so small-strain energies keep full relative precision instead of losing
it to cancellation.  The ``+inf`` returned on ``det F <= 0`` is a deliberate
sentinel from an explicit determinant check, not an arithmetic overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "IsotropicModuli",
    "ElasticTensor",
    "StoredEnergy",
    "CompressibleNeoHookean",
    "StVenantKirchhoffLogDet",
    "make_energy",
    "FAMILIES",
    "probe_hypotheses",
    "random_rotations",
]

_EYE = np.eye(3)


@dataclass(frozen=True)
class IsotropicModuli:
    """Lame parameters; admissible when mu > 0 and lam >= 0."""

    mu: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.lam)):
            raise InputError("moduli must be finite")
        if self.mu <= 0.0 or self.lam < 0.0:
            raise InputError(
                f"inadmissible moduli: need mu > 0 and lam >= 0, got mu={self.mu}, lam={self.lam}"
            )


@dataclass(frozen=True)
class ElasticTensor:
    """Isotropic fourth-order tensor acting as H -> 2 mu sym(H) + lam tr(H) Id."""

    mu: float
    lam: float

    def apply(self, H: np.ndarray) -> np.ndarray:
        H = np.asarray(H, dtype=float)
        sym = 0.5 * (H + np.swapaxes(H, -1, -2))
        tr = np.trace(H, axis1=-2, axis2=-1)
        return 2.0 * self.mu * sym + self.lam * tr[..., None, None] * _EYE

    def contract(self, H: np.ndarray, K: np.ndarray) -> np.ndarray:
        """Bilinear form (L H) : K."""
        return np.sum(self.apply(H) * np.asarray(K, dtype=float), axis=(-2, -1))

    def quadratic(self, H: np.ndarray) -> np.ndarray:
        """Quadratic form Q3(H) = (L H) : H = 2 mu |sym H|^2 + lam (tr H)^2."""
        H = np.asarray(H, dtype=float)
        sym = 0.5 * (H + np.swapaxes(H, -1, -2))
        tr = np.trace(H, axis1=-2, axis2=-1)
        return 2.0 * self.mu * np.sum(sym * sym, axis=(-2, -1)) + self.lam * tr**2


def _check_square(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.shape[-2:] != (3, 3):
        raise InputError(f"expected trailing 3x3 matrix, got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise InputError("non-finite entries in deformation gradient")
    return F


def _det_minus_one(e: np.ndarray) -> np.ndarray:
    """det(Id + e) - 1 as an exact polynomial in the entries of e."""
    tr = e[..., 0, 0] + e[..., 1, 1] + e[..., 2, 2]
    inv2 = (
        e[..., 0, 0] * e[..., 1, 1] - e[..., 0, 1] * e[..., 1, 0]
        + e[..., 0, 0] * e[..., 2, 2] - e[..., 0, 2] * e[..., 2, 0]
        + e[..., 1, 1] * e[..., 2, 2] - e[..., 1, 2] * e[..., 2, 1]
    )
    det = (
        e[..., 0, 0] * (e[..., 1, 1] * e[..., 2, 2] - e[..., 1, 2] * e[..., 2, 1])
        - e[..., 0, 1] * (e[..., 1, 0] * e[..., 2, 2] - e[..., 1, 2] * e[..., 2, 0])
        + e[..., 0, 2] * (e[..., 1, 0] * e[..., 2, 1] - e[..., 1, 1] * e[..., 2, 0])
    )
    return tr + inv2 + det


class StoredEnergy:
    """Base class: a frame-indifferent density W with W = 0 on SO(3).

    Subclasses implement the displacement-gradient forms; the public
    ``energy``/``stress`` take the deformation gradient F itself.
    """

    family = "abstract"

    def __init__(self, moduli: IsotropicModuli):
        self.moduli = moduli

    # -- displacement-gradient (stable) interface, batched over leading axes --

    def energy_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def stress_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- deformation-gradient interface --

    def energy(self, F: np.ndarray) -> np.ndarray:
        """W(F); +inf sentinel wherever det F <= 0."""
        F = _check_square(F)
        return self.energy_from_disp_grad(F - _EYE)

    def stress(self, F: np.ndarray) -> np.ndarray:
        """First Piola-Kirchhoff stress DW(F); defined only for det F > 0."""
        F = _check_square(F)
        e = F - _EYE
        if np.any(_det_minus_one(e) <= -1.0):
            raise InputError("stress undefined: det F <= 0")
        return self.stress_from_disp_grad(e)

    def linearized(self) -> ElasticTensor:
        """Second derivative of W at the identity as an isotropic tensor."""
        return ElasticTensor(self.moduli.mu, self.moduli.lam)


class CompressibleNeoHookean(StoredEnergy):
    """W(F) = (mu/2)(|F|^2 - 3) - mu log det F + (lam/2)(log det F)^2."""

    family = "neo_hookean"

    def energy_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        mu, lam = self.moduli.mu, self.moduli.lam
        dm1 = _det_minus_one(e)
        tr = e[..., 0, 0] + e[..., 1, 1] + e[..., 2, 2]
        half_norm2 = 0.5 * np.sum(e * e, axis=(-2, -1))
        out = np.full(np.shape(dm1), np.inf)
        ok = dm1 > -1.0
        logj = np.log1p(np.where(ok, dm1, 0.0))
        w = mu * (tr + half_norm2) - mu * logj + 0.5 * lam * logj**2
        if out.ndim == 0:
            return w if ok else np.inf
        out[ok] = w[ok]
        return out

    def stress_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        mu, lam = self.moduli.mu, self.moduli.lam
        F = e + _EYE
        Fit = np.swapaxes(np.linalg.inv(F), -1, -2)
        logj = np.log1p(_det_minus_one(e))
        # mu (F - F^{-T}) = mu (e + F^{-T} e^T), cancellation-free
        return mu * (e + Fit @ np.swapaxes(e, -1, -2)) + lam * logj[..., None, None] * Fit


class StVenantKirchhoffLogDet(StoredEnergy):
    """W(F) = (mu/2)|E|^2 + (lam/2)(tr E)^2 + (mu/2)[(|F|^2 - 3)/2 - log det F],

    with E = (F^T F - Id)/2.  The bracket is >= 0 with equality exactly on the
    orthogonal group (log x <= (x^2-1)/2), so W >= 0 vanishes exactly on SO(3)
    and blows up as det F -> 0+ even when lam = 0.  The Green-strain term and
    the bracket each contribute mu sym(H):sym(K) to the Hessian at identity,
    which is why both carry weight mu/2.
    """

    family = "svk_logdet"

    def energy_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        mu, lam = self.moduli.mu, self.moduli.lam
        dm1 = _det_minus_one(e)
        tr = e[..., 0, 0] + e[..., 1, 1] + e[..., 2, 2]
        half_norm2 = 0.5 * np.sum(e * e, axis=(-2, -1))
        Eg = 0.5 * (e + np.swapaxes(e, -1, -2) + np.swapaxes(e, -1, -2) @ e)
        trE = np.trace(Eg, axis1=-2, axis2=-1)
        quad = 0.5 * mu * np.sum(Eg * Eg, axis=(-2, -1)) + 0.5 * lam * trE**2
        out = np.full(np.shape(dm1), np.inf)
        ok = dm1 > -1.0
        logj = np.log1p(np.where(ok, dm1, 0.0))
        w = quad + 0.5 * mu * (tr + half_norm2 - logj)
        if out.ndim == 0:
            return w if ok else np.inf
        out[ok] = w[ok]
        return out

    def stress_from_disp_grad(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        mu, lam = self.moduli.mu, self.moduli.lam
        F = e + _EYE
        Fit = np.swapaxes(np.linalg.inv(F), -1, -2)
        Eg = 0.5 * (e + np.swapaxes(e, -1, -2) + np.swapaxes(e, -1, -2) @ e)
        trE = np.trace(Eg, axis1=-2, axis2=-1)
        return (
            mu * (F @ Eg)
            + lam * trE[..., None, None] * F
            + 0.5 * mu * (e + Fit @ np.swapaxes(e, -1, -2))
        )


FAMILIES = {
    CompressibleNeoHookean.family: CompressibleNeoHookean,
    StVenantKirchhoffLogDet.family: StVenantKirchhoffLogDet,
}


def make_energy(family: str, moduli: IsotropicModuli) -> StoredEnergy:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise InputError(
            f"unknown stored-energy family {family!r}; known: {sorted(FAMILIES)}"
        ) from None
    return cls(moduli)


def random_rotations(n: int, rng: np.random.Generator) -> np.ndarray:
    """n rotation matrices from normalized random quaternions."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((n, 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - z * w)
    R[:, 0, 2] = 2 * (x * z + y * w)
    R[:, 1, 0] = 2 * (x * y + z * w)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - x * w)
    R[:, 2, 0] = 2 * (x * z - y * w)
    R[:, 2, 1] = 2 * (y * z + x * w)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _sample_gradients(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random deformation gradients with det > 0.

    Half the samples are clustered near SO(3) (rotations composed with
    Id + eps*A, eps <= 0.3), half sit at moderate distance (Id + A with
    A ~ 0.5 N(0,1) entrywise, resampled until det > 0).
    """
    n_near = n // 2
    R = random_rotations(n, rng)
    F = np.empty((n, 3, 3))
    eps = rng.uniform(0.0, 0.3, size=n_near)
    A = rng.normal(size=(n_near, 3, 3))
    A /= np.maximum(np.linalg.norm(A, axis=(1, 2), keepdims=True), 1e-12)
    F[:n_near] = R[:n_near] @ (_EYE + eps[:, None, None] * A)
    for i in range(n_near, n):
        while True:
            M = _EYE + 0.5 * rng.normal(size=(3, 3))
            if np.linalg.det(M) > 0.05:
                break
        F[i] = R[i] @ M
    return F


def _dist_so3(F: np.ndarray) -> np.ndarray:
    """Frobenius distance to SO(3) for det F > 0 via singular values."""
    s = np.linalg.svd(np.asarray(F, dtype=float), compute_uv=False)
    return np.sqrt(np.sum((s - 1.0) ** 2, axis=-1))


def probe_hypotheses(energy: StoredEnergy, samples: int = 1000, seed: int = 0) -> list[dict]:
    """Empirically probe the structural hypotheses of a stored energy.

    Returns one record per probe, each shaped
    ``{hypothesis, max_violation, fitted_constant, samples, seed}``:

    * frame indifference: max of |W(RF) - W(F)| / (1 + |W(F)|),
    * zero on rotations: max |W(R)|,
    * quadratic coercivity: fitted C = min W(F)/dist(F,SO(3))^2 (violation is
      the magnitude of the most negative ratio, 0 when all are positive),
    * Kirchhoff-stress growth: fitted k = max |DW(F)F^T| / (W(F) + 1).

    Constants are empirical over the documented sample family, not certified
    bounds.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    F = _sample_gradients(samples, rng)
    R = random_rotations(samples, rng)
    W = energy.energy(F)

    wr = energy.energy(R @ F)
    h3 = float(np.max(np.abs(wr - W) / (1.0 + np.abs(W))))

    h4 = float(np.max(np.abs(energy.energy(R))))

    d2 = _dist_so3(F) ** 2
    mask = d2 > 1e-12
    ratios = W[mask] / d2[mask]
    c_fit = float(np.min(ratios))
    h5_violation = float(max(0.0, -c_fit))

    P = energy.stress(F)
    kirchhoff = P @ np.swapaxes(F, -1, -2)
    k_fit = float(np.max(np.linalg.norm(kirchhoff, axis=(-2, -1)) / (W + 1.0)))

    return [
        {"hypothesis": "frame_indifference", "max_violation": h3,
         "fitted_constant": None, "samples": samples, "seed": seed},
        {"hypothesis": "zero_on_rotations", "max_violation": h4,
         "fitted_constant": None, "samples": samples, "seed": seed},
        {"hypothesis": "coercivity", "max_violation": h5_violation,
         "fitted_constant": c_fit, "samples": samples, "seed": seed},
        {"hypothesis": "stress_growth", "max_violation": 0.0,
         "fitted_constant": k_fit, "samples": samples, "seed": seed},
    ]
