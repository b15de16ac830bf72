import numpy as np
import pytest

from thinrod.errors import InputError
from thinrod.material import (
    CompressibleNeoHookean,
    ElasticTensor,
    IsotropicModuli,
    StVenantKirchhoffLogDet,
    make_energy,
    probe_hypotheses,
    random_rotations,
)

from oracles import fd_bilinear_hessian, fd_gradient

MODULI = IsotropicModuli(mu=1.0, lam=1.0)
FAMILIES = [CompressibleNeoHookean(MODULI), StVenantKirchhoffLogDet(MODULI)]

# frozen from the one-line closed form 1.5 - log(2) + 0.5*log(2)**2
W_NH_DIAG211 = 1.0470793263991554


def test_moduli_admissibility():
    with pytest.raises(InputError):
        IsotropicModuli(mu=0.0, lam=1.0)
    with pytest.raises(InputError):
        IsotropicModuli(mu=1.0, lam=-0.5)
    with pytest.raises(InputError):
        IsotropicModuli(mu=np.nan, lam=0.0)
    IsotropicModuli(mu=2.0, lam=0.0)  # lam = 0 admissible


@pytest.mark.parametrize("w", FAMILIES)
def test_zero_at_identity(w):
    assert w.energy(np.eye(3)) == 0.0
    assert np.max(np.abs(w.stress(np.eye(3)))) < 1e-15


def test_neo_hookean_frozen_value():
    w = CompressibleNeoHookean(MODULI)
    val = w.energy(np.diag([2.0, 1.0, 1.0]))
    assert abs(val - W_NH_DIAG211) < 1e-14


@pytest.mark.parametrize("w", FAMILIES)
def test_inf_sentinel_on_nonpositive_det(w):
    assert w.energy(np.diag([0.0, 1.0, 1.0])) == np.inf
    assert w.energy(np.diag([-1.0, 1.0, 1.0])) == np.inf
    batch = np.stack([np.eye(3), np.diag([0.0, 1.0, 1.0])])
    vals = w.energy(batch)
    assert vals[0] == 0.0 and vals[1] == np.inf


@pytest.mark.parametrize("w", FAMILIES)
def test_blowup_as_det_vanishes(w):
    vals = [w.energy(np.diag([1.0 / n, 1.0, 1.0])) for n in (1e1, 1e3, 1e6, 1e9, 1e12)]
    assert all(np.diff(vals) > 0)
    assert vals[-1] > 1e1


@pytest.mark.parametrize("w", FAMILIES)
def test_frame_indifference_sampled(w):
    rng = np.random.default_rng(3)
    R = random_rotations(200, rng)
    F = np.eye(3) + 0.4 * rng.normal(size=(200, 3, 3)) / 3.0
    keep = np.linalg.det(F) > 0.1
    F = F[keep]
    R = R[keep]
    wf = w.energy(F)
    wrf = w.energy(R @ F)
    assert np.max(np.abs(wrf - wf) / (1.0 + np.abs(wf))) < 1e-10


@pytest.mark.parametrize("w", FAMILIES)
def test_zero_on_rotations(w):
    rng = np.random.default_rng(5)
    R = random_rotations(300, rng)
    assert np.max(np.abs(w.energy(R))) < 1e-12


@pytest.mark.parametrize("w", FAMILIES)
def test_coercivity_ratios_positive(w):
    recs = {r["hypothesis"]: r for r in probe_hypotheses(w, samples=600, seed=11)}
    assert recs["coercivity"]["max_violation"] == 0.0
    assert recs["coercivity"]["fitted_constant"] > 0.0


@pytest.mark.parametrize("w", FAMILIES)
def test_growth_constant_stable(w):
    k1 = {r["hypothesis"]: r for r in probe_hypotheses(w, samples=800, seed=2)}
    k2 = {r["hypothesis"]: r for r in probe_hypotheses(w, samples=1600, seed=2)}
    a = k1["stress_growth"]["fitted_constant"]
    b = k2["stress_growth"]["fitted_constant"]
    assert abs(a - b) <= 0.2 * max(a, b)


def test_probe_deterministic():
    w = CompressibleNeoHookean(MODULI)
    assert probe_hypotheses(w, samples=200, seed=7) == probe_hypotheses(w, samples=200, seed=7)


@pytest.mark.parametrize("w", FAMILIES)
def test_linearized_matches_fd_hessian(w):
    # independent oracle: mixed second differences of the energy at identity
    rng = np.random.default_rng(17)
    L = w.linearized()
    for _ in range(6):
        H = rng.normal(size=(3, 3))
        K = rng.normal(size=(3, 3))
        fd = fd_bilinear_hessian(lambda F: float(w.energy(F)), np.eye(3), H, K, step=1e-4)
        assert abs(fd - L.contract(H, K)) < 1e-5 * (1.0 + abs(fd))


def test_families_share_linearization():
    a = CompressibleNeoHookean(MODULI).linearized()
    b = StVenantKirchhoffLogDet(MODULI).linearized()
    rng = np.random.default_rng(23)
    H = rng.normal(size=(3, 3))
    assert np.allclose(a.apply(H), b.apply(H), rtol=0, atol=1e-15)


@pytest.mark.parametrize("w", FAMILIES)
def test_stress_matches_fd_gradient(w):
    rng = np.random.default_rng(29)
    for _ in range(4):
        F = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        if np.linalg.det(F) < 0.3:
            continue
        P = w.stress(F)
        Pfd = fd_gradient(lambda X: float(w.energy(X)), F, step=1e-6)
        assert np.max(np.abs(P - Pfd)) < 1e-6 * (1.0 + np.max(np.abs(P)))


@pytest.mark.parametrize("w", FAMILIES)
def test_kirchhoff_stress_symmetric(w):
    rng = np.random.default_rng(31)
    F = np.eye(3) + 0.3 * rng.normal(size=(50, 3, 3)) / 3.0
    F = F[np.linalg.det(F) > 0.2]
    K = w.stress(F) @ np.swapaxes(F, -1, -2)
    asym = np.linalg.norm(K - np.swapaxes(K, -1, -2), axis=(-2, -1))
    assert np.max(asym) < 1e-12 * (1.0 + np.max(np.linalg.norm(K, axis=(-2, -1))))


def test_quadratic_form_values():
    L = ElasticTensor(mu=1.0, lam=1.0)
    assert abs(L.quadratic(np.eye(3)) - 15.0) < 1e-14  # 6 mu + 9 lam
    e11 = np.zeros((3, 3))
    e11[0, 0] = 1.0
    assert abs(L.quadratic(e11) - 3.0) < 1e-14  # 2 mu + lam


def test_elastic_tensor_action():
    L = ElasticTensor(mu=2.0, lam=0.5)
    rng = np.random.default_rng(37)
    H = rng.normal(size=(3, 3))
    expect = 2 * 2.0 * 0.5 * (H + H.T) + 0.5 * np.trace(H) * np.eye(3)
    assert np.allclose(L.apply(H), expect, atol=1e-15)
    # quadratic consistency with the bilinear contraction
    assert abs(L.quadratic(H) - L.contract(H, H)) < 1e-12


def test_input_validation():
    w = CompressibleNeoHookean(MODULI)
    with pytest.raises(InputError):
        w.energy(np.full((3, 3), np.nan))
    with pytest.raises(InputError):
        w.energy(np.eye(2))
    with pytest.raises(InputError):
        w.stress(np.diag([0.0, 1.0, 1.0]))
    with pytest.raises(InputError):
        make_energy("nope", MODULI)


def test_make_energy_families():
    assert isinstance(make_energy("neo_hookean", MODULI), CompressibleNeoHookean)
    assert isinstance(make_energy("svk_logdet", MODULI), StVenantKirchhoffLogDet)
