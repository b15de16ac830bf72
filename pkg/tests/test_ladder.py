import numpy as np
import pytest

from thinrod.errors import InputError, InsufficientDataError
from thinrod.ladder import (
    ConvergenceReport,
    LadderSpec,
    RungRecord,
    emit_report,
    estimate_rates,
    fit_rate,
    run_ladder,
    transport_state,
    w12_discrete,
)
from thinrod.material import IsotropicModuli
from thinrod.rod import RodLoads, solve_equilibrium
from thinrod.cell import q1_matrix
from thinrod.material import ElasticTensor
from thinrod.section import disc


def small_spec(**kw):
    base = dict(
        section=disc(2),
        moduli=IsotropicModuli(1.0, 1.0),
        loads=RodLoads(f2=0.01),
        length=0.5,
        h_values=(0.2, 0.1, 0.05),
        n_axial=(16, 32, 64),
        rod_elements=32,
    )
    base.update(kw)
    return LadderSpec(**base)


def test_spec_validation():
    with pytest.raises(InputError):
        small_spec(h_values=(0.1, 0.2, 0.05))
    with pytest.raises(InputError):
        small_spec(h_values=(0.2, -0.1, 0.05))
    with pytest.raises(InputError):
        small_spec(alpha=2.0)
    with pytest.raises(InputError):
        small_spec(n_axial=(16, 32))
    with pytest.raises(InputError):
        small_spec(rod_elements=1)


def test_fit_rate_exact_quadratic():
    hs = np.array([0.2, 0.1, 0.05])
    out = fit_rate(hs, hs**2)
    assert out["slope"] == pytest.approx(2.0, abs=1e-12)
    assert out["stderr"] <= 1e-12
    assert out["monotone"]
    assert not out["degenerate"]


def test_fit_rate_noisy_three_halves():
    rng = np.random.default_rng(11)
    hs = np.geomspace(0.4, 0.01, 9)
    es = 3.0 * hs**1.5 * (1.0 + 0.01 * rng.standard_normal(len(hs)))
    out = fit_rate(hs, es)
    assert out["slope"] == pytest.approx(1.5, abs=0.1)
    assert out["stderr"] > 0.0


def test_fit_rate_flags_and_degenerates():
    hs = (0.2, 0.1, 0.05)
    flat = fit_rate(hs, (1.0, 1.0, 1.0))
    assert not flat["monotone"]
    assert flat["slope"] == pytest.approx(0.0, abs=1e-12)
    zero = fit_rate(hs, (0.0, 0.0, 0.0))
    assert zero["degenerate"]
    assert zero["slope"] is None
    with pytest.raises(InsufficientDataError):
        fit_rate((0.2, 0.1), (1.0, 0.5))


def test_estimate_rates_requires_three_ok_rungs():
    spec = small_spec()
    rungs = [
        RungRecord(h=0.2, n_axial=16, config_hash="a", errors={"err_v2": 1.0}),
        RungRecord(h=0.1, n_axial=32, config_hash="b", status="failed"),
        RungRecord(h=0.05, n_axial=64, config_hash="c", errors={"err_v2": 0.5}),
    ]
    report = ConvergenceReport(spec=spec, reference=None, reference_residuals={},
                               stiffness=None, coarse_x=np.array([0.0, 0.5]),
                               rungs=rungs)
    with pytest.raises(InsufficientDataError):
        estimate_rates(report)


def test_w12_discrete_matches_hand_value():
    xc = np.array([0.0, 0.5, 1.0])
    a = np.array([0.0, 1.0, 0.0])
    b = np.zeros(3)
    # trapezoid of (a-b)^2 is 0.5, difference-quotient term is 4.0
    assert w12_discrete(xc, a, b) == pytest.approx(np.sqrt(4.5), rel=1e-14)


def test_transport_state_reproduces_nodal_values():
    x = np.linspace(0.0, 0.5, 9)
    obs = {"x": x, "u": -x**2, "v2": x**3, "v3": 0.1 * x, "w": np.sin(x)}
    state = transport_state(obs, 0.5, 3.0)
    assert np.allclose(state.eval_v2(x), x**3, atol=1e-14)
    assert np.allclose(state.eval_u(x), -(x**2), atol=1e-14)
    # slopes are second-order difference quotients of the nodal values
    assert np.allclose(state.v2p, np.gradient(x**3, x), atol=1e-14)


def test_run_ladder_zero_loads_has_zero_errors():
    spec = small_spec(loads=RodLoads(), h_values=(0.2, 0.1), n_axial=(4, 8),
                      rod_elements=4)
    report = run_ladder(spec)
    assert [r.status for r in report.rungs] == ["ok", "ok"]
    for rung in report.rungs:
        assert all(v <= 1e-8 for v in rung.errors.values())
    y = [r.diagnostics["y_dist_w12"] for r in report.rungs]
    assert y[1] < y[0]


def test_run_ladder_canonical_small():
    report = run_ladder(small_spec())
    assert [r.status for r in report.rungs] == ["ok", "ok", "ok"]
    assert [r.warm_started for r in report.rungs] == [False, False, True]
    assert len({r.config_hash for r in report.rungs}) == 3
    assert len(report.coarse_x) == 17
    e = [r.errors["err_v2"] for r in report.rungs]
    assert all(b <= 1.1 * a for a, b in zip(e, e[1:]))
    w = [r.diagnostics["int_w_scaled"] for r in report.rungs]
    assert max(w) / min(w) < 10.0
    y = [r.diagnostics["y_dist_w12"] for r in report.rungs]
    assert all(b <= 1.1 * a for a, b in zip(y, y[1:]))
    rates = estimate_rates(report)
    assert rates["rot_dist_l2"]["slope"] >= 1.7
    assert rates["y_dist_w12"]["monotone"]
    # the limit reference itself must satisfy the rod equations
    assert max(report.reference_residuals.values()) <= 1e-8


def test_run_ladder_marks_failed_rungs_and_continues():
    spec = small_spec(h_values=(0.2, 0.1), n_axial=(4, 8), max_iter=0,
                      rod_elements=4)
    report = run_ladder(spec)
    assert [r.status for r in report.rungs] == ["failed", "failed"]
    assert all(r.message for r in report.rungs)
    with pytest.raises(InsufficientDataError):
        estimate_rates(report)


def test_ladder_reference_matches_direct_rod_solve():
    spec = small_spec()
    report = run_ladder(spec, keep_fields=False)
    rs = q1_matrix(spec.section, ElasticTensor(1.0, 1.0))
    direct = solve_equilibrium(rs, spec.loads, spec.alpha, spec.length,
                               spec.rod_elements)
    assert np.allclose(report.reference.v2, direct.v2, atol=1e-15)
    assert report.rungs[0].field3d is None


def test_emit_report_files_and_determinism(tmp_path):
    report = run_ladder(small_spec(h_values=(0.2, 0.1, 0.05),
                                   n_axial=(8, 16, 32), rod_elements=16))
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    f1 = emit_report(report, d1)
    f2 = emit_report(report, d2)
    assert [p.name for p in f1] == [p.name for p in f2]
    for p1, p2 in zip(f1, f2):
        assert p1.read_bytes() == p2.read_bytes()
    svgs = [p for p in f1 if p.suffix == ".svg"]
    assert len(svgs) >= 4
    lines = (d1 / "ladder.csv").read_text().strip().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("h,n_axial,status,")


def test_emit_report_empty_ladder(tmp_path, capsys):
    spec = small_spec(h_values=(), n_axial=(), rod_elements=4)
    report = run_ladder(spec)
    files = emit_report(report, tmp_path / "empty")
    assert [p.name for p in files] == ["ladder.csv", "rates.json"]
    lines = files[0].read_text().strip().splitlines()
    assert len(lines) == 1
    assert "warning" in capsys.readouterr().err
    assert not list((tmp_path / "empty").glob("*.svg"))


def test_emit_report_failed_rung_row(tmp_path):
    spec = small_spec(h_values=(0.2,), n_axial=(4,), max_iter=0,
                      rod_elements=4)
    report = run_ladder(spec)
    files = emit_report(report, tmp_path)
    lines = files[0].read_text().strip().splitlines()
    assert len(lines) == 2
    assert ",failed," in lines[1]
    assert "nan" in lines[1]
