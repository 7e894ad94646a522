import math

import numpy as np
import pytest

from twophase_dnn.checks import check_boundary_initial, oracle_residuals
from twophase_dnn.jets import input_jets
from twophase_dnn.physics import (FieldJets, Problem, ProblemKind, StructParams, boundary_initial_residual,
                                  divergence_misfit, exact_solution, fluid_stress, forcing, interface_data,
                                  interface_residual, pde_residual, solid_stress)

RNG = np.random.default_rng(0)


def coords(n=5):
    P = np.column_stack([RNG.uniform(0, 3, n), RNG.uniform(0, 3, n), RNG.uniform(0, 1, n)])
    X = input_jets(P)
    return P, X[:, 0], X[:, 1], X[:, 2]


def vals(sig):
    return np.array([[sig[i][j].val.a for j in range(2)] for i in range(2)])


def test_fluid_stress_pressure_only():
    _, x, _, _ = coords()
    sig = fluid_stress(FieldJets({"v_x": 0.0 * x, "v_y": 0.0 * x, "p": 0.0 * x + 1.0}), 1.0)
    assert np.array_equal(vals(sig), np.broadcast_to(-np.eye(2)[:, :, None], (2, 2, 5)))


def test_fluid_stress_hand_derivative():
    _, x, y, _ = coords()
    sig = fluid_stress(FieldJets({"v_x": x, "v_y": -y, "p": 0.0 * x}), 1.0)
    assert np.allclose(vals(sig)[:, :, 0], [[2, 0], [0, -2]])


def test_stresses_are_symmetric_for_random_fields():
    _, x, y, t = coords(20)
    f = FieldJets({"v_x": (x * y).__mul__(t), "v_y": x * x - y, "p": t * y,
                   "u_x": x * t - y * y, "u_y": x * y * t})
    for sig in (fluid_stress(f, 0.7), solid_stress(f, 3.0, 5.0)):
        assert np.array_equal(sig[0][1].c, sig[1][0].c)


def test_solid_stress_examples():
    _, x, y, _ = coords()
    mu, lam = 2.0, 3.0
    assert np.allclose(vals(solid_stress(FieldJets({"u_x": x, "u_y": y}), mu, lam))[:, :, 0],
                       (2 * mu + 2 * lam) * np.eye(2))
    assert np.allclose(vals(solid_stress(FieldJets({"u_x": y, "u_y": x}), mu, lam))[:, :, 0],
                       [[0, 2 * mu], [2 * mu, 0]])
    assert not vals(solid_stress(FieldJets({"u_x": 0.0 * x, "u_y": 0.0 * x}), mu, lam)).any()


def test_lame_constants():
    s = StructParams(1e3, 1e6, 0.3)
    assert s.mu_s == pytest.approx(1e6 / 2.6, rel=1e-15)
    assert s.lambda_s == pytest.approx(3e5 / 0.52, rel=1e-15)
    assert round(s.mu_s, 4) == 384615.3846 and round(s.lambda_s, 4) == 576923.0769


def test_zero_fields_give_zero_two_phase_residual():
    _, x, _, _ = coords()
    z = 0.0 * x
    r = pde_residual(Problem.two_phase(), 1, FieldJets({"v_x": z, "v_y": z, "p": z}))
    assert r.max_abs() == 0.0
    assert r.names() == ("momentum-x", "momentum-y", "divergence")


def test_wave_solid_residual_of_t_squared():
    _, x, _, t = coords()
    pb = Problem.fsi("fsi-wave", rho_s=1.0, E=5.0)
    r = pde_residual(pb, 2, FieldJets({"u_x": t * t, "u_y": 0.0 * x}))
    assert np.allclose(r["solid-x"], 2.0) and not r["solid-y"].any()


def test_parabolic_components_follow_theory_flag():
    P, *_ = coords()
    full = pde_residual(Problem.fsi("fsi-parabolic"), 2, exact_solution(Problem.fsi(), 2, P))
    lean = pde_residual(Problem.fsi("fsi-parabolic", theory_terms=False), 2, exact_solution(Problem.fsi(), 2, P))
    assert any(n.startswith("compatibility-strain") for n in full.names())
    assert lean.names() == ("solid-x", "solid-y", "compatibility-x", "compatibility-y")


def test_wave_kinematic_example():
    _, x, _, _ = coords(1)
    one, zero = 0.0 * x + 1.0, 0.0 * x
    f1 = FieldJets({"v_x": one, "v_y": zero, "p": zero})
    f2 = FieldJets({"u_x": zero, "u_y": zero})
    r = interface_residual(Problem.fsi("fsi-wave"), f1, f2, [[1.0, 0.0]])
    assert (r["kinematic-x"][0], r["kinematic-y"][0]) == (1.0, 0.0)


def test_continuity_case_has_zero_interface_residual():
    _, x, y, t = coords()
    f = FieldJets({"v_x": x * t, "v_y": y * y, "p": x + t})
    r = interface_residual(Problem.two_phase(), f, f, np.tile([0.6, 0.8], (5, 1)))
    assert r.max_abs() == 0.0


def test_dynamic_residual_is_antisymmetric():
    _, x, y, t = coords(7)
    f1 = FieldJets({"v_x": x * y, "v_y": t * x, "p": y})
    f2 = FieldJets({"v_x": y * y, "v_y": x * t * t, "p": x * y})
    th = RNG.uniform(0, 2 * np.pi, 7)
    n1 = np.column_stack([np.cos(th), np.sin(th)])
    pb = Problem.two_phase(1, 2, 3, 2)  # equal viscosities, so swapping fields swaps stresses
    a = interface_residual(pb, f1, f2, n1)
    swapped = interface_residual(pb, f2, f1, n1)
    relabelled = interface_residual(pb, f2, f1, -n1)
    for c in ("dynamic-x", "dynamic-y"):
        assert np.allclose(a[c], -swapped[c], rtol=0, atol=1e-13)
        assert np.allclose(a[c], relabelled[c], rtol=0, atol=1e-13)


def test_non_unit_normal_rejected():
    _, x, _, _ = coords(1)
    f = FieldJets({"v_x": x, "v_y": x, "p": x})
    with pytest.raises(ValueError):
        interface_residual(Problem.two_phase(), f, f, [[1.0, 1.0]])


def test_boundary_offset_example():
    P, *_ = coords()
    pb = Problem.two_phase()
    ex = exact_solution(pb, 1, P)
    shifted = FieldJets({"v_x": ex["v_x"] + 1.0, "v_y": ex["v_y"], "p": ex["p"]})
    r = boundary_initial_residual(pb, "B", 1, shifted, ex)
    assert np.allclose(r["boundary-x"], 1.0) and not r["boundary-y"].any()


def test_wave_initial_constant_shift():
    P, *_ = coords()
    pb = Problem.fsi("fsi-wave")
    ex = exact_solution(pb, 2, P)
    c = 0.3
    shifted = FieldJets({"u_x": ex["u_x"] + c, "u_y": ex["u_y"] + c})
    r = boundary_initial_residual(pb, "I", 2, shifted, ex)
    assert np.allclose(r.group_square_sum("initial-displacement"), 2 * c * c)
    assert np.abs(r.group_square_sum("initial-strain")).max() == 0.0
    assert np.abs(r.group_square_sum("initial-velocity")).max() == 0.0


def test_inactive_outer_boundary_of_subdomain_two():
    P, *_ = coords()
    pb = Problem.two_phase()
    ex = exact_solution(pb, 2, P)
    with pytest.raises(ValueError):
        boundary_initial_residual(pb, "B", 2, ex, ex)


def test_exact_values():
    v = exact_solution(Problem.two_phase(), 1, (1.5, 1.5, 0.0))
    s = math.sin(1.5) * math.cos(1.5)
    assert v["v_x"].value[0] == pytest.approx(s, abs=1e-15)
    assert v["v_y"].value[0] == pytest.approx(-s, abs=1e-15)
    assert round(s, 5) == 0.07056
    u = exact_solution(Problem.fsi(), 2, (1.5, 1.5, 0.0))
    assert u["u_x"].value[0] == pytest.approx(math.cos(1.5) ** 2, abs=1e-15)
    assert round(math.cos(1.5) ** 2, 6) == 0.005004
    assert u["u_y"].value[0] == 0.0


def test_structural_velocity_is_time_derivative():
    P, *_ = coords(50)
    u = exact_solution(Problem.fsi(), 2, P)
    assert np.abs(u["vs_x"].value - u["u_x"].grad[2]).max() < 1e-12
    assert np.abs(u["vs_y"].value - u["u_y"].grad[2]).max() < 1e-12


def test_fsi_fluid_is_divergence_free():
    P, *_ = coords(200)
    assert divergence_misfit(Problem.fsi(), 1, P) < 1e-14


def test_literal_two_phase_velocity_has_divergence():
    P, *_ = coords(200)
    assert divergence_misfit(Problem.two_phase(), 1, P) < 1e-14
    assert divergence_misfit(Problem.two_phase(paper_literal_solution=True), 1, P) > 0.5


def _fd_forcing(pb, sub, p, h=1e-4):
    """Two-phase momentum forcing from closed-form fields and central differences."""
    def fields(q):
        x, y, t = q
        if sub == 1:
            e = math.exp(t)
            return np.array([e * math.sin(x) * math.cos(y), -e * math.cos(x) * math.sin(y), e * math.sin(x) * math.sin(y)])
        c = math.cos(t)
        return np.array([c * math.cos(x) * math.cos(y), c * math.sin(x) * math.sin(y), c * math.cos(x + y)])

    prm = pb.sub1 if sub == 1 else pb.sub2
    E = np.eye(3) * h
    d = [(fields(p + E[a]) - fields(p - E[a])) / (2 * h) for a in range(3)]
    dd = [(fields(p + E[a]) - 2 * fields(p) + fields(p - E[a])) / h ** 2 for a in range(2)]
    v = fields(p)
    lap = dd[0] + dd[1]
    # div(2 mu D(v)) = mu (lap v + grad div v); grad div via mixed differences
    def div(q):
        return ((fields(q + E[0]) - fields(q - E[0]))[0] + (fields(q + E[1]) - fields(q - E[1]))[1]) / (2 * h)
    gdiv = np.array([(div(p + E[a]) - div(p - E[a])) / (2 * h) for a in range(2)])
    out = []
    for k in range(2):
        acc = d[2][k] + v[0] * d[0][k] + v[1] * d[1][k]
        out.append(prm.rho * acc - prm.mu * (lap[k] + gdiv[k]) + d[k][2])
    return np.array(out)


@pytest.mark.parametrize("sub", [1, 2])
def test_forcing_matches_independent_differences(sub):
    pb = Problem.two_phase(1.0, 2.0, 3.0, 5.0)
    P = np.column_stack([RNG.uniform(0.2, 2.8, 10), RNG.uniform(0.2, 2.8, 10), RNG.uniform(0.1, 0.9, 10)])
    f = forcing(pb, sub, P)
    ref = np.array([_fd_forcing(pb, sub, p) for p in P])
    assert np.abs(f - ref).max() < 1e-5 * max(1.0, np.abs(ref).max())


def test_interface_data_is_jump_of_exact_fields():
    th = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    P = np.column_stack([1.5 + np.cos(th), 1.5 + np.sin(th), np.full(9, 0.4)])
    n1 = -np.column_stack([np.cos(th), np.sin(th)])
    pb = Problem.two_phase()
    g1, _ = interface_data(pb, P, n1)
    e1, e2 = exact_solution(pb, 1, P), exact_solution(pb, 2, P)
    assert np.allclose(g1[:, 0], e1["v_x"].value - e2["v_x"].value, rtol=0, atol=1e-15)


@pytest.mark.parametrize("pb", [Problem.two_phase(), Problem.two_phase(1, 1, 1000, 1000),
                                Problem.fsi("fsi-wave"), Problem.fsi("fsi-parabolic")],
                         ids=["two-phase", "jump", "fsi-wave", "fsi-parabolic"])
def test_exact_fields_have_zero_loss(pb):
    bd, worst = oracle_residuals(pb, n=200)
    assert max(bd.terms.values()) < 1e-10
    assert max(worst.values()) < 1e-9
    assert check_boundary_initial(pb).passed


def test_problem_kind_parsing():
    assert ProblemKind.parse("TWO_PHASE") is ProblemKind.TWO_PHASE
    with pytest.raises(ValueError):
        ProblemKind.parse("magnetohydrodynamics")
    with pytest.raises(TypeError):
        Problem(ProblemKind.FSI_WAVE)
