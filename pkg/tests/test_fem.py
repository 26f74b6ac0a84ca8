import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hiermor import (
    MeshSpec,
    ParameterBox,
    ParameterPoint,
    QoiVector,
    TimeGrid,
    assemble,
    qoi_norm,
    solve_fom,
)
from hiermor.fem import load_vector, system_matrix, theta

import mms


# -- assembly -----------------------------------------------------------------


def test_mass_interior_rows():
    ops = assemble(MeshSpec(10))
    h = 0.1
    m = ops.mass.toarray()
    for i in range(1, ops.n_dofs - 1):
        assert m[i, i - 1] == pytest.approx(h / 6)
        assert m[i, i] == pytest.approx(2 * h / 3)
        assert m[i, i + 1] == pytest.approx(h / 6)
    assert m[-1, -1] == pytest.approx(h / 3)


def test_stiffness_interior_rows():
    ops = assemble(MeshSpec(10))
    h = 0.1
    k = ops.diff.toarray()
    for i in range(1, ops.n_dofs - 1):
        assert k[i, i - 1] == pytest.approx(-1 / h)
        assert k[i, i] == pytest.approx(2 / h)
        assert k[i, i + 1] == pytest.approx(-1 / h)
    assert k[-1, -1] == pytest.approx(1 / h)


def test_advection_interior_rows():
    ops = assemble(MeshSpec(10))
    b = ops.adv.toarray()
    for i in range(1, ops.n_dofs - 1):
        assert b[i, i - 1] == pytest.approx(-0.5)
        assert b[i, i] == 0.0
        assert b[i, i + 1] == pytest.approx(0.5)
    assert b[-1, -1] == pytest.approx(0.5)


def test_symmetry_exact():
    ops = assemble(MeshSpec(64))
    assert np.abs((ops.mass - ops.mass.T).toarray()).max() == 0.0
    assert np.abs((ops.diff - ops.diff.T).toarray()).max() == 0.0
    assert np.abs((ops.ip - ops.ip.T).toarray()).max() == 0.0


def test_all_operators_tridiagonal():
    ops = assemble(MeshSpec(20))
    rows = np.arange(ops.n_dofs)
    for mat in (ops.mass, ops.diff, ops.adv, ops.react, ops.ip):
        assert mat.shape == (ops.n_dofs, ops.n_dofs)
        dense = mat.toarray()
        off_band = dense * (np.abs(rows[:, None] - rows[None, :]) > 1)
        assert not off_band.any()


def test_load_components_only_first_node():
    ops = assemble(MeshSpec(16), inflow_value=2.0)
    h = 1 / 16
    assert ops.load_diff[0] == pytest.approx(2.0 / h)
    assert ops.load_adv[0] == pytest.approx(1.0)
    assert ops.load_react[0] == pytest.approx(-2.0 * h / 6)
    for vec in (ops.load_diff, ops.load_adv, ops.load_react):
        assert not vec[1:].any()


def test_affine_assembly_matches_direct():
    ops = assemble(MeshSpec(16))
    mu = ParameterPoint(2.5, 7.0)
    th = theta(mu)
    direct = (th[0] * ops.diff + th[1] * ops.adv + th[2] * ops.react).toarray()
    assert np.allclose(system_matrix(ops, mu).toarray(), direct, rtol=0, atol=0)


def test_mesh_and_grid_validation():
    with pytest.raises(ValueError):
        MeshSpec(1)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        ParameterBox(da_min=-1.0)
    with pytest.raises(ValueError):
        ParameterBox(pe_min=0.0)


# -- qoi norm -----------------------------------------------------------------


def test_qoi_norm_zero():
    assert qoi_norm(QoiVector(np.zeros(7), 0.25)) == 0.0


def test_qoi_norm_constant_one():
    grid = TimeGrid(2.0, 16)
    q = QoiVector(np.ones(16), grid.dt)
    assert qoi_norm(q) == pytest.approx(math.sqrt(2.0), rel=1e-14)


def test_qoi_norm_hand_value():
    # sqrt(0.5 * (9 + 16)) = sqrt(12.5)
    assert qoi_norm(QoiVector(np.array([3.0, 4.0]), 0.5)) == pytest.approx(
        3.5355339059327378, rel=1e-15
    )


_magnitudes = st.one_of(
    st.just(0.0),
    st.floats(1e-100, 1e6),
    st.floats(-1e6, -1e-100),
)


@given(
    arrays(np.float64, st.integers(1, 30), elements=_magnitudes),
    st.floats(1e-6, 10.0),
)
def test_qoi_norm_properties(values, dt):
    q = QoiVector(values, dt)
    norm = qoi_norm(q)
    assert norm >= 0.0
    assert (norm == 0.0) == (not values.any())
    doubled = qoi_norm(QoiVector(2.0 * values, dt))
    assert doubled == pytest.approx(2.0 * norm, rel=1e-12, abs=1e-300)


# -- time stepping ------------------------------------------------------------


def test_steady_state_reached_without_reaction():
    # pure advection-diffusion with unit inflow settles at constant 1
    ops = assemble(MeshSpec(64))
    grid = TimeGrid(10.0, 400)
    mu = ParameterPoint(0.0, 10.0)
    _, qoi = solve_fom(ops, mu, grid, np.zeros(ops.n_dofs))
    assert abs(qoi.values[-1] - 1.0) < 1e-3


def test_steady_state_is_fixed_point():
    ops = assemble(MeshSpec(48))
    mu = ParameterPoint(1.5, 20.0)
    c_star = spla.spsolve(system_matrix(ops, mu).tocsc(), load_vector(ops, mu))
    grid = TimeGrid(1.0, 32)
    traj, qoi = solve_fom(ops, mu, grid, c_star)
    expected = float(ops.output @ c_star)
    assert np.allclose(traj.coeffs, c_star, rtol=1e-10, atol=1e-12)
    assert np.allclose(qoi.values, expected, rtol=1e-10)


def test_trajectory_row0_is_initial_condition(reference_trajectory, small_problem):
    ops, _ = small_problem
    _, traj, _ = reference_trajectory
    assert np.array_equal(traj.coeffs[0], np.zeros(ops.n_dofs))


def test_c0_length_check(small_problem):
    ops, grid = small_problem
    with pytest.raises(ValueError):
        solve_fom(ops, ParameterPoint(1.0, 10.0), grid, np.zeros(3))


def test_discrete_maximum_principle():
    ops = assemble(MeshSpec(256))
    grid = TimeGrid(1.0, 256)
    traj, _ = solve_fom(ops, ParameterPoint(0.0, 50.0), grid, np.zeros(ops.n_dofs))
    assert traj.coeffs.min() >= -1e-10
    assert traj.coeffs.max() <= 1.0 + 1e-10


def test_factorization_reuse_is_bitwise_identical(small_problem):
    ops, grid = small_problem
    mu = ParameterPoint(2.0, 30.0)
    c0 = np.zeros(ops.n_dofs)
    traj, qoi = solve_fom(ops, mu, grid, c0)

    # reference: refactorize the step matrix at every step
    step = (ops.mass + grid.dt * system_matrix(ops, mu)).tocsc()
    b = load_vector(ops, mu)
    c = c0.copy()
    rows = [c0.copy()]
    vals = []
    for _ in range(grid.n_steps):
        c = spla.splu(step).solve(ops.mass @ c + grid.dt * b)
        rows.append(c.copy())
        vals.append(float(ops.output @ c))
    assert np.array_equal(traj.coeffs, np.vstack(rows))
    assert np.array_equal(qoi.values, np.array(vals))


# -- coercivity structure -----------------------------------------------------


def test_coercive_part_dominates_h_norm():
    ops = assemble(MeshSpec(64))
    rng = np.random.default_rng(42)
    from hiermor.rb import coercivity_constants

    gamma_diff, gamma_react = coercivity_constants(ops)
    for mu in (ParameterPoint(0.5, 3.0), ParameterPoint(8.0, 90.0)):
        th_d, _, th_r = theta(mu)
        alpha = th_d * gamma_diff + th_r * gamma_react
        for _ in range(50):
            v = rng.standard_normal(ops.n_dofs)
            coercive = th_d * float(v @ (ops.diff @ v)) + th_r * float(v @ (ops.react @ v))
            assert coercive >= alpha * float(v @ (ops.ip @ v)) - 1e-12


def test_advection_quadratic_form_nonnegative():
    ops = assemble(MeshSpec(64))
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = rng.standard_normal(ops.n_dofs)
        assert float(v @ (ops.adv @ v)) >= -1e-12 * float(v @ (ops.ip @ v))


# -- manufactured solution smoke (full study in test_acceptance) ---------------


def test_manufactured_solution_error_drops_with_refinement():
    mu = ParameterPoint(1.0, 5.0)
    coarse = mms.error_l2l2(16, 32, mu)
    fine = mms.error_l2l2(32, 128, mu)
    assert fine < 0.3 * coarse
