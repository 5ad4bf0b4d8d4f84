import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locs.dynamics import fig1_linear, fig2_nonlinear, linearize
from locs.integrate import StepSizeUnderflowError, concatenate, dopri5, simulate, simulate_plan
from locs.linsys import InvalidHorizonError, LinearModel, steer
from locs.planner import Plan
from oracles import rk_reference


def test_constant_solution_is_exact():
    sol = dopri5(lambda t, y: np.zeros(2), 0.0, [1.0, -2.0], 3.0)
    np.testing.assert_array_equal(sol.y[-1], [1.0, -2.0])
    assert sol.t[-1] == 3.0


def test_exponential_growth_within_tolerance():
    sol = dopri5(lambda t, y: y, 0.0, [1.0], 1.0, rtol=1e-9, atol=1e-12)
    assert abs(sol.y[-1, 0] - np.e) <= 5e-9 * np.e


def test_dense_output_matches_closed_form():
    # harmonic oscillator x = cos t
    grid = np.linspace(0, 2 * np.pi, 37)
    sol = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], 2 * np.pi, 1e-10, 1e-12, t_eval=grid)
    np.testing.assert_array_equal(sol.t, grid)
    np.testing.assert_allclose(sol.y[:, 0], np.cos(grid), atol=1e-8)


def test_error_shrinks_with_tolerance():
    errs, steps = [], []
    for tol in (1e-6, 1e-8, 1e-10):
        sol = dopri5(lambda t, y: y, 0.0, [1.0], 1.0, rtol=tol, atol=tol * 1e-3)
        errs.append(abs(sol.y[-1, 0] - np.e))
        steps.append(sol.n_steps)
    assert errs[0] > errs[1] > errs[2]
    assert steps[0] < steps[1] < steps[2]


def test_step_size_underflow_near_blowup():
    # y' = y^2, y(0) = 1 escapes at t = 1
    with pytest.raises(StepSizeUnderflowError) as info:
        dopri5(lambda t, y: y**2, 0.0, [1.0], 2.0)
    assert 0.99 < info.value.t <= 1.0


def test_rejects_empty_interval():
    with pytest.raises(InvalidHorizonError):
        dopri5(lambda t, y: y, 1.0, [1.0], 1.0)


def test_matches_reference_solver_on_fig2():
    sys_ = fig2_nonlinear()
    x0 = np.array([1.0, 1.2])
    traj = simulate(sys_, x0, None, 0.0, 3.0)
    ref = rk_reference(lambda t, x: sys_.vector_field(x), 0.0, x0, 3.0)
    np.testing.assert_allclose(traj.final_state, ref.y[:, -1], atol=1e-8)


def test_min_energy_law_hits_target_and_energy():
    law = steer(linearize(fig1_linear(), [0, 0]), [0.0, 0.0], 0.0, [1.0, 0.5], np.pi)
    traj = simulate(fig1_linear(), [0.0, 0.0], law, 0.0, np.pi)
    np.testing.assert_allclose(traj.final_state, [1.0, 0.5], atol=1e-8)
    assert traj.energy[-1] == pytest.approx(law.energy, rel=1e-8)
    assert np.all(np.diff(traj.energy) >= 0)
    assert len(traj) >= 200 and traj.times[0] == 0.0 and traj.times[-1] == np.pi


def test_simulate_linear_model_directly():
    m = LinearModel([[0.0]], [[1.0]], f=[2.0])
    traj = simulate(m, [0.0], None, 0.0, 1.5)
    assert traj.final_state[0] == pytest.approx(3.0, rel=1e-12)
    np.testing.assert_array_equal(traj.inputs, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3.0))
def test_linear_steering_terminal_state(xf1, xf2, tf):
    m = linearize(fig1_linear(), [0, 0])
    law = steer(m, [0.3, -0.1], 0.0, [xf1, xf2], tf)
    traj = simulate(fig1_linear(), [0.3, -0.1], law, 0.0, tf)
    np.testing.assert_allclose(traj.final_state, [xf1, xf2], atol=1e-6)


# --- stitching --------------------------------------------------------------


def test_concatenate_offsets_energy_and_drops_duplicates():
    m = LinearModel([[0.0]], [[1.0]])
    a = simulate(m, [0.0], steer(m, [0.0], 0.0, [1.0], 1.0), 0.0, 1.0, n_samples=11)
    b = simulate(m, [1.0], steer(m, [1.0], 1.0, [3.0], 2.0), 1.0, 2.0, n_samples=11)
    joined = concatenate([a, b])
    assert len(joined) == 21
    assert np.all(np.diff(joined.times) > 0)
    assert joined.energy[-1] == pytest.approx(1.0 + 4.0, rel=1e-9)
    assert [h[0] for h in joined.handoffs] == [1.0, 2.0]


def test_replaying_empty_plan():
    plan = Plan(np.array([1.0, 2.0]), 0.5, [], "reached")
    traj = simulate_plan(fig2_nonlinear(), plan)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.final_state, [1.0, 2.0])
    assert traj.final_time == 0.5
