import numpy as np
import pytest
from hypothesis import given, strategies as st

from randmil.grid import TemporalGrid, dyadic_grid, uniform_grid
from randmil.model import custom_problem, gbm_exact, gbm_problem, linear_multinoise_problem, paper_example_problem, zero_problem
from randmil.noise import StepNoise, WienerPath, chen_combine, iterated_integrals, sample_grid_noise
from randmil.quadrature import randomized_riemann
from randmil.rng import RngStream
from randmil.scheme import (NonFiniteStateError, SchemeKind, classical_milstein_step, euler_step, integrate,
                            phi_increment, psi_stage, randomized_milstein_step)


def step_noise(tau, h, dw_left, dw_right):
    """Single-path scalar noise assembled by hand."""
    dwl = np.array([[dw_left]])
    dwr = np.array([[dw_right]])
    i2l = iterated_integrals(dwl, np.array([tau * h]))
    i2r = iterated_integrals(dwr, np.array([(1 - tau) * h]))
    dwf, i2f = chen_combine(dwl, i2l, dwr, i2r)
    return StepNoise(np.array([tau]), np.array([tau * h]), dwl, dwr, dwf, i2l, i2r, i2f)


def scalar(drift, diffusion, levy=None):
    return custom_problem(drift, lambda t, x: diffusion(t, x)[..., None], [0.0],
                          levy=None if levy is None else (lambda t, x: levy(t, x)[..., None, None]))


ZERO = lambda t, x: np.zeros_like(x)  # noqa: E731
ONE = lambda t, x: np.ones_like(x)  # noqa: E731
TIME = lambda t, x: np.zeros_like(x) + np.asarray(t)[..., None]  # noqa: E731
IDENT = lambda t, x: x  # noqa: E731
Y0 = np.array([[0.0]])


def test_psi_examples():
    assert psi_stage(scalar(ONE, ZERO, ZERO), 0.0, Y0, 1.0, step_noise(0.5, 1.0, 0.0, 0.0))[0, 0] == 0.5
    y = np.array([[1.3]])
    out = psi_stage(scalar(ZERO, ONE, ZERO), 0.0, y, 1.0, step_noise(0.5, 1.0, 0.2, -0.4))
    assert np.isclose(out[0, 0], 1.5, rtol=1e-15)
    pb = gbm_problem(a=0.7, b=0.3)
    assert np.array_equal(psi_stage(pb, 0.2, y, 0.1, step_noise(0.0, 0.1, 0.0, 0.3)), y)


def test_randomized_step_examples():
    out = randomized_milstein_step(scalar(TIME, ZERO, ZERO), 0.0, Y0, 1.0, step_noise(0.5, 1.0, 0.0, 0.0))
    assert out[0, 0] == 0.5
    pb = scalar(ZERO, IDENT, IDENT)
    y, h = np.array([[1.7]]), 0.25
    nz = step_noise(0.3, h, 0.2, -0.5)
    dw = nz.dw_full[0, 0]
    assert np.isclose(randomized_milstein_step(pb, 0.0, y, h, nz)[0, 0], 1.7 * (1 + dw + 0.5 * (dw * dw - h)))
    zero_noise = step_noise(0.3, h, 0.0, 0.0)
    assert zero_noise.i2_full[0, 0, 0] == -h / 2
    assert np.isclose(randomized_milstein_step(pb, 0.0, y, h, zero_noise)[0, 0], 1.7 * (1 - h / 2))


def test_classical_step_examples():
    assert classical_milstein_step(scalar(TIME, ZERO, ZERO), 0.0, Y0, 1.0, step_noise(0.5, 1.0, 0.0, 0.0))[0, 0] == 0.0
    gbm = gbm_problem(a=0.0, b=1.0)
    nz = step_noise(0.5, 0.25, 0.2, 0.3)
    assert np.isclose(classical_milstein_step(gbm, 0.0, np.array([[1.0]]), 0.25, nz)[0, 0], 1.5, rtol=1e-14)


@given(st.floats(-2, 2), st.floats(0.01, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_constant_drift_schemes_agree(c, h, tau, a, b):
    pb = custom_problem(lambda t, x: np.full_like(x, c), lambda t, x: (0.5 * x)[..., None], [1.0],
                        levy=lambda t, x: (0.25 * x)[..., None, None])
    nz = step_noise(tau, h, a * np.sqrt(h), b * np.sqrt(h))
    y = np.array([[1.2]])
    assert np.array_equal(randomized_milstein_step(pb, 0.1, y, h, nz), classical_milstein_step(pb, 0.1, y, h, nz))


def test_euler_examples():
    nz = step_noise(0.5, 0.5, 0.05, 0.05)
    y = np.array([[1.0]])
    assert np.array_equal(euler_step(scalar(ZERO, ZERO, ZERO), 0.0, y, 0.5, nz), y)
    assert euler_step(scalar(lambda t, x: 2 * x, ZERO, ZERO), 0.0, y, 0.5, nz)[0, 0] == 2.0
    assert np.isclose(euler_step(scalar(ZERO, ONE, ZERO), 0.0, y, 0.5, nz)[0, 0], 1.1, rtol=1e-15)


def test_phi_identity_batch(rng):
    pb = paper_example_problem()
    P = 1000
    h = 0.05
    y = rng.normal(1, 0.5, (P, 1))
    tau = rng.uniform(0, 1, P)
    dwl = rng.normal(0, 1, (P, 1)) * np.sqrt(tau * h)[:, None]
    dwr = rng.normal(0, 1, (P, 1)) * np.sqrt((1 - tau) * h)[:, None]
    i2l, i2r = iterated_integrals(dwl, tau * h), iterated_integrals(dwr, (1 - tau) * h)
    dwf, i2f = chen_combine(dwl, i2l, dwr, i2r)
    nz = StepNoise(tau, 0.3 + tau * h, dwl, dwr, dwf, i2l, i2r, i2f)
    assert np.array_equal(y + phi_increment(pb, 0.3, y, h, nz), randomized_milstein_step(pb, 0.3, y, h, nz))
    zero = zero_problem(x0=0.0)
    assert np.all(phi_increment(zero, 0.3, y, h, nz) == 0)


@given(st.floats(0, 1), st.floats(0.01, 1), st.floats(-2, 2), st.floats(0, 1))
def test_phi_deterministic_form(t, h, y, tau):
    f = lambda s, x: np.sin(3 * np.asarray(s))[..., None] + x**2  # noqa: E731
    pb = custom_problem(f, lambda s, x: np.zeros(x.shape + (1,)), [0.0], levy=lambda s, x: np.zeros(x.shape + (1, 1)))
    nz = step_noise(tau, h, 0.0, 0.0)
    nz = StepNoise(nz.tau, np.array([t + tau * h]), *[getattr(nz, k) for k in
                                                      ("dw_left", "dw_right", "dw_full", "i2_left", "i2_right", "i2_full")])
    yy = np.array([[y]])
    expected = h * f(t + tau * h, yy + tau * h * f(t, yy))
    assert np.allclose(phi_increment(pb, t, yy, h, nz), expected, rtol=1e-14, atol=1e-300)


def test_levy_index_pairing_hand_expanded():
    """sum_{r1,r2} g^{r1,r2} I_(r2,r1) with deliberately asymmetric inputs."""
    A = np.array([[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]])  # A[i, r1, r2]
    pb = custom_problem(lambda t, x: np.zeros_like(x), lambda t, x: np.zeros(x.shape + (2,)), [0.0, 0.0],
                        m=2, levy=lambda t, x: np.broadcast_to(A, x.shape[:-1] + A.shape), commutative=True)
    I = np.array([[[10.0, 20.0], [30.0, 40.0]]])  # I[., r1, r2] = I_(r1, r2)
    z = np.zeros((1, 2))
    nz = StepNoise(np.array([1.0]), np.array([1.0]), z, z, z, I * 0, I * 0, I)
    out = classical_milstein_step(pb, 0.0, np.zeros((1, 2)), 1.0, nz)[0]
    i1 = 1 * 10 + 2 * 30 + 3 * 20 + 4 * 40   # g^{1,1}I11 + g^{1,2}I21 + g^{2,1}I12 + g^{2,2}I22
    i2 = 5 * 10 + 6 * 30 + 7 * 20 + 8 * 40
    assert out.tolist() == [i1, i2]
    assert np.array_equal(randomized_milstein_step(pb, 0.0, np.zeros((1, 2)), 1.0, nz)[0], out)


def test_rejects_noncommutative():
    pb = custom_problem(lambda t, x: x, lambda t, x: np.stack([x, 2 * x], -1), [1.0], m=2, commutative=False)
    path = WienerPath(RngStream(0, 2, "w"), 1.0, 2)
    for kind in (SchemeKind.CLASSICAL_MILSTEIN, SchemeKind.RANDOMIZED_MILSTEIN):
        with pytest.raises(ValueError, match="commutative"):
            integrate(pb, uniform_grid(1, 4), kind, path, RngStream(0, 2, "tau"))


def test_scheme_kind_parse():
    assert SchemeKind.parse("EM") is SchemeKind.EULER_MARUYAMA
    assert SchemeKind.parse("randomized-milstein") is SchemeKind.RANDOMIZED_MILSTEIN
    with pytest.raises(ValueError):
        SchemeKind.parse("rk4")


# --- integrate ------------------------------------------------------------------

def run(pb, grid, kind, P=8, seed=0):
    path = WienerPath(RngStream(seed, P, "wiener"), pb.T, pb.m)
    return integrate(pb, grid, kind, path, RngStream(seed, P, "tau"))


@pytest.mark.parametrize("kind", list(SchemeKind))
def test_zero_problem_constant(kind):
    traj = run(zero_problem(x0=[1.5, -2.0], m=2), TemporalGrid([0, 0.1, 0.5, 1.0]), kind)
    assert traj.states.shape == (8, 4, 2)
    assert np.all(traj.states == [1.5, -2.0])


@pytest.mark.parametrize("kind", list(SchemeKind))
def test_one_step_grid_matches_step(kind):
    pb = paper_example_problem()
    traj = run(pb, uniform_grid(1.0, 1), kind)
    nz = traj.noise.step(0)
    step = {SchemeKind.EULER_MARUYAMA: euler_step, SchemeKind.CLASSICAL_MILSTEIN: classical_milstein_step,
            SchemeKind.RANDOMIZED_MILSTEIN: randomized_milstein_step}[kind]
    y0 = np.broadcast_to(pb.initial_state, (8, 1))
    assert np.array_equal(traj.states[:, 1], step(pb, 0.0, y0, 1.0, nz))
    assert np.all(traj.states[:, 0] == pb.initial_state)


def test_gbm_terminal_error_small():
    pb = gbm_problem(a=0.05, b=0.2)
    grid = dyadic_grid(1.0, 10)
    path = WienerPath(RngStream(0, 1000, "wiener"), 1.0, 1)
    traj = integrate(pb, grid, "randomized_milstein", path, RngStream(0, 1000, "tau"))
    exact = gbm_exact(1.0, 0.05, 0.2, 1.0, path.query(1.0)[:, 0])
    err = np.abs(traj.terminal[:, 0] - exact)
    assert np.mean(err < 1e-2) >= 0.95


def test_deterministic_and_coupled():
    pb = paper_example_problem()
    a = run(pb, dyadic_grid(1, 5), "randomized_milstein", seed=3)
    b = run(pb, dyadic_grid(1, 5), "randomized_milstein", seed=3)
    assert np.array_equal(a.states, b.states)
    path = WienerPath(RngStream(3, 8, "wiener"), 1.0, 1)
    coarse = sample_grid_noise(path, dyadic_grid(1, 3), RngStream(3, 8, "t3"))
    fine = sample_grid_noise(path, dyadic_grid(1, 6), RngStream(3, 8, "t6"))
    assert np.array_equal(fine.w[:, ::8], coarse.w)


def test_degenerate_case_is_randomized_riemann_sum():
    c, gamma = 0.3, 0.4
    f = lambda t, x: np.zeros_like(x) + np.abs(np.asarray(t)[..., None] - c) ** gamma  # noqa: E731
    pb = custom_problem(f, lambda t, x: np.zeros(x.shape + (1,)), [0.0], levy=lambda t, x: np.zeros(x.shape + (1, 1)))
    grid = TemporalGrid(np.concatenate([[0.0], np.sort(np.random.default_rng(1).uniform(0, 1, 30)), [1.0]]))
    traj = run(pb, grid, "randomized_milstein", P=16)
    taus = traj.noise.tau.T
    q = randomized_riemann(lambda t: np.abs(t - c) ** gamma, grid, taus)
    assert np.array_equal(traj.states[:, 1:, 0], q)


def test_non_finite_state_reports_step():
    pb = custom_problem(lambda t, x: x * x, lambda t, x: np.zeros(x.shape + (1,)), [10.0],
                        levy=lambda t, x: np.zeros(x.shape + (1, 1)))
    with pytest.raises(NonFiniteStateError) as info:
        run(pb, uniform_grid(1.0, 16), "euler_maruyama")
    assert info.value.step > 1
    assert info.value.scheme == "euler_maruyama"


def test_integrate_input_checks():
    pb = gbm_problem()
    with pytest.raises(ValueError, match="horizon"):
        run(pb, uniform_grid(2.0, 4), "euler_maruyama")
    with pytest.raises(ValueError, match="tau stream"):
        integrate(pb, uniform_grid(1.0, 4), "randomized_milstein", WienerPath(RngStream(0, 2, "w")))
    plain = sample_grid_noise(WienerPath(RngStream(0, 2, "w")), uniform_grid(1.0, 4))
    with pytest.raises(ValueError, match="intermediate"):
        integrate(pb, uniform_grid(1.0, 4), "randomized_milstein", noise=plain)
    with pytest.raises(ValueError, match="m=2"):
        integrate(linear_multinoise_problem(), uniform_grid(1.0, 4), "euler", WienerPath(RngStream(0, 2, "w")))
