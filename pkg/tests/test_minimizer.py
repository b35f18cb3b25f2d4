import math

import numpy as np
import pytest

from freedisc.energy1d import Signal1D
from freedisc.energynd import Field2D, StencilQuadrature
from freedisc.errors import DomainError, UnsupportedError
from freedisc.families import PhiEpsFamily, PhiSpec, PsiSpec
from freedisc.kernels import Kernel
from freedisc.minimizer import (DenoiseProblem, discrete_energy, eps_continuation, gradient,
                                solve)

ARCTAN = PhiEpsFamily.arctan_ms()
K1 = Kernel.indicator(1.0, n=1)


def step_signal(n=128, noise=0.0, seed=0):
    x = np.linspace(0.0, 1.0, n)
    g = np.where(x >= 0.4, 1.0, 0.0)
    g = g + noise * np.random.default_rng(seed).uniform(-1, 1, n)
    return Signal1D(0.0, x[1] - x[0], g)


def problem(data, kappa=50.0, eps=0.05, fam=ARCTAN, kernel=K1):
    return DenoiseProblem(data, fam, kernel, eps, kappa)


def relative_fd_error(p, u, rng, points=20, h=1e-6):
    g = gradient(p, u)
    errs = []
    for idx in rng.choice(u.size, size=min(points, u.size), replace=False):
        e = np.zeros(u.size)
        e[idx] = h
        e = e.reshape(u.shape)
        fd = (discrete_energy(p, u + e) - discrete_energy(p, u - e)) / (2 * h)
        errs.append(abs(fd - g.flat[idx]))
    return max(errs) / max(float(np.max(np.abs(g))), 1e-300)


def test_constant_data_zero_energy_and_gradient():
    d = Signal1D(0.0, 0.1, np.full(12, 0.7))
    p = problem(d)
    assert discrete_energy(p, d.samples) == 0.0
    np.testing.assert_array_equal(gradient(p, d.samples), 0.0)


def test_two_sample_toy_by_hand():
    d = Signal1D(0.0, 1.0, np.array([0.2, 1.1]))
    q = StencilQuadrature.build(K1, 1.0)  # offsets +-1 with unit weights
    p = DenoiseProblem(d, ARCTAN, K1, 1.0, 3.0, q)
    u = np.array([0.5, -0.25])
    diff = abs(u[1] - u[0])
    hand = 2 * math.atan(diff ** 2) + 3.0 * ((0.5 - 0.2) ** 2 + (-0.25 - 1.1) ** 2)
    assert discrete_energy(p, u) == pytest.approx(hand, rel=1e-14)


def test_fidelity_linear_in_kappa():
    d = step_signal(32, 0.1)
    u = d.samples[::-1].copy()
    f1 = problem(d, kappa=1.0).fidelity(u)
    f7 = problem(d, kappa=7.0).fidelity(u)
    assert f7 == pytest.approx(7.0 * f1, rel=1e-14)
    g1 = gradient(problem(d, kappa=1.0), u) - gradient(problem(d, kappa=0.5), u)
    g7 = gradient(problem(d, kappa=7.0), u) - gradient(problem(d, kappa=0.5), u)
    np.testing.assert_allclose(g7, 13.0 * g1, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("fam", [ARCTAN, PhiEpsFamily.rational32(), PhiEpsFamily.power(2.0)])
def test_gradient_finite_differences_1d(fam):
    rng = np.random.default_rng(1)
    d = step_signal(64, 0.1)
    p = problem(d, fam=fam)
    u = d.samples + 0.05 * rng.standard_normal(64)
    assert relative_fd_error(p, u, rng) < 1e-6


def test_gradient_finite_differences_2d():
    rng = np.random.default_rng(2)
    g = rng.uniform(-1, 1, (16, 16))
    d = Field2D((0.0, 0.0), (1 / 15, 1 / 15), g)
    k = Kernel.indicator(1.0)
    p = DenoiseProblem(d, ARCTAN, k, 0.1, 10.0, StencilQuadrature.build(k, 0.5))
    u = g + 0.1 * rng.standard_normal(g.shape)
    assert relative_fd_error(p, u, rng) < 1e-6


def test_large_kappa_keeps_data():
    d = step_signal(64, 0.1)
    st = solve(problem(d, kappa=1e6), max_iters=200)
    assert np.max(np.abs(st.u - d.samples)) < 1e-3


def test_clean_step_keeps_jump():
    d = step_signal(128)
    st = solve(problem(d, kappa=5.0), max_iters=300)
    true_jump = int(np.argmax(np.diff(d.samples)))
    assert abs(int(np.argmax(np.abs(np.diff(st.u)))) - true_jump) <= 1
    assert st.energies[-1] <= discrete_energy(problem(d, kappa=5.0), d.samples)


def test_noisy_step_monotone_history():
    d = step_signal(128, 0.1, seed=4)
    p = problem(d)
    st = solve(p, max_iters=400)
    assert all(b <= a for a, b in zip(st.energies, st.energies[1:]))
    assert st.status in ("converged", "max_iters")
    assert abs(int(np.argmax(np.abs(np.diff(st.u)))) - 50) <= 1


def test_converged_status():
    d = step_signal(32, 0.05)
    st = solve(problem(d, kappa=100.0), max_iters=5000, grad_tol=1e-6)
    assert st.status == "converged"
    assert st.grad_norms[-1] <= 1e-6


def test_continuation_single_stage_equals_solve():
    d = step_signal(64, 0.1)
    p = problem(d)
    a = solve(p, max_iters=100)
    b = eps_continuation(p, [p.eps], max_iters=100)
    np.testing.assert_array_equal(a.u, b.u)
    assert b.records["l1_steps"] == []


def test_continuation_records():
    # 512 samples keep every eps of the schedule above the grid step
    d = step_signal(512, 0.1, seed=5)
    p = problem(d, eps=0.2)
    schedule = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002]
    st = eps_continuation(p, schedule, max_iters=300)
    rec = st.records
    assert rec["eps"] == schedule
    steps = rec["l1_steps"]
    assert all(b < a for a, b in zip(steps, steps[1:]))
    assert max(rec["energy"]) < 10.0
    assert rec["bound"] == pytest.approx(max(e + s for e, s in zip(rec["energy"], rec["sup_norm"])))


def test_continuation_validation():
    p = problem(step_signal(16))
    with pytest.raises(DomainError):
        eps_continuation(p, [0.1, 0.2])
    with pytest.raises(DomainError):
        eps_continuation(p, [])


def test_problem_validation():
    d = step_signal(16)
    with pytest.raises(DomainError):
        problem(d, kappa=0.0)
    with pytest.raises(UnsupportedError):
        problem(d, fam=PhiEpsFamily.constructed(PhiSpec.power(2.0), PsiSpec.power(0.5)))
    with pytest.raises(DomainError):
        problem(d, kernel=Kernel.indicator(1.0, n=2))
    with pytest.raises(DomainError):
        discrete_energy(problem(d), np.zeros(3))
