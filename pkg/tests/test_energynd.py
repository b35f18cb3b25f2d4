import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from freedisc.energy1d import f_eps_1d
from freedisc.energynd import (Field2D, StencilQuadrature, f_eps_nd, f_eps_vis, f_eps_xi,
                               l1_distance, mollifier_defect, mollify, random_block_field,
                               slice_field)
from freedisc.errors import DomainError, UnsupportedError
from freedisc.families import PhiEpsFamily
from freedisc.kernels import Kernel, c_pn, j_alpha
from freedisc.limit import disk_field

ARCTAN = PhiEpsFamily.arctan_ms()
K1 = Kernel.indicator(1.0, weight=1.0)


def box_field(n=97, half=1.5):
    return Field2D.from_function(
        lambda x, y: np.where((np.abs(x) <= 0.5 + 1e-12) & (np.abs(y) <= 0.5 + 1e-12), 1.0, 0.0),
        (-half, half, -half, half), (n, n))


def disk(n=129, radius=0.6, half=1.0):
    d = disk_field(radius, half_width=half)
    return Field2D.from_function(d.value, d.rect, (n, n))


@pytest.fixture(scope="module")
def q_coarse():
    return StencilQuadrature.build(K1, 0.25)


def test_constant_field_zero(q_coarse):
    u = Field2D((0.0, 0.0), (0.1, 0.1), np.full((20, 20), 2.5))
    assert f_eps_nd(u, ARCTAN, K1, 0.1, q_coarse) == 0.0
    assert f_eps_xi(u, ARCTAN, 0.1, (1.0, 2.0)) == 0.0
    assert f_eps_vis(u, ARCTAN, K1, 0.1, (0.0, 1.9, 0.0, 1.9), q_coarse) == 0.0


def test_box_direction_e1_is_row_count_times_1d_value():
    u = box_field()
    eps = 0.25  # eight grid cells, so shifted reads hit nodes exactly
    rows = 33   # node rows with |y| <= 1/2 at spacing 1/32
    expected = rows / 32.0 * 2.0 * math.atan(1.0 / eps)
    assert f_eps_xi(u, ARCTAN, eps, (1.0, 0.0)) == pytest.approx(expected, rel=1e-13)


def test_terms_sum_to_total(q_coarse):
    u = disk()
    total, per = f_eps_nd(u, ARCTAN, K1, 0.1, q_coarse, terms=True)
    assert math.fsum(w * v for w, v in zip(q_coarse.weights, per)) == pytest.approx(total, rel=1e-12)
    for xi, v in list(zip(q_coarse.offsets, per))[::7]:
        assert f_eps_xi(u, ARCTAN, 0.1, xi) == pytest.approx(v, rel=1e-12)


def test_stencil_quadrature_mass():
    k = Kernel.indicator(1.0, weight=1.0)
    exact = 2 * math.pi / 3
    errs = [abs(StencilQuadrature.build(k, h).total_weight - exact) for h in (1 / 8, 1 / 32, 1 / 128)]
    # lattice sums over the disk lose at most O(h) at the boundary circle
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] < 0.5 * (1 / 32) and errs[2] < 0.5 * (1 / 128)
    q = StencilQuadrature.build(k, 1.0 / 32)
    assert q.max_norm <= 1.0 + 1e-12
    q1 = StencilQuadrature.build(Kernel.indicator(1.0, n=1), 0.125)
    assert q1.offsets.shape == (16, 1)
    assert q1.total_weight == pytest.approx(2.0)


def test_stencil_validation():
    with pytest.raises(DomainError):
        StencilQuadrature.build(K1, -1.0)
    with pytest.raises(DomainError):
        StencilQuadrature(1.0, np.zeros((0, 2)), np.zeros(0))


def test_one_dimensional_route():
    from freedisc.energy1d import heaviside
    k = Kernel.indicator(1.0, n=1)
    q = StencilQuadrature.build(k, 0.25)
    v = f_eps_nd(heaviside(), ARCTAN, k, 0.1, q)
    expected = math.fsum(w * math.atan(1.0 / (0.1 * abs(x[0]))) for x, w in zip(q.offsets, q.weights))
    assert v == pytest.approx(expected, rel=1e-12)


def test_affine_patch_bulk_density():
    # u = a * x clamped far outside a central window; sample the density well inside
    a = 0.8
    k = Kernel.indicator(1.0, weight=2.0)
    q = StencilQuadrature.build(k, 1.0 / 16)
    fam = PhiEpsFamily.power(2.0)
    u = Field2D.from_function(lambda x, y: a * np.clip(x, -1.0, 1.0) * (np.abs(y) <= 1.0 + 1e-12),
                              (-2.0, 2.0, -2.0, 2.0), (129, 129))
    eps = 0.05
    box = (-0.5, 0.5, -0.5, 0.5)
    inner = f_eps_vis(u, fam, k, eps, box, q)
    # differences of an affine field are exact, so count the admissible pairs per offset
    xs = np.linspace(-2.0, 2.0, 129)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    inside = lambda X, Y: (np.abs(X) <= 0.5 + 1e-12) & (np.abs(Y) <= 0.5 + 1e-12)
    cell = (xs[1] - xs[0]) ** 2
    expected = math.fsum(
        w * (a * x[0] / math.hypot(*x)) ** 2 * cell
        * np.count_nonzero(inside(X, Y) & inside(X + eps * x[0], Y + eps * x[1]))
        for x, w in zip(q.offsets, q.weights))
    assert inner == pytest.approx(expected, rel=1e-12)
    density = math.fsum(w * (a * x[0] / math.hypot(*x)) ** 2 for x, w in zip(q.offsets, q.weights))
    # the stencil approximates c_{2,2} j_4 a^2
    assert density == pytest.approx(c_pn(2.0, 2) * j_alpha(k, 4.0) * a * a, rel=3e-2)


def test_vis_full_window_matches_nd(q_coarse):
    u = disk(n=81, radius=0.5, half=1.0)
    eps = 0.1
    big = (-2.0, 2.0, -2.0, 2.0)
    assert f_eps_vis(u, ARCTAN, K1, eps, big, q_coarse) == pytest.approx(
        f_eps_nd(u, ARCTAN, K1, eps, q_coarse), rel=1e-10)
    tight = (-0.5, 0.5, -0.5, 0.5)
    assert f_eps_vis(u, ARCTAN, K1, eps, tight, q_coarse) < f_eps_nd(u, ARCTAN, K1, eps, q_coarse)


def test_vis_errors(q_coarse):
    u = disk(n=33)
    with pytest.raises(UnsupportedError):
        f_eps_vis(u, ARCTAN, K1, 0.1, "disk", q_coarse)
    with pytest.raises(DomainError):
        f_eps_vis(u, ARCTAN, K1, 0.1, (1.0, 0.0, 0.0, 1.0), q_coarse)


def test_whole_plane_needs_constant_border():
    u = Field2D.from_function(lambda x, y: x, (0.0, 1.0, 0.0, 1.0), (9, 9))
    with pytest.raises(DomainError):
        f_eps_xi(u, ARCTAN, 0.1, (1.0, 0.0))
    with pytest.raises(DomainError):
        f_eps_xi(disk(n=33), ARCTAN, 0.1, (0.0, 0.0))


def test_slices_of_linear_field():
    u = Field2D.from_function(lambda x, y: x, (-2.0, 2.0, -2.0, 2.0), (17, 17))
    s = slice_field(u, (1.0, 0.0), 0.0)
    t = np.linspace(-1.5, 1.5, 7)
    np.testing.assert_allclose(s(t), t, atol=1e-14)
    s = slice_field(u, (0.0, 1.0), 0.7)
    np.testing.assert_allclose(s(t), 0.7, atol=1e-14)


def test_slice_missing_rectangle_is_constant():
    u = disk(n=33)
    s = slice_field(u, (1.0, 1.0), 10.0)
    assert f_eps_1d(s, ARCTAN, 0.1) == 0.0
    # a line that only grazes a corner
    s = slice_field(u, (1.0, 1.0), math.sqrt(2.0))
    assert f_eps_1d(s, ARCTAN, 0.1) == 0.0


def _fubini_gap(n, xi):
    u = disk(n=n)
    eps = 0.125
    lhs = f_eps_xi(u, ARCTAN, eps, xi)
    ys = np.linspace(-1.5, 1.5, 601)
    vals = [f_eps_1d(slice_field(u, xi, y), ARCTAN, eps * math.hypot(*xi)) for y in ys]
    return abs(trapezoid(vals, ys) / lhs - 1.0)


@pytest.mark.parametrize("xi", [(1.0, 0.0), (0.6, 0.8)])
def test_fubini_slicing_converges(xi):
    # node-sum energy and slice integral are two first-order discretizations
    coarse, fine = _fubini_gap(65, xi), _fubini_gap(129, xi)
    assert fine < 0.06
    assert fine < 0.7 * coarse


def test_mollify_constant_and_sup_norm(q_coarse):
    u = Field2D((0.0, 0.0), (0.1, 0.1), np.full((12, 12), -1.5))
    np.testing.assert_allclose(mollify(u, K1, 0.2, q_coarse).samples, -1.5, rtol=0, atol=1e-15)
    rng = np.random.default_rng(3)
    v = random_block_field(rng)
    m = mollify(v, K1, 0.1, q_coarse)
    assert np.max(np.abs(m.samples)) <= np.max(np.abs(v.samples)) + 1e-15


def test_mollify_needs_compact_kernel():
    with pytest.raises(UnsupportedError):
        mollify(disk(n=17), Kernel.gaussian(), 0.1)


def test_mollifier_bound_random_fields(q_coarse):
    rng = np.random.default_rng(11)
    H, K = 0.5, 0.0626
    for _ in range(3):
        u = random_block_field(rng)
        for delta in (0.1, 0.05):
            lhs, rhs = mollifier_defect(u, ARCTAN, K1, delta, H, K, q_coarse)
            assert 0 < lhs <= rhs


def test_l1_distance():
    a = Field2D((0.0, 0.0), (0.5, 0.5), np.zeros((3, 3)))
    b = a.with_samples(np.ones((3, 3)))
    assert l1_distance(a, b) == pytest.approx(9 * 0.25)
    with pytest.raises(DomainError):
        l1_distance(a, Field2D((0.0, 0.0), (0.5, 0.5), np.zeros((2, 2))))


def test_random_block_field_shape():
    u = random_block_field(np.random.default_rng(0), nodes=41, step=0.05, blocks=4, border=5)
    assert u.shape == (41, 41)
    assert u.border_constant()
    assert len(np.unique(u.samples)) <= 17


def test_field_io_round_trips(tmp_path):
    u = disk(n=17)
    u = u.with_samples(u.samples * 0.37 - 0.1)
    u.save_csv(str(tmp_path / "f.csv"))
    v = Field2D.load_csv(str(tmp_path / "f.csv"))
    np.testing.assert_array_equal(v.samples, u.samples)
    assert v.origin == u.origin and v.steps == pytest.approx(u.steps, rel=1e-15)
    u.save_pgm(str(tmp_path / "f.pgm"))
    w = Field2D.load_pgm(str(tmp_path / "f.pgm"))
    np.testing.assert_allclose(w.samples, u.samples, atol=(0.37 / 65535))


def test_bilinear_evaluation():
    u = Field2D((0.0, 0.0), (1.0, 1.0), np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert u(0.5, 0.5) == pytest.approx(1.5)
    assert u(-1.0, 5.0) == pytest.approx(1.0)
