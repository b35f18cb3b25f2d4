import math

import numpy as np
import pytest

from freedisc.errors import DomainError, UnsupportedError
from freedisc.families import PhiEpsFamily, PhiSpec, PsiSpec
from freedisc.kernels import Kernel, c_pn, j_alpha
from freedisc.limit import (Sbv1D, affine_field, disk_field, halfplane_field, limit_constants,
                            limit_energy_1d, limit_energy_2d, target_limit, total_variation_1d,
                            zero_field)

from oracles import polygon_perimeter

HALF_PI = PsiSpec.constant(math.pi / 2)


def test_single_jump_ms():
    u = Sbv1D.build((-1.0, 1.0), (0.0,), {0.0: 1.0})
    assert limit_energy_1d(u, PhiSpec.power(2.0), HALF_PI) == pytest.approx(math.pi / 2)


def test_ramp_bulk():
    u = Sbv1D.build((0.0, 3.0), (0.5,))
    assert limit_energy_1d(u, PhiSpec.power(2.0), HALF_PI) == pytest.approx(3.0 * 0.25)


def test_mixed_example():
    u = Sbv1D.build((0.0, 1.0), (2.0,), {0.5: 4.0})
    assert limit_energy_1d(u, PhiSpec.power(2.0), PsiSpec.power(0.5)) == pytest.approx(6.0, abs=1e-14)


def test_infinite_propagates():
    u = Sbv1D.build((0.0, 1.0), (1.0,), {0.5: 1.0})
    assert math.isinf(limit_energy_1d(u, PhiSpec.power(2.0), PsiSpec.infinite()))
    assert math.isinf(limit_energy_1d(u, PhiSpec.infinite(), PsiSpec.power(0.5)))


def test_total_variation():
    ramp = Sbv1D.build((0.0, 1.0), (1.0,))
    assert total_variation_1d(ramp) == 1.0
    both = Sbv1D.build((0.0, 1.0), (1.0,), {0.5: 1.0})
    assert total_variation_1d(both) == 2.0
    assert total_variation_1d(both) == limit_energy_1d(both, PhiSpec.power(1.0), PsiSpec.linear(1.0))


def test_sbv_evaluation_and_jumps():
    u = Sbv1D.build((0.0, 1.0, 2.0), (1.0, 0.0), {0.5: 2.0, 1.5: -1.0}, anchor=1.0)
    assert u(0.25) == pytest.approx(1.25)
    assert u(0.75) == pytest.approx(3.75)
    assert u(1.75) == pytest.approx(3.0)
    assert u(-5.0) == 1.0 and u(9.0) == pytest.approx(3.0)
    np.testing.assert_allclose(u.jump_sizes, [2.0, -1.0])


def test_sbv_rejects_inconsistent_left_limit():
    with pytest.raises(DomainError):
        Sbv1D((0.0, 1.0), (0.0,), ((0.5, 3.0, 4.0),), 0.0)


def test_sbv_text_round_trip():
    u = Sbv1D.build((0.0, 0.4, 1.0), (1.5, -0.5), {0.2: 0.3, 0.7: -1.0}, anchor=0.25)
    v = Sbv1D.from_text(u.to_text())
    assert v == u
    x = np.linspace(-0.5, 1.5, 41)
    np.testing.assert_array_equal(u(x), v(x))


def test_sbv_text_errors():
    with pytest.raises(DomainError):
        Sbv1D.from_text("piece 0 1 1\npiece 2 3 0\n")
    with pytest.raises(DomainError):
        Sbv1D.from_text("jump 0.5 0 1\n")
    with pytest.raises(DomainError):
        Sbv1D.from_text("piece 0 one 1\n")


def test_disk_jump_term():
    u = disk_field()
    v = limit_energy_2d(u, PhiSpec.power(2.0), HALF_PI)
    assert v == pytest.approx(math.pi / 2 * polygon_perimeter(1.0, 64), rel=1e-12)
    assert v == pytest.approx(math.pi ** 2, rel=1e-3)


def test_zero_and_affine_fields():
    assert limit_energy_2d(zero_field(), PhiSpec.power(2.0), HALF_PI) == 0.0
    assert limit_energy_2d(affine_field(3.0), PhiSpec.power(2.0), HALF_PI) == pytest.approx(9.0, rel=1e-12)


def test_rotation_invariance():
    f = halfplane_field(2.0)
    g = f.rotated90()
    for u in (f, disk_field(0.7, 1.5)):
        a = limit_energy_2d(u, PhiSpec.power(2.0), PsiSpec.power(0.5))
        b = limit_energy_2d(u.rotated90(), PhiSpec.power(2.0), PsiSpec.power(0.5))
        assert a == pytest.approx(b, rel=1e-12)
    assert g.curve_length == pytest.approx(2.0)


def test_limit_constants_weightings():
    k = Kernel.indicator(1.0, weight=1.0)
    bulk, jump = limit_constants(PhiEpsFamily.arctan_ms(), k)
    assert bulk == pytest.approx(2 * math.pi / 3, rel=1e-12)
    assert jump == pytest.approx(4.0 / 3.0, rel=1e-12)
    _, uniform = limit_constants(PhiEpsFamily.arctan_ms(), k, "uniform")
    assert uniform == pytest.approx(2 * math.pi / 3, rel=1e-12)
    with pytest.raises(UnsupportedError):
        limit_constants(PhiEpsFamily.arctan_ms(), k, "bogus")


def test_one_dimensional_ms_target():
    # kernel weight |xi| makes the radial factor j_2
    k = Kernel.indicator(1.0, weight=1.0, n=1)
    h = 2.0
    u = Sbv1D.build((0.0, 2.0), (0.5,), {1.0: h})
    lam = c_pn(2.0, 1) * j_alpha(k, 2.0)
    mu = math.pi / 2 * c_pn(0.0, 1) * j_alpha(k, 2.0)
    expected = lam * 2.0 * 0.25 + mu
    assert target_limit(PhiEpsFamily.arctan_ms(), k, u) == pytest.approx(expected, rel=1e-12)


def test_power_family_jump_is_infinite():
    k = Kernel.indicator(1.0, n=1)
    u = Sbv1D.build((0.0, 1.0), (0.0,), {0.5: 1.0})
    assert math.isinf(target_limit(PhiEpsFamily.power(2.0), k, u))


def test_root_family_target():
    # kernel weight |xi|**(1/p) with p = 2 gives the radial factor j_1.5
    k = Kernel.indicator(1.0, n=1, weight=0.5)
    u = Sbv1D.build((0.0, 1.0), (0.0,), {0.5: 1.0})
    assert target_limit(PhiEpsFamily.root(2.0), k, u) == pytest.approx(4.0 / 3.0, rel=1e-10)
    slope = Sbv1D.build((0.0, 1.0), (1.0,))
    assert math.isinf(target_limit(PhiEpsFamily.root(2.0), k, slope))


def test_disk_target_projected():
    k = Kernel.indicator(1.0, weight=1.0)
    v = target_limit(PhiEpsFamily.arctan_ms(), k, disk_field())
    assert v == pytest.approx(math.pi / 2 * 4.0 / 3.0 * polygon_perimeter(1.0, 64), rel=1e-10)
    assert v == pytest.approx(4 * math.pi ** 2 / 3, rel=1e-3)


def test_affine_target_bulk():
    k = Kernel.indicator(1.0, weight=2.0)
    a = 1.5
    v = target_limit(PhiEpsFamily.power(2.0), k, affine_field(a))
    assert v == pytest.approx(c_pn(2.0, 2) * j_alpha(k, 4.0) * a * a, rel=1e-10)


def test_target_dimension_mismatch():
    with pytest.raises(DomainError):
        target_limit(PhiEpsFamily.arctan_ms(), Kernel.indicator(1.0, n=2),
                     Sbv1D.build((0.0, 1.0), (0.0,)))
    with pytest.raises(UnsupportedError):
        target_limit(PhiEpsFamily.arctan_ms(), Kernel.indicator(1.0, n=2), "disk")
