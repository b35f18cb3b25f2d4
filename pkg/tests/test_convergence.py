"""Disk sweep against the projected jump constant on a finer grid."""

import math

import pytest

from freedisc.cli import richardson
from freedisc.energynd import Field2D, StencilQuadrature, f_eps_nd
from freedisc.families import PhiEpsFamily
from freedisc.kernels import Kernel, c_pn, j_alpha
from freedisc.limit import disk_field, target_limit

from oracles import polygon_perimeter


@pytest.fixture(scope="module")
def disk_sweep():
    k = Kernel.indicator(1.0, weight=1.0)
    fam = PhiEpsFamily.arctan_ms()
    desc = disk_field(half_width=1.25)
    u = Field2D.from_function(desc.value, desc.rect, (512, 512))
    q = StencilQuadrature.build(k)
    eps = [0.4, 0.2, 0.1]
    vals = [f_eps_nd(u, fam, k, e, q) for e in eps]
    return k, fam, desc, eps, vals


def test_disk_values_increase_towards_limit(disk_sweep):
    k, fam, desc, eps, vals = disk_sweep
    target = target_limit(fam, k, desc)
    assert vals[0] < vals[1] < vals[2] < target


def test_disk_extrapolates_to_projected_constant(disk_sweep):
    k, fam, desc, eps, vals = disk_sweep
    target = target_limit(fam, k, desc)
    assert target == pytest.approx(math.pi / 2 * c_pn(1.0, 2) * j_alpha(k, 3.0)
                                   * polygon_perimeter(1.0, 64), rel=1e-10)
    extrap = richardson(eps, vals)
    assert abs(extrap - target) / target < 0.05
    uniform = math.pi / 2 * c_pn(0.0, 2) * j_alpha(k, 3.0) * 2 * math.pi
    assert abs(extrap - uniform) / uniform > 0.25
