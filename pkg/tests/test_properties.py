import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freedisc.energy1d import Signal1D, f_eps_1d
from freedisc.families import PhiEpsFamily, PhiSpec, PsiSpec, eval_phi_eps, eval_scaled_jump
from freedisc.kernels import Kernel, c_pn, j_alpha
from freedisc.limit import Sbv1D, limit_energy_1d, total_variation_1d

CLOSED = [PhiEpsFamily.arctan_ms(), PhiEpsFamily.rational32(), PhiEpsFamily.power(2.0),
          PhiEpsFamily.root(2.0), PhiEpsFamily.linear()]

eps_st = st.floats(1e-4, 2.0)
r_st = st.floats(0.0, 1e3)
fam_st = st.sampled_from(CLOSED)
FAST = settings(max_examples=60, deadline=None)


def np_approx(v, rel=1e-9, abs_=1e-12):
    return pytest.approx(v, rel=rel, abs=abs_)


@FAST
@given(fam_st, eps_st, r_st, r_st)
def test_phi_eps_nonnegative_and_nondecreasing(fam, eps, r1, r2):
    lo, hi = sorted((r1, r2))
    a, b = eval_phi_eps(fam, eps, lo), eval_phi_eps(fam, eps, hi)
    assert a >= 0.0
    assert b >= a * (1 - 1e-14)
    assert eval_phi_eps(fam, eps, 0.0) == 0.0


@FAST
@given(eps_st, r_st)
def test_ms_families_below_bulk_integrand(eps, r):
    for fam in (PhiEpsFamily.arctan_ms(), PhiEpsFamily.rational32()):
        assert eval_phi_eps(fam, eps, r) <= r * r * (1 + 1e-14)


@FAST
@given(eps_st, eps_st, st.floats(1e-3, 1e2))
def test_arctan_decreases_in_eps(e1, e2, r):
    lo, hi = sorted((e1, e2))
    fam = PhiEpsFamily.arctan_ms()
    assert eval_phi_eps(fam, hi, r) <= eval_phi_eps(fam, lo, r) * (1 + 1e-14)


@FAST
@given(eps_st, st.floats(1e-3, 1e2))
def test_arctan_scaled_jump_below_half_pi(eps, r):
    assert eval_scaled_jump(PhiEpsFamily.arctan_ms(), eps, r) <= math.pi / 2


@FAST
@given(st.floats(0.01, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_arctan_midpoint_concave_at_large_r(eps, t1, t2):
    # r -> arctan(eps r^2)/eps is concave beyond its inflection (3 eps^2)^(-1/4)
    r0 = (3 * eps * eps) ** -0.25
    a, b = r0 + t1, r0 + t2
    fam = PhiEpsFamily.arctan_ms()
    mid = eval_phi_eps(fam, eps, 0.5 * (a + b))
    assert mid >= 0.5 * (eval_phi_eps(fam, eps, a) + eval_phi_eps(fam, eps, b)) - 1e-12 * (1 + mid)


@st.composite
def sbv_signals(draw):
    k = draw(st.integers(1, 4))
    cuts = sorted(draw(st.lists(st.floats(0.05, 0.95), min_size=k - 1, max_size=k - 1,
                                unique=True)))
    knots = [0.0] + cuts + [1.0]
    if any(b - a < 1e-3 for a, b in zip(knots, knots[1:])):
        knots = list(np.linspace(0.0, 1.0, k + 1))
    slopes = draw(st.lists(st.floats(-3.0, 3.0), min_size=k, max_size=k))
    inner = [0.5 * (a + b) for a, b in zip(knots, knots[1:])]
    heights = draw(st.lists(st.floats(-2.0, 2.0).filter(lambda h: abs(h) > 1e-3),
                            min_size=0, max_size=len(inner)))
    anchor = draw(st.floats(-1.0, 1.0))
    return Sbv1D.build(tuple(knots), tuple(slopes), dict(zip(inner, heights)), anchor=anchor)


@FAST
@given(sbv_signals())
def test_sbv_text_round_trip(u):
    v = Sbv1D.from_text(u.to_text())
    x = np.linspace(-0.2, 1.2, 57)
    np.testing.assert_allclose(v(x), u(x), rtol=0, atol=1e-12)


@FAST
@given(sbv_signals(), st.floats(-5.0, 5.0), eps_st)
def test_energy_invariant_under_shift_and_sign(u, c, eps):
    eps = min(eps, 0.5)
    fam = PhiEpsFamily.arctan_ms()
    x = np.linspace(-1.0, 2.0, 301)
    base = Signal1D(-1.0, x[1] - x[0], u(x))
    e0 = f_eps_1d(base, fam, eps)
    assert f_eps_1d(base.with_samples(base.samples + c), fam, eps) == np_approx(e0)
    assert f_eps_1d(base.with_samples(-base.samples), fam, eps) == np_approx(e0)


@FAST
@given(sbv_signals())
def test_total_variation_is_linear_limit(u):
    tv = total_variation_1d(u)
    assert tv >= 0.0
    assert limit_energy_1d(u, PhiSpec.power(1.0), PsiSpec.linear(1.0)) == np_approx(tv)


@FAST
@given(sbv_signals(), st.floats(0.1, 10.0))
def test_limit_energy_scales_with_integrands(u, c):
    f, g = PhiSpec.power(2.0), PsiSpec.power(0.5)
    v = limit_energy_1d(u, f, g)
    assert limit_energy_1d(u, f.scaled(c), g.scaled(c)) == np_approx(c * v)


@FAST
@given(st.floats(0.1, 4.0), st.floats(1.0, 5.0), st.floats(0.0, 2.0))
def test_indicator_moments(r0, alpha, w):
    # moments see the radial profile only; the |xi| weight shifts alpha at the call site
    k = Kernel.indicator(r0, weight=w, n=2)
    assert j_alpha(k, alpha) == np_approx(r0 ** alpha / alpha, rel=1e-9)


@FAST
@given(st.floats(0.0, 4.0))
def test_sphere_constants_one_dimension(p):
    assert c_pn(p, 1) == np_approx(2.0, rel=1e-12)
    assert c_pn(p, 2) > 0.0
