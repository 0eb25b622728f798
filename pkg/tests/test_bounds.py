import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import LAWS
from ustatbounds import bounds
from ustatbounds.errors import DomainError
from ustatbounds.hoeffding import decompose, variance_exact
from ustatbounds.model import LpMoments, builtin_kernel, center
from ustatbounds.ustat import brute_force_moment


class TestOsekowski:
    def test_constant_value(self):
        assert bounds.osekowski_constant() == pytest.approx(15.7858, abs=1e-3)

    def test_maximizer_is_boundary(self):
        assert bounds.osekowski_maximizer() == 4.0
        assert bounds.osekowski_constant() == pytest.approx(bounds.osekowski_os(4.0) * math.log(4.0) / 4.0)

    @given(st.floats(2.0, 4.0))
    def test_flat_below_four(self, p):
        assert bounds.osekowski_os(p) == bounds.osekowski_os(4.0)

    @given(st.floats(4.0, 1e6))
    def test_constant_dominates(self, p):
        assert bounds.osekowski_os(p) <= bounds.osekowski_constant() * p / math.log(p) * (1 + 1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.osekowski_os(1.5)


class TestGamma:
    def test_first_values(self):
        k = bounds.osekowski_constant()
        assert bounds.gamma(1) == k
        assert bounds.gamma(2) == pytest.approx(2 * k**2)
        assert bounds.gamma(3) == pytest.approx(2 * k**2 * k * 2.25)

    @pytest.mark.parametrize("d", range(1, 9))
    def test_envelope(self, d):
        assert bounds.gamma(d) <= bounds.gamma_envelope(d) * (1 + 1e-12)

    def test_recursion(self):
        g = bounds.gamma_table(7)
        for d in range(1, 7):
            assert g[d] / g[d - 1] == pytest.approx(bounds.osekowski_constant() * (1 + 1 / d) ** d)

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.gamma(0)


@pytest.mark.parametrize("kwargs", [
    dict(d=2, r=3, n=5, p=2, phi_p=1), dict(d=2, r=0, n=5, p=2, phi_p=1),
    dict(d=3, r=1, n=2, p=2, phi_p=1), dict(d=2, r=1, n=5, p=1.5, phi_p=1),
    dict(d=2, r=1, n=5, p=2, phi_p=0),
])
def test_bound_input_validation(kwargs):
    with pytest.raises(DomainError):
        bounds.BoundInput(**kwargs)


def test_detailed_bound_decreases_in_n():
    vals = [bounds.moment_bound_detailed(bounds.BoundInput(2, 1, n, 4, 1.0)) for n in range(2, 60)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_detailed_bound_hand_value():
    k = bounds.osekowski_constant()
    t = 4 / math.log(4)
    got = bounds.moment_bound_detailed(bounds.BoundInput(2, 1, 10, 4, 2.0))
    ref = (k * 2 / math.sqrt(10) * t + 2 * k**2 / math.sqrt(45) * t**2) * 2.0
    assert got == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("law", list(LAWS))
@pytest.mark.parametrize("name,arity", [("identity", None), ("sum", 2), ("product", 2), ("sample_variance", None)])
@pytest.mark.parametrize("p", [2, 3, 4, 6])
def test_exact_moment_below_bound(law, name, arity, p):
    c = center(builtin_kernel(name, arity), LAWS[law]())
    ps = decompose(c)
    phi_p = LpMoments(c, c.dist)(p)
    for n in range(c.arity, 7):
        exact = brute_force_moment(c, c.dist, n, p) ** (1 / p)
        assert exact <= bounds.moment_bound_detailed(bounds.BoundInput(ps.degree, ps.rank, n, p, phi_p))


def test_normalized_and_effective_constant():
    c = center(builtin_kernel("product", 2), LAWS["three_point"]())
    ps = decompose(c)
    n, p = 20, 4.0
    sigma = math.sqrt(variance_exact(ps, n))
    b = bounds.BoundInput(2, ps.rank, n, p, LpMoments(c, c.dist)(p))
    nb = bounds.moment_bound_normalized(b, sigma)
    assert nb.value == pytest.approx(nb.detailed / sigma)
    assert nb.c_eff * n ** (-ps.rank / 2) * (p / math.log(p)) ** 2 * b.phi_p == pytest.approx(nb.detailed)


def test_gls_constant_converges_to_limit():
    c = center(builtin_kernel("sum", 2), LAWS["three_point"]())
    ps = decompose(c)
    lim = bounds.gls_constant_limit(2, 1, math.sqrt(ps.variances[0]))
    n = 10**12  # the rank-2 term decays like n^{-1/2}
    assert bounds.gls_constant(2, 1, n, math.sqrt(variance_exact(ps, n))) == pytest.approx(lim, rel=1e-3)


def test_gls_constant_sup_sits_at_e():
    # a range that stops short of e never reaches the minimum of p / ln p
    assert bounds.gls_constant(2, 1, 10, 1.0, p_hi=2.5) < bounds.gls_constant(2, 1, 10, 1.0)
    assert bounds.gls_constant(2, 1, 10, 1.0, p_hi=50.0) == bounds.gls_constant(2, 1, 10, 1.0)


class TestLowerBound:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_exceeds_half_limit(self, d):
        assert bounds.lower_bound_ratio(d, 200) > 0.5 * math.exp(-d)

    def test_product_is_power(self):
        assert bounds.lower_bound_ratio(3, 50) == pytest.approx(bounds.lower_bound_ratio(1, 50) ** 3)

    def test_approaches_limit_from_above(self):
        # the convergence to e^{-1} is slow (a ln ln p / ln p correction)
        vals = [bounds.lower_bound_ratio(1, p) for p in (50, 100, 200, 500)]
        assert all(v > math.exp(-1) for v in vals)
        assert 1.5 < vals[2] / math.exp(-1) < 1.8

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.lower_bound_ratio(5, 10)


@pytest.mark.parametrize("name,arity,law", [
    ("sum", 2, "three_point"), ("product", 2, "rademacher"), ("product", 3, "rademacher"),
    ("sample_variance", None, "skewed_binary"), ("sign", 2, "three_point"),
])
def test_exact_moments_scale_like_rank(name, arity, law):
    # |U(n)|_p n^{r/2} stays inside fixed positive brackets
    c = center(builtin_kernel(name, arity), LAWS[law]())
    r = decompose(c).rank
    vals = [brute_force_moment(c, c.dist, n, 4.0) ** 0.25 * n ** (r / 2) for n in range(c.arity + 1, 9)]
    assert min(vals) > 0.1 and max(vals) / min(vals) < 5
