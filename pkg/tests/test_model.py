import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import three_point
from ustatbounds.errors import CapExceeded, DegenerateKernel, DomainError, NonSymmetric
from ustatbounds.model import (
    DiscreteDistribution,
    Kernel,
    LpMoments,
    builtin_kernel,
    center,
    centered_poisson_norm,
    check_symmetric,
    dist_from_spec,
    kernel_expectation,
    kernel_from_spec,
    kernel_lp_norm,
    kernel_tail,
    poisson_norm_growth,
    rademacher,
    sample_iid,
    sample_indices,
    support_table,
    truncated_centered_poisson,
)


@pytest.mark.parametrize("atoms", [
    [(0.0, 1.0)],
    [(0.0, 0.5), (1.0, 0.6)],
    [(0.0, 0.5), (0.0, 0.5)],
    [(0.0, 0.0), (1.0, 1.0)],
    [(float("nan"), 0.5), (1.0, 0.5)],
    [(0.0, 0.5, 1.0), (1.0, 0.5)],
])
def test_distribution_rejects_bad_atoms(atoms):
    with pytest.raises(DomainError):
        DiscreteDistribution.from_atoms(atoms)


def test_distribution_is_sorted_and_frozen():
    dist = DiscreteDistribution.from_atoms([(2.0, 0.25), (-1.0, 0.75)])
    assert dist.points.tolist() == [-1.0, 2.0]
    assert dist.probs == pytest.approx([0.75, 0.25])
    with pytest.raises(ValueError):
        dist.points[0] = 5.0
    assert dist.cdf()[-1] == 1.0


def test_rademacher_moments():
    d = rademacher()
    assert d.mean() == 0.0
    assert d.variance() == 1.0


def test_index_of_rejects_foreign_values():
    with pytest.raises(DomainError):
        rademacher().index_of([0.0])


class TestTruncatedPoisson:
    @pytest.mark.parametrize("p_max", [1, 2, 6, 50, 400])
    def test_mean_and_variance(self, p_max):
        d = truncated_centered_poisson(p_max)
        assert abs(d.mean()) < 1e-12
        assert d.variance() == pytest.approx(1.0, abs=1e-12)
        assert d.moment_limit == p_max

    def test_first_absolute_moment(self):
        # E|eta - 1| = 2/e for unit Poisson
        d = truncated_centered_poisson(1)
        assert kernel_lp_norm(builtin_kernel("identity"), d, 1.0) == pytest.approx(2 / math.e, rel=1e-13)

    @pytest.mark.parametrize("p", [2, 3, 4, 6, 10])
    def test_integer_moments_match_scipy(self, p):
        # central moments of Poisson(1) via scipy's pmf summed independently
        k = np.arange(0, 200)
        ref = math.fsum(stats.poisson.pmf(k, 1.0) * np.abs(k - 1.0) ** p) ** (1 / p)
        assert centered_poisson_norm(p) == pytest.approx(ref, rel=1e-12)

    def test_second_moment_is_one(self):
        assert centered_poisson_norm(2) == pytest.approx(1.0, rel=1e-13)

    def test_rejects_small_order(self):
        with pytest.raises(DomainError):
            truncated_centered_poisson(0.5)


def test_norm_growth_ratio_values():
    assert poisson_norm_growth(2) == pytest.approx(0.94208, abs=1e-5)
    assert abs(poisson_norm_growth(200) - 1) < abs(poisson_norm_growth(20) - 1)


class TestSampling:
    def test_bit_identical(self):
        d = three_point()
        a = sample_iid(d, 1000, 12345)
        b = sample_iid(d, 1000, 12345)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, sample_iid(d, 1000, 12346))

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(DomainError):
            sample_iid(rademacher(), 3, seed)

    def test_frequencies(self):
        d = three_point()
        n = 200_000
        counts = np.bincount(sample_indices(d, n, 7), minlength=d.size) / n
        se = np.sqrt(d.probs * (1 - d.probs) / n)
        assert np.all(np.abs(counts - d.probs) < 5 * se)


class TestKernels:
    @pytest.mark.parametrize("name,args,expected", [
        ("identity", (3.0,), 3.0),
        ("sum", (1.0, 2.0), 3.0),
        ("product", (2.0, -3.0), -6.0),
        ("sample_variance", (1.0, 4.0), 4.5),
        ("sign", (-1.0, 0.5), -1.0),
        ("sign", (-1.0, 1.0), 0.0),
    ])
    def test_values(self, name, args, expected):
        assert float(builtin_kernel(name, len(args) if name in ("sum", "product", "sign") else None)(*args)) == expected

    def test_fixed_arity(self):
        with pytest.raises(DomainError):
            builtin_kernel("identity", 2)
        with pytest.raises(DomainError):
            builtin_kernel("median")
        assert builtin_kernel("product", 4).arity == 4

    def test_catalog_is_symmetric(self, kernel, law):
        check_symmetric(kernel, law)

    def test_nonsymmetric_detected(self):
        with pytest.raises(NonSymmetric):
            check_symmetric(Kernel(2, lambda x, y: x - 2 * y, "skew"), three_point())

    def test_spec_roundtrip(self):
        k = kernel_from_spec({"name": "product", "arity": 3})
        assert k.to_spec() == {"name": "product", "arity": 3}


class TestMoments:
    def test_rademacher_product_is_unit(self):
        k = builtin_kernel("product", 3)
        for p in (2, 5, 40, 1000):
            assert kernel_lp_norm(k, rademacher(), p) == pytest.approx(1.0)

    def test_against_direct_sum(self):
        d = three_point()
        k = builtin_kernel("sum", 2)
        x, w = d.points, d.probs
        ref = sum(w[i] * w[j] * abs(x[i] + x[j]) ** 3 for i in range(3) for j in range(3)) ** (1 / 3)
        assert kernel_lp_norm(k, d, 3) == pytest.approx(ref, rel=1e-13)

    @given(st.floats(1.0, 200.0), st.floats(1.0, 200.0))
    def test_nondecreasing_in_p(self, p, q):
        lp = LpMoments(builtin_kernel("sum", 2), three_point())
        lo, hi = sorted((p, q))
        assert lp(lo) <= lp(hi) * (1 + 1e-12)

    def test_high_order_poisson_is_finite(self):
        d = truncated_centered_poisson(2000)
        v = LpMoments(builtin_kernel("identity"), d)(2000)
        assert math.isfinite(v) and v > 100

    def test_cap(self):
        with pytest.raises(CapExceeded):
            support_table(builtin_kernel("sum", 3), three_point(), cap=26)
        assert support_table(builtin_kernel("sum", 3), three_point(), cap=27).shape == (3, 3, 3)

    def test_rejects_order_below_one(self):
        with pytest.raises(DomainError):
            kernel_lp_norm(builtin_kernel("identity"), rademacher(), 0.5)


def test_center_and_degenerate():
    d = three_point()
    c = center(builtin_kernel("product", 2), d)
    assert c.mean == pytest.approx(d.mean() ** 2)
    assert kernel_expectation(c, d) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateKernel):
        center(Kernel(2, lambda x, y: np.zeros(np.broadcast(x, y).shape), "zero"), d)


def test_kernel_tail_against_enumeration():
    d = three_point()
    k = builtin_kernel("sum", 2)
    vals, w = [], []
    for i in range(3):
        for j in range(3):
            vals.append(d.points[i] + d.points[j])
            w.append(d.probs[i] * d.probs[j])
    vals, w = np.array(vals), np.array(w)
    for x in (0.0, 0.4, 1.0, 2.5, 3.9, 4.0, 5.0):
        ref = max(w[vals > x].sum(), w[vals < -x].sum())
        assert kernel_tail(k, d, x) == pytest.approx(ref, abs=1e-15)


@pytest.mark.parametrize("spec", [
    {"atoms": [[-1, 0.5], [1, 0.5]]},
    {"poisson_centered": {"p_max": 8}},
])
def test_dist_spec_roundtrip(spec):
    d = dist_from_spec(spec)
    again = dist_from_spec(d.to_spec())
    assert np.array_equal(d.points, again.points)
    assert np.allclose(d.log_probs, again.log_probs)
