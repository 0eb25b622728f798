import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ustatbounds.model import DiscreteDistribution, builtin_kernel, rademacher

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def three_point():
    return DiscreteDistribution.from_atoms([(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)], name="three_point")


def skewed_binary():
    return DiscreteDistribution.from_atoms([(0.0, 0.3), (1.0, 0.7)], name="skewed_binary")


LAWS = {"rademacher": rademacher, "three_point": three_point, "skewed_binary": skewed_binary}

# every catalog kernel at arity <= 3
KERNEL_SPECS = [
    ("identity", None),
    ("sum", 2), ("sum", 3),
    ("product", 2), ("product", 3),
    ("sample_variance", None),
    ("sign", 2), ("sign", 3),
]


def kernel_id(spec):
    name, arity = spec
    return name if arity is None else f"{name}{arity}"


@pytest.fixture(params=list(LAWS), ids=list(LAWS))
def law(request):
    return LAWS[request.param]()


@pytest.fixture(params=KERNEL_SPECS, ids=[kernel_id(s) for s in KERNEL_SPECS])
def kernel(request):
    return builtin_kernel(*request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
