import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from switchfluid.switch_model import Instance

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ex1_instance(q0=None) -> Instance:
    """3x3 instance on which the c-mu rule is not weakly stable."""
    lam = np.zeros((3, 3))
    for i, j in [(0, 0), (0, 1), (1, 0), (1, 2)]:
        lam[i, j] = 0.45
    cost = np.zeros((3, 3))
    cost[0, 1] = cost[1, 2] = 1.0
    cost[1, 0] = 0.5
    cost[0, 0] = 0.1
    return Instance(3, lam, cost, np.zeros((3, 3)) if q0 is None else q0)


def single_queue(q0=5.0, lam=0.0, c=1.0) -> Instance:
    return Instance(1, [[lam]], [[c]], [[q0]])


@pytest.fixture
def ex1():
    return ex1_instance()


@pytest.fixture
def drain1():
    return single_queue()
