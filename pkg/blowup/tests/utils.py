"""
Shared fixtures for the solver tests.
"""
from functools import lru_cache

import numpy as np
from django.conf import settings

from blowup.grid import DomainSpec, build_operator
from blowup.scheme import State


@lru_cache(maxsize=None)
def interval_operator(n, extent=1.0):
    return build_operator(DomainSpec.interval(extent, n))


def random_state(op, seed, low=0.1, high=1.0):
    rng = np.random.default_rng(seed)
    return State(u=rng.uniform(low, high, op.n_nodes), v=rng.uniform(low, high, op.n_nodes))


def battery_seeds():
    return range(settings.BLOWUP_BATTERY_SEEDS)
