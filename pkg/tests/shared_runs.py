"""Expensive runs shared between test modules (computed once per session)."""

from functools import cache

import numpy as np

from blowup_profiles.model import Params, explicit_support_edge, sigma_star
from blowup_profiles.shooting import classify_c_intervals, find_good_profile, find_interface_c

C_GRID = tuple(np.logspace(-2, 2, 25))


@cache
def explicit_recovery():
    p = Params(3.0, sigma_star(3.0))
    return find_good_profile(p, (0.5, 10.0))


@cache
def good_profile(m, sigma):
    return find_good_profile(Params(m, sigma))


@cache
def c_scan(m, sigma):
    return classify_c_intervals(Params(m, sigma), C_GRID)


@cache
def interface_from_origin(m, sigma):
    kc = c_scan(m, sigma)
    return find_interface_c(Params(m, sigma), kc.brackets[0])


def explicit_edge():
    return explicit_support_edge(3.0)
