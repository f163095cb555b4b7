"""Manufactured vector potential psi = curl(0, 0, s(x)s(y)s(z)), s(t) = sin(pi t)**3.

Closed forms were derived symbolically offline and frozen here. With ``u = curl psi``
the source is ``f = -nu * lap(u)`` (no pressure gradient, which the weak form ignores).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PI = np.pi


def _s(t):
    return np.sin(PI * t) ** 3


def _s1(t):
    return 3 * PI * np.sin(PI * t) ** 2 * np.cos(PI * t)


def _s2(t):
    s = np.sin(PI * t)
    return -3 * PI ** 2 * (3 * s ** 2 - 2) * s


def _s3(t):
    s = np.sin(PI * t)
    return -3 * PI ** 3 * (9 * s ** 2 - 2) * np.cos(PI * t)


def _s4(t):
    s = np.sin(PI * t)
    return 3 * PI ** 4 * (27 * s ** 2 - 20) * s


def _split(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x[:, 0], x[:, 1], x[:, 2]


def psi(x):
    a, b, c = _split(x)
    return np.column_stack([_s(a) * _s1(b) * _s(c), -_s1(a) * _s(b) * _s(c), np.zeros_like(a)])


def curl_psi(x):
    a, b, c = _split(x)
    return np.column_stack([
        _s1(a) * _s(b) * _s1(c),
        _s(a) * _s1(b) * _s1(c),
        -_s2(a) * _s(b) * _s(c) - _s(a) * _s2(b) * _s(c),
    ])


def source(x, nu=1.0):
    """f = -nu * Laplacian(curl psi)."""
    a, b, c = _split(x)
    S0, S1, S2, S3, S4 = ([g(t) for t in (a, b, c)] for g in (_s, _s1, _s2, _s3, _s4))
    # u1 = s1(x) s(y) s1(z)
    lap1 = S3[0] * S0[1] * S1[2] + S1[0] * S2[1] * S1[2] + S1[0] * S0[1] * S3[2]
    # u2 = s(x) s1(y) s1(z)
    lap2 = S2[0] * S1[1] * S1[2] + S0[0] * S3[1] * S1[2] + S0[0] * S1[1] * S3[2]
    # u3 = -s2(x) s(y) s(z) - s(x) s2(y) s(z)
    lap3 = -(S4[0] * S0[1] * S0[2] + S2[0] * S2[1] * S0[2] + S2[0] * S0[1] * S2[2]) \
        - (S2[0] * S2[1] * S0[2] + S0[0] * S4[1] * S0[2] + S0[0] * S2[1] * S2[2])
    return -nu * np.column_stack([lap1, lap2, lap3])


@dataclass(frozen=True)
class ManufacturedCase:
    psi: Callable
    curl_psi: Callable
    f: Callable
    nu: float = 1.0


def manufactured_case(nu=1.0):
    return ManufacturedCase(psi, curl_psi, lambda x: source(x, nu), nu)
