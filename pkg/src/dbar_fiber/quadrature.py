"""Low-level quadrature building blocks.

Everything here is deterministic: node sets depend only on the arguments,
summation order is fixed, and no global state is consulted.  The module
provides

* composite Gauss-Legendre panels on finite intervals,
* the radial Simpson mesh used by the polar integrator (a dense core
  followed by geometrically growing octave panels, so very large
  truncation radii stay cheap),
* closed evaluation of half-line decay integrals ``int_x^inf ds / (q + s^p)``
  via the substitution ``u = s**(-eps)``, which turns the tail into a
  finite, smooth integral.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "gauss_legendre_panels",
    "radial_simpson_mesh",
    "decay_tail_integral",
    "half_line_decay_mass",
]


@lru_cache(maxsize=16)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_panels(f, a: float, b: float, panels: int = 8, order: int = 32) -> float:
    """Integrate ``f`` over [a, b] with ``panels`` equal Gauss-Legendre panels."""
    if b <= a:
        return 0.0
    x, w = _leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (hi + lo) + half * x
        total += half * float(np.sum(w * f(nodes)))
    return total


def _even(n: int) -> int:
    n = max(2, int(n))
    return n if n % 2 == 0 else n + 1


def _simpson_segment(a: float, b: float, intervals: int):
    h = (b - a) / intervals
    nodes = a + h * np.arange(intervals + 1)
    weights = np.full(intervals + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = 1.0
    weights[-1] = 1.0
    weights *= h / 3.0
    return nodes, weights

def radial_simpson_mesh(r_end: float, r_core: float, nodes_per_unit: int, level: int = 0):
    """Simpson nodes/weights covering [0, r_end].

    The core [0, min(r_core, r_end)] is sampled uniformly at
    ``nodes_per_unit`` intervals per unit length; past the core the mesh
    continues in octaves [A, 2A] with a fixed interval count per octave,
    clipped so the last node lands exactly on ``r_end``.  ``level`` halves
    the spacing everywhere (used for the error estimate by doubling).
    """
    if r_end <= 0.0:
        raise ValueError("truncation radius must be positive")
    scale = 2 ** level
    core_end = min(r_core, r_end)
    segments = [(0.0, core_end, _even(int(np.ceil(core_end * nodes_per_unit))) * scale)]
    lo = core_end
    while lo < r_end * (1.0 - 1e-12):
        hi = min(2.0 * lo, r_end)
        segments.append((lo, hi, _even(max(8, nodes_per_unit)) * scale))
        lo = hi
    parts = [_simpson_segment(a, b, m) for a, b, m in segments]
    nodes = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    return nodes, weights


def _tail_from(eps: float, x: float) -> float:
    # int_x^inf ds/(1+s^(1+eps)) for x >= 1, via u = s**(-eps):
    # (1/eps) * int_0^(x**-eps) du / (1 + u**((1+eps)/eps)).
    p_over_eps = (1.0 + eps) / eps
    hi = x ** (-eps)
    return (1.0 / eps) * gauss_legendre_panels(
        lambda u: 1.0 / (1.0 + u ** p_over_eps), 0.0, hi
    )


def decay_tail_integral(eps: float, q: float, x: float) -> float:
    """``int_x^inf ds / (q + s**(1+eps))`` for q >= 1, x >= 0.

    Rescaling s = q**(1/p) * sigma reduces the general case to q = 1, which
    keeps the integrand well resolved even for very large q.
    """
    if eps <= 0.0:
        raise ValueError("decay exponent must be positive")
    if q < 1.0:
        raise ValueError("offset constant must be >= 1")
    p = 1.0 + eps
    scale = q ** (1.0 / p)
    y = max(x, 0.0) / scale
    if y >= 1.0:
        base = _tail_from(eps, y)
    else:
        base = gauss_legendre_panels(
            lambda s: 1.0 / (1.0 + s ** p), y, 1.0
        ) + _tail_from(eps, 1.0)
    return q ** ((1.0 - p) / p) * base


def half_line_decay_mass(eps: float, q: float = 1.0) -> float:
    """``int_0^inf ds / (q + s**(1+eps))``."""
    return decay_tail_integral(eps, q, 0.0)
