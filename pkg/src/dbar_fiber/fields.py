"""Forms with fiber-decay metadata and the operators acting on them.

A point carries base coordinates ``z`` (length ``n``, possibly empty) and
fiber coordinates ``w`` (length ``k >= 1``).  Coefficient functions are
plain callables ``(z, w) -> values`` written against numpy broadcasting:
the component index lives on the *last* axis of each argument and any
batch shape (for example a quadrature grid) rides on the leading axes of
``w``.  All evaluations are pure, so everything here is safe to call
concurrently.

Built-in forms are registered by name (see ``builtin_form``); each one is
constructed from a closed-form potential so that solver output can be
compared against an exact answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import NonFiniteSampleError

BASE = "base"
FIBER = "fiber"

# Central-difference default: balances truncation against rounding at
# double precision.
FD_STEP_FACTOR = 1e-5


def _as_cvector(values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=complex)).copy()
    if arr.ndim != 1:
        raise ValueError("coordinate vectors must be one dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BaseFiberPoint:
    """A point (z, w) with n base and k fiber coordinates."""

    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _as_cvector(self.z) if np.size(self.z) else np.zeros(0, complex))
        object.__setattr__(self, "w", _as_cvector(self.w))
        if self.w.size < 1:
            raise ValueError("at least one fiber coordinate is required")
        if not (np.all(np.isfinite(self.z.view(float))) and np.all(np.isfinite(self.w.view(float)))):
            raise ValueError("point coordinates must be finite")

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def k(self) -> int:
        return self.w.size

    def coord(self, kind: str, index: int) -> complex:
        vec = self.z if kind == BASE else self.w
        return complex(vec[index - 1])

    def with_coord(self, kind: str, index: int, value: complex) -> "BaseFiberPoint":
        vec = (self.z if kind == BASE else self.w).copy()
        vec[index - 1] = value
        if kind == BASE:
            return BaseFiberPoint(vec, self.w)
        return BaseFiberPoint(self.z, vec)


def point(z=(), w=(0.0,)) -> BaseFiberPoint:
    """Convenience constructor; ``z=()`` gives a pure-fiber point."""
    return BaseFiberPoint(np.asarray(z, dtype=complex).reshape(-1), np.asarray(w, dtype=complex).reshape(-1))


@dataclass(frozen=True)
class DecayBudget:
    """Declared fiber-decay data: exponent ``epsilon`` and constant ``c_bound``.

    The declaration is the caller's claim; ``decay_check`` validates it
    empirically on sampled rays.
    """

    epsilon: float
    c_bound: float

    def __post_init__(self):
        if not (self.epsilon > 0.0 and self.c_bound > 0.0):
            raise ValueError("decay budget requires epsilon > 0 and c_bound > 0")


@dataclass(frozen=True)
class VariableId:
    """Selects one Wirtinger derivative: d/dz_a, d/dzbar_a, d/dw_g or d/dwbar_g.

    ``index`` is 1-based, matching the usual subscript convention.
    """

    kind: str
    index: int
    bar: bool = True

    def __post_init__(self):
        if self.kind not in (BASE, FIBER):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.index < 1:
            raise ValueError("variable index is 1-based")

    def validate_for(self, n: int, k: int) -> None:
        limit = n if self.kind == BASE else k
        if self.index > limit:
            raise IndexError(f"{self.kind} index {self.index} out of range (limit {limit})")


WirtingerMap = Mapping[tuple, Callable]


@dataclass(frozen=True)
class ScalarField:
    """A pure coefficient function with optional analytic extras.

    ``evaluate(z, w)`` follows the module broadcast convention.  The
    ``wirtinger`` map, when present, holds analytic derivatives keyed by
    ``(kind, index, bar)``; combinations missing from the map fall back to
    finite differences.  ``primitive`` is a closed-form potential whose
    conjugate derivatives reproduce this coefficient (the test oracle).
    """

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    wirtinger: Optional[WirtingerMap] = None
    primitive: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def at(self, p: BaseFiberPoint) -> complex:
        value = complex(np.asarray(self.evaluate(p.z, p.w)))
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise NonFiniteSampleError("field evaluation returned a non-finite value")
        return value

    def analytic_wirtinger(self, p: BaseFiberPoint, v: VariableId):
        """Analytic derivative at ``p`` if provided, else ``None``."""
        if self.wirtinger is None:
            return None
        fn = self.wirtinger.get((v.kind, v.index, v.bar))
        if fn is None:
            return None
        return complex(np.asarray(fn(p.z, p.w)))


def zero_field() -> ScalarField:
    return ScalarField(
        evaluate=lambda z, w: np.zeros(np.shape(w[..., 0]), dtype=complex),
        wirtinger={},
        primitive=lambda z, w: np.zeros(np.shape(w[..., 0]), dtype=complex),
    )


@dataclass(frozen=True)
class ZeroOneForm:
    """Conjugate-differential form data: n base and k fiber coefficients."""

    n: int
    k: int
    a_coeffs: Sequence[ScalarField]
    b_coeffs: Sequence[ScalarField]
    decay: DecayBudget
    closed: bool = True
    name: str = ""

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k >= 1 required")
        if len(self.a_coeffs) != self.n or len(self.b_coeffs) != self.k:
            raise ValueError("coefficient counts must match n and k")
        object.__setattr__(self, "a_coeffs", tuple(self.a_coeffs))
        object.__setattr__(self, "b_coeffs", tuple(self.b_coeffs))

    @property
    def primitive(self) -> Optional[Callable]:
        """The shared closed-form potential, when the form was built from one."""
        return self.b_coeffs[0].primitive

    def primitive_at(self, p: BaseFiberPoint) -> complex:
        fn = self.primitive
        if fn is None:
            raise ValueError(f"form {self.name or '<anonymous>'} carries no potential oracle")
        return complex(np.asarray(fn(p.z, p.w)))


def eval_form(form: ZeroOneForm, p: BaseFiberPoint, which: str, index: int) -> complex:
    """Evaluate coefficient ``a_index`` or ``b_index`` at ``p`` (1-based)."""
    if which == "a":
        coeffs = form.a_coeffs
    elif which == "b":
        coeffs = form.b_coeffs
    else:
        raise ValueError("which must be 'a' or 'b'")
    if not 1 <= index <= len(coeffs):
        raise IndexError(f"coefficient index {index} out of range for part {which!r}")
    return coeffs[index - 1].at(p)


def _point_eval(f, p: BaseFiberPoint) -> complex:
    if isinstance(f, ScalarField):
        return f.at(p)
    return complex(f(p))


def wirtinger_fd(f, p: BaseFiberPoint, v: VariableId, h: Optional[float] = None) -> complex:
    """Central-difference Wirtinger derivative of ``f`` at ``p``.

    ``f`` may be a :class:`ScalarField` or any callable taking a point.
    Accuracy is O(h^2) for three-times differentiable fields.
    """
    if h is None:
        h = FD_STEP_FACTOR * max(1.0, abs(p.coord(v.kind, v.index)))
    if h <= 0.0:
        raise ValueError("step must be positive")
    c = p.coord(v.kind, v.index)
    samples = [
        _point_eval(f, p.with_coord(v.kind, v.index, c + off))
        for off in (h, -h, 1j * h, -1j * h)
    ]
    if not all(math.isfinite(s.real) and math.isfinite(s.imag) for s in samples):
        raise NonFiniteSampleError("non-finite sample in derivative stencil")
    d_re = (samples[0] - samples[1]) / (2.0 * h)
    d_im = (samples[2] - samples[3]) / (2.0 * h)
    if v.bar:
        return 0.5 * (d_re + 1j * d_im)
    return 0.5 * (d_re - 1j * d_im)


def _derivative(fld: ScalarField, p, v, h, prefer_analytic: bool) -> complex:
    if prefer_analytic:
        value = fld.analytic_wirtinger(p, v)
        if value is not None:
            return value
    return wirtinger_fd(fld, p, v, h)


def compatibility_residual(
    form: ZeroOneForm,
    p: BaseFiberPoint,
    h: Optional[float] = None,
    prefer_analytic: bool = True,
) -> float:
    """Largest violation of the cross-derivative identities a closed form obeys.

    Checks, over all index pairs, that the conjugate-base derivatives of the
    a-part are symmetric, that mixed a/b derivatives agree, and that the
    conjugate-fiber derivatives of the b-part are symmetric.  Zero (up to
    O(h^2) when finite differences are used) iff the form is closed at ``p``.
    """
    n, k = form.n, form.k
    worst = 0.0

    def d(fld, kind, index, bar=True):
        return _derivative(fld, p, VariableId(kind, index, bar), h, prefer_analytic)

    for alpha in range(1, n + 1):
        for beta in range(alpha + 1, n + 1):
            gap = abs(d(form.a_coeffs[alpha - 1], BASE, beta) - d(form.a_coeffs[beta - 1], BASE, alpha))
            worst = max(worst, gap)
    for alpha in range(1, n + 1):
        for gamma in range(1, k + 1):
            gap = abs(d(form.a_coeffs[alpha - 1], FIBER, gamma) - d(form.b_coeffs[gamma - 1], BASE, alpha))
            worst = max(worst, gap)
    for gamma in range(1, k + 1):
        for delta in range(gamma + 1, k + 1):
            gap = abs(d(form.b_coeffs[gamma - 1], FIBER, delta) - d(form.b_coeffs[delta - 1], FIBER, gamma))
            worst = max(worst, gap)
    return worst


def fiber_decay_denominator(w: np.ndarray, epsilon: float):
    """``1 + sum_d |w_d|**(1+eps)`` with the batch shape of ``w``."""
    return 1.0 + np.sum(np.abs(w) ** (1.0 + epsilon), axis=-1)


@dataclass(frozen=True)
class DecayRow:
    radius: float
    direction: int
    b_ratios: tuple
    a_values: tuple


@dataclass(frozen=True)
class DecayCheckReport:
    rows: tuple
    b_ok: bool
    a_ok: bool
    max_b_ratio: float

    @property
    def ok(self) -> bool:
        return self.b_ok and self.a_ok


def decay_check(
    form: ZeroOneForm,
    z_fixed,
    radii: Sequence[float],
    directions: Sequence,
) -> DecayCheckReport:
    """Empirically validate the declared decay budget along fiber rays.

    For every sampled ``w = r * direction`` the b-coefficients must stay
    inside the declared envelope (ratio <= 1) and the a-coefficient moduli
    must decrease toward zero as ``r`` grows.  No rate is imposed on the
    a-part; only the trend is checked.
    """
    radii = [float(r) for r in radii]
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    z = np.asarray(z_fixed, dtype=complex).reshape(-1)
    eps, c = form.decay.epsilon, form.decay.c_bound
    rows = []
    max_ratio = 0.0
    a_ok = True
    for d_index, direction in enumerate(directions):
        dvec = np.asarray(direction, dtype=complex).reshape(-1)
        if dvec.size != form.k:
            raise ValueError("direction length must equal k")
        a_trace = []
        for r in radii:
            p = BaseFiberPoint(z, r * dvec)
            denom = float(fiber_decay_denominator(p.w, eps))
            ratios = tuple(abs(b.at(p)) * denom / c for b in form.b_coeffs)
            a_vals = tuple(abs(a.at(p)) for a in form.a_coeffs)
            max_ratio = max(max_ratio, max(ratios, default=0.0))
            a_trace.append(a_vals)
            rows.append(DecayRow(r, d_index, ratios, a_vals))
        for alpha in range(form.n):
            trace = [vals[alpha] for vals in a_trace]
            # Only the limit matters, so tolerate a bump at small radii:
            # past its maximum the trace must fall monotonically toward 0.
            peak = max(range(len(trace)), key=trace.__getitem__)
            tail = trace[peak:]
            nonincreasing = all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))
            vanishing = trace[-1] <= max(0.5 * trace[peak], 1e-15)
            if not (nonincreasing and vanishing):
                a_ok = False
    return DecayCheckReport(tuple(rows), max_ratio <= 1.0, a_ok, max_ratio)


# ---------------------------------------------------------------------------
# Built-in forms.  Each is exact-differential by construction, with the
# potential attached to every coefficient.
# ---------------------------------------------------------------------------


def _gaussian_potential_fiber(ww):
    # (1 - exp(-|w|^2)) / w, extended by 0 at w = 0 (removable).
    t = np.abs(ww) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = -np.expm1(-t) / ww
    return np.where(t > 0.0, raw, 0.0 + 0.0j)


def _gaussian_potential_fiber_dw(ww):
    # d/dw of the above: ((1+t) e^{-t} - 1) / w^2, series near 0.
    t = np.abs(ww) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = ((1.0 + t) * np.exp(-t) - 1.0) / (ww * ww)
    series = np.conj(ww) ** 2 * (-0.5 + t / 3.0 - t * t / 8.0)
    return np.where(t < 1e-3, series, raw)


def _gaussian_form(params) -> ZeroOneForm:
    z_profile = bool(params.get("z_profile", False))
    eps = float(params.get("epsilon", 1.0))
    c = float(params.get("c_bound", 1.0))

    if not z_profile:
        prim = lambda z, w: _gaussian_potential_fiber(w[..., 0])
        b = ScalarField(
            evaluate=lambda z, w: np.exp(-np.abs(w[..., 0]) ** 2) + 0.0j,
            wirtinger={
                (FIBER, 1, True): lambda z, w: -w[..., 0] * np.exp(-np.abs(w[..., 0]) ** 2),
                (FIBER, 1, False): lambda z, w: -np.conj(w[..., 0]) * np.exp(-np.abs(w[..., 0]) ** 2),
            },
            primitive=prim,
        )
        return ZeroOneForm(0, 1, (), (b,), DecayBudget(eps, c), name="gaussian_form")

    # Potential p(z) * phi0(w) with p = 1/(1+|z|^2); the base part is
    # nontrivial, which exercises the mixed compatibility identities.
    def p_of(z):
        return 1.0 / (1.0 + np.abs(z[..., 0]) ** 2)

    prim = lambda z, w: p_of(z) * _gaussian_potential_fiber(w[..., 0])
    b = ScalarField(
        evaluate=lambda z, w: p_of(z) * np.exp(-np.abs(w[..., 0]) ** 2) + 0.0j,
        wirtinger={
            (FIBER, 1, True): lambda z, w: -p_of(z) * w[..., 0] * np.exp(-np.abs(w[..., 0]) ** 2),
            (FIBER, 1, False): lambda z, w: -p_of(z) * np.conj(w[..., 0]) * np.exp(-np.abs(w[..., 0]) ** 2),
            (BASE, 1, True): lambda z, w: -z[..., 0] * p_of(z) ** 2 * np.exp(-np.abs(w[..., 0]) ** 2),
            (BASE, 1, False): lambda z, w: -np.conj(z[..., 0]) * p_of(z) ** 2 * np.exp(-np.abs(w[..., 0]) ** 2),
        },
        primitive=prim,
    )
    a = ScalarField(
        evaluate=lambda z, w: -z[..., 0] * p_of(z) ** 2 * _gaussian_potential_fiber(w[..., 0]),
        wirtinger={
            (FIBER, 1, True): lambda z, w: -z[..., 0] * p_of(z) ** 2 * np.exp(-np.abs(w[..., 0]) ** 2),
            (FIBER, 1, False): lambda z, w: -z[..., 0] * p_of(z) ** 2 * _gaussian_potential_fiber_dw(w[..., 0]),
            (BASE, 1, True): lambda z, w: 2.0 * z[..., 0] ** 2 * p_of(z) ** 3 * _gaussian_potential_fiber(w[..., 0]),
            (BASE, 1, False): lambda z, w: p_of(z) ** 2
            * (2.0 * np.abs(z[..., 0]) ** 2 * p_of(z) - 1.0)
            * _gaussian_potential_fiber(w[..., 0]),
        },
        primitive=prim,
    )
    return ZeroOneForm(1, 1, (a,), (b,), DecayBudget(eps, c), name="gaussian_form")


def _rational_form(params) -> ZeroOneForm:
    eps = float(params.get("epsilon", 3.0))
    c = float(params.get("c_bound", 1.5))
    prim = lambda z, w: np.conj(w[..., 0]) / (1.0 + np.abs(w[..., 0]) ** 2)
    b = ScalarField(
        evaluate=lambda z, w: 1.0 / (1.0 + np.abs(w[..., 0]) ** 2) ** 2 + 0.0j,
        wirtinger={
            (FIBER, 1, True): lambda z, w: -2.0 * w[..., 0] / (1.0 + np.abs(w[..., 0]) ** 2) ** 3,
            (FIBER, 1, False): lambda z, w: -2.0 * np.conj(w[..., 0]) / (1.0 + np.abs(w[..., 0]) ** 2) ** 3,
        },
        primitive=prim,
    )
    return ZeroOneForm(0, 1, (), (b,), DecayBudget(eps, c), name="rational_form")


def _product_form_k2(params) -> ZeroOneForm:
    eps = float(params.get("epsilon", 1.0))
    c = float(params.get("c_bound", 2.0))

    def t(w, i):
        return np.abs(w[..., i]) ** 2

    prim = lambda z, w: 1.0 / ((1.0 + t(w, 0)) * (1.0 + t(w, 1))) + 0.0j

    def b_coeff(i):
        j = 1 - i

        def ev(z, w):
            return -w[..., i] / ((1.0 + t(w, i)) ** 2 * (1.0 + t(w, j)))

        wmap = {
            (FIBER, i + 1, True): lambda z, w: 2.0 * w[..., i] ** 2 / ((1.0 + t(w, i)) ** 3 * (1.0 + t(w, j))),
            (FIBER, i + 1, False): lambda z, w: (t(w, i) - 1.0) / ((1.0 + t(w, i)) ** 3 * (1.0 + t(w, j))),
            (FIBER, j + 1, True): lambda z, w: w[..., 0] * w[..., 1] / ((1.0 + t(w, 0)) ** 2 * (1.0 + t(w, 1)) ** 2),
            (FIBER, j + 1, False): lambda z, w: w[..., i] * np.conj(w[..., j]) / ((1.0 + t(w, i)) ** 2 * (1.0 + t(w, j)) ** 2),
        }
        return ScalarField(evaluate=ev, wirtinger=wmap, primitive=prim)

    return ZeroOneForm(0, 2, (), (b_coeff(0), b_coeff(1)), DecayBudget(eps, c), name="product_form_k2")


def _opm_metric_form(params) -> ZeroOneForm:
    m = int(params.get("m", 1))
    eps = float(params.get("epsilon", 1.0))
    c = float(params.get("c_bound", 2.0))

    def pieces(z, w):
        s = np.abs(z[..., 0]) ** 2
        t = np.abs(w[..., 0]) ** 2
        a_pow = (1.0 + s) ** m
        return s, t, a_pow

    def prim(z, w):
        s, t, a_pow = pieces(z, w)
        return a_pow / (a_pow + t) + 0.0j

    def a_eval(z, w):
        s, t, a_pow = pieces(z, w)
        return m * z[..., 0] * (1.0 + s) ** (m - 1) * t / (a_pow + t) ** 2

    def b_eval(z, w):
        s, t, a_pow = pieces(z, w)
        return -w[..., 0] * a_pow / (a_pow + t) ** 2

    def b_dwbar(z, w):
        s, t, a_pow = pieces(z, w)
        return 2.0 * w[..., 0] ** 2 * a_pow / (a_pow + t) ** 3

    def b_dw(z, w):
        s, t, a_pow = pieces(z, w)
        return a_pow * (t - a_pow) / (a_pow + t) ** 3

    def cross(z, w):
        # d a1 / dwbar == d b1 / dzbar; one function serves both entries.
        s, t, a_pow = pieces(z, w)
        return m * z[..., 0] * w[..., 0] * (1.0 + s) ** (m - 1) * (a_pow - t) / (a_pow + t) ** 3

    def b_dz(z, w):
        s, t, a_pow = pieces(z, w)
        return m * np.conj(z[..., 0]) * w[..., 0] * (1.0 + s) ** (m - 1) * (a_pow - t) / (a_pow + t) ** 3

    def a_dw(z, w):
        s, t, a_pow = pieces(z, w)
        return m * z[..., 0] * np.conj(w[..., 0]) * (1.0 + s) ** (m - 1) * (a_pow - t) / (a_pow + t) ** 3

    def a_dzbar(z, w):
        s, t, a_pow = pieces(z, w)
        return (
            m * z[..., 0] ** 2 * t * (1.0 + s) ** (m - 2)
            * ((m - 1) * (a_pow + t) - 2.0 * m * a_pow)
            / (a_pow + t) ** 3
        )

    def a_dz(z, w):
        s, t, a_pow = pieces(z, w)
        return (
            m * t * (1.0 + s) ** (m - 2)
            * ((1.0 + s) * (a_pow + t) + s * (m - 1) * (a_pow + t) - 2.0 * m * s * a_pow)
            / (a_pow + t) ** 3
        )

    a1 = ScalarField(
        evaluate=a_eval,
        wirtinger={
            (FIBER, 1, True): cross,
            (FIBER, 1, False): a_dw,
            (BASE, 1, True): a_dzbar,
            (BASE, 1, False): a_dz,
        },
        primitive=prim,
    )
    b1 = ScalarField(
        evaluate=b_eval,
        wirtinger={
            (FIBER, 1, True): b_dwbar,
            (FIBER, 1, False): b_dw,
            (BASE, 1, True): cross,
            (BASE, 1, False): b_dz,
        },
        primitive=prim,
    )
    return ZeroOneForm(1, 1, (a1,), (b1,), DecayBudget(eps, c), name="opm_metric_form")


def _zero_form(params) -> ZeroOneForm:
    n = int(params.get("n", 0))
    k = int(params.get("k", 1))
    eps = float(params.get("epsilon", 1.0))
    c = float(params.get("c_bound", 1.0))
    return ZeroOneForm(
        n, k,
        tuple(zero_field() for _ in range(n)),
        tuple(zero_field() for _ in range(k)),
        DecayBudget(eps, c),
        name="zero_form",
    )


_REGISTRY = {
    "zero_form": _zero_form,
    "gaussian_form": _gaussian_form,
    "rational_form": _rational_form,
    "product_form_k2": _product_form_k2,
    "opm_metric_form": _opm_metric_form,
}


def builtin_form(name: str, params: Optional[Mapping] = None) -> ZeroOneForm:
    """Construct a registered test form.

    Registry names and their parameters:

    * ``zero_form``: ``n`` (default 0), ``k`` (default 1)
    * ``gaussian_form``: ``z_profile`` (default false) switches on a
      rational base profile with a nontrivial base coefficient
    * ``rational_form``: no parameters
    * ``product_form_k2``: no parameters
    * ``opm_metric_form``: twist degree ``m`` (default 1)

    All accept ``epsilon`` and ``c_bound`` overrides for the declared decay
    budget; the defaults are validated by the test suite on the sampled
    compacts they are used on.
    """
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown form name {name!r}; known: {sorted(_REGISTRY)}") from None
    return builder(dict(params or {}))


def registered_form_names():
    return sorted(_REGISTRY)
