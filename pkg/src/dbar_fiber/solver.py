"""Pointwise solution of the fiber conjugate-derivative equation.

``solve_point`` transforms one fiber slot of the b-part; the remaining
operations verify everything the solution is supposed to satisfy: slot
independence, derivative residuals against the original coefficients,
decay along fiber rays with the profile envelope, and the disc
reconstruction identity (boundary circle integral plus interior kernel
integral reproduces the field value).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cauchy import (
    QuadratureSpec,
    SliceField,
    cauchy_transform,
    f_profile,
    resolve_truncation_radius,
    _refined_polar,
)
from .errors import MissingDerivativeError, NonFiniteSampleError
from .fields import (
    BASE,
    FIBER,
    BaseFiberPoint,
    ScalarField,
    VariableId,
    ZeroOneForm,
    wirtinger_fd,
)

__all__ = [
    "SolveResult",
    "ResidualReport",
    "DecayProfile",
    "BmReconstruction",
    "solve_point",
    "delta_consistency",
    "residual",
    "decay_profile",
    "bm_reconstruct",
    "freeze_spec",
]


@dataclass(frozen=True)
class SolveResult:
    value: complex
    err_estimate: float
    delta_used: int
    spec_used: QuadratureSpec
    richardson: float
    tail: float
    r_used: float


def _slot_norm_split(w: np.ndarray, delta: int, epsilon: float):
    mask = np.arange(w.size) != (delta - 1)
    off = float(np.sum(np.abs(w[mask]) ** (1.0 + epsilon)))
    return off


def fiber_slice(form: ZeroOneForm, p: BaseFiberPoint, delta: int) -> SliceField:
    """Freeze everything but fiber slot ``delta`` of coefficient b_delta."""
    if not 1 <= delta <= form.k:
        raise IndexError(f"slot {delta} out of range for k={form.k}")
    coeff = form.b_coeffs[delta - 1]
    z = p.z
    w_frozen = p.w

    def value(x):
        x = np.asarray(x, dtype=complex)
        w_arr = np.empty(x.shape + (form.k,), dtype=complex)
        w_arr[...] = w_frozen
        w_arr[..., delta - 1] = x
        return coeff.evaluate(z, w_arr)

    dbar_fn = None
    if coeff.wirtinger is not None:
        analytic = coeff.wirtinger.get((FIBER, delta, True))
        if analytic is not None:
            def dbar_fn(x, _analytic=analytic):
                x = np.asarray(x, dtype=complex)
                w_arr = np.empty(x.shape + (form.k,), dtype=complex)
                w_arr[...] = w_frozen
                w_arr[..., delta - 1] = x
                return _analytic(z, w_arr)

    return SliceField(
        value=value,
        decay=form.decay,
        off_norm=_slot_norm_split(p.w, delta, form.decay.epsilon),
        dbar=dbar_fn,
    )


def freeze_spec(form: ZeroOneForm, p: BaseFiberPoint, delta: int, spec: QuadratureSpec) -> QuadratureSpec:
    """Pin the truncation radius chosen at ``p`` into the spec.

    Derivative stencils must evaluate the solution on a common node layout;
    otherwise the layout jump between stencil points shows up as finite
    difference noise of size error/h instead of error.
    """
    if spec.r_max > 0.0:
        return spec
    sl = fiber_slice(form, p, delta)
    radius = resolve_truncation_radius(sl.decay, sl.off_norm, abs(p.w[delta - 1]), spec)
    return replace(spec, r_max=radius)


def solve_point(
    form: ZeroOneForm,
    p: BaseFiberPoint,
    delta: int = 1,
    spec: QuadratureSpec = QuadratureSpec(),
) -> SolveResult:
    """Solution value at ``p`` through fiber slot ``delta`` (1-based)."""
    sl = fiber_slice(form, p, delta)
    res = cauchy_transform(sl, complex(p.w[delta - 1]), spec)
    return SolveResult(
        res.value, res.err_estimate, delta, replace(spec, r_max=res.r_used),
        res.richardson, res.tail, res.r_used,
    )


def delta_consistency(form: ZeroOneForm, p: BaseFiberPoint, spec: QuadratureSpec) -> float:
    """Largest disagreement between the per-slot solution candidates.

    The transform through any slot solves the same equation, and decaying
    solutions are unique, so all slots must agree up to quadrature error.
    """
    if form.k < 2:
        raise ValueError("slot consistency needs k >= 2")
    results = [solve_point(form, p, d, spec) for d in range(1, form.k + 1)]
    gap = 0.0
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            gap = max(gap, abs(results[i].value - results[j].value))
    return gap


@dataclass(frozen=True)
class ResidualReport:
    """Wirtinger residuals of the computed solution against the form."""

    w_residuals: tuple
    z_residuals: tuple
    fd_step: float
    point: BaseFiberPoint
    quad_err_estimate: float
    quad_richardson: float
    noisy: bool

    @property
    def max_residual(self) -> float:
        return max(self.w_residuals + self.z_residuals, default=0.0)


def residual(
    form: ZeroOneForm,
    p: BaseFiberPoint,
    spec: QuadratureSpec = QuadratureSpec(),
    h: float = 1e-3,
    delta: int = 1,
) -> ResidualReport:
    """Compare conjugate derivatives of the computed solution with the
    coefficients they must equal.

    Derivatives are central differences of ``solve_point`` over a stencil
    that shares one frozen quadrature layout.  Residuals decrease like h^2
    until the quadrature noise floor; a warning is raised when the
    refinement estimate suggests the floor is above h^2.
    """
    if h <= 0.0:
        raise ValueError("fd step must be positive")
    frozen = freeze_spec(form, p, delta, spec)
    center = solve_point(form, p, delta, frozen)
    if center.richardson > h * h:
        warnings.warn(
            "quadrature refinement estimate exceeds h^2; residuals may be noise limited",
            stacklevel=2,
        )

    def value_at(pt: BaseFiberPoint) -> complex:
        return solve_point(form, pt, delta, frozen).value

    w_res = []
    for gamma in range(1, form.k + 1):
        d = wirtinger_fd(value_at, p, VariableId(FIBER, gamma, bar=True), h)
        w_res.append(abs(d - form.b_coeffs[gamma - 1].at(p)))
    z_res = []
    for alpha in range(1, form.n + 1):
        d = wirtinger_fd(value_at, p, VariableId(BASE, alpha, bar=True), h)
        z_res.append(abs(d - form.a_coeffs[alpha - 1].at(p)))
    return ResidualReport(
        tuple(w_res), tuple(z_res), h, p,
        center.err_estimate, center.richardson,
        center.richardson > h * h,
    )


@dataclass(frozen=True)
class DecayProfileRow:
    radius: float
    abs_value: float
    err_estimate: float
    envelope: float


@dataclass(frozen=True)
class DecayProfile:
    rows: tuple

    @property
    def radii(self):
        return tuple(r.radius for r in self.rows)

    @property
    def abs_values(self):
        return tuple(r.abs_value for r in self.rows)

    def within_envelope(self, slack: float = 1e-9) -> bool:
        return all(r.abs_value <= r.envelope + r.err_estimate + slack for r in self.rows)


def decay_profile(
    form: ZeroOneForm,
    z_fixed,
    ray,
    radii: Sequence[float],
    spec: QuadratureSpec = QuadratureSpec(),
    delta: int = 1,
) -> DecayProfile:
    """|solution| along ``w = radius * ray`` at fixed base point.

    Each row also carries the envelope ``(C / 2 pi) * F(|w_delta|)`` built
    from the declared budget and the profile integral with the matching
    frozen-slot norm; the magnitudes must stay inside it and tend to 0.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    ray = np.asarray(ray, dtype=complex).reshape(-1)
    if ray.size != form.k:
        raise ValueError("ray length must equal k")
    z = np.asarray(z_fixed, dtype=complex).reshape(-1)
    eps, c = form.decay.epsilon, form.decay.c_bound
    # The envelope only needs bound-quality accuracy, and its own error
    # estimate widens the bound, so its tail tolerance can stay loose.
    envelope_spec = replace(spec, r_max=0.0, tol_tail=max(spec.tol_tail, 1e-3), tol_abs=max(spec.tol_abs, 1e-6))
    rows = []
    for r in radii:
        p = BaseFiberPoint(z, r * ray)
        res = solve_point(form, p, delta, spec)
        off = _slot_norm_split(p.w, delta, eps)
        x = abs(p.w[delta - 1])
        prof = f_profile(off, eps, [x], envelope_spec)[0]
        envelope = (c / (2.0 * np.pi)) * (prof.value + prof.err_estimate)
        rows.append(DecayProfileRow(r, abs(res.value), res.err_estimate, envelope))
    return DecayProfile(tuple(rows))


@dataclass(frozen=True)
class BmReconstruction:
    interior: complex
    boundary: complex
    field_value: complex

    @property
    def reconstruction_gap(self) -> float:
        return abs(self.interior + self.boundary - self.field_value)


def bm_reconstruct(
    b: ScalarField,
    p: BaseFiberPoint,
    delta: int,
    radius: float,
    spec: QuadratureSpec = QuadratureSpec(),
) -> BmReconstruction:
    """Disc reconstruction of ``b`` at ``p`` through slot ``delta``.

    Splits the field value into the circle average over ``|zeta| = radius``
    (recentered at the slot coordinate) and the interior integral of the
    conjugate slot derivative against the kernel.  The derivative must be
    supplied analytically; differencing inside the singular integral is not
    stable enough at the assumed smoothness.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if not 1 <= delta <= p.k:
        raise IndexError(f"slot {delta} out of range")
    if b.wirtinger is None or (FIBER, delta, True) not in b.wirtinger:
        raise MissingDerivativeError(
            "reconstruction requires the analytic conjugate slot derivative"
        )
    center = complex(p.w[delta - 1])
    k = p.k
    z = p.z
    w_frozen = p.w
    dfn = b.wirtinger[(FIBER, delta, True)]

    def slotted(fn, x):
        x = np.asarray(x, dtype=complex)
        w_arr = np.empty(x.shape + (k,), dtype=complex)
        w_arr[...] = w_frozen
        w_arr[..., delta - 1] = x
        return fn(z, w_arr)

    interior, _, _ = _refined_polar(
        lambda x: slotted(dfn, x), center, radius, max(4.0, 2.0 * abs(center) + 4.0),
        spec, with_kernel_phase=True, prefactor=-1.0 / np.pi,
    )

    n_theta = spec.n_theta
    prev = None
    boundary = 0.0 + 0.0j
    for _ in range(spec.max_refinements + 1):
        theta = (2.0 * np.pi / n_theta) * np.arange(n_theta)
        samples = np.asarray(slotted(b.evaluate, center + radius * np.exp(1j * theta)), dtype=complex)
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSampleError("non-finite sample on the boundary circle")
        boundary = complex(samples.mean())
        if prev is not None and abs(boundary - prev) <= spec.tol_abs:
            break
        prev = boundary
        n_theta *= 2
    return BmReconstruction(interior, boundary, b.at(p))
