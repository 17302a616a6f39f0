import numpy as np
import pytest

from dbar_fiber.cauchy import (
    QuadratureSpec,
    SliceField,
    cauchy_transform,
    f_profile,
    g_bound_check,
    kernel_mass_bound,
    resolve_truncation_radius,
    tail_bound,
)
from dbar_fiber.errors import NonFiniteSampleError, TruncationError
from dbar_fiber.fields import DecayBudget

SPEC = QuadratureSpec(n_r=24, n_theta=64, tol_abs=1e-8, tol_tail=1e-4)


def gaussian_slice():
    return SliceField(value=lambda z: np.exp(-np.abs(z) ** 2) + 0.0j, decay=DecayBudget(1.0, 1.0))


def gaussian_oracle(w):
    w = complex(w)
    return 0.0 if w == 0 else -np.expm1(-abs(w) ** 2) / w


def rational_slice():
    return SliceField(
        value=lambda z: 1.0 / (1.0 + np.abs(z) ** 2) ** 2 + 0.0j, decay=DecayBudget(3.0, 1.5)
    )


def rational_oracle(w):
    w = complex(w)
    return np.conj(w) / (1.0 + abs(w) ** 2)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(n_theta=7)
    with pytest.raises(ValueError):
        QuadratureSpec(n_theta=10, n_r=1)
    with pytest.raises(ValueError):
        QuadratureSpec(tol_abs=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(r_max=-1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_refinements=0)


def test_zero_field_transforms_to_exact_zero():
    zero = SliceField(value=lambda z: np.zeros(np.shape(z), complex), decay=DecayBudget(1.0, 1.0))
    res = cauchy_transform(zero, 0.7 + 0.3j, SPEC)
    assert res.value == 0.0


def test_gaussian_center_zero_vanishes_by_symmetry():
    res = cauchy_transform(gaussian_slice(), 0.0, SPEC)
    assert abs(res.value) < 1e-13


@pytest.mark.parametrize("w", [1.0, 0.5 + 0.5j, -2.0 + 1.0j, 3.5j])
def test_gaussian_transform_oracle(w):
    res = cauchy_transform(gaussian_slice(), w, SPEC)
    exact = gaussian_oracle(w)
    assert abs(res.value - exact) <= res.err_estimate
    assert abs(res.value - exact) <= 1e-8


@pytest.mark.parametrize("w", [1.0, 2.0 + 1.0j, 0.1j])
def test_rational_transform_oracle(w):
    res = cauchy_transform(rational_slice(), w, QuadratureSpec(n_r=24, n_theta=64, tol_tail=1e-6))
    exact = rational_oracle(w)
    assert abs(res.value - exact) <= res.err_estimate
    assert abs(res.value - exact) <= 1e-6


def test_transform_rejects_non_finite_samples():
    bad = SliceField(
        value=lambda z: np.where(np.abs(z) > 1.0, np.inf, 1.0) + 0.0j, decay=DecayBudget(1.0, 1.0)
    )
    with pytest.raises(NonFiniteSampleError):
        cauchy_transform(bad, 0.0, SPEC)


def test_tail_bound_closed_form_and_monotone():
    budget = DecayBudget(1.0, 1.0)
    # center 0: bound is 2*C*(pi/2 - arctan R)
    for radius in (10.0, 100.0):
        exact = 2.0 * (np.pi / 2 - np.arctan(radius))
        assert tail_bound(budget, 0.0, 0.0, radius) == pytest.approx(exact, rel=1e-9)
    assert tail_bound(budget, 0.0, 0.0, 100.0) <= 2e-2
    radii = [8.0, 16.0, 64.0, 256.0]
    bounds = [tail_bound(budget, 0.0, 1.0, r) for r in radii]
    assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
    # R * bound(R) tends to the constant 2 C / eps
    assert 1e5 * tail_bound(budget, 0.0, 0.0, 1e5) == pytest.approx(2.0, rel=1e-4)


def test_tail_bound_rejects_small_radius():
    with pytest.raises(ValueError):
        tail_bound(DecayBudget(1.0, 1.0), 0.0, 2.0, 3.9)


def test_resolve_radius_respects_explicit_and_cap():
    budget = DecayBudget(1.0, 1.0)
    spec = QuadratureSpec(r_max=32.0)
    assert resolve_truncation_radius(budget, 0.0, 1.0, spec) == 32.0
    with pytest.raises(TruncationError):
        resolve_truncation_radius(budget, 0.0, 20.0, QuadratureSpec(r_max=32.0))
    tight = QuadratureSpec(tol_tail=1e-9, r_cap=1e4)
    with pytest.raises(TruncationError):
        resolve_truncation_radius(budget, 0.0, 0.0, tight)


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_kernel_mass_under_bound(eps):
    km = kernel_mass_bound(eps)
    assert km.numeric_value <= km.analytic_bound
    p = 1.0 + eps
    reflection = 4.0 * np.pi * (np.pi / p) / np.sin(np.pi / p)
    assert km.numeric_value == pytest.approx(reflection, rel=1e-9)


def test_kernel_mass_exact_at_eps_one():
    km = kernel_mass_bound(1.0)
    assert km.numeric_value == pytest.approx(2.0 * np.pi ** 2, rel=1e-10)
    assert km.analytic_bound == pytest.approx(8.0 * np.pi, rel=1e-15)


def test_kernel_mass_large_eps_limit():
    km = kernel_mass_bound(50.0)
    assert km.analytic_bound == pytest.approx(4.0 * np.pi * 1.02, rel=1e-12)
    assert km.numeric_value <= km.analytic_bound


def test_g_bound_values():
    gb = g_bound_check(0.0, 1.0)
    assert gb.value == pytest.approx(np.pi, rel=1e-10)
    assert gb.analytic_bound == 4.0
    assert gb.ok
    shifted = g_bound_check(3.0, 1.0)
    assert shifted.value < gb.value
    # off_norm enters as an additive constant: exact closed form at eps = 1
    assert shifted.value == pytest.approx(np.pi / np.sqrt(4.0), rel=1e-10)


PROFILE_SPEC = QuadratureSpec(n_r=12, n_theta=128, tol_abs=1e-6, tol_tail=2e-3, max_refinements=3)


def test_f_profile_matches_kernel_mass_at_origin():
    prof = f_profile(0.0, 1.0, [0.0], PROFILE_SPEC)[0]
    assert abs(prof.value - 2.0 * np.pi ** 2) <= 1.2 * prof.err_estimate + 1e-6


def test_f_profile_monotone_and_vanishing():
    prof = f_profile(0.0, 1.0, [0.0, 1.0, 2.0, 4.0, 8.0, 16.0], PROFILE_SPEC)
    values = [p.value for p in prof]
    errs = [p.err_estimate for p in prof]
    for (v1, e1), (v2, e2) in zip(zip(values, errs), zip(values[1:], errs[1:])):
        assert v2 <= v1 + 2.0 * max(e1, e2)
    # strict decrease is far larger than the error bars here
    assert values[-1] < 0.25 * values[0]


def test_f_profile_large_offset_kills_mass():
    tiny = f_profile(1e8, 1.0, [0.0], PROFILE_SPEC)[0]
    base = f_profile(0.0, 1.0, [0.0], PROFILE_SPEC)[0]
    assert tiny.value <= 1e-2 * base.value


def test_f_profile_input_validation():
    with pytest.raises(ValueError):
        f_profile(0.0, 1.0, [1.0, 1.0], PROFILE_SPEC)
    with pytest.raises(ValueError):
        f_profile(0.0, 1.0, [-1.0], PROFILE_SPEC)
    with pytest.raises(TruncationError):
        f_profile(0.0, 1.0, [8.0], QuadratureSpec(r_max=10.0))


def test_f_profile_clamps_radius_at_cap_with_honest_error():
    # heavy tails (small exponent) cannot meet a tight tail target under a
    # small cap; the profile clamps the radius and reports the shortfall
    spec = QuadratureSpec(n_r=8, n_theta=32, tol_abs=1e-5, tol_tail=1e-6, r_cap=512.0, max_refinements=2)
    pt = f_profile(0.0, 0.5, [0.0], spec)[0]
    assert pt.r_used <= 512.0
    assert pt.err_estimate > 1e-6
    # the reported error really does dominate the missing mass
    reference = f_profile(0.0, 0.5, [0.0], QuadratureSpec(n_r=8, n_theta=32, tol_abs=1e-5, tol_tail=1e-4))[0]
    assert abs(pt.value - reference.value) <= pt.err_estimate


def test_richardson_estimate_shrinks_with_resolution():
    coarse_spec = QuadratureSpec(n_r=6, n_theta=16, tol_abs=1e-30, max_refinements=1, r_max=12.0)
    fine_spec = QuadratureSpec(n_r=12, n_theta=32, tol_abs=1e-30, max_refinements=1, r_max=12.0)
    coarse = cauchy_transform(gaussian_slice(), 1.0, coarse_spec)
    fine = cauchy_transform(gaussian_slice(), 1.0, fine_spec)
    assert fine.richardson < coarse.richardson


def test_linearity_translation_conjugation_quick():
    rng = np.random.default_rng(42)
    spec = QuadratureSpec(n_r=12, n_theta=32, tol_abs=1e-7, r_max=14.0)
    budget = DecayBudget(1.0, 4.0)
    for _ in range(3):
        mu1, mu2 = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.5
        c1, c2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        f1 = SliceField(value=lambda z, m=mu1: np.exp(-np.abs(z - m) ** 2) + 0j, decay=budget)
        f2 = SliceField(value=lambda z, m=mu2: np.exp(-np.abs(z - m) ** 2) + 0j, decay=budget)
        combo = SliceField(
            value=lambda z, m1=mu1, m2=mu2, a=c1, b=c2: a * np.exp(-np.abs(z - m1) ** 2)
            + b * np.exp(-np.abs(z - m2) ** 2),
            decay=budget,
        )
        w = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 0.7

        lhs = cauchy_transform(combo, w, spec)
        rhs1 = cauchy_transform(f1, w, spec)
        rhs2 = cauchy_transform(f2, w, spec)
        gap = abs(lhs.value - (c1 * rhs1.value + c2 * rhs2.value))
        assert gap <= lhs.err_estimate + abs(c1) * rhs1.err_estimate + abs(c2) * rhs2.err_estimate
        assert gap <= 1e-6

        shift = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 0.5
        shifted = SliceField(value=lambda z, m=mu1, c=shift: np.exp(-np.abs(z + c - m) ** 2) + 0j, decay=budget)
        lhs2 = cauchy_transform(shifted, w, spec)
        rhs3 = cauchy_transform(f1, w + shift, spec)
        assert abs(lhs2.value - rhs3.value) <= lhs2.err_estimate + rhs3.err_estimate + 1e-8

        mirrored = SliceField(
            value=lambda z, m=mu1: np.conj(np.exp(-np.abs(np.conj(z) - m) ** 2)) + 0j, decay=budget
        )
        lhs3 = cauchy_transform(mirrored, w, spec)
        rhs4 = cauchy_transform(f1, np.conj(w), spec)
        assert abs(lhs3.value - np.conj(rhs4.value)) <= lhs3.err_estimate + rhs4.err_estimate + 1e-8


def test_rotation_reduction_for_radial_fields():
    # for radial fields the transform magnitude depends on |w| only
    spec = QuadratureSpec(n_r=16, n_theta=64, tol_abs=1e-9, r_max=16.0)
    base = cauchy_transform(gaussian_slice(), 1.3, spec)
    for theta in (0.7, 2.1):
        rotated = cauchy_transform(gaussian_slice(), 1.3 * np.exp(1j * theta), spec)
        assert abs(abs(rotated.value) - abs(base.value)) <= (
            base.err_estimate + rotated.err_estimate + 1e-10
        )


def test_transform_determinism():
    res1 = cauchy_transform(gaussian_slice(), 0.9 - 0.4j, SPEC)
    res2 = cauchy_transform(gaussian_slice(), 0.9 - 0.4j, SPEC)
    assert res1.value == res2.value
    assert res1.err_estimate == res2.err_estimate
