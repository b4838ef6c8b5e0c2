import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hallmhd.algebra import l1_fourier_norm, multiply, sobolev_norm, w_inf_norm
from hallmhd.data import (
    ConstraintError,
    EmptyAnnulusError,
    PaperParams,
    annulus_mask,
    assemble_initial_data,
    beltrami_residual,
    build_beltrami_seed,
    build_cutoff,
    check_annulus,
    cutoff_profile,
    decay_surrogate,
    divergence_residual,
    helical_basis,
    helical_wave_seed,
    random_small_field,
    remark_h3_envelope,
    smooth_step,
    verify_seed_properties,
)
from hallmhd.spectral import GridSpec, SpectralField, curl, gradient, leray_project, resample


def curl_symbol(xi):
    x, y, z = xi
    return 1j * np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_helical_vector_is_the_positive_curl_eigenvector(xi):
    xi = np.array(xi)
    vals, vecs = np.linalg.eigh(curl_symbol(xi))
    top = vecs[:, np.argmax(vals)]
    h = helical_basis(xi)
    assert np.max(vals) == pytest.approx(np.linalg.norm(xi), rel=1e-10)
    assert abs(np.vdot(top, h)) == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.norm(h) == pytest.approx(1.0)
    assert abs(np.dot(xi, h)) < 1e-10 * np.linalg.norm(xi)


def test_helical_basis_rejects_zero_wavevector():
    with pytest.raises(ValueError):
        helical_basis(np.zeros(3))


def test_parameter_constraints():
    with pytest.raises(ConstraintError, match=r"0 < delta <= 1/2"):
        PaperParams(delta=0.6)
    with pytest.raises(ConstraintError, match="M0 >= 1"):
        PaperParams(m0=0.5)
    with pytest.raises(ConstraintError):
        PaperParams(nu=0.0)
    assert PaperParams(m0=3).period == 24.0


def test_empty_annulus_reports_minimal_delta():
    p = PaperParams(m0=1.0, delta=0.05)
    grid = p.grid(16)
    with pytest.raises(EmptyAnnulusError) as err:
        build_beltrami_seed(p, grid)
    # nearest retained |xi| to 1 is |(1,1,0)| * 2 pi / 8
    expect = math.sqrt(2) * 2 * math.pi / 8 - 1
    assert err.value.minimal_delta == pytest.approx(expect)
    assert "minimal feasible delta" in str(err.value)
    assert check_annulus(grid, expect + 1e-9) > 0


@pytest.fixture(scope="module")
def seed():
    p = PaperParams(m0=2.0)
    return build_beltrami_seed(p, p.grid(32), rng_seed=3)


def test_seed_is_beltrami_on_the_annulus(seed):
    rep = verify_seed_properties(seed)
    assert rep.beltrami_residual < 1e-12
    assert rep.divergence_residual < 1e-12
    assert rep.support_exact
    assert rep.l1_fourier == pytest.approx(seed.m1, rel=1e-12)
    assert rep.passed
    assert len(rep.decay_surrogate) == 6
    assert len(seed.mode_list) == np.count_nonzero(annulus_mask(seed.grid, seed.delta))


def test_seed_is_reproducible(seed):
    p = PaperParams(m0=2.0)
    again = build_beltrami_seed(p, p.grid(32), rng_seed=3)
    other = build_beltrami_seed(p, p.grid(32), rng_seed=4)
    assert np.array_equal(again.field.coeffs, seed.field.coeffs)
    assert not np.allclose(other.field.coeffs, seed.field.coeffs)


def test_helical_wave_seed():
    p = PaperParams(m0=1.0, delta=0.5)
    grid = GridSpec(16, 2 * math.pi)
    wave = helical_wave_seed(p, grid, [(1, 0, 0), (0, -1, 0)]).field
    assert beltrami_residual(wave) < 1e-14
    assert l1_fourier_norm(wave) == pytest.approx(p.m1)
    with pytest.raises(ConstraintError):
        helical_wave_seed(p, grid, [(2, 0, 0)])


def test_smooth_step_and_cutoff_profile():
    s = np.linspace(-0.5, 1.5, 20001)
    y = smooth_step(s)
    assert np.all((y >= 0) & (y <= 1))
    assert np.all(y[s <= 0] == 1) and np.all(y[s >= 1] == 0)
    assert np.all(np.diff(y) <= 0)
    assert np.max(np.abs(np.gradient(y, s))) < 2
    r = np.array([0.0, 3.0, 6.0, 9.0])
    assert np.array_equal(cutoff_profile(r, 3.0), [1, 1, 0, 0])


def test_cutoff_must_fit_in_the_box():
    p = PaperParams(m0=2.0)
    with pytest.raises(ConstraintError):
        build_cutoff(p, GridSpec(16, 7.0))
    cut = build_cutoff(p, p.grid(16))
    assert cut.samples.max() == 1.0 and cut.samples.min() == 0.0


def test_random_small_field():
    grid = GridSpec(16, 8.0)
    v = random_small_field(grid, 0.3, 5, 1.0, 2.0)
    assert sobolev_norm(v, 3) == pytest.approx(0.3)
    assert divergence_residual(v) < 1e-14
    outside = (grid.kmag < 1.0) | (grid.kmag > 2.0)
    assert not np.any(v.coeffs[:, outside])
    assert sobolev_norm(random_small_field(grid, 0.0), 0) == 0
    with pytest.raises(ConstraintError):
        random_small_field(grid, 1.0, 0, 50.0, 60.0)


def test_initial_data_assembly(seed):
    p = PaperParams(m0=2.0)
    cut = build_cutoff(p, seed.grid)
    small = random_small_field(seed.grid, 0.2 * p.m0**-0.5, 1)
    data = assemble_initial_data(p, seed, cut, small, small)
    assert data.report["divergence_u0"] < 1e-12
    assert data.report["projection_correction_u_h3"] > 0
    raw = assemble_initial_data(p, seed, cut, project=False)
    assert raw.report["projection_correction_b_h3"] == 0
    with pytest.raises(ConstraintError, match="too large"):
        assemble_initial_data(p, seed, cut, small * 10, small)
    bad = SpectralField(seed.grid, np.zeros((3,) + seed.grid.spectral_shape))
    bad.coeffs[0, 1, 0, 0] = bad.coeffs[0, -1, 0, 0] = 1e-3
    with pytest.raises(ConstraintError, match="divergence"):
        assemble_initial_data(p, seed, cut, bad, None)


def test_h3_envelope_grows_with_alpha():
    assert remark_h3_envelope(PaperParams(alpha1=2.0)) > remark_h3_envelope(PaperParams())


def test_cutoff_plateau_support_and_slope():
    p = PaperParams(m0=4.0)
    grid = p.grid(64)
    cut = build_cutoff(p, grid)
    assert cut.samples[0, 0, 0] == 1.0
    outside = np.isclose(grid.radius, 2 * p.m0 + grid.h)
    assert outside.any() and np.all(cut.samples[outside] == 0.0)
    slope = np.sqrt(sum(c**2 for c in gradient(cut.values).real()))
    assert slope.max() <= 2 / p.m0


def test_axis_aligned_helical_vector():
    h = helical_basis(np.array([1.0, 0.0, 0.0]))
    assert abs(np.vdot(np.array([0, 1, 1j]) / math.sqrt(2), h)) == pytest.approx(1.0, abs=1e-15)


def test_single_helical_wave_norms_in_closed_form():
    # one lattice direction at |xi| = 1.25 inside the annulus [0.5, 1.5]
    p = PaperParams(m0=1.0, delta=0.5)
    grid = GridSpec(32, 8 * math.pi)
    v = helical_wave_seed(p, grid, [(5, 0, 0)]).field
    amp = math.sqrt(2) * p.m1 / (2 * (2 * math.pi) ** 3)
    for k in range(4):
        assert w_inf_norm(v, k) == pytest.approx(amp * 1.25**k, rel=1e-12)
    # a plane wave does not decay, so the weighted sup sits at the largest radius on the grid
    surrogate = decay_surrogate(v)
    assert surrogate[0] == pytest.approx(amp * (1 + grid.radius.max()), rel=1e-12)
    corner = np.unravel_index(np.argmax(grid.radius), grid.radius.shape)
    assert all(abs(grid.coords[i]) == grid.period / 2 for i in corner)


def test_seed_is_linear_in_m1():
    p = PaperParams(m0=2.0)
    grid = p.grid(32)
    one = build_beltrami_seed(p, grid, rng_seed=7)
    two = build_beltrami_seed(dataclasses.replace(p, m1=2 * p.m1), grid, rng_seed=7)
    assert np.allclose(two.field.coeffs, 2 * one.field.coeffs, rtol=1e-14, atol=0)
    for norm in (lambda v: sobolev_norm(v, 3), l1_fourier_norm, lambda v: w_inf_norm(v, 2)):
        assert norm(two.field) == pytest.approx(2 * norm(one.field), rel=1e-12)
    assert np.allclose(decay_surrogate(two.field), 2 * np.array(decay_surrogate(one.field)), rtol=1e-12)


def test_initial_data_degenerate_cases(seed):
    p = PaperParams(m0=2.0, alpha1=1.5, alpha2=0.0)
    cut = build_cutoff(p, seed.grid)
    data = assemble_initial_data(p, seed, cut)
    assert not np.any(data.b0.coeffs)
    expect = leray_project(multiply(cut.samples, seed.field) * 1.5)
    assert np.allclose(data.u0.coeffs, expect.coeffs, rtol=0, atol=1e-15)

    off = dataclasses.replace(p, alpha1=0.0)
    u01 = random_small_field(seed.grid, 0.1, 1)
    b01 = random_small_field(seed.grid, 0.2, 2)
    small = assemble_initial_data(off, seed, cut, u01, b01)
    assert np.array_equal(small.u0.coeffs, u01.coeffs)
    assert np.array_equal(small.b0.coeffs, b01.coeffs)


@pytest.fixture(scope="module")
def data_by_m0():
    out = {}
    for m0 in (2.0, 4.0, 8.0):
        p = PaperParams(m0=m0)
        grid = p.grid(64)
        s = build_beltrami_seed(p, grid, rng_seed=0)
        out[m0] = (p, assemble_initial_data(p, s, build_cutoff(p, grid)))
    return out


def test_h3_size_follows_the_envelope_across_m0(data_by_m0):
    ratios = []
    for p, data in data_by_m0.values():
        total = data.report["u0_h3"] + data.report["b0_h3"]
        env = remark_h3_envelope(p)
        assert total <= env
        ratios.append(total / env)
    assert max(ratios) < 2 * min(ratios)


def test_sup_size_is_set_by_m1_not_m0(data_by_m0):
    sups = [d.report["u0_linf"] + d.report["b0_linf"] for _, d in data_by_m0.values()]
    assert (max(sups) - min(sups)) / max(sups) < 0.2


def test_decay_surrogate_is_stable_under_refinement(seed):
    coarse = np.array(decay_surrogate(seed.field))
    fine = np.array(decay_surrogate(resample(seed.field, seed.grid.refined(2))))
    assert np.all(np.isfinite(coarse))
    assert np.allclose(fine, coarse, rtol=0.05, atol=0)


@pytest.mark.parametrize("delta", [0.5, 0.25, 0.1])
def test_seed_is_close_to_a_unit_curl_eigenfield(delta):
    p = PaperParams(m0=4.0, delta=delta)
    s = build_beltrami_seed(p, p.grid(64), rng_seed=2)
    v = s.field
    assert sobolev_norm(curl(v) - v, 0) <= delta * sobolev_norm(v, 0) * (1 + 1e-12)
