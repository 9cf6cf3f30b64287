import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lipbandits.analysis as an
from lipbandits.analysis import (DegenerateFit, InsufficientData, QuadratureUnstable,
                                 build_report, estimate_dimensions, fit_exponent,
                                 kT_from_budget, kT_lower, lower_integral, packing_sum_bound,
                                 truncated_integral)
from lipbandits.geometry import Region
from lipbandits.instances import cone, custom, multipeak, one_sided_step, plateau

SYMMETRIC = [cone(), plateau(), multipeak()]


def test_truncated_integral_closed_forms():
    # cone: 2 (8 + (8 - 2)) = 28; plateau: 2 (8 + (8 - 4)) = 24
    assert truncated_integral(cone(), 3) == pytest.approx(28, rel=0.01)
    assert truncated_integral(plateau(), 3) == pytest.approx(24, rel=0.01)


def test_truncated_integral_at_zero_is_volume_bound():
    for inst in SYMMETRIC:
        assert truncated_integral(inst, 0) <= 1.0 + 1e-9


def test_lower_integral_closed_form():
    # k_T = 4: 2 * (16 - 2)
    assert lower_integral(cone(), 4096) == pytest.approx(28, rel=0.01)


def test_lower_integral_of_flat_instance_is_zero():
    flat = custom(lambda x: np.ones(x.shape[0]), d=1, lipschitz=1.0, fstar=1.0,
                  maximizer=Region.whole(1))
    assert lower_integral(flat, 10 ** 4) == 0.0


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 2 ** 62), st.sampled_from([1, 2, 3]))
def test_kT_lower_formula(T, d):
    # floor(log2 T / n) = floor(floor(log2 T) / n) for integer n
    assert kT_lower(T, d) == (T.bit_length() - 1) // (d + 2)


def test_kT_lower_example():
    assert kT_lower(4096, 1) == 4


@pytest.mark.parametrize("inst", SYMMETRIC, ids=lambda i: i.family)
@pytest.mark.parametrize("T", [10 ** 3, 4096, 10 ** 5])
def test_upper_dominates_lower(inst, T):
    k = kT_lower(T, inst.d)
    assert truncated_integral(inst, k) >= lower_integral(inst, T)


def test_kT_from_budget_values():
    # cone, L = 1: every level set is covered by one ball, so the largest k has 4^(k-2) < T
    assert kT_from_budget(cone(), 10 ** 4, 1.0) == 8
    assert kT_from_budget(cone(), 1, 1.0) == 1


@pytest.mark.parametrize("inst", [cone(), plateau(), cone(2)], ids=lambda i: f"{i.family}-{i.d}")
def test_kT_from_budget_monotone(inst):
    ks = [kT_from_budget(inst, 2 ** j) for j in range(0, 18)]
    assert ks == sorted(ks)


def test_packing_sum_hand_count():
    # annulus [0, .25] u [.75, 1] holds 2 points at separation > .5; X_{1/4} holds 1
    assert packing_sum_bound(cone(), 1, 1.0) == (4.0, 1.0)


def test_packing_sum_empty_annulus():
    flat = plateau(lo=0.0, hi=1.0)
    assert packing_sum_bound(flat, 3, 1.0) == (0.0, 0.0)


@pytest.mark.parametrize("k", range(2, 9))
def test_series_integral_ratio_closed_form(k):
    # cone and plateau: both the integral and the first sum equal 4 * 2^k - 4
    for inst in (cone(), plateau()):
        assert truncated_integral(inst, k) / packing_sum_bound(inst, k)[0] == pytest.approx(1, rel=0.01)


@pytest.mark.parametrize("inst", [cone(), plateau(), multipeak(), one_sided_step(),
                                  one_sided_step(0.2, 0.3, 0.4)], ids=lambda i: i.family)
def test_dimension_estimates(inst):
    dz, ds = estimate_dimensions(inst)
    assert dz.slope == pytest.approx(inst.dz_true, abs=0.15)
    assert ds.slope == pytest.approx(inst.dstar_true, abs=0.15)
    assert ds.slope <= dz.slope + 1 + 0.2


def test_point_maximizer_has_zero_dimension():
    _, ds = estimate_dimensions(cone(2))
    assert ds.slope == 0.0 and set(ds.counts) == {1}


def test_degenerate_fit():
    with pytest.raises(DegenerateFit):
        an._log_fit(np.array([0.5, 0.25]), [0, 0])


def test_fit_exact_power_law():
    T = np.array([1e3, 1e4, 1e5, 1e6])
    R = np.repeat((7 * T ** 0.5)[:, None], 10, axis=1)
    fit = fit_exponent(T, R)
    assert fit.slope == pytest.approx(0.5, abs=0.01)
    assert fit.ci_low == pytest.approx(0.5, abs=1e-9) and fit.ci_high == pytest.approx(0.5, abs=1e-9)


def test_fit_power_law_with_log():
    T = np.geomspace(1e3, 1e6, 7)
    R = np.repeat((T ** 0.5 * np.log(T))[:, None], 10, axis=1)
    # local slope is 0.5 + 1 / ln T, between 0.572 and 0.645 on this range
    slope = fit_exponent(T, R).slope
    assert 0.5 + 1 / math.log(1e6) < slope < 0.5 + 1 / math.log(1e3)
    assert slope == pytest.approx(0.5 + np.mean(1 / np.log(T)), abs=0.005)


def test_fit_constant_curve():
    T = np.array([1e3, 1e4, 1e5, 1e6])
    R = np.full((4, 10), 3.0)
    assert fit_exponent(T, R).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_ci_covers_slope_with_noise(rng):
    T = np.array([1e3, 1e4, 1e5, 1e6])
    R = (T ** 0.4)[:, None] * rng.lognormal(0, 0.3, size=(4, 20))
    fit = fit_exponent(T, R)
    assert fit.ci_low <= fit.slope <= fit.ci_high
    assert fit_exponent(T, R).ci_low == fit.ci_low


@pytest.mark.parametrize("T,seeds,msg", [
    ([1e3, 1e4, 1e5], 10, "4 horizons"),
    ([1e3, 2e3, 4e3, 8e3], 10, "decades"),
    ([1e3, 1e4, 1e5, 1e6], 5, "seeds"),
])
def test_fit_insufficient(T, seeds, msg):
    with pytest.raises(InsufficientData, match=msg):
        fit_exponent(T, np.ones((len(T), seeds)))


def test_fit_rejects_nonpositive_mean():
    with pytest.raises(InsufficientData):
        fit_exponent([1e3, 1e4, 1e5, 1e6], np.zeros((4, 10)))


def test_quadrature_refinement_is_stable():
    d = an._midpoint_sum(cone().gaps, lambda g: np.maximum(g, 1 / 8) ** -2.0, 1, 256)
    d2 = an._midpoint_sum(cone().gaps, lambda g: np.maximum(g, 1 / 8) ** -2.0, 1, 512)
    assert abs(d - d2) / d2 < 0.01


def test_quadrature_unstable(monkeypatch):
    # refinements that keep doubling never settle
    monkeypatch.setattr(an, "_midpoint_sum", lambda gap_fn, weight, d, n: float(n))
    with pytest.raises(QuadratureUnstable):
        truncated_integral(cone(), 2)


def test_quadrature_accepts_small_residual_change(monkeypatch):
    monkeypatch.setattr(an, "MAX_CELLS", 8)
    monkeypatch.setattr(an, "_midpoint_sum", lambda gap_fn, weight, d, n: 1.0 + 0.3 / n)
    value, n, change = an.adaptive_quadrature(None, None, 1, 4)
    assert n == 8 and 0.01 < change < 0.05


def test_three_dimensional_integral():
    # cone in 3D at k_T = 0 integrates 1 over all non-maximizing points
    assert truncated_integral(cone(3), 0) == pytest.approx(1.0, rel=1e-6)


def test_build_report():
    rep = build_report(cone(), 4096).to_dict()
    assert rep["kT_lower"] == 4
    assert rep["upper_integral"] >= rep["lower_integral"]
    assert rep["dz_est"] == pytest.approx(0.0, abs=0.15)
