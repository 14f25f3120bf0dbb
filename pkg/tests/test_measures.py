from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from thetacf.errors import DomainError, ValidationError
from thetacf.measures import (
    MeasureKind,
    extended_rectangle,
    gamma_a_cdf,
    gamma_a_density,
    gamma_a_inverse_cdf,
    gamma_cdf,
    gamma_density,
    gamma_inverse_cdf,
    gk_limit_cdf,
    invariance_check,
    lebesgue_cdf,
    preimage_lebesgue_cdf,
    stationary_digit_law,
)
from thetacf.operator import GridFunction


def test_gamma_cdf_endpoints(ctx):
    assert gamma_cdf(0.0, ctx) == 0.0
    assert gamma_cdf(ctx.theta_f, ctx) == pytest.approx(1.0, abs=1e-15)


def test_gamma_cdf_classical_value(ctx1):
    assert gamma_cdf(0.5, ctx1) == pytest.approx(math.log(1.5) / math.log(2), rel=1e-15)
    assert gamma_cdf(0.5, ctx1) == pytest.approx(0.584962, abs=1e-6)


def test_gamma_density_integrates_to_cdf(ctx):
    x = 0.7 * ctx.theta_f
    value, _ = integrate.quad(lambda t: gamma_density(t, ctx), 0.0, x)
    assert value == pytest.approx(gamma_cdf(x, ctx), rel=1e-12)


def test_gamma_inverse_cdf(ctx):
    u = np.linspace(0.0, 1.0, 11)
    assert_allclose(gamma_cdf(gamma_inverse_cdf(u, ctx), ctx), u, atol=1e-14)


def test_gk_limit_matches_gamma(ctx):
    x = np.linspace(0.0, ctx.theta_f, 101)
    assert_allclose(gk_limit_cdf(x, ctx), gamma_cdf(x, ctx), atol=1e-14)


def test_cdfs_reject_points_outside_domain(ctx2):
    with pytest.raises(DomainError):
        gamma_cdf(1.0, ctx2)
    with pytest.raises(DomainError):
        lebesgue_cdf(-0.1, ctx2)
    with pytest.raises(DomainError):
        gamma_cdf(float("nan"), ctx2)


def test_gamma_a_examples(ctx, ctx1):
    x = np.linspace(0.0, ctx.theta_f, 7)
    assert_allclose(gamma_a_cdf(x, 0.0, ctx), x / ctx.theta_f)
    assert gamma_a_cdf(ctx.theta_f, 0.3 * ctx.theta_f, ctx) == pytest.approx(1.0, abs=1e-15)
    assert gamma_a_cdf(0.5, 1.0, ctx1) == pytest.approx(2 / 3, rel=1e-15)


def test_gamma_a_inverse_and_density(ctx):
    a = 0.4 * ctx.theta_f
    u = np.linspace(0.0, 1.0, 9)
    assert_allclose(gamma_a_cdf(gamma_a_inverse_cdf(u, a, ctx), a, ctx), u, atol=1e-14)
    # density with respect to λ_θ integrates to one
    mass, _ = integrate.quad(lambda t: gamma_a_density(t, a, ctx) / ctx.theta_f, 0.0, ctx.theta_f)
    assert mass == pytest.approx(1.0, rel=1e-12)


def test_extended_rectangle_full_square(ctx):
    th = ctx.theta_f
    assert extended_rectangle(0.0, th, 0.0, th, ctx) == pytest.approx(1.0, rel=1e-14)


def test_extended_rectangle_degenerate(ctx2):
    assert extended_rectangle(0.1, 0.5, 0.3, 0.3, ctx2) == 0.0
    assert extended_rectangle(0.2, 0.2, 0.0, 0.7, ctx2) == 0.0
    with pytest.raises(DomainError):
        extended_rectangle(0.5, 0.1, 0.0, 0.3, ctx2)


def test_extended_rectangle_marginals(ctx):
    th = ctx.theta_f
    for x in np.linspace(0.0, th, 13):
        assert extended_rectangle(0.0, x, 0.0, th, ctx) == pytest.approx(gamma_cdf(x, ctx), abs=1e-14)
        assert extended_rectangle(0.0, th, 0.0, x, ctx) == pytest.approx(gamma_cdf(x, ctx), abs=1e-14)


def test_extended_rectangle_matches_density(ctx3):
    th = ctx3.theta_f
    a, b, c, d = 0.1 * th, 0.6 * th, 0.25 * th, 0.9 * th
    value, _ = integrate.dblquad(lambda y, x: 1.0 / (1.0 + x * y) ** 2, a, b, c, d)
    assert extended_rectangle(a, b, c, d, ctx3) == pytest.approx(value / ctx3.log_norm_f, rel=1e-10)


def test_invariance_check_endpoints(ctx1):
    assert invariance_check(0.0, 1e-12, ctx1) == 0.0
    assert invariance_check(1.0, 1e-12, ctx1) <= 1e-12
    assert invariance_check(0.5, 1e-14, ctx1) <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_invariance_on_grid(contexts, m):
    ctx = contexts[m]
    residuals = [invariance_check(x, 1e-14, ctx) for x in np.linspace(0.0, ctx.theta_f, 100)]
    assert max(residuals) < 1e-10


def test_invariance_check_rejects_bad_tolerance(ctx1):
    with pytest.raises(DomainError):
        invariance_check(0.5, 0.0, ctx1)


def test_preimage_lebesgue_cdf_matches_series(ctx):
    th = ctx.theta_f
    for x in (0.0, 0.3 * th, 0.8 * th, th):
        i = np.arange(ctx.m, ctx.m + 200_000, dtype=np.float64)
        # λ_θ(u_i([0, x))) = (1/(iθ) − 1/(x + iθ))/θ
        series = math.fsum(((1.0 / (i * th) - 1.0 / (x + i * th)) / th).tolist())
        assert preimage_lebesgue_cdf(x, ctx) == pytest.approx(series, abs=ctx.m / 1e5)
    assert preimage_lebesgue_cdf(th, ctx) == pytest.approx(1.0, abs=1e-14)


def test_stationary_digit_law_sums_to_one(ctx):
    i = np.arange(ctx.m, ctx.m + 1_000_000, dtype=np.float64)
    total = math.fsum(np.asarray(stationary_digit_law(i, ctx)).tolist())
    tail = math.log1p(1.0 / (ctx.m + 1_000_000)) / ctx.log_norm_f
    assert total + tail == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        stationary_digit_law(ctx.m - 1, ctx)


@pytest.mark.parametrize(
    "flag, tag",
    [("lebesgue", "lebesgue"), ("gamma", "gamma"), ("gamma-a:0.25", "gamma_a"), ("gamma-a:half", "gamma_a")],
)
def test_measure_from_flag(ctx2, flag, tag):
    kind = MeasureKind.from_flag(flag, ctx2)
    assert kind.tag == tag
    if flag == "gamma-a:half":
        assert kind.a == pytest.approx(ctx2.theta_f / 2)


def test_gamma_a_with_zero_parameter_is_lebesgue(ctx2):
    assert MeasureKind.from_flag("gamma-a:0", ctx2) == MeasureKind.lebesgue()


@pytest.mark.parametrize("flag", ["uniform", "gamma-a:abc", "gamma-a:5", ""])
def test_measure_from_flag_rejects(ctx2, flag):
    with pytest.raises(ValidationError):
        MeasureKind.from_flag(flag, ctx2)


@pytest.mark.parametrize("kind", [MeasureKind.lebesgue(), MeasureKind.gamma(), MeasureKind.gamma_a(0.3)])
def test_measure_sampling_follows_cdf(ctx2, rng, kind):
    values = kind.sample(20_000, rng, ctx2)
    assert np.all((values >= 0.0) & (values <= ctx2.theta_f))
    result = stats.kstest(values, lambda x: kind.cdf(np.clip(x, 0.0, ctx2.theta_f), ctx2))
    assert result.pvalue > 1e-3


def test_custom_measure(ctx1, rng):
    density = GridFunction.from_callable(lambda x: 2.0 * x, 257, ctx1)
    kind = MeasureKind.custom(density)
    assert kind.cdf(0.5, ctx1) == pytest.approx(0.25, abs=1e-12)
    assert_allclose(kind.density_on(np.array([0.25, 1.0]), ctx1), [0.5, 2.0], atol=1e-12)
    values = kind.sample(20_000, rng, ctx1)
    assert stats.kstest(values, lambda x: np.clip(x, 0.0, 1.0) ** 2).pvalue > 1e-3


def test_custom_measure_rejects_negative_density(ctx1, rng):
    density = GridFunction.from_callable(lambda x: x - 0.5, 65, ctx1)
    with pytest.raises(ValidationError):
        MeasureKind.custom(density).sample(10, rng, ctx1)
