import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dpcore import (
    LogWeight,
    RandomSource,
    derive_source,
    log_add,
    sample_exponential,
    sample_gaussian,
    sample_laplace,
    sample_snapped_laplace,
    sample_two_sided_geometric,
)
from dpcore.randomness import _power_of_two_at_least, _round_to_ladder
from dpcore.testing import ScriptedSource, zero_noise_source
from oracles import log_add_mp


# -- the random source itself -------------------------------------------------

def test_no_integer_seed_constructor():
    """The seeding API contract: OS entropy or derivation, nothing else."""
    sig = inspect.signature(RandomSource.__init__)
    public = [p for p in sig.parameters.values()
              if p.name != "self" and not p.name.startswith("_")]
    assert public == []
    assert not hasattr(RandomSource, "seed")
    assert not hasattr(RandomSource, "from_seed")
    sig = inspect.signature(RandomSource.from_os_entropy)
    assert list(sig.parameters) == []


def test_stream_is_nontrivial_and_sources_differ():
    a, b = RandomSource.from_os_entropy(), RandomSource.from_os_entropy()
    assert a.bytes(32) != b.bytes(32)
    assert a.bytes(32) != a.bytes(32)


def test_derive_source_forks_the_stream():
    parent = RandomSource.from_os_entropy()
    c1, c2 = derive_source(parent), derive_source(parent)
    assert c1.bytes(32) != c2.bytes(32)
    assert c1.bytes(32) != parent.bytes(32)


def test_uniform_is_in_open_interval(rng):
    u = rng.uniform(100_000)
    assert np.all(u > 0) and np.all(u < 1)


def test_uniform_full_reaches_small_dyadic_ranges(rng):
    u = rng.uniform_full(200_000)
    assert np.all(u > 0) and np.all(u < 1)
    # With 2e5 draws, values below 2^-10 appear ~195 times in expectation.
    assert np.sum(u < 2.0**-10) > 50
    # Full mantissa precision below 2^-32: such values are not on the
    # 2^-53 grid a naive uniform would produce.
    tiny = u[u < 2.0**-32]
    if tiny.size:
        assert np.any(tiny * 2.0**53 != np.round(tiny * 2.0**53))


def test_uniform_full_exponent_is_geometric(rng):
    u = rng.uniform_full(400_000)
    exps = -np.floor(np.log2(u))
    counts = [np.sum(exps == k) for k in range(1, 8)]
    n = len(u)
    expected = [n * 2.0**-k for k in range(1, 8)]
    chi2 = sum((c - e) ** 2 / e for c, e in zip(counts, expected))
    assert chi2 < 30  # 6 dof, far beyond any reasonable quantile


def test_randbelow_bounds_and_uniformity(rng):
    draws = [rng.randbelow(6) for _ in range(6000)]
    assert min(draws) == 0 and max(draws) == 5
    _, p = stats.chisquare(np.bincount(draws, minlength=6))
    assert p > 1e-6


def test_randbelow_rejects_nonpositive(rng):
    with pytest.raises(ValueError):
        rng.randbelow(0)


# -- log-domain arithmetic ------------------------------------------------------

@given(st.floats(-700, 700), st.floats(-700, 700))
def test_log_add_matches_high_precision_oracle(x, y):
    assert log_add(x, y) == pytest.approx(log_add_mp(x, y), rel=1e-12)


@given(st.floats(-700, 700, allow_nan=False), st.floats(-700, 700),
       st.floats(-700, 700))
def test_log_add_is_commutative_and_monotone(x, y, z):
    assert log_add(x, y) == log_add(y, x)
    assert log_add(x, y) >= max(x, y)
    ab = log_add(log_add(x, y), z)
    ba = log_add(x, log_add(y, z))
    assert ab == pytest.approx(ba, rel=1e-13)


def test_log_add_identity_and_extremes():
    assert log_add(-math.inf, 5.0) == 5.0
    assert log_add(5.0, -math.inf) == 5.0
    assert log_add(-math.inf, -math.inf) == -math.inf
    assert math.isfinite(log_add(700.0, 700.0))
    assert log_add(-700.0, -700.0) == pytest.approx(-700.0 + math.log(2), rel=1e-15)
    # A 1400-order-of-magnitude gap: the small side must not be lost to
    # a linear-scale underflow, it is just negligible.
    assert log_add(700.0, -700.0) == 700.0


def test_log_weight_addition():
    w = LogWeight.zero() + LogWeight(0.0) + LogWeight(0.0)
    assert w.value == pytest.approx(math.log(2.0))


# -- scripted sources -----------------------------------------------------------

def test_scripted_source_is_deterministic():
    a = ScriptedSource(uniforms=(0.25, 0.75))
    b = ScriptedSource(uniforms=(0.25, 0.75))
    assert a.uniform(4).tolist() == b.uniform(4).tolist() == [0.25, 0.75, 0.25, 0.75]


def test_zero_noise_source_silences_laplace():
    assert sample_laplace(zero_noise_source(), scale=7.3) == 0.0
    assert sample_exponential(zero_noise_source(), scale=7.3) == 0.0


# -- continuous samplers ---------------------------------------------------------

def test_laplace_moments_and_shape(rng):
    x = sample_laplace(rng, 2.0, size=400_000)
    assert abs(float(np.mean(x))) < 0.03
    assert float(np.var(x)) == pytest.approx(8.0, rel=0.05)
    # Kolmogorov-Smirnov against the target CDF.
    _, p = stats.kstest(x[:50_000], stats.laplace(scale=2.0).cdf)
    assert p > 1e-6


def test_exponential_moments(rng):
    x = sample_exponential(rng, 3.0, size=400_000)
    assert np.all(x >= 0)
    assert float(np.mean(x)) == pytest.approx(3.0, rel=0.02)
    _, p = stats.kstest(x[:50_000], stats.expon(scale=3.0).cdf)
    assert p > 1e-6


def test_gaussian_moments(rng):
    x = sample_gaussian(rng, 1.5, size=400_000)
    assert abs(float(np.mean(x))) < 0.02
    assert float(np.var(x)) == pytest.approx(2.25, rel=0.05)
    _, p = stats.kstest(x[:50_000], stats.norm(scale=1.5).cdf)
    assert p > 1e-6


@pytest.mark.parametrize("sampler", [sample_laplace, sample_exponential, sample_gaussian])
def test_samplers_reject_nonpositive_scale(sampler, rng):
    with pytest.raises(ValueError):
        sampler(rng, 0.0)
    with pytest.raises(ValueError):
        sampler(rng, -1.0)


# -- snapped laplace ---------------------------------------------------------------

def test_power_of_two_ladder_helper():
    assert _power_of_two_at_least(1.0) == 1.0
    assert _power_of_two_at_least(1.1) == 2.0
    assert _power_of_two_at_least(0.3) == 0.5
    assert _power_of_two_at_least(8.0) == 8.0


def test_round_to_ladder_ties_toward_plus_infinity():
    assert _round_to_ladder(0.5, 1.0) == 1.0
    assert _round_to_ladder(-0.5, 1.0) == 0.0
    assert _round_to_ladder(0.49, 1.0) == 0.0
    assert _round_to_ladder(1.75, 0.5) == 2.0  # exact tie between 1.5 and 2.0
    assert _round_to_ladder(-3.2, 2.0) == -4.0


def test_snapped_laplace_outputs_live_on_the_ladder(rng):
    scale, clamp = 1.3, 50.0
    lam = _power_of_two_at_least(scale)
    for _ in range(500):
        y = sample_snapped_laplace(rng, 10.0, scale, clamp)
        assert -clamp <= y <= clamp
        assert y == _round_to_ladder(y, lam)  # multiple of lam (or clamp hit)


def test_snapped_laplace_clamps_input_and_output():
    y = sample_snapped_laplace(zero_noise_source(), 1e9, scale=1.0, clamp=4.0)
    assert y == 4.0
    with pytest.raises(ValueError):
        sample_snapped_laplace(zero_noise_source(), 0.0, scale=1.0, clamp=-1.0)


def test_snapped_laplace_distribution_close_to_laplace(rng):
    scale = 2.0
    x = np.array([sample_snapped_laplace(rng, 0.0, scale, 1e6) for _ in range(20_000)])
    assert float(np.mean(x)) == pytest.approx(0.0, abs=0.1)
    assert float(np.var(x)) == pytest.approx(2 * scale**2, rel=0.15)


# -- two-sided geometric --------------------------------------------------------------

def test_two_sided_geometric_pmf(rng):
    alpha = 0.5
    x = sample_two_sided_geometric(rng, alpha, size=30_000)
    assert np.all(x == np.round(x))
    norm = (1 - alpha) / (1 + alpha)
    observed = np.bincount(np.abs(x.astype(int)), minlength=8)[:8].astype(float)
    # Fold the distribution: P(|k| = j) = 2 * norm * alpha^j for j >= 1.
    expected = np.array([norm] + [2 * norm * alpha**j for j in range(1, 8)]) * len(x)
    tail = len(x) - expected.sum()
    chi2, p = stats.chisquare(np.append(observed[:8], len(x) - observed[:8].sum()),
                              np.append(expected, tail))
    assert p > 1e-6


def test_two_sided_geometric_rejects_bad_alpha(rng):
    with pytest.raises(ValueError):
        sample_two_sided_geometric(rng, 0.0)
    with pytest.raises(ValueError):
        sample_two_sided_geometric(rng, 1.0)


# -- throughput guard -------------------------------------------------------------

def test_bulk_laplace_sampling_is_fast(rng):
    import time
    t0 = time.perf_counter()
    sample_laplace(rng, 1.0, size=1_000_000)
    assert time.perf_counter() - t0 < 2.0
