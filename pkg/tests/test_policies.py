import json

import numpy as np
import pytest
from scipy import stats

from slicelab.policies import (
    PolicyError,
    PolicySpec,
    augment,
    grid_enumerate,
    sample_policy,
    sample_policy_stages,
    search_space,
)
from slicelab.rng import Rng
from slicelab.transforms import BASE16_KINDS, COLOR_KINDS, KIND_BY_NAME, KINDS, SHAPE_KINDS
from tests.conftest import random_image


def trra(n_color=5, n_shape=2, m_lo=5, m_hi=30, p=0.9):
    return PolicySpec("TRRA", n_color=n_color, n_shape=n_shape,
                      m_lo=m_lo, m_hi=m_hi, p=p)


# ---------------------------------------------------------------------------
# spec validation and serialization


def test_variant_field_requirements():
    with pytest.raises(PolicyError):
        PolicySpec("RA", n=2)                     # missing m
    with pytest.raises(PolicyError):
        PolicySpec("RRA23", n=2, m_lo=10, m_hi=5)  # inverted range
    with pytest.raises(PolicyError):
        trra(p=1.5)
    with pytest.raises(PolicyError):
        trra(n_color=14)
    with pytest.raises(PolicyError):
        PolicySpec("BOGUS", n=1, m=1)


def test_json_roundtrip_omits_absent_fields():
    spec = PolicySpec("RA", n=2, m=5)
    obj = spec.to_json()
    assert obj == {"variant": "RA", "n": 2, "m": 5}
    assert PolicySpec.from_json(json.loads(json.dumps(obj))) == spec
    spec2 = trra()
    assert PolicySpec.from_json(spec2.to_json()) == spec2
    with pytest.raises(PolicyError):
        PolicySpec.from_json({"variant": "RA", "n": 2, "m": 5, "bogus": 1})


# ---------------------------------------------------------------------------
# sampling semantics


def test_ra_draws_n_instances_at_fixed_level():
    spec = PolicySpec("RA", n=2, m=5)
    names16 = {k.name for k in BASE16_KINDS}
    for trial in range(50):
        out = sample_policy(spec, Rng.derive(trial))
        assert len(out) == 2
        for t in out:
            assert t.level == 5
            assert t.kind in names16


def test_ra23_uses_full_space_ra_does_not():
    extended = {k.name for k in KINDS} - {k.name for k in BASE16_KINDS}
    seen_ra, seen_ra23 = set(), set()
    for trial in range(3000):
        for t in sample_policy(PolicySpec("RA", n=1, m=5), Rng.derive(trial, 1)):
            seen_ra.add(t.kind)
        for t in sample_policy(PolicySpec("RA23", n=1, m=5), Rng.derive(trial, 2)):
            seen_ra23.add(t.kind)
    assert not (seen_ra & extended)
    assert seen_ra23 & extended
    assert len(search_space(PolicySpec("RA", n=1, m=5))) == 16
    assert len(search_space(PolicySpec("RA23", n=1, m=5))) == 23


def test_rra23_levels_inside_bounds():
    spec = PolicySpec("RRA23", n=4, m_lo=5, m_hi=20)
    for trial in range(200):
        for t in sample_policy(spec, Rng.derive(trial)):
            assert 5 <= t.level <= 20


def test_trra_p0_always_empty():
    spec = trra(p=0.0)
    for trial in range(100):
        assert sample_policy(spec, Rng.derive(trial)) == []


def test_trra_p1_exact_category_counts():
    spec = trra(p=1.0)
    for trial in range(100):
        out = sample_policy(spec, Rng.derive(trial))
        assert len(out) == 7
        cats = [KIND_BY_NAME[t.kind].category for t in out]
        assert cats.count("color") == 5
        assert cats.count("shape") == 2
        # color stage first
        assert cats == ["color"] * 5 + ["shape"] * 2


def test_trra_category_purity_pre_retention():
    spec = trra(p=0.3)
    for trial in range(200):
        drawn, executed = sample_policy_stages(spec, Rng.derive(trial))
        cats = [KIND_BY_NAME[t.kind].category for t in drawn]
        assert cats.count("color") == 5 and cats.count("shape") == 2
        assert len(executed) <= len(drawn)
        it = iter(drawn)
        assert all(any(t is u for u in it) for t in executed)  # executed is a subsequence


def test_sampling_is_deterministic():
    spec = trra()
    a = sample_policy(spec, Rng.derive(7, 3, 1))
    b = sample_policy(spec, Rng.derive(7, 3, 1))
    assert a == b
    c = sample_policy(spec, Rng.derive(8, 3, 1))
    assert a != c  # overwhelmingly likely


# ---------------------------------------------------------------------------
# statistical properties (all seeded, hence reproducible)


def test_trra_mean_executed_count_monte_carlo():
    # binomial(7, 0.9) mean 6.3; 10,000 draws keeps the MC error << 0.1
    spec = trra(p=0.9)
    total = sum(len(sample_policy(spec, Rng.derive(1000, i))) for i in range(10_000))
    assert total / 10_000 == pytest.approx(6.3, abs=0.1)


def test_trra_retention_rate_within_3_sigma():
    spec = trra(p=0.9)
    draws = 20_000
    kept = sum(len(sample_policy(spec, Rng.derive(55, i))) for i in range(draws))
    n = draws * 7
    sigma = (n * 0.9 * 0.1) ** 0.5
    assert abs(kept - n * 0.9) <= 3 * sigma


def test_level_distribution_uniform_chi_square():
    spec = trra(p=1.0)
    counts = np.zeros(26)
    for i in range(10_000):
        for t in sample_policy(spec, Rng.derive(2000, i)):
            counts[t.level - 5] += 1
    expected = counts.sum() / 26
    statistic = ((counts - expected) ** 2 / expected).sum()
    assert statistic < stats.chi2.ppf(0.99, df=25)


def test_ra_kind_frequency_uniform_chi_square():
    spec = PolicySpec("RA", n=1, m=10)
    counts = {k.name: 0 for k in BASE16_KINDS}
    draws = 40_000
    for i in range(draws):
        counts[sample_policy(spec, Rng.derive(3000, i))[0].kind] += 1
    expected = draws / 16
    statistic = sum((c - expected) ** 2 / expected for c in counts.values())
    assert statistic < stats.chi2.ppf(0.99, df=15)


# ---------------------------------------------------------------------------
# augment


def test_augment_empty_policy_returns_input_copy(np_rng):
    img = random_image(np_rng)
    out = augment(img, trra(p=0.0), Rng.derive(1))
    assert out is not img
    assert np.array_equal(out, img)


def test_augment_deterministic_bytes(np_rng):
    img = random_image(np_rng, 48, 56)
    spec = trra()
    a = augment(img, spec, Rng.derive(11, 0, 5))
    b = augment(img, spec, Rng.derive(11, 0, 5))
    assert a.tobytes() == b.tobytes()


def test_augment_matches_manual_application(np_rng):
    from slicelab.transforms import apply_transform

    img = random_image(np_rng, 48, 56)
    spec = trra(p=1.0)
    instances = sample_policy(spec, Rng.derive(21))
    manual = img
    for t in instances:
        manual = apply_transform(manual, t)
    assert np.array_equal(augment(img, spec, Rng.derive(21)), manual)


# ---------------------------------------------------------------------------
# grid enumeration


def test_grid_counts():
    assert len(grid_enumerate("RA")) == 48
    assert len(grid_enumerate("RA23")) == 48
    assert len(grid_enumerate("RRA23")) == 40
    assert len(grid_enumerate("TRRA")) == 36


def test_ra_grid_structure():
    grid = grid_enumerate("RA")
    assert {(s.n, s.m) for s in grid} == {
        (n, m) for n in range(1, 9) for m in (5, 10, 15, 20, 25, 30)
    }


def test_rra23_grid_structure():
    grid = grid_enumerate("RRA23")
    assert all(s.m_lo == 5 for s in grid)
    assert {(s.n, s.m_hi) for s in grid} == {
        (n, x) for n in range(1, 9) for x in (10, 15, 20, 25, 30)
    }


def test_trra_grid_is_6_by_6_with_sum_7():
    grid = grid_enumerate("TRRA")
    cells = {(s.n_color, s.p) for s in grid}
    assert cells == {
        (nc, p) for nc in range(1, 7) for p in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
    }
    assert all(s.n_color + s.n_shape == 7 for s in grid)
    assert all((s.m_lo, s.m_hi) == (5, 30) for s in grid)


def test_grid_unknown_variant():
    with pytest.raises(PolicyError):
        grid_enumerate("XX")
