"""
Tests for the synthetic tape generator and its oracles.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from src.errors import BadSpec
from src.ingest import parse_tape, write_tape
from src.power_sums import accumulate, to_moments
from src.price_moments import frequency_price_stats, moment_gap, price_moments_from_trades, price_volume_correlation
from src.synthetic import (
    GENERATOR_NAME,
    TapeSpec,
    draw,
    generate,
    load_spec,
    oracle_price_moments,
    population_price_moments,
    write_tape_with_metadata,
)
from src.trade_model import WindowedTrades, window_of

FIXTURES = Path(__file__).parent / "fixtures"


def _spec(**overrides):
    base = {
        "n_trades": 1000,
        "seed": 42,
        "price_law": {"kind": "lognormal", "mu": 3.0, "s": 0.2},
        "volume_law": {"kind": "lognormal", "mu": 0.0, "s": 0.8},
        "dependence": {"kind": "independent"},
    }
    base.update(overrides)
    return load_spec(base)


def _whole(ticks):
    first, last = ticks[0].timestamp, ticks[-1].timestamp
    return WindowedTrades(window_of(first, last - first + 1), tuple(ticks))


def test_constant_volume_two_point():
    spec = _spec(
        n_trades=3,
        price_law={"kind": "two_point", "p_a": 1.0, "p_b": 3.0, "w": 0.5},
        volume_law={"kind": "constant", "c": 1.0},
    )
    ticks = generate(spec)
    assert len(ticks) == 3
    assert all(t.volume == 1.0 for t in ticks)
    assert all(t.price in (1.0, 3.0) for t in ticks)
    assert [t.timestamp for t in ticks] == [0, 1_000_000_000, 2_000_000_000]


def test_same_seed_same_bytes():
    spec = _spec()
    assert write_tape(generate(spec)) == write_tape(generate(spec))
    other = spec.model_copy(update={"seed": 43})
    assert write_tape(generate(other)) != write_tape(generate(spec))


@pytest.mark.parametrize(
    "overrides",
    [
        {"n_trades": 0},
        {"price_law": {"kind": "lognormal", "mu": 0.0, "s": 0.0}},
        {"price_law": {"kind": "uniform", "a": 3.0, "b": 2.0}},
        {"price_law": {"kind": "two_point", "p_a": 1.0, "p_b": 2.0, "w": 1.0}},
        {"volume_law": {"kind": "constant", "c": -1.0}},
        {"price_law": {"kind": "gamma", "k": 2.0}},
        {"dependence": {"kind": "volume_follows_price"}},
    ],
)
def test_invalid_specs(overrides):
    with pytest.raises(BadSpec):
        _spec(**overrides)


def test_invalid_json():
    with pytest.raises(BadSpec):
        load_spec("{not json")


def test_load_spec_fixture_with_seed_override():
    spec = load_spec((FIXTURES / "lognormal_spec.json").read_text(), seed=5)
    assert spec.seed == 5
    assert spec.n_trades == 2000


def test_independent_draws_are_uncorrelated():
    spec = _spec(n_trades=100_000)
    window = _whole(generate(spec))
    corr = price_volume_correlation(window)
    assert abs(corr) <= 3.0 / math.sqrt(spec.n_trades)


def test_estimator_recovers_oracle_moments():
    spec = _spec(n_trades=100_000, seed=2024)
    start = time.perf_counter()
    ticks = generate(spec)
    window = _whole(ticks)
    stats = price_moments_from_trades(to_moments(accumulate(window, 4)))
    elapsed = time.perf_counter() - start
    oracle = oracle_price_moments(spec, ticks, 4)
    for n in range(1, 5):
        gap, se = moment_gap(window, n)
        assert stats.p[n - 1] - oracle[n - 1] == pytest.approx(gap, rel=1e-6, abs=1e-9 * oracle[n - 1])
        assert abs(stats.p[n - 1] - oracle[n - 1]) <= 5.0 * se
    assert elapsed < 2.0


def test_seed_2024_tape_follows_the_stream_rule():
    spec = _spec(n_trades=100_000, seed=2024)
    price_seq, volume_seq = np.random.SeedSequence(2024).spawn(2)
    z_price = np.random.Generator(np.random.PCG64(price_seq)).standard_normal(spec.n_trades)
    z_volume = np.random.Generator(np.random.PCG64(volume_seq)).standard_normal(spec.n_trades)
    prices, volumes = draw(spec)
    np.testing.assert_array_equal(prices, np.exp(3.0 + 0.2 * z_price))
    np.testing.assert_array_equal(volumes, np.exp(0.0 + 0.8 * z_volume))

    # p(1..4) of the pinned tape, summed independently of the accumulator.
    ticks = generate(spec)
    stats = price_moments_from_trades(to_moments(accumulate(_whole(ticks), 4)))
    values = np.array([t.value for t in ticks])
    vols = np.array([t.volume for t in ticks])
    for n in range(1, 5):
        expected = math.fsum(values ** n) / math.fsum(vols ** n)
        assert stats.p[n - 1] == pytest.approx(expected, rel=1e-12)


def test_oracle_equals_estimator_for_constant_volume():
    spec = _spec(volume_law={"kind": "constant", "c": 2.0})
    ticks = generate(spec)
    stats = price_moments_from_trades(to_moments(accumulate(_whole(ticks), 4)))
    oracle = oracle_price_moments(spec, ticks, 4)
    for got, want in zip(stats.p, oracle):
        assert got == pytest.approx(want, rel=1e-12)


def test_comonotone_biases_vwap_upwards():
    spec = _spec(
        price_law={"kind": "two_point", "p_a": 1.0, "p_b": 3.0, "w": 0.5},
        volume_law={"kind": "uniform", "a": 1.0, "b": 3.0},
        dependence={"kind": "comonotone"},
    )
    ticks = generate(spec)
    window = _whole(ticks)
    vwap = price_moments_from_trades(to_moments(accumulate(window, 1))).mean
    assert vwap > oracle_price_moments(spec, ticks, 1)[0]


def test_comonotone_same_law_gives_volume_equal_price():
    law = {"kind": "lognormal", "mu": 1.0, "s": 0.3}
    spec = _spec(price_law=law, volume_law=law, dependence={"kind": "comonotone"})
    prices, volumes = draw(spec)
    np.testing.assert_array_equal(prices, volumes)


def test_volume_following_price_separates_vwap_from_mean():
    spec = _spec(n_trades=100_000, dependence={"kind": "volume_follows_price", "beta": 1.0})
    window = _whole(generate(spec))
    gap, se = moment_gap(window, 1)
    vwap = price_moments_from_trades(to_moments(accumulate(window, 1))).mean
    assert vwap - frequency_price_stats(window).mean > 0
    assert gap > 10.0 * se


def test_population_moments_of_two_point():
    spec = _spec(price_law={"kind": "two_point", "p_a": 1.0, "p_b": 3.0, "w": 0.25})
    assert population_price_moments(spec, 2) == (2.5, 7.0)


def test_write_tape_with_metadata(tmp_path):
    spec = _spec(n_trades=10)
    ticks = generate(spec)
    target = tmp_path / "out" / "tape.csv"
    sidecar = write_tape_with_metadata(ticks, spec, target)
    assert sidecar == tmp_path / "out" / "tape.csv.meta.json"
    assert parse_tape(target.read_bytes()) == ticks
    meta = json.loads(sidecar.read_text())
    assert meta["generator"] == GENERATOR_NAME
    assert meta["seed"] == 42
    assert TapeSpec.model_validate(meta["spec"]) == spec
