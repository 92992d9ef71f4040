import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from snsqkd import ChannelParams, ProtocolParams
from snsqkd import simulator
from snsqkd.core import PhasePair
from snsqkd.simulator import (
    TallySet,
    WindowRecord,
    classify_x_bit,
    classify_z_bit,
    expected_z1_fraction,
    run_protocol,
    simulate_windows,
)
from snsqkd.simulator import _numpy_kernel as nk
from snsqkd.simulator._rng import stream_key, uniform, uniforms

PROTO = ProtocolParams(phase_slice=0.05, epsilon=0.1)
CHAN = ChannelParams(distance_km=20, misalignment=0.05, dark_count_prob=1e-4)

needs_compiled = pytest.mark.skipif(simulator._compiled is None, reason="compiled kernel not built")


def test_uniforms_vector_matches_scalar():
    key = stream_key(99)
    idx = np.array([0, 1, 2, 10**9, 2**40])
    vec = uniforms(key, idx, 3)
    assert list(vec) == [uniform(key, int(i), 3) for i in idx]
    assert np.all((vec >= 0) & (vec < 1))


def test_uniforms_look_uniform():
    u = uniforms(stream_key(5), np.arange(200_000), 0)
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    v = uniforms(stream_key(5), np.arange(200_000), 1)
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.01


def test_negative_seed_is_accepted():
    assert stream_key(-1) == stream_key(2**64 - 1)


@pytest.mark.parametrize("mean", [0.0, 0.01, 0.4, 2.0, 30.0])
def test_poisson_sampler_is_inverse_cdf(mean):
    u = np.linspace(0.0005, 0.9995, 400)
    k = nk.poisson_icdf(u, np.full(u.shape, mean))
    ref = stats.poisson.ppf(u, mean) if mean > 0 else np.zeros_like(u)
    assert np.array_equal(k, ref.astype(np.int64))


@pytest.mark.parametrize("n, p", [(0, 0.3), (1, 0.5), (5, 0.01), (12, 0.7), (7, 1.0), (9, 0.0)])
def test_binomial_sampler_is_inverse_cdf(n, p):
    u = np.linspace(0.0005, 0.9995, 400)
    k = nk.binomial_icdf(u, np.full(u.shape, n), np.full(u.shape, p))
    ref = stats.binom.ppf(u, n, p)
    assert np.array_equal(k, ref.astype(np.int64))


def test_same_seed_same_tallies():
    a = run_protocol(PROTO, CHAN, 50_000, seed=11)
    b = run_protocol(PROTO, CHAN, 50_000, seed=11)
    c = run_protocol(PROTO, CHAN, 50_000, seed=12)
    assert a == b
    assert a.to_json() == b.to_json()
    assert a != c


def test_partition_invariance():
    ref = run_protocol(PROTO, CHAN, 30_001, seed=3)
    assert run_protocol(PROTO, CHAN, 30_001, seed=3, block_size=977) == ref
    assert run_protocol(PROTO, CHAN, 30_001, seed=3, block_size=4096, workers=4) == ref


def test_blocks_add_up():
    args = simulator._kernel_args(PROTO, CHAN)
    key = stream_key(8)
    whole = nk.simulate_block(key, 0, 20_000, **args)
    parts = nk.simulate_block(key, 0, 7_000, **args) + nk.simulate_block(key, 7_000, 13_000, **args)
    assert np.array_equal(whole, parts)
    n = len(PROTO.decoy_intensities)
    merged = TallySet.from_counts(PROTO.decoy_intensities, 7_000, nk.simulate_block(key, 0, 7_000, **args)) + TallySet.from_counts(
        PROTO.decoy_intensities, 13_000, nk.simulate_block(key, 7_000, 13_000, **args)
    )
    assert merged == TallySet.from_counts(PROTO.decoy_intensities, 20_000, whole)
    assert len(whole) == nk.n_counts(n)


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 123456789])
def test_backends_agree_exactly(seed):
    for ch in (CHAN, ChannelParams(distance_km=300, misalignment=0.3)):
        a = run_protocol(PROTO, ch, 200_000, seed, backend="numpy")
        b = run_protocol(PROTO, ch, 200_000, seed, backend="compiled")
        assert a == b


def test_unknown_backend():
    with pytest.raises(ValueError):
        run_protocol(PROTO, CHAN, 10, 0, backend="gpu")


def test_rejects_bad_inputs():
    with pytest.raises(ValueError, match="n_windows"):
        run_protocol(PROTO, CHAN, 0, 0)
    with pytest.raises(ValueError, match="phase_slice"):
        run_protocol(PROTO.replace(phase_slice=0.0), CHAN, 10, 0)


def test_records_match_tallies():
    n = 40_000
    recs = simulate_windows(PROTO, CHAN, seed=21, count=n)
    t = run_protocol(PROTO, CHAN, n, seed=21)
    z = [r for r in recs if r.kind == "Z"]
    assert len(z) == t.z_windows
    assert sum(r.effective for r in z) == t.z_effective
    assert sum(classify_z_bit(r) == "error" for r in z if r.effective) == t.z_errors
    assert sum(r.kind == "mismatched" for r in recs) == t.mismatched_windows
    for i, mu in enumerate(PROTO.decoy_intensities):
        xs = [r for r in recs if r.kind == "X" and r.intensity == mu]
        assert len(xs) == t.x_windows[i]
        acc = [r for r in xs if r.accepted]
        assert len(acc) == t.x_accepted[i]
        eff = [r for r in acc if r.effective]
        assert len(eff) == t.x_effective[i]
        assert sum(classify_x_bit(r) == "wrong" for r in eff) == t.x_errors[i]


def test_records_respect_protocol_rules():
    for r in simulate_windows(PROTO, CHAN, seed=4, count=5_000):
        if r.kind == "X":
            assert r.accepted == (1 - abs(math.cos(r.phases.delta_a - r.phases.delta_b)) <= PROTO.phase_slice)
            if not r.accepted:
                assert r.outcome == "none"
        elif r.kind == "Z":
            if r.decisions == (False, False):
                assert r.source_photons == 0
        else:
            assert r.outcome == "none" and not r.effective


def _rec(kind, outcome, phases=(0.0, 0.0), decisions=None, accepted=True):
    return WindowRecord(0, kind, decisions, 0.1 if kind == "X" else None, PhasePair(*phases), 1, outcome, accepted if kind == "X" else None)


def test_classify_x_examples():
    assert classify_x_bit(_rec("X", "left")) == "right"
    assert classify_x_bit(_rec("X", "right")) == "wrong"
    assert classify_x_bit(_rec("X", "right", (0.0, math.pi))) == "right"
    assert classify_x_bit(_rec("X", "left", (0.0, math.pi))) == "wrong"
    with pytest.raises(ValueError):
        classify_x_bit(_rec("X", "both"))
    with pytest.raises(ValueError):
        classify_x_bit(_rec("X", "left", accepted=False))


def test_classify_z_examples():
    assert classify_z_bit(_rec("Z", "left", decisions=(True, False))) == "correct"
    assert classify_z_bit(_rec("Z", "right", decisions=(False, True))) == "correct"
    assert classify_z_bit(_rec("Z", "left", decisions=(True, True))) == "error"
    assert classify_z_bit(_rec("Z", "left", decisions=(False, False))) == "error"
    with pytest.raises(ValueError):
        classify_z_bit(_rec("Z", "none", decisions=(True, False)))


def test_window_class_frequencies():
    n = 400_000
    t = run_protocol(PROTO, CHAN, n, seed=9)
    qz = PROTO.q_signal**2
    assert abs(t.z_windows - qz * n) < 4 * math.sqrt(n * qz * (1 - qz))
    for i, q in enumerate(PROTO.q_decoy):
        assert abs(t.x_windows[i] - q * q * n) < 4 * math.sqrt(n * q * q)
    p1 = expected_z1_fraction(PROTO)
    assert abs(t.z1_windows - p1 * t.z_windows) < 4 * math.sqrt(t.z_windows * p1)
    assert t.z_windows + sum(t.x_windows) + t.mismatched_windows == n


def test_tally_json_round_trip():
    t = run_protocol(PROTO, CHAN, 5_000, seed=1)
    assert TallySet.from_dict(t.to_dict()) == t
    with pytest.raises(ValueError):
        t + TallySet.from_dict({**t.to_dict(), "intensities": [0.0, 0.2, 0.3]})


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**63), st.integers(1, 3000))
def test_any_seed_is_deterministic(seed, n):
    assert run_protocol(PROTO, CHAN, n, seed) == run_protocol(PROTO, CHAN, n, seed, block_size=128)
