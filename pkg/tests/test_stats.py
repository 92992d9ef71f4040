import math

import pytest

from snsqkd import ChannelParams, ProtocolParams
from snsqkd.channel import analytic_rates
from snsqkd.simulator import run_protocol
from snsqkd.simulator.stats import _row, compare_with_analytic, format_table, observed_rates


def test_row_z_score():
    r = _row("x", 0.5, 60, 100)
    assert r.stderr == pytest.approx(0.05)
    assert r.z_score == pytest.approx(2.0)
    assert _row("x", 0.0, 0, 100).z_score == 0.0
    assert _row("x", 0.0, 1, 100).z_score == math.inf


def test_comparison_at_moderate_statistics():
    pr = ProtocolParams(phase_slice=0.05, q_signal=0.4)
    ch = ChannelParams(distance_km=30, misalignment=0.08, dark_count_prob=1e-5)
    t = run_protocol(pr, ch, 3_000_000, seed=41)
    rows = compare_with_analytic(t, pr, ch)
    names = [r.quantity for r in rows]
    assert "s0" in names and "e1_true (X1 tags)" in names
    assert all(abs(r.z_score) < 4 for r in rows), format_table(rows)


def test_observed_rates_shape():
    pr = ProtocolParams(phase_slice=0.05)
    ch = ChannelParams(distance_km=30)
    emp = observed_rates(run_protocol(pr, ch, 500_000, seed=1), pr)
    ref = analytic_rates(pr, ch)
    assert emp.intensities == ref.intensities
    assert emp.s_z == pytest.approx(ref.s_z, rel=0.05)
    assert emp.s1_true == pytest.approx(ref.s1_true, rel=0.05)


def test_format_table_lists_every_row():
    pr = ProtocolParams(phase_slice=0.05)
    ch = ChannelParams(distance_km=30)
    rows = compare_with_analytic(run_protocol(pr, ch, 10_000, seed=1), pr, ch)
    assert len(format_table(rows).splitlines()) == len(rows) + 2
