import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from snsqkd import ChannelParams, ProtocolParams
from snsqkd.channel import (
    ObservedRates,
    analytic_rates,
    arm_transmittance,
    click_probabilities,
    single_photon_rates,
    slice_acceptance,
    slice_half_angle,
    x_window_rates,
    z_window_rates,
)


def test_arm_transmittance_examples():
    assert arm_transmittance(ChannelParams()) == 0.8
    assert arm_transmittance(ChannelParams(distance_km=100, detector_efficiency=1.0)) == pytest.approx(0.1, rel=1e-15)
    assert arm_transmittance(ChannelParams(distance_km=100)) == pytest.approx(0.08, rel=1e-15)


def test_click_examples():
    clean = ChannelParams(dark_count_prob=0.0)
    assert click_probabilities(0.0, 0.0, clean) == (0.0, 0.0, 0.0, 1.0)
    left, right, both, none = click_probabilities(0.7, 0.0, clean)
    assert left == pytest.approx(1 - math.exp(-0.7), rel=1e-15)
    assert right == 0.0 and both == 0.0
    mis = clean.replace(misalignment=0.1)
    left, right, both, none = click_probabilities(0.7, 0.0, mis)
    p_left = 1 - math.exp(-0.9 * 0.7)
    p_right = 1 - math.exp(-0.1 * 0.7)
    assert right == pytest.approx(p_right * (1 - p_left), rel=1e-14)
    assert left == pytest.approx(p_left * (1 - p_right), rel=1e-14)


intensity = st.floats(min_value=0.0, max_value=50.0)
prob = st.floats(min_value=0.0, max_value=1.0)


@given(intensity, intensity, prob, prob)
def test_click_probabilities_sum_to_one(il, ir, pd, ea):
    out = click_probabilities(il, ir, ChannelParams(dark_count_prob=pd, misalignment=ea))
    assert abs(sum(float(v) for v in out) - 1.0) <= 1e-12
    assert all(-1e-15 <= float(v) <= 1 + 1e-15 for v in out)


@given(intensity, intensity, prob, prob)
def test_click_probabilities_swap_ports(il, ir, pd, ea):
    ch = ChannelParams(dark_count_prob=pd, misalignment=ea)
    a = click_probabilities(il, ir, ch)
    b = click_probabilities(ir, il, ch)
    assert a[0] == pytest.approx(b[1], abs=1e-15)
    assert a[2] == pytest.approx(b[2], abs=1e-15)


def _z_closed_form(eps, mu, ch):
    """Exactly-one-click probabilities with the phase average done by Bessel I0.

    Evaluated in 40-digit arithmetic because the two terms nearly cancel at
    long distance.
    """
    mp = mpmath.mp
    mp.dps = 40
    eta = mpmath.mpf(arm_transmittance(ch))
    pd = mpmath.mpf(ch.dark_count_prob)
    e = mpmath.mpf(ch.misalignment)
    eps, mu = mpmath.mpf(eps), mpmath.mpf(mu)
    t = eta * mu
    keep = 1 - pd
    single = 2 * (keep * mpmath.exp(-t / 2) - keep**2 * mpmath.exp(-t))
    # <exp(-t (1 - c cos th))> over th is exp(-t) I0(t c)
    both = 2 * (keep * mpmath.exp(-t) * mpmath.besseli(0, t * (1 - 2 * e)) - keep**2 * mpmath.exp(-2 * t))
    none = 2 * pd * keep
    wrong = (1 - eps) ** 2 * none + eps**2 * both
    s = wrong + 2 * eps * (1 - eps) * single
    return float(s), float(wrong / s)


@pytest.mark.parametrize("distance, ea, pd", [(0, 0, 0), (0, 0.1, 1e-6), (150, 0.25, 1e-11), (600, 0.05, 1e-8)])
@pytest.mark.parametrize("eps, mu", [(0.05, 0.4), (0.3, 0.9), (1e-4, 0.02)])
def test_z_rates_against_bessel_closed_form(distance, ea, pd, eps, mu):
    ch = ChannelParams(distance_km=distance, misalignment=ea, dark_count_prob=pd)
    s, e = z_window_rates(eps, mu, ch)
    s_ref, e_ref = _z_closed_form(eps, mu, ch)
    assert s == pytest.approx(s_ref, rel=1e-11)
    assert e == pytest.approx(e_ref, rel=1e-11)


def test_z_rates_broadcast_like_scalars():
    ch = ChannelParams(distance_km=200, misalignment=0.1)
    eps = np.array([0.01, 0.1, 0.3])[:, None]
    mu = np.array([0.1, 0.5])[None, :]
    s, e = z_window_rates(eps, mu, ch)
    assert s.shape == (3, 2)
    assert s[1, 1] == z_window_rates(0.1, 0.5, ch)[0]


def test_z_error_vanishes_without_noise_as_epsilon_shrinks():
    ch = ChannelParams(distance_km=50, dark_count_prob=0.0)
    errors = [z_window_rates(eps, 0.4, ch)[1] for eps in (1e-2, 1e-4, 1e-6)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-6


def test_x_rates_matched_limit_closed_form():
    ch = ChannelParams(distance_km=80, misalignment=0.07, dark_count_prob=1e-7)
    mu = 0.2
    s, e = x_window_rates(mu, 0.0, ch)
    eta, pd, ea = arm_transmittance(ch), ch.dark_count_prob, ch.misalignment
    total = 2 * eta * mu
    good = (1 - (1 - pd) * math.exp(-(1 - ea) * total)) * (1 - pd) * math.exp(-ea * total)
    bad = (1 - (1 - pd) * math.exp(-ea * total)) * (1 - pd) * math.exp(-(1 - ea) * total)
    assert s == pytest.approx(good + bad, rel=1e-13)
    assert e == pytest.approx(bad / (good + bad), rel=1e-12)


def test_x_rates_finite_slice_against_quad():
    ch = ChannelParams(distance_km=120, misalignment=0.03, dark_count_prob=1e-9)
    mu, lam = 0.3, 0.2
    eta = arm_transmittance(ch)
    half = slice_half_angle(lam)

    def part(which):
        def f(d):
            c2 = math.cos(d / 2) ** 2
            out = click_probabilities(2 * eta * mu * c2, 2 * eta * mu * (1 - c2), ch)
            return float(out[which])

        return integrate.quad(f, 0.0, half, epsabs=0, epsrel=1e-13)[0] / half

    right, wrong = part(0), part(1)
    s, e = x_window_rates(mu, lam, ch)
    assert s == pytest.approx(right + wrong, rel=1e-11)
    assert e == pytest.approx(wrong / (right + wrong), rel=1e-10)


def test_x_error_zero_when_ideal():
    ch = ChannelParams(distance_km=300, dark_count_prob=0.0)
    for mu in (0.05, 0.1, 0.5):
        assert x_window_rates(mu, 0.0, ch)[1] == 0.0


def test_slice_geometry():
    assert slice_half_angle(0.0) == 0.0
    assert slice_half_angle(1.0) == pytest.approx(math.pi / 2)
    # 1 - |cos d| <= lam accepts |d| <= acos(1 - lam) around 0 and pi
    assert slice_acceptance(0.05) == pytest.approx(2 * math.acos(0.95) / math.pi)


def test_single_photon_yield():
    ch = ChannelParams(distance_km=100, misalignment=0.2, dark_count_prob=0.0)
    s1, e1 = single_photon_rates(0.0, ch)
    assert s1 == pytest.approx(arm_transmittance(ch), rel=1e-15)
    assert e1 == pytest.approx(0.2, rel=1e-14)
    noisy = ch.replace(dark_count_prob=1e-6)
    s1n, _ = single_photon_rates(0.0, noisy)
    eta = arm_transmittance(noisy)
    assert s1n >= eta * (1 - 0.2) * (1 - 1e-6) ** 2


def test_analytic_rates_fields():
    pr = ProtocolParams()
    ch = ChannelParams(distance_km=100, misalignment=0.1)
    r = analytic_rates(pr, ch)
    assert r.s0 == pytest.approx(2e-11)
    assert r.intensities == pr.decoy_intensities
    assert r.s_at(0.0) == pytest.approx(r.s0, rel=1e-12)
    assert r.n_t_per_window == pytest.approx(0.25 * r.s_z)
    assert all(0.0 <= v <= 1.0 for v in r.s_mu + r.e_mu_x + (r.s_z, r.e_z, r.s1_true))
    assert ObservedRates.from_dict(r.to_dict()) == r
    with pytest.raises(KeyError):
        r.s_at(0.33)


def test_rates_non_increasing_in_distance():
    pr = ProtocolParams()
    grid = [analytic_rates(pr, ChannelParams(distance_km=d, misalignment=0.1)) for d in range(0, 1001, 50)]
    s_z = [r.s_z for r in grid]
    s_hi = [r.s_mu[-1] for r in grid]
    assert all(a >= b for a, b in zip(s_z, s_z[1:]))
    assert all(a >= b for a, b in zip(s_hi, s_hi[1:]))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 500), st.floats(0, 0.5), st.floats(1e-3, 0.5), st.floats(0.01, 1.0))
def test_rates_are_probabilities(distance, ea, eps, mu):
    r = analytic_rates(ProtocolParams(epsilon=eps, mu_signal=mu), ChannelParams(distance_km=distance, misalignment=ea))
    for v in r.s_mu + r.e_mu_x + (r.s_z, r.e_z, r.s1_true, r.e1_true):
        assert 0.0 <= v <= 1.0
