"""Analytic model of the fiber links, Charlie's beam splitter and the detectors.

Charlie sits midway, so each arm is ``distance_km / 2`` long. Detectors are
threshold detectors; a window counts as effective only when exactly one of
them clicks. Misalignment is a port swap applied to the mean photon numbers
reaching the two detectors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import TWO_PI
from .params import ChannelParams, ProtocolParams

__all__ = [
    "ChannelParams",
    "IntegrationError",
    "ObservedRates",
    "analytic_rates",
    "arm_transmittance",
    "click_probabilities",
    "slice_acceptance",
    "slice_half_angle",
    "x_window_rates",
    "z_window_rates",
]


class IntegrationError(RuntimeError):
    """A quadrature did not reach its tolerance."""


@dataclass(frozen=True)
class ObservedRates:
    """Counting and error rates consumed by the decoy analysis.

    ``s_mu`` and ``e_mu_x`` are indexed like ``intensities`` (the protocol's
    decoy intensities). ``s1_true`` and ``e1_true`` are the exact yield and
    phase-flip rate of the two-mode single-photon state; they are not
    observable in an experiment and serve as ground truth.
    """

    intensities: tuple[float, ...]
    s0: float
    s_mu: tuple[float, ...]
    e_mu_x: tuple[float, ...]
    s_z: float
    e_z: float
    n_t_per_window: float
    s1_true: float
    e1_true: float

    def index_of(self, mu: float) -> int:
        for i, m in enumerate(self.intensities):
            if m == mu:
                return i
        raise KeyError(f"intensity {mu} not among {self.intensities}")

    def s_at(self, mu: float) -> float:
        return self.s_mu[self.index_of(mu)]

    def e_at(self, mu: float) -> float:
        return self.e_mu_x[self.index_of(mu)]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("intensities", "s_mu", "e_mu_x"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ObservedRates":
        kw = {f.name: data[f.name] for f in fields(cls)}
        for k in ("intensities", "s_mu", "e_mu_x"):
            kw[k] = tuple(kw[k])
        return cls(**kw)


def arm_transmittance(params: ChannelParams) -> float:
    """Probability that a photon leaving Alice (or Bob) is detected at Charlie."""
    loss_db = params.attenuation_db_per_km * params.distance_km / 2.0
    return params.detector_efficiency * 10.0 ** (-loss_db / 10.0)


def _click(intensity, dark):
    # 1 - (1 - p_d) exp(-I), written to keep precision when I and p_d are tiny
    return -np.expm1(-intensity) + dark * np.exp(-intensity)


def click_probabilities(intensity_left, intensity_right, params: ChannelParams):
    """Joint detector outcomes for given mean photon numbers at the two ports.

    Returns ``(left_only, right_only, both, none)``; inputs broadcast.
    """
    e = params.misalignment
    pd = params.dark_count_prob
    il = np.asarray(intensity_left, dtype=float)
    ir = np.asarray(intensity_right, dtype=float)
    il, ir = (1.0 - e) * il + e * ir, (1.0 - e) * ir + e * il
    cl = _click(il, pd)
    cr = _click(ir, pd)
    nl = (1.0 - pd) * np.exp(-il)
    nr = (1.0 - pd) * np.exp(-ir)
    return cl * nr, cr * nl, cl * cr, nl * nr


def _one_click(intensity_left, intensity_right, params):
    left, right, _, _ = click_probabilities(intensity_left, intensity_right, params)
    return left, right


def _periodic_mean(func, rtol=1e-12, n0=16, n_max=1 << 14):
    """Mean of a smooth 2 pi-periodic function; ``func`` maps theta (last axis)."""
    n = n0
    prev = np.mean(func(TWO_PI * np.arange(n) / n), axis=-1)
    while n < n_max:
        n *= 2
        cur = np.mean(func(TWO_PI * np.arange(n) / n), axis=-1)
        if np.all(np.abs(cur - prev) <= rtol * np.abs(cur) + 1e-300):
            return cur
        prev = cur
    raise IntegrationError(f"phase average did not converge with {n} nodes")


def _interval_mean(func, upper, rtol=1e-12):
    """Mean of ``func`` over ``[0, upper]`` by Gauss-Legendre with a doubling check."""
    if upper == 0.0:
        return func(np.zeros(1))[..., 0]
    prev = None
    for n in (8, 16, 32, 64, 128):
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * upper * (x + 1.0)
        cur = np.sum(func(nodes) * (0.5 * w), axis=-1)
        if prev is not None and np.all(np.abs(cur - prev) <= rtol * np.abs(cur) + 1e-300):
            return cur
        prev = cur
    raise IntegrationError(f"slice average did not converge on [0, {upper}]")


def slice_half_angle(lam: float) -> float:
    """Largest |dA - dB| (mod pi) accepted by the phase slice."""
    if lam >= 1.0:
        return math.pi / 2.0
    return math.acos(1.0 - lam)


def slice_acceptance(lam: float) -> float:
    """Fraction of uniformly random phase pairs passing the phase slice."""
    return 2.0 * slice_half_angle(lam) / math.pi


def z_window_rates(epsilon, mu_signal, params: ChannelParams):
    """Z-window counting rate and bit error rate; broadcasts over inputs.

    Returns ``(s_z, e_z)``. Nobody sends with probability ``(1-eps)^2``, one
    party sends with ``2 eps (1-eps)`` (the pulse splits evenly at the beam
    splitter), and both send with ``eps^2`` (interference at a random,
    unannounced relative phase).
    """
    eps = np.asarray(epsilon, dtype=float)
    mu = np.asarray(mu_signal, dtype=float)
    eta = arm_transmittance(params)
    pd = params.dark_count_prob

    none = 2.0 * pd * (1.0 - pd)
    half = eta * mu / 2.0
    single = np.add(*_one_click(half, half, params))

    t = (eta * mu)[..., None]

    def both_send(theta):
        c = np.cos(theta)
        return np.add(*_one_click(t * (1.0 + c), t * (1.0 - c), params))

    both = _periodic_mean(both_send)

    p_none = (1.0 - eps) ** 2
    p_single = 2.0 * eps * (1.0 - eps)
    p_both = eps**2
    wrong = p_none * none + p_both * both
    s_z = wrong + p_single * single
    e_z = np.divide(wrong, s_z, out=np.zeros(np.broadcast(wrong, s_z).shape), where=s_z > 0)
    if np.ndim(s_z) == 0:
        return float(s_z), float(e_z)
    return s_z, e_z


def x_window_rates(mu: float, lam: float, params: ChannelParams):
    """Counting rate and error rate of accepted X windows at intensity ``mu``.

    The relative phase is averaged over the accepted slice; ``lam == 0`` is
    the matched-phase limit. Returns ``(s_mu, e_mu)``.
    """
    eta = arm_transmittance(params)
    total = 2.0 * eta * mu

    def rates(delta):
        c2 = np.cos(delta / 2.0) ** 2
        right, wrong = _one_click(total * c2, total * (1.0 - c2), params)
        return np.stack([right, wrong])

    right, wrong = _interval_mean(rates, slice_half_angle(lam))
    s = right + wrong
    return float(s), float(wrong / s) if s > 0 else 0.0


def single_photon_rates(lam: float, params: ChannelParams):
    """Exact yield and error rate of the two-mode single-photon state."""
    eta = arm_transmittance(params)
    e = params.misalignment
    pd = params.dark_count_prob

    def wrong_port(delta):
        s2 = np.sin(delta / 2.0) ** 2
        return (1.0 - e) * s2 + e * (1.0 - s2)

    w = float(_interval_mean(wrong_port, slice_half_angle(lam)))
    lost_one = (1.0 - eta) * pd * (1.0 - pd)
    s1 = eta * (1.0 - pd) + 2.0 * lost_one
    e1 = (eta * w * (1.0 - pd) + lost_one) / s1 if s1 > 0 else 0.0
    return s1, e1


def analytic_rates(protocol: ProtocolParams, channel: ChannelParams) -> ObservedRates:
    """Expected observables for the given protocol and channel."""
    s_z, e_z = z_window_rates(protocol.epsilon, protocol.mu_signal, channel)
    s_mu, e_mu = [], []
    for mu in protocol.decoy_intensities:
        s, e = x_window_rates(mu, protocol.phase_slice, channel)
        s_mu.append(s)
        e_mu.append(e)
    s1, e1 = single_photon_rates(protocol.phase_slice, channel)
    pd = channel.dark_count_prob
    return ObservedRates(
        intensities=protocol.decoy_intensities,
        s0=2.0 * pd * (1.0 - pd),
        s_mu=tuple(s_mu),
        e_mu_x=tuple(e_mu),
        s_z=s_z,
        e_z=e_z,
        n_t_per_window=protocol.q_signal**2 * s_z,
        s1_true=s1,
        e1_true=e1,
    )
