"""Asymptotic key rate, optimization over (epsilon, mu') and parameter scans."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import ObservedRates, analytic_rates, z_window_rates
from .core import binary_entropy
from .decoy import DecoyEstimate, estimate as build_estimate
from .params import ChannelParams, ProtocolParams

EPSILON_BOUNDS = (1e-6, 0.5)
MU_SIGNAL_BOUNDS = (0.01, 1.0)
RATE_THRESHOLD = 1e-12
CSV_COLUMNS = ("R", "epsilon_opt", "mu_signal_opt", "e1ph", "E_Z", "S_Z", "flags")


@dataclass(frozen=True)
class KeyRateReport:
    """Optimized key rate for one channel, with everything that produced it.

    ``s_z`` and ``e_z`` are the Z-window counting and error rates at the
    optimized point. ``protocol`` already carries the optimized epsilon and
    mu'; ``protocol_template`` is the input as given.
    """

    rate_per_window: float
    estimate: DecoyEstimate
    optimized_epsilon: float
    optimized_mu_signal: float
    s_z: float
    e_z: float
    protocol_template: ProtocolParams
    channel: ChannelParams
    final_key_length: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def protocol(self) -> ProtocolParams:
        return self.protocol_template.replace(epsilon=self.optimized_epsilon, mu_signal=self.optimized_mu_signal)

    def to_dict(self) -> dict:
        return {
            "rate_per_window": self.rate_per_window,
            "final_key_length": self.final_key_length,
            "optimized_epsilon": self.optimized_epsilon,
            "optimized_mu_signal": self.optimized_mu_signal,
            "s_z": self.s_z,
            "e_z": self.e_z,
            "estimate": self.estimate.to_dict(),
            "protocol_template": self.protocol_template.to_dict(),
            "channel": self.channel.to_dict(),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KeyRateReport":
        return cls(
            rate_per_window=data["rate_per_window"],
            final_key_length=data.get("final_key_length"),
            optimized_epsilon=data["optimized_epsilon"],
            optimized_mu_signal=data["optimized_mu_signal"],
            s_z=data["s_z"],
            e_z=data["e_z"],
            estimate=DecoyEstimate.from_dict(data["estimate"]),
            protocol_template=ProtocolParams.from_dict(data["protocol_template"]),
            channel=ChannelParams.from_dict(data["channel"]),
            flags=tuple(data.get("flags", ())),
        )


def rate_formula(epsilon, mu_signal, s1, e1ph, s_z, e_z, f):
    """Unclamped key rate per window; broadcasts over array inputs."""
    eps = np.asarray(epsilon, dtype=float)
    mu = np.asarray(mu_signal, dtype=float)
    gain = 2.0 * eps * (1.0 - eps) * mu * np.exp(-mu) * s1 * (1.0 - binary_entropy(e1ph))
    r = gain - np.asarray(s_z) * f * binary_entropy(e_z)
    return float(r) if np.ndim(r) == 0 else r


def rate_per_window(protocol: ProtocolParams, rates: ObservedRates, estimate: DecoyEstimate) -> float:
    """Key rate per time window, clamped at zero."""
    r = rate_formula(protocol.epsilon, protocol.mu_signal, estimate.s1_lower, estimate.e1ph_upper, rates.s_z, rates.e_z, protocol.f)
    return max(0.0, r)


def final_key_length(n1: float, e1ph: float, n_t: float, e_z: float, f: float) -> float:
    """Final key length from the Z1-bit count and the error-correction leak.

    Args:
        n1: number of untagged single-photon Z bits.
        e1ph: phase-flip rate of those bits.
        n_t: number of effective Z events (the sifted key length).
        e_z: bit error rate of the sifted key.
        f: error-correction inefficiency.
    """
    value = n1 - n1 * binary_entropy(e1ph) - n_t * f * binary_entropy(e_z)
    return max(0.0, value)


def _grid(bounds_eps, bounds_mu, n_eps=61, n_mu=100):
    eps = np.geomspace(bounds_eps[0], bounds_eps[1], n_eps)
    mu = np.linspace(bounds_mu[0], bounds_mu[1], n_mu)
    return eps, mu


def optimize(
    channel: ChannelParams,
    protocol_template: ProtocolParams | None = None,
    *,
    epsilon_bounds: tuple[float, float] = EPSILON_BOUNDS,
    mu_bounds: tuple[float, float] = MU_SIGNAL_BOUNDS,
    grid_shape: tuple[int, int] = (61, 100),
    rtol: float = 1e-4,
) -> KeyRateReport:
    """Maximize the key rate over epsilon and mu'.

    A log-spaced epsilon by linear mu' grid locates the basin, then bounded
    one-dimensional searches alternate between the two coordinates until the
    rate improves by less than ``rtol`` (relative). The search works on the
    unclamped rate so it still has a slope below zero; the reported rate is
    clamped.
    """
    template = protocol_template or ProtocolParams()
    base = analytic_rates(template, channel)
    est = build_estimate(base, template)
    s1, e1, f = est.s1_lower, est.e1ph_upper, template.f

    def rate_at(eps, mu):
        s_z, e_z = z_window_rates(eps, mu, channel)
        return rate_formula(eps, mu, s1, e1, s_z, e_z, f)

    eps_grid, mu_grid = _grid(epsilon_bounds, mu_bounds, *grid_shape)
    r_grid = rate_at(eps_grid[:, None], mu_grid[None, :])
    i, j = np.unravel_index(int(np.argmax(r_grid)), r_grid.shape)
    best_eps, best_mu, best_r = float(eps_grid[i]), float(mu_grid[j]), float(r_grid[i, j])

    flags = list(est.flags)
    if best_r > 0.0:
        lo_log, hi_log = math.log(epsilon_bounds[0]), math.log(epsilon_bounds[1])
        for _ in range(50):
            prev = best_r
            res = minimize_scalar(lambda x: -rate_at(math.exp(x), best_mu), bounds=(lo_log, hi_log), method="bounded", options={"xatol": 1e-6})
            if -res.fun > best_r:
                best_eps, best_r = math.exp(res.x), -res.fun
            res = minimize_scalar(lambda m: -rate_at(best_eps, m), bounds=mu_bounds, method="bounded", options={"xatol": 1e-7})
            if -res.fun > best_r:
                best_mu, best_r = float(res.x), -res.fun
            if best_r - prev <= rtol * abs(best_r):
                break
    else:
        flags.append("no_positive_rate")

    s_z, e_z = z_window_rates(best_eps, best_mu, channel)
    rate = max(0.0, best_r)
    if best_r <= 0.0:
        flags.append("rate_clamped")
    return KeyRateReport(
        rate_per_window=rate,
        estimate=est,
        optimized_epsilon=best_eps,
        optimized_mu_signal=best_mu,
        s_z=s_z,
        e_z=e_z,
        protocol_template=template,
        channel=channel,
        flags=tuple(flags),
    )


def evaluate(channel: ChannelParams, protocol: ProtocolParams, n_z_windows: float | None = None) -> KeyRateReport:
    """Report at the protocol's own epsilon and mu', without optimizing.

    With ``n_z_windows`` the report also carries n1 and the final key length,
    taking the expected number of effective Z events as n_t.
    """
    rates = analytic_rates(protocol, channel)
    est = build_estimate(rates, protocol, n_z_windows)
    raw = rate_formula(protocol.epsilon, protocol.mu_signal, est.s1_lower, est.e1ph_upper, rates.s_z, rates.e_z, protocol.f)
    flags = list(est.flags)
    if raw <= 0.0:
        flags.append("rate_clamped")
    n_f = None
    if n_z_windows is not None:
        n_f = final_key_length(est.n1, est.e1ph_upper, n_z_windows * rates.s_z, rates.e_z, protocol.f)
    return KeyRateReport(
        rate_per_window=max(0.0, raw),
        estimate=est,
        optimized_epsilon=protocol.epsilon,
        optimized_mu_signal=protocol.mu_signal,
        s_z=rates.s_z,
        e_z=rates.e_z,
        protocol_template=protocol,
        channel=channel,
        final_key_length=n_f,
        flags=tuple(flags),
    )


def _with_axis(channel: ChannelParams, axis: str, value: float) -> ChannelParams:
    if axis == "distance":
        return channel.replace(distance_km=float(value))
    if axis == "misalignment":
        return channel.replace(misalignment=float(value))
    raise ValueError(f"scan_axis: must be 'distance' or 'misalignment', got {axis!r}")


def scan(
    channel_template: ChannelParams,
    axis: str,
    grid,
    protocol_template: ProtocolParams | None = None,
    *,
    workers: int = 1,
    optimized: bool = True,
) -> list[KeyRateReport]:
    """One report per grid value, in grid order.

    With ``optimized=False`` each point is evaluated at the template's own
    epsilon and mu'.
    """
    values = [float(v) for v in grid]
    if not values:
        raise ValueError("grid: must contain at least one value")
    channels = [_with_axis(channel_template, axis, v) for v in values]

    def run(ch):
        if optimized:
            return optimize(ch, protocol_template)
        return evaluate(ch, protocol_template or ProtocolParams())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, channels))
    return [run(ch) for ch in channels]


def cutoff(
    channel_template: ChannelParams,
    axis: str,
    protocol_template: ProtocolParams | None = None,
    *,
    lo: float,
    hi: float,
    step: float,
    resolution: float,
    threshold: float = RATE_THRESHOLD,
) -> float:
    """Largest value of ``axis`` at which the optimized rate exceeds ``threshold``.

    The rate is assumed non-increasing along the axis. A coarse grid brackets
    the crossing and bisection narrows it to ``resolution``. Returns ``lo``
    if the rate is already below threshold there and ``hi`` if it never
    drops below.
    """

    def positive(v):
        return optimize(_with_axis(channel_template, axis, v), protocol_template).rate_per_window > threshold

    if not positive(lo):
        return lo
    good = lo
    bad = None
    for v in np.arange(lo + step, hi + 0.5 * step, step):
        v = min(float(v), hi)
        if positive(v):
            good = v
        else:
            bad = v
            break
    if bad is None:
        return hi
    while bad - good > resolution:
        mid = 0.5 * (good + bad)
        if positive(mid):
            good = mid
        else:
            bad = mid
    return good


def secure_distance(channel_template: ChannelParams, protocol_template: ProtocolParams | None = None, *, max_km: float = 2000.0) -> float:
    """Largest distance (1 km resolution) with a rate above 1e-12 per window."""
    return cutoff(channel_template, "distance", protocol_template, lo=0.0, hi=max_km, step=50.0, resolution=1.0)


def max_misalignment(channel_template: ChannelParams, protocol_template: ProtocolParams | None = None) -> float:
    """Largest misalignment (1e-3 resolution) with a rate above 1e-12 per window."""
    return cutoff(channel_template, "misalignment", protocol_template, lo=0.0, hi=0.5, step=0.05, resolution=1e-3)


def _fmt(x: float) -> str:
    return repr(float(x))


def reports_to_csv(reports, axis: str) -> str:
    """CSV text with one row per report; floats use round-trip precision."""
    col = "distance_km" if axis == "distance" else "misalignment"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((col,) + CSV_COLUMNS)
    for r in reports:
        value = r.channel.distance_km if axis == "distance" else r.channel.misalignment
        w.writerow(
            (
                _fmt(value),
                _fmt(r.rate_per_window),
                _fmt(r.optimized_epsilon),
                _fmt(r.optimized_mu_signal),
                _fmt(r.estimate.e1ph_upper),
                _fmt(r.e_z),
                _fmt(r.s_z),
                ";".join(r.flags),
            )
        )
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    """Parse ``reports_to_csv`` output back into dicts of floats and flag tuples."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {k: (tuple(v.split(";")) if v else ()) if k == "flags" else float(v) for k, v in rec.items()}
        rows.append(row)
    return rows
