"""Decoy-state estimators for the single-photon yield and phase-flip rate."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .channel import ObservedRates
from .core import p0, p1, p2
from .params import ProtocolParams


@dataclass(frozen=True)
class DecoyEstimate:
    """Bounds that enter the key-rate formula.

    ``e1ph_upper`` is already clamped to ``[0, 0.5]``; ``flags`` records every
    clamp that happened on the way.
    """

    s1_lower: float
    s1_exact: float
    e1ph_upper: float
    n1: float | None = None
    mode: str = "infinite"
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "DecoyEstimate":
        return cls(**{**data, "flags": tuple(data.get("flags", ()))})


def s1_lower_bound_raw(rates: ObservedRates, mu1: float, mu2: float) -> float:
    """Three-intensity lower bound on s1 before clamping at zero."""
    if not 0.0 < mu1 < mu2:
        raise ValueError(f"need 0 < mu1 < mu2, got mu1={mu1}, mu2={mu2}")
    s0 = rates.s0
    num = float(p2(mu2)) * (rates.s_at(mu1) - float(p0(mu1)) * s0) - float(p2(mu1)) * (rates.s_at(mu2) - float(p0(mu2)) * s0)
    den = float(p2(mu2)) * float(p1(mu1)) - float(p2(mu1)) * float(p1(mu2))
    return num / den


def s1_lower_bound(rates: ObservedRates, mu1: float, mu2: float) -> float:
    """Lower bound on the single-photon yield from the vacuum and two decoys."""
    return max(0.0, s1_lower_bound_raw(rates, mu1, mu2))


def e1ph_upper_bound_raw(rates: ObservedRates, mu: float, s1: float) -> float:
    if s1 <= 0:
        raise ValueError("s1 must be positive to bound the phase-flip rate")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    vac = math.exp(-2.0 * mu)
    return (rates.s_at(mu) * rates.e_at(mu) - vac * rates.s0 / 2.0) / (2.0 * mu * vac * s1)


def e1ph_upper_bound(rates: ObservedRates, mu: float, s1: float) -> tuple[float, bool]:
    """Upper bound on the single-photon phase-flip rate from X windows at ``mu``.

    Returns ``(bound, out_of_range)``; the bound is clamped into ``[0, 0.5]``
    and the flag says whether clamping was needed.
    """
    raw = e1ph_upper_bound_raw(rates, mu, s1)
    clamped = min(max(raw, 0.0), 0.5)
    return clamped, clamped != raw


@dataclass(frozen=True)
class PhaseErrorCounts:
    """Phase-flip error rate from raw X tallies.

    ``pairwise`` sums, for each detector, the smaller of N_X(+, d) and
    N_X(-, d); ``simple`` counts every (-, L) and (+, R) event as an error and
    never falls below ``pairwise``.
    """

    pairwise: float
    simple: float


def eph_from_tallies(tallies, intensity: float | None = None) -> PhaseErrorCounts:
    """Phase-flip rates from the N_X(a, d) counts.

    With ``intensity`` the counts of that decoy are used, otherwise all
    intensities are pooled.
    """
    idx = range(len(tallies.intensities)) if intensity is None else [tallies.index_of(intensity)]
    pl = sum(tallies.x_plus_left[i] for i in idx)
    pr = sum(tallies.x_plus_right[i] for i in idx)
    ml = sum(tallies.x_minus_left[i] for i in idx)
    mr = sum(tallies.x_minus_right[i] for i in idx)
    n = pl + pr + ml + mr
    if n == 0:
        raise ValueError("no effective X events to estimate a phase-flip rate from")
    pairwise = (min(pl, ml) + min(pr, mr)) / n
    return PhaseErrorCounts(pairwise=pairwise, simple=(ml + pr) / n)


def n1_estimate(protocol: ProtocolParams, s1: float, n_z_windows: float) -> float:
    """Expected number of single-photon Z bits among ``n_z_windows`` windows."""
    eps = protocol.epsilon
    mu = protocol.mu_signal
    return n_z_windows * 2.0 * eps * (1.0 - eps) * mu * math.exp(-mu) * s1


def estimate(rates: ObservedRates, protocol: ProtocolParams, n_z_windows: float | None = None) -> DecoyEstimate:
    """Build the estimate used by the key rate.

    In ``"infinite"`` mode the exact single-photon yield and phase-flip rate
    are used, which is what an unlimited number of decoy intensities would
    pin down. ``"three"`` mode uses the vacuum plus the two weakest nonzero
    decoys.
    """
    flags = []
    if protocol.decoy_mode == "infinite":
        s1 = rates.s1_true
        e1 = rates.e1_true
        if e1 > 0.5:
            flags.append("e1ph_clamped")
            e1 = 0.5
        s1_lower = s1
    else:
        mu1, mu2 = protocol.nonzero_decoys[:2]
        raw = s1_lower_bound_raw(rates, mu1, mu2)
        s1_lower = max(0.0, raw)
        if raw < 0:
            flags.append("s1_clamped")
        if s1_lower > 0:
            e1, out = e1ph_upper_bound(rates, mu1, s1_lower)
            if out:
                flags.append("e1ph_clamped")
        else:
            e1 = 0.5
            flags.append("e1ph_undetermined")
    n1 = n1_estimate(protocol, s1_lower, n_z_windows) if n_z_windows is not None else None
    return DecoyEstimate(
        s1_lower=s1_lower,
        s1_exact=rates.s1_true,
        e1ph_upper=e1,
        n1=n1,
        mode=protocol.decoy_mode,
        flags=tuple(flags),
    )
