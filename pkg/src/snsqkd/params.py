"""Protocol and channel parameter sets.

Both are frozen dataclasses validated on construction. Validation errors are
``ValueError`` whose message starts with the offending field name, which the
CLI surfaces verbatim.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{name}: {msg}")


def _prob(name: str, value: float) -> None:
    _check(isinstance(value, (int, float)) and 0.0 <= value <= 1.0, name, f"must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Physical link between Alice, Charlie (midway) and Bob.

    ``dark_count_prob`` is per detector per time window; ``misalignment`` is
    the probability that an interfering photon leaves the wrong port.
    """

    distance_km: float = 0.0
    attenuation_db_per_km: float = 0.2
    detector_efficiency: float = 0.8
    dark_count_prob: float = 1e-11
    misalignment: float = 0.0

    def __post_init__(self):
        _check(math.isfinite(self.distance_km) and self.distance_km >= 0, "distance_km", f"must be >= 0, got {self.distance_km!r}")
        _check(
            math.isfinite(self.attenuation_db_per_km) and self.attenuation_db_per_km >= 0,
            "attenuation_db_per_km",
            f"must be >= 0, got {self.attenuation_db_per_km!r}",
        )
        _prob("detector_efficiency", self.detector_efficiency)
        _prob("dark_count_prob", self.dark_count_prob)
        _prob("misalignment", self.misalignment)

    def replace(self, **changes) -> "ChannelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def _even_split(decoys: tuple[float, ...], q_signal: float) -> tuple[float, ...]:
    return tuple((1.0 - q_signal) / len(decoys) for _ in decoys)


@dataclass(frozen=True)
class ProtocolParams:
    """Source-side settings of the sending-or-not-sending protocol.

    Attributes:
        epsilon: probability that a party sends in a signal window.
        mu_signal: intensity sent when a party decides to send.
        decoy_intensities: decoy intensities, ascending; the first is 0 when
            the three-intensity bounds are used.
        phase_slice: half-width ``lambda`` of the X-window post-selection
            ``1 - |cos(dA - dB)| <= lambda``. Zero means the matched-phase limit
            (only meaningful for analytic rates).
        q_signal: probability that a party declares a signal window.
        q_decoy: declaration probabilities for each decoy intensity; defaults
            to an even split of ``1 - q_signal``.
        f: error-correction inefficiency.
    """

    epsilon: float = 0.05
    mu_signal: float = 0.4
    decoy_intensities: tuple[float, ...] = (0.0, 0.1, 0.25)
    phase_slice: float = 0.0
    q_signal: float = 0.5
    q_decoy: tuple[float, ...] | None = None
    f: float = 1.1
    decoy_mode: str = "infinite"

    def __post_init__(self):
        _check(0.0 < self.epsilon < 1.0, "epsilon", f"must lie in (0, 1), got {self.epsilon!r}")
        _check(math.isfinite(self.mu_signal) and self.mu_signal >= 0, "mu_signal", f"must be >= 0, got {self.mu_signal!r}")
        decoys = tuple(float(m) for m in self.decoy_intensities)
        _check(len(decoys) >= 1, "decoy_intensities", "needs at least one intensity")
        _check(all(math.isfinite(m) and m >= 0 for m in decoys), "decoy_intensities", f"must be finite and >= 0, got {decoys}")
        _check(all(a < b for a, b in zip(decoys, decoys[1:])), "decoy_intensities", f"must be strictly ascending, got {decoys}")
        object.__setattr__(self, "decoy_intensities", decoys)
        _check(math.isfinite(self.phase_slice) and self.phase_slice >= 0, "phase_slice", f"must be >= 0, got {self.phase_slice!r}")
        _prob("q_signal", self.q_signal)
        q_decoy = _even_split(decoys, self.q_signal) if self.q_decoy is None else tuple(float(q) for q in self.q_decoy)
        _check(len(q_decoy) == len(decoys), "q_decoy", f"needs one entry per decoy intensity ({len(decoys)}), got {len(q_decoy)}")
        _check(all(0.0 <= q <= 1.0 for q in q_decoy), "q_decoy", f"entries must lie in [0, 1], got {q_decoy}")
        _check(abs(self.q_signal + sum(q_decoy) - 1.0) <= 1e-9, "q_decoy", f"q_signal + sum(q_decoy) must be 1, got {self.q_signal + sum(q_decoy)!r}")
        object.__setattr__(self, "q_decoy", q_decoy)
        _check(math.isfinite(self.f) and self.f >= 1.0, "f", f"must be >= 1, got {self.f!r}")
        _check(self.decoy_mode in ("infinite", "three"), "decoy_mode", f"must be 'infinite' or 'three', got {self.decoy_mode!r}")
        if self.decoy_mode == "three":
            _check(decoys[0] == 0.0 and len(decoys) >= 3, "decoy_intensities", "three-intensity mode needs {0, mu1, mu2, ...}")

    @property
    def nonzero_decoys(self) -> tuple[float, ...]:
        return tuple(m for m in self.decoy_intensities if m > 0)

    def replace(self, **changes) -> "ProtocolParams":
        if "decoy_intensities" in changes and "q_decoy" not in changes:
            changes["q_decoy"] = None
        if "q_signal" in changes and "q_decoy" not in changes:
            changes["q_decoy"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decoy_intensities"] = list(self.decoy_intensities)
        d["q_decoy"] = list(self.q_decoy)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolParams":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in data.items() if k in names}
        for key in ("decoy_intensities", "q_decoy"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        return cls(**kw)
