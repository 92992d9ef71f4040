"""Event counts accumulated by the Monte Carlo run."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from . import _numpy_kernel as L

_DECISIONS = ("none_send", "alice_only", "bob_only", "both_send")
_OUTCOMES = ("no_click", "left_only", "right_only", "double_click")


@dataclass(frozen=True)
class TallySet:
    """Counts by window class, detector outcome and ground-truth photon tag.

    Per-intensity fields are tuples indexed like ``intensities``. The ``x_*``
    counts past ``x_windows`` refer to X windows that passed the phase slice.
    ``x_plus_left`` etc. are the effective-event counts N_X(a, d): ``plus``
    means ``cos(dB - dA) >= 0``.
    """

    intensities: tuple[float, ...]
    n_windows: int
    mismatched_windows: int
    z_windows: int
    z_windows_none_send: int
    z_windows_alice_only: int
    z_windows_bob_only: int
    z_windows_both_send: int
    z_effective_none_send: int
    z_effective_alice_only: int
    z_effective_bob_only: int
    z_effective_both_send: int
    z_no_click: int
    z_left_only: int
    z_right_only: int
    z_double_click: int
    z1_windows: int
    z1_effective: int
    x_windows: tuple[int, ...]
    x_accepted: tuple[int, ...]
    x_no_click: tuple[int, ...]
    x_double_click: tuple[int, ...]
    x_plus_left: tuple[int, ...]
    x_plus_right: tuple[int, ...]
    x_minus_left: tuple[int, ...]
    x_minus_right: tuple[int, ...]
    x1_windows: tuple[int, ...]
    x1_effective: tuple[int, ...]
    x1_errors: tuple[int, ...]

    @classmethod
    def from_counts(cls, intensities, n_windows: int, counts: np.ndarray) -> "TallySet":
        c = [int(v) for v in counts]
        kw = {"intensities": tuple(float(m) for m in intensities), "n_windows": int(n_windows)}
        kw["mismatched_windows"] = c[L.MISMATCHED]
        kw["z_windows"] = c[L.Z_WINDOWS]
        for j, name in enumerate(_DECISIONS):
            kw[f"z_windows_{name}"] = c[L.Z_BY_DECISION + j]
            kw[f"z_effective_{name}"] = c[L.Z_EFF_BY_DECISION + j]
        for j, name in enumerate(_OUTCOMES):
            kw[f"z_{name}"] = c[L.Z_OUTCOMES + j]
        kw["z1_windows"] = c[L.Z1_WINDOWS]
        kw["z1_effective"] = c[L.Z1_EFFECTIVE]
        per = {
            "x_windows": L.X_WINDOWS,
            "x_accepted": L.X_ACCEPTED,
            "x_no_click": L.X_OUTCOMES,
            "x_double_click": L.X_OUTCOMES + 3,
            "x_plus_left": L.X_N,
            "x_plus_right": L.X_N + 1,
            "x_minus_left": L.X_N + 2,
            "x_minus_right": L.X_N + 3,
            "x1_windows": L.X1_WINDOWS,
            "x1_effective": L.X1_EFFECTIVE,
            "x1_errors": L.X1_ERRORS,
        }
        n_int = len(kw["intensities"])
        for name, off in per.items():
            kw[name] = tuple(c[L.NZ + L.NX * i + off] for i in range(n_int))
        return cls(**kw)

    # derived counts

    @property
    def z_effective(self) -> int:
        return self.z_left_only + self.z_right_only

    @property
    def z_errors(self) -> int:
        return self.z_effective_none_send + self.z_effective_both_send

    @property
    def x_effective(self) -> tuple[int, ...]:
        return tuple(a + b + c + d for a, b, c, d in zip(self.x_plus_left, self.x_plus_right, self.x_minus_left, self.x_minus_right))

    @property
    def x_errors(self) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(self.x_plus_right, self.x_minus_left))

    @property
    def x_total_windows(self) -> int:
        return sum(self.x_windows)

    def index_of(self, mu: float) -> int:
        return self.intensities.index(float(mu))

    def __add__(self, other: "TallySet") -> "TallySet":
        if not isinstance(other, TallySet):
            return NotImplemented
        if other.intensities != self.intensities:
            raise ValueError("cannot merge tallies over different decoy intensities")
        kw = {"intensities": self.intensities}
        for f in fields(self):
            if f.name == "intensities":
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            kw[f.name] = tuple(x + y for x, y in zip(a, b)) if isinstance(a, tuple) else a + b
        return TallySet(**kw)

    def to_dict(self) -> dict:
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TallySet":
        kw = {}
        for f in fields(cls):
            v = data[f.name]
            kw[f.name] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
