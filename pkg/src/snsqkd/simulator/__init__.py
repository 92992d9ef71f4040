"""Event-level Monte Carlo of the sending-or-not-sending protocol.

Every window draws its randomness from a counter-based stream keyed by the
master seed and the window index, so results do not depend on how the
windows are split into blocks or spread across workers.

The window loop runs in a compiled extension when one was built, otherwise
in numpy. Set ``SNSQKD_PURE_PYTHON=1`` to force the numpy path.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..channel import ChannelParams, arm_transmittance
from ..core import PhasePair, interference_sign
from ..params import ProtocolParams
from . import _numpy_kernel
from ._rng import stream_key
from .tally import TallySet

if os.environ.get("SNSQKD_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernel as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "numpy"
DEFAULT_BLOCK = 1 << 18
# finite slice used by Monte Carlo runs when the protocol asks for lambda -> 0
DEFAULT_MC_PHASE_SLICE = 0.05

__all__ = [
    "BACKEND",
    "DEFAULT_MC_PHASE_SLICE",
    "ProtocolParams",
    "TallySet",
    "WindowRecord",
    "classify_x_bit",
    "classify_z_bit",
    "run_protocol",
    "simulate_windows",
]

_OUTCOME_NAMES = ("none", "left", "right", "both")


def _kernel_args(protocol: ProtocolParams, channel: ChannelParams):
    if protocol.phase_slice <= 0:
        raise ValueError("phase_slice: Monte Carlo needs a finite phase slice (lambda > 0)")
    cum = np.cumsum((protocol.q_signal,) + protocol.q_decoy)
    cum[-1] = np.inf
    return dict(
        cum=cum,
        intensities=np.asarray(protocol.decoy_intensities, dtype=float),
        epsilon=float(protocol.epsilon),
        mu_signal=float(protocol.mu_signal),
        eta=float(arm_transmittance(channel)),
        misalignment=float(channel.misalignment),
        dark=float(channel.dark_count_prob),
        lam=float(protocol.phase_slice),
    )


def _blocks(n_windows: int, block: int):
    return [(s, min(block, n_windows - s)) for s in range(0, n_windows, block)]


def run_protocol(
    protocol: ProtocolParams,
    channel: ChannelParams,
    n_windows: int,
    seed: int,
    *,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK,
    backend: str | None = None,
) -> TallySet:
    """Simulate ``n_windows`` time windows and tally the outcomes.

    Args:
        protocol: source settings; ``phase_slice`` must be positive.
        channel: link parameters.
        n_windows: number of windows, at least 1.
        seed: master seed.
        workers: threads sharing the blocks; does not change the result.
        block_size: windows per work unit; does not change the result.
        backend: ``"compiled"`` or ``"numpy"``; defaults to ``BACKEND``.
    """
    if n_windows < 1:
        raise ValueError(f"n_windows: must be >= 1, got {n_windows}")
    kernel = _select(backend)
    key = stream_key(seed)
    args = _kernel_args(protocol, channel)
    n_int = len(protocol.decoy_intensities)

    def work(span):
        start, count = span
        return kernel.simulate_block(key, start, count, **args)

    spans = _blocks(n_windows, block_size)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, spans))
    else:
        parts = [work(s) for s in spans]
    total = np.zeros(_numpy_kernel.n_counts(n_int), dtype=np.int64)
    for p in parts:
        total += p
    return TallySet.from_counts(protocol.decoy_intensities, n_windows, total)


def _select(backend):
    name = backend or BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled
    if name == "numpy":
        return _numpy_kernel
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class WindowRecord:
    """One simulated time window.

    ``kind`` is ``"Z"``, ``"X"`` or ``"mismatched"``. ``decisions`` holds
    (alice_sends, bob_sends) for Z windows and is None otherwise;
    ``intensity`` is the common decoy intensity of an X window; ``accepted`` is
    the phase-slice verdict for X windows and None otherwise;
    ``source_photons`` is the sampled photon number leaving the sources.
    """

    index: int
    kind: str
    decisions: tuple[bool, bool] | None
    intensity: float | None
    phases: PhasePair
    source_photons: int
    outcome: str
    accepted: bool | None

    @property
    def effective(self) -> bool:
        if self.outcome not in ("left", "right"):
            return False
        return self.kind == "Z" or (self.kind == "X" and bool(self.accepted))


def simulate_windows(protocol: ProtocolParams, channel: ChannelParams, seed: int, start: int = 0, count: int = 1000) -> list[WindowRecord]:
    """Per-window records for inspection; uses the same streams as ``run_protocol``."""
    a = _numpy_kernel.simulate_arrays(stream_key(seed), start, count, **_kernel_args(protocol, channel))
    records = []
    for j in range(count):
        kind = ("Z", "X", "mismatched")[a["kind"][j]]
        records.append(
            WindowRecord(
                index=start + j,
                kind=kind,
                decisions=(bool(a["send_a"][j]), bool(a["send_b"][j])) if kind == "Z" else None,
                intensity=protocol.decoy_intensities[a["class_a"][j] - 1] if kind == "X" else None,
                phases=PhasePair(float(a["delta_a"][j]), float(a["delta_b"][j])),
                source_photons=int(a["photons"][j]),
                outcome=_OUTCOME_NAMES[a["outcome"][j]],
                accepted=bool(a["accepted"][j]) if kind == "X" else None,
            )
        )
    return records


def classify_x_bit(record: WindowRecord) -> str:
    """``"right"`` or ``"wrong"`` for an accepted, effective X window.

    A right bit is the left detector firing alone when cos(dA - dB) >= 0, or
    the right detector firing alone when it is negative.
    """
    if record.kind != "X" or not record.accepted or not record.effective:
        raise ValueError(f"window {record.index} is not an accepted effective X window")
    sign = interference_sign(record.phases.delta_a, record.phases.delta_b)
    expected = "left" if sign > 0 else "right"
    return "right" if record.outcome == expected else "wrong"


def classify_z_bit(record: WindowRecord) -> str:
    """``"error"`` when both parties made the same send decision."""
    if record.kind != "Z" or not record.effective:
        raise ValueError(f"window {record.index} is not an effective Z window")
    alice, bob = record.decisions
    return "error" if alice == bob else "correct"


def expected_z1_fraction(protocol: ProtocolParams) -> float:
    """Share of Z windows in which exactly one party emits exactly one photon."""
    mu = protocol.mu_signal
    eps = protocol.epsilon
    return 2.0 * eps * (1.0 - eps) * mu * math.exp(-mu)
