"""Math primitives and protocol predicates shared by the rest of the package."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

TWO_PI = 2.0 * math.pi
DEFAULT_K_MAX = 40


def binary_entropy(x):
    """Binary Shannon entropy in bits.

    Works on scalars and arrays; ``H(0) = H(1) = 0``.

    Raises:
        ValueError: if any entry lies outside ``[0, 1]``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ValueError(f"binary_entropy argument outside [0, 1]: {x!r}")
    inner = (arr > 0.0) & (arr < 1.0)
    safe = np.where(inner, arr, 0.5)
    h = np.where(inner, -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe), 0.0)
    if h.ndim == 0:
        return float(h)
    return h


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Total photon-number statistics of a phase-averaged two-mode coherent pair."""

    probabilities: tuple[float, ...]
    truncation_tail: float

    def __getitem__(self, k: int) -> float:
        return self.probabilities[k]

    def __len__(self) -> int:
        return len(self.probabilities)


def p0(mu):
    return np.exp(-2.0 * np.asarray(mu, dtype=float))


def p1(mu):
    mu = np.asarray(mu, dtype=float)
    return 2.0 * mu * np.exp(-2.0 * mu)


def p2(mu):
    mu = np.asarray(mu, dtype=float)
    return 2.0 * mu * mu * np.exp(-2.0 * mu)


def photon_number_probs(mu: float, k_max: int = DEFAULT_K_MAX) -> PhotonNumberDistribution:
    """Probabilities ``p_k(mu) = exp(-2 mu) (2 mu)^k / k!`` for ``k = 0..k_max``.

    Each of the two modes carries intensity ``mu``, so the total photon number
    is Poisson with mean ``2 mu``. ``truncation_tail`` is the exact Poisson
    survival mass beyond ``k_max`` (regularized incomplete gamma), which bounds
    everything that was left out.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    if not (mu >= 0.0 and math.isfinite(mu)):
        raise ValueError(f"intensity must be finite and >= 0, got {mu}")
    if mu == 0.0:
        return PhotonNumberDistribution((1.0,) + (0.0,) * k_max, 0.0)
    m = 2.0 * mu
    probs = [math.exp(-m)]
    for k in range(1, k_max + 1):
        probs.append(probs[-1] * m / k)
    probs[0] = float(p0(mu))
    probs[1] = float(p1(mu))
    probs[2] = float(p2(mu))
    # P(N > k_max) = P(k_max + 1, m) for Poisson(m).
    tail = float(special.gammainc(k_max + 1, m))
    return PhotonNumberDistribution(tuple(probs), tail)


@dataclass(frozen=True)
class PhasePair:
    """Private phase shifts of Alice and Bob, reduced into ``[0, 2 pi)``."""

    delta_a: float
    delta_b: float

    def __post_init__(self):
        object.__setattr__(self, "delta_a", reduce_phase(self.delta_a))
        object.__setattr__(self, "delta_b", reduce_phase(self.delta_b))


def _scalar(value):
    return value.item() if np.ndim(value) == 0 else value


def phase_slice_accept(delta_a, delta_b, lam: float):
    """Post-selection test ``1 - |cos(delta_a - delta_b)| <= lam``.

    Vectorizes over the phases.
    """
    if lam < 0:
        raise ValueError(f"phase-slice width must be >= 0, got {lam}")
    return _scalar(1.0 - np.abs(np.cos(np.subtract(delta_a, delta_b))) <= lam)


def interference_sign(delta_a, delta_b):
    """+1 when ``cos(delta_b - delta_a) >= 0``, else -1 (zero counts as +)."""
    return _scalar(np.where(np.cos(np.subtract(delta_b, delta_a)) >= 0.0, 1, -1))


def reduce_phase(phase: float) -> float:
    """Map an angle into ``[0, 2 pi)``."""
    r = math.fmod(phase, TWO_PI)
    if r < 0:
        r += TWO_PI
    return 0.0 if r >= TWO_PI else r
