"""Fock-space model of an eavesdropper exploiting announced signal phases.

Target is the original twin-field protocol, where Alice and Bob encode the
bit in a 0/pi phase and later announce the random phase ``rho``. Eve controls
the middle station. She keeps the beam-splitter output, filters it
non-destructively down to an equal superposition of one and two photons, and
unwinds ``rho`` once it is announced. The two bit values then end up in
orthogonal states, so Eve learns every heralded bit while half of the
heralded weight sits on the single-photon component. A decoy analysis that
credits single-photon events with secrecy would therefore report a 50% key
fraction on a key Eve knows completely.

Eve's channel is lossless. The non-trace-preserving steps report acceptance
probabilities; a trial that fails any step is announced as "no click".
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .core import binary_entropy
from .simulator._rng import stream_key, uniforms

DEFAULT_K_MAX = 30
TAIL_TOLERANCE = 1e-12
SUPPORT_TOLERANCE = 1e-12
BRANCHES = ("D0", "D1")

# counter-RNG slots per trial
_S_BIT, _S_BRANCH, _S_STEP1, _S_STEP2, _S_STEP3, _S_MEASURE = range(6)


@dataclass(frozen=True, eq=False)
class FockVector:
    """Single-mode state on photon numbers ``0..k_max`` plus an ancilla ``|m0>``.

    States may be sub-normalized; projections do not renormalize.
    """

    amplitudes: np.ndarray
    ancilla: complex = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "ancilla", complex(self.ancilla))

    @classmethod
    def fock(cls, k: int, k_max: int = DEFAULT_K_MAX) -> "FockVector":
        amps = np.zeros(k_max + 1, dtype=complex)
        amps[k] = 1.0
        return cls(amps)

    @classmethod
    def from_amplitudes(cls, mapping: dict[int, complex], k_max: int = DEFAULT_K_MAX) -> "FockVector":
        amps = np.zeros(k_max + 1, dtype=complex)
        for k, a in mapping.items():
            amps[k] = a
        return cls(amps)

    @property
    def k_max(self) -> int:
        return len(self.amplitudes) - 1

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real + abs(self.ancilla) ** 2)

    def normalized(self) -> "FockVector":
        n2 = self.norm2
        if n2 == 0.0:
            raise ValueError("cannot normalize the zero vector")
        s = 1.0 / math.sqrt(n2)
        return FockVector(self.amplitudes * s, self.ancilla * s)

    def inner(self, other: "FockVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) + np.conj(self.ancilla) * other.ancilla)

    def weight(self, k: int) -> float:
        return float(abs(self.amplitudes[k]) ** 2)

    def __repr__(self) -> str:
        nz = {k: complex(a) for k, a in enumerate(self.amplitudes) if abs(a) > 1e-15}
        return f"FockVector({nz}, ancilla={self.ancilla})"


def incident_state(bit: int, detector_branch: str, mu: float, rho: float, k_max: int = DEFAULT_K_MAX) -> FockVector:
    """Coherent state of amplitude +-sqrt(2 mu) e^{i rho} in the monitored output port.

    Both detector branches carry the same amplitude: bit 0 gives the plus
    sign and bit 1 the minus sign.

    Raises:
        ValueError: for an unknown bit or branch, ``mu <= 0``, or a truncation
            tail above 1e-12.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if detector_branch not in BRANCHES:
        raise ValueError(f"detector_branch must be one of {BRANCHES}, got {detector_branch!r}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    tail = float(special.gammainc(k_max + 1, 2.0 * mu))
    if tail > TAIL_TOLERANCE:
        raise ValueError(f"truncation tail {tail:.3e} above {TAIL_TOLERANCE}; raise k_max above {k_max}")
    k = np.arange(k_max + 1)
    mag = np.exp(-mu + 0.5 * k * math.log(2.0 * mu) - 0.5 * special.gammaln(k + 1))
    sign = 1.0 if bit == 0 else -1.0
    return FockVector(mag * (sign * np.exp(1j * rho)) ** k)


def project_nonvacuum(state: FockVector) -> tuple[FockVector, float]:
    """Keep the photon-number components k >= 1; returns (state, ||P psi||^2)."""
    amps = state.amplitudes.copy()
    amps[0] = 0.0
    out = FockVector(amps)
    return out, out.norm2


def project_S12(state: FockVector) -> tuple[FockVector, float]:
    """Keep only the one- and two-photon components; returns (state, ||P psi||^2)."""
    amps = np.zeros_like(state.amplitudes)
    amps[1:3] = state.amplitudes[1:3]
    out = FockVector(amps)
    return out, out.norm2


def filter_unitary_and_project(state: FockVector, mu: float) -> tuple[FockVector, float]:
    """Apply |1> -> sqrt(mu)|1> + sqrt(1-mu)|m0>, |2> -> |2>, then keep span{|1>, |2>}.

    The ancilla completes the map to a unitary as
    |m0> -> sqrt(1-mu)|1> - sqrt(mu)|m0>. Fock components outside {1, 2}
    fall outside the kept subspace and count as rejection.

    Raises:
        ValueError: if ``mu`` is outside ``[0, 1]``.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1] for the filter to be unitary, got {mu!r}")
    a1 = state.amplitudes[1]
    amps = np.zeros_like(state.amplitudes)
    amps[1] = math.sqrt(mu) * a1 + math.sqrt(1.0 - mu) * state.ancilla
    amps[2] = state.amplitudes[2]
    out = FockVector(amps)
    return out, out.norm2


def phase_unwind(state: FockVector, rho: float) -> FockVector:
    """Apply the phase shift exp(-i rho n) once ``rho`` has been announced.

    For the filtered states this strips the relative phase e^{i rho} between
    the one- and two-photon amplitudes and leaves (+-|1> + |2>)/sqrt(2).

    Raises:
        ValueError: if the state has weight outside span{|1>, |2>}.
    """
    outside = state.norm2 - state.weight(1) - state.weight(2)
    if outside > SUPPORT_TOLERANCE * max(state.norm2, 1e-300):
        raise ValueError("phase_unwind needs a state supported on |1> and |2> only")
    k = np.arange(len(state.amplitudes))
    amps = state.amplitudes * np.exp(-1j * rho * k)
    amps[(k != 1) & (k != 2)] = 0.0
    return FockVector(amps)


@dataclass(frozen=True, eq=False)
class AttackTrace:
    """Eve's stored state after each step for one incident state.

    ``states`` are normalized (psi1, psi2, psi4, psi5); ``acceptances`` are the
    conditional success probabilities of the three filtering steps, so their
    product is the heralding probability.
    """

    bit: int
    detector_branch: str
    states: tuple[FockVector, FockVector, FockVector, FockVector]
    acceptances: tuple[float, float, float]

    @property
    def heralding_probability(self) -> float:
        return math.prod(self.acceptances)

    @property
    def declared_detector(self) -> str:
        return self.detector_branch


def trace_attack(bit: int, detector_branch: str, mu: float, rho: float, k_max: int = DEFAULT_K_MAX) -> AttackTrace:
    """Run Eve's pipeline on one incident state, assuming every step succeeds."""
    psi0 = incident_state(bit, detector_branch, mu, rho, k_max)
    psi1, a1 = project_nonvacuum(psi0)
    psi1 = psi1.normalized()
    psi2, a2 = project_S12(psi1)
    psi2 = psi2.normalized()
    psi4, a3 = filter_unitary_and_project(psi2, mu)
    psi4 = psi4.normalized()
    psi5 = phase_unwind(psi4, rho)
    return AttackTrace(bit, detector_branch, (psi1, psi2, psi4, psi5), (a1, a2, a3))


def measurement_basis(k_max: int = DEFAULT_K_MAX) -> tuple[FockVector, FockVector]:
    """(|1> + |2>)/sqrt(2) for bit 0 and (-|1> + |2>)/sqrt(2) for bit 1."""
    r = 1.0 / math.sqrt(2.0)
    return (
        FockVector.from_amplitudes({1: r, 2: r}, k_max),
        FockVector.from_amplitudes({1: -r, 2: r}, k_max),
    )


@dataclass(frozen=True)
class AttackSummary:
    """Outcome of ``run_attack``.

    ``accuracy`` is over heralded trials and is None when none were heralded.
    ``heralding_probability`` is the exact per-trial value for bit 0 and
    bit 1 (identical by construction, reported separately so tests can say
    so). ``eve_information_bits`` is 1 - H(1 - accuracy).
    """

    mu: float
    rho: float
    trials: int
    seed: int
    heralded: int
    correct: int
    accuracy: float | None
    heralding_probability_bit0: float
    heralding_probability_bit1: float
    empirical_heralding_rate: float
    overlap: float
    single_photon_fraction: float
    naive_key_fraction: float
    eve_information_bits: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AttackSummary":
        return cls(**data)

    def verdict(self) -> str:
        acc = "n/a" if self.accuracy is None else repr(self.accuracy)
        return (
            f"Eve guessed {self.correct} of {self.heralded} heralded bits (accuracy {acc}); "
            f"single-photon fraction {self.single_photon_fraction!r}, so a naive decoy analysis keeps "
            f"{self.naive_key_fraction:.0%} of a key Eve knows."
        )


def run_attack(mu: float, rho: float, trials: int, seed: int, k_max: int = DEFAULT_K_MAX) -> AttackSummary:
    """Sample ``trials`` signal windows under the attack.

    Each trial draws the bit and the detector branch, then draws
    acceptance at each of Eve's three filtering steps, then measures
    heralded states in the (|1> +- |2>)/sqrt(2) basis. Randomness comes from the
    same counter-based streams as the simulator, keyed by ``seed``.

    Raises:
        ValueError: if ``trials < 1`` or ``mu`` is outside ``(0, 1]``.
    """
    if trials < 1:
        raise ValueError(f"trials: must be >= 1, got {trials}")
    traces = {(b, br): trace_attack(b, br, mu, rho, k_max) for b in (0, 1) for br in BRANCHES}
    plus, minus = measurement_basis(k_max)

    key = stream_key(seed)
    idx = np.arange(trials, dtype=np.int64)
    bits = (uniforms(key, idx, _S_BIT) < 0.5).astype(int)
    branch = (uniforms(key, idx, _S_BRANCH) < 0.5).astype(int)
    steps = [uniforms(key, idx, s) for s in (_S_STEP1, _S_STEP2, _S_STEP3)]
    u_meas = uniforms(key, idx, _S_MEASURE)

    heralded = np.ones(trials, dtype=bool)
    p_plus = np.empty(trials)
    for (b, br), tr in traces.items():
        sel = (bits == b) & (branch == BRANCHES.index(br))
        for u, a in zip(steps, tr.acceptances):
            heralded[sel] &= u[sel] < a
        p_plus[sel] = abs(plus.inner(tr.states[3])) ** 2
    guess = np.where(u_meas < p_plus, 0, 1)
    n_herald = int(heralded.sum())
    n_correct = int((heralded & (guess == bits)).sum())
    accuracy = n_correct / n_herald if n_herald else None

    psi5_plus = traces[(0, "D0")].states[3]
    psi5_minus = traces[(1, "D0")].states[3]
    fraction = psi5_plus.weight(1) / psi5_plus.norm2
    return AttackSummary(
        mu=float(mu),
        rho=float(rho),
        trials=int(trials),
        seed=int(seed),
        heralded=n_herald,
        correct=n_correct,
        accuracy=accuracy,
        heralding_probability_bit0=traces[(0, "D0")].heralding_probability,
        heralding_probability_bit1=traces[(1, "D0")].heralding_probability,
        empirical_heralding_rate=n_herald / trials,
        overlap=abs(psi5_plus.inner(psi5_minus)),
        single_photon_fraction=fraction,
        naive_key_fraction=fraction,
        eve_information_bits=None if accuracy is None else 1.0 - binary_entropy(1.0 - accuracy),
    )
