"""Vectorized numpy implementation of the window simulation.

This is the reference path and the fallback when the compiled kernel is not
available. Both consume the same counter-based uniforms slot by slot, so they
produce identical tallies.
"""

from __future__ import annotations

import math

import numpy as np

from ._rng import uniforms

# uniform slots per window
S_CLASS_A, S_CLASS_B, S_SEND_A, S_SEND_B, S_PHASE_A, S_PHASE_B = range(6)
S_PHOTONS, S_LEFT, S_RIGHT, S_DARK_L, S_DARK_R = range(6, 11)

# window kinds
KIND_Z, KIND_X, KIND_MISMATCHED = 0, 1, 2

# outcomes
NONE, LEFT, RIGHT, BOTH = 0, 1, 2, 3

# counts layout: Z block then one X block per decoy intensity
Z_WINDOWS = 0
Z_BY_DECISION = 1  # 4 entries: none, alice only, bob only, both
Z_EFF_BY_DECISION = 5  # 4 entries
Z_OUTCOMES = 9  # 4 entries: none, left, right, both
Z1_WINDOWS = 13
Z1_EFFECTIVE = 14
MISMATCHED = 15
NZ = 16

X_WINDOWS = 0
X_ACCEPTED = 1
X_OUTCOMES = 2  # 4 entries
X_N = 6  # 4 entries: (+,L) (+,R) (-,L) (-,R)
X1_WINDOWS = 10
X1_EFFECTIVE = 11
X1_ERRORS = 12
NX = 13

MAX_TERMS = 200
TWO_PI = 2.0 * math.pi


def n_counts(n_intensities: int) -> int:
    return NZ + NX * n_intensities


def poisson_icdf(u: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Inverse-CDF Poisson sampling, term by term as in the compiled loop."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), u.shape)
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-mean)
    cdf = p.copy()
    for j in range(1, MAX_TERMS):
        active = (u > cdf) & (mean > 0.0)
        if not active.any():
            break
        p = np.where(active, p * mean / j, p)
        cdf = np.where(active, cdf + p, cdf)
        k += active
    return k


def binomial_icdf(u: np.ndarray, n: np.ndarray, prob: np.ndarray) -> np.ndarray:
    """Inverse-CDF binomial sampling, term by term as in the compiled loop."""
    n = np.asarray(n, dtype=np.int64)
    prob = np.broadcast_to(np.asarray(prob, dtype=float), u.shape)
    out = np.zeros(u.shape, dtype=np.int64)
    full = (prob >= 1.0) & (n > 0)
    out[full] = n[full]
    todo = (n > 0) & (prob > 0.0) & ~full
    if not todo.any():
        return out
    uu, nn, pp = u[todo], n[todo], prob[todo]
    q = 1.0 - pp
    r = pp / q
    pmf = np.power(q, nn.astype(float))
    cdf = pmf.copy()
    k = np.zeros(uu.shape, dtype=np.int64)
    while True:
        active = (uu > cdf) & (k < nn)
        if not active.any():
            break
        pmf = np.where(active, pmf * r * (nn - k) / (k + 1), pmf)
        cdf = np.where(active, cdf + pmf, cdf)
        k += active
    out[todo] = k
    return out


def simulate_arrays(key, start, count, cum, intensities, epsilon, mu_signal, eta, misalignment, dark, lam):
    """Per-window simulation; returns a dict of equally long arrays."""
    idx = np.arange(start, start + count, dtype=np.int64)
    cum = np.asarray(cum, dtype=float)
    intensities = np.asarray(intensities, dtype=float)

    cls_a = np.searchsorted(cum, uniforms(key, idx, S_CLASS_A), side="right")
    cls_b = np.searchsorted(cum, uniforms(key, idx, S_CLASS_B), side="right")
    send_a = uniforms(key, idx, S_SEND_A) < epsilon
    send_b = uniforms(key, idx, S_SEND_B) < epsilon
    delta_a = TWO_PI * uniforms(key, idx, S_PHASE_A)
    delta_b = TWO_PI * uniforms(key, idx, S_PHASE_B)

    is_z = (cls_a == 0) & (cls_b == 0)
    is_x = (cls_a == cls_b) & (cls_a > 0)
    kind = np.full(count, KIND_MISMATCHED, dtype=np.int64)
    kind[is_z] = KIND_Z
    kind[is_x] = KIND_X

    cos_d = np.cos(delta_a - delta_b)
    accepted = is_x & (1.0 - np.abs(cos_d) <= lam)

    single = is_z & (send_a != send_b)
    coherent_pair = (is_z & send_a & send_b) | accepted
    x_mu = intensities[np.clip(cls_a - 1, 0, len(intensities) - 1)]
    mean = np.zeros(count)
    mean[single] = mu_signal
    mean[is_z & send_a & send_b] = 2.0 * mu_signal
    mean[accepted] = 2.0 * x_mu[accepted]
    photons = poisson_icdf(uniforms(key, idx, S_PHOTONS), mean)

    c = 0.5 * (1.0 + cos_d)
    port = (1.0 - misalignment) * c + misalignment * (1.0 - c)
    p_left = np.where(coherent_pair, eta * port, 0.5 * eta)
    p_right = np.where(coherent_pair, eta * (1.0 - port), 0.5 * eta)
    simulated = is_z | accepted
    photons = np.where(simulated, photons, 0)
    n_left = binomial_icdf(uniforms(key, idx, S_LEFT), photons, p_left)
    rest = photons - n_left
    cond = np.where(p_left < 1.0, p_right / np.where(p_left < 1.0, 1.0 - p_left, 1.0), 0.0)
    n_right = binomial_icdf(uniforms(key, idx, S_RIGHT), rest, cond)
    click_l = (n_left > 0) | (uniforms(key, idx, S_DARK_L) < dark)
    click_r = (n_right > 0) | (uniforms(key, idx, S_DARK_R) < dark)
    outcome = np.where(simulated, click_l.astype(np.int64) + 2 * click_r.astype(np.int64), NONE)

    return {
        "kind": kind,
        "class_a": cls_a,
        "class_b": cls_b,
        "send_a": send_a,
        "send_b": send_b,
        "delta_a": delta_a,
        "delta_b": delta_b,
        "accepted": accepted,
        "photons": photons,
        "outcome": outcome,
    }


def simulate_block(key, start, count, cum, intensities, epsilon, mu_signal, eta, misalignment, dark, lam):
    """Tally ``count`` windows starting at global index ``start``."""
    a = simulate_arrays(key, start, count, cum, intensities, epsilon, mu_signal, eta, misalignment, dark, lam)
    n_int = len(intensities)
    counts = np.zeros(n_counts(n_int), dtype=np.int64)
    kind, outcome, photons = a["kind"], a["outcome"], a["photons"]
    effective = (outcome == LEFT) | (outcome == RIGHT)

    z = kind == KIND_Z
    decision = a["send_a"].astype(np.int64) + 2 * a["send_b"].astype(np.int64)
    counts[Z_WINDOWS] = z.sum()
    counts[Z_BY_DECISION:Z_BY_DECISION + 4] = np.bincount(decision[z], minlength=4)
    counts[Z_EFF_BY_DECISION:Z_EFF_BY_DECISION + 4] = np.bincount(decision[z & effective], minlength=4)
    counts[Z_OUTCOMES:Z_OUTCOMES + 4] = np.bincount(outcome[z], minlength=4)
    z1 = z & (a["send_a"] != a["send_b"]) & (photons == 1)
    counts[Z1_WINDOWS] = z1.sum()
    counts[Z1_EFFECTIVE] = (z1 & effective).sum()
    counts[MISMATCHED] = (kind == KIND_MISMATCHED).sum()

    minus = np.cos(a["delta_a"] - a["delta_b"]) < 0.0
    # 0: (+,L) 1: (+,R) 2: (-,L) 3: (-,R)
    sign_det = 2 * minus.astype(np.int64) + (outcome == RIGHT).astype(np.int64)
    wrong = (minus & (outcome == LEFT)) | (~minus & (outcome == RIGHT))
    for i in range(n_int):
        base = NZ + NX * i
        xi = (kind == KIND_X) & (a["class_a"] == i + 1)
        acc = xi & a["accepted"]
        counts[base + X_WINDOWS] = xi.sum()
        counts[base + X_ACCEPTED] = acc.sum()
        counts[base + X_OUTCOMES:base + X_OUTCOMES + 4] = np.bincount(outcome[acc], minlength=4)
        counts[base + X_N:base + X_N + 4] = np.bincount(sign_det[acc & effective], minlength=4)
        x1 = acc & (photons == 1)
        counts[base + X1_WINDOWS] = x1.sum()
        counts[base + X1_EFFECTIVE] = (x1 & effective).sum()
        counts[base + X1_ERRORS] = (x1 & effective & wrong).sum()
    return counts
