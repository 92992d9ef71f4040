# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled window loop. Mirrors ``_numpy_kernel.simulate_block`` draw for draw."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, pow, cos, fabs, M_PI
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

DEF SLOTS = 16
DEF MAX_TERMS = 200
DEF NZ = 16
DEF NX = 13

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t key, int64_t index, int slot) noexcept nogil:
    cdef uint64_t ctr = <uint64_t>index * SLOTS + <uint64_t>(slot + 1)
    return <double>(mix64(ctr * GOLDEN + key) >> 11) * INV53


cdef inline int64_t poisson_icdf(double u, double mean) noexcept nogil:
    cdef double p = exp(-mean)
    cdef double cdf = p
    cdef int64_t k = 0
    cdef int j = 1
    while j < MAX_TERMS and u > cdf and mean > 0.0:
        p = p * mean / j
        cdf = cdf + p
        k += 1
        j += 1
    return k


cdef inline int64_t binomial_icdf(double u, int64_t n, double prob) noexcept nogil:
    if n <= 0 or prob <= 0.0:
        return 0
    if prob >= 1.0:
        return n
    cdef double q = 1.0 - prob
    cdef double r = prob / q
    cdef double pmf = pow(q, <double>n)
    cdef double cdf = pmf
    cdef int64_t k = 0
    while u > cdf and k < n:
        pmf = pmf * r * <double>(n - k) / <double>(k + 1)
        cdf = cdf + pmf
        k += 1
    return k


cdef inline int window_class(double u, const double[:] cum) noexcept nogil:
    cdef int j
    for j in range(cum.shape[0]):
        if u < cum[j]:
            return j
    return cum.shape[0]


def simulate_block(uint64_t key, int64_t start, int64_t count, cum, intensities,
                   double epsilon, double mu_signal, double eta, double misalignment,
                   double dark, double lam):
    cdef const double[:] cum_v = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const double[:] mu_v = np.ascontiguousarray(intensities, dtype=np.float64)
    cdef int n_int = mu_v.shape[0]
    counts_arr = np.zeros(NZ + NX * n_int, dtype=np.int64)
    cdef int64_t[:] counts = counts_arr

    cdef int64_t w, idx, photons, n_left, n_right
    cdef int ca, cb, decision, outcome, base, sd
    cdef bint send_a, send_b, is_z, is_x, accepted, pair, single, click_l, click_r, effective, minus, wrong
    cdef double da, db, cos_d, mean, c, port, p_left, p_right, cond, u_ph

    with nogil:
        for w in range(count):
            idx = start + w
            ca = window_class(uniform(key, idx, 0), cum_v)
            cb = window_class(uniform(key, idx, 1), cum_v)
            send_a = uniform(key, idx, 2) < epsilon
            send_b = uniform(key, idx, 3) < epsilon
            da = 2.0 * M_PI * uniform(key, idx, 4)
            db = 2.0 * M_PI * uniform(key, idx, 5)
            is_z = ca == 0 and cb == 0
            is_x = ca == cb and ca > 0
            if not is_z and not is_x:
                counts[15] += 1
                continue
            cos_d = cos(da - db)
            if is_x:
                base = NZ + NX * (ca - 1)
                counts[base] += 1
                accepted = 1.0 - fabs(cos_d) <= lam
                if not accepted:
                    continue
                counts[base + 1] += 1
                pair = True
                single = False
                mean = 2.0 * mu_v[ca - 1]
            else:
                single = send_a != send_b
                pair = send_a and send_b
                if single:
                    mean = mu_signal
                elif pair:
                    mean = 2.0 * mu_signal
                else:
                    mean = 0.0
            u_ph = uniform(key, idx, 6)
            photons = poisson_icdf(u_ph, mean)
            if pair:
                c = 0.5 * (1.0 + cos_d)
                port = (1.0 - misalignment) * c + misalignment * (1.0 - c)
                p_left = eta * port
                p_right = eta * (1.0 - port)
            else:
                p_left = 0.5 * eta
                p_right = 0.5 * eta
            n_left = binomial_icdf(uniform(key, idx, 7), photons, p_left)
            if p_left < 1.0:
                cond = p_right / (1.0 - p_left)
            else:
                cond = 0.0
            n_right = binomial_icdf(uniform(key, idx, 8), photons - n_left, cond)
            click_l = n_left > 0 or uniform(key, idx, 9) < dark
            click_r = n_right > 0 or uniform(key, idx, 10) < dark
            outcome = (<int>click_l) + 2 * (<int>click_r)
            effective = outcome == 1 or outcome == 2

            if is_z:
                decision = (<int>send_a) + 2 * (<int>send_b)
                counts[0] += 1
                counts[1 + decision] += 1
                if effective:
                    counts[5 + decision] += 1
                counts[9 + outcome] += 1
                if single and photons == 1:
                    counts[13] += 1
                    if effective:
                        counts[14] += 1
            else:
                counts[base + 2 + outcome] += 1
                minus = cos_d < 0.0
                wrong = (minus and outcome == 1) or (not minus and outcome == 2)
                if effective:
                    sd = 2 * (<int>minus) + (1 if outcome == 2 else 0)
                    counts[base + 6 + sd] += 1
                if photons == 1:
                    counts[base + 10] += 1
                    if effective:
                        counts[base + 11] += 1
                        if wrong:
                            counts[base + 12] += 1
    return counts_arr
