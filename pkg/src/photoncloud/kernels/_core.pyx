# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical core.

Hot kernels behind photoncloud.kernels: matrix permanent (Ryser, Gray-code
updates), Mach-Zehnder mesh products, and exact multi-photon output
distributions. Must stay result-identical to ``_pure``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

IMPLEMENTATION = "compiled"

ctypedef double complex dcomplex


cdef dcomplex _permanent(dcomplex[:, :] a) except *:
    cdef Py_ssize_t n = a.shape[0]
    cdef dcomplex row_sums[32]
    cdef dcomplex total = 0
    cdef dcomplex prod
    cdef unsigned long long k, gray, prev, bit, top
    cdef Py_ssize_t i, j, card
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return a[0, 0]
    if n > 30:
        raise ValueError("permanent kernel supports n <= 30")
    for i in range(n):
        row_sums[i] = 0
    prev = 0
    card = 0
    top = (<unsigned long long>1) << n
    for k in range(1, top):
        gray = k ^ (k >> 1)
        bit = gray ^ prev
        j = 0
        while not (bit >> j) & 1:
            j += 1
        if gray & bit:
            card += 1
            for i in range(n):
                row_sums[i] = row_sums[i] + a[i, j]
        else:
            card -= 1
            for i in range(n):
                row_sums[i] = row_sums[i] - a[i, j]
        prev = gray
        prod = 1
        for i in range(n):
            prod = prod * row_sums[i]
        if card & 1:
            total = total - prod
        else:
            total = total + prod
    if n & 1:
        total = -total
    return total


def permanent(a):
    cdef cnp.ndarray[dcomplex, ndim=2] mat = np.ascontiguousarray(a, dtype=np.complex128)
    return complex(_permanent(mat))


cdef inline void _mzi_entries(double theta, double phi,
                              double t1, double r1, double t2, double r2,
                              dcomplex *out) noexcept nogil:
    # C(t2,r2) @ diag(e^{i theta},1) @ C(t1,r1) @ diag(e^{i phi},1)
    cdef dcomplex eth = cos(theta) + 1j * sin(theta)
    cdef dcomplex eph = cos(phi) + 1j * sin(phi)
    out[0] = eph * (t1 * t2 * eth - r1 * r2)
    out[1] = 1j * (r1 * t2 * eth + r2 * t1)
    out[2] = 1j * eph * (t1 * r2 * eth + r1 * t2)
    out[3] = t1 * t2 - r1 * r2 * eth


def mesh_matrix(Py_ssize_t m,
                long[::1] unit_p, long[::1] theta_idx, long[::1] phi_idx,
                double[::1] t1, double[::1] r1, double[::1] t2, double[::1] r2,
                long[::1] out_mode, long[::1] out_idx,
                double[::1] phases):
    cdef cnp.ndarray[dcomplex, ndim=2] U = np.eye(m, dtype=np.complex128)
    cdef dcomplex[:, ::1] Um = U
    cdef dcomplex blk[4]
    cdef dcomplex vp, vq, rot
    cdef double ph
    cdef Py_ssize_t u, p, col, k
    for u in range(unit_p.shape[0]):
        p = unit_p[u]
        ph = phases[phi_idx[u]] if phi_idx[u] >= 0 else 0.0
        _mzi_entries(phases[theta_idx[u]], ph, t1[u], r1[u], t2[u], r2[u], blk)
        for col in range(m):
            vp = Um[p, col]
            vq = Um[p + 1, col]
            Um[p, col] = blk[0] * vp + blk[1] * vq
            Um[p + 1, col] = blk[2] * vp + blk[3] * vq
    for k in range(out_mode.shape[0]):
        ph = phases[out_idx[k]]
        rot = cos(ph) + 1j * sin(ph)
        for col in range(m):
            Um[out_mode[k], col] = Um[out_mode[k], col] * rot
    return U


def mesh_columns_batch(Py_ssize_t m,
                       long[::1] unit_p, long[::1] theta_idx, long[::1] phi_idx,
                       double[::1] t1, double[::1] r1, double[::1] t2, double[::1] r2,
                       double[:, ::1] phases_batch, long[::1] in_modes):
    cdef Py_ssize_t B = phases_batch.shape[0]
    cdef cnp.ndarray[double, ndim=2] P = np.zeros((B, m))
    cdef double[:, ::1] Pm = P
    cdef dcomplex v[64]
    cdef dcomplex blk[4]
    cdef dcomplex vp, vq
    cdef double ph
    cdef Py_ssize_t b, u, p, i, n_units = unit_p.shape[0]
    if m > 64:
        raise ValueError("mesh kernel supports at most 64 modes")
    for b in range(B):
        for i in range(m):
            v[i] = 0
        v[in_modes[b]] = 1
        for u in range(n_units):
            p = unit_p[u]
            ph = phases_batch[b, phi_idx[u]] if phi_idx[u] >= 0 else 0.0
            _mzi_entries(phases_batch[b, theta_idx[u]], ph, t1[u], r1[u], t2[u], r2[u], blk)
            vp = v[p]
            vq = v[p + 1]
            v[p] = blk[0] * vp + blk[1] * vq
            v[p + 1] = blk[2] * vp + blk[3] * vq
        for i in range(m):
            Pm[b, i] = v[i].real * v[i].real + v[i].imag * v[i].imag
    return P


def mesh_columns_exp_batch(Py_ssize_t m,
                           long[::1] unit_p, long[::1] theta_idx, long[::1] phi_idx,
                           double[::1] t1, double[::1] r1, double[::1] t2, double[::1] r2,
                           dcomplex[:, ::1] exp_phases, long[::1] in_modes):
    """Like mesh_columns_batch but with e^{i phase} precomputed per shifter;
    lets callers update single columns between evaluations."""
    cdef Py_ssize_t B = exp_phases.shape[0]
    cdef cnp.ndarray[double, ndim=2] P = np.zeros((B, m))
    cdef double[:, ::1] Pm = P
    cdef dcomplex v[64]
    cdef dcomplex eth, eph, a, b_, c_, d_, vp, vq
    cdef double tt, rr
    cdef Py_ssize_t b, u, p, i, n_units = unit_p.shape[0]
    if m > 64:
        raise ValueError("mesh kernel supports at most 64 modes")
    for b in range(B):
        for i in range(m):
            v[i] = 0
        v[in_modes[b]] = 1
        for u in range(n_units):
            p = unit_p[u]
            eth = exp_phases[b, theta_idx[u]]
            eph = exp_phases[b, phi_idx[u]] if phi_idx[u] >= 0 else 1.0
            tt = t1[u] * t2[u]
            rr = r1[u] * r2[u]
            a = eph * (tt * eth - rr)
            b_ = 1j * (r1[u] * t2[u] * eth + r2[u] * t1[u])
            c_ = 1j * eph * (t1[u] * r2[u] * eth + r1[u] * t2[u])
            d_ = tt - rr * eth
            vp = v[p]
            vq = v[p + 1]
            v[p] = a * vp + b_ * vq
            v[p + 1] = c_ * vp + d_ * vq
        for i in range(m):
            Pm[b, i] = v[i].real * v[i].real + v[i].imag * v[i].imag
    return P


def fock_distribution(u, in_occ):
    """Exact n-photon output distribution; enumeration order matches
    itertools.combinations_with_replacement(range(m), n)."""
    cdef cnp.ndarray[dcomplex, ndim=2] U = np.ascontiguousarray(u, dtype=np.complex128)
    cdef cnp.ndarray[long, ndim=1] occ_in = np.ascontiguousarray(in_occ, dtype=np.int64)
    cdef Py_ssize_t m = occ_in.shape[0]
    cdef Py_ssize_t n = 0
    cdef Py_ssize_t i, j, k
    for i in range(m):
        n += occ_in[i]
    if n == 0:
        return np.zeros((1, m), dtype=np.int64), np.ones(1)
    if n > 20:
        raise ValueError("distribution beyond the 20-photon exact limit")
    if m > 64:
        raise ValueError("distribution kernel supports at most 64 modes")

    cdef long cols[24]
    k = 0
    for i in range(m):
        for j in range(occ_in[i]):
            cols[k] = i
            k += 1
    cdef double in_fact = 1.0
    for i in range(m):
        for j in range(2, occ_in[i] + 1):
            in_fact *= j

    # number of outputs: C(m+n-1, n)
    cdef Py_ssize_t total = 1
    for i in range(1, n + 1):
        total = total * (m + i - 1) // i

    cdef cnp.ndarray[long, ndim=2] outputs = np.zeros((total, m), dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] probs = np.zeros(total)
    cdef long[:, ::1] outs = outputs
    cdef double[::1] pr = probs

    cdef long rows[24]
    cdef long out_occ[64]
    cdef dcomplex amp
    cdef double out_fact
    cdef Py_ssize_t idx = 0, pos

    sub_np = np.zeros((n, n), dtype=np.complex128)
    cdef dcomplex[:, ::1] subv = sub_np

    for i in range(n):
        rows[i] = 0
    while True:
        for i in range(m):
            out_occ[i] = 0
        for i in range(n):
            out_occ[rows[i]] += 1
        for i in range(m):
            outs[idx, i] = out_occ[i]
        for i in range(n):
            for j in range(n):
                subv[i, j] = U[rows[i], cols[j]]
        amp = _permanent(subv)
        out_fact = 1.0
        for i in range(m):
            for j in range(2, out_occ[i] + 1):
                out_fact *= j
        pr[idx] = (amp.real * amp.real + amp.imag * amp.imag) / (in_fact * out_fact)
        idx += 1
        pos = n - 1
        while pos >= 0 and rows[pos] == m - 1:
            pos -= 1
        if pos < 0:
            break
        rows[pos] += 1
        for i in range(pos + 1, n):
            rows[i] = rows[pos]
    return outputs, probs
