"""Pure python/numpy reference kernels.

Same API as the compiled extension ``_core``; used as the fallback when the
extension is unavailable (or when ``PHOTONCLOUD_PURE`` is set).
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from math import factorial

import numpy as np

IMPLEMENTATION = "pure"


def permanent(a: np.ndarray) -> complex:
    """Matrix permanent by Ryser's formula with Gray-code subset updates.

    O(2^n * n); callers enforce any size policy.
    """
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return complex(a[0, 0])
    # Row sums over the current column subset, updated one column per step.
    cols = [a[:, j].tolist() for j in range(n)]
    row_sums = [0.0 + 0.0j] * n
    total = 0.0 + 0.0j
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        bit = gray ^ prev_gray
        j = bit.bit_length() - 1
        col = cols[j]
        if gray & bit:
            for i in range(n):
                row_sums[i] += col[i]
        else:
            for i in range(n):
                row_sums[i] -= col[i]
        prev_gray = gray
        prod = 1.0 + 0.0j
        for v in row_sums:
            prod *= v
        if gray.bit_count() & 1:
            total -= prod
        else:
            total += prod
    if n & 1:
        total = -total
    return total


def mzi_entries(theta, phi, t1, r1, t2, r2):
    """2x2 block of one Mach-Zehnder unit: C(t2,r2) P(theta) C(t1,r1) P(phi).

    Couplers are C = [[t, i r], [i r, t]]; P(x) = diag(e^{ix}, 1). Works on
    scalars or broadcast arrays of phases.
    """
    eth = np.exp(1j * np.asarray(theta))
    eph = np.exp(1j * np.asarray(phi))
    a = eph * (t1 * t2 * eth - r1 * r2)
    b = 1j * (r1 * t2 * eth + r2 * t1)
    c = 1j * eph * (t1 * r2 * eth + r1 * t2)
    d = t1 * t2 - r1 * r2 * eth
    return a, b, c, d


def mesh_matrix(m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2, out_mode, out_idx, phases):
    """Full m x m transfer matrix of the mesh for one phase configuration."""
    U = np.eye(m, dtype=np.complex128)
    for u in range(len(unit_p)):
        p = unit_p[u]
        th = phases[theta_idx[u]]
        ph = phases[phi_idx[u]] if phi_idx[u] >= 0 else 0.0
        a, b, c, d = mzi_entries(th, ph, t1[u], r1[u], t2[u], r2[u])
        top = U[p, :].copy()
        bot = U[p + 1, :]
        U[p, :] = a * top + b * bot
        U[p + 1, :] = c * top + d * bot
    for k in range(len(out_mode)):
        U[out_mode[k], :] *= np.exp(1j * phases[out_idx[k]])
    return U


def mesh_columns_batch(m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2, phases_batch, in_modes):
    """|U e_j|^2 for a batch of phase configurations.

    phases_batch: (B, n_shifters); in_modes: (B,). Returns (B, m) detection
    probabilities before losses. Output phases are omitted (moduli only).
    """
    phases_batch = np.asarray(phases_batch, dtype=np.float64)
    B = phases_batch.shape[0]
    V = np.zeros((B, m), dtype=np.complex128)
    V[np.arange(B), in_modes] = 1.0
    for u in range(len(unit_p)):
        p = unit_p[u]
        th = phases_batch[:, theta_idx[u]]
        ph = phases_batch[:, phi_idx[u]] if phi_idx[u] >= 0 else 0.0
        a, b, c, d = mzi_entries(th, ph, t1[u], r1[u], t2[u], r2[u])
        vp = V[:, p].copy()
        vq = V[:, p + 1]
        V[:, p] = a * vp + b * vq
        V[:, p + 1] = c * vp + d * vq
    return np.abs(V) ** 2


def mesh_columns_exp_batch(m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2, exp_phases, in_modes):
    """mesh_columns_batch with e^{i phase} precomputed per shifter."""
    E = np.asarray(exp_phases, dtype=np.complex128)
    B = E.shape[0]
    V = np.zeros((B, m), dtype=np.complex128)
    V[np.arange(B), in_modes] = 1.0
    for u in range(len(unit_p)):
        p = unit_p[u]
        eth = E[:, theta_idx[u]]
        eph = E[:, phi_idx[u]] if phi_idx[u] >= 0 else 1.0
        tt = t1[u] * t2[u]
        rr = r1[u] * r2[u]
        a = eph * (tt * eth - rr)
        b = 1j * (r1[u] * t2[u] * eth + r2[u] * t1[u])
        c = 1j * eph * (t1[u] * r2[u] * eth + r1[u] * t2[u])
        d = tt - rr * eth
        vp = V[:, p].copy()
        vq = V[:, p + 1]
        V[:, p] = a * vp + b * vq
        V[:, p + 1] = c * vp + d * vq
    return np.abs(V) ** 2


def enumerate_outputs(m: int, n: int) -> np.ndarray:
    """All occupation vectors of n photons over m modes.

    Order is the lexicographic order of non-decreasing mode tuples, which both
    kernel implementations must reproduce exactly.
    """
    outs = [
        np.bincount(comb, minlength=m)
        for comb in combinations_with_replacement(range(m), n)
    ]
    return np.array(outs, dtype=np.int64).reshape(-1, m)


def fock_distribution(u: np.ndarray, in_occ) -> tuple[np.ndarray, np.ndarray]:
    """Exact output distribution of ``in_occ`` photons through unitary ``u``.

    Returns (outputs, probs): every n-photon occupation vector and its
    probability |perm(U_sub)|^2 / (prod n_i! prod m_j!).
    """
    in_occ = np.asarray(in_occ, dtype=np.int64)
    m = len(in_occ)
    n = int(in_occ.sum())
    if n == 0:
        return np.zeros((1, m), dtype=np.int64), np.ones(1)
    cols = np.repeat(np.arange(m), in_occ)
    in_fact = 1.0
    for occ in in_occ:
        in_fact *= factorial(int(occ))
    combos = list(combinations_with_replacement(range(m), n))
    outputs = np.zeros((len(combos), m), dtype=np.int64)
    probs = np.zeros(len(combos))
    for k, comb in enumerate(combos):
        rows = np.fromiter(comb, dtype=np.int64)
        occ = np.bincount(rows, minlength=m)
        outputs[k] = occ
        sub = u[np.ix_(rows, cols)]
        amp = permanent(sub)
        out_fact = 1.0
        for o in occ:
            out_fact *= factorial(int(o))
        probs[k] = (amp.real**2 + amp.imag**2) / (in_fact * out_fact)
    return outputs, probs
