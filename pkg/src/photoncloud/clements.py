"""Rectangular-mesh decomposition of unitaries (Clements scheme).

Factors any m-mode unitary into the canonical rectangle of Mach-Zehnder
units plus an output diagonal: U = D * T_1 * ... * T_N. On layouts carrying
an output phase layer the factorization is exact; on reduced layouts the
dropped phases amount to input/output diagonals that photon counting cannot
see, and ``decompose`` silently gauges them away.
"""

from __future__ import annotations

import numpy as np

from .fock import ContractError, Interferometer
from .mesh import MeshLayout, PhaseConfig, mesh_transfer

UNITARY_TOL = 1e-9


def _mzi2(theta: float, phi: float) -> np.ndarray:
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    pre = 1j * np.exp(1j * theta / 2)
    return pre * np.array([[np.exp(1j * phi) * s, c], [np.exp(1j * phi) * c, -s]])


def _factor_diag_mzi(m2: np.ndarray) -> tuple[float, float, complex, complex]:
    """Write a 2x2 unitary as diag(d0, d1) @ MZI(theta, phi)."""
    s = min(1.0, abs(m2[0, 0]))
    theta = 2 * np.arcsin(s)
    c = np.cos(theta / 2)
    if s > 1e-12 and c > 1e-12:
        phi = float(np.angle(m2[0, 0]) - np.angle(m2[0, 1]))
    else:
        phi = 0.0
    pre = 1j * np.exp(1j * theta / 2)
    if c > 1e-12:
        d0 = m2[0, 1] / (pre * c)
    else:
        d0 = m2[0, 0] / (pre * np.exp(1j * phi) * s)
    if s > 1e-12:
        d1 = m2[1, 1] / (-pre * s)
    else:
        d1 = m2[1, 0] / (pre * np.exp(1j * phi) * c)
    return float(theta), phi, complex(d0), complex(d1)


def clements_decompose(u: Interferometer, layout: MeshLayout) -> PhaseConfig:
    """Phase settings realizing ``u`` on ``layout`` (ideal couplers assumed).

    Raises ContractError for non-unitary input or a mode-count mismatch.
    """
    if u.modes != layout.modes:
        raise ContractError("unitary size does not match the layout")
    if not u.is_unitary(UNITARY_TOL):
        raise ContractError("decomposition requires a unitary matrix")
    m = layout.modes
    v = u.matrix.astype(np.complex128).copy()

    rights: list[tuple[int, float, float]] = []  # (pair, theta, phi) application order
    lefts: list[tuple[int, float, float]] = []
    for k in range(1, m):
        if k % 2 == 1:
            for j in range(k):
                r, c = m - 1 - j, k - 1 - j
                p = c
                theta = 2 * np.arctan2(abs(v[r, p + 1]), abs(v[r, p]))
                z = -v[r, p + 1] * np.conj(v[r, p])
                phi = -float(np.angle(z)) if abs(z) > 0 else 0.0
                t = _mzi2(theta, phi)
                v[:, p : p + 2] = v[:, p : p + 2] @ t.conj().T
                rights.append((p, float(theta), phi))
        else:
            for j in range(k):
                r, c = m - k + j, j
                p = r - 1
                theta = 2 * np.arctan2(abs(v[r - 1, c]), abs(v[r, c]))
                w = v[r, c] * np.conj(v[r - 1, c])
                phi = float(np.angle(w)) if abs(w) > 0 else 0.0
                t = _mzi2(theta, phi)
                v[p : p + 2, :] = t @ v[p : p + 2, :]
                lefts.append((p, float(theta), phi))

    d = np.diagonal(v).copy()
    # commute the left factors through the diagonal: T^dag D = D' T'
    light_tail: list[tuple[int, float, float]] = []
    for p, theta, phi in reversed(lefts):
        m2 = _mzi2(theta, phi).conj().T @ np.diag([d[p], d[p + 1]])
        th2, ph2, d0, d1 = _factor_diag_mzi(m2)
        d[p], d[p + 1] = d0, d1
        light_tail.append((p, th2, ph2))

    ops = rights + light_tail  # light traversal order
    phases = np.zeros(layout.shifter_count)
    if len(ops) != layout.unit_count:
        raise ContractError("layout does not match the decomposition footprint")
    for unit, (p, theta, phi) in zip(layout.units, ops):
        if unit.top_mode != p:
            raise ContractError("layout unit order does not match the decomposition")
        phases[unit.theta] = theta
        if unit.phi >= 0:
            phases[unit.phi] = phi % (2 * np.pi)
        # units without an external shifter absorb phi into the input gauge
    for mode, idx in enumerate(layout.output_shifters):
        phases[idx] = float(np.angle(d[mode])) % (2 * np.pi)
    return PhaseConfig(phases)


def mesh_reconstruct(phases: PhaseConfig, layout: MeshLayout) -> Interferometer:
    """Transfer matrix of an ideal mesh (no fabrication errors) at ``phases``."""
    return Interferometer(mesh_transfer(layout, phases, coupler_errors=None))
