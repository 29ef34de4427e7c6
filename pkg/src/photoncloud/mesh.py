"""Reconfigurable interferometer mesh: layout map, physical transfer matrix,
chip imperfections and the voltage-to-phase law.

The mesh is a rectangular arrangement of Mach-Zehnder units (two directional
couplers around an internal phase shifter theta, preceded by an external
phase shifter phi on the top arm). The layout map is explicit configuration:
which shifters form which unit, which units lack an external phi, and whether
an output phase layer exists. The reference 12-mode platform exposes 126
shifters (66 internal thetas + 60 externals; the first column's externals act
on bare input modes and are omitted, and there is no output layer), while the
fully parameterized layout has m^2 shifters and realizes any unitary exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

V_MAX = 10.0
# nominal thermo-optic efficiency: phase = alpha * V^2. The 1.25 headroom
# keeps the span >= 2*pi even for heaters fabricated 10% below nominal.
ALPHA_NOMINAL = 1.25 * 2 * np.pi / V_MAX**2
COUPLER_ERROR_LIMIT = 0.05


class LayoutError(ValueError):
    """Phase/layout dimension mismatch."""


@dataclass(frozen=True)
class MZIUnit:
    column: int
    top_mode: int
    theta: int  # shifter index
    phi: int  # shifter index, -1 when the unit has no external shifter


@dataclass(frozen=True)
class MeshLayout:
    modes: int
    units: tuple[MZIUnit, ...]
    output_shifters: tuple[int, ...]  # one index per mode, or empty
    shifter_count: int

    # packed arrays for the kernels
    _unit_p: np.ndarray = field(repr=False, compare=False, default=None)
    _theta_idx: np.ndarray = field(repr=False, compare=False, default=None)
    _phi_idx: np.ndarray = field(repr=False, compare=False, default=None)
    _out_mode: np.ndarray = field(repr=False, compare=False, default=None)
    _out_idx: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_unit_p", np.array([u.top_mode for u in self.units], dtype=np.int64))
        object.__setattr__(self, "_theta_idx", np.array([u.theta for u in self.units], dtype=np.int64))
        object.__setattr__(self, "_phi_idx", np.array([u.phi for u in self.units], dtype=np.int64))
        object.__setattr__(self, "_out_mode", np.arange(self.modes, dtype=np.int64)[: len(self.output_shifters)])
        object.__setattr__(self, "_out_idx", np.array(self.output_shifters, dtype=np.int64))

    @property
    def unit_count(self) -> int:
        return len(self.units)

    @property
    def coupler_count(self) -> int:
        return 2 * len(self.units)

    @property
    def columns(self) -> int:
        return max(u.column for u in self.units) + 1

    def describe(self) -> dict:
        return {
            "modes": self.modes,
            "units": self.unit_count,
            "shifters": self.shifter_count,
            "couplers": self.coupler_count,
            "columns": self.columns,
            "output_phase_layer": bool(self.output_shifters),
        }


def decomposition_pair_sequence(m: int) -> tuple[list[int], list[int]]:
    """Mode-pair pivots of the rectangular decomposition for m modes.

    Returns (right_pairs, left_pairs) in application order; unitary
    independent, so the layout can be derived from it once.
    """
    rights: list[int] = []
    lefts: list[int] = []
    for k in range(1, m):
        if k % 2 == 1:
            for j in range(k):
                rights.append(k - 1 - j)
        else:
            for j in range(k):
                lefts.append(m - k + j - 1)
    return rights, lefts


def light_order_pairs(m: int) -> list[int]:
    """Top modes of the mesh units in the order light traverses them."""
    rights, lefts = decomposition_pair_sequence(m)
    return rights + lefts[::-1]


def rectangular_layout(m: int, output_phases: bool = True, first_column_phi: bool = True) -> MeshLayout:
    """Canonical rectangular layout for ``m`` modes.

    ``output_phases=False`` drops the output phase layer (realizes unitaries
    up to an output diagonal); ``first_column_phi=False`` additionally drops
    the external shifters of the first column, whose phases act on bare input
    modes and are invisible to photon-counting statistics.
    """
    pairs = light_order_pairs(m)
    next_free = [0] * m
    units: list[MZIUnit] = []
    idx = 0
    for p in pairs:
        col = max(next_free[p], next_free[p + 1])
        next_free[p] = next_free[p + 1] = col + 1
        has_phi = first_column_phi or col > 0
        theta = idx
        idx += 1
        phi = -1
        if has_phi:
            phi = idx
            idx += 1
        units.append(MZIUnit(column=col, top_mode=p, theta=theta, phi=phi))
    out: tuple[int, ...] = ()
    if output_phases:
        out = tuple(range(idx, idx + m))
        idx += m
    return MeshLayout(modes=m, units=tuple(units), output_shifters=out, shifter_count=idx)


def full_layout(m: int) -> MeshLayout:
    """Fully parameterized layout: m^2 shifters, exact unitary coverage."""
    return rectangular_layout(m, output_phases=True, first_column_phi=True)


def reference_layout(m: int = 12) -> MeshLayout:
    """The reference platform map: 126 shifters on 12 modes."""
    return rectangular_layout(m, output_phases=False, first_column_phi=False)


@dataclass(frozen=True)
class PhaseConfig:
    """Physical phase per shifter, radians."""

    phases: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.phases, dtype=np.float64)
        if arr.ndim != 1:
            raise LayoutError("phases must be a 1-d array")
        if not np.all(np.isfinite(arr)):
            raise LayoutError("phases must be finite")
        object.__setattr__(self, "phases", arr)

    def __len__(self):
        return len(self.phases)


@dataclass(frozen=True)
class VoltagePlan:
    """Drive voltage per shifter heater, volts in [0, V_MAX]."""

    voltages: np.ndarray
    v_max: float = V_MAX

    def __post_init__(self):
        arr = np.asarray(self.voltages, dtype=np.float64)
        if arr.ndim != 1:
            raise LayoutError("voltages must be a 1-d array")
        if np.any(arr < 0) or np.any(arr > self.v_max + 1e-12):
            raise LayoutError(f"voltages must lie in [0, {self.v_max}]")
        object.__setattr__(self, "voltages", arr)

    def __len__(self):
        return len(self.voltages)


@dataclass(frozen=True)
class ChipImperfections:
    """Static fabrication ground truth (or an estimate of it).

    ``crosstalk`` maps squared heater voltages to phases: row i receives
    crosstalk[i, j] * V_j^2 radians. Loss entries are survival factors
    (1 = lossless coupling).
    """

    passive_phases: np.ndarray  # per shifter, radians
    crosstalk: np.ndarray  # (s, s), rad / V^2, diagonally dominant
    coupler_errors: np.ndarray  # per coupler, power-splitting deviation from 1/2
    input_losses: np.ndarray  # per mode survival
    output_losses: np.ndarray  # per mode survival

    def __post_init__(self):
        pp = np.asarray(self.passive_phases, dtype=np.float64)
        ct = np.asarray(self.crosstalk, dtype=np.float64)
        ce = np.asarray(self.coupler_errors, dtype=np.float64)
        il = np.asarray(self.input_losses, dtype=np.float64)
        ol = np.asarray(self.output_losses, dtype=np.float64)
        s = len(pp)
        if ct.shape != (s, s):
            raise LayoutError("crosstalk must be s x s")
        diag = np.diagonal(ct)
        if np.any(diag <= 0):
            raise LayoutError("crosstalk diagonal must be positive")
        off = np.abs(ct) - np.diag(diag)
        if np.any(off.max(axis=1) >= diag):
            raise LayoutError("crosstalk must be row-wise diagonally dominant")
        if np.any(np.abs(ce) > COUPLER_ERROR_LIMIT + 1e-12):
            raise LayoutError(f"coupler errors must satisfy |eps| <= {COUPLER_ERROR_LIMIT}")
        for name, arr in (("input_losses", il), ("output_losses", ol)):
            if np.any(arr < 0) or np.any(arr > 1):
                raise LayoutError(f"{name} must lie in [0, 1]")
        for name, val in (
            ("passive_phases", pp),
            ("crosstalk", ct),
            ("coupler_errors", ce),
            ("input_losses", il),
            ("output_losses", ol),
        ):
            object.__setattr__(self, name, val)

    @property
    def shifter_count(self) -> int:
        return len(self.passive_phases)

    def mode_transmission(self) -> np.ndarray:
        """Effective per-mode chip transmission (I/O losses folded)."""
        return self.input_losses * self.output_losses

    @staticmethod
    def nominal(layout: MeshLayout, alpha: float = ALPHA_NOMINAL) -> "ChipImperfections":
        """Design values: zero passive phases, pure self-heating, ideal
        couplers and lossless coupling. The default compiler-side estimate."""
        s = layout.shifter_count
        return ChipImperfections(
            passive_phases=np.zeros(s),
            crosstalk=np.eye(s) * alpha,
            coupler_errors=np.zeros(layout.coupler_count),
            input_losses=np.ones(layout.modes),
            output_losses=np.ones(layout.modes),
        )


def geometric_crosstalk(
    diag: np.ndarray, neighbor_fraction: float = 0.03, decay: float = 0.5, band: int = 6
) -> np.ndarray:
    """Crosstalk matrix with geometric decay over shifter index distance.

    Column j couples alpha_j * fraction * decay^(d-1) into shifters at
    distance d <= band; the shifter index is the proxy for physical distance.
    """
    s = len(diag)
    c = np.diag(diag).astype(float)
    for d in range(1, band + 1):
        w = neighbor_fraction * decay ** (d - 1)
        for i in range(s - d):
            c[i, i + d] += w * diag[i + d]
            c[i + d, i] += w * diag[i]
    return c


def phases_from_voltages(plan: VoltagePlan, imp: ChipImperfections) -> PhaseConfig:
    """Forward thermo-optic law: phi_i = passive_i + sum_j C_ij V_j^2."""
    if len(plan) != imp.shifter_count:
        raise LayoutError("voltage plan length must match shifter count")
    return PhaseConfig(imp.passive_phases + imp.crosstalk @ (plan.voltages**2))


def coupler_amplitudes(layout: MeshLayout, coupler_errors: np.ndarray | None):
    """Per-unit coupler field amplitudes (t1, r1, t2, r2) from power errors."""
    n = layout.unit_count
    if coupler_errors is None:
        eps = np.zeros(2 * n)
    else:
        eps = np.asarray(coupler_errors, dtype=np.float64)
        if len(eps) != 2 * n:
            raise LayoutError("coupler error vector must have 2 entries per unit")
    t = np.sqrt(0.5 + eps)
    r = np.sqrt(0.5 - eps)
    return (
        np.ascontiguousarray(t[0::2]),
        np.ascontiguousarray(r[0::2]),
        np.ascontiguousarray(t[1::2]),
        np.ascontiguousarray(r[1::2]),
    )


def mesh_transfer(layout: MeshLayout, phases: PhaseConfig | np.ndarray, coupler_errors: np.ndarray | None = None) -> np.ndarray:
    """Unitary transfer matrix of the mesh at the given physical phases."""
    ph = phases.phases if isinstance(phases, PhaseConfig) else np.asarray(phases, dtype=np.float64)
    if len(ph) != layout.shifter_count:
        raise LayoutError(
            f"phase config has {len(ph)} entries, layout expects {layout.shifter_count}"
        )
    t1, r1, t2, r2 = coupler_amplitudes(layout, coupler_errors)
    return kernels.mesh_matrix(
        layout.modes,
        layout._unit_p,
        layout._theta_idx,
        layout._phi_idx,
        t1,
        r1,
        t2,
        r2,
        layout._out_mode,
        layout._out_idx,
        np.ascontiguousarray(ph),
    )


def single_photon_outputs(
    layout: MeshLayout,
    phase_batch: np.ndarray,
    in_modes: np.ndarray,
    coupler_errors: np.ndarray | None = None,
) -> np.ndarray:
    """Batch of single-photon output probability rows |U e_j|^2."""
    t1, r1, t2, r2 = coupler_amplitudes(layout, coupler_errors)
    return kernels.mesh_columns_batch(
        layout.modes,
        layout._unit_p,
        layout._theta_idx,
        layout._phi_idx,
        t1,
        r1,
        t2,
        r2,
        np.ascontiguousarray(phase_batch, dtype=np.float64),
        np.ascontiguousarray(in_modes, dtype=np.int64),
    )


def single_photon_outputs_exp(
    layout: MeshLayout,
    exp_phases: np.ndarray,
    in_modes: np.ndarray,
    coupler_errors: np.ndarray | None = None,
) -> np.ndarray:
    """single_photon_outputs with e^{i phase} supplied by the caller.

    The characterization fit perturbs one shifter at a time; updating one
    column of the exponential matrix avoids re-evaluating all the trig.
    """
    t1, r1, t2, r2 = coupler_amplitudes(layout, coupler_errors)
    return kernels.mesh_columns_exp_batch(
        layout.modes,
        layout._unit_p,
        layout._theta_idx,
        layout._phi_idx,
        t1,
        r1,
        t2,
        r2,
        np.ascontiguousarray(exp_phases, dtype=np.complex128),
        np.ascontiguousarray(in_modes, dtype=np.int64),
    )


def mesh_fidelity(u_target: np.ndarray, v_impl: np.ndarray, output_gauge: bool = False) -> float:
    """|Tr(U^dag V)| / m, optionally maximized over an output phase layer.

    The gauged variant scores layouts without output shifters, where V can
    only match U up to a physically undetectable output diagonal.
    """
    m = u_target.shape[0]
    w = v_impl @ u_target.conj().T
    if output_gauge:
        return float(np.sum(np.abs(np.diagonal(w))) / m)
    return float(np.abs(np.trace(w)) / m)
