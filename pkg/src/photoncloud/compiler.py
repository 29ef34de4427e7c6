"""Job compilation: gate circuits to mode unitaries, phase optimization
against characterized imperfections, and transpilation of phases into heater
voltages (inverting the crosstalk law).

Two-qubit gates use the post-selected linear-optical CNOT: a controlled-sign
core of three 1/3-splitting couplers over the four qubit rails plus a fresh
vacuum ancilla pair, Hadamards on the target rails, success probability 1/9.
Fresh ancillas per CNOT keep cascaded gates exact under coincidence
post-selection: a photon that leaks into a spent ancilla can never return.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fock import (
    ContractError,
    FockState,
    Interferometer,
    PostSelectionRule,
    encode_dual_rail,
)
from .mesh import (
    ChipImperfections,
    MeshLayout,
    PhaseConfig,
    VoltagePlan,
    mesh_fidelity,
    mesh_transfer,
    phases_from_voltages,
)

log = logging.getLogger(__name__)

MAX_QUBITS = 6
HERALD_WARNING = 1e-3
CNOT_SUCCESS = 1.0 / 9.0

SINGLE_QUBIT_GATES = {
    "H": lambda _: np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "X": lambda _: np.array([[0, 1], [1, 0]], dtype=float),
    "Z": lambda _: np.diag([1.0, -1.0]),
    "RZ": lambda a: np.diag([np.exp(-1j * a / 2), np.exp(1j * a / 2)]),
    "RY": lambda a: np.array(
        [[np.cos(a / 2), -np.sin(a / 2)], [np.sin(a / 2), np.cos(a / 2)]]
    ),
}


class CompileError(ValueError):
    """Unsupported gate, qubit overflow or mode budget exhausted."""


class TranspileError(ValueError):
    """No wrap choice yields voltages within [0, V_max]."""


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.name in SINGLE_QUBIT_GATES:
            if len(self.qubits) != 1:
                raise CompileError(f"{self.name} acts on exactly one qubit")
        elif self.name == "CNOT":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise CompileError("CNOT needs two distinct qubits")
        else:
            raise CompileError(f"unsupported gate {self.name!r}")
        if self.name in ("RZ", "RY"):
            if self.angle is None or not np.isfinite(self.angle):
                raise CompileError(f"{self.name} needs a finite angle")


@dataclass(frozen=True)
class GateCircuit:
    n_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CompileError(f"1 to {MAX_QUBITS} qubits supported")
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise CompileError(f"gate {g.name} addresses a qubit out of range")

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.name == "CNOT")


@dataclass
class CompiledCircuit:
    """Mode-level program for a gate circuit."""

    target: Interferometer
    input_state: FockState
    postselection: PostSelectionRule
    herald: float  # expected post-selection success probability
    n_qubits: int
    warnings: tuple[str, ...] = ()


@dataclass
class CompiledJob:
    """Everything the executor needs to drive the chip for one job."""

    phase_config: PhaseConfig
    voltage_plan: VoltagePlan
    input_fock: FockState
    postselection: PostSelectionRule
    herald_note: float
    model_fidelity: float = 1.0
    phase_digest: str = ""


def _embed(m: int, modes: tuple[int, ...], block: np.ndarray) -> np.ndarray:
    u = np.eye(m, dtype=np.complex128)
    for a, ma in enumerate(modes):
        for b, mb in enumerate(modes):
            u[ma, mb] = block[a, b]
    return u


def compile_gates(
    circ: GateCircuit,
    input_bits: str | None = None,
    max_modes: int = 12,
) -> CompiledCircuit:
    """Lower a gate circuit to (mode unitary, input Fock state, rule).

    Single-qubit gates become 2x2 blocks on the qubit's rail pair; each CNOT
    becomes the six-mode post-selected construction with success probability
    1/9 on a fresh ancilla pair. The post-selection rule is dual-rail
    validity on every qubit.
    """
    q = circ.n_qubits
    n_cnot = circ.cnot_count
    m = 2 * q + 2 * n_cnot
    if m > max_modes:
        raise CompileError(
            f"circuit needs {m} modes ({q} qubits, {n_cnot} CNOTs) "
            f"but the platform has {max_modes}"
        )
    if input_bits is None:
        input_bits = "0" * q

    u = np.eye(m, dtype=np.complex128)
    next_ancilla = 2 * q
    s3 = 1 / np.sqrt(3)
    s23 = np.sqrt(2.0 / 3.0)
    mix = np.array([[s3, s23], [s23, -s3]])
    neg = np.array([[-s3, s23], [s23, s3]])
    had = SINGLE_QUBIT_GATES["H"](None)

    for g in circ.gates:
        if g.name == "CNOT":
            c, t = g.qubits
            c0, c1 = 2 * c, 2 * c + 1
            t0, t1 = 2 * t, 2 * t + 1
            a_c, a_t = next_ancilla, next_ancilla + 1
            next_ancilla += 2
            for modes, blk in (
                ((t0, t1), had),
                ((c1, t1), mix),
                ((c0, a_c), mix),
                ((t0, a_t), neg),
                ((t0, t1), had),
            ):
                u = _embed(m, modes, blk) @ u
        else:
            blk = SINGLE_QUBIT_GATES[g.name](g.angle)
            k = g.qubits[0]
            u = _embed(m, (2 * k, 2 * k + 1), blk) @ u

    occ = list(encode_dual_rail(input_bits, q).occupations) + [0] * (2 * n_cnot)
    herald = CNOT_SUCCESS**n_cnot
    warnings = ()
    if herald < HERALD_WARNING:
        msg = f"post-selection success probability {herald:.2e} below {HERALD_WARNING}"
        log.warning(msg)
        warnings = (msg,)
    rule = PostSelectionRule(
        dual_rail_pairs=tuple((2 * k, 2 * k + 1) for k in range(q))
    )
    return CompiledCircuit(
        target=Interferometer(u),
        input_state=FockState(tuple(occ)),
        postselection=rule,
        herald=herald,
        n_qubits=q,
        warnings=warnings,
    )


@dataclass
class OptimizeResult:
    phases: PhaseConfig
    fidelity: float
    initial_fidelity: float
    evaluations: int


def optimize_phases(
    target: Interferometer,
    imp_estimate: ChipImperfections,
    init: PhaseConfig,
    layout: MeshLayout,
    step: float = 0.02,
    sweeps: int = 2,
) -> OptimizeResult:
    """Coordinate descent with a fixed step over all phases.

    Maximizes |Tr(U^dag V)|/m of the implemented mesh against the target
    under the estimated coupler errors; never returns phases scoring below
    the initialization. On layouts without an output phase layer the score
    is taken up to the undetectable output diagonal.
    """
    gauge = not layout.output_shifters
    eps = imp_estimate.coupler_errors

    def score(ph: np.ndarray) -> float:
        v = mesh_transfer(layout, ph, coupler_errors=eps)
        return mesh_fidelity(target.matrix, v, output_gauge=gauge)

    phases = init.phases.copy()
    best = score(phases)
    initial = best
    evals = 1
    for _ in range(sweeps):
        for i in range(len(phases)):
            base = phases[i]
            candidates = (base - step, base + step)
            for cand in candidates:
                phases[i] = cand
                f = score(phases)
                evals += 1
                if f > best:
                    best = f
                    base = cand
                else:
                    phases[i] = base
    return OptimizeResult(PhaseConfig(phases), best, initial, evals)


def transpile_to_voltages(
    phases: PhaseConfig,
    imp_estimate: ChipImperfections,
    v_max: float | None = None,
    max_wraps: int = 8,
) -> VoltagePlan:
    """Invert the thermo-optic law: find V >= 0 with
    passive + C (V*V) = target + 2 pi k, choosing minimal wrap counts.

    Raises TranspileError when no wrap assignment keeps every heater within
    [0, v_max].
    """
    from .mesh import V_MAX

    if v_max is None:
        v_max = V_MAX
    c = imp_estimate.crosstalk
    s = imp_estimate.shifter_count
    if len(phases) != s:
        raise ContractError("phase config does not match the imperfection estimate")
    two_pi = 2 * np.pi
    rhs = np.asarray(phases.phases) - imp_estimate.passive_phases
    k = np.ceil(np.maximum(0.0, -rhs) / two_pi)
    p_cap = v_max**2

    for _ in range(max_wraps * 4):
        p = np.linalg.solve(c, rhs + two_pi * k)
        low = p < -1e-9
        high = p > p_cap + 1e-9
        if not low.any() and not high.any():
            v = np.sqrt(np.clip(p, 0.0, p_cap))
            return VoltagePlan(v, v_max=v_max)
        if low.any():
            k[low] += 1
        if high.any():
            reducible = high & (k > 0)
            if not reducible.any():
                raise TranspileError(
                    "phase targets need heater powers beyond the voltage range"
                )
            k[reducible] -= 1
        if k.max() > max_wraps:
            raise TranspileError("wrap search exceeded the configured bound")
    raise TranspileError("wrap search did not converge")


def compile_unitary_job(
    target: Interferometer,
    imp_estimate: ChipImperfections,
    layout: MeshLayout,
    optimize: bool = True,
    step: float = 0.02,
    sweeps: int = 2,
) -> tuple[PhaseConfig, VoltagePlan, float]:
    """decompose -> optimize -> transpile; returns phases, plan, model fidelity."""
    from .clements import clements_decompose

    init = clements_decompose(target, layout)
    if optimize:
        res = optimize_phases(target, imp_estimate, init, layout, step=step, sweeps=sweeps)
        phases, fid = res.phases, res.fidelity
    else:
        v = mesh_transfer(layout, init, coupler_errors=imp_estimate.coupler_errors)
        phases, fid = init, mesh_fidelity(
            target.matrix, v, output_gauge=not layout.output_shifters
        )
    plan = transpile_to_voltages(phases, imp_estimate)
    return phases, plan, fid
