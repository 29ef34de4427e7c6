"""Exact multi-photon linear optics: permanents, output distributions, noisy
sampling, dual-rail encoding and post-selection.

Conventions
-----------
* A single photon entering mode j exits in mode i with amplitude U[i, j];
  the amplitude vector of a one-photon state transforms as v -> U v.
* Transition amplitude for occupations n -> m is perm(U_sub)/sqrt(n! m!),
  with U_sub built by repeating column j n_j times and row i m_i times.
* Losses are folded into a per-input-mode survival probability; the unitary
  kernel itself stays lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import kernels

PERMANENT_LIMIT = 20  # exact computation ceiling, photons
PLATFORM_PHOTON_LIMIT = 6  # sampling jobs cap, photons

UNITARY_TOL = 1e-9


class SimulationLimitError(ValueError):
    """Raised when an exact computation exceeds the simulability bound."""


class ContractError(ValueError):
    """Raised on photon-number or dimension mismatches."""


@dataclass(frozen=True)
class FockState:
    """Occupation numbers over m optical modes."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        if len(self.occupations) < 1:
            raise ContractError("a Fock state needs at least one mode")
        if any(o < 0 or int(o) != o for o in self.occupations):
            raise ContractError("occupations must be non-negative integers")
        object.__setattr__(self, "occupations", tuple(int(o) for o in self.occupations))

    @property
    def modes(self) -> int:
        return len(self.occupations)

    @property
    def photon_count(self) -> int:
        return sum(self.occupations)

    def __str__(self):
        return "|" + ",".join(str(o) for o in self.occupations) + ">"


@dataclass(frozen=True)
class Interferometer:
    """An m-mode linear-optical transfer matrix (lossless: unitary)."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ContractError("interferometer matrix must be square")
        object.__setattr__(self, "matrix", mat)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m @ m.conj().T - np.eye(self.modes))))

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return self.unitarity_error() <= tol


@dataclass(frozen=True)
class SourceNoise:
    """Source and transmission imperfections of the single-photon supply.

    ``indistinguishability`` is the probability that a photon joins the
    interfering ensemble (pairwise HOM visibility proxy); ``g2`` the
    per-pulse probability of one extra fully distinguishable photon;
    ``transmittance`` the end-to-end survival probability per input mode.
    """

    indistinguishability: float
    g2: float
    transmittance: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.indistinguishability <= 1.0:
            raise ContractError("indistinguishability must be in [0, 1]")
        if not 0.0 <= self.g2 < 1.0:
            raise ContractError("g2 must be in [0, 1)")
        if any(not 0.0 <= t <= 1.0 for t in self.transmittance):
            raise ContractError("transmittances must be in [0, 1]")
        object.__setattr__(self, "transmittance", tuple(float(t) for t in self.transmittance))

    @property
    def purity(self) -> float:
        # invariant by construction: purity + g2 = 1
        return 1.0 - self.g2

    @staticmethod
    def ideal(modes: int) -> "SourceNoise":
        return SourceNoise(1.0, 0.0, (1.0,) * modes)


@dataclass
class SampleBatch:
    """Outcome counts of a sampling run; post-selection may discard."""

    counts: dict[FockState, int]
    requested: int
    completed: int

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.completed:
            raise ContractError("counts must sum to `completed`")
        if self.completed > self.requested:
            raise ContractError("completed cannot exceed requested")

    def fraction(self, state: FockState) -> float:
        if self.completed == 0:
            return 0.0
        return self.counts.get(state, 0) / self.completed

    def as_probabilities(self) -> dict[FockState, float]:
        if self.completed == 0:
            return {}
        return {s: c / self.completed for s, c in self.counts.items()}


@dataclass(frozen=True)
class ModeGroupRule:
    """Photon-count window over a group of modes."""

    modes: tuple[int, ...]
    min_count: int = 0
    max_count: int | None = None


@dataclass(frozen=True)
class PostSelectionRule:
    """Keep outcomes passing a photon threshold, per-group windows and
    dual-rail validity (one photon per listed mode pair)."""

    min_photons: int = 0
    groups: tuple[ModeGroupRule, ...] = ()
    dual_rail_pairs: tuple[tuple[int, int], ...] = ()

    def accepts(self, state: FockState) -> bool:
        occ = state.occupations
        if state.photon_count < self.min_photons:
            return False
        for g in self.groups:
            c = sum(occ[m] for m in g.modes)
            if c < g.min_count:
                return False
            if g.max_count is not None and c > g.max_count:
                return False
        for a, b in self.dual_rail_pairs:
            if occ[a] + occ[b] != 1:
                return False
        return True

    def is_trivial(self) -> bool:
        return self.min_photons == 0 and not self.groups and not self.dual_rail_pairs


def permanent(matrix: np.ndarray) -> complex:
    """Permanent of a square complex matrix, O(2^n n) (Ryser).

    Raises SimulationLimitError above the exact-computation ceiling.
    """
    mat = np.asarray(matrix, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ContractError("permanent needs a square matrix")
    n = mat.shape[0]
    if n > PERMANENT_LIMIT:
        raise SimulationLimitError(
            f"permanent of a {n}x{n} matrix exceeds the {PERMANENT_LIMIT}-photon exact limit"
        )
    return kernels.permanent(mat)


def output_probability(u: Interferometer, input_state: FockState, output_state: FockState) -> float:
    """P(output | input) through ``u``: |perm(U_sub)|^2 / (prod n_i! prod m_j!)."""
    if input_state.modes != u.modes or output_state.modes != u.modes:
        raise ContractError("mode counts must match the interferometer")
    if input_state.photon_count != output_state.photon_count:
        raise ContractError("photon number must be conserved")
    n_in = np.asarray(input_state.occupations)
    n_out = np.asarray(output_state.occupations)
    cols = np.repeat(np.arange(u.modes), n_in)
    rows = np.repeat(np.arange(u.modes), n_out)
    amp = permanent(u.matrix[np.ix_(rows, cols)])
    norm = 1.0
    for o in input_state.occupations:
        norm *= factorial(o)
    for o in output_state.occupations:
        norm *= factorial(o)
    return float(abs(amp) ** 2 / norm)


def output_distribution(u: Interferometer, input_state: FockState) -> tuple[list[FockState], np.ndarray]:
    """Full exact output distribution (lossless, fully interfering photons)."""
    if input_state.modes != u.modes:
        raise ContractError("mode counts must match the interferometer")
    if input_state.photon_count > PERMANENT_LIMIT:
        raise SimulationLimitError("distribution beyond the exact-computation ceiling")
    outs, probs = kernels.fock_distribution(u.matrix, np.asarray(input_state.occupations))
    states = [FockState(tuple(int(o) for o in row)) for row in outs]
    return states, probs


def encode_dual_rail(bitstring: str, n_qubits: int) -> FockState:
    """Logical basis state -> Fock state; qubit k lives on modes (2k, 2k+1),
    logical 0 = photon in the even mode."""
    if n_qubits > PLATFORM_PHOTON_LIMIT:
        raise ContractError(f"at most {PLATFORM_PHOTON_LIMIT} dual-rail qubits")
    if len(bitstring) != n_qubits or any(b not in "01" for b in bitstring):
        raise ContractError("bitstring must be n_qubits of 0/1")
    occ = [0] * (2 * n_qubits)
    for k, b in enumerate(bitstring):
        occ[2 * k + (1 if b == "1" else 0)] = 1
    return FockState(tuple(occ))


def decode_dual_rail(state: FockState) -> str | None:
    """Fock state -> logical bitstring, or None when dual-rail validity fails."""
    if state.modes % 2 != 0:
        raise ContractError("dual-rail decode needs an even number of modes")
    bits = []
    occ = state.occupations
    for k in range(state.modes // 2):
        pair = (occ[2 * k], occ[2 * k + 1])
        if pair == (1, 0):
            bits.append("0")
        elif pair == (0, 1):
            bits.append("1")
        else:
            return None
    return "".join(bits)


def dual_rail_validity_rule(n_qubits: int, first_mode: int = 0) -> PostSelectionRule:
    pairs = tuple((first_mode + 2 * k, first_mode + 2 * k + 1) for k in range(n_qubits))
    return PostSelectionRule(dual_rail_pairs=pairs)


def apply_postselection(batch: SampleBatch, rule: PostSelectionRule) -> SampleBatch:
    """Restrict counts to outcomes satisfying ``rule``; `requested` preserved."""
    kept = {s: c for s, c in batch.counts.items() if rule.accepts(s)}
    return SampleBatch(counts=kept, requested=batch.requested, completed=sum(kept.values()))


class _JointSampler:
    """Caches exact joint distributions per interfering input multiset."""

    def __init__(self, u: np.ndarray):
        self.u = u
        self.m = u.shape[0]
        self._cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    def distribution(self, modes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        if modes not in self._cache:
            occ = np.bincount(np.array(modes, dtype=np.int64), minlength=self.m)
            self._cache[modes] = kernels.fock_distribution(self.u, occ)
        return self._cache[modes]


def sample(
    u: Interferometer,
    input_state: FockState,
    noise: SourceNoise,
    n_samples: int,
    seed: int | None = None,
    counting: str = "number",
    rng: np.random.Generator | None = None,
) -> SampleBatch:
    """Draw noisy samples from ``u`` applied to ``input_state``.

    Per sample: (1) each photon survives its input mode's transmittance,
    (2) with probability g2 one extra distinguishable photon rides along on
    a random occupied input mode, (3) each surviving signal photon is either
    tagged interfering (probability = indistinguishability) or classical,
    (4) the interfering subset is drawn jointly from the exact permanent
    distribution, classical photons propagate independently.

    ``counting`` is "number" (resolving) or "threshold" (clicks).
    Deterministic for a fixed seed.
    """
    if n_samples < 1:
        raise ContractError("n_samples must be >= 1")
    if input_state.modes != u.modes:
        raise ContractError("mode counts must match the interferometer")
    if input_state.photon_count > PLATFORM_PHOTON_LIMIT:
        raise ContractError(
            f"sampling capped at {PLATFORM_PHOTON_LIMIT} photons on this platform"
        )
    if len(noise.transmittance) != u.modes:
        raise ContractError("per-mode transmittance length must match mode count")
    if counting not in ("number", "threshold"):
        raise ContractError("counting must be 'number' or 'threshold'")

    if rng is None:
        rng = np.random.default_rng(seed)
    m = u.modes
    occ = np.asarray(input_state.occupations)
    photons = np.repeat(np.arange(m), occ)
    n = len(photons)
    S = int(n_samples)

    counts: dict[FockState, int] = {}
    if n == 0:
        vac = FockState((0,) * m)
        return SampleBatch({vac: S}, requested=S, completed=S)

    trans = np.asarray(noise.transmittance)
    surv = rng.random((S, n)) < trans[photons]
    interf = rng.random((S, n)) < noise.indistinguishability
    extra = rng.random(S) < noise.g2
    attach = rng.integers(0, n, S)
    extra_mode = photons[attach]
    extra_surv = extra & (rng.random(S) < trans[extra_mode])

    weights = 1 << np.arange(n, dtype=np.int64)
    si = ((surv & interf) * weights).sum(axis=1)
    sc = ((surv & ~interf) * weights).sum(axis=1)
    ek = np.where(extra_surv, extra_mode.astype(np.int64) + 1, 0)
    keys = si | (sc << n) | (ek << (2 * n))

    uniq, counts_per = np.unique(keys, return_counts=True)
    joint = _JointSampler(u.matrix)
    col_pmfs = np.abs(u.matrix) ** 2  # col j = output pmf of a lone photon in j

    out_rows: list[np.ndarray] = []
    out_mult: list[np.ndarray] = []
    for key, c in zip(uniq.tolist(), counts_per.tolist()):
        i_mask = key & ((1 << n) - 1)
        c_mask = (key >> n) & ((1 << n) - 1)
        e_mode = (key >> (2 * n)) - 1  # -1 means no extra photon
        int_modes = tuple(int(photons[k]) for k in range(n) if i_mask >> k & 1)
        cls_modes = [int(photons[k]) for k in range(n) if c_mask >> k & 1]
        if e_mode >= 0:
            cls_modes.append(int(e_mode))
        if len(int_modes) == 1:
            cls_modes.insert(0, int_modes[0])
            int_modes = ()

        group = np.zeros((c, m), dtype=np.int64)
        if int_modes:
            outs, probs = joint.distribution(int_modes)
            idx = rng.choice(len(probs), size=c, p=probs)
            group += outs[idx]
        for j in cls_modes:
            dest = rng.choice(m, size=c, p=col_pmfs[:, j])
            np.add.at(group, (np.arange(c), dest), 1)
        out_rows.append(group)
        out_mult.append(np.full(c, 1, dtype=np.int64))

    all_rows = np.concatenate(out_rows, axis=0)
    if counting == "threshold":
        all_rows = np.minimum(all_rows, 1)
    states, tallies = np.unique(all_rows, axis=0, return_counts=True)
    for row, tally in zip(states, tallies):
        counts[FockState(tuple(int(v) for v in row))] = int(tally)
    return SampleBatch(counts=counts, requested=S, completed=S)
