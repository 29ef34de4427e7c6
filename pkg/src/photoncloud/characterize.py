"""Recover a chip's imperfections from single-photon probe measurements.

The estimator fits (passive phases, crosstalk, coupler errors, effective
input losses) to observed probe frequencies by staged gradient descent with
finite-difference gradients and backtracking line search. Crosstalk is
parameterized by its diagonal plus a (neighbor fraction, geometric decay)
profile, the family the platform's thermal layout actually follows. Losses
are recovered as one effective transmittance per input mode: the split
between input coupling, output coupling and the source is a gauge freedom of
photon-counting data, so loss validation is distribution-level.

Finite differences are evaluated incrementally: perturbing one shifter
parameter touches one column of the e^{i phase} matrix, so a gradient sweep
costs one cheap mesh pass per parameter instead of a full trig rebuild.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clock import HOUR, SECOND
from .mesh import (
    ChipImperfections,
    MeshLayout,
    V_MAX,
    VoltagePlan,
    coupler_amplitudes,
    mesh_transfer,
    single_photon_outputs_exp,
)

BUDGET_US = 24 * HOUR
PROBE_TIME_US = 30 * SECOND  # acquisition slot per probe
MIN_PROBES = 300
FD_PHASE = 1e-4
FD_LOSS = 1e-3
XTALK_BAND = 6
COUPLER_CLIP = 0.05


class CharacterizationError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeRecord:
    plan: VoltagePlan
    input_mode: int
    output_distribution: np.ndarray  # detection frequency per mode
    shots: int

    def __post_init__(self):
        dist = np.asarray(self.output_distribution, dtype=np.float64)
        if np.any(dist < 0) or dist.sum() > 1 + 1e-9:
            raise CharacterizationError("frequencies must be >= 0 and sum <= 1")
        if self.shots <= 0:
            raise CharacterizationError("shots must be positive")
        object.__setattr__(self, "output_distribution", dist)


@dataclass
class CharacterizationResult:
    estimate: ChipImperfections
    residual: float  # mean squared frequency error
    probe_count: int
    elapsed: int  # virtual microseconds
    converged: bool
    residual_history: tuple[float, ...] = ()


def generate_probes(
    n: int, layout: MeshLayout, seed: int, v_max: float = V_MAX
) -> list[tuple[VoltagePlan, int]]:
    """Uniform random voltage plans, input modes cycled round-robin."""
    if n < 1:
        raise CharacterizationError("need at least one probe")
    rng = np.random.default_rng(seed)
    plans = rng.uniform(0.0, v_max, size=(n, layout.shifter_count))
    return [(VoltagePlan(plans[i], v_max=v_max), i % layout.modes) for i in range(n)]


@dataclass
class _Params:
    """Unpacked model parameters; the optimizer's state."""

    passive: np.ndarray  # (s,)
    diag: np.ndarray  # (s,) crosstalk self-terms
    couplers: np.ndarray  # (2 * units,)
    t_eff: np.ndarray  # (m,) effective input transmittance
    frac: float  # nearest-neighbor crosstalk fraction
    decay: float  # geometric decay with shifter distance

    def copy(self) -> "_Params":
        return _Params(
            self.passive.copy(),
            self.diag.copy(),
            self.couplers.copy(),
            self.t_eff.copy(),
            self.frac,
            self.decay,
        )

    def axpy(self, scale: float, other: "_Params") -> "_Params":
        return _Params(
            self.passive + scale * other.passive,
            self.diag + scale * other.diag,
            self.couplers + scale * other.couplers,
            np.clip(self.t_eff + scale * other.t_eff, 1e-6, 1.0),
            self.frac + scale * other.frac,
            self.decay + scale * other.decay,
        )

    def zeros_like(self) -> "_Params":
        return _Params(
            np.zeros_like(self.passive),
            np.zeros_like(self.diag),
            np.zeros_like(self.couplers),
            np.zeros_like(self.t_eff),
            0.0,
            0.0,
        )

    def norm(self) -> float:
        return float(
            np.sqrt(
                np.sum(self.passive**2)
                + np.sum(self.diag**2)
                + np.sum(self.couplers**2)
                + np.sum(self.t_eff**2)
                + self.frac**2
                + self.decay**2
            )
        )


class _Model:
    def __init__(self, layout: MeshLayout, records: list[ProbeRecord]):
        self.layout = layout
        self.s = layout.shifter_count
        self.m = layout.modes
        self.p2 = np.ascontiguousarray([r.plan.voltages**2 for r in records])
        self.in_modes = np.array([r.input_mode for r in records], dtype=np.int64)
        self.obs = np.array([r.output_distribution for r in records])

    def phases(self, p: _Params, idx: np.ndarray) -> np.ndarray:
        q = self.p2[idx] * p.diag[None, :]
        out = q.copy()
        for d in range(1, XTALK_BAND + 1):
            w = p.frac * p.decay ** (d - 1)
            out[:, :-d] += w * q[:, d:]
            out[:, d:] += w * q[:, :-d]
        out += p.passive[None, :]
        return out

    def crosstalk_matrix(self, p: _Params) -> np.ndarray:
        c = np.diag(p.diag).astype(float)
        for d in range(1, XTALK_BAND + 1):
            w = p.frac * p.decay ** (d - 1)
            i = np.arange(self.s - d)
            c[i, i + d] += w * p.diag[i + d]
            c[i + d, i] += w * p.diag[i]
        return c

    def materialize(self, p: _Params) -> ChipImperfections:
        return ChipImperfections(
            passive_phases=p.passive.copy(),
            crosstalk=self.crosstalk_matrix(p),
            coupler_errors=np.clip(p.couplers, -COUPLER_CLIP, COUPLER_CLIP),
            input_losses=np.clip(p.t_eff, 0.0, 1.0),
            output_losses=np.ones(self.m),
        )

    # -- loss machinery -----------------------------------------------------
    def _probs(self, p: _Params, E: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return single_photon_outputs_exp(
            self.layout, E, self.in_modes[idx],
            coupler_errors=np.clip(p.couplers, -COUPLER_CLIP, COUPLER_CLIP),
        )

    def _mse(self, probs: np.ndarray, t_eff: np.ndarray, idx: np.ndarray) -> float:
        pred = probs * t_eff[self.in_modes[idx]][:, None]
        diff = pred - self.obs[idx]
        return float(np.mean(diff * diff))

    def loss(self, p: _Params, idx: np.ndarray | None = None) -> float:
        if idx is None:
            idx = np.arange(len(self.p2))
        E = np.exp(1j * self.phases(p, idx))
        return self._mse(self._probs(p, E, idx), p.t_eff, idx)

    def fd_gradient(self, p: _Params, blocks: tuple[str, ...], idx: np.ndarray) -> _Params:
        """One-sided finite differences, evaluated incrementally per block."""
        g = p.zeros_like()
        ph = self.phases(p, idx)
        E = np.exp(1j * ph)
        probs0 = self._probs(p, E, idx)
        base = self._mse(probs0, p.t_eff, idx)

        if "passive" in blocks:
            rot = np.exp(1j * FD_PHASE)
            for i in range(self.s):
                col = E[:, i].copy()
                E[:, i] = col * rot
                li = self._mse(self._probs(p, E, idx), p.t_eff, idx)
                E[:, i] = col
                g.passive[i] = (li - base) / FD_PHASE
        if "diag" in blocks:
            # diag_i feeds neighboring shifters through the crosstalk profile
            for i in range(self.s):
                lo, hi = max(0, i - XTALK_BAND), min(self.s, i + XTALK_BAND + 1)
                saved = E[:, lo:hi].copy()
                bump = FD_PHASE * self.p2[idx, i]
                for j in range(lo, hi):
                    d = abs(j - i)
                    w = 1.0 if d == 0 else p.frac * p.decay ** (d - 1)
                    if w != 0.0:
                        E[:, j] = E[:, j] * np.exp(1j * w * bump)
                li = self._mse(self._probs(p, E, idx), p.t_eff, idx)
                E[:, lo:hi] = saved
                g.diag[i] = (li - base) / FD_PHASE
        if "couplers" in blocks:
            for c in range(len(p.couplers)):
                pc = p.copy()
                pc.couplers[c] += FD_PHASE
                li = self._mse(self._probs(pc, E, idx), p.t_eff, idx)
                g.couplers[c] = (li - base) / FD_PHASE
        if "t_eff" in blocks:
            for mode in range(self.m):
                t2 = p.t_eff.copy()
                t2[mode] += FD_LOSS
                li = self._mse(probs0, t2, idx)
                g.t_eff[mode] = (li - base) / FD_LOSS
        if "profile" in blocks:
            for name in ("frac", "decay"):
                pc = p.copy()
                setattr(pc, name, getattr(pc, name) + FD_PHASE)
                li = self.loss(pc, idx)
                setattr(g, name, (li - base) / FD_PHASE)
        return g


def _mask_gradient(g: _Params, block: str) -> _Params:
    keep = g.zeros_like()
    if block == "passive":
        keep.passive = g.passive
    elif block == "diag":
        keep.diag = g.diag
    elif block == "couplers":
        keep.couplers = g.couplers
    elif block == "t_eff":
        keep.t_eff = g.t_eff
    elif block == "profile":
        keep.frac, keep.decay = g.frac, g.decay
    return keep


def _descend(
    model: _Model,
    p: _Params,
    blocks: tuple[str, ...],
    iterations: int,
    rng: np.random.Generator,
    batch: int,
    history: list[float],
) -> _Params:
    """Block-cyclic gradient descent: one finite-difference gradient per
    iteration, then a backtracking line step per block with its own
    learning-rate memory (the blocks live on very different scales)."""
    n = len(model.p2)
    full = np.arange(n)
    best = model.loss(p)
    history.append(best)
    lr = {b: 1.0 for b in blocks}
    stall = 0
    for _ in range(iterations):
        idx = full if batch >= n else np.sort(rng.choice(n, size=batch, replace=False))
        g = model.fd_gradient(p, blocks, idx)
        improved_any = False
        for block in blocks:
            gb = _mask_gradient(g, block)
            gnorm = gb.norm()
            if gnorm < 1e-16:
                continue
            step = lr[block] / gnorm  # normalized block step
            for _ in range(14):  # backtracking halving against the full loss
                cand = p.axpy(-step, gb)
                cand_loss = model.loss(cand)
                if cand_loss < best:
                    p, best = cand, cand_loss
                    lr[block] = min(step * gnorm * 1.5, 1e3)
                    improved_any = True
                    break
                step /= 2
            else:
                lr[block] = max(lr[block] / 4, 1e-9)
        history.append(best)
        if improved_any:
            stall = 0
        else:
            stall += 1
            if stall >= 2:
                break
    return p


def estimate_imperfections(
    records: list[ProbeRecord],
    init: ChipImperfections,
    layout: MeshLayout,
    seed: int = 0,
    budget_us: int = BUDGET_US,
    stage_iterations: int = 50,
    batch: int = 400,
) -> CharacterizationResult:
    """Least-squares fit of the imperfection model to probe data.

    Staged descent (effective losses -> passive phases -> crosstalk diagonal
    -> couplers -> crosstalk profile -> joint polish); each stage is a
    finite-difference gradient descent with backtracking halving, capped at
    ``stage_iterations``. The reported residual is non-increasing. Probe
    acquisition time is charged against the 24-virtual-hour budget; probes
    beyond it are dropped.
    """
    if len(records) < MIN_PROBES:
        raise CharacterizationError(
            f"need at least {MIN_PROBES} probes, got {len(records)}"
        )
    max_probes = budget_us // PROBE_TIME_US
    used = list(records[: int(max_probes)])
    elapsed = len(used) * PROBE_TIME_US

    model = _Model(layout, used)
    rng = np.random.default_rng(seed)
    p = _Params(
        passive=init.passive_phases.copy(),
        diag=np.diagonal(init.crosstalk).copy(),
        couplers=init.coupler_errors.copy(),
        t_eff=np.full(
            layout.modes, float(np.mean([r.output_distribution.sum() for r in used]))
        ),
        frac=0.0,
        decay=0.5,
    )

    history: list[float] = []
    stages: list[tuple[tuple[str, ...], int]] = [
        (("t_eff",), max(10, stage_iterations // 5)),
        (("passive", "t_eff"), stage_iterations),
        (("passive", "diag", "t_eff"), stage_iterations),
        (("couplers", "passive"), stage_iterations),
        (("profile", "t_eff", "passive"), stage_iterations),
        (("passive", "diag", "couplers", "t_eff", "profile"), stage_iterations),
    ]
    for blocks, iters in stages:
        p = _descend(model, p, blocks, iters, rng, batch, history)

    final = model.loss(p)
    shot_floor = float(np.mean([1.0 / r.shots for r in used]))
    return CharacterizationResult(
        estimate=model.materialize(p),
        residual=final,
        probe_count=len(used),
        elapsed=elapsed,
        converged=final < 50 * shot_floor,
        residual_history=tuple(history),
    )


def predicted_probe_distribution(
    imp: ChipImperfections, layout: MeshLayout, plan: VoltagePlan, input_mode: int
) -> np.ndarray:
    """Forward model for one probe under an imperfection estimate."""
    phases = imp.passive_phases + imp.crosstalk @ (plan.voltages**2)
    probs = single_photon_outputs_exp(
        layout,
        np.exp(1j * phases)[None, :],
        np.array([input_mode]),
        coupler_errors=imp.coupler_errors,
    )[0]
    return probs * imp.mode_transmission()[input_mode]


def refresh_from_usage(
    usage_marginals: list[tuple[VoltagePlan, np.ndarray, np.ndarray]],
    current: ChipImperfections,
    layout: MeshLayout,
    steps: int = 10,
    trust_radius: float = 0.05,
) -> ChipImperfections:
    """On-the-fly passive-phase touch-up from usage data.

    Each record is (voltage plan, mean input occupation, observed mean
    output occupation); mean occupations transform linearly through |U|^2,
    so the fit needs no permanents. Movement is clamped to ``trust_radius``
    radians and the residual on the provided data never increases.
    """
    if not usage_marginals:
        raise CharacterizationError("usage data must be non-empty")

    t_eff = current.mode_transmission()
    p2 = np.array([plan.voltages**2 for plan, _, _ in usage_marginals])
    n_in = np.array([nin for _, nin, _ in usage_marginals])
    n_out = np.array([nout for _, _, nout in usage_marginals])

    def residual(passive: np.ndarray) -> float:
        phases = passive[None, :] + p2 @ current.crosstalk.T
        total = 0.0
        for k in range(len(p2)):
            u = mesh_transfer(layout, phases[k], coupler_errors=current.coupler_errors)
            pred = (np.abs(u) ** 2) @ (t_eff * n_in[k])
            total += float(np.mean((pred - n_out[k]) ** 2))
        return total / len(p2)

    passive = current.passive_phases.copy()
    base = passive.copy()
    best = residual(passive)
    lr = 1.0
    for _ in range(steps):
        g = np.zeros_like(passive)
        for i in range(len(passive)):
            xp = passive.copy()
            xp[i] += FD_PHASE
            g[i] = (residual(xp) - best) / FD_PHASE
        if np.linalg.norm(g) < 1e-14:
            break
        step = lr
        for _ in range(10):
            cand = np.clip(passive - step * g, base - trust_radius, base + trust_radius)
            r = residual(cand)
            if r < best:
                passive, best = cand, r
                lr = step * 1.5
                break
            step /= 2
        else:
            break
    return ChipImperfections(
        passive_phases=passive,
        crosstalk=current.crosstalk,
        coupler_errors=current.coupler_errors,
        input_losses=current.input_losses,
        output_losses=current.output_losses,
    )
