"""Digital twin of the physical platform.

Owns the hidden fabrication ground truth, a drifting opto-electronic
environment, and a fault stream. Everything downstream (compiler,
characterization, benchmarks) sees the twin only through measurement-like
APIs: drive voltages, sample photons, read monitor channels. The ground
truth never leaves this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .clock import DAY, HOUR, SECOND, as_seconds
from .fock import FockState, Interferometer, SampleBatch, SourceNoise, sample
from .mesh import (
    ChipImperfections,
    MeshLayout,
    PhaseConfig,
    VoltagePlan,
    mesh_transfer,
    phases_from_voltages,
    single_photon_outputs,
)

CHIP_INPUT_FIBERS = 6  # demux outputs feeding mode pairs (2f, 2f+1)


@dataclass(frozen=True)
class DriftParams:
    """Ornstein-Uhlenbeck drift of one environment field.

    ``reversion`` (1/s) pulls toward the nominal value, ``volatility``
    (units/sqrt(s)) injects noise, ``spike_rate`` (1/s) superimposes Poisson
    jumps of ``spike_scale`` magnitude.
    """

    nominal: float
    reversion: float
    volatility: float
    spike_rate: float = 0.0
    spike_scale: float = 0.0

    def step(self, value: float, dt: float, rng: np.random.Generator) -> float:
        decay = math.exp(-self.reversion * dt) if self.reversion > 0 else 1.0
        mean = self.nominal + (value - self.nominal) * decay
        if self.volatility > 0:
            if self.reversion > 0:
                var = self.volatility**2 * (1 - decay**2) / (2 * self.reversion)
            else:
                var = self.volatility**2 * dt
            mean += math.sqrt(var) * rng.standard_normal()
        if self.spike_rate > 0:
            n = rng.poisson(self.spike_rate * dt)
            for _ in range(n):
                mean += self.spike_scale * rng.standard_normal()
        return mean

    def stationary_std(self) -> float:
        if self.reversion <= 0:
            return math.inf
        return self.volatility / math.sqrt(2 * self.reversion)


@dataclass(frozen=True)
class EnvironmentState:
    """Actuator values plus drift of the opto-electronic periphery."""

    source_bias: float  # volts
    laser_power: float  # milliwatts
    polarization: tuple[float, ...]  # radians: [demux, fiber 1..6]
    delay_temp: float  # kelvin
    wall_clock: int  # virtual microseconds

    def __post_init__(self):
        if len(self.polarization) != 1 + CHIP_INPUT_FIBERS:
            raise ValueError("polarization needs demux + six chip-input entries")


@dataclass(frozen=True)
class EnvironmentModel:
    bias: DriftParams
    laser: DriftParams
    polarization: DriftParams  # shared dynamics per fiber
    delay_temp: DriftParams
    # response coefficients (see effective_source_params)
    bias_half_width: float = 0.5  # volts to a 25% brightness penalty
    laser_half_width: float = 2.0  # mW, same quadratic shape
    delay_coherence_ps: float = 2.0  # tau_c of the overlap envelope
    delay_ps_per_kelvin: float = 1.5  # fiber delay shift with temperature

    @staticmethod
    def default() -> "EnvironmentModel":
        # free drift leaves the in-band region within ~1-2 days (see control)
        return EnvironmentModel(
            bias=DriftParams(4.0, 1.0 / (3 * 86400), 2.2e-6, spike_rate=2.0 / 86400, spike_scale=0.03),
            laser=DriftParams(10.0, 1.0 / (3 * 86400), 9e-6),
            polarization=DriftParams(0.0, 1.0 / (3 * 86400), 8e-7),
            delay_temp=DriftParams(295.0, 1.0 / (3 * 86400), 6e-6),
        )

    def nominal_state(self, now: int = 0) -> EnvironmentState:
        return EnvironmentState(
            source_bias=self.bias.nominal,
            laser_power=self.laser.nominal,
            polarization=(0.0,) * (1 + CHIP_INPUT_FIBERS),
            delay_temp=self.delay_temp.nominal,
            wall_clock=now,
        )


def step_environment(
    env: EnvironmentState,
    model: EnvironmentModel,
    dt_us: int,
    rng: np.random.Generator,
) -> EnvironmentState:
    """Advance every field by its exact OU transition over dt."""
    if dt_us <= 0:
        raise ValueError("dt must be positive")
    dt = dt_us / SECOND
    pol = tuple(model.polarization.step(p, dt, rng) for p in env.polarization)
    return EnvironmentState(
        source_bias=model.bias.step(env.source_bias, dt, rng),
        laser_power=model.laser.step(env.laser_power, dt, rng),
        polarization=pol,
        delay_temp=model.delay_temp.step(env.delay_temp, dt, rng),
        wall_clock=env.wall_clock + dt_us,
    )


def _quadratic_penalty(offset: float, half_width: float) -> float:
    return max(0.0, 1.0 - 0.25 * (offset / half_width) ** 2)


def effective_source_params(
    env: EnvironmentState, nominal: SourceNoise, model: EnvironmentModel
) -> SourceNoise:
    """Fold environment drift into the source figures.

    Brightness (per-mode transmittance) picks up a quadratic penalty in the
    bias and laser-power offsets and cos^2 of every polarization
    misalignment; indistinguishability shrinks by the Gaussian overlap
    envelope exp(-(dtau/tau_c)^2) of the temperature-induced delay mismatch.
    """
    bias_pen = _quadratic_penalty(env.source_bias - model.bias.nominal, model.bias_half_width)
    laser_pen = _quadratic_penalty(env.laser_power - model.laser.nominal, model.laser_half_width)
    demux_pen = math.cos(env.polarization[0]) ** 2
    global_pen = bias_pen * laser_pen * demux_pen

    trans = list(nominal.transmittance)
    for mode in range(len(trans)):
        fiber = 1 + min(mode // 2, CHIP_INPUT_FIBERS - 1)
        fiber_pen = math.cos(env.polarization[fiber]) ** 2
        trans[mode] = min(1.0, max(0.0, trans[mode] * global_pen * fiber_pen))

    dtau = (env.delay_temp - model.delay_temp.nominal) * model.delay_ps_per_kelvin
    envelope = math.exp(-((dtau / model.delay_coherence_ps) ** 2))
    x = min(1.0, max(0.0, nominal.indistinguishability * envelope))
    return SourceNoise(x, nominal.g2, tuple(trans))


@dataclass(frozen=True)
class FaultClass:
    """One family of platform faults and its operational consequences."""

    name: str
    rate_per_day: float
    mean_repair_s: float
    status_effect: str  # "unreachable" or "degraded"
    silent_corruption: bool = False  # biases sampling without raising status

    def __post_init__(self):
        if self.rate_per_day < 0 or self.mean_repair_s <= 0:
            raise ValueError("rates must be >= 0 and repair times > 0")


@dataclass(frozen=True)
class FaultEvent:
    onset: int  # virtual microseconds
    fault: FaultClass
    repair_duration: int  # virtual microseconds

    @property
    def end(self) -> int:
        return self.onset + self.repair_duration


@dataclass(frozen=True)
class FaultInjector:
    classes: tuple[FaultClass, ...]

    @staticmethod
    def default() -> "FaultInjector":
        return FaultInjector(
            (
                FaultClass("communication_error", 0.25, 18 * 60, "unreachable"),
                FaultClass("control_instability", 0.20, 25 * 60, "degraded", silent_corruption=True),
                FaultClass("software_bug", 0.10, 45 * 60, "unreachable"),
            )
        )


def tick_faults(
    injector: FaultInjector, start: int, dt_us: int, rng: np.random.Generator
) -> list[FaultEvent]:
    """Poisson fault events over [start, start + dt); sorted by onset."""
    if dt_us <= 0:
        raise ValueError("dt must be positive")
    dt_days = dt_us / DAY
    events: list[FaultEvent] = []
    for cls in injector.classes:
        n = rng.poisson(cls.rate_per_day * dt_days)
        if n == 0:
            continue
        onsets = np.sort(rng.integers(0, dt_us, size=n))
        durations = rng.exponential(cls.mean_repair_s, size=n)
        for onset, dur in zip(onsets, durations):
            dur_us = max(SECOND, int(dur * SECOND))
            events.append(FaultEvent(start + int(onset), cls, dur_us))
    events.sort(key=lambda e: (e.onset, e.fault.name))
    return events


@dataclass
class TwinConfig:
    layout: MeshLayout
    ground_truth: ChipImperfections
    nominal_source: SourceNoise
    environment: EnvironmentModel
    faults: FaultInjector


class ChipTwin:
    """The simulated machine. Mutable state: environment + active corruption."""

    def __init__(self, config: TwinConfig, rng: np.random.Generator):
        self.layout = config.layout
        self._truth = config.ground_truth
        self._nominal_source = config.nominal_source
        self.env_model = config.environment
        self.faults = config.faults
        self._rng = rng
        self._env = config.environment.nominal_state()
        # silent corruption: multiplies indistinguishability while active
        self._corruption_factor = 1.0

    # -- environment ------------------------------------------------------
    @property
    def env(self) -> EnvironmentState:
        return self._env

    def advance_env(self, now_us: int) -> EnvironmentState:
        dt = now_us - self._env.wall_clock
        if dt > 0:
            self._env = step_environment(self._env, self.env_model, dt, self._rng)
        return self._env

    def adjust_actuator(self, name: str, delta: float, index: int = 0) -> None:
        env = self._env
        if name == "source_bias":
            env = replace(env, source_bias=env.source_bias + delta)
        elif name == "laser_power":
            env = replace(env, laser_power=env.laser_power + delta)
        elif name == "delay_temp":
            env = replace(env, delay_temp=env.delay_temp + delta)
        elif name == "polarization":
            pol = list(env.polarization)
            pol[index] += delta
            env = replace(env, polarization=tuple(pol))
        else:
            raise ValueError(f"unknown actuator {name!r}")
        self._env = env

    def set_corruption(self, factor: float) -> None:
        self._corruption_factor = factor

    # -- optical stack ----------------------------------------------------
    def current_source(self) -> SourceNoise:
        noise = effective_source_params(self._env, self._nominal_source, self.env_model)
        if self._corruption_factor != 1.0:
            noise = SourceNoise(
                max(0.0, min(1.0, noise.indistinguishability * self._corruption_factor)),
                noise.g2,
                noise.transmittance,
            )
        return noise

    def drive(self, plan: VoltagePlan) -> tuple[Interferometer, np.ndarray]:
        """Voltages -> physical phases -> mesh unitary + chip transmission."""
        phases = phases_from_voltages(plan, self._truth)
        u = mesh_transfer(self.layout, phases, coupler_errors=self._truth.coupler_errors)
        return Interferometer(u), self._truth.mode_transmission()

    def sample_job(
        self,
        plan: VoltagePlan,
        input_state: FockState,
        n_samples: int,
        counting: str = "number",
    ) -> SampleBatch:
        """End-to-end acquisition: drive, fold losses, draw samples."""
        u, chip_trans = self.drive(plan)
        src = self.current_source()
        folded = tuple(
            t * c for t, c in zip(src.transmittance, chip_trans)
        )
        noise = SourceNoise(src.indistinguishability, src.g2, folded)
        return sample(u, input_state, noise, n_samples, rng=self._rng, counting=counting)

    def probe_single_photon(
        self, plans: np.ndarray, in_modes: np.ndarray, shots: int
    ) -> np.ndarray:
        """Detection frequencies for a batch of single-photon probes.

        Returns (B, modes) frequencies including shot noise and losses; the
        characterization workhorse.
        """
        phase_batch = (
            self._truth.passive_phases[None, :]
            + (plans**2) @ self._truth.crosstalk.T
        )
        probs = single_photon_outputs(
            self.layout, phase_batch, in_modes, coupler_errors=self._truth.coupler_errors
        )
        # losses folded at the input mode, matching the sampling path
        t_eff = self._truth.mode_transmission() * np.array(self.current_source().transmittance)
        eff = probs * t_eff[in_modes][:, None]
        counts = self._rng.binomial(shots, np.clip(eff, 0.0, 1.0))
        return counts / shots

    # -- monitor channels (calibration reads these) ------------------------
    def monitor(self) -> dict[str, float]:
        src = self.current_source()
        chip = self._truth.mode_transmission()
        env = self._env
        vals: dict[str, float] = {
            "source_bias": env.source_bias,
            "laser_power": env.laser_power,
            "delay_temp": env.delay_temp,
            "indistinguishability": src.indistinguishability,
            "g2": src.g2,
            "purity": src.purity,
        }
        for f, p in enumerate(env.polarization):
            vals[f"polarization_{f}"] = p
        for mode in range(self.layout.modes):
            vals[f"transmission_mode_{mode}"] = src.transmittance[mode] * chip[mode]
        vals["brightness"] = float(np.mean([src.transmittance[m] * chip[m] for m in range(self.layout.modes)]))
        return vals
