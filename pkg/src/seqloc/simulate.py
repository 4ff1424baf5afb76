"""Scenario synthesis: trajectories, drifting clock, TDMA schedule, noisy
sequential pseudorange batches and the Monte Carlo driver.

Reproducibility contract: trial ``k`` of a scenario draws everything from
``numpy.random.default_rng([seed, k])`` (PCG64 seeded through
SeedSequence), so results are independent of execution order and thread
count.  Within a trial the draw order is fixed: trajectory placement
draws first (when the trajectory is a random sampler), then one standard
normal per measurement.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, SeqlocError
from .model import (
    BsConstellation,
    FullParams,
    MeasurementBatch,
    VelocityPrior,
    _frozen_array,
)
from .solvers import (
    EstimateReport,
    SolverConfig,
    solve_drift_only,
    solve_joint_velocity,
    solve_known_velocity,
    solve_prior_velocity,
)

RNG_ALGORITHM = "numpy-pcg64/seedsequence([seed, trial])"

ESTIMATOR_KINDS = ("kvd", "uvd", "pvd", "d")


@dataclass(frozen=True)
class Stationary:
    """UD fixed at ``p0``."""

    p0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p0", _frozen_array(np.atleast_1d(self.p0)))

    def state_at(self, t: float):
        return self.p0, np.zeros_like(self.p0)

    def realize(self, rng) -> "Stationary":
        return self


@dataclass(frozen=True)
class ConstantVelocity:
    """UD at ``p0`` at ``t_ref`` moving with constant velocity ``v``."""

    p0: np.ndarray
    v: np.ndarray
    t_ref: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p0", _frozen_array(np.atleast_1d(self.p0)))
        object.__setattr__(self, "v", _frozen_array(np.atleast_1d(self.v)))

    def state_at(self, t: float):
        return self.p0 + self.v * (t - self.t_ref), self.v

    def realize(self, rng) -> "ConstantVelocity":
        return self


@dataclass(frozen=True)
class Circular:
    """2-D circular motion around ``center`` with tangential speed
    ``radius * |angular_rate|``."""

    center: np.ndarray
    radius: float
    angular_rate: float
    phase: float = 0.0

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.size != 2:
            raise ConfigError("circular trajectories are 2-D")
        if not (self.radius > 0 and np.isfinite(self.angular_rate)):
            raise ConfigError("radius must be positive and rate finite")
        object.__setattr__(self, "center", _frozen_array(center))

    def state_at(self, t: float):
        ang = self.angular_rate * t + self.phase
        p = self.center + self.radius * np.array([math.cos(ang), math.sin(ang)])
        v = self.radius * self.angular_rate * np.array(
            [-math.sin(ang), math.cos(ang)])
        return p, v

    def realize(self, rng) -> "Circular":
        return self


@dataclass(frozen=True)
class RandomPlacement:
    """Per-trial sampler: position uniform in a square around ``center``,
    heading uniform on the circle, fixed ``speed``.

    ``realize`` consumes three uniforms (x, y, heading) from the trial
    stream and yields a ConstantVelocity trajectory referenced to
    ``t_ref``.
    """

    center: np.ndarray
    half_side: float
    speed: float
    t_ref: float = 0.0

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.size != 2:
            raise ConfigError("random placement samples a 2-D square")
        if self.half_side <= 0 or self.speed < 0:
            raise ConfigError("half_side must be positive and speed >= 0")
        object.__setattr__(self, "center", _frozen_array(center))

    def realize(self, rng) -> ConstantVelocity:
        offset = rng.uniform(-self.half_side, self.half_side, size=2)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        v = self.speed * np.array([math.cos(heading), math.sin(heading)])
        return ConstantVelocity(p0=self.center + offset, v=v, t_ref=self.t_ref)


@dataclass(frozen=True)
class ClockModel:
    """Linear UD clock in range units: offset ``b0`` meters at ``t_ref``,
    constant drift ``d`` meters/second over the whole simulation."""

    b0: float
    d: float
    t_ref: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.b0) and np.isfinite(self.d)):
            raise ConfigError("clock parameters must be finite")

    def offset_at(self, t: float) -> float:
        return self.b0 + self.d * (t - self.t_ref)


@dataclass(frozen=True)
class TdmaSchedule:
    """Round-robin slot plan: BS ``bs_order[k % len]`` transmits in global
    slot ``k`` at ``start_time + k * slot_interval``."""

    bs_order: tuple
    slot_interval: float = 0.01
    start_time: float = 0.0

    def __post_init__(self):
        order = tuple(int(i) for i in self.bs_order)
        if len(order) < 1 or len(set(order)) != len(order):
            raise ConfigError("bs_order must list each BS exactly once")
        if self.slot_interval <= 0:
            raise ConfigError("slot_interval must be positive")
        object.__setattr__(self, "bs_order", order)

    def slot_times(self, first_slot: int, count: int) -> np.ndarray:
        slots = first_slot + np.arange(count)
        return self.start_time + slots * self.slot_interval

    def slot_bs(self, first_slot: int, count: int) -> np.ndarray:
        order = np.array(self.bs_order, dtype=int)
        return order[(first_slot + np.arange(count)) % order.size]


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesize measurement batches: constellation,
    trajectory (or sampler), clock, schedule, batch size, noise level
    (scalar or per-BS), RNG seed and trial count.

    ``epoch_slot_offset`` selects which reception time of the window is the
    localization epoch (0 keeps the default, epoch = first measurement).
    """

    bs: BsConstellation
    trajectory: object
    clock: ClockModel
    schedule: TdmaSchedule
    m_per_fix: int = 8
    sigma: object = 0.1
    seed: int = 1
    n_trials: int = 1000
    epoch_slot_offset: int = 0

    def __post_init__(self):
        if self.m_per_fix < 1:
            raise ConfigError("m_per_fix must be at least 1")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if not 0 <= self.epoch_slot_offset < self.m_per_fix:
            raise ConfigError("epoch_slot_offset must index into the window")
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
            raise ConfigError("sigma must be strictly positive")
        if sigma.size not in (1, self.bs.n_bs):
            raise ConfigError("sigma must be scalar or one value per BS")
        if sorted(self.schedule.bs_order) != list(range(self.bs.n_bs)):
            raise ConfigError("bs_order must be a permutation of all BSs")
        object.__setattr__(self, "sigma", _frozen_array(sigma))

    def sigma_for(self, bs_index: np.ndarray) -> np.ndarray:
        if self.sigma.size == 1:
            return np.full(bs_index.shape, self.sigma[0])
        return self.sigma[bs_index]


def truth_state(trajectory, clock: ClockModel, t: float) -> FullParams:
    """Exact UD state (position, clock, instantaneous velocity) at ``t``."""
    p, v = trajectory.state_at(t)
    return FullParams(p=p, b=clock.offset_at(t), d=clock.d, v=v)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The per-trial random stream; see RNG_ALGORITHM."""
    return np.random.default_rng([int(seed), int(trial)])


def synthesize_batch(cfg: ScenarioConfig, fix_index: int,
                     rng: np.random.Generator | None = None,
                     trajectory=None,
                     noiseless: bool = False):
    """One measurement window (fix) and the true state at its epoch.

    Fix ``k`` occupies global slots ``k*m_per_fix .. k*m_per_fix + M - 1``
    (consecutive, non-overlapping windows).  The epoch is the reception
    time indexed by ``cfg.epoch_slot_offset`` (the first measurement by
    default).  Returns (MeasurementBatch, FullParams).
    """
    traj = cfg.trajectory if trajectory is None else trajectory
    if not hasattr(traj, "state_at"):
        raise ConfigError("trajectory sampler must be realized first")
    m = cfg.m_per_fix
    first_slot = fix_index * m
    times = cfg.schedule.slot_times(first_slot, m)
    bs_idx = cfg.schedule.slot_bs(first_slot, m)
    sigma = cfg.sigma_for(bs_idx)

    positions = np.stack([traj.state_at(t)[0] for t in times])
    ranges = np.linalg.norm(cfg.bs.positions[bs_idx] - positions, axis=1)
    offsets = cfg.clock.b0 + cfg.clock.d * (times - cfg.clock.t_ref)
    rho = ranges + offsets
    if not noiseless:
        if rng is None:
            raise ConfigError("noisy synthesis needs a random stream")
        rho = rho + rng.standard_normal(m) * sigma

    t_l = float(times[cfg.epoch_slot_offset])
    batch = MeasurementBatch(bs_index=bs_idx, t=times, rho=rho,
                             sigma=sigma, t_l=t_l)
    return batch, truth_state(traj, cfg.clock, t_l)


@dataclass(frozen=True)
class EstimatorSpec:
    """Which solver to run per trial and how to feed it.

    ``speed_deviation`` offsets the velocity handed to the known-velocity
    solver along the true heading (used for the deviated-velocity study).
    ``prior_std`` is the per-axis prior standard deviation for the MAP
    solver.  ``prior_centering`` picks how the prior relates to the truth:

    * ``"truth"``   -- prior mean equals the true velocity (fixed
      trajectories, e.g. the circular study);
    * ``"nominal"`` -- the trial's true velocity is drawn from the prior:
      mean at the sampled nominal velocity, per-axis std ``prior_std``.
      This is the setting under which the MAP estimator attains its CRLB.
    """

    kind: str
    speed_deviation: float = 0.0
    prior_std: float = 2.0
    prior_centering: str = "truth"

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigError(f"unknown estimator kind {self.kind!r}")
        if self.prior_std <= 0:
            raise ConfigError("prior_std must be positive")
        if self.prior_centering not in ("truth", "nominal"):
            raise ConfigError("prior_centering must be 'truth' or 'nominal'")


def assumed_velocity(truth: FullParams, deviation: float) -> np.ndarray:
    """True velocity offset by ``deviation`` m/s along the true heading
    (x-axis when the UD is stationary)."""
    if deviation == 0.0:
        return np.array(truth.v)
    speed = float(np.linalg.norm(truth.v))
    if speed > 0:
        direction = truth.v / speed
    else:
        direction = np.zeros(truth.n_dim)
        direction[0] = 1.0
    return truth.v + deviation * direction


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one Monte Carlo trial, with the inputs kept for the
    theory columns (the analysis is always evaluated at the truth)."""

    trial: int
    batch: MeasurementBatch
    truth: FullParams
    report: EstimateReport | None
    error: str | None
    v_assumed: np.ndarray | None = None
    prior: VelocityPrior | None = None

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged

    @property
    def position_error(self) -> np.ndarray | None:
        if self.report is None:
            return None
        return np.asarray(self.report.params.p) - np.asarray(self.truth.p)


def _run_trial(cfg: ScenarioConfig, spec: EstimatorSpec, trial: int,
               solver_cfg: SolverConfig) -> TrialRecord:
    rng = trial_rng(cfg.seed, trial)
    sampler = not hasattr(cfg.trajectory, "state_at")
    traj = cfg.trajectory.realize(rng)
    # Fixed trajectories advance through the TDMA schedule; per-trial
    # samplers restart the window at fix 0.
    fix_index = 0 if sampler else trial

    prior = None
    if spec.kind == "pvd" and spec.prior_centering == "nominal":
        # The realized velocity becomes the prior mean; the actual truth
        # is then drawn from that prior (one normal vector, before the
        # measurement noise draws).
        if not isinstance(traj, ConstantVelocity):
            raise ConfigError(
                "nominal prior centering needs a constant-velocity "
                "trajectory or sampler")
        nominal_v = np.array(traj.v)
        true_v = nominal_v + spec.prior_std * rng.standard_normal(cfg.bs.n_dim)
        traj = ConstantVelocity(p0=traj.p0, v=true_v, t_ref=traj.t_ref)
        prior = VelocityPrior.isotropic(nominal_v, spec.prior_std)

    batch, truth = synthesize_batch(cfg, fix_index, rng, trajectory=traj)

    v_assumed = None
    try:
        if spec.kind == "kvd":
            v_assumed = assumed_velocity(truth, spec.speed_deviation)
            report = solve_known_velocity(batch, cfg.bs, v_assumed,
                                          cfg=solver_cfg)
        elif spec.kind == "d":
            report = solve_drift_only(batch, cfg.bs, cfg=solver_cfg)
        elif spec.kind == "uvd":
            report = solve_joint_velocity(batch, cfg.bs, cfg=solver_cfg)
        else:
            if prior is None:
                prior = VelocityPrior.isotropic(truth.v, spec.prior_std)
            report = solve_prior_velocity(batch, cfg.bs, prior,
                                          cfg=solver_cfg)
        return TrialRecord(trial=trial, batch=batch, truth=truth,
                           report=report, error=None,
                           v_assumed=v_assumed, prior=prior)
    except SeqlocError as exc:
        return TrialRecord(trial=trial, batch=batch, truth=truth,
                           report=None, error=type(exc).__name__,
                           v_assumed=v_assumed, prior=prior)


def run_monte_carlo(cfg: ScenarioConfig, spec: EstimatorSpec,
                    solver_cfg: SolverConfig = SolverConfig(),
                    n_trials: int | None = None,
                    threads: int = 1) -> list[TrialRecord]:
    """Independent trials of one estimator over one scenario.

    Solver failures are captured per trial, never raised.  Records come
    back in trial order whatever the thread count.
    """
    n = cfg.n_trials if n_trials is None else int(n_trials)
    if n < 1:
        raise ConfigError("need at least one trial")
    if threads < 1:
        raise ConfigError("threads must be at least 1")

    def one(trial: int) -> TrialRecord:
        return _run_trial(cfg, spec, trial, solver_cfg)

    if threads == 1:
        return [one(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n)))


def with_speed(cfg: ScenarioConfig, speed: float) -> ScenarioConfig:
    """Scenario copy with the sampler speed replaced."""
    if not isinstance(cfg.trajectory, RandomPlacement):
        raise ConfigError("speed sweeps need a RandomPlacement trajectory")
    return replace(cfg, trajectory=replace(cfg.trajectory, speed=float(speed)))


def with_sigma(cfg: ScenarioConfig, sigma: float) -> ScenarioConfig:
    """Scenario copy with the noise level replaced."""
    return replace(cfg, sigma=float(sigma))


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, seed=int(seed))
