"""Leader-follower platoon with event-triggered velocity sampling.

The follower is a discretised double integrator

    p[k+1] = p[k] + dt v[k]
    v[k+1] = v[k] + dt u[k] + w[k]

whose velocity is the sampled state. The remote estimator predicts
``vhat[k+1] = vhat[k] + dt u[k]`` and ``phat[k+1] = phat[k] + dt vhat[k]``
between samples; a sample resets ``vhat`` only. The velocity error is then
exactly the scalar loop with ``A = 1``, ``B = dt``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .acr import AcrSeries, recursive_acr, stationary_acr
from .coeffs import open_loop_coefficients, particle_coefficients
from .dist import SystemSpec
from .errors import InvalidParameter
from .sim import CHUNK, trial_noise


@dataclass(frozen=True)
class PlatoonConfig:
    d: float = 3.0
    gamma: float = 1.0
    Q: float = 1.0
    Kgain: float = 1.0
    dt: float = 0.1
    duration: float = 40.0
    eta: float = 1.0
    T: int = 20
    sigma: float = 1.0
    trials: int = 10_000
    particles: int = 10_000
    bandwidth: float = 0.1

    def __post_init__(self):
        for name in ("dt", "duration", "eta", "sigma", "Q", "bandwidth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameter(name, f"must be > 0, got {v}")
        for name in ("T", "trials", "particles"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameter(name, f"must be a positive integer, got {v!r}")
        if self.steps < 1:
            raise InvalidParameter("duration", "shorter than one sampling period")

    @property
    def steps(self):
        return int(round(self.duration / self.dt))

    def system(self):
        """Scalar loop seen by the velocity scheduler."""
        return SystemSpec(A=1.0, B=self.dt, sigma=self.sigma, x0=0.0, eta=self.eta, T=self.T)


@dataclass(frozen=True, eq=False)
class PlatoonResult:
    config: PlatoonConfig
    acr_gt: AcrSeries
    acr_model: AcrSeries
    acr_openloop: AcrSeries
    t: np.ndarray
    mean_gap: np.ndarray
    mean_velocity: np.ndarray
    leader_velocity: np.ndarray

    @property
    def gt_tail(self):
        """Empirical ACR averaged over the final quarter of the horizon."""
        v = np.asarray(self.acr_gt.values)
        start = len(v) - max(1, (len(v) - 1) // 4)
        return float(v[start:].mean())


@dataclass(frozen=True)
class SweepRow:
    eta: float
    model: float
    openloop: float
    gt_tail: float
    ratio: float


def leader_ref(t):
    """Leader position, velocity and acceleration for ``p(t) = -cos t + 1.2 t``."""
    return -np.cos(t) + 1.2 * t, np.sin(t) + 1.2, np.cos(t)


def control_law(p, v, ref, cfg):
    pl, vl, al = ref
    g, q, K = cfg.gamma, cfg.Q, cfg.Kgain
    return -g / q * v - K / q * p + g / q * vl + K / q * pl + al + K / q * cfg.d


def _platoon_chunk(cfg, master_seed, start, stop):
    H, dt = cfg.steps, cfg.dt
    noise = np.stack([
        trial_noise(cfg.sigma, H, rngmod.trial_seed(master_seed, i)) for i in range(start, stop)
    ])
    M = noise.shape[0]
    p = np.zeros(M)
    v = np.zeros(M)
    phat = np.zeros(M)
    vhat = np.zeros(M)
    e = np.zeros(M)
    iota = np.zeros(M, dtype=np.int64)
    fires = np.zeros(H + 1, dtype=np.int64)
    fires[0] = M
    gap = np.zeros(H + 1)
    vel = np.zeros(H + 1)
    gap[0], vel[0] = p.sum(), v.sum()
    u = control_law(phat, vhat, leader_ref(0.0), cfg)
    for k in range(1, H + 1):
        p, v = p + dt * v, v + dt * u + noise[:, k - 1]
        fire = (np.abs(e) >= cfg.eta) | (k - iota > cfg.T)
        phat, vhat = phat + dt * vhat, np.where(fire, v, vhat + dt * u)
        e = v - vhat
        iota = np.where(fire, k, iota)
        fires[k] = fire.sum()
        gap[k], vel[k] = p.sum(), v.sum()
        u = control_law(phat, vhat, leader_ref(k * dt), cfg)
    return fires, gap, vel


def run_platoon(cfg, master_seed=0, workers=1):
    """Ground-truth, particle-model and open-loop ACR plus mean tracking."""
    H = cfg.steps
    bounds = [(s, min(s + CHUNK, cfg.trials)) for s in range(0, cfg.trials, CHUNK)]

    def job(b):
        return _platoon_chunk(cfg, master_seed, *b)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    fires = sum(p[0] for p in parts)
    gap = sum(p[1] for p in parts) / cfg.trials
    vel = sum(p[2] for p in parts) / cfg.trials
    t = np.round(np.arange(H + 1) * cfg.dt, 12)
    pl, vl, _ = leader_ref(t)

    spec = cfg.system()
    model = particle_coefficients(spec, cfg.particles, cfg.bandwidth, master_seed)
    openloop = open_loop_coefficients(spec)
    gt = AcrSeries(tuple((fires / cfg.trials).tolist()), None, "monte-carlo")
    return PlatoonResult(
        cfg, gt, recursive_acr(model, H), recursive_acr(openloop, H),
        t, gap - pl, vel, vl,
    )


def sweep_row(result):
    model = result.acr_model.stationary
    openloop = result.acr_openloop.stationary
    return SweepRow(result.config.eta, model, openloop, result.gt_tail, openloop / model)


def threshold_sweep(cfg, etas, master_seed=0, with_gt=True, workers=1):
    """Stationary ACR per threshold: particle model, open loop, empirical tail.

    ``ratio`` is open-loop over model. Without ``with_gt`` the empirical
    column is NaN and no trials are simulated.
    """
    rows = []
    for eta in etas:
        if not eta > 0:
            raise InvalidParameter("etas", f"thresholds must be > 0, got {eta}")
        c = replace(cfg, eta=float(eta))
        if with_gt:
            rows.append(sweep_row(run_platoon(c, master_seed, workers)))
            continue
        spec = c.system()
        model = stationary_acr(particle_coefficients(spec, c.particles, c.bandwidth, master_seed))
        openloop = stationary_acr(open_loop_coefficients(spec))
        rows.append(SweepRow(c.eta, model, openloop, float("nan"), openloop / model))
    return rows
