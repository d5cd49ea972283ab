"""Monte Carlo simulation of the event-triggered loop.

Plant ``x[k+1] = A x[k] + B u[k] + w[k]``, remote estimator that copies the
plant state when a transmission happens and otherwise predicts with the
model, and the scheduler

    delta[k] = 1  iff  |e[k-1]| >= eta  or  k - iota > T,

``iota`` being the last transmission instant. Trials are simulated in
vectorised chunks; trial ``i`` always draws its noise from
``rng.trial_seed(master_seed, i)`` so results do not depend on chunking or
threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .acr import AcrSeries
from .errors import InvalidParameter

CHUNK = 1000


def default_controller(xhat, k):
    """State feedback ``u = -xhat``."""
    return -xhat


@dataclass(frozen=True, eq=False)
class TrialTrace:
    x: np.ndarray
    xhat: np.ndarray
    e: np.ndarray
    delta: np.ndarray
    iota: np.ndarray


@dataclass(frozen=True, eq=False)
class McSummary:
    trials: int
    acr: AcrSeries
    error_samples: dict
    openloop_samples: dict
    pooled_error_samples: dict
    deltas: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ConditionalFrequencies:
    pbar: np.ndarray
    at_risk: np.ndarray
    low_confidence: np.ndarray


def trial_noise(sigma, horizon, seed):
    return sigma * rngmod.generator(seed).standard_normal(horizon)


def _simulate(spec, controller, noise):
    """Run ``noise.shape[0]`` trials; returns full state arrays of shape (M, H+1)."""
    M, H = noise.shape
    A, B, eta, T = spec.A, spec.B, spec.eta, spec.T
    x = np.empty((M, H + 1))
    xhat = np.empty((M, H + 1))
    e = np.zeros((M, H + 1))
    delta = np.zeros((M, H + 1), dtype=np.uint8)
    iota = np.zeros((M, H + 1), dtype=np.int64)
    x[:, 0] = xhat[:, 0] = spec.x0
    delta[:, 0] = 1
    u = np.broadcast_to(np.asarray(controller(xhat[:, 0], 0), dtype=float), (M,))
    for k in range(1, H + 1):
        x[:, k] = A * x[:, k - 1] + B * u + noise[:, k - 1]
        fire = (np.abs(e[:, k - 1]) >= eta) | (k - iota[:, k - 1] > T)
        xhat[:, k] = np.where(fire, x[:, k], A * xhat[:, k - 1] + B * u)
        e[:, k] = x[:, k] - xhat[:, k]
        iota[:, k] = np.where(fire, k, iota[:, k - 1])
        delta[:, k] = fire
        u = np.broadcast_to(np.asarray(controller(xhat[:, k], k), dtype=float), (M,))
    return x, xhat, e, delta, iota


def simulate_trial(spec, controller=None, horizon=100, seed=0):
    """One closed-loop run of ``horizon`` steps; ``seed`` is an int or SeedSequence."""
    if int(horizon) != horizon or horizon < 1:
        raise InvalidParameter("horizon", f"must be a positive integer, got {horizon!r}")
    noise = trial_noise(spec.sigma, int(horizon), seed)[None, :]
    x, xhat, e, delta, iota = _simulate(spec, controller or default_controller, noise)
    return TrialTrace(x[0], xhat[0], e[0], delta[0], iota[0])


def _chunk(spec, controller, horizon, master_seed, start, stop, depth):
    noise = np.stack([
        trial_noise(spec.sigma, horizon, rngmod.trial_seed(master_seed, i))
        for i in range(start, stop)
    ])
    _, _, e, delta, iota = _simulate(spec, controller, noise)
    silent_since_zero = np.cumsum(delta[:, 1:], axis=1) == 0
    direct, pooled, openloop = {}, {}, {}
    age = np.arange(horizon + 1)[None, :] - iota
    replay = np.zeros(noise.shape[0])
    for k in range(1, depth + 1):
        direct[k] = e[silent_since_zero[:, k - 1], k]
        pooled[k] = e[(delta == 0) & (age == k)]
        replay = spec.A * replay + noise[:, k - 1]
        openloop[k] = replay.copy()
    return delta, direct, pooled, openloop


def monte_carlo_acr(spec, controller=None, horizon=50, trials=10_000, master_seed=0, workers=1):
    """Empirical ACR and error samples over independent trials.

    ``error_samples[k]`` holds the error ``k`` steps after the initial
    transmission for trials still silent at ``k``; ``pooled_error_samples[k]``
    pools the same quantity over every transmission instant;
    ``openloop_samples[k]`` replays each trial's noise with no resets.
    """
    if int(trials) != trials or trials < 1:
        raise InvalidParameter("trials", f"must be a positive integer, got {trials!r}")
    if int(horizon) != horizon or horizon < 1:
        raise InvalidParameter("horizon", f"must be a positive integer, got {horizon!r}")
    trials, horizon = int(trials), int(horizon)
    controller = controller or default_controller
    depth = min(spec.T, horizon)
    bounds = [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]

    def job(b):
        return _chunk(spec, controller, horizon, master_seed, b[0], b[1], depth)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]

    deltas = np.concatenate([p[0] for p in parts])
    merge = lambda i: {k: np.concatenate([p[i][k] for p in parts]) for k in range(1, depth + 1)}
    acr = AcrSeries(tuple(deltas.mean(axis=0).tolist()), None, "monte-carlo")
    return McSummary(trials, acr, merge(1), merge(3), merge(2), deltas)


def conditional_frequencies(summary, T, first_only=False, min_count=100):
    """Empirical coefficients from run lengths of silent steps.

    Step ``k`` is at risk at depth ``n`` when the last transmission before it
    happened at ``k - n``; it succeeds when ``k`` stays silent. Depths with
    fewer than ``min_count`` at-risk steps are flagged.
    """
    d = summary.deltas
    H = d.shape[1] - 1
    idx = np.arange(H + 1)
    iota = np.maximum.accumulate(np.where(d == 1, idx, 0), axis=1)
    age = idx[None, 1:] - iota[:, :-1]
    silent = d[:, 1:] == 0
    if first_only:
        keep = iota[:, :-1] == 0
        age, silent = age[keep], silent[keep]
    at_risk = np.bincount(age.ravel(), minlength=T + 2)[1:T + 1]
    success = np.bincount(age[silent].ravel(), minlength=T + 2)[1:T + 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pbar = np.where(at_risk > 0, success / np.maximum(at_risk, 1), np.nan)
    return ConditionalFrequencies(pbar, at_risk, at_risk < min_count)
