"""Predictive non-communication coefficients.

``pbar[n-1]`` is the probability that the scheduler stays silent at the
``n``-th step after a transmission, given it stayed silent for the ``n - 1``
steps before. ``p[n-1]`` is the probability of ``n`` silent steps in a row,
the running product of ``pbar``. Three engines produce ``pbar``:

* ``quadrature`` -- alternate truncation and Gaussian convolution of the
  error density on a grid;
* ``particle`` -- the same recursion carried by a particle cloud and a
  Gaussian kernel estimate (``open_loop=True`` skips the truncation and
  gives the ``open-loop-particle`` variant);
* ``open-loop`` -- the never-truncated Gaussian error, in closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import rng as rngmod
from .dist import (
    GridOptions,
    ParticleSet,
    integrate,
    kde_mass,
    kde_sample,
    make_gaussian,
    propagate,
    truncate,
)
from .errors import DegenerateTruncation, InvalidParameter

log = logging.getLogger(__name__)

METHODS = ("quadrature", "particle", "open-loop", "open-loop-particle")


@dataclass(frozen=True)
class CoeffSet:
    pbar: tuple
    p: tuple
    method: str
    diagnostics: tuple = ()

    @classmethod
    def from_pbar(cls, pbar, method="given", diagnostics=()):
        pbar = tuple(float(v) for v in pbar)
        return cls(pbar, tuple(stack(pbar)), method, tuple(diagnostics))

    @property
    def T(self):
        return len(self.pbar)


def stack(pbar):
    """Running products ``P_n = pbar_1 * ... * pbar_n``."""
    pbar = np.asarray(pbar, dtype=float)
    if pbar.ndim != 1:
        raise InvalidParameter("pbar", "must be a flat sequence")
    bad = ~((pbar >= 0) & (pbar <= 1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvalidParameter("pbar", f"entry {i + 1} = {pbar[i]} is outside [0, 1]")
    return np.cumprod(pbar)


def first_step_coefficient(spec):
    """Probability that one noise draw stays inside the threshold band."""
    return erf(spec.eta / (math.sqrt(2.0) * spec.sigma))


def error_densities(spec, kmax, grid=None):
    """Densities of the triggered-loop error ``k`` steps after a transmission.

    Returns ``[p_1, ..., p_kmax]`` where ``p_1`` is the noise density and
    ``p_{k+1}`` is ``p_k`` truncated to ``[-eta, eta]`` and convolved.
    """
    grid = grid or GridOptions()
    S = spec.half_width(grid)
    out = []
    if kmax < 1:
        return out
    pdf = make_gaussian(spec.sigma, grid, half_width=max(S, 8.0 * spec.sigma))
    out.append(pdf)
    for _ in range(2, kmax + 1):
        pdf = propagate(truncate(pdf, spec.eta), spec.A, spec.sigma, grid)
        out.append(pdf)
    return out


def quadrature_coefficients(spec, grid=None):
    pbar = [1.0]
    diagnostics = []
    if spec.T >= 2:
        for k, pdf in enumerate(error_densities(spec, spec.T - 1, grid), start=1):
            if pdf.drift > 1e-6:
                diagnostics.append(f"density k={k} renormalised by {pdf.drift:.3g}")
            pbar.append(integrate(pdf, -spec.eta, spec.eta))
    return CoeffSet.from_pbar(pbar, "quadrature", diagnostics)


def particle_coefficients(spec, N=10_000, bandwidth=0.1, seed=0, open_loop=False):
    """Particle approximation of the coefficients.

    Each step removes particles outside the open band ``|z| < eta``, redraws
    ``N`` particles from the kernel estimate of the survivors, pushes them
    through ``z <- A z + noise`` and integrates the kernel estimate of the
    result over ``[-eta, eta]``. With ``open_loop`` the removal and redraw
    are skipped.
    """
    if int(N) != N or N < 1:
        raise InvalidParameter("particles", f"must be a positive integer, got {N!r}")
    if not bandwidth > 0:
        raise InvalidParameter("bandwidth", f"must be > 0, got {bandwidth}")
    N = int(N)
    if N < 100:
        log.warning("particle count %d is below 100; coefficients will be noisy", N)
    gen = rngmod.generator(seed, rngmod.PARTICLE)
    eta, A, sigma = spec.eta, spec.A, spec.sigma
    pbar = [1.0, first_step_coefficient(spec)][: spec.T]
    z = sigma * gen.standard_normal(N)
    for i in range(2, spec.T):
        if not open_loop:
            survivors = z[np.abs(z) < eta]
            if survivors.size == 0:
                raise DegenerateTruncation(
                    f"all {N} particles left the band |z| < {eta} at step {i - 1}"
                )
            z = kde_sample(ParticleSet(survivors, bandwidth), N, gen)
        z = A * z + sigma * gen.standard_normal(N)
        pbar.append(kde_mass(ParticleSet(z, bandwidth), -eta, eta))
    method = "open-loop-particle" if open_loop else "particle"
    return CoeffSet.from_pbar(pbar, method)


def open_loop_variance(spec, k):
    """Variance ``sigma^2 * sum_{n<k} A^(2n)`` of the untriggered error ``k`` steps out."""
    a2 = spec.A * spec.A
    return spec.sigma ** 2 * sum(a2 ** n for n in range(k))


def open_loop_coefficients(spec):
    pbar = [1.0]
    for i in range(2, spec.T + 1):
        sd = math.sqrt(open_loop_variance(spec, i - 1))
        pbar.append(erf(spec.eta / (math.sqrt(2.0) * sd)))
    return CoeffSet.from_pbar(pbar, "open-loop")


def coefficients(spec, method, grid=None, N=10_000, bandwidth=0.1, seed=0):
    """Dispatch on a method name from ``METHODS``."""
    if method == "quadrature":
        return quadrature_coefficients(spec, grid)
    if method == "particle":
        return particle_coefficients(spec, N, bandwidth, seed)
    if method == "open-loop-particle":
        return particle_coefficients(spec, N, bandwidth, seed, open_loop=True)
    if method == "open-loop":
        return open_loop_coefficients(spec)
    raise InvalidParameter("method", f"unknown coefficient method {method!r}")
