"""One-dimensional densities on uniform grids.

Densities are sampled on an odd number of equally spaced nodes so that
composite Simpson quadrature applies everywhere: for normalisation, for
interval probabilities and for the inner integral of the convolution that
pushes a truncated error density one step forward.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erf, ndtr

from .errors import DegenerateTruncation, InvalidGrid, InvalidParameter

log = logging.getLogger(__name__)

SQRT2PI = math.sqrt(2.0 * math.pi)
DRIFT_WARN = 1e-6
# rows of the output grid evaluated per block in propagate/kde
_BLOCK = 256


@dataclass(frozen=True)
class SystemSpec:
    """Scalar event-triggered loop ``x+ = A x + B u + w``, ``w ~ N(0, sigma^2)``.

    The scheduler transmits when the previous estimation error reaches
    ``eta`` in magnitude or when more than ``T`` steps passed since the last
    transmission.
    """

    A: float = 1.25
    B: float = 1.0
    sigma: float = 1.0
    x0: float = -2.0
    eta: float = 1.0
    T: int = 5

    def __post_init__(self):
        for name in ("A", "B", "x0", "sigma", "eta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise InvalidParameter(name, f"must be a finite real, got {value!r}")
        if self.sigma <= 0:
            raise InvalidParameter("sigma", f"must be > 0, got {self.sigma}")
        if self.eta <= 0:
            raise InvalidParameter("eta", f"must be > 0, got {self.eta}")
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise InvalidParameter("T", f"must be a positive integer, got {self.T!r}")
        object.__setattr__(self, "T", int(self.T))

    def half_width(self, grid=None):
        """Half width ``|A| eta + k sigma`` of the default propagation grid."""
        grid = grid or GridOptions()
        return abs(self.A) * self.eta + grid.support_factor * self.sigma


@dataclass(frozen=True)
class GridOptions:
    nodes: int = 4001
    support_factor: float = 8.0

    def __post_init__(self):
        if int(self.nodes) != self.nodes or self.nodes < 3 or self.nodes % 2 == 0:
            raise InvalidGrid(f"nodes must be an odd integer >= 3, got {self.nodes!r}")
        if not self.support_factor > 0:
            raise InvalidGrid(f"support_factor must be > 0, got {self.support_factor!r}")


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float


def nodes(lo, hi, n):
    """``n`` equally spaced nodes on ``[lo, hi]``, mirror-exact when ``lo == -hi``."""
    t = (2.0 * np.arange(n) - (n - 1)) / (n - 1)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


def simpson_weights(n, h):
    if n < 3 or n % 2 == 0:
        raise InvalidGrid(f"composite Simpson needs an odd node count >= 3, got {n}")
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


@dataclass(frozen=True, eq=False)
class GridPdf:
    """Density values at ``n`` uniform nodes spanning ``[lo, hi]``.

    ``drift`` records ``|1 - mass|`` of the raw values before the producing
    operation renormalised them.
    """

    lo: float
    hi: float
    values: np.ndarray
    drift: float = field(default=0.0, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidGrid("values must be one-dimensional")
        n = values.size
        if n < 3 or n % 2 == 0:
            raise InvalidGrid(f"node count must be odd and >= 3, got {n}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise InvalidGrid(f"support [{self.lo}, {self.hi}] is not a proper interval")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidGrid("density values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.size

    @property
    def h(self):
        return (self.hi - self.lo) / (self.n - 1)

    @cached_property
    def z(self):
        return nodes(self.lo, self.hi, self.n)

    @cached_property
    def weights(self):
        return simpson_weights(self.n, self.h)

    @cached_property
    def _spline(self):
        return CubicSpline(self.z, self.values)

    def mass(self):
        return float(self.weights @ self.values)

    def __call__(self, x):
        """Evaluate by cubic interpolation; zero outside the support."""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.where(inside, self._spline(np.clip(x, self.lo, self.hi)), 0.0)
        return np.maximum(out, 0.0)

    def normalized(self):
        m = self.mass()
        if not m > 0:
            raise InvalidGrid("density has no mass on its grid")
        return GridPdf(self.lo, self.hi, self.values / m, drift=abs(1.0 - m))


def _finish(lo, hi, raw, what):
    pdf = GridPdf(lo, hi, raw).normalized()
    if pdf.drift > DRIFT_WARN:
        log.warning("%s: renormalisation drift %.3g", what, pdf.drift)
    return pdf


def gaussian_values(z, sigma, mean=0.0):
    return np.exp(-0.5 * ((z - mean) / sigma) ** 2) / (SQRT2PI * sigma)


def make_gaussian(sigma, grid=None, half_width=None):
    """Zero-mean Gaussian with standard deviation ``sigma`` on ``[-S, S]``.

    ``S`` defaults to ``grid.support_factor * sigma`` and may not be narrower
    than ``8 sigma``.
    """
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidParameter("sigma", f"must be > 0, got {sigma}")
    grid = grid or GridOptions()
    S = grid.support_factor * sigma if half_width is None else float(half_width)
    if S < 8.0 * sigma * (1 - 1e-12):
        raise InvalidGrid(f"support half width {S} is below 8 sigma = {8 * sigma}")
    z = nodes(-S, S, grid.nodes)
    return _finish(-S, S, gaussian_values(z, sigma), "make_gaussian")


def integrate(pdf, a, b):
    """Probability of ``[a, b]`` under ``pdf`` by composite Simpson, clamped to [0, 1]."""
    if a > b:
        raise InvalidParameter("a", f"lower limit {a} exceeds upper limit {b}")
    lo, hi = max(a, pdf.lo), min(b, pdf.hi)
    if lo >= hi:
        return 0.0
    if lo == pdf.lo and hi == pdf.hi:
        total = pdf.mass()
    else:
        z = nodes(lo, hi, pdf.n)
        total = float(simpson_weights(pdf.n, (hi - lo) / (pdf.n - 1)) @ pdf(z))
    return min(max(total, 0.0), 1.0)


def truncate(pdf, eta, nodes_out=None):
    """Restrict ``pdf`` to ``[-eta, eta]`` and renormalise.

    The support shrinks to ``[-eta, eta]`` intersected with the input
    support; values are re-sampled there by cubic interpolation.
    """
    if not eta > 0:
        raise InvalidParameter("eta", f"must be > 0, got {eta}")
    lo, hi = max(-eta, pdf.lo), min(eta, pdf.hi)
    if lo >= hi:
        raise DegenerateTruncation(f"support [{pdf.lo}, {pdf.hi}] misses [-{eta}, {eta}]")
    n = nodes_out or pdf.n
    if lo == pdf.lo and hi == pdf.hi and n == pdf.n:
        raw = np.array(pdf.values)
    else:
        raw = pdf(nodes(lo, hi, n))
    inner = float(simpson_weights(n, (hi - lo) / (n - 1)) @ raw)
    if inner < 1e-12:
        raise DegenerateTruncation(
            f"mass {inner:.3g} inside [-{eta}, {eta}] is negligible; threshold lies in the tail"
        )
    return GridPdf(lo, hi, raw / inner)


def propagate(pdf_trunc, A, sigma, grid=None, half_width=None):
    """Density of ``A * X + W`` for ``X ~ pdf_trunc`` and ``W ~ N(0, sigma^2)``.

    The convolution integral over the input support is evaluated by Simpson's
    rule at each output node.
    """
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidParameter("sigma", f"must be > 0, got {sigma}")
    grid = grid or GridOptions()
    reach = abs(A) * max(abs(pdf_trunc.lo), abs(pdf_trunc.hi))
    S = reach + grid.support_factor * sigma if half_width is None else float(half_width)
    zin = pdf_trunc.z
    win = pdf_trunc.weights * pdf_trunc.values
    win = win / win.sum()
    zout = nodes(-S, S, grid.nodes)
    raw = np.empty_like(zout)
    shifted = A * zin
    for i in range(0, zout.size, _BLOCK):
        block = zout[i:i + _BLOCK, None] - shifted[None, :]
        raw[i:i + _BLOCK] = np.exp(-0.5 * (block / sigma) ** 2) @ win
    raw /= SQRT2PI * sigma
    loss = 1.0 - float(simpson_weights(zout.size, 2 * S / (zout.size - 1)) @ raw)
    if loss > 1e-8:
        raise InvalidGrid(f"output support [-{S}, {S}] loses mass {loss:.3g}")
    return _finish(-S, S, raw, "propagate")


def moments(pdf):
    w = pdf.weights * pdf.values
    mean = float(w @ pdf.z)
    var = float(w @ (pdf.z - mean) ** 2)
    return Moments(mean, max(var, 0.0))


@dataclass(frozen=True, eq=False)
class ParticleSet:
    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float).ravel()
        if samples.size < 1:
            raise InvalidParameter("samples", "particle set is empty")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameter("samples", "particles must be finite")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidParameter("bandwidth", f"must be > 0, got {self.bandwidth}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


def kde(particles, grid=None, lo=None, hi=None):
    """Gaussian-kernel estimate of the particle density, sampled on a grid.

    Without explicit bounds the grid spans the particle range padded by
    ``grid.support_factor`` bandwidths.
    """
    grid = grid or GridOptions()
    s, bw = particles.samples, particles.bandwidth
    pad = grid.support_factor * bw
    lo = s.min() - pad if lo is None else lo
    hi = s.max() + pad if hi is None else hi
    z = nodes(lo, hi, grid.nodes)
    raw = np.empty_like(z)
    # bound the (nodes x particles) kernel matrix to ~4e6 entries
    step = max(1, 4_000_000 // max(s.size, 1))
    for i in range(0, z.size, step):
        d = (z[i:i + step, None] - s[None, :]) / bw
        raw[i:i + step] = np.exp(-0.5 * d * d).sum(axis=1)
    raw /= SQRT2PI * bw * s.size
    return _finish(lo, hi, raw, "kde")


def kde_mass(particles, a, b):
    """Exact probability of ``[a, b]`` under the kernel estimate."""
    if a > b:
        raise InvalidParameter("a", f"lower limit {a} exceeds upper limit {b}")
    s, bw = particles.samples, particles.bandwidth
    return float(np.mean(ndtr((b - s) / bw) - ndtr((a - s) / bw)))


def kde_sample(particles, size, rng):
    """Exact draws from the kernel mixture: random centre plus kernel jitter."""
    idx = rng.integers(0, len(particles), size=size)
    return particles.samples[idx] + particles.bandwidth * rng.standard_normal(size)


def closed_form_e2_pdf(spec, grid=None):
    """Error-function form of the density of ``A X + W``, ``X`` the truncated noise.

    Equals ``propagate(truncate(N(0, sigma), eta), A, sigma)`` analytically.
    """
    grid = grid or GridOptions()
    A, s, eta = spec.A, spec.sigma, spec.eta
    S = spec.half_width(grid)
    z = nodes(-S, S, grid.nodes)
    a2 = A * A + 1.0
    root = math.sqrt(2.0) * s * math.sqrt(a2)
    pref = np.exp(-z * z / (2 * s * s * a2)) / (
        2 * s * math.sqrt(2 * math.pi * a2) * erf(eta / (math.sqrt(2.0) * s))
    )
    raw = pref * (erf((eta * a2 - A * z) / root) + erf((eta * a2 + A * z) / root))
    return _finish(-S, S, raw, "closed_form_e2_pdf")
