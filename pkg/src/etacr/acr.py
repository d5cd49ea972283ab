"""Transient and stationary average communication rate (ACR).

The transient rate obeys the renewal recursion

    E_k = 1 - sum_{n=1}^{min(k, T)} P_n E_{k-n},   E_0 = 1,

whose fixed point is ``1 / (1 + P_1 + ... + P_T)``. Convergence of the
recursion is decided by the Jury test on its characteristic polynomial
``z^T + P_1 z^(T-1) + ... + P_T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class AcrSeries:
    values: tuple
    stationary: float | None = None
    method: str = ""
    diagnostics: tuple = ()

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class JuryReport:
    stable: bool
    rows: tuple
    failed_rule: int | None = None


def _indexes(coeffs):
    return np.asarray(coeffs.p, dtype=float)


def recursive_acr(coeffs, K):
    """Evolve the recursion for ``k = 0..K``."""
    if int(K) != K or K < 0:
        raise InvalidParameter("horizon", f"must be a non-negative integer, got {K!r}")
    P = _indexes(coeffs)
    T = P.size
    E = np.empty(int(K) + 1)
    E[0] = 1.0
    worst = 0.0
    for k in range(1, E.size):
        m = min(k, T)
        v = 1.0 - P[:m] @ E[k - 1::-1][:m]
        if v < 0.0 or v > 1.0:
            worst = max(worst, -v, v - 1.0)
            v = min(max(v, 0.0), 1.0)
        E[k] = v
    diagnostics = ()
    if worst > CLAMP_TOL:
        msg = f"recursion left [0, 1] by {worst:.3g}; values clamped"
        log.warning(msg)
        diagnostics = (msg,)
    return AcrSeries(tuple(E.tolist()), stationary_acr(coeffs), coeffs.method, diagnostics)


def stationary_acr(coeffs):
    """Fixed point ``1 / (1 + sum_n P_n)`` of the recursion."""
    P = _indexes(coeffs)
    if not jury_stable(characteristic_polynomial(coeffs)).stable:
        log.warning("marginal: recursion does not converge; returning its Cesaro mean")
    return float(1.0 / (1.0 + P.sum()))


def is_marginal(coeffs):
    return not jury_stable(characteristic_polynomial(coeffs)).stable


def recursion_limit(coeffs, tol=1e-10, max_steps=10_000):
    """Run the recursion until ``T`` consecutive increments fall below ``tol``.

    Returns ``(value, steps)``; ``steps == max_steps`` means no convergence
    was detected.
    """
    P = _indexes(coeffs)
    T = P.size
    hist = [1.0]
    quiet = 0
    for k in range(1, max_steps + 1):
        m = min(k, T)
        v = 1.0 - sum(P[n] * hist[-1 - n] for n in range(m))
        quiet = quiet + 1 if abs(v - hist[-1]) < tol else 0
        hist.append(v)
        if len(hist) > T + 1:
            hist.pop(0)
        if quiet >= T:
            return v, k
    return hist[-1], max_steps


def characteristic_polynomial(coeffs):
    """Ascending coefficients ``(P_T, ..., P_1, 1)``."""
    return tuple(_indexes(coeffs)[::-1].tolist()) + (1.0,)


def companion_matrix(coeffs):
    """``T x T`` transition matrix of the homogeneous recursion.

    The state ``(E_{k-T+1}, ..., E_k)`` shifts up by one; the last row is
    ``(-P_T, ..., -P_1)``.
    """
    P = _indexes(coeffs)
    T = P.size
    M = np.zeros((T, T))
    M[np.arange(T - 1), np.arange(1, T)] = 1.0
    M[-1, :] = -P[::-1]
    return M


def jury_stable(poly):
    """Jury test: are all roots of ``a_0 + a_1 z + ... + a_N z^N`` inside |z| < 1?

    ``failed_rule`` is 1 for ``D(1) <= 0``, 2 for ``(-1)^N D(-1) <= 0``, 3 for
    ``|a_0| >= |a_N|`` and 4 when a derived row of the Jury array has
    ``|first| <= |last|``. A negative leading coefficient is handled by
    flipping the sign of the whole polynomial. Derived rows are stored
    rescaled to unit max-norm.
    """
    a = np.asarray(poly, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise InvalidParameter("poly", "need at least two coefficients")
    if a[-1] == 0:
        raise InvalidParameter("poly", "leading coefficient must be non-zero")
    if a[-1] < 0:
        a = -a
    N = a.size - 1
    # magnitude rule first, so failed_rule names the coefficient defect when both fail
    if not abs(a[0]) < abs(a[-1]):
        return JuryReport(False, (), 3)
    if not np.polyval(a[::-1], 1.0) > 0:
        return JuryReport(False, (), 1)
    if not (-1) ** N * np.polyval(a[::-1], -1.0) > 0:
        return JuryReport(False, (), 2)
    rows = [tuple(a.tolist()), tuple(a[::-1].tolist())]
    row = a
    while row.size > 3:
        m = row.size - 1
        row = row[0] * row[:m] - row[m] * row[m:0:-1]
        # positive rescaling keeps every |first| vs |last| comparison; avoids underflow
        scale = np.abs(row).max()
        if scale > 0:
            row = row / scale
        rows += [tuple(row.tolist()), tuple(row[::-1].tolist())]
        if not abs(row[0]) > abs(row[-1]):
            return JuryReport(False, tuple(rows[:-1]), 4)
    if len(rows) > 2:
        rows.pop()
    return JuryReport(True, tuple(rows), None)
