"""Noncentral F distribution and the miss-detection probabilities built on it.

The CDF is evaluated as a Poisson mixture of central F CDFs, each written as
a regularized incomplete beta function::

    F(x | n1, n2, lam) = sum_j Pois(j; lam/2) * I_y(n1/2 + j, n2/2),
    y = n1 x / (n1 x + n2)

Only the Poisson indices inside a window around the mode are summed; the
window edges are Poisson quantiles at mass ``tail`` so the neglected terms
contribute at most ``2 * tail`` to the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError, NumericalError
from .signal_model import ChannelLaw, effective_gain_batch, sample_path_batch

MAX_TERMS = 10_000
TAIL_MASS = 1e-16
_CHUNK_TERMS = 4096


@dataclass(frozen=True)
class NcfParams:
    """Degrees of freedom and noncentrality of a noncentral F law."""

    n1: float
    n2: float
    lam: float = 0.0

    def __post_init__(self):
        if not (self.n1 > 0 and self.n2 > 0):
            raise DomainError(f"degrees of freedom must be positive, got ({self.n1}, {self.n2})")
        if not np.all(np.asarray(self.lam) >= 0):
            raise DomainError(f"noncentrality must be >= 0, got {self.lam}")

    @classmethod
    def for_glrt(cls, n_r: int, l_slots: int, n_s: int, lam: float = 0.0) -> "NcfParams":
        """Law of ``(N_s - 1) * L_G`` for an ``n_r``-antenna, ``l_slots``-slot test."""
        return cls(2.0 * n_r * l_slots, 2.0 * n_r * l_slots * (n_s - 1), lam)


_DEEP_TAILS = (1e-300, 1e-150, 1e-60)


def _poisson_window(mu, tail, max_terms, check=True):
    # Bernstein / Chernoff tail bounds: each side of the window leaves out at
    # most ``tail`` of the Poisson mass.
    mu = np.asarray(mu, dtype=float)
    c = np.log(1.0 / tail)
    right = c / 3.0 + np.sqrt(c * c / 9.0 + 2.0 * c * mu)
    left = np.sqrt(2.0 * c * mu)
    # Kept as floats: exact integers below 2**53, and anything wider than
    # the cap never reaches the summation.
    lo = np.maximum(np.floor(mu - left), 0.0)
    hi = np.ceil(mu + right)
    width = hi - lo + 1
    if check and np.any(width > max_terms):
        worst = int(np.argmax(width))
        raise NumericalError(
            "Poisson mixture needs more terms than the cap allows",
            cap=max_terms,
            needed=int(width.flat[worst]),
            noncentrality=float(2.0 * mu.flat[worst]),
        )
    return lo, hi


def _log_pmf(j, mu):
    return special.xlogy(j, mu) - mu - special.gammaln(j + 1.0)


def _mixture(x, n1, n2, lam, upper, tail, max_terms):
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam, dtype=float))
    out = np.empty(x.shape, dtype=float)
    flat_x, flat_lam, flat_out = x.ravel(), lam.ravel(), out.ravel()

    support = flat_x > 0
    flat_out[~support] = 1.0 if upper else 0.0
    idx = np.flatnonzero(support)
    if idx.size == 0:
        return out if out.ndim else float(out)

    a, b = 0.5 * n1, 0.5 * n2
    mu = 0.5 * flat_lam[idx]
    lo, hi = _poisson_window(mu, tail, max_terms, check=False)
    wide = hi - lo + 1 > max_terms
    if np.any(wide):
        # The beta terms fall with the Poisson index, so beyond the window
        # the lower-tail mass is at most the Poisson tail plus the beta term
        # at the window's low edge. When both are below ``tail`` the point is
        # settled without summing.
        xw = flat_x[idx[wide]]
        edge = special.betainc(a + lo[wide], b, n1 * xw / (n1 * xw + n2))
        if np.all(edge <= tail):
            flat_out[idx[wide]] = 1.0 if upper else 0.0
            keep = ~wide
            idx, mu, lo, hi = idx[keep], mu[keep], lo[keep], hi[keep]
            if idx.size == 0:
                return out if out.ndim else float(out)
        else:
            _poisson_window(mu[wide], tail, max_terms)

    # lo and hi are nondecreasing in mu, so sorted points split into blocks
    # that each share one index window of bounded width.
    order = np.argsort(mu, kind="stable")
    lo_s, hi_s = lo[order], hi[order]
    start = 0
    while start < order.size:
        stop = max(int(np.searchsorted(hi_s, lo_s[start] + _CHUNK_TERMS, side="left")), start + 1)
        block_lo, block_hi = lo_s[start], hi_s[stop - 1]
        sel = idx[order[start:stop]]
        j = np.arange(block_lo, block_hi + 1, dtype=float)
        xs = flat_x[sel][:, None]
        if np.all(xs == xs[0]):
            xs = xs[:1]
        denom = n1 * xs + n2
        if upper:
            beta = special.betainc(b, a + j[None, :], n2 / denom)
        else:
            beta = special.betainc(a + j[None, :], b, n1 * xs / denom)
        weights = np.exp(_log_pmf(j[None, :], 0.5 * flat_lam[sel][:, None]))
        flat_out[sel] = np.sum(weights * beta, axis=1)
        start = stop

    np.clip(flat_out, 0.0, 1.0, out=flat_out)
    # Results near the truncation level are dominated by terms outside the
    # window; widen it so tiny probabilities keep relative accuracy.
    if tail > _DEEP_TAILS[-1]:
        small = idx[flat_out[idx] < 1e3 * tail]
        for deep in _DEEP_TAILS if small.size else ():
            if deep >= tail:
                continue
            try:
                flat_out[small] = _mixture(flat_x[small], n1, n2, flat_lam[small], upper, deep, max_terms)
                break
            except NumericalError:
                # The wider window does not fit under the cap; keep the
                # absolute-accuracy result.
                continue
    return out if out.ndim else float(out)


def ncf_cdf(x, p: NcfParams, *, tail: float = TAIL_MASS, max_terms: int = MAX_TERMS):
    """CDF of the noncentral F distribution.

    Parameters
    ----------
    x : float or array_like
        Evaluation point(s).
    p : NcfParams
        Distribution parameters. ``p.lam`` may be an array; it broadcasts
        against ``x``.
    tail : float
        Poisson mass left out on each side of the summation window.
    max_terms : int
        Largest admissible window; wider windows raise ``NumericalError``.
    """
    return _mixture(x, p.n1, p.n2, p.lam, False, tail, max_terms)


def ncf_sf(x, p: NcfParams, *, tail: float = TAIL_MASS, max_terms: int = MAX_TERMS):
    """Survival function ``1 - ncf_cdf``, computed without cancellation."""
    return _mixture(x, p.n1, p.n2, p.lam, True, tail, max_terms)


def _bracket_hi(p: NcfParams, reached):
    hi = max(1.0, (p.n1 + float(p.lam)) / p.n1) * 2.0
    for _ in range(2000):
        if reached(hi):
            return hi
        hi *= 2.0
    raise NumericalError("could not bracket quantile", params=p, last_upper=hi)


def f_quantile(prob: float, p: NcfParams) -> float:
    """Inverse of :func:`ncf_cdf` in its first argument."""
    if not 0.0 < prob < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {prob}")
    if prob > 0.5:
        return f_isf(1.0 - prob, p)
    hi = _bracket_hi(p, lambda x: ncf_cdf(x, p) >= prob)
    try:
        return optimize.brentq(lambda x: ncf_cdf(x, p) - prob, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NumericalError("quantile root search failed", prob=prob, params=p) from exc


def f_isf(q: float, p: NcfParams) -> float:
    """Inverse survival function: the ``x`` with ``ncf_sf(x) == q``."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"tail probability must lie in (0, 1), got {q}")
    if q > 0.5:
        return f_quantile(1.0 - q, p)
    log_q = np.log(q)
    hi = _bracket_hi(p, lambda x: ncf_sf(x, p) <= q)

    def g(x):
        sf = ncf_sf(x, p)
        return (np.log(sf) if sf > 0 else -np.inf) - log_q

    try:
        return optimize.brentq(g, 0.0 if ncf_sf(0.0, p) > q else 1e-300, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise NumericalError("inverse survival root search failed", q=q, params=p) from exc


def miss_prob(gamma, n_r: int, l_slots: int, n_s: int, lam):
    """Probability that the GLRT statistic stays at or below ``gamma`` under H1.

    ``(N_s - 1) * L_G`` is noncentral F, so the statistic threshold is
    rescaled by ``N_s - 1`` before the CDF is evaluated. ``lam`` may be an
    array.
    """
    if np.any(np.asarray(gamma) <= 0):
        raise DomainError("threshold must be positive")
    p = NcfParams.for_glrt(n_r, l_slots, n_s, lam)
    return ncf_cdf((n_s - 1) * np.asarray(gamma, dtype=float), p)


@dataclass(frozen=True)
class FadingLink:
    """Link quantities that enter the fading-aware miss bound."""

    p_t: float
    n_s: int
    sigma2: float
    n_r: int
    l_slots: int
    gamma: float


def default_xi_grid() -> np.ndarray:
    return np.geomspace(1e-5, 1.0 - 1e-3, 60)


def fading_upper_bound(xi_grid, quantile_fn: Callable, link: FadingLink) -> tuple[float, float]:
    """Upper bound on the miss probability of a fading link.

    For each ``xi`` the channel gain is lower-bounded by its ``xi``-quantile
    except on an event of probability ``xi``; the bound is minimized over the
    grid.

    Returns
    -------
    (bound, best_xi)
    """
    xi = np.asarray(xi_grid, dtype=float)
    if xi.size == 0:
        raise DomainError("xi grid is empty")
    if np.any((xi <= 0) | (xi >= 1)):
        raise DomainError("xi values must lie strictly inside (0, 1)")
    h_low = np.array([quantile_fn(v) for v in xi], dtype=float)
    if np.any(np.diff(h_low[np.argsort(xi)]) < 0):
        raise DomainError("quantile function must be nondecreasing")
    eta_low = 2.0 * link.p_t * link.n_s * np.maximum(h_low, 0.0) / link.sigma2
    f_term = miss_prob(link.gamma, link.n_r, link.l_slots, link.n_s, link.l_slots * eta_low)
    values = xi + (1.0 - xi) * f_term
    k = int(np.argmin(values))
    return float(min(values[k], 1.0)), float(xi[k])


@dataclass
class QuantileTable:
    """Empirical quantiles of the slot-averaged channel gain.

    Calling the table with a ``xi`` from its grid returns the tabulated
    quantile; other values are interpolated linearly in ``xi``.
    """

    xi: np.ndarray
    values: np.ndarray
    extrapolated: np.ndarray
    trials: int

    def __call__(self, xi):
        return np.interp(xi, self.xi, self.values)


def empirical_quantiles(samples, xi) -> QuantileTable:
    """Quantile table from gain samples; ``xi`` below ``1/n`` is flagged."""
    samples = np.asarray(samples, dtype=float)
    xi = np.sort(np.asarray(xi, dtype=float))
    values = np.quantile(samples, xi, method="inverted_cdf")
    values = np.maximum.accumulate(values)
    return QuantileTable(xi, values, xi < 1.0 / samples.size, samples.size)


def channel_gain_quantile(rng, law: ChannelLaw, l_slots: int, xi, trials: int = 100_000, n_r: int = 1,
                          weights=None, chunk: int = 10_000) -> QuantileTable:
    """Empirical ``xi``-quantiles of the slot-averaged gain ``(1/L) sum_l |h_l|^2``.

    ``weights`` is the transmit beamformer (default: a single omnidirectional
    element). Quantiles below the ``1/trials`` resolution are flagged.
    """
    if trials < 10_000:
        raise DomainError("need at least 1e4 trials for quantile estimation")
    w = np.ones(1, dtype=complex) if weights is None else np.asarray(weights, dtype=complex)
    out = []
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        g, aoa, aod = sample_path_batch(rng, law, n, l_slots)
        out.append(effective_gain_batch(g, aoa, aod, w, n_r).mean(axis=1))
    return empirical_quantiles(np.concatenate(out), xi)
