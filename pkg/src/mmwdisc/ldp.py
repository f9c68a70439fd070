"""Large-deviations exponent of the GLRT miss probability.

Notation follows the per-slot normalized statistics ``u = 2U/(sigma^2 L)``
and ``v = 2V/(sigma^2 L)``: a miss is the event ``u <= gamma * v`` and the
limiting log-MGF of ``(u, v)`` is

    Lambda(t1, t2) = eta t1 / (1 - 2 t1) - N_R log(1 - 2 t1)
                     - N_R (N_s - 1) log(1 - 2 t2),     t1, t2 < 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateFunctionEval:
    value: float
    x_star: float
    v_star: float
    t1_star: float
    t2_star: float
    valid: bool


def validity_threshold(eta, n_r, n_s):
    """Largest threshold for which the miss probability decays exponentially."""
    return (2.0 * n_r + eta) / (2.0 * n_r * (n_s - 1))


def _check(eta, gamma, n_r, n_s):
    if np.any(np.asarray(eta) < 0):
        raise DomainError("eta must be nonnegative")
    if np.any(np.asarray(gamma) <= 0):
        raise DomainError("gamma must be positive")
    if np.any(np.asarray(n_r) < 1) or np.any(np.asarray(n_s) < 2):
        raise DomainError("need n_r >= 1 and n_s >= 2")


def _closed_form(eta, gamma, n_r, n_s):
    eta = np.asarray(eta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta, gamma = np.broadcast_arrays(eta, gamma)
    valid = (gamma < validity_threshold(eta, n_r, n_s)) & (eta > 0)
    e = np.where(valid, eta, 1.0)
    g = np.where(valid, gamma, 1.0)
    dof2 = n_r * (n_s - 1)

    # a x^2 - x + c = 0 with a > 0 and c < 0: one positive root.
    a = (g + 1.0) / (e * g)
    c = -a * n_r**2 - n_r - 2.0 * dof2
    x = (1.0 + np.sqrt(1.0 - 4.0 * a * c)) / (2.0 * a)
    if np.any(valid & ~(x > n_r)):
        raise NumericalError("positive root does not exceed N_R", eta=eta, gamma=gamma)
    v = (x * x - n_r**2) / (e * g)
    ratio = g * v / (n_r + x)
    value = 0.5 * e * (1.0 - ratio) + dof2 * np.log(2.0 * dof2 / v) - n_r * np.log(ratio)
    t1 = 0.5 - (n_r + x) / (2.0 * g * v)
    t2 = 0.5 - dof2 / v

    nan = np.nan
    return (
        np.where(valid, np.maximum(value, 0.0), 0.0),
        np.where(valid, x, nan),
        np.where(valid, v, nan),
        np.where(valid, t1, nan),
        np.where(valid, t2, nan),
        valid,
    )


def rate_function(eta: float, gamma: float, n_r: int, n_s: int) -> RateFunctionEval:
    """Exponent ``I*(eta, gamma)`` of the miss probability, with its optimizers.

    The infimum over the miss region sits on the line ``u = gamma v``; the
    stationarity condition in ``v`` becomes a quadratic in
    ``x = sqrt(N_R^2 + eta gamma v)`` whose positive root gives ``v*``.
    Outside the validity region (``gamma`` at or above the ratio of the
    means) the exponent is zero and ``valid`` is False.
    """
    _check(eta, gamma, n_r, n_s)
    value, x, v, t1, t2, valid = _closed_form(eta, gamma, n_r, n_s)
    return RateFunctionEval(float(value), float(x), float(v), float(t1), float(t2), bool(valid))


def rate_value(eta, gamma, n_r: int, n_s: int) -> np.ndarray:
    """Vectorized exponent only (zero where invalid)."""
    _check(eta, gamma, n_r, n_s)
    return _closed_form(eta, gamma, n_r, n_s)[0]


def stationarity_residual(v, eta, gamma, n_r, n_s):
    """Derivative condition of ``I_L(gamma v, v)`` in ``v`` (zero at ``v*``)."""
    return (gamma + 1.0) / 2.0 - (n_r + np.sqrt(n_r**2 + eta * gamma * v)) / (2.0 * v) - n_r * (n_s - 1) / v


def log_mgf(t1, t2, eta, n_r, n_s):
    """Limiting log-MGF of the normalized (numerator, denominator) pair."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    inside = (t1 < 0.5) & (t2 < 0.5)
    s1 = np.where(inside, 1.0 - 2.0 * t1, 1.0)
    s2 = np.where(inside, 1.0 - 2.0 * t2, 1.0)
    val = eta * t1 / s1 - n_r * np.log(s1) - n_r * (n_s - 1) * np.log(s2)
    return np.where(inside, val, np.inf)


def golden_section(f: Callable, lo, hi, tol: float = 1e-10, max_iter: int = 400):
    """Elementwise golden-section minimization of a unimodal function.

    ``f`` is evaluated on arrays; ``lo`` and ``hi`` may be arrays so that many
    independent problems advance together. Iterates until every bracket is
    narrower than ``tol`` times ``max(1, |midpoint|)``.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(0.5 * (a + b)))):
            break
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        x_new = np.where(left, b - _INV_PHI * (b - a), a + _INV_PHI * (b - a))
        f_new = f(x_new)
        c, d = np.where(left, x_new, d), np.where(left, c, x_new)
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
    else:
        raise NumericalError("golden-section search did not reach tolerance", tol=tol, width=float(np.max(b - a)))
    x = 0.5 * (a + b)
    return x, f(x)


def _legendre_1d(objective, tol):
    # sup over t < 1/2, searched in s = log(1 - 2t) so the bracket is finite.
    s, val = golden_section(lambda s: -objective(0.5 * (1.0 - np.exp(s))), -60.0, 60.0, tol=tol)
    return -val


def pointwise_rate(u, v, eta, n_r, n_s, tol: float = 1e-12):
    """Rate ``I_L(u, v)``: Legendre transform of the log-MGF, found numerically."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dof2 = n_r * (n_s - 1)

    def first(t1):
        s1 = 1.0 - 2.0 * t1
        return t1 * u - eta * t1 / s1 + n_r * np.log(s1)

    def second(t2):
        return t2 * v + dof2 * np.log(1.0 - 2.0 * t2)

    return _legendre_1d(first, tol) + _legendre_1d(second, tol)


def rate_function_oracle(eta, gamma, n_r, n_s, tol: float = 1e-10):
    """Brute-force exponent: minimize the pointwise rate along ``u = gamma v``.

    Independent of the closed form: both the Legendre transform and the
    outer minimization are done by golden-section search. All arguments
    broadcast, so a batch of problems is solved in one pass.
    """
    _check(eta, gamma, n_r, n_s)
    eta, gamma, n_r, n_s = np.broadcast_arrays(
        np.asarray(eta, dtype=float), np.asarray(gamma, dtype=float), np.asarray(n_r), np.asarray(n_s)
    )
    mean_u = 2.0 * n_r + eta
    mean_v = 2.0 * n_r * (n_s - 1)
    inside = mean_u <= gamma * mean_v
    v_hi = 10.0 * mean_v * (1.0 + eta)
    v, val = golden_section(lambda v: pointwise_rate(gamma * v, v, eta, n_r, n_s), 1e-6, v_hi, tol=tol)
    out = np.where(inside, 0.0, val)
    return out if out.ndim else float(out)


def miss_approx(l_slots: int, ev: RateFunctionEval) -> float:
    """Exponential approximation ``exp(-L I*)``; 1 when the exponent is invalid."""
    if l_slots < 1:
        raise DomainError("l_slots must be >= 1")
    return float(np.exp(-l_slots * ev.value)) if ev.valid else 1.0


@dataclass(frozen=True)
class DirectionLink:
    angle: float
    pathloss: float
    avg_gain: float
    eta: float

    @property
    def degenerate(self) -> bool:
        return self.eta == 0.0


def eta_for_direction(angle, gain_fn: Callable, pathloss_fn: Callable, p_t, n_r, n_s, sigma2) -> DirectionLink:
    """Normalized noncentrality seen by a UE in direction ``angle``."""
    alpha = float(pathloss_fn(angle))
    if not alpha > 0:
        raise DomainError(f"pathloss must be positive, got {alpha}")
    g = float(gain_fn(angle))
    eta = 2.0 * p_t * n_r * n_s * g / (alpha * sigma2)
    return DirectionLink(float(angle), alpha, g, eta)


def worst_direction_exponent(gain_fn: Callable, pathloss_fn: Callable, angles, gamma, p_t, n_r, n_s, sigma2):
    """Smallest ``eta`` over a direction grid and the exponent it allows.

    Returns ``(min_eta, exponent, angle_of_min)``. Averaged over directions,
    the miss probability cannot decay faster than this exponent.
    """
    angles = np.asarray(angles, dtype=float)
    gains = np.asarray(gain_fn(angles), dtype=float)
    alpha = np.asarray(pathloss_fn(angles), dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("pathloss must be positive on the grid")
    eta = 2.0 * p_t * n_r * n_s * gains / (alpha * sigma2)
    k = int(np.argmin(eta))
    min_eta = float(max(eta[k], 0.0))
    exponent = float(rate_value(min_eta, gamma, n_r, n_s)) if min_eta > 0 else 0.0
    return min_eta, exponent, float(angles[k])
