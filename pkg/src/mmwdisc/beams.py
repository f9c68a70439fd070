"""Coverage-driven codebook design for the discovery reference signal.

A pathloss profile over the sector fixes the average gain each direction
needs. The sector is split into subintervals, one beam is synthesized per
subinterval, and slots are shared among the beams so that the slot-weighted
average gain follows the profile. Angular measures are taken in
``u = sin(angle)``, where the array's Fourier modes are orthonormal and the
average gain of any unit-norm beam over ``u in [-1, 1]`` is exactly one.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError, DomainError, ShapeError
from .signal_model import HALF_PI, steering_vector

SCHEMA_VERSION = 1
GRID_STEP_DEG = 0.25
IN_BAND_WEIGHT = 1.0
OUT_BAND_WEIGHT = 2.0


def angle_grid(step_deg: float = GRID_STEP_DEG) -> np.ndarray:
    """Uniform angle grid over ``[-pi/2, pi/2]`` with the given step in degrees."""
    n = int(round(180.0 / step_deg))
    return np.linspace(-HALF_PI, HALF_PI, n + 1)


def sin_width(lo: float, hi: float) -> float:
    return float(np.sin(hi) - np.sin(lo))


# ---------------------------------------------------------------------------
# pathloss and targets


@dataclass(frozen=True)
class LinkBudget:
    """Quantities that convert a rate target into a pathloss level."""

    rho: float = 0.4
    bandwidth: float = 1e9
    bandwidth_rs: float = 10e6
    p_t: float = 1.0
    sigma2: float = 1.0
    g_t_max: float = 32.0
    g_r_max: float = 16.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise DomainError("rho must lie in (0, 1]")
        if min(self.bandwidth, self.bandwidth_rs, self.p_t, self.sigma2, self.g_t_max, self.g_r_max) <= 0:
            raise DomainError("link budget entries must be positive")


def snr_threshold(rate, link: LinkBudget):
    """SNR needed to carry ``rate`` bit/s at efficiency ``rho`` over the data bandwidth."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        raise DomainError("rate target must be positive")
    out = np.expm1(np.log(2.0) * rate / (link.rho * link.bandwidth))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PathlossProfile:
    """Pathloss ``alpha(angle)`` over a sector and its sin-space mean.

    ``breakpoints`` lists angles where ``alpha_fn`` may jump; they are passed
    to the quadrature so piecewise-constant profiles integrate exactly.
    """

    sector: tuple[float, float]
    alpha_fn: Callable
    breakpoints: tuple[float, ...] = ()
    mean_alpha: float = field(init=False)

    def __post_init__(self):
        lo, hi = self.sector
        if not -HALF_PI <= lo < hi <= HALF_PI:
            raise DomainError(f"bad sector {self.sector}")
        object.__setattr__(self, "sector", (float(lo), float(hi)))
        probe = np.asarray(self.alpha_fn(np.linspace(lo, hi, 257)), dtype=float)
        if np.any(~(probe > 0)):
            raise DomainError("pathloss must be positive on the sector")
        object.__setattr__(self, "mean_alpha", self.mean_over(lo, hi))

    def __call__(self, angle):
        return self.alpha_fn(angle)

    def mean_over(self, lo: float, hi: float) -> float:
        """Mean of ``alpha`` over ``[lo, hi]`` in the sin-space measure."""
        u_lo, u_hi = np.sin(lo), np.sin(hi)
        pts = [np.sin(b) for b in self.breakpoints if lo < b < hi]
        val, _ = integrate.quad(
            lambda u: float(self.alpha_fn(np.arcsin(u))), u_lo, u_hi,
            points=pts or None, epsabs=0.0, epsrel=1e-12, limit=200,
        )
        return val / (u_hi - u_lo)

    @classmethod
    def uniform(cls, alpha: float, sector=(-np.pi / 6, np.pi / 6)) -> "PathlossProfile":
        a = float(alpha)
        return cls(tuple(sector), lambda x: np.full(np.shape(x), a) if np.ndim(x) else a)

    @classmethod
    def half_blocked(cls, alpha: float, sector=(-np.pi / 6, np.pi / 6), split: float = 0.0) -> "PathlossProfile":
        """``alpha / 2`` on ``[lo, split]`` (blocked side), ``alpha`` above."""
        a = float(alpha)

        def fn(x):
            out = np.where(np.asarray(x) <= split, 0.5 * a, a)
            return out if out.ndim else float(out)

        return cls(tuple(sector), fn, (float(split),))

    @classmethod
    def from_table(cls, angles_deg, alphas, sector=None) -> "PathlossProfile":
        """Piecewise-linear profile through tabulated ``(angle, alpha)`` points."""
        x = np.deg2rad(np.asarray(angles_deg, dtype=float))
        y = np.asarray(alphas, dtype=float)
        if x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConfigError("alpha table needs >= 2 points with increasing angles")
        sector = tuple(sector) if sector is not None else (float(x[0]), float(x[-1]))

        def fn(a):
            out = np.interp(a, x, y)
            return out if np.ndim(out) else float(out)

        return cls(sector, fn, tuple(float(v) for v in x[1:-1]))


def pathloss_from_rate(rate_fn: Callable, link: LinkBudget, sector=(-np.pi / 6, np.pi / 6)) -> PathlossProfile:
    """Pathloss at which the strongest beams just carry the rate target.

    ``alpha(angle) = (P_T / sigma^2) * G_T G_R / SNR_th(angle) * W_rs / W``.
    """
    scale = link.p_t / link.sigma2 * link.g_t_max * link.g_r_max * link.bandwidth_rs / link.bandwidth

    def fn(a):
        out = scale / np.asarray(snr_threshold(rate_fn(a), link))
        return out if np.ndim(out) else float(out)

    return PathlossProfile(tuple(sector), fn)


@dataclass(frozen=True)
class SectorPartition:
    subintervals: tuple[tuple[float, float], ...]
    kappa: tuple[float, ...]
    mean_alpha: tuple[float, ...]

    def __post_init__(self):
        if len(self.subintervals) < 1:
            raise DomainError("a partition needs at least one subinterval")
        for (a, b), (c, _) in zip(self.subintervals, self.subintervals[1:]):
            if not a < b or b != c:
                raise DomainError("subintervals must be ordered, contiguous and disjoint")

    @property
    def m(self) -> int:
        return len(self.subintervals)

    @property
    def widths(self) -> np.ndarray:
        return np.array([sin_width(a, b) for a, b in self.subintervals])


def partition_sector(profile: PathlossProfile, m: int, edges: Sequence[float] | None = None) -> SectorPartition:
    """Split the sector into ``m`` pieces of equal sin-space width.

    Explicit interior ``edges`` (radians) override the equal split.
    """
    lo, hi = profile.sector
    if edges is None:
        if m < 1:
            raise DomainError("m must be >= 1")
        u = np.linspace(np.sin(lo), np.sin(hi), m + 1)
        bounds = np.arcsin(u)
        bounds[0], bounds[-1] = lo, hi
    else:
        bounds = np.concatenate([[lo], np.asarray(edges, dtype=float), [hi]])
        if np.any(np.diff(bounds) <= 0):
            raise DomainError("edges must be increasing and inside the sector")
    subs = tuple((float(a), float(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    kappa = tuple(2.0 / sin_width(a, b) for a, b in subs)
    means = tuple(profile.mean_over(a, b) for a, b in subs)
    return SectorPartition(subs, kappa, means)


@dataclass(frozen=True)
class TargetPattern:
    """Gain target ``kappa * alpha(angle) / mean_alpha`` on ``[lo, hi]``, zero elsewhere."""

    lo: float
    hi: float
    kappa: float
    mean_alpha: float
    alpha_fn: Callable

    def __call__(self, angles):
        a = np.asarray(angles, dtype=float)
        inside = (a >= self.lo) & (a <= self.hi)
        val = self.kappa * np.asarray(self.alpha_fn(np.clip(a, self.lo, self.hi)), dtype=float) / self.mean_alpha
        return np.where(inside, val, 0.0)

    def in_band(self, angles):
        a = np.asarray(angles, dtype=float)
        return (a >= self.lo) & (a <= self.hi)


def desired_pattern(profile: PathlossProfile, partition: SectorPartition) -> list[TargetPattern]:
    """Per-subinterval targets, each spending the full unit energy budget in its band."""
    return [
        TargetPattern(a, b, k, ma, profile.alpha_fn)
        for (a, b), k, ma in zip(partition.subintervals, partition.kappa, partition.mean_alpha)
    ]


def global_target(profile: PathlossProfile) -> TargetPattern:
    """Average-gain profile that equalizes the per-direction noncentrality."""
    lo, hi = profile.sector
    return TargetPattern(lo, hi, 2.0 / sin_width(lo, hi), profile.mean_alpha, profile.alpha_fn)


def slot_allocation(partition: SectorPartition, j_total: int) -> tuple[int, ...]:
    """Slots per beam, proportional to sin-space width times mean pathloss.

    Rounded by largest remainder; ties go to the subinterval with the larger
    mean pathloss, then the lower index. Every beam keeps at least one slot.
    """
    m = partition.m
    if int(j_total) != j_total or j_total < m:
        raise DomainError(f"cannot give {m} beams at least one slot each out of {j_total}")
    w = partition.widths * np.asarray(partition.mean_alpha)
    exact = j_total * w / w.sum()
    counts = np.floor(exact + 1e-12).astype(int)
    frac = exact - counts
    order = sorted(range(m), key=lambda i: (-round(frac[i], 12), -partition.mean_alpha[i], i))
    for i in order[: j_total - counts.sum()]:
        counts[i] += 1
    while np.any(counts < 1):
        counts[int(np.argmax(counts))] -= 1
        counts[int(np.argmin(counts))] += 1
    return tuple(int(c) for c in counts)


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class SynthesisConfig:
    grid_step_deg: float = GRID_STEP_DEG
    in_band_weight: float = IN_BAND_WEIGHT
    out_band_weight: float = OUT_BAND_WEIGHT
    restarts: int = 6
    maxiter: int = 2000
    population: int = 64
    generations: int = 500
    stagnation: int = 60
    transition: float = 2.0

    def __post_init__(self):
        if self.grid_step_deg > 0.5:
            raise DomainError("grid resolution must be 0.5 degrees or finer")


@dataclass(frozen=True)
class SynthesisReport:
    mismatch: float
    min_in_band_gain: float
    max_leakage: float
    kind: str
    converged: bool = True


class _Problem:
    """Weighted amplitude mismatch on an angle grid."""

    def __init__(self, target: Callable, n_t: int, cfg: SynthesisConfig):
        self.grid = angle_grid(cfg.grid_step_deg)
        self.a = steering_vector(n_t, self.grid)
        t = np.asarray(target(self.grid), dtype=float)
        if np.any(t < 0):
            raise DomainError("target gain must be nonnegative")
        self.amp = np.sqrt(t)
        if hasattr(target, "in_band"):
            self.band = np.asarray(target.in_band(self.grid))
        else:
            self.band = t > 0
        self.c = np.where(self.band, cfg.in_band_weight, cfg.out_band_weight)
        self.n_t = n_t
        # Out-of-band points within ``transition / N_T`` (sin-space) of a band
        # edge carry no weight, so the roll-off happens outside the band.
        u = np.sin(self.grid)
        self.free = np.zeros_like(self.band)
        for e in np.flatnonzero(np.diff(self.band.astype(int))):
            near = np.abs(u - 0.5 * (u[e] + u[e + 1])) <= cfg.transition / n_t
            self.free |= near & ~self.band
        self.c = np.where(self.free, 0.0, self.c)

    def value(self, w):
        r = np.abs(w @ self.a.T)
        return np.sum(self.c * (r - self.amp) ** 2, axis=-1)

    def residual_weights(self, w):
        z = self.a @ w
        r = np.abs(z)
        g = 2.0 * self.c * (r - self.amp) * np.conj(z) / np.maximum(r, 1e-300)
        return float(np.sum(self.c * (r - self.amp) ** 2)), z, g

    def report(self, w, kind, converged=True) -> SynthesisReport:
        gain = np.abs(self.a @ w) ** 2
        inside = gain[self.band]
        outside = gain[~self.band & ~self.free]
        return SynthesisReport(
            float(self.value(w)),
            float(inside.min()) if inside.size else 0.0,
            float(outside.max()) if outside.size else 0.0,
            kind,
            converged,
        )


def _chirp_phases(n_t: int, lo: float, hi: float) -> np.ndarray:
    # Linear sweep of the local spatial frequency across the aperture.
    n = np.arange(n_t)
    u0, u1 = np.sin(lo), np.sin(hi)
    return -np.pi * (u0 * n + (u1 - u0) * n**2 / (2.0 * max(n_t - 1, 1)))


def _band_of(target, prob: _Problem):
    if isinstance(target, TargetPattern):
        return target.lo, target.hi
    band = prob.grid[prob.band]
    return (float(band.min()), float(band.max())) if band.size else (-HALF_PI, HALF_PI)


def _cm_objective(theta, prob: _Problem):
    w = np.exp(1j * theta) / np.sqrt(prob.n_t)
    f, _, g = prob.residual_weights(w)
    return f, np.real(1j * w * (prob.a.T @ g))


def synthesize_cm(target: Callable, n_t: int, cfg: SynthesisConfig | None = None, seed=0):
    """Phase-only beamformer minimizing the weighted mismatch to ``target``.

    Starts from a chirp that spreads the beam over the target band and from
    ``cfg.restarts`` random phase vectors; each start is refined by L-BFGS
    with the analytic gradient.

    Returns
    -------
    (weights, SynthesisReport)
    """
    cfg = cfg or SynthesisConfig()
    if n_t < 2:
        raise DomainError("n_t must be >= 2")
    prob = _Problem(target, n_t, cfg)
    rng = np.random.default_rng(seed)
    lo, hi = _band_of(target, prob)
    starts = [_chirp_phases(n_t, lo, hi), _chirp_phases(n_t, hi, lo)]
    starts += [rng.uniform(0, 2 * np.pi, n_t) for _ in range(cfg.restarts)]
    best, best_f, ok = None, np.inf, False
    for x0 in starts:
        res = optimize.minimize(_cm_objective, x0, args=(prob,), jac=True, method="L-BFGS-B",
                                options={"maxiter": cfg.maxiter})
        if res.fun < best_f:
            best, best_f, ok = res.x, res.fun, bool(res.success)
    w = np.exp(1j * best) / np.sqrt(n_t)
    if not ok:
        warnings.warn("CM synthesis stopped before convergence; returning best point found", RuntimeWarning)
    return w, prob.report(w, "CM", ok)


def _expand(half: np.ndarray, n_t: int) -> np.ndarray:
    """Palindromic magnitude vector of length ``n_t`` from its first half."""
    k = (n_t + 1) // 2
    full = np.empty(half.shape[:-1] + (n_t,))
    full[..., :k] = half
    full[..., n_t - k:] = half[..., ::-1]
    return full


def _vm_weights(x, n_t):
    k = (n_t + 1) // 2
    # Signed magnitudes: a negative entry is a phase flip, |w| stays palindromic.
    mag = _expand(x[..., :k], n_t)
    norm = np.linalg.norm(mag, axis=-1, keepdims=True)
    return mag * np.exp(1j * x[..., k:]) / np.maximum(norm, 1e-300)


def _vm_objective(x, prob: _Problem):
    n_t = prob.n_t
    k = (n_t + 1) // 2
    a = x[:k]
    m = _expand(a, n_t)
    norm = np.linalg.norm(m)
    phase = np.exp(1j * x[k:])
    w = m * phase / norm
    f, z, g = prob.residual_weights(w)
    atg = prob.a.T @ g
    grad_theta = np.real(1j * w * atg)
    gz = np.real(g @ z)
    grad_m = np.real(atg * phase) / norm - gz * m / norm**2
    grad_a = grad_m[:k].copy()
    # Mirrored entries share a parameter; an odd middle entry does not.
    grad_a[: n_t - k] += grad_m[k:][::-1]
    return f, np.concatenate([grad_a, grad_theta])


def _polish_vm(x0, prob, cfg):
    res = optimize.minimize(_vm_objective, x0, args=(prob,), jac=True, method="L-BFGS-B",
                            options={"maxiter": cfg.maxiter})
    return res.x, res.fun, bool(res.success)


def synthesize_vm(target: Callable, n_t: int, cfg: SynthesisConfig | None = None, seed=0, cm_seed=None):
    """Phase and magnitude beamformer with palindromic magnitudes.

    A real-coded genetic search over (half magnitudes, phases) runs for
    ``cfg.generations`` generations with a population of ``cfg.population``.
    The population is seeded with the constant-modulus solution (or
    ``cm_seed`` weights when given) and reinitialized around the elite on
    stagnation. The best individual is then refined by L-BFGS.
    """
    cfg = cfg or SynthesisConfig()
    if n_t < 2:
        raise DomainError("n_t must be >= 2")
    prob = _Problem(target, n_t, cfg)
    rng = np.random.default_rng(seed)
    k = (n_t + 1) // 2
    dim = k + n_t

    if cm_seed is None:
        cm_seed, _ = synthesize_cm(target, n_t, cfg, seed)
    seed_x = np.concatenate([np.ones(k), np.angle(cm_seed)])

    pop = np.concatenate([rng.uniform(0.0, 1.0, (cfg.population, k)),
                          rng.uniform(-np.pi, np.pi, (cfg.population, n_t))], axis=1)
    pop[0] = seed_x
    pop[1:8] = seed_x + rng.normal(0.0, 0.1, (7, dim))
    fit = prob.value(_vm_weights(pop, n_t))
    best_i = int(np.argmin(fit))
    best_x, best_f = pop[best_i].copy(), fit[best_i]
    stale = 0
    n_elite = max(2, cfg.population // 16)
    for _ in range(cfg.generations):
        # Binary tournaments.
        a = rng.integers(0, cfg.population, (2, cfg.population))
        b = rng.integers(0, cfg.population, (2, cfg.population))
        pa = np.where(fit[a[0]] < fit[b[0]], a[0], b[0])
        pb = np.where(fit[a[1]] < fit[b[1]], a[1], b[1])
        # Blend crossover, then sparse Gaussian mutation.
        u = rng.uniform(-0.25, 1.25, (cfg.population, dim))
        child = pop[pa] + u * (pop[pb] - pop[pa])
        mask = rng.random((cfg.population, dim)) < 2.0 / dim
        scale = np.concatenate([np.full(k, 0.1), np.full(n_t, 0.3)])
        child = child + mask * rng.normal(0.0, 1.0, child.shape) * scale
        child_fit = prob.value(_vm_weights(child, n_t))

        elite = np.argsort(fit)[:n_elite]
        worst = np.argsort(child_fit)[::-1][:n_elite]
        child[worst], child_fit[worst] = pop[elite], fit[elite]
        pop, fit = child, child_fit

        i = int(np.argmin(fit))
        if fit[i] < best_f - 1e-12 * max(1.0, best_f):
            best_x, best_f, stale = pop[i].copy(), fit[i], 0
        else:
            stale += 1
        if stale >= cfg.stagnation:
            keep = np.argsort(fit)[:n_elite]
            fresh = pop[keep[rng.integers(0, n_elite, cfg.population)]] + rng.normal(0.0, 0.2, pop.shape)
            fresh[:n_elite] = pop[keep]
            pop, fit = fresh, prob.value(_vm_weights(fresh, n_t))
            stale = 0

    x, f, ok = _polish_vm(best_x, prob, cfg)
    if f > best_f:
        x = best_x
    w = _vm_weights(x, n_t)
    if not ok:
        warnings.warn("VM refinement stopped before convergence; returning best point found", RuntimeWarning)
    return w, prob.report(w, "VM", ok)


# ---------------------------------------------------------------------------
# codebooks


@dataclass(frozen=True)
class Codebook:
    """Beams with their slot counts per period.

    ``beams`` are unit-norm rows. ``scale`` holds a per-beam amplitude
    factor (one unless a per-antenna power limit forced a back-off), so the
    radiated weights are ``scale[:, None] * beams``.
    """

    beams: np.ndarray
    slots: tuple[int, ...]
    method: str = "custom"
    target_hash: str = ""
    scale: tuple[float, ...] | None = None

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.beams, dtype=complex))
        object.__setattr__(self, "beams", b)
        if len(self.slots) != b.shape[0]:
            raise ShapeError(f"{b.shape[0]} beams but {len(self.slots)} slot counts")
        if any(int(j) != j or j < 1 for j in self.slots):
            raise DomainError("every beam needs a positive integer slot count")
        object.__setattr__(self, "slots", tuple(int(j) for j in self.slots))
        norms = np.linalg.norm(b, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError(f"beams must be unit norm, got norms {norms}")
        s = (1.0,) * b.shape[0] if self.scale is None else tuple(float(v) for v in self.scale)
        if len(s) != b.shape[0] or any(not 0 < v <= 1 for v in s):
            raise DomainError("scale entries must lie in (0, 1]")
        object.__setattr__(self, "scale", s)

    @property
    def m(self) -> int:
        return self.beams.shape[0]

    @property
    def n_t(self) -> int:
        return self.beams.shape[1]

    @property
    def period(self) -> int:
        return sum(self.slots)

    @property
    def weights(self) -> np.ndarray:
        """Radiated weights, including any power back-off."""
        return np.asarray(self.scale)[:, None] * self.beams

    def schedule(self) -> np.ndarray:
        """Beam index per slot over one period (smooth weighted round robin).

        Beams with more slots are spread evenly through the period rather than
        sent back to back.
        """
        w = np.asarray(self.slots)
        credit = np.zeros(self.m, dtype=np.int64)
        out = np.empty(self.period, dtype=np.int64)
        for t in range(self.period):
            credit += w
            i = int(np.argmax(credit))
            credit[i] -= self.period
            out[t] = i
        return out

    def with_power_constraint(self, beta: float) -> "Codebook":
        scale = []
        for b in self.beams:
            _, frac = apply_power_constraint(b, beta, self.n_t)
            scale.append(np.sqrt(frac))
        return Codebook(self.beams, self.slots, self.method, self.target_hash, tuple(scale))


def omni_codebook(n_t: int, j_total: int = 1) -> Codebook:
    w = np.zeros(n_t, dtype=complex)
    w[0] = 1.0
    return Codebook(w[None], (int(j_total),), "omni")


def random_beams(rng, n_t: int, shape=()) -> np.ndarray:
    """I.i.d. isotropic unit-norm beams with leading ``shape``."""
    z = rng.standard_normal(tuple(shape) + (n_t, 2)).view(complex)[..., 0]
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def random_codebook(rng, n_t: int, j_total: int) -> Codebook:
    """One fresh isotropic random beam per slot."""
    if j_total < 1:
        raise DomainError("j_total must be >= 1")
    return Codebook(random_beams(rng, n_t, (j_total,)), (1,) * j_total, "random")


def apply_power_constraint(w, beta: float, n_t: int | None = None):
    """Scale ``w`` uniformly so that no element exceeds ``beta`` of the total power.

    Returns ``(scaled_w, realized_power_fraction)``.
    """
    w = np.asarray(w, dtype=complex)
    n_t = w.size if n_t is None else n_t
    if w.size != n_t:
        raise ShapeError(f"beamformer has {w.size} elements, expected {n_t}")
    if not beta >= 1.0 / n_t - 1e-15 or beta > 1.0:
        raise DomainError(f"beta must lie in [1/N_T, 1], got {beta}")
    peak = float(np.max(np.abs(w) ** 2))
    c2 = min(1.0, beta / peak) if peak > 0 else 1.0
    scaled = np.sqrt(c2) * w
    return scaled, float(np.linalg.norm(scaled) ** 2)


def avg_codebook_gain(codebook: Codebook, angle):
    """Slot-weighted mean of the radiated gains, ``(1/J) sum_m J_m G_m``."""
    g = np.abs(steering_vector(codebook.n_t, angle) @ codebook.weights.T) ** 2
    return g @ np.asarray(codebook.slots, dtype=float) / codebook.period


def profile_hash(profile: PathlossProfile, m: int, step_deg: float = GRID_STEP_DEG) -> str:
    grid = angle_grid(step_deg)
    inside = grid[(grid >= profile.sector[0]) & (grid <= profile.sector[1])]
    payload = {
        "sector": [repr(v) for v in profile.sector],
        "m": int(m),
        "alpha": [repr(float(v)) for v in np.asarray(profile(inside), dtype=float)],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def design_codebook(profile: PathlossProfile, method: str, m: int, n_t: int, j_total: int,
                    cfg: SynthesisConfig | None = None, seed=0, edges=None, allocation: str = "optimized"):
    """Partition, synthesize one beam per subinterval, and allocate slots.

    ``allocation`` is ``"optimized"`` (slots proportional to width times
    mean pathloss) or ``"equal"``.

    Returns
    -------
    (Codebook, list of SynthesisReport)
    """
    method = method.upper()
    if method not in ("CM", "VM"):
        raise ConfigError(f"unknown synthesis method {method!r}")
    part = partition_sector(profile, m, edges)
    targets = desired_pattern(profile, part)
    synth = synthesize_cm if method == "CM" else synthesize_vm
    beams, reports = [], []
    for i, t in enumerate(targets):
        w, rep = synth(t, n_t, cfg, seed=np.random.SeedSequence([int(seed), i]))
        beams.append(w)
        reports.append(rep)
    if allocation == "optimized":
        slots = slot_allocation(part, j_total)
    elif allocation == "equal":
        if j_total % part.m:
            raise ConfigError(f"j_total={j_total} is not divisible by M={part.m}")
        slots = (j_total // part.m,) * part.m
    else:
        raise ConfigError(f"unknown allocation {allocation!r}")
    beams = np.array(beams)
    beams /= np.linalg.norm(beams, axis=1, keepdims=True)
    return Codebook(beams, slots, method, profile_hash(profile, m)), reports


def codebook_to_dict(cb: Codebook) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "n_t": cb.n_t,
        "method": cb.method,
        "M": cb.m,
        "weights": [[[float(z.real), float(z.imag)] for z in row] for row in cb.beams],
        "slots": list(cb.slots),
        "scale": list(cb.scale),
        "target_hash": cb.target_hash,
    }


def codebook_from_dict(d: dict) -> Codebook:
    try:
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported codebook schema version {d.get('schema_version')!r}")
        w = np.array(d["weights"], dtype=float)
        if w.ndim != 3 or w.shape[2] != 2:
            raise ConfigError("weights must be a list of beams of [re, im] pairs")
        beams = w[..., 0] + 1j * w[..., 1]
        if beams.shape != (int(d["M"]), int(d["n_t"])):
            raise ConfigError(f"weights shape {beams.shape} disagrees with M and n_t")
        return Codebook(beams, tuple(d["slots"]), d.get("method", "custom"), d.get("target_hash", ""),
                        tuple(d["scale"]) if "scale" in d else None)
    except KeyError as exc:
        raise ConfigError(f"codebook is missing field {exc}") from exc
    except (DomainError, ShapeError) as exc:
        raise ConfigError(str(exc)) from exc


def save_codebook(cb: Codebook, path) -> None:
    Path(path).write_text(json.dumps(codebook_to_dict(cb), indent=1) + "\n")


def load_codebook(path) -> Codebook:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return codebook_from_dict(data)
