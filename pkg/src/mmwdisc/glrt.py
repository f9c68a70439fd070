"""GLRT detector for the presence and timing of a known pilot.

For one hypothesized lag the test statistic is

    L_G = sum_l |Y_l s*|^2 / |s|^2  /  sum_l (|Y_l|_F^2 - |Y_l s*|^2 / |s|^2)

i.e. the pilot-correlated energy over the residual energy. Under H0,
``(N_s - 1) L_G`` is central F with ``(2 N_R L, 2 N_R L (N_s - 1))`` degrees
of freedom, which fixes the threshold for a false-alarm target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal as sps

from .errors import DomainError, ShapeError
from .ncf import NcfParams, f_isf
from .signal_model import FrameConfig, ObservationWindow, RsSequence


@dataclass(frozen=True)
class GlrtResult:
    statistic: float
    h_hat: np.ndarray
    sigma0_sq: float
    sigma1_sq: float
    degenerate: bool = False

    def decide(self, gamma: float) -> bool:
        return self.degenerate or self.statistic > gamma


def _blocks(window, rs: RsSequence):
    y = window.blocks if isinstance(window, ObservationWindow) else np.asarray(window, dtype=complex)
    if y.ndim == 2:
        y = y[None]
    if y.ndim != 3 or y.shape[-1] != rs.n_s:
        raise ShapeError(f"blocks of shape {y.shape} do not match a pilot of length {rs.n_s}")
    if rs.n_s < 2:
        raise DomainError("n_s must be >= 2")
    return y


def slot_energies(blocks, rs: RsSequence):
    """Per-slot pilot energy ``U_l`` and residual energy ``V_l``.

    ``blocks`` has shape ``(..., N_R, N_s)``; the outputs drop the last two
    axes.
    """
    corr = blocks @ rs.samples.conj()
    u = np.sum(np.abs(corr) ** 2, axis=-1) / rs.energy
    total = np.sum(np.abs(blocks) ** 2, axis=(-2, -1))
    return u, total - u


def ml_estimates(window, rs: RsSequence):
    """Maximum-likelihood channel and noise-variance estimates.

    Returns ``(h_hat, sigma0_sq, sigma1_sq)`` where ``h_hat`` has one row per
    slot, ``sigma0_sq`` is the H0 variance estimate and ``sigma1_sq`` the H1
    estimate after removing the fitted pilot term.
    """
    y = _blocks(window, rs)
    n = y.size
    h_hat = y @ rs.samples.conj() / rs.energy
    u, v = slot_energies(y, rs)
    sigma0 = float(np.sum(u + v) / n)
    sigma1 = float(np.sum(v) / n)
    return h_hat, sigma0, sigma1


def glrt_statistic(window, rs: RsSequence) -> GlrtResult:
    """GLRT statistic and the ML estimates behind it."""
    y = _blocks(window, rs)
    h_hat, s0, s1 = ml_estimates(y, rs)
    u, v = slot_energies(y, rs)
    num, den = float(np.sum(u)), float(np.sum(v))
    # Floating-point residue of a noiseless matched block.
    if num > 0 and den <= 1e-13 * (num + den):
        return GlrtResult(float("inf"), h_hat, s0, 0.0, degenerate=True)
    return GlrtResult(max(num, 0.0) / den, h_hat, s0, s1)


@dataclass(frozen=True)
class ThresholdSpec:
    gamma: float
    p_fa_target: float
    n_slot: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if not 0 < self.p_fa_target < 1:
            raise DomainError("p_fa_target must lie in (0, 1)")


def threshold_for_pfa(p_fa: float, n_slot: int, n_r: int, l_slots: int, n_s: int) -> float:
    """Threshold giving per-lag false-alarm probability ``p_fa / n_slot``.

    By the union bound the false-alarm probability of a full sweep over
    ``n_slot`` lags then stays below ``p_fa``.
    """
    q = p_fa / n_slot
    if not 0 < q < 1:
        raise DomainError(f"p_fa / n_slot = {q} is not a probability")
    return f_isf(q, NcfParams.for_glrt(n_r, l_slots, n_s)) / (n_s - 1)


def threshold_spec(p_fa: float, n_slot: int, n_r: int, l_slots: int, n_s: int) -> ThresholdSpec:
    return ThresholdSpec(threshold_for_pfa(p_fa, n_slot, n_r, l_slots, n_s), p_fa, n_slot)


def sweep_statistics(waveform, rs: RsSequence, n_slot: int, l_slots: int) -> np.ndarray:
    """Statistic at every lag ``0 <= tau < n_slot``.

    ``waveform`` has shape ``(..., N_R, T)`` with ``T >= (l_slots + 1) *
    n_slot``. Slot ``l`` of lag ``tau`` is the pilot-length segment starting
    at ``tau + l * n_slot``.
    """
    y = np.asarray(waveform, dtype=complex)
    if y.shape[-1] < (l_slots + 1) * n_slot:
        raise ShapeError(f"waveform has {y.shape[-1]} samples, need at least {(l_slots + 1) * n_slot}")
    if rs.n_s > n_slot:
        raise ShapeError("pilot longer than a slot")
    span = l_slots * n_slot
    y = y[..., :span + rs.n_s]
    kernel = rs.samples.reshape((1,) * (y.ndim - 1) + (-1,))
    corr = sps.correlate(y, kernel, mode="valid", method="fft")
    pilot = np.sum(np.abs(corr) ** 2, axis=-2) / rs.energy
    power = np.sum(np.abs(y) ** 2, axis=-2)
    csum = np.concatenate([np.zeros(power.shape[:-1] + (1,)), np.cumsum(power, axis=-1)], axis=-1)
    energy = csum[..., rs.n_s:] - csum[..., :-rs.n_s]

    shape = pilot.shape[:-1] + (l_slots, n_slot)
    num = pilot[..., :span].reshape(shape).sum(axis=-2)
    tot = energy[..., :span].reshape(shape).sum(axis=-2)
    den = tot - num
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(den > 1e-13 * tot, num / den, np.inf)
    # Windows holding only FFT and cumulative-sum roundoff carry no energy.
    stat[tot <= 1e-12 * csum[..., -1:]] = 0.0
    return stat


class SweepEntry(NamedTuple):
    lag: int
    statistic: float
    decision: bool


def detect_sweep(waveform, rs: RsSequence, gamma: float, frame: FrameConfig | int, l_slots: int) -> list[SweepEntry]:
    """Run the test at every candidate lag; entries are ordered by lag."""
    n_slot = frame.n_slot if isinstance(frame, FrameConfig) else int(frame)
    stat = sweep_statistics(waveform, rs, n_slot, l_slots)
    if stat.ndim != 1:
        raise ShapeError("detect_sweep takes a single (N_R, T) waveform")
    return [SweepEntry(k, float(s), bool(s > gamma)) for k, s in enumerate(stat)]
