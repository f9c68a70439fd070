"""Array responses, multipath channels, reference signals and received samples.

Arrays are half-wavelength ULAs. A channel realization for one slot is a
sum of rank-one path terms ``g_q conj(u(aoa_q)) v(aod_q)`` so that the
effective channel after transmit beamforming is ``h = H w``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, ShapeError

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class UlaConfig:
    n_elements: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise DomainError(f"n_elements must be a positive integer, got {self.n_elements}")
        if self.spacing != 0.5:
            raise DomainError("only half-wavelength spacing is supported")


def _n(array) -> int:
    return array.n_elements if isinstance(array, UlaConfig) else int(array)


def _check_angles(angle):
    a = np.asarray(angle, dtype=float)
    if np.any(np.abs(a) > HALF_PI + 1e-12) or np.any(~np.isfinite(a)):
        raise DomainError("angles must lie in [-pi/2, pi/2]")
    return a


def steering_vector(array, angle):
    """Response ``[1, e^{j pi sin a}, ..., e^{j pi (N-1) sin a}]``.

    ``array`` is a :class:`UlaConfig` or an element count. An array of
    angles returns one row per angle.
    """
    a = _check_angles(angle)
    k = np.arange(_n(array))
    return np.exp(1j * np.pi * np.multiply.outer(np.sin(a), k))


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    aoa: float
    aod: float

    def __post_init__(self):
        _check_angles([self.aoa, self.aod])


@dataclass(frozen=True)
class ChannelLaw:
    """How channel realizations are drawn.

    One dominant path keeps its gain and angles for the whole observation
    window; the other ``q_paths - 1`` paths carry i.i.d. circular Gaussian
    gains and uniform angles, redrawn every slot when ``scatter_per_slot``.
    ``dominant_ratio_db`` is the power ratio of the dominant path to the sum
    of the scattered paths; the total expected power is ``1 / pathloss``.
    Angles left as ``None`` are drawn uniformly from their ranges.
    """

    q_paths: int = 6
    dominant_ratio_db: float = 13.2
    pathloss: float = 1.0
    dominant_aod: float | None = None
    dominant_aoa: float | None = None
    aod_range: tuple[float, float] = (-np.pi / 6, np.pi / 6)
    aoa_range: tuple[float, float] = (-HALF_PI, HALF_PI)
    scatter_per_slot: bool = True

    def __post_init__(self):
        if self.q_paths < 1:
            raise DomainError("q_paths must be >= 1")
        if not self.pathloss > 0:
            raise DomainError("pathloss must be positive")
        _check_angles(self.aod_range + self.aoa_range)

    @property
    def dominant_power(self) -> float:
        if self.q_paths == 1:
            return 1.0 / self.pathloss
        k = 10.0 ** (self.dominant_ratio_db / 10.0)
        return k / (1.0 + k) / self.pathloss

    @property
    def scatter_power(self) -> float:
        """Expected power of each scattered path."""
        if self.q_paths == 1:
            return 0.0
        return (1.0 / self.pathloss - self.dominant_power) / (self.q_paths - 1)


@dataclass(frozen=True)
class MultipathChannel:
    paths: tuple[PathComponent, ...]
    scatter_per_slot: bool = True

    def __post_init__(self):
        if len(self.paths) < 1:
            raise DomainError("a channel needs at least one path")

    @property
    def gains(self):
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def aoas(self):
        return np.array([p.aoa for p in self.paths])

    @property
    def aods(self):
        return np.array([p.aod for p in self.paths])

    def redraw_scatter(self, rng, law: ChannelLaw) -> "MultipathChannel":
        """Same dominant path, fresh scattered paths."""
        return replace(self, paths=(self.paths[0],) + _draw_scatter(rng, law))


def _draw_scatter(rng, law):
    n = law.q_paths - 1
    if n == 0:
        return ()
    g = np.sqrt(law.scatter_power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    aoa = rng.uniform(*law.aoa_range, size=n)
    aod = rng.uniform(*law.aod_range, size=n)
    return tuple(PathComponent(complex(g[i]), float(aoa[i]), float(aod[i])) for i in range(n))


def sample_channel(rng, law: ChannelLaw) -> MultipathChannel:
    """Draw a channel for one slot (dominant path plus scatter)."""
    phase = rng.uniform(0, 2 * np.pi)
    aoa = law.dominant_aoa if law.dominant_aoa is not None else rng.uniform(*law.aoa_range)
    aod = law.dominant_aod if law.dominant_aod is not None else rng.uniform(*law.aod_range)
    dom = PathComponent(complex(np.sqrt(law.dominant_power) * np.exp(1j * phase)), float(aoa), float(aod))
    return MultipathChannel((dom,) + _draw_scatter(rng, law), law.scatter_per_slot)


def sample_channel_window(rng, law: ChannelLaw, n_slots: int) -> list[MultipathChannel]:
    """Channels for ``n_slots`` consecutive slots sharing one dominant path."""
    first = sample_channel(rng, law)
    out = [first]
    for _ in range(n_slots - 1):
        out.append(first.redraw_scatter(rng, law) if law.scatter_per_slot else first)
    return out


def channel_matrix(channel: MultipathChannel, rx, tx) -> np.ndarray:
    """Dense ``N_R x N_T`` channel matrix."""
    u = steering_vector(rx, channel.aoas)
    v = steering_vector(tx, channel.aods)
    return np.einsum("q,qr,qt->rt", channel.gains, u.conj(), v)


def effective_channel(channel: MultipathChannel, w, rx, tx) -> np.ndarray:
    """Channel seen after transmit beamforming, ``H w``, without forming ``H``."""
    w = np.asarray(w, dtype=complex)
    if w.shape != (_n(tx),):
        raise ShapeError(f"beamformer has shape {w.shape}, expected ({_n(tx)},)")
    v = steering_vector(tx, channel.aods)
    u = steering_vector(rx, channel.aoas)
    return (channel.gains * (v @ w)) @ u.conj()


def effective_channels_batch(gains, aoas, aods, weights, n_r: int) -> np.ndarray:
    """Vectorized ``H w`` over leading batch axes.

    ``gains``, ``aoas`` and ``aods`` have shape ``(..., Q)`` and ``weights``
    shape ``(..., N_T)``; the result has shape ``(..., N_R)``.
    """
    n_t = weights.shape[-1]
    v = np.exp(1j * np.pi * np.sin(aods)[..., None] * np.arange(n_t))
    coeff = gains * np.einsum("...qt,...t->...q", v, weights)
    u_conj = np.exp(-1j * np.pi * np.sin(aoas)[..., None] * np.arange(n_r))
    return np.einsum("...q,...qr->...r", coeff, u_conj)


def check_unit_norm(w, tol: float = 1e-12):
    w = np.asarray(w, dtype=complex)
    if abs(np.linalg.norm(w) - 1.0) > tol:
        raise DomainError(f"beamformer must have unit norm, got {np.linalg.norm(w)!r}")
    return w


def beam_gain(w, angle, tx=None):
    """Transmit gain ``|v(angle) w|^2`` of a unit-norm beamformer."""
    w = check_unit_norm(w)
    v = steering_vector(tx if tx is not None else w.size, angle)
    return np.abs(v @ w) ** 2


def pattern(w, angles):
    """Gain of a (not necessarily normalized) weight vector on an angle grid."""
    w = np.asarray(w, dtype=complex)
    return np.abs(steering_vector(w.size, angles) @ w) ** 2


class SequenceKind(str, enum.Enum):
    QPSK = "qpsk"
    ZADOFF_CHU = "zc"


@dataclass(frozen=True)
class RsSequence:
    samples: np.ndarray
    power: float

    @property
    def n_s(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.vdot(self.samples, self.samples).real)


def generate_rs(n_s: int, power: float = 1.0, kind: str | SequenceKind = SequenceKind.QPSK, seed=None) -> RsSequence:
    """Unit-modulus pilot scaled to energy ``n_s * power``.

    Only the energy enters the detector statistics; the waveform itself is
    seeded QPSK by default, or a Zadoff-Chu sequence (root 1).
    """
    if n_s < 2:
        raise DomainError("n_s must be >= 2")
    if not power > 0:
        raise DomainError("power must be positive")
    kind = SequenceKind(kind)
    if kind is SequenceKind.QPSK:
        sym = np.random.default_rng(seed).integers(0, 4, n_s)
        base = np.exp(1j * (np.pi / 4 + np.pi / 2 * sym))
    else:
        n = np.arange(n_s)
        base = np.exp(-1j * np.pi * n * (n + (n_s % 2)) / n_s)
    return RsSequence(np.sqrt(power) * base, float(power))


@dataclass(frozen=True)
class FrameConfig:
    """Slot timing; defaults are 0.5 ms slots, 10 us pilots at 10 Msample/s."""

    t_slot: float = 0.5e-3
    t_rs: float = 10e-6
    sample_rate: float = 10e6

    def __post_init__(self):
        if not 0 < self.t_rs < self.t_slot:
            raise DomainError("need 0 < t_rs < t_slot")
        for name, value in (("n_s", self.t_rs * self.sample_rate), ("n_slot", self.t_slot * self.sample_rate)):
            if abs(value - round(value)) > 1e-6:
                raise DomainError(f"{name} = {value} is not an integer sample count")

    @property
    def n_s(self) -> int:
        return int(round(self.t_rs * self.sample_rate))

    @property
    def n_slot(self) -> int:
        return int(round(self.t_slot * self.sample_rate))


@dataclass
class ObservationWindow:
    """Received blocks ``Y_l`` stacked as an ``(L, N_R, N_s)`` array."""

    blocks: np.ndarray
    noise_variance: float = field(default=float("nan"), repr=False)

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=complex)
        if self.blocks.ndim == 2:
            self.blocks = self.blocks[None]
        if self.blocks.ndim != 3 or self.blocks.shape[0] < 1:
            raise ShapeError(f"blocks must have shape (L, N_R, N_s), got {self.blocks.shape}")

    @property
    def l_slots(self) -> int:
        return self.blocks.shape[0]


class Hypothesis(str, enum.Enum):
    H0 = "H0"
    H1 = "H1"


def complex_noise(rng, shape, sigma2: float) -> np.ndarray:
    """Circular complex Gaussian entries with variance ``sigma2``."""
    if not sigma2 > 0:
        raise DomainError("noise variance must be positive")
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_observation(rng, channels, beams, rs: RsSequence, sigma2: float, hypothesis, rx, tx) -> ObservationWindow:
    """Received blocks ``Y_l = h_l s^T + Z_l`` (H1) or ``Z_l`` (H0)."""
    if len(channels) != len(beams):
        raise ShapeError("need one beamformer per slot")
    if not sigma2 > 0:
        raise DomainError("noise variance must be positive")
    l_slots = len(channels)
    y = complex_noise(rng, (l_slots, _n(rx), rs.n_s), sigma2)
    if Hypothesis(hypothesis) is Hypothesis.H1:
        h = np.stack([effective_channel(c, w, rx, tx) for c, w in zip(channels, beams)])
        y += h[:, :, None] * rs.samples[None, None, :]
    return ObservationWindow(y, float(sigma2))


def synthesize_waveform(rng, n_r: int, n_samples: int, sigma2: float, rs: RsSequence = None,
                        h_slots=None, tau0: int = 0, n_slot: int = 0) -> np.ndarray:
    """Continuous sample stream of shape ``(n_r, n_samples)``.

    When ``h_slots`` is given, slot ``l`` carries ``h_slots[l] s^T`` starting
    at sample ``tau0 + l * n_slot``; pilots running past the end are cut.
    """
    y = complex_noise(rng, (n_r, n_samples), sigma2) if sigma2 > 0 else np.zeros((n_r, n_samples), complex)
    if h_slots is not None:
        for l, h in enumerate(h_slots):
            start = tau0 + l * n_slot
            if start >= n_samples:
                break
            stop = min(start + rs.n_s, n_samples)
            y[:, start:stop] += np.outer(h, rs.samples[: stop - start])
    return y


def array_factor(weights, angles) -> np.ndarray:
    """``v(angle) w`` evaluated by Horner's rule.

    ``weights`` has shape ``(..., N_T)`` and broadcasts against ``angles``
    (with the weight axis removed).
    """
    weights = np.asarray(weights, dtype=complex)
    # Trailing all-zero taps (e.g. a single active element) cost nothing.
    nz = np.flatnonzero(np.any(weights.reshape(-1, weights.shape[-1]) != 0, axis=0))
    weights = weights[..., : (nz[-1] + 1 if nz.size else 1)]
    z = np.exp(1j * np.pi * np.sin(angles))
    acc = np.broadcast_to(weights[..., -1], np.broadcast_shapes(weights.shape[:-1], np.shape(z))).copy()
    for k in range(weights.shape[-1] - 2, -1, -1):
        acc *= z
        acc += weights[..., k]
    return acc


def _dirichlet(x, n):
    # sum_{k<n} exp(j pi k x)
    half = 0.5 * np.pi * x
    s = np.sin(half)
    small = np.abs(s) < 1e-9
    ratio = np.where(small, n, np.sin(n * half) / np.where(small, 1.0, s))
    return np.exp(1j * (n - 1) * half) * ratio


def effective_gain_batch(gains, aoas, aods, weights, n_r: int) -> np.ndarray:
    """``|H w|^2`` over leading batch axes, without forming ``H w``.

    Shapes as in :func:`effective_channels_batch`. Uses the closed-form
    inner products of receive steering vectors, so the cost is quadratic in
    the number of paths and independent of ``n_r``.
    """
    return gain_from_coefficients(gains * array_factor(weights[..., None, :], aods), aoas, n_r)


def gain_from_coefficients(coeff, aoas, n_r: int) -> np.ndarray:
    """``|sum_q c_q conj(u(aoa_q))|^2`` for per-path coefficients ``c_q``."""
    s = np.sin(aoas)
    total = n_r * np.sum(np.abs(coeff) ** 2, axis=-1)
    q = coeff.shape[-1]
    for a in range(q):
        for b in range(a + 1, q):
            d = _dirichlet(s[..., b] - s[..., a], n_r)
            total += 2.0 * np.real(coeff[..., a] * np.conj(coeff[..., b]) * d)
    return np.maximum(total, 0.0)


def sample_path_batch(rng, law: ChannelLaw, n_trials: int, n_slots: int, dominant_aod=None, pathloss=None):
    """Vectorized :func:`sample_channel_window` for many independent trials.

    ``dominant_aod`` and ``pathloss`` optionally give per-trial values that
    override the law (a UE direction and the pathloss seen there).

    Returns
    -------
    gains, aoas, aods : arrays of shape ``(n_trials, n_slots, Q)``
        The dominant path is entry 0 and is identical across slots.
    """
    n, slots, q = int(n_trials), int(n_slots), law.q_paths
    alpha = np.full(n, law.pathloss) if pathloss is None else np.broadcast_to(np.asarray(pathloss, float), (n,))
    if np.any(alpha <= 0):
        raise DomainError("pathloss must be positive")
    ratio = law.dominant_power * law.pathloss
    phase = rng.uniform(0.0, 2.0 * np.pi, n)
    aoa0 = np.full(n, law.dominant_aoa) if law.dominant_aoa is not None else rng.uniform(*law.aoa_range, n)
    if dominant_aod is not None:
        aod0 = np.broadcast_to(_check_angles(dominant_aod), (n,))
    elif law.dominant_aod is not None:
        aod0 = np.full(n, law.dominant_aod)
    else:
        aod0 = rng.uniform(*law.aod_range, n)

    gains = np.empty((n, slots, q), dtype=complex)
    aoas = np.empty((n, slots, q))
    aods = np.empty((n, slots, q))
    gains[:, :, 0] = (np.sqrt(ratio / alpha) * np.exp(1j * phase))[:, None]
    aoas[:, :, 0] = aoa0[:, None]
    aods[:, :, 0] = aod0[:, None]
    if q > 1:
        depth = slots if law.scatter_per_slot else 1
        shape = (n, depth, q - 1)
        per_path = law.scatter_power * law.pathloss / alpha
        g = rng.standard_normal(shape + (2,)).view(complex)[..., 0]
        gains[:, :, 1:] = np.sqrt(per_path / 2.0)[:, None, None] * g
        aoas[:, :, 1:] = rng.uniform(*law.aoa_range, shape)
        aods[:, :, 1:] = rng.uniform(*law.aod_range, shape)
    return gains, aoas, aods
