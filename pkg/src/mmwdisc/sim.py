"""Seeded Monte Carlo sweeps of the miss probability against searching time.

A scenario fixes the sector topology, arrays, codebook, detector and channel
law, plus a list of SNR conditions. For each condition and each ``L`` the
runner reports the estimated miss probability with a 95% interval, the
fading-aware upper bound and the large-deviations approximation.

Three engines share identical channel draws:

``conditional``
    Averages the exact conditional miss probability given the channel. This
    is the Rao-Blackwellized estimator and resolves very small
    probabilities.
``sufficient``
    Draws the two per-slot energies the statistic depends on from their
    exact conditional laws and counts misses.
``full``
    Builds every received block and runs the detector on it.

Randomness is split into fixed-size blocks of trials; block ``b`` of
condition ``c`` always uses the substream ``SeedSequence(master_seed,
spawn_key=(c, kind, b))``, so results do not depend on the number of
workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import beams as bm
from .errors import ConfigError, DomainError
from .glrt import slot_energies, sweep_statistics, threshold_for_pfa
from .ldp import rate_value
from .ncf import FadingLink, default_xi_grid, empirical_quantiles, fading_upper_bound, miss_prob
from .signal_model import (
    ChannelLaw,
    FrameConfig,
    array_factor,
    gain_from_coefficients,
    generate_rs,
    sample_path_batch,
)

RESULT_SCHEMA_VERSION = 1
CSV_COLUMNS = ("scenario_id", "L", "condition", "p_miss", "ci_lo", "ci_hi", "lemma1_bound", "ldp_approx", "trials", "seed")
ENGINES = ("conditional", "sufficient", "full")
_TRIALS, _QUANTILE = 0, 1


# ---------------------------------------------------------------------------
# configuration


def _reject_unknown(d: dict, allowed, where: str):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")


@dataclass(frozen=True)
class CodebookSpec:
    method: str = "omni"
    M: int = 1
    beta: float = 1.0
    j_total: int = 12
    allocation: str = "optimized"
    path: str | None = None
    seed: int = 0

    def __post_init__(self):
        m = self.method.lower() if self.method.lower() in ("omni", "random", "file") else self.method.upper()
        object.__setattr__(self, "method", m)
        if m not in ("omni", "random", "file", "CM", "VM"):
            raise ConfigError(f"unknown codebook method {self.method!r}")
        if m == "file" and not self.path:
            raise ConfigError("codebook method 'file' needs a path")
        if self.M < 1 or self.j_total < self.M:
            raise ConfigError(f"need 1 <= M <= j_total, got M={self.M}, j_total={self.j_total}")
        if self.allocation not in ("optimized", "equal"):
            raise ConfigError(f"unknown allocation {self.allocation!r}")


@dataclass(frozen=True)
class DetectorSpec:
    p_fa: float = 1e-3
    L: tuple[int, ...] = (10,)
    mode: str = "lag"

    def __post_init__(self):
        ls = tuple(int(v) for v in self.L)
        if not ls or min(ls) < 1:
            raise ConfigError("detector.L must be a nonempty list of positive integers")
        object.__setattr__(self, "L", tuple(sorted(set(ls))))
        if not 0 < self.p_fa < 1:
            raise ConfigError("p_fa must lie in (0, 1)")
        if self.mode not in ("lag", "sweep"):
            raise ConfigError(f"unknown detector mode {self.mode!r}")


@dataclass(frozen=True)
class ChannelSpec:
    Q: int = 6
    dominant_ratio_db: float = 13.2
    dominant_aoa_deg: float | None = 0.0
    aoa_range_deg: tuple[float, float] = (-90.0, 90.0)

    def __post_init__(self):
        rng = tuple(float(v) for v in self.aoa_range_deg)
        if len(rng) != 2 or not -90.0 <= rng[0] < rng[1] <= 90.0:
            raise ConfigError(f"bad aoa_range_deg {self.aoa_range_deg}")
        object.__setattr__(self, "aoa_range_deg", rng)
        if self.Q < 1:
            raise ConfigError("Q must be >= 1")

    def law(self, sector) -> ChannelLaw:
        return ChannelLaw(
            q_paths=self.Q,
            dominant_ratio_db=self.dominant_ratio_db,
            dominant_aoa=None if self.dominant_aoa_deg is None else math.radians(self.dominant_aoa_deg),
            aod_range=tuple(sector),
            aoa_range=tuple(math.radians(v) for v in self.aoa_range_deg),
        )


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one experiment.

    ``snr_db`` lists the conditions: each value sets ``P_T / (sigma^2
    alpha)`` for the unblocked directions; ``null`` derives the pathloss
    from ``link`` and the rate target instead.
    """

    scenario_id: str = "scenario"
    topology: str | dict = "open"
    sector_deg: tuple[float, float] = (-30.0, 30.0)
    frame: FrameConfig = field(default_factory=FrameConfig)
    n_t: int = 32
    n_r: int = 16
    codebook: CodebookSpec = field(default_factory=CodebookSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    snr_db: tuple[float | None, ...] = (None,)
    rate_target: float = 10e6
    link: bm.LinkBudget = field(default_factory=bm.LinkBudget)
    sigma2: float = 1.0
    engine: str = "conditional"
    trials: int = 20_000
    master_seed: int = 1
    quantile_trials: int = 100_000
    block_size: int = 1000

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.detector.mode == "sweep" and self.engine != "full":
            raise ConfigError("sweep detection needs the 'full' engine")
        if self.trials < 1 or self.block_size < 1:
            raise ConfigError("trials and block_size must be positive")
        if self.quantile_trials < 0:
            raise ConfigError("quantile_trials must be >= 0")
        if self.n_t < 1 or self.n_r < 1:
            raise ConfigError("array sizes must be positive")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        if not self.snr_db:
            raise ConfigError("snr_db must list at least one condition")
        lo, hi = self.sector_deg
        if not -90.0 <= lo < hi <= 90.0:
            raise ConfigError(f"bad sector {self.sector_deg}")
        if self.codebook.method != "omni" and not 1.0 / self.n_t - 1e-15 <= self.codebook.beta <= 1.0:
            raise ConfigError(f"beta must lie in [1/N_T, 1], got {self.codebook.beta}")

    @property
    def sector(self) -> tuple[float, float]:
        return (math.radians(self.sector_deg[0]), math.radians(self.sector_deg[1]))

    def conditions(self) -> list[str]:
        return ["budget" if s is None else f"snr={s:+.2f}dB" for s in self.snr_db]


def _build(cls, d, where):
    if isinstance(d, cls):
        return d
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    _reject_unknown(d, [f.name for f in fields(cls)], where)
    try:
        return cls(**d)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a JSON object")
    d = dict(d)
    _reject_unknown(d, [f.name for f in fields(Scenario)], "scenario")
    sub = {
        "frame": FrameConfig, "codebook": CodebookSpec, "detector": DetectorSpec,
        "channel": ChannelSpec, "link": bm.LinkBudget,
    }
    for key, cls in sub.items():
        if key in d:
            d[key] = _build(cls, d[key], key)
    for key in ("sector_deg", "snr_db"):
        if key in d:
            if not isinstance(d[key], (list, tuple)):
                d[key] = [d[key]]
            d[key] = tuple(d[key])
    try:
        return Scenario(**d)
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc


def scenario_to_dict(sc: Scenario) -> dict:
    return json.loads(json.dumps(asdict(sc)))


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# scenario pieces


def pathloss_shape(sc: Scenario) -> bm.PathlossProfile:
    """Pathloss profile over the sector, normalized to 1 in open directions."""
    topo = sc.topology
    if topo == "open":
        return bm.PathlossProfile.uniform(1.0, sc.sector)
    if topo == "half-blocked":
        return bm.PathlossProfile.half_blocked(1.0, sc.sector, split=0.5 * sum(sc.sector))
    if isinstance(topo, dict):
        _reject_unknown(topo, ["angles_deg", "alpha"], "topology")
        try:
            return bm.PathlossProfile.from_table(topo["angles_deg"], topo["alpha"], sc.sector)
        except (KeyError, DomainError) as exc:
            raise ConfigError(f"bad alpha table: {exc}") from exc
    raise ConfigError(f"unknown topology {topo!r}")


def reference_pathloss(sc: Scenario, snr_db: float | None) -> float:
    """Pathloss ``alpha`` of the unblocked directions for one condition."""
    p_t = sc.link.p_t
    if snr_db is None:
        link = replace(sc.link, sigma2=sc.sigma2, g_t_max=float(sc.n_t), g_r_max=float(sc.n_r))
        return bm.pathloss_from_rate(lambda a: sc.rate_target, link, sc.sector)(0.5 * sum(sc.sector))
    return p_t / (sc.sigma2 * 10.0 ** (snr_db / 10.0))


def build_codebook(sc: Scenario, codebook: bm.Codebook | None = None) -> bm.Codebook | None:
    """Codebook used by every trial; ``None`` for a fresh random beam per slot."""
    spec = sc.codebook
    if codebook is None:
        if spec.method == "omni":
            return bm.omni_codebook(sc.n_t, spec.j_total)
        if spec.method == "random":
            return None
        if spec.method == "file":
            codebook = bm.load_codebook(spec.path)
        else:
            codebook, _ = bm.design_codebook(
                pathloss_shape(sc), spec.method, spec.M, sc.n_t, spec.j_total,
                seed=spec.seed, allocation=spec.allocation,
            )
    if codebook.n_t != sc.n_t:
        raise ConfigError(f"codebook has N_T={codebook.n_t}, scenario has {sc.n_t}")
    if spec.beta < 1.0:
        codebook = codebook.with_power_constraint(spec.beta)
    return codebook


# ---------------------------------------------------------------------------
# per-block simulation


@dataclass(frozen=True)
class _Task:
    sc: Scenario
    codebook: bm.Codebook | None
    cond: int
    alpha_ref: float
    kind: int
    block: int
    n: int


def _rng(sc: Scenario, cond: int, kind: int, block: int):
    return np.random.default_rng(np.random.SeedSequence(sc.master_seed, spawn_key=(cond, kind, block)))


def _draw_paths(rng, sc: Scenario, codebook, alpha_ref: float, n: int, l_max: int):
    """Channel paths and per-slot radiated weights for ``n`` trials."""
    profile = pathloss_shape(sc)
    lo, hi = sc.sector
    direction = rng.uniform(lo, hi, n)
    alpha = alpha_ref * np.asarray(profile(direction), dtype=float)
    law = sc.channel.law(sc.sector)
    g, aoa, aod = sample_path_batch(rng, law, n, l_max, dominant_aod=direction, pathloss=alpha)

    if codebook is None:
        w = bm.random_beams(rng, sc.n_t, (n, l_max))
        if sc.codebook.beta < 1.0:
            peak = np.max(np.abs(w) ** 2, axis=-1, keepdims=True)
            w = w * np.sqrt(np.minimum(1.0, sc.codebook.beta / peak))
        coeff = g * array_factor(w[..., None, :], aod)
    else:
        sched = codebook.schedule()
        offset = rng.integers(0, codebook.period, n)
        beam = sched[(offset[:, None] + np.arange(l_max)) % codebook.period]
        coeff = np.empty_like(g)
        for m, wm in enumerate(codebook.weights):
            sel = beam == m
            if sel.any():
                coeff[sel] = g[sel] * array_factor(wm, aod[sel])
    return coeff, aoa


def _slot_gains(task: _Task, rng, l_max: int):
    coeff, aoa = _draw_paths(rng, task.sc, task.codebook, task.alpha_ref, task.n, l_max)
    return gain_from_coefficients(coeff, aoa, task.sc.n_r), coeff, aoa


def _thresholds(sc: Scenario):
    return {L: threshold_for_pfa(sc.detector.p_fa, sc.frame.n_slot, sc.n_r, L, sc.frame.n_s) for L in sc.detector.L}


def _run_trials(task: _Task):
    """Per-``L`` sums over one block: (sum_p, sum_p2, sum_ldp)."""
    sc = task.sc
    rng = _rng(sc, task.cond, _TRIALS, task.block)
    ls = sc.detector.L
    l_max = max(ls)
    n_s, n_r = sc.frame.n_s, sc.n_r
    p_t = sc.link.p_t
    gam = _thresholds(sc)
    gains, coeff, aoa = _slot_gains(task, rng, l_max)
    energy = np.cumsum(gains, axis=1)
    lam_all = 2.0 * p_t * n_s * energy / sc.sigma2

    if sc.engine == "conditional":
        p = {L: miss_prob(gam[L], n_r, L, n_s, lam_all[:, L - 1]) for L in ls}
    elif sc.engine == "sufficient":
        sig = math.sqrt(sc.sigma2 / 2.0)
        first = np.sqrt(p_t * n_s * gains) + sig * (rng.standard_normal((task.n, l_max)) + 1j * rng.standard_normal((task.n, l_max)))
        u = np.abs(first) ** 2
        if n_r > 1:
            u += 0.5 * sc.sigma2 * rng.chisquare(2 * (n_r - 1), (task.n, l_max))
        v = 0.5 * sc.sigma2 * rng.chisquare(2 * n_r * (n_s - 1), (task.n, l_max))
        cu, cv = np.cumsum(u, axis=1), np.cumsum(v, axis=1)
        p = {L: (cu[:, L - 1] <= gam[L] * cv[:, L - 1]).astype(float) for L in ls}
    else:
        p = _full_engine(task, rng, coeff, aoa, gam)

    out = []
    for L in ls:
        eta = lam_all[:, L - 1] / L
        ldp = np.exp(-L * rate_value(eta, gam[L], n_r, n_s))
        out.append((float(np.sum(p[L])), float(np.sum(p[L] ** 2)), float(np.sum(ldp))))
    return out


def _full_engine(task: _Task, rng, coeff, aoa, gam):
    sc = task.sc
    n_s, n_r, l_max = sc.frame.n_s, sc.n_r, max(sc.detector.L)
    rs = generate_rs(n_s, sc.link.p_t, seed=sc.master_seed)
    # H w for every slot, from the per-path coefficients.
    u_conj = np.exp(-1j * np.pi * np.sin(aoa)[..., None] * np.arange(n_r))
    h = np.einsum("...q,...qr->...r", coeff, u_conj)
    sig = math.sqrt(sc.sigma2 / 2.0)
    if sc.detector.mode == "lag":
        p = {L: np.empty(task.n) for L in sc.detector.L}
        for i in range(task.n):
            noise = sig * (rng.standard_normal((l_max, n_r, n_s)) + 1j * rng.standard_normal((l_max, n_r, n_s)))
            y = h[i][:, :, None] * rs.samples[None, None, :] + noise
            u, v = slot_energies(y, rs)
            cu, cv = np.cumsum(u), np.cumsum(v)
            for L in sc.detector.L:
                p[L][i] = float(cu[L - 1] <= gam[L] * cv[L - 1])
        return p

    # Full-sweep acquisition: a trial succeeds only if the true lag has the
    # largest statistic and that statistic clears the threshold.
    n_slot = sc.frame.n_slot
    p = {L: np.empty(task.n) for L in sc.detector.L}
    total = (l_max + 1) * n_slot
    for i in range(task.n):
        tau0 = int(rng.integers(0, n_slot))
        y = sig * (rng.standard_normal((n_r, total)) + 1j * rng.standard_normal((n_r, total)))
        for l in range(l_max):
            start = tau0 + l * n_slot
            y[:, start:start + n_s] += np.outer(h[i, l], rs.samples)
        for L in sc.detector.L:
            stat = sweep_statistics(y, rs, n_slot, L)
            ok = stat[tau0] > gam[L] and int(np.argmax(stat)) == tau0
            p[L][i] = 0.0 if ok else 1.0
    return p


def _run_quantile(task: _Task):
    rng = _rng(task.sc, task.cond, _QUANTILE, task.block)
    gains, _, _ = _slot_gains(task, rng, max(task.sc.detector.L))
    return np.cumsum(gains, axis=1)


def _blocks(total: int, size: int):
    return [(b, min(size, total - b * size)) for b in range(math.ceil(total / size))]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    L: int
    condition: str
    p_miss: float
    ci_lo: float
    ci_hi: float
    lemma1_bound: float
    ldp_approx: float
    trials: int
    seed: int

    def __post_init__(self):
        for name in ("p_miss", "ci_lo", "ci_hi", "lemma1_bound", "ldp_approx"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("L", "trials", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if not 0.0 <= self.p_miss <= 1.0:
            raise DomainError(f"p_miss out of range: {self.p_miss}")
        if not self.ci_lo <= self.p_miss <= self.ci_hi:
            raise DomainError("confidence interval does not bracket the estimate")


def wilson_interval(k: float, n: int, z: float = 1.959963984540054):
    """Wilson score interval for ``k`` successes out of ``n``."""
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return min(max(centre - half, 0.0), p), max(min(centre + half, 1.0), p)


def _interval(sc: Scenario, s1: float, s2: float, n: int):
    mean = s1 / n
    if sc.engine == "conditional":
        var = max(s2 / n - mean * mean, 0.0)
        half = 1.959963984540054 * math.sqrt(var / max(n - 1, 1))
        return min(max(mean - half, 0.0), mean), max(min(mean + half, 1.0), mean)
    return wilson_interval(s1, n)


def lemma1_bounds(sc: Scenario, energy_prefix: np.ndarray) -> dict:
    """Fading-aware bound per ``L`` from sampled cumulative channel energies."""
    xi = default_xi_grid()
    out = {}
    gam = _thresholds(sc)
    for L in sc.detector.L:
        table = empirical_quantiles(energy_prefix[:, L - 1] / L, xi)
        link = FadingLink(sc.link.p_t, sc.frame.n_s, sc.sigma2, sc.n_r, L, gam[L])
        out[L] = fading_upper_bound(xi, table, link)[0]
    return out


def run_miss_sweep(sc: Scenario, workers: int = 1, codebook: bm.Codebook | None = None) -> list[ResultRow]:
    """Miss probability versus ``L`` for every SNR condition of ``sc``.

    Rows are sorted by ``(L, condition)``. The result depends only on the
    scenario (and codebook), never on ``workers``.
    """
    cb = build_codebook(sc, codebook)
    rows = []
    for ci, (snr, label) in enumerate(zip(sc.snr_db, sc.conditions())):
        alpha_ref = reference_pathloss(sc, snr)
        tasks = [_Task(sc, cb, ci, alpha_ref, _TRIALS, b, n) for b, n in _blocks(sc.trials, sc.block_size)]
        sums = np.sum(np.array(_map(_run_trials, tasks, workers)), axis=0)
        if sc.quantile_trials:
            qt = [_Task(sc, cb, ci, alpha_ref, _QUANTILE, b, n) for b, n in _blocks(sc.quantile_trials, sc.block_size)]
            bound = lemma1_bounds(sc, np.concatenate(_map(_run_quantile, qt, workers)))
        else:
            bound = {L: float("nan") for L in sc.detector.L}
        for k, L in enumerate(sc.detector.L):
            s1, s2, sl = sums[k]
            lo, hi = _interval(sc, s1, s2, sc.trials)
            rows.append(ResultRow(sc.scenario_id, L, label, min(max(s1 / sc.trials, 0.0), 1.0), lo, hi,
                                  float(bound[L]), sl / sc.trials, sc.trials, sc.master_seed))
    rows.sort(key=lambda r: (r.L, r.condition))
    return rows


def run_fa_calibration(sc: Scenario, sweeps: int | None = None, workers: int = 1) -> ResultRow:
    """Empirical full-sweep false-alarm rate under noise only.

    Each sweep tests every lag in ``[0, N_slot)`` at the smallest ``L`` of
    the scenario; a false alarm is any lag above the threshold. The row's
    ``p_miss`` column carries the false-alarm rate and ``lemma1_bound`` the
    target ``P_FA``.
    """
    n = sc.trials if sweeps is None else int(sweeps)
    L = sc.detector.L[0]
    tasks = [(sc, b, m, L) for b, m in _blocks(n, sc.block_size)]
    hits = sum(_map(_fa_block, tasks, workers))
    lo, hi = wilson_interval(hits, n)
    return ResultRow(sc.scenario_id, L, "false_alarm", hits / n, lo, hi, sc.detector.p_fa, float("nan"), n, sc.master_seed)


def _fa_block(args):
    sc, block, n, L = args
    rng = _rng(sc, 0, 2, block)
    rs = generate_rs(sc.frame.n_s, sc.link.p_t, seed=sc.master_seed)
    gam = threshold_for_pfa(sc.detector.p_fa, sc.frame.n_slot, sc.n_r, L, sc.frame.n_s)
    total = (L + 1) * sc.frame.n_slot
    sig = math.sqrt(sc.sigma2 / 2.0)
    hits = 0
    for _ in range(n):
        y = sig * (rng.standard_normal((sc.n_r, total)) + 1j * rng.standard_normal((sc.n_r, total)))
        hits += int(np.any(sweep_statistics(y, rs, sc.frame.n_slot, L) > gam))
    return hits


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(rows, fmt: str, path=None) -> str:
    """Serialize rows as CSV or JSON; write to ``path`` when given.

    Floats are written with ``repr`` so the text round-trips exactly and is
    byte-identical for identical inputs.
    """
    rows = list(rows)
    if not rows:
        raise DomainError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in rows:
            wr.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
    elif fmt == "json":
        payload = {"schema_version": RESULT_SCHEMA_VERSION,
                   "rows": [{c: getattr(r, c) for c in CSV_COLUMNS} for r in rows]}
        text = json.dumps(payload, indent=1, allow_nan=True) + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_results(text: str, fmt: str) -> list[ResultRow]:
    if fmt == "json":
        data = json.loads(text)
        if data.get("schema_version") != RESULT_SCHEMA_VERSION:
            raise ConfigError("unsupported result schema version")
        return [ResultRow(**r) for r in data["rows"]]
    if fmt != "csv":
        raise ConfigError(f"unknown output format {fmt!r}")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
    conv = {"L": int, "trials": int, "seed": int, "scenario_id": str, "condition": str}
    return [ResultRow(**{k: conv.get(k, float)(v) for k, v in r.items()}) for r in reader]


def crossing(rows, level: float, column: str = "p_miss", condition: str | None = None):
    """Smallest ``L`` whose ``column`` value is at or below ``level`` (None if never)."""
    for r in sorted(rows, key=lambda r: r.L):
        if condition is not None and r.condition != condition:
            continue
        if getattr(r, column) <= level:
            return r.L
    return None
