import json
import math
from dataclasses import replace

import numpy as np
import pytest

from mmwdisc import beams as bm
from mmwdisc import cli
from mmwdisc.errors import ConfigError, DomainError, NumericalError
from mmwdisc.glrt import sweep_statistics, threshold_for_pfa
from mmwdisc.signal_model import FrameConfig, complex_noise, generate_rs
from mmwdisc.sim import (
    CSV_COLUMNS,
    ENGINES,
    ChannelSpec,
    CodebookSpec,
    DetectorSpec,
    ResultRow,
    Scenario,
    build_codebook,
    crossing,
    emit_results,
    load_scenario,
    parse_results,
    run_fa_calibration,
    run_miss_sweep,
    scenario_from_dict,
    scenario_to_dict,
    wilson_interval,
)

DESK_FRAME = FrameConfig(t_slot=2e-5, t_rs=8e-7)


@pytest.fixture
def small():
    return Scenario(
        scenario_id="small", frame=DESK_FRAME, n_t=8, n_r=2, detector=DetectorSpec(1e-3, (1, 2, 4, 8)),
        snr_db=(-5.0,), trials=2000, quantile_trials=20_000, block_size=500,
    )


class TestConfig:
    def test_roundtrip(self, small):
        assert scenario_from_dict(scenario_to_dict(small)) == small

    @pytest.mark.parametrize("patch", [
        {"bogus": 1},
        {"engine": "exact"},
        {"detector": {"L": []}},
        {"detector": {"p_fa": 1.5}},
        {"detector": {"mode": "sweep"}},
        {"codebook": {"method": "SM"}},
        {"codebook": {"method": "file"}},
        {"codebook": {"method": "VM", "M": 4, "j_total": 3}},
        {"codebook": {"method": "VM", "beta": 0.001}},
        {"channel": {"Q": 2, "extra": 0}},
        {"frame": {"t_slot": 1e-3, "t_rs": 2e-3}},
        {"sector_deg": [10, -10]},
        {"sigma2": 0.0},
        {"trials": 0},
        {"topology": "tunnel"},
    ])
    def test_rejected(self, patch):
        with pytest.raises(ConfigError):
            sc = scenario_from_dict({"scenario_id": "x", **patch})
            build_codebook(sc)
            run_miss_sweep(replace(sc, trials=1, quantile_trials=0))

    def test_infeasible_codebook_before_trials(self, small):
        sc = replace(small, codebook=CodebookSpec(method="file", path="/nonexistent/cb.json"))
        with pytest.raises((ConfigError, OSError)):
            run_miss_sweep(sc)

    def test_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scenario(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigError):
            load_scenario(bad)
        ids = {"omni_fading": "omni_fading", "open_sector": "open_vm1", "half_blocked": "half_blocked_vm2",
               "fa_desk": "fa_desk"}
        for name, sid in ids.items():
            assert load_scenario(f"scenarios/{name}.json").scenario_id == sid

    def test_conditions(self):
        assert Scenario(snr_db=(-23.0, None)).conditions() == ["snr=-23.00dB", "budget"]


class TestSweep:
    def test_rows(self, small):
        rows = run_miss_sweep(small)
        assert [r.L for r in rows] == [1, 2, 4, 8]
        for r in rows:
            assert r.ci_lo <= r.p_miss <= r.ci_hi
            assert 0 < r.ldp_approx <= 1
            assert r.trials == 2000 and r.seed == small.master_seed
        assert rows[-1].p_miss < rows[0].p_miss

    def test_engines_agree(self, small):
        res = {e: run_miss_sweep(replace(small, engine=e, quantile_trials=0)) for e in ENGINES}
        for k in range(4):
            ref = res["conditional"][k]
            for e in ("sufficient", "full"):
                r = res[e][k]
                se = math.sqrt(max(ref.p_miss * (1 - ref.p_miss), 1e-4) / r.trials)
                assert abs(r.p_miss - ref.p_miss) <= 4 * se

    @pytest.mark.parametrize("engine", ENGINES)
    def test_noiseless_limit(self, small, engine):
        rows = run_miss_sweep(replace(small, engine=engine, snr_db=(200.0,), trials=200, quantile_trials=0))
        assert all(r.p_miss == 0.0 for r in rows)

    def test_sweep_mode(self, small):
        sc = replace(small, engine="full", detector=DetectorSpec(1e-3, (2, 4), "sweep"), trials=100, quantile_trials=0)
        loud = run_miss_sweep(replace(sc, snr_db=(20.0,)))
        assert all(r.p_miss == 0.0 for r in loud)
        quiet = run_miss_sweep(replace(sc, snr_db=(-20.0,)))
        assert all(r.p_miss > 0.5 for r in quiet)

    def test_bound_dominance(self, small):
        sc = replace(small, snr_db=(-8.0, -2.0), detector=DetectorSpec(1e-3, (1, 2, 4, 8, 16)), trials=4000)
        for engine in ("conditional", "sufficient"):
            for r in run_miss_sweep(replace(sc, engine=engine)):
                assert r.lemma1_bound >= r.p_miss - 3 * (r.ci_hi - r.ci_lo) / 2

    def test_codebooks_run(self, small):
        for spec in (CodebookSpec("random"), CodebookSpec("random", beta=0.25), CodebookSpec("CM", 2, j_total=4)):
            rows = run_miss_sweep(replace(small, codebook=spec, trials=500, quantile_trials=0))
            assert len(rows) == 4
        table = {"angles_deg": [-30, 0, 30], "alpha": [0.5, 1.0, 2.0]}
        rows = run_miss_sweep(replace(small, topology=table, trials=500, quantile_trials=0))
        assert len(rows) == 4

    def test_codebook_argument(self, small):
        cb = bm.omni_codebook(4)
        with pytest.raises(ConfigError):
            run_miss_sweep(small, codebook=cb)

    def test_budget_condition(self):
        sc = Scenario(n_t=8, n_r=2, frame=DESK_FRAME, snr_db=(None,), trials=100, quantile_trials=0,
                      detector=DetectorSpec(1e-3, (4,)))
        assert run_miss_sweep(sc)[0].condition == "budget"


class TestReproducibility:
    def test_same_seed_same_bytes(self, small):
        a = emit_results(run_miss_sweep(small), "csv")
        b = emit_results(run_miss_sweep(small), "csv")
        assert a == b
        c = emit_results(run_miss_sweep(replace(small, master_seed=2)), "csv")
        assert c != a

    def test_worker_count_irrelevant(self, small):
        sc = replace(small, engine="sufficient")
        one = emit_results(run_miss_sweep(sc, workers=1), "json")
        two = emit_results(run_miss_sweep(sc, workers=2), "json")
        assert one == two

    def test_extra_trials_append_blocks(self, small):
        # Blocks are fixed-size substreams, so doubling the trials keeps the
        # first half of the draws.
        sc = replace(small, engine="sufficient", quantile_trials=0, block_size=1000)
        a = run_miss_sweep(replace(sc, trials=1000))
        b = run_miss_sweep(replace(sc, trials=2000))
        for x, y in zip(a, b):
            extra = 2000 * y.p_miss - 1000 * x.p_miss
            assert extra == pytest.approx(round(extra), abs=1e-9) and 0 <= round(extra) <= 1000


class TestFalseAlarm:
    def test_desk_calibration(self):
        sc = load_scenario("scenarios/fa_desk.json")
        row = run_fa_calibration(sc)
        target = sc.detector.p_fa
        assert row.trials == 10_000
        assert row.p_miss <= target + 3 * math.sqrt(target * (1 - target) / row.trials)
        assert row.lemma1_bound == target

    def test_halved_slot(self):
        sc = load_scenario("scenarios/fa_desk.json")
        half = replace(sc, frame=FrameConfig(t_slot=1e-5, t_rs=8e-7))
        assert half.frame.n_slot == sc.frame.n_slot // 2
        row = run_fa_calibration(half)
        target = sc.detector.p_fa
        assert row.p_miss <= target + 3 * math.sqrt(target * (1 - target) / row.trials)

    def test_doubled_threshold(self):
        rng = np.random.default_rng(0)
        rs = generate_rs(8, seed=0)
        n_slot, L = 200, 2
        gam = threshold_for_pfa(0.05, n_slot, 2, L, 8)
        stats = sweep_statistics(complex_noise(rng, (4000, 2, (L + 1) * n_slot), 1.0), rs, n_slot, L)
        at_gam = int(np.sum(np.any(stats > gam, axis=-1)))
        at_double = int(np.sum(np.any(stats > 2 * gam, axis=-1)))
        assert at_gam > 0 and at_double < at_gam


class TestResults:
    def test_one_row_csv(self):
        row = ResultRow("s", 3, "snr=-1.00dB", 0.25, 0.2, 0.3, 0.5, 0.4, 100, 7)
        text = emit_results([row], "csv")
        lines = text.splitlines()
        assert len(lines) == 2
        assert tuple(lines[0].split(",")) == CSV_COLUMNS

    def test_roundtrip(self, small, tmp_path):
        rows = run_miss_sweep(small)
        for fmt in ("csv", "json"):
            path = tmp_path / f"out.{fmt}"
            text = emit_results(rows, fmt, path)
            assert path.read_text() == text
            assert parse_results(text, fmt) == rows
        assert json.loads(emit_results(rows, "json"))["schema_version"] == 1

    def test_errors(self, tmp_path):
        row = ResultRow("s", 1, "c", 0.5, 0.4, 0.6, 1.0, 1.0, 10, 1)
        with pytest.raises(DomainError):
            emit_results([], "csv")
        with pytest.raises(ConfigError):
            emit_results([row], "xml")
        with pytest.raises(OSError):
            emit_results([row], "csv", tmp_path / "missing" / "out.csv")
        with pytest.raises(DomainError):
            ResultRow("s", 1, "c", 0.5, 0.6, 0.7, 1.0, 1.0, 10, 1)
        with pytest.raises(ConfigError):
            parse_results("a,b\n1,2\n", "csv")

    def test_wilson(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0 < hi < 0.05
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi

    def test_crossing(self):
        rows = [ResultRow("s", L, "c", p, p, p, b, 1.0, 10, 1)
                for L, p, b in ((1, 0.5, 0.9), (2, 0.05, 0.2), (3, 0.001, 0.009))]
        assert crossing(rows, 0.01) == 3
        assert crossing(rows, 0.1) == 2
        assert crossing(rows, 0.01, "lemma1_bound") == 3
        assert crossing(rows, 1e-9) is None


class TestCli:
    def _scenario(self, tmp_path, **extra):
        d = {"scenario_id": "cli", "frame": {"t_slot": 2e-5, "t_rs": 8e-7}, "n_t": 8, "n_r": 2,
             "detector": {"L": [1, 4]}, "snr_db": [-5.0], "trials": 300, "quantile_trials": 1000, **extra}
        path = tmp_path / "sc.json"
        path.write_text(json.dumps(d))
        return path

    def test_success_and_overrides(self, tmp_path, capsys):
        path = self._scenario(tmp_path)
        out = tmp_path / "r.csv"
        assert cli.run(["--scenario", str(path), "--out", str(out), "--trials", "200", "--seed", "9"]) == 0
        rows = parse_results(out.read_text(), "csv")
        assert [r.trials for r in rows] == [200, 200] and rows[0].seed == 9
        assert cli.run(["--scenario", str(path), "--format", "json"]) == 0
        assert json.loads(capsys.readouterr().out)["schema_version"] == 1

    def test_codebook_files(self, tmp_path):
        path = self._scenario(tmp_path, codebook={"method": "CM", "M": 2, "j_total": 4})
        cb_path = tmp_path / "cb.json"
        assert cli.run(["--scenario", str(path), "--save-codebook", str(cb_path)]) == 0
        cb = bm.load_codebook(cb_path)
        assert cb.m == 2 and cb.n_t == 8
        out = tmp_path / "r.csv"
        assert cli.run(["--scenario", str(path), "--codebook", str(cb_path), "--out", str(out)]) == 0
        rnd = self._scenario(tmp_path, codebook={"method": "random"})
        assert cli.run(["--scenario", str(rnd), "--save-codebook", str(cb_path)]) == 2

    def test_fa_mode(self, tmp_path, capsys):
        path = self._scenario(tmp_path, trials=50)
        assert cli.run(["--scenario", str(path), "--mode", "fa"]) == 0
        rows = parse_results(capsys.readouterr().out, "csv")
        assert rows[0].condition == "false_alarm"

    def test_config_errors(self, tmp_path, capsys):
        assert cli.run(["--scenario", str(tmp_path / "none.json")]) == 2
        assert cli.run(["--scenario", str(self._scenario(tmp_path, bogus=1))]) == 2
        assert cli.run(["--scenario", str(self._scenario(tmp_path)), "--workers", "0"]) == 2
        assert cli.run(["--scenario", str(self._scenario(tmp_path)), "--out", str(tmp_path / "no" / "x.csv")]) == 2
        assert "error" in capsys.readouterr().err

    def test_numerical_failure(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalError("did not converge", step=1)

        monkeypatch.setattr(cli, "run_miss_sweep", boom)
        assert cli.run(["--scenario", str(self._scenario(tmp_path))]) == 3

    def test_module_entry(self, tmp_path):
        import subprocess
        import sys

        path = self._scenario(tmp_path, trials=50, quantile_trials=0)
        res = subprocess.run([sys.executable, "-m", "mmwdisc", "--scenario", str(path)], capture_output=True, text=True)
        assert res.returncode == 0
        assert res.stdout.splitlines()[0] == ",".join(CSV_COLUMNS)
