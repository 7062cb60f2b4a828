import numpy as np
import pytest

from homsim.cli import main

CHEAP = """
[scenario]
label = custom
pulses = 1e10

[pump]
shape = cw_carved_rect
center_nm = 1310
duration_ps = 100
rise_time_ps = 30
energy_pj = 40

[source]
detuning_thz = 1.2
length_m = 1000
temperature_k = 77
pair_probability = 0.10

[filters]
signal_shape = rectangular
signal_bandwidth_ghz = 24.6
idler_shape = rectangular
idler_bandwidth_ghz = 24.6
grid_points = 121

[detectors]
signal_transmission = 0.034
idler_transmission = 0.050
quantum_efficiency = 0.20
dark_count_probability = 1.6e-4

[scan]
points = 9
"""


class TestModesCommand:
    def test_table_near_c38(self, capsys):
        assert main(["modes", "--c-range", "3.8:3.8:1.0"]) == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0].startswith("c,")
        c, x0, x1, x2 = (float(v) for v in lines[1].split(","))
        assert c == pytest.approx(3.8)
        assert x0 > 0.97 and abs(x1 - 0.9) < 0.05 and abs(x2 - 0.5) < 0.08

    def test_eigenmode_samples(self, capsys):
        assert main(["modes", "--c-range", "0.7:0.7:1.0", "--eigenmodes", "0.785"]) == 0
        out = capsys.readouterr().out
        assert "eigenmodes at c" in out

    def test_bad_range(self, capsys):
        assert main(["modes", "--c-range", "5:1:0.1"]) == 2


class TestScanFit:
    def test_scan_then_fit(self, tmp_path, capsys):
        cfg = tmp_path / "scenario.ini"
        cfg.write_text(CHEAP)
        out_csv = tmp_path / "scan.csv"
        assert main(["scan", "--config", str(cfg), "--output", str(out_csv)]) == 0
        text = out_csv.read_text()
        assert text.splitlines()[0].startswith("tau_ps")
        fit_out = tmp_path / "fit.txt"
        assert main(["fit", "--input", str(out_csv), "--output", str(fit_out)]) == 0
        body = fit_out.read_text()
        assert "V = " in body and "sigma_ps" in body
        vis = float(body.splitlines()[0].split("=")[1])
        assert 0.0 < vis < 1.0

    def test_identical_invocations_identical_files(self, tmp_path):
        cfg = tmp_path / "scenario.ini"
        cfg.write_text(CHEAP)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["scan", "--config", str(cfg), "--output", str(a)]) == 0
        assert main(["scan", "--config", str(cfg), "--output", str(b)]) == 0
        assert a.read_text() == b.read_text()

    def test_overrides(self, tmp_path):
        cfg = tmp_path / "scenario.ini"
        cfg.write_text(CHEAP)
        out_csv = tmp_path / "scan.csv"
        assert main(["scan", "--config", str(cfg), "--set", "scan.points=5",
                     "--output", str(out_csv)]) == 0
        assert len(out_csv.read_text().strip().splitlines()) == 6

    def test_missing_config_file(self, capsys):
        assert main(["scan", "--config", "/does/not/exist.ini"]) == 4

    def test_config_missing_fields(self, tmp_path, capsys):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[scenario]\nlabel = x\n")
        assert main(["scan", "--config", str(cfg)]) == 2
        assert "missing required fields" in capsys.readouterr().err

    def test_fit_empty_csv(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["fit", "--input", str(empty)]) == 2

    def test_calibrate(self, tmp_path, capsys):
        cfg = tmp_path / "scenario.ini"
        cfg.write_text(CHEAP)
        assert main(["calibrate", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "gammaL_per_W" in out
        pair = float(out.splitlines()[1].split("=")[1])
        assert pair == pytest.approx(0.10, rel=1e-4)


class TestOracleCheck:
    def test_small_sweep(self, capsys):
        assert main(["oracle-check", "--states", "6", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "max_deviation" in out
        worst = float(out.strip().splitlines()[-1].split("=")[1])
        assert worst < 1e-6
