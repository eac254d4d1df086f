import os

import pytest

from hypfrac import cli


BASE_CONFIG = """
[model]
n = 3
sigma = 0.5
lambda = 1.0
beta = 1.0
gamma = 1.5

[grids]
r_max = 18.0
xi_max = 16.0
order = 10

[experiment]
functions = gaussian,zero
"""


def write_config(tmp_path, text=BASE_CONFIG, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestExitCodes:
    def test_unknown_flag_exits_two(self, tmp_path):
        cfg = write_config(tmp_path)
        with pytest.raises(SystemExit) as exc:
            cli.main(["transform", "--config", cfg, "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_config_is_config_error(self, tmp_path):
        rc = cli.main(["transform", "--config", str(tmp_path / "nope.cfg"),
                       "--out", str(tmp_path)])
        assert rc == cli.EXIT_CONFIG

    def test_unparsable_value_is_config_error(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace(
            "sigma = 0.5", "sigma = half"))
        rc = cli.main(["transform", "--config", cfg, "--out", str(tmp_path)])
        assert rc == cli.EXIT_CONFIG

    def test_out_of_range_parameter(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace(
            "lambda = 1.0", "lambda = 3.0"))
        rc = cli.main(["transform", "--config", cfg, "--out", str(tmp_path)])
        assert rc == cli.EXIT_RANGE

    def test_groundstate_refuses_critical_endpoint(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace(
            "gamma = 1.5", "gamma = 2.0"))
        rc = cli.main(["groundstate", "--config", cfg, "--out", str(tmp_path)])
        assert rc == cli.EXIT_RANGE

    def test_missing_cache(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG + "require_cache = yes\n")
        empty = tmp_path / "cache"
        empty.mkdir()
        rc = cli.main(["transform", "--config", cfg, "--out", str(tmp_path),
                       "--cache", str(empty)])
        assert rc == cli.EXIT_CACHE


class TestTransformCommand:
    def test_runs_and_reports(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        rc = cli.main(["transform", "--config", cfg, "--out", str(out)])
        assert rc == 0
        lines = (out / "transform.csv").read_text().splitlines()
        assert lines[0].startswith("# hypfrac v")
        assert any("config-sha256" in s for s in lines[:4])
        assert any("seed: 0" in s for s in lines[:4])
        header = lines[4].split(",")
        assert header == ["fn", "realL2", "spectralL2", "relError", "roundTrip"]
        rows = {s.split(",")[0]: s.split(",") for s in lines[5:]}
        assert float(rows["gaussian"][3]) < 1e-6
        assert float(rows["zero"][3]) == 0.0

    def test_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["transform", "--config", cfg, "--out", str(out1),
                         "--seed", "7"]) == 0
        assert cli.main(["transform", "--config", cfg, "--out", str(out2),
                         "--seed", "7"]) == 0
        a = (out1 / "transform.csv").read_bytes()
        b = (out2 / "transform.csv").read_bytes()
        assert a == b

    def test_cache_roundtrip(self, tmp_path):
        cfg = write_config(tmp_path)
        cache = tmp_path / "cache"
        out = tmp_path / "out"
        assert cli.main(["transform", "--config", cfg, "--out", str(out),
                         "--cache", str(cache)]) == 0
        assert os.listdir(cache)
        import hypfrac.spectral as sp
        sp._TABLE_CACHE.clear()
        assert cli.main(["transform", "--config", cfg, "--out", str(out),
                         "--cache", str(cache)]) == 0


class TestPoincareCommand:
    def test_runs_and_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace(
            "functions = gaussian,zero", "q_list = 2.4,2.8"))
        out1, out2 = tmp_path / "p1", tmp_path / "p2"
        assert cli.main(["poincare", "--config", cfg, "--out", str(out1),
                         "--seed", "3"]) == 0
        assert cli.main(["poincare", "--config", cfg, "--out", str(out2),
                         "--seed", "3"]) == 0
        assert (out1 / "quotients.csv").read_bytes() == \
            (out2 / "quotients.csv").read_bytes()
        minima = (out1 / "quotient_minima.csv").read_text().splitlines()
        for row in minima[5:]:
            assert float(row.split(",")[1]) > 0


class TestFujitaCommand:
    def test_single_trace(self, tmp_path):
        text = BASE_CONFIG.replace("functions = gaussian,zero",
                                   "kind = single\nhorizon = 1.0\n"
                                   "amplitude = 0.0")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "fj"
        assert cli.main(["fujita", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "trace.jsonl").exists()
