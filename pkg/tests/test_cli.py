"""Command-line harness: config parsing, hashing, exit codes, CSV output."""

import csv
import io

import pytest

from levyedge import cli


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfigParsing:
    def test_key_value_with_comments_and_sections(self):
        text = "# comment\n[sweep]\nm_list = 16, 64\np = 2  # inline\n"
        assert cli.parse_config_text(text) == {"m_list": "16, 64", "p": "2"}

    def test_bad_line_rejected(self):
        with pytest.raises(cli.ConfigError):
            cli.parse_config_text("this is not a pair\n")

    def test_hash_sensitivity(self):
        a = cli.config_hash("clt-rate", {"p": "2"}, 0)
        b = cli.config_hash("clt-rate", {"p": "4"}, 0)
        c = cli.config_hash("clt-rate", {"p": "2"}, 1)
        assert len({a, b, c}) == 3


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        cfg = write(tmp_path, "bad.cfg", "p = 3\n")  # odd p
        assert cli.main(["clt-rate", "--config", cfg]) == 2

    def test_missing_config_file_is_2(self):
        assert cli.main(["clt-rate", "--config", "/nonexistent.cfg"]) == 2

    def test_unknown_law_is_2(self, tmp_path):
        cfg = write(tmp_path, "law.cfg", "law = rademacher\n")
        assert cli.main(["clt-rate", "--config", cfg]) == 2

    def test_numerical_failure_is_3(self, tmp_path, monkeypatch):
        def boom(cfg, seed, threads):
            raise cli.NumericalFailure("synthetic")

        monkeypatch.setitem(cli._EXPERIMENTS, "clt-rate", (boom, "csv"))
        assert cli.main(["clt-rate"]) == 3


class TestOutputs:
    def test_small_run_and_summary(self, tmp_path):
        cfg = write(
            tmp_path, "clt.cfg",
            "law = centered-exponential\nmode = gaussian\n"
            "m_list = 4,16,64\nn_samples = 500\nreplicates = 2\n",
        )
        out = str(tmp_path / "out.csv")
        assert cli.main(["clt-rate", "--config", cfg, "--out", out, "--no-timestamp"]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0][0] == "config_hash"
        assert rows[1] == ["m", "p", "mode", "distance", "replicate"]
        assert rows[-1][0] == "slope"

    def test_byte_identical_rerun(self, tmp_path):
        cfg = write(
            tmp_path, "clt.cfg",
            "law = centered-exponential\nm_list = 4,16,64\n"
            "n_samples = 200\nreplicates = 2\n",
        )
        o1, o2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        for o in (o1, o2):
            assert cli.main(
                ["clt-rate", "--config", cfg, "--seed", "9", "--out", o, "--no-timestamp"]
            ) == 0
        assert open(o1).read() == open(o2).read()

    def test_threads_do_not_change_results(self, tmp_path):
        cfg = write(
            tmp_path, "clt.cfg",
            "law = centered-exponential\nm_list = 4,16,64\n"
            "n_samples = 200\nreplicates = 4\n",
        )
        o1, o2 = str(tmp_path / "t1.csv"), str(tmp_path / "t4.csv")
        cli.main(["clt-rate", "--config", cfg, "--out", o1, "--no-timestamp"])
        cli.main(["clt-rate", "--config", cfg, "--out", o2, "--no-timestamp", "--threads", "4"])
        assert open(o1).read() == open(o2).read()

    def test_hash_guard_blocks_mismatched_overwrite(self, tmp_path):
        cfg1 = write(tmp_path, "a.cfg", "m_list = 4,16,64\nn_samples = 200\nreplicates = 1\n")
        cfg2 = write(tmp_path, "b.cfg", "m_list = 4,16,256\nn_samples = 200\nreplicates = 1\n")
        out = str(tmp_path / "out.csv")
        assert cli.main(["clt-rate", "--config", cfg1, "--out", out, "--no-timestamp"]) == 0
        assert cli.main(["clt-rate", "--config", cfg2, "--out", out, "--no-timestamp"]) == 2
        assert cli.main(
            ["clt-rate", "--config", cfg2, "--out", out, "--no-timestamp", "--force"]
        ) == 0

    def test_edgeworth_build_text_dump(self, tmp_path):
        cfg = write(tmp_path, "eb.cfg", "law = centered-exponential\nr = 1\nm_probe = 100\n")
        out = str(tmp_path / "dump.txt")
        assert cli.main(["edgeworth-build", "--config", cfg, "--out", out, "--no-timestamp"]) == 0
        text = open(out).read()
        assert "u_1(x)" in text
        assert "residual check: all zero (exact)" in text
        assert "moment check: all equal (exact)" in text

    def test_probe_cramer_runs(self, tmp_path):
        cfg = write(tmp_path, "pc.cfg", "q = 2\nalpha = 1.5\nr = 3\nrho = 8\ngrid_n = 50\n")
        out = str(tmp_path / "probe.txt")
        assert cli.main(["probe-cramer", "--config", cfg, "--out", out, "--no-timestamp"]) == 0
        assert "sup |char|" in open(out).read()

    def test_degenerate_jump_measure(self, tmp_path):
        radii = ",".join(str(0.1 + 0.9 * i / 15) for i in range(16))
        dens = ",".join("0" for _ in range(16))
        cfg = write(
            tmp_path, "deg.cfg",
            f"kind = custom-radial\nq = 2\nradii = {radii}\ndensity = {dens}\n"
            "eps_list = 0.5,0.25,0.125\nn_samples = 64\nreplicates = 2\n",
        )
        out = str(tmp_path / "deg.csv")
        assert cli.main(["jump-coupling", "--config", cfg, "--out", out, "--no-timestamp"]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[-1][-1] == "degenerate"
        # every distance row is exactly zero
        assert all(float(r[3]) == 0.0 for r in rows[2:-1])
