import json

import numpy as np
import pytest

from robustcov import WeightFunction, sample_clean, toeplitz_cov
from robustcov.cli import main
from robustcov.experiments import ConfigError, load_config
from robustcov.matrixio import read_matrix, write_matrix


def write_config(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestConfigValidation:
    def test_unknown_top_level_key(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", 'experiment = "mi-curve"\nbogus = 1\n')
        with pytest.raises(ConfigError, match="bogus"):
            load_config(cfg)

    def test_unknown_estimator_key(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.toml",
            'experiment = "mi-curve"\n[[estimators]]\nkind = "scm"\nwhoops = 2\n',
        )
        with pytest.raises(ConfigError, match="whoops"):
            load_config(cfg)

    def test_empty_estimators(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", 'experiment = "loss-curve"\nestimators = []\n')
        with pytest.raises(ConfigError, match="estimators"):
            load_config(cfg)

    def test_bad_grid(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.toml", 'experiment = "loss-curve"\nrho_grid = [0.5, 0.2]\n'
        )
        with pytest.raises(ConfigError, match="increasing"):
            load_config(cfg)

    def test_bad_kind(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.toml", 'experiment = "mi-curve"\n[[estimators]]\nkind = "unknown"\n'
        )
        with pytest.raises(ConfigError, match="kind"):
            load_config(cfg)

    def test_defaults_mirror_reference_setups(self, tmp_path):
        cfg = load_config(write_config(tmp_path / "c.toml", 'experiment = "loss-curve"\n'))
        assert (cfg.N, cfg.n, cfg.trials) == (150, 100, 100)
        assert [e.kind for e in cfg.estimators] == ["m-tyler", "m-huber", "rscm"]
        assert cfg.estimators[0].K == "1/c"
        cfg2 = load_config(write_config(tmp_path / "c2.toml", 'experiment = "mi-curve"\n'))
        assert (cfg2.N, cfg2.n) == (50, 200)
        assert cfg2.eps_grid[0] == 0.0 and cfg2.eps_grid[-1] == pytest.approx(0.15)

    def test_command_config_mismatch(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", 'experiment = "mi-curve"\n')
        code = main(["loss-curve", "--config", cfg])
        assert code == 2
        assert "mi-curve" in capsys.readouterr().err


class TestEstimateCommand:
    @pytest.fixture()
    def sample_file(self, tmp_path):
        ds = sample_clean(toeplitz_cov(20, 0.9), 30, seed=7)
        path = tmp_path / "input.csv"
        write_matrix(ds.samples, path)
        return path

    def test_round_trip_and_report(self, tmp_path, sample_file, capsys):
        cfg = write_config(
            tmp_path / "est.toml",
            'experiment = "estimate"\nrho = 0.5\noutput = "%s/out"\n'
            '[[estimators]]\nkind = "m-tyler"\nK = "1/c"\n' % tmp_path,
        )
        code = main(["estimate", "--config", cfg, str(sample_file)])
        assert code == 0
        report = json.loads((tmp_path / "out_report.json").read_text())
        assert report["converged"] is True
        assert report["residual"] <= 1e-9
        # written matrix re-reads bit-exactly
        from robustcov import regularized_maronna

        Y = read_matrix(sample_file)
        expected = regularized_maronna(Y, WeightFunction.tyler(K=1 / (20 / 30), t=0.1), 0.5).estimate
        back = read_matrix(tmp_path / "out_estimate.csv")
        np.testing.assert_array_equal(back, expected)

    def test_auto_rho(self, tmp_path, sample_file):
        cfg = write_config(
            tmp_path / "est.toml",
            'experiment = "estimate"\nrho = "auto"\noutput = "%s/auto"\n'
            '[[estimators]]\nkind = "m-tyler"\nK = "1/c"\n' % tmp_path,
        )
        assert main(["estimate", "--config", cfg, str(sample_file)]) == 0
        report = json.loads((tmp_path / "auto_report.json").read_text())
        assert 0 < report["rho_hat"] <= 1

    def test_malformed_input_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,junk\n")
        cfg = write_config(
            tmp_path / "est.toml",
            'experiment = "estimate"\nrho = 0.5\n[[estimators]]\nkind = "m-tyler"\n',
        )
        assert main(["estimate", "--config", cfg, str(bad)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_identity_cov_auto_rho_near_one(self, tmp_path):
        ds = sample_clean(toeplitz_cov(40, 0.0), 80, seed=8)
        path = tmp_path / "id.csv"
        write_matrix(ds.samples, path)
        cfg = write_config(
            tmp_path / "est.toml",
            'experiment = "estimate"\nrho = "auto"\noutput = "%s/id"\n'
            '[[estimators]]\nkind = "m-tyler"\nK = "1/c"\n' % tmp_path,
        )
        assert main(["estimate", "--config", cfg, str(path)]) == 0
        report = json.loads((tmp_path / "id_report.json").read_text())
        assert report["rho_hat"] > 0.8


class TestCalibrateCommand:
    def test_calibrate_report(self, tmp_path):
        ds = sample_clean(toeplitz_cov(30, 0.9), 20, seed=9)
        path = tmp_path / "y.csv"
        write_matrix(ds.samples, path)
        cfg = write_config(
            tmp_path / "cal.toml",
            'experiment = "calibrate"\noutput = "%s/cal"\n'
            '[[estimators]]\nkind = "m-huber"\nK = "1/c"\n' % tmp_path,
        )
        assert main(["calibrate", "--config", cfg, str(path)]) == 0
        report = json.loads((tmp_path / "cal_calibration.json").read_text())
        assert 0 < report["rho_hat"] <= 1
        assert report["M2_estimate"] > 1


class TestSweeps:
    def test_mi_curve_deterministic_bytes(self, tmp_path):
        cfg_text = (
            'experiment = "mi-curve"\nN = 16\nn = 64\ntrials = 3\nseed = 11\n'
            'output = "%s/mi"\neps_grid = [0.0, 0.1]\n'
            '[[estimators]]\nkind = "m-tyler"\n[[estimators]]\nkind = "scm"\n'
        )
        cfg = write_config(tmp_path / "mi.toml", cfg_text % tmp_path)
        assert main(["mi-curve", "--config", cfg, "--no-header-timestamp"]) == 0
        first = (tmp_path / "mi_mi_curve.csv").read_bytes()
        assert main(["mi-curve", "--config", cfg, "--no-header-timestamp"]) == 0
        assert (tmp_path / "mi_mi_curve.csv").read_bytes() == first

    def test_mi_curve_zero_eps_rows_exact(self, tmp_path):
        cfg = write_config(
            tmp_path / "mi.toml",
            'experiment = "mi-curve"\nN = 16\nn = 64\ntrials = 2\nseed = 12\n'
            'output = "%s/mi0"\neps_grid = [0.0, 0.05]\n'
            '[[estimators]]\nkind = "m-tyler"\n' % tmp_path,
        )
        assert main(["mi-curve", "--config", cfg, "--no-header-timestamp"]) == 0
        rows = (tmp_path / "mi0_mi_curve.csv").read_text().splitlines()
        header = rows[0].split(",")
        zero_row = dict(zip(header, rows[1].split(",")))
        assert float(zero_row["eps"]) == 0.0
        assert float(zero_row["mi_asymptotic"]) == 0.0
        assert float(zero_row["mi_empirical"]) == 0.0
        assert all(r.split(",")[-1] == "ok" for r in rows[1:])

    def test_loss_curve_quick_and_gnuplot(self, tmp_path):
        cfg = write_config(
            tmp_path / "loss.toml",
            'experiment = "loss-curve"\nN = 20\nn = 14\ntrials = 10\nseed = 13\n'
            'output = "%s/loss"\nrho_grid = [0.3, 0.7, 1.0]\n' % tmp_path,
        )
        assert main(["loss-curve", "--config", cfg, "--quick", "--no-header-timestamp"]) == 0
        text = (tmp_path / "loss_loss_curve.csv").read_text()
        assert text.splitlines()[0] == "kind,rho,estimator,mean_loss,stderr,loss_of_equivalent,status"
        assert "l_star" in text and "rho_hat" in text
        assert (tmp_path / "loss_loss_curve.gp").exists()

    def test_timestamp_header_toggle(self, tmp_path):
        cfg = write_config(
            tmp_path / "imi.toml",
            'experiment = "imi-rho"\nN = 16\nn = 11\noutput = "%s/imi"\n'
            'rho_grid = [0.3, 0.8]\n' % tmp_path,
        )
        assert main(["imi-rho", "--config", cfg]) == 0
        assert (tmp_path / "imi_imi_rho.csv").read_text().startswith("# generated")
        assert main(["imi-rho", "--config", cfg, "--no-header-timestamp"]) == 0
        assert (tmp_path / "imi_imi_rho.csv").read_text().startswith("kind,")

    def test_imi_aspect_flags_out_of_regime(self, tmp_path):
        cfg = write_config(
            tmp_path / "ia.toml",
            'experiment = "imi-aspect"\nN = 16\noutput = "%s/ia"\n'
            'c_grid = [0.5, 1.5]\n' % tmp_path,
        )
        assert main(["imi-aspect", "--config", cfg, "--no-header-timestamp"]) == 0
        rows = [r.split(",") for r in (tmp_path / "ia_imi_aspect.csv").read_text().splitlines()[1:]]
        flagged = [r for r in rows if r[0] == "imi_noreg_ref" and r[1] == "1.5" and r[2] == "m-tyler"]
        assert flagged and flagged[0][-1] == "out_of_regime"
        ok_rows = [r for r in rows if r[0] == "imi_at_rho_star" and r[-1] == "ok"]
        assert ok_rows  # regularized values exist at both aspect ratios

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(
            tmp_path / "mi.toml",
            'experiment = "mi-curve"\nN = 12\nn = 48\ntrials = 2\nseed = 1\n'
            'output = "%s/sd"\neps_grid = [0.1]\n[[estimators]]\nkind = "scm"\n' % tmp_path,
        )
        assert main(["mi-curve", "--config", cfg, "--no-header-timestamp"]) == 0
        base = (tmp_path / "sd_mi_curve.csv").read_bytes()
        assert main(["mi-curve", "--config", cfg, "--no-header-timestamp", "--seed", "2"]) == 0
        assert (tmp_path / "sd_mi_curve.csv").read_bytes() != base


class TestSwapCheck:
    def test_tyler_ordering_reverses_under_swap(self, tmp_path):
        # with the heavier-correlated model as outliers, the Tyler-type
        # influence exceeds the SCM's at small eps
        cfg_tmpl = (
            'experiment = "mi-curve"\nN = 24\nn = 96\ntrials = 0\nseed = 3\n'
            'output = "{out}"\neps_grid = [0.02]\ncov_legit = {cl}\ncov_outlier = {co}\n'
            '[[estimators]]\nkind = "m-tyler"\n[[estimators]]\nkind = "scm"\n'
        )
        vals = {}
        for tag, cl, co in (("fwd", 0.9, 0.2), ("swp", 0.2, 0.9)):
            cfg = write_config(
                tmp_path / f"{tag}.toml",
                cfg_tmpl.format(out=f"{tmp_path}/{tag}", cl=cl, co=co),
            )
            assert main(["mi-curve", "--config", cfg, "--no-header-timestamp"]) == 0
            rows = (tmp_path / f"{tag}_mi_curve.csv").read_text().splitlines()
            header = rows[0].split(",")
            for row in rows[1:]:
                rec = dict(zip(header, row.split(",")))
                vals[(tag, rec["estimator"])] = float(rec["mi_asymptotic"])
        assert vals[("fwd", "m-tyler")] < vals[("fwd", "scm")]
        assert vals[("swp", "m-tyler")] > vals[("swp", "scm")]
