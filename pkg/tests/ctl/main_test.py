from typing import TYPE_CHECKING

import pytest
import yaml
from mock import patch

from geotdm import __version__
from geotdm.ctl.base import EXIT_FAILURE, EXIT_USAGE
from geotdm.ctl.main import build_parser, load_settings, main
from geotdm.entities.symmetry import SymmetryCheck
from geotdm.plugin import get_plugin_proxy
from tests.ctl_util import run_ctl, write_config

if TYPE_CHECKING:
    from py.path import LocalPath
    from pytest_mock import MockerFixture
    from tests.setup import SetupTest


def _exit_code(setup, *args):
    # type: (SetupTest, *str) -> int
    with pytest.raises(SystemExit) as excinfo:
        run_ctl(setup, *args)
    return excinfo.value.code


def test_forecasting_workflow(setup, capsys):
    # type: (SetupTest, pytest.CaptureFixture) -> None
    run_ctl(setup, "simulate")
    assert setup.tmpdir.join("data", "manifest.yaml").check()

    run_ctl(setup, "train", "--mode", "cond")
    assert setup.tmpdir.join("model.ckpt").check()
    assert setup.tmpdir.join("model.metrics.jsonl").check()

    run_ctl(setup, "forecast", "-k", "2", "--count", "2", "--export", "csv")
    assert setup.tmpdir.join("out", "forecast.gtrj").check()
    assert setup.tmpdir.join("out", "forecast.yaml").check()
    assert setup.tmpdir.join("out", "forecast.csv").check()

    capsys.readouterr()
    run_ctl(setup, "evaluate", setup.path("out", "forecast.gtrj"), "--no-surrogate")
    out = capsys.readouterr().out
    assert out.startswith("forecast samples from")
    assert "ADE over K samples" in out
    with open(setup.path("out", "forecast.report.yaml")) as f:
        assert yaml.safe_load(f)["k"] == 2

    run_ctl(setup, "refine", "--k-steps", "2", "--count", "1")
    assert setup.tmpdir.join("out", "refine.gtrj").check()

    run_ctl(setup, "compose", "--segments", "2", "--count", "1", "--name", "long.gtrj")
    assert setup.tmpdir.join("out", "long.gtrj").check()


def test_out_overrides_output_dir(setup):
    # type: (SetupTest) -> None
    run_ctl(setup, "--out", setup.path("elsewhere"), "simulate")
    assert setup.tmpdir.join("elsewhere", "manifest.yaml").check()

    setup.settings.data_dir = setup.path("elsewhere")
    run_ctl(setup, "--out", setup.path("elsewhere"), "train", "--mode", "uncond")
    assert setup.tmpdir.join("elsewhere", "model.ckpt").check()
    run_ctl(setup, "--out", setup.path("elsewhere"), "sample", "--count", "2")
    assert setup.tmpdir.join("elsewhere", "sample.gtrj").check()


def test_check_equivariance(setup, capsys):
    # type: (SetupTest, pytest.CaptureFixture) -> None
    args = ("check-equivariance", "--trials", "1", "--chain-steps", "2", "--precision", "float64")
    run_ctl(setup, *args)
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 8
    assert all(line.endswith("ok") for line in lines)


@patch("geotdm.usecases.check_equivariance.check_model_equivariance")
def test_check_equivariance_violation(check_mock, setup, capsys):
    # type: (object, SetupTest, pytest.CaptureFixture) -> None
    check_mock.return_value = [SymmetryCheck("prior anchor", 0.5, 1e-4, 1, False)]  # type: ignore
    assert _exit_code(setup, "check-equivariance", "--trials", "1") == EXIT_FAILURE
    assert capsys.readouterr().out.rstrip().endswith("FAILED")


def test_runtime_failures_exit_2(setup):
    # type: (SetupTest) -> None
    assert _exit_code(setup, "train") == EXIT_FAILURE
    assert _exit_code(setup, "forecast", "--ckpt", setup.path("missing.ckpt")) == EXIT_FAILURE
    assert _exit_code(setup, "evaluate", setup.path("missing.gtrj")) == EXIT_FAILURE


def test_usage_errors_exit_1(setup):
    # type: (SetupTest) -> None
    assert _exit_code(setup, "evaluate") == EXIT_USAGE
    assert _exit_code(setup, "evaluate", "x.gtrj", "--baseline", "gaussian") == EXIT_USAGE
    assert _exit_code(setup, "refine") == EXIT_USAGE
    assert _exit_code(setup, "sample", "--count", "0") == EXIT_USAGE
    assert _exit_code(setup, "bogus") == EXIT_USAGE


def test_invalid_config_exits_1(tmpdir):
    # type: (LocalPath) -> None
    config = tmpdir.join("bad.yaml")
    config.write("model:\n  depth: 3\n")
    with pytest.raises(SystemExit) as excinfo:
        main(sys_argv=["geotdm-ctl", "-c", str(config), "simulate"])
    assert excinfo.value.code == EXIT_USAGE

    with pytest.raises(SystemExit) as excinfo:
        main(sys_argv=["geotdm-ctl", "-c", str(tmpdir.join("missing.yaml")), "simulate"])
    assert excinfo.value.code == EXIT_USAGE


def test_missing_plugin_dir_exits_1(setup):
    # type: (SetupTest) -> None
    setup.settings.plugin_dirs = [setup.path("no-plugins")]
    assert _exit_code(setup, "simulate") == EXIT_USAGE


def test_load_settings(setup):
    # type: (SetupTest) -> None
    config = write_config(setup)
    args = build_parser().parse_args(["-c", config, "--seed", "3", "--out", "x", "simulate"])
    settings = load_settings(args)
    assert settings.seed == 3
    assert settings.dataset.seed == 3
    assert settings.train.seed == 3
    assert settings.output_dir == "x"


def test_exceptions_reach_plugins(mocker, setup):
    # type: (MockerFixture, SetupTest) -> None
    mocker.patch("geotdm.ctl.simulate.SimulateCommand.run", side_effect=RuntimeError("boom"))
    assert _exit_code(setup, "simulate") == EXIT_FAILURE
    recorder = get_plugin_proxy()._plugins[0]
    assert getattr(recorder, "exceptions") == [RuntimeError]
    assert getattr(recorder, "service_name") == "geotdm-ctl"
    assert getattr(recorder, "tags")["command"] == "simulate"


def test_version(capsys):
    # type: (pytest.CaptureFixture) -> None
    with pytest.raises(SystemExit) as excinfo:
        main(sys_argv=["geotdm-ctl", "-V"])
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.strip().endswith(__version__)
