import filecmp
import os

import numpy as np
import pytest

from pdfp_langevin.cli import _validate, build_model, main
from pdfp_langevin.config import ConfigError, load_config, parse_config
from pdfp_langevin.pgm_io import read_pgm

TOY_INI = """
[model]
kind = toy1d
[sampler]
kind = mala_pdfp
delta = 0.1
rho = 0.1
K = 1
N = 1000
burn_in = 100
seed = 4
[output]
directory = out
traces = true
"""

DEBLUR_INI = """
[model]
kind = deblur
size = 16
kernel = motion:3:horizontal
sigma = 0.05
lambda_reg = 5
[sampler]
kind = ula_pdfp
delta = 1e-4
N = 60
burn_in = 10
seed = 1
[output]
directory = out
[experiment]
samplers = ula_pdfp, mala_pdfp
K = 1, 3
tune = true
tune_steps = 40
tune_probes = 2
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_defaults_and_rho_from_delta():
    cfg = parse_config(DEBLUR_INI)
    assert cfg.sampler.rho == cfg.sampler.delta == 1e-4
    assert cfg.experiment.K == (1, 3) and cfg.experiment.samplers == ("ula_pdfp", "mala_pdfp")
    assert cfg.with_seed(9).sampler.seed == 9


@pytest.mark.parametrize("text, field", [
    ("[model]\nkind=toy1d\n[sampler]\nkind=ula_pdfp\ndelta=0.1\nbogus=1\n", "bogus"),
    ("[model]\nkind=toy1d\n[sampler]\nkind=ula_pdfp\ndelta=abc\n", "delta"),
    ("[model]\nkind=toy1d\n[sampler]\nkind=ula_pdfp\n", "delta"),
    ("[model]\nkind=mri\n[sampler]\nkind=ula_pdfp\ndelta=0.1\n", "kind"),
    ("[model]\nkind=toy1d\n[sampler]\nkind=ula_pdfp\ndelta=0.1\n[experiment]\nsamplers=\nK=1\n", "samplers"),
    ("[model]\nkind=toy1d\n[extra]\n", "extra"),
])
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_sample_writes_artifacts_and_replays(tmp_path):
    cfg = _write(tmp_path, TOY_INI)
    assert main(["--out-dir", str(tmp_path / "a"), "sample", cfg]) == 0
    assert main(["--out-dir", str(tmp_path / "b"), "sample", cfg]) == 0
    rows = (tmp_path / "a" / "diagnostics.csv").read_text().splitlines()
    assert len(rows) == 2
    header, row = rows[0].split(","), rows[1].split(",")
    assert row[header.index("ks")] != ""
    for name in ("diagnostics.csv", "posterior_mean.csv", "energy_trace.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)


def test_seed_flag_changes_output(tmp_path):
    cfg = _write(tmp_path, TOY_INI)
    main(["--out-dir", str(tmp_path / "a"), "sample", cfg])
    main(["--seed", "5", "--out-dir", str(tmp_path / "b"), "sample", cfg])
    assert (tmp_path / "a" / "diagnostics.csv").read_text() != (tmp_path / "b" / "diagnostics.csv").read_text()


def test_delta_above_rho_is_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, TOY_INI.replace("delta = 0.1", "delta = 0.2"))
    assert main(["--out-dir", str(tmp_path / "o"), "sample", cfg]) == 2
    assert "delta in (0, rho]" in capsys.readouterr().err


def test_gamma_out_of_range_is_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, TOY_INI.replace("K = 1", "K = 1\ngamma = 5"))
    assert main(["sample", cfg]) == 2
    assert "gamma" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["sample", str(tmp_path / "nope.ini")]) == 2


def test_numerical_failure_writes_dump(tmp_path, monkeypatch, capsys):
    import pdfp_langevin.cli as cli

    real = cli.make_kernel

    def exploding(kind, target, cfg):
        kernel = real(kind, target, cfg)

        def step(state):
            if state.n == 5:
                raise FloatingPointError("boom")
            return kernel(state)
        return step

    monkeypatch.setattr(cli, "make_kernel", exploding)
    cfg = _write(tmp_path, TOY_INI)
    assert main(["--out-dir", str(tmp_path / "o"), "sample", cfg]) == 3
    dump = np.load(tmp_path / "o" / "chain_state_dump.npz")
    assert int(dump["n"]) == 5
    assert "chain_state_dump.npz" in capsys.readouterr().err


def test_deblur_sample_writes_pgm(tmp_path):
    cfg = _write(tmp_path, DEBLUR_INI)
    assert main(["--out-dir", str(tmp_path / "o"), "sample", cfg]) == 0
    img = read_pgm(tmp_path / "o" / "posterior_mean.pgm")
    assert img.shape == (16, 16)


def test_experiment_table_and_replay(tmp_path):
    cfg = _write(tmp_path, DEBLUR_INI)
    assert main(["--out-dir", str(tmp_path / "a"), "experiment-deblur", cfg]) == 0
    assert main(["--threads", "2", "--out-dir", str(tmp_path / "b"), "experiment-deblur", cfg]) == 0
    lines = (tmp_path / "a" / "experiment.csv").read_text().splitlines()
    assert lines[0].startswith("sampler,K,delta,rho")
    assert [ln.split(",")[:2] for ln in lines[1:]] == [
        ["observation", ""], ["ula_pdfp", "1"], ["ula_pdfp", "3"], ["mala_pdfp", "1"], ["mala_pdfp", "3"]]
    for name in sorted(os.listdir(tmp_path / "a")):
        if name != "timing.csv":
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name
    assert (tmp_path / "a" / "timing.csv").read_text().startswith("sampler,K,wall_seconds")


def test_experiment_requires_samplers(tmp_path, capsys):
    cfg = _write(tmp_path, DEBLUR_INI.replace("samplers = ula_pdfp, mala_pdfp", "samplers ="))
    assert main(["experiment-deblur", cfg]) == 2
    assert "samplers" in capsys.readouterr().err


@pytest.mark.parametrize("suite", ["prox", "pdfp", "bounds", "samplers"])
def test_verify_suites_pass(suite, capsys):
    assert main(["verify", suite]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    if suite == "bounds":
        assert "expected hypothesis violation" in out
    if suite == "prox":
        assert "finite_difference" in out


def test_verify_unknown_suite():
    assert main(["verify", "nonsense"]) == 2


def test_tune_command(tmp_path, capsys):
    text = TOY_INI.replace("kind = mala_pdfp", "kind = mala_pdfp").replace("delta = 0.1\nrho = 0.1", "delta = 0.5\nrho = 0.5")
    cfg = _write(tmp_path, text)
    rc = main(["tune", "--steps", "400", "--probes", "8", cfg])
    out = capsys.readouterr().out
    assert "selected delta=rho" in out
    assert rc in (0, 1)


@pytest.mark.parametrize("name", ["toy1d.ini", "deblur_sample.ini", "deblur_experiment.ini"])
def test_shipped_configs_validate(name):
    path = os.path.join(os.path.dirname(__file__), os.pardir, "configs", name)
    cfg = load_config(path)
    built = build_model(cfg, os.path.dirname(path))
    _validate(cfg.sampler_kind, cfg.sampler, built.target)
