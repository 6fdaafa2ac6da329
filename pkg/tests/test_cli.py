"""Command-line interface: exit codes, file handling, end-to-end
train/generate/eval roundtrip through temporary files."""

import numpy as np
import pytest

from coarsegen.cli import main
from coarsegen.corpus import make_corpus
from coarsegen.molio import write_sdf_records


@pytest.fixture
def butane_sdf(tmp_path):
    path = tmp_path / "mol.sdf"
    mol = make_corpus(1, 0)[0]
    path.write_bytes(write_sdf_records([(mol.graph, mol.ref)]))
    return str(path)


@pytest.fixture
def two_ensembles(tmp_path):
    mol = make_corpus(1, 0)[0]
    gen = tmp_path / "gen.sdf"
    truth = tmp_path / "truth.sdf"
    records = [(mol.graph, t) for t in mol.truth_ensemble]
    gen.write_bytes(write_sdf_records(records))
    truth.write_bytes(write_sdf_records(records))
    return str(gen), str(truth)


class TestErrorHandling:
    def test_missing_input_exits_1_with_path(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["coarsen", "/no/such/file.sdf"])
        assert "/no/such/file.sdf" in str(exc.value)

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["coarsen", "--frobnicate", "x.sdf"])
        assert exc.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 2

    def test_missing_checkpoint(self, butane_sdf, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["generate", butane_sdf, "--checkpoint",
                  str(tmp_path / "none.bin")])
        assert "none.bin" in str(exc.value)


class TestCoarsen:
    def test_reports_beads(self, butane_sdf, capsys):
        assert main(["coarsen", butane_sdf]) == 0
        out = capsys.readouterr().out
        assert "beads=" in out and "bead 0:" in out and "centroid" in out


class TestEval:
    def test_identical_files_full_coverage(self, two_ensembles, capsys):
        gen, truth = two_ensembles
        assert main(["eval", gen, truth, "--delta", "0.5"]) == 0
        out = capsys.readouterr().out
        assert "cov_precision 100.00 %" in out
        assert "cov_recall    100.00 %" in out

    def test_budget_sweep_lines(self, two_ensembles, capsys):
        gen, truth = two_ensembles
        assert main(["eval", gen, truth, "--budgets", "1,3,5"]) == 0
        out = capsys.readouterr().out
        assert "budget 1:" in out and "budget 5:" in out

    def test_histogram_file(self, two_ensembles, tmp_path, capsys):
        gen, truth = two_ensembles
        hist = tmp_path / "hist.txt"
        assert main(["eval", gen, truth, "--histogram", str(hist)]) == 0
        lines = hist.read_text().splitlines()
        assert lines[0] == "# bin_left bin_right count"
        counts = [int(line.split()[2]) for line in lines[1:]]
        assert sum(counts) == 25    # 5 x 5 RMSD entries


class TestTrainAndGenerate:
    def test_roundtrip(self, tmp_path, capsys):
        ckpt_dir = tmp_path / "ckpt"
        rc = main(["train", "--epochs", "1", "--corpus-size", "1",
                   "--layers", "1", "--hidden-dim", "8",
                   "--latent-channels", "4",
                   "--checkpoint-dir", str(ckpt_dir)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "config_hash=" in out and "done steps=1" in out
        ckpt = ckpt_dir / "ckpt_epoch0.bin"
        assert ckpt.exists()

        mol = make_corpus(1, 0)[0]
        ref_path = tmp_path / "ref.sdf"
        ref_path.write_bytes(write_sdf_records([(mol.graph, mol.ref)]))
        gen_path = tmp_path / "gen.sdf"
        rc = main(["generate", str(ref_path), "--checkpoint", str(ckpt),
                   "--num", "3", "--seed", "1", "--layers", "1",
                   "--hidden-dim", "8", "--latent-channels", "4",
                   "--output", str(gen_path)])
        assert rc == 0

        truth_path = tmp_path / "truth.sdf"
        truth_path.write_bytes(write_sdf_records(
            [(mol.graph, t) for t in mol.truth_ensemble]))
        assert main(["eval", str(gen_path), str(truth_path)]) == 0
        assert "amr_recall" in capsys.readouterr().out

    def test_generate_to_stdout(self, butane_sdf, capsys):
        rc = main(["generate", butane_sdf, "--seed", "0", "--layers", "1",
                   "--hidden-dim", "8", "--latent-channels", "4"])
        assert rc == 0
        assert "$$$$" in capsys.readouterr().out

    def test_generate_deterministic_via_env_seed(self, butane_sdf, capsys,
                                                 monkeypatch):
        monkeypatch.setenv("COARSEGEN_SEED", "5")
        main(["generate", butane_sdf, "--layers", "1", "--hidden-dim", "8",
              "--latent-channels", "4"])
        a = capsys.readouterr().out
        main(["generate", butane_sdf, "--layers", "1", "--hidden-dim", "8",
              "--latent-channels", "4"])
        assert a == capsys.readouterr().out


class TestConfigFile:
    def test_ini_config_applies(self, tmp_path, capsys):
        ini = tmp_path / "run.ini"
        ini.write_text("[train]\nepochs = 1\ncorpus_size = 1\nlayers = 1\n"
                       "hidden_dim = 8\nlatent_channels = 4\n")
        assert main(["train", "--config", str(ini)]) == 0
        assert "done steps=1" in capsys.readouterr().out

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[train]\nmomentum = 0.9\n")
        with pytest.raises(SystemExit, match="momentum"):
            main(["train", "--config", str(ini)])

    def test_missing_section_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[model]\nlayers = 1\n")
        with pytest.raises(SystemExit, match="train"):
            main(["train", "--config", str(ini)])


class TestChecks:
    def test_gradcheck_passes(self, capsys):
        assert main(["gradcheck"]) == 0
        assert "[PASS]" in capsys.readouterr().out

    def test_equivcheck_small_passes(self, capsys):
        assert main(["equivcheck", "--molecules", "2", "--motions", "2"]) == 0
        assert "[PASS]" in capsys.readouterr().out
