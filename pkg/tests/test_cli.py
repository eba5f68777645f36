"""Command-line dispatch, exit codes and the small pipeline stages."""

import pytest

from pmf_sasv.embedding import load_embeddings
from pmf_sasv.metrics.scores import write_tandem_file
from pmf_sasv.manifest import read_manifest
from pmf_sasv.pmf import load_model
from pmf_sasv.run import build_parser, main

from helpers import tandem_set

CONFIG = """\
seed = 5
threads = 2

[filterbank]
n_pairs = 2
inverse_taps = 64

[pmf]
bin_count = 256

[synth]
subsets = ["train", "eval"]
n_target = 2
n_nontarget = 1
n_spoof = 2
min_duration_s = 0.1
max_duration_s = 0.15

[paths]
work_dir = "{work}"
"""


@pytest.fixture
def config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = tmp_path / "run.toml"
    path.write_text(CONFIG.format(work=(tmp_path / "work").as_posix()))
    return path


def run(config, *argv) -> int:
    return main(["--config", str(config), *argv])


def test_parser_knows_every_subcommand():
    parser = build_parser()
    for command in ("synth", "build-models", "embed", "train-gender", "train-cm", "score",
                    "eval", "fuse", "pca-export", "config", "import-asvspoof"):
        assert parser.parse_args(_minimal_args(command)).command == command


def _minimal_args(command):
    required = {
        "build-models": ["--manifest", "m.txt"],
        "embed": ["--manifest", "m.txt", "--models", "a", "b"],
        "eval": ["--asv", "asv.txt"],
        "fuse": ["--external", "ext.txt"],
        "pca-export": ["--embeddings", "e", "--out", "o.csv"],
        "import-asvspoof": ["--protocol", "p", "--audio-dir", "d", "--subset", "dev", "--out", "m.txt"],
    }
    return [command] + required.get(command, [])


def test_config_dump(config, capsys):
    assert run(config, "config") == 0
    out = capsys.readouterr().out
    assert "n_pairs = 2" in out
    assert "[costs]" in out


def test_config_check(config, tmp_path, capsys):
    assert main(["config", "--check", str(config)]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("[similarity]\nqc_m = 2.0\n")
    assert main(["config", "--check", str(bad)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.toml"), "config"]) == 2


def test_missing_artifact_names_producer(config, caplog):
    assert run(config, "eval", "--asv", "missing_asv.txt") == 3
    assert "pmf-sasv score" in caplog.text


def test_fusion_needs_tuning_streams(config, tmp_path):
    scores = tmp_path / "s.txt"
    scores.write_text("T1 m bonafide 0.9\nT2 f spoof 0.1\n")
    assert run(config, "fuse", "--gd", str(scores), "--external", str(scores)) == 2


def test_weighted_fusion_with_fixed_alpha(config, tmp_path):
    gd = tmp_path / "gd.txt"
    ext = tmp_path / "ext.txt"
    gd.write_text("T1 m bonafide 0.9\nT2 f spoof 0.1\n")
    ext.write_text("T2 f spoof 0.3\nT1 m bonafide 0.5\n")
    out = tmp_path / "fused.txt"
    assert run(config, "fuse", "--gd", str(gd), "--external", str(ext), "--alpha", "0.5", "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split()[:3] == ["T1", "m", "bonafide"]
    assert float(lines[0].split()[3]) == pytest.approx(0.7)


def _fusion_streams(tmp_path, name, offset):
    gd = tmp_path / f"{name}_gd.txt"
    ext = tmp_path / f"{name}_ext.txt"
    gd_lines, ext_lines = [], []
    for i in range(8):
        cls = "bonafide" if i % 2 == 0 else "spoof"
        gender = "m" if i < 4 else "f"
        high = 0.6 + 0.04 * i if cls == "bonafide" else 0.1 + 0.04 * i
        gd_lines.append(f"{name}{i} {gender} {cls} {high:.2f}")
        ext_lines.append(f"{name}{i} {gender} {cls} {min(1.0, high + offset):.2f}")
    gd.write_text("\n".join(gd_lines) + "\n")
    ext.write_text("\n".join(ext_lines) + "\n")
    return gd, ext


@pytest.mark.parametrize("tune_on", ["dev", "eval"])
def test_classifier_fusion_tunes_on_requested_pairs(config, tmp_path, caplog, tune_on):
    caplog.set_level("INFO")
    gd, ext = _fusion_streams(tmp_path, "E", 0.05)
    gd_tune, ext_tune = _fusion_streams(tmp_path, "D", -0.05)
    out = tmp_path / "fused.txt"
    assert run(config, "fuse", "--method", "classifier", "--tune-on", tune_on,
               "--gd", str(gd), "--external", str(ext),
               "--gd-tune", str(gd_tune), "--external-tune", str(ext_tune), "--out", str(out)) == 0
    assert f"({tune_on} EER" in caplog.text
    assert len(out.read_text().splitlines()) == 8


def test_eval_reads_paired_tandem_file(config, tmp_path, rng):
    tandem = write_tandem_file(tandem_set(rng, n_tar=20, n_non=20, n_spoof=20), tmp_path / "tandem.txt")
    reports = tmp_path / "reports"
    assert run(config, "eval", "--tandem", str(tandem), "--no-ci", "--out", str(reports)) == 0
    assert (reports / "metrics.csv").exists()


def test_eval_needs_asv_or_tandem(config):
    assert run(config, "eval", "--no-ci") == 2


def test_synth_build_embed_pca(config, tmp_path):
    work = tmp_path / "work"
    assert run(config, "synth") == 0
    manifest_path = work / "corpus" / "manifest.txt"
    assert len(read_manifest(manifest_path)) == 2 * 2 * 5

    bank_file = tmp_path / "bank.txt"
    assert run(config, "build-models", "--manifest", str(manifest_path), "--export-bank", str(bank_file)) == 0
    genuine = load_model(work / "models" / "genuine.pmfm")
    assert genuine.file_count == 6
    assert genuine.channel_count == 4
    assert bank_file.read_text().startswith("#")

    assert run(config, "embed", "--manifest", str(manifest_path), "--models", "genuine", "spoof") == 0
    table = load_embeddings(work / "embeddings" / "genuine_spoof")
    assert table.matrix.shape == (20, 32)

    pca = tmp_path / "pca.csv"
    assert run(config, "pca-export", "--embeddings", str(work / "embeddings" / "genuine_spoof"),
               "--out", str(pca), "--dims", "2", "--label", "gender") == 0
    lines = pca.read_text().splitlines()
    assert lines[0] == "source_id,label,pc1,pc2"
    assert len(lines) == 21
