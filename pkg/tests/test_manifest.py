"""Manifests, group selectors and the ASVspoof 2019 protocol import."""

from pathlib import Path

import pytest

from pmf_sasv.errors import DataError
from pmf_sasv.labels import Gender, TrialClass
from pmf_sasv.manifest import (
    GroupSelector,
    Manifest,
    ManifestParseError,
    ManifestRow,
    SelectorError,
    from_asvspoof2019,
    parse_selector,
    read_manifest,
    read_speaker_genders,
    write_manifest,
)

MANIFEST = """\
# trial_id gender class attack_id subset path
T1 m target - train wav/a.wav
T2 f nontarget - train wav/b.wav
T3 m spoof A01 train wav/c.wav
T4 f bonafide - dev /abs/d.wav
T5 m target - train wav/a.wav
"""


@pytest.fixture
def manifest(tmp_path):
    path = tmp_path / "manifest.txt"
    path.write_text(MANIFEST)
    return read_manifest(path)


def test_read(manifest, tmp_path):
    assert len(manifest) == 5
    first = manifest.rows[0]
    assert (first.gender, first.trial_class, first.attack_id) == (Gender.MALE, TrialClass.TARGET, "-")
    assert first.path == tmp_path.resolve() / "wav" / "a.wav"
    assert manifest.rows[3].path == Path("/abs/d.wav")
    assert manifest.subsets() == ["dev", "train"]
    assert manifest.counts()[("train", "male", "target")] == 2
    assert len(manifest.unique_paths()) == 4


def test_write_read_relative(manifest, tmp_path):
    path = write_manifest(manifest, tmp_path / "copy.txt")
    assert "wav/a.wav" in path.read_text()
    back = read_manifest(path)
    assert [r.path for r in back] == [r.path for r in manifest]
    assert back.by_trial_id()["T3"].attack_id == "A01"


@pytest.mark.parametrize("body, reason", [
    ("T1 m target - train\n", "columns"),
    ("T1 x target - train a.wav\n", "gender"),
    ("T1 m target - train a.wav\nT1 f spoof A01 train b.wav\n", "duplicate"),
])
def test_parse_errors(tmp_path, body, reason):
    path = tmp_path / "m.txt"
    path.write_text(body)
    with pytest.raises(ManifestParseError, match=reason):
        read_manifest(path)


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        read_manifest(tmp_path / "none.txt")


class TestSelectors:

    def test_bonafide_class_covers_asv_classes(self, manifest):
        genuine = manifest.select(parse_selector("genuine"))
        assert [r.trial_id for r in genuine] == ["T1", "T2", "T4", "T5"]

    def test_conjunction(self, manifest):
        sel = GroupSelector.parse("gm=class:genuine,gender:male")
        assert [r.trial_id for r in manifest.select(sel)] == ["T1", "T5"]
        assert str(sel) == "gm=class:bonafide,gender:male"

    def test_attack_shorthand(self, manifest):
        assert [r.trial_id for r in manifest.select(parse_selector("a01"))] == ["T3"]

    def test_subset_column(self, manifest):
        assert len(manifest.select(parse_selector("d=subset:dev"))) == 1

    @pytest.mark.parametrize("text", ["nothing", "=class:spoof", "x=class", "x=colour:red", "x=gender:q"])
    def test_malformed(self, text):
        with pytest.raises(SelectorError):
            parse_selector(text)


class TestAsvspoofImport:

    @pytest.fixture
    def layout(self, tmp_path):
        audio = tmp_path / "wav"
        audio.mkdir()
        for utt in ("LA_0001", "LA_0002", "LA_0003"):
            (audio / f"{utt}.wav").write_bytes(b"")
        (tmp_path / "cm.txt").write_text(
            "LA_0079 LA_0001 - - bonafide\n"
            "LA_0079 LA_0002 - A07 spoof\n"
            "LA_0080 LA_0003 - - bonafide\n"
        )
        (tmp_path / "asv.txt").write_text(
            "LA_0079 LA_0001 bonafide target\n"
            "LA_0080 LA_0001 bonafide nontarget\n"
            "LA_0079 LA_0002 A07 spoof\n"
        )
        (tmp_path / "genders.txt").write_text("LA_0079 f\nLA_0080 m\n")
        return tmp_path

    def test_cm_protocol(self, layout):
        genders = read_speaker_genders(layout / "genders.txt")
        m = from_asvspoof2019(layout / "cm.txt", layout / "wav", "dev", speaker_genders=genders)
        assert [(r.trial_id, r.trial_class, r.attack_id, r.gender) for r in m] == [
            ("LA_0001", TrialClass.BONAFIDE, "-", Gender.FEMALE),
            ("LA_0002", TrialClass.SPOOF, "A07", Gender.FEMALE),
            ("LA_0003", TrialClass.BONAFIDE, "-", Gender.MALE),
        ]

    def test_asv_trials(self, layout):
        m = from_asvspoof2019(layout / "cm.txt", layout / "wav", "eval",
                              asv_trials=layout / "asv.txt", default_gender=Gender.FEMALE)
        assert [r.trial_id for r in m] == ["LA_0079-LA_0001", "LA_0080-LA_0001", "LA_0079-LA_0002"]
        assert [r.trial_class for r in m] == [TrialClass.TARGET, TrialClass.NONTARGET, TrialClass.SPOOF]
        assert m.rows[2].attack_id == "A07"
        assert all(r.gender is Gender.FEMALE and r.subset == "eval" for r in m)

    def test_flac_only_audio(self, layout):
        (layout / "wav" / "LA_0001.wav").unlink()
        (layout / "wav" / "LA_0001.flac").write_bytes(b"")
        with pytest.raises(DataError, match="flac"):
            from_asvspoof2019(layout / "cm.txt", layout / "wav", "dev")


def test_row_line_format(tmp_path):
    row = ManifestRow(trial_id="X", gender=Gender.UNKNOWN, trial_class=TrialClass.SPOOF,
                      attack_id="A02", subset="eval", path=tmp_path / "x.wav")
    assert row.to_line(tmp_path) == "X - spoof A02 eval x.wav"
    assert len(Manifest(rows=[row])) == 1
