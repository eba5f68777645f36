"""Score sets and the score/tandem file formats."""

import numpy as np
import pytest

from pmf_sasv.errors import DataError
from pmf_sasv.metrics.scores import (
    ScoreFileError,
    TandemScoreSet,
    TrialScoreSet,
    UnpairedTrialsError,
    read_score_file,
    read_tandem_file,
    write_score_file,
    write_tandem_file,
)

from helpers import tandem_set


def test_score_file_keeps_every_column(tmp_path, rng):
    t = tandem_set(rng, n_tar=3, n_non=2, n_spoof=2)
    path = write_score_file(t.cm_set(), tmp_path / "cm.txt")
    assert path.read_text().splitlines()[0].split()[:3] == ["T00000", "m", "target"]
    back = read_score_file(path)
    np.testing.assert_array_equal(back.scores, t.cm)
    np.testing.assert_array_equal(back.genders, t.genders)
    np.testing.assert_array_equal(back.classes, t.classes)


def test_tandem_file(tmp_path, rng):
    t = tandem_set(rng, n_tar=3, n_non=2, n_spoof=2)
    back = read_tandem_file(write_tandem_file(t, tmp_path / "tandem.txt"))
    np.testing.assert_array_equal(back.asv, t.asv)
    np.testing.assert_array_equal(back.cm, t.cm)


def test_comments_and_blank_lines_skipped(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("# header\n\nT1 f spoof -0.5\nT2 - bonafide 0.25\n")
    scores = read_score_file(path)
    assert list(scores.trial_ids) == ["T1", "T2"]
    assert list(scores.genders) == ["female", "unknown"]


@pytest.mark.parametrize("line", ["T1 m target", "T1 x target 0.1", "T1 m weird 0.1", "T1 m target abc"])
def test_bad_lines(tmp_path, line):
    path = tmp_path / "bad.txt"
    path.write_text(line + "\n")
    with pytest.raises(ScoreFileError):
        read_score_file(path)


def test_pair_follows_asv_order():
    asv = TrialScoreSet(scores=[1.0, 2.0], classes=["target", "spoof"], genders=["male", "female"], trial_ids=["b", "a"])
    cm = TrialScoreSet(scores=[10.0, 20.0, 30.0], classes=["spoof", "target", "target"],
                       genders=["female", "male", "male"], trial_ids=["a", "b", "c"])
    t = TandemScoreSet.pair(cm, asv)
    assert list(t.trial_ids) == ["b", "a"]
    np.testing.assert_array_equal(t.cm, [20.0, 10.0])


def test_pair_needs_every_asv_trial():
    asv = TrialScoreSet.from_arrays([1.0], ["target"], trial_ids=["x"])
    cm = TrialScoreSet.from_arrays([1.0], ["target"], trial_ids=["y"])
    with pytest.raises(UnpairedTrialsError):
        TandemScoreSet.pair(cm, asv)


def test_non_finite_scores_rejected():
    with pytest.raises(DataError):
        TrialScoreSet.from_arrays([np.nan], ["target"])
