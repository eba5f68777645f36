"""Threaded PMF extraction, group models and manifest embedding."""

import dataclasses

import numpy as np
import pytest

from pmf_sasv.embedding import EmbeddingExtractor
from pmf_sasv.manifest import Manifest, parse_selector
from pmf_sasv.pipeline import build_group_models, embed_manifest, extract_pmfs, file_pmfs, run_bounded
from pmf_sasv.pmf import EmptyGroupError, aggregate_group
from pmf_sasv.synth import SynthConfig, generate_corpus

from helpers import SMALL_BINS


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    config = SynthConfig(seed=3, subsets=["train"], n_target=2, n_nontarget=1, n_spoof=2,
                         min_duration_s=0.1, max_duration_s=0.15)
    return generate_corpus(tmp_path_factory.mktemp("corpus"), config).manifest


async def test_run_bounded_keeps_order():
    results = await run_bounded(lambda x, k: x * k, [3, 1, 2], 2, 10)
    assert results == [30, 10, 20]


async def test_run_bounded_propagates_errors():
    def fail_on_two(x):
        if x == 2:
            raise ValueError("two")
        return x

    with pytest.raises(ValueError, match="two"):
        await run_bounded(fail_on_two, [1, 2, 3], 3)


async def test_extract_pmfs_reads_each_path_once(corpus, small_bank):
    paths = [r.path for r in corpus.rows[:3]]
    pmfs = await extract_pmfs(paths + paths[:1], small_bank, SMALL_BINS, threads=2)
    assert list(pmfs) == paths
    assert all(len(channel_pmfs) == len(small_bank) for channel_pmfs in pmfs.values())


async def test_group_models_match_direct_aggregation(corpus, small_bank):
    selectors = [parse_selector("genuine"), parse_selector("spoof_male")]
    models = await build_group_models(corpus, selectors, small_bank, SMALL_BINS, threads=3)
    genuine_rows = corpus.select(selectors[0]).rows
    assert models["genuine"].file_count == len(genuine_rows) == 6
    assert models["spoof_male"].file_count == 2
    expected = aggregate_group([file_pmfs(r.path, small_bank, SMALL_BINS) for r in genuine_rows], "genuine")
    np.testing.assert_allclose(models["genuine"].matrix, expected.matrix, atol=1e-12)


async def test_thread_count_does_not_change_models(corpus, small_bank):
    selectors = [parse_selector("female")]
    one = await build_group_models(corpus, selectors, small_bank, SMALL_BINS, threads=1)
    four = await build_group_models(corpus, selectors, small_bank, SMALL_BINS, threads=4)
    np.testing.assert_array_equal(one["female"].matrix, four["female"].matrix)


async def test_empty_group(corpus, small_bank):
    with pytest.raises(EmptyGroupError):
        await build_group_models(corpus, [parse_selector("none=attack_id:A99")], small_bank, SMALL_BINS)


async def test_embed_manifest(corpus, small_bank):
    models = await build_group_models(
        corpus, [parse_selector("genuine"), parse_selector("spoof")], small_bank, SMALL_BINS)
    extractor = EmbeddingExtractor(models["genuine"], models["spoof"])
    copy = dataclasses.replace(corpus.rows[0], trial_id="COPY")
    shared = Manifest(rows=corpus.rows[:3] + [copy], base_dir=corpus.base_dir)

    embeddings, metas = await embed_manifest(shared, extractor, small_bank, threads=2)
    assert [m.source_id for m in metas] == [r.trial_id for r in shared]
    assert embeddings[0].values.size == len(small_bank) * 8
    np.testing.assert_array_equal(embeddings[0].values, embeddings[3].values)
    assert metas[0].class_pair == ("genuine", "spoof")
    assert metas[0].trial_class == shared.rows[0].trial_class.value

    subset, _ = await embed_manifest(corpus, extractor, small_bank, subset="dev")
    assert subset == []
