"""
Pipeline - Per-utterance PMF extraction, group model building and embedding.

Utterances are processed in worker threads (``asyncio.to_thread``) bounded by
a semaphore; results come back in manifest order. Each audio path is read and
filtered once even when several manifest rows share it.
"""

import asyncio
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from .audio_io import AudioBuffer, clip_to_unit, read_wav
from .embedding import Embedding, EmbeddingExtractor, EmbeddingMeta
from .filterbank import FilterBank, apply_channel
from .manifest import GroupSelector, Manifest
from .pmf import DEFAULT_BIN_COUNT, GroupAccumulator, Pmf, PmfGroupModel, compute_pmf

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Paths per gather round when building group models; bounds peak memory
MODEL_CHUNK = 64


def utterance_pmfs(audio: AudioBuffer, bank: FilterBank, bin_count: int = DEFAULT_BIN_COUNT) -> List[Pmf]:
    """Filter, clip and histogram one utterance through every channel of ``bank``."""
    return [
        compute_pmf(clip_to_unit(apply_channel(bank, n, audio)), bin_count)
        for n in range(1, len(bank) + 1)
    ]


def file_pmfs(path: Path, bank: FilterBank, bin_count: int = DEFAULT_BIN_COUNT) -> List[Pmf]:
    return utterance_pmfs(read_wav(path), bank, bin_count)


async def run_bounded(func: Callable[..., T], items: Sequence, threads: int, *args) -> List[T]:
    """
    Run ``func(item, *args)`` for every item in worker threads.

    At most ``threads`` calls run at once; results keep the order of ``items``.
    The first exception propagates once all calls have finished.
    """
    semaphore = asyncio.Semaphore(max(1, threads))

    async def worker(item):
        async with semaphore:
            return await asyncio.to_thread(func, item, *args)

    results = await asyncio.gather(*(worker(item) for item in items), return_exceptions=True)
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return list(results)


async def extract_pmfs(
    paths: Sequence[Path],
    bank: FilterBank,
    bin_count: int = DEFAULT_BIN_COUNT,
    threads: int = 1,
) -> Dict[Path, List[Pmf]]:
    """Channel PMFs for each distinct path, in first-appearance order."""
    unique = list(dict.fromkeys(Path(p) for p in paths))
    results = await run_bounded(file_pmfs, unique, threads, bank, bin_count)
    return dict(zip(unique, results))


async def build_group_models(
    manifest: Manifest,
    selectors: Sequence[GroupSelector],
    bank: FilterBank,
    bin_count: int = DEFAULT_BIN_COUNT,
    threads: int = 1,
) -> Dict[str, PmfGroupModel]:
    """
    Pooled-sample PMF model for each selector's rows.

    Files are counted once per group even if several rows of the group point
    at the same audio.

    Raises:
        EmptyGroupError: A selector matches no rows
    """
    members: Dict[str, List[Path]] = {}
    for selector in selectors:
        members[selector.name] = list(dict.fromkeys(r.path for r in manifest.select(selector)))
        logger.info(f"Group {selector.name!r} ({selector}): {len(members[selector.name])} files")

    accumulators = {s.name: GroupAccumulator(s.name, len(bank), bin_count) for s in selectors}
    groups_of: Dict[Path, List[str]] = {}
    for name, paths in members.items():
        for path in paths:
            groups_of.setdefault(path, []).append(name)

    paths = list(groups_of)
    for start in range(0, len(paths), MODEL_CHUNK):
        chunk = paths[start:start + MODEL_CHUNK]
        pmfs = await extract_pmfs(chunk, bank, bin_count, threads)
        for path in chunk:
            for name in groups_of[path]:
                accumulators[name].add(pmfs[path])
        logger.debug(f"Accumulated {min(start + MODEL_CHUNK, len(paths))}/{len(paths)} files")

    return {name: acc.finish() for name, acc in accumulators.items()}


def _embed_file(path: Path, bank: FilterBank, bin_count: int, extractor: EmbeddingExtractor) -> Embedding:
    return extractor.embed(file_pmfs(path, bank, bin_count), source_id=path.stem)


async def embed_manifest(
    manifest: Manifest,
    extractor: EmbeddingExtractor,
    bank: FilterBank,
    threads: int = 1,
    subset: Optional[str] = None,
) -> Tuple[List[Embedding], List[EmbeddingMeta]]:
    """
    One embedding per manifest row, in manifest order.

    Rows sharing an audio path share its embedding values.
    """
    rows = [r for r in manifest if subset is None or r.subset == subset]
    unique = list(dict.fromkeys(r.path for r in rows))
    vectors = await run_bounded(_embed_file, unique, threads, bank, extractor.model1.bin_count, extractor)
    by_path = dict(zip(unique, vectors))

    embeddings, metas = [], []
    for r in rows:
        e = by_path[r.path]
        embeddings.append(Embedding(values=e.values, class_pair=e.class_pair, source_id=r.trial_id))
        metas.append(EmbeddingMeta(
            source_id=r.trial_id,
            class_pair=extractor.class_pair,
            gender=r.gender.value,
            trial_class=r.trial_class.value,
            attack_id=r.attack_id,
            subset=r.subset,
        ))
    logger.info(f"Embedded {len(rows)} rows ({len(unique)} files) against {extractor.class_pair}")
    return embeddings, metas
