"""
Run Script - Command-line entry point for the pmf-sasv toolkit.

Subcommands follow the pipeline order:

    synth -> build-models -> embed -> train-gender / train-cm -> score -> eval -> fuse

Every artifact lands under ``paths.work_dir`` unless a flag names another
location; a missing upstream artifact is reported with the subcommand that
produces it.
"""

import argparse
import asyncio
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .audio_io import read_wav
from .classifiers.dataset import Dataset, FeatureLayout, Task, dataset_from_table
from .classifiers.grouped_mlp import Head, Variant, train_grouped_mlp
from .classifiers.models import ModelKind, TrainedModel, train_flat_classifier
from .classifiers.smote import smote_oversample
from .embedding import (
    EmbeddingExtractor,
    EmbeddingTable,
    embedding_paths,
    export_pca_csv,
    load_embeddings,
    pca_project,
    save_embeddings,
)
from .errors import ConfigError, DataError, MissingArtifactError, SasvError
from .evaluation import EvalOptions, evaluate_tandem
from .filterbank import FilterBank, design_bank, export_coefficients
from .fusion import (
    FusionMethod,
    fuse_sets,
    map_set_to_unit,
    map_to_unit,
    pair_dataset,
    score_pairs,
    sweep_alpha,
    tune_fusion_classifier,
    write_sweep_csv,
)
from .labels import Gender
from .manifest import Manifest, from_asvspoof2019, parse_selector, read_manifest, read_speaker_genders, write_manifest
from .metrics.bootstrap import StatisticUndefinedOnResampleError, bootstrap_ci
from .metrics.rates import asv_eer, cm_eer, eer_from_arrays
from .metrics.scores import (
    TandemScoreSet,
    TrialScoreSet,
    UnpairedTrialsError,
    read_score_file,
    read_tandem_file,
    write_score_file,
    write_tandem_file,
)
from .metrics.tandem import (
    TdcfMinimum,
    attack_breakdown,
    min_tdcf_unconstrained,
    tdcf_surface,
    tdcf_unconstrained_normalized,
)
from .pipeline import build_group_models, embed_manifest
from .pmf import export_model_csv, load_model, save_model
from .report import (
    MetricRow,
    format_table,
    mismatch_indicators,
    write_attack_csv,
    write_metrics_csv,
    write_score_pmf_csv,
    write_surface_csv,
)
from .settings import GenderMode, Settings, dump_toml, load_settings

logger = logging.getLogger(__name__)

MODEL_SUFFIX = ".pmfm"
CLASSIFIER_SUFFIX = ".model"
DEFAULT_MODEL_GROUPS = ["genuine", "spoof", "male", "female"]
# Recogniser scores at or above this are read as male
GENDER_THRESHOLD = 0.5


def setup_logging(verbose: bool = False):
    """Set up logging configuration."""
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format='%(asctime)s | %(levelname)-8s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
    )

    # Quiet down some noisy loggers
    logging.getLogger('numba').setLevel(logging.WARNING)
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('asyncio').setLevel(logging.WARNING)


# Artifact helpers

def _require(path, producer: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, producer)
    return path


def _require_embeddings(prefix, producer: str = "embed") -> EmbeddingTable:
    for path in embedding_paths(prefix):
        _require(path, producer)
    return load_embeddings(prefix)


def _model_path(settings: Settings, name: str) -> Path:
    """Group name -> model file in the models dir; an explicit path is used as-is."""
    candidate = Path(name)
    if candidate.suffix == MODEL_SUFFIX:
        return candidate
    return settings.paths.models_dir / f"{name}{MODEL_SUFFIX}"


def _classifier_path(settings: Settings, name: str) -> Path:
    return settings.paths.classifiers_dir / f"{name}{CLASSIFIER_SUFFIX}"


def _bank_for(manifest: Manifest, settings: Settings) -> FilterBank:
    """Filter bank at the sample rate of the manifest's first audio file."""
    if not len(manifest):
        raise DataError("Manifest has no rows")
    first = manifest.rows[0].path
    rate = read_wav(first).sample_rate_hz
    logger.debug(f"Designing filter bank at {rate} Hz (from {first})")
    return design_bank(rate, settings.filterbank)


def _split(table: EmbeddingTable, subset: str) -> EmbeddingTable:
    return table.select([m.subset == subset for m in table.meta])


def _attack_map(manifest_path) -> Dict[str, str]:
    if manifest_path is None:
        return {}
    return {r.trial_id: r.attack_id for r in read_manifest(manifest_path)}


# Subcommands

def cmd_config(args, settings: Settings) -> int:
    if args.check:
        load_settings(args.check)
        print(f"{args.check}: OK")
        return 0
    print(dump_toml(settings), end="")
    return 0


def cmd_synth(args, settings: Settings) -> int:
    from .synth import generate_corpus

    config = settings.synth.model_copy(update={"seed": settings.section_seed("synth")})
    if args.overlapping:
        config = config.model_copy(update={"overlapping": True})
    out = Path(args.out) if args.out else settings.paths.work_dir / "corpus"
    result = generate_corpus(out, config)
    print(f"Manifest: {result.manifest_path}")
    print(f"ASV scores: {result.asv_scores_path}")
    return 0


def cmd_import_asvspoof(args, settings: Settings) -> int:
    genders = read_speaker_genders(args.speaker_genders) if args.speaker_genders else None
    manifest = from_asvspoof2019(
        _require(args.protocol, "import-asvspoof"),
        args.audio_dir,
        args.subset,
        asv_trials=args.asv_trials,
        speaker_genders=genders,
        default_gender=Gender.from_code(args.gender) if args.gender else Gender.UNKNOWN,
    )
    path = write_manifest(manifest, args.out)
    logger.info(f"Wrote {len(manifest)} rows to {path}")
    return 0


def cmd_build_models(args, settings: Settings) -> int:
    manifest = read_manifest(_require(args.manifest, "synth"))
    if args.subset:
        manifest = manifest.subset(args.subset)
    selectors = [parse_selector(g) for g in (args.group or DEFAULT_MODEL_GROUPS)]
    bank = _bank_for(manifest, settings)
    if args.export_bank:
        export_coefficients(bank, args.export_bank)

    models = asyncio.run(build_group_models(manifest, selectors, bank, settings.pmf.bin_count, settings.threads))
    out_dir = Path(args.out) if args.out else settings.paths.models_dir
    for name, model in models.items():
        path = save_model(model, out_dir / f"{name}{MODEL_SUFFIX}")
        if args.export_csv:
            export_model_csv(model, path.with_suffix(".csv"))
        logger.info(f"Saved model {name!r} ({model.file_count} files) to {path}")
    return 0


def cmd_embed(args, settings: Settings) -> int:
    manifest = read_manifest(_require(args.manifest, "synth"))
    name1, name2 = args.models
    model1 = load_model(_require(_model_path(settings, name1), "build-models"))
    model2 = load_model(_require(_model_path(settings, name2), "build-models"))
    extractor = EmbeddingExtractor(model1, model2, settings.similarity, settings.pmf.epsilon)
    bank = _bank_for(manifest, settings)

    embeddings, metas = asyncio.run(embed_manifest(manifest, extractor, bank, settings.threads, args.subset))
    prefix = Path(args.out) if args.out else settings.paths.embeddings_dir / f"{model1.group_name}_{model2.group_name}"
    save_embeddings(prefix, embeddings, metas)
    return 0


def _gender_eer(model: TrainedModel, data: Dataset) -> float:
    scores = model.score_batch(data.features)
    return eer_from_arrays(scores[data.labels == 1], scores[data.labels == 0])[0]


def _mismatch_rows(trial_ids, true_genders, male_scores, settings: Settings, with_ci: bool = True) -> List[MetricRow]:
    """Per-gender and pooled rate of utterances routed to the wrong gender."""
    recognised = [Gender.MALE.value if s >= GENDER_THRESHOLD else Gender.FEMALE.value for s in male_scores]
    indicators = mismatch_indicators(trial_ids, true_genders, recognised)
    mean = lambda s: float(np.mean(s.scores))  # noqa: E731

    rows = []
    scopes = [(g.value, indicators.select_gender(g)) for g in (Gender.MALE, Gender.FEMALE)]
    scopes.append(("pooled", indicators))
    for scope, part in scopes:
        if not len(part):
            continue
        value = mean(part)
        name = "gender_mismatch"
        if not with_ci:
            rows.append(MetricRow(metric=name, scope=scope, value=value))
            continue
        try:
            estimate = bootstrap_ci(part, mean, m=settings.bootstrap.iterations,
                                    alpha_percent=settings.bootstrap.alpha_percent,
                                    seed=settings.section_seed("bootstrap"),
                                    stratified=settings.bootstrap.stratified)
            rows.append(MetricRow.from_estimate(name, scope, estimate))
        except StatisticUndefinedOnResampleError as e:
            logger.warning(f"No CI for {name} ({scope}): {e}")
            rows.append(MetricRow(metric=name, scope=scope, value=value))
    return rows


def cmd_train_gender(args, settings: Settings) -> int:
    table = _require_embeddings(args.embeddings or settings.paths.embeddings_dir / "male_female")
    config = settings.gender
    if args.kind:
        config = config.model_copy(update={"kind": ModelKind(args.kind)})
    tune_on = args.tune_on or config.tune_on

    train = dataset_from_table(_split(table, "train"), Task.GENDER)
    tune = dataset_from_table(_split(table, tune_on), Task.GENDER)
    tune.require_two_classes()
    seed = settings.section_seed("gender")

    best = None
    for candidate in config.grid():
        model = train_flat_classifier(config.kind, train, candidate, seed, settings.classifier_section(config.kind))
        value = _gender_eer(model, tune)
        logger.info(f"Gender {config.kind.value} {candidate}: {tune_on} EER {value:.4%}")
        if best is None or value < best[1]:
            best = (candidate, value, model)
    candidate, value, model = best
    path = model.save(_classifier_path(settings, "gender"))
    logger.info(f"Best gender recogniser {candidate} ({tune_on} EER {value:.4%}) saved to {path}")

    rows = _mismatch_rows(tune.source_ids, tune.genders, model.score_batch(tune.features), settings,
                          settings.eval.with_ci)
    print(format_table(rows))
    write_metrics_csv(rows, settings.paths.reports_dir / "gender_mismatch.csv")
    return 0


def _cm_variants(settings: Settings) -> List[Variant]:
    if settings.gender_mode is GenderMode.GENDER_INDEPENDENT:
        return [Variant.GENDER_INDEPENDENT]
    return [Variant.MALE, Variant.FEMALE]


def _for_variant(data: Dataset, variant: Variant) -> Dataset:
    if variant is Variant.MALE:
        return data.select_gender(Gender.MALE)
    if variant is Variant.FEMALE:
        return data.select_gender(Gender.FEMALE)
    return data


def cmd_train_cm(args, settings: Settings) -> int:
    table = _require_embeddings(args.embeddings or settings.paths.embeddings_dir / "genuine_spoof")
    train_all = dataset_from_table(_split(table, "train"), Task.CM, FeatureLayout.GROUPED)
    dev_table = _split(table, "dev")
    dev_all = dataset_from_table(dev_table, Task.CM, FeatureLayout.GROUPED) if len(dev_table) else None

    for variant in _cm_variants(settings):
        spec = settings.mlp_spec(variant)
        train = _for_variant(train_all, variant)
        if not len(train):
            raise DataError(f"No {variant.value} training rows in the CM embeddings")
        if settings.smote.enabled:
            train = smote_oversample(train, settings.smote.k_neighbors, settings.section_seed("smote"))
        dev = _for_variant(dev_all, variant) if dev_all is not None else None
        if dev is not None and not len(dev):
            dev = None

        name = f"cm_{variant.value}"
        log_path = settings.paths.classifiers_dir / f"{name}_log.csv" if dev is not None else None
        ocs = settings.ocsoftmax if spec.head is Head.ONE_CLASS_SOFTMAX else None
        model = train_grouped_mlp(train, spec, ocs=ocs, dev=dev, log_path=log_path)
        path = model.save(_classifier_path(settings, name))
        logger.info(f"Saved {variant.value} countermeasure to {path} (digest {model.digest()[:12]})")
    return 0


def _recognised_genders(settings: Settings, args, subset: str, trial_ids: Sequence[str]):
    """Recogniser scores and recognised genders for ``trial_ids``."""
    recogniser = TrainedModel.load(_require(_classifier_path(settings, "gender"), "train-gender"))
    table = _require_embeddings(args.gender_embeddings or settings.paths.embeddings_dir / "male_female")
    table = _split(table, subset)
    index = {m.source_id: i for i, m in enumerate(table.meta)}
    missing = [t for t in trial_ids if t not in index]
    if missing:
        raise DataError(f"{len(missing)} trials lack gender embeddings (first: {missing[0]})")
    rows = table.matrix[[index[t] for t in trial_ids]]
    scores = recogniser.score_batch(rows)
    genders = np.where(scores >= GENDER_THRESHOLD, Gender.MALE.value, Gender.FEMALE.value)
    return scores, genders


def cmd_score(args, settings: Settings) -> int:
    subset = args.subset
    table = _split(_require_embeddings(args.embeddings or settings.paths.embeddings_dir / "genuine_spoof"), subset)
    if not len(table):
        raise DataError(f"No {subset} rows in the CM embeddings")
    trial_ids = [m.source_id for m in table.meta]
    true_genders = np.array([m.gender for m in table.meta], dtype=object)
    mode = settings.gender_mode

    if mode is GenderMode.GENDER_INDEPENDENT:
        route = np.full(len(table), Variant.GENDER_INDEPENDENT.value, dtype=object)
    elif mode is GenderMode.ORACLE_LABELS:
        if np.any(true_genders == Gender.UNKNOWN.value):
            raise DataError("oracle_labels routing needs a known gender for every trial")
        route = true_genders.copy()
    else:
        gender_scores, route = _recognised_genders(settings, args, subset, trial_ids)
        sidecar = TrialScoreSet(scores=gender_scores, classes=[m.trial_class for m in table.meta],
                                genders=true_genders, trial_ids=trial_ids)
        write_score_file(sidecar, settings.paths.scores_dir / f"gender_{subset}.txt")

    scores = np.empty(len(table))
    for variant in set(route):
        model = TrainedModel.load(_require(_classifier_path(settings, f"cm_{variant}"), "train-cm"))
        idx = np.flatnonzero(route == variant)
        raw = model.score_batch(table.matrix[idx])
        scores[idx] = map_to_unit(raw, model.score_range)
        logger.info(f"Scored {idx.size} {subset} trials with the {variant} countermeasure")

    out = Path(args.out) if args.out else settings.paths.scores_dir / f"cm_{subset}.txt"
    result = TrialScoreSet(scores=scores, classes=[m.trial_class for m in table.meta],
                           genders=true_genders, trial_ids=trial_ids)
    write_score_file(result, out)
    logger.info(f"{subset} CM EER {cm_eer(result)[0]:.4%} ({mode.value}); scores in {out}")
    return 0


def _surface(args, tandem: TandemScoreSet, settings: Settings):
    cm, asv = tandem.cm_set(), tandem.asv_set()
    cm_grid, asv_grid, matrix = tdcf_surface(cm, asv, settings.costs, True, settings.eval.tdcf_max_thresholds)
    minimum = min_tdcf_unconstrained(cm, asv, settings.costs, True, settings.eval.tdcf_max_thresholds)
    tau_cm, tau_asv = cm_eer(cm)[1], asv_eer(asv)[1]
    eer_point = TdcfMinimum(value=tdcf_unconstrained_normalized(cm, asv, tau_cm, tau_asv, settings.costs),
                            tau_cm=tau_cm, tau_asv=tau_asv)
    write_surface_csv(args.tdcf_surface, cm_grid, asv_grid, matrix, minimum, eer_point)


def _restrict_to(asv: TrialScoreSet, cm: TrialScoreSet) -> TrialScoreSet:
    """ASV trials that also have a CM score; an ASV file may cover several subsets."""
    wanted = set(cm.trial_ids)
    keep = np.array([t in wanted for t in asv.trial_ids], dtype=bool)
    if not keep.any():
        raise UnpairedTrialsError("No trial appears in both the CM and the ASV score files")
    if not keep.all():
        logger.info(f"Ignoring {int((~keep).sum())} ASV trials without a CM score")
    return asv.take(np.flatnonzero(keep))


def cmd_eval(args, settings: Settings) -> int:
    reports = Path(args.out) if args.out else settings.paths.reports_dir
    if args.tandem:
        tandem = read_tandem_file(_require(args.tandem, "eval"))
    elif args.asv:
        cm_path = Path(args.cm) if args.cm else settings.paths.scores_dir / "cm_eval.txt"
        cm = read_score_file(_require(cm_path, "score"))
        asv = _restrict_to(read_score_file(_require(args.asv, "synth")), cm)
        tandem = TandemScoreSet.pair(cm, asv)
        write_tandem_file(tandem, reports / "tandem.txt")
    else:
        raise ConfigError("eval needs --asv or --tandem")
    logger.info(f"Evaluating {len(tandem)} tandem trials")

    opts = EvalOptions(
        cost=settings.costs,
        asv_cost=settings.asv_costs,
        bootstrap=settings.bootstrap,
        seed=settings.section_seed("bootstrap"),
        max_thresholds=settings.eval.tdcf_max_thresholds,
        ci_max_thresholds=settings.eval.ci_max_thresholds,
        with_ci=settings.eval.with_ci and not args.no_ci,
    )
    rows = evaluate_tandem(tandem, opts)

    if args.gender_scores:
        recognised = read_score_file(_require(args.gender_scores, "score"))
        rows += _mismatch_rows(recognised.trial_ids, recognised.genders, recognised.scores, settings, opts.with_ci)

    print(format_table(rows))
    write_metrics_csv(rows, reports / "metrics.csv")

    attacks = _attack_map(args.manifest)
    if attacks:
        _, tau_asv = asv_eer(tandem.asv_set())
        breakdown = attack_breakdown(tandem.cm_set(), attacks, tandem.asv_set(), tau_asv)
        write_attack_csv(breakdown, reports / "attacks.csv")
    if args.tdcf_surface:
        _surface(args, tandem, settings)
    if args.score_pmf:
        write_score_pmf_csv(args.score_pmf, tandem.cm_set(), attacks, settings.eval.score_pmf_bins)
    return 0


def _load_stream(path, score_range, producer: str) -> TrialScoreSet:
    return map_set_to_unit(read_score_file(_require(path, producer)), score_range)


def cmd_fuse(args, settings: Settings) -> int:
    config = settings.fusion
    method = FusionMethod(args.method) if args.method else config.method
    alpha = args.alpha if args.alpha is not None else config.alpha
    gd = _load_stream(args.gd or settings.paths.scores_dir / "cm_eval.txt", config.gd_range, "score")
    ext = _load_stream(args.external, config.external_range, "score")
    tune_gd = _load_stream(args.gd_tune, config.gd_range, "score") if args.gd_tune else None
    tune_ext = _load_stream(args.external_tune, config.external_range, "score") if args.external_tune else None
    out = Path(args.out) if args.out else settings.paths.scores_dir / "fused_eval.txt"

    if method is FusionMethod.WEIGHTED_AVERAGE:
        if alpha is None:
            if tune_gd is None or tune_ext is None:
                raise ConfigError("Weighted fusion without --alpha needs --gd-tune and --external-tune")
            tuning = sweep_alpha(tune_gd, tune_ext, config.grid_step)
            evaluation = sweep_alpha(gd, ext, config.grid_step)
            write_sweep_csv(settings.paths.reports_dir / "alpha_sweep.csv", tuning, evaluation)
            alpha = tuning.best_alpha
            logger.info(f"Tuned alpha = {alpha:.2f} (tuning EER {tuning.best_eer:.4%})")
        fused = fuse_sets(gd, ext, alpha)
    else:
        if tune_gd is None or tune_ext is None:
            raise ConfigError("Classifier fusion needs --gd-tune and --external-tune training streams")
        train_pairs = pair_dataset(tune_gd, tune_ext)
        eval_pairs = pair_dataset(gd, ext)
        tune_on = args.tune_on or config.tune_on
        tune_pairs = eval_pairs if tune_on == "eval" else train_pairs
        hyperparams, value, model = tune_fusion_classifier(
            train_pairs, tune_pairs, config.classifier_kind, config.grid(), settings.section_seed("fusion"),
            base=settings.classifier_section(config.classifier_kind),
        )
        logger.info(f"Fusion classifier {hyperparams} ({tune_on} EER {value:.4%})")
        fused = score_pairs(model, eval_pairs, gd)

    write_score_file(fused, out)
    print(f"Fused CM EER: {cm_eer(fused)[0]:.4%} ({method.value}) -> {out}")
    return 0


def cmd_pca_export(args, settings: Settings) -> int:
    table = _require_embeddings(args.embeddings)
    if args.subset:
        table = _split(table, args.subset)
    projection = pca_project(table.matrix, dims=args.dims)
    if args.label == "gender":
        labels = [m.gender for m in table.meta]
    else:
        labels = [m.trial_class or "-" for m in table.meta]
    export_pca_csv(args.out, projection, [m.source_id for m in table.meta], labels)
    ratio = ", ".join(f"{r:.3f}" for r in projection.explained_variance_ratio)
    logger.info(f"Explained variance ratio: {ratio}")
    return 0


COMMANDS = {
    "config": cmd_config,
    "synth": cmd_synth,
    "import-asvspoof": cmd_import_asvspoof,
    "build-models": cmd_build_models,
    "embed": cmd_embed,
    "train-gender": cmd_train_gender,
    "train-cm": cmd_train_cm,
    "score": cmd_score,
    "eval": cmd_eval,
    "fuse": cmd_fuse,
    "pca-export": cmd_pca_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmf-sasv",
        description="Time-domain PMF embeddings for spoofing-robust speaker verification",
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose logging')
    parser.add_argument('--config', help='TOML configuration file')
    parser.add_argument('--seed', type=int, help='Global seed')
    parser.add_argument('--threads', type=int, help='Worker threads for per-utterance stages')
    parser.add_argument('--gender-mode', choices=[m.value for m in GenderMode], help='CM routing mode')

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config", help="Print or validate configuration")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--dump", action="store_true", help="Print every setting as TOML (default)")
    group.add_argument("--check", metavar="FILE", help="Validate a TOML file")

    p = sub.add_parser("synth", help="Generate a seeded synthetic corpus")
    p.add_argument("--out", help="Output directory (default: <work_dir>/corpus)")
    p.add_argument("--overlapping", action="store_true", help="Spoofs indistinguishable from genuine speech")

    p = sub.add_parser("import-asvspoof", help="Manifest from ASVspoof 2019 LA protocol files")
    p.add_argument("--protocol", required=True, help="CM protocol file")
    p.add_argument("--audio-dir", required=True, help="Directory of <utterance>.wav files")
    p.add_argument("--subset", required=True, choices=["train", "dev", "eval"])
    p.add_argument("--asv-trials", help="ASV trial list; one manifest row per ASV trial")
    p.add_argument("--speaker-genders", help="Two-column speaker/gender file")
    p.add_argument("--gender", choices=["m", "f"], help="Gender of speakers missing from the map")
    p.add_argument("--out", required=True, help="Manifest to write")

    p = sub.add_parser("build-models", help="Build per-group PMF models")
    p.add_argument("--manifest", required=True)
    p.add_argument("--group", action="append",
                   help="Group name or name=column:value[,column:value]; repeatable")
    p.add_argument("--subset", default="train", help="Manifest subset to pool (empty for all)")
    p.add_argument("--out", help="Model directory (default: <work_dir>/models)")
    p.add_argument("--export-bank", metavar="FILE", help="Write the filter coefficient table")
    p.add_argument("--export-csv", action="store_true", help="Also write each model as CSV")

    p = sub.add_parser("embed", help="Embed manifest rows against a model pair")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", nargs=2, required=True, metavar=("MODEL1", "MODEL2"),
                   help="Group names (or .pmfm paths); embedding = d(model2) - d(model1)")
    p.add_argument("--subset", help="Only embed this subset")
    p.add_argument("--out", help="Output prefix (default: <work_dir>/embeddings/<model1>_<model2>)")

    p = sub.add_parser("train-gender", help="Train the gender recogniser with a grid search")
    p.add_argument("--embeddings", help="Embedding prefix (default: male_female pair)")
    p.add_argument("--kind", choices=["gbdt", "logistic_regression"])
    p.add_argument("--tune-on", choices=["dev", "eval"])

    p = sub.add_parser("train-cm", help="Train the grouped countermeasure networks")
    p.add_argument("--embeddings", help="Embedding prefix (default: genuine_spoof pair)")

    p = sub.add_parser("score", help="Score a subset with the countermeasures")
    p.add_argument("--embeddings", help="CM embedding prefix (default: genuine_spoof pair)")
    p.add_argument("--gender-embeddings", help="Recogniser embedding prefix (default: male_female pair)")
    p.add_argument("--subset", default="eval")
    p.add_argument("--out", help="Score file (default: <work_dir>/scores/cm_<subset>.txt)")

    p = sub.add_parser("eval", help="Tandem metrics with bootstrap CIs")
    p.add_argument("--cm", help="CM score file (default: <work_dir>/scores/cm_eval.txt)")
    p.add_argument("--asv", help="ASV score file")
    p.add_argument("--tandem", metavar="FILE",
                   help="Paired file (trial_id gender class s_cm s_asv) instead of --cm and --asv")
    p.add_argument("--manifest", help="Manifest for the per-attack breakdown")
    p.add_argument("--gender-scores", help="Recogniser score file for mismatch rates")
    p.add_argument("--tdcf-surface", metavar="FILE", help="Write the t-DCF surface CSV")
    p.add_argument("--score-pmf", metavar="FILE", help="Write per-class score histograms")
    p.add_argument("--no-ci", action="store_true", help="Skip bootstrap intervals")
    p.add_argument("--out", help="Report directory (default: <work_dir>/reports)")

    p = sub.add_parser("fuse", help="Fuse the countermeasure with an external one")
    p.add_argument("--gd", help="Evaluation scores of this toolkit's CM")
    p.add_argument("--external", required=True, help="Evaluation scores of the external CM")
    p.add_argument("--gd-tune", help="Tuning/training scores of this toolkit's CM")
    p.add_argument("--external-tune", help="Tuning/training scores of the external CM")
    p.add_argument("--method", choices=[m.value for m in FusionMethod])
    p.add_argument("--alpha", type=float, help="Fixed weight of this toolkit's CM")
    p.add_argument("--tune-on", choices=["dev", "eval"],
                   help="Classifier fusion: pick hyperparameters on the tuning or the evaluation pairs")
    p.add_argument("--out", help="Fused score file (default: <work_dir>/scores/fused_eval.txt)")

    p = sub.add_parser("pca-export", help="Project embeddings on principal components")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=int, default=3, choices=[2, 3])
    p.add_argument("--label", choices=["class", "gender"], default="class")
    p.add_argument("--subset")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.verbose)

    try:
        settings = load_settings(
            args.config,
            seed=args.seed,
            threads=args.threads,
            gender_mode=args.gender_mode,
        )
        return COMMANDS[args.command](args, settings)
    except SasvError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
