import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from app.models.corpus import SyntheticSpec
from app.models.experiment import ExperimentConfig, RunMode
from app.models.headline import Headline, HeadlineCorpus, PairDataset
from app.models.report import (
    AggregateRow,
    BaselineResult,
    ExperimentSummary,
    OnlineSeedResult,
    PolicyComparison,
    SupervisedSeedResult,
)
from app.models.simulation import Policy, SimulationConfig
from app.models.training import TrainConfig, TrainHistory
from app.services.checkpoint import save_checkpoint
from app.services.corpus_io import load_corpus, write_corpus
from app.services.evaluation import evaluate_pairs
from app.services.pairing import chronological_split, generate_pairs, split_pairs
from app.services.preference_net import PreferenceNet, init_params
from app.services.plotting import emit_plots
from app.services.simulation import (
    daily_normalized_clicks,
    evaluation_split,
    normalized_clicks,
    run_simulation,
    total_clicks,
)
from app.services.synthetic import generate_synthetic
from app.services.trainer import train
from app.utils.errors import ConfigError, DataError
from app.utils.file_utils import (
    ACCURACY_CSV,
    BASELINES_CSV,
    COMPARISONS_CSV,
    ONLINE_SEEDS_CSV,
    ONLINE_SUMMARY_CSV,
    SUMMARY_JSON,
    SUPERVISED_HISTORY_CSV,
    SUPERVISED_SEEDS_CSV,
    SUPERVISED_SUMMARY_CSV,
    TRAJECTORY_CSV,
    to_frame,
    write_csv,
    write_json,
)
from app.utils.logging_utils import get_logger
from app.utils.seeding import SeedStreams
from app.utils.validators import validate_output_dir

logger = get_logger(__name__)

BASELINE_FULL = "SupervisedFull"
BASELINE_SAMPLED = "SupervisedSampled"

# Confronti riportati in comparisons.csv (policy_a - policy_b)
COMPARISON_PAIRS = [
    (Policy.GREEDY, Policy.RANDOM),
    (Policy.NEURAL_TS, Policy.RANDOM),
    (Policy.GREEDY, Policy.NEURAL_TS),
]

TRAJECTORY_COLUMNS = [
    "seed", "policy", "t", "day", "chosen_id", "Y", "Y_star", "Y_minus",
    "n_candidates", "model_version", "normalized",
]
ACCURACY_COLUMNS = ["seed", "policy", "t", "model_version", "accuracy", "weighted_accuracy"]
HISTORY_COLUMNS = ["seed", "epoch", "train_loss", "val_loss", "lr"]


@lru_cache(maxsize=4)
def _cached_corpus_file(path: str) -> HeadlineCorpus:
    return load_corpus(path)


@lru_cache(maxsize=4)
def _cached_synthetic(spec_json: str, seed: Optional[int]) -> HeadlineCorpus:
    spec = SyntheticSpec.model_validate_json(spec_json)
    rng = SeedStreams.from_seed(seed).data if seed is not None else np.random.default_rng(spec.seed)
    return generate_synthetic(spec, rng)


def resolve_corpus(config: ExperimentConfig, seed: int) -> HeadlineCorpus:
    """
    Corpus della replica: da file, oppure sintetico

    Un corpus sintetico senza seed proprio viene generato dallo stream "data"
    del seed di replica.

    Raises:
        ConfigError: Se sono indicati sia un file sia una specifica sintetica, o nessuno dei due
    """
    if config.corpus_path and config.synthetic is not None:
        raise ConfigError("Indicare un corpus da file oppure una specifica sintetica, non entrambi")
    if config.corpus_path:
        return _cached_corpus_file(str(config.corpus_path))
    if config.synthetic is not None:
        spec = config.synthetic
        return _cached_synthetic(spec.model_dump_json(), seed if spec.seed is None else None)
    raise ConfigError("Nessun corpus indicato: usare --corpus oppure --synthetic")


def resolve_workers(workers: int) -> int:
    """0 = un worker per core fisico"""
    if workers > 0:
        return workers
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def run_tasks(
    func: Callable[..., Any],
    tasks: Sequence[Tuple[Any, ...]],
    workers: int,
    sort_key: Callable[[Any], Any],
) -> List[Any]:
    """
    Esegue i task (in processo se workers = 1) e ordina i risultati

    L'ordine finale dipende solo da sort_key, non dall'ordine di completamento.
    """
    n_workers = min(resolve_workers(workers), max(len(tasks), 1))
    if n_workers == 1:
        results = [func(*task) for task in tasks]
    else:
        logger.info(f"Esecuzione di {len(tasks)} repliche su {n_workers} worker")
        results = []
        with ProcessPoolExecutor(max_workers=n_workers) as executor:
            futures = [executor.submit(func, *task) for task in tasks]
            for i, future in enumerate(as_completed(futures), start=1):
                results.append(future.result())
                logger.debug(f"Repliche completate: {i}/{len(tasks)}")
    return sorted(results, key=sort_key)


def aggregate(frame: pd.DataFrame, metrics: Sequence[str], group_by: Optional[str] = None) -> List[AggregateRow]:
    """
    Media e deviazione standard campionaria (ddof=1, 0 con un solo seed)
    """
    rows: List[AggregateRow] = []
    groups = [("all", frame)] if group_by is None else list(frame.groupby(group_by, sort=True))
    for group, data in groups:
        for metric in metrics:
            values = data[metric].to_numpy(dtype=np.float64)
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            rows.append(
                AggregateRow(group=str(group), metric=metric, n_seeds=len(values), mean=float(np.mean(values)), std=std)
            )
    return rows


def compare_policies(
    online: pd.DataFrame,
    pairs: Iterable[Tuple[Policy, Policy]] = COMPARISON_PAIRS,
    metric: str = "normalized_clicks",
) -> List[PolicyComparison]:
    """
    Differenza media appaiata per seed tra due policy e il suo errore standard

    Le coppie con una policy assente dai risultati vengono saltate.
    """
    comparisons: List[PolicyComparison] = []
    table = online.pivot(index="seed", columns="policy", values=metric)
    for policy_a, policy_b in pairs:
        a, b = policy_a.value, policy_b.value
        if a not in table.columns or b not in table.columns:
            continue
        diff = (table[a] - table[b]).dropna().to_numpy(dtype=np.float64)
        n = len(diff)
        if n == 0:
            continue
        std_error = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        comparisons.append(
            PolicyComparison(
                policy_a=a, policy_b=b, metric=metric, n_seeds=n,
                mean_difference=float(np.mean(diff)), std_error=std_error,
            )
        )
    return comparisons


def _comparison_frame(comparisons: List[PolicyComparison]) -> pd.DataFrame:
    return to_frame(
        [{**c.model_dump(), "z_score": c.z_score} for c in comparisons],
        columns=["policy_a", "policy_b", "metric", "n_seeds", "mean_difference", "std_error", "z_score"],
    )


def _check_comparisons(comparisons: List[PolicyComparison]) -> List[str]:
    notes = []
    for c in comparisons:
        if c.policy_b == Policy.RANDOM.value and c.z_score < 2:
            notes.append(f"{c.policy_a} non supera Random di 2 errori standard (z={c.z_score:.2f})")
        if {c.policy_a, c.policy_b} == {Policy.GREEDY.value, Policy.NEURAL_TS.value} and abs(c.z_score) >= 2:
            notes.append(f"{c.policy_a} e {c.policy_b} differiscono di almeno 2 errori standard (z={c.z_score:.2f})")
    for note in notes:
        logger.warning(note)
    return notes


def fit_supervised(
    headlines: Sequence[Headline],
    corpus: HeadlineCorpus,
    simulation: SimulationConfig,
    train_config: TrainConfig,
    streams: SeedStreams,
    use_validation: bool = True,
) -> Tuple[PreferenceNet, TrainHistory, int, int]:
    """
    Coppie M dai titoli, divisione addestramento/validazione, addestramento

    Returns:
        Tupla (rete, storico, coppie di addestramento, coppie di validazione)
    """
    pairs = generate_pairs(headlines, simulation.scheme, simulation.pairing_M, streams.pairing)
    if len(pairs) == 0:
        raise DataError("I titoli di addestramento non producono coppie: tutti nello stesso rank")
    if use_validation:
        train_pairs, val_pairs = split_pairs(pairs, train_config.validation_fraction, streams.training)
    else:
        train_pairs, val_pairs = pairs, PairDataset()
    net = init_params(corpus.dimension, train_config.hidden_dim, train_config.n_blocks, streams.init)
    net, history = train(net, train_pairs, val_pairs, corpus, train_config, streams.training)
    return net, history, len(train_pairs), len(val_pairs)


def supervised_seed(config: ExperimentConfig, seed: int) -> Tuple[SupervisedSeedResult, List[Dict[str, Any]]]:
    """Una replica supervisionata: split cronologico, addestramento, valutazione sul test"""
    streams = SeedStreams.from_seed(seed)
    corpus = resolve_corpus(config, seed)
    simulation = config.simulation

    train_split, test_split = chronological_split(corpus.headlines, simulation.train_fraction)
    net, history, n_train_pairs, n_val_pairs = fit_supervised(train_split, corpus, simulation, config.train, streams)
    test_pairs = generate_pairs(test_split, simulation.scheme, simulation.test_pairing_M, streams.pairing)
    report = evaluate_pairs(net, test_pairs, corpus, simulation.scheme)

    if config.save_models:
        save_checkpoint(net, Path(config.output_dir) / "models" / f"seed_{seed:03d}.npz")

    logger.info(f"Seed {seed}: accuratezza {report.accuracy:.4f}, pesata {report.weighted_accuracy:.4f}")
    result = SupervisedSeedResult(
        seed=seed,
        n_train_headlines=len(train_split),
        n_test_headlines=len(test_split),
        n_train_pairs=n_train_pairs,
        n_val_pairs=n_val_pairs,
        epochs=len(history),
        best_epoch=history.best_epoch,
        report=report,
    )
    epochs = [{"seed": seed, **record.model_dump()} for record in history.epochs]
    return result, epochs


def supervised_frame(results: Sequence[SupervisedSeedResult]) -> pd.DataFrame:
    """
    Una riga per seed con i conteggi per rank; i rank assenti dalle coppie
    di test di un seed valgono 0
    """
    frame = to_frame([result.to_record() for result in results])
    rank_columns = sorted(
        (c for c in frame.columns if c.startswith("rank_")),
        key=lambda c: (int(c.split("_")[1]), c),
    )
    frame = frame[[c for c in frame.columns if not c.startswith("rank_")] + rank_columns]
    if rank_columns:
        frame[rank_columns] = frame[rank_columns].fillna(0).astype(np.int64)
    return frame


def run_supervised(config: ExperimentConfig) -> ExperimentSummary:
    """
    Esperimento supervisionato su tutti i seed

    Scrive supervised_seeds.csv, supervised_history.csv e supervised_summary.csv.
    """
    output_dir = validate_output_dir(config.output_dir)
    resolve_corpus(config, config.seeds[0])
    tasks = [(config, seed) for seed in config.seeds]
    outcomes = run_tasks(supervised_seed, tasks, config.workers, sort_key=lambda o: o[0].seed)

    seeds_frame = supervised_frame([result for result, _ in outcomes])
    history_frame = to_frame([row for _, rows in outcomes for row in rows], columns=HISTORY_COLUMNS)
    aggregates = aggregate(seeds_frame, ["accuracy", "weighted_accuracy"])

    files = [
        write_csv(seeds_frame, output_dir / SUPERVISED_SEEDS_CSV),
        write_csv(history_frame, output_dir / SUPERVISED_HISTORY_CSV),
        write_csv(to_frame(aggregates), output_dir / SUPERVISED_SUMMARY_CSV),
    ]
    for row in aggregates:
        logger.info(f"{row.metric}: {row.mean * 100:.2f}% (±{row.std * 100:.2f}) su {row.n_seeds} seed")

    return ExperimentSummary(
        mode=RunMode.SUPERVISED.value,
        run_id="",
        output_dir=str(output_dir),
        files=[p.name for p in files],
        aggregates=aggregates,
    )


def online_seed(
    config: ExperimentConfig,
    seed: int,
    policy: Policy,
) -> Tuple[OnlineSeedResult, List[Dict[str, Any]], List[Dict[str, Any]]]:
    """Una simulazione completa per (seed, policy)"""
    corpus = resolve_corpus(config, seed)
    simulation = config.simulation.model_copy(update={"policy": policy})
    result = run_simulation(corpus, simulation, SeedStreams.from_seed(seed))

    trajectory = [
        {"seed": seed, "policy": policy.value, **record.model_dump(), "normalized": daily_normalized_clicks(record)}
        for record in result.trajectory
    ]
    accuracy = [
        {"seed": seed, "policy": policy.value, **point.model_dump()}
        for point in result.accuracy_series
    ]
    summary = OnlineSeedResult(
        seed=seed,
        policy=policy.value,
        T=result.T,
        total_clicks=total_clicks(result.trajectory),
        normalized_clicks=normalized_clicks(result.trajectory),
        final_history_size=result.final_history_size,
        history_size_at_cutoff=result.history_size_at_cutoff,
        model_versions=result.model_versions,
    )
    return summary, trajectory, accuracy


def baseline_seed(config: ExperimentConfig, seed: int, history_size: int) -> List[BaselineResult]:
    """
    Modelli supervisionati di riferimento valutati sulle coppie di test della replica

    SupervisedFull usa tutto lo split di addestramento; SupervisedSampled un
    campione casuale con tanti titoli quanti la storia online al passo di
    cutoff, cioè quanti ne ha visti l'ultimo modello valutato.
    """
    corpus = resolve_corpus(config, seed)
    simulation = config.simulation
    results = []

    for baseline in (BASELINE_FULL, BASELINE_SAMPLED):
        streams = SeedStreams.from_seed(seed)
        train_split, _, test_pairs = evaluation_split(corpus, simulation, streams)
        if len(test_pairs) == 0:
            logger.warning(f"Seed {seed}: nessuna coppia di test, riferimento {baseline} saltato")
            continue
        headlines = list(train_split)
        if baseline == BASELINE_SAMPLED and history_size < len(headlines):
            indices = np.sort(streams.pairing.choice(len(headlines), size=history_size, replace=False))
            headlines = [headlines[int(i)] for i in indices]
        use_validation = len(headlines) >= simulation.min_history_for_validation
        net, _, _, _ = fit_supervised(headlines, corpus, simulation, simulation.retrain, streams, use_validation)
        report = evaluate_pairs(net, test_pairs, corpus, simulation.scheme)
        results.append(
            BaselineResult(
                seed=seed,
                baseline=baseline,
                n_headlines=len(headlines),
                accuracy=report.accuracy,
                weighted_accuracy=report.weighted_accuracy,
            )
        )
    return results


def run_online(config: ExperimentConfig) -> ExperimentSummary:
    """
    Simulazioni online per ogni (seed, policy), riferimenti supervisionati e confronti

    Scrive trajectory.csv, accuracy.csv, online_seeds.csv, online_summary.csv,
    baselines.csv e comparisons.csv; con config.plot anche le figure.
    """
    output_dir = validate_output_dir(config.output_dir)
    resolve_corpus(config, config.seeds[0])

    tasks = [(config, seed, policy) for seed in config.seeds for policy in config.policies]
    outcomes = run_tasks(online_seed, tasks, config.workers, sort_key=lambda o: (o[0].seed, o[0].policy))

    history_sizes: Dict[int, int] = {}
    for summary, _, _ in outcomes:
        history_sizes.setdefault(summary.seed, summary.history_size_at_cutoff)
    baseline_tasks = [(config, seed, history_sizes[seed]) for seed in config.seeds]
    baseline_outcomes = run_tasks(baseline_seed, baseline_tasks, config.workers, sort_key=lambda rows: rows[0].seed if rows else -1)

    online_frame = to_frame([summary for summary, _, _ in outcomes])
    trajectory_frame = to_frame([row for _, rows, _ in outcomes for row in rows], columns=TRAJECTORY_COLUMNS)
    accuracy_frame = to_frame([row for _, _, rows in outcomes for row in rows], columns=ACCURACY_COLUMNS)
    baselines_frame = to_frame(
        [row for rows in baseline_outcomes for row in rows],
        columns=["seed", "baseline", "n_headlines", "accuracy", "weighted_accuracy"],
    )

    aggregates = aggregate(online_frame, ["total_clicks", "normalized_clicks"], group_by="policy")
    if not baselines_frame.empty:
        aggregates += aggregate(baselines_frame, ["accuracy", "weighted_accuracy"], group_by="baseline")
    comparisons = compare_policies(online_frame)
    notes = _check_comparisons(comparisons)

    files = [
        write_csv(trajectory_frame, output_dir / TRAJECTORY_CSV),
        write_csv(accuracy_frame, output_dir / ACCURACY_CSV),
        write_csv(online_frame, output_dir / ONLINE_SEEDS_CSV),
        write_csv(to_frame(aggregates), output_dir / ONLINE_SUMMARY_CSV),
        write_csv(baselines_frame, output_dir / BASELINES_CSV),
        write_csv(_comparison_frame(comparisons), output_dir / COMPARISONS_CSV),
    ]
    for row in aggregates:
        logger.info(f"{row.group} {row.metric}: {row.mean:.2f} (±{row.std:.2f}) su {row.n_seeds} seed")

    if config.plot:
        files += emit_plots(output_dir)

    return ExperimentSummary(
        mode=RunMode.ONLINE.value,
        run_id="",
        output_dir=str(output_dir),
        files=[p.name for p in files],
        aggregates=aggregates,
        comparisons=comparisons,
        processing_notes=notes,
    )


def run_synth_gen(config: ExperimentConfig) -> ExperimentSummary:
    """Genera il corpus sintetico del primo seed e lo scrive in corpus.jsonl"""
    if config.synthetic is None:
        raise ConfigError("La modalità synth-gen richiede una specifica sintetica")
    if config.corpus_path:
        raise ConfigError("Indicare un corpus da file oppure una specifica sintetica, non entrambi")
    output_dir = validate_output_dir(config.output_dir)
    corpus = resolve_corpus(config, config.seeds[0])
    path = write_corpus(corpus, output_dir / "corpus.jsonl")
    return ExperimentSummary(
        mode=RunMode.SYNTH_GEN.value,
        run_id="",
        output_dir=str(output_dir),
        files=[path.name],
        processing_notes=[f"{len(corpus)} titoli, d={corpus.dimension}"],
    )


def run_plot(config: ExperimentConfig) -> ExperimentSummary:
    """Figure da una cartella di risultati online esistente"""
    output_dir = Path(config.output_dir)
    files = emit_plots(output_dir)
    return ExperimentSummary(
        mode=RunMode.PLOT.value,
        run_id="",
        output_dir=str(output_dir),
        files=[p.name for p in files],
    )


RUNNERS: Dict[RunMode, Callable[[ExperimentConfig], ExperimentSummary]] = {
    RunMode.SUPERVISED: run_supervised,
    RunMode.ONLINE: run_online,
    RunMode.SYNTH_GEN: run_synth_gen,
    RunMode.PLOT: run_plot,
}


def run_experiment(config: ExperimentConfig, run_id: str = "") -> ExperimentSummary:
    """Esegue la modalità richiesta e scrive summary.json nella cartella di output"""
    start_time = time.time()
    summary = RUNNERS[config.mode](config)
    summary.run_id = run_id
    summary.processing_notes.append(f"Tempo di esecuzione: {int((time.time() - start_time) * 1000)} ms")
    if config.mode != RunMode.PLOT:
        write_json(summary.model_dump(mode="json"), Path(summary.output_dir) / SUMMARY_JSON)
    return summary
