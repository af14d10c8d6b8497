import time
from collections import defaultdict, deque
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.headline import BinningScheme, Headline, HeadlineCorpus, PairDataset
from app.models.simulation import (
    AccuracyPoint,
    DayRecord,
    SimulationConfig,
    SimulationResult,
)
from app.models.training import TrainConfig
from app.services.evaluation import evaluate_pairs
from app.services.pairing import chronological_split, generate_pairs, pair_id_array, split_indices
from app.services.policies import PolicySelector
from app.services.preference_net import PreferenceNet, init_params
from app.services.trainer import train_matrices
from app.utils.errors import DataError
from app.utils.logging_utils import get_logger
from app.utils.seeding import SeedStreams

logger = get_logger(__name__)

# embedding dei lati (meno coinvolgente, più coinvolgente) di ogni coppia
PairMatrices = Tuple[np.ndarray, np.ndarray]


def total_clicks(trajectory: Sequence[DayRecord]) -> int:
    """Somma dei clic dei titoli scelti"""
    return int(sum(record.Y for record in trajectory))


def daily_normalized_clicks(record: DayRecord) -> float:
    """(Y - Y^-) / (Y* - Y^-); vale 1 quando tutti i candidati hanno gli stessi clic"""
    if record.Y_star == record.Y_minus:
        return 1.0
    return (record.Y - record.Y_minus) / (record.Y_star - record.Y_minus)


def normalized_clicks(trajectory: Sequence[DayRecord]) -> float:
    """Somma dei clic normalizzati tra il peggiore e il migliore candidato di ogni giorno"""
    return float(sum(daily_normalized_clicks(record) for record in trajectory))


def candidate_record(
    t: int,
    day: int,
    chosen: Headline,
    candidates: Sequence[Headline],
    model_version: int,
) -> DayRecord:
    clicks = [c.clicks for c in candidates]
    return DayRecord(
        t=t,
        day=day,
        chosen_id=chosen.id,
        Y=chosen.clicks,
        Y_star=max(clicks),
        Y_minus=min(clicks),
        n_candidates=len(candidates),
        model_version=model_version,
    )


def replay_trajectory(corpus: HeadlineCorpus, trajectory: Sequence[DayRecord]) -> List[DayRecord]:
    """Ricalcola Y, Y* e Y^- dal corpus per le scelte registrate"""
    by_day = headlines_by_day(corpus.headlines)
    return [
        candidate_record(r.t, r.day, corpus.get(r.chosen_id), by_day[r.day], r.model_version)
        for r in trajectory
    ]


def audit_feedback_causality(result: SimulationResult, feedback_delay: int) -> List[str]:
    """
    Verifica dalla traiettoria che nessun modello abbia visto feedback futuri

    Returns:
        Lista di violazioni (vuota se il log è coerente)
    """
    violations: List[str] = []
    chosen_at = {r.chosen_id: r.t for r in result.trajectory}
    delivery_steps = set()
    for step, headline_id in result.deliveries:
        delivery_steps.add(step)
        if headline_id not in chosen_at:
            violations.append(f"feedback per {headline_id} mai scelto")
        elif step < chosen_at[headline_id] + feedback_delay:
            violations.append(f"feedback per {headline_id} consegnato al passo {step}, prima della scadenza")
    for step in result.retrain_steps:
        if step not in delivery_steps:
            violations.append(f"riaddestramento al passo {step} senza feedback")
    for record in result.trajectory:
        expected = sum(1 for s in result.retrain_steps if s < record.t)
        if record.model_version != expected:
            violations.append(
                f"passo {record.t}: versione {record.model_version}, attesa {expected}"
            )
    return violations


def accuracy_over_time(
    model_versions: Iterable[Tuple[int, int, PreferenceNet]],
    test_pairs: PairDataset,
    corpus: HeadlineCorpus,
    scheme: BinningScheme,
    cutoff: int,
) -> List[AccuracyPoint]:
    """
    Un punto di accuratezza per ogni modello (t, versione, rete) con t <= cutoff

    La sequenza viene consumata per intero anche oltre il cutoff; ogni rete
    è valutata appena prodotta, quindi un generatore può riusare la memoria
    dei modelli precedenti.

    Args:
        model_versions: Terne (passo, versione, rete) in ordine di passo
        test_pairs: Coppie di test fisse della replica
        corpus: Corpus da cui risolvere gli embedding
        scheme: Schema di binning per l'accuratezza pesata
        cutoff: Ultimo passo valutato

    Returns:
        Serie di accuratezza, vuota se non ci sono coppie di test
    """
    points: List[AccuracyPoint] = []
    for t, version, model in model_versions:
        if t > cutoff or len(test_pairs) == 0:
            continue
        report = evaluate_pairs(model, test_pairs, corpus, scheme)
        points.append(
            AccuracyPoint(
                t=t,
                model_version=version,
                accuracy=report.accuracy,
                weighted_accuracy=report.weighted_accuracy,
            )
        )
    return points


def headlines_by_day(headlines: Iterable[Headline]) -> Dict[int, List[Headline]]:
    groups: Dict[int, List[Headline]] = defaultdict(list)
    for headline in sorted(headlines, key=lambda h: (h.day, h.id)):
        groups[headline.day].append(headline)
    return dict(groups)


def evaluation_split(
    corpus: HeadlineCorpus,
    config: SimulationConfig,
    streams: SeedStreams,
) -> Tuple[List[Headline], List[Headline], PairDataset]:
    """
    Divisione cronologica e coppie di test fisse della replica

    Le coppie di test sono la prima estrazione dello stream di pairing, così
    i modelli di riferimento supervisionati possono ricostruirle con un
    SeedStreams nuovo dello stesso seed.
    """
    train_split, test_split = chronological_split(corpus.headlines, config.train_fraction)
    test_pairs = generate_pairs(test_split, config.scheme, config.test_pairing_M, streams.pairing)
    return train_split, test_split, test_pairs


def sample_warmup(
    corpus: HeadlineCorpus,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> List[Headline]:
    """Storia iniziale: titoli estratti uniformemente dalla finestra di warm-up"""
    pool = sorted((h for h in corpus if h.day < config.warmup_window_days), key=lambda h: h.id)
    if not pool:
        raise DataError(f"Nessun titolo nei primi {config.warmup_window_days} giorni per il warm-up")
    size = config.warmup_sample_size
    if len(pool) < size:
        logger.warning(f"Finestra di warm-up con soli {len(pool)} titoli (richiesti {size})")
        size = len(pool)
    indices = np.sort(rng.choice(len(pool), size=size, replace=False))
    return [pool[int(i)] for i in indices]


def default_eval_cutoff(active_days: Sequence[int], test_start_day: Optional[int]) -> int:
    """Ultimo passo prima del primo insieme di candidati del periodo di test"""
    if test_start_day is None:
        return len(active_days)
    for step, day in enumerate(active_days, start=1):
        if day >= test_start_day:
            return step - 1
    return len(active_days)


class OnlineLearner:
    """
    Mantiene la storia osservata e riaddestra il modello di preferenza

    Le coppie della storia restano array di id e di embedding numpy. Il primo
    modello usa lo schedule completo di config.retrain; i successivi partono
    dal modello precedente con epoche e pazienza limitate da
    warm_start_max_epochs e warm_start_patience, su al più
    warm_start_max_pairs coppie estratte dalla storia corrente.
    """

    def __init__(self, corpus: HeadlineCorpus, config: SimulationConfig, streams: SeedStreams):
        self.corpus = corpus
        self.config = config
        self.streams = streams
        self.history: List[Headline] = []
        self.model: Optional[PreferenceNet] = None

    def _new_net(self) -> PreferenceNet:
        retrain = self.config.retrain
        return init_params(self.corpus.dimension, retrain.hidden_dim, retrain.n_blocks, self.streams.init)

    def train_config(self, warm: bool) -> TrainConfig:
        retrain = self.config.retrain
        if not warm:
            return retrain
        caps = {}
        if self.config.warm_start_max_epochs is not None:
            caps["max_epochs"] = min(retrain.max_epochs, self.config.warm_start_max_epochs)
        if self.config.warm_start_patience is not None:
            caps["early_stop_patience"] = min(retrain.early_stop_patience, self.config.warm_start_patience)
        return retrain.model_copy(update=caps)

    def pair_matrices(self, warm: bool) -> Tuple[Optional[PairMatrices], Optional[PairMatrices]]:
        """Matrici (addestramento, validazione) delle coppie della storia corrente"""
        pairs = pair_id_array(self.history, self.config.scheme, self.config.pairing_M, self.streams.pairing)
        if len(pairs) == 0:
            return None, None
        cap = self.config.warm_start_max_pairs
        if warm and cap is not None and len(pairs) > cap:
            pairs = pairs[np.sort(self.streams.training.choice(len(pairs), size=cap, replace=False))]
        X_low = self.corpus.embeddings_for(pairs[:, 0])
        X_high = self.corpus.embeddings_for(pairs[:, 1])
        if len(self.history) < self.config.min_history_for_validation:
            return (X_low, X_high), None
        train_idx, val_idx = split_indices(len(pairs), self.config.retrain.validation_fraction, self.streams.training)
        validation = (X_low[val_idx], X_high[val_idx]) if len(val_idx) else None
        return (X_low[train_idx], X_high[train_idx]), validation

    def fit(self) -> bool:
        """
        Addestra il modello successivo sulla storia corrente

        Returns:
            False se la storia non produce coppie (il modello resta invariato)
        """
        warm = self.model is not None and not self.config.cold_restart
        training, validation = self.pair_matrices(warm)
        if training is None:
            if self.model is None:
                raise DataError("La storia di warm-up non produce coppie: tutti i titoli nello stesso rank")
            logger.warning(f"Storia di {len(self.history)} titoli senza coppie: modello invariato")
            return False

        net = self.model.copy() if warm else self._new_net()
        self.model, _ = train_matrices(
            net, training[0], training[1], validation, self.train_config(warm), self.streams.training
        )
        return True


def run_simulation(
    corpus: HeadlineCorpus,
    config: SimulationConfig,
    rng: Union[np.random.Generator, SeedStreams],
) -> SimulationResult:
    """
    Simulazione bandit contestuale con feedback ritardato

    Al passo t (giorni con almeno un titolo dopo il warm-up) la policy sceglie
    con f_{t-1}, il feedback viene accodato per il passo t + ritardo, e i
    feedback scaduti vengono consegnati; se ne arriva almeno uno la storia
    viene estesa e si addestra f_t, altrimenti f_t = f_{t-1}.

    Args:
        corpus: Corpus completo
        config: Configurazione della simulazione
        rng: Generatore o stream di seed della replica

    Returns:
        Traiettoria, serie di accuratezza e log delle consegne
    """
    streams = rng if isinstance(rng, SeedStreams) else SeedStreams.from_rng(rng)
    start_time = time.time()

    _, test_split, test_pairs = evaluation_split(corpus, config, streams)

    warmup = sample_warmup(corpus, config, streams.pairing)
    by_day = headlines_by_day(h for h in corpus if h.day >= config.warmup_window_days)
    active_days = sorted(by_day)
    if not active_days:
        raise DataError(f"Nessun titolo dopo i {config.warmup_window_days} giorni di warm-up")

    cutoff = config.eval_cutoff_day
    if cutoff is None:
        cutoff = default_eval_cutoff(active_days, test_split[0].day)

    if len(test_pairs) == 0:
        logger.warning("Nessuna coppia di test: la serie di accuratezza resterà vuota")

    logger.info(
        f"Simulazione {config.policy.value} (seed {streams.seed}): {len(active_days)} passi, "
        f"warm-up {len(warmup)} titoli, cutoff {cutoff}"
    )

    learner = OnlineLearner(corpus, config, streams)
    learner.history.extend(warmup)
    selector = PolicySelector(config.policy, config.neural_ts)
    result = SimulationResult(
        policy=config.policy,
        eval_cutoff=cutoff,
        warmup_ids=[h.id for h in warmup],
        history_size_at_cutoff=len(warmup),
    )

    def model_versions() -> Iterator[Tuple[int, int, PreferenceNet]]:
        learner.fit()
        yield 0, 0, learner.model

        pending: Deque[Tuple[int, int]] = deque()
        for t, day in enumerate(active_days, start=1):
            version = len(result.retrain_steps)
            candidates = by_day[day]
            chosen_id = selector.select(learner.model, candidates, streams.policy)
            result.trajectory.append(candidate_record(t, day, corpus.get(chosen_id), candidates, version))
            pending.append((t + config.feedback_delay_days, chosen_id))

            arrived = []
            while pending and pending[0][0] <= t:
                arrived.append(pending.popleft()[1])
            if arrived:
                learner.history.extend(corpus.get(i) for i in arrived)
                result.deliveries.extend([t, i] for i in arrived)
                if learner.fit():
                    result.retrain_steps.append(t)
                    yield t, len(result.retrain_steps), learner.model
                logger.debug(
                    f"Passo {t}: {len(arrived)} feedback, storia {len(learner.history)}, "
                    f"versione {len(result.retrain_steps)}"
                )
            if t <= cutoff:
                result.history_size_at_cutoff = len(learner.history)

    result.accuracy_series = accuracy_over_time(model_versions(), test_pairs, corpus, config.scheme, cutoff)
    result.final_history_size = len(learner.history)
    result.model_versions = len(result.retrain_steps)

    elapsed_ms = int((time.time() - start_time) * 1000)
    logger.info(
        f"Simulazione {config.policy.value} (seed {streams.seed}) completata: "
        f"clic totali {total_clicks(result.trajectory)}, "
        f"normalizzati {normalized_clicks(result.trajectory):.2f}, {elapsed_ms}ms"
    )
    return result
