from collections import defaultdict
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from app.models.headline import BinningScheme, Headline, HeadlineCorpus, PairDataset
from app.models.report import EvalReport
from app.services.pairing import ranks_of
from app.services.preference_net import PreferenceNet
from app.utils.errors import DataError

# Uno scorer è una rete oppure una funzione da lista di titoli a punteggi
Scorer = Union[PreferenceNet, Callable[[List[Headline]], Sequence[float]]]


def score_ids(model: Scorer, ids: Sequence[int], corpus: HeadlineCorpus) -> np.ndarray:
    """Punteggi in inferenza per gli id richiesti"""
    if isinstance(model, PreferenceNet):
        return model.score(corpus.embeddings_for(ids))
    return np.asarray(model(corpus.subset(ids)), dtype=np.float64)


def _correct_mask(model: Scorer, pairs: PairDataset, corpus: HeadlineCorpus) -> np.ndarray:
    if len(pairs) == 0:
        raise DataError("Dataset di coppie vuoto: accuratezza non definita")
    ids = sorted(pairs.source_ids)
    scores = dict(zip(ids, score_ids(model, ids, corpus)))
    low = np.array([scores[i] for i in pairs.low_ids()])
    high = np.array([scores[i] for i in pairs.high_ids()])
    # i pareggi contano come errori
    return high > low


def pair_accuracy(model: Scorer, pairs: PairDataset, corpus: HeadlineCorpus) -> float:
    """
    Frazione di coppie ordinate correttamente, cioè con f(high) > f(low)
    """
    return float(_correct_mask(model, pairs, corpus).mean())


def _per_rank_counts(
    correct: np.ndarray,
    pairs: PairDataset,
    corpus: HeadlineCorpus,
    scheme: BinningScheme,
) -> Dict[int, Tuple[int, int]]:
    low_ranks = ranks_of(corpus.clicks_for(pairs.low_ids()), scheme)
    high_ranks = ranks_of(corpus.clicks_for(pairs.high_ids()), scheme)
    counts: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
    for ok, a, b in zip(correct, low_ranks, high_ranks):
        for rank in {int(a), int(b)}:
            counts[rank][0] += int(ok)
            counts[rank][1] += 1
    return {rank: (c[0], c[1]) for rank, c in sorted(counts.items())}


def weighted_pair_accuracy(
    model: Scorer,
    pairs: PairDataset,
    corpus: HeadlineCorpus,
    scheme: BinningScheme,
) -> float:
    """
    Media delle accuratezze per rank

    Ogni coppia appartiene agli insiemi dei suoi due rank; la media è
    calcolata sui soli rank con almeno una coppia.
    """
    return evaluate_pairs(model, pairs, corpus, scheme).weighted_accuracy


def evaluate_pairs(
    model: Scorer,
    pairs: PairDataset,
    corpus: HeadlineCorpus,
    scheme: BinningScheme,
) -> EvalReport:
    """Calcola accuratezza, accuratezza pesata e conteggi per rank"""
    correct = _correct_mask(model, pairs, corpus)
    per_rank = _per_rank_counts(correct, pairs, corpus, scheme)
    ratios = [c / t for c, t in per_rank.values() if t > 0]
    return EvalReport(
        accuracy=float(correct.mean()),
        weighted_accuracy=float(np.mean(ratios)),
        per_rank_accuracy=per_rank,
        n_pairs=len(pairs),
        skipped_ranks=scheme.n_ranks - len(ratios),
    )
