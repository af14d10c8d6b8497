import bisect
import math
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.models.headline import BinningScheme, Headline, PairDataset
from app.utils.errors import DataError, ConfigError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def rank_of(clicks: int, scheme: BinningScheme) -> int:
    """
    Restituisce il rank di engagement di un conteggio di clic

    Args:
        clicks: Clic cumulati (intero non negativo)
        scheme: Schema di binning

    Returns:
        L'unico k con lower_bounds[k] <= clicks < lower_bounds[k+1]
    """
    if clicks < 0:
        raise DataError(f"Numero di clic negativo: {clicks}")
    return bisect.bisect_right(scheme.lower_bounds, clicks) - 1


def ranks_of(clicks: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    """Versione vettoriale di rank_of"""
    clicks = np.asarray(clicks)
    if np.any(clicks < 0):
        raise DataError("Numero di clic negativo")
    bounds = np.asarray(scheme.lower_bounds)
    return np.searchsorted(bounds, clicks, side="right") - 1


def group_by_rank(headlines: Sequence[Headline], scheme: BinningScheme) -> Dict[int, List[int]]:
    """Raggruppa gli id per rank, ciascun gruppo ordinato per id"""
    groups: Dict[int, List[int]] = defaultdict(list)
    for headline in sorted(headlines, key=lambda h: h.id):
        groups[rank_of(headline.clicks, scheme)].append(headline.id)
    return dict(groups)


def pair_id_array(
    headlines: Sequence[Headline],
    scheme: BinningScheme,
    M: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Coppie di preferenza come array di id di forma (n, 2)

    Ogni titolo viene accoppiato con min(M, |r|) titoli estratti senza
    reinserimento da ciascun rank superiore r non vuoto. Le coppie tra
    titoli dello stesso rank non vengono mai generate.

    Args:
        headlines: Titoli da accoppiare
        scheme: Schema di binning
        M: Campioni per rank superiore
        rng: Sorgente casuale (di proprietà del chiamante)

    Returns:
        Array con colonne (meno coinvolgente, più coinvolgente)
    """
    if len(headlines) == 0:
        raise DataError("Impossibile generare coppie da un insieme vuoto di titoli")
    if M < 1:
        raise ConfigError(f"M deve essere positivo, ricevuto {M}")

    groups = {rank: np.asarray(ids, dtype=np.int64) for rank, ids in group_by_rank(headlines, scheme).items()}
    ranks = sorted(groups)

    blocks: List[np.ndarray] = []
    for low_rank in ranks:
        low_ids = groups[low_rank]
        for high_rank in (r for r in ranks if r > low_rank):
            members = groups[high_rank]
            k = min(M, len(members))
            # k membri distinti per riga: i primi k di una permutazione casuale
            picks = np.argsort(rng.random((len(low_ids), len(members))), axis=1, kind="stable")[:, :k]
            blocks.append(np.column_stack([np.repeat(low_ids, k), members[picks].ravel()]))

    pairs = np.concatenate(blocks) if blocks else np.empty((0, 2), dtype=np.int64)
    logger.debug(f"Generate {len(pairs)} coppie da {len(headlines)} titoli su {len(ranks)} rank (M={M})")
    return pairs


def generate_pairs(
    headlines: Sequence[Headline],
    scheme: BinningScheme,
    M: int,
    rng: np.random.Generator,
) -> PairDataset:
    """PairDataset validato con le coppie di pair_id_array"""
    return PairDataset.from_tuples(pair_id_array(headlines, scheme, M, rng))


def chronological_split(
    headlines: Sequence[Headline],
    train_fraction: float,
) -> Tuple[List[Headline], List[Headline]]:
    """
    Divide i titoli in ordine cronologico (giorno, id)

    Returns:
        Tupla (train, test) con i primi ceil(train_fraction * n) titoli in train

    Raises:
        DataError: Se uno dei due lati resta vuoto
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction deve essere in (0, 1), ricevuto {train_fraction}")

    n = len(headlines)
    ordered = sorted(headlines, key=lambda h: (h.day, h.id))
    # arrotondamento per assorbire l'errore di rappresentazione della frazione
    n_train = math.ceil(round(train_fraction * n, 9))
    if n_train == 0 or n_train == n:
        raise DataError(
            f"Divisione cronologica con un lato vuoto: train_fraction={train_fraction}, "
            f"n={n}, {n_train} titoli in addestramento e {n - n_train} in test"
        )
    return ordered[:n_train], ordered[n_train:]


def split_indices(n: int, validation_fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indici (train, validation) ordinati di una divisione casuale di n elementi

    La validazione lascia sempre almeno un elemento in addestramento.
    """
    n_val = int(round(validation_fraction * n))
    if n_val >= n:
        n_val = max(n - 1, 0)
    order = rng.permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def split_pairs(
    pairs: PairDataset,
    validation_fraction: float,
    rng: np.random.Generator,
) -> Tuple[PairDataset, PairDataset]:
    """
    Divide casualmente le coppie in addestramento e validazione

    Returns:
        Tupla (train, validation); validation è vuoto se la frazione è 0
    """
    train_indices, val_indices = split_indices(len(pairs), validation_fraction, rng)
    return pairs.subset(train_indices), pairs.subset(val_indices)
