from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.headline import Headline
from app.models.simulation import Policy, NeuralTSConfig
from app.services.preference_net import PreferenceNet
from app.utils.errors import DataError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def _by_id(candidates: Sequence[Headline]) -> List[Headline]:
    if len(candidates) == 0:
        raise DataError("Insieme di candidati vuoto")
    return sorted(candidates, key=lambda h: h.id)


def _embeddings(candidates: Sequence[Headline]) -> np.ndarray:
    return np.array([h.embedding for h in candidates], dtype=np.float64)


def select_greedy(model: PreferenceNet, candidates: Sequence[Headline]) -> int:
    """Candidato con punteggio massimo; a parità vince l'id più basso"""
    ordered = _by_id(candidates)
    scores = model.score(_embeddings(ordered))
    return ordered[int(np.argmax(scores))].id


def neural_ts_posterior(
    model: PreferenceNet,
    candidates: Sequence[Headline],
    nu: float,
    precision: np.ndarray,
) -> Tuple[List[Headline], np.ndarray, np.ndarray, np.ndarray]:
    """
    Media e varianza della posteriore diagonale per ogni candidato

    Returns:
        Tupla (candidati ordinati per id, medie, varianze, gradienti g(x) per riga)
    """
    ordered = _by_id(candidates)
    X = _embeddings(ordered)
    means = model.score(X)
    grads = np.stack([model.score_gradient(x) for x in X])
    variances = nu ** 2 * (grads ** 2 / precision).sum(axis=1)
    return ordered, means, variances, grads


def select_neural_ts(
    model: PreferenceNet,
    candidates: Sequence[Headline],
    nu: float,
    lam: float,
    rng: np.random.Generator,
    precision: Optional[np.ndarray] = None,
) -> int:
    """
    Neural Thompson Sampling con precisione diagonale

    Ogni candidato riceve un punteggio campionato da
    Normal(f(x), nu^2 * sum_j g_j(x)^2 / Z_j); vince il massimo, a parità l'id più basso.

    Args:
        precision: Accumulatore Z; se assente vale lam su ogni coordinata
    """
    if precision is None:
        precision = np.full(model.n_parameters, lam, dtype=np.float64)
    ordered, means, variances, _ = neural_ts_posterior(model, candidates, nu, precision)
    samples = rng.normal(means, np.sqrt(variances))
    return ordered[int(np.argmax(samples))].id


class NeuralTSSampler:
    """Stato della posteriore NeuralTS lungo una simulazione"""

    def __init__(self, config: NeuralTSConfig):
        self.nu = config.nu
        self.lam = config.lam
        self.precision: Optional[np.ndarray] = None

    def select(self, model: PreferenceNet, candidates: Sequence[Headline], rng: np.random.Generator) -> int:
        if self.precision is None or self.precision.size != model.n_parameters:
            self.precision = np.full(model.n_parameters, self.lam, dtype=np.float64)
        ordered, means, variances, grads = neural_ts_posterior(model, candidates, self.nu, self.precision)
        samples = rng.normal(means, np.sqrt(variances))
        index = int(np.argmax(samples))
        # la precisione accumula g∘g del titolo scelto
        self.precision = self.precision + grads[index] ** 2
        return ordered[index].id


def select_random(candidates: Sequence[Headline], rng: np.random.Generator) -> int:
    """Candidato uniforme"""
    ordered = _by_id(candidates)
    return ordered[int(rng.integers(len(ordered)))].id


def select_oracle(candidates: Sequence[Headline], order: str = "best") -> int:
    """
    Oracolo sui clic reali

    Args:
        order: "best" per il massimo dei clic, "second_best" per il migliore tra
               quelli con clic strettamente inferiori al massimo (se non esiste,
               il migliore). A parità vince l'id più basso.
    """
    ranked = sorted(_by_id(candidates), key=lambda h: (-h.clicks, h.id))
    best = ranked[0]
    if order == "best":
        return best.id
    if order == "second_best":
        below = [h for h in ranked if h.clicks < best.clicks]
        return below[0].id if below else best.id
    raise ValueError(f"Ordine oracolo sconosciuto: {order}")


class PolicySelector:
    """Applica la policy configurata a un insieme di candidati"""

    def __init__(self, policy: Policy, neural_ts: NeuralTSConfig):
        self.policy = policy
        self.sampler = NeuralTSSampler(neural_ts) if policy == Policy.NEURAL_TS else None

    @property
    def uses_model(self) -> bool:
        return self.policy in (Policy.GREEDY, Policy.NEURAL_TS)

    def select(self, model: PreferenceNet, candidates: Sequence[Headline], rng: np.random.Generator) -> int:
        if self.policy == Policy.GREEDY:
            return select_greedy(model, candidates)
        if self.policy == Policy.NEURAL_TS:
            return self.sampler.select(model, candidates, rng)
        if self.policy == Policy.RANDOM:
            return select_random(candidates, rng)
        if self.policy == Policy.ORACLE_BEST:
            return select_oracle(candidates, "best")
        if self.policy == Policy.ORACLE_SECOND:
            return select_oracle(candidates, "second_best")
        raise ValueError(f"Policy non supportata: {self.policy}")
