from typing import Sequence

import numpy as np

from app.models.corpus import SyntheticSpec
from app.models.headline import BinningScheme, Headline, HeadlineCorpus
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def latent_direction(d: int, seed: int) -> np.ndarray:
    """Vettore unitario nascosto che definisce la qualità latente q = w·x"""
    w = np.random.default_rng(seed).standard_normal(d)
    return w / np.linalg.norm(w)


def calibrated_clicks(
    quality: np.ndarray,
    scheme: BinningScheme,
    target_counts: Sequence[int],
    pareto_alpha: float,
) -> np.ndarray:
    """
    Mappa monotona da qualità a clic, calibrata sui quantili del campione

    I titoli ordinati per qualità vengono assegnati ai rank secondo le
    proporzioni di target_counts. Dentro un rank limitato i clic sono
    interpolati in scala logaritmica tra i due limiti (linearmente se il
    limite inferiore è 0); nel rank superiore seguono una coda di Pareto.

    Il rumore entra nella qualità prima della mappa (qualità + noise_scale *
    N(0, 1)), non come fattore sui clic. Con una mappa exp(a*q + b) sarebbe
    esattamente un fattore log-normale exp(a * noise_scale * N(0, 1)); la
    mappa a quantili ne conserva il rimescolamento tra titoli di qualità
    vicina e mantiene esatte le proporzioni per rank a ogni livello di rumore.
    """
    n = len(quality)
    proportions = np.asarray(target_counts, dtype=np.float64)
    proportions = proportions / proportions.sum()
    ends = np.rint(np.cumsum(proportions) * n).astype(np.int64)
    ends[-1] = n

    bounds = scheme.lower_bounds
    order = np.argsort(quality, kind="stable")
    clicks = np.zeros(n, dtype=np.int64)

    start = 0
    for k, end in enumerate(ends):
        members = order[start:end]
        start = end
        m = len(members)
        if m == 0:
            continue
        p = (np.arange(m) + 0.5) / m
        lower = bounds[k]
        if k == len(bounds) - 1:
            values = np.floor(lower * (1.0 - p) ** (-1.0 / pareto_alpha))
        else:
            upper = bounds[k + 1]
            if lower == 0:
                values = np.floor(upper * p)
            else:
                values = np.floor(np.exp(np.log(lower) + p * (np.log(upper) - np.log(lower))))
            values = np.clip(values, lower, upper - 1)
        clicks[members] = np.maximum(values, lower).astype(np.int64)

    return clicks


def assign_days(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """
    Giorni di pubblicazione ordinati: un titolo per ogni giorno attivo,
    il resto distribuito con una multinomiale sui giorni attivi, con pesi
    in calo lineare da 1 a 1 - rate_decay
    """
    post_warmup = np.arange(spec.warmup_days, spec.n_days)
    empty = rng.choice(post_warmup, size=spec.empty_days, replace=False) if spec.empty_days else np.array([], dtype=np.int64)
    active = np.setdiff1d(np.arange(spec.n_days), empty)
    weights = 1.0 - spec.rate_decay * np.linspace(0.0, 1.0, len(active))
    extra = rng.multinomial(spec.n_headlines - len(active), weights / weights.sum())
    return np.repeat(active, 1 + extra)


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> HeadlineCorpus:
    """
    Genera un corpus sintetico con clic a coda pesante

    Gli embedding sono normali standard; la qualità latente è w·x più un
    rumore gaussiano di ampiezza noise_scale (rumore moltiplicativo
    log-normale sui clic). Gli id seguono l'ordine cronologico.

    Args:
        spec: Parametri del generatore
        rng: Sorgente casuale (ignorata se spec.seed è fissato)

    Returns:
        Corpus sintetico
    """
    if spec.seed is not None:
        rng = np.random.default_rng(spec.seed)

    w = latent_direction(spec.d, spec.latent_weight_seed)
    X = rng.standard_normal((spec.n_headlines, spec.d))
    quality = X @ w
    if spec.noise_scale > 0:
        quality = quality + spec.noise_scale * rng.standard_normal(spec.n_headlines)

    clicks = calibrated_clicks(quality, spec.target_scheme, spec.target_counts, spec.pareto_alpha)
    days = assign_days(spec, rng)

    headlines = [
        Headline(
            id=i,
            embedding=tuple(float(v) for v in X[i]),
            clicks=int(clicks[i]),
            day=int(days[i]),
            text=f"titolo sintetico {i}",
        )
        for i in range(spec.n_headlines)
    ]
    logger.info(
        f"Corpus sintetico generato: {spec.n_headlines} titoli, {len(np.unique(days))} giorni attivi, "
        f"d={spec.d}, rumore {spec.noise_scale}"
    )
    return HeadlineCorpus(headlines, name=spec.name)
