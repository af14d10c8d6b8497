import math
import time
from typing import Optional, Tuple

import numpy as np

from app.models.headline import HeadlineCorpus, PairDataset
from app.models.training import TrainConfig, TrainHistory, EpochRecord
from app.services.optimizer import Adam
from app.services.preference_net import PreferenceNet
from app.utils.errors import DataError, DivergenceError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def pair_matrices(pairs: PairDataset, corpus: HeadlineCorpus) -> Tuple[np.ndarray, np.ndarray]:
    """Embedding dei lati (meno coinvolgente, più coinvolgente) di ogni coppia"""
    return corpus.embeddings_for(pairs.low_ids()), corpus.embeddings_for(pairs.high_ids())


def train(
    net: PreferenceNet,
    train_pairs: PairDataset,
    val_pairs: PairDataset,
    corpus: HeadlineCorpus,
    config: TrainConfig,
    rng: np.random.Generator,
) -> Tuple[PreferenceNet, TrainHistory]:
    """
    Addestra la rete con la MRL su minibatch mescolati

    Args:
        net: Rete da addestrare (modificata sul posto)
        train_pairs: Coppie di addestramento
        val_pairs: Coppie di validazione; se vuoto si usa la perdita di addestramento
        corpus: Corpus da cui risolvere gli embedding
        config: Configurazione di addestramento
        rng: Sorgente casuale per il mescolamento

    Returns:
        Tupla (rete addestrata in modalità inferenza, storico per epoca)
    """
    if len(train_pairs) == 0:
        raise DataError("Nessuna coppia di addestramento")
    X_low, X_high = pair_matrices(train_pairs, corpus)
    validation = pair_matrices(val_pairs, corpus) if len(val_pairs) > 0 else None
    return train_matrices(net, X_low, X_high, validation, config, rng)


def train_matrices(
    net: PreferenceNet,
    X_low: np.ndarray,
    X_high: np.ndarray,
    validation: Optional[Tuple[np.ndarray, np.ndarray]],
    config: TrainConfig,
    rng: np.random.Generator,
) -> Tuple[PreferenceNet, TrainHistory]:
    """
    Ciclo di addestramento su matrici di embedding già risolte

    Dopo ogni epoca la perdita di validazione (in inferenza) guida lo
    scheduler del learning rate e l'early stopping. Il learning rate viene
    ridotto quando la perdita non migliora per lr_patience epoche
    consecutive (con 0 a ogni epoca senza miglioramento). Alla fine vengono
    ripristinati i parametri dell'epoca migliore.

    Args:
        net: Rete da addestrare (modificata sul posto)
        X_low: Embedding del lato meno coinvolgente, forma (n, d)
        X_high: Embedding del lato più coinvolgente, forma (n, d)
        validation: Coppia di matrici di validazione, oppure None
        config: Configurazione di addestramento
        rng: Sorgente casuale per il mescolamento

    Returns:
        Tupla (rete addestrata in modalità inferenza, storico per epoca)

    Raises:
        DataError: Nessuna coppia di addestramento
        DivergenceError: Perdita non finita
    """
    n = len(X_low)
    if n == 0:
        raise DataError("Nessuna coppia di addestramento")

    start_time = time.time()
    use_validation = validation is not None and len(validation[0]) > 0
    if not use_validation:
        logger.warning("Set di validazione vuoto: scheduler ed early stopping usano la perdita di addestramento")

    optimizer = Adam(net, config)
    history = TrainHistory(used_validation=use_validation)
    lr = config.learning_rate
    best = math.inf
    best_state = net.state()
    epochs_since_best = 0
    epochs_without_lr_gain = 0

    for epoch in range(config.max_epochs):
        net.train()
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads, cache = net.pair_loss_and_gradients(X_low[batch], X_high[batch], config.margin)
            optimizer.step(grads)
            net.update_running_stats(cache)
            total += loss * len(batch)
        train_loss = total / n

        val_loss = net.pair_loss(validation[0], validation[1], config.margin, training=False) if use_validation else None
        monitored = val_loss if use_validation else train_loss
        if not math.isfinite(monitored):
            raise DivergenceError(f"Perdita non finita all'epoca {epoch}")

        history.epochs.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr))
        logger.debug(f"Epoca {epoch}: train={train_loss:.5f} val={val_loss} lr={lr:g}")

        if monitored < best:
            best = monitored
            best_state = net.state()
            history.best_epoch = epoch
            epochs_since_best = 0
            epochs_without_lr_gain = 0
        else:
            epochs_since_best += 1
            epochs_without_lr_gain += 1
            if epochs_without_lr_gain >= config.lr_patience:
                lr *= config.lr_factor
                optimizer.lr = lr
                epochs_without_lr_gain = 0
                logger.debug(f"Learning rate ridotto a {lr:g}")
            if epochs_since_best >= config.early_stop_patience:
                history.stopped_early = True
                break

    net.load_state(best_state)
    net.eval()

    elapsed_ms = int((time.time() - start_time) * 1000)
    logger.debug(
        f"Addestramento completato: {len(history)} epoche, migliore {history.best_epoch}, "
        f"perdita {best:.5f}, {n} coppie, {elapsed_ms}ms"
    )
    return net, history
