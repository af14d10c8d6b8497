import numpy as np
import pytest

from app.models.headline import BinningScheme, Headline, HeadlineCorpus, PairDataset
from app.models.training import TrainConfig
from app.services.evaluation import pair_accuracy
from app.services.pairing import generate_pairs, split_pairs
from app.services.preference_net import init_params
from app.services.trainer import pair_matrices, train, train_matrices
from app.utils.errors import DataError


@pytest.fixture
def separable_corpus():
    """Clic monotoni in w·x: esiste un ordinamento perfetto"""
    rng = np.random.default_rng(11)
    w = rng.normal(size=6)
    headlines = []
    for i in range(240):
        x = rng.normal(size=6)
        quality = float(x @ w)
        clicks = int(np.clip(np.exp(quality + 5.0), 0, 10**6))
        headlines.append(Headline(id=i, embedding=tuple(float(v) for v in x), clicks=clicks, day=i // 10))
    return HeadlineCorpus(headlines)


def test_separable_corpus_is_learned(separable_corpus):
    scheme = BinningScheme(lower_bounds=(0, 50, 150, 400, 1000))
    pairs = generate_pairs(separable_corpus.headlines, scheme, 2, np.random.default_rng(0))
    train_pairs, val_pairs = split_pairs(pairs, 0.1, np.random.default_rng(1))
    net = init_params(6, 32, 1, np.random.default_rng(2))
    config = TrainConfig(hidden_dim=32, batch_size=64, max_epochs=60)
    net, history = train(net, train_pairs, val_pairs, separable_corpus, config, np.random.default_rng(3))
    assert not net.training
    assert len(train_pairs) >= 400
    assert pair_accuracy(net, val_pairs, separable_corpus) >= 0.9


def test_single_epoch_history(tiny_corpus, three_rank_scheme):
    pairs = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(0))
    net = init_params(4, 8, 1, np.random.default_rng(0))
    config = TrainConfig(max_epochs=1, early_stop_patience=100)
    _, history = train(net, pairs, PairDataset(), tiny_corpus, config, np.random.default_rng(0))
    assert len(history) == 1
    assert history.best_epoch == 0
    assert not history.used_validation


def test_scheduler_and_early_stopping(tiny_corpus, three_rank_scheme):
    pairs = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(0))
    train_pairs, val_pairs = split_pairs(pairs, 0.3, np.random.default_rng(1))
    net = init_params(4, 8, 1, np.random.default_rng(0))
    config = TrainConfig(hidden_dim=8, max_epochs=40, early_stop_patience=3, learning_rate=0.05)
    _, history = train(net, train_pairs, val_pairs, tiny_corpus, config, np.random.default_rng(2))

    lrs = [record.lr for record in history.epochs]
    losses = [record.val_loss for record in history.epochs]
    # il learning rate cambia solo dopo un'epoca senza miglioramento
    for i in range(1, len(lrs)):
        if lrs[i] != lrs[i - 1]:
            assert lrs[i] == pytest.approx(lrs[i - 1] * 0.1)
            assert losses[i - 1] >= min(losses[:i - 1], default=np.inf)
    if history.stopped_early:
        assert len(history) - 1 - history.best_epoch == 3
    assert history.best_loss == min(losses)


def test_strictly_improving_validation_never_reduces_lr(separable_corpus):
    scheme = BinningScheme(lower_bounds=(0, 150))
    pairs = generate_pairs(separable_corpus.headlines, scheme, 1, np.random.default_rng(0))
    train_pairs, val_pairs = split_pairs(pairs, 0.2, np.random.default_rng(1))
    net = init_params(6, 16, 1, np.random.default_rng(2))
    config = TrainConfig(hidden_dim=16, max_epochs=3, learning_rate=0.001, batch_size=512)
    _, history = train(net, train_pairs, val_pairs, separable_corpus, config, np.random.default_rng(3))
    losses = [record.val_loss for record in history.epochs]
    if all(b < a for a, b in zip(losses, losses[1:])):
        assert all(record.lr == 0.001 for record in history.epochs)
        assert not history.stopped_early
        assert len(history) == 3


def test_training_is_deterministic(tiny_corpus, three_rank_scheme):
    pairs = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(0))
    config = TrainConfig(hidden_dim=8, max_epochs=5)
    results = []
    for _ in range(2):
        net = init_params(4, 8, 1, np.random.default_rng(5))
        net, history = train(net, pairs, PairDataset(), tiny_corpus, config, np.random.default_rng(6))
        results.append((net.state(), [r.train_loss for r in history.epochs]))
    assert results[0][1] == results[1][1]
    for name in results[0][0]:
        assert np.array_equal(results[0][0][name], results[1][0][name])


def test_empty_training_set_raises(tiny_corpus):
    net = init_params(4, 8, 1, np.random.default_rng(0))
    with pytest.raises(DataError):
        train(net, PairDataset(), PairDataset(), tiny_corpus, TrainConfig(), np.random.default_rng(0))


def flat_loss_run(tiny_net, tiny_corpus, three_rank_scheme, lr_patience):
    # testa nulla e margine 0: perdita sempre 0, nessuna epoca migliora dopo la prima
    tiny_net.params["head.weight"][:] = 0.0
    pairs = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(0))
    config = TrainConfig(
        hidden_dim=8, margin=0.0, weight_decay=0.0, learning_rate=1.0,
        lr_patience=lr_patience, max_epochs=6, early_stop_patience=100,
    )
    _, history = train(tiny_net, pairs, PairDataset(), tiny_corpus, config, np.random.default_rng(0))
    return [record.lr for record in history.epochs]


def test_zero_lr_patience_reduces_on_every_flat_epoch(tiny_net, tiny_corpus, three_rank_scheme):
    lrs = flat_loss_run(tiny_net, tiny_corpus, three_rank_scheme, lr_patience=0)
    assert lrs == pytest.approx([1.0, 1.0, 0.1, 0.01, 1e-3, 1e-4])


def test_lr_patience_waits_for_consecutive_flat_epochs(tiny_net, tiny_corpus, three_rank_scheme):
    lrs = flat_loss_run(tiny_net, tiny_corpus, three_rank_scheme, lr_patience=2)
    assert lrs == pytest.approx([1.0, 1.0, 1.0, 0.1, 0.1, 0.01])


def test_repeated_violating_pair_descends():
    rng = np.random.default_rng(4)
    x_low, x_high = rng.normal(size=4), rng.normal(size=4)
    X_low, X_high = np.tile(x_low, (16, 1)), np.tile(x_high, (16, 1))
    net = init_params(4, 8, 0, np.random.default_rng(1))
    config = TrainConfig(
        hidden_dim=8, n_blocks=0, learning_rate=1e-3, weight_decay=0.0, margin=10.0,
        batch_size=16, max_epochs=8, early_stop_patience=100,
    )
    _, history = train_matrices(net, X_low, X_high, None, config, np.random.default_rng(2))
    losses = [record.train_loss for record in history.epochs]
    assert losses[0] > 0
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_train_matrices_matches_train(tiny_corpus, three_rank_scheme):
    pairs = generate_pairs(tiny_corpus.headlines, three_rank_scheme, 2, np.random.default_rng(0))
    train_pairs, val_pairs = split_pairs(pairs, 0.3, np.random.default_rng(1))
    config = TrainConfig(hidden_dim=8, max_epochs=4)

    net_a, history_a = train(
        init_params(4, 8, 1, np.random.default_rng(5)), train_pairs, val_pairs, tiny_corpus, config,
        np.random.default_rng(6),
    )
    X_low, X_high = pair_matrices(train_pairs, tiny_corpus)
    net_b, history_b = train_matrices(
        init_params(4, 8, 1, np.random.default_rng(5)), X_low, X_high, pair_matrices(val_pairs, tiny_corpus),
        config, np.random.default_rng(6),
    )
    assert history_a == history_b
    for name, value in net_a.state().items():
        assert np.array_equal(value, net_b.state()[name])
