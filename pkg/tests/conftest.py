import pytest
import os
from pathlib import Path
import sys

# Aggiungi la directory root al path di Python
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Imposta le variabili d'ambiente per i test (prima di importare app)
os.environ['ENVIRONMENT'] = 'test'
os.environ['LOG_LEVEL'] = 'WARNING'
os.environ['OUTPUT_ROOT'] = '/tmp/headline-lab-test'
os.environ['DEFAULT_WORKERS'] = '1'

# Crea la directory di output per i test
Path(os.environ['OUTPUT_ROOT']).mkdir(parents=True, exist_ok=True)

import numpy as np  # noqa: E402

from app.models.corpus import SyntheticSpec  # noqa: E402
from app.models.headline import BinningScheme, Headline, HeadlineCorpus  # noqa: E402
from app.models.training import TrainConfig  # noqa: E402
from app.services.preference_net import init_params  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def cleanup(request):
    """Pulizia dopo l'esecuzione dei test"""
    def remove_test_dir():
        import shutil
        output_dir = Path(os.environ['OUTPUT_ROOT'])
        if output_dir.exists():
            shutil.rmtree(output_dir)

    request.addfinalizer(remove_test_dir)


def make_headline(headline_id: int, clicks: int, day: int = 0, d: int = 4, rng=None) -> Headline:
    rng = rng or np.random.default_rng(headline_id)
    return Headline(
        id=headline_id,
        embedding=tuple(float(v) for v in rng.standard_normal(d)),
        clicks=clicks,
        day=day,
    )


@pytest.fixture
def scheme():
    return BinningScheme.default()


@pytest.fixture
def three_rank_scheme():
    return BinningScheme(lower_bounds=(0, 10, 100))


@pytest.fixture
def tiny_corpus():
    """Dodici titoli su quattro giorni, tre rank nello schema (0, 10, 100)"""
    clicks = [1, 5, 20, 50, 150, 3, 30, 500, 7, 60, 2, 250]
    headlines = [make_headline(i, c, day=i // 3) for i, c in enumerate(clicks)]
    return HeadlineCorpus(headlines, name="tiny")


@pytest.fixture
def tiny_net():
    return init_params(4, 8, 1, np.random.default_rng(0))


@pytest.fixture
def fast_train_config():
    return TrainConfig(hidden_dim=16, max_epochs=15, batch_size=32, early_stop_patience=3)


@pytest.fixture
def small_synthetic_spec():
    """Corpus sintetico ridotto: 40 giorni di warm-up e 60 giorni di simulazione"""
    return SyntheticSpec(n_headlines=400, n_days=100, d=8, warmup_days=40)


@pytest.fixture
def output_dir(tmp_path):
    path = tmp_path / "results"
    path.mkdir()
    return path
