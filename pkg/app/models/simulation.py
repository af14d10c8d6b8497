from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.headline import BinningScheme
from app.models.training import TrainConfig


class Policy(str, Enum):
    RANDOM = "Random"
    GREEDY = "Greedy"
    NEURAL_TS = "NeuralTS"
    ORACLE_BEST = "OracleBest"
    ORACLE_SECOND = "OracleSecond"


class NeuralTSConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    nu: float = Field(1.0, gt=0.0)
    lam: float = Field(1.0, gt=0.0, alias="lambda")


class SimulationConfig(BaseModel):
    """Protocollo della simulazione online con feedback ritardato"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    warmup_window_days: int = Field(90, gt=0)
    warmup_sample_size: int = Field(90, gt=0)
    feedback_delay_days: int = Field(7, ge=0)
    pairing_M: int = Field(2, gt=0)
    # passo massimo per la valutazione dell'accuratezza; None = ultimo passo prima dei dati di test
    eval_cutoff_day: Optional[int] = Field(None, ge=0)
    policy: Policy = Policy.GREEDY
    neural_ts: NeuralTSConfig = Field(default_factory=NeuralTSConfig)
    retrain: TrainConfig = Field(default_factory=TrainConfig)
    scheme: BinningScheme = Field(default_factory=BinningScheme)
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    test_pairing_M: int = Field(2, gt=0)
    # sotto questa dimensione della storia si addestra senza validazione
    min_history_for_validation: int = Field(50, ge=0)
    cold_restart: bool = False
    # limiti dei riaddestramenti che partono dal modello precedente; None = schedule completo
    warm_start_max_epochs: Optional[int] = Field(1, gt=0)
    warm_start_patience: Optional[int] = Field(1, gt=0)
    # coppie estratte a caso dalla storia per ogni riaddestramento a caldo
    warm_start_max_pairs: Optional[int] = Field(1024, gt=0)


class DayRecord(BaseModel):
    """Una riga della traiettoria: scelta del passo t e clic osservabili"""
    t: int
    day: int
    chosen_id: int
    Y: int
    Y_star: int
    Y_minus: int
    n_candidates: int
    model_version: int


class AccuracyPoint(BaseModel):
    t: int
    model_version: int
    accuracy: float
    weighted_accuracy: float


class SimulationResult(BaseModel):
    policy: Policy
    trajectory: List[DayRecord] = Field(default_factory=list)
    accuracy_series: List[AccuracyPoint] = Field(default_factory=list)
    eval_cutoff: int
    warmup_ids: List[int] = Field(default_factory=list)
    # (passo di consegna, id) per ogni feedback ricevuto
    deliveries: List[List[int]] = Field(default_factory=list)
    # passi in cui è stato addestrato un nuovo modello
    retrain_steps: List[int] = Field(default_factory=list)
    final_history_size: int = 0
    # titoli nella storia del modello in uso al passo di cutoff
    history_size_at_cutoff: int = 0
    model_versions: int = 0

    @property
    def T(self) -> int:
        return len(self.trajectory)
