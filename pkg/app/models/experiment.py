from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.corpus import SyntheticSpec
from app.models.simulation import Policy, SimulationConfig
from app.models.training import TrainConfig


class RunMode(str, Enum):
    SUPERVISED = "supervised"
    ONLINE = "online"
    SYNTH_GEN = "synth-gen"
    PLOT = "plot"


DEFAULT_POLICIES = [
    Policy.GREEDY,
    Policy.NEURAL_TS,
    Policy.RANDOM,
    Policy.ORACLE_BEST,
    Policy.ORACLE_SECOND,
]


class ExperimentConfig(BaseModel):
    """
    Configurazione completa di un esperimento

    Esattamente una sorgente di corpus tra corpus_path e synthetic; il
    controllo avviene alla risoluzione del corpus (ConfigError).
    """
    model_config = ConfigDict(extra="forbid")

    mode: RunMode = RunMode.SUPERVISED
    corpus_path: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    seeds: List[int] = Field(default_factory=lambda: list(range(100)))
    policies: List[Policy] = Field(default_factory=lambda: list(DEFAULT_POLICIES))
    train: TrainConfig = Field(default_factory=TrainConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output_dir: str = "results"
    # 0 = un worker per core fisico
    workers: int = Field(1, ge=0)
    plot: bool = False
    save_models: bool = False

    @field_validator("seeds")
    @classmethod
    def at_least_one_seed(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("serve almeno un seed")
        if any(s < 0 for s in value):
            raise ValueError("i seed devono essere non negativi")
        return sorted(set(value))

    @field_validator("policies")
    @classmethod
    def at_least_one_policy(cls, value: List[Policy]) -> List[Policy]:
        if not value:
            raise ValueError("serve almeno una policy")
        return list(dict.fromkeys(value))
