from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)


class TrainConfig(BaseModel):
    """Schedule di ottimizzazione del modello di preferenza"""
    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(0.005, gt=0.0)
    batch_size: int = Field(128, gt=0)
    weight_decay: float = Field(0.001, ge=0.0)
    margin: float = Field(1.0, ge=0.0)
    lr_patience: int = Field(1, ge=0)
    lr_factor: float = Field(0.1, gt=0.0, lt=1.0)
    early_stop_patience: int = Field(5, gt=0)
    max_epochs: int = Field(100, gt=0)
    adam: AdamConfig = Field(default_factory=AdamConfig)
    validation_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    hidden_dim: int = Field(200, gt=0)
    n_blocks: int = Field(1, ge=0)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    lr: float


class TrainHistory(BaseModel):
    """Storico per epoca di un addestramento"""

    epochs: List[EpochRecord] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False
    used_validation: bool = True

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def best_loss(self) -> Optional[float]:
        if self.best_epoch is None:
            return None
        record = self.epochs[self.best_epoch]
        return record.val_loss if record.val_loss is not None else record.train_loss
