from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.headline import BinningScheme, REFERENCE_RANK_COUNTS


CORPUS_FORMAT = "headline-corpus"
SUPPORTED_SCHEMA_VERSIONS = (1,)


class CorpusHeader(BaseModel):
    """Prima riga di un file corpus"""
    model_config = ConfigDict(extra="forbid")

    format: str = CORPUS_FORMAT
    schema_version: int = 1
    name: str = "corpus"
    dimension: int = Field(..., gt=0)


class SyntheticSpec(BaseModel):
    """
    Parametri del generatore di corpus sintetici.

    I clic sono calibrati sui quantili del campione in modo che i conteggi
    per rank riproducano le proporzioni di target_counts.
    """
    model_config = ConfigDict(frozen=True)

    n_headlines: int = Field(3305, gt=0)
    n_days: int = Field(692, gt=0)
    d: int = Field(64, gt=0)
    latent_weight_seed: int = 0
    noise_scale: float = Field(0.5, ge=0.0)
    pareto_alpha: float = Field(1.5, gt=1.0)
    target_scheme: BinningScheme = Field(default_factory=BinningScheme)
    target_counts: Tuple[int, ...] = Field(default_factory=lambda: tuple(REFERENCE_RANK_COUNTS))
    # giorni iniziali sempre popolati (finestra di warm-up)
    warmup_days: int = Field(90, ge=0)
    # giorni successivi al warm-up lasciati senza titoli
    empty_days: int = Field(0, ge=0)
    # calo lineare della frequenza di pubblicazione: l'ultimo giorno attivo pesa 1 - rate_decay
    rate_decay: float = Field(0.0, ge=0.0, lt=1.0)
    # seed fisso del corpus; None = sotto-stream "data" della replica
    seed: Optional[int] = None
    name: str = "synthetic"

    @model_validator(mode="after")
    def check_shape(self) -> "SyntheticSpec":
        if len(self.target_counts) != self.target_scheme.n_ranks:
            raise ValueError("target_counts deve avere un valore per rank")
        if sum(self.target_counts) <= 0 or any(c < 0 for c in self.target_counts):
            raise ValueError("target_counts deve essere non negativo e non tutto nullo")
        if self.warmup_days > self.n_days:
            raise ValueError("warmup_days non può superare n_days")
        if self.empty_days > self.n_days - self.warmup_days:
            raise ValueError("empty_days supera i giorni disponibili dopo il warm-up")
        if self.n_headlines < self.n_days - self.empty_days:
            raise ValueError("servono almeno tanti titoli quanti giorni attivi")
        return self

    @property
    def active_days(self) -> int:
        return self.n_days - self.empty_days

    @classmethod
    def reference_layout(cls, **overrides) -> "SyntheticSpec":
        """
        Corpus con 485 giorni attivi dopo i 90 giorni di warm-up

        Con la frequenza di pubblicazione in calo il periodo di test (ultimo 20%
        dei titoli) inizia dopo circa 335 passi di simulazione.
        """
        values = {"empty_days": 117, "rate_decay": 0.55}
        values.update(overrides)
        return cls(**values)
