import math
from typing import Any, List, Dict, Optional, Sequence, Iterator, Tuple, Iterable, FrozenSet

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.errors import DimensionMismatchError, DuplicateIdError, DataError


# Limiti inferiori (inclusi) dei rank di engagement sul numero di clic a 7 giorni
DEFAULT_LOWER_BOUNDS = [0, 100, 1000, 5000, 10000, 50000, 100000]

# Numero di titoli per rank nel corpus di riferimento (3305 titoli)
REFERENCE_RANK_COUNTS = [883, 1660, 583, 96, 60, 19, 4]


class Headline(BaseModel):
    """
    Titolo con embedding, clic cumulati a 7 giorni e giorno di pubblicazione

    Validazione stretta: id, clic e giorno devono essere interi (non stringhe
    né booleani), le componenti dell'embedding numeri.
    """
    model_config = ConfigDict(frozen=True, strict=True)

    id: int = Field(..., ge=0)
    embedding: Tuple[float, ...]
    clicks: int = Field(..., ge=0)
    day: int = Field(..., ge=0)
    text: Optional[str] = None

    @field_validator("embedding", mode="before")
    @classmethod
    def embedding_as_tuple(cls, value: Any) -> Any:
        # liste JSON e componenti intere; bool e stringhe restano invalidi
        if isinstance(value, (list, tuple)):
            return tuple(float(v) if type(v) is int else v for v in value)
        return value

    @field_validator("embedding")
    @classmethod
    def embedding_finite(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) == 0:
            raise ValueError("embedding vuoto")
        if not all(math.isfinite(v) for v in value):
            raise ValueError("embedding con valori non finiti")
        return value

    @property
    def dimension(self) -> int:
        return len(self.embedding)


class BinningScheme(BaseModel):
    """Discretizzazione dello spazio dei clic in rank ordinati"""
    model_config = ConfigDict(frozen=True)

    lower_bounds: Tuple[int, ...] = Field(default_factory=lambda: tuple(DEFAULT_LOWER_BOUNDS))

    @field_validator("lower_bounds")
    @classmethod
    def bounds_valid(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(value) == 0 or value[0] != 0:
            raise ValueError("il primo limite deve essere 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("i limiti devono essere strettamente crescenti")
        return value

    @property
    def n_ranks(self) -> int:
        return len(self.lower_bounds)

    @classmethod
    def default(cls) -> "BinningScheme":
        return cls()


class PreferencePair(BaseModel):
    """Coppia ordinata: low_id meno coinvolgente di high_id"""
    model_config = ConfigDict(frozen=True)

    low_id: int = Field(..., ge=0)
    high_id: int = Field(..., ge=0)

    @model_validator(mode="after")
    def distinct_ids(self) -> "PreferencePair":
        if self.low_id == self.high_id:
            raise ValueError("low_id e high_id devono essere diversi")
        return self

    def as_tuple(self) -> Tuple[int, int]:
        return self.low_id, self.high_id


class PairDataset(BaseModel):
    """Insieme di coppie di preferenza, memorizzate sempre con il meno coinvolgente per primo"""

    pairs: List[PreferencePair] = Field(default_factory=list)
    source_ids: FrozenSet[int] = Field(default_factory=frozenset)

    @model_validator(mode="after")
    def check_pairs(self) -> "PairDataset":
        keys = [p.as_tuple() for p in self.pairs]
        if len(set(keys)) != len(keys):
            raise ValueError("coppie duplicate nel dataset")
        referenced = frozenset(i for key in keys for i in key)
        if not self.source_ids:
            self.source_ids = referenced
        elif not referenced <= self.source_ids:
            raise ValueError("coppie che riferiscono id fuori da source_ids")
        return self

    @classmethod
    def from_tuples(cls, tuples: Iterable[Tuple[int, int]]) -> "PairDataset":
        return cls(pairs=[PreferencePair(low_id=int(lo), high_id=int(hi)) for lo, hi in tuples])

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[PreferencePair]:
        return iter(self.pairs)

    def as_tuples(self) -> List[Tuple[int, int]]:
        return [p.as_tuple() for p in self.pairs]

    def low_ids(self) -> np.ndarray:
        return np.array([p.low_id for p in self.pairs], dtype=np.int64)

    def high_ids(self) -> np.ndarray:
        return np.array([p.high_id for p in self.pairs], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "PairDataset":
        return PairDataset(pairs=[self.pairs[int(i)] for i in indices])


class HeadlineCorpus:
    """
    Collezione validata di titoli con accesso vettoriale a embedding e clic.

    Garantisce id univoci e dimensione di embedding comune.
    """

    def __init__(self, headlines: Sequence[Headline], name: str = "corpus"):
        if len(headlines) == 0:
            raise DataError("Corpus vuoto")
        self.name = name
        self.headlines: List[Headline] = list(headlines)
        self.dimension = headlines[0].dimension

        self._index: Dict[int, int] = {}
        for position, headline in enumerate(self.headlines):
            if headline.dimension != self.dimension:
                raise DimensionMismatchError(
                    f"Dimensione embedding {headline.dimension} diversa da {self.dimension}",
                    record_id=headline.id,
                )
            if headline.id in self._index:
                raise DuplicateIdError("Id duplicato nel corpus", record_id=headline.id)
            self._index[headline.id] = position

        self.ids = np.array([h.id for h in self.headlines], dtype=np.int64)
        self.clicks = np.array([h.clicks for h in self.headlines], dtype=np.int64)
        self.days = np.array([h.day for h in self.headlines], dtype=np.int64)
        self.embeddings = np.array([h.embedding for h in self.headlines], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.headlines)

    def __iter__(self) -> Iterator[Headline]:
        return iter(self.headlines)

    def get(self, headline_id: int) -> Headline:
        return self.headlines[self._index[headline_id]]

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        try:
            return np.array([self._index[int(i)] for i in ids], dtype=np.int64)
        except KeyError as e:
            raise DataError(f"Id {e.args[0]} non presente nel corpus {self.name}")

    def embeddings_for(self, ids: Iterable[int]) -> np.ndarray:
        return self.embeddings[self.positions(ids)]

    def clicks_for(self, ids: Iterable[int]) -> np.ndarray:
        return self.clicks[self.positions(ids)]

    def subset(self, ids: Iterable[int]) -> List[Headline]:
        return [self.headlines[p] for p in self.positions(ids)]
