from pydantic import BaseModel, Field
from typing import Optional, List, Dict, Any, Tuple
from datetime import datetime


class EvalReport(BaseModel):
    """Qualità dell'ordinamento su un dataset di coppie"""
    accuracy: float = Field(..., ge=0.0, le=1.0)
    weighted_accuracy: float = Field(..., ge=0.0, le=1.0)
    per_rank_accuracy: Dict[int, Tuple[int, int]] = Field(default_factory=dict)
    n_pairs: int
    skipped_ranks: int = 0

    def to_record(self) -> Dict[str, Any]:
        """Record piatto per CSV/JSON"""
        record: Dict[str, Any] = {
            "accuracy": self.accuracy,
            "weighted_accuracy": self.weighted_accuracy,
            "n_pairs": self.n_pairs,
            "skipped_ranks": self.skipped_ranks,
        }
        for rank, (correct, total) in sorted(self.per_rank_accuracy.items()):
            record[f"rank_{rank}_correct"] = correct
            record[f"rank_{rank}_total"] = total
        return record


class SupervisedSeedResult(BaseModel):
    seed: int
    n_train_headlines: int
    n_test_headlines: int
    n_train_pairs: int
    n_val_pairs: int
    epochs: int
    best_epoch: Optional[int] = None
    report: EvalReport

    @property
    def accuracy(self) -> float:
        return self.report.accuracy

    @property
    def weighted_accuracy(self) -> float:
        return self.report.weighted_accuracy

    def to_record(self) -> Dict[str, Any]:
        """Riga di supervised_seeds.csv, con i conteggi per rank del test"""
        record = self.model_dump(exclude={"report"})
        record.update(self.report.to_record())
        return record


class OnlineSeedResult(BaseModel):
    seed: int
    policy: str
    T: int
    total_clicks: int
    normalized_clicks: float
    final_history_size: int
    history_size_at_cutoff: int
    model_versions: int


class BaselineResult(BaseModel):
    """Modello supervisionato di riferimento per il confronto con l'apprendimento online"""
    seed: int
    baseline: str
    n_headlines: int
    accuracy: float
    weighted_accuracy: float


class AggregateRow(BaseModel):
    """Media e deviazione standard campionaria di una metrica"""
    group: str
    metric: str
    n_seeds: int
    mean: float
    std: float


class PolicyComparison(BaseModel):
    policy_a: str
    policy_b: str
    metric: str = "normalized_clicks"
    n_seeds: int
    mean_difference: float
    std_error: float

    @property
    def z_score(self) -> float:
        if self.std_error == 0:
            return float("inf") if self.mean_difference > 0 else float("-inf") if self.mean_difference < 0 else 0.0
        return self.mean_difference / self.std_error


class ExperimentSummary(BaseModel):
    """Riepilogo restituito da ogni modalità della CLI"""
    status: str = "success"
    timestamp: datetime = Field(default_factory=datetime.now)
    mode: str
    run_id: str
    output_dir: str
    files: List[str] = []
    aggregates: List[AggregateRow] = []
    comparisons: List[PolicyComparison] = []
    processing_notes: List[str] = []
