import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from app.config.settings import settings
from app.utils.errors import ResultsError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


# Nomi dei file di risultato
SUPERVISED_SEEDS_CSV = "supervised_seeds.csv"
SUPERVISED_HISTORY_CSV = "supervised_history.csv"
SUPERVISED_SUMMARY_CSV = "supervised_summary.csv"
TRAJECTORY_CSV = "trajectory.csv"
ACCURACY_CSV = "accuracy.csv"
ONLINE_SEEDS_CSV = "online_seeds.csv"
ONLINE_SUMMARY_CSV = "online_summary.csv"
BASELINES_CSV = "baselines.csv"
COMPARISONS_CSV = "comparisons.csv"
SUMMARY_JSON = "summary.json"


def to_frame(rows: Iterable[Union[BaseModel, Dict[str, Any]]], columns: Sequence[str] = ()) -> pd.DataFrame:
    """Converte modelli pydantic o dizionari in un DataFrame"""
    records = [row.model_dump() if isinstance(row, BaseModel) else dict(row) for row in rows]
    frame = pd.DataFrame.from_records(records)
    if frame.empty and columns:
        frame = pd.DataFrame(columns=list(columns))
    return frame


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Scrive un CSV in modo deterministico (niente indice, separatore di riga fisso)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"CSV scritto: {path} ({len(frame)} righe)")
    return path


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=settings.JSON_OUTPUT_INDENT, default=str)
    return path


def require_files(directory: Union[str, Path], names: Sequence[str]) -> Dict[str, pd.DataFrame]:
    """
    Legge i CSV richiesti da una cartella di risultati

    Raises:
        ResultsError: Se uno o più file mancano o sono vuoti, con l'elenco dei mancanti
    """
    directory = Path(directory)
    missing: List[str] = []
    frames: Dict[str, pd.DataFrame] = {}
    for name in names:
        path = directory / name
        if not path.is_file():
            missing.append(name)
            continue
        try:
            frame = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame()
        if frame.empty:
            missing.append(name)
            continue
        frames[name] = frame
    if missing:
        logger.error(f"Risultati mancanti in {directory}: {missing}")
        raise ResultsError(f"Serie mancanti o vuote: {', '.join(missing)}", details={"missing": missing})
    return frames
