from typing import Optional, Dict, Any


class LabError(Exception):
    """Errore base del laboratorio, con codice errore e codice di uscita CLI"""

    error_code = "lab_error"
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": "error",
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details,
        }


class ConfigError(LabError):
    """Configurazione non valida o in conflitto"""

    error_code = "config_error"
    exit_code = 2


class CorpusError(LabError):
    """Errore di lettura o validazione di un corpus"""

    error_code = "corpus_error"
    exit_code = 3

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        record_id: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        location = []
        if line is not None:
            location.append(f"riga {line}")
        if record_id is not None:
            location.append(f"id {record_id}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message, details)
        self.line = line
        self.record_id = record_id


class CorpusParseError(CorpusError):
    error_code = "corpus_parse_error"


class DimensionMismatchError(CorpusError):
    error_code = "dimension_mismatch"


class DuplicateIdError(CorpusError):
    error_code = "duplicate_id"


class UnsupportedSchemaError(CorpusError):
    error_code = "unsupported_schema"


class DataError(LabError):
    """Dati insufficienti o incoerenti per l'operazione richiesta"""

    error_code = "data_error"
    exit_code = 3


class TrainingError(LabError):
    error_code = "training_error"
    exit_code = 4


class DivergenceError(TrainingError):
    """Gradiente o parametro non finito durante l'addestramento"""

    error_code = "divergence"


class ModelError(LabError):
    """Uso scorretto del modello (dimensioni, checkpoint)"""

    error_code = "model_error"
    exit_code = 4


class ResultsError(LabError):
    """CSV dei risultati mancanti o incompleti"""

    error_code = "results_error"
    exit_code = 5
