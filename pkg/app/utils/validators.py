import os
from pathlib import Path
from typing import List, Union

from app.models.simulation import Policy
from app.utils.errors import ConfigError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def parse_seeds(spec: Union[str, int, List[int]]) -> List[int]:
    """
    Interpreta una specifica di seed

    Args:
        spec: Intero N (seed 0..N-1), intervallo "a-b" (estremi inclusi),
              lista "1,4,7" o lista di interi

    Returns:
        Lista ordinata di seed distinti

    Raises:
        ConfigError: Se la specifica non è valida o è vuota
    """
    if isinstance(spec, int):
        seeds = list(range(spec))
    elif isinstance(spec, list):
        seeds = [int(s) for s in spec]
    else:
        text = spec.strip()
        try:
            if "," in text:
                seeds = [int(part) for part in text.split(",") if part.strip()]
            elif "-" in text.lstrip("-"):
                first, last = text.split("-", 1)
                seeds = list(range(int(first), int(last) + 1))
            else:
                seeds = list(range(int(text)))
        except ValueError:
            logger.error(f"Specifica di seed non valida: {spec}")
            raise ConfigError(f"Specifica di seed non valida: {spec}")

    seeds = sorted(set(seeds))
    if not seeds:
        raise ConfigError(f"Nessun seed nella specifica: {spec}")
    if any(s < 0 for s in seeds):
        raise ConfigError("I seed devono essere non negativi")
    return seeds


def parse_policies(spec: Union[str, List[str]]) -> List[Policy]:
    """Interpreta una lista di policy separate da virgola (senza distinzione di maiuscole)"""
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    lookup = {p.value.lower(): p for p in Policy}
    policies = []
    for name in names:
        key = str(name).strip().lower()
        if not key:
            continue
        if key not in lookup:
            logger.error(f"Policy sconosciuta: {name}")
            raise ConfigError(
                f"Policy sconosciuta: {name}. Policy supportate: {[p.value for p in Policy]}"
            )
        if lookup[key] not in policies:
            policies.append(lookup[key])
    if not policies:
        raise ConfigError("Nessuna policy indicata")
    return policies


def validate_output_dir(path: Union[str, Path]) -> Path:
    """Crea la cartella di output se serve e verifica che sia scrivibile"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Impossibile creare la cartella di output {path}: {e}")
    if not os.access(path, os.W_OK):
        raise ConfigError(f"Cartella di output non scrivibile: {path}")
    return path
