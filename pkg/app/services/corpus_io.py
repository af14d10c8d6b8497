import json
from pathlib import Path
from typing import Iterable, Optional, Set, Union

from pydantic import ValidationError

from app.models.corpus import CorpusHeader, CORPUS_FORMAT, SUPPORTED_SCHEMA_VERSIONS
from app.models.headline import Headline, HeadlineCorpus
from app.utils.errors import (
    CorpusError,
    CorpusParseError,
    DimensionMismatchError,
    DuplicateIdError,
    UnsupportedSchemaError,
)
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def _parse_header(line: str) -> CorpusHeader:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusParseError(f"Intestazione non valida: {e.msg}", line=1)
    if not isinstance(raw, dict):
        raise CorpusParseError("Intestazione non valida: atteso un oggetto JSON", line=1)
    if raw.get("format") != CORPUS_FORMAT:
        raise UnsupportedSchemaError(f"Formato sconosciuto: {raw.get('format')}", line=1)
    if raw.get("schema_version") not in SUPPORTED_SCHEMA_VERSIONS:
        raise UnsupportedSchemaError(f"Versione schema non supportata: {raw.get('schema_version')}", line=1)
    try:
        return CorpusHeader.model_validate(raw)
    except ValidationError as e:
        raise CorpusParseError(f"Intestazione non valida: {e.errors()[0]['msg']}", line=1)


def load_corpus(path: Union[str, Path]) -> HeadlineCorpus:
    """
    Carica e valida un corpus in formato JSON Lines

    Args:
        path: Percorso del file

    Returns:
        Corpus validato

    Raises:
        CorpusParseError: Riga non interpretabile o record non valido
        DimensionMismatchError: Embedding di dimensione diversa dall'intestazione
        DuplicateIdError: Id ripetuto
        UnsupportedSchemaError: Formato o versione non supportati
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"File corpus non trovato: {path}")

    logger.info(f"Caricamento corpus: {path}")
    headlines = []
    seen: Set[int] = set()
    header: Optional[CorpusHeader] = None

    with open(path, "rb") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            try:
                line = raw_line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise CorpusParseError(f"Codifica UTF-8 non valida al byte {e.start}", line=line_number)
            if not line.strip():
                continue
            if header is None:
                header = _parse_header(line)
                continue

            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusParseError(f"JSON non valido: {e.msg}", line=line_number)
            record_id = raw.get("id") if isinstance(raw, dict) else None
            try:
                headline = Headline.model_validate(raw)
            except ValidationError as e:
                error = e.errors()[0]
                field = ".".join(str(part) for part in error["loc"])
                raise CorpusParseError(f"Record non valido ({field}: {error['msg']})", line=line_number, record_id=record_id)

            if headline.dimension != header.dimension:
                raise DimensionMismatchError(
                    f"Embedding di dimensione {headline.dimension} in un corpus di dimensione {header.dimension}",
                    line=line_number,
                    record_id=headline.id,
                )
            if headline.id in seen:
                raise DuplicateIdError("Id duplicato", line=line_number, record_id=headline.id)
            seen.add(headline.id)
            headlines.append(headline)

    if header is None:
        raise CorpusParseError("File corpus vuoto", line=1)
    if not headlines:
        raise CorpusParseError("Il corpus non contiene record", line=2)

    logger.info(f"Corpus caricato: {header.name}, {len(headlines)} titoli, d={header.dimension}")
    return HeadlineCorpus(headlines, name=header.name)


def write_corpus(headlines: Iterable[Headline], path: Union[str, Path], name: Optional[str] = None) -> Path:
    """
    Scrive un corpus in formato JSON Lines (intestazione + un record per riga)

    I float sono scritti con la rappresentazione più corta che fa round-trip esatto.
    """
    if isinstance(headlines, HeadlineCorpus):
        name = name or headlines.name
        headlines = headlines.headlines
    headlines = list(headlines)
    if not headlines:
        raise CorpusError("Impossibile scrivere un corpus vuoto")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = CorpusHeader(name=name or "corpus", dimension=headlines[0].dimension)

    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(header.model_dump()) + "\n")
        for headline in headlines:
            record = {
                "id": headline.id,
                "day": headline.day,
                "clicks": headline.clicks,
                "embedding": list(headline.embedding),
                "text": headline.text,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    logger.info(f"Corpus scritto: {path}, {len(headlines)} titoli")
    return path
