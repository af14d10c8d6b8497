import sys
import logging
from datetime import datetime
from typing import Dict, Any, Optional

from loguru import logger

from app.config.settings import settings, Environment


class InterceptHandler(logging.Handler):
    """
    Intercetta i log standard e li redirige a Loguru
    """
    def emit(self, record):
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        # Risale al chiamante originale, saltando i frame del modulo logging
        frame, depth = logging.currentframe(), 2
        while frame and frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def setup_logging(level: Optional[str] = None):
    """
    Configura il logging per l'applicazione.

    In produzione i record vengono serializzati in JSON, altrimenti
    si usa un formato leggibile a colori. I log della libreria standard
    (matplotlib, warnings di numpy) vengono intercettati e passati a Loguru.
    """
    logger.remove()

    log_level = level or settings.LOG_LEVEL
    log_format = (
        "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>"
    )

    if settings.ENVIRONMENT == Environment.PRODUCTION:
        logger.add(
            sys.stdout,
            serialize=True,
            format="{message}",
            level=log_level,
            enqueue=True,
            backtrace=True,
            diagnose=False,
        )
    else:
        logger.add(
            sys.stderr,
            format=log_format,
            level=log_level,
            colorize=settings.ENVIRONMENT != Environment.TEST,
            backtrace=True,
            diagnose=False,
        )

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)
    logging.captureWarnings(True)

    # matplotlib è molto verboso a livello DEBUG
    for logger_name in ["matplotlib", "PIL", "py.warnings"]:
        logging_logger = logging.getLogger(logger_name)
        logging_logger.handlers = [InterceptHandler()]
        logging_logger.propagate = False
        if logger_name != "py.warnings":
            logging_logger.setLevel(logging.WARNING)

    return logger


def get_logger(name: str):
    """
    Ottiene un logger configurato per il modulo specificato
    """
    return logger.bind(module=name)


def log_run_start(run_id: str, mode: str, metadata: Dict[str, Any]):
    """
    Registra l'avvio di un esperimento
    """
    logger.info(
        f"Esperimento avviato: {mode}",
        run_id=run_id,
        mode=mode,
        metadata=metadata,
        timestamp=datetime.now().isoformat()
    )


def log_run_end(run_id: str, mode: str, exit_code: int, elapsed_ms: int):
    """
    Registra la conclusione di un esperimento
    """
    logger.info(
        f"Esperimento concluso: {mode} (exit code {exit_code}, {elapsed_ms} ms)",
        run_id=run_id,
        mode=mode,
        exit_code=exit_code,
        elapsed_ms=elapsed_ms,
        timestamp=datetime.now().isoformat()
    )


def log_error(run_id: str, mode: str, error_msg: str, error_details: Optional[Dict[str, Any]] = None):
    """
    Registra informazioni sugli errori
    """
    logger.error(
        f"Errore in {mode}: {error_msg}",
        run_id=run_id,
        mode=mode,
        error_msg=error_msg,
        error_details=error_details,
        timestamp=datetime.now().isoformat()
    )


# Configura il logger all'importazione del modulo
setup_logging()
