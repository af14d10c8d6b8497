from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
from enum import Enum


class Environment(str, Enum):
    DEVELOPMENT = "dev"
    TEST = "test"
    STAGING = "staging"
    PRODUCTION = "production"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Ambiente
    ENVIRONMENT: Environment = Environment.DEVELOPMENT

    # Configurazione app
    APP_NAME: str = "Headline Preference Lab"
    APP_VERSION: str = "0.1.0"

    # Logging
    LOG_LEVEL: str = "INFO"

    # Cartella radice per i risultati degli esperimenti
    OUTPUT_ROOT: str = "results"

    # Worker per le repliche (0 = un worker per core fisico)
    DEFAULT_WORKERS: int = 1

    # Numero di seed predefinito per modalità
    DEFAULT_SEEDS: int = 100
    DEFAULT_ONLINE_SEEDS: int = 20
    FULL_ONLINE_SEEDS: int = 100

    # Formato dei float nei CSV (None = repr più corta che fa round-trip)
    CSV_FLOAT_FORMAT: Optional[str] = None

    # Parametri JSON
    JSON_OUTPUT_INDENT: int = 2


# Carica le impostazioni
settings = Settings()
