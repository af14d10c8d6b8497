import argparse
import json
import sys
import time
import uuid
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.config.settings import settings
from app.models.corpus import SyntheticSpec
from app.models.experiment import ExperimentConfig, RunMode
from app.services.experiment_runner import run_experiment
from app.utils.errors import ConfigError, LabError
from app.utils.logging_utils import get_logger, log_error, log_run_end, log_run_start
from app.utils.validators import parse_policies, parse_seeds

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headline-lab",
        description=f"{settings.APP_NAME}: esperimenti di raccomandazione di titoli basati su preferenze",
    )
    parser.add_argument("--mode", choices=[m.value for m in RunMode], default=None, help="Modalità di esecuzione (default: supervised)")
    parser.add_argument("--corpus", type=str, default=None, help="Corpus in formato JSON Lines")
    parser.add_argument("--synthetic", action="store_true", help="Usa un corpus sintetico con i parametri predefiniti")
    parser.add_argument("--synthetic-spec", type=str, default=None, help="File JSON con i parametri del corpus sintetico")
    parser.add_argument("--reference-layout", action="store_true", help="Corpus sintetico con 485 passi di simulazione")
    parser.add_argument("--noise-scale", type=float, default=None, help="Rumore del corpus sintetico (0 = separabile)")
    parser.add_argument("--config", type=str, default=None, help="File JSON con un ExperimentConfig completo o parziale")
    parser.add_argument("--seeds", type=str, default=None, help='Seed: "N", "a-b" oppure "1,4,7"')
    parser.add_argument("--policies", type=str, default=None, help="Policy separate da virgola (modalità online)")
    parser.add_argument("--out", type=str, default=None, help=f"Cartella di output (default: {settings.OUTPUT_ROOT})")
    parser.add_argument("--workers", type=int, default=None, help="Worker paralleli (0 = uno per core fisico)")
    parser.add_argument("--plot", action="store_true", help="Genera le figure al termine dell'esperimento online")
    parser.add_argument("--full", action="store_true", help=f"Modalità online con {settings.FULL_ONLINE_SEEDS} seed")
    parser.add_argument("--save-models", action="store_true", help="Salva i checkpoint dei modelli supervisionati")
    return parser


def _read_json(path: str, what: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Impossibile leggere {what} {path}: {e}")


def _synthetic_spec(args: argparse.Namespace, base: Optional[Dict[str, Any]]) -> Optional[Dict[str, Any]]:
    wants_synthetic = args.synthetic or args.synthetic_spec or args.reference_layout or args.noise_scale is not None
    if not wants_synthetic:
        return base
    values: Dict[str, Any] = dict(base or {})
    if args.synthetic_spec:
        values.update(_read_json(args.synthetic_spec, "la specifica sintetica"))
    if args.noise_scale is not None:
        values["noise_scale"] = args.noise_scale
    if args.reference_layout:
        try:
            return SyntheticSpec.reference_layout(**values).model_dump()
        except ValidationError as e:
            raise ConfigError(f"Specifica sintetica non valida: {e.errors()[0]['msg']}")
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Costruisce l'ExperimentConfig: file --config, poi i flag espliciti

    Raises:
        ConfigError: Valori non validi o in conflitto
    """
    values: Dict[str, Any] = _read_json(args.config, "la configurazione") if args.config else {}

    if args.mode:
        values["mode"] = args.mode
    try:
        mode = RunMode(values.get("mode", RunMode.SUPERVISED.value))
    except ValueError:
        raise ConfigError(f"Modalità sconosciuta: {values.get('mode')}")

    if args.corpus:
        values["corpus_path"] = args.corpus
    synthetic = _synthetic_spec(args, values.get("synthetic"))
    if synthetic is not None:
        values["synthetic"] = synthetic

    if args.seeds is not None:
        values["seeds"] = parse_seeds(args.seeds)
    elif "seeds" not in values:
        if mode == RunMode.ONLINE:
            count = settings.FULL_ONLINE_SEEDS if args.full else settings.DEFAULT_ONLINE_SEEDS
        else:
            count = settings.DEFAULT_SEEDS
        values["seeds"] = list(range(count))

    if args.policies is not None:
        values["policies"] = [p.value for p in parse_policies(args.policies)]
    values["output_dir"] = args.out or values.get("output_dir") or settings.OUTPUT_ROOT
    if args.workers is not None:
        values["workers"] = args.workers
    elif "workers" not in values:
        values["workers"] = settings.DEFAULT_WORKERS
    if args.plot:
        values["plot"] = True
    if args.save_models:
        values["save_models"] = True

    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise ConfigError(f"Configurazione non valida ({field}: {error['msg']})", details={"errors": e.errors(include_url=False)})


def main(argv: Optional[List[str]] = None) -> int:
    """
    Punto di ingresso della CLI

    Returns:
        Exit code: 0 in caso di successo, altrimenti il codice della categoria di errore
    """
    args = build_parser().parse_args(argv)
    run_id = str(uuid.uuid4())
    mode = args.mode or "config"
    start_time = time.time()
    exit_code = EXIT_OK

    try:
        config = build_config(args)
        mode = config.mode.value
        log_run_start(
            run_id,
            mode,
            {
                "seeds": len(config.seeds),
                "policies": [p.value for p in config.policies],
                "corpus": config.corpus_path or ("synthetic" if config.synthetic else None),
                "output_dir": config.output_dir,
                "workers": config.workers,
            },
        )
        summary = run_experiment(config, run_id=run_id)
        print(json.dumps(
            {"status": summary.status, "mode": summary.mode, "output_dir": summary.output_dir, "files": summary.files},
            indent=settings.JSON_OUTPUT_INDENT,
        ))
    except LabError as e:
        exit_code = e.exit_code
        log_error(run_id, mode, str(e), e.to_dict())
    except Exception as e:
        exit_code = EXIT_UNEXPECTED
        logger.exception(f"Errore non gestito: {e}")
        log_error(run_id, mode, str(e), {"error": type(e).__name__})

    log_run_end(run_id, mode, exit_code, int((time.time() - start_time) * 1000))
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
