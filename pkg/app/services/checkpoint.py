import json
from pathlib import Path
from typing import Union

import numpy as np

from app.services.preference_net import PreferenceNet
from app.utils.errors import ModelError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)

CHECKPOINT_FORMAT = "preference-net"
CHECKPOINT_VERSION = 1
HEADER_KEY = "__header__"


def save_checkpoint(net: PreferenceNet, path: Union[str, Path]) -> Path:
    """
    Salva parametri e buffer in un archivio .npz con intestazione JSON

    L'intestazione riporta l'architettura e l'elenco ordinato di nomi e forme.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = net.state()
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": net.input_dim,
        "hidden_dim": net.hidden_dim,
        "n_blocks": net.n_blocks,
        "bn_eps": net.bn_eps,
        "bn_momentum": net.bn_momentum,
        "entries": [[name, list(value.shape)] for name, value in state.items()],
    }
    arrays = {HEADER_KEY: np.array(json.dumps(header))}
    arrays.update(state)
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    logger.info(f"Checkpoint salvato: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> PreferenceNet:
    """Ricostruisce una rete (in modalità inferenza) da un checkpoint"""
    path = Path(path)
    if not path.exists():
        raise ModelError(f"Checkpoint non trovato: {path}")

    with np.load(path, allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise ModelError(f"Intestazione mancante nel checkpoint {path}")
        header = json.loads(str(archive[HEADER_KEY]))
        if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != CHECKPOINT_VERSION:
            raise ModelError(f"Formato checkpoint non supportato: {header.get('format')} v{header.get('version')}")

        net = PreferenceNet(
            header["input_dim"],
            header["hidden_dim"],
            header["n_blocks"],
            bn_eps=header["bn_eps"],
            bn_momentum=header["bn_momentum"],
        )
        state = {}
        for name, shape in header["entries"]:
            value = archive[name]
            if list(value.shape) != shape:
                raise ModelError(f"Forma non coerente per {name} nel checkpoint")
            state[name] = value

    net.load_state(state)
    net.eval()
    logger.info(f"Checkpoint caricato: {path}")
    return net
