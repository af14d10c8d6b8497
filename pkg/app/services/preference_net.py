import copy
from collections import OrderedDict
from typing import Dict, Tuple, Any, Optional, Union

import numpy as np

from app.utils.errors import ModelError
from app.utils.logging_utils import get_logger

logger = get_logger(__name__)


def mrl_loss(
    score_low: Union[float, np.ndarray],
    score_high: Union[float, np.ndarray],
    margin: float,
) -> Union[float, np.ndarray]:
    """
    Margin Ranking Loss per una coppia (o un vettore di coppie) in ordine canonico

    Returns:
        max(0, margin - (score_high - score_low))
    """
    loss = np.maximum(0.0, margin - (np.asarray(score_high) - np.asarray(score_low)))
    if np.ndim(loss) == 0:
        return float(loss)
    return loss


class PreferenceNet:
    """
    Scorer di preferenza: proiezione d -> H con ReLU, blocchi residui e testa lineare.

    Ogni blocco residuo calcola
        relu(BN(relu(BN(h W1 + b1)) W2 + b2) + h)
    La batch-norm usa le statistiche del batch in addestramento e le
    statistiche correnti (running) in inferenza.
    """

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int = 200,
        n_blocks: int = 1,
        bn_eps: float = 1e-5,
        bn_momentum: float = 0.1,
    ):
        if input_dim <= 0 or hidden_dim <= 0:
            raise ModelError(f"Dimensioni non valide: d={input_dim}, H={hidden_dim}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_blocks = n_blocks
        self.bn_eps = bn_eps
        self.bn_momentum = bn_momentum
        self.training = True

        H = hidden_dim
        self.params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self.buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

        self.params["projection.weight"] = np.zeros((input_dim, H))
        self.params["projection.bias"] = np.zeros(H)
        for i in range(n_blocks):
            prefix = f"blocks.{i}"
            for layer in ("1", "2"):
                self.params[f"{prefix}.linear{layer}.weight"] = np.zeros((H, H))
                self.params[f"{prefix}.linear{layer}.bias"] = np.zeros(H)
                self.params[f"{prefix}.bn{layer}.gamma"] = np.ones(H)
                self.params[f"{prefix}.bn{layer}.beta"] = np.zeros(H)
                self.buffers[f"{prefix}.bn{layer}.running_mean"] = np.zeros(H)
                self.buffers[f"{prefix}.bn{layer}.running_var"] = np.ones(H)
        self.params["head.weight"] = np.zeros(H)
        self.params["head.bias"] = np.zeros(1)

    def train(self) -> "PreferenceNet":
        self.training = True
        return self

    def eval(self) -> "PreferenceNet":
        self.training = False
        return self

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @staticmethod
    def is_decay_exempt(name: str) -> bool:
        """Scala e shift della batch-norm sono esclusi dal weight decay"""
        return name.endswith(".gamma") or name.endswith(".beta")

    def copy(self) -> "PreferenceNet":
        return copy.deepcopy(self)

    def state(self) -> Dict[str, np.ndarray]:
        """Copia di parametri e buffer, nell'ordine fisso del checkpoint"""
        state = OrderedDict((name, value.copy()) for name, value in self.params.items())
        state.update((name, value.copy()) for name, value in self.buffers.items())
        return state

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        for store in (self.params, self.buffers):
            for name in store:
                if name not in state:
                    raise ModelError(f"Parametro mancante nello stato: {name}")
                if state[name].shape != store[name].shape:
                    raise ModelError(
                        f"Forma non compatibile per {name}: {state[name].shape} invece di {store[name].shape}"
                    )
                store[name] = np.array(state[name], dtype=np.float64, copy=True)

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ModelError(
                f"Dimensione di input {X.shape[-1] if X.ndim else 0} diversa da {self.input_dim}"
            )
        return X

    def _batch_norm(self, a: np.ndarray, prefix: str, training: bool) -> Tuple[np.ndarray, Dict[str, Any]]:
        gamma = self.params[f"{prefix}.gamma"]
        beta = self.params[f"{prefix}.beta"]
        if training:
            mean = a.mean(axis=0)
            var = a.var(axis=0)
        else:
            mean = self.buffers[f"{prefix}.running_mean"]
            var = self.buffers[f"{prefix}.running_var"]
        inv_std = 1.0 / np.sqrt(var + self.bn_eps)
        xhat = (a - mean) * inv_std
        cache = {"xhat": xhat, "inv_std": inv_std, "mean": mean, "var": var, "n": a.shape[0]}
        return gamma * xhat + beta, cache

    def forward_batch(self, X: np.ndarray, training: Optional[bool] = None) -> Tuple[np.ndarray, Dict[str, Any]]:
        """
        Forward su un batch, senza modificare lo stato della rete

        Returns:
            Tupla (punteggi di forma (n,), cache per il backward)
        """
        X = self._check_input(X)
        training = self.training if training is None else training

        pre0 = X @ self.params["projection.weight"] + self.params["projection.bias"]
        h = np.maximum(pre0, 0.0)
        cache: Dict[str, Any] = {"X": X, "pre0": pre0, "training": training, "blocks": []}

        for i in range(self.n_blocks):
            prefix = f"blocks.{i}"
            a1 = h @ self.params[f"{prefix}.linear1.weight"] + self.params[f"{prefix}.linear1.bias"]
            n1, bn1 = self._batch_norm(a1, f"{prefix}.bn1", training)
            r1 = np.maximum(n1, 0.0)
            a2 = r1 @ self.params[f"{prefix}.linear2.weight"] + self.params[f"{prefix}.linear2.bias"]
            n2, bn2 = self._batch_norm(a2, f"{prefix}.bn2", training)
            z = n2 + h
            cache["blocks"].append({"h_in": h, "n1": n1, "r1": r1, "z": z, "bn1": bn1, "bn2": bn2})
            h = np.maximum(z, 0.0)

        cache["h_out"] = h
        scores = h @ self.params["head.weight"] + self.params["head.bias"][0]
        return scores, cache

    def forward(self, x: np.ndarray) -> float:
        """Punteggio di preferenza f(x) di un singolo embedding"""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ModelError("forward accetta un singolo embedding; usare score per i batch")
        scores, _ = self.forward_batch(x)
        return float(scores[0])

    def score(self, X: np.ndarray) -> np.ndarray:
        """Punteggi in inferenza per un batch di embedding"""
        scores, _ = self.forward_batch(X, training=False)
        return scores

    def update_running_stats(self, cache: Dict[str, Any]) -> None:
        """Aggiorna media e varianza correnti con le statistiche di un forward di addestramento"""
        if not cache["training"]:
            return
        m = self.bn_momentum
        for i, block in enumerate(cache["blocks"]):
            for layer in ("bn1", "bn2"):
                stats = block[layer]
                n = stats["n"]
                unbiased = stats["var"] * n / (n - 1) if n > 1 else stats["var"]
                prefix = f"blocks.{i}.{layer}"
                self.buffers[f"{prefix}.running_mean"] = (1 - m) * self.buffers[f"{prefix}.running_mean"] + m * stats["mean"]
                self.buffers[f"{prefix}.running_var"] = (1 - m) * self.buffers[f"{prefix}.running_var"] + m * unbiased

    def _batch_norm_backward(self, dy: np.ndarray, prefix: str, stats: Dict[str, Any], training: bool, grads: Dict[str, np.ndarray]) -> np.ndarray:
        gamma = self.params[f"{prefix}.gamma"]
        xhat = stats["xhat"]
        inv_std = stats["inv_std"]
        grads[f"{prefix}.gamma"] = (dy * xhat).sum(axis=0)
        grads[f"{prefix}.beta"] = dy.sum(axis=0)
        dxhat = dy * gamma
        if not training:
            return dxhat * inv_std
        n = stats["n"]
        return (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))

    def backward(self, cache: Dict[str, Any], dscores: np.ndarray) -> "OrderedDict[str, np.ndarray]":
        """
        Gradiente rispetto a tutti i parametri dato dL/dscore per ogni riga del batch

        Returns:
            Gradienti con le stesse chiavi e forme di params
        """
        training = cache["training"]
        grads: Dict[str, np.ndarray] = {}
        dscores = np.asarray(dscores, dtype=np.float64)

        h_out = cache["h_out"]
        grads["head.weight"] = h_out.T @ dscores
        grads["head.bias"] = np.array([dscores.sum()])
        dh = np.outer(dscores, self.params["head.weight"])

        for i in reversed(range(self.n_blocks)):
            prefix = f"blocks.{i}"
            block = cache["blocks"][i]
            dz = dh * (block["z"] > 0)
            da2 = self._batch_norm_backward(dz, f"{prefix}.bn2", block["bn2"], training, grads)
            grads[f"{prefix}.linear2.weight"] = block["r1"].T @ da2
            grads[f"{prefix}.linear2.bias"] = da2.sum(axis=0)
            dr1 = da2 @ self.params[f"{prefix}.linear2.weight"].T
            dn1 = dr1 * (block["n1"] > 0)
            da1 = self._batch_norm_backward(dn1, f"{prefix}.bn1", block["bn1"], training, grads)
            grads[f"{prefix}.linear1.weight"] = block["h_in"].T @ da1
            grads[f"{prefix}.linear1.bias"] = da1.sum(axis=0)
            dh = da1 @ self.params[f"{prefix}.linear1.weight"].T + dz

        dpre0 = dh * (cache["pre0"] > 0)
        grads["projection.weight"] = cache["X"].T @ dpre0
        grads["projection.bias"] = dpre0.sum(axis=0)

        return OrderedDict((name, grads[name]) for name in self.params)

    def pair_loss_and_gradients(
        self,
        X_low: np.ndarray,
        X_high: np.ndarray,
        margin: float,
        training: Optional[bool] = None,
    ) -> Tuple[float, "OrderedDict[str, np.ndarray]", Dict[str, Any]]:
        """
        MRL media di un batch di coppie e relativi gradienti

        Entrambi i lati passano per gli stessi pesi in un unico forward:
        le statistiche di batch-norm sono calcolate sull'unione dei due lati.
        I termini a perdita nulla (compreso il punto di non derivabilità)
        hanno gradiente nullo.
        """
        X_low = self._check_input(X_low)
        X_high = self._check_input(X_high)
        if X_low.shape[0] == 0 or X_low.shape != X_high.shape:
            raise ModelError("Batch di coppie vuoto o con lati di dimensione diversa")
        B = X_low.shape[0]

        scores, cache = self.forward_batch(np.vstack([X_low, X_high]), training=training)
        gap = margin - (scores[B:] - scores[:B])
        active = (gap > 0).astype(np.float64)
        loss = float(np.maximum(gap, 0.0).mean())

        dscores = np.concatenate([active / B, -active / B])
        grads = self.backward(cache, dscores)
        return loss, grads, cache

    def pair_loss(self, X_low: np.ndarray, X_high: np.ndarray, margin: float, training: Optional[bool] = None) -> float:
        """MRL media senza gradienti"""
        X_low = self._check_input(X_low)
        X_high = self._check_input(X_high)
        B = X_low.shape[0]
        scores, _ = self.forward_batch(np.vstack([X_low, X_high]), training=training)
        return float(np.mean(mrl_loss(scores[:B], scores[B:], margin)))

    def score_gradient(self, x: np.ndarray) -> np.ndarray:
        """
        Gradiente di f(x) rispetto a tutti i parametri in inferenza, appiattito

        L'ordine delle componenti segue params.
        """
        scores, cache = self.forward_batch(np.asarray(x, dtype=np.float64)[None, :], training=False)
        grads = self.backward(cache, np.ones(1))
        return np.concatenate([g.ravel() for g in grads.values()])


def init_params(
    input_dim: int,
    hidden_dim: int,
    n_blocks: int,
    rng: np.random.Generator,
    **kwargs,
) -> PreferenceNet:
    """
    Inizializza una rete con pesi N(0, 2/fan_in), bias nulli e batch-norm neutra

    Args:
        input_dim: Dimensione degli embedding
        hidden_dim: Larghezza H dei blocchi
        n_blocks: Numero di blocchi residui
        rng: Sorgente casuale

    Returns:
        Rete in modalità addestramento
    """
    net = PreferenceNet(input_dim, hidden_dim, n_blocks, **kwargs)
    for name, value in net.params.items():
        if name.endswith(".weight"):
            fan_in = value.shape[0]
            net.params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=value.shape)
    logger.debug(f"Rete inizializzata: d={input_dim}, H={hidden_dim}, blocchi={n_blocks}, parametri={net.n_parameters}")
    return net
