from typing import Dict, Optional

import numpy as np

from app.models.training import TrainConfig
from app.services.preference_net import PreferenceNet
from app.utils.errors import DivergenceError


class Adam:
    """
    Adam con correzione del bias e weight decay disaccoppiato

    Il decay theta <- theta - lr * wd * theta viene applicato prima del passo
    di Adam; scala e shift della batch-norm ne sono esclusi.
    """

    def __init__(self, net: PreferenceNet, config: TrainConfig, learning_rate: Optional[float] = None):
        self.net = net
        self.lr = config.learning_rate if learning_rate is None else learning_rate
        self.weight_decay = config.weight_decay
        self.beta1 = config.adam.beta1
        self.beta2 = config.adam.beta2
        self.eps = config.adam.eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in net.params.items()}
        self.v = {name: np.zeros_like(p) for name, p in net.params.items()}

    def step(self, gradients: Dict[str, np.ndarray]) -> PreferenceNet:
        for name, g in gradients.items():
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"Gradiente non finito per {name}", details={"step": self.step_count + 1})

        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1 ** t
        bias2 = 1.0 - self.beta2 ** t

        for name, theta in self.net.params.items():
            g = gradients[name]
            if self.weight_decay and not PreferenceNet.is_decay_exempt(name):
                theta = theta - self.lr * self.weight_decay * theta
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            theta = theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if not np.all(np.isfinite(theta)):
                raise DivergenceError(f"Parametro non finito dopo l'aggiornamento: {name}", details={"step": t})
            self.net.params[name] = theta

        return self.net


def adam_step(
    net: PreferenceNet,
    gradients: Dict[str, np.ndarray],
    config: TrainConfig,
    step_count: int,
    optimizer: Optional[Adam] = None,
) -> PreferenceNet:
    """
    Esegue un passo di Adam come passo numero step_count

    Se optimizer è fornito ne riusa i momenti, altrimenti parte da momenti nulli.
    """
    if step_count < 1:
        raise ValueError(f"step_count deve essere >= 1, ricevuto {step_count}")
    optimizer = optimizer or Adam(net, config)
    optimizer.step_count = step_count - 1
    return optimizer.step(gradients)
