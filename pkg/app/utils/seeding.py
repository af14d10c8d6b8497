from dataclasses import dataclass

import numpy as np

STREAM_NAMES = ("init", "pairing", "training", "policy", "data")


@dataclass
class SeedStreams:
    """
    Sorgenti casuali indipendenti derivate da un seed di replica

    Cambiare l'uso di uno stream non perturba gli altri.
    """
    seed: int
    init: np.random.Generator
    pairing: np.random.Generator
    training: np.random.Generator
    policy: np.random.Generator
    data: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
        generators = {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}
        return cls(seed=seed, **generators)

    @classmethod
    def from_rng(cls, rng: np.random.Generator) -> "SeedStreams":
        return cls.from_seed(int(rng.integers(0, 2**63 - 1)))
