from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from app.utils.file_utils import ACCURACY_CSV, BASELINES_CSV, TRAJECTORY_CSV, require_files  # noqa: E402
from app.utils.logging_utils import get_logger  # noqa: E402

logger = get_logger(__name__)

CUMULATIVE_CLICKS_PNG = "cumulative_clicks.png"
CUMULATIVE_NORMALIZED_PNG = "cumulative_normalized_clicks.png"
ACCURACY_PNG = "accuracy_over_time.png"


def makefig(xlabel: str, ylabel: str) -> Tuple[Figure, Axes]:
    fig, ax = plt.subplots(1, 1, figsize=(7, 5))
    ax.grid(alpha=0.15)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.ticklabel_format(useOffset=False, style="plain")
    fig.set_dpi(150)
    return fig, ax


def plot_mean_std(ax: Axes, steps: np.ndarray, runs: np.ndarray, label: str) -> None:
    """Media sui seed con banda di ± una deviazione standard"""
    mean = runs.mean(axis=0)
    std = runs.std(axis=0, ddof=1) if runs.shape[0] > 1 else np.zeros_like(mean)
    plotted = ax.plot(steps, mean, label=label)
    ax.fill_between(steps, mean - std, mean + std, color=plotted[0].get_color(), alpha=0.15)


def save_plot(fig: Figure, ax: Axes, path: Path) -> Path:
    ax.legend(loc="best", fancybox=False, edgecolor="black")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Figura salvata: {path}")
    return path


def cumulative_runs(trajectory: pd.DataFrame, column: str) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """
    Curve cumulative per policy

    Returns:
        policy -> (passi, matrice seed x passi)
    """
    curves = {}
    for policy, data in trajectory.groupby("policy", sort=True):
        table = data.pivot(index="seed", columns="t", values=column).sort_index(axis=1)
        curves[str(policy)] = (table.columns.to_numpy(), table.to_numpy(dtype=np.float64).cumsum(axis=1))
    return curves


def accuracy_runs(accuracy: pd.DataFrame, column: str = "accuracy") -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """
    Accuratezza per policy su una griglia di passi comune

    Ogni seed mantiene il valore dell'ultimo modello addestrato fino al
    riaddestramento successivo.
    """
    runs = {}
    for policy, data in accuracy.groupby("policy", sort=True):
        steps = np.arange(0, int(data["t"].max()) + 1)
        table = (
            data.pivot_table(index="seed", columns="t", values=column, aggfunc="last")
            .reindex(columns=steps)
            .ffill(axis=1)
        )
        runs[str(policy)] = (steps, table.to_numpy(dtype=np.float64))
    return runs


def _baselines(directory: Path) -> Optional[pd.DataFrame]:
    path = directory / BASELINES_CSV
    if not path.is_file():
        return None
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        return None
    return None if frame.empty else frame


def emit_plots(result_dir: Union[str, Path]) -> List[Path]:
    """
    Genera le tre figure di un esperimento online

    Args:
        result_dir: Cartella con trajectory.csv e accuracy.csv (baselines.csv opzionale)

    Returns:
        Percorsi dei file PNG scritti

    Raises:
        ResultsError: Se mancano serie necessarie
    """
    directory = Path(result_dir)
    frames = require_files(directory, [TRAJECTORY_CSV, ACCURACY_CSV])
    trajectory = frames[TRAJECTORY_CSV]
    accuracy = frames[ACCURACY_CSV]
    written = []

    fig, ax = makefig("passo t", "clic cumulati")
    for policy, (steps, runs) in cumulative_runs(trajectory, "Y").items():
        plot_mean_std(ax, steps, runs, policy)
    written.append(save_plot(fig, ax, directory / CUMULATIVE_CLICKS_PNG))

    fig, ax = makefig("passo t", "clic normalizzati cumulati")
    for policy, (steps, runs) in cumulative_runs(trajectory, "normalized").items():
        plot_mean_std(ax, steps, runs, policy)
    written.append(save_plot(fig, ax, directory / CUMULATIVE_NORMALIZED_PNG))

    fig, ax = makefig("passo t", "accuratezza sulle coppie di test")
    for policy, (steps, runs) in accuracy_runs(accuracy).items():
        plot_mean_std(ax, steps, runs, policy)
    baselines = _baselines(directory)
    if baselines is not None:
        for baseline, data in baselines.groupby("baseline", sort=True):
            ax.axhline(float(data["accuracy"].mean()), linestyle="--", linewidth=1, color="gray" if baseline == "SupervisedFull" else "black", label=str(baseline))
    written.append(save_plot(fig, ax, directory / ACCURACY_PNG))

    return written
