"""Report figures: confusion matrices and learning curves.

Figures are written with the Agg backend and with PNG metadata stripped so
that reruns produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import CLASSES  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "groupaffect",
}
PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    plt.close(fig)


def plot_confusion(confusion, path, title="Confusion matrix", columns=None):
    confusion = np.asarray(confusion)
    columns = list(columns) if columns is not None else list(CLASSES) + ["None"][: confusion.shape[1] - len(CLASSES)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        ax.imshow(confusion, cmap="Blues", vmin=0)
        ax.set_xticks(range(confusion.shape[1]), columns)
        ax.set_yticks(range(confusion.shape[0]), CLASSES)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(title)
        hi = confusion.max() if confusion.size else 0
        for (i, j), v in np.ndenumerate(confusion):
            ax.text(j, i, str(int(v)), ha="center", va="center",
                    color="white" if hi and v > hi / 2 else "black")
        fig.tight_layout()
        _save(fig, path)


def plot_history(rows, loss_path, acc_path):
    """Loss and accuracy per epoch, train vs validation.

    ``rows`` are ``(epoch, train_loss, train_acc, val_loss, val_acc)`` tuples.
    """
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
    epochs = rows[:, 0]
    for path, cols, label in ((loss_path, (1, 3), "loss"), (acc_path, (2, 4), "accuracy")):
        with plt.rc_context(STYLE):
            fig, ax = plt.subplots(figsize=(4.5, 3.0))
            ax.plot(epochs, rows[:, cols[0]], marker="o", ms=3, label=f"train {label}")
            ax.plot(epochs, rows[:, cols[1]], marker="s", ms=3, label=f"val {label}")
            ax.set_xlabel("epoch")
            ax.set_ylabel(label)
            ax.legend(frameon=False)
            fig.tight_layout()
            _save(fig, path)
