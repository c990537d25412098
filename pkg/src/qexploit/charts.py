"""Static SVG line charts of running action-profile frequencies."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def profile_chart(frequencies: np.ndarray, labels: list[str], title: str, path) -> Path:
    """One line per joint profile; output is byte-stable for identical input."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "qexploit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        stages = np.arange(1, frequencies.shape[0] + 1)
        for k, lab in enumerate(labels):
            ax.plot(stages, frequencies[:, k], label=lab, linewidth=1.2)
        ax.set_xlabel("stage")
        ax.set_ylabel("empirical frequency")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(title)
        ax.legend(fontsize="small", ncol=2 if len(labels) > 4 else 1)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
