"""
SVG learning curves from a SummaryReport.

The same report always yields the same bytes: fixed hash salt, no date
metadata, text kept as text.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from .exceptions import InputError, PlotWriteError  # noqa: E402

logger = logging.getLogger(__name__)

METRICS = {
    'test_acc': ('test_acc_mean', 'test_acc_std', 'test accuracy'),
    'train_loss': ('train_loss_mean', 'train_loss_std', 'training loss'),
}
SVG_RC = {
    'svg.hashsalt': 'dropcurve',
    'svg.fonttype': 'none',
    'path.simplify': False,
}


def emit_plot(report, out_path, metric='test_acc'):
    """
    One mean line and a +-1 standard deviation band per method.
    """
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if not report.methods:
        raise InputError("the summary holds no methods to plot")
    mean_key, std_key, label = METRICS[metric]
    out_path = Path(out_path)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        try:
            for summary in report.methods:
                steps = summary.steps
                mean = getattr(summary, mean_key)
                std = getattr(summary, std_key)
                line, = ax.plot(steps, mean, label=f"{summary.method} (n={summary.seeds})")
                ax.fill_between(
                    steps,
                    [m - s for m, s in zip(mean, std)],
                    [m + s for m, s in zip(mean, std)],
                    color=line.get_color(), alpha=0.2, linewidth=0,
                )
            ax.set_xlabel('gradient updates')
            ax.set_ylabel(label)
            ax.legend(loc='best')
            fig.tight_layout()
            try:
                fig.savefig(out_path, format='svg', metadata={'Date': None})
            except OSError as exc:
                raise PlotWriteError(f"cannot write plot to {out_path}: {exc.strerror or exc}") from exc
        finally:
            plt.close(fig)
    logger.info("wrote %s plot of %d methods to %s", metric, len(report.methods), out_path)
    return out_path
