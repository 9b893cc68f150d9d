"""Write convergence reports.

Every study produces three files sharing a prefix: a CSV table with one
row per resolution, a JSON summary with the fitted orders and acceptance
verdicts, and an SVG log-log plot of the L1 errors with first- and
second-order reference slopes.
"""

import json
import logging
import math
import traceback
from io import StringIO

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import scour.scour

from ._convergence import fit_order
from .utils import SCOUROPTIONS


def _finite_or_none(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return value


def write_report(reports, output, verdicts=None, plot=True):
    """Write ``{output}.csv``, ``{output}.json`` and ``{output}.svg``.

    Parameters
    ----------
    reports : list of ConvergenceReport
    output : str
        Filename prefix.
    verdicts : list of dict, optional
        Acceptance entries (bound, comparator, field, passed) aligned with
        ``reports``.

    Returns
    -------
    pandas.DataFrame
        The table written to the CSV file.
    """
    frame = pd.concat([r.to_frame() for r in reports], ignore_index=True,
                      sort=False)
    diag = [c for c in frame.columns if c.startswith("diag_")]
    if diag:
        frame[diag] = frame[diag].fillna(0).astype(int)
    frame.to_csv(f"{output}.csv", index=False)
    summary = []
    for i, report in enumerate(reports):
        entry = report.to_dict()
        entry["wall_time_total"] = float(np.sum(report.wall_time))
        if verdicts is not None and verdicts[i] is not None:
            entry["acceptance"] = {k: _finite_or_none(v)
                                   for k, v in verdicts[i].items()}
        summary.append(entry)
    with open(f"{output}.json", 'w') as f:
        json.dump(summary, f, indent=2, default=_finite_or_none)
    if plot:
        plot_convergence(frame, f"{output}.svg")
    logging.info(f"Report saved as {output}.csv, {output}.json")
    return frame


def plot_convergence(frame, filename):
    """Log-log L1 error against dx, one line per case, method and field."""
    try:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ok = frame[~frame["failed"].astype(bool)]
        for (case, method), group in ok.groupby(["case", "method"], sort=False):
            group = group.sort_values("dx")
            for column, marker in (("L1_p", "o"), ("L1_u", "s")):
                values = group[column].to_numpy(dtype=float)
                if np.all(values > 0.):
                    ax.loglog(group["dx"], values, marker=marker,
                              label=f"{method} {case} {column[-1]}")
        dx = np.sort(frame["dx"].unique())
        if len(dx) >= 2 and len(ok):
            positive = ok[["L1_p", "L1_u"]].to_numpy(dtype=float)
            positive = positive[positive > 0.]
            anchor = positive.max() if positive.size else 1.
            for order in (1, 2):
                ax.loglog(dx, anchor * (dx / dx[-1])**order, 'k--',
                          linewidth=0.8, label=f"order {order}")
        ax.set_xlabel(r"$\Delta x$")
        ax.set_ylabel(r"$L_1$ error")
        ax.legend(fontsize=6)
        with StringIO() as stringio, open(filename, 'w') as f:
            fig.savefig(stringio, format='svg')
            f.write(scour.scour.scourString(stringio.getvalue(), SCOUROPTIONS))
        plt.close(fig)
    except Exception as e:
        logging.error(f"Error: cannot draw convergence plot. Details: {e}")
        traceback.print_tb(e.__traceback__)


def merge_reports(filenames, output):
    """Concatenate CSV reports and refit the orders per case and method.

    Returns the summary table, also written to ``output``.
    """
    if not filenames:
        raise ValueError("No report files given")
    frame = pd.concat([pd.read_csv(fn) for fn in filenames], ignore_index=True,
                      sort=False)
    missing = {"case", "method", "dx", "L1_p", "L1_u"} - set(frame.columns)
    if missing:
        raise ValueError(f"Report files lack columns: {', '.join(sorted(missing))}")
    frame = frame.drop_duplicates(subset=["case", "method", "domain", "dx"]
                                  if "domain" in frame.columns
                                  else ["case", "method", "dx"], keep="last")
    rows = []
    keys = ["case", "method"] + (["domain"] if "domain" in frame.columns else [])
    for key, group in frame.groupby(keys, sort=False):
        group = group.sort_values("dx", ascending=False)
        row = dict(zip(keys, key))
        row["n_resolutions"] = len(group)
        for field_name in ("p", "u"):
            column = f"L1_{field_name}"
            if len(group) >= 2:
                row[f"order_{field_name}"] = fit_order(group[column], group["dx"])
            else:
                row[f"order_{field_name}"] = math.nan
            row[f"finest_{column}"] = group[column].iloc[-1]
        rows.append(row)
    summary = pd.DataFrame(rows)
    summary.to_csv(output, index=False)
    logging.info(f"Merged {len(filenames)} reports into {output}")
    return summary
