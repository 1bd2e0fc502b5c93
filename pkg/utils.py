"""
Utility functions for the shock calibration toolkit.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd

from config import Config
from exceptions import StorageError

logger = logging.getLogger(__name__)


def worker_count(threads=None):
    """Resolve the worker cap from an explicit value, SHOCKCAL_THREADS or the config."""
    if threads is None:
        threads = os.environ.get('SHOCKCAL_THREADS') or Config.THREADS
    return max(1, int(threads))


def parallel_map(func, items, threads=None):
    """
    Map func over items with a thread pool, preserving input order.

    Args:
        func: Callable applied to each item
        items: Iterable of inputs
        threads: Worker cap (None reads SHOCKCAL_THREADS)

    Returns:
        List of results in the order of items
    """
    items = list(items)
    workers = min(worker_count(threads), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def peak_histogram(peaks, bins=10):
    """
    Histogram of peak values over logarithmic bins.

    Args:
        peaks: Sequence of peak magnitudes in g
        bins: Number of log-spaced bins

    Returns:
        DataFrame with bin_low_g, bin_high_g and count columns
    """
    peaks = np.asarray(peaks, dtype=np.float64)
    lo, hi = peaks.min(), peaks.max()
    if lo == hi:
        hi = lo * 1.0001
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(peaks, bins=edges)
    return pd.DataFrame({'bin_low_g': edges[:-1], 'bin_high_g': edges[1:], 'count': counts})


def reports_frame(reports, timing=False):
    """Comparison table (one row per EvalReport); timing adds the wall-time column."""
    columns = ['method', 'eps_p_percent', 'eps_s', 'n'] + (['seconds'] if timing else [])
    return pd.DataFrame([report.to_dict(timing) for report in reports], columns=columns)


@contextmanager
def _writing(path, errors=(OSError,)):
    """Create the parent directory and turn write failures into StorageError."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        yield path
    except errors as e:
        raise StorageError(f'cannot write {path}: {e}') from e


def write_csv(frame, path, float_format='%.6f'):
    """Write a DataFrame as CSV with fixed float formatting (byte-stable output)."""
    with _writing(path) as path:
        frame.to_csv(path, index=False, float_format=float_format, lineterminator='\n')
    return path


def export_reports_excel(reports, path):
    """
    Export a method comparison to an Excel sheet.

    Args:
        reports: Sequence of EvalReport
        path: Destination .xlsx path

    Raises:
        StorageError: the workbook cannot be written
    """
    import xlsxwriter
    from xlsxwriter.exceptions import FileCreateError

    with _writing(path, (OSError, FileCreateError)) as path:
        workbook = xlsxwriter.Workbook(str(path))
        worksheet = workbook.add_worksheet('Comparison')

        # Formats
        header_format = workbook.add_format({'bold': True, 'bg_color': '#D9E1F2'})
        number_format = workbook.add_format({'num_format': '0.0'})
        seconds_format = workbook.add_format({'num_format': '0.000'})

        worksheet.set_column('A:A', 10)  # Method
        worksheet.set_column('B:C', 14)  # Errors
        worksheet.set_column('D:D', 8)   # N
        worksheet.set_column('E:E', 12)  # Wall time

        headers = ['Method', 'eps_p (%)', 'eps_s', 'N', 'Seconds']
        for col, header in enumerate(headers):
            worksheet.write(0, col, header, header_format)

        for row_num, report in enumerate(reports, start=1):
            worksheet.write(row_num, 0, report.method)
            worksheet.write(row_num, 1, 100.0 * report.eps_p, number_format)
            worksheet.write(row_num, 2, report.eps_s, number_format)
            worksheet.write(row_num, 3, report.n)
            if np.isfinite(report.seconds):
                worksheet.write(row_num, 4, report.seconds, seconds_format)

        workbook.close()
    return path


# x column -> (x label, y label, log-log axes)
PLOT_AXES = {
    'freq_hz': ('Natural frequency (Hz)', 'Maximax acceleration (g)', True),
    'time_ms': ('Time (ms)', 'Acceleration (g)', False),
}


def plot_svg(frame, path, title=None):
    """
    Line plot of every column against the first one as a static SVG.

    Args:
        frame: DataFrame whose first column is freq_hz (log-log SRS plot)
            or time_ms (linear waveform plot)
        path: Destination .svg path
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    x = frame.columns[0]
    xlabel, ylabel, loglog = PLOT_AXES[x]
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in frame.columns[1:]:
        if loglog:
            ax.loglog(frame[x], frame[column].clip(lower=1e-12), label=column)
        else:
            ax.plot(frame[x], frame[column], label=column, linewidth=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()
    fig.tight_layout()
    try:
        with _writing(path) as path:
            # No timestamp so repeated runs produce identical files
            fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(fig)
    return path
