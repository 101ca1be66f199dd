import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError

log = logging.getLogger(__name__)


def per_sample_nmse(true_h, est_h):
    """``||H - H^||_F^2 / ||H||_F^2`` for each sample; zero-energy samples give NaN."""
    t = np.asarray(true_h, dtype=np.complex128)
    e = np.asarray(est_h, dtype=np.complex128)
    if t.shape != e.shape:
        raise InvalidParameterError(f"true {t.shape} and estimate {e.shape} differ in shape")
    if t.ndim == 2:
        t, e = t[None], e[None]
    axes = tuple(range(1, t.ndim))
    num = np.sum(np.abs(t - e) ** 2, axis=axes)
    den = np.sum(np.abs(t) ** 2, axis=axes)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def nmse(true_h, est_h):
    """Sample mean of the per-sample normalised squared error.

    Samples whose true channel has zero energy are skipped with a warning.
    """
    if len(true_h) == 0:
        raise InvalidParameterError("nmse of an empty dataset")
    r = per_sample_nmse(true_h, est_h)
    bad = np.isnan(r)
    if bad.any():
        log.warning("skipping %d zero-energy sample(s) in NMSE", int(bad.sum()))
        if bad.all():
            raise InvalidParameterError("every sample has a zero-energy true channel")
    return float(np.mean(r[~bad]))


@dataclass
class MetricsTable:
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match):
        idx = {k: self.columns.index(k) for k in match}
        return [r for r in self.rows if all(r[i] == match[k] for k, i in idx.items())]

    def value(self, key_col, key, x_col, x, y_col):
        for r in self.rows:
            if r[self.columns.index(key_col)] == key and r[self.columns.index(x_col)] == x:
                return r[self.columns.index(y_col)]
        raise KeyError((key, x))

    def series(self, key_col, x_col, y_col):
        out = {}
        k, xi, yi = (self.columns.index(c) for c in (key_col, x_col, y_col))
        for r in self.rows:
            xs, ys = out.setdefault(r[k], ([], []))
            xs.append(r[xi])
            ys.append(r[yi])
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                # repr keeps every float bit-exact through a text round trip
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            cols = tuple(next(rd))
            table = cls(cols)
            for r in rd:
                table.rows.append(tuple(_parse_cell(v) for v in r))
        return table


def _parse_cell(v):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v
