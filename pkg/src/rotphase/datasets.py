"""Fringe datasets and their CSV format (``b_x_tesla, population, sigma``)."""

import csv
from dataclasses import dataclass

import numpy as np

FRINGE_COLUMNS = ("b_x_tesla", "population", "sigma")


@dataclass(frozen=True)
class FringeDataset:
    """Spin-echo population versus applied transverse field.

    ``sigma`` is None for noiseless data; otherwise every entry is positive.
    """

    b_x: np.ndarray
    population: np.ndarray
    sigma: np.ndarray = None

    def __post_init__(self):
        b = np.asarray(self.b_x, dtype=float)
        p = np.asarray(self.population, dtype=float)
        object.__setattr__(self, "b_x", b)
        object.__setattr__(self, "population", p)
        if b.shape != p.shape or b.ndim != 1:
            raise ValueError("b_x and population must be 1-D arrays of equal length")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("populations must lie in [0, 1]")
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != b.shape or np.any(~(s > 0)):
                raise ValueError("sigmas must be positive and match b_x")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return len(self.b_x)

    def shifted(self, delta_b):
        return FringeDataset(self.b_x + delta_b, self.population, self.sigma)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(FRINGE_COLUMNS)
            sig = self.sigma if self.sigma is not None else [None] * len(self)
            for b, p, s in zip(self.b_x, self.population, sig):
                writer.writerow([f"{b:.17g}", f"{p:.17g}", "" if s is None else f"{s:.17g}"])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(FRINGE_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            rows = list(reader)
        b = [float(r["b_x_tesla"]) for r in rows]
        p = [float(r["population"]) for r in rows]
        raw = [r["sigma"].strip() for r in rows]
        if all(raw):
            sigma = [float(s) for s in raw]
        elif not any(raw):
            sigma = None
        else:
            raise ValueError(f"{path}: sigma column must be all filled or all empty")
        return cls(np.array(b), np.array(p), None if sigma is None else np.array(sigma))


def read_csv_columns(path):
    """Read a numeric CSV into ``{column: array}``; empty cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    cols = {}
    for i, name in enumerate(header):
        values = []
        for row in rows:
            cell = row[i].strip() if i < len(row) else ""
            try:
                values.append(float(cell) if cell else np.nan)
            except ValueError:
                values.append(np.nan)
        cols[name] = np.array(values)
    return cols


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)
