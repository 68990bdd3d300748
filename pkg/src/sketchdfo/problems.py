"""Nonlinear least-squares test problems, f(x) = 0.5 * ||r(x)||^2."""

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

LINKS = ("linear", "logistic")


@dataclass(frozen=True)
class Problem:
    name: str
    d: int
    n: int
    x0: np.ndarray
    residual: Callable[[np.ndarray], np.ndarray]
    f_min: Optional[float] = None

    def __post_init__(self):
        if not self.n >= self.d >= 1:
            raise ValueError(f"need n >= d >= 1, got d={self.d}, n={self.n}")

    def objective(self, x):
        r = self.residual(np.asarray(x, dtype=float))
        return 0.5 * float(r @ r)


def gen_rosenbrock(d):
    """Chained Rosenbrock residuals in R^d with n = 2(d-1).

    r_{2i-1} = 10 (x_{i+1} - x_i^2), r_{2i} = x_i - 1 for i = 1..d-1.
    """
    d = int(d)
    if d < 2:
        raise ValueError(f"generalized Rosenbrock needs d >= 2, got {d}")

    def residual(x):
        x = np.asarray(x, dtype=float)
        head = x[:-1]
        r = np.empty(2 * (d - 1))
        r[0::2] = 10.0 * (x[1:] - head * head)
        r[1::2] = head - 1.0
        return r

    x0 = np.tile([-1.2, 1.0], (d + 1) // 2)[:d]
    return Problem(f"rosenbrock{d}", d, 2 * (d - 1), x0, residual, f_min=0.0)


def _read_dataset(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, a header row is required") from None
        ncol = len(header)
        if ncol < 2:
            raise ValueError(f"{path}: need at least one feature column and one label column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} columns, header has {ncol}"
                )
            vals = []
            for col, cell in enumerate(row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column {col} ({header[col]!r}): "
                        f"non-numeric value {cell!r}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    return data[:, :-1], data[:, -1]


def dataset_problem(path, link="linear", intercept=False):
    """Regression residuals r_i(x) = phi(a_i^T x [+ b]) - y_i from a CSV file.

    The file has a header row, p feature columns and a final label column.
    With ``intercept`` the last coordinate of x is the offset b.
    """
    if link not in LINKS:
        raise ValueError(f"unknown link {link!r}; expected one of {LINKS}")
    A, y = _read_dataset(path)
    n, p = A.shape
    d = p + 1 if intercept else p
    if n < d:
        raise ValueError(f"{path}: {n} rows but {d} parameters; need n >= d")
    phi = expit if link == "logistic" else None

    def residual(x):
        x = np.asarray(x, dtype=float)
        z = A @ x[:p]
        if intercept:
            z = z + x[p]
        if phi is not None:
            z = phi(z)
        return z - y

    name = f"dataset[{link}]"
    return Problem(name, d, n, np.zeros(d), residual)


def random_nlls(d, n, seed=0, alpha=0.1, noise=0.1):
    """Smooth synthetic residuals r_i(x) = a_i^T x + alpha sin(b_i^T x) - c_i.

    a_i, b_i have N(0, 1/d) entries; c is generated from a planted point
    x* ~ N(0, I) plus N(0, noise^2) perturbations, so the minimum is
    roughly 0.5 * n * noise^2 rather than dominated by an unfittable
    offset. Start point is the origin.
    """
    d, n = int(d), int(n)
    if n < d:
        raise ValueError(f"need n >= d, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d)) / np.sqrt(d)
    B = rng.standard_normal((n, d)) / np.sqrt(d)
    x_star = rng.standard_normal(d)
    c = A @ x_star + alpha * np.sin(B @ x_star) + noise * rng.standard_normal(n)

    def residual(x):
        x = np.asarray(x, dtype=float)
        r = A @ x
        if alpha:
            r += alpha * np.sin(B @ x)
        r -= c
        return r

    return Problem(f"random_nlls{d}x{n}", d, n, np.zeros(d), residual)
