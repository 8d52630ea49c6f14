"""Personal resting-rate model: OLS fit, threshold, k-means and variability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegeneratePredictorError,
    EmptyInputError,
    InsufficientDataError,
    KTooLargeError,
    ZeroTotalSSError,
)
from .ingest import VITALS, PulseSample

__all__ = [
    "RegressionModel",
    "PersonalModel",
    "KMeansResult",
    "PREPROCESSING",
    "preprocess",
    "fit_resting_rate",
    "predict_rr",
    "compute_tau",
    "feature_matrix",
    "zscore",
    "kmeans",
    "variability",
    "train_personal_model",
]

#: row filters tried when reproducing a published fit
PREPROCESSING = ("none", "drop-missing", "drop-zeros")

DEFAULT_RESTARTS = 25
MAX_ITER = 100


@dataclass(frozen=True)
class RegressionModel:
    """``resp = intercept + slope * pulse``."""

    intercept: float
    slope: float
    n_train: int

    def __post_init__(self):
        if not (math.isfinite(self.intercept) and math.isfinite(self.slope)):
            raise ValueError("regression coefficients must be finite")
        if self.n_train < 2:
            raise ValueError("n_train must be >= 2")


@dataclass(frozen=True)
class PersonalModel:
    regression: RegressionModel
    tau: float
    sigma_rr: float
    centers: tuple[tuple[float, ...], ...]
    k: int
    variability_pct: float
    standardized: bool = False

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if not self.sigma_rr >= 0:
            raise ValueError("sigma_rr must be >= 0")
        if self.k < 1 or len(self.centers) != self.k:
            raise ValueError("k must be >= 1 and match the number of centers")
        if not 0.0 <= self.variability_pct <= 100.0:
            raise ValueError("variability_pct must lie in [0, 100]")

    def to_dict(self) -> dict:
        return {
            "regression": {
                "intercept": self.regression.intercept,
                "slope": self.regression.slope,
                "n_train": self.regression.n_train,
            },
            "tau": self.tau,
            "sigma_rr": self.sigma_rr,
            "k": self.k,
            "centers": [list(c) for c in self.centers],
            "variability_pct": self.variability_pct,
            "standardized": self.standardized,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PersonalModel":
        reg = d["regression"]
        return cls(
            regression=RegressionModel(float(reg["intercept"]), float(reg["slope"]), int(reg["n_train"])),
            tau=float(d["tau"]),
            sigma_rr=float(d["sigma_rr"]),
            centers=tuple(tuple(float(v) for v in c) for c in d["centers"]),
            k=int(d["k"]),
            variability_pct=float(d["variability_pct"]),
            standardized=bool(d.get("standardized", False)),
        )


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    within_ss: float
    between_ss: float
    total_ss: float
    restart: int = 0
    n_iter: int = 0
    restart_within_ss: tuple[float, ...] = field(default=(), repr=False)


def preprocess(samples: Sequence[PulseSample], choice: str = "none") -> list[PulseSample]:
    """Apply one of the :data:`PREPROCESSING` row filters.

    ``none`` keeps every row (the fit itself still skips rows lacking pulse or
    resp). ``drop-missing`` keeps complete cases over all four vitals.
    ``drop-zeros`` additionally removes rows with any zero vital.
    """
    if choice == "none":
        return list(samples)
    if choice == "drop-missing":
        return [s for s in samples if None not in s.vitals()]
    if choice == "drop-zeros":
        return [s for s in samples if None not in s.vitals() and 0.0 not in s.vitals()]
    raise ValueError(f"unknown preprocessing {choice!r}; expected one of {PREPROCESSING}")


def _pairs(samples):
    xs = [s.pulse for s in samples if s.pulse is not None and s.resp is not None]
    ys = [s.resp for s in samples if s.pulse is not None and s.resp is not None]
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)


def fit_resting_rate(samples: Sequence[PulseSample]) -> RegressionModel:
    """Ordinary least squares of resp on pulse, skipping incomplete pairs."""
    x, y = _pairs(samples)
    if x.size < 2:
        raise InsufficientDataError(f"need >= 2 rows with pulse and resp, got {x.size}")
    if np.all(x == x[0]):
        raise DegeneratePredictorError("pulse has zero variance")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    return RegressionModel(intercept, slope, int(x.size))


def predict_rr(model: RegressionModel, pr):
    """Resting rate predicted from pulse; deliberately unclamped."""
    return model.intercept + model.slope * pr


def compute_tau(model: RegressionModel, samples: Sequence[PulseSample]) -> tuple[float, float]:
    """Mean and population standard deviation of predicted rr over the window."""
    pulses = np.asarray([s.pulse for s in samples if s.pulse is not None], dtype=float)
    if pulses.size == 0:
        raise InsufficientDataError("no rows with pulse present")
    rr = predict_rr(model, pulses)
    return float(rr.mean()), float(rr.std())


def feature_matrix(samples: Sequence[PulseSample]) -> np.ndarray:
    """(n, 4) array of hr, pulse, resp, spo2 over rows with all four present."""
    rows = [s.vitals() for s in samples if None not in s.vitals()]
    return np.asarray(rows, dtype=float).reshape(-1, len(VITALS))


def zscore(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std, mean, std


def _ss(block: np.ndarray) -> float:
    if block.shape[0] == 0:
        return 0.0
    return float(((block - block.mean(axis=0)) ** 2).sum())


def _sqdist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _plusplus(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        idx = rng.choice(n, p=d2 / d2.sum())
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _repair_empty(X, labels, centers, k):
    # move the point farthest from its own center into each empty cluster
    for c in range(k):
        if np.any(labels == c):
            continue
        d = ((X - centers[labels]) ** 2).sum(axis=1)
        counts = np.bincount(labels, minlength=k)
        d[counts[labels] <= 1] = -1.0  # never empty another cluster
        far = int(np.argmax(d))
        labels[far] = c
        centers[c] = X[far]
    return labels


def _means(X, labels, k):
    return np.array([X[labels == c].mean(axis=0) for c in range(k)])


def _lloyd(X, centers, max_iter):
    k = centers.shape[0]
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = np.argmin(_sqdist(X, centers), axis=1)
        new = _repair_empty(X, new, centers.copy(), k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = _means(X, labels, k)
    return labels, n_iter


def _hartigan(X, labels, k, max_pass):
    """Single-point transfers that strictly lower the within-cluster SS.

    A transfer of x from cluster a to b changes the cost by
    n_b/(n_b+1)*|x-m_b|^2 - n_a/(n_a-1)*|x-m_a|^2. A Hartigan optimum is also
    a Lloyd fixed point, so every point stays nearest to its own center.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.array([X[labels == c].sum(axis=0) for c in range(k)])
    for _ in range(max_pass):
        moved = False
        for i in range(X.shape[0]):
            a = labels[i]
            if counts[a] <= 1:
                continue
            means = sums / counts[:, None]
            d = ((X[i] - means) ** 2).sum(axis=1)
            gain = counts / (counts + 1.0) * d
            remove = counts[a] / (counts[a] - 1.0) * d[a]
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < remove * (1.0 - 1e-12):
                labels[i] = b
                counts[a] -= 1
                counts[b] += 1
                sums[a] -= X[i]
                sums[b] += X[i]
                moved = True
        if not moved:
            break
    return labels


def kmeans(points, k: int, seed: int = 0, restarts: int = DEFAULT_RESTARTS, max_iter: int = MAX_ITER) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` runs.

    Each Lloyd run is polished with Hartigan single-point transfers, which
    escapes Lloyd fixed points that are not locally optimal.

    Restart ``i`` always draws from the ``i``-th child of ``SeedSequence(seed)``,
    so adding restarts never changes earlier ones. Ties on within-cluster SS go
    to the lowest restart index.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise EmptyInputError("kmeans needs at least one point")
    if k < 1:
        raise ValueError("k must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n_distinct = np.unique(X, axis=0).shape[0]
    if k > n_distinct:
        raise KTooLargeError(f"k={k} exceeds the {n_distinct} distinct points")

    total = _ss(X)
    best = None
    history = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(child)
        labels, n_iter = _lloyd(X, _plusplus(X, k, rng), max_iter)
        labels = _hartigan(X, labels, k, max_iter)
        within = sum(_ss(X[labels == c]) for c in range(k))
        history.append(within)
        if best is None or within < best[0]:
            best = (within, i, labels, n_iter)

    within, idx, labels, n_iter = best
    centers = _means(X, labels, k)
    grand = X.mean(axis=0)
    counts = np.bincount(labels, minlength=k)
    between = float((counts * ((centers - grand) ** 2).sum(axis=1)).sum())
    return KMeansResult(
        centers=centers,
        assignments=labels,
        within_ss=float(within),
        between_ss=between,
        total_ss=total,
        restart=idx,
        n_iter=n_iter,
        restart_within_ss=tuple(history),
    )


def variability(within_ss: float, total_ss: float) -> float:
    """Between-cluster share of the total sum of squares, in percent."""
    if not total_ss > 0:
        raise ZeroTotalSSError("total sum of squares is zero; all points identical")
    if within_ss < 0:
        raise ValueError("within_ss must be >= 0")
    pct = 100.0 * (total_ss - within_ss) / total_ss
    return min(100.0, max(0.0, pct))


def train_personal_model(
    samples: Sequence[PulseSample],
    k: int = 3,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    standardize: bool = False,
    preprocessing: str = "none",
) -> PersonalModel:
    rows = preprocess(samples, preprocessing)
    reg = fit_resting_rate(rows)
    tau, sigma = compute_tau(reg, rows)
    X = feature_matrix(rows)
    if X.shape[0] == 0:
        raise InsufficientDataError("no rows with all four vitals present for clustering")
    if standardize:
        Z, mean, std = zscore(X)
        result = kmeans(Z, k, seed=seed, restarts=restarts)
        centers = result.centers * std + mean
    else:
        result = kmeans(X, k, seed=seed, restarts=restarts)
        centers = result.centers
    return PersonalModel(
        regression=reg,
        tau=tau,
        sigma_rr=sigma,
        centers=tuple(tuple(float(v) for v in c) for c in centers),
        k=k,
        variability_pct=variability(result.within_ss, result.total_ss),
        standardized=standardize,
    )
