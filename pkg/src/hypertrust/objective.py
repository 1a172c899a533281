"""CCA-style self-supervised objective over two views."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from . import autodiff as ad

NORM_EPS = 1e-8


@dataclass
class LossBreakdown:
    inv_dev: float
    dec_dev: float
    inv_hyp: float
    dec_hyp: float
    reg: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class LossWeights:
    lambda_dev: float = 0.0002
    lambda_hyp: float = 0.0035
    lambda1: float = 1.0
    lambda2: float = 0.05


def normalize(x, eps: float = NORM_EPS) -> ad.Var:
    """Column-standardize, then scale so each column has std ``1/sqrt(n)``.

    Uses the sample (n - 1) standard deviation.
    """
    x = ad.as_var(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"normalization needs at least 2 rows, got {n}")
    centered = ad.sub(x, ad.mean(x, axis=0))
    # second pass removes the rounding residual of the first; for constant
    # columns that residual would otherwise be amplified by 1/eps
    centered = ad.sub(centered, ad.mean(centered, axis=0))
    denom = ad.add(ad.scale(ad.std(x, axis=0, ddof=1), np.sqrt(n)), eps)
    return ad.div(centered, denom)


def normalize_embeddings(x: np.ndarray, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if n is not None and n != x.shape[0]:
        raise ValueError(f"n={n} does not match the {x.shape[0]} rows of x")
    return normalize(x).value


def invariance_loss(x1, x2) -> ad.Var:
    x1, x2 = ad.as_var(x1), ad.as_var(x2)
    if x1.shape != x2.shape:
        raise ad.ShapeError(f"invariance_loss: shapes {x1.shape} and {x2.shape} differ")
    return ad.frobenius_sq(ad.sub(x1, x2))


def decorrelation_loss(x1, x2) -> ad.Var:
    x1, x2 = ad.as_var(x1), ad.as_var(x2)
    if x1.shape[1] != x2.shape[1]:
        raise ad.ShapeError(f"decorrelation_loss: column counts {x1.shape[1]} and {x2.shape[1]} differ")
    return ad.add(ad.gram_identity_gap(x1), ad.gram_identity_gap(x2))


def regularizer(params: Iterable) -> ad.Var:
    terms = [ad.frobenius_sq(p) for p in params]
    out = terms[0]
    for t in terms[1:]:
        out = ad.add(out, t)
    return out


def total_loss(dev_views, hyp_views, params: Iterable, weights: LossWeights | None = None):
    """Total loss as a Var plus its float breakdown.

    ``dev_views`` and ``hyp_views`` are the raw (un-normalized) embedding pairs
    of the two views; normalization happens here.
    """
    w = weights or LossWeights()
    a1, a2 = normalize(dev_views[0]), normalize(dev_views[1])
    e1, e2 = normalize(hyp_views[0]), normalize(hyp_views[1])
    inv_dev, dec_dev = invariance_loss(a1, a2), decorrelation_loss(a1, a2)
    inv_hyp, dec_hyp = invariance_loss(e1, e2), decorrelation_loss(e1, e2)
    reg = regularizer(params)

    dev = ad.add(inv_dev, ad.scale(dec_dev, w.lambda_dev))
    hyp = ad.add(inv_hyp, ad.scale(dec_hyp, w.lambda_hyp))
    total = ad.add(ad.add(dev, ad.scale(hyp, w.lambda1)), ad.scale(reg, w.lambda2))
    breakdown = LossBreakdown(
        inv_dev=float(inv_dev.value),
        dec_dev=float(dec_dev.value),
        inv_hyp=float(inv_hyp.value),
        dec_hyp=float(dec_hyp.value),
        reg=float(reg.value),
        total=float(total.value),
    )
    return total, breakdown
