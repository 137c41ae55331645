"""Paired t-tests, Holm-Bonferroni correction, and 1-D GMM thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from ._seeding import rng_for
from ._validation import as_float_array, check_equal_length
from .errors import DegenerateDataError

GMM_TOL = 1e-8
GMM_MAX_ITER = 500
GMM_SD_FLOOR_FACTOR = 1e-6


@dataclass(frozen=True)
class PairedTestResult:
    model_a: str
    model_b: str
    t_stat: float
    df: int
    p_value: float
    n_pairs: int


def paired_t_test(a, b, model_a: str = "a",
                  model_b: str = "b") -> PairedTestResult:
    """Two-sided paired t-test on index-matched score lists.

    Zero-variance differences raise DegenerateDataError rather than
    reporting p=1: t is undefined, not insignificant.
    """
    a = as_float_array(a, "a", ndim=1)
    b = as_float_array(b, "b", ndim=1)
    check_equal_length(a, b, "a", "b")
    n = int(a.shape[0])
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateDataError("degenerate differences")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    df = n - 1
    p = 2.0 * float(special.stdtr(df, -abs(t)))
    return PairedTestResult(model_a=model_a, model_b=model_b, t_stat=t,
                            df=df, p_value=p, n_pairs=n)


@dataclass(frozen=True)
class HolmItem:
    name: str
    p_value: float
    rank: int
    threshold: float
    rejected: bool


@dataclass(frozen=True)
class HolmDecision:
    alpha: float
    items: tuple[HolmItem, ...]

    def rejected_names(self) -> list[str]:
        return [it.name for it in self.items if it.rejected]


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05,
                    names: Sequence[str] | None = None) -> HolmDecision:
    """Step-down correction: rank-k threshold alpha/(m-k+1), stop at the
    first p that fails its (strict <) threshold."""
    m = len(p_values)
    if m == 0:
        raise ValueError("no p-values given")
    if names is None:
        names = [f"c{i}" for i in range(m)]
    if len(names) != m:
        raise ValueError("names and p_values lengths differ")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    order = sorted(range(m), key=lambda i: (p_values[i], i))
    items = []
    alive = True
    for rank, i in enumerate(order, start=1):
        threshold = alpha / (m - rank + 1)
        reject = alive and p_values[i] < threshold
        if not reject:
            alive = False
        items.append(HolmItem(name=names[i], p_value=float(p_values[i]),
                              rank=rank, threshold=threshold,
                              rejected=reject))
    return HolmDecision(alpha=alpha, items=tuple(items))


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: float
    sd: float


@dataclass(frozen=True)
class GmmFit:
    components: tuple[GmmComponent, ...]
    loglik: float
    loglik_path: tuple[float, ...]
    n_iter: int
    converged: bool


@dataclass(frozen=True)
class GmmThreshold:
    components: tuple[GmmComponent, GmmComponent]
    threshold: float
    between_means: bool
    axis: str = ""


def _log_density(x: np.ndarray, weights, means, sds) -> np.ndarray:
    # (n, c) log of weighted normal densities
    x = x[:, None]
    return (np.log(weights)[None, :]
            - 0.5 * math.log(2.0 * math.pi) - np.log(sds)[None, :]
            - 0.5 * ((x - means[None, :]) / sds[None, :]) ** 2)


def _em_once(data: np.ndarray, means: np.ndarray, sd0: float,
             sd_floor: float, max_iter: int, tol: float):
    c = means.shape[0]
    weights = np.full(c, 1.0 / c)
    sds = np.full(c, max(sd0, sd_floor))
    means = means.astype(np.float64).copy()
    path: list[float] = []
    prev = -np.inf
    converged = False
    for it in range(max_iter):
        logd = _log_density(data, weights, means, sds)
        norm = special.logsumexp(logd, axis=1)
        loglik = float(norm.sum())
        path.append(loglik)
        if loglik - prev < tol and it > 0:
            converged = True
            break
        prev = loglik
        resp = np.exp(logd - norm[:, None])
        mass = resp.sum(axis=0)
        weights = mass / data.shape[0]
        means = (resp * data[:, None]).sum(axis=0) / mass
        var = (resp * (data[:, None] - means[None, :]) ** 2).sum(axis=0) / mass
        sds = np.maximum(np.sqrt(var), sd_floor)
    fit = GmmFit(
        components=tuple(GmmComponent(float(w), float(mu), float(s))
                         for w, mu, s in zip(weights, means, sds)),
        loglik=path[-1],
        loglik_path=tuple(path),
        n_iter=len(path),
        converged=converged,
    )
    return fit


def fit_gmm_1d(data, components: int = 2, n_init: int = 5,
               seed: int = 0) -> GmmFit:
    """EM fit of a univariate Gaussian mixture, best of n_init restarts.

    The first initialisation places means at evenly spread quantiles (25th
    and 75th percentiles for two components); the remaining restarts draw
    distinct data points. Components come back sorted by mean.
    """
    data = as_float_array(data, "data", ndim=1)
    if components < 1:
        raise ValueError(f"components must be >= 1, got {components}")
    if data.shape[0] < 2 * components:
        raise ValueError(
            f"need at least {2 * components} points, got {data.shape[0]}")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    spread = float(np.max(data) - np.min(data))
    if spread == 0.0:
        raise DegenerateDataError("degenerate data")
    sd_floor = GMM_SD_FLOOR_FACTOR * spread
    sd0 = float(np.std(data, ddof=1))
    quantiles = (2.0 * np.arange(components) + 1.0) / (2.0 * components)
    inits = [np.quantile(data, quantiles)]
    rng = rng_for(seed, "gmm")
    distinct = np.unique(data)
    for _ in range(n_init - 1):
        if distinct.shape[0] >= components:
            picks = rng.choice(distinct.shape[0], size=components,
                               replace=False)
            inits.append(distinct[np.sort(picks)])
        else:
            inits.append(np.sort(rng.choice(data, size=components)))
    best: GmmFit | None = None
    for init_means in inits:
        fit = _em_once(data, np.asarray(init_means, dtype=np.float64),
                       sd0, sd_floor, GMM_MAX_ITER, GMM_TOL)
        if best is None or fit.loglik > best.loglik:
            best = fit
    comps = tuple(sorted(best.components, key=lambda comp: comp.mean))
    return GmmFit(components=comps, loglik=best.loglik,
                  loglik_path=best.loglik_path, n_iter=best.n_iter,
                  converged=best.converged)


def gmm_intersection(fit: GmmFit, axis: str = "") -> GmmThreshold:
    """Point where the two weighted component densities are equal.

    Equal sds give a closed form; otherwise the quadratic is solved and the
    root between the means is preferred. If neither root lies between the
    means, the root nearest their midpoint is returned with
    ``between_means=False``.
    """
    if len(fit.components) != 2:
        raise ValueError(
            f"need exactly 2 components, got {len(fit.components)}")
    c1, c2 = sorted(fit.components, key=lambda comp: comp.mean)
    if c1.mean == c2.mean:
        raise DegenerateDataError("identical component means")
    w1, mu1, s1 = c1.weight, c1.mean, c1.sd
    w2, mu2, s2 = c2.weight, c2.mean, c2.sd
    if s1 == s2:
        x = ((mu1 + mu2) / 2.0
             + s1 * s1 * math.log(w1 / w2) / (mu2 - mu1))
        between = mu1 <= x <= mu2
        return GmmThreshold(components=(c1, c2), threshold=float(x),
                            between_means=bool(between), axis=axis)
    big_l = math.log((w1 * s2) / (w2 * s1))
    a = s1 * s1 - s2 * s2
    b = -2.0 * (s1 * s1 * mu2 - s2 * s2 * mu1)
    c = (s1 * s1 * mu2 * mu2 - s2 * s2 * mu1 * mu1
         + 2.0 * s1 * s1 * s2 * s2 * big_l)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise DegenerateDataError(
            "weighted densities never intersect (negative discriminant)")
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b)) if b != 0.0 else 0.5 * sq
    roots = []
    if q != 0.0:
        roots.append(q / a)
        roots.append(c / q)
    else:
        roots.append(0.0)
        roots.append(-b / a if a != 0.0 else 0.0)
    inside = [r for r in roots if mu1 <= r <= mu2]
    mid = (mu1 + mu2) / 2.0
    if inside:
        x = min(inside, key=lambda r: abs(r - mid))
        between = True
    else:
        x = min(roots, key=lambda r: abs(r - mid))
        between = False
    return GmmThreshold(components=(c1, c2), threshold=float(x),
                        between_means=between, axis=axis)
