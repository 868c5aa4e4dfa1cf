"""Monte Carlo tube probabilities and the action ratio law.

The probability that the process stays in the Hölder tube of radius
epsilon around a path phi is estimated as the hit fraction of a seeded
ensemble.  For two tubes around paths with the same start point the
ratio of probabilities is predicted, for small radii, by the action
difference:

    log(P1 / P2)  ~  -(OM(phi1) - OM(phi2)) / 2.

Both probabilities in a ratio check come from ONE simulated ensemble
(one set of trajectories, two membership tests per trajectory), which
cancels most of the sampling noise in the ratio without introducing
bias.  Everything is deterministic given the seed; worker count only
changes wall time.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .holder import HolderParams, _screen_lags, _seminorm_per_coord, _sup_per_coord
from .model import ContractViolation, DiscretePath, SdeModel
from .om import OmEvaluation, om_functional
from .simulate import _BATCH, _SimContext, _resolve_workers

__all__ = [
    "TubeQuery",
    "TubeEstimate",
    "RatioCheck",
    "LadderPoint",
    "tube_probability",
    "om_ratio_check",
    "om_ratio_ladder",
]

#: below this many hits an estimate is flagged as statistically weak
LOW_HITS = 10


@dataclass(frozen=True)
class TubeQuery:
    """A tube-probability question: which tube, how many samples, what seed.

    The ensemble starts at the reference path's first node and lives on
    the reference path's grid.
    """

    model: SdeModel
    reference_path: DiscretePath
    epsilon: float
    alpha: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.reference_path.dim != self.model.dimension:
            raise ContractViolation(
                f"reference path dimension {self.reference_path.dim} does not "
                f"match model dimension {self.model.dimension}"
            )
        if not (float(self.epsilon) > 0.0):
            raise ContractViolation(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "alpha", HolderParams(self.alpha).alpha)
        if self.samples < 1:
            raise ContractViolation(f"samples must be >= 1, got {self.samples}")
        int(self.seed)


@dataclass(frozen=True)
class TubeEstimate:
    """Hit-fraction estimate of a tube probability.

    ``probability`` is hits/samples and ``standard_error`` the binomial
    sqrt(p(1-p)/samples); ``low_statistics`` flags estimates resting on
    fewer than 10 hits (including zero), whose relative error is unknown.
    """

    probability: float
    hits: int
    samples: int
    standard_error: float
    epsilon: float
    alpha: float
    low_statistics: bool

    def as_dict(self) -> dict:
        return {
            "probability": self.probability,
            "hits": self.hits,
            "samples": self.samples,
            "standard_error": self.standard_error,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "low_statistics": self.low_statistics,
        }


@dataclass(frozen=True)
class RatioCheck:
    """Measured tube-probability ratio against the action prediction.

    ``agreement`` is |log_prob_ratio - om_prediction|; ``stderr`` the
    combined binomial standard error of the measured log ratio (the
    common-ensemble correlation makes this an overestimate, so error bars
    are conservative).  ``inconclusive`` is set when either tube has zero
    hits, in which case the measured fields are NaN and only
    ``om_prediction`` is meaningful.
    """

    log_prob_ratio: float
    om_prediction: float
    agreement: float
    stderr: float
    inconclusive: bool
    estimate_1: TubeEstimate
    estimate_2: TubeEstimate
    om_1: OmEvaluation
    om_2: OmEvaluation

    def as_dict(self) -> dict:
        return {
            "log_prob_ratio": self.log_prob_ratio,
            "om_prediction": self.om_prediction,
            "agreement": self.agreement,
            "stderr": self.stderr,
            "inconclusive": self.inconclusive,
            "estimate_1": self.estimate_1.as_dict(),
            "estimate_2": self.estimate_2.as_dict(),
            "om_1": self.om_1.as_dict(),
            "om_2": self.om_2.as_dict(),
        }


@dataclass(frozen=True)
class LadderPoint:
    """One radius of an epsilon ladder (shared ensemble across rungs)."""

    epsilon: float
    hits1: int
    hits2: int
    log_ratio: float
    om_prediction: float
    stderr: float
    inconclusive: bool


def _capped_norms(dev: np.ndarray, h: float, alpha: float, cap: float) -> np.ndarray:
    """Hölder norms of deviation rows, exact wherever the value is <= cap.

    Rows whose exact norm exceeds ``cap`` may be reported as any lower
    bound that itself exceeds ``cap`` (from a scan over a few screening
    lags), which is all a threshold test at radius <= cap needs.
    """
    K = dev.shape[1]
    sup = _sup_per_coord(dev).mean(axis=1)
    out = sup + _seminorm_per_coord(dev, h, alpha, _screen_lags(K)).mean(axis=1)
    idx = np.flatnonzero(out <= cap)
    if idx.size:
        semi = _seminorm_per_coord(dev[idx], h, alpha).mean(axis=1)
        out[idx] = sup[idx] + semi
    return out


def _ensemble_norms(
    model: SdeModel,
    refs: Sequence[DiscretePath],
    alpha: float,
    samples: int,
    seed: int,
    cap: float,
    workers: Optional[int],
) -> List[np.ndarray]:
    """Capped deviation norms of one ensemble against each reference path.

    All reference paths must share a grid and a first node; the ensemble
    starts there.  Returns one (samples,) array per reference, in sample
    order regardless of worker count.
    """
    base = refs[0]
    for r in refs[1:]:
        if r.n_steps != base.n_steps or r.dim != base.dim:
            raise ContractViolation("reference paths must share one grid")
        if not np.array_equal(r.values[0], base.values[0]):
            raise ContractViolation(
                "reference paths must start at the same point (the common "
                "ensemble starts there)"
            )
    ctx = _SimContext(model, base.values[0], base.n_steps, seed)
    h = base.step
    ref_vals = [r.values[None, :, :] for r in refs]

    def chunk(lo: int, hi: int) -> List[np.ndarray]:
        parts: List[List[np.ndarray]] = [[] for _ in refs]
        for blo in range(lo, hi, _BATCH):
            block = ctx.block(blo, min(blo + _BATCH, hi))
            for i, rv in enumerate(ref_vals):
                parts[i].append(_capped_norms(block - rv, h, alpha, cap))
        return [np.concatenate(p) for p in parts]

    w = min(_resolve_workers(workers), samples)
    if w == 1:
        return chunk(0, samples)
    bounds = np.linspace(0, samples, w + 1).astype(int)
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [
            pool.submit(chunk, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        pieces = [f.result() for f in futures]
    return [np.concatenate([p[i] for p in pieces]) for i in range(len(refs))]


def _estimate(hits: int, samples: int, epsilon: float, alpha: float) -> TubeEstimate:
    p = hits / samples
    return TubeEstimate(
        probability=p,
        hits=int(hits),
        samples=int(samples),
        standard_error=math.sqrt(p * (1.0 - p) / samples),
        epsilon=epsilon,
        alpha=alpha,
        low_statistics=hits < LOW_HITS,
    )


def tube_probability(query: TubeQuery, workers: Optional[int] = None) -> TubeEstimate:
    """Estimate P(|X - phi|_alpha <= epsilon) by seeded Monte Carlo.

    The ensemble starts at phi(0) on phi's grid.  Zero hits produce a
    probability-zero estimate with ``low_statistics`` set, never an
    exception.  Deterministic given the seed; ``workers`` follows the
    simulation module's threading contract (capped by OMPATH_THREADS).
    """
    norms = _ensemble_norms(
        query.model,
        [query.reference_path],
        query.alpha,
        query.samples,
        query.seed,
        cap=query.epsilon,
        workers=workers,
    )[0]
    hits = int(np.count_nonzero(norms <= query.epsilon))
    return _estimate(hits, query.samples, query.epsilon, query.alpha)


def _log_ratio_stats(hits1, hits2, samples):
    """Log hit ratio and its combined binomial delta-method error."""
    p1 = hits1 / samples
    p2 = hits2 / samples
    log_ratio = math.log(hits1 / hits2)
    var = (1.0 - p1) / (samples * p1) + (1.0 - p2) / (samples * p2)
    return log_ratio, math.sqrt(var)


def om_ratio_check(
    model: SdeModel,
    phi1: DiscretePath,
    phi2: DiscretePath,
    epsilon: float,
    alpha: float,
    samples: int,
    seed: int,
    workers: Optional[int] = None,
) -> RatioCheck:
    """Compare a measured tube-probability ratio with the action law.

    Both paths must start at the same point; one common ensemble is
    simulated from there and tested against both tubes.  If either tube
    catches no samples the check is ``inconclusive`` (NaN measured
    fields) instead of fabricating a ratio from zero counts.
    """
    q = TubeQuery(model, phi1, epsilon, alpha, samples, seed)  # validates knobs
    norms1, norms2 = _ensemble_norms(
        model, [phi1, phi2], q.alpha, samples, seed, cap=q.epsilon, workers=workers
    )
    hits1 = int(np.count_nonzero(norms1 <= q.epsilon))
    hits2 = int(np.count_nonzero(norms2 <= q.epsilon))
    om1 = om_functional(model, phi1)
    om2 = om_functional(model, phi2)
    prediction = -0.5 * (om1.total - om2.total)
    if hits1 == 0 or hits2 == 0:
        log_ratio, stderr, agreement = math.nan, math.nan, math.nan
        inconclusive = True
    else:
        log_ratio, stderr = _log_ratio_stats(hits1, hits2, samples)
        agreement = abs(log_ratio - prediction)
        inconclusive = False
    return RatioCheck(
        log_prob_ratio=log_ratio,
        om_prediction=prediction,
        agreement=agreement,
        stderr=stderr,
        inconclusive=inconclusive,
        estimate_1=_estimate(hits1, samples, q.epsilon, q.alpha),
        estimate_2=_estimate(hits2, samples, q.epsilon, q.alpha),
        om_1=om1,
        om_2=om2,
    )


def om_ratio_ladder(
    model: SdeModel,
    phi1: DiscretePath,
    phi2: DiscretePath,
    epsilons: Sequence[float],
    alpha: float,
    samples: int,
    seed: int,
    workers: Optional[int] = None,
) -> List[LadderPoint]:
    """Ratio checks on a grid of radii sharing one simulated ensemble.

    Each trajectory's deviation norms are computed once and thresholded
    at every radius, so shrinking epsilon can only lose hits (the
    common-random-number monotonicity holds exactly across the ladder).
    Rows are returned in the given epsilon order.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ContractViolation("epsilon ladder must be nonempty")
    if any(e <= 0.0 for e in eps):
        raise ContractViolation("every ladder epsilon must be positive")
    a = HolderParams(alpha).alpha
    if samples < 1:
        raise ContractViolation(f"samples must be >= 1, got {samples}")
    norms1, norms2 = _ensemble_norms(
        model, [phi1, phi2], a, samples, seed, cap=max(eps), workers=workers
    )
    om1 = om_functional(model, phi1)
    om2 = om_functional(model, phi2)
    prediction = -0.5 * (om1.total - om2.total)
    rows = []
    for e in eps:
        h1 = int(np.count_nonzero(norms1 <= e))
        h2 = int(np.count_nonzero(norms2 <= e))
        if h1 == 0 or h2 == 0:
            rows.append(LadderPoint(e, h1, h2, math.nan, prediction, math.nan, True))
        else:
            log_ratio, stderr = _log_ratio_stats(h1, h2, samples)
            rows.append(LadderPoint(e, h1, h2, log_ratio, prediction, stderr, False))
    return rows
