"""CUSUM quickest-change detector.

The detector accumulates per-observation log-likelihood ratios l[k] =
log(P2(x)/P1(x)) into the cumulative sum S[k] and the reset decision
statistic G[k] = max(0, G[k-1] + l[k]), raising an alarm the first time
G[k] > h. G[k] equals the maximum over candidate change times of the
trailing LLR sum (clipped at zero), and the running argmin of S yields the
maximum-likelihood change-point estimate: the time following the current
minimum of the cumulative sum.

Block schemes (n-pulse entangled transmission) produce one vector
observation per n pulses; all reported times are in pulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import UsageError
from .gaussian_core import Gaussian1D, GaussianVec
from .samplers import SeededStream, _sample_with
from .schemes import (
    Binary,
    ChannelPair,
    DVHomodyne,
    Mixture2,
    ObservationModel,
    Scheme,
    dv_homodyne_log_pdf,
    observation_models,
)


def _log_ratio(p2: float, p1: float) -> float:
    if p2 == 0.0:
        return -math.inf if p1 > 0.0 else 0.0
    if p1 == 0.0:
        return math.inf
    return math.log(p2 / p1)


def make_llr(pre: ObservationModel, post: ObservationModel):
    """Vectorized LLR evaluator log(post(x)/pre(x)) for a model pair.

    Factorizations and constants are precomputed once; the returned callable
    accepts a single observation or a batch (first axis = observations).
    """
    if type(pre) is not type(post):
        raise UsageError(
            f"model kinds differ: {type(pre).__name__} vs {type(post).__name__}"
        )
    if isinstance(pre, Gaussian1D):
        a1, a2 = 0.5 / pre.variance, 0.5 / post.variance
        c = 0.5 * math.log(pre.variance / post.variance)
        m1, m2 = pre.mean, post.mean

        def llr_gauss1(x):
            x = np.asarray(x, dtype=float)
            return a1 * (x - m1) ** 2 - a2 * (x - m2) ** 2 + c

        return llr_gauss1

    if isinstance(pre, GaussianVec):
        if pre.dim != post.dim:
            raise UsageError(f"block dimensions differ: {pre.dim} vs {post.dim}")
        l1 = np.linalg.cholesky(pre.cov)
        l2 = np.linalg.cholesky(post.cov)
        c = float(np.sum(np.log(np.diag(l1))) - np.sum(np.log(np.diag(l2))))
        u1, u2 = pre.mean, post.mean

        def llr_gaussn(x):
            x = np.asarray(x, dtype=float)
            squeeze = x.ndim == 1
            xb = np.atleast_2d(x)
            if xb.shape[1] != u1.shape[0]:
                raise UsageError(
                    f"observation dimension {xb.shape[1]} does not match block {u1.shape[0]}"
                )
            y1 = solve_triangular(l1, (xb - u1).T, lower=True)
            y2 = solve_triangular(l2, (xb - u2).T, lower=True)
            out = 0.5 * (np.sum(y1 * y1, axis=0) - np.sum(y2 * y2, axis=0)) + c
            return float(out[0]) if squeeze else out

        return llr_gaussn

    if isinstance(pre, Mixture2):
        def _log_mix(x, model):
            lp = -((x - model.plus.mean) ** 2) / (2 * model.plus.variance) - 0.5 * math.log(
                model.plus.variance
            )
            lm = -((x - model.minus.mean) ** 2) / (2 * model.minus.variance) - 0.5 * math.log(
                model.minus.variance
            )
            return np.logaddexp(lp, lm)

        def llr_mixture(x):
            x = np.asarray(x, dtype=float)
            return _log_mix(x, post) - _log_mix(x, pre)

        return llr_mixture

    if isinstance(pre, Binary):
        lut = np.array(
            [_log_ratio(post.p0, pre.p0), _log_ratio(post.p1, pre.p1)]
        )

        def llr_binary(x):
            idx = np.asarray(x, dtype=np.int64)
            out = lut[idx]
            return float(out) if out.ndim == 0 else out

        return llr_binary

    if isinstance(pre, DVHomodyne):
        def llr_dv(x):
            return dv_homodyne_log_pdf(x, post.alpha, post.eta) - dv_homodyne_log_pdf(
                x, pre.alpha, pre.eta
            )

        return llr_dv

    raise UsageError(f"unsupported observation model {type(pre).__name__}")


def llr(obs, pre: ObservationModel, post: ObservationModel) -> float:
    """Log-likelihood ratio of one observation (scalar convenience form)."""
    out = make_llr(pre, post)(obs)
    return float(out)


@dataclass(frozen=True)
class CusumRun:
    """Detector state after k observations (a value; steps return new states).

    cumsum is S[k]; decision is G[k] >= 0; argmin_index tracks the earliest
    minimizer of S over [0, k-1] so that the ML change-point estimate is
    argmin_index + 1; alarm_time is set the first time decision exceeds
    threshold.
    """

    threshold: float
    k: int = 0
    cumsum: float = 0.0
    decision: float = 0.0
    min_cumsum: float = 0.0
    argmin_index: int = 0
    alarm_time: int | None = None

    @property
    def ml_estimate(self) -> int:
        return self.argmin_index + 1


def cusum_step(run: CusumRun, l: float) -> CusumRun:
    """Advance the detector by one LLR; raises if an alarm already fired."""
    if run.alarm_time is not None:
        raise UsageError("detector already alarmed; start a new run")
    # S[k-1] joins the candidate set for the ML argmin before l[k] is added.
    if run.cumsum < run.min_cumsum:
        min_cumsum, argmin_index = run.cumsum, run.k
    else:
        min_cumsum, argmin_index = run.min_cumsum, run.argmin_index
    k = run.k + 1
    cumsum = run.cumsum + l
    decision = max(0.0, run.decision + l)
    alarm_time = k if decision > run.threshold else None
    return CusumRun(
        threshold=run.threshold,
        k=k,
        cumsum=cumsum,
        decision=decision,
        min_cumsum=min_cumsum,
        argmin_index=argmin_index,
        alarm_time=alarm_time,
    )


@dataclass(frozen=True)
class LatencyResult:
    """Alarm raised at or after the true change."""

    n_c: int
    n_d: int
    tau: int
    ml_estimate: int

    def __post_init__(self):
        if self.n_d < self.n_c:
            raise UsageError("latency is defined only for n_d >= n_c")
        if self.tau != self.n_d - self.n_c:
            raise UsageError("tau must equal n_d - n_c")


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of one simulated run: alarm, false alarm, or censored at the
    horizon (no alarm is a distinct outcome, not an error)."""

    n_c: int
    horizon: int
    threshold: float
    alarm_time: int | None
    ml_estimate: int | None

    @property
    def no_alarm(self) -> bool:
        return self.alarm_time is None

    @property
    def false_alarm(self) -> bool:
        return self.alarm_time is not None and self.alarm_time < self.n_c

    def latency_result(self) -> LatencyResult | None:
        if self.alarm_time is None or self.alarm_time < self.n_c:
            return None
        return LatencyResult(
            self.n_c,
            self.alarm_time,
            self.alarm_time - self.n_c,
            self.ml_estimate,
        )


def decision_path(llrs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative sums S[0..k] and decision values G[1..k] for an LLR array.

    G[k] = max(0, S[k] - min_{0<=m<=k-1} S[m]), which equals the reset
    recursion max(0, G[k-1] + l[k]).
    """
    s = np.concatenate(([0.0], np.cumsum(np.asarray(llrs, dtype=float))))
    g = np.maximum(s[1:] - np.minimum.accumulate(s[:-1]), 0.0)
    return s, g


def first_crossing(g: np.ndarray, h: float) -> int | None:
    """1-based index of the first strict crossing of h, or None."""
    hits = g > h
    if not hits.any():
        return None
    return int(np.argmax(hits)) + 1


def run_detection(
    scheme: Scheme,
    ch: ChannelPair,
    n_c: int,
    horizon: int,
    h: float,
    stream: SeededStream,
) -> DetectionReport:
    """Simulate one run: pre-change sampling up to pulse n_c - 1, post-change
    from pulse n_c on, CUSUM against the scheme's model pair.

    Block schemes require n_c - 1 to be a whole number of blocks; times are
    reported in pulses and the horizon is truncated to whole blocks.
    """
    if not 1 <= n_c <= horizon:
        raise UsageError(f"need 1 <= n_c <= horizon, got n_c={n_c}, horizon={horizon}")
    n = scheme.pulses_per_observation
    if (n_c - 1) % n != 0:
        raise UsageError(
            f"change time {n_c} is not aligned to the {n}-pulse block boundary"
        )
    pre_model, post_model = observation_models(scheme, ch)
    pre_blocks = (n_c - 1) // n
    total_blocks = horizon // n
    post_blocks = total_blocks - pre_blocks

    rng = stream.generator()
    llr_fn = make_llr(pre_model, post_model)
    parts = []
    if pre_blocks:
        parts.append(llr_fn(_sample_with(rng, pre_model, pre_blocks)))
    if post_blocks:
        parts.append(llr_fn(_sample_with(rng, post_model, post_blocks)))
    llrs = np.concatenate(parts) if parts else np.empty(0)

    s, g = decision_path(llrs)
    alarm_block = first_crossing(g, h)
    if alarm_block is None:
        return DetectionReport(n_c, horizon, h, None, None)
    ml_block = int(np.argmin(s[:alarm_block]))
    return DetectionReport(
        n_c,
        horizon,
        h,
        alarm_block * n,
        ml_block * n + 1,
    )
