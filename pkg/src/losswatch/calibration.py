"""Monte-Carlo average-run-length estimation and threshold lookup.

The detector's operating threshold h is chosen against the average run
length (ARL) to false alarm: the mean time for the decision statistic to
first exceed h while sampling from the pre-change distribution (with LLRs
still computed against the changed model). One Monte-Carlo pass per run
records the first crossing time of every threshold in an increasing grid —
the per-run crossing-time vector is monotone, which makes the averaged table
monotone and keeps its variance far below per-threshold independent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TargetRangeError, UsageError
from .detector import make_llr
from .samplers import SeededStream, _sample_with
from .schemes import ChannelPair, Scheme, observation_models

# Observations generated per chunk while scanning one run; chunks grow
# geometrically from the floor so short runs stay cheap and long runs stay
# vectorized.
_SCAN_CHUNK_MIN = 1 << 13
_SCAN_CHUNK_MAX = 1 << 20

# Grid points whose censored-run fraction exceeds this are marked unreliable.
CENSOR_RELIABLE_FRAC = 0.05


@dataclass(frozen=True)
class ArlTable:
    """Threshold grid with Monte-Carlo ARL estimates (times in pulses).

    Censored runs (no crossing within run_length pulses) contribute
    run_length as a lower-bound surrogate; censor_frac records the per-
    threshold fraction and `unreliable` flags entries above 5%. The
    `censored_warning` flag trips when more than half the runs censored at
    the top threshold.
    """

    h_grid: np.ndarray
    gamma: np.ndarray
    censor_frac: np.ndarray
    runs: int
    run_length: int
    scheme: Scheme
    channel: ChannelPair
    censored_warning: bool

    @property
    def unreliable(self) -> np.ndarray:
        return self.censor_frac > CENSOR_RELIABLE_FRAC

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("h,gamma,censor_frac\n")
            for h, g, c in zip(self.h_grid, self.gamma, self.censor_frac):
                fh.write(f"{h:.17g},{g:.17g},{c:.17g}\n")


def _crossing_times_one_run(
    pre_model, post_model, h_grid, n_obs: int, pulses_per_obs: int, stream: SeededStream
) -> tuple[np.ndarray, np.ndarray]:
    """First crossing time (in pulses) of each threshold for one run.

    Scans chunk-wise: maintains the cumulative sum, its running minimum, and
    the running maximum of the decision statistic, consuming samples only
    until the top threshold is crossed.
    """
    rng = stream.generator()
    llr_fn = make_llr(pre_model, post_model)
    L = h_grid.shape[0]
    times = np.full(L, n_obs * pulses_per_obs, dtype=float)
    censored = np.ones(L, dtype=bool)

    s_carry = 0.0
    runmin = 0.0
    runmax = 0.0
    consumed = 0
    j = 0
    chunk = _SCAN_CHUNK_MIN
    while consumed < n_obs and j < L:
        m = min(chunk, n_obs - consumed)
        chunk = min(chunk * 2, _SCAN_CHUNK_MAX)
        obs = _sample_with(rng, pre_model, m)
        llrs = np.asarray(llr_fn(obs), dtype=float)
        s = s_carry + np.cumsum(llrs)
        # Decision values G over this chunk, then their running maximum so a
        # sorted threshold grid can be located by binary search.
        prior_min = np.minimum.accumulate(np.concatenate(([runmin], s))[:-1])
        g = np.maximum(s - prior_min, 0.0)
        gmax = np.maximum(np.maximum.accumulate(g), runmax)

        pos = np.searchsorted(gmax, h_grid[j:], side="right")
        n_crossed = int(np.sum(pos < m))
        if n_crossed:
            idx = np.arange(j, j + n_crossed)
            times[idx] = (consumed + pos[:n_crossed] + 1) * pulses_per_obs
            censored[idx] = False
            j += n_crossed

        s_carry = float(s[-1])
        runmin = float(min(runmin, np.min(s)))
        runmax = float(gmax[-1])
        consumed += m

    if np.any(np.diff(times) < 0):
        raise AssertionError("per-run crossing times must be nondecreasing")
    return times, censored


def estimate_arl(
    scheme: Scheme,
    ch: ChannelPair,
    h_min: float,
    h_max: float,
    L: int,
    M: int,
    N_samples: int,
    seed: SeededStream,
) -> ArlTable:
    """Estimate ARL over L equally spaced thresholds in [h_min, h_max] by
    averaging M independent runs of up to N_samples pulses each."""
    if L <= 1:
        raise UsageError(f"need at least 2 grid points, got L={L}")
    if not h_min < h_max:
        raise UsageError(f"need h_min < h_max, got [{h_min}, {h_max}]")
    if M < 1:
        raise UsageError(f"need at least one run, got M={M}")
    pre_model, post_model = observation_models(scheme, ch)
    ppo = scheme.pulses_per_observation
    n_obs = N_samples // ppo
    if n_obs < 1:
        raise UsageError("run length shorter than one observation")

    h_grid = np.linspace(h_min, h_max, L)
    all_times = np.empty((M, L))
    all_censored = np.empty((M, L), dtype=bool)
    for i in range(M):
        times, censored = _crossing_times_one_run(
            pre_model, post_model, h_grid, n_obs, ppo, seed.child(i)
        )
        all_times[i] = times
        all_censored[i] = censored

    gamma = all_times.mean(axis=0)
    censor_frac = all_censored.mean(axis=0)
    return ArlTable(
        h_grid=h_grid,
        gamma=gamma,
        censor_frac=censor_frac,
        runs=M,
        run_length=N_samples,
        scheme=scheme,
        channel=ch,
        censored_warning=bool(censor_frac[-1] > 0.5),
    )


def threshold_for_arl(table: ArlTable, gamma_target: float) -> float:
    """Threshold h achieving a target ARL, by linear interpolation of the
    table in (h, log gamma) space; exact grid hits return the grid h."""
    gamma = table.gamma
    h = table.h_grid
    exact = np.nonzero(gamma == gamma_target)[0]
    if exact.size:
        return float(h[exact[0]])
    if not gamma[0] <= gamma_target <= gamma[-1]:
        raise TargetRangeError(
            f"target ARL {gamma_target:g} outside achievable span "
            f"[{gamma[0]:g}, {gamma[-1]:g}]"
        )
    hi = int(np.searchsorted(gamma, gamma_target, side="left"))
    lo = hi - 1
    g_lo, g_hi = gamma[lo], gamma[hi]
    if g_hi == g_lo:
        return float(h[lo])
    frac = (math.log(gamma_target) - math.log(g_lo)) / (
        math.log(g_hi) - math.log(g_lo)
    )
    return float(h[lo] + frac * (h[hi] - h[lo]))
