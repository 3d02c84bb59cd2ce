"""False-acceptance / false-rejection rates and the equal error rate.

Scores follow the higher-favours-real convention. Both rates use strict
inequalities, so a score exactly at the threshold counts as neither a false
acceptance nor a false rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import OneClassOnly

REAL = "real"
FAKE = "fake"


@dataclass(frozen=True)
class ScoredTrial:
    utterance_id: str
    label: str
    score: float

    def __post_init__(self):
        if self.label not in (REAL, FAKE):
            raise ValueError(f"label must be 'real' or 'fake', got {self.label!r}")
        if not math.isfinite(self.score):
            raise ValueError(f"score for {self.utterance_id} is not finite")


@dataclass(frozen=True)
class EerResult:
    eer: float
    tau_star: float
    p_fa_at_tau: float
    p_fr_at_tau: float


def split_scores(trials: Iterable[ScoredTrial]) -> tuple[np.ndarray, np.ndarray]:
    real, fake = [], []
    for t in trials:
        (real if t.label == REAL else fake).append(t.score)
    if not real or not fake:
        raise OneClassOnly(f"need both classes, got {len(real)} real and {len(fake)} fake")
    return np.asarray(real, dtype=np.float64), np.asarray(fake, dtype=np.float64)


def far_frr_at(tau: float, trials: Sequence[ScoredTrial]) -> tuple[float, float]:
    """(P_FA, P_FR) at threshold ``tau``: fake scores ``> tau``, real scores ``< tau``."""
    real, fake = split_scores(trials)
    p_fa = np.count_nonzero(fake > tau) / len(fake)
    p_fr = np.count_nonzero(real < tau) / len(real)
    return float(p_fa), float(p_fr)


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct scores plus one point outside each end."""
    u = np.unique(scores)
    mids = (u[:-1] + u[1:]) / 2.0
    return np.concatenate(([u[0] - 1.0 - abs(u[0])], mids, [u[-1] + 1.0 + abs(u[-1])]))


def error_counts(real: np.ndarray, fake: np.ndarray, taus: np.ndarray):
    """Integer (false-acceptance, false-rejection) counts at each threshold."""
    n_fa = len(fake) - np.searchsorted(np.sort(fake), taus, side="right")
    n_fr = np.searchsorted(np.sort(real), taus, side="left")
    return n_fa.astype(np.int64), n_fr.astype(np.int64)


def estimate_eer(trials: Sequence[ScoredTrial]) -> EerResult:
    """EER at the grid threshold minimising ``|P_FR - P_FA|`` (smallest on ties)."""
    real, fake = split_scores(trials)
    return eer_from_arrays(real, fake)


def eer_from_arrays(real: np.ndarray, fake: np.ndarray) -> EerResult:
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if len(real) == 0 or len(fake) == 0:
        raise OneClassOnly(f"need both classes, got {len(real)} real and {len(fake)} fake")
    taus = candidate_thresholds(np.concatenate((real, fake)))
    n_fa, n_fr = error_counts(real, fake, taus)
    # |P_FR - P_FA| scaled by n_real * n_fake keeps the comparison exact
    gap = np.abs(n_fr * len(fake) - n_fa * len(real))
    i = int(np.argmin(gap))
    p_fa = int(n_fa[i]) / len(fake)
    p_fr = int(n_fr[i]) / len(real)
    return EerResult(eer=(p_fa + p_fr) / 2.0, tau_star=float(taus[i]),
                     p_fa_at_tau=p_fa, p_fr_at_tau=p_fr)
