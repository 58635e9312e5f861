"""Per-link delivery statistics and transmission-count metrics.

A directed link's quality is tracked two ways: the long-run delivery ratios
(forward ``d_f`` for data, reverse ``d_r`` for acknowledgements) and a
windowed estimate ``cur_psucc`` of the current per-attempt success
probability, fed by observed transmit outcomes.  The routing metric uses the
capped expected transmission count (MTX): the plain expected count 1/p, but
never more than the MAC retransmission limit, below which a link is simply
treated as costing the full retry budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INFINITE_ETX = math.inf

DEFAULT_MAX_RETRY = 7
DEFAULT_WINDOW = 20
DEFAULT_ED_SMOOTHING = 0.3


@dataclass
class LinkQualityConfig:
    max_retry: int = DEFAULT_MAX_RETRY
    window_size: int = DEFAULT_WINDOW
    ed_smoothing: float = DEFAULT_ED_SMOOTHING

    def __post_init__(self):
        if self.max_retry < 1:
            raise ValueError("max_retry must be >= 1")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not 0.0 < self.ed_smoothing <= 1.0:
            raise ValueError("ed_smoothing must be in (0, 1]")


def psucc(d_r: float, d_f: float) -> float:
    """Probability that a data packet and its acknowledgement both get through."""
    return d_r * d_f

def etx(p: float) -> float:
    """Expected transmissions for one acknowledged delivery; infinite if p = 0."""
    if p == 0.0:
        return INFINITE_ETX
    return 1.0 / p

def pl_min(max_retry: int) -> float:
    """Lowest per-attempt success probability a capped-retry link can exploit."""
    return 1.0 / max_retry

def mtx(cur_psucc: float, max_retry: int) -> float:
    """Expected transmission count clamped at the MAC retry cap."""
    if cur_psucc >= pl_min(max_retry):
        return 1.0 / cur_psucc
    return float(max_retry)


@dataclass
class LinkStats:
    """Windowed outcome history and latency estimate for one directed link.

    ``window`` is a ring of the last ``window_size`` transmit outcomes;
    ``cur_psucc`` is always the success fraction over that ring once at
    least one outcome has been recorded.  ``ed`` is an exponentially
    smoothed estimate of the one-hop media latency, updated by the MAC
    layer from observed hop times.
    """

    d_f: float = 1.0
    d_r: float = 1.0
    cur_psucc: float = 1.0
    ed: float = 0.0
    window_size: int = DEFAULT_WINDOW
    max_retry: int = DEFAULT_MAX_RETRY
    window: np.ndarray = field(default=None, repr=False)
    _head: int = 0
    _count: int = 0
    _succ: int = 0

    def __post_init__(self):
        if self.window is None:
            self.window = np.zeros(self.window_size, dtype=np.uint8)

    @property
    def attempts_in_window(self) -> int:
        return self._count

    @property
    def mtx(self) -> float:
        return mtx(self.cur_psucc, self.max_retry)

    def seed_from_probability(self, p: float) -> None:
        """Prefill the window so cur_psucc starts at (a rounding of) ``p``."""
        n_succ = int(round(self.window_size * p))
        self.window[:] = 0
        self.window[:n_succ] = 1
        self._head = 0
        self._count = self.window_size
        self._succ = n_succ
        self.cur_psucc = n_succ / self.window_size

    def update_ed(self, observed: float, alpha: float = DEFAULT_ED_SMOOTHING) -> None:
        self.ed = (1.0 - alpha) * self.ed + alpha * observed


def record_outcome(stats: LinkStats, success: bool) -> LinkStats:
    """Push one transmit outcome into the ring and refresh cur_psucc."""
    w = stats.window_size
    if stats._count == w:
        stats._succ -= int(stats.window[stats._head])
    else:
        stats._count += 1
    stats.window[stats._head] = 1 if success else 0
    stats._succ += 1 if success else 0
    stats._head = (stats._head + 1) % w
    stats.cur_psucc = stats._succ / stats._count
    return stats


def link_delivery_prob(
    distance,
    radio_range: float,
    exponent: float = 8.0,
    floor: float = 0.05,
):
    """Ground-truth one-direction delivery probability of a link.

    Monotone decreasing in distance: 1 - (d/range)^exponent, clamped to
    [floor, 1].  Used to synthesize per-link truth when a scenario is built;
    the protocol itself only ever sees windowed estimates.  Accepts scalars
    or numpy arrays of distances.
    """
    p = 1.0 - (np.asarray(distance, dtype=np.float64) / radio_range) ** exponent
    clamped = np.clip(p, floor, 1.0)
    return float(clamped) if np.isscalar(distance) else clamped
