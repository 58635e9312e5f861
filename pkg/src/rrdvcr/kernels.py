"""Hot inner loops of the scenario engine, in two interchangeable backends.

Per-packet forwarder selection and per-attempt link-window updates dominate
a run's cost, so they are compiled with numba when available.  A pure-numpy
fallback implements identical semantics (same admission rules, same
first-lowest tie-breaking) and is selected with::

    RRDVCR_BACKEND=numpy   # or "numba", the default when importable

All kernels operate on flat per-pair arrays sliced by [lo, hi); they return
the winning global pair index or -1.  ``benchmarks/bench_backends.py``
compares the two.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

ENV_VAR = "RRDVCR_BACKEND"


# ---------------------------------------------------------------------------
# Scalar-loop implementations (numba-compiled when the backend is "numba")
# ---------------------------------------------------------------------------

def _select_rrdvcr_loop(
    lo, hi, speeds, ps_ij, ps_jk, e_res_k, e_frac_k, rel_num, rel_den,
    req, fw, gate, eth,
):
    speed_sum = 0.0
    rel_sum = 0.0
    energy_sum = 0.0
    n_admitted = 0
    for idx in range(lo, hi):
        if (
            speeds[idx] >= req
            and ps_ij[idx] >= gate
            and ps_jk[idx] >= gate
            and e_res_k[idx] >= eth
        ):
            speed_sum += speeds[idx]
            rel_sum += rel_den[idx]
            energy_sum += e_frac_k[idx]
            n_admitted += 1
    if n_admitted == 0:
        return -1
    best = -1
    best_score = -1.0
    for idx in range(lo, hi):
        if not (
            speeds[idx] >= req
            and ps_ij[idx] >= gate
            and ps_jk[idx] >= gate
            and e_res_k[idx] >= eth
        ):
            continue
        score = 0.0
        if speed_sum > 0.0:
            score += fw * speeds[idx] / speed_sum
        if rel_sum > 0.0:
            score += fw * rel_num[idx] / rel_sum
        if energy_sum > 0.0:
            score += (1.0 - fw) * e_frac_k[idx] / energy_sum
        if score > best_score:
            best_score = score
            best = idx
    return best


def _select_thvr_loop(lo, hi, speeds, e_frac_j, req, beta):
    speed_sum = 0.0
    energy_sum = 0.0
    n_admitted = 0
    for idx in range(lo, hi):
        if speeds[idx] >= req:
            speed_sum += speeds[idx]
            energy_sum += e_frac_j[idx]
            n_admitted += 1
    if n_admitted == 0:
        return -1
    best = -1
    best_score = -1.0
    for idx in range(lo, hi):
        if speeds[idx] < req:
            continue
        score = 0.0
        if speed_sum > 0.0:
            score += beta * speeds[idx] / speed_sum
        if energy_sum > 0.0:
            score += (1.0 - beta) * e_frac_j[idx] / energy_sum
        if score > best_score:
            best_score = score
            best = idx
    return best


def _select_speed_loop(lo, hi, velocities, req):
    best = -1
    best_v = -1.0
    for idx in range(lo, hi):
        if velocities[idx] > best_v:
            best_v = velocities[idx]
            best = idx
    if best < 0 or best_v < req:
        return -1
    return best


def _record_window_loop(win, head, count, succ, width, lid, n_fail, n_succ):
    for t in range(n_fail + n_succ):
        outcome = 1 if t >= n_fail else 0
        h = head[lid]
        if count[lid] == width:
            succ[lid] -= win[lid, h]
        else:
            count[lid] += 1
        win[lid, h] = outcome
        succ[lid] += outcome
        head[lid] = (h + 1) % width


# ---------------------------------------------------------------------------
# Vectorized numpy fallbacks (same semantics, first-max tie-breaking)
# ---------------------------------------------------------------------------

def _select_rrdvcr_numpy(
    lo, hi, speeds, ps_ij, ps_jk, e_res_k, e_frac_k, rel_num, rel_den,
    req, fw, gate, eth,
):
    sl = slice(lo, hi)
    admit = (
        (speeds[sl] >= req)
        & (ps_ij[sl] >= gate)
        & (ps_jk[sl] >= gate)
        & (e_res_k[sl] >= eth)
    )
    if not admit.any():
        return -1
    speed_sum = speeds[sl][admit].sum()
    rel_sum = rel_den[sl][admit].sum()
    energy_sum = e_frac_k[sl][admit].sum()
    score = np.zeros(hi - lo)
    if speed_sum > 0.0:
        score += fw * speeds[sl] / speed_sum
    if rel_sum > 0.0:
        score += fw * rel_num[sl] / rel_sum
    if energy_sum > 0.0:
        score += (1.0 - fw) * e_frac_k[sl] / energy_sum
    score[~admit] = -np.inf
    return lo + int(np.argmax(score))


def _select_thvr_numpy(lo, hi, speeds, e_frac_j, req, beta):
    sl = slice(lo, hi)
    admit = speeds[sl] >= req
    if not admit.any():
        return -1
    speed_sum = speeds[sl][admit].sum()
    energy_sum = e_frac_j[sl][admit].sum()
    score = np.zeros(hi - lo)
    if speed_sum > 0.0:
        score += beta * speeds[sl] / speed_sum
    if energy_sum > 0.0:
        score += (1.0 - beta) * e_frac_j[sl] / energy_sum
    score[~admit] = -np.inf
    return lo + int(np.argmax(score))


def _select_speed_numpy(lo, hi, velocities, req):
    if hi <= lo:
        return -1
    best = lo + int(np.argmax(velocities[lo:hi]))
    if velocities[best] < req:
        return -1
    return best


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------

_NUMPY_BACKEND = SimpleNamespace(
    name="numpy",
    select_rrdvcr=_select_rrdvcr_numpy,
    select_thvr=_select_thvr_numpy,
    select_speed=_select_speed_numpy,
    record_window=_record_window_loop,
)

_numba_backend = None


def _build_numba_backend():
    global _numba_backend
    if _numba_backend is None:
        jit = njit(cache=True)
        _numba_backend = SimpleNamespace(
            name="numba",
            select_rrdvcr=jit(_select_rrdvcr_loop),
            select_thvr=jit(_select_thvr_loop),
            select_speed=jit(_select_speed_loop),
            record_window=jit(_record_window_loop),
        )
    return _numba_backend


def default_backend_name() -> str:
    env = os.environ.get(ENV_VAR, "").strip().lower()
    if env:
        return env
    return "numba" if NUMBA_AVAILABLE else "numpy"


def get_kernels(name: str | None = None) -> SimpleNamespace:
    """Return the kernel namespace for ``name`` (default: env, then numba)."""
    name = (name or default_backend_name()).lower()
    if name == "numpy":
        return _NUMPY_BACKEND
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError(
                "numba backend requested but numba is not importable; "
                f"set {ENV_VAR}=numpy"
            )
        return _build_numba_backend()
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")
