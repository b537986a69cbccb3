"""Wiener paths, randomisation variables and iterated stochastic integrals.

A :class:`WienerPath` holds a batch of ``P`` independent m-dimensional
Brownian paths sampled lazily at the times that are asked for. Unknown
values are drawn from the exact conditional law given the stored
neighbours (Brownian bridge), or as a forward increment beyond the last
stored time, so any order of queries yields the same joint law and every
scheme run on the same path sees one consistent Brownian motion.

Two kinds of storage are kept:

* common times, shared by every path of the batch (grid points);
* per-path times (the random intermediate points ``theta_j``), kept as a
  row-sorted array padded with ``+inf``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import TemporalGrid
from .rng import RngStream


class WienerPath:
    """Lazily sampled Brownian paths for a batch of Monte Carlo samples.

    Parameters
    ----------
    stream : RngStream
        Source of the Gaussian draws; one row per path.
    T : float
        Time horizon; queries outside ``[0, T]`` are rejected.
    m : int
        Dimension of the Wiener process.
    """

    def __init__(self, stream: RngStream, T: float = 1.0, m: int = 1):
        if not T > 0:
            raise ValueError(f"T must be positive, got {T!r}")
        self.stream = stream
        self.T = float(T)
        self.m = int(m)
        P = stream.n_paths
        self._ct = np.zeros(1)
        self._cv = np.zeros((P, 1, self.m))
        self._et = np.empty((P, 0))
        self._ev = np.empty((P, 0, self.m))
        self._counter = 0

    @property
    def n_paths(self) -> int:
        return self.stream.n_paths

    @property
    def n_stored(self) -> int:
        """Stored points per path (common plus the widest per-path row)."""
        return self._ct.size + self._et.shape[1]

    def _draw(self, k: int) -> np.ndarray:
        n = k * self.m
        z = self.stream.normal(np.arange(self._counter, self._counter + n))
        self._counter += n
        return z.reshape(self.n_paths, k, self.m)

    def _check_range(self, t):
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > self.T):
            bad = t[~((t >= 0) & (t <= self.T))]
            raise ValueError(f"query time {bad.flat[0]!r} outside [0, {self.T!r}]")

    def query(self, times) -> np.ndarray:
        """W at times shared by all paths.

        ``times`` is a scalar or a 1-d array; the result has shape
        ``(P, m)`` or ``(P, K, m)`` respectively.
        """
        t = np.asarray(times, dtype=float)
        if t.ndim > 1:
            raise ValueError("common query times must be a scalar or 1-d array")
        self._check_range(t)
        t1 = np.atleast_1d(t)
        if self._et.shape[1] == 0:
            out = self._query_common(t1)
        else:
            out = self._query_each(np.broadcast_to(t1, (self.n_paths, t1.size)))
        return out[:, 0] if t.ndim == 0 else out

    def query_each(self, times) -> np.ndarray:
        """W at per-path times of shape ``(P,)`` or ``(P, K)``."""
        t = np.asarray(times, dtype=float)
        if t.ndim not in (1, 2) or t.shape[0] != self.n_paths:
            raise ValueError(f"per-path times need leading dimension {self.n_paths}, got shape {t.shape}")
        self._check_range(t)
        out = self._query_each(t.reshape(self.n_paths, -1))
        return out[:, 0] if t.ndim == 1 else out

    def _query_common(self, t: np.ndarray) -> np.ndarray:
        u, inv = np.unique(t, return_inverse=True)
        pos = np.searchsorted(self._ct, u)
        hit = (pos < self._ct.size) & (self._ct[np.minimum(pos, self._ct.size - 1)] == u)
        if not hit.all():
            self._insert_common(u[~hit])
        idx = np.searchsorted(self._ct, u)
        return self._cv[:, idx][:, inv.ravel()]

    def _insert_common(self, new: np.ndarray):
        # Points sharing a gap: free random walk from the left neighbour,
        # then pinned to the right neighbour (exact bridge construction).
        ct, cv = self._ct, self._cv
        K = new.size
        li = np.searchsorted(ct, new, side="right") - 1
        first = np.ones(K, dtype=bool)
        first[1:] = li[1:] != li[:-1]
        prev = np.where(first, ct[li], np.concatenate(([0.0], new[:-1])))
        z = self._draw(K)
        cs = np.cumsum(np.sqrt(new - prev)[None, :, None] * z, axis=1)
        gstart = np.flatnonzero(first)
        gid = np.cumsum(first) - 1
        base = np.zeros((self.n_paths, gstart.size, self.m))
        base[:, 1:] = cs[:, gstart[1:] - 1]
        walk = cv[:, li] + (cs - base[:, gid])
        glast = np.append(gstart[1:] - 1, K - 1)
        gli = li[glast]
        pinned = gli + 1 < ct.size
        if pinned.any():
            g = np.flatnonzero(pinned)
            s_t, u_t = ct[gli[g]], ct[gli[g] + 1]
            zr = self._draw(g.size)
            w_u = walk[:, glast[g]] + np.sqrt(u_t - new[glast[g]])[None, :, None] * zr
            miss = np.zeros((self.n_paths, gstart.size, self.m))
            miss[:, g] = w_u - cv[:, gli[g] + 1]
            frac = np.zeros(gstart.size)
            frac_s = np.zeros(gstart.size)
            frac[g] = 1.0 / (u_t - s_t)
            frac_s[g] = s_t
            walk = walk - ((new - frac_s[gid]) * frac[gid])[None, :, None] * miss[:, gid]
        times = np.concatenate((ct, new))
        order = np.argsort(times, kind="stable")
        self._ct = times[order]
        self._cv = np.concatenate((cv, walk), axis=1)[:, order]

    def _query_each(self, t: np.ndarray) -> np.ndarray:
        P, K = t.shape
        ct, cv = self._ct, self._cv
        nc = ct.size
        ci = np.searchsorted(ct, t, side="right") - 1
        lt = ct[ci]
        lv = np.take_along_axis(cv, ci[..., None], axis=1)
        ri = np.minimum(ci + 1, nc - 1)
        rt = np.where(ci + 1 < nc, ct[ri], np.inf)
        rv = np.take_along_axis(cv, ri[..., None], axis=1)

        et, ev = self._et, self._ev
        E = et.shape[1]
        if E:
            ei = np.empty((P, K), dtype=np.intp)
            for p in range(P):
                ei[p] = np.searchsorted(et[p], t[p], side="right")
            eli = np.maximum(ei - 1, 0)
            elt = np.where(ei > 0, np.take_along_axis(et, eli, axis=1), -np.inf)
            use = elt > lt
            lt = np.where(use, elt, lt)
            lv = np.where(use[..., None], np.take_along_axis(ev, eli[..., None], axis=1), lv)
            eri = np.minimum(ei, E - 1)
            ert = np.where(ei < E, np.take_along_axis(et, eri, axis=1), np.inf)
            use = ert < rt
            rt = np.where(use, ert, rt)
            rv = np.where(use[..., None], np.take_along_axis(ev, eri[..., None], axis=1), rv)

        hit = lt == t
        miss = ~hit
        if K > 1 and miss.any():
            order = np.argsort(t, axis=1, kind="stable")
            key = np.take_along_axis(np.where(miss, lt, np.nan), order, axis=1)
            if np.any(key[:, 1:] == key[:, :-1]):
                # Two unknown points in one gap are not conditionally
                # independent; resolve them one at a time.
                out = np.empty((P, K, self.m))
                for k in range(K):
                    out[:, k] = self._query_each(t[:, k:k + 1])[:, 0]
                return out

        z = self._draw(K)
        bounded = np.isfinite(rt)
        rt = np.where(bounded, rt, t)
        span = np.where(bounded, rt - lt, 1.0)
        w_right = np.where(bounded, (t - lt) / span, 0.0)
        var = np.where(bounded, (rt - t) * (t - lt) / span, t - lt)
        rv = np.where(bounded[..., None], rv, 0.0)
        val = lv + w_right[..., None] * (rv - lv) + np.sqrt(np.maximum(var, 0.0))[..., None] * z
        val = np.where(hit[..., None], lv, val)

        if miss.any():
            nt = np.concatenate((et, np.where(miss, t, np.inf)), axis=1)
            nv = np.concatenate((ev, val), axis=1)
            order = np.argsort(nt, axis=1, kind="stable")
            nt = np.take_along_axis(nt, order, axis=1)
            nv = np.take_along_axis(nv, order[..., None], axis=1)
            width = int(np.max(np.sum(np.isfinite(nt), axis=1)))
            self._et, self._ev = nt[:, :width], nv[:, :width]
        return val


def bridge_query(path: WienerPath, t) -> np.ndarray:
    """W(t) for every path in the batch, drawn and stored if unknown."""
    return path.query(t)


def sample_tau(stream: RngStream, counters=0) -> np.ndarray:
    """Uniform(0, 1) randomisation variables, one per path and counter."""
    return stream.uniform(counters)


def scalar_iterated_integral(dw, dt):
    """``I_(1,1) = (dW^2 - dt) / 2`` for a scalar Wiener process."""
    dw = np.asarray(dw, dtype=float)
    return 0.5 * (dw * dw - np.asarray(dt, dtype=float))


def commutative_iterated(dw, dt) -> np.ndarray:
    """Iterated integrals for commutative noise, shape ``(..., m, m)``.

    The diagonal is exact. Off-diagonal entries are the symmetric split
    ``dW_{r1} dW_{r2} / 2`` of ``I_(r1,r2) + I_(r2,r1)``; they are only
    valid when contracted against symmetric ``g^{r1,r2}``.
    """
    dw = np.asarray(dw, dtype=float)
    dt = np.asarray(dt, dtype=float)
    out = 0.5 * dw[..., :, None] * dw[..., None, :]
    diag = scalar_iterated_integral(dw, dt[..., None])
    idx = np.arange(dw.shape[-1])
    out[..., idx, idx] = diag
    return out


def iterated_integrals(dw, dt) -> np.ndarray:
    """Second-order iterated integrals over one interval, ``(..., m, m)``."""
    dw = np.asarray(dw, dtype=float)
    if dw.shape[-1] == 1:
        return scalar_iterated_integral(dw, np.asarray(dt)[..., None])[..., None]
    return commutative_iterated(dw, dt)


def chen_combine(dw_left, i2_left, dw_right, i2_right):
    """Join two adjacent intervals with Chen's relation.

    Returns ``(dw_full, i2_full)`` with
    ``i2_full[r1, r2] = i2_left[r1, r2] + i2_right[r1, r2] + dw_left[r1] * dw_right[r2]``.
    """
    dw_left = np.asarray(dw_left, dtype=float)
    dw_right = np.asarray(dw_right, dtype=float)
    dw_full = dw_left + dw_right
    i2_full = i2_left + i2_right + dw_left[..., :, None] * dw_right[..., None, :]
    return dw_full, i2_full


@dataclass(frozen=True)
class StepNoise:
    """Randomness consumed by one step for every path of a batch.

    ``tau`` and ``theta`` have shape ``(P,)``, increments ``(P, m)`` and
    iterated integrals ``(P, m, m)``. For schemes that ignore the
    intermediate point the noise is degenerate: ``tau = 1``, ``theta = t_j``
    and the right sub-interval is empty.
    """

    tau: np.ndarray
    theta: np.ndarray
    dw_left: np.ndarray
    dw_right: np.ndarray
    dw_full: np.ndarray
    i2_left: np.ndarray
    i2_right: np.ndarray
    i2_full: np.ndarray


@dataclass(frozen=True)
class GridNoise:
    """Step noise for a whole grid, arrays stacked step-major ``(N, P, ...)``.

    ``w`` holds the Brownian values at the grid points, ``(P, N+1, m)``.
    """

    grid: TemporalGrid
    randomized: bool
    w: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    dw_left: np.ndarray
    dw_right: np.ndarray
    dw_full: np.ndarray
    i2_left: np.ndarray
    i2_right: np.ndarray
    i2_full: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def step(self, j: int) -> StepNoise:
        """Noise of step ``j`` (0-based, covering ``[t_j, t_{j+1}]``)."""
        return StepNoise(
            self.tau[j], self.theta[j], self.dw_left[j], self.dw_right[j],
            self.dw_full[j], self.i2_left[j], self.i2_right[j], self.i2_full[j],
        )


def _assemble(w_prev, w_theta, w_next, t_prev, theta, t_next):
    dw_left = w_theta - w_prev
    dw_right = w_next - w_theta
    i2_left = iterated_integrals(dw_left, theta - t_prev)
    i2_right = iterated_integrals(dw_right, t_next - theta)
    dw_full, i2_full = chen_combine(dw_left, i2_left, dw_right, i2_right)
    return dw_left, dw_right, dw_full, i2_left, i2_right, i2_full


def sample_step_noise(path: WienerPath, stream: RngStream, t_prev: float, h: float,
                      step_index: int = 0) -> StepNoise:
    """Noise for a single randomised step ``[t_prev, t_prev + h]``.

    ``stream`` supplies ``tau``; ``step_index`` selects its counter.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    t_next = t_prev + h
    w_prev = path.query(t_prev)
    w_next = path.query(t_next)
    tau = stream.uniform(np.array([step_index]))[:, 0]
    theta = t_prev + tau * h
    w_theta = path.query_each(theta)
    parts = _assemble(w_prev, w_theta, w_next, t_prev, theta, np.full_like(theta, t_next))
    return StepNoise(tau, theta, *parts)


def sample_grid_noise(path: WienerPath, grid: TemporalGrid,
                      stream: Optional[RngStream] = None) -> GridNoise:
    """Noise for every step of ``grid``.

    With a ``stream``, ``tau_j`` is drawn from it at counter ``j`` and
    ``W(theta_j)`` is inserted into ``path`` by bridge sampling; without
    one the noise is degenerate (full-step increments only).
    """
    t = grid.times
    h = grid.steps
    w = path.query(t)
    P, N = path.n_paths, grid.n_steps
    t_prev = np.broadcast_to(t[:-1], (P, N))
    t_next = np.broadcast_to(t[1:], (P, N))
    if stream is not None:
        if stream.n_paths != P:
            raise ValueError("tau stream and Wiener path cover different batches")
        tau = stream.uniform(np.arange(N))
        theta = t[:-1] + tau * h
        w_theta = path.query_each(theta)
    else:
        tau = np.ones((P, N))
        theta = t_next
        w_theta = w[:, 1:]
    parts = _assemble(w[:, :-1], w_theta, w[:, 1:], t_prev, theta, t_next)

    def step_major(a):
        return np.ascontiguousarray(np.moveaxis(a, 1, 0))

    return GridNoise(grid, stream is not None, w, step_major(tau), step_major(theta),
                     *(step_major(a) for a in parts))
