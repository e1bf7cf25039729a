"""Poisson point processes on a disk, nearest-neighbour queries and DC-DP pairing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np
from scipy.spatial import cKDTree

KINDS = ("RRH", "DC", "DP", "EU")
# sub-stream ids; never renumber, or fixed-seed outputs change
STREAM_IDS = {"RRH": 1, "DC": 2, "DP": 3, "EU": 4, "PAIRING": 5, "FADING": 6, "RECEIVERS": 7}


def stream(seed: int, trial: int, name: str) -> np.random.Generator:
    """Philox generator keyed on ``(seed, trial, name)``.

    Each point-process kind and each trial gets its own counter-based
    stream, so adding trials or kinds never shifts earlier draws.
    """
    ss = np.random.SeedSequence([int(seed), int(trial), STREAM_IDS[name]])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PointSet:
    kind: str
    positions: np.ndarray  # shape (n, 2), metres
    region_radius: float

    def __len__(self) -> int:
        return len(self.positions)

    def tree(self) -> cKDTree:
        return cKDTree(self.positions)


@dataclass(frozen=True)
class Pairing:
    """One-to-one DC -> DP matches, sorted by DC index."""

    dc_index: np.ndarray
    dp_index: np.ndarray
    link_distance: np.ndarray
    cached: np.ndarray  # per-DP flag: holds the requested file

    def __len__(self) -> int:
        return len(self.dc_index)

    def __iter__(self):
        for dc, dp, d in zip(self.dc_index, self.dp_index, self.link_distance):
            yield int(dc), int(dp), float(d), bool(self.cached[dp])


def sample_ppp(intensity: float, region_radius: float, rng: np.random.Generator, kind: str = "DC") -> PointSet:
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    if region_radius <= 0:
        raise ValueError("region_radius must be positive")
    n = rng.poisson(intensity * np.pi * region_radius**2)
    r = region_radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    pos = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    return PointSet(kind, pos, region_radius)


def nearest_distance(origin, points: PointSet) -> float:
    if len(points) == 0:
        raise ValueError("nearest_distance of an empty point set")
    diff = points.positions - np.asarray(origin, dtype=float)
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def nearest_neighbours(origins: np.ndarray, points: PointSet) -> tuple[np.ndarray, np.ndarray]:
    """Distance to and index of the nearest point for each origin."""
    if len(points) == 0:
        raise ValueError("nearest_neighbours of an empty point set")
    dist, idx = points.tree().query(origins)
    return dist, idx


@nb.njit(cache=True, nogil=True)
def _random_match(order, u, indptr, cand, dist, d_inner, n_dp):
    taken = np.zeros(n_dp, np.bool_)
    chosen = -np.ones(indptr.size - 1, np.int64)
    for dc in order:
        lo, hi = indptr[dc], indptr[dc + 1]
        n_in = 0
        n_all = 0
        for k in range(lo, hi):
            if not taken[cand[k]]:
                n_all += 1
                if dist[k] <= d_inner:
                    n_in += 1
        if n_all == 0:
            continue
        inner_only = n_in > 0
        pick = int(u[dc] * (n_in if inner_only else n_all))
        c = 0
        for k in range(lo, hi):
            if taken[cand[k]] or (inner_only and dist[k] > d_inner):
                continue
            if c == pick:
                taken[cand[k]] = True
                chosen[dc] = k
                break
            c += 1
    return chosen


def pair_requests(
    dcs: PointSet,
    dps: PointSet,
    chp: float,
    d_ol_star: float,
    rng: np.random.Generator,
    d_ou_star: float | None = None,
) -> Pairing:
    """Match each DC to a random unmatched caching DP within ``d_ol_star``.

    Each DP holds the file with probability ``chp``. DCs are visited in a
    random order. When ``d_ou_star`` is given, a DC with an available DP
    within ``d_ou_star`` picks among those only, so the band split follows
    the nearest caching DP; otherwise the pick is uniform over the whole
    ``d_ol_star`` disk.
    """
    if not 0 <= chp <= 1:
        raise ValueError("chp must lie in [0, 1]")
    n_dc, n_dp = len(dcs), len(dps)
    # draw everything up front so the stream layout does not depend on the geometry
    cached = rng.random(n_dp) < chp
    order = rng.permutation(n_dc)
    u = rng.random(n_dc)
    empty = np.zeros(0, np.int64)
    if n_dc == 0 or d_ol_star <= 0 or not cached.any():
        return Pairing(empty, empty, np.zeros(0), cached)

    cache_idx = np.flatnonzero(cached)
    pairs = dcs.tree().sparse_distance_matrix(
        cKDTree(dps.positions[cache_idx]), d_ol_star, output_type="ndarray"
    )
    dc_i = pairs["i"].astype(np.int64)
    dp_j = pairs["j"].astype(np.int64)
    dist = pairs["v"]
    sort = np.lexsort((dp_j, dc_i))
    dc_i, dp_j, dist = dc_i[sort], dp_j[sort], dist[sort]
    indptr = np.zeros(n_dc + 1, np.int64)
    np.cumsum(np.bincount(dc_i, minlength=n_dc), out=indptr[1:])

    d_inner = -1.0 if d_ou_star is None else float(d_ou_star)
    chosen = _random_match(order, u, indptr, dp_j, dist, d_inner, len(cache_idx))
    dc_sel = np.flatnonzero(chosen >= 0)
    k = chosen[dc_sel]
    return Pairing(dc_sel, cache_idx[dp_j[k]], dist[k], cached)


def dump_realization(path: str | Path, sets: dict[str, PointSet], pairing: Pairing) -> None:
    """Write one realization as CSV rows ``kind,x,y,paired_to,cached``."""
    dc_partner = dict(zip(pairing.dc_index.tolist(), pairing.dp_index.tolist()))
    dp_partner = {dp: dc for dc, dp in dc_partner.items()}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "x", "y", "paired_to", "cached"])
        for kind in KINDS:
            ps = sets.get(kind)
            if ps is None:
                continue
            for i, (x, y) in enumerate(ps.positions):
                partner = ""
                cached = ""
                if kind == "DC":
                    partner = dc_partner.get(i, "")
                elif kind == "DP":
                    partner = dp_partner.get(i, "")
                    cached = int(pairing.cached[i])
                writer.writerow([kind, repr(float(x)), repr(float(y)), partner, cached])
