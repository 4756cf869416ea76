"""Exemplar-based hole filling with a PatchMatch nearest-neighbour field.

Every pixel whose patch overlaps the hole is a *source* centre.  Its match is
a *target* centre whose whole patch is inside the image and free of hole
pixels.  Matches are improved by scan-order propagation and a shrinking random
search; a candidate is only taken when it is strictly closer, so the summed
distance never goes up within a call.  Filling runs coarse to fine with
uniform-weight patch voting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..errors import NoValidTargetError
from ..imaging import as_image, as_mask, check_same_size, quantize
from ..morphology import StructElem, dilate, erode


@dataclass(frozen=True)
class PatchMatchParams:
    patch_size: int = 7
    pyramid_levels: int | None = None
    iters_per_level: int = 5
    em_rounds: int = 3
    search_radius_decay: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ValueError("patch_size must be a positive odd integer")
        if not 0.0 < self.search_radius_decay < 1.0:
            raise ValueError("search_radius_decay must be in (0, 1)")
        if self.pyramid_levels is not None and self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.iters_per_level < 1 or self.em_rounds < 1:
            raise ValueError("iteration counts must be >= 1")

    @property
    def half(self) -> int:
        return self.patch_size // 2


@dataclass
class NNField:
    """Match for every hole-overlapping patch centre, in row-major centre order."""

    centers_y: np.ndarray
    centers_x: np.ndarray
    target_y: np.ndarray
    target_x: np.ndarray
    distance: np.ndarray
    energy_history: list[float] = field(default_factory=list)

    @property
    def offsets(self) -> np.ndarray:
        return np.stack([self.target_x - self.centers_x, self.target_y - self.centers_y], axis=1)

    @property
    def energy(self) -> float:
        return float(self.distance.sum())


@numba.njit(cache=True)
def _patch_dist(img, wgt, cy, cx, ty, tx, half):
    h, w, nc = img.shape
    d = 0.0
    for dy in range(-half, half + 1):
        sy = cy + dy
        if sy < 0 or sy >= h:
            continue
        for dx in range(-half, half + 1):
            sx = cx + dx
            if sx < 0 or sx >= w:
                continue
            wv = wgt[sy, sx]
            if wv == 0.0:
                continue
            for k in range(nc):
                diff = img[sy, sx, k] - img[ty + dy, tx + dx, k]
                d += wv * diff * diff
    return d


@numba.njit(cache=True)
def _all_dists(img, wgt, cys, cxs, tys, txs, half):
    out = np.empty(cys.size)
    for i in range(cys.size):
        out[i] = _patch_dist(img, wgt, cys[i], cxs[i], tys[i], txs[i], half)
    return out


@numba.njit(cache=True)
def _scan(img, wgt, valid, index, cys, cxs, tys, txs, dist, half, reverse, radii, rand):
    """One propagation + random-search sweep; updates tys/txs/dist in place."""
    h, w = valid.shape
    n = cys.size
    step = -1 if reverse else 1
    for it in range(n):
        i = n - 1 - it if reverse else it
        cy = cys[i]
        cx = cxs[i]
        # propagation from the already-visited horizontal and vertical neighbour
        for axis in range(2):
            ny = cy - step if axis == 1 else cy
            nx = cx - step if axis == 0 else cx
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            j = index[ny, nx]
            if j < 0:
                continue
            ty = tys[j] + (cy - ny)
            tx = txs[j] + (cx - nx)
            if ty < 0 or ty >= h or tx < 0 or tx >= w or not valid[ty, tx]:
                continue
            d = _patch_dist(img, wgt, cy, cx, ty, tx, half)
            if d < dist[i]:
                dist[i] = d
                tys[i] = ty
                txs[i] = tx
        # random search around the incumbent with shrinking radius
        for s in range(radii.size):
            r = radii[s]
            ty = tys[i] + int(np.floor(rand[i, s, 0] * (2 * r + 1))) - r
            tx = txs[i] + int(np.floor(rand[i, s, 1] * (2 * r + 1))) - r
            if ty < 0 or ty >= h or tx < 0 or tx >= w or not valid[ty, tx]:
                continue
            d = _patch_dist(img, wgt, cy, cx, ty, tx, half)
            if d < dist[i]:
                dist[i] = d
                tys[i] = ty
                txs[i] = tx


@numba.njit(cache=True)
def _vote(img, hole, cys, cxs, tys, txs, half):
    h, w, nc = img.shape
    acc = np.zeros((h, w, nc))
    cnt = np.zeros((h, w))
    for i in range(cys.size):
        for dy in range(-half, half + 1):
            py = cys[i] + dy
            if py < 0 or py >= h:
                continue
            for dx in range(-half, half + 1):
                px = cxs[i] + dx
                if px < 0 or px >= w or not hole[py, px]:
                    continue
                cnt[py, px] += 1.0
                for k in range(nc):
                    acc[py, px, k] += img[tys[i] + dy, txs[i] + dx, k]
    out = img.copy()
    for y in range(h):
        for x in range(w):
            if hole[y, x] and cnt[y, x] > 0:
                for k in range(nc):
                    out[y, x, k] = acc[y, x, k] / cnt[y, x]
    return out


def _search_radii(h: int, w: int, decay: float) -> np.ndarray:
    radii = []
    r = float(max(h, w))
    while r >= 1.0:
        radii.append(int(r))
        r *= decay
    return np.array(radii, dtype=np.int64)


def valid_targets(hole: np.ndarray, half: int) -> np.ndarray:
    """Centres whose full patch lies in the image and avoids every hole pixel."""
    if half == 0:
        return ~hole
    return erode(~hole, StructElem("square", half))


def source_centers(hole: np.ndarray, half: int) -> np.ndarray:
    if half == 0:
        return hole.copy()
    return dilate(hole, StructElem("square", half))


def _nnf(img, hole, wgt, params, rng, iterations, init=None) -> NNField:
    half = params.half
    h, w = hole.shape
    valid = valid_targets(hole, half)
    vy, vx = np.nonzero(valid)
    if vy.size == 0:
        raise NoValidTargetError(
            f"no {params.patch_size}x{params.patch_size} patch of a {w}x{h} image avoids the hole"
        )
    cys, cxs = np.nonzero(source_centers(hole, half))
    cys = cys.astype(np.int64)
    cxs = cxs.astype(np.int64)
    index = np.full((h, w), -1, dtype=np.int64)
    index[cys, cxs] = np.arange(cys.size)
    if init is not None and np.array_equal(init.centers_y, cys) and np.array_equal(init.centers_x, cxs):
        tys = init.target_y.astype(np.int64).copy()
        txs = init.target_x.astype(np.int64).copy()
    else:
        pick = rng.integers(vy.size, size=cys.size)
        tys = vy[pick].astype(np.int64)
        txs = vx[pick].astype(np.int64)
    dist = _all_dists(img, wgt, cys, cxs, tys, txs, half)
    history = [float(dist.sum())]
    radii = _search_radii(h, w, params.search_radius_decay)
    for _ in range(iterations):
        for reverse in (False, True):
            rand = rng.random((cys.size, radii.size, 2))
            _scan(img, wgt, valid, index, cys, cxs, tys, txs, dist, half, reverse, radii, rand)
            history.append(float(dist.sum()))
    return NNField(cys, cxs, tys, txs, dist, history)


def compute_nnf(
    img: np.ndarray,
    hole: np.ndarray,
    params: PatchMatchParams | None = None,
    rng: np.random.Generator | None = None,
    iterations: int | None = None,
    init: NNField | None = None,
) -> NNField:
    """Approximate nearest-neighbour field; distances count known pixels only.

    ``energy_history`` holds the summed distance after initialisation and after
    every half-iteration (one directional sweep).
    """
    params = params or PatchMatchParams()
    img = as_image(img)
    hole = as_mask(hole)
    check_same_size(img, hole)
    if not hole.any():
        raise ValueError("hole is empty")
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    wgt = (~hole).astype(np.float64)
    return _nnf(
        img.astype(np.float64), hole, wgt, params, rng, iterations or params.iters_per_level, init
    )


def default_levels(h: int, w: int) -> int:
    """Most levels keeping the coarsest side at least 32 px."""
    levels = 1
    side = min(h, w)
    while side / 2 ** levels >= 32:
        levels += 1
    return levels


def downsample(img: np.ndarray, hole: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 box average; a coarse pixel is hole if any of its fine pixels is."""
    h, w = hole.shape
    hh, ww = (h + 1) // 2, (w + 1) // 2
    acc = np.zeros((hh, ww, img.shape[2]))
    cnt = np.zeros((hh, ww, 1))
    coarse_hole = np.zeros((hh, ww), dtype=bool)
    for dy in (0, 1):
        for dx in (0, 1):
            sub = img[dy::2, dx::2]
            sh, sw = sub.shape[:2]
            acc[:sh, :sw] += sub
            cnt[:sh, :sw] += 1
            coarse_hole[:sh, :sw] |= hole[dy::2, dx::2]
    return acc / cnt, coarse_hole


def _onion_fill(img: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Seed hole pixels layer by layer with the mean of known 8-neighbours."""
    out = img.copy()
    todo = hole.copy()
    h, w = hole.shape
    while todo.any():
        known = ~todo
        pad_v = np.pad(out * known[..., None], ((1, 1), (1, 1), (0, 0)))
        pad_k = np.pad(known.astype(np.float64), 1)
        s = np.zeros_like(out)
        c = np.zeros((h, w))
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                s += pad_v[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
                c += pad_k[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        layer = todo & (c > 0)
        if not layer.any():
            out[todo] = out[~todo].mean(axis=0) if (~todo).any() else 0.0
            break
        out[layer] = s[layer] / c[layer][:, None]
        todo &= ~layer
    return out


def inpaint_patchmatch(
    img: np.ndarray,
    hole: np.ndarray,
    params: PatchMatchParams | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Fill ``hole`` from the rest of ``img``; pixels outside the hole are untouched.

    If ``trace`` is a list, one ``(level, NNField)`` entry is appended per
    field computation (level 0 is full resolution).
    """
    params = params or PatchMatchParams()
    img = as_image(img)
    hole = as_mask(hole)
    check_same_size(img, hole)
    if not hole.any():
        return img.copy()
    rng = np.random.default_rng(params.seed)
    h, w = hole.shape
    levels = params.pyramid_levels or default_levels(h, w)

    pyramid = [(img.astype(np.float64), hole)]
    for _ in range(levels - 1):
        pyramid.append(downsample(*pyramid[-1]))

    filled = None
    for lvl in range(levels - 1, -1, -1):
        base, lhole = pyramid[lvl]
        if filled is None:
            work = _onion_fill(base, lhole)
        else:
            up = filled[np.arange(lhole.shape[0]) // 2][:, np.arange(lhole.shape[1]) // 2]
            work = np.where(lhole[..., None], up, base)
        if not lhole.any():
            filled = work
            continue
        wgt = np.ones(lhole.shape)
        nnf = None
        for _ in range(params.em_rounds):
            nnf = _nnf(work, lhole, wgt, params, rng, params.iters_per_level, init=nnf)
            if trace is not None:
                trace.append((lvl, nnf))
            work = _vote(work, lhole, nnf.centers_y, nnf.centers_x, nnf.target_y, nnf.target_x, params.half)
        filled = work

    out = img.copy()
    out[hole] = quantize(filled[hole])
    return out
