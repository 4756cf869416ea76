"""Gradient-domain seamless cloning over the pasted mask.

The unknowns are the in-image mask pixels.  Each row is the 4-neighbour
Laplacian with Dirichlet values taken from the background; the right-hand side
adds the guidance differences.  Systems are solved with an unpreconditioned
Krylov iteration written out here so the residual history can be inspected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .compositor import ObjectCutout, Placement, Poisson, place_mask
from .errors import EmptyMaskError, NoBoundaryError, NotConvergedError
from .imaging import as_image, quantize

_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class GuidanceMode(str, enum.Enum):
    SOURCE = "source"
    MIXED = "mixed"


@dataclass(frozen=True)
class PoissonSystem:
    shape: tuple[int, int]
    ys: np.ndarray
    xs: np.ndarray
    matrix: sp.csr_matrix
    rhs: np.ndarray  # (n, channels)

    @property
    def n(self) -> int:
        return self.ys.size


@dataclass
class PoissonSolution:
    values: np.ndarray  # (n, channels), unclamped
    converged: bool
    iterations: list[int]
    residuals: list[list[float]]  # per channel, relative residual after each step


def build_system(
    bg: np.ndarray,
    c: ObjectCutout,
    p: Placement,
    guidance: GuidanceMode | str = GuidanceMode.SOURCE,
) -> PoissonSystem:
    bg = as_image(bg)
    guidance = GuidanceMode(guidance)
    h, w = bg.shape[:2]
    interior = place_mask(c.mask, p, (h, w))
    ys, xs = np.nonzero(interior)
    n = ys.size
    if n == 0:
        raise EmptyMaskError("no mask pixel lies inside the background")
    index = np.full((h, w), -1, dtype=np.int64)
    index[ys, xs] = np.arange(n)

    bgf = bg.astype(np.float64)
    ch, cw = c.mask.shape
    srcf = c.image.astype(np.float64)

    def src_at(yy, xx):
        # samples outside the cutout rectangle replicate its edge
        return srcf[np.clip(yy - p.y, 0, ch - 1), np.clip(xx - p.x, 0, cw - 1)]

    src_i = src_at(ys, xs)
    bg_i = bgf[ys, xs]
    diag = np.zeros(n)
    rhs = np.zeros((n, bg.shape[2]))
    rows, cols = [], []
    n_boundary = 0
    for dy, dx in _NEIGHBOURS:
        ny, nx = ys + dy, xs + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        diag += inside
        nyc, nxc = np.clip(ny, 0, h - 1), np.clip(nx, 0, w - 1)
        j = np.where(inside, index[nyc, nxc], -1)
        is_int = inside & (j >= 0)
        is_bnd = inside & (j < 0)
        n_boundary += int(is_bnd.sum())
        rows.append(np.flatnonzero(is_int))
        cols.append(j[is_int])
        rhs[is_bnd] += bgf[nyc[is_bnd], nxc[is_bnd]]

        v = src_i - src_at(ny, nx)
        if guidance is GuidanceMode.MIXED:
            vb = bg_i - bgf[nyc, nxc]
            v = np.where(np.abs(vb) > np.abs(v), vb, v)
        rhs[inside] += v[inside]
    if n_boundary == 0:
        raise NoBoundaryError("mask covers the whole image; no Dirichlet boundary")

    r = np.concatenate(rows)
    cidx = np.concatenate(cols)
    off = sp.csr_matrix((-np.ones(r.size), (r, cidx)), shape=(n, n))
    matrix = (sp.diags(diag) + off).tocsr()
    return PoissonSystem(shape=(h, w), ys=ys, xs=xs, matrix=matrix, rhs=rhs)


def conjugate_residual(A, b, tol=1e-6, max_iter=None):
    """Solve ``A x = b`` for symmetric positive definite ``A`` from ``x0 = 0``.

    Conjugate residuals: same Krylov space and cost as CG, but each step
    minimises ``||b - A x||`` so the residual norm never increases.
    Returns ``(x, converged, relative_residuals)``.
    """
    n = b.shape[0]
    max_iter = 10 * n if max_iter is None else max_iter
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, True, [0.0]
    r = b.copy()
    ar = A @ r
    pdir = r.copy()
    ap = ar.copy()
    rar = float(r @ ar)
    history = [1.0]
    best = x.copy()
    for _ in range(max_iter):
        denom = float(ap @ ap)
        if denom == 0.0:
            break
        alpha = rar / denom
        x += alpha * pdir
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / bnorm
        history.append(rel)
        best = x
        if rel <= tol:
            return x, True, history
        ar = A @ r
        rar_next = float(r @ ar)
        beta = rar_next / rar
        rar = rar_next
        pdir = r + beta * pdir
        ap = ar + beta * ap
    return best, history[-1] <= tol, history


def solve(sys: PoissonSystem, tol: float = 1e-6, max_iter: int | None = None) -> PoissonSolution:
    values = np.zeros_like(sys.rhs)
    converged = True
    iters, residuals = [], []
    for k in range(sys.rhs.shape[1]):
        x, ok, hist = conjugate_residual(sys.matrix, sys.rhs[:, k], tol, max_iter)
        values[:, k] = x
        converged &= ok
        iters.append(len(hist) - 1)
        residuals.append(hist)
    return PoissonSolution(values=values, converged=converged, iterations=iters, residuals=residuals)


def blend_poisson(bg: np.ndarray, c: ObjectCutout, p: Placement, params: Poisson | None = None) -> np.ndarray:
    """Replace the in-image mask pixels with the solved values; nothing else changes."""
    params = params or Poisson()
    bg = as_image(bg)
    system = build_system(bg, c, p, params.guidance)
    sol = solve(system, params.tol, params.max_iter)
    if not sol.converged:
        raise NotConvergedError(
            f"Poisson solve stopped at residual {max(h[-1] for h in sol.residuals):.3g}",
            solution=sol,
        )
    out = bg.copy()
    out[system.ys, system.xs] = quantize(sol.values)
    return out
