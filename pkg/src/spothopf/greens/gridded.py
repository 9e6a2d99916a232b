r"""Finite-volume Green's functions on polygons with circular holes.

The regular remainder ``W = G - G_free`` (``G_free = -(1/2pi) log r`` or
``(1/2pi) K0(sqrt(mu) r)``) is smooth in the domain and solves

.. math::

    \Delta W - \mu W = f, \qquad \partial_n W = -\partial_n G_{free}\ \text{on}\ \partial\Omega,

with ``f = 1/|Omega|`` in the Neumann case.  The domain is cut from a
Cartesian grid of spacing ``h``; each cell carries its fluid area fraction,
face apertures and the boundary flux through its cut boundary pieces
(cut-cell finite volumes with two-point face fluxes).  Derivatives in the
source position solve the same system with source-differentiated boundary
data.  Values and derivatives at a point come from a least-squares
polynomial (degree ``FIT_DEGREE``) on the surrounding 5x5 block of cell centres.

The Neumann operator is singular; it is bordered with the cell volumes and
the mean of ``W`` is fixed so that ``G`` integrates to zero.  The integral
of ``log r`` uses the identity ``Delta[r^2 (log r - 1)/4] = log r``.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.sparse as sp
import shapely
from scipy.sparse.linalg import splu
from shapely.geometry import Point, Polygon
from shapely.geometry.polygon import orient

from .base import TWO_PI, GreensDomain, SourceTooCloseError, free_helmholtz_many

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)
MIN_CELLS_PER_HOLE = 8
SOURCE_MARGIN_CELLS = 5


FIT_DEGREE = 4


def _monomials(degree):
    return [(p, q) for n in range(degree + 1) for p in range(n, -1, -1) for q in [n - p]]


def _fit_operator(degree=FIT_DEGREE):
    """Pseudo-inverse mapping 25 stencil values to monomial coefficients (unit spacing)."""
    o = np.arange(-2, 3, dtype=float)
    dx, dy = np.meshgrid(o, o, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    A = np.column_stack([dx**p * dy**q for p, q in _monomials(degree)])
    return np.linalg.pinv(A)


def _derivative_rows(s, degree=FIT_DEGREE):
    """Rows evaluating value, d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2 of the fit at offset ``s``."""
    x, y = s
    rows = np.zeros((6, len(_monomials(degree))))

    def mono(p, q, a, b):
        # d^a/dx^a d^b/dy^b of x^p y^q
        if a > p or b > q:
            return 0.0
        cx = np.prod(np.arange(p - a + 1, p + 1)) if a else 1.0
        cy = np.prod(np.arange(q - b + 1, q + 1)) if b else 1.0
        return cx * cy * x ** (p - a) * y ** (q - b)

    for c, (p, q) in enumerate(_monomials(degree)):
        for r, (a, b) in enumerate([(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]):
            rows[r, c] = mono(p, q, a, b)
    return rows


_FIT = _fit_operator()


class GriddedDomain(GreensDomain):
    """Polygon minus circular holes, discretised with cut cells of size ``h``.

    Parameters
    ----------
    polygon : array_like, shape (k, 2)
        Outer boundary vertices.
    holes : sequence of (center, radius)
    h : float
        Grid spacing.
    hole_segments : int
        Vertices per quarter circle of the polygonal hole approximation.
    """

    kind = "gridded"
    # stencil switches make the fitted data piecewise smooth at the 1e-8 level
    residual_floor = 1e-6

    def __init__(self, polygon, holes=(), h: float = 0.02, hole_segments: int = 64):
        self.vertices = np.asarray(polygon, float)
        self.holes = [(np.asarray(c, float), float(r)) for c, r in holes]
        self.h = float(h)
        for c, r in self.holes:
            if r < MIN_CELLS_PER_HOLE * self.h:
                raise ValueError(f"hole radius {r} needs h <= {r / MIN_CELLS_PER_HOLE:.4g}")
        shape = Polygon(self.vertices)
        for c, r in self.holes:
            shape = shape.difference(Point(c).buffer(r, quad_segs=hole_segments))
        if shape.geom_type != "Polygon":
            raise ValueError("holes must not split the domain")
        self.shape = orient(shape, sign=1.0)
        self.area = float(self.shape.area)
        self._build_grid()
        self._build_boundary()
        self._assemble()
        self._lu_cache = {}

    @classmethod
    def from_dict(cls, spec: dict):
        holes = [(hh["center"], hh["radius"]) for hh in spec.get("holes", [])]
        return cls(spec["polygon"], holes, spec.get("h", 0.02), spec.get("hole_segments", 64))

    @classmethod
    def rectangle(cls, width, height, holes=(), h=0.02, **kw):
        poly = [(0, 0), (width, 0), (width, height), (0, height)]
        return cls(poly, holes, h, **kw)

    def describe(self):
        return {"kind": self.kind, "area": self.area, "h": self.h,
                "polygon": self.vertices.tolist(),
                "holes": [{"center": c.tolist(), "radius": r} for c, r in self.holes],
                "cells": int(self.n_active)}

    # -- geometry -----------------------------------------------------------

    def _build_grid(self):
        h = self.h
        xmin, ymin, xmax, ymax = self.shape.bounds
        self.origin = np.array([xmin, ymin])
        self.nx = int(np.ceil((xmax - xmin) / h - 1e-9))
        self.ny = int(np.ceil((ymax - ymin) / h - 1e-9))
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        x0 = xmin + i.ravel() * h
        y0 = ymin + j.ravel() * h
        boxes = shapely.box(x0, y0, x0 + h, y0 + h)
        shapely.prepare(self.shape)
        inside = shapely.contains_properly(self.shape, boxes)
        touch = shapely.intersects(self.shape, boxes) & ~inside
        frac = inside.astype(float)
        if touch.any():
            frac[touch] = shapely.area(shapely.intersection(boxes[touch], self.shape)) / h**2
        self.frac = frac.reshape(self.nx, self.ny)
        self.full = inside.reshape(self.nx, self.ny)
        self.cut = touch.reshape(self.nx, self.ny)

        def apertures(x0, y0, x1, y1, both_inside):
            ap = both_inside.astype(float)
            need = ~both_inside
            if need.any():
                seg = shapely.linestrings(np.stack([np.stack([x0[need], y0[need]], -1),
                                                    np.stack([x1[need], y1[need]], -1)], 1))
                ap[need] = shapely.length(shapely.intersection(seg, self.shape)) / h
            return ap

        # vertical faces between (i, j) and (i+1, j)
        ii, jj = np.meshgrid(np.arange(self.nx - 1), np.arange(self.ny), indexing="ij")
        both = self.full[:-1, :] & self.full[1:, :]
        any_cut = (self.cut[:-1, :] | self.cut[1:, :]) | both
        xf = xmin + (ii + 1) * h
        ax = np.zeros(ii.shape)
        ax[any_cut] = apertures(xf[any_cut], ymin + jj[any_cut] * h, xf[any_cut],
                                ymin + (jj[any_cut] + 1) * h, both[any_cut])
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny - 1), indexing="ij")
        both = self.full[:, :-1] & self.full[:, 1:]
        any_cut = (self.cut[:, :-1] | self.cut[:, 1:]) | both
        yf = ymin + (jj + 1) * h
        ay = np.zeros(ii.shape)
        ay[any_cut] = apertures(xmin + ii[any_cut] * h, yf[any_cut], xmin + (ii[any_cut] + 1) * h,
                                yf[any_cut], both[any_cut])
        self.ap_x, self.ap_y = ax, ay
        conn = np.zeros((self.nx, self.ny))
        conn[:-1, :] += ax
        conn[1:, :] += ax
        conn[:, :-1] += ay
        conn[:, 1:] += ay
        active = (self.frac > 1e-12) & (conn > 1e-12)
        self.active = active
        self.index = -np.ones((self.nx, self.ny), int)
        self.index[active] = np.arange(active.sum())
        self.n_active = int(active.sum())
        ci, cj = np.nonzero(active)
        self.centers = np.column_stack([xmin + (ci + 0.5) * h, ymin + (cj + 0.5) * h])
        self.volumes = self.frac[active] * h * h

    def _build_boundary(self):
        """Gauss points on boundary pieces, with owning cell and outward normal weights."""
        h = self.h
        pts, wn, cells = [], [], []
        rings = [self.shape.exterior] + list(self.shape.interiors)
        for ring in rings:
            v = np.asarray(ring.coords)
            for a, b in zip(v[:-1], v[1:]):
                d = b - a
                L = np.hypot(*d)
                if L == 0:
                    continue
                # split at grid lines
                ts = [0.0, 1.0]
                for ax in range(2):
                    if d[ax] != 0:
                        lo, hi = sorted((a[ax], b[ax]))
                        k0 = np.ceil((lo - self.origin[ax]) / h)
                        k1 = np.floor((hi - self.origin[ax]) / h)
                        for k in np.arange(k0, k1 + 1):
                            t = (self.origin[ax] + k * h - a[ax]) / d[ax]
                            if 0 < t < 1:
                                ts.append(t)
                ts = np.unique(ts)
                n = np.array([d[1], -d[0]]) / L
                for t0, t1 in zip(ts[:-1], ts[1:]):
                    if t1 - t0 < 1e-14:
                        continue
                    mid = a + 0.5 * (t0 + t1) * d
                    ci = int(np.floor((mid[0] - self.origin[0]) / h))
                    cj = int(np.floor((mid[1] - self.origin[1]) / h))
                    ci = min(max(ci, 0), self.nx - 1)
                    cj = min(max(cj, 0), self.ny - 1)
                    tq = t0 + (t1 - t0) * 0.5 * (_GAUSS_X + 1.0)
                    wq = 0.5 * (t1 - t0) * L * _GAUSS_W
                    pts.append(a[None, :] + tq[:, None] * d[None, :])
                    wn.append(wq[:, None] * n[None, :])
                    cells.append(np.full(len(tq), self.index[ci, cj]))
        self.bq_points = np.concatenate(pts)
        self.bq_wn = np.concatenate(wn)
        cells = np.concatenate(cells)
        # pieces in inactive slivers are credited to the nearest active cell
        lost = cells < 0
        if lost.any():
            from scipy.spatial import cKDTree
            _, nearest = cKDTree(self.centers).query(self.bq_points[lost])
            cells[lost] = nearest
        self.bq_cells = cells

    def _assemble(self):
        rows, cols, vals = [], [], []

        def couple(ap, ia, ib):
            m = (ap > 0) & (ia >= 0) & (ib >= 0)
            a, b, w = ia[m], ib[m], ap[m]
            rows.extend([a, b, a, b])
            cols.extend([b, a, a, b])
            vals.extend([w, w, -w, -w])

        couple(self.ap_x, self.index[:-1, :], self.index[1:, :])
        couple(self.ap_y, self.index[:, :-1], self.index[:, 1:])
        n = self.n_active
        self.laplacian = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                       shape=(n, n))

    # -- queries ---------------------------------------------------------------

    def contains(self, x) -> bool:
        return bool(self.shape.contains(Point(float(x[0]), float(x[1]))))

    def boundary_distance(self, x) -> float:
        return float(self.shape.boundary.distance(Point(float(x[0]), float(x[1]))))

    def check_source(self, xi, margin=0.0):
        return super().check_source(xi, max(margin, SOURCE_MARGIN_CELLS * self.h))

    def _stencil(self, x):
        """Indices of the 5x5 block of full cells centred at the cell nearest ``x``."""
        h = self.h
        c = np.rint((np.asarray(x, float) - self.origin) / h - 0.5).astype(int)
        i = np.arange(c[0] - 2, c[0] + 3)
        j = np.arange(c[1] - 2, c[1] + 3)
        if i.min() < 0 or j.min() < 0 or i.max() >= self.nx or j.max() >= self.ny:
            raise SourceTooCloseError(f"point {x} too close to the grid edge")
        I, J = np.meshgrid(i, j, indexing="ij")
        if not np.all(self.full[I, J]):
            raise SourceTooCloseError(f"point {x} too close to the boundary for the stencil")
        idx = self.index[I, J].ravel()
        center = self.origin + (c + 0.5) * h
        return idx, (np.asarray(x, float) - center) / h

    def _evaluate(self, fields, X):
        """Value, gradient and Hessian of ``fields`` (n_cells, k) at the points ``X``.

        Returns arrays of shape (m, k), (m, k, 2), (m, k, 2, 2).
        """
        h = self.h
        m, k = len(X), fields.shape[1]
        v = np.empty((m, k), fields.dtype)
        g = np.empty((m, k, 2), fields.dtype)
        H = np.empty((m, k, 2, 2), fields.dtype)
        for a, x in enumerate(X):
            idx, s = self._stencil(x)
            d = _derivative_rows(s) @ (_FIT @ fields[idx])   # (6, k)
            v[a] = d[0]
            g[a, :, 0], g[a, :, 1] = d[1] / h, d[2] / h
            H[a, :, 0, 0], H[a, :, 0, 1] = d[3] / h**2, d[4] / h**2
            H[a, :, 1, 0], H[a, :, 1, 1] = d[4] / h**2, d[5] / h**2
        return v, g, H

    def _boundary_flux(self, values):
        """Sum quadrature ``values`` (q, k) into cells."""
        out = np.zeros((self.n_active, values.shape[1]), values.dtype)
        for c in range(values.shape[1]):
            col = values[:, c]
            if np.iscomplexobj(col):
                out[:, c] = (np.bincount(self.bq_cells, col.real, self.n_active)
                             + 1j * np.bincount(self.bq_cells, col.imag, self.n_active))
            else:
                out[:, c] = np.bincount(self.bq_cells, col, self.n_active)
        return out

    # -- Neumann ---------------------------------------------------------------

    @functools.cached_property
    def _neumann_lu(self):
        v = sp.csc_matrix(self.volumes[:, None])
        A = sp.bmat([[self.laplacian, v], [v.T, None]], format="csc")
        return splu(A)

    def _log_integral(self, xi):
        """``int_Omega log|x - xi| dx`` as a boundary integral."""
        d = self.bq_points - xi
        r2 = np.sum(d * d, axis=1)
        grad = d * (0.25 * np.log(r2) - 0.25)[:, None]
        return float(np.sum(grad * self.bq_wn))

    def neumann_fields(self, XI):
        """Regular-remainder fields for the sources ``XI``, shape (n_cells, n)."""
        XI = np.atleast_2d(np.asarray(XI, float))
        n = self.n_active
        rhs = np.empty((n + 1, len(XI)))
        for c, xi in enumerate(XI):
            d = self.bq_points - xi
            r2 = np.sum(d * d, axis=1)
            # -dn G_free = (1/2pi) (x - xi).n / r^2
            g = np.sum(d * self.bq_wn, axis=1) / (TWO_PI * r2)
            rhs[:n, c] = self.volumes / self.area - self._boundary_flux(g[:, None])[:, 0]
            rhs[n, c] = self._log_integral(xi) / TWO_PI
        return self._neumann_lu.solve(rhs)[:n]

    def neumann_regular_pairs(self, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        fields = self.neumann_fields(XI)
        return self._evaluate(fields, X)

    # -- Helmholtz -------------------------------------------------------------

    def _helmholtz_lu(self, mu):
        key = complex(mu)
        lu = self._lu_cache.get(key)
        if lu is None:
            A = (self.laplacian - key * sp.diags(self.volumes)).astype(complex).tocsc()
            lu = splu(A)
            if len(self._lu_cache) >= 8:
                self._lu_cache.pop(next(iter(self._lu_cache)))
            self._lu_cache[key] = lu
        return lu

    def helmholtz_fields(self, mu, XI):
        """Fields ``W``, ``d W/d xi_1``, ``d W/d xi_2`` for each source: (n_cells, n, 3)."""
        XI = np.atleast_2d(np.asarray(XI, float))
        n = self.n_active
        q = len(self.bq_points)
        g = np.empty((q, 3 * len(XI)), complex)
        for c, xi in enumerate(XI):
            d = self.bq_points - xi
            _, grad, hess = free_helmholtz_many(mu, d)
            g[:, 3 * c] = -np.sum(grad * self.bq_wn, axis=1)
            # d/dxi of -grad G_free(x - xi).n = +Hess.n
            g[:, 3 * c + 1:3 * c + 3] = np.einsum("qlk,qk->ql", hess, self.bq_wn)
        rhs = -self._boundary_flux(g)
        sol = self._helmholtz_lu(mu).solve(rhs)
        return sol.reshape(n, len(XI), 3)

    def helmholtz_regular_pairs(self, mu, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        fields = self.helmholtz_fields(mu, XI)
        m, n = len(X), len(XI)
        v, g, H = self._evaluate(fields.reshape(self.n_active, 3 * n), X)
        v = v.reshape(m, n, 3)
        g = g.reshape(m, n, 3, 2)
        H = H.reshape(m, n, 3, 2, 2)
        value = v[:, :, 0]
        dx = g[:, :, 0]
        dxi = v[:, :, 1:]
        dxx = H[:, :, 0]
        dxidx = g[:, :, 1:, :]
        return value, dx, dxi, dxx, dxidx
