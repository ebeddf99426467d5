"""Cech-de Rham double complex over a box cover, with both retractions.

Every piece (an l-fold cover intersection) samples the parent domain's
lattice: a piece is an index range per axis plus a ghost margin, so
restriction between nested pieces is index selection, never interpolation.
That makes d'' o d'' = 0 and the partition-of-unity contraction identity
P d'' + d'' P = Id exact up to float associativity, while the per-piece
Poincare retraction H carries the quadrature/grid tolerance.

The two staircases convert between closed global forms and nerve cocycles:
descending alternates H and d'' from bidegree (k, 0) down to (0, k) where
piecewise means give the simplicial cocycle; ascending alternates P and d'
from (0, k) up to (k, 0) and glues through the partition of unity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from orliczlab.orlicz import InputError, MeasureSpace, YoungFunction, luxemburg_values
from orliczlab.simplicial import Cochain, SimplicialComplex, coboundary
from orliczlab.forms import (
    ChartedDomain,
    DiscreteForm,
    exterior_derivative,
    form_components,
    poincare_homotopy,
    sup_norm,
    zero_form,
)


class CoverageError(RuntimeError):
    """Cover does not resolve the domain (empty piece, uncovered sample)."""


# ---------------------------------------------------------------------------
# Pieces: lattice index ranges with ghost margins


@dataclass
class Piece:
    """Index-range window onto the parent lattice, with ghost padding."""

    domain: ChartedDomain
    core_start: tuple
    core_count: tuple
    ghost: int = 6

    def __post_init__(self):
        ext_start, ext_count = [], []
        for ax in range(self.domain.n):
            nx = self.domain.shape[ax]
            if self.core_count[ax] < 2:
                raise CoverageError("piece has fewer than two samples along an axis")
            if self.domain.periodic[ax]:
                if self.core_count[ax] + 2 * self.ghost > nx:
                    start = 0
                    count = nx
                else:
                    start = self.core_start[ax] - self.ghost
                    count = self.core_count[ax] + 2 * self.ghost
            else:
                start = max(0, self.core_start[ax] - self.ghost)
                end = min(nx, self.core_start[ax] + self.core_count[ax] + self.ghost)
                count = end - start
            ext_start.append(start)
            ext_count.append(count)
        self.ext_start = tuple(ext_start)
        self.ext_count = tuple(ext_count)

    @property
    def shape(self) -> tuple:
        return self.ext_count

    def core_slices(self) -> tuple:
        return tuple(
            slice(cs - es, cs - es + cc)
            for cs, cc, es in zip(self.core_start, self.core_count, self.ext_start)
        )

    def axes(self) -> list:
        """Unwrapped physical coordinates of the extended window."""
        out = []
        for ax in range(self.domain.n):
            h = self.domain.spacing[ax]
            x0 = self.domain.axes[ax][0]
            idx = self.ext_start[ax] + np.arange(self.ext_count[ax])
            out.append(x0 + idx * h)
        return out

    def gather(self, global_array: np.ndarray) -> np.ndarray:
        """Values of a global lattice array on the extended window (wrapping)."""
        out = global_array
        for ax in range(self.domain.n):
            idx = self.ext_start[ax] + np.arange(self.ext_count[ax])
            if self.domain.periodic[ax]:
                idx = idx % self.domain.shape[ax]
            out = np.take(out, idx, axis=ax)
        return out

    def scatter_add(self, global_array: np.ndarray, values: np.ndarray) -> None:
        """Add extended-window values into a global accumulator (wrapping)."""
        idx_lists = []
        for ax in range(self.domain.n):
            idx = self.ext_start[ax] + np.arange(self.ext_count[ax])
            if self.domain.periodic[ax]:
                idx = idx % self.domain.shape[ax]
            idx_lists.append(idx)
        global_array[np.ix_(*idx_lists)] += values

    def offset_of(self, sub: "Piece") -> tuple:
        """Index offsets of sub's extended window inside this one."""
        offs = []
        for ax in range(self.domain.n):
            nx = self.domain.shape[ax]
            o = sub.ext_start[ax] - self.ext_start[ax]
            if self.domain.periodic[ax]:
                o %= nx
            if o < 0 or o + sub.ext_count[ax] > self.ext_count[ax]:
                raise CoverageError("piece is not nested inside its parent window")
            offs.append(o)
        return tuple(offs)

    def box_domain(self) -> ChartedDomain:
        """Flat box chart on the extended window (for the local retraction)."""
        return ChartedDomain("box", self.axes(),
                             tuple(False for _ in range(self.domain.n)),
                             np.ones(self.shape, dtype=bool))

    def chart_lipschitz(self) -> float:
        """Bi-Lipschitz constant of the affine normalization onto [-1, 1]^n."""
        half = [0.5 * c * h for c, h in zip(self.core_count, self.domain.spacing)]
        scales = [1.0 / hw for hw in half]
        return float(max(max(scales), max(half)))


def restrict(values: np.ndarray, source: Piece, target: Piece) -> np.ndarray:
    """Exact restriction: slice the source window at the target's offsets."""
    offs = source.offset_of(target)
    sl = tuple(slice(o, o + c) for o, c in zip(offs, target.ext_count))
    return values[sl]


def piece_exterior_derivative(piece: Piece, k: int, values: np.ndarray) -> np.ndarray:
    """Finite-difference d on the window (centered; one-sided at window edges)."""
    form = DiscreteForm(piece.box_domain(), k, values)
    return exterior_derivative(form).coeffs


# ---------------------------------------------------------------------------
# Cover and nerve


def _interval_index_range(domain: ChartedDomain, ax: int, lo: float, hi: float):
    """Lattice indices (possibly unwrapped past the period) inside (lo, hi)."""
    h = domain.spacing[ax]
    x0 = domain.axes[ax][0]
    start = math.ceil((lo - x0) / h - 0.5 + 1e-12)
    end = math.floor((hi - x0) / h - 0.5 - 1e-12)
    return start, end - start + 1


def _intersect_ranges(domain: ChartedDomain, ax: int, r1, r2):
    """Intersection of two index arcs; None when empty, error when split."""
    nx = domain.shape[ax]
    s1, c1 = r1
    s2, c2 = r2
    if not domain.periodic[ax]:
        lo, hi = max(s1, s2), min(s1 + c1, s2 + c2)
        return (lo, hi - lo) if hi > lo else None
    hits = []
    for m in (-1, 0, 1):
        s2m = s2 + m * nx
        lo, hi = max(s1, s2m), min(s1 + c1, s2m + c2)
        if hi > lo:
            hits.append((lo % nx, hi - lo))
    if not hits:
        return None
    if len({(s % nx, c) for s, c in hits}) > 1:
        raise CoverageError("cover boxes intersect in more than one arc; shrink them")
    return hits[0]


@dataclass
class CoverNerve:
    """Box cover of a charted domain with its nerve and partition of unity."""

    domain: ChartedDomain
    boxes: list                       # per box: [(lo, hi)] per axis
    pieces: dict = field(default_factory=dict)   # tuple -> Piece
    nerve: SimplicialComplex | None = None
    partition: np.ndarray | None = None          # (n_boxes,) + grid
    ghost: int = 6
    fully_covered: bool = True

    def tuples(self, ell: int) -> list:
        return [T for T in self.pieces if len(T) == ell + 1]

    def max_level(self) -> int:
        return max(len(T) for T in self.pieces) - 1

    def piece_weights(self, T) -> np.ndarray:
        """Riemannian cell volumes on the piece core (flat charts)."""
        piece = self.pieces[T]
        w = np.zeros(piece.shape)
        w[piece.core_slices()] = self.domain.cell_volume()
        return w

    def partition_on(self, T, box_index: int) -> np.ndarray:
        return self.pieces[T].gather(self.partition[box_index])


def build_cover_nerve(domain: ChartedDomain, grid=None, overlap: float = 0.3,
                      boxes: list | None = None, max_depth: int | None = None,
                      ghost: int = 6) -> CoverNerve:
    """Nerve of an overlapping box cover from sample-set intersections.

    Either pass explicit boxes ([(lo, hi)] per axis each) or a per-axis grid
    count with a fractional overlap; pieces with fewer than two samples per
    axis raise CoverageError (resolution too coarse for the cover).
    """
    n = domain.n
    if boxes is None:
        if grid is None:
            raise InputError("need either boxes or a grid spec")
        if isinstance(grid, int):
            grid = [grid] * n
        boxes = []
        spans = []
        for ax in range(n):
            lo = domain.axes[ax][0] - 0.5 * domain.spacing[ax]
            hi = domain.axes[ax][-1] + 0.5 * domain.spacing[ax]
            spans.append((lo, hi))
        for combo in itertools.product(*[range(m) for m in grid]):
            box = []
            for ax, j in enumerate(combo):
                lo, hi = spans[ax]
                w0 = (hi - lo) / grid[ax]
                delta = 0.5 * overlap * w0
                if domain.periodic[ax]:
                    box.append((lo + j * w0 - delta, lo + (j + 1) * w0 + delta))
                else:
                    box.append((max(lo, lo + j * w0 - delta),
                                min(hi, lo + (j + 1) * w0 + delta)))
            boxes.append(box)
    n_boxes = len(boxes)
    max_depth = max_depth if max_depth is not None else n + 2
    ranges = {}
    for b, box in enumerate(boxes):
        rr = []
        for ax, (lo, hi) in enumerate(box):
            r = _interval_index_range(domain, ax, lo, hi)
            if r[1] < 2:
                raise CoverageError(f"cover box {b} has fewer than two samples on axis {ax}")
            rr.append(r)
        ranges[(b,)] = rr
    # extend tuples level by level through range intersections
    level = [(b,) for b in range(n_boxes)]
    all_tuples = dict(ranges)
    for ell in range(1, max_depth + 1):
        nxt = []
        for T in level:
            for b in range(T[-1] + 1, n_boxes):
                base = all_tuples.get(T)
                single = all_tuples[(b,)]
                inter = []
                ok = True
                for ax in range(n):
                    r = _intersect_ranges(domain, ax, base[ax], single[ax])
                    if r is None or r[1] < 2:
                        ok = False
                        break
                    inter.append(r)
                if ok:
                    newT = T + (b,)
                    all_tuples[newT] = inter
                    nxt.append(newT)
        if not nxt:
            break
        level = nxt
    pieces = {}
    for T, rr in all_tuples.items():
        start = tuple((r[0] % domain.shape[ax]) if domain.periodic[ax] else r[0]
                      for ax, r in enumerate(rr))
        count = tuple(r[1] for r in rr)
        pieces[T] = Piece(domain, start, count, ghost)
    simps: dict = {}
    for T in pieces:
        simps.setdefault(len(T) - 1, []).append(T)
    nerve = SimplicialComplex(simps)
    # smooth partition of unity from per-box bumps, normalized on the lattice
    pts = domain.points()
    raw = np.zeros((n_boxes,) + domain.shape)
    for b, box in enumerate(boxes):
        bump = np.ones(domain.shape)
        for ax, (lo, hi) in enumerate(box):
            c, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            dx = pts[..., ax] - c
            if domain.periodic[ax]:
                period = domain.shape[ax] * domain.spacing[ax]
                dx = (dx + 0.5 * period) % period - 0.5 * period
            s = dx / half
            bump *= np.where(np.abs(s) < 1, np.exp(-1.0 / np.maximum(1 - s ** 2, 1e-300)), 0.0)
        raw[b] = bump
    total = raw.sum(axis=0)
    covered = total > 0
    partition = np.where(covered, raw / np.where(covered, total, 1.0), 0.0)
    out = CoverNerve(domain, boxes, pieces, nerve, partition, ghost)
    out.fully_covered = bool(covered[domain.inside].all())
    return out


# ---------------------------------------------------------------------------
# Bicomplex elements


@dataclass
class BicomplexElement:
    """For fixed (k, l): a discrete k-form on every l-fold intersection."""

    cover: CoverNerve
    k: int
    ell: int
    parts: dict   # tuple -> ndarray on the piece's extended window + (ncomp,)

    def copy(self) -> "BicomplexElement":
        return BicomplexElement(self.cover, self.k, self.ell,
                                {T: v.copy() for T, v in self.parts.items()})

    def __add__(self, other):
        return BicomplexElement(self.cover, self.k, self.ell,
                                {T: self.parts[T] + other.parts[T] for T in self.parts})

    def __sub__(self, other):
        return BicomplexElement(self.cover, self.k, self.ell,
                                {T: self.parts[T] - other.parts[T] for T in self.parts})

    def scale(self, s: float):
        return BicomplexElement(self.cover, self.k, self.ell,
                                {T: s * v for T, v in self.parts.items()})

    def sup(self) -> float:
        """Max coefficient magnitude over the piece cores."""
        out = 0.0
        for T, v in self.parts.items():
            core = self.cover.pieces[T].core_slices()
            if v[core].size:
                out = max(out, float(np.abs(v[core]).max()))
        return out

    def piece_norms(self, phi: YoungFunction) -> np.ndarray:
        """L^phi norm of every piece over its core (the theta cochain)."""
        out = np.zeros(len(self.parts))
        n = self.cover.domain.n
        for i, T in enumerate(sorted(self.parts)):
            piece = self.cover.pieces[T]
            v = self.parts[T][piece.core_slices()]
            if self.k == 0:
                ptw = np.abs(v[..., 0])
            elif self.k == n:
                ptw = np.abs(v[..., 0])
            else:
                ptw = np.linalg.norm(v, axis=-1)
            w = np.full(ptw.shape, self.cover.domain.cell_volume())
            if ptw.any():
                val, _, _ = luxemburg_values(phi, ptw.ravel(), w.ravel())
                out[i] = float(val)
        return out

    def lphi_norm(self, phi: YoungFunction) -> dict:
        """|.|_{L^phi} bookkeeping: piece norms, their ell^phi norm, and the
        same for the derivative part."""
        theta = self.piece_norms(phi)
        de = d_prime(self)
        theta_d = de.piece_norms(phi)
        n1, _, _ = luxemburg_values(phi, theta, np.ones(len(theta))) if len(theta) else (0.0, 0, None)
        n2, _, _ = luxemburg_values(phi, theta_d, np.ones(len(theta_d))) if len(theta_d) else (0.0, 0, None)
        return {"piece_norms": theta, "ellphi": float(n1),
                "piece_norms_d": theta_d, "ellphi_d": float(n2),
                "total": float(n1) + float(n2)}


def zero_element(cover: CoverNerve, k: int, ell: int) -> BicomplexElement:
    ncomp = len(form_components(cover.domain.n, k))
    parts = {T: np.zeros(cover.pieces[T].shape + (ncomp,)) for T in cover.tuples(ell)}
    return BicomplexElement(cover, k, ell, parts)


def restrict_global(cover: CoverNerve, form: DiscreteForm) -> BicomplexElement:
    """Bidegree (k, 0) element from a global form: gather per cover box."""
    parts = {}
    for T in cover.tuples(0):
        piece = cover.pieces[T]
        parts[T] = np.stack([piece.gather(form.coeffs[..., c])
                             for c in range(form.coeffs.shape[-1])], axis=-1)
    return BicomplexElement(cover, form.degree, 0, parts)


def element_from_cochain(cover: CoverNerve, theta: Cochain) -> BicomplexElement:
    """Bidegree (0, k) element of piecewise constants from a nerve cochain."""
    ell = theta.degree
    parts = {}
    for T in cover.tuples(ell):
        idx = cover.nerve.index[ell][T]
        parts[T] = np.full(cover.pieces[T].shape + (1,), theta.values[idx])
    return BicomplexElement(cover, 0, ell, parts)


# ---------------------------------------------------------------------------
# The two differentials


def d_prime(e: BicomplexElement) -> BicomplexElement:
    """(d' e)_U = (-1)^ell d e_U, finite differences on each window."""
    sign = (-1) ** e.ell
    parts = {}
    for T, v in e.parts.items():
        parts[T] = sign * piece_exterior_derivative(e.cover.pieces[T], e.k, v)
    return BicomplexElement(e.cover, min(e.k + 1, e.cover.domain.n), e.ell, parts)


def d_double_prime(e: BicomplexElement) -> BicomplexElement:
    """Alternating sum of one-hop restrictions onto each deeper intersection."""
    cover = e.cover
    out = {}
    for T in cover.tuples(e.ell + 1):
        target = cover.pieces[T]
        acc = None
        for j in range(len(T)):
            face = T[:j] + T[j + 1:]
            if face not in e.parts:
                raise CoverageError(f"face piece {face} missing below {T}")
            term = restrict(e.parts[face], cover.pieces[face], target)
            acc = (-1) ** j * term if acc is None else acc + (-1) ** j * term
        out[T] = acc
    return BicomplexElement(cover, e.k, e.ell + 1, out)


# ---------------------------------------------------------------------------
# Retraction H (per-piece Poincare homotopy) and contraction P


def local_retraction_H(e: BicomplexElement, t_nodes: int = 24, per_axis: int = 4):
    """(H e)_U = (-1)^ell h(e_U) through the affine chart of each window.

    For k >= 1 returns the (k-1, ell) element; for k = 0 returns the nerve
    cochain of piecewise means (the Ker d' identification).
    """
    cover = e.cover
    sign = (-1) ** e.ell
    if e.k == 0:
        # unsigned mean extraction: the Ker d' pieces are constants and the
        # plain identification intertwines d'' with the nerve coboundary
        vals = np.zeros(cover.nerve.n_simplices(e.ell))
        for T, v in e.parts.items():
            piece = cover.pieces[T]
            core = v[piece.core_slices() + (0,)]
            vals[cover.nerve.index[e.ell][T]] = float(core.mean())
        return Cochain(cover.nerve, e.ell, vals)
    parts = {}
    for T, v in e.parts.items():
        piece = cover.pieces[T]
        form = DiscreteForm(piece.box_domain(), e.k, v)
        h = poincare_homotopy(form, t_nodes=t_nodes, per_axis=per_axis)
        parts[T] = sign * h.coeffs
    return BicomplexElement(cover, e.k - 1, e.ell, parts)


def cech_contraction_P(e: BicomplexElement):
    """(P e)_V = sum_U eta_U e_{U cap V} with extension by zero.

    For ell >= 1 returns the (k, ell-1) element; for ell = 0 glues to a
    global discrete form (the Ker d'' identification).
    """
    cover = e.cover
    if not cover.fully_covered:
        raise CoverageError("partition of unity needs the cover to span the domain")
    n_boxes = len(cover.boxes)
    ncomp = e.parts[next(iter(e.parts))].shape[-1]
    if e.ell == 0:
        out = np.zeros(cover.domain.shape + (ncomp,))
        for (b,), v in e.parts.items():
            piece = cover.pieces[(b,)]
            eta = piece.gather(cover.partition[b])
            for c in range(ncomp):
                contrib = np.zeros(cover.domain.shape)
                piece.scatter_add(contrib, eta * v[..., c])
                out[..., c] += contrib
        return DiscreteForm(cover.domain, e.k, out)
    parts = {}
    for T in cover.tuples(e.ell - 1):
        target = cover.pieces[T]
        acc = np.zeros(target.shape + (ncomp,))
        for b in range(n_boxes):
            if b in T:
                continue
            joined = tuple(sorted(T + (b,)))
            if joined not in e.parts:
                continue
            pos = joined.index(b)
            sign = (-1) ** pos
            eta = cover.partition_on(T, b)
            src_piece = cover.pieces[joined]
            src = e.parts[joined]
            # paste the source window into the target window, zero elsewhere
            pasted = np.zeros(target.shape + (ncomp,))
            offs = _overlap_paste(target, src_piece, src, pasted)
            acc += sign * eta[..., None] * pasted
        parts[T] = acc
    return BicomplexElement(cover, e.k, e.ell - 1, parts)


def _overlap_paste(target: Piece, source: Piece, values: np.ndarray,
                   out: np.ndarray) -> None:
    """Copy source-window values into the overlapping part of the target window."""
    dom = target.domain
    t_sl, s_sl = [], []
    for ax in range(dom.n):
        nx = dom.shape[ax]
        o = source.ext_start[ax] - target.ext_start[ax]
        if dom.periodic[ax]:
            o = ((o + nx // 2) % nx) - nx // 2
        lo = max(0, o)
        hi = min(target.ext_count[ax], o + source.ext_count[ax])
        if hi <= lo:
            return
        t_sl.append(slice(lo, hi))
        s_sl.append(slice(lo - o, hi - o))
    out[tuple(t_sl)] = values[tuple(s_sl)]


# ---------------------------------------------------------------------------
# Weil staircases


def zigzag_to_simplicial(cover: CoverNerve, form: DiscreteForm,
                         phi: YoungFunction | None = None, tol: float = 1e-2,
                         t_nodes: int = 24, per_axis: int = 4):
    """Closed global k-form -> nerve k-cocycle, descending H then d'' k times.

    Returns (cochain, report dict with per-stage norms and residuals).
    """
    k = form.degree
    d_resid = sup_norm(exterior_derivative(form), form.domain.core(2))
    scale = max(sup_norm(form), 1e-30)
    if d_resid > tol * max(scale, 1.0):
        raise InputError(f"input form is not closed: |d omega| = {d_resid:.3e}")
    phi = phi or YoungFunction.power(2)
    e = restrict_global(cover, form)
    stages = []
    for j in range(k):
        a = local_retraction_H(e, t_nodes=t_nodes, per_axis=per_axis)
        if isinstance(a, Cochain):
            raise InputError("degree bookkeeping hit the nerve early")
        e = d_double_prime(a)
        stages.append({"bidegree": (e.k, e.ell), "norms": e.lphi_norm(phi)})
    theta = local_retraction_H(e, t_nodes=t_nodes, per_axis=per_axis)
    delta_res = float(np.abs(coboundary(cover.nerve, theta).values).max()) \
        if cover.nerve.n_simplices(k + 1) else 0.0
    # non-constancy of the final pieces bounds the mean extraction error
    flat_res = 0.0
    for T, v in e.parts.items():
        piece = cover.pieces[T]
        core = v[piece.core_slices() + (0,)]
        flat_res = max(flat_res, float(core.max() - core.min()))
    report = {"stages": stages, "delta_residual": delta_res,
              "constancy_residual": flat_res, "d_input_residual": d_resid}
    return theta, report


def zigzag_to_form(cover: CoverNerve, theta: Cochain,
                   phi: YoungFunction | None = None, tol: float = 1e-8,
                   t_nodes: int = 24, per_axis: int = 4):
    """Nerve k-cocycle -> closed global k-form, ascending P then d' k times."""
    k = theta.degree
    dtheta = coboundary(cover.nerve, theta)
    if dtheta.values.size and np.abs(dtheta.values).max() > tol * max(1.0, np.abs(theta.values).max()):
        raise InputError("input cochain is not a cocycle")
    phi = phi or YoungFunction.power(2)
    e = element_from_cochain(cover, theta)
    stages = []
    for j in range(k):
        a = cech_contraction_P(e)
        e = d_prime(a)
        stages.append({"bidegree": (e.k, e.ell), "norms": e.lphi_norm(phi)})
    glued = cech_contraction_P(e)
    d_res = sup_norm(exterior_derivative(glued), cover.domain.core(2))
    report = {"stages": stages, "d_residual": d_res}
    return glued, report


# ---------------------------------------------------------------------------
# Periods (flat torus)


def torus_periods(form: DiscreteForm) -> np.ndarray:
    """Integrals of a 1-form along the two coordinate circles of a flat torus."""
    dom = form.domain
    if dom.kind != "torus" or dom.n != 2 or form.degree != 1:
        raise InputError("periods are computed for 1-forms on the flat torus")
    hx, hy = dom.spacing
    mid = [s // 2 for s in dom.shape]
    px = float(form.coeffs[:, mid[1], 0].sum() * hx)
    py = float(form.coeffs[mid[0], :, 1].sum() * hy)
    return np.array([px, py])
