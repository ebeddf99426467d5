"""Discretized differential forms on charted domains.

Coefficients live on full tensor lattices (one value per lattice node and
per sorted coordinate k-subset); an ``inside`` mask cuts the ball model out
of its bounding box.  The exterior derivative is centered finite differences
(wrapping on periodic axes), the pointwise operator norm is exact in the
extreme degrees and frame-sampled in between, and the cone/averaged Poincare
homotopy realizes the contraction of star-shaped domains.

Grid hygiene: finite differences fall back to one-sided stencils on lattice
edges and values outside the ``inside`` mask are extensions, so residual
checks evaluate on the eroded ``core`` region that keeps every stencil and
interpolation read clean.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi
from scipy.integrate import quad

from orliczlab.orlicz import (
    InputError,
    MeasureSpace,
    YoungFunction,
    luxemburg_norm,
    luxemburg_values,
)


class RegionError(RuntimeError):
    """An operation needed samples outside the charted region."""


# ---------------------------------------------------------------------------
# Charted domains


@dataclass
class ChartedDomain:
    """Tensor lattice with metric data.

    metric_kind 'flat' means g = identity; 'conformal' means g = lambda^2 * I
    with the scale stored per lattice node (the half-plane model uses
    lambda = 1/y).  Volume weights are cell volume * lambda^n.
    """

    kind: str
    axes: list
    periodic: tuple
    inside: np.ndarray
    metric_kind: str = "flat"
    conformal_scale: np.ndarray | None = None

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.spacing = np.array([a[1] - a[0] for a in self.axes])
        self.shape = tuple(len(a) for a in self.axes)
        if self.inside is None:
            self.inside = np.ones(self.shape, dtype=bool)

    @property
    def n(self) -> int:
        return len(self.axes)

    def points(self) -> np.ndarray:
        """Lattice nodes, shape grid + (n,)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def scale(self) -> np.ndarray:
        if self.metric_kind == "flat" or self.conformal_scale is None:
            return np.ones(self.shape)
        return self.conformal_scale

    def volume_weights(self) -> np.ndarray:
        """Riemannian cell volumes (zero outside the region)."""
        w = self.cell_volume() * self.scale() ** self.n
        return np.where(self.inside, w, 0.0)

    def core(self, margin: int = 2) -> np.ndarray:
        """inside eroded so centered stencils and interpolation stay clean."""
        mask = self.inside.copy()
        for _ in range(margin):
            eroded = mask.copy()
            for ax in range(self.n):
                if self.periodic[ax]:
                    eroded &= np.roll(mask, 1, axis=ax) & np.roll(mask, -1, axis=ax)
                else:
                    inner = mask.copy()
                    sl_lo = [slice(None)] * self.n
                    sl_hi = [slice(None)] * self.n
                    sl_lo[ax] = slice(0, 1)
                    sl_hi[ax] = slice(-1, None)
                    inner[tuple(sl_lo)] = False
                    inner[tuple(sl_hi)] = False
                    shift_up = np.roll(mask, 1, axis=ax)
                    shift_dn = np.roll(mask, -1, axis=ax)
                    eroded &= inner & shift_up & shift_dn
            mask = eroded
        return mask

    def radial_mask(self, rmax: float) -> np.ndarray:
        pts = self.points()
        return (np.linalg.norm(pts, axis=-1) <= rmax) & self.inside

    def index_coords(self, points: np.ndarray) -> np.ndarray:
        """Map physical points, shape (..., n), to fractional lattice indices."""
        out = np.empty_like(points)
        for ax in range(self.n):
            out[..., ax] = (points[..., ax] - self.axes[ax][0]) / self.spacing[ax]
        return out

    def to_json(self) -> dict:
        return {"kind": self.kind, "shape": list(self.shape),
                "origin": [float(a[0]) for a in self.axes],
                "spacing": [float(s) for s in self.spacing],
                "periodic": list(self.periodic)}


def euclidean_box(corners, n_points) -> ChartedDomain:
    """Axis-aligned box; corners = [(lo, hi)] per axis, cell-centered nodes."""
    corners = [tuple(c) for c in corners]
    if isinstance(n_points, int):
        n_points = [n_points] * len(corners)
    axes = []
    for (lo, hi), m in zip(corners, n_points):
        h = (hi - lo) / m
        axes.append(lo + h * (np.arange(m) + 0.5))
    shape = tuple(n_points)
    return ChartedDomain("box", axes, tuple(False for _ in corners),
                         np.ones(shape, dtype=bool))


def unit_ball(n_points: int, n: int = 2) -> ChartedDomain:
    dom = euclidean_box([(-1.0, 1.0)] * n, n_points)
    pts = dom.points()
    dom.kind = "ball"
    dom.inside = np.linalg.norm(pts, axis=-1) < 1.0
    return dom


def flat_torus(n_points: int, n: int = 2) -> ChartedDomain:
    axes = [np.arange(m) / m for m in ([n_points] * n if isinstance(n_points, int) else n_points)]
    shape = tuple(len(a) for a in axes)
    return ChartedDomain("torus", axes, tuple(True for _ in axes),
                         np.ones(shape, dtype=bool))


def half_plane(x_range, y_range, n_points) -> ChartedDomain:
    """Hyperbolic half-plane piece: g = (dx^2 + dy^2)/y^2, volume dx dy / y^2."""
    if y_range[0] <= 0:
        raise InputError("half-plane requires y > 0")
    dom = euclidean_box([x_range, y_range], n_points)
    dom.kind = "halfplane"
    dom.metric_kind = "conformal"
    dom.conformal_scale = 1.0 / dom.points()[..., 1]
    return dom


# ---------------------------------------------------------------------------
# Discrete forms


def form_components(n: int, k: int) -> list:
    return list(itertools.combinations(range(n), k))


@dataclass
class DiscreteForm:
    """k-form as per-node coefficients in the sorted coordinate basis."""

    domain: ChartedDomain
    degree: int
    coeffs: np.ndarray   # shape grid + (ncomp,)
    valid: np.ndarray | None = None   # region where values are trustworthy

    def __post_init__(self):
        ncomp = len(form_components(self.domain.n, self.degree))
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = self.domain.shape + (ncomp,)
        if self.coeffs.shape != expected:
            raise InputError(f"coefficients must have shape {expected}")
        if self.valid is None:
            self.valid = self.domain.inside.copy()

    @property
    def components(self) -> list:
        return form_components(self.domain.n, self.degree)

    def copy(self) -> "DiscreteForm":
        return DiscreteForm(self.domain, self.degree, self.coeffs.copy(), self.valid.copy())

    def __add__(self, other):
        return DiscreteForm(self.domain, self.degree, self.coeffs + other.coeffs,
                            self.valid & other.valid)

    def __sub__(self, other):
        return DiscreteForm(self.domain, self.degree, self.coeffs - other.coeffs,
                            self.valid & other.valid)

    def scale(self, s: float) -> "DiscreteForm":
        return DiscreteForm(self.domain, self.degree, s * self.coeffs, self.valid.copy())

    def to_json(self) -> dict:
        return {"domain": self.domain.to_json(), "degree": self.degree,
                "coefficients": self.coeffs.ravel().tolist()}


def form_from_function(domain: ChartedDomain, degree: int, fn) -> DiscreteForm:
    """Sample fn(points) -> coefficients of shape grid + (ncomp,)."""
    vals = np.asarray(fn(domain.points()), dtype=float)
    ncomp = len(form_components(domain.n, degree))
    if vals.shape == domain.shape and ncomp == 1:
        vals = vals[..., None]
    return DiscreteForm(domain, degree, vals, domain.inside.copy())


def zero_form(domain: ChartedDomain, degree: int) -> DiscreteForm:
    ncomp = len(form_components(domain.n, degree))
    return DiscreteForm(domain, degree, np.zeros(domain.shape + (ncomp,)))


# ---------------------------------------------------------------------------
# Finite differences and the exterior derivative


def _partial(domain: ChartedDomain, values: np.ndarray, axis: int) -> np.ndarray:
    """Second-order partial along one axis; wraps on periodic axes."""
    h = domain.spacing[axis]
    if domain.periodic[axis]:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)
    out = np.empty_like(values)
    sl = [slice(None)] * values.ndim

    def at(idx):
        s = list(sl)
        s[axis] = idx
        return tuple(s)

    out[at(slice(1, -1))] = (values[at(slice(2, None))] - values[at(slice(0, -2))]) / (2 * h)
    # one-sided 3-point stencils on the lattice edges
    out[at(0)] = (-3 * values[at(0)] + 4 * values[at(1)] - values[at(2)]) / (2 * h)
    out[at(-1)] = (3 * values[at(-1)] - 4 * values[at(-2)] + values[at(-3)]) / (2 * h)
    return out


def exterior_derivative(form: DiscreteForm) -> DiscreteForm:
    """Centered-difference d with alternating signs; zero form in top degree."""
    dom, k, n = form.domain, form.degree, form.domain.n
    if k >= n:
        return zero_form(dom, n)
    comps_in = form.components
    comps_out = form_components(n, k + 1)
    idx_in = {c: i for i, c in enumerate(comps_in)}
    out = np.zeros(dom.shape + (len(comps_out),))
    for j, J in enumerate(comps_out):
        for pos, axis in enumerate(J):
            rest = J[:pos] + J[pos + 1:]
            out[..., j] += (-1) ** pos * _partial(dom, form.coeffs[..., idx_in[rest]], axis)
    return DiscreteForm(dom, k + 1, out, form.valid.copy())


# ---------------------------------------------------------------------------
# Interpolation of forms at off-lattice points


def _fill_outside(domain: ChartedDomain, values: np.ndarray) -> np.ndarray:
    """Replace values outside the region by their nearest inside value."""
    if domain.inside.all():
        return values
    idx = ndi.distance_transform_edt(~domain.inside, return_distances=False,
                                     return_indices=True)
    return values[tuple(idx)]


class FormInterpolator:
    """Cubic (or linear) tensor-spline sampler with cached prefilters."""

    def __init__(self, form: DiscreteForm, order: int = 3):
        self.domain = form.domain
        self.order = order
        self.mode = "grid-wrap" if all(form.domain.periodic) else "nearest"
        self.filtered = []
        for c in range(form.coeffs.shape[-1]):
            comp = _fill_outside(form.domain, form.coeffs[..., c])
            if order > 1:
                comp = ndi.spline_filter(comp, order=order, mode=self.mode)
            self.filtered.append(comp)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """points (..., n) -> coefficients (..., ncomp)."""
        idx = self.domain.index_coords(points)
        coords = np.moveaxis(idx, -1, 0).reshape(self.domain.n, -1)
        outs = [
            ndi.map_coordinates(f, coords, order=self.order, prefilter=False,
                                mode=self.mode)
            for f in self.filtered
        ]
        out = np.stack(outs, axis=-1)
        return out.reshape(points.shape[:-1] + (len(self.filtered),))


# ---------------------------------------------------------------------------
# Pointwise operator norm and integral norms


def pointwise_norm(form: DiscreteForm) -> np.ndarray:
    """sup of |omega(v_1 .. v_k)| over unit frames of the metric, per node.

    Exact for degrees 0, 1, n-1 and n; for middle degrees (n >= 4) the
    supremum is sampled over random orthonormal frames with local refinement.
    """
    dom, k, n = form.domain, form.degree, form.domain.n
    lam = dom.scale()
    if k == 0:
        return np.abs(form.coeffs[..., 0])
    if k == n:
        return np.abs(form.coeffs[..., 0]) / lam ** n
    if k == 1:
        euclid = np.linalg.norm(form.coeffs, axis=-1)
        return euclid / lam
    if k == n - 1:
        # dual vector: comass of a contraction of the volume form
        euclid = np.linalg.norm(form.coeffs, axis=-1)
        return euclid / lam ** (n - 1)
    return _sampled_comass(form) / lam ** k


def _sampled_comass(form: DiscreteForm, n_frames: int = 10000, seed: int = 0,
                    refine: int = 200) -> np.ndarray:
    """Euclidean comass by maximizing over random orthonormal k-frames."""
    rng = np.random.default_rng(seed)
    n, k = form.domain.n, form.degree
    comps = form.components
    flat = form.coeffs.reshape(-1, len(comps))
    best = np.zeros(flat.shape[0])
    best_frames = None

    def batch(frames):
        # evaluation vector per frame: det of the rows I of the n x k matrix
        evals = np.stack([
            np.array([np.linalg.det(fr[list(I), :]) for I in comps])
            for fr in frames
        ])
        vals = np.abs(flat @ evals.T)
        return vals

    frames = [np.linalg.qr(rng.standard_normal((n, k)))[0] for _ in range(n_frames)]
    vals = batch(frames)
    best = vals.max(axis=1)
    top = np.argmax(vals.sum(axis=0))
    base = frames[top]
    for _ in range(refine):
        cand = np.linalg.qr(base + 0.05 * rng.standard_normal((n, k)))[0]
        v = batch([cand])[:, 0]
        improved = v > best
        best = np.maximum(best, v)
        if improved.mean() > 0.5:
            base = cand
    return best.reshape(form.domain.shape)


def form_norm(phi: YoungFunction, form: DiscreteForm, region: np.ndarray | None = None,
              tol: float = 1e-10) -> float:
    """Luxemburg norm of the pointwise norm against Riemannian volume."""
    region = form.domain.inside if region is None else region
    w = form.domain.volume_weights()[region]
    v = pointwise_norm(form)[region]
    if v.size == 0 or not v.any():
        return 0.0
    val, _, _ = luxemburg_values(phi, v, w, tol=tol)
    return float(val)


def sup_norm(form: DiscreteForm, region: np.ndarray | None = None) -> float:
    region = form.domain.inside if region is None else region
    v = pointwise_norm(form)[region]
    return float(v.max()) if v.size else 0.0


# ---------------------------------------------------------------------------
# Cone homotopy and the averaged Poincare homotopy


def _gauss01(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def cone_homotopy(form: DiscreteForm, x, t_nodes: int = 32,
                  interp_order: int = 3) -> DiscreteForm:
    """Contraction along segments to x of a star-shaped domain.

    (chi omega)(y) = sum over components of (y-x)-moments of
    int_0^1 t^(k-1) a(x + t(y-x)) dt; satisfies chi d + d chi = Id up to
    quadrature and grid error.
    """
    dom, k, n = form.domain, form.degree, form.domain.n
    if k < 1:
        raise InputError("cone homotopy needs degree >= 1")
    x = np.asarray(x, dtype=float)
    if dom.kind == "ball" and np.linalg.norm(x) >= 1.0:
        raise InputError("center must lie inside the unit ball")
    pts = dom.points()
    interp = FormInterpolator(form, order=interp_order)
    ts, ws = _gauss01(t_nodes)
    moments = np.zeros(dom.shape + (len(form.components),))
    for t, w in zip(ts, ws):
        q = x + t * (pts - x)
        moments += (w * t ** (k - 1)) * interp(q)
    comps_in = {c: i for i, c in enumerate(form.components)}
    comps_out = form_components(n, k - 1)
    out = np.zeros(dom.shape + (len(comps_out),))
    for j, J in enumerate(comps_out):
        for m in range(n):
            if m in J:
                continue
            I = tuple(sorted(J + (m,)))
            sign = (-1) ** I.index(m)
            out[..., j] += sign * (pts[..., m] - x[m]) * moments[..., comps_in[I]]
    return DiscreteForm(dom, k - 1, out, form.valid.copy())


def _half_region_centers(domain: ChartedDomain, per_axis: int = 5):
    """Quadrature nodes of the concentric half-size region; equal weights."""
    if domain.kind == "ball":
        mask = domain.radial_mask(0.5)
    else:
        pts = domain.points()
        mask = np.ones(domain.shape, dtype=bool)
        for ax in range(domain.n):
            lo, hi = domain.axes[ax][0], domain.axes[ax][-1]
            c, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
            mask &= (pts[..., ax] >= c - half) & (pts[..., ax] <= c + half)
    idx = np.argwhere(mask)
    if len(idx) == 0:
        raise RegionError("half region contains no lattice nodes")
    lo = idx.min(axis=0)
    hi = idx.max(axis=0)
    picks = [np.unique(np.linspace(l, h, per_axis).round().astype(int))
             for l, h in zip(lo, hi)]
    centers = []
    pts = domain.points()
    for combo in itertools.product(*picks):
        if mask[tuple(combo)]:
            centers.append(pts[tuple(combo)])
    if not centers:
        centers = [pts[tuple(i)] for i in idx[:: max(1, len(idx) // per_axis ** domain.n)]]
    return np.array(centers)


def poincare_homotopy(form: DiscreteForm, t_nodes: int = 32, per_axis: int = 5,
                      interp_order: int = 3):
    """Average of the cone homotopy over the half-size concentric region.

    Degree 0 returns the scalar mean over the half region ("h(f)" constant);
    higher degrees return a (k-1)-form with dh + hd = Id up to tolerance.
    """
    dom = form.domain
    if form.degree == 0:
        if dom.kind == "ball":
            mask = dom.radial_mask(0.5)
        else:
            mask = _half_region_mask(dom)
        w = dom.volume_weights()[mask]
        return float(np.dot(w, form.coeffs[..., 0][mask]) / w.sum())
    centers = _half_region_centers(dom, per_axis)
    acc = None
    for c in centers:
        chi = cone_homotopy(form, c, t_nodes=t_nodes, interp_order=interp_order)
        acc = chi if acc is None else acc + chi
    return acc.scale(1.0 / len(centers))


def _half_region_mask(domain: ChartedDomain) -> np.ndarray:
    pts = domain.points()
    mask = np.ones(domain.shape, dtype=bool)
    for ax in range(domain.n):
        lo, hi = domain.axes[ax][0], domain.axes[ax][-1]
        c, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
        mask &= (pts[..., ax] >= c - half) & (pts[..., ax] <= c + half)
    return mask


def homotopy_identity_residual(form: DiscreteForm, region: np.ndarray | None = None,
                               t_nodes: int = 32, per_axis: int = 5) -> float:
    """Sup-norm residual of d h(omega) + h(d omega) - omega on the region."""
    dom = form.domain
    if region is None:
        region = dom.radial_mask(0.85) if dom.kind == "ball" else dom.core(4)
    if form.degree == 0:
        h_df = poincare_homotopy(exterior_derivative(form), t_nodes=t_nodes,
                                 per_axis=per_axis)
        mean = poincare_homotopy(form)
        resid = h_df.coeffs[..., 0] - (form.coeffs[..., 0] - mean)
        return float(np.abs(resid[region]).max())
    h = poincare_homotopy(form, t_nodes=t_nodes, per_axis=per_axis)
    dh = exterior_derivative(h)
    if form.degree < dom.n:
        hd = poincare_homotopy(exterior_derivative(form), t_nodes=t_nodes,
                               per_axis=per_axis)
        resid = dh + hd - form
    else:
        resid = dh - form
    return sup_norm(resid, region)


# ---------------------------------------------------------------------------
# Bi-Lipschitz chart pullback


@dataclass(frozen=True)
class PullbackReport:
    ratio: float
    bound: float
    norm_source: float
    norm_target: float

    @property
    def holds(self) -> bool:
        return self.norm_source <= self.bound * (1 + 1e-8) + 1e-15


def chart_pullback(map_fn, jac_fn, source: ChartedDomain, form: DiscreteForm,
                   L: float, phi: YoungFunction | None = None,
                   interp_order: int = 3):
    """Coordinate pullback through f with Jacobian jac_fn(points).

    Returns (pulled form on the source domain, PullbackReport); the report
    asserts the operator bound L^k * ||.||_{L^{L^n phi}} of the Lipschitz lemma.
    """
    n, k = source.n, form.degree
    pts = source.points()
    q = np.asarray(map_fn(pts), dtype=float)
    J = np.asarray(jac_fn(pts), dtype=float)
    dets = np.linalg.det(J.reshape(-1, n, n))
    if np.any(np.abs(dets) < 1e-14):
        raise RegionError("singular differential at a sample point")
    interp = FormInterpolator(form, order=interp_order)
    target_vals = interp(q)
    comps_k = form_components(n, k)
    out = np.zeros(source.shape + (len(comps_k),))
    Jr = J.reshape(-1, n, n)
    for jo, Jcols in enumerate(comps_k):
        acc = np.zeros(Jr.shape[0])
        for ji, Irows in enumerate(comps_k):
            sub = Jr[:, list(Irows), :][:, :, list(Jcols)]
            minor = np.linalg.det(sub) if k else np.ones(Jr.shape[0])
            acc += target_vals.reshape(-1, len(comps_k))[:, ji] * minor
        out[..., jo] = acc.reshape(source.shape)
    pulled = DiscreteForm(source, k, out)
    report = None
    if phi is not None:
        n_src = form_norm(phi, pulled)
        n_tgt = form_norm(phi, form)
        scaled = form_norm(phi.scaled(max(L ** n, 1.0)), form)
        bound = (L ** k) * scaled
        ratio = n_src / n_tgt if n_tgt > 0 else 0.0
        report = PullbackReport(ratio, bound, n_src, n_tgt)
    return pulled, report


# ---------------------------------------------------------------------------
# Dichotomy example: locally small, globally divergent


@dataclass
class BourdonReport:
    p: float
    kappa: float
    N: int
    eps: float
    gamma: float
    truncated_modular: np.ndarray     # running modular at gamma over [0, N]
    divergence_threshold: int | None  # first N with modular > 1
    divergent: bool
    growth_ok: bool                   # modular(N) >= 0.9 phi(1) ln N for N >= 7
    interval_norms: np.ndarray
    interval_bound_ok: bool           # every ||f|U_n|| <= a_n
    clipped_indices: list             # n where a_n^p exceeds the slot 1 - 4 eps
    phi_partial_sums: np.ndarray      # partial sums of phi(a_n) (log-spaced probes)
    probe_indices: np.ndarray
    cauchy_ok: bool
    tail_sum: float
    tail_integral: float

    @property
    def tail_ok(self) -> bool:
        return abs(self.tail_sum - self.tail_integral) <= 0.10 * self.tail_integral

    def to_json(self) -> dict:
        return {
            "p": self.p, "kappa": self.kappa, "N": self.N, "eps": self.eps,
            "gamma": self.gamma,
            "divergence_threshold": self.divergence_threshold,
            "divergent": self.divergent,
            "growth_ok": self.growth_ok,
            "interval_bound_ok": self.interval_bound_ok,
            "clipped_indices": self.clipped_indices,
            "cauchy_ok": self.cauchy_ok,
            "tail_sum": self.tail_sum,
            "tail_integral": self.tail_integral,
            "tail_ok": self.tail_ok,
            "final_modular": float(self.truncated_modular[-1]),
        }


def bourdon_example(p: float = 2.0, kappa: float = 2.0, N: int = 100,
                    eps: float = 0.05, gamma: float = 1.0,
                    N_series: int = 1_000_000, cauchy_from: int = 100_000,
                    cauchy_tol: float = 1e-6) -> BourdonReport:
    """Indicator staircase separating piecewise from global Orlicz norms.

    a_n = n^(-1/p), so the indicator of union A_n (with |A_n| = a_n^p = 1/n)
    has truncated global modular ~ phi(1) * H_N (divergent in N) while every
    restriction to U_n = (n - eps, n + 1 + eps) has norm at most a_n and the
    piece-norm sequence is phi-summable for kappa > 1.
    """
    if eps >= 0.25:
        raise InputError("interval construction needs eps < 1/4")
    if kappa <= 1:
        raise InputError("the summability half of the dichotomy needs kappa > 1")
    phi = YoungFunction.log_damped(p, kappa)
    ns = np.arange(1, N + 1, dtype=float)
    a = ns ** (-1.0 / p)
    lengths = a ** p
    slot = 1.0 - 4.0 * eps
    clipped = [int(n) for n, ln in zip(ns, lengths) if ln > slot]
    phi_at = float(phi(1.0 / gamma))
    running = np.cumsum(lengths) * phi_at
    over = np.nonzero(running > 1.0)[0]
    threshold = int(over[0] + 1) if len(over) else None
    divergent = threshold is not None and bool(np.all(running[over[0]:] > 1.0))
    ln_ns = np.log(ns)
    with np.errstate(divide="ignore"):
        growth_ok = bool(np.all(running[6:] >= 0.9 * float(phi(1.0)) * ln_ns[6:]))
    # per-interval Luxemburg norms: single atom of mass |A_n| where f = 1
    norms, _, _ = luxemburg_values(phi, np.ones((N, 1)), lengths[:, None])
    interval_ok = bool(np.all(norms <= a * (1 + 1e-9)))
    # phi-summability of a_n with integral-test tail comparison
    big = np.arange(1, N_series + 1, dtype=float)
    phis = np.asarray(phi(big ** (-1.0 / p)))
    csum = np.cumsum(phis)
    probes = np.unique(np.geomspace(1, N_series, 200).astype(int))
    partial = csum[probes - 1]
    inc = phis[cauchy_from:]
    cauchy_ok = bool(np.all(inc < cauchy_tol))
    tail_sum = float(csum[-1] - csum[cauchy_from - 1])
    tail_integral, _ = quad(lambda x: float(phi(x ** (-1.0 / p))),
                            cauchy_from, N_series, limit=200)
    return BourdonReport(p, kappa, N, eps, gamma, running, threshold, divergent,
                         growth_ok, norms, interval_ok, clipped, partial,
                         probes, cauchy_ok, tail_sum, float(tail_integral))
