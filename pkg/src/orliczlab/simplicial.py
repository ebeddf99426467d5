"""Finite oriented simplicial complexes, coboundaries, and Orlicz cochain norms.

Simplices are stored as sorted vertex tuples; orientation signs come from
permutation parity, so the signed incidence matrices satisfy boundary-of-boundary
= 0 in exact integer arithmetic.  Cohomology dimensions are computed with rank
factorizations (they do not depend on the Young function); the Young function
enters through the cochain norms and the norm-minimizing reduced representatives.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from orliczlab.orlicz import (
    InputError,
    MeasureSpace,
    YoungFunction,
    check_norm_equivalence,
    luxemburg_norm,
    luxemburg_values,
)


class ConstructionError(ValueError):
    """Inconsistent simplex data (missing faces, unknown vertices)."""


def _parity_sign(seq) -> int:
    """Sign of the permutation sorting seq (0 on repeated entries)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class SimplicialComplex:
    """Oriented simplicial complex with signed incidence per dimension."""

    def __init__(self, simplices_by_dim: dict, positions: dict | None = None):
        self.simplices: dict[int, list[tuple]] = {}
        self.index: dict[int, dict] = {}
        for k in sorted(simplices_by_dim):
            simps = sorted({tuple(sorted(s)) for s in simplices_by_dim[k]})
            for s in simps:
                if len(s) != k + 1 or len(set(s)) != k + 1:
                    raise ConstructionError(f"bad {k}-simplex {s}")
            self.simplices[k] = simps
            self.index[k] = {s: i for i, s in enumerate(simps)}
        self.positions = positions
        self._boundary: dict[int, sp.csr_matrix] = {}
        self._check_faces()
        self._build_boundaries()
        self._adjacency = None

    # -- construction ---------------------------------------------------------

    def _check_faces(self):
        for k in self.simplices:
            if k == 0:
                continue
            if k - 1 not in self.simplices:
                raise ConstructionError(f"dimension {k-1} missing below {k}")
            lower = self.index[k - 1]
            for s in self.simplices[k]:
                for i in range(len(s)):
                    face = s[:i] + s[i + 1:]
                    if face not in lower:
                        raise ConstructionError(f"face {face} of {s} is missing")

    def _build_boundaries(self):
        for k in self.simplices:
            if k == 0:
                continue
            rows, cols, vals = [], [], []
            lower = self.index[k - 1]
            for j, s in enumerate(self.simplices[k]):
                for i in range(len(s)):
                    face = s[:i] + s[i + 1:]
                    rows.append(lower[face])
                    cols.append(j)
                    vals.append((-1) ** i)
            self._boundary[k] = sp.csr_matrix(
                (vals, (rows, cols)),
                shape=(len(self.simplices[k - 1]), len(self.simplices[k])),
                dtype=np.int64,
            )

    # -- basic queries ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return max(k for k, v in self.simplices.items() if v)

    def n_simplices(self, k: int) -> int:
        return len(self.simplices.get(k, []))

    def boundary_matrix(self, k: int) -> sp.csr_matrix:
        """Signed incidence C_k -> C_{k-1} (integer entries)."""
        return self._boundary[k]

    def coboundary_matrix(self, k: int) -> sp.csr_matrix:
        """delta_k : C^k -> C^{k+1}; zero matrix above the top dimension."""
        if k + 1 in self._boundary:
            return self._boundary[k + 1].T.tocsr()
        return sp.csr_matrix((0, self.n_simplices(k)), dtype=np.int64)

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * self.n_simplices(k) for k in self.simplices)

    def coface_count_bound(self, k: int) -> int:
        """Max number of (k+1)-simplices any k-simplex bounds (the N(1) stat)."""
        if k + 1 not in self._boundary or self.n_simplices(k + 1) == 0:
            return 0
        counts = np.abs(self._boundary[k + 1]).sum(axis=1)
        return int(counts.max())

    def stats(self) -> dict:
        """Bounded-geometry data: diameter bound and coface counts per degree."""
        diam = 1.0
        if self.positions:
            for k, simps in self.simplices.items():
                for s in simps:
                    pts = np.array([self.positions[v] for v in s], dtype=float)
                    for a, b in itertools.combinations(range(len(s)), 2):
                        diam = max(diam, float(np.linalg.norm(pts[a] - pts[b])))
        return {
            "diameter_bound": diam,
            "coface_bound": {k: self.coface_count_bound(k) for k in self.simplices},
            "N1": max([self.coface_count_bound(k) for k in self.simplices] + [1]),
        }

    def ball_simplex_count(self, vertex, r: int) -> int:
        """Number of simplices whose vertices all lie within graph distance r."""
        dist = self.bfs_distances([vertex])
        total = 0
        for simps in self.simplices.values():
            for s in simps:
                if all(dist.get(v, math.inf) <= r for v in s):
                    total += 1
        return total

    # -- graph structure --------------------------------------------------------

    def vertex_adjacency(self) -> dict:
        if self._adjacency is None:
            adj = {v[0]: set() for v in self.simplices[0]}
            for (a, b) in self.simplices.get(1, []):
                adj[a].add(b)
                adj[b].add(a)
            self._adjacency = {v: sorted(n) for v, n in adj.items()}
        return self._adjacency

    def bfs_distances(self, sources) -> dict:
        adj = self.vertex_adjacency()
        dist = {s: 0 for s in sources}
        queue = deque(sources)
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    def shortest_path(self, a, b) -> list:
        """Deterministic shortest vertex path (lexicographic predecessor)."""
        if a == b:
            return [a]
        adj = self.vertex_adjacency()
        prev = {a: None}
        queue = deque([a])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if u not in prev:
                    prev[u] = v
                    if u == b:
                        path = [b]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(u)
        raise ConstructionError(f"vertices {a} and {b} are not connected")

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        obj = {"simplices": {str(k): [list(s) for s in v] for k, v in self.simplices.items()}}
        if self.positions:
            obj["positions"] = {str(v): list(map(float, p)) for v, p in self.positions.items()}
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SimplicialComplex":
        simps = {int(k): [tuple(s) for s in v] for k, v in obj["simplices"].items()}
        pos = None
        if "positions" in obj:
            pos = {_maybe_int(v): tuple(p) for v, p in obj["positions"].items()}
        return cls(simps, pos)


def _maybe_int(v):
    try:
        return int(v)
    except (TypeError, ValueError):
        return v


# ---------------------------------------------------------------------------
# Generators


def cycle_complex(n: int) -> SimplicialComplex:
    verts = [(i,) for i in range(n)]
    edges = [tuple(sorted((i, (i + 1) % n))) for i in range(n)]
    return SimplicialComplex({0: verts, 1: edges})


def path_complex(n: int) -> SimplicialComplex:
    """Path on n vertices 0 -- 1 -- ... -- n-1 (the truncated-ray model)."""
    verts = [(i,) for i in range(n)]
    edges = [(i, i + 1) for i in range(n - 1)]
    return SimplicialComplex({0: verts, 1: edges})


def filled_triangle() -> SimplicialComplex:
    return SimplicialComplex({0: [(0,), (1,), (2,)], 1: [(0, 1), (0, 2), (1, 2)],
                              2: [(0, 1, 2)]})


def filled_polygon(n: int) -> SimplicialComplex:
    """Disk: n-gon 1..n fanned from a center vertex 0."""
    verts = [(i,) for i in range(n + 1)]
    rim = [tuple(sorted((i, i % n + 1))) for i in range(1, n + 1)]
    spokes = [(0, i) for i in range(1, n + 1)]
    tris = [tuple(sorted((0, i, i % n + 1))) for i in range(1, n + 1)]
    return SimplicialComplex({0: verts, 1: rim + spokes, 2: tris})


def torus_complex() -> SimplicialComplex:
    """Minimal 7-vertex triangulated torus: V - E + F = 7 - 21 + 14 = 0."""
    tris = []
    for i in range(7):
        tris.append(tuple(sorted((i, (i + 1) % 7, (i + 3) % 7))))
        tris.append(tuple(sorted((i, (i + 2) % 7, (i + 3) % 7))))
    edges = sorted({tuple(sorted(e)) for t in tris for e in itertools.combinations(t, 2)})
    verts = [(i,) for i in range(7)]
    return SimplicialComplex({0: verts, 1: edges, 2: tris})


def random_bounded_degree_complex(rng, n_vertices: int = 16, max_degree: int = 5,
                                  fill_prob: float = 0.5) -> SimplicialComplex:
    """Connected random graph with bounded vertex degree, 3-cliques filled."""
    degree = np.zeros(n_vertices, dtype=int)
    edges = set()
    order = rng.permutation(n_vertices)
    for i in range(1, n_vertices):
        a = int(order[i])
        b = int(order[rng.integers(i)])
        edges.add(tuple(sorted((a, b))))
        degree[a] += 1
        degree[b] += 1
    extra = rng.integers(0, 2 * n_vertices)
    for _ in range(extra):
        a, b = rng.integers(n_vertices, size=2)
        a, b = int(a), int(b)
        if a == b or degree[a] >= max_degree or degree[b] >= max_degree:
            continue
        e = tuple(sorted((a, b)))
        if e not in edges:
            edges.add(e)
            degree[a] += 1
            degree[b] += 1
    edge_list = sorted(edges)
    eset = set(edge_list)
    tris = []
    for (a, b) in edge_list:
        for c in range(b + 1, n_vertices):
            if (a, c) in eset and (b, c) in eset and rng.random() < fill_prob:
                tris.append((a, b, c))
    simps = {0: [(i,) for i in range(n_vertices)], 1: edge_list}
    if tris:
        simps[2] = tris
    return SimplicialComplex(simps)


def build_complex(spec: dict) -> SimplicialComplex:
    """Generator dispatch used by the CLI and the JSON interface."""
    kind = spec.get("kind", "json")
    if kind == "cycle":
        return cycle_complex(int(spec["n"]))
    if kind == "path":
        return path_complex(int(spec["n"]))
    if kind == "filled_triangle":
        return filled_triangle()
    if kind == "filled_polygon":
        return filled_polygon(int(spec["n"]))
    if kind == "torus":
        return torus_complex()
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        return random_bounded_degree_complex(
            rng, int(spec.get("n", 16)), int(spec.get("max_degree", 5)),
            float(spec.get("fill_prob", 0.5)))
    if kind == "json":
        return SimplicialComplex.from_json(spec)
    raise ConstructionError(f"unknown complex generator {kind!r}")


# ---------------------------------------------------------------------------
# Cochains


@dataclass
class Cochain:
    """Real-valued k-cochain, indexed by the sorted simplex representatives."""

    complex: SimplicialComplex
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.complex.n_simplices(self.degree),):
            raise InputError("cochain must be defined on every simplex of its degree")

    def __call__(self, simplex) -> float:
        """Evaluate on an ordered simplex; antisymmetric under reordering."""
        sign = _parity_sign(simplex)
        if sign == 0:
            return 0.0
        key = tuple(sorted(simplex))
        return sign * float(self.values[self.complex.index[self.degree][key]])

    def evaluate_chain(self, coeffs: dict) -> float:
        """Linear extension to a formal combination {simplex_index: coeff}."""
        return float(sum(c * self.values[i] for i, c in coeffs.items()))

    def to_json(self) -> dict:
        return {"degree": self.degree, "values": [float(v) for v in self.values]}


def coboundary(X: SimplicialComplex, theta: Cochain) -> Cochain:
    """delta theta(sigma) = theta(boundary sigma); exact integer incidence."""
    if theta.degree > X.dim:
        raise InputError("degree exceeds the dimension of the complex")
    D = X.coboundary_matrix(theta.degree)
    return Cochain(X, theta.degree + 1, D @ theta.values)


def cochain_norm(phi: YoungFunction, theta: Cochain, tol: float = 1e-10) -> float:
    """Luxemburg norm over counting measure on the simplex set."""
    n = len(theta.values)
    if n == 0:
        return 0.0
    return luxemburg_norm(phi, theta.values, MeasureSpace.counting(n), tol=tol).value


# ---------------------------------------------------------------------------
# Cohomology


def cohomology_dims(X: SimplicialComplex, k: int) -> int:
    """dim ker delta_k - rank delta_{k-1}; independent of the Young function."""
    nk = X.n_simplices(k)
    if nk == 0:
        return 0
    Dk = X.coboundary_matrix(k).toarray().astype(float)
    rank_k = np.linalg.matrix_rank(Dk) if Dk.size else 0
    if k >= 1:
        Dkm1 = X.coboundary_matrix(k - 1).toarray().astype(float)
        rank_km1 = np.linalg.matrix_rank(Dkm1) if Dkm1.size else 0
    else:
        rank_km1 = 0
    return int(nk - rank_k - rank_km1)


def harmonic_basis(X: SimplicialComplex, k: int, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of ker delta_k intersected with (im delta_{k-1})^perp.

    Returned as columns; harmonic representatives span H^k and are orthogonal
    to every coboundary, so class coordinates are plain inner products.
    """
    nk = X.n_simplices(k)
    blocks = []
    Dk = X.coboundary_matrix(k).toarray().astype(float)
    if Dk.shape[0]:
        blocks.append(Dk)
    if k >= 1:
        up = X.coboundary_matrix(k - 1).toarray().astype(float).T
        if up.shape[0]:
            blocks.append(up)
    if not blocks:
        return np.eye(nk)
    A = np.vstack(blocks)
    _, s, vt = np.linalg.svd(A)
    scale = s[0] if len(s) else 1.0
    rank = int(np.sum(s > tol * max(scale, 1.0)))
    return vt[rank:].T


def class_coordinates(basis: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Coordinates of a closed cochain's class in a harmonic basis."""
    return basis.T @ values


# ---------------------------------------------------------------------------
# Coboundary continuity report (operator ratio vs assembled constant)


@dataclass(frozen=True)
class ContinuityReport:
    degree: int
    worst_ratio: float
    bound: float
    n1: int
    trials: int

    @property
    def holds(self) -> bool:
        return self.worst_ratio <= self.bound * (1 + 1e-9)


def delta_continuity_report(phi: YoungFunction, X: SimplicialComplex, k: int = 0,
                            trials: int = 100, rng=None) -> ContinuityReport:
    """Worst ||delta theta|| / ||theta|| over random theta against the continuity constant.

    The constant is (k+2) * N(1): a (k+1)-simplex has k+2 faces and every
    k-simplex bounds at most N(1) of them, so the modular comparison gives
    ||delta theta|| <= (k+2) ||theta||_{N(1) phi} <= (k+2) N(1) ||theta||.
    """
    rng = rng or np.random.default_rng(0)
    n1 = max(X.coface_count_bound(k), 1)
    nk, nk1 = X.n_simplices(k), X.n_simplices(k + 1)
    worst = 0.0
    if nk and nk1:
        thetas = rng.standard_normal((trials, nk))
        D = X.coboundary_matrix(k).toarray().astype(float)
        dthetas = thetas @ D.T
        n_theta, _, _ = luxemburg_values(phi, thetas, np.ones(nk))
        n_dtheta, _, _ = luxemburg_values(phi, dthetas, np.ones(nk1))
        mask = n_theta > 0
        if mask.any():
            worst = float(np.max(n_dtheta[mask] / n_theta[mask]))
    return ContinuityReport(k, worst, float((k + 2) * n1), n1, trials)


# ---------------------------------------------------------------------------
# Reduced representatives (norm-minimizing cocycles)


def reduced_representative(phi: YoungFunction, X: SimplicialComplex, theta: Cochain,
                           tol: float = 1e-8, max_iter: int = 10000,
                           closed_tol: float = 1e-9):
    """Minimize ||theta - delta eta||_phi over eta; returns (eta, residual norm).

    Warm start from the least-squares projection (exact minimizer for the
    quadratic Young function), then Polyak-style subgradient descent on the
    exact Luxemburg objective for general phi.  closed_tol gates the cocycle
    precondition; numerically produced cocycles carry grid-sized slack.
    """
    k = theta.degree
    dtheta = coboundary(X, theta)
    if np.max(np.abs(dtheta.values), initial=0.0) > closed_tol:
        raise InputError("reduced representative requires a closed cochain")
    if k == 0:
        # nothing below degree 0: the residual is the norm of theta itself
        return None, cochain_norm(phi, theta)
    A = X.coboundary_matrix(k - 1).toarray().astype(float)
    counting = np.ones(X.n_simplices(k))
    eta, *_ = np.linalg.lstsq(A, theta.values, rcond=None)
    resid = theta.values - A @ eta

    def norm_of(v):
        val, _, _ = luxemburg_values(phi, v, counting)
        return float(val)

    best = norm_of(resid)
    if phi.kind != "power" or phi.params.get("p") != 2:
        best_eta = eta.copy()
        cur = eta.copy()
        slack = max(best, 1.0) * 1e-2
        for it in range(max_iter):
            v = theta.values - A @ cur
            nv = norm_of(v)
            if nv < best:
                best, best_eta = nv, cur.copy()
            if nv <= tol:
                break
            # gradient of the Luxemburg norm via the implicit modular equation
            u = v / nv
            du = phi.derivative(u)
            denom = float(np.dot(du, u))
            if denom <= 0:
                break
            g_norm = du / denom
            g = -A.T @ g_norm
            gn2 = float(np.dot(g, g))
            if gn2 <= 1e-30:
                break
            step = (nv - (best - slack)) / gn2
            cur = cur - step * g
            if it % 50 == 49:
                slack *= 0.5
                if slack < tol * 1e-3:
                    break
        eta, resid = best_eta, theta.values - A @ best_eta
        best = norm_of(resid)
    return Cochain(X, k - 1, eta), best


# ---------------------------------------------------------------------------
# Relative machinery (combinatorial boundary-point model)


@dataclass(frozen=True)
class BoundaryPointModel:
    """Boundary point modeled by a base vertex and a geodesic ray prefix."""

    base: int
    ray: tuple

    def busemann(self, X: SimplicialComplex) -> dict:
        """b(v) = d(v, base) - 2 d(v, ray); larger values are nearer the point."""
        ray = [r for r in self.ray]
        adj = X.vertex_adjacency()
        for a, b in zip(ray, ray[1:]):
            if b not in adj[a]:
                raise InputError("ray is not a vertex path in the complex")
        d_base = X.bfs_distances([self.base])
        d_ray = X.bfs_distances(list(ray))
        return {v: d_base.get(v, math.inf) - 2 * d_ray.get(v, math.inf)
                for v in d_base}


def relative_mask(X: SimplicialComplex, xi: BoundaryPointModel, t: float) -> dict:
    """Simplices inside the horoparameter-t neighborhood of xi, per degree.

    mask(t) = {sigma : min_v b(v) > t}; monotone (t1 < t2 implies mask(t2)
    inside mask(t1)) and face-closed, so cochains vanishing on it form a
    delta-stable subspace.
    """
    b = xi.busemann(X)
    masks = {}
    for k, simps in X.simplices.items():
        masks[k] = np.array([min(b[v] for v in s) > t for s in simps], dtype=bool)
    return masks


def vanishes_on_mask(theta: Cochain, mask: dict, atol: float = 0.0) -> bool:
    m = mask[theta.degree]
    if not m.any():
        return True
    return bool(np.all(np.abs(theta.values[m]) <= atol))
