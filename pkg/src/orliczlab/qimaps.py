"""Constructive quasi-isometry machinery on simplicial complexes.

A quasi-isometry F acts on chains through a simplex-to-chain assignment c_F
built degree by degree: vertices map to image vertices, edges fill by
deterministic shortest paths, and higher simplices fill their boundary cycles
by breadth-first cone search (exact rational elimination as a fallback).  All
chain coefficients stay exact (ints or Fractions), so the commutation
boundary(c_F(sigma)) = c_F(boundary sigma) and the prism identities hold
without float error.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from orliczlab.orlicz import InputError, YoungFunction, luxemburg_values
from orliczlab.simplicial import Cochain, SimplicialComplex, harmonic_basis


class FillBudgetError(RuntimeError):
    """No filling found within the contractibility radius budget."""

    def __init__(self, simplex, message=""):
        self.simplex = simplex
        super().__init__(message or f"could not fill the boundary of {simplex}")


# ---------------------------------------------------------------------------
# Exact chains


class Chain:
    """Formal combination of k-simplices with exact coefficients."""

    __slots__ = ("complex", "degree", "coeffs")

    def __init__(self, complex: SimplicialComplex, degree: int, coeffs: dict | None = None):
        self.complex = complex
        self.degree = degree
        self.coeffs = {i: c for i, c in (coeffs or {}).items() if c != 0}

    def support(self) -> list:
        return [self.complex.simplices[self.degree][i] for i in sorted(self.coeffs)]

    @property
    def norm_inf(self) -> float:
        return float(max((abs(c) for c in self.coeffs.values()), default=0))

    @property
    def length(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "Chain") -> "Chain":
        out = dict(self.coeffs)
        for i, c in other.coeffs.items():
            out[i] = out.get(i, 0) + c
        return Chain(self.complex, self.degree, out)

    def __sub__(self, other: "Chain") -> "Chain":
        out = dict(self.coeffs)
        for i, c in other.coeffs.items():
            out[i] = out.get(i, 0) - c
        return Chain(self.complex, self.degree, out)

    def __neg__(self) -> "Chain":
        return Chain(self.complex, self.degree, {i: -c for i, c in self.coeffs.items()})

    def scale(self, s) -> "Chain":
        return Chain(self.complex, self.degree, {i: s * c for i, c in self.coeffs.items()})

    def boundary(self) -> "Chain":
        if self.degree == 0:
            raise InputError("0-chains have no boundary here")
        if not self.coeffs:
            return Chain(self.complex, self.degree - 1, {})
        B = self.complex.boundary_matrix(self.degree).tocsc()
        out: dict = {}
        for j, c in self.coeffs.items():
            sl = slice(B.indptr[j], B.indptr[j + 1])
            for r, v in zip(B.indices[sl], B.data[sl]):
                out[int(r)] = out.get(int(r), 0) + int(v) * c
        return Chain(self.complex, self.degree - 1, out)

    @classmethod
    def from_simplex(cls, complex: SimplicialComplex, simplex: tuple) -> "Chain":
        k = len(simplex) - 1
        return cls(complex, k, {complex.index[k][tuple(sorted(simplex))]: 1})

    @classmethod
    def from_vertex_path(cls, complex: SimplicialComplex, path: list) -> "Chain":
        """Signed edge chain whose boundary is (end vertex) - (start vertex)."""
        coeffs: dict = {}
        for a, b in zip(path, path[1:]):
            key = tuple(sorted((a, b)))
            idx = complex.index[1][key]
            sign = 1 if (a, b) == key else -1
            coeffs[idx] = coeffs.get(idx, 0) + sign
        return cls(complex, 1, coeffs)


def cone(complex: SimplicialComplex, apex, chain: Chain) -> Chain:
    """Join of a chain with an apex vertex; requires apex outside the support
    and every joined simplex present in the complex (KeyError otherwise)."""
    k = chain.degree + 1
    out: dict = {}
    simps = complex.simplices[chain.degree]
    for i, c in chain.coeffs.items():
        tau = simps[i]
        if apex in tau:
            raise KeyError(f"apex {apex} lies in the support simplex {tau}")
        joined = tuple(sorted(tau + (apex,)))
        sign = (-1) ** joined.index(apex)
        out_idx = complex.index[k].get(joined)
        if out_idx is None:
            raise KeyError(f"missing simplex {joined}")
        out[out_idx] = out.get(out_idx, 0) + sign * c
    return Chain(complex, k, out)


def _solve_exact(columns: list, rows_dim: int, target: dict):
    """Solve B w = z over the rationals; columns are sparse {row: val} dicts.

    Returns a coefficient list aligned with columns, or None if inconsistent.
    """
    ncols = len(columns)
    row_ids = sorted(set(target) | {r for col in columns for r in col})
    rmap = {r: i for i, r in enumerate(row_ids)}
    m, n = len(row_ids), ncols
    M = [[Fraction(0)] * (n + 1) for _ in range(m)]
    for j, col in enumerate(columns):
        for r, v in col.items():
            M[rmap[r]][j] = Fraction(v)
    for r, v in target.items():
        M[rmap[r]][n] = Fraction(v)
    pivots = []
    pr = 0
    for pc in range(n):
        pivot = next((r for r in range(pr, m) if M[r][pc] != 0), None)
        if pivot is None:
            continue
        M[pr], M[pivot] = M[pivot], M[pr]
        inv = 1 / M[pr][pc]
        M[pr] = [x * inv for x in M[pr]]
        for r in range(m):
            if r != pr and M[r][pc] != 0:
                f = M[r][pc]
                M[r] = [a - f * b for a, b in zip(M[r], M[pr])]
        pivots.append(pc)
        pr += 1
        if pr == m:
            break
    for r in range(pr, m):
        if M[r][n] != 0:
            return None
    sol = [Fraction(0)] * n
    for r, pc in enumerate(pivots):
        sol[pc] = M[r][n]
    return sol


def fill_cycle(Y: SimplicialComplex, z: Chain, radius_budget: int = 6,
               context=None) -> Chain:
    """Find an exact k-chain w with boundary(w) = z for a (k-1)-cycle z.

    Prefers a single-apex cone (smallest BFS radius first, lexicographic
    tie-break); falls back to exact rational elimination over the simplices
    near the support; raises FillBudgetError when both fail.
    """
    k = z.degree + 1
    if z.is_zero():
        return Chain(Y, k, {})
    if k > Y.dim or Y.n_simplices(k) == 0:
        raise FillBudgetError(context, f"no {k}-simplices available to fill {z.support()}")
    support_vertices = sorted({v for s in z.support() for v in s})
    dist = Y.bfs_distances(support_vertices)
    candidates = sorted(
        (v for v, d in dist.items() if d <= radius_budget),
        key=lambda v: (dist[v], v),
    )
    for apex in candidates:
        try:
            w = cone(Y, apex, z)
        except KeyError:
            continue
        if (w.boundary() - z).is_zero():
            return w
    # algebraic fallback on the ball around the support
    near = {v for v, d in dist.items() if d <= radius_budget}
    col_ids = [j for j, s in enumerate(Y.simplices[k]) if all(v in near for v in s)]
    B = Y.boundary_matrix(k).tocsc()
    columns = []
    for j in col_ids:
        sl = slice(B.indptr[j], B.indptr[j + 1])
        columns.append({int(r): int(v) for r, v in zip(B.indices[sl], B.data[sl])})
    sol = _solve_exact(columns, Y.n_simplices(k - 1), z.coeffs)
    if sol is None:
        raise FillBudgetError(context, f"no filling within radius {radius_budget} for {z.support()}")
    coeffs = {j: c for j, c in zip(col_ids, sol) if c != 0}
    return Chain(Y, k, coeffs)


# ---------------------------------------------------------------------------
# Quasi-isometries


@dataclass
class QuasiIsometry:
    """Vertex map between complexes with empirically measured constants."""

    X: SimplicialComplex
    Y: SimplicialComplex
    vertex_map: dict
    quasi_inverse: dict | None = None
    lam: float = field(init=False, default=1.0)
    eps: float = field(init=False, default=0.0)

    def __post_init__(self):
        for v in (s[0] for s in self.X.simplices[0]):
            if v not in self.vertex_map:
                raise InputError(f"vertex {v} missing from the map")
        self.lam, self.eps = self._measure()

    def _measure(self) -> tuple:
        xs = [s[0] for s in self.X.simplices[0]]
        dY_from = {}
        lam = 1.0
        eps = 0.0
        dX_all = {v: self.X.bfs_distances([v]) for v in xs}
        images = sorted({self.vertex_map[v] for v in xs})
        dY_all = {y: self.Y.bfs_distances([y]) for y in images}
        for i, a in enumerate(xs):
            for b in xs[i + 1:]:
                dx = dX_all[a].get(b)
                if dx is None:
                    continue
                dy = dY_all[self.vertex_map[a]].get(self.vertex_map[b], None)
                if dy is None:
                    continue
                if dy > 0:
                    lam = max(lam, dy / dx, dx / dy)
                else:
                    eps = max(eps, float(dx))
        eps = eps / lam if eps else 0.0
        return lam, eps

    def image(self, v):
        return self.vertex_map[v]

    def build_quasi_inverse_map(self) -> dict:
        """Nearest-preimage search over vertex images (deterministic)."""
        if self.quasi_inverse is not None:
            return self.quasi_inverse
        xs = [s[0] for s in self.X.simplices[0]]
        inv = {}
        for y in (s[0] for s in self.Y.simplices[0]):
            d = self.Y.bfs_distances([y])
            best = min(xs, key=lambda x: (d.get(self.vertex_map[x], np.inf), x))
            inv[y] = best
        self.quasi_inverse = inv
        return inv

    def inverse_qi(self) -> "QuasiIsometry":
        return QuasiIsometry(self.Y, self.X, self.build_quasi_inverse_map())

    def to_json(self) -> dict:
        obj = {"vertex_map": {str(k): v for k, v in self.vertex_map.items()}}
        if self.quasi_inverse:
            obj["quasi_inverse"] = {str(k): v for k, v in self.quasi_inverse.items()}
        return obj


def uniform_distance(F: QuasiIsometry, G: QuasiIsometry) -> float:
    """Max graph distance between image vertices of the two maps."""
    out = 0.0
    for v in (s[0] for s in F.X.simplices[0]):
        d = F.Y.bfs_distances([F.image(v)])
        out = max(out, float(d.get(G.image(v), np.inf)))
    return out


# ---------------------------------------------------------------------------
# Chain maps


@dataclass
class ChainMap:
    """Per-degree simplex -> chain assignment commuting with the boundary."""

    X: SimplicialComplex
    Y: SimplicialComplex
    chains: dict            # degree -> list[Chain] aligned with X.simplices[k]
    constants: dict         # degree -> {"N": norm bound, "L": length bound}
    hausdorff_bound: float = 0.0

    def __call__(self, simplex_or_chain) -> Chain:
        if isinstance(simplex_or_chain, Chain):
            ch = simplex_or_chain
            out = Chain(self.Y, ch.degree, {})
            table = self.chains[ch.degree]
            for i, c in ch.coeffs.items():
                out = out + table[i].scale(c)
            return out
        simplex = tuple(sorted(simplex_or_chain))
        k = len(simplex) - 1
        return self.chains[k][self.X.index[k][simplex]]

    def apply_degree(self, k: int, i: int) -> Chain:
        return self.chains[k][i]

    def verify_commutation(self) -> bool:
        for k in self.chains:
            if k == 0:
                continue
            for i, s in enumerate(self.X.simplices[k]):
                lhs = self.chains[k][i].boundary()
                rhs = self(Chain(self.X, k, {i: 1}).boundary())
                if not (lhs - rhs).is_zero():
                    return False
        return True

    def multiplicity_bound(self, k: int) -> int:
        """Max count of X-simplices whose image chain touches one Y-simplex."""
        counts: dict = {}
        for ch in self.chains.get(k, []):
            for j in ch.coeffs:
                counts[j] = counts.get(j, 0) + 1
        return max(counts.values(), default=1)


def build_chain_map(F: QuasiIsometry, k_max: int | None = None,
                    radius_budget: int = 6) -> ChainMap:
    """Vertices to image vertices, edges to shortest paths, higher simplices
    to exact cone or rational fillings of their boundary cycles."""
    X, Y = F.X, F.Y
    k_max = X.dim if k_max is None else min(k_max, X.dim)
    chains: dict = {0: []}
    for (v,) in X.simplices[0]:
        y = F.image(v)
        chains[0].append(Chain(Y, 0, {Y.index[0][(y,)]: 1}))
    if k_max >= 1:
        chains[1] = []
        for (a, b) in X.simplices.get(1, []):
            path = Y.shortest_path(F.image(a), F.image(b))
            chains[1].append(Chain.from_vertex_path(Y, path))
    for k in range(2, k_max + 1):
        chains[k] = []
        B = X.boundary_matrix(k).tocsc()
        for j, s in enumerate(X.simplices[k]):
            sl = slice(B.indptr[j], B.indptr[j + 1])
            z = Chain(Y, k - 1, {})
            for r, v in zip(B.indices[sl], B.data[sl]):
                z = z + chains[k - 1][int(r)].scale(int(v))
            chains[k].append(fill_cycle(Y, z, radius_budget, context=s))
    constants = {
        k: {"N": max((c.norm_inf for c in v), default=0.0),
            "L": max((c.length for c in v), default=0)}
        for k, v in chains.items()
    }
    # Hausdorff bound between image chains and the vertex images of each simplex
    haus = 0.0
    for k, table in chains.items():
        for i, s in enumerate(X.simplices[k]):
            img_pts = sorted({F.image(v) for v in s})
            sup_pts = sorted({v for t in table[i].support() for v in t}) or img_pts
            d = Y.bfs_distances(img_pts)
            d2 = Y.bfs_distances(sup_pts)
            fwd = max((d.get(p, np.inf) for p in sup_pts), default=0)
            bck = max((d2.get(p, np.inf) for p in img_pts), default=0)
            haus = max(haus, float(fwd), float(bck))
    cm = ChainMap(X, Y, chains, constants, haus)
    if not cm.verify_commutation():
        raise FillBudgetError(None, "chain map does not commute with the boundary")
    return cm


def compose_chain_maps(inner: ChainMap, outer: ChainMap) -> ChainMap:
    """Chain map of a composition: outer o inner applied simplex by simplex."""
    chains = {k: [outer(ch) for ch in v] for k, v in inner.chains.items()}
    constants = {
        k: {"N": max((c.norm_inf for c in v), default=0.0),
            "L": max((c.length for c in v), default=0)}
        for k, v in chains.items()
    }
    return ChainMap(inner.X, outer.Y, chains, constants,
                    inner.hausdorff_bound + outer.hausdorff_bound)


def identity_chain_map(X: SimplicialComplex) -> ChainMap:
    chains = {k: [Chain(X, k, {i: 1}) for i in range(X.n_simplices(k))]
              for k in X.simplices}
    constants = {k: {"N": 1.0, "L": 1} for k in chains}
    return ChainMap(X, X, chains, constants, 0.0)


# ---------------------------------------------------------------------------
# Pullback and prisms


def pullback(theta: Cochain, cmap: ChainMap) -> Cochain:
    """F* theta = theta o c_F by linear extension; commutes with delta exactly."""
    k = theta.degree
    n = cmap.X.n_simplices(k)
    vals = np.zeros(n)
    for i in range(n):
        ch = cmap.chains[k][i]
        vals[i] = sum(float(c) * theta.values[j] for j, c in ch.coeffs.items())
    return Cochain(cmap.X, k, vals)


@dataclass
class PrismHomotopy:
    """Degree-raising chains h with boundary(h) + h(boundary) = c_A - c_B."""

    cA: ChainMap
    cB: ChainMap
    chains: dict   # degree k -> list[Chain of degree k+1]
    constants: dict

    def __call__(self, simplex_or_chain) -> Chain:
        if isinstance(simplex_or_chain, Chain):
            ch = simplex_or_chain
            out = Chain(self.cA.Y, ch.degree + 1, {})
            for i, c in ch.coeffs.items():
                out = out + self.chains[ch.degree][i].scale(c)
            return out
        simplex = tuple(sorted(simplex_or_chain))
        k = len(simplex) - 1
        return self.chains[k][self.cA.X.index[k][simplex]]

    def verify_identities(self) -> bool:
        X = self.cA.X
        for k, table in self.chains.items():
            for i in range(X.n_simplices(k)):
                sigma = Chain(X, k, {i: 1})
                lhs = table[i].boundary()
                rhs = self.cA(sigma) - self.cB(sigma)
                if k >= 1:
                    rhs = rhs - self(sigma.boundary())
                if not (lhs - rhs).is_zero():
                    return False
        return True


def prism_homotopy(cA: ChainMap, cB: ChainMap, radius_budget: int = 6) -> PrismHomotopy:
    """Chain homotopy between two chain maps of maps at bounded distance."""
    X, Y = cA.X, cA.Y
    chains: dict = {0: []}
    for i, (v,) in enumerate(X.simplices[0]):
        a = next(iter(cA.chains[0][i].coeffs))
        b = next(iter(cB.chains[0][i].coeffs))
        ya = Y.simplices[0][a][0]
        yb = Y.simplices[0][b][0]
        path = Y.shortest_path(yb, ya)
        chains[0].append(Chain.from_vertex_path(Y, path))
    ph = PrismHomotopy(cA, cB, chains, {})
    for k in range(1, max(X.simplices) + 1):
        if k not in cA.chains:
            break
        chains[k] = []
        for i, s in enumerate(X.simplices[k]):
            sigma = Chain(X, k, {i: 1})
            z = cA(sigma) - cB(sigma) - ph(sigma.boundary())
            chains[k].append(fill_cycle(Y, z, radius_budget, context=s))
    constants = {
        k: {"N": max((c.norm_inf for c in v), default=0.0),
            "L": max((c.length for c in v), default=0)}
        for k, v in chains.items()
    }
    ph.constants.update(constants)
    if not ph.verify_identities():
        raise FillBudgetError(None, "prism identities failed")
    return ph


def homotopy_cochain_map(theta: Cochain, prism: PrismHomotopy) -> Cochain:
    """H_k theta (sigma) = theta(h(sigma)); lowers cochain degree by one."""
    k = theta.degree
    X = prism.cA.X
    if k - 1 < 0:
        raise InputError("no prism cochain map below degree 1")
    n = X.n_simplices(k - 1)
    vals = np.zeros(n)
    for i in range(n):
        ch = prism.chains[k - 1][i]
        vals[i] = sum(float(c) * theta.values[j] for j, c in ch.coeffs.items())
    return Cochain(X, k - 1, vals)


# ---------------------------------------------------------------------------
# Induced maps on cohomology


@dataclass
class InducedMapReport:
    degree: int
    matrix_F: np.ndarray          # H^k(Y) -> H^k(X)
    matrix_Fbar: np.ndarray       # H^k(X) -> H^k(Y)
    comp_X: np.ndarray            # matrix_F @ matrix_Fbar, should be Id on H^k(X)
    comp_Y: np.ndarray            # matrix_Fbar @ matrix_F, should be Id on H^k(Y)
    pullback_ratio: float
    pullback_bound: float

    @property
    def iso_residual(self) -> float:
        rx = np.abs(self.comp_X - np.eye(len(self.comp_X))).max() if self.comp_X.size else 0.0
        ry = np.abs(self.comp_Y - np.eye(len(self.comp_Y))).max() if self.comp_Y.size else 0.0
        return float(max(rx, ry))


def induced_cohomology_map(F: QuasiIsometry, phi: YoungFunction | None = None,
                           degrees=None, trials: int = 200, rng=None,
                           radius_budget: int = 6) -> dict:
    """Matrices of F# and its quasi-inverse on harmonic bases, with the
    operator-ratio report for the pullback continuity bound."""
    rng = rng or np.random.default_rng(0)
    phi = phi or YoungFunction.power(2)
    Fbar = F.inverse_qi()
    cF = build_chain_map(F, radius_budget=radius_budget)
    cFbar = build_chain_map(Fbar, radius_budget=radius_budget)
    degrees = degrees if degrees is not None else sorted(
        set(F.X.simplices) & set(F.Y.simplices))
    out = {}
    for k in degrees:
        HX = harmonic_basis(F.X, k)
        HY = harmonic_basis(F.Y, k)
        bX, bY = HX.shape[1], HY.shape[1]
        A = np.zeros((bX, bY))
        for j in range(bY):
            theta = Cochain(F.Y, k, HY[:, j])
            A[:, j] = HX.T @ pullback(theta, cF).values
        Bm = np.zeros((bY, bX))
        for j in range(bX):
            theta = Cochain(F.X, k, HX[:, j])
            Bm[:, j] = HY.T @ pullback(theta, cFbar).values
        ny = F.Y.n_simplices(k)
        ratio = 0.0
        if ny:
            thetas = rng.standard_normal((trials, ny))
            n_t, _, _ = luxemburg_values(phi, thetas, np.ones(ny))
            pulled = np.zeros((trials, F.X.n_simplices(k)))
            for t in range(trials):
                pulled[t] = pullback(Cochain(F.Y, k, thetas[t]), cF).values
            n_p, _, _ = luxemburg_values(phi, pulled, np.ones(F.X.n_simplices(k)))
            mask = n_t > 0
            ratio = float(np.max(n_p[mask] / n_t[mask])) if mask.any() else 0.0
        N_k = max(cF.constants.get(k, {}).get("N", 1.0), 1.0)
        L_k = max(cF.constants.get(k, {}).get("L", 1), 1)
        D = cF.multiplicity_bound(k)
        out[k] = InducedMapReport(k, A, Bm, A @ Bm, Bm @ A, ratio,
                                  float(N_k * L_k * D))
    return out
