"""Young functions, finite measure spaces, and the Luxemburg-norm solver.

The Luxemburg norm of f over (Z, mu) is inf{gamma > 0 : sum_Z mu * phi(f/gamma) <= 1}.
On a finite atom list the modular gamma -> sum mu*phi(f/gamma) is continuous and
monotone nonincreasing, so the infimum is located by bisection after a geometric
bracket expansion.  Everything here is pure and vectorized; the batched solver
`luxemburg_values` is what the property suites call in bulk.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar


class InputError(ValueError):
    """Invalid argument (non-finite data, nonpositive gamma, bad parameters)."""


class ResolutionError(RuntimeError):
    """A sampling grid was too coarse to bracket the quantity it must resolve."""


# ---------------------------------------------------------------------------
# Young functions


class YoungFunction:
    """Even convex function with phi(0) = 0 and phi(t) > 0 for t != 0.

    Supported kinds:
      * ``power``      phi(t) = |t|^p, p >= 1
      * ``log_damped`` phi(t) = |t|^p / log(e + |t|^-1)^kappa  (0 at t = 0)
      * ``scaled``     K * base(t)
      * ``table``      convex piecewise-linear interpolant of sampled values
    """

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = dict(params)
        if kind == "power":
            if params["p"] < 1:
                raise InputError(f"power exponent must be >= 1, got {params['p']}")
        elif kind == "log_damped":
            if params["p"] <= 1 or params["kappa"] <= 0:
                raise InputError("log-damped family requires p > 1 and kappa > 0")
        elif kind == "scaled":
            if params["K"] <= 0:
                raise InputError("scale must be positive")
            self.base: YoungFunction = params["base"]
        elif kind == "table":
            ts = np.asarray(params["ts"], dtype=float)
            vs = np.asarray(params["values"], dtype=float)
            if ts[0] != 0.0 or vs[0] != 0.0:
                raise InputError("table must start at (0, 0)")
            if np.any(np.diff(ts) <= 0) or np.any(vs[1:] <= 0):
                raise InputError("table abscissae must increase and values be positive")
            slopes = np.diff(vs) / np.diff(ts)
            if np.any(np.diff(slopes) < -1e-12):
                raise InputError("table values are not convex")
            self._ts, self._vs = ts, vs
            self._slope_end = slopes[-1]
        else:
            raise InputError(f"unknown Young function kind {kind!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def power(cls, p: float) -> "YoungFunction":
        return cls("power", {"p": float(p)})

    @classmethod
    def log_damped(cls, p: float, kappa: float) -> "YoungFunction":
        return cls("log_damped", {"p": float(p), "kappa": float(kappa)})

    def scaled(self, K: float) -> "YoungFunction":
        """K*phi as a Young function (used by the norm-equivalence checks)."""
        if self.kind == "scaled":
            return YoungFunction("scaled", {"K": K * self.params["K"], "base": self.base})
        return YoungFunction("scaled", {"K": float(K), "base": self})

    @classmethod
    def tabulated(cls, ts: Sequence[float], values: Sequence[float]) -> "YoungFunction":
        return cls("table", {"ts": list(ts), "values": list(values)})

    # -- evaluation ----------------------------------------------------------

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise InputError("non-finite argument to Young function")
        a = np.abs(t)
        if self.kind == "power":
            return a ** self.params["p"]
        if self.kind == "log_damped":
            p, kappa = self.params["p"], self.params["kappa"]
            out = np.zeros_like(a)
            nz = a > 0
            with np.errstate(divide="ignore"):
                out[nz] = a[nz] ** p / np.log(math.e + 1.0 / a[nz]) ** kappa
            return out if out.ndim else float(out)
        if self.kind == "scaled":
            return self.params["K"] * self.base(a)
        # table
        out = np.where(
            a <= self._ts[-1],
            np.interp(a, self._ts, self._vs),
            self._vs[-1] + self._slope_end * (a - self._ts[-1]),
        )
        return out if out.ndim else float(out)

    def derivative(self, t):
        """Right derivative (a subgradient selection for the convex solvers)."""
        t = np.asarray(t, dtype=float)
        a, s = np.abs(t), np.sign(t)
        if self.kind == "power":
            p = self.params["p"]
            if p == 1:
                return s
            return s * p * a ** (p - 1)
        if self.kind == "log_damped":
            p, kappa = self.params["p"], self.params["kappa"]
            out = np.zeros_like(a)
            nz = a > 0
            an = a[nz]
            L = np.log(math.e + 1.0 / an)
            # d/dt [t^p L^-k] = t^(p-1) L^-k (p + k / (L (t e + 1)))
            out[nz] = an ** (p - 1) * L ** (-kappa) * (p + kappa / (L * (an * math.e + 1.0)))
            out = out * s
            return out if out.ndim else float(out)
        if self.kind == "scaled":
            return self.params["K"] * self.base.derivative(t)
        idx = np.clip(np.searchsorted(self._ts, a, side="right") - 1, 0, len(self._ts) - 2)
        slopes = (self._vs[idx + 1] - self._vs[idx]) / (self._ts[idx + 1] - self._ts[idx])
        out = np.where(a > self._ts[-1], self._slope_end, slopes) * s
        return out if out.ndim else float(out)

    def inverse(self, s: float, tol: float = 1e-12) -> float:
        """Generalized right inverse inf{t >= 0 : phi(t) >= s}, by bisection."""
        if s <= 0:
            return 0.0
        hi = 1.0
        while self(hi) < s:
            hi *= 2.0
            if hi > 1e300:
                raise ResolutionError("phi inverse bracket expansion diverged")
        lo = 0.0
        while hi - lo > tol * max(hi, 1.0):
            mid = 0.5 * (lo + hi)
            if self(mid) >= s:
                hi = mid
            else:
                lo = mid
        return hi

    # -- validation and serialization ----------------------------------------

    def validate(self, trials: int = 200, seed: int = 0) -> None:
        """Spot-check the Young axioms on random samples; raises on violation."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(-10, 10, size=trials)
        if not np.allclose(self(t), self(-t), rtol=0, atol=1e-12):
            raise InputError("function is not even")
        if self(0.0) != 0.0:
            raise InputError("phi(0) != 0")
        small = rng.uniform(1e-9, 10, size=trials)
        if np.any(self(small) <= 0):
            raise InputError("phi vanishes away from 0")
        t1, t2 = rng.uniform(-10, 10, size=(2, trials))
        lam = rng.uniform(0, 1, size=trials)
        lhs = self(lam * t1 + (1 - lam) * t2)
        rhs = lam * self(t1) + (1 - lam) * self(t2)
        if np.any(lhs > rhs + 1e-12):
            raise InputError("convexity check failed")
        a = np.sort(rng.uniform(0, 10, size=trials))
        if np.any(np.diff(self(a)) < -1e-12):
            raise InputError("not nondecreasing on [0, inf)")

    def to_json(self) -> dict:
        if self.kind == "scaled":
            return {"kind": "scaled", "params": {"K": self.params["K"], "base": self.base.to_json()}}
        return {"kind": self.kind, "params": {k: v for k, v in self.params.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "YoungFunction":
        kind, params = obj["kind"], dict(obj["params"])
        if kind == "scaled":
            params["base"] = cls.from_json(params["base"])
        return cls(kind, params)

    def __repr__(self):
        if self.kind == "power":
            return f"YoungFunction.power({self.params['p']})"
        if self.kind == "log_damped":
            return f"YoungFunction.log_damped({self.params['p']}, {self.params['kappa']})"
        if self.kind == "scaled":
            return f"{self.base!r}.scaled({self.params['K']})"
        return "YoungFunction.tabulated(...)"


# ---------------------------------------------------------------------------
# Measure spaces


@dataclass(frozen=True)
class MeasureSpace:
    """Finite weighted atom list; weights strictly positive."""

    ids: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.ids):
            raise InputError("weights must be one per atom")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be strictly positive and finite")
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def counting(cls, n: int) -> "MeasureSpace":
        return cls(tuple(range(n)), np.ones(n))

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "MeasureSpace":
        ids, weights = zip(*atoms) if atoms else ((), ())
        return cls(tuple(ids), np.asarray(weights, dtype=float))

    def to_json(self) -> dict:
        return {"atoms": [[i, float(w)] for i, w in zip(self.ids, self.weights)]}

    @classmethod
    def from_json(cls, obj: dict) -> "MeasureSpace":
        return cls.from_atoms([tuple(a) for a in obj["atoms"]])


# ---------------------------------------------------------------------------
# Modular and Luxemburg norm


def modular(phi: YoungFunction, f, space: MeasureSpace, gamma: float) -> float:
    """sum_atoms weight * phi(f/gamma); monotone nonincreasing in gamma."""
    if gamma <= 0:
        raise InputError("gamma must be positive")
    v = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputError("f must be finite on every atom")
    if v.shape != space.weights.shape:
        raise InputError("f must be defined on every atom of the space")
    return float(np.dot(space.weights, phi(v / gamma)))


def luxemburg_values(phi, values, weights, tol: float = 1e-10, max_iter: int = 200):
    """Batched Luxemburg norms.

    values: array (..., N); weights: (N,) or broadcastable.  Returns the norm
    array of shape (...,) along with the iteration count and final brackets of
    the worst-converged problem.
    """
    v = np.asarray(values, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
    B = v.shape[0]
    out = np.zeros(B)
    lo_out = np.zeros(B)
    hi_out = np.zeros(B)
    amax = np.abs(v).max(axis=1)
    act = amax > 0
    iters = 0
    if act.any():
        va, wa = v[act], w[act]

        def mod(g):
            return np.einsum("ij,ij->i", wa, phi(va / g[:, None]))

        hi = amax[act].copy()
        # expand upward until the modular drops to <= 1
        m = mod(hi)
        grow = m > 1
        while grow.any():
            hi[grow] *= 2.0
            m = mod(hi)
            grow = m > 1
            iters += 1
            if iters > max_iter:
                raise ResolutionError("Luxemburg bracket expansion failed")
        # contract downward until the modular exceeds 1
        lo = hi / 2.0
        m = mod(lo)
        shrink = m <= 1
        while shrink.any():
            hi[shrink] = lo[shrink]
            lo[shrink] /= 2.0
            m = mod(lo)
            shrink = m <= 1
            iters += 1
            if iters > max_iter:
                raise ResolutionError("Luxemburg bracket contraction failed")
        while np.any((hi - lo) > tol * hi):
            mid = 0.5 * (lo + hi)
            m = mod(mid)
            leq = m <= 1
            hi[leq] = mid[leq]
            lo[~leq] = mid[~leq]
            iters += 1
            if iters > 10 * max_iter:
                break
        out[act] = hi
        lo_out[act], hi_out[act] = lo, hi
    result = out[0] if single else out
    return result, iters, (lo_out, hi_out)


@dataclass(frozen=True)
class NormResult:
    value: float
    iterations: int
    bracket: tuple
    modular_at_value: float

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


def luxemburg_norm(phi: YoungFunction, f, space: MeasureSpace, tol: float = 1e-10) -> NormResult:
    """Luxemburg norm on a finite measure space (0 iff f vanishes on all atoms)."""
    v = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputError("f must be finite on every atom")
    value, iters, (lo, hi) = luxemburg_values(phi, v, space.weights, tol=tol)
    value = float(value)
    mod_at = modular(phi, v, space, value) if value > 0 else 0.0
    return NormResult(value, iters, (float(lo[0]), float(hi[0])), mod_at)


# ---------------------------------------------------------------------------
# Convex conjugate (numeric Legendre transform)


def conjugate_eval(phi: YoungFunction, s: float, t_max: float | None = None,
                   num: int = 4097) -> float:
    """sup_t (s*t - phi(t)) over a grid with local refinement.

    Raises ResolutionError when the grid cannot bracket the maximizer.
    """
    s = abs(float(s))
    if s == 0.0:
        return 0.0
    if t_max is None:
        # expand until the objective is decreasing at the right edge
        t_max = 1.0
        for _ in range(200):
            ts = np.linspace(0.0, t_max, 17)
            obj = s * ts - phi(ts)
            if np.argmax(obj) < len(ts) - 1:
                break
            t_max *= 2.0
        else:
            raise ResolutionError("conjugate maximizer escaped every bracket")
    ts = np.linspace(0.0, t_max, num)
    obj = s * ts - phi(ts)
    i = int(np.argmax(obj))
    if i == num - 1 and obj[-1] > obj[-2]:
        raise ResolutionError("conjugate grid too small to bracket the maximizer")
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, num - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -(s * t - float(phi(t))), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(hi, 1.0)})
        best = max(float(obj[i]), -float(res.fun))
    else:
        best = float(obj[i])
    return max(best, 0.0)


class ConjugateFunction:
    """Evaluable convex conjugate phi*; may vanish on a neighborhood of 0.

    Not a YoungFunction (phi* of |t| is 0 on [-1, 1]) but exposes the same
    call protocol, so the Luxemburg solver accepts it.
    """

    def __init__(self, phi: YoungFunction, t_max: float | None = None, num: int = 2049):
        self.phi = phi
        self.t_max = t_max
        self.num = num
        self._cache: dict = {}

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(np.abs(s)).ravel()
        out = np.array([self._eval_one(x) for x in flat])
        out = out.reshape(np.atleast_1d(s).shape)
        return out if np.ndim(s) else float(out)

    def _eval_one(self, s: float) -> float:
        key = round(float(s), 15)
        if key not in self._cache:
            self._cache[key] = conjugate_eval(self.phi, s, t_max=self.t_max, num=self.num)
        return self._cache[key]


# ---------------------------------------------------------------------------
# Inequality reports


@dataclass(frozen=True)
class EquivalenceReport:
    norm_phi: float
    norm_K_phi: float
    K: float

    @property
    def ratio(self) -> float:
        return self.norm_K_phi / self.norm_phi if self.norm_phi > 0 else 1.0

    @property
    def holds(self) -> bool:
        tol = 1e-8
        return (self.norm_phi <= self.norm_K_phi * (1 + tol)
                and self.norm_K_phi <= self.K * self.norm_phi * (1 + tol))


def check_norm_equivalence(phi: YoungFunction, K: float, f, space: MeasureSpace,
                           tol: float = 1e-10) -> EquivalenceReport:
    """Norms under phi and K*phi: ||f||_phi <= ||f||_{K phi} <= K ||f||_phi for K >= 1."""
    if K < 1:
        raise InputError("K must be >= 1")
    n1 = luxemburg_norm(phi, f, space, tol=tol).value
    n2 = luxemburg_norm(phi.scaled(K), f, space, tol=tol).value
    return EquivalenceReport(n1, n2, K)


def holder_check(phi: YoungFunction, f, g, space: MeasureSpace,
                 tol: float = 1e-8) -> tuple:
    """Both sides of ||fg||_L1 <= 2 ||f||_phi ||g||_{phi*}; asserts the inequality."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    lhs = float(np.dot(space.weights, np.abs(f * g)))
    nf = luxemburg_norm(phi, f, space).value
    conj = ConjugateFunction(phi)
    ng, _, _ = luxemburg_values(conj, g, space.weights)
    rhs = 2.0 * nf * float(ng)
    if lhs > rhs * (1 + tol) + 1e-15:
        raise AssertionError(f"Hoelder inequality violated: {lhs} > {rhs}")
    return lhs, rhs


def l1_embedding_bound(phi: YoungFunction, f, space: MeasureSpace) -> tuple:
    """(||f||_L1, mu(Z) phi^-1(1/mu(Z)) ||f||_phi); asserts lhs <= bound."""
    f = np.asarray(f, dtype=float)
    mass = space.total_mass
    l1 = float(np.dot(space.weights, np.abs(f)))
    nphi = luxemburg_norm(phi, f, space).value
    bound = mass * phi.inverse(1.0 / mass) * nphi
    if l1 > bound * (1 + 1e-8) + 1e-15:
        raise AssertionError(f"L1 embedding bound violated: {l1} > {bound}")
    return l1, bound


def young_from_spec(spec) -> YoungFunction:
    """Parse 'p2', 'p1.5', 'log:2:2', a JSON dict, or pass through a YoungFunction."""
    if isinstance(spec, YoungFunction):
        return spec
    if isinstance(spec, dict):
        return YoungFunction.from_json(spec)
    s = str(spec)
    if s.startswith("log:"):
        _, p, kappa = s.split(":")
        return YoungFunction.log_damped(float(p), float(kappa))
    if s.startswith("p"):
        return YoungFunction.power(float(s[1:]))
    raise InputError(f"unrecognized Young function spec {spec!r}")
