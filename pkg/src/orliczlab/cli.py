"""Command-line driver: scenario dispatch, JSON reports, reproducible seeds.

Every scenario assembles a Report whose `checks` table carries one boolean
per asserted invariant; the process exits 0 exactly when all of them hold.
Reruns with the same config and seed produce byte-identical reports except
for the wall-time field.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from orliczlab import bicomplex, forms, groupconv, qimaps, simplicial
from orliczlab.orlicz import (
    InputError,
    MeasureSpace,
    YoungFunction,
    luxemburg_norm,
    young_from_spec,
)


@dataclass
class Report:
    scenario: str
    config: dict
    values: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "config": self.config,
            "values": self.values,
            "residuals": self.residuals,
            "constants": self.constants,
            "checks": self.checks,
            "passed": self.passed,
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(payload, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _load_inline_or_file(spec):
    if isinstance(spec, str):
        if spec.endswith(".json"):
            with open(spec) as fh:
                return json.load(fh)
        s = spec.strip()
        if s.startswith("{") or s.startswith("["):
            return json.loads(s)
        if ":" in s:  # shorthand like cycle:6 or random:12:seed=3
            parts = s.split(":")
            out = {"kind": parts[0]}
            if len(parts) > 1 and parts[1]:
                out["n"] = int(parts[1])
            return out
        if s in ("torus", "filled_triangle"):
            return {"kind": s}
    return spec


# ---------------------------------------------------------------------------
# Scenario implementations


def _scenario_norm(cfg, rng):
    phi = young_from_spec(cfg.get("phi", "p2"))
    values = np.asarray(cfg["values"], dtype=float)
    weights = np.asarray(cfg.get("weights", np.ones(len(values))), dtype=float)
    space = MeasureSpace(tuple(range(len(values))), weights)
    tol = float(cfg.get("tol", 1e-10))
    res = luxemburg_norm(phi, values, space, tol=tol)
    checks = {"modular_at_norm_le_1": res.value == 0.0 or res.modular_at_value <= 1 + 1e-8}
    return ({"norm": res.value, "iterations": res.iterations},
            {"bracket_width": res.bracket[1] - res.bracket[0]}, {}, checks)


def _scenario_cohomology(cfg, rng):
    X = simplicial.build_complex(_load_inline_or_file(cfg["complex"]))
    k = int(cfg.get("degree", 1))
    dims = {f"H{j}": simplicial.cohomology_dims(X, j) for j in range(X.dim + 1)}
    euler = X.euler_characteristic()
    alt = sum((-1) ** j * dims[f"H{j}"] for j in range(X.dim + 1))
    return ({"dims": dims, "requested_degree_dim": dims.get(f"H{k}", 0),
             "euler": euler},
            {}, {"N1": X.stats()["N1"]},
            {"euler_matches_alternating_sum": euler == alt})


def _scenario_reduced(cfg, rng):
    phi = young_from_spec(cfg.get("phi", "p2"))
    X = simplicial.build_complex(_load_inline_or_file(cfg["complex"]))
    theta_spec = _load_inline_or_file(cfg["theta"])
    vals = np.asarray(theta_spec["values"] if isinstance(theta_spec, dict) else theta_spec,
                      dtype=float)
    theta = simplicial.Cochain(X, int(cfg.get("degree", 1)), vals)
    eta, residual = simplicial.reduced_representative(
        phi, X, theta, closed_tol=float(cfg.get("closed_tol", 1e-9)))
    start = simplicial.cochain_norm(phi, theta)
    return ({"residual": residual, "initial_norm": start},
            {}, {}, {"residual_le_initial": residual <= start * (1 + 1e-9) + 1e-12})


def _scenario_qi_check(cfg, rng):
    X = simplicial.build_complex(_load_inline_or_file(cfg["x"]))
    Y = simplicial.build_complex(_load_inline_or_file(cfg["y"]))
    vm_raw = _load_inline_or_file(cfg["map"])
    if isinstance(vm_raw, dict) and "vertex_map" in vm_raw:
        vm_raw = vm_raw["vertex_map"]
    vm = {int(k) if isinstance(k, str) else k: v for k, v in
          (vm_raw.items() if isinstance(vm_raw, dict) else enumerate(vm_raw))}
    F = qimaps.QuasiIsometry(X, Y, vm)
    phi = young_from_spec(cfg.get("phi", "p2"))
    reports = qimaps.induced_cohomology_map(F, phi, trials=int(cfg.get("trials", 200)),
                                            rng=rng)
    values, residuals, constants, checks = {}, {}, {}, {}
    for k, r in reports.items():
        values[f"H{k}_matrix_F"] = r.matrix_F.tolist()
        residuals[f"H{k}_iso_residual"] = r.iso_residual
        constants[f"H{k}_pullback_bound"] = r.pullback_bound
        constants[f"H{k}_pullback_ratio"] = r.pullback_ratio
        checks[f"H{k}_isomorphism"] = r.iso_residual <= 1e-9
        checks[f"H{k}_continuity"] = r.pullback_ratio <= r.pullback_bound * (1 + 1e-9)
    constants["lambda"] = F.lam
    constants["eps"] = F.eps
    return values, residuals, constants, checks


_FORM_CATALOG = {
    "dx": (1, lambda p: np.stack([np.ones(p.shape[:-1]), np.zeros(p.shape[:-1])], -1)),
    "poly1": (1, lambda p: np.stack([p[..., 0] ** 2 * p[..., 1] - p[..., 1] ** 3,
                                     p[..., 0] ** 3 + 2 * p[..., 0] * p[..., 1]], -1)),
    "poly2": (2, lambda p: (p[..., 0] ** 3 - 3 * p[..., 0] * p[..., 1] ** 2 + p[..., 1])[..., None]),
}


def _scenario_poincare(cfg, rng):
    grid = int(cfg.get("grid", 64))
    t_nodes = int(cfg.get("t_nodes", 32))
    tol = float(cfg.get("tol", 1e-2))
    B = forms.unit_ball(grid)
    name = cfg.get("form", "poly1")
    spec = _load_inline_or_file(name)
    if isinstance(spec, dict):
        deg = int(spec["degree"])
        ncomp = len(forms.form_components(2, deg))
        coeffs = np.asarray(spec["coefficients"], dtype=float).reshape(B.shape + (ncomp,))
        w = forms.DiscreteForm(B, deg, coeffs)
    else:
        deg, fn = _FORM_CATALOG[str(spec)]
        w = forms.form_from_function(B, deg, fn)
    resid = forms.homotopy_identity_residual(w, t_nodes=t_nodes)
    return ({"degree": deg, "grid": grid},
            {"homotopy_identity": resid}, {},
            {"identity_within_tol": resid <= tol})


def _scenario_zigzag(cfg, rng):
    if cfg.get("model", "torus") != "torus":
        raise InputError("zigzag scenario supports the flat torus model")
    grid = int(cfg.get("grid", 64))
    cover_grid = int(cfg.get("cover", 4))
    overlap = float(cfg.get("overlap", 0.3))
    tol = float(cfg.get("tol", 1e-2))
    phi = young_from_spec(cfg.get("phi", "p2"))
    T2 = forms.flat_torus(grid)
    cov = bicomplex.build_cover_nerve(T2, grid=cover_grid, overlap=overlap)
    dims = [simplicial.cohomology_dims(cov.nerve, k) for k in range(3)]
    hb = simplicial.harmonic_basis(cov.nerve, 1)
    periods = []
    round_res = []
    d_res = []
    delta_res = []
    for j in range(hb.shape[1]):
        th = simplicial.Cochain(cov.nerve, 1, hb[:, j])
        fj, rep_a = bicomplex.zigzag_to_form(cov, th, phi)
        th2, rep_d = bicomplex.zigzag_to_simplicial(cov, fj, phi)
        d_res.append(rep_a["d_residual"])
        delta_res.append(rep_d["delta_residual"])
        diff = simplicial.Cochain(cov.nerve, 1, th2.values - th.values)
        _, rr = simplicial.reduced_representative(phi, cov.nerve, diff, closed_tol=10 * tol)
        round_res.append(rr)
        periods.append(bicomplex.torus_periods(fj))
    P = np.array(periods).T
    Pn = P / np.abs(P).max(axis=0, keepdims=True)
    det = float(abs(np.linalg.det(Pn)))
    checks = {
        "nerve_H1_dim_2": dims[1] == 2,
        "closed_outputs": max(d_res + delta_res) <= tol,
        "roundtrip_classes": max(round_res) <= tol,
        "period_det": det > 0.5,
    }
    return ({"nerve_dims": dims, "period_matrix": P.tolist()},
            {"ascend_d": max(d_res), "descend_delta": max(delta_res),
             "roundtrip_reduced": max(round_res)},
            {"normalized_period_det": det}, checks)


def _group_setup(cfg):
    model = cfg.get("model", "r1")
    grid = int(cfg.get("grid", 128))
    radius = float(cfg.get("radius", 0.3))
    nodes = int(cfg.get("kernel_nodes", 0))
    if model == "r1":
        G = groupconv.GroupModel("abelian", 1)
        dom = forms.euclidean_box([(-3, 3)], grid)
        nodes = nodes or 32
    elif model == "r2":
        G = groupconv.GroupModel("abelian", 2)
        dom = forms.euclidean_box([(-2, 2), (-2, 2)], grid)
        nodes = nodes or 16
    elif model == "halfplane":
        G = groupconv.GroupModel("affine", 2)
        dom = G.default_domain(n_points=grid)
        nodes = nodes or 16
    else:
        raise InputError(f"unknown group model {model!r}")
    ker = groupconv.Kernel(G, radius=radius, nodes_per_axis=nodes)
    return G, dom, ker


def _bump_form(dom, degree):
    n = dom.n

    def bump(p):
        s = np.ones(p.shape[:-1])
        for ax in range(n):
            lo, hi = dom.axes[ax][0], dom.axes[ax][-1]
            c, half = 0.5 * (lo + hi), 0.30 * (hi - lo)
            u = (p[..., ax] - c) / half
            s = s * np.where(np.abs(u) < 1, np.exp(-1 / np.maximum(1 - u ** 2, 1e-12)), 0.0)
        return s

    ncomp = len(forms.form_components(n, degree))

    def fn(p):
        b = bump(p)
        return np.stack([b * (0.5 + 0.5 * i) for i in range(ncomp)], -1)

    return forms.form_from_function(dom, degree, fn)


def _scenario_convolve(cfg, rng):
    G, dom, ker = _group_setup(cfg)
    tol = float(cfg.get("tol", 1e-2))
    w = _bump_form(dom, int(cfg.get("degree", 1)))
    rep = groupconv.derivative_commutation_check(w, ker, G)
    viol, ratio, C = groupconv.pointwise_convolution_bound(w, ker, G, interp_order=1)
    checks = {
        "derivative_commutation": rep.relative <= tol,
        "pointwise_bound": viol <= 1e-12,
        "kernel_unit_mass": ker.unit_mass_residual <= 1e-8,
    }
    return ({"kernel": ker.to_json()},
            {"commutation": rep.residual, "commutation_relative": rep.relative,
             "pointwise_violation": viol},
            {"pointwise_C": C, "pointwise_ratio": ratio}, checks)


def _scenario_cartan(cfg, rng):
    G, dom, ker = _group_setup(cfg)
    model = cfg.get("model", "r1")
    tol = float(cfg.get("tol", 2e-2 if model == "halfplane" else 1e-2))
    t_nodes = int(cfg.get("t_nodes", 16))
    phi = young_from_spec(cfg.get("phi", "p2"))
    w = _bump_form(dom, int(cfg.get("degree", 1)))
    rep = groupconv.cartan_identity_check(w, ker, G, phi, t_nodes=t_nodes)
    checks = {"cartan_identity": rep.relative <= tol,
              "operator_ratios_finite": np.isfinite(rep.conv_ratio) and np.isfinite(rep.h_ratio)}
    return ({"norms": {"omega": rep.norm_omega, "conv": rep.norm_conv, "h": rep.norm_h}},
            {"cartan": rep.residual, "cartan_relative": rep.relative},
            {"conv_ratio": rep.conv_ratio, "h_ratio": rep.h_ratio}, checks)


def _scenario_bourdon(cfg, rng):
    rep = forms.bourdon_example(
        p=float(cfg.get("p", 2.0)), kappa=float(cfg.get("kappa", 2.0)),
        N=int(cfg.get("N", 100)), eps=float(cfg.get("eps", 0.05)),
        N_series=int(cfg.get("N_series", 1_000_000)))
    checks = {
        "divergent_global": rep.divergent,
        "growth": rep.growth_ok,
        "interval_norms": rep.interval_bound_ok,
        "piecewise_summable": rep.cauchy_ok,
        "tail_integral_test": rep.tail_ok,
    }
    return (rep.to_json(), {}, {"divergence_threshold": rep.divergence_threshold}, checks)


_SCENARIOS = {
    "norm": _scenario_norm,
    "cohomology": _scenario_cohomology,
    "reduced": _scenario_reduced,
    "qi-check": _scenario_qi_check,
    "poincare": _scenario_poincare,
    "zigzag": _scenario_zigzag,
    "convolve": _scenario_convolve,
    "cartan": _scenario_cartan,
    "bourdon": _scenario_bourdon,
}

_RANDOMIZED = {"qi-check"}


def run_scenario(config: dict) -> Report:
    """Dispatch one scenario config to its module pipeline."""
    name = config.get("scenario")
    if name not in _SCENARIOS:
        raise InputError(f"unknown scenario {name!r}")
    seed = config.get("seed")
    if name in _RANDOMIZED and seed is None:
        raise InputError(f"scenario {name!r} is randomized; --seed is mandatory")
    rng = np.random.default_rng(int(seed)) if seed is not None else None
    t0 = time.perf_counter()
    values, residuals, constants, checks = _SCENARIOS[name](config, rng)
    report = Report(name, config, values, residuals, constants, checks,
                    wall_time_s=time.perf_counter() - t0)
    return report


def run_many(configs: list, jobs: int = 1) -> list:
    if jobs <= 1 or len(configs) <= 1:
        return [run_scenario(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_scenario, configs))


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(sub):
    sub.add_argument("--config", help="JSON or TOML config file (flags override)")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--tol", type=float, default=None)
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--out", help="write the JSON report here")


def _build_parser():
    ap = argparse.ArgumentParser(prog="orliczlab",
                                 description="Orlicz cochain/form laboratory scenarios")
    sp = ap.add_subparsers(dest="scenario", required=True)

    norm = sp.add_parser("norm", help="Luxemburg norm of finite data")
    norm.add_argument("--phi", default="p2")
    norm.add_argument("--values", help="comma list or JSON file")
    norm.add_argument("--weights", default=None)
    _add_common(norm)

    coh = sp.add_parser("cohomology", help="cohomology dimensions of a complex")
    coh.add_argument("--complex", required=True, help="generator spec or JSON file")
    coh.add_argument("--degree", type=int, default=1)
    _add_common(coh)

    red = sp.add_parser("reduced", help="norm-minimizing reduced representative")
    red.add_argument("--phi", default="p2")
    red.add_argument("--complex", required=True)
    red.add_argument("--theta", required=True)
    red.add_argument("--degree", type=int, default=1)
    _add_common(red)

    qi = sp.add_parser("qi-check", help="quasi-isometry invariance instance")
    qi.add_argument("--x", required=True)
    qi.add_argument("--y", required=True)
    qi.add_argument("--map", required=True)
    qi.add_argument("--phi", default="p2")
    _add_common(qi)

    po = sp.add_parser("poincare", help="averaged Poincare homotopy identity")
    po.add_argument("--grid", type=int, default=64)
    po.add_argument("--form", default="poly1")
    po.add_argument("--t-nodes", dest="t_nodes", type=int, default=32)
    _add_common(po)

    zz = sp.add_parser("zigzag", help="Weil staircase roundtrip on the torus")
    zz.add_argument("--model", default="torus")
    zz.add_argument("--grid", type=int, default=64)
    zz.add_argument("--cover", type=int, default=4)
    zz.add_argument("--overlap", type=float, default=0.3)
    _add_common(zz)

    cv = sp.add_parser("convolve", help="kernel convolution checks")
    cv.add_argument("--model", default="r1")
    cv.add_argument("--grid", type=int, default=128)
    cv.add_argument("--radius", type=float, default=0.3)
    cv.add_argument("--degree", type=int, default=1)
    _add_common(cv)

    ca = sp.add_parser("cartan", help="flow-homotopy Cartan identity")
    ca.add_argument("--model", default="r1")
    ca.add_argument("--grid", type=int, default=128)
    ca.add_argument("--radius", type=float, default=0.3)
    ca.add_argument("--degree", type=int, default=1)
    ca.add_argument("--t-nodes", dest="t_nodes", type=int, default=16)
    _add_common(ca)

    bd = sp.add_parser("bourdon", help="local/global norm dichotomy report")
    bd.add_argument("--p", type=float, default=2.0)
    bd.add_argument("--kappa", type=float, default=2.0)
    bd.add_argument("--N", type=int, default=100)
    bd.add_argument("--eps", type=float, default=0.05)
    bd.add_argument("--N-series", dest="N_series", type=int, default=1_000_000)
    _add_common(bd)

    return ap


def _config_from_args(args) -> dict:
    cfg = {}
    if args.config:
        if args.config.endswith(".toml"):
            import tomllib

            with open(args.config, "rb") as fh:
                cfg = tomllib.load(fh)
        else:
            with open(args.config) as fh:
                cfg = json.load(fh)
    for key, val in vars(args).items():
        if key in ("config", "out", "jobs") or val is None:
            continue
        cfg[key] = val
    if isinstance(cfg.get("values"), str) and not cfg["values"].endswith(".json"):
        cfg["values"] = [float(v) for v in cfg["values"].split(",")]
    if isinstance(cfg.get("weights"), str) and not cfg["weights"].endswith(".json"):
        cfg["weights"] = [float(v) for v in cfg["weights"].split(",")]
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = _config_from_args(args)
    if "scenarios" in cfg:
        reports = run_many(cfg["scenarios"], jobs=args.jobs)
    else:
        reports = [run_scenario(cfg)]
    payload = reports[0].to_json() if len(reports) == 1 else \
        "[" + ",\n".join(r.to_json() for r in reports) + "]"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
