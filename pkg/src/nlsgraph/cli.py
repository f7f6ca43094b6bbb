"""Command-line front end: ``nlsgraph {spectrum,shoot,evolve,families,verify}``.

Experiments are described by a JSON config; command-line flags override
fields of the file.  Exit codes: 0 success, 1 configuration error,
2 failed assertion, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from . import dynamics as dy
from . import graph as gc
from . import operators as ops
from . import shooting as sh
from . import stationary as st
from .errors import (FactorizationSingular, GraphNLSError, IntegratorFailure, NoConvergence,
                     NoGrowthDetected, NonlinearSolveDiverged, NonPositiveLminusBeyondKernel,
                     RootRefinementFailure)

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL_ERRORS = (NonlinearSolveDiverged, NoConvergence, IntegratorFailure,
                    RootRefinementFailure, FactorizationSingular, NonPositiveLminusBeyondKernel)


class ConfigError(Exception):
    """Bad experiment configuration; the message names the offending field."""


# ---------------------------------------------------------------------------
# configuration


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"field '{dotted}': '{k}' is not an object")
    node[keys[-1]] = value


def build_config(args) -> dict:
    cfg = _load_json(args.config) if getattr(args, "config", None) else {}
    for flag, key in (("edges", "graph.edges"), ("incoming", "graph.incoming"),
                      ("p", "graph.p"), ("a", "a"), ("spacing", "grid.spacing"),
                      ("tau", "tau"), ("t_end", "t_end"), ("mode", "mode")):
        val = getattr(args, flag, None)
        if val is not None:
            _set_path(cfg, key, val)
    if getattr(args, "alphas", None) is not None:
        _set_path(cfg, "graph.alphas", args.alphas)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(cfg, key.strip(), value)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    return cfg


def _number(cfg, key, default=None, positive=False):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(f"field '{key}': required")
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"field '{key}': expected a finite number, got {val!r}")
    if positive and val <= 0:
        raise ConfigError(f"field '{key}': must be positive, got {val}")
    return float(val)


def graph_from_config(cfg: dict, validate: bool = True) -> gc.StarGraph:
    spec = cfg.get("graph")
    if not isinstance(spec, dict):
        raise ConfigError("field 'graph': required object with edges, incoming, alphas, p")
    spec = dict(spec)
    n = spec.get("edges")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError(f"field 'graph.edges': expected an integer, got {n!r}")
    spec.setdefault("incoming", n // 2)
    spec.setdefault("p", 1.0)
    spec.setdefault("alphas", [1.0] * n)
    alphas = spec["alphas"]
    if not isinstance(alphas, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in alphas):
        raise ConfigError("field 'graph.alphas': expected a list of numbers")
    try:
        return gc.graph_from_dict(spec, validate=validate)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"field 'graph': {exc}") from exc
    except GraphNLSError as exc:
        raise ConfigError(f"field 'graph': {exc}") from exc


def grid_for(cfg: dict, graph: gc.StarGraph, a: float) -> gc.EdgeGrid:
    spec = cfg.get("grid", {})
    if not isinstance(spec, dict):
        raise ConfigError("field 'grid': expected an object")
    h = _number(spec, "spacing", 0.01, positive=True)
    if "length" in spec:
        return gc.EdgeGrid.with_spacing(_number(spec, "length", positive=True), h)
    return gc.EdgeGrid.for_states(graph.power, a, spacing=h)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def _shooting_report(cfg, graph, a):
    window = cfg.get("window")
    if window is not None:
        if not (isinstance(window, list) and len(window) == 2):
            raise ConfigError("field 'window': expected [lo, hi]")
        window = tuple(float(x) for x in window)
    return sh.find_point_spectrum(graph, a, window=window,
                                  n_grid=int(cfg.get("n_grid", 2000)))


def _theorem_check(report_counts, graph, a):
    expect = sh.predicted_counts(graph, a)
    return tuple(report_counts) == tuple(expect), expect


def cmd_shoot(args) -> int:
    cfg = build_config(args)
    graph = graph_from_config(cfg)
    a = _number(cfg, "a", 0.0)
    rep = _shooting_report(cfg, graph, a)
    out = _out_dir(args)
    payload = rep.to_dict() | {"seed": cfg["seed"], "a": a, "graph": graph.to_dict()}
    _dump(out / "shooting.json", payload)
    for e in rep.entries:
        print(f"lambda = {e.lam:+.12f}  mult {e.mult}  case {e.case}")
    print(f"morse_index {rep.morse_index}  zero_multiplicity {rep.zero_multiplicity}")
    if args.assert_theorem:
        ok, expect = _theorem_check((rep.morse_index, rep.zero_multiplicity), graph, a)
        if not ok:
            print(f"Morse index {(rep.morse_index, rep.zero_multiplicity)} != predicted {expect}",
                  file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = build_config(args)
    graph = graph_from_config(cfg)
    a = _number(cfg, "a", 0.0)
    rep = _shooting_report(cfg, graph, a)
    state = st.shifted_state(graph, a, grid=grid_for(cfg, graph, a))
    lp = ops.assemble(graph, state, "Lplus")
    shoot_vals = rep.eigenvalues
    k = max(len(shoot_vals), 1) + 2
    disc_vals = np.array([lam for lam, _ in ops.lowest_eigenpairs(lp, k)])
    disc_morse = ops.morse_index(lp)
    rows = []
    for i, lam in enumerate(shoot_vals):
        rows.append({"index": i, "shooting": float(lam), "discrete": float(disc_vals[i]),
                     "abs_diff": float(abs(disc_vals[i] - lam))})
    payload = {
        "seed": cfg["seed"], "a": a, "graph": graph.to_dict(), "grid": state.grid.to_dict(),
        "shooting": rep.to_dict(),
        "discrete": {"lowest": disc_vals.tolist(), "morse_index": disc_morse[0],
                     "zero_multiplicity": disc_morse[1], "tol_zero": lp.tol_zero},
        "cross_validation": rows,
    }
    if cfg.get("stability", False):
        lm = ops.assemble(graph, state, "Lminus")
        payload["stability"] = ops.stability_spectrum(lp, lm).to_dict()
    out = _out_dir(args)
    _dump(out / "spectrum.json", payload)
    with open(out / "crossval.txt", "w") as fh:
        fh.write(f"# seed={cfg['seed']}\n{'i':>3} {'shooting':>18} {'discrete':>18} {'|diff|':>10}\n")
        for r in rows:
            fh.write(f"{r['index']:>3} {r['shooting']:>18.12f} {r['discrete']:>18.12f} "
                     f"{r['abs_diff']:>10.2e}\n")
    print((out / "crossval.txt").read_text(), end="")
    print(f"shooting morse ({rep.morse_index}, {rep.zero_multiplicity}); "
          f"discrete morse {disc_morse}")
    if "stability" in payload:
        s = payload["stability"]
        print(f"real unstable eigenvalues {s['real_positive']}; max growth {s['max_growth_rate']:.6f}")
    if args.assert_theorem:
        ok1, expect = _theorem_check((rep.morse_index, rep.zero_multiplicity), graph, a)
        ok2 = tuple(disc_morse) == tuple(expect)
        if not (ok1 and ok2):
            print(f"Morse index mismatch: predicted {expect}", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = build_config(args)
    mode = cfg.get("mode", "stationary")
    out = _out_dir(args)
    seed = int(cfg["seed"])
    summary = {"mode": mode, "seed": seed}
    if mode == "transit":
        graph = graph_from_config(cfg, validate=bool(cfg.get("validate", True)))
        res = dy.transit_test(graph, _number(cfg, "c", 1.0, positive=True),
                              _number(cfg, "x_start", -8.0),
                              tau=_number(cfg, "tau", 1e-3, positive=True),
                              spacing=_number(cfg.get("grid", {}), "spacing", 0.01, positive=True),
                              edge_length=_number(cfg.get("grid", {}), "length", 40.0,
                                                  positive=True))
        traj = res.trajectory
        summary |= {"profile_error": res.profile_error,
                    "transmitted_mass_fraction": res.transmitted_mass_fraction}
        print(f"profile_error {res.profile_error:.3e}")
        print(f"transmitted_mass_fraction {res.transmitted_mass_fraction:.8f}")
    elif mode == "growth":
        graph = graph_from_config(cfg)
        a = _number(cfg, "a", 0.7)
        state = st.shifted_state(graph, a, grid=grid_for(cfg, graph, a))
        pert = cfg.get("perturbation", {})
        amp = _number(pert, "amplitude", 1e-6, positive=True)
        try:
            fit = dy.growth_rate(graph, state, seed, _number(cfg, "t_end", 50.0, positive=True),
                                 amplitude=amp, tau=_number(cfg, "tau", 2.5e-3, positive=True))
        except NoGrowthDetected as exc:
            summary |= {"growth": None, "message": str(exc)}
            print(f"no growth detected: {exc}")
            _dump(out / "summary.json", summary)
            return EXIT_OK
        lp = ops.assemble(graph, state, "Lplus")
        lm = ops.assemble(graph, state, "Lminus")
        spectral = ops.stability_spectrum(lp, lm).max_growth_rate
        gap = abs(fit.rate / spectral - 1) if spectral > 0 else float("inf")
        summary |= {"fitted_rate": fit.rate, "r_squared": fit.r_squared,
                    "spectral_rate": spectral, "relative_gap": gap, "window": list(fit.window)}
        with open(out / "growth.csv", "w") as fh:
            fh.write(f"# seed={seed}\nt,distance\n")
            for t, d in zip(fit.times, fit.distance):
                fh.write(f"{t!r},{d!r}\n")
        print(f"fitted rate {fit.rate:.6f} (R^2 {fit.r_squared:.6f}); spectral {spectral:.6f}; "
              f"relative gap {gap:.3%}")
        _dump(out / "summary.json", summary)
        return EXIT_OK
    elif mode == "stationary":
        graph = graph_from_config(cfg)
        a = _number(cfg, "a", 0.0)
        state = st.shifted_state(graph, a, grid=grid_for(cfg, graph, a))
        init = state.field * np.exp(1j * _number(cfg, "phase", 0.0))
        every = int(cfg.get("snapshot_every", 0))
        traj = dy.evolve(graph, init, _number(cfg, "tau", 1e-3, positive=True),
                         _number(cfg, "t_end", 5.0, positive=True), snapshot_every=every)
        if every:
            dy.write_snapshots(traj, out / "snapshots")
        dist = np.abs(np.abs(traj.final.values) - np.abs(state.field.values)).max()
        summary["max_modulus_change"] = float(dist)
        print(f"max ||Psi(t_end)| - |Phi|| = {dist:.3e}")
    else:
        raise ConfigError(f"field 'mode': expected stationary, transit or growth, got {mode!r}")
    mb = dy.momentum_balance(traj)
    summary |= {"mass_drift": traj.mass_drift, "energy_drift": traj.energy_drift,
                "max_deviation": float(traj.series["deviation"].max()),
                "momentum_mismatch": mb.max_mismatch, "steps": len(traj.times) - 1}
    print(f"Q drift {traj.mass_drift:.3e}  E drift {traj.energy_drift:.3e}  "
          f"momentum mismatch {mb.max_mismatch:.3e}")
    traj.write_csv(out / "series.csv")
    _dump(out / "summary.json", summary)
    return EXIT_OK


def cmd_families(args) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    if "graph" in cfg:
        graph = graph_from_config(cfg)
    else:
        n = int(cfg.get("n", 4))
        graph = gc.validate_graph(n, n // 2, (1.0,) * n, 1.0) if n % 2 == 0 else None
        if graph is None:
            raise ConfigError(f"field 'graph.edges': unit weights need an even N, got {n}")
    patterns = st.enumerate_patterns(graph)
    payload = {"n_edges": graph.n_edges, "patterns": [list(p.m) for p in patterns]}
    if all(x == 1.0 for x in graph.alphas) and graph.n_edges % 2 == 0:
        payload["count_families"] = st.count_families(graph.n_edges)
        print(f"families for N={graph.n_edges}: {payload['count_families']}")
    print(f"{len(patterns)} admissible patterns")
    for p in patterns:
        print("  " + "".join(map(str, p.m)))
    _dump(out / "families.json", payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        results = acceptance.run(args.filter, seed=args.seed or 0)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    failed = [r.item for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} passed in {total:.0f} s")
    if args.out:
        _dump(_out_dir(args) / "verify.json",
              [{"item": r.item, "passed": r.passed, "detail": r.detail} for r in results])
    return EXIT_OK if not failed else EXIT_ASSERT


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlsgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="DIR", help="output directory (default: .)")
        p.add_argument("--seed", type=int, help="seed for perturbations (default 0)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field, dotted keys, JSON values")
        if graph:
            p.add_argument("--edges", "-N", type=int, help="number of edges N")
            p.add_argument("--incoming", "-K", type=int, help="number of incoming edges K")
            p.add_argument("--alphas", type=float, nargs="+", help="edge weights")
            p.add_argument("--p", type=float, help="nonlinearity power")
            p.add_argument("--a", type=float, help="shift parameter")
            p.add_argument("--spacing", type=float, help="grid spacing h")

    for name, func, helptext in (("spectrum", cmd_spectrum, "shooting vs discrete spectrum of L+"),
                                 ("shoot", cmd_shoot, "point spectrum of L+ by shooting")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--assert-theorem", action="store_true",
                       help="exit 2 if the Morse index differs from the prediction")
        p.set_defaults(func=func)

    p = sub.add_parser("evolve", help="time evolution (stationary, transit or growth)")
    common(p)
    p.add_argument("--mode", choices=("stationary", "transit", "growth"))
    p.add_argument("--tau", type=float, help="time step")
    p.add_argument("--t-end", dest="t_end", type=float, help="final time")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("families", help="admissible sign patterns and family count")
    common(p)
    p.set_defaults(func=cmd_families)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--filter", metavar="NAME", help="item id (A5) or tag (spectrum, dynamics, ...)")
    p.add_argument("--seed", type=int, help="seed for perturbations (default 0)")
    p.add_argument("--out", metavar="DIR", help="also write verify.json here")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GraphNLSError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
