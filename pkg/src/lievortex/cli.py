"""Command-line driver: ``lievortex <command> --config FILE [--out DIR] [--seed N] [--quiet]``.

Exit status 0 on success, 2 for configuration errors and 3 when a numerical
budget (drift, steering distance) is exceeded or a numerical routine fails.

CSV schemas (floats are written as shortest round-trip decimals):

trajectory.csv
    t, g11 .. gnn (row-major), m12 .. m(n-1)n (body momentum, upper triangle
    in lexicographic order), drift_orthogonality, drift_momentum, drift_energy
stiefel.csv
    t, x1_1 .. x(k/2)_n, y1_1 .. y(k/2)_n (row-major), drift_gram,
    spectrum1 .. spectrumn (sorted imaginary parts of the eigenvalues of M_c),
    drift_spectrum, group_mismatch
chaplygin.csv
    t, M1, M2, M3, gamma1, gamma2, gamma3, drift_norm_M, drift_M_dot_gamma

Every run also writes manifest.json with the resolved config and version.
"""
import argparse
import csv
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__, config, control, liecore, reduction, stiefel_top, vortex
from .errors import BudgetExhausted, ConfigError, LieVortexError
from .stiefel_top import ControlSignal

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def fmt(x):
    """Shortest round-trip representation of a float."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, data):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_csv(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def trajectory_header(n):
    g_cols = [f"g{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    iu, ju = liecore.triu_indices(n)
    m_cols = [f"m{i + 1}{j + 1}" for i, j in zip(iu, ju)]
    return ["t"] + g_cols + m_cols + ["drift_orthogonality", "drift_momentum", "drift_energy"]


def _matrix_block(g):
    return [[float(v) for v in row] for row in np.asarray(g)]


# --- commands -----------------------------------------------------------------


def cmd_simulate(cfg, out):
    sys_ = config.system(cfg)
    n = sys_.n
    g0 = config.group(cfg.get("initial"), n, "initial", cfg)
    if "controls" in cfg:
        return _simulate_controlled(cfg, out, sys_, g0)
    T, h, budget, every = config.integration(cfg)
    try:
        samples = reduction.integrate(sys_, g0, T, h, budget, every)
        status = EXIT_OK
        error = None
    except reduction.StepRejected as exc:
        # keep what was integrated up to the rejection for inspection
        try:
            samples = reduction.integrate(sys_, g0, max(exc.t, h), h, float("inf"), every)
        except reduction.StepRejected as blown:
            # the rejected sample itself is non-finite; stop one step earlier
            samples = reduction.integrate(sys_, g0, max(blown.t - h, 0.0), h, float("inf"), every)
        status = EXIT_NUMERICAL
        error = f"{_origin(exc)}: {exc}"
    rows = [[s.t, *s.g.ravel(), *liecore.vec(s.m_body), s.invariant_report["orthogonality"],
             s.invariant_report["momentum"], s.invariant_report["energy"]] for s in samples]
    write_csv(out / "trajectory.csv", trajectory_header(n), rows)
    summary = {
        "max_drift": reduction.max_drifts(samples),
        "endpoint": _matrix_block(samples[-1].g),
        "t_end": samples[-1].t,
        "samples": len(samples),
        "error": error,
    }
    write_json(out / "summary.json", summary)
    return status, summary


def load_signal(cfg, csys):
    c = cfg["controls"]
    if "signal" in c:
        values = c["signal"]
        where = "controls.signal"
    else:
        path = Path(c["signal_file"])
        if not path.is_file():
            raise ConfigError("controls.signal_file", f"no such file: {path}")
        data = json.loads(path.read_text())
        values = data.get("values")
        where = "controls.signal_file"
        for key in ("segments", "steps_per_segment", "T"):
            if key in data and data[key] != getattr(csys, key):
                raise ConfigError(where, f"signal {key}={data[key]} does not match controls.{key}={getattr(csys, key)}")
    v = config._array(values, where, (csys.segments, csys.k))
    sig = ControlSignal(v, csys.T)
    if not sig.within(csys.eps):
        raise ConfigError(where, f"signal sup-norm {sig.sup_norm()} exceeds eps={csys.eps}")
    return sig


def _simulate_controlled(cfg, out, sys_, g0):
    csys = config.control_system(cfg, sys_)
    sig = load_signal(cfg, csys)
    t, gs = control.controlled_path(csys, g0, sig)
    n = sys_.n
    every = int(cfg["integration"]["sample_every"])
    idx = list(range(0, len(t), max(1, every)))
    if idx[-1] != len(t) - 1:
        idx.append(len(t) - 1)
    m_s = sys_.momentum
    ref = max(float(np.linalg.norm(m_s)), 1e-300)
    e0 = sys_.inertia.energy(gs[0].T @ m_s @ gs[0])
    rows = []
    for i in idx:
        g = gs[i]
        m = g.T @ m_s @ g
        e = sys_.inertia.energy(m)
        rows.append([t[i], *g.ravel(), *liecore.vec(m), np.linalg.norm(g.T @ g - np.eye(n)),
                     np.linalg.norm(g @ m @ g.T - m_s) / ref, abs(e - e0) / abs(e0) if e0 else abs(e - e0)])
    write_csv(out / "trajectory.csv", trajectory_header(n), rows)
    summary = {"endpoint": _matrix_block(gs[-1]), "t_end": float(t[-1]), "controlled": True, "samples": len(rows)}
    write_json(out / "summary.json", summary)
    return EXIT_OK, summary


def cmd_chaplygin(cfg, out):
    b = cfg["chaplygin"]
    I = config._array(config._get(b, "I", "chaplygin.I"), "chaplygin.I")
    D = config._float(b.get("D", 0.0), "chaplygin.D")
    M = config._array(config._get(b, "M", "chaplygin.M"), "chaplygin.M", (3,))
    gamma = config._array(config._get(b, "gamma", "chaplygin.gamma"), "chaplygin.gamma", (3,))
    try:
        state = reduction.ChaplyginState(M, gamma, I, D)
    except ValueError as exc:
        raise ConfigError("chaplygin", str(exc)) from None
    T, h, budget, every = config.integration(cfg)
    t, Ms, gammas = reduction.integrate_chaplygin(state, T, h)
    norm0 = np.linalg.norm(Ms[0])
    dot0 = Ms[0] @ gammas[0]
    dnorm = np.abs(np.linalg.norm(Ms, axis=1) - norm0)
    ddot = np.abs(np.einsum("ij,ij->i", Ms, gammas) - dot0)
    idx = list(range(0, len(t), max(1, every)))
    if idx[-1] != len(t) - 1:
        idx.append(len(t) - 1)
    header = ["t", "M1", "M2", "M3", "gamma1", "gamma2", "gamma3", "drift_norm_M", "drift_M_dot_gamma"]
    write_csv(out / "chaplygin.csv", header, [[t[i], *Ms[i], *gammas[i], dnorm[i], ddot[i]] for i in idx])
    summary = {"max_drift_norm_M": float(dnorm.max()), "max_drift_M_dot_gamma": float(ddot.max()),
               "M_end": Ms[-1].tolist(), "gamma_end": gammas[-1].tolist()}
    write_json(out / "summary.json", summary)
    worst = max(summary["max_drift_norm_M"], summary["max_drift_M_dot_gamma"])
    return (EXIT_NUMERICAL if worst > budget else EXIT_OK), summary


def cmd_vortex(cfg, out):
    n = config.dimension(cfg)
    m_s = config.momentum(cfg, n)
    vb = cfg.get("vortex", {}) or {}
    rank_tol = config._float(vb.get("rank_tol", vortex.DEFAULT_RANK_TOL), "vortex.rank_tol")
    basis = vortex.isotropy_basis(m_s, rank_tol)
    frame = vortex.darboux_decompose(m_s, rank_tol)
    g0 = config.group(cfg.get("initial"), n, "initial", cfg)
    report = {
        "n": n,
        "momentum": liecore.vec(m_s),
        "dimension": basis.dim,
        "codimension": liecore.dim_algebra(n) - basis.dim,
        "basis": basis.coordinates(),
        "isotropy_residual": basis.isotropy_residual(),
        "closure_residual": basis.closure_residual(),
        "abelian": basis.max_commutator() <= 1e-8 * max(1.0, float(np.linalg.norm(m_s))),
        "max_commutator": basis.max_commutator(),
        "darboux_h": frame.h,
        "darboux_rank": frame.k,
    }
    if basis.dim:
        report["manifold"] = vortex.probe_vortex_manifold(basis, g0, steps=int(vb.get("probe_steps", 64))).to_dict()
    if "operator" in cfg:
        sys_ = config.system(cfg)
        report["commutation"] = [
            {"residual": vortex.commutation_residual(sys_, xi, g0), "scale": vortex.bracket_scale(sys_, xi)}
            for xi in basis.basis]
    write_json(out / "vortex.json", report)
    return EXIT_OK, report


def cmd_stiefel(cfg, out):
    sys_ = config.system(cfg)
    if sys_.inertia.kind != "manakov":
        raise ConfigError("operator.kind", "stiefel runs need a Manakov operator")
    n = sys_.n
    g0 = config.group(cfg.get("initial"), n, "initial", cfg)
    T, h, _, every = config.integration(cfg)
    frame = vortex.darboux_decompose(sys_.momentum)
    state = stiefel_top.StiefelState.from_frame(frame, g0)
    t, states, _ = stiefel_top.integrate_frame(state, sys_.inertia.matrix, T, h)
    _, gs = reduction.integrate_field(sys_, g0, t[-1], t[1] - t[0] if len(t) > 1 else h)
    spec0 = stiefel_top.spectrum(stiefel_top.reconstruct_momentum(states[0]))
    idx = list(range(0, len(t), max(1, every)))
    if idx[-1] != len(t) - 1:
        idx.append(len(t) - 1)
    half = frame.X.shape[0]
    header = (["t"] + [f"x{l + 1}_{j + 1}" for l in range(half) for j in range(n)]
              + [f"y{l + 1}_{j + 1}" for l in range(half) for j in range(n)]
              + ["drift_gram"] + [f"spectrum{j + 1}" for j in range(n)] + ["drift_spectrum", "group_mismatch"])
    rows, worst = [], {"gram": 0.0, "spectrum": 0.0, "group_mismatch": 0.0}
    keep = set(idx)
    for i in range(len(t)):
        s = states[i]
        gram = s.gram_drift()
        spec_i = stiefel_top.spectrum(stiefel_top.reconstruct_momentum(s))
        spec = float(np.abs(spec_i - spec0).max())
        mism = float(np.linalg.norm(np.vstack([s.X, s.Y]) - np.vstack([frame.X @ gs[i], frame.Y @ gs[i]])))
        worst = {"gram": max(worst["gram"], gram), "spectrum": max(worst["spectrum"], spec),
                 "group_mismatch": max(worst["group_mismatch"], mism)}
        if i in keep:
            rows.append([t[i], *s.X.ravel(), *s.Y.ravel(), gram, *spec_i, spec, mism])
    write_csv(out / "stiefel.csv", header, rows)
    summary = {"max_drift": worst, "h": frame.h, "k": frame.k}
    write_json(out / "summary.json", summary)
    return EXIT_OK, summary


def _signal_doc(csys, sig, g0, endpoint):
    return {
        "values": sig.values,
        "T": csys.T,
        "segments": csys.segments,
        "steps_per_segment": csys.steps_per_segment,
        "eps": csys.eps,
        "directions": [liecore.vec(d) for d in csys.control_dirs],
        "g0": _matrix_block(g0),
        "endpoint": _matrix_block(endpoint),
    }


def cmd_steer(cfg, out):
    sys_ = config.system(cfg)
    csys = config.control_system(cfg, sys_)
    n = sys_.n
    g0 = config.group(cfg.get("initial"), n, "initial", cfg)
    target = config.group(cfg["steering"].get("target"), n, "steering.target", cfg)
    budget = config.budget(cfg)
    try:
        res = control.steer(csys, g0, target, budget)
    except BudgetExhausted as exc:
        endpoint = control.controlled_endpoint(csys, g0, exc.signal)
        write_json(out / "signal.json", _signal_doc(csys, exc.signal, g0, endpoint))
        result = {"residual": exc.distance, "reached": False, "target": _matrix_block(target), "error": str(exc)}
        write_json(out / "result.json", result)
        raise
    write_json(out / "signal.json", _signal_doc(csys, res.signal, g0, res.endpoint))
    result = {
        "residual": res.distance,
        "reached": True,
        "target": _matrix_block(target),
        "iterations": res.iterations,
        "starts_used": res.starts_used,
    }
    # wall time is reported but kept out of the file so reruns are byte-identical
    write_json(out / "result.json", result)
    return EXIT_OK, dict(result, wall_time=res.wall_time)


def cmd_transfer(cfg, out):
    sys_ = config.system(cfg)
    csys = config.control_system(cfg, sys_)
    n = sys_.n
    tb = cfg["transfer"]
    h1 = config.group(tb.get("h1"), n, "transfer.h1", cfg)
    h2 = config.group(tb.get("h2"), n, "transfer.h2", cfg)
    s_grid = [config._float(s, "transfer.s_grid") for s in tb.get("s_grid", [0.5, 1.0, 2.0])]
    basis = vortex.isotropy_basis(sys_.momentum)
    rep = control.vortex_transfer(csys, basis, h1, h2, s_grid, config.budget(cfg))
    write_json(out / "signal.json", _signal_doc(csys, rep.steering.signal, h1, rep.steering.endpoint))
    doc = rep.to_dict()
    doc["tolerance_note"] = "defect budget of 10x the steering residual is an engineering choice"
    ratio = doc["ratio_to_residual"]
    ok = rep.worst_defect <= 10 * rep.residual + rep.commute_tol
    doc["within_budget"] = ok
    write_json(out / "transfer.json", doc)
    return (EXIT_OK if ok else EXIT_NUMERICAL), {"residual": rep.residual, "worst_defect": rep.worst_defect,
                                                 "ratio": ratio}


def cmd_rank_check(cfg, out):
    report = {}
    if "controls" in cfg:
        sys_ = config.system(cfg)
        csys = config.control_system(cfg, sys_)
        rb = cfg.get("rank", {}) or {}
        depth = int(rb.get("depth", 3))
        tol = config._float(rb.get("tol", control.DEFAULT_RANK_TOL), "rank.tol")
        include = bool(rb.get("include_drift", True))
        points = [config.group(p, sys_.n, f"rank.points[{i}]", cfg) for i, p in enumerate(rb.get("points", ["identity"]))]
        reports = [control.lie_rank(csys, g, depth, tol, include) for g in points]
        report["lie_rank"] = [{"rank": r.rank, "depth": r.depth, "labels": r.labels,
                               "singular_values": r.singular_values, "point": r.point} for r in reports]
        report["full_rank_everywhere"] = all(r.rank == liecore.dim_algebra(sys_.n) for r in reports)
    if "two_generator" in cfg:
        tg = cfg["two_generator"]
        n = config.dimension(cfg)
        ok, dim = control.two_generator_check(config.algebra(tg["l1"], n, "two_generator.l1"),
                                              config.algebra(tg["l2"], n, "two_generator.l2"), tg.get("depth"))
        report["two_generator"] = {"generates": ok, "dimension": dim, "algebra_dimension": liecore.dim_algebra(n)}
    if "planar" in cfg:
        pb = cfg["planar"]
        f = config.planar_field(pb.get("f", "horizontal"), "planar.f")
        g = config.planar_field(config._get(pb, "g", "planar.g"), "planar.g")
        point = config._array(config._get(pb, "point", "planar.point"), "planar.point", (2,))
        sets = pb.get("word_sets", {"default": None})
        report["planar"] = {}
        for name, words in sets.items():
            r = control.planar_bracket_rank(f, g, point, int(pb.get("depth", 3)),
                                            config._float(pb.get("tol", control.DEFAULT_RANK_TOL), "planar.tol"),
                                            None if words is None else [tuple(w) for w in words])
            report["planar"][name] = r.to_dict()
    write_json(out / "rank.json", report)
    return EXIT_OK, report


def cmd_transversality(cfg, out):
    tb = cfg["transversality"]
    f = config.planar_field(config._get(tb, "field", "transversality.field"), "transversality.field")
    region = config.region(config._get(tb, "region", "transversality.region"), "transversality.region")
    samples = config._array(config._get(tb, "samples", "transversality.samples"), "transversality.samples")
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ConfigError("transversality.samples", "expected a list of [x1, x2] points")
    T_max = config._float(config._get(tb, "T_max", "transversality.T_max"), "transversality.T_max")
    try:
        rep = control.transversality_probe(f, region, samples, T_max, int(tb.get("steps", 2000)),
                                           bool(tb.get("measure_preserving", False)))
    except ValueError as exc:
        raise ConfigError("transversality.samples", str(exc)) from None
    doc = rep.to_dict()
    write_json(out / "transversality.json", doc)
    return EXIT_OK, doc


COMMAND_FUNCS = {
    "simulate": cmd_simulate,
    "chaplygin": cmd_chaplygin,
    "vortex": cmd_vortex,
    "stiefel": cmd_stiefel,
    "steer": cmd_steer,
    "transfer": cmd_transfer,
    "rank-check": cmd_rank_check,
    "transversality": cmd_transversality,
}


def _origin(exc):
    """``module.function`` of the innermost public library function on the traceback."""
    origin = None
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = Path(frame.filename).parts
        if "lievortex" in parts and Path(frame.filename).stem not in ("cli", "config") \
                and not frame.name.startswith("_"):
            origin = f"{Path(frame.filename).stem}.{frame.name}"
    return origin or "cli"


def run(command, config_path, out=None, seed=None, quiet=False):
    """Run one command; returns the exit status."""
    def say(msg):
        if not quiet:
            print(msg)

    try:
        cfg = config.load(config_path, command, seed)
        out_dir = Path(out or cfg["output"]["dir"])
        cfg["output"]["dir"] = str(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "manifest.json", {"tool": "lievortex", "version": __version__,
                                               "command": command, "config": cfg})
        start = time.perf_counter()
        status, summary = COMMAND_FUNCS[command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LieVortexError as exc:
        print(f"numerical error in {_origin(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    say(f"{command}: wrote {out_dir} in {time.perf_counter() - start:.2f}s")
    if status != EXIT_OK:
        detail = summary.get("error") if isinstance(summary, dict) else None
        print(f"{command}: numerical budget exceeded{' in ' + detail if detail else ''} (see {out_dir})",
              file=sys.stderr)
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="lievortex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in config.COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="YAML config path, or fixture:NAME for a shipped fixture")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="override the top-level seed")
        sp.add_argument("--quiet", action="store_true")
    sub.add_parser("fixtures", help="list shipped fixture configs")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "fixtures":
        for name in config.fixture_names():
            print(name)
        return EXIT_OK
    return run(args.command, args.config, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
