"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 solver
failure, 4 (verify only) a property check reported violations.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import dataset, geometry, graph, kernel, nnqp, spectral
from .neighbors import InvalidK, knn_search

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER, EXIT_VIOLATIONS = 0, 1, 2, 3, 4

DATA_ERRORS = (
    OSError, dataset.ParseError, dataset.FormatError, dataset.MismatchError,
    dataset.InsufficientSamples, spectral.NoLabels, kernel.DegenerateInput,
)
SOLVER_ERRORS = (nnqp.SingularSystem, nnqp.NonConvergence, spectral.SingularSystem)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


# per-subcommand defaults; a JSON config may set any of these keys
DEFAULTS = {
    "make-dataset": dict(kind="swiss-roll", n=1000, noise=0.05, sampling="nonuniform",
                         seed=0, per_class=100, input=None, labels=None, header=False,
                         label_column=False, out=None),
    "build": dict(input=None, label_column=False, header=False, method="nnk", k=None,
                  sigma_auto=False, sigma_sq=None, kernel="gaussian", out=None, threads=1),
    "density-sweep": dict(input=None, header=False, label_column=False, n=1000, noise=0.05,
                          sampling="nonuniform", seed=0, ks="5,10,15,20,25,30,35,40,45,50",
                          methods="knn,nnk,nnk_mp", sigma_sq=None, sigma_k=None,
                          threshold=1e-8, out=None, threads=1),
    "ssl": dict(input=None, header=False, mnist_bundled=False, per_class=None,
                methods="nnk,knn", k="30", fractions="0.1", trials=10, seed=0,
                laplacians="combinatorial,sym_normalized", sigma_sq=None, out=None, threads=1),
    "verify": dict(seed=0, trials=100, checks="kri,plane,polytope,lle", out=None),
}


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nnkgraph", description="Sparse similarity graphs by non-negative kernel regression.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values; flags override it")

    mk = sub.add_parser("make-dataset", help="generate or subsample a point set and write it as CSV")
    common(mk)
    mk.add_argument("--kind", choices=["swiss-roll", "mnist-subset", "usps-style", "idx", "csv"], default=S)
    mk.add_argument("--n", type=int, default=S, help="swiss-roll point count")
    mk.add_argument("--noise", type=float, default=S)
    mk.add_argument("--sampling", choices=["uniform", "nonuniform"], default=S)
    mk.add_argument("--seed", type=int, default=S)
    mk.add_argument("--per-class", type=int, default=S, dest="per_class")
    mk.add_argument("--input", default=S, help="IDX images file or labeled CSV")
    mk.add_argument("--labels", default=S, help="IDX labels file")
    mk.add_argument("--header", action="store_true", default=S)
    mk.add_argument("--label-column", action="store_true", default=S, dest="label_column")
    mk.add_argument("--out", default=S)

    b = sub.add_parser("build", help="construct a graph and write an edge list")
    common(b)
    b.add_argument("--input", default=S, help="CSV of points, no header unless --header")
    b.add_argument("--label-column", action="store_true", default=S, dest="label_column",
                   help="last CSV column holds integer labels")
    b.add_argument("--header", action="store_true", default=S)
    b.add_argument("--method", choices=list(graph.BUILDERS), default=S)
    b.add_argument("--k", type=int, default=S)
    b.add_argument("--sigma-auto", action="store_true", default=S, dest="sigma_auto")
    b.add_argument("--sigma-sq", type=float, default=S, dest="sigma_sq")
    b.add_argument("--kernel", choices=["gaussian", "cosine_at_node"], default=S)
    b.add_argument("--out", default=S)
    b.add_argument("--threads", type=int, default=S)

    d = sub.add_parser("density-sweep", help="edge density per builder over a list of K")
    common(d)
    d.add_argument("--input", default=S, help="CSV of points; a noisy swiss roll is generated if omitted")
    d.add_argument("--header", action="store_true", default=S)
    d.add_argument("--label-column", action="store_true", default=S, dest="label_column")
    d.add_argument("--n", type=int, default=S)
    d.add_argument("--noise", type=float, default=S)
    d.add_argument("--sampling", choices=["uniform", "nonuniform"], default=S)
    d.add_argument("--seed", type=int, default=S)
    d.add_argument("--ks", default=S, help="comma-separated K values")
    d.add_argument("--methods", default=S, help="comma-separated builders")
    d.add_argument("--sigma-sq", type=float, default=S, dest="sigma_sq")
    d.add_argument("--sigma-k", type=int, default=S, dest="sigma_k",
                   help="K used for the fixed automatic bandwidth (default: smallest K)")
    d.add_argument("--threshold", type=float, default=S)
    d.add_argument("--out", default=S)
    d.add_argument("--threads", type=int, default=S)

    s = sub.add_parser("ssl", help="label-propagation experiment")
    common(s)
    s.add_argument("--input", default=S, help="labeled CSV (label in last column)")
    s.add_argument("--header", action="store_true", default=S)
    s.add_argument("--mnist-bundled", action="store_true", default=S, dest="mnist_bundled",
                   help="use the MNIST sample shipped with mlxtend")
    s.add_argument("--per-class", type=int, default=S, dest="per_class")
    s.add_argument("--methods", default=S)
    s.add_argument("--k", default=S, help="K or comma-separated list of K")
    s.add_argument("--fractions", default=S)
    s.add_argument("--trials", type=int, default=S)
    s.add_argument("--seed", type=int, default=S)
    s.add_argument("--laplacians", default=S)
    s.add_argument("--sigma-sq", type=float, default=S, dest="sigma_sq")
    s.add_argument("--out", default=S)
    s.add_argument("--threads", type=int, default=S)

    v = sub.add_parser("verify", help="run the geometric property suites on random data")
    common(v)
    v.add_argument("--seed", type=int, default=S)
    v.add_argument("--trials", type=int, default=S)
    v.add_argument("--checks", default=S, help="subset of kri,plane,polytope,lle")
    v.add_argument("--out", default=S, help="JSON report path (stdout if omitted)")
    return p


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults < config file < explicit flags, then validate."""
    cfg = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, val in vars(args).items():
        if key not in ("command", "config"):
            cfg[key] = val
    ns = argparse.Namespace(command=args.command, **cfg)
    _validate(ns)
    return ns


def _validate(ns):
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    c = ns.command
    if hasattr(ns, "threads"):
        need(int(ns.threads) >= 1, "--threads must be >= 1")
    if c == "build":
        need(ns.input, "--input is required")
        need(ns.out, "--out is required")
        need(ns.k is not None and int(ns.k) >= 1, "--k must be a positive integer")
        need(ns.method in graph.BUILDERS, f"--method must be one of {graph.BUILDERS}")
        if ns.method != "lle_pos" and ns.kernel == "gaussian":
            need(ns.sigma_auto or ns.sigma_sq is not None, "give --sigma-auto or --sigma-sq")
        if ns.sigma_sq is not None:
            need(float(ns.sigma_sq) > 0, "--sigma-sq must be positive")
    elif c == "density-sweep":
        ns.ks = _int_list(ns.ks) if not isinstance(ns.ks, list) else ns.ks
        ns.methods = _str_list(ns.methods) if not isinstance(ns.methods, list) else ns.methods
        need(ns.ks and min(ns.ks) >= 1, "--ks must be positive integers")
        need(all(m in graph.BUILDERS for m in ns.methods), f"--methods must be in {graph.BUILDERS}")
        need(ns.out, "--out is required")
        if ns.sigma_sq is not None:
            need(float(ns.sigma_sq) > 0, "--sigma-sq must be positive")
        need(ns.n >= 10, "--n must be >= 10")
    elif c == "ssl":
        ns.k = _int_list(ns.k) if not isinstance(ns.k, list) else ns.k
        ns.methods = _str_list(ns.methods) if not isinstance(ns.methods, list) else ns.methods
        ns.fractions = (_float_list(ns.fractions) if not isinstance(ns.fractions, list)
                        else ns.fractions)
        ns.laplacians = (_str_list(ns.laplacians) if not isinstance(ns.laplacians, list)
                         else ns.laplacians)
        need(ns.k and min(ns.k) >= 1, "--k must be positive")
        need(all(m in graph.BUILDERS for m in ns.methods), f"--methods must be in {graph.BUILDERS}")
        need(all(0 < f <= 1 for f in ns.fractions), "--fractions must lie in (0, 1]")
        need(all(k in spectral.KINDS for k in ns.laplacians), f"--laplacians must be in {spectral.KINDS}")
        need(int(ns.trials) >= 1, "--trials must be >= 1")
        need(ns.input or ns.mnist_bundled, "give --input or --mnist-bundled")
        need(ns.out, "--out is required")
    elif c == "make-dataset":
        need(ns.out, "--out is required")
        if ns.kind == "swiss-roll":
            need(ns.n >= 10, "--n must be >= 10")
            need(ns.noise >= 0, "--noise must be >= 0")
        if ns.kind == "idx":
            need(ns.input and ns.labels, "--input and --labels are required for idx")
        if ns.kind in ("usps-style", "csv"):
            need(ns.input, f"--input is required for {ns.kind}")
    elif c == "verify":
        ns.checks = _str_list(ns.checks) if not isinstance(ns.checks, list) else ns.checks
        need(set(ns.checks) <= {"kri", "plane", "polytope", "lle"}, "unknown check name")
        need(int(ns.trials) >= 1, "--trials must be >= 1")


def _fmt(v):
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def cmd_make_dataset(ns) -> int:
    if ns.kind == "swiss-roll":
        ps = dataset.make_swiss_roll(dataset.SwissRollConfig(ns.n, ns.noise, ns.sampling, ns.seed))
    elif ns.kind == "idx":
        ps = dataset.load_idx(ns.input, ns.labels)
    elif ns.kind == "mnist-subset":
        src = (dataset.load_csv(ns.input, True, ns.header) if ns.input
               else dataset.load_bundled_mnist())
        ps = dataset.subsample_per_class(src, ns.per_class, ns.seed)
    elif ns.kind == "usps-style":
        ps = dataset.subsample_usps_style(dataset.load_csv(ns.input, True, ns.header), ns.seed)
    else:
        ps = dataset.load_csv(ns.input, ns.label_column, ns.header)
    dataset.save_csv(ps, ns.out)
    print(f"wrote {ps.n} x {ps.dim} points to {ns.out}")
    return EXIT_OK


def _kernel_spec(ns, ps, K):
    if ns.kernel == "cosine_at_node":
        return kernel.KernelSpec.cosine_at_node()
    if ns.sigma_sq is not None:
        return kernel.KernelSpec.gaussian(ns.sigma_sq)
    return kernel.KernelSpec.gaussian(kernel.bandwidth_from_neighbors(ps, K))


def cmd_build(ns) -> int:
    ps = dataset.load_csv(ns.input, ns.label_column, ns.header)
    if ns.k >= ps.n:
        raise ConfigError(f"--k {ns.k} must be smaller than the number of points {ps.n}")
    spec = None if ns.method == "lle_pos" else _kernel_spec(ns, ps, ns.k)
    t0 = time.perf_counter()
    g = graph.build(ps, ns.method, ns.k, spec, workers=ns.threads)
    seconds = time.perf_counter() - t0
    graph.save_graph(g, ns.out)
    print(f"n={g.n} edges={g.n_edges} density={_fmt(graph.edge_density(g))} "
          f"seconds={_fmt(seconds)}")
    return EXIT_OK


def _sweep_points(ns):
    if ns.input:
        return dataset.load_csv(ns.input, ns.label_column, ns.header)
    return dataset.make_swiss_roll(dataset.SwissRollConfig(ns.n, ns.noise, ns.sampling, ns.seed))


def cmd_density_sweep(ns) -> int:
    ps = _sweep_points(ns)
    if max(ns.ks) >= ps.n:
        raise ConfigError("every K must be smaller than the number of points")
    # one bandwidth for the whole sweep so K is the only thing that varies
    if ns.sigma_sq is not None:
        sigma_sq = float(ns.sigma_sq)
    else:
        sigma_sq = kernel.bandwidth_from_neighbors(ps, ns.sigma_k or min(ns.ks))
    spec = kernel.KernelSpec.gaussian(sigma_sq)
    nl = knn_search(ps, max(ns.ks))
    rows = []
    for method in ns.methods:
        for K in ns.ks:
            t0 = time.perf_counter()
            g = graph.build(ps, method, K, spec, neighbors=nl, workers=ns.threads)
            seconds = time.perf_counter() - t0
            rows.append((method, K, graph.edge_density(g, ns.threshold), seconds))
    with open(ns.out, "w") as fh:
        fh.write("builder,K,density,seconds\n")
        for m, K, dens, sec in rows:
            fh.write(f"{m},{K},{_fmt(dens)},{_fmt(sec)}\n")
    for m, K, dens, sec in rows:
        print(f"{m:8s} K={K:3d} density={dens:.4f} seconds={sec:.3f}")
    return EXIT_OK


def cmd_ssl(ns) -> int:
    if ns.mnist_bundled:
        ps = dataset.load_bundled_mnist()
    else:
        ps = dataset.load_csv(ns.input, True, ns.header)
    if ps.labels is None:
        raise spectral.NoLabels("input has no label column")
    if ns.per_class:
        ps = dataset.subsample_per_class(ps, ns.per_class, ns.seed)
    if max(ns.k) >= ps.n:
        raise ConfigError("every K must be smaller than the number of points")
    res = spectral.ssl_experiment(ps, ns.methods, ns.k, ns.fractions, ns.trials, ns.seed,
                                  kinds=ns.laplacians, sigma_sq=ns.sigma_sq, workers=ns.threads)
    res.write_csv(ns.out)
    print(f"{'builder':8s} {'laplacian':15s} {'K':>3s} {'fraction':>8s} {'mean':>8s} {'std':>8s}")
    agg = res.aggregate()
    for mean, std in zip(agg[0::2], agg[1::2]):
        print(f"{mean['builder']:8s} {mean['laplacian']:15s} {mean['K']:3d} "
              f"{mean['fraction']:8.3f} {mean['misclassification']:8.4f} "
              f"{std['misclassification']:8.4f}")
    return EXIT_OK


def run_verify_suites(seed: int, trials: int, checks) -> list:
    """Property suites on random clouds; one summary dict per check."""
    rng = np.random.default_rng(seed)
    report = []
    if "kri" in checks:
        n_viol = 0
        n_cases = 0
        worst = 0.0
        while n_cases < trials:
            X = rng.standard_normal((3, int(rng.integers(1, 6))))
            s2 = float(rng.uniform(0.3, 3.0))
            K = kernel.gaussian_matrix(X, s2)
            if geometry.kri_is_boundary(K):
                continue
            v = geometry.kri_predict(K[0, 1], K[0, 2], K[1, 2])
            sol = nnqp.solve(nnqp.QPProblem(K[1:, 1:], K[0, 1:]))
            n_cases += 1
            got = (sol.theta[0] > 0, sol.theta[1] > 0)
            if got != (v.j_connected, v.k_connected):
                n_viol += 1
            worst = max(worst, sol.info["stationarity"])
        report.append({"check": "kri", "n_cases": n_cases, "n_violations": n_viol,
                       "max_deviation": worst})
    if "plane" in checks or "polytope" in checks:
        n_plane = n_pair = n_poly = cases = 0
        worst = 0.0
        n_clouds = max(1, trials // 10)
        for t in range(n_clouds):
            d = 2 if t % 2 == 0 else 5
            ps = dataset.PointSet(rng.standard_normal((100, d)))
            s2 = kernel.bandwidth_from_neighbors(ps, 10)
            g = graph.build_nnk(ps, 10, kernel.KernelSpec.gaussian(s2))
            n_plane += len(geometry.check_plane_property(g, ps))
            n_pair += len(geometry.check_plane_property_pairwise(g, ps, s2))
            Kf = kernel.gaussian_matrix(ps.points, s2)
            for fit in g.fits:
                rep = geometry.check_polytope_conditions(fit, Kf)
                n_poly += int(not rep.ok)
                worst = max(worst, rep.stationarity)
                cases += 1
        if "plane" in checks:
            report.append({"check": "plane", "n_cases": n_clouds, "n_violations": n_plane,
                           "max_deviation": 0.0})
            report.append({"check": "plane_pairwise", "n_cases": n_clouds,
                           "n_violations": n_pair, "max_deviation": 0.0})
        if "polytope" in checks:
            report.append({"check": "polytope", "n_cases": cases, "n_violations": n_poly,
                           "max_deviation": worst})
    if "lle" in checks:
        n_sets = max(1, trials // 2)
        n_viol = 0
        worst = 0.0
        for _ in range(n_sets):
            ps = dataset.PointSet(rng.standard_normal((100, int(rng.integers(2, 6)))))
            res = geometry.check_lle_equivalence(ps, 5)
            if res["max_support_diff"] > 0 or res["max_weight_dev"] > 1e-4:
                n_viol += 1
            worst = max(worst, res["max_weight_dev"])
        report.append({"check": "lle", "n_cases": n_sets, "n_violations": n_viol,
                       "max_deviation": worst})
    return report


def cmd_verify(ns) -> int:
    report = run_verify_suites(ns.seed, ns.trials, ns.checks)
    text = json.dumps(report, indent=2)
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if all(r["n_violations"] == 0 for r in report) else EXIT_VIOLATIONS


COMMANDS = {
    "make-dataset": cmd_make_dataset,
    "build": cmd_build,
    "density-sweep": cmd_density_sweep,
    "ssl": cmd_ssl,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise ConfigError(parser.format_usage() + "nnkgraph: error: a subcommand is required")
        ns = resolve(args)
        return COMMANDS[ns.command](ns)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except InvalidK as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
