"""Command-line entry point: ``rwspectral <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .clustering import gmm_em, kmeans, weights_from_degrees, wgmm_em
from .embedding import embed
from .eval import ExperimentConfig, clt_empirical_check, preset_experiment, run_experiment
from .graph import DisconnectedGraphError, connected_components
from .io import (
    config_hash,
    load_config,
    provenance_lines,
    read_csv,
    read_edge_list,
    read_embedding,
    write_csv,
    write_edge_list,
    write_embedding,
)
from .model import model_from_dict, sample_dcsbm
from .theory import figure_theory

MODEL_PRESETS = {
    "eq10": {
        "B": "eq10",
        "pi": [1 / 3, 1 / 3, 1 / 3],
        "weights": {"kind": "uniform", "params": [0.25, 1.0]},
        "rho": 1.0,
        "regime": "dense",
    },
}


def _model_config(source):
    if source in MODEL_PRESETS and not Path(source).exists():
        return MODEL_PRESETS[source]
    return load_config(source)


def _sibling(path, tag, suffix=None):
    p = Path(path)
    return p.with_name(f"{p.stem}_{tag}{suffix or p.suffix}")


def cmd_simulate(args):
    cfg = _model_config(args.config)
    model = model_from_dict(cfg)
    sample = sample_dcsbm(model, args.n, args.seed)
    head = provenance_lines(cfg, args.seed, n=args.n)
    write_edge_list(args.out_graph, sample.graph, header=head)
    rows = ((i, int(sample.z[i]), sample.w[i], sample.t[i]) for i in range(sample.n))
    write_csv(args.out_meta, ("node", "z", "w", "t"), rows, head)


def _embed_one(graph, labels, args, head, out):
    emb = embed(graph, args.dim, args.matrix, args.correction, seed=args.seed)
    write_embedding(out, labels, emb.points, head)
    if args.out_degrees:
        deg_out = args.out_degrees if out == args.out else _sibling(args.out_degrees, Path(out).stem)
        write_csv(deg_out, ("node", "degree"), zip(labels, graph.degrees.astype(np.int64)), head)


def cmd_embed(args):
    doc = read_edge_list(args.graph)
    graph = doc.to_graph()
    settings = {"dim": args.dim, "matrix": args.matrix, "correction": args.correction}
    comps = connected_components(graph)
    if len(comps) > 1 and args.component is None:
        raise DisconnectedGraphError(len(comps), [c.size for c in comps])
    if args.component == "each" and len(comps) > 1:
        for idx, nodes in enumerate(comps):
            if nodes.size <= args.dim:
                print(f"skipping component {idx}: {nodes.size} nodes", file=sys.stderr)
                continue
            head = provenance_lines(settings, args.seed, **settings, component=idx)
            _embed_one(graph.subgraph(nodes), [doc.labels[i] for i in nodes], args, head,
                       _sibling(args.out, f"c{idx}"))
        return
    nodes = comps[0]
    sub = graph if nodes.size == graph.n else graph.subgraph(nodes)
    extra = {} if nodes.size == graph.n else {"component": "largest", "nodes_used": nodes.size}
    head = provenance_lines(settings, args.seed, **settings, **extra)
    _embed_one(sub, [doc.labels[i] for i in nodes], args, head, args.out)


def _degrees_for(labels, args):
    if args.degrees:
        _, rows, _ = read_csv(args.degrees)
        table = {r[0]: float(r[1]) for r in rows}
    else:
        doc = read_edge_list(args.graph)
        deg = doc.to_graph().degrees
        table = dict(zip(doc.labels, deg))
    try:
        return np.array([table[lab] for lab in labels], dtype=float)
    except KeyError as exc:
        raise ValueError(f"no degree for node {exc.args[0]!r}") from None


def cmd_cluster(args):
    labels, points, meta = read_embedding(args.embedding)
    d = int(meta.get("dim", points.shape[1] + (meta.get("matrix") == "rw")))
    if args.k < d:
        raise ValueError(f"need K >= d, got K={args.k}, d={d}")
    fit = None
    if args.method == "kmeans":
        z = kmeans(points, args.k, seed=args.seed)[0]
    elif args.method == "gmm":
        fit = gmm_em(points, args.k, seed=args.seed)
    else:
        if not (args.degrees or args.graph):
            raise ValueError("wgmm needs --degrees or --graph")
        gamma = weights_from_degrees(_degrees_for(labels, args))
        fit = wgmm_em(points, gamma, args.k, seed=args.seed)
    if fit is not None:
        z = fit.labels
    settings = {"k": args.k, "method": args.method, "embedding_hash": meta.get("config_hash")}
    head = provenance_lines(settings, args.seed, k=args.k, method=args.method)
    write_csv(args.out, ("node", "label"), zip(labels, (int(v) for v in z)), head)
    if args.out_params and fit is not None:
        Path(args.out_params).write_text(json.dumps(fit.to_dict(), indent=2) + "\n")


def _experiment_config(source, seed):
    if not Path(source).exists():
        cfg = preset_experiment(source)
    else:
        raw = load_config(source)
        preset = raw.pop("preset", None)
        cfg = preset_experiment(preset, **raw) if preset else ExperimentConfig.from_dict(raw)
    if seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": seed})
    return cfg


def cmd_experiment(args):
    cfg = _experiment_config(args.config, args.seed)
    table = run_experiment(cfg, n_jobs=args.n_jobs)
    head = provenance_lines(cfg.to_dict(), cfg.seed)
    write_csv(args.out, table.header, table.as_rows(), head)


def cmd_theory(args):
    cfg = _model_config(args.config)
    model = model_from_dict(cfg)
    fig = figure_theory(model, args.n, level=args.level, n_points=args.n_points)
    rows = []
    for (regime, k, w), poly in fig["ellipses"]:
        group = f"{regime}:k{k}:w{w:g}"
        rows += [(group, j, x, y) for j, (x, y) in enumerate(poly)]
    for k, (x, y) in enumerate(fig["centres"]):
        rows.append((f"centre:k{k}", 0, x, y))
    head = provenance_lines(cfg, args.seed, n=args.n, level=args.level)
    write_csv(args.out, ("group", "theta_index", "x", "y"), rows, head)
    report = {
        "config_hash": config_hash(cfg),
        "n": args.n,
        "level": args.level,
        "omega": fig["moments"].omega.tolist(),
        "mu": fig["moments"].mu.tolist(),
        "Delta": fig["moments"].Delta.tolist(),
        "frame": fig["frame"].tolist(),
        "centres": fig["centres"].tolist(),
        "covariances": [
            {"regime": c["regime"], "community": c["community"], "weight": c["weight"],
             "rank": c["rank"], "Sigma": c["Sigma"].tolist(),
             "Sigma_plane": c["Sigma_plane"].tolist()}
            for c in fig["covariances"]
        ],
    }
    Path(_sibling(args.out, "report", ".json")).write_text(json.dumps(report, indent=2) + "\n")


def cmd_clt_check(args):
    cfg = _model_config(args.config)
    model = model_from_dict(cfg)
    rep = clt_empirical_check(
        model, args.n, args.reps, args.community, (args.wmin, args.wmax),
        seed=args.seed, regime=args.regime, level=args.level,
    )
    head = provenance_lines(cfg, args.seed, n=args.n, reps=args.reps,
                            community=args.community, wmin=args.wmin, wmax=args.wmax)
    m = rep.errors.shape[1]
    write_csv(args.out, [f"e{j + 2}" for j in range(m)], rep.errors, head)
    rows = []
    for group, poly in rep.ellipses.items():
        rows += [(group, j, x, y) for j, (x, y) in enumerate(poly)]
    write_csv(_sibling(args.out, "ellipses"), ("group", "theta_index", "x", "y"), rows, head)
    summary = rep.summary()
    summary["mean_ok"] = rep.mean_ok
    Path(_sibling(args.out, "report", ".json")).write_text(json.dumps(summary, indent=2) + "\n")
    print(f"count={rep.count} discrepancy={rep.discrepancy:.4f} "
          f"mean_norm={np.linalg.norm(rep.empirical_mean):.3f} bound={rep.mean_bound:.3f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="rwspectral", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a degree-corrected block model graph")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-graph", required=True)
    p.add_argument("--out-meta", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("embed", help="spectral embedding of an edge list")
    p.add_argument("--graph", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--matrix", choices=("rw", "rw+", "adj", "sym"), default="rw")
    p.add_argument("--correction", choices=("none", "sphere", "score"), default="none")
    p.add_argument("--component", choices=("largest", "each"))
    p.add_argument("--out", required=True)
    p.add_argument("--out-degrees")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="cluster an embedding")
    p.add_argument("--embedding", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=("kmeans", "gmm", "wgmm"), default="wgmm")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--degrees")
    src.add_argument("--graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-params")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("experiment", help="Monte-Carlo clustering comparison")
    p.add_argument("--config", required=True, help="preset name or YAML file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("theory", help="population centres and CLT ellipses")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, default=8000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--n-points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("clt-check", help="empirical check of the error covariance")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--community", type=int, required=True, help="0-based")
    p.add_argument("--wmin", type=float, required=True)
    p.add_argument("--wmax", type=float, required=True)
    p.add_argument("--regime", choices=("dense", "sparse"))
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_clt_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"rwspectral {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
