"""Command-line front end.

Subcommands::

    seqclusfd simulate  --model toy --n 75 --seed 1 --out toy.csv
    seqclusfd cluster   toy.csv --seed 1 --out run/
    seqclusfd evaluate  run/labels.csv toy.csv --merge majority
    seqclusfd benchmark --model B --n 90 --replicates 50 --seed 0 --out bench/

Exit codes: 0 success, 2 bad parameters, 3 bad or unreadable data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from . import __version__
from .curves import read_curves_csv, write_curves_csv
from .depth import boxplot_bands_csv
from .engine import EngineParams, run_seqclusfd
from .errors import DataError, MappingError, ParameterError, SeqClusError
from .evaluation import (ccr, confusion_matrix, majority_map, merge_labels, read_labels_csv,
                         run_benchmark)
from .generators import MODEL_GROUPS, GeneratorSpec, generate
from .io import atomic_write_text
from .plotting import boxplot_svg, feature_panels_svg
from .smoothing import SmoothingConfig, prepare_features

DEFAULT_SIZES = {"toy": 75, "A": 90, "B": 90, "C": 90, "SW": 600}


def _features(text):
    try:
        feats = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of 0, 1, 2; got {text!r}")
    if not feats or any(f not in (0, 1, 2) for f in feats):
        raise argparse.ArgumentTypeError(f"features must be drawn from 0, 1, 2; got {text!r}")
    return feats


def _knots(text):
    try:
        if "," in text:
            return tuple(float(x) for x in text.split(","))
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--knots takes a count or a comma list of locations, got {text!r}")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed; a random one is drawn and reported when omitted")


def _add_engine(p):
    p.add_argument("--nsd", type=float, default=3.0, help="standard-deviation multiplier")
    p.add_argument("--bootstrap", type=int, default=500, help="reference samples B")
    p.add_argument("--max-k", type=int, default=5)
    p.add_argument("--min-cluster", type=int, default=10)
    p.add_argument("--whisker-factor", type=float, default=3.0)
    p.add_argument("--features", type=_features, default=(0, 1, 2),
                   help="comma list of derivative orders (default 0,1,2)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def _add_smoothing(p):
    p.add_argument("--knots", type=_knots, default=None,
                   help="interior knot count or comma list of knot locations")
    pen = p.add_mutually_exclusive_group()
    pen.add_argument("--penalty", type=float, default=None, help="fixed roughness penalty")
    pen.add_argument("--gcv", action="store_true", help="choose the penalty by GCV (default)")
    pen.add_argument("--error-free", action="store_true",
                     help="interpolate the observations instead of smoothing")
    p.add_argument("--reflect", type=float, default=None,
                   help="fraction of points mirrored at each end before smoothing")
    p.add_argument("--n-eval", type=int, default=None,
                   help="evaluate features on this many equispaced points")


def _add_generator(p, required):
    p.add_argument("--model", choices=sorted(MODEL_GROUPS), required=required)
    p.add_argument("--n", type=int, default=None, help="total number of curves")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqclusfd",
                                 description="Sequential clustering of functional data.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic labeled curve CSV")
    _add_generator(p, required=True)
    _add_seed(p)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("cluster", help="cluster a curve CSV or a generated data set")
    p.add_argument("input", nargs="?", help="curve CSV (id,t_0..t_N[,label])")
    _add_generator(p, required=False)
    _add_seed(p)
    _add_engine(p)
    _add_smoothing(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--no-bands", action="store_true")

    p = sub.add_parser("evaluate", help="score predicted labels against ground truth")
    p.add_argument("labels", help="predicted id,label CSV")
    p.add_argument("truth", help="true labels: id,label CSV or curve CSV with labels")
    p.add_argument("--merge", default=None,
                   help="'majority', 'a=x,b=y' pairs, or a JSON file mapping labels")
    p.add_argument("--exclude", default=None,
                   help="comma list of ids, or @file with one id per line")
    p.add_argument("--out", default=None, help="JSON report path")

    p = sub.add_parser("benchmark", help="replicate a synthetic experiment")
    _add_generator(p, required=True)
    p.add_argument("--replicates", type=int, default=50)
    _add_seed(p)
    _add_engine(p)
    _add_smoothing(p)
    p.add_argument("--out", required=True, help="output directory")
    return ap


def _seed(args):
    if args.seed is None:
        args.seed = secrets.randbelow(2 ** 32)
        print(f"seed: {args.seed} (drawn at random)", file=sys.stderr)
    return args.seed


def _engine_params(args) -> EngineParams:
    return EngineParams(max_k=args.max_k, B=args.bootstrap, n_sd=args.nsd,
                        whisker_factor=args.whisker_factor, min_cluster_size=args.min_cluster,
                        min_boxplot_size=args.min_cluster, features=args.features,
                        master_seed=args.seed, n_jobs=args.jobs)


def _smoothing(args) -> SmoothingConfig:
    return SmoothingConfig(knots=args.knots, penalty=args.penalty, reflect=args.reflect,
                           error_free=args.error_free, n_eval=args.n_eval, n_jobs=args.jobs)


def _generator_spec(args) -> GeneratorSpec:
    n = args.n if args.n is not None else DEFAULT_SIZES[args.model]
    return GeneratorSpec(args.model, n, seed=args.seed)


def cmd_simulate(args):
    _seed(args)
    cs = generate(_generator_spec(args))
    write_curves_csv(cs, args.out)
    print(f"wrote {cs.n} curves to {args.out} (seed {args.seed})")
    return 0


def _node_name(path):
    return "root" if not path else "node-" + "-".join(str(p) for p in path)


def cmd_cluster(args):
    if (args.input is None) == (args.model is None):
        raise ParameterError("give exactly one of an input CSV or --model")
    _seed(args)
    if args.input is not None:
        cs = read_curves_csv(args.input)
        source = {"input": str(Path(args.input).resolve())}
    else:
        spec = _generator_spec(args)
        cs = generate(spec)
        source = {"model": spec.model, "n": spec.n}
    smoothing = _smoothing(args)
    params = _engine_params(args)
    stack = prepare_features(cs, smoothing)
    tree = run_seqclusfd(stack, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tree.write(out / "tree.json", out / "labels.csv")
    config = {"seed": args.seed, "source": source,
              "smoothing": {k: v for k, v in vars(smoothing).items() if k != "n_jobs"},
              "n_clusters": tree.n_clusters}
    atomic_write_text(out / "run.json", json.dumps(config, indent=2, default=str) + "\n")
    splits = list(tree.root.splits())
    if not args.no_bands:
        (out / "bands").mkdir(exist_ok=True)
        for node in splits:
            for r, fb in enumerate(node.boxplots):
                if fb is not None:
                    boxplot_bands_csv(fb, out / "bands" / f"{_node_name(node.path)}-c{r}.csv")
    if not args.no_plots:
        (out / "plots").mkdir(exist_ok=True)
        labels = tree.labels_for(cs.ids)
        feature_panels_svg(stack, labels, out / "plots" / "features.svg",
                           features=params.features, title="final clusters")
        for node in splits:
            boxplot_svg(node.boxplots, out / "plots" / f"{_node_name(node.path)}.svg",
                        title=f"{_node_name(node.path)}: split on order {node.feature} "
                              f"at t={node.instant:.4g}",
                        names=[_node_name(c.path) for c in node.children])
    print(f"seed {args.seed}: {tree.n_clusters} clusters, {len(splits)} splits; "
          f"outputs in {out}")
    for node in splits:
        sizes = ", ".join(str(len(c.member_ids)) for c in node.children)
        print(f"  {_node_name(node.path)}: order {node.feature} at t={node.instant:.4g} "
              f"-> {node.k} groups ({sizes}), {len(node.moves)} moved")
    return 0


def _parse_merge(text, predicted, truth):
    if text == "majority":
        return majority_map(truth, predicted)
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        raw = json.loads(path.read_text())
        if not isinstance(raw, dict):
            raise ParameterError("merge JSON must be an object mapping labels")
        return {str(k): str(v) for k, v in raw.items()}
    mapping = {}
    for pair in text.split(","):
        if "=" not in pair:
            raise ParameterError(f"merge entries look like label=target, got {pair!r}")
        src, dst = pair.split("=", 1)
        mapping[src.strip()] = dst.strip()
    return mapping


def _parse_exclude(text):
    if text is None:
        return set()
    if text.startswith("@"):
        lines = Path(text[1:]).read_text().splitlines()
        return {ln.strip() for ln in lines if ln.strip()}
    return {x.strip() for x in text.split(",") if x.strip()}


def cmd_evaluate(args):
    pred = read_labels_csv(args.labels)
    truth = read_labels_csv(args.truth)
    if set(pred) != set(truth):
        only_p = sorted(set(pred) - set(truth))[:5]
        only_t = sorted(set(truth) - set(pred))[:5]
        raise MappingError(f"id sets differ (only predicted: {only_p}, only truth: {only_t})")
    excluded = _parse_exclude(args.exclude)
    unknown = sorted(excluded - set(truth))
    if unknown:
        raise MappingError(f"excluded ids not in the data: {unknown[:5]}")
    ids = [i for i in truth if i not in excluded]
    if not ids:
        raise DataError("every id was excluded")
    t = [truth[i] for i in ids]
    p = [pred[i] for i in ids]
    mapping = None
    if args.merge is not None:
        mapping = _parse_merge(args.merge, p, t)
        p = merge_labels(p, mapping)
    score = ccr(t, p)
    tl, pl, counts = confusion_matrix(t, p)
    width = max([len(str(x)) for x in tl + pl] + [5])
    print(f"CCR: {score:.2f}% over {len(ids)} curves ({len(excluded)} excluded)")
    corner = "truth \\ predicted"
    first = max(len(corner), width) + 2
    print(corner.ljust(first) + " ".join(str(x).rjust(width) for x in pl))
    for a, lab in enumerate(tl):
        print(str(lab).ljust(first) + " ".join(str(c).rjust(width) for c in counts[a]))
    if args.out:
        doc = {"ccr": score, "n": len(ids), "excluded": sorted(excluded), "merge": mapping,
               "truth_labels": tl, "predicted_labels": pl, "confusion": counts.tolist()}
        atomic_write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_benchmark(args):
    _seed(args)
    if args.replicates < 1:
        raise ParameterError(f"replicates must be at least 1, got {args.replicates}")
    spec = _generator_spec(args)
    params = _engine_params(args)
    smoothing = _smoothing(args)
    # replicates run in parallel; keep each replicate single threaded inside
    inner = EngineParams(**{**vars(params), "n_jobs": 1})
    report = run_benchmark(spec, args.replicates, inner,
                           SmoothingConfig(**{**vars(smoothing), "n_jobs": 1}),
                           n_jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = f"seed: {args.seed}\n" + report.to_text()
    atomic_write_text(out / "benchmark.txt", text)
    atomic_write_text(out / "benchmark.json", report.to_json() + "\n")
    print(text, end="")
    return 0


COMMANDS = {"simulate": cmd_simulate, "cluster": cmd_cluster, "evaluate": cmd_evaluate,
            "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SeqClusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
