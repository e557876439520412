"""Command-line entry point.

Results go to standard output (or ``--out``) as CSV; diagnostics are written
as lines starting with ``#`` so that reruns can be compared byte for byte
after dropping them.  Exit status: 0 success, 2 usage or configuration
error, 3 data or format error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from pathlib import Path

from .config import read_config
from .errors import ConfigurationError, DataError, LandvecError, UsageError

TASKS = ("multimodal", "global_structure", "funnel")


def _log(msg: str) -> None:
    print(f"# {msg}", file=sys.stderr, flush=True)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _read_values(path) -> "list[float]":
    """Objective values, one per line or comma separated; ``#`` lines ignored."""
    vals = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.extend(float(t) for t in line.replace(",", " ").split())
        except ValueError:
            raise DataError(f"{path}: non-numeric entry in {line!r}") from None
    return vals


# -- commands --------------------------------------------------------------

def cmd_generate(args) -> int:
    from .persistence import write_dataset
    from .randfunc import generate_suite, write_suite

    _need(args, "count", "dim", "out")
    if args.count < 1:
        raise UsageError(f"--count must be at least 1, got {args.count}")
    t0 = time.perf_counter()
    exprs, values, rejected = generate_suite(args.count, args.dim, args.seed, args.m, args.lower, args.upper)
    header = {"d": args.dim, "m": args.m, "seed": args.seed, "count": args.count,
              "lower": repr(args.lower), "upper": repr(args.upper)}
    write_suite(f"{args.out}.suite.txt", exprs, header)
    write_dataset(f"{args.out}.d2vd", values, args.dim)
    print(f"rejected,{rejected}")
    _log(f"wrote {args.count} functions to {args.out}.suite.txt and {args.out}.d2vd "
         f"in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_train(args) -> int:
    from .persistence import dataset_fingerprint, read_dataset, write_model
    from .vae import TrainConfig, check_latent_size, train

    _need(args, "data", "out")
    ds = read_dataset(args.data)
    check_latent_size(ds.n, args.latent)
    cfg = TrainConfig(beta=args.kl_weight, lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                      seed=args.seed, validation_fraction=args.validation_fraction)
    cols = ["epoch", "train_loss", "train_mse", "train_kl", "val_loss_vae", "val_loss_mse", "val_loss_kl"]
    print(",".join(cols), flush=True)

    def on_epoch(rec):
        print(",".join([str(rec["epoch"])] + [_fmt(rec[c]) for c in cols[1:]]), flush=True)

    t0 = time.perf_counter()
    model = train(ds.values, cfg, args.kind, args.latent, dataset_fingerprint(ds.values, ds.d), on_epoch)
    model.metadata["d"] = ds.d
    write_model(model, args.out)
    _log(f"trained {args.kind}-{args.latent} in {time.perf_counter() - t0:.1f}s; model {model.fingerprint()}")
    return 0


def _load_inputs(args):
    import numpy as np

    from .persistence import read_dataset
    from .sampling import normalize_array

    if args.data:
        return read_dataset(args.data).values
    if args.values:
        return normalize_array(np.array(_read_values(args.values)))[None, :]
    raise UsageError(f"{args.command}: give --data (dataset file) or --values (value file)")


def cmd_encode(args) -> int:
    from .persistence import read_model
    from .vae import encode_batch

    _need(args, "model")
    model = read_model(args.model)
    Z = encode_batch(model, _load_inputs(args))
    rows = [[i] + [_fmt(v) for v in z] for i, z in enumerate(Z)]
    _emit(_csv_text(["index"] + [f"z_{j}" for j in range(model.ls)], rows), args.out)
    return 0


def cmd_reconstruct(args) -> int:
    from .persistence import read_model
    from .vae import decode_batch, encode_batch

    _need(args, "model")
    model = read_model(args.model)
    X = _load_inputs(args)
    R = decode_batch(model, encode_batch(model, X))
    rows = [[i] + [_fmt(v) for v in r] for i, r in enumerate(R)]
    _emit(_csv_text(["index"] + [f"y_{j}" for j in range(model.n)], rows), args.out)
    return 0


def cmd_archive(args) -> int:
    from .persistence import read_model, read_suite, write_archive
    from .retrieval import build_archive
    from .sampling import sobol_points

    _need(args, "model", "suite", "out")
    model = read_model(args.model)
    exprs, meta = read_suite(args.suite)
    d = exprs[0].d if exprs else int(meta.get("d", 1))
    m = model.n.bit_length() - 1
    if 2**m != model.n:
        raise UsageError(f"model input size {model.n} is not a power of two")
    arch = build_archive(model, exprs, sobol_points(m, d), args.lower, args.upper)
    write_archive(arch, args.out)
    _log(f"archived {len(arch)} functions ({arch.skipped} skipped)")
    return 0


def cmd_nearest(args) -> int:
    import numpy as np

    from .persistence import read_archive, read_model
    from .retrieval import query_landscape

    _need(args, "model", "archive", "query")
    model = read_model(args.model)
    arch = read_archive(args.archive)
    hits = query_landscape(model, arch, np.array(_read_values(args.query)), args.k)
    rows = [[rank, _fmt(dist), arch.expressions[i]] for rank, (i, dist) in enumerate(hits, start=1)]
    _emit(_csv_text(["rank", "distance", "expression"], rows), args.out)
    return 0


def cmd_classify(args) -> int:
    from .classify import run_task
    from .persistence import read_model

    _need(args, "dim", "task", "featureset")
    model = None
    if args.featureset != "ela":
        if not args.models:
            raise ConfigurationError(f"featureset {args.featureset!r} needs --models")
        if not Path(args.models).exists():
            raise ConfigurationError(f"model file {args.models} does not exist")
        model = read_model(args.models)
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    t0 = time.perf_counter()
    res = run_task(args.dim, args.task, args.featureset, model, seeds=range(args.seeds), m=args.m,
                   n_trees=args.trees)
    _emit(res.to_csv(), args.out)
    _log(f"classified {args.task} with {args.featureset} in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_sweep(args) -> int:
    from .analysis import sweep
    from .persistence import dataset_fingerprint, read_dataset
    from .vae import TrainConfig

    _need(args, "data")
    ds = read_dataset(args.data)
    cfg = TrainConfig(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                      validation_fraction=args.validation_fraction)
    res = sweep(args.latent_sizes, args.kl_weights, ds.values, cfg, dataset_fingerprint(ds.values, ds.d))
    _emit(res.to_csv(), args.out)
    return 0


def cmd_mds(args) -> int:
    import numpy as np

    from .analysis import classical_mds, mds_csv

    if args.features:
        with open(args.features, newline="", encoding="utf-8") as fh:
            table = list(csv.reader(fh))
        if len(table) < 2:
            raise UsageError(f"{args.features}: no feature rows")
        header, body = table[0], table[1:]
        label_col = header.index("label") if "label" in header else None
        id_col = header.index("id") if "id" in header else None
        skip = {label_col, id_col}
        vec_cols = [j for j in range(len(header)) if j not in skip]
        X = np.array([[float(r[j]) for j in vec_cols] for r in body])
        labels = [r[label_col] for r in body] if label_col is not None else None
        ids = [r[id_col] for r in body] if id_col is not None else None
    else:
        from .classify import TRAIN_INSTANCES, bbob_landscapes, feature_matrix
        from .persistence import read_model

        _need(args, "dim", "featureset")
        model = read_model(args.models) if args.models else None
        m = args.m if model is None else model.n.bit_length() - 1
        land = bbob_landscapes(args.dim, m, TRAIN_INSTANCES)
        X, _ = feature_matrix(land, args.featureset, model)
        labels = [f"f{fid}" for fid, _ in land.keys]
        ids = [f"{fid}-{inst}" for fid, inst in land.keys]
    emb = classical_mds(X)
    _emit(mds_csv(emb, labels, ids), args.out)
    _log(f"MDS stress {emb.stress:.6g} after {emb.iterations} power iterations")
    return 0


def cmd_traverse(args) -> int:
    from .analysis import latent_traversal, traversal_deltas
    from .persistence import read_model
    from .vae import encode_batch

    _need(args, "model")
    model = read_model(args.model)
    X = _load_inputs(args)
    if not 0 <= args.record < X.shape[0]:
        raise UsageError(f"--record {args.record} outside [0, {X.shape[0]})")
    z0 = encode_batch(model, X[args.record:args.record + 1])[0]
    deltas = traversal_deltas(args.lo, args.hi, args.step)
    indices = range(model.ls) if args.index is None else [args.index]
    rows = []
    for idx in indices:
        for delta, frame in zip(deltas, latent_traversal(model, z0, idx, deltas)):
            rows.append([idx, _fmt(delta)] + [_fmt(v) for v in frame])
    _emit(_csv_text(["latent_index", "delta"] + [f"y_{j}" for j in range(model.n)], rows), args.out)
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="landvec", description="Landscape embeddings with (variational) autoencoders.")
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads")
    parser.add_argument("--deterministic", action="store_true", help="single-threaded numerics")
    sub = parser.add_subparsers(dest="command", metavar="command")
    subs = {}

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        subs[name] = p
        return p

    def bounds(p):
        p.add_argument("--lower", type=float, default=-5.0)
        p.add_argument("--upper", type=float, default=5.0)

    def training(p):
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--validation-fraction", type=float, default=0.1)

    def inputs(p):
        p.add_argument("--model")
        p.add_argument("--data", help="dataset file")
        p.add_argument("--values", help="text file of raw objective values on the design")
        p.add_argument("--out")

    p = add("generate", cmd_generate, "random function suite and its dataset")
    p.add_argument("--count", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=8, help="design size 2**m")
    p.add_argument("--out", help="output prefix")
    bounds(p)

    p = add("train", cmd_train, "train an AE or VAE")
    p.add_argument("--data")
    p.add_argument("--kind", choices=("ae", "vae"), default="vae")
    p.add_argument("--latent", type=int, default=24)
    p.add_argument("--kl-weight", type=float, default=0.001)
    p.add_argument("--out")
    training(p)

    inputs(add("encode", cmd_encode, "latent vectors for landscapes"))
    inputs(add("reconstruct", cmd_reconstruct, "decoded reconstructions"))

    p = add("archive", cmd_archive, "encode a function suite into an archive")
    p.add_argument("--model")
    p.add_argument("--suite")
    p.add_argument("--out")
    bounds(p)

    p = add("nearest", cmd_nearest, "nearest archived functions to a landscape")
    p.add_argument("--model")
    p.add_argument("--archive")
    p.add_argument("--query", help="text file of raw objective values")
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--out")

    p = add("classify", cmd_classify, "BBOB high-level property classification")
    p.add_argument("--dim", type=int)
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--featureset", choices=("ae", "vae", "ela", "ela+vae", "ela+ae"))
    p.add_argument("--models", help="model file for latent feature sets")
    p.add_argument("--seeds", type=int, default=10, help="number of forest seeds (0..N-1)")
    p.add_argument("--m", type=int, default=None, help="design size 2**m (default: from the model, else 8)")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--out")

    p = add("sweep", cmd_sweep, "latent size x KL weight grid")
    p.add_argument("--data")
    p.add_argument("--latent-sizes", type=_int_list, default=[4, 8, 16, 24, 32])
    p.add_argument("--kl-weights", type=_float_list, default=[0.0001, 0.0002, 0.001, 0.005, 0.01])
    p.add_argument("--out")
    training(p)

    p = add("mds", cmd_mds, "2d classical MDS of feature vectors")
    p.add_argument("--features", help="CSV of vectors (optional id and label columns)")
    p.add_argument("--dim", type=int, help="embed BBOB instances 1-100 instead")
    p.add_argument("--featureset", choices=("ae", "vae", "ela", "ela+vae", "ela+ae"))
    p.add_argument("--models")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--out")

    p = add("traverse", cmd_traverse, "decode steps along latent axes")
    inputs(p)
    p.add_argument("--record", type=int, default=0)
    p.add_argument("--index", type=int, default=None, help="latent index (default: all)")
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.25)
    return parser, subs


def _apply_config(path: str, subs: dict[str, argparse.ArgumentParser]) -> None:
    cfg = read_config(path)
    known = set()
    for name, p in subs.items():
        actions = {a.dest: a for a in p._actions if a.dest not in ("help", "func")}
        known.update(actions)
        defaults = {}
        for key, raw in cfg.items():
            act = actions.get(key)
            if act is None:
                continue
            try:
                if isinstance(act, argparse._StoreTrueAction):
                    value = raw.lower() in ("1", "true", "yes", "on")
                else:
                    value = act.type(raw) if act.type else raw
            except ValueError:
                raise ConfigurationError(f"{path}: bad value for {key}: {raw!r}") from None
            if act.choices is not None and value not in act.choices:
                raise ConfigurationError(f"{path}: {key} must be one of {list(act.choices)}")
            defaults[key] = value
        p.set_defaults(**defaults)
    unknown = sorted(set(cfg) - known - {"threads", "deterministic"})
    if unknown:
        raise ConfigurationError(f"{path}: unknown key(s) {', '.join(unknown)}")


def _limit_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    if "numpy" in sys.modules:
        _log("numpy already loaded; thread cap applies to child processes only")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    try:
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(known.config, subs)
    except LandvecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 2
        _limit_threads(args.threads)
    elif args.deterministic:
        _limit_threads(1)
    try:
        return args.func(args)
    except LandvecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
