"""``adgp`` command line.

Subcommands: spectrum, banana, ablation, regress, export, import. Exit
codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file overriding the command defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded XLA so repeated runs give identical files")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="adgp", description="Activated deep Gaussian process experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common], help="write a kernel or activation spectrum as CSV")
    s.add_argument("shape", help="ArcCosine1, Matern52Zonal, ReLU or SoftplusRescaled")
    s.add_argument("-d", "--dim", type=int, required=True, help="ambient dimension d of S^{d-1}")
    s.add_argument("-n", "--truncation", type=int, default=10)
    s.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="shape parameter, e.g. lengthscale=0.5 or beta=5")

    sub.add_parser("banana", parents=[common], help="two-stage fits on the banana classification data")
    sub.add_parser("ablation", parents=[common], help="Nystrom residual of Matern vs arc-cosine pairings")
    r = sub.add_parser("regress", parents=[common], help="(A)DGP regression benchmark over seeded splits")
    r.add_argument("--data", help="CSV with header, last column target; default: synthetic network data")

    e = sub.add_parser("export", parents=[common], help="write the posterior-mean network of a model")
    e.add_argument("model", type=Path, help="model checkpoint JSON")
    i = sub.add_parser("import", parents=[common], help="build a deep GP whose mean is a given network")
    i.add_argument("net", type=Path, help="network JSON")
    i.add_argument("--template", type=Path, help="model checkpoint supplying kernels and likelihood")
    i.add_argument("--likelihood", choices=["gaussian", "probit"], default="gaussian",
                   help="likelihood when no template is given")
    return p


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    from .data import DataError

    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config {path} must hold a JSON object")
    return data


def _parse_params(items) -> dict:
    params = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"shape parameter {item!r} is not NAME=VALUE")
        params[name] = float(value)
    return params


def _default_template(net, likelihood: str):
    import numpy as np

    from ..deepgp.builders import build_deep_gp

    rng = np.random.default_rng(0)
    first = net.layers[0]
    return build_deep_gp(rng, first.dim - 1, [l.width for l in net.layers], [l.output_dim for l in net.layers],
                         activation=first.activation, truncation=first.truncation, likelihood=likelihood)


def _run(args) -> None:
    from . import experiments as ex

    overrides = _load_config(args.config)
    out = args.out
    if args.command == "spectrum":
        spec = {"kind": args.shape, "params": {**overrides.get("params", {}), **_parse_params(args.param)}}
        path = ex.run_spectrum(spec, args.dim, args.truncation, out)
        print(path)
    elif args.command == "banana":
        summary = ex.run_banana(ex.merged_config("banana", overrides), args.seed, out)
        print(json.dumps(summary, indent=1))
    elif args.command == "ablation":
        summary = ex.run_ablation(ex.merged_config("ablation", overrides), args.seed, out)
        print(json.dumps(summary, indent=1))
    elif args.command == "regress":
        if args.data:
            overrides["data"] = args.data
        summary = ex.run_regress(ex.merged_config("regress", overrides), args.seed, out)
        print(json.dumps(summary, indent=1))
    elif args.command == "export":
        from ..deepgp.checkpoint import load_model
        from ..deepgp.network import export_nn

        out.mkdir(parents=True, exist_ok=True)
        path = out / "network.json"
        export_nn(load_model(args.model)).save(path)
        print(path)
    elif args.command == "import":
        from ..deepgp.checkpoint import load_model, save_model
        from ..deepgp.network import DenseNet, import_nn

        net = DenseNet.load(args.net)
        template = load_model(args.template) if args.template else _default_template(net, args.likelihood)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "model.json"
        save_model(import_nn(net, template), path, seed=args.seed)
        print(path)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.deterministic:
        # must happen before the first computation initialises the backend
        os.environ["XLA_FLAGS"] = (os.environ.get("XLA_FLAGS", "")
                                   + " --xla_cpu_multi_thread_eigen=false intra_op_parallelism_threads=1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    from ..deepgp.network import SchemaError, UnsupportedInducingError
    from ..linalg import NumericalError
    from .data import DataError

    try:
        _run(args)
    except (DataError, SchemaError, FileNotFoundError) as exc:
        print(f"adgp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"adgp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, UnsupportedInducingError) as exc:
        print(f"adgp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
