"""Command line interface: ``gwac generate|compress|decompress|eval|sweep``.

Exit codes: 0 success, 1 usage error, 2 bad input data or bitstream.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from .codec import Bitstream, CodecConfig, SectionError, compress, decompress
from .entropy import DecodeError
from .evaluation import (DEFAULT_POINTS, METHODS, GenSpec, MetricReport, clusters_for,
                         cluster_consistency, diffusion_snr, generate, rd_sweep, rows_to_csv,
                         rows_to_json, snr, spectral_clustering)
from .graph import GraphError, format_edgelist, read_edgelist, weighted_adjacency

KIND_ALIASES = {"er": "erdos_renyi", "erdos-renyi": "erdos_renyi"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def write_atomic(path, data) -> None:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _kind(name: str) -> str:
    return KIND_ALIASES.get(name, name)


def _codec_flags(p, rho=True):
    p.add_argument("--mode", choices=["line", "edge"])
    if rho:
        p.add_argument("--rho", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--mmax", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwac", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic graph as an edge list")
    p.add_argument("--kind", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compress", help="edge list -> .gwac bitstream")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _codec_flags(p)

    p = sub.add_parser("decompress", help=".gwac bitstream -> edge list")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a bitstream against its reference graph")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="rate-distortion sweep over methods and points")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="generator kind")
    src.add_argument("--in", dest="inp", help="edge-list file")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--points", help="comma separated budget fractions")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)
    _codec_flags(p, rho=False)
    return parser


DEFAULTS = {"mode": "line", "rho": 1.0, "step": 0.01, "K": 8, "mmax": 2, "seed": 0,
            "n": 500, "trials": 20, "format": "csv", "points": None, "clusters": None,
            "p": None, "k": None}


def resolve(args, config: dict) -> argparse.Namespace:
    """Fill unset flags from the config file, then from defaults."""
    merged = vars(args).copy()
    for key, default in DEFAULTS.items():
        if merged.get(key) is None and key in merged:
            merged[key] = config.get(key, default)
    return argparse.Namespace(**merged)


def codec_config(a) -> CodecConfig:
    try:
        return CodecConfig(quant_step=a.step, keep_fraction=a.rho, operator_mode=a.mode,
                           filter_order=a.K, m_max=a.mmax)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_graph(path):
    try:
        return read_edgelist(path)
    except (GraphError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_generate(a):
    extra = {k: v for k, v in (("p", a.p), ("k", a.k)) if v is not None}
    try:
        spec = GenSpec(_kind(a.kind), n=a.n, seed=a.seed, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_atomic(a.out, format_edgelist(generate(spec)))


def cmd_compress(a):
    g = _read_graph(a.inp)
    write_atomic(a.out, compress(g, codec_config(a)).to_bytes())


def _read_stream(path):
    try:
        return decompress(Path(path).read_bytes())
    except SectionError as exc:
        raise DataError(f"{path}: {exc}") from None
    except DecodeError as exc:
        raise DataError(f"{path}: {type(exc).__name__}: {exc}") from None


def cmd_decompress(a):
    write_atomic(a.out, format_edgelist(_read_stream(a.inp)))


def _emit(text: str, out):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def cmd_eval(a):
    raw = Path(a.inp).read_bytes()
    rec = _read_stream(a.inp)
    b = Bitstream.from_bytes(raw)
    ref = _read_graph(a.ref)
    if ref.n != rec.n:
        raise DataError("reference and bitstream disagree on the node count")
    W, Wr = weighted_adjacency(ref).toarray(), weighted_adjacency(rec).toarray()
    k = a.clusters or clusters_for(None)
    row = MetricReport(f"proposed-{b.config.operator_mode}", b.config.keep_fraction,
                       b.topology_bytes, b.weights_bytes, b.total_bytes, snr(W, Wr),
                       diffusion_snr(W, Wr, a.trials, a.seed),
                       cluster_consistency(spectral_clustering(W, k, a.seed),
                                           spectral_clustering(Wr, k, a.seed)), a.seed)
    _emit(rows_to_csv([row]) if a.format == "csv" else rows_to_json([row]), a.out)


def cmd_sweep(a):
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods: {', '.join(bad)}")
    try:
        points = (tuple(float(x) for x in a.points.split(",")) if a.points else DEFAULT_POINTS)
    except ValueError:
        raise UsageError(f"bad --points value {a.points!r}") from None
    if any(not 0 < x <= 1 for x in points):
        raise UsageError("points must lie in (0, 1]")
    if a.inp:
        g, kind = _read_graph(a.inp), None
    else:
        kind = _kind(a.graph)
        try:
            g = generate(GenSpec(kind, n=a.n, seed=a.seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    # sweeps choose rho per cell
    cfg = codec_config(argparse.Namespace(**dict(vars(a), rho=1.0)))
    result = rd_sweep(g, methods, points, cfg, a.seed, kind, a.trials, a.clusters)
    text = rows_to_csv(result.rows) if a.format == "csv" else rows_to_json(result.rows)
    write_atomic(a.out, text)
    refs = dict(result.reference_bytes, n=g.n, edges=g.num_edges, seed=a.seed,
                config=asdict(cfg))
    write_atomic(str(a.out) + ".refs.json", json.dumps(refs, indent=1, sort_keys=True) + "\n")


COMMANDS = {"generate": cmd_generate, "compress": cmd_compress, "decompress": cmd_decompress,
            "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = {}
        if args.config:
            try:
                config = json.loads(Path(args.config).read_text())
            except (OSError, ValueError) as exc:
                raise UsageError(f"cannot read config: {exc}") from None
        a = resolve(args, config)
        COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"gwac: usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"gwac: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"gwac: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
