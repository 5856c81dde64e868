"""Command-line front end: construct / simulate / dataset / train / eval /
search / plot.

Each subcommand is a thin orchestration layer over the library modules.
Configuration precedence is flags > config file > environment > defaults
(environment overrides exist only for seed and threads). Every run writes a
`<out>.manifest` echoing the fully resolved configuration so outputs can be
regenerated byte-identically.

Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 numeric or
simulation failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import channel, construction, io_formats, search, surrogate
from .channel import ChannelConfig, MonteCarloConfig
from .codec import CodeSpec, DecoderConfig
from .errors import (InvalidArgument, InvalidState, NumericError,
                     PolarLabError, SchemaError)

log = logging.getLogger("polarlab")

ENV_SEED = "POLARLAB_SEED"
ENV_THREADS = "POLARLAB_THREADS"


# ---------------------------------------------------------------------------
# configuration resolution

class _Opt:
    def __init__(self, flag, type_, default, help_, action=None):
        self.flag = flag
        self.dest = flag.lstrip("-").replace("-", "_")
        self.type = type_
        self.default = default
        self.help = help_
        self.action = action


def _add_options(parser, opts):
    for o in opts:
        if o.action == "store_true":
            parser.add_argument(o.flag, dest=o.dest, action="store_const",
                                const=True, default=None, help=o.help)
        else:
            parser.add_argument(o.flag, dest=o.dest, type=o.type,
                                default=None, help=o.help)


def _parse_bool(token: str) -> bool:
    low = token.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidArgument(f"not a boolean: {token!r}")


def _load_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` file; '#' starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise SchemaError(f"{path}:{lineno}: expected key=value")
        key, value = text.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, opts) -> dict:
    """Merge flag > config file > environment > default per option."""
    file_vals = _load_config_file(args.config) if args.config else {}
    env_map = {"seed": ENV_SEED, "threads": ENV_THREADS}
    resolved = {}
    for o in opts:
        value = getattr(args, o.dest, None)
        if value is None and o.dest in file_vals:
            conv = _parse_bool if o.action == "store_true" else o.type
            try:
                value = conv(file_vals[o.dest])
            except (ValueError, InvalidArgument) as exc:
                raise InvalidArgument(
                    f"config file value for {o.dest!r}: {exc}") from exc
        if value is None and o.dest in env_map and env_map[o.dest] in os.environ:
            value = o.type(os.environ[env_map[o.dest]])
        if value is None:
            value = o.default
        resolved[o.dest] = value
    unknown = set(file_vals) - {o.dest for o in opts}
    if unknown:
        raise InvalidArgument(
            f"config file sets unknown keys: {sorted(unknown)}")
    return resolved


def _write_manifest(out_path: str, command: str, resolved: dict) -> None:
    lines = [f"command: {command}"]
    for key in sorted(resolved):
        lines.append(f"{key}: {resolved[key]}")
    with open(out_path + ".manifest", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_ebn0_list(token: str) -> list[float]:
    """'a:b:step' sweep (inclusive) or comma-separated values."""
    if ":" in token:
        parts = token.split(":")
        if len(parts) != 3:
            raise InvalidArgument("sweep must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise InvalidArgument("sweep needs step > 0 and stop >= start")
        count = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(count)
                if start + i * step <= stop + 1e-9]
    return [float(p) for p in token.split(",") if p.strip()]


def _decoder_from(resolved) -> DecoderConfig:
    algorithm = "sc" if resolved["list_size"] == 1 else "scl"
    return DecoderConfig(algorithm, resolved["list_size"],
                         resolved["metric"], resolved["node"])


_DECODER_OPTS = [
    _Opt("--list-size", int, 4, "SCL list size (1 = plain SC)"),
    _Opt("--metric", str, "approximate", "path metric: exact|approximate"),
    _Opt("--node", str, "min_sum_f", "f-node rule: exact_f|min_sum_f"),
]
_MC_OPTS = [
    _Opt("--seed", int, 0, "global RNG seed"),
    _Opt("--threads", int, 1, "simulation worker threads"),
    _Opt("--target-errors", int, 100, "frame errors before early stop"),
    _Opt("--max-frames", int, 1_000_000, "frame budget per point"),
]


# ---------------------------------------------------------------------------
# subcommands

def _require_code_dims(r):
    if r["n"] is None or r["k"] is None:
        raise InvalidArgument("--n and --k are required")
    return CodeSpec(r["n"], r["k"])


def cmd_construct(args, opts):
    r = _resolve(args, opts)
    spec = _require_code_dims(r)
    order = construction.ga_reliabilities(spec, r["ebn0"])
    mask = construction.build_mask(spec, order)
    io_formats.save_mask(r["out"], spec, mask,
                         {"design_ebn0_db": r["ebn0"], "method": "ga"})
    _write_manifest(r["out"], "construct", r)
    print(f"wrote GA mask ({r['n']},{r['k']}) at {r['ebn0']} dB -> {r['out']}")
    return 0


def cmd_simulate(args, opts):
    r = _resolve(args, opts)
    spec, mask = io_formats.load_mask(r["mask"])
    decoder = _decoder_from(r)
    points = []
    for ebn0 in _parse_ebn0_list(r["ebn0"]):
        mc = MonteCarloConfig(r["seed"], r["target_errors"], r["max_frames"],
                              r["threads"])
        est = channel.estimate_fer(spec, mask, decoder,
                                   ChannelConfig(ebn0, spec.rate), mc)
        print(f"ebn0={ebn0:6.2f} dB  fer={est.fer:.6e}  "
              f"frames={est.frames}  errors={est.frame_errors}")
        points.append((ebn0, est))
    label = f"({spec.n_bits},{spec.k_info}) {decoder.algorithm.upper()}" \
            + (f"-{decoder.list_size}" if decoder.algorithm == "scl" else "")
    csv_path, svg_path = io_formats.emit_fer_curve(points, r["out"], label)
    _write_manifest(r["out"], "simulate", r)
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def cmd_dataset(args, opts):
    r = _resolve(args, opts)
    spec = _require_code_dims(r)
    order = construction.ga_reliabilities(spec, r["design_ebn0"])
    decoder = _decoder_from(r)
    cfg = ChannelConfig(r["ebn0"], spec.rate)
    mc = MonteCarloConfig(r["seed"], r["target_errors"], r["max_frames"],
                          r["threads"])
    shuffle = construction.ShuffleConfig(r["range_r"], r["count_d"], r["seed"])

    def progress(done, total):
        if done % 25 == 0 or done == total:
            print(f"  simulated {done}/{total} masks")

    records = construction.generate_dataset(spec, order, shuffle, decoder,
                                            cfg, mc, progress=progress)
    header = io_formats.DatasetHeader(
        r["n"], r["k"], decoder.algorithm, decoder.list_size, r["ebn0"],
        r["design_ebn0"], r["range_r"], r["count_d"], r["seed"])
    io_formats.save_dataset(r["out"], header, records)
    _write_manifest(r["out"], "dataset", r)
    fers = [rec.fer_estimate.fer for rec in records]
    print(f"wrote {len(records)} records -> {r['out']}  "
          f"fer range [{min(fers):.3e}, {max(fers):.3e}]")
    return 0


def cmd_train(args, opts):
    r = _resolve(args, opts)
    _, records = io_formats.load_dataset(r["dataset"])
    mlp = surrogate.MlpConfig(r["depth"], r["hidden"], r["gap"])
    tc = surrogate.TrainConfig(
        epochs=r["epochs"], batch_size=r["batch_size"], learning_rate=r["lr"],
        seed=r["seed"], dropout_p=r["dropout"], batchnorm=r["batchnorm"],
        mixup_alpha=r["mixup"])
    params, standardizer, report = surrogate.train(records, r["split"], mlp, tc)
    chance = surrogate.constant_predictor_ioe(records)
    io_formats.save_model(r["out"], params, standardizer, {
        "epochs": tc.epochs, "batch_size": tc.batch_size,
        "learning_rate": tc.learning_rate, "seed": tc.seed,
        "dropout_p": tc.dropout_p, "batchnorm": tc.batchnorm,
        "mixup_alpha": tc.mixup_alpha, "split": r["split"],
        "dataset": r["dataset"]})
    _write_manifest(r["out"], "train", r)
    print(f"validation average IOE {report.average_ioe:.4f} "
          f"(worst {report.worst_ioe:.4f}, {report.count} samples); "
          f"constant-predictor IOE {chance.average_ioe:.4f}")
    print(f"wrote model -> {r['out']}")
    return 0


def cmd_eval(args, opts):
    r = _resolve(args, opts)
    params, standardizer = io_formats.load_model(r["model"])
    _, records = io_formats.load_dataset(r["dataset"])
    report = surrogate.evaluate_ioe(params, standardizer, records)
    chance = surrogate.constant_predictor_ioe(records)
    print(f"average IOE {report.average_ioe:.4f}  worst {report.worst_ioe:.4f}"
          f"  samples {report.count}  chance {chance.average_ioe:.4f}")
    return 0


def cmd_search(args, opts):
    r = _resolve(args, opts)
    params, standardizer = io_formats.load_model(r["model"])
    header, records = io_formats.load_dataset(r["dataset"])
    spec = header.spec
    order = construction.ga_reliabilities(spec, header.design_ebn0_db)
    base_mask = construction.build_mask(spec, order)
    decoder = DecoderConfig("sc" if header.list_size == 1 else "scl",
                            header.list_size, r["metric"], r["node"])
    cfg = search.PgdConfig(r["iters"], r["mu"], r["restarts"], r["seed"],
                           r["topk"])
    mc = MonteCarloConfig(r["seed"], r["target_errors"], r["max_frames"],
                          r["threads"])

    def progress(done, total):
        if done % 8 == 0 or done == total:
            print(f"  finished restart {done}/{total}")

    reports = search.search_and_validate(
        params, standardizer, cfg, spec, decoder,
        ChannelConfig(header.ebn0_db, spec.rate), mc, base_mask,
        progress=progress)
    io_formats.save_candidates(r["out"], spec, reports)
    _write_manifest(r["out"], "search", r)
    best_data = min((rec.fer_estimate.fer for rec in records), default=None)
    for rep in reports[:r["topk"]]:
        val = "-" if rep.validated is None else f"{rep.validated.fer:.4e}"
        print(f"  pred {rep.predicted_fer:.4e}  validated {val}  "
              f"(restart {rep.restart_index})")
    if best_data is not None:
        print(f"best dataset FER for comparison: {best_data:.4e}")
    print(f"wrote {len(reports)} candidates -> {r['out']}")
    return 0


def cmd_plot(args, opts):
    r = _resolve(args, opts)
    curves = {}
    for spec_token in args.curve:
        if "=" in spec_token:
            label, path = spec_token.split("=", 1)
        else:
            label, path = os.path.basename(spec_token), spec_token
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise SchemaError(f"cannot read {path}: {exc}") from exc
        if not lines or lines[0] != "ebn0_db,fer,ci_halfwidth,frames":
            raise SchemaError(f"{path}:1: not a polarlab FER CSV")
        pts = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            cols = line.split(",")
            if len(cols) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 columns")
            try:
                pts.append((float(cols[0]), float(cols[1])))
            except ValueError:
                raise SchemaError(
                    f"{path}:{lineno}: malformed number") from None
        curves[label] = pts
    with open(r["out"], "w", encoding="utf-8") as fh:
        fh.write(io_formats.render_fer_svg(curves))
    _write_manifest(r["out"], "plot", r | {"curve": list(args.curve)})
    print(f"wrote {r['out']}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="polarlab",
        description="Polar-code construction laboratory: GA baselines, "
                    "Monte Carlo FER, surrogate training, and PGD search.")
    parser.add_argument("--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    table = {}

    def register(name, func, opts, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None,
                       help="flat key=value config file")
        _add_options(p, opts)
        table[name] = (func, opts)
        return p

    register("construct", cmd_construct, [
        _Opt("--n", int, None, "block length (power of two)"),
        _Opt("--k", int, None, "information bits"),
        _Opt("--ebn0", float, 2.0, "design Eb/N0 in dB"),
        _Opt("--out", str, "mask.txt", "output mask file"),
    ], "GA construction: write the baseline frozen mask")

    register("simulate", cmd_simulate, [
        _Opt("--mask", str, "mask.txt", "input mask file"),
        _Opt("--ebn0", str, "0.8:6.0:0.4", "Eb/N0 sweep a:b:step or list"),
        _Opt("--out", str, "fer", "output path prefix (.csv/.svg)"),
        *_DECODER_OPTS, *_MC_OPTS,
    ], "Monte Carlo FER curve for a stored mask")

    register("dataset", cmd_dataset, [
        _Opt("--n", int, None, "block length (power of two)"),
        _Opt("--k", int, None, "information bits"),
        _Opt("--ebn0", float, 2.0, "simulation Eb/N0 in dB"),
        _Opt("--design-ebn0", float, 2.0, "GA design Eb/N0 in dB"),
        _Opt("--range-r", int, 8, "shuffle window half-width"),
        _Opt("--count-d", int, 100, "number of shuffled variants"),
        _Opt("--out", str, "dataset.txt", "output dataset file"),
        *_DECODER_OPTS, *_MC_OPTS,
    ], "generate a shuffled-mask FER dataset")

    register("train", cmd_train, [
        _Opt("--dataset", str, "dataset.txt", "input dataset file"),
        _Opt("--epochs", int, 200, "training epochs"),
        _Opt("--hidden", int, 320, "hidden width H"),
        _Opt("--depth", int, 6, "depth L (number of weight layers)"),
        _Opt("--gap", int, 3, "shortcut gap G"),
        _Opt("--split", float, 0.8, "training fraction of the dataset"),
        _Opt("--batch-size", int, 64, "minibatch size"),
        _Opt("--lr", float, 1e-3, "Adam learning rate"),
        _Opt("--dropout", float, 0.0, "dropout probability"),
        _Opt("--batchnorm", None, False, "enable BatchNorm", "store_true"),
        _Opt("--mixup", float, 0.0, "Mixup alpha (0 disables)"),
        _Opt("--seed", int, 0, "global RNG seed"),
        _Opt("--out", str, "model.txt", "output model file"),
    ], "train the surrogate FER predictor")

    register("eval", cmd_eval, [
        _Opt("--model", str, "model.txt", "input model file"),
        _Opt("--dataset", str, "dataset.txt", "input dataset file"),
    ], "report IOE of a stored model on a dataset")

    register("search", cmd_search, [
        _Opt("--model", str, "model.txt", "input model file"),
        _Opt("--dataset", str, "dataset.txt",
             "dataset file (supplies code spec, channel, base mask)"),
        _Opt("--iters", int, 5000, "PGD iterations per restart"),
        _Opt("--mu", float, 0.1, "PGD step size"),
        _Opt("--restarts", int, 64, "independent restarts"),
        _Opt("--topk", int, 8, "candidates to validate by simulation"),
        _Opt("--out", str, "candidates.txt", "output candidate report"),
        _Opt("--metric", str, "approximate", "path metric: exact|approximate"),
        _Opt("--node", str, "min_sum_f", "f-node rule: exact_f|min_sum_f"),
        *_MC_OPTS,
    ], "PGD mask search guided by a trained surrogate")

    plot = register("plot", cmd_plot, [
        _Opt("--out", str, "curves.svg", "output SVG file"),
    ], "combine FER CSVs into one SVG chart")
    plot.add_argument("curve", nargs="+",
                      help="FER CSV paths, optionally label=path")

    return parser, table


def main(argv=None) -> int:
    parser, table = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    func, opts = table[args.command]
    try:
        return func(args, opts)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, InvalidState) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PolarLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
