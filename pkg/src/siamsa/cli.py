"""Command line entry point: ``siamsa {track,eval,report,synth,weights,selftest}``.

Exit codes: 0 success, 1 invalid input, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

from .config import TrackerConfig, load_config
from .errors import InvalidInputError, InvariantViolation
from .eval_bench.dataset import ATTRIBUTES, load_dataset
from .eval_bench.ope import read_run_info, track_dataset, write_results
from .eval_bench.report import csv_path_for, evaluate, load_results, read_report, write_report
from .eval_bench.synth import generate_dataset, load_synth_specs
from .weights import NetworkWeights, load_weights, save_weights

log = logging.getLogger("siamsa")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


def _tracker_config(args):
    cfg = load_config(args.config) if args.config else TrackerConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "disable_psan", False):
        changes["enable_psan"] = False
    if getattr(args, "disable_sa_apn", False):
        changes["enable_sa_apn"] = False
    return cfg.replace(**changes) if changes else cfg


def cmd_track(args):
    cfg = _tracker_config(args)
    if args.weights:
        weights = load_weights(args.weights)
        source = {"source": "file", "sha256": hashlib.sha256(Path(args.weights).read_bytes()).hexdigest()}
    else:
        weights = NetworkWeights.init(cfg)
        source = {"source": "seeded-random", "seed": cfg.seed}
    weights.check_compatible(cfg)
    records = load_dataset(args.dataset)
    log.info("tracking %d sequences with %d worker(s)", len(records), args.workers)
    results = track_dataset(records, cfg, weights, workers=args.workers)
    run_info = {"seed": cfg.seed, "config": cfg.to_dict(), "weights": source}
    write_results(args.out, results, run_info)
    print(f"wrote {len(results)} result files to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    records = load_dataset(args.dataset)
    results = load_results(args.results, records)
    report = evaluate(records, results, workers=args.workers, run_info=read_run_info(args.results))
    write_report(report, args.report)
    o = report.overall
    print(f"sequences {o.n_sequences}  success AUC {o.auc_success:.4f}  NP AUC {o.auc_np:.4f}")
    print(f"report: {args.report}  curves: {csv_path_for(args.report)}")
    return EXIT_OK


def _bar(value, width=40):
    n = int(round(max(0.0, min(1.0, value)) * width))
    return "#" * n + "." * (width - n)


def cmd_report(args):
    d = read_report(args.report)
    o = d["overall"]
    run = d.get("run") or {}
    print(f"sequences: {o['n_sequences']}   seed: {run.get('seed', 'n/a')}")
    print(f"overall  success AUC {o['auc_success']:.4f}   NP AUC {o['auc_np']:.4f}")
    if args.attribute_plots:
        print(f"\n{'tag':<8}{'n':>4}   {'success AUC':<52}NP AUC")
        rows = []
        for tag in ATTRIBUTES:
            a = d["attributes"].get(tag)
            if a is None:
                print(f"{tag:<8} absent")
                continue
            print(f"{tag:<8}{a['n_sequences']:>4}   {a['auc_success']:.4f} {_bar(a['auc_success'])}  {a['auc_np']:.4f}")
            for metric, key in (("success", "success"), ("np", "precision")):
                for t, v in zip(d["thresholds"][metric], a[key]):
                    rows.append([tag, metric, repr(t), repr(v)])
        path = Path(args.report)
        path = path.with_name(path.stem + "_attributes.csv")
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["attribute", "metric", "threshold", "value"])
            writer.writerows(rows)
        print(f"attribute curves: {path}")
    if args.sv_histogram:
        sv = d["sv_histogram"]
        edges = sv["bin_edges"]
        print(f"\nSV histogram (|log2 R| bins, fraction of {sv['total_frames']} frames)")
        peak = max(sv["fractions"]) or 1.0
        for lo, hi, frac, count in zip(edges, edges[1:], sv["fractions"], sv["counts"]):
            print(f"[{lo:.1f}, {hi:.1f})  {frac:7.4f} {count:>6}  {_bar(frac / peak, 30)}")
        print(f"total SV fraction: {sum(sv['fractions']):.4f}")
    return EXIT_OK


def cmd_synth(args):
    specs = load_synth_specs(args.spec)
    records = generate_dataset(specs, args.out, seed=args.seed)
    for r in records:
        tags = ",".join(sorted(r.attributes)) or "-"
        print(f"{r.name}: {len(r)} frames  attributes {tags}")
    return EXIT_OK


def cmd_weights(args):
    cfg = _tracker_config(args)
    save_weights(NetworkWeights.init(cfg), args.out)
    print(f"wrote seeded weights (seed {cfg.seed}) to {args.out}")
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_INTERNAL


def build_parser():
    p = argparse.ArgumentParser(prog="siamsa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="run one-pass tracking over a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="flat key = value tracker config")
    t.add_argument("--weights", help="weights file; default is seeded random init")
    t.add_argument("--seed", type=int)
    t.add_argument("--disable-psan", action="store_true")
    t.add_argument("--disable-sa-apn", action="store_true")
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score result files against ground truth")
    e.add_argument("--dataset", required=True)
    e.add_argument("--results", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="print a saved evaluation report")
    r.add_argument("--report", required=True)
    r.add_argument("--attribute-plots", action="store_true")
    r.add_argument("--sv-histogram", action="store_true")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("synth", help="render synthetic sequences from a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    w = sub.add_parser("weights", help="write a seeded random weights file")
    w.add_argument("--out", required=True)
    w.add_argument("--config")
    w.add_argument("--seed", type=int)
    w.set_defaults(func=cmd_weights)

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
