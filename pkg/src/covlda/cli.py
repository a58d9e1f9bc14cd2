"""Command line interface: ``covlda {fit,predict,simulate,coherence,report}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import predict_abundance, probabilistic_coherence
from .exceptions import ConfigError, DataError, NumericalError
from .inference import FitConfig, convergence_summary, fit
from .model import Hyperparams
from .samplers import SliceConfig
from .simgen import simulate_holdout, simulate_set1, simulate_set2

log = logging.getLogger("covlda")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="covlda", description="LDA with covariates on cluster abundances.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the model and write run artifacts")
    f.add_argument("--counts", required=True)
    f.add_argument("--covariates", required=True)
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--mode", choices=["two-stage", "joint"], default="two-stage")
    f.add_argument("--iters", type=int, default=5000)
    f.add_argument("--burnin", type=int, default=2500)
    f.add_argument("--thin", type=int, default=5)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--gamma", type=float, default=0.1)
    f.add_argument("--prior-var", type=float, default=10.0)
    f.add_argument("--n0", type=float, default=1000.0)
    f.add_argument("--ci", type=float, default=0.95)
    f.add_argument("--alpha", type=float, default=0.1, help="stage-one Dirichlet concentration")
    f.add_argument("--m", type=int, default=5, help="top categories for coherence")
    f.add_argument("--out", required=True)

    pr = sub.add_parser("predict", help="expected abundance matrix for new covariates")
    pr.add_argument("--model", required=True)
    pr.add_argument("--covariates", required=True)
    pr.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="write a synthetic dataset with its ground truth")
    s.add_argument("--set", type=int, choices=[1, 2], required=True)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--holdout", type=int, default=0, help="extra instances for prediction checks")
    s.add_argument("--out", required=True)

    c = sub.add_parser("coherence", help="probabilistic coherence of a fitted model")
    c.add_argument("--model", required=True)
    c.add_argument("--counts", required=True)
    c.add_argument("--m", type=int, default=5)
    c.add_argument("--whole-corpus", action="store_true")

    r = sub.add_parser("report", help="print summaries and render figures")
    r.add_argument("--model", required=True)
    r.add_argument("--no-figures", action="store_true")
    return p


def cmd_fit(args) -> int:
    data, X = io.load_dataset(args.counts, args.covariates, intercept=not args.no_intercept)
    hp = Hyperparams.default(data.S, args.k, gamma=args.gamma, prior_var=args.prior_var,
                             n_upper=args.n0, ci_level=args.ci)
    cfg = FitConfig(hp, mode=args.mode, iters=args.iters, burnin=args.burnin, thin=args.thin,
                    seed=args.seed, slice=SliceConfig(), stage1_alpha=args.alpha)
    step = max(1, args.iters // 10)

    def progress(it, ld):
        if it % step == 0:
            log.info("iteration %d/%d  log density %.6g", it, args.iters, ld)

    trace = fit(data, X, cfg, progress)
    art = io.write_artifacts(trace, data, X, args.out, M=args.m)
    log.info("wrote %s", art.out_dir)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = io.load_model(args.model)
    ids, names, values = io.read_covariates(args.covariates)
    intercept = model.meta.get("intercept", "true") == "true"
    X = io.align_covariates(ids, names, values, ids, intercept)
    missing = [c for c in model.covariate_names if c not in X.column_names]
    if missing:
        raise DataError(f"covariate {missing[0]} required by the model is absent")
    design = X.design[:, [X.column_names.index(c) for c in model.covariate_names]]
    pred = predict_abundance(model.beta_mean, model.phi_mean, design)
    io.write_matrix(args.out, "instance_id", ids, model.category_names, pred)
    return EXIT_OK


def cmd_simulate(args) -> int:
    make = simulate_set1 if args.set == 1 else simulate_set2
    truth = make(args.l, args.s, args.k, seed=args.seed)
    out = Path(args.out)
    io.write_dataset(truth.data, truth.X, out)
    io.write_truth(truth, out / "truth.json")
    if args.holdout > 0:
        if args.set != 1:
            raise ConfigError("--holdout is only defined for set 1")
        hold = simulate_holdout(truth, args.holdout, seed=args.seed + 1)
        io.write_dataset(hold.data, hold.X, out, prefix="holdout_")
        io.write_matrix(out / "holdout_expected.csv", "instance_id", hold.data.instance_ids,
                        hold.data.category_names, hold.expected_counts)
    return EXIT_OK


def _model_theta_for(model, data):
    index = {i: r for r, i in enumerate(model.instance_ids)}
    missing = [i for i in data.instance_ids if i not in index]
    if missing:
        raise DataError(f"instance {missing[0]} has no fitted proportions; use --whole-corpus")
    return model.theta_mean[[index[i] for i in data.instance_ids]]


def cmd_coherence(args) -> int:
    model = io.load_model(args.model)
    data = io.read_counts(args.counts)
    if data.category_names != model.category_names:
        raise DataError("count categories do not match the model")
    theta = None if args.whole_corpus else _model_theta_for(model, data)
    rep = probabilistic_coherence(model.phi_mean, data, theta, args.m, whole_corpus=args.whole_corpus)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["cluster", "score", "skipped_pairs"])
    for name, sc, sk in zip(model.cluster_names, rep.scores, rep.skipped_pairs):
        w.writerow([name, io.fmt(sc), int(sk)])
    w.writerow(["total", io.fmt(rep.total), int(rep.skipped_pairs.sum())])
    return EXIT_OK


def cmd_report(args) -> int:
    model = io.load_model(args.model)
    d = Path(args.model)
    print(f"model: {d}")
    for key in ("mode", "K", "iters", "burnin", "thin", "seed", "retained", "ci_level"):
        if key in model.meta:
            print(f"  {key} = {model.meta[key]}")

    print("\nregression coefficients (* = interval excludes 0)")
    print(f"  {'cluster':<10} {'covariate':<16} {'mean':>10} {'lower':>10} {'upper':>10}")
    for r in model.beta_rows:
        star = "*" if r["significant"] == "true" else ""
        print(f"  {r['cluster']:<10} {r['covariate']:<16} {r['mean']:>10} {r['ci_lower']:>10} "
              f"{r['ci_upper']:>10} {star}")

    n_path = d / "n_draws.csv"
    if n_path.exists():
        _, _, n = io.read_matrix(n_path)
        if n.size:
            print(f"\noverdispersion: posterior mean {io.fmt(n.mean())}")

    rel = d / "relevant.txt"
    if rel.exists():
        print("\nrelevant categories")
        for line in rel.read_text(encoding="utf-8").splitlines():
            print(f"  {line}")

    coh = d / "coherence.csv"
    if coh.exists():
        print("\nprobabilistic coherence (argmax instances / whole corpus)")
        with open(coh, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                print(f"  {row['cluster']:<10} {row['score']:>10} {row['whole_corpus_score']:>10}")

    trace_path = d / "trace.csv"
    logdens = None
    if trace_path.exists():
        _, _, tr = io.read_matrix(trace_path)
        logdens = tr[:, 0]
        conv = convergence_summary(logdens, burnin=int(model.meta.get("burnin", 0)))
        verdict = "drift flagged" if conv.flagged else "no drift flagged"
        print(f"\nconvergence: split-half difference {io.fmt(conv.split_diff)} "
              f"(se {io.fmt(conv.se_second)}), {verdict}")

    if not args.no_figures and logdens is not None:
        from .plotting import render_report_figures
        paths = render_report_figures(model, logdens, d / "figures")
        print("\nfigures: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "simulate": cmd_simulate,
            "coherence": cmd_coherence, "report": cmd_report}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"covlda: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"covlda: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"covlda: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"covlda: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
