"""Command-line interface: fit, summary, predict, cv, backcast, downscale, synth."""
import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import ingest
from .config import RunConfig
from .errors import ConfigError, ModelIOError, PcglmError
from .evaluation import kfold_cv
from .geo import tract_consensus
from .pipeline import (
    FeaturePartition,
    backcast,
    fit_pipeline,
    load_model,
    odds_ratio_table,
    predict_with_interval,
    save_model,
)

PREDICTION_HEADER = ["geoid", "level", "probability", "lo", "hi", "class"]


class UsageError(Exception):
    pass


class JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        payload = {"code": "usage", "message": message, "context": {"usage": self.format_usage().strip()}}
        sys.stderr.write(json.dumps(payload) + "\n")
        sys.exit(2)


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def _out_stream(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise ModelIOError(f"cannot write {path}: {exc}", path=str(path)) from exc


def _config(args):
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.override(
        alpha=getattr(args, "alpha", None),
        ridge=getattr(args, "ridge", None),
        seed=getattr(args, "seed", None),
        folds=getattr(args, "folds", None),
        ci_form=getattr(args, "ci_form", None),
        threshold=getattr(args, "threshold", None),
        missing_policy=getattr(args, "missing", None),
    )


def _partition(cfg, feature_names):
    pca, through = cfg.pca_features, cfg.passthrough_features
    if pca is None and through is None:
        return FeaturePartition.default(feature_names)
    if pca is None:
        pca = tuple(f for f in feature_names if f not in through)
    if through is None:
        through = tuple(f for f in feature_names if f not in pca)
    return FeaturePartition(tuple(pca), tuple(through))


def _load_features(args, level):
    """Join income/employment (+covariates) files; labels when ``--labels`` given."""
    income = ingest.load_csv(args.income, expected_level=level)
    employment = ingest.load_csv(args.employment, expected_level=level)
    sources, names = [income, employment], ["income", "employment"]
    if getattr(args, "covariates", None):
        sources.append(ingest.load_csv(args.covariates, expected_level=level))
        names.append("covariates")
    return sources, names


def _dataset(args, level="tract", labels=None, require_labels=False, policy="drop_row"):
    sources, names = _load_features(args, level)
    ds, report = ingest.join(*sources, labels=labels, require_labels=require_labels, names=names)
    ds, missing = ingest.handle_missing(ds, policy)
    for src, ids in report.dropped.items():
        print(f"join: dropped {len(ids)} geoid(s) only present in {src}", file=sys.stderr)
    if missing.cells:
        print(
            f"missing: {missing.cells} cell(s) in {missing.rows_affected} row(s), policy {missing.policy}, "
            f"dropped {len(missing.dropped_geoids)} row(s)",
            file=sys.stderr,
        )
    return ds


def _write_predictions(path, geoids, level, prob, lo, hi, threshold):
    fh, close = _out_stream(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_HEADER)
        for g, p, a, b in zip(geoids, prob, lo, hi):
            w.writerow([g, level, repr(float(p)), repr(float(a)), repr(float(b)), int(p > threshold)])
    finally:
        if close:
            fh.close()


# -- commands --------------------------------------------------------------

def cmd_fit(args):
    cfg = _config(args)
    labels = ingest.load_labels(args.labels)
    ds = _dataset(args, labels=labels, require_labels=True, policy=cfg.missing_policy)
    part = _partition(cfg, ds.feature_names)
    model = fit_pipeline(
        ds.X,
        ds.labels,
        ds.feature_names,
        partition=part,
        alpha=cfg.alpha,
        pca_mode=cfg.pca_mode,
        rank_tolerance=cfg.rank_tolerance,
        ridge=cfg.ridge,
        eliminate=cfg.eliminate,
        config=cfg.to_dict(),
    )
    save_model(model, args.out)
    print(f"n = {len(ds)}")
    print(f"p = {len(ds.feature_names)} ({len(part.pca_features)} PCA, {len(part.passthrough_features)} passthrough)")
    print(f"components fitted = {model.pca.n_components}")
    print(f"k retained = {len(model.retained_pcs)} {list(model.retained_pcs)}")
    for comp, pv in model.elimination_trace:
        print(f"eliminated PC{comp} (p = {pv:.6g})")
    print(f"deviance = {model.glm.deviance:.6f} (null {model.glm.null_deviance:.6f})")
    dropped = [model.partition.pca_features[j] for j in model.pca.dropped]
    if dropped:
        print(f"not estimable: {', '.join(dropped)}")
    print(f"model written to {args.out}")
    return 0


def cmd_summary(args):
    model = load_model(args.model)
    rows = odds_ratio_table(model, ci_form=args.ci_form)
    fh, close = _out_stream(args.out)
    try:
        if args.format == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "exp_beta", "ci_low", "ci_high", "significance"])
            for r in rows:
                w.writerow([r.feature, _fmt(r.exp_beta), _fmt(r.ci_low), _fmt(r.ci_high), r.significance])
        else:
            width = max(len(r.feature) for r in rows)
            fh.write(f"{'feature':<{width}}  {'exp_beta':>12}  {'ci_low':>12}  {'ci_high':>12}  significance\n")
            for r in rows:
                fh.write(
                    f"{r.feature:<{width}}  {_fmt(r.exp_beta):>12}  {_fmt(r.ci_low):>12}  "
                    f"{_fmt(r.ci_high):>12}  {r.significance}\n"
                )
    finally:
        if close:
            fh.close()
    return 0


def _model_matrix(model, ds):
    return ingest.matrix_for(ds, model.feature_names)


def cmd_predict(args):
    model = load_model(args.model)
    policy = model.config.get("missing_policy", "drop_row")
    ds = _dataset(args, level=args.level, policy=policy)
    prob, lo, hi = predict_with_interval(model, _model_matrix(model, ds))
    _write_predictions(args.out, ds.geoids, ds.level, prob, lo, hi, model.config.get("threshold", 0.5))
    return 0


def cmd_downscale(args):
    model = load_model(args.model)
    threshold = model.config.get("threshold", 0.5)
    ds = _dataset(args, level="block_group", policy=model.config.get("missing_policy", "drop_row"))
    prob, lo, hi = predict_with_interval(model, _model_matrix(model, ds))
    _write_predictions(args.out, ds.geoids, ds.level, prob, lo, hi, threshold)
    if args.labels:
        labels = ingest.load_labels(args.labels)
        rep = tract_consensus(ds.geoids, prob, labels, threshold=threshold, lo=lo, hi=hi)
        if args.consensus_out:
            fh, close = _out_stream(args.consensus_out)
            try:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(PREDICTION_HEADER)
                for t in rep.tracts:
                    w.writerow([t.geoid, "tract", repr(t.probability), repr(t.lo), repr(t.hi), t.predicted])
            finally:
                if close:
                    fh.close()
        summary = {
            "tracts": len(rep.tracts),
            "f1_dac": rep.metrics[1].f1,
            "f1_non_dac": rep.metrics[0].f1,
            "unmatched_block_groups": rep.unmatched_block_groups,
            "tracts_without_predictions": rep.tracts_without_predictions,
        }
        print(json.dumps(summary, sort_keys=True))
    return 0


def _parse_year_data(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--year-data expects YEAR=PATH[,PATH...], got {item!r}")
        year, paths = item.split("=", 1)
        try:
            year = int(year)
        except ValueError as exc:
            raise UsageError(f"bad year in --year-data {item!r}") from exc
        if year in out:
            raise UsageError(f"year {year} given twice")
        out[year] = [p for p in paths.split(",") if p]
    return out


def cmd_backcast(args):
    model = load_model(args.model)
    threshold = model.config.get("threshold", 0.5)
    policy = model.config.get("missing_policy", "drop_row")
    yearly, ids, errors = {}, {}, {}
    for year, paths in _parse_year_data(args.year_data).items():
        try:
            sources = [ingest.load_csv(p, expected_level=args.level) for p in paths]
            ds, _ = ingest.join(*sources, names=[os.path.basename(p) for p in paths])
            ds, _ = ingest.handle_missing(ds, policy)
            yearly[year] = _model_matrix(model, ds)
            ids[year] = ds
        except PcglmError as exc:
            errors[year] = exc.payload()
    results = backcast(model, yearly, threshold=threshold)
    os.makedirs(args.out, exist_ok=True)
    shares = []
    for year in sorted(set(results) | set(errors)):
        res = results.get(year)
        err = errors.get(year) or (res.error if res else None)
        if err:
            shares.append([year, 0, "", err["code"]])
            print(f"{year}: error {err['code']}: {err['message']}", file=sys.stderr)
            continue
        ds = ids[year]
        _write_predictions(
            os.path.join(args.out, f"predictions_{year}.csv"), ds.geoids, ds.level, res.probability, res.lo, res.hi, threshold
        )
        shares.append([year, len(ds), repr(res.share), ""])
        print(f"{year}: n = {len(ds)}, DAC share = {res.share:.4f}")
    with open(os.path.join(args.out, "shares.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "n", "dac_share", "error"])
        w.writerows(shares)
    return 4 if errors and not yearly else 0


def cmd_cv(args):
    cfg = _config(args)
    labels = ingest.load_labels(args.labels)
    ds = _dataset(args, labels=labels, require_labels=True, policy=cfg.missing_policy)
    part = _partition(cfg, ds.feature_names)
    rep = kfold_cv(
        ds.X,
        ds.labels,
        ds.feature_names,
        k=cfg.folds,
        partition=part,
        alpha=cfg.alpha,
        seed=cfg.seed,
        threshold=cfg.threshold,
        pca_mode=cfg.pca_mode,
        rank_tolerance=cfg.rank_tolerance,
        ridge=cfg.ridge,
        eliminate=cfg.eliminate,
    )
    doc = rep.to_dict()
    doc["geoids"] = ds.geoids
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    for cls, name in ((1, "DAC"), (0, "non-DAC")):
        m = rep.pooled[cls]
        print(f"{name:8s} precision {m.precision:.4f}  recall {m.recall:.4f}  F1 {m.f1:.4f}")
    failed = [f.fold for f in rep.folds if f.error]
    if failed:
        print(f"failed folds: {failed}", file=sys.stderr)
    return 0


def cmd_synth(args):
    try:
        with open(args.spec, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ModelIOError(f"cannot read spec file: {exc}", path=args.spec) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec file is not valid JSON: {exc}", path=args.spec) from exc
    if args.seed is not None:
        raw["seed"] = args.seed
    spec = ingest.SynthSpec.from_dict(raw)
    if spec.n_features < 2:
        raise ConfigError("synth needs n_features >= 2 to fill both feature files")
    res = ingest.generate_synthetic(spec)
    os.makedirs(args.out, exist_ok=True)
    names = res.tracts.feature_names
    half = (len(names) + 1) // 2
    for prefix, ds in (("tract", res.tracts), ("bg", res.block_groups)):
        ingest.write_csv(ds, os.path.join(args.out, f"{prefix}_income.csv"), columns=names[:half])
        ingest.write_csv(ds, os.path.join(args.out, f"{prefix}_employment.csv"), columns=names[half:])
    ingest.write_labels(res.tracts.geoids, res.tracts.labels, os.path.join(args.out, "labels.csv"))
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(res.truth, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(res.tracts)} tracts, {len(res.block_groups)} block groups to {args.out}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=("csv", "text"), default="text")

    fit_opts = argparse.ArgumentParser(add_help=False)
    fit_opts.add_argument("--alpha", type=float)
    fit_opts.add_argument("--ridge", type=float)
    fit_opts.add_argument("--threshold", type=float)
    fit_opts.add_argument("--missing", choices=("drop_row", "zero_fill"))

    p = JsonArgumentParser(prog="pcglm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=JsonArgumentParser)

    def features(sp, labels_required=False):
        sp.add_argument("--income", required=True)
        sp.add_argument("--employment", required=True)
        sp.add_argument("--covariates")
        sp.add_argument("--labels", required=labels_required)

    sp = sub.add_parser("fit", parents=[common, fit_opts], help="fit a model")
    features(sp, labels_required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("summary", parents=[common], help="odds-ratio table")
    sp.add_argument("--model", required=True)
    sp.add_argument("--ci-form", choices=("symmetric", "log_scale"))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_summary)

    sp = sub.add_parser("predict", parents=[common], help="tract probabilities with intervals")
    sp.add_argument("--model", required=True)
    features(sp)
    sp.add_argument("--level", default="tract", choices=("tract", "block_group", "county"))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("downscale", parents=[common], help="block-group predictions and tract consensus")
    sp.add_argument("--model", required=True)
    features(sp)
    sp.add_argument("--consensus-out")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_downscale)

    sp = sub.add_parser("backcast", parents=[common], help="apply a model to other years")
    sp.add_argument("--model", required=True)
    sp.add_argument("--year-data", action="append", required=True, metavar="YEAR=PATH[,PATH...]")
    sp.add_argument("--level", default="tract")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_backcast)

    sp = sub.add_parser("cv", parents=[common, fit_opts], help="stratified k-fold cross-validation")
    features(sp, labels_required=True)
    sp.add_argument("--folds", type=int)
    sp.add_argument("--out", help="JSON report path")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    sp.add_argument("--spec", required=True, help="JSON SynthSpec")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"code": "usage", "message": str(exc), "context": {}}) + "\n")
        return 2
    except PcglmError as exc:
        sys.stderr.write(json.dumps(exc.payload(), default=str) + "\n")
        return exc.exit_code
    except BrokenPipeError:
        # downstream reader (e.g. `head`) closed early; silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"code": "io_error", "message": str(exc), "context": {}}) + "\n")
        return 5


if __name__ == "__main__":
    sys.exit(main())
