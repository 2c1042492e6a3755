"""Command-line interface.

Subcommands: simulate, fit, select-k, predict, harness, split-features,
binarize.  Values resolve as flags > config file > environment > defaults;
the config file is a flat `key = value` document and MCR_SEED provides the
default seed.  Exit codes: 0 success, 2 validation error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import Dataset, align_labels
from .errors import (
    DegenerateWeights,
    McrError,
    NonConvergence,
    SchemaMismatch,
    SingularDesign,
)
from .fit import fit_mcr
from .harness import DEFAULT_GROUPS, HarnessSpec, derive_seed, run_harness
from .io import (
    ModelFile,
    read_counts,
    read_dataset,
    read_model,
    read_params,
    write_counts,
    write_dataset,
    write_metrics_csv,
    write_model,
    write_params,
)
from .metrics import (
    err_norm,
    max_err_response,
    out_of_sample_r2,
    predict_dataset,
)
from .mixreg import EmConfig
from .pipeline import binarize, split_controls
from .select import select_k
from .simulate import default_design, generate

_EXIT_OK = 0
_EXIT_VALIDATION = 2
_EXIT_NUMERICAL = 3
_EXIT_IO = 4

_NUMERICAL_ERRORS = (SingularDesign, DegenerateWeights, NonConvergence)


def _read_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def _resolve(flag, cfg: dict, key: str, default, cast):
    if flag is not None:
        return flag
    if key in cfg:
        return cast(cfg[key])
    return default


def _as_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("MCR_SEED")
    if env is not None:
        return int(env)
    return 0


def _em_config(args, cfg: dict) -> EmConfig:
    return EmConfig(
        max_iters=_resolve(args.max_iters, cfg, "max_iters", 500, int),
        rel_tol=_resolve(args.rel_tol, cfg, "rel_tol", 1e-8, float),
        n_starts=_resolve(args.n_starts, cfg, "n_starts", 5, int),
        seed=_resolve_seed(args, cfg),
        sequential=_resolve(args.sequential, cfg, "sequential", False, _as_bool),
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, help="root seed (default: $MCR_SEED or 0)")


def _add_em_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-iters", type=int, help="EM iteration cap (default 500)")
    parser.add_argument("--rel-tol", type=float, help="EM relative tolerance (default 1e-8)")
    parser.add_argument("--n-starts", type=int, help="EM random starts (default 5)")
    parser.add_argument(
        "--sequential",
        action="store_const",
        const=True,
        help="use freshly updated intercepts inside each EM iteration",
    )


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    seed = _resolve_seed(args, cfg)
    reps = _resolve(args.reps, cfg, "reps", 1, int)
    os.makedirs(args.out, exist_ok=True)
    for rep in range(1, reps + 1):
        design = default_design(
            args.n, args.p, seed=derive_seed(seed, args.n, args.p, rep),
            probs_seed=args.probs_seed,
        )
        data, truth = generate(design)
        stem = os.path.join(args.out, f"rep{rep:04d}")
        write_dataset(stem + ".dataset.json", data)
        write_params(stem + ".truth.json", truth)
    print(f"wrote {reps} dataset(s) to {args.out}")
    return _EXIT_OK


def _coef_table(model: ModelFile) -> str:
    final = model.final
    names = [f"class{j + 1}" for j in range(final.k)] + [
        f"x{j + 1}" for j in range(final.q)
    ]
    lines = [f"{'term':<10} {'estimate':>14} {'se':>12} {'p-value':>10}"]
    for name, est, se, pv in zip(names, final.phi, final.se, final.p_values):
        lines.append(f"{name:<10} {est:>14.6g} {se:>12.4g} {pv:>10.4g}")
    lines.append(f"{'noise_var':<10} {final.noise_var:>14.6g}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    cfg = _read_config(args.config)
    config = _em_config(args, cfg)
    data = read_dataset(args.data)
    select = getattr(args, "select_k", False) or args.command == "select-k"
    bic_values = None
    k_hat = None
    if select:
        k_max = _resolve(args.k_max, cfg, "k_max", 10, int)
        k_hat, bic_values = select_k(data, k_max, config)
        k = k_hat
    else:
        k = _resolve(args.k, cfg, "k", None, int)
        if k is None:
            print("error: provide --k or --select-k", file=sys.stderr)
            return _EXIT_VALIDATION
    fitted = fit_mcr(data, k, config)
    model = ModelFile(
        params=fitted.params,
        final=fitted.final,
        trace=fitted.trace,
        bic_values=bic_values,
        k_hat=k_hat,
    )
    if args.out:
        write_model(args.out, model)

    lines = [
        f"n={data.n} p={data.p} q={data.q} K={k}"
        + (f" (selected, k_max={len(bic_values)})" if select else ""),
        _coef_table(model),
        f"loglik={fitted.trace.loglik_per_iter[-1]!r} "
        f"iterations={fitted.trace.iterations} converged={fitted.trace.converged}",
    ]
    if select:
        lines.append(
            "bic: " + " ".join(f"K={i + 1}:{v:.4f}" for i, v in enumerate(bic_values))
        )
    if args.truth:
        truth = read_params(args.truth)
        if truth.k == k:
            perm = align_labels(fitted.params.mixture, truth.mixture)
            aligned = fitted.params.permuted(perm)
            lines.append(
                "errors vs truth: "
                f"err_pi={err_norm(aligned.mixture.priors, truth.mixture.priors):.6g} "
                f"err_gamma={err_norm(aligned.mixture.intercepts, truth.mixture.intercepts):.6g} "
                f"err_theta={err_norm(aligned.mixture.slopes, truth.mixture.slopes):.6g} "
                f"err_sigma2={abs(aligned.mixture.noise_var - truth.mixture.noise_var):.6g} "
                f"maxerr_response={max_err_response(aligned.response, truth.response):.6g}"
            )
        else:
            lines.append(f"errors vs truth: skipped (K={k} differs from truth {truth.k})")
    report = "\n".join(lines)
    print(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report + "\n")
    return _EXIT_OK


def cmd_predict(args) -> int:
    model = read_model(args.model)
    data = read_dataset(args.data)
    if model.params.p != data.p or model.final.q != data.q:
        raise SchemaMismatch(
            f"model has (p={model.params.p}, q={model.final.q}) but data has "
            f"(p={data.p}, q={data.q})"
        )
    pred = predict_dataset(data, model.final, model.params)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("index,prediction\n")
            for i, v in enumerate(pred):
                fh.write(f"{i},{float(v)!r}\n")
    summary = out_of_sample_r2(data.y, pred)
    print(f"predicted {data.n} rows; out-of-sample R^2 = {summary:.4f}%")
    return _EXIT_OK


def cmd_harness(args) -> int:
    cfg = _read_config(args.config)
    n_list = [int(v) for v in args.n.split(",")]
    p_list = [int(v) for v in args.p.split(",")]
    if len(p_list) == 1:
        p_list = p_list * len(n_list)
    if len(n_list) == 1:
        n_list = n_list * len(p_list)
    if len(n_list) != len(p_list):
        print("error: --n and --p lists must align", file=sys.stderr)
        return _EXIT_VALIDATION
    metrics = tuple((args.metrics or ",".join(DEFAULT_GROUPS)).split(","))
    spec = HarnessSpec(
        cells=tuple(zip(n_list, p_list)),
        reps=_resolve(args.reps, cfg, "reps", 1, int),
        seed=_resolve_seed(args, cfg),
        metrics=metrics,
        k=_resolve(args.k, cfg, "k", None, int),
        k_max=_resolve(args.k_max, cfg, "k_max", 10, int),
        em=_em_config(args, cfg),
    )
    rows = run_harness(spec, jobs=_resolve(args.jobs, cfg, "jobs", 1, int))
    write_metrics_csv(args.out, rows)
    print(f"wrote {len(rows)} metric rows to {args.out}")
    return _EXIT_OK


def cmd_split_features(args) -> int:
    cfg = _read_config(args.config)
    data = read_dataset(args.data)
    max_selected = _resolve(args.max_selected, cfg, "max_selected", 200, int)
    result = split_controls(data.y, data.x, data.z, max_selected)
    out = Dataset(y=data.y, x=result.x, z=result.z, true_labels=data.true_labels)
    write_dataset(args.out, out)
    lines = [
        f"selected {result.selected.size} column(s): {result.selected.tolist()}",
        f"skipped (singular): {result.skipped.tolist()}",
        "bic trace: " + " ".join(repr(float(v)) for v in result.bic_trace),
    ]
    report = "\n".join(lines)
    print(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report + "\n")
    return _EXIT_OK


def cmd_binarize(args) -> int:
    counts = read_counts(args.counts)
    stoplist: set[int] = set()
    if args.stoplist:
        with open(args.stoplist, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if line:
                    stoplist.add(int(line))
    z, kept = binarize(counts, args.min_freq, stoplist)
    write_counts(args.out, z)
    if args.kept_out:
        with open(args.kept_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{t}\n" for t in kept)
    print(f"kept {kept.size} of {counts.shape[1]} terms")
    return _EXIT_OK


# ------------------------------------------------------------------ parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcr",
        description="Latent-class linear regression with high-dimensional binary features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate benchmark datasets")
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--p", type=int, required=True)
    ps.add_argument("--reps", type=int)
    ps.add_argument("--probs-seed", type=int)
    ps.add_argument("--out", required=True, help="output directory")
    _add_common(ps)
    ps.set_defaults(func=cmd_simulate)

    helps = {
        "fit": "fit the model to a dataset file",
        "select-k": "choose the class count by BIC, then fit",
    }
    for name in ("fit", "select-k"):
        pf = sub.add_parser(name, help=helps[name])
        pf.add_argument("--data", required=True)
        pf.add_argument("--k", type=int, help="number of classes")
        if name == "fit":
            pf.add_argument("--select-k", action="store_true", dest="select_k")
        pf.add_argument("--k-max", type=int, help="largest K tried by selection")
        pf.add_argument("--out", help="model file to write")
        pf.add_argument("--report", help="also write the text report here")
        pf.add_argument("--truth", help="generating-parameter file for error reporting")
        _add_em_flags(pf)
        _add_common(pf)
        pf.set_defaults(func=cmd_fit)

    pp = sub.add_parser("predict", help="predict responses for new data")
    pp.add_argument("--model", required=True)
    pp.add_argument("--data", required=True)
    pp.add_argument("--out", help="predictions CSV")
    _add_common(pp)
    pp.set_defaults(func=cmd_predict)

    ph = sub.add_parser("harness", help="run a replication grid, write metrics CSV")
    ph.add_argument("--n", required=True, help="comma-separated sample sizes")
    ph.add_argument("--p", required=True, help="comma-separated feature counts")
    ph.add_argument("--reps", type=int)
    ph.add_argument("--metrics", help=f"comma list of groups (default {','.join(DEFAULT_GROUPS)})")
    ph.add_argument("--jobs", type=int, help="parallel worker processes")
    ph.add_argument("--k", type=int, help="fit with this K instead of the truth")
    ph.add_argument("--k-max", type=int)
    ph.add_argument("--out", required=True)
    _add_em_flags(ph)
    _add_common(ph)
    ph.set_defaults(func=cmd_harness)

    pv = sub.add_parser("split-features", help="move best response predictors into x")
    pv.add_argument("--data", required=True)
    pv.add_argument("--max-selected", type=int)
    pv.add_argument("--out", required=True)
    pv.add_argument("--report")
    _add_common(pv)
    pv.set_defaults(func=cmd_split_features)

    pb = sub.add_parser("binarize", help="turn a count matrix into presence dummies")
    pb.add_argument("--counts", required=True)
    pb.add_argument("--min-freq", type=int, default=0)
    pb.add_argument("--stoplist", help="file of term ids to drop, one per line")
    pb.add_argument("--out", required=True)
    pb.add_argument("--kept-out", help="write kept term ids here, one per line")
    _add_common(pb)
    pb.set_defaults(func=cmd_binarize)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except McrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
