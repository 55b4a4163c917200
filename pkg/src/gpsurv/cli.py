"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``predict``, ``curves``, ``evaluate``.
All randomness comes from explicit ``--seed`` flags, so every command is
deterministic given its input files and flags.

Exit codes: 0 success, 2 validation error, 3 non-convergence, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import baselines, fileio, prediction
from .baselines import fit_wphm, wphm_predict_mean
from .errors import (
    IllConditionedKernelError,
    NonConvergenceError,
    NumericError,
    ValidationError,
)
from .inference import ModelKind, fit_hyperparameters, fit_map
from .simulate import simulate
from .timescale import TransformConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_NUMERIC = 4

_FIT_KINDS = ("gp-aft", "gp-competing", "gp-hazard", "wphm")


def _fmt(value: float) -> str:
    return repr(float(value))


def cmd_simulate(args) -> int:
    spec = fileio.read_sim_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    result = simulate(spec)
    out = Path(args.out)
    fileio.write_dataset_csv(out, result.data)
    truth_path = out.with_name(out.stem + "_truth" + out.suffix)
    fileio.write_truth_csv(truth_path, result)
    written = [str(out), str(truth_path)]
    if result.validation is not None:
        val_path = out.with_name(out.stem + "_validation" + out.suffix)
        fileio.write_dataset_csv(val_path, result.validation)
        written.append(str(val_path))
    print("wrote " + ", ".join(written))
    n_cens = int(result.data.is_censored.sum())
    print(f"n={result.data.n} subjects, {n_cens} censored, seed={spec.seed}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = fileio.read_dataset_csv(args.dataset)
    kind = args.kind
    if kind == "wphm":
        if data.has_intervals:
            raise ValidationError("the wphm model does not support interval-censored datasets")
        params, info = fit_wphm(data, full_output=True)
        model = fileio.WphmModel(params=params, data=data, nll=info["nll"])
        fileio.save_model(args.out, model)
        beta_txt = ", ".join(_fmt(b) for b in params.beta)
        print(f"wphm fit: nll={info['nll']:.6f} grad_norm={info['grad_norm']:.2e}")
        print(f"theta: beta=[{beta_txt}] rho={params.rho:.6g} nu={params.nu:.6g}")
        print(f"wrote {args.out}")
        return EXIT_OK

    transform = TransformConfig(args.gamma) if args.gamma is not None else None
    fixed = {"omega": 0.0} if args.independent else None
    hyper, info = fit_hyperparameters(
        data,
        kind,
        transform=transform,
        restarts=args.restarts,
        seed=args.seed,
        fixed=fixed,
        ard=args.ard,
        maxfev=args.maxfev,
        full_output=True,
    )
    model = fit_map(data, hyper)
    if not model.converged:
        raise NonConvergenceError(
            f"latent fit did not reach tolerance (grad norm {model.final_grad_norm:.2e})"
        )
    fileio.save_model(args.out, model)
    print(f"{kind} fit: L_hyp={info['value']:.6f} (best of {args.restarts} restarts)")
    print(f"theta: {_describe_hyper(hyper)}")
    print(
        f"diagnostics: converged={model.converged} grad_norm={model.final_grad_norm:.2e} "
        f"nll={model.nll_value:.6f}"
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def _describe_hyper(hyper) -> str:
    parts = []
    if hyper.kind is not ModelKind.HAZARD:
        parts.append(f"eta={hyper.eta:.6g}")
        parts.append(f"beta={hyper.beta:.6g}")
    if hyper.kind is ModelKind.COMPETING:
        k = hyper.multi
        parts += [f"mu={k.mu:.6g}", f"sigma={k.sigma:.6g}", f"omega={k.omega:.6g}"]
        parts.append("l=" + ",".join(f"{v:.6g}" for v in k.lengthscales))
    else:
        k = hyper.single
        parts.append(f"sigma={k.sigma:.6g}")
        parts.append("l=" + ",".join(f"{v:.6g}" for v in k.lengthscales))
    if hyper.kind is ModelKind.HAZARD:
        parts.append(f"nu={hyper.nu:.6g}")
    parts.append(f"gamma={hyper.transform.gamma:.6g}")
    return " ".join(parts)


def _predict_rows(model, x):
    """(header, rows of floats) for one covariate matrix."""
    if isinstance(model, fileio.WphmModel):
        header = ["mean", "stdev"]
        rows = []
        for xi in x:
            mean, var = wphm_predict_mean(xi, model.params)
            rows.append([mean, np.sqrt(var)])
        return header, rows
    if model.kind is ModelKind.COMPETING:
        header = ["mean1", "stdev1", "mean2", "stdev2"]
        rows = []
        for xi in x:
            row = []
            for risk in (1, 2):
                pd = prediction.predictive_density(xi, model, risk=risk)
                mean, var = prediction.predictive_moments(pd)
                row += [mean, np.sqrt(var)]
            rows.append(row)
        return header, rows
    if model.kind is ModelKind.HAZARD:
        header = ["mean", "stdev"]
        rows = []
        for xi in x:
            pred = prediction.gp_hazard_predict(xi, model)
            rows.append([pred.mean, np.sqrt(pred.variance)])
        return header, rows
    header = ["mean", "stdev"]
    rows = []
    for xi in x:
        pd = prediction.predictive_density(xi, model)
        mean, var = prediction.predictive_moments(pd)
        rows.append([mean, np.sqrt(var)])
    return header, rows


def cmd_predict(args) -> int:
    model = fileio.load_model(args.model)
    x = fileio.read_covariates_csv(args.covariates)
    dim = model.data.dim
    if x.size and x.shape[1] != dim:
        raise ValidationError(f"covariate dimension {x.shape[1]} does not match model ({dim})")
    header, rows = _predict_rows(model, x)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + header)
        for i, row in enumerate(rows):
            writer.writerow([i] + [_fmt(v) for v in row])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def _parse_grid(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        grid = np.linspace(float(start), float(stop), int(num))
    except ValueError:
        raise ValidationError(f"grid must be start:stop:num, got {text!r}") from None
    return grid


def cmd_curves(args) -> int:
    model = fileio.load_model(args.model)
    x_star = np.array([float(v) for v in args.x.split(",")])
    if x_star.size != model.data.dim:
        raise ValidationError(
            f"covariate row has dimension {x_star.size}, model expects {model.data.dim}"
        )
    grid = _parse_grid(args.grid)
    if np.any(~(grid > 0)):
        raise ValidationError("curve grid must contain positive times only")

    if isinstance(model, fileio.WphmModel):
        pdf = baselines.wphm_pdf(grid, x_star, model.params)
        surv = baselines.wphm_survival(grid, x_star, model.params)
        haz = baselines.wphm_hazard(grid, x_star, model.params)
        disabled = None
    else:
        risk = args.risk if model.kind is ModelKind.COMPETING else None
        pd = prediction.predictive_density(x_star, model, risk=risk)
        pdf = prediction.predictive_pdf(grid, pd)
        surv = prediction.survival_curve(x_star, model, grid, risk=risk)
        haz = prediction.hazard_curve(x_star, model, grid, risk=risk)
        disabled = None
        if args.disabled:
            if model.kind is not ModelKind.COMPETING:
                raise ValidationError("--disabled applies to competing-risks models only")
            disabled = prediction.disabled_risk_survival(x_star, model, args.risk, grid)

    header = ["tau", "pdf", "survival", "hazard"]
    if disabled is not None:
        header.append("survival_disabled")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, tau in enumerate(grid):
            row = [_fmt(tau), _fmt(pdf[i]), _fmt(surv[i]), _fmt(haz[i])]
            if disabled is not None:
                row.append(_fmt(disabled[i]))
            writer.writerow(row)
    print(f"wrote {args.out} ({grid.size} rows)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = fileio.load_model(args.model)
    data = fileio.read_dataset_csv(args.validation)
    if data.dim != model.data.dim:
        raise ValidationError(
            f"validation covariate dimension {data.dim} does not match model ({model.data.dim})"
        )
    exact = data.is_exact_event
    if not exact.any():
        raise ValidationError("no exact event rows to evaluate")

    risks = sorted(set(int(r) for r in data.event[exact]))
    header, rows = _predict_rows(model, data.x)
    means = np.asarray([[row[0], row[2]] if len(row) == 4 else [row[0]] for row in rows])
    if means.shape[1] == 1 and max(risks) > 1:
        raise ValidationError("model predicts a single risk but the data carry multiple risks")

    table = []
    for risk in risks:
        mask = exact & (data.event == risk)
        col = risk - 1 if means.shape[1] > 1 else 0
        mse = float(np.mean((means[mask, col] - data.time[mask]) ** 2))
        table.append((risk, int(mask.sum()), mse))

    print(f"{'risk':>4} {'events':>7} {'mse':>14}")
    for risk, count, mse in table:
        print(f"{risk:>4} {count:>7} {mse:>14.6g}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["risk", "events", "mse"])
            for risk, count, mse in table:
                writer.writerow([risk, count, _fmt(mse)])
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpsurv", description="Gaussian-process survival analysis toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a JSON spec")
    p.add_argument("spec", help="JSON simulation spec (see README)")
    p.add_argument("--out", required=True, help="output dataset CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--kind", required=True, choices=_FIT_KINDS)
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--gamma", type=float, default=None,
                   help="time-transform scale (default: half the smallest observed time)")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maxfev", type=int, default=None,
                   help="objective-evaluation budget per restart")
    p.add_argument("--independent", action="store_true",
                   help="competing risks: pin the shared amplitude to zero")
    p.add_argument("--ard", action="store_true",
                   help="competing risks: one lengthscale per covariate")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict event times for covariate rows")
    p.add_argument("model")
    p.add_argument("covariates", help="CSV with header id,x1,...,xd")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("curves", help="density/survival/hazard curves at one covariate row")
    p.add_argument("model")
    p.add_argument("--x", required=True, help="comma-separated covariate values")
    p.add_argument("--grid", required=True, help="time grid as start:stop:num")
    p.add_argument("--risk", type=int, default=1, help="risk index for competing models")
    p.add_argument("--disabled", action="store_true",
                   help="also emit the disabled-risk marginal survival column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("evaluate", help="per-risk mean squared error on a validation CSV")
    p.add_argument("model")
    p.add_argument("validation")
    p.add_argument("--out", default=None, help="optional metrics CSV path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergenceError as err:
        print(f"error: did not converge: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (IllConditionedKernelError, NumericError, FloatingPointError) as err:
        print(f"error: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
