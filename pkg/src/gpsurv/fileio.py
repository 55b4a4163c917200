"""CSV and JSON file formats used by the command-line tools.

Dataset CSV (exact/censored records)::

    id,time,event,x1,...,xd

Dataset CSV (interval records; censored rows leave ``t_upper`` empty and
put the censoring time in ``t_lower``)::

    id,t_lower,t_upper,event,x1,...,xd

``event`` is 0 for censoring and the risk label (1..R) otherwise.  Floats
are written with ``repr`` so values round-trip at full double precision.

Model files are versioned JSON documents carrying the hyperparameters, the
transform scale, the latent solution, curvature diagonal, fit diagnostics
and a snapshot of the training data.  They are written with sorted keys and
fixed indentation, so save -> load -> save is byte identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .baselines import WphmParams
from .data import SurvivalDataset
from .errors import ValidationError
from .inference import FittedModel, HyperParams, ModelKind
from .kernels import MultiKernelParams, SingleKernelParams
from .simulate import SimResult, SimSpec
from .timescale import TransformConfig

__all__ = [
    "read_dataset_csv",
    "write_dataset_csv",
    "write_truth_csv",
    "read_covariates_csv",
    "parse_sim_spec",
    "read_sim_spec",
    "save_model",
    "load_model",
    "WphmModel",
]

FORMAT_VERSION = 1


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"cannot parse {what} value {text!r}") from None


# ---------------------------------------------------------------------------
# dataset CSV
# ---------------------------------------------------------------------------


def write_dataset_csv(path, data: SurvivalDataset):
    cov_names = [f"x{j + 1}" for j in range(data.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if data.has_intervals:
            writer.writerow(["id", "t_lower", "t_upper", "event"] + cov_names)
            for i in range(data.n):
                if data.is_interval[i]:
                    lo, hi = _fmt(data.t_lower[i]), _fmt(data.t_upper[i])
                else:
                    lo, hi = _fmt(data.time[i]), ""
                writer.writerow([i, lo, hi, int(data.event[i])] + [_fmt(v) for v in data.x[i]])
        else:
            writer.writerow(["id", "time", "event"] + cov_names)
            for i in range(data.n):
                writer.writerow(
                    [i, _fmt(data.time[i]), int(data.event[i])] + [_fmt(v) for v in data.x[i]]
                )


def read_dataset_csv(path) -> SurvivalDataset:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty dataset file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if header[:3] == ["id", "time", "event"]:
        interval_format = False
        cov_names = header[3:]
    elif header[:4] == ["id", "t_lower", "t_upper", "event"]:
        interval_format = True
        cov_names = header[4:]
    else:
        raise ValidationError(
            f"{path}: header must start with 'id,time,event' or 'id,t_lower,t_upper,event'"
        )
    if any(not name.startswith("x") for name in cov_names) or not cov_names:
        raise ValidationError(f"{path}: covariate columns must be named x1..xd")

    n, d = len(body), len(cov_names)
    if n == 0:
        raise ValidationError(f"{path}: no data rows")
    x = np.empty((n, d))
    event = np.empty(n, dtype=int)
    time = np.full(n, np.nan)
    t_lower = np.full(n, np.nan)
    t_upper = np.full(n, np.nan)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        if interval_format:
            lo = _parse_float(row[1], "t_lower")
            event[i] = int(row[3])
            if row[2].strip() == "":
                time[i] = lo
            else:
                t_lower[i] = lo
                t_upper[i] = _parse_float(row[2], "t_upper")
            cov = row[4:]
        else:
            time[i] = _parse_float(row[1], "time")
            event[i] = int(row[2])
            cov = row[3:]
        x[i] = [_parse_float(c, "covariate") for c in cov]
    return SurvivalDataset(x=x, event=event, time=time, t_lower=t_lower, t_upper=t_upper)


def read_covariates_csv(path) -> np.ndarray:
    """Covariate rows for prediction; header ``id,x1,...,xd``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty covariates file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "id" or len(header) < 2:
        raise ValidationError(f"{path}: header must be id,x1,...,xd")
    body = rows[1:]
    out = np.empty((len(body), len(header) - 1))
    for i, row in enumerate(body):
        out[i] = [_parse_float(c, "covariate") for c in row[1:]]
    if out.size and np.any(~np.isfinite(out)):
        raise ValidationError(f"{path}: covariates contain non-finite values")
    return out


def write_truth_csv(path, result: SimResult):
    """Ground-truth sidecar: per-row latent values and noise-free event times.

    The generating parameters ride along in a leading comment line.
    """
    meta = {"kind": result.spec.kind, "seed": result.spec.seed,
            "params": _sim_params_dict(result.spec)}
    competing = result.spec.kind == "gp-competing"
    with open(path, "w", newline="") as fh:
        fh.write("# generating-params: " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        if competing:
            writer.writerow(["id", "f1", "f2", "tau1", "tau2"])
            for i in range(result.data.n):
                writer.writerow(
                    [i, _fmt(result.f_true[0, i]), _fmt(result.f_true[1, i]),
                     _fmt(result.tau_true[0, i]), _fmt(result.tau_true[1, i])]
                )
        else:
            writer.writerow(["id", "f", "tau"])
            for i in range(result.data.n):
                writer.writerow([i, _fmt(result.f_true[i]), _fmt(result.tau_true[i])])


# ---------------------------------------------------------------------------
# simulation spec JSON
# ---------------------------------------------------------------------------


def _sim_params_dict(spec: SimSpec) -> dict:
    p = spec.params
    if spec.kind == "wphm":
        return {"beta": list(p.beta), "rho": p.rho, "nu": p.nu}
    out = {"eta": p.eta, "beta": p.beta, "gamma": p.transform.gamma}
    if spec.kind == "gp-single":
        out.update({"sigma": p.single.sigma, "lengthscales": list(p.single.lengthscales)})
    else:
        out.update({
            "sigma": p.multi.sigma, "omega": p.multi.omega, "mu": p.multi.mu,
            "lengthscales": list(p.multi.lengthscales),
        })
    return out


def parse_sim_spec(doc: dict) -> SimSpec:
    """Build a SimSpec from a parsed JSON document (see README for the schema)."""
    try:
        kind = doc["kind"]
        pdoc = dict(doc["params"])
        box = doc["box"]
        n = doc["n"]
    except KeyError as err:
        raise ValidationError(f"simulation spec missing required key {err}") from None
    if kind == "wphm":
        params = WphmParams(beta=pdoc["beta"], rho=pdoc["rho"], nu=pdoc["nu"])
    elif kind in ("gp-single", "gp-competing"):
        transform = TransformConfig(pdoc.get("gamma", 1.0))
        if kind == "gp-single":
            kernel = SingleKernelParams(sigma=pdoc["sigma"], lengthscales=pdoc["lengthscales"])
            params = HyperParams(kind=ModelKind.AFT, eta=pdoc.get("eta", 0.0),
                                 beta=pdoc["beta"], single=kernel, transform=transform)
        else:
            kernel = MultiKernelParams(
                sigma=pdoc["sigma"], omega=pdoc["omega"],
                lengthscales=pdoc["lengthscales"], mu=pdoc.get("mu", 0.0),
            )
            params = HyperParams(kind=ModelKind.COMPETING, eta=pdoc.get("eta", 0.0),
                                 beta=pdoc["beta"], multi=kernel, transform=transform)
    else:
        raise ValidationError(f"unknown simulation kind {kind!r}")
    return SimSpec(
        kind=kind, n=n, box=box, params=params,
        censor_fraction=doc.get("censor_fraction", 0.0),
        end_of_trial=doc.get("end_of_trial"),
        seed=doc.get("seed", 0),
        n_validation=doc.get("n_validation", 0),
    )


def read_sim_spec(path) -> SimSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"{path}: invalid JSON ({err})") from None
    return parse_sim_spec(doc)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


@dataclass
class WphmModel:
    """Fitted Weibull baseline bundled with its training snapshot."""

    params: WphmParams
    data: SurvivalDataset
    nll: float

    kind = "wphm"


def _dataset_to_doc(data: SurvivalDataset) -> dict:
    doc = {
        "x": [[float(v) for v in row] for row in data.x],
        "event": [int(v) for v in data.event],
        "time": [None if not np.isfinite(v) else float(v) for v in data.time],
        "n_risks": int(data.n_risks),
    }
    if data.has_intervals:
        doc["t_lower"] = [None if not np.isfinite(v) else float(v) for v in data.t_lower]
        doc["t_upper"] = [None if not np.isfinite(v) else float(v) for v in data.t_upper]
    return doc


def _dataset_from_doc(doc: dict) -> SurvivalDataset:
    def arr(key):
        if key not in doc:
            return None
        return np.array([np.nan if v is None else v for v in doc[key]], dtype=float)

    return SurvivalDataset(
        x=np.asarray(doc["x"], dtype=float),
        event=np.asarray(doc["event"], dtype=int),
        time=arr("time"),
        t_lower=arr("t_lower"),
        t_upper=arr("t_upper"),
        n_risks=int(doc.get("n_risks", 0)),
    )


def _hyper_to_doc(hyper: HyperParams) -> dict:
    doc = {"eta": hyper.eta, "gamma": hyper.transform.gamma}
    if hyper.beta is not None:
        doc["beta"] = hyper.beta
    if hyper.nu is not None:
        doc["nu"] = hyper.nu
    if hyper.kind is ModelKind.COMPETING:
        doc["kernel"] = {
            "type": "multi", "sigma": hyper.multi.sigma, "omega": hyper.multi.omega,
            "mu": hyper.multi.mu, "lengthscales": list(hyper.multi.lengthscales),
        }
    else:
        doc["kernel"] = {
            "type": "single", "sigma": hyper.single.sigma,
            "lengthscales": list(hyper.single.lengthscales),
        }
    return doc


def _hyper_from_doc(kind: ModelKind, doc: dict) -> HyperParams:
    kdoc = doc["kernel"]
    transform = TransformConfig(doc["gamma"])
    if kdoc["type"] == "multi":
        kernel = MultiKernelParams(sigma=kdoc["sigma"], omega=kdoc["omega"],
                                   lengthscales=kdoc["lengthscales"], mu=kdoc["mu"])
        return HyperParams(kind=kind, eta=doc["eta"], beta=doc["beta"],
                           multi=kernel, transform=transform)
    kernel = SingleKernelParams(sigma=kdoc["sigma"], lengthscales=kdoc["lengthscales"])
    return HyperParams(kind=kind, eta=doc["eta"], beta=doc.get("beta"),
                       single=kernel, nu=doc.get("nu"), transform=transform)


def save_model(path, model):
    """Write a fitted model (GP family or Weibull baseline) as versioned JSON."""
    if isinstance(model, FittedModel):
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": model.kind.value,
            "hyper": _hyper_to_doc(model.hyper),
            "f_hat": [float(v) for v in model.f_hat],
            "w_diag": [float(v) for v in model.w_diag],
            "diagnostics": {
                "converged": bool(model.converged),
                "final_grad_norm": float(model.final_grad_norm),
                "nll_value": float(model.nll_value),
            },
            "training": _dataset_to_doc(model.data),
        }
    elif isinstance(model, WphmModel):
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "wphm",
            "params": {"beta": [float(v) for v in model.params.beta],
                       "rho": model.params.rho, "nu": model.params.nu},
            "diagnostics": {"nll": float(model.nll)},
            "training": _dataset_to_doc(model.data),
        }
    else:
        raise ValidationError(f"cannot serialise object of type {type(model).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_model(path):
    """Read a model file back; returns a FittedModel or a WphmModel.

    GP models are reconstituted by rebuilding the Gram matrix from the
    stored hyperparameters and training covariates (deterministic), so the
    loaded object predicts identically to the saved one.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"{path}: invalid JSON ({err})") from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported format version {version!r}")
    data = _dataset_from_doc(doc["training"])
    kind = doc["kind"]
    if kind == "wphm":
        params = WphmParams(beta=doc["params"]["beta"], rho=doc["params"]["rho"],
                            nu=doc["params"]["nu"])
        return WphmModel(params=params, data=data, nll=doc["diagnostics"]["nll"])
    hyper = _hyper_from_doc(ModelKind(kind), doc["hyper"])
    gram = hyper.build_gram(data.x)
    return FittedModel(
        hyper=hyper,
        f_hat=np.asarray(doc["f_hat"], dtype=float),
        w_diag=np.asarray(doc["w_diag"], dtype=float),
        gram=gram,
        data=data,
        converged=bool(doc["diagnostics"]["converged"]),
        final_grad_norm=float(doc["diagnostics"]["final_grad_norm"]),
        nll_value=float(doc["diagnostics"]["nll_value"]),
    )
