"""File formats: datasets, parameter/model files, count matrices, metrics CSV.

Everything is JSON or CSV so runs can be inspected and diffed by hand.
Floats are serialized with Python's shortest round-trip repr, so write →
read reproduces every value bit for bit.  The response/covariate block of a
dataset is an embedded CSV string (one header row, then one line per
observation); the binary feature matrix is stored as the list of its
nonzero (row, col) pairs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import Dataset, FullParams, MixtureParams, ResponseProbs
from .errors import SchemaMismatch
from .finalfit import FinalFit
from .mixreg import EmTrace

_DATASET_FORMAT = "mcr-dataset"
_PARAMS_FORMAT = "mcr-params"
_MODEL_FORMAT = "mcr-model"
_COUNTS_FORMAT = "mcr-counts"
_VERSION = 1

METRICS_HEADER = ("n", "p", "rep", "metric", "value")


def _require(header: dict, fmt: str) -> None:
    if not isinstance(header, dict) or header.get("format") != fmt:
        raise SchemaMismatch(f"expected a {fmt!r} file")
    if header.get("version") != _VERSION:
        raise SchemaMismatch(f"unsupported {fmt!r} version {header.get('version')!r}")


def _float_list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# ---------------------------------------------------------------- datasets


def _yx_to_csv(data: Dataset) -> str:
    cols = ["y"] + [f"x{j + 1}" for j in range(data.q)]
    lines = [",".join(cols)]
    for i in range(data.n):
        vals = [repr(float(data.y[i]))] + [repr(float(v)) for v in data.x[i]]
        lines.append(",".join(vals))
    return "\n".join(lines)


def _yx_from_csv(text: str, n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    lines = text.strip("\n").split("\n")
    if len(lines) != n + 1:
        raise SchemaMismatch(f"yx block has {len(lines) - 1} rows, header says n={n}")
    body = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:]], dtype=float
    ).reshape(n, -1)
    if body.shape[1] != q + 1:
        raise SchemaMismatch(f"yx block has {body.shape[1]} columns, want q+1={q + 1}")
    return body[:, 0], body[:, 1:]


def write_dataset(path, data: Dataset) -> None:
    doc = {
        "format": _DATASET_FORMAT,
        "version": _VERSION,
        "n": data.n,
        "p": data.p,
        "q": data.q,
        "yx_csv": _yx_to_csv(data),
        "z_ones": [[int(i), int(j)] for j, i in _iter_ones(data.z)],
        "true_labels": data.true_labels.tolist() if data.true_labels is not None else None,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _iter_ones(z: sparse.csc_array):
    """(col, row) pairs of set entries, ordered by row then column."""
    coo = z.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return zip(coo.col[order], coo.row[order])


def read_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _require(doc, _DATASET_FORMAT)
    try:
        n, p, q = int(doc["n"]), int(doc["p"]), int(doc["q"])
        y, x = _yx_from_csv(doc["yx_csv"], n, q)
        ones = doc["z_ones"]
        rows = np.array([ij[0] for ij in ones], dtype=int)
        cols = np.array([ij[1] for ij in ones], dtype=int)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaMismatch(f"malformed dataset file: {exc}") from exc
    if rows.size and (rows.max() >= n or cols.max() >= p):
        raise SchemaMismatch("z_ones entry outside the declared n x p shape")
    z = sparse.coo_array(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, p)
    ).tocsc()
    labels = doc.get("true_labels")
    return Dataset(y=y, x=x, z=z, true_labels=None if labels is None else np.asarray(labels))


# ------------------------------------------------------- parameters / models


def _params_block(params: FullParams) -> dict:
    return {
        "k": params.k,
        "q": params.q,
        "p": params.p,
        "priors": _float_list(params.mixture.priors),
        "intercepts": _float_list(params.mixture.intercepts),
        "slopes": _float_list(params.mixture.slopes),
        "noise_var": float(params.mixture.noise_var),
        "response_probs": [_float_list(row) for row in params.response.probs],
        "prob_eps": float(params.response.eps),
    }


def _params_from_block(doc: dict) -> FullParams:
    try:
        mixture = MixtureParams(
            priors=np.asarray(doc["priors"], dtype=float),
            intercepts=np.asarray(doc["intercepts"], dtype=float),
            slopes=np.asarray(doc["slopes"], dtype=float),
            noise_var=float(doc["noise_var"]),
        )
        probs = np.asarray(doc["response_probs"], dtype=float).reshape(doc["k"], doc["p"])
        response = ResponseProbs(probs, eps=float(doc.get("prob_eps", 1e-4)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed parameter block: {exc}") from exc
    return FullParams(mixture, response)


def write_params(path, params: FullParams) -> None:
    doc = {"format": _PARAMS_FORMAT, "version": _VERSION, **_params_block(params)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_params(path) -> FullParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _require(doc, _PARAMS_FORMAT)
    return _params_from_block(doc)


@dataclass(frozen=True)
class ModelFile:
    """A fitted model as stored on disk (posterior weights are recomputable)."""

    params: FullParams
    final: FinalFit
    trace: EmTrace
    bic_values: np.ndarray | None = None
    k_hat: int | None = None


def write_model(path, model: ModelFile) -> None:
    final = model.final
    trace = model.trace
    doc = {
        "format": _MODEL_FORMAT,
        "version": _VERSION,
        **_params_block(model.params),
        "final": {
            "phi": _float_list(final.phi),
            "se": _float_list(final.se),
            "p_values": _float_list(final.p_values),
            "noise_var": float(final.noise_var),
            "priors": _float_list(final.priors),
            "xtx_inverse": [_float_list(row) for row in final.xtx_inverse],
            "n": final.n,
        },
        "trace": {
            "loglik_per_iter": list(trace.loglik_per_iter),
            "iterations": trace.iterations,
            "converged": trace.converged,
            "start_index": trace.start_index,
            "empty_classes": [list(t) for t in trace.empty_classes],
        },
        "bic_values": None if model.bic_values is None else _float_list(model.bic_values),
        "k_hat": model.k_hat,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _require(doc, _MODEL_FORMAT)
    params = _params_from_block(doc)
    try:
        fin = doc["final"]
        final = FinalFit(
            phi=np.asarray(fin["phi"], dtype=float),
            noise_var=float(fin["noise_var"]),
            priors=np.asarray(fin["priors"], dtype=float),
            se=np.asarray(fin["se"], dtype=float),
            p_values=np.asarray(fin["p_values"], dtype=float),
            xtx_inverse=np.asarray(fin["xtx_inverse"], dtype=float),
            k=params.k,
            q=params.q,
            n=int(fin["n"]),
        )
        tr = doc["trace"]
        trace = EmTrace(
            loglik_per_iter=tuple(float(v) for v in tr["loglik_per_iter"]),
            iterations=int(tr["iterations"]),
            converged=bool(tr["converged"]),
            start_index=int(tr["start_index"]),
            empty_classes=tuple((int(a), int(b)) for a, b in tr["empty_classes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed model file: {exc}") from exc
    bic_values = doc.get("bic_values")
    return ModelFile(
        params=params,
        final=final,
        trace=trace,
        bic_values=None if bic_values is None else np.asarray(bic_values, dtype=float),
        k_hat=doc.get("k_hat"),
    )


# ------------------------------------------------------------ count matrices


def write_counts(path, counts) -> None:
    counts = sparse.csc_array(counts)
    coo = counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    doc = {
        "format": _COUNTS_FORMAT,
        "version": _VERSION,
        "n": counts.shape[0],
        "v": counts.shape[1],
        "entries": [
            [int(coo.row[i]), int(coo.col[i]), int(coo.data[i])] for i in order
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_counts(path) -> sparse.csc_array:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _require(doc, _COUNTS_FORMAT)
    try:
        n, v = int(doc["n"]), int(doc["v"])
        entries = doc["entries"]
        rows = np.array([e[0] for e in entries], dtype=int)
        cols = np.array([e[1] for e in entries], dtype=int)
        vals = np.array([e[2] for e in entries], dtype=np.int64)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaMismatch(f"malformed counts file: {exc}") from exc
    if rows.size and (rows.max() >= n or cols.max() >= v):
        raise SchemaMismatch("count entry outside the declared shape")
    return sparse.coo_array((vals, (rows, cols)), shape=(n, v)).tocsc()


# -------------------------------------------------------------- metrics CSV


def write_metrics_csv(path, rows) -> None:
    """Long-format metric rows, sorted for byte-stable output.

    `rows` holds (n, p, rep, metric, value) tuples; values are written with
    full-precision repr so rereading reproduces them exactly.
    """
    ordered = sorted(rows, key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for n, p, rep, metric, value in ordered:
            writer.writerow([n, p, rep, metric, repr(float(value))])


def read_metrics_csv(path) -> list[tuple[int, int, int, str, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != METRICS_HEADER:
            raise SchemaMismatch(f"unexpected metrics header {header!r}")
        return [(int(n), int(p), int(r), m, float(v)) for n, p, r, m, v in reader]
