"""CSV datasets, run artifacts and the SVG trace plot."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import posterior_summary, probabilistic_coherence, relevant_categories
from .exceptions import DataError
from .model import CountData, CovariateMatrix, Trace

ARTIFACT_FILES = ("model.meta", "phi_mean.csv", "theta_mean.csv", "beta_summary.csv",
                  "n_draws.csv", "trace.csv", "trace.svg", "coherence.csv", "relevant.txt")
BETA_COLUMNS = ["cluster", "covariate", "mean", "ci_lower", "ci_upper", "significant"]
COHERENCE_COLUMNS = ["cluster", "score", "skipped_pairs", "whole_corpus_score",
                     "whole_corpus_skipped_pairs"]


def fmt(x) -> str:
    """Six significant digits."""
    return f"{float(x):.6g}"


def sanitize(label: str) -> str:
    out = re.sub(r"[^A-Za-z0-9_]", "_", str(label).strip())
    return out or "_"


def _read_table(path, kind: str):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "instance_id":
        raise DataError(f"{path}:1: header must start with instance_id and name at least one {kind}")
    ids, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
        ids.append(sanitize(row[0]))
        try:
            values.append([float(c) for c in row[1:]])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric cell") from None
    if not ids:
        raise DataError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate instance ids")
    return ids, [sanitize(h) for h in header[1:]], np.array(values, dtype=float)


def read_counts(path) -> CountData:
    ids, cats, values = _read_table(path, "category")
    for i, row in enumerate(values):
        if np.any(row < 0):
            raise DataError(f"{path}:{i + 2}: negative count")
        if np.any(row != np.round(row)) or not np.all(np.isfinite(row)):
            raise DataError(f"{path}:{i + 2}: counts must be integers")
    return CountData(values.astype(np.int64), cats, ids)


def read_covariates(path):
    ids, names, values = _read_table(path, "covariate")
    for i, row in enumerate(values):
        if not np.all(np.isfinite(row)):
            raise DataError(f"{path}:{i + 2}: non-finite covariate")
    return ids, names, values


def align_covariates(ids, names, values, instance_ids, intercept: bool = True) -> CovariateMatrix:
    index = {i: r for r, i in enumerate(ids)}
    missing = [i for i in instance_ids if i not in index]
    if missing:
        raise DataError(f"covariates missing for instance id {missing[0]}")
    values = values[[index[i] for i in instance_ids]]
    if intercept:
        return CovariateMatrix.with_intercept(values, names)
    return CovariateMatrix(values, names)


def load_dataset(counts_path, covariates_path, intercept: bool = True):
    """Read a count matrix and its covariates, rows aligned by instance id."""
    data = read_counts(counts_path)
    ids, names, values = read_covariates(covariates_path)
    extra = set(ids) - set(data.instance_ids)
    if extra:
        raise DataError(f"covariates given for unknown instance id {sorted(extra)[0]}")
    return data, align_covariates(ids, names, values, data.instance_ids, intercept)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_matrix(path, row_label: str, row_names, col_names, matrix, integer: bool = False):
    conv = (lambda v: str(int(v))) if integer else fmt
    _write_csv(path, [row_label] + list(col_names),
               [[r] + [conv(v) for v in row] for r, row in zip(row_names, matrix)])


def read_matrix(path):
    """Inverse of :func:`write_matrix`: ``(row_names, col_names, values)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [r[0] for r in rows[1:]], rows[0][1:], np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def write_dataset(data: CountData, X: CovariateMatrix, out_dir, prefix: str = "") -> tuple:
    """Write ``counts.csv`` and ``covariates.csv``; a leading intercept column is dropped."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts_path = out / f"{prefix}counts.csv"
    cov_path = out / f"{prefix}covariates.csv"
    write_matrix(counts_path, "instance_id", data.instance_ids, data.category_names, data.counts, True)
    design, names = X.design, X.column_names
    if names and names[0] == "Intercept" and np.all(design[:, 0] == 1):
        design, names = design[:, 1:], names[1:]
    _write_csv(cov_path, ["instance_id"] + list(names),
               [[i] + [repr(float(v)) for v in row] for i, row in zip(data.instance_ids, design)])
    return counts_path, cov_path


def write_truth(truth, path) -> None:
    payload = {
        "seed": truth.seed, "n_disp": truth.n_disp,
        "covariates": truth.X.column_names,
        "phi": truth.phi_true.tolist(), "beta": truth.beta_true.tolist(),
        "theta": truth.theta_true.tolist(),
        "anchors": [a.tolist() for a in truth.anchors],
        "pure_instances": np.flatnonzero(truth.pure_mask).tolist() if truth.pure_mask is not None else [],
        "expected_counts": truth.expected_counts.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def write_meta(path, meta: dict) -> None:
    lines = [f"{k}={v}" for k, v in meta.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


@dataclass
class RunArtifacts:
    out_dir: Path

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def missing(self) -> list:
        return [f for f in ARTIFACT_FILES if not self.path(f).exists()]


def cluster_names(K: int) -> list:
    return [f"cluster{k + 1}" for k in range(K)]


def write_artifacts(trace: Trace, data: CountData, X: CovariateMatrix, out_dir,
                    level: Optional[float] = None, M: int = 5, extra_meta: Optional[dict] = None
                    ) -> RunArtifacts:
    """Write the full artifact set of one fitted chain."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K = trace.phi_draws.shape[1]
    names = cluster_names(K)
    level = float(trace.meta.get("ci_level", 0.95)) if level is None else level

    meta = dict(trace.meta)
    meta.update({"L": data.L, "S": data.S, "d": X.d, "retained": trace.n_retained,
                 "intercept": str(bool(X.column_names and X.column_names[0] == "Intercept")).lower()})
    meta.update(extra_meta or {})
    write_meta(out / "model.meta", meta)

    phi_mean = trace.phi_mean()
    theta_mean = trace.theta_mean()
    write_matrix(out / "phi_mean.csv", "cluster", names, data.category_names, phi_mean)
    write_matrix(out / "theta_mean.csv", "instance_id", data.instance_ids, names, theta_mean)

    if trace.n_retained >= 2:
        summary = posterior_summary(trace.beta_draws, level, names, X.column_names)
        rows = [[c, v, fmt(m), fmt(lo), fmt(hi), "true" if sig else "false"]
                for c, v, m, lo, hi, sig in summary.rows()]
    else:
        b = trace.beta_draws[0]
        rows = [[names[k], X.column_names[j], fmt(b[k, j]), fmt(b[k, j]), fmt(b[k, j]),
                 "true" if b[k, j] != 0 else "false"] for k in range(K) for j in range(X.d)]
    _write_csv(out / "beta_summary.csv", BETA_COLUMNS, rows)

    _write_csv(out / "n_draws.csv", ["draw", "n_disp"],
               [[r + 1, fmt(v)] for r, v in enumerate(trace.n_draws)])
    _write_csv(out / "trace.csv", ["iteration", "log_density"],
               [[i + 1, fmt(v)] for i, v in enumerate(trace.logdens)])
    render_trace_svg(trace.logdens, out / "trace.svg")

    m = min(M, data.S)
    if m >= 2:
        by_argmax = probabilistic_coherence(phi_mean, data, theta_mean, m)
        corpus = probabilistic_coherence(phi_mean, data, theta_mean, m, whole_corpus=True)
        write_coherence(out / "coherence.csv", by_argmax, corpus, names)
    else:
        # a single category has no pairs to score
        _write_csv(out / "coherence.csv", COHERENCE_COLUMNS, [])

    rel = relevant_categories(phi_mean)
    lines = [f"{names[k]}: " + " ".join(data.category_names[s] for s in idx) for k, idx in enumerate(rel)]
    (out / "relevant.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return RunArtifacts(out)


def write_coherence(path, by_argmax, corpus, names) -> None:
    rows = [[n, fmt(a), int(sa), fmt(c), int(sc)] for n, a, sa, c, sc in
            zip(names, by_argmax.scores, by_argmax.skipped_pairs, corpus.scores, corpus.skipped_pairs)]
    rows.append(["total", fmt(by_argmax.total), int(by_argmax.skipped_pairs.sum()),
                 fmt(corpus.total), int(corpus.skipped_pairs.sum())])
    _write_csv(path, COHERENCE_COLUMNS, rows)


@dataclass
class FittedModel:
    meta: dict
    phi_mean: np.ndarray
    theta_mean: np.ndarray
    beta_mean: np.ndarray
    beta_rows: list
    covariate_names: list
    category_names: list
    instance_ids: list
    cluster_names: list


def load_model(model_dir) -> FittedModel:
    d = Path(model_dir)
    missing = [f for f in ("model.meta", "phi_mean.csv", "theta_mean.csv", "beta_summary.csv")
               if not (d / f).exists()]
    if missing:
        raise DataError(f"{d}: not a model directory (missing {missing[0]})")
    meta = read_meta(d / "model.meta")
    clusters, cats, phi = read_matrix(d / "phi_mean.csv")
    ids, _, theta = read_matrix(d / "theta_mean.csv")
    with open(d / "beta_summary.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    covs = []
    for r in rows:
        if r["covariate"] not in covs:
            covs.append(r["covariate"])
    beta = np.zeros((len(clusters), len(covs)))
    for r in rows:
        beta[clusters.index(r["cluster"]), covs.index(r["covariate"])] = float(r["mean"])
    return FittedModel(meta, phi, theta, beta, rows, covs, cats, ids, clusters)


def render_trace_svg(series, path, width: int = 640, height: int = 360) -> None:
    """Line plot of a log-density series as standalone SVG."""
    y = np.asarray(series, dtype=float)
    if y.size == 0:
        raise ValueError("empty series")
    ml, mr, mt, mb = 80, 20, 20, 40
    pw, ph = width - ml - mr, height - mt - mb
    n = y.size
    lo, hi = float(np.min(y)), float(np.max(y))
    span = hi - lo

    def px(i):
        return ml + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(v):
        return mt + (ph / 2 if span == 0 else ph * (hi - v) / span)

    pts = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(y))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    if n == 1:
        parts.append(f'<circle cx="{px(0):.2f}" cy="{py(y[0]):.2f}" r="2" fill="steelblue"/>')
    else:
        parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>')
    label = 'font-family="sans-serif" font-size="11"'
    parts += [
        f'<text x="{ml - 4}" y="{mt + 4}" text-anchor="end" {label}>max {fmt(hi)}</text>',
        f'<text x="{ml - 4}" y="{mt + ph}" text-anchor="end" {label}>min {fmt(lo)}</text>',
        f'<text x="{ml}" y="{height - 22}" text-anchor="middle" {label}>1</text>',
        f'<text x="{ml + pw}" y="{height - 22}" text-anchor="middle" {label}>{n}</text>',
        f'<text x="{ml + pw / 2}" y="{height - 6}" text-anchor="middle" {label}>iteration</text>',
        f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" {label} '
        f'transform="rotate(-90 14 {mt + ph / 2})">log density</text>',
        "</svg>",
    ]
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
