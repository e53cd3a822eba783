"""Scaling sweeps, log-log exponent fits and report emission (CSV, text table, SVG)."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats

from . import classical_attacks, quantum_cost_model
from .errors import ParameterError
from .permutation_oracle import random_instance

SCHEMA_VERSION = 1
CLASSICAL = {"exhaustive": 2, "mitm2": 2, "mitm4": 4, "dissect4": 4}
COST_MODELS = ("ke2_cost", "ke4_cost")
ALGORITHMS = tuple(CLASSICAL) + COST_MODELS
METRICS = ("time_units", "queries", "peak_memory_units")


@dataclass
class ExperimentConfig:
    seed: int = 0
    algorithm: str = "mitm2"
    sizes: list[int] = field(default_factory=lambda: [2**k for k in range(6, 13)])
    m_rule: str = "N"
    trials: int = 3
    pairs: int | None = None
    metric: str = "time_units"
    outputs: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.sizes = [int(n) for n in self.sizes]
        if self.schema_version != SCHEMA_VERSION:
            raise ParameterError(f"unsupported schema_version {self.schema_version}")
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.metric not in METRICS:
            raise ParameterError(f"unknown metric {self.metric!r}; choose from {', '.join(METRICS)}")
        if not self.sizes or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ParameterError("sizes must be non-empty and strictly increasing")
        if self.sizes[0] < 2:
            raise ParameterError("sizes must be at least 2")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        m_exponent(self.m_rule)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "schema_version" not in data:
            raise ParameterError("config needs an explicit schema_version")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def block_space(self, n: int) -> int:
        return n ** m_exponent(self.m_rule)

    def pairs_for(self, n: int) -> int:
        if self.pairs is not None:
            return self.pairs
        return default_pairs(CLASSICAL.get(self.algorithm, 2), n, self.block_space(n))


def m_exponent(rule: str) -> int:
    """``"N"`` -> 1, ``"N^2"`` / ``"N2"`` / ``"N²"`` -> 2, and so on."""
    m = re.fullmatch(r"\s*N\s*(?:\^?\s*(\d+)|([²³]))?\s*", str(rule))
    if not m:
        raise ParameterError(f"bad M rule {rule!r}; expected N, N^2, N^3, ...")
    if m.group(1):
        e = int(m.group(1))
    elif m.group(2):
        e = "²³".index(m.group(2)) + 2
    else:
        e = 1
    if e < 1:
        raise ParameterError("M rule exponent must be >= 1")
    return e


def default_pairs(depth: int, n: int, m: int) -> int:
    # enough pairs that a wrong key tuple survives with probability about 1/N^2
    need = math.ceil((depth + 2) * math.log(n) / math.log(m) - 1e-9)
    return max(need, 2 if depth == 4 else 1)


@dataclass(frozen=True)
class ScalingSeries:
    algorithm: str
    metric: str
    points: list[tuple[int, float]]
    fitted_exponent: float
    r_squared: float
    intercept: float = 0.0
    config: dict = field(default_factory=dict)


def fit_power_law(points) -> tuple[float, float, float]:
    """Least squares on ``(log N, log cost)``; returns ``(exponent, intercept, r_squared)``."""
    pts = sorted((float(n), float(v)) for n, v in points)
    if len(pts) < 2:
        raise ParameterError("need at least two sizes to fit an exponent")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ParameterError("costs and sizes must be positive for a log-log fit")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    fit = stats.linregress(x, y)
    r2 = 1.0 if np.allclose(y, fit.intercept + fit.slope * x, rtol=0, atol=1e-12) else float(fit.rvalue**2)
    return float(fit.slope), float(fit.intercept), min(max(r2, 0.0), 1.0)


def series_from_points(algorithm: str, metric: str, points, config: dict | None = None) -> ScalingSeries:
    points = sorted((int(n), float(v)) for n, v in points)
    slope, intercept, r2 = fit_power_law(points)
    return ScalingSeries(algorithm, metric, points, slope, r2, intercept, dict(config or {}))


def cell_seed(seed: int, n: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, n, trial]).generate_state(1, np.uint64)[0])


def _measure(config: ExperimentConfig, n: int, trial: int) -> dict:
    """Every metric of one (size, trial) cell."""
    m = config.block_space(n)
    if config.algorithm in COST_MODELS:
        est = quantum_cost_model.ke2_quantum_cost(n) if config.algorithm == "ke2_cost" else quantum_cost_model.ke4_quantum_cost(n, m)
        return {"time_units": est.time_units, "queries": est.queries, "peak_memory_units": est.memory_units}
    depth = CLASSICAL[config.algorithm]
    inst = random_instance(cell_seed(config.seed, n, trial), n, m, depth, config.pairs_for(n))
    ledger = classical_attacks.ATTACKS[config.algorithm](inst).ledger
    return {
        "time_units": ledger["time_units"],
        "queries": ledger["forward_queries"] + ledger["inverse_queries"],
        "peak_memory_units": ledger["peak_memory_units"],
    }


def thread_cap() -> int:
    raw = os.environ.get("QMITM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"QMITM_THREADS must be an integer, got {raw!r}") from None


def run_scaling_metrics(config: ExperimentConfig, metrics=METRICS) -> dict[str, ScalingSeries]:
    """One sweep, one fitted series per metric (median over trials at each size)."""
    trials = 1 if config.algorithm in COST_MODELS else config.trials
    cells = [(n, t) for n in config.sizes for t in range(trials)]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        values = list(pool.map(lambda c: _measure(config, *c), cells))
    ordered = sorted(zip(cells, values), key=lambda cv: cv[0])
    out = {}
    for metric in metrics:
        by_size: dict[int, list[float]] = {}
        for (n, _), v in ordered:
            by_size.setdefault(n, []).append(v[metric])
        points = [(n, float(statistics.median(vs))) for n, vs in sorted(by_size.items())]
        out[metric] = series_from_points(config.algorithm, metric, points, {**asdict(config), "metric": metric})
    return out


def run_scaling(config: ExperimentConfig) -> ScalingSeries:
    """Measure ``config.metric`` at every size (median over trials) and fit the exponent."""
    return run_scaling_metrics(config, (config.metric,))[config.metric]


# --- reports -----------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], comments: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in sorted((comments or {}).items()):
        buf.write(f"# {k}={json.dumps(v, sort_keys=True)}\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[dict], dict]:
    """Inverse of :func:`rows_to_csv`: ``(rows as strings, comment metadata)``."""
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = json.loads(v)
        else:
            body.append(line)
    return list(csv.DictReader(body)), meta


def series_to_csv(series: ScalingSeries) -> str:
    meta = {
        "algorithm": series.algorithm,
        "metric": series.metric,
        "fitted_exponent": series.fitted_exponent,
        "intercept": series.intercept,
        "r_squared": series.r_squared,
        "config": series.config,
    }
    return rows_to_csv([{"N": n, series.metric: v} for n, v in series.points], meta)


def series_from_csv(text: str) -> ScalingSeries:
    rows, meta = parse_csv(text)
    metric = meta["metric"]
    pts = [(int(r["N"]), float(r[metric])) for r in rows]
    return ScalingSeries(meta["algorithm"], metric, pts, meta["fitted_exponent"], meta["r_squared"], meta["intercept"], meta["config"])


def format_table(rows: list[dict], columns: list[str] | None = None) -> str:
    if not rows:
        return ""
    columns = columns or list(rows[0])
    cells = [[_fmt(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def series_table(series: ScalingSeries) -> str:
    rows = [{"N": n, series.metric: v} for n, v in series.points]
    head = (
        f"# {series.algorithm} {series.metric}: exponent {series.fitted_exponent:.4f}, "
        f"r^2 {series.r_squared:.6f}\n"
    )
    return head + format_table(rows)


def gains_rows(depth: int) -> list[dict]:
    return [row.as_dict() for row in quantum_cost_model.gain_table(depth)]


def gains_table(depth: int) -> str:
    """Exponent pairs ``(time, time-space)`` of the classical over the quantum attack."""
    rows = [
        {"attack": r["attack"], "time": r["time_gain"], "time-space": r["ts_gain"]}
        for r in gains_rows(depth)
    ]
    return format_table(rows)


def series_svg(series: ScalingSeries, width: int = 480, height: int = 360) -> str:
    """Self-contained log-log plot of the measured points and the fitted line."""
    pad = 56
    xs = [math.log2(n) for n, _ in series.points]
    ys = [math.log2(v) for _, v in series.points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    ln2 = math.log(2)
    fit = lambda x: (series.intercept + series.fitted_exponent * x * ln2) / ln2  # noqa: E731
    title = f"{series.algorithm} {series.metric}: slope {series.fitted_exponent:.4f}, r2 {series.r_squared:.4f}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13" font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 16}" text-anchor="middle" font-size="12" font-family="sans-serif">log2 N</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="12" font-family="sans-serif" '
        f'transform="rotate(-90 16 {height / 2:.1f})">log2 {escape(series.metric)}</text>',
        f'<line x1="{px(x0):.2f}" y1="{py(fit(x0)):.2f}" x2="{px(x1):.2f}" y2="{py(fit(x1)):.2f}" '
        'stroke="#c0392b" stroke-width="1.5" stroke-dasharray="5,3"/>',
    ]
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3.5" fill="#2c3e50"/>')
    for x in sorted(set(xs)):
        out.append(
            f'<text x="{px(x):.2f}" y="{height - pad + 16}" text-anchor="middle" font-size="10" '
            f'font-family="sans-serif">{x:g}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(series: ScalingSeries, fmt: str, path=None) -> str:
    """Render ``series`` as csv, table or svg; write it to ``path`` when given."""
    render = {"csv": series_to_csv, "table": series_table, "svg": series_svg}
    if fmt not in render:
        raise ParameterError(f"unknown format {fmt!r}")
    text = render[fmt](series)
    if path is not None:
        Path(path).write_text(text)
    return text
