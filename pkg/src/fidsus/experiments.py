"""Parameter sweeps, scaling studies and peak detection.

A sweep config is a JSON object with exactly these keys (unknown keys are
rejected):

``model``    a model dict as accepted by :meth:`ModelSpec.from_dict` (``lam``
             is ignored; the grid supplies it)
``grid``     list of lambda values, or ``{"start", "stop", "step"}`` (inclusive)
``eps``      target additive error for estimates (default 0.05)
``seeds``    list of integer seeds (default ``[0]``)
``mode``     ``exact_only`` | ``quantum`` | ``both`` | ``ff``
``outputs``  ``{"csv": name, "svg": name or null}`` relative to the output dir

Optional: ``n_runs`` (odd, median readouts, default 1), ``backend``
(``spectral`` | ``cheb_lcu``), ``workers`` (default 1).

Sweep CSV columns, in order::

    lambda,seed,chi_f_exact,chi_f_hat,abs_err,queries_total,error

Floats use 17 significant digits, empty fields mean "not computed", and
``error`` holds a marker such as ``degenerate`` when a point was skipped.
Lines starting with ``#`` are comments (a timestamp unless deterministic).
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionViolation,
    ConfigError,
    DegenerateGroundState,
    InsufficientData,
    ResourceCapError,
)
from .models import ModelSpec, build_ff_model, build_model, dense_model
from .polynomials import ff_inverse_poly, fit_inverse
from .qsvt import BACKENDS, hamiltonian_encoding, pseudoinverse_encoding
from .susceptibility import chi_f_exact_sum, prepare_chi_f, prepare_chi_f_ff

MODES = ("exact_only", "quantum", "both", "ff")
SCALING_KINDS = ("heisenberg", "gap_general", "gap_ff", "ff_vs_general")
CONFIG_KEYS = {"model", "grid", "eps", "seeds", "mode", "outputs", "n_runs", "backend", "workers"}
CSV_COLUMNS = ("lambda", "seed", "chi_f_exact", "chi_f_hat", "abs_err", "queries_total", "error")
OUT_DIR_ENV = "FIDSUS_OUT_DIR"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "fidsus_out"))


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


# ----------------------------------------------------------------------------
# configuration


def _grid_from(spec) -> list[float]:
    if isinstance(spec, dict):
        extra = set(spec) - {"start", "stop", "step"}
        if extra or not {"start", "stop", "step"} <= set(spec):
            raise ConfigError("grid dict needs exactly 'start', 'stop' and 'step'")
        start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ConfigError("grid needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round to kill accumulated binary noise in the grid values
        return [round(start + i * step, 12) for i in range(n)]
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    raise ConfigError("grid must be a list or a {start, stop, step} dict")


@dataclass
class SweepConfig:
    model: ModelSpec
    lambda_grid: list
    eps: float = 0.05
    seeds: list = field(default_factory=lambda: [0])
    mode: str = "exact_only"
    outputs: dict = field(default_factory=lambda: {"csv": "sweep.csv", "svg": "sweep.svg"})
    n_runs: int = 1
    backend: str = "spectral"
    workers: int = 1

    def __post_init__(self):
        if not self.lambda_grid:
            raise ConfigError("lambda grid is empty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.eps <= 0.5:
            raise ConfigError(f"eps must lie in (0, 0.5], got {self.eps}")
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if self.n_runs < 1 or self.n_runs % 2 == 0:
            raise ConfigError("n_runs must be a positive odd integer")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.mode == "ff" and (self.model.family != "ff_projector_chain"
                                  or any(x != 0.0 for x in self.lambda_grid)):
            raise ConfigError("ff mode runs the ff_projector_chain family at lambda = 0 only")
        extra = set(self.outputs) - {"csv", "svg"}
        if extra or "csv" not in self.outputs:
            raise ConfigError("outputs needs a 'csv' entry and an optional 'svg' entry")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k in ("model", "grid", "mode"):
            if k not in d:
                raise ConfigError(f"config is missing {k!r}")
        try:
            return cls(
                model=ModelSpec.from_dict(d["model"]),
                lambda_grid=_grid_from(d["grid"]),
                eps=float(d.get("eps", 0.05)),
                seeds=[int(s) for s in d.get("seeds", [0])],
                mode=d["mode"],
                outputs=dict(d.get("outputs", {"csv": "sweep.csv", "svg": "sweep.svg"})),
                n_runs=int(d.get("n_runs", 1)),
                backend=d.get("backend", "spectral"),
                workers=int(d.get("workers", 1)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from None

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": list(self.lambda_grid),
            "eps": self.eps,
            "seeds": list(self.seeds),
            "mode": self.mode,
            "outputs": dict(self.outputs),
            "n_runs": self.n_runs,
            "backend": self.backend,
            "workers": self.workers,
        }


# ----------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    lam: float
    seed: int | None = None
    chi_f_exact: float | None = None
    chi_f_hat: float | None = None
    abs_err: float | None = None
    queries_total: int | None = None
    error: str = ""

    def __post_init__(self):
        if self.abs_err is None and self.chi_f_exact is not None and self.chi_f_hat is not None:
            self.abs_err = abs(self.chi_f_hat - self.chi_f_exact)

    def as_record(self) -> list[str]:
        vals = (self.lam, self.seed, self.chi_f_exact, self.chi_f_hat, self.abs_err,
                self.queries_total, self.error)
        return [fmt(v) for v in vals]

    @classmethod
    def from_record(cls, rec: dict) -> "SweepRow":
        def num(k, conv=float):
            v = rec.get(k, "")
            return conv(v) if v != "" else None

        return cls(
            lam=float(rec["lambda"]),
            seed=num("seed", int),
            chi_f_exact=num("chi_f_exact"),
            chi_f_hat=num("chi_f_hat"),
            abs_err=num("abs_err"),
            queries_total=num("queries_total", int),
            error=rec.get("error", ""),
        )


def _error_marker(exc: Exception) -> str:
    if isinstance(exc, DegenerateGroundState):
        return "degenerate"
    if isinstance(exc, AssumptionViolation):
        return "assumption_violation"
    return "resource_cap"


def _sweep_point(cfg: SweepConfig, lam: float) -> list[SweepRow]:
    spec = cfg.model.at(lam)
    try:
        exact = None
        if cfg.mode != "quantum":
            exact = chi_f_exact_sum(*dense_model(spec))
        if cfg.mode == "exact_only":
            return [SweepRow(lam, chi_f_exact=exact)]
        if cfg.mode == "ff":
            _, drive = build_model(spec)
            prep = prepare_chi_f_ff(build_ff_model(spec.n_qubits, "chain"), drive, cfg.eps,
                                    cfg.backend, compare_general=False)
        else:
            prep = prepare_chi_f(spec, cfg.eps, cfg.backend)
    except (AssumptionViolation, ResourceCapError) as exc:
        return [SweepRow(lam, seed=s, error=_error_marker(exc)) for s in cfg.seeds]
    rows = []
    for s in cfg.seeds:
        rep = prep.run(s, cfg.n_runs)
        rows.append(SweepRow(lam, s, exact, rep.chi_f_hat, queries_total=rep.queries_total))
    return rows


def write_csv(rows, path, deterministic: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not deterministic:
            fh.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.as_record())


def read_csv(path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [SweepRow.from_record(rec) for rec in csv.DictReader(io.StringIO("".join(lines)))]


def svg_line_plot(xs, series: dict, title: str = "", width: int = 640, height: int = 400) -> str:
    """Static SVG with one polyline per named series; NaN or None points are skipped."""
    pad = 50
    pts = {k: [(float(x), float(y)) for x, y in zip(xs, ys)
               if y is not None and np.isfinite(y)] for k, ys in series.items()}
    allp = [p for v in pts.values() for p in v]
    if allp:
        x0 = min(p[0] for p in allp)
        x1 = max(p[0] for p in allp)
        y0 = min(0.0, min(p[1] for p in allp))
        y1 = max(p[1] for p in allp)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{pad / 2:.1f}" text-anchor="middle">{title}</text>',
        f'<text x="{pad}" y="{height - pad / 3:.1f}">{x0:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad / 3:.1f}" text-anchor="end">{x1:.3g}</text>',
        f'<text x="5" y="{pad:.1f}">{y1:.3g}</text>',
    ]
    for i, (name, p) in enumerate(pts.items()):
        if not p:
            continue
        coords = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in p)
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{coords}">'
                   f'<title>{name}</title></polyline>')
        out.append(f'<text x="{width - pad}" y="{pad + 15 * (i + 1)}" text-anchor="end" '
                   f'fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _series(rows, lams):
    exact, est = [], []
    for lam in lams:
        pts = [r for r in rows if r.lam == lam]
        ex = [r.chi_f_exact for r in pts if r.chi_f_exact is not None]
        hat = [r.chi_f_hat for r in pts if r.chi_f_hat is not None]
        exact.append(ex[0] if ex else None)
        est.append(float(np.mean(hat)) if hat else None)
    return exact, est


@dataclass
class SweepResult:
    rows: list
    csv_path: Path | None
    svg_path: Path | None


def run_sweep(cfg: SweepConfig, out_dir=None, deterministic: bool = True,
              write: bool = True) -> SweepResult:
    """Evaluate every grid point; rows come back in grid order whatever the pool does."""
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(lambda lam: _sweep_point(cfg, lam), cfg.lambda_grid))
    else:
        chunks = [_sweep_point(cfg, lam) for lam in cfg.lambda_grid]
    rows = [r for c in chunks for r in c]
    csv_path = svg_path = None
    if write:
        out = Path(out_dir) if out_dir is not None else default_out_dir()
        csv_path = out / cfg.outputs["csv"]
        write_csv(rows, csv_path, deterministic)
        if cfg.outputs.get("svg"):
            svg_path = out / cfg.outputs["svg"]
            exact, est = _series(rows, cfg.lambda_grid)
            series = {}
            if any(v is not None for v in exact):
                series["exact"] = exact
            if any(v is not None for v in est):
                series["estimate"] = est
            svg_path.write_text(svg_line_plot(cfg.lambda_grid, series, "chi_F vs lambda"))
    return SweepResult(rows, csv_path, svg_path)


# ----------------------------------------------------------------------------
# peak detection


@dataclass
class PeakResult:
    lam_c: float
    curvature: float
    index: int
    boundary: bool = False
    message: str = ""


def _points(rows):
    pts = []
    for r in rows:
        if isinstance(r, SweepRow):
            y = r.chi_f_exact if r.chi_f_exact is not None else r.chi_f_hat
            x = r.lam
        else:
            x, y = r
        if y is not None and np.isfinite(y):
            pts.append((float(x), float(y)))
    # average duplicate lambdas (several seeds per point)
    by = {}
    for x, y in pts:
        by.setdefault(x, []).append(y)
    return sorted((x, float(np.mean(v))) for x, v in by.items())


def detect_peak(rows) -> PeakResult:
    """Vertex of the parabola through the maximum and its two neighbours.

    ``rows`` are :class:`SweepRow` objects or ``(lambda, value)`` pairs.  A
    maximum on the first or last grid point returns that point with
    ``boundary = True`` and a warning message instead of a vertex.
    """
    pts = _points(rows)
    if len(pts) < 5:
        raise InsufficientData(f"peak detection needs at least 5 points, got {len(pts)}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    i = int(np.argmax(ys))
    if i == 0 or i == len(xs) - 1:
        return PeakResult(float(xs[i]), float("nan"), i, True,
                          "maximum lies on the grid boundary; widen the lambda range")
    x = xs[i - 1:i + 2]
    y = ys[i - 1:i + 2]
    # Newton divided differences give the exact interpolating parabola
    d1 = (y[1] - y[0]) / (x[1] - x[0])
    d2 = (y[2] - y[1]) / (x[2] - x[1])
    a = (d2 - d1) / (x[2] - x[0])
    b = d1 - a * (x[0] + x[1])
    if a >= 0:
        return PeakResult(float(xs[i]), 2.0 * a, i, False, "data are not concave at the maximum")
    return PeakResult(float(-b / (2.0 * a)), float(2.0 * a), i)


# ----------------------------------------------------------------------------
# scaling studies


@dataclass
class ScalingResult:
    kind: str
    rows: list  # (series, control, value)
    slopes: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("series", "control", "value"))
        for s, c, v in self.rows:
            w.writerow((s, fmt(float(c)), fmt(v)))
        for s, v in self.slopes.items():
            buf.write(f"# slope,{s},{fmt(float(v))}\n")
        return buf.getvalue()


def loglog_slope(controls, values) -> float:
    if len(controls) < 3:
        raise InsufficientData(f"a slope needs at least 3 points, got {len(controls)}")
    return float(np.polyfit(np.log(controls), np.log(values), 1)[0])


def _halvings(eps: float, count: int = 4) -> list[float]:
    return [eps / 2 ** i for i in range(count)]


def run_scaling_study(kind: str, cfg: SweepConfig | None = None, values=None,
                      eps: float | None = None, out_path=None) -> ScalingResult:
    """Measure queries or polynomial degrees against a control variable.

    ``heisenberg``     Grover queries vs ``1/eps`` on ``cfg.model`` at the first
                       grid point; ``values`` are the eps list (default: cfg.eps
                       halved three times).
    ``gap_general``    inverse degree vs ``1/gap`` at a fixed polynomial
                       tolerance, plus the pseudoinverse degree on
                       ``diag(0, gap, 1/2, 1)`` at a fixed absolute ``eps``
                       (which carries an extra ``log(1/gap)`` factor).
    ``gap_ff``         FF inverse degree vs ``r/gap`` at ``r = 2``, at fixed
                       polynomial tolerance and at fixed absolute ``eps``.
    ``ff_vs_general``  FF and general inverse degree vs ``r`` for the FF chain
                       (gap 1, ``||H_F|| = r``).
    """
    if kind not in SCALING_KINDS:
        raise ConfigError(f"scaling kind must be one of {SCALING_KINDS}, got {kind!r}")
    rows = []
    slopes = {}
    if kind == "heisenberg":
        if cfg is None:
            raise ConfigError("the heisenberg study needs a model config")
        base = eps if eps is not None else cfg.eps
        eps_list = list(values) if values is not None else _halvings(base)
        if len(eps_list) < 3:
            raise InsufficientData("need at least 3 eps values")
        spec = cfg.model.at(cfg.lambda_grid[0])
        for e in eps_list:
            prep = prepare_chi_f(spec, e, cfg.backend)
            rows.append(("grover_queries", 1.0 / e, prep.run(cfg.seeds[0]).queries_total))
        slopes["grover_queries"] = loglog_slope([r[1] for r in rows], [r[2] for r in rows])
    elif kind == "gap_general":
        e = eps if eps is not None else (cfg.eps if cfg is not None else 1e-3)
        gaps = list(values) if values is not None else [0.5, 0.25, 0.125, 0.0625]
        if len(gaps) < 3:
            raise InsufficientData("need at least 3 gaps")
        for g in gaps:
            rows.append(("inverse_degree", 1.0 / g, fit_inverse(g, e).degree))
        for g in gaps:
            H = np.diag([0.0, g, 0.5, 1.0])
            pinv = pseudoinverse_encoding(hamiltonian_encoding(H, 0.0), g, e)
            rows.append(("pinv_degree_abs_eps", 1.0 / g, pinv.meta["degree"]))
    elif kind == "gap_ff":
        e = eps if eps is not None else 1e-3
        gaps = list(values) if values is not None else [1.0, 0.5, 0.25, 0.125]
        if len(gaps) < 3:
            raise InsufficientData("need at least 3 gaps")
        for g in gaps:
            K = 4.0 / (3.0 * g)
            rows.append(("ff_degree", 2.0 / g, ff_inverse_poly(2, g, min(e * K, 0.5)).degree))
        for g in gaps:
            rows.append(("ff_degree_abs_eps", 2.0 / g, ff_inverse_poly(2, g, e).degree))
    else:
        e = eps if eps is not None else 1e-3
        rs = list(values) if values is not None else [2, 4, 8, 16]
        if len(rs) < 3:
            raise InsufficientData("need at least 3 values of r")
        for r in rs:
            rows.append(("ff_degree", float(r), ff_inverse_poly(int(r), 1.0, e).degree))
        for r in rs:
            # pseudoinverse_encoding on H_F: alpha = r, gap 1, polynomial tolerance 3 eps / 4
            rows.append(("general_degree", float(r), fit_inverse(1.0 / r, 0.75 * e).degree))
    if kind != "heisenberg":
        for name in dict.fromkeys(r[0] for r in rows):
            pts = [r for r in rows if r[0] == name]
            slopes[name] = loglog_slope([p[1] for p in pts], [p[2] for p in pts])
    res = ScalingResult(kind, rows, slopes)
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(res.to_csv())
    return res
