"""Monte-Carlo trials, sweeps and result emission.

Every trial draws one channel, one pilot block and one data block, and all
combining methods are evaluated on that same draw. Error counts are exact
integers and are reduced in trial-index order, so results do not depend on
how trials are spread over workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .airframe import draw_data_symbols, make_constellation, make_pilots, synthesize
from .combine import direct_estimate, perfect_csi_combiner
from .detect import hard_decide, ser
from .regcov import SingularCovarianceError, build_prep, data_covariance, shrinkage_coefficient
from .scenario import ConfigError, ScenarioConfig, draw_channels, trial_seed
from .shrinkfit import FitOptions, FitState, fit_exhaustive_genie, fit_iterative

__all__ = [
    "METHODS",
    "MethodOutcome",
    "RunConfig",
    "SweepRecord",
    "SweepSpec",
    "TrialOutcome",
    "emit_csv",
    "emit_per_ue_csv",
    "emit_svg_plot",
    "emit_trace_csv",
    "read_csv",
    "run_sweep",
    "run_trial",
]

METHODS = ("no_reg", "reg_data", "reg_data_iter", "reg_exh", "perfect_csi")
SWEEP_KINDS = ("ue_power_dbm", "pilot_len")
MAX_ATTEMPTS = 3

METHOD_LABELS = {
    "no_reg": "No reg.",
    "reg_data": "Reg. data",
    "reg_data_iter": "Reg. data iter.",
    "reg_exh": "Reg. exh.",
    "perfect_csi": "Perfect CSI",
}


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "ue_power_dbm"
    values: tuple = (18.0,)

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")

    def apply(self, cfg: ScenarioConfig, value) -> ScenarioConfig:
        if self.kind == "ue_power_dbm":
            return cfg.replace(ue_tx_power_dbm=float(value))
        if float(value) != int(value):
            raise ConfigError(f"pilot_len sweep values must be integers, got {value}")
        return cfg.replace(pilot_len=int(value))


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep needs: scenario, sweep axis, trial count and method options."""

    scenario: ScenarioConfig
    sweep: SweepSpec
    trials: int = 2000
    methods: tuple = METHODS
    fit: FitOptions = field(default_factory=FitOptions)
    exh_step: float = 0.01
    exh_criterion: str = "mse"
    perfect_csi: str = "mmse"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods: {sorted(bad)}")
        if self.exh_criterion not in ("mse", "ser"):
            raise ConfigError(f"exhaustive criterion must be 'mse' or 'ser', got {self.exh_criterion!r}")
        if self.perfect_csi not in ("mmse", "rzf"):
            raise ConfigError(f"perfect_csi must be 'mmse' or 'rzf', got {self.perfect_csi!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        scen = doc.pop("scenario", None)
        if scen is None:
            # A bare scenario document runs a single point.
            scen, doc = doc, {}
        try:
            scenario = ScenarioConfig.from_dict(scen)
            sw = doc.pop("sweep", None) or {}
            kind = sw.get("kind", "ue_power_dbm")
            default = scenario.ue_powers_dbm[0] if kind == "ue_power_dbm" else scenario.pilot_len
            sweep = SweepSpec(kind=kind, values=tuple(sw.get("values", (default,))))
            exh = doc.pop("exhaustive", {}) or {}
            kw = {}
            if "fit" in doc:
                kw["fit"] = FitOptions(**doc.pop("fit"))
            if "methods" in doc:
                kw["methods"] = tuple(doc.pop("methods"))
            for key in ("trials", "perfect_csi"):
                if key in doc:
                    kw[key] = doc.pop(key)
            if doc:
                raise ConfigError(f"unknown run keys: {sorted(doc)}")
            return cls(
                scenario=scenario,
                sweep=sweep,
                exh_step=float(exh.get("step", 0.01)),
                exh_criterion=exh.get("criterion", "mse"),
                **kw,
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class MethodOutcome:
    errors_per_ue: np.ndarray | None = None
    alpha: float | None = None
    iterations: int | None = None
    clamp_events: int = 0
    failed: bool = False
    seconds: float = 0.0
    trace: FitState | None = None

    @property
    def errors(self) -> int:
        return int(self.errors_per_ue.sum())


@dataclass
class TrialOutcome:
    trial_index: int
    resamples: int
    methods: dict


def _derived_seed(seed: int, attempt: int) -> int:
    if attempt == 0:
        return seed
    ss = np.random.SeedSequence(seed, spawn_key=(0x5E5A, attempt))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _evaluate(cfg, seed, run: RunConfig, keep_trace):
    c = make_constellation(cfg.constellation_order)
    chan = draw_channels(cfg, seed)
    P = make_pilots(cfg.pilot_len, cfg.num_ues)
    Yp = synthesize("pilot", cfg, chan, P, seed)
    D = draw_data_symbols(cfg, seed)
    Yd = synthesize("data", cfg, chan, D, seed)
    prep = build_prep(Yp)

    def errors(W):
        return ser(hard_decide(Yd.Y.conj().T @ W, c), D).errors_per_ue

    out = {}
    for m in run.methods:
        t0 = time.perf_counter()
        res = MethodOutcome()
        try:
            if m == "no_reg":
                res.errors_per_ue = errors(direct_estimate(prep, Yp, P, 0.0).W)
            elif m == "reg_data":
                est = shrinkage_coefficient(prep, data_covariance(Yd))
                alpha = est.alpha
                try:
                    W = direct_estimate(prep, Yp, P, alpha).W
                except SingularCovarianceError:
                    # Clamped to a singular R(0): lift to the same floor the iterative fit uses.
                    alpha = run.fit.alpha_floor
                    W = direct_estimate(prep, Yp, P, alpha).W
                res.alpha, res.clamp_events = alpha, int(est.clamped)
                res.errors_per_ue = errors(W)
            elif m == "reg_data_iter":
                fit = run.fit
                if fit.gradient_subset:
                    fit = FitOptions(**{**asdict(fit), "seed": seed})
                alpha, state = fit_iterative(prep, Yp, P, Yd, c, fit)
                res.alpha, res.iterations = alpha, state.iterations
                res.clamp_events = state.clamp_events
                res.trace = state if keep_trace else None
                res.errors_per_ue = errors(direct_estimate(prep, Yp, P, alpha).W)
            elif m == "reg_exh":
                alpha = fit_exhaustive_genie(prep, Yp, P, Yd, D, run.exh_step, run.exh_criterion, c)
                res.alpha = alpha
                res.errors_per_ue = errors(direct_estimate(prep, Yp, P, alpha).W)
            elif m == "perfect_csi":
                res.errors_per_ue = errors(perfect_csi_combiner(chan, kind=run.perfect_csi).W)
        except (SingularCovarianceError, np.linalg.LinAlgError):
            res.failed = True
        res.seconds = time.perf_counter() - t0
        out[m] = res
    return out


def run_trial(cfg: ScenarioConfig, trial_index: int, run: RunConfig | None = None,
              keep_trace: bool = False) -> TrialOutcome:
    """Evaluate every configured method on one shared channel/pilot/data draw.

    If any method hits a singular covariance, the whole trial is redrawn from a
    derived seed (up to three attempts in total); methods still failing on the
    last attempt are marked failed.
    """
    run = run or RunConfig(scenario=cfg, sweep=SweepSpec())
    base = trial_seed(cfg.master_seed, trial_index)
    for attempt in range(MAX_ATTEMPTS):
        methods = _evaluate(cfg, _derived_seed(base, attempt), run, keep_trace)
        if not any(r.failed for r in methods.values()):
            break
    return TrialOutcome(trial_index=trial_index, resamples=attempt, methods=methods)


@dataclass
class SweepRecord:
    method: str
    sweep_kind: str
    sweep_value: float
    trials: int
    symbol_errors: int
    total_symbols: int
    ser: float
    mean_alpha: float | None
    mean_iterations: float | None
    wallclock_s: float | None

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("a sweep record needs at least one trial")


CSV_COLUMNS = tuple(f.name for f in fields(SweepRecord))


def _run_chunk(args):
    cfg, indices, run, keep_trace = args
    return [run_trial(cfg, i, run, keep_trace) for i in indices]


def _resolve_workers(threads):
    if threads is None:
        env = os.environ.get("SHRINKCOMB_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


@dataclass
class SweepResult:
    records: list
    per_ue: list  # (method, kind, value, ue, errors, symbols)
    traces: list  # (value, trial, FitState)
    resamples: int
    failures: dict


def run_sweep(run: RunConfig, threads: int | None = None, keep_trace: bool = False,
              trials: int | None = None) -> SweepResult:
    """Run ``run.trials`` trials per sweep value and aggregate per method.

    ``threads`` worker processes share the trial list; ``None`` falls back to
    ``$SHRINKCOMB_THREADS`` and then 1. Trial ``i`` always uses the seed
    derived from ``(master_seed, i)``, whichever worker runs it.
    """
    workers = _resolve_workers(threads)
    n = int(trials or run.trials)
    records, per_ue, traces = [], [], []
    resamples, failures = 0, {}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for value in run.sweep.values:
            cfg = run.sweep.apply(run.scenario, value)
            idx = list(range(n))
            if pool is None:
                outcomes = _run_chunk((cfg, idx, run, keep_trace))
            else:
                size = max(1, math.ceil(n / (4 * workers)))
                chunks = [(cfg, idx[s:s + size], run, keep_trace) for s in range(0, n, size)]
                outcomes = [o for part in pool.map(_run_chunk, chunks) for o in part]
            outcomes.sort(key=lambda o: o.trial_index)
            resamples += sum(o.resamples for o in outcomes)
            for m in run.methods:
                ok = [o.methods[m] for o in outcomes if not o.methods[m].failed]
                nfail = n - len(ok)
                if nfail:
                    failures[(m, float(value))] = nfail
                if not ok:
                    continue
                per = np.sum([r.errors_per_ue for r in ok], axis=0)
                sym = cfg.data_len
                errs = int(per.sum())
                total = sym * cfg.num_ues * len(ok)
                alphas = [r.alpha for r in ok if r.alpha is not None]
                iters = [r.iterations for r in ok if r.iterations is not None]
                records.append(SweepRecord(
                    method=m,
                    sweep_kind=run.sweep.kind,
                    sweep_value=float(value),
                    trials=len(ok),
                    symbol_errors=errs,
                    total_symbols=total,
                    ser=errs / total,
                    mean_alpha=math.fsum(alphas) / len(alphas) if alphas else None,
                    mean_iterations=math.fsum(iters) / len(iters) if iters else None,
                    wallclock_s=math.fsum(r.seconds for r in ok),
                ))
                for k, e in enumerate(per):
                    per_ue.append((m, run.sweep.kind, float(value), k, int(e), sym * len(ok)))
            if keep_trace:
                for o in outcomes:
                    st = o.methods.get("reg_data_iter")
                    if st is not None and st.trace is not None:
                        traces.append((float(value), o.trial_index, st.trace))
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepResult(records=records, per_ue=per_ue, traces=traces,
                       resamples=resamples, failures=failures)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(records, path, timing: bool = True) -> None:
    """Write sweep records, one row each, columns in :class:`SweepRecord` field order.

    With ``timing=False`` the ``wallclock_s`` column is left empty so the file
    is byte-reproducible.
    """
    rows = []
    for r in records:
        row = [getattr(r, c) for c in CSV_COLUMNS]
        if not timing:
            row[-1] = None
        rows.append(row)
    _write_rows(path, CSV_COLUMNS, rows)


def read_csv(path) -> list[SweepRecord]:
    """Parse a file written by :func:`emit_csv` back into records."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            def opt(key):
                return float(row[key]) if row[key] != "" else None

            out.append(SweepRecord(
                method=row["method"],
                sweep_kind=row["sweep_kind"],
                sweep_value=float(row["sweep_value"]),
                trials=int(row["trials"]),
                symbol_errors=int(row["symbol_errors"]),
                total_symbols=int(row["total_symbols"]),
                ser=float(row["ser"]),
                mean_alpha=opt("mean_alpha"),
                mean_iterations=opt("mean_iterations"),
                wallclock_s=opt("wallclock_s"),
            ))
    return out


def emit_per_ue_csv(rows, path) -> None:
    _write_rows(path, ("method", "sweep_kind", "sweep_value", "ue", "symbol_errors",
                       "total_symbols", "ser"),
                [(*r, r[4] / r[5]) for r in rows])


def emit_trace_csv(traces, path) -> None:
    rows = []
    for value, trial, state in traces:
        for it, a, e, b in state.trace_rows():
            rows.append((value, trial, it, a, e, b))
    _write_rows(path, ("sweep_value", "trial", "iteration", "alpha", "eps", "beta_used"), rows)


_COLORS = {
    "no_reg": "#c0399a",
    "reg_data": "#d62728",
    "reg_data_iter": "#1f4fd6",
    "reg_exh": "#2ca02c",
    "perfect_csi": "#000000",
}


def emit_svg_plot(csv_path, svg_path) -> None:
    """Plot SER (log scale) against the sweep value, one polyline per method."""
    records = read_csv(csv_path)
    series = {}
    for r in records:
        series.setdefault(r.method, []).append((r.sweep_value, r.ser))
    W, H, left, right, top, bottom = 640, 440, 70, 20, 20, 60
    pw, ph = W - left - right, H - top - bottom
    xs = [x for pts in series.values() for x, _ in pts] or [0.0, 1.0]
    pos = [y for pts in series.values() for _, y in pts if y > 0]
    ymin = 10 ** math.floor(math.log10(min(pos))) if pos else 1e-4
    ymin = min(ymin, 1e-1)
    ymax = 1.0
    floor = ymin
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        y = max(y, floor)
        return top + (math.log10(ymax) - math.log10(y)) / (math.log10(ymax) - math.log10(ymin)) * ph

    kind = records[0].sweep_kind if records else "ue_power_dbm"
    xlabel = "UE transmit power [dBm]" if kind == "ue_power_dbm" else "pilot length"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for e in range(int(round(math.log10(ymin))), 1):
        y = py(10.0**e)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for x in sorted(set(xs)):
        X = px(x)
        out.append(f'<line x1="{X:.2f}" y1="{top}" x2="{X:.2f}" y2="{top + ph}" stroke="#eee"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 16}" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 15}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2})">SER</text>')
    for i, (m, pts) in enumerate(series.items()):
        pts = sorted(pts)
        color = _COLORS.get(m, "#888")
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline data-method="{m}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw - 130}" y1="{ly - 4}" x2="{left + pw - 110}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 104}" y="{ly}">{METHOD_LABELS.get(m, m)}</text>')
    out.append("</svg>\n")
    try:
        Path(svg_path).write_text("\n".join(out), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {svg_path}: {exc}") from exc
