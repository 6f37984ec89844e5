"""Comparison metrics, (dataset x K x model x seed) sweeps and their CSV output."""
from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .core import TrackerConfig
from .dataio import load_orlib, split, to_returns
from .errors import HalftrackError, IoFailure, ZeroBaseline
from .pipeline import MODELS, track

log = logging.getLogger(__name__)

CSV_HEADER = ["dataset", "n_stocks", "k", "model", "tei", "teo", "cons", "supo", "seed", "iterations", "runtime_ms"]
PLOT_METRICS = ("tei", "teo", "cons")
MEDIAN = "median"


def published_tables_path() -> Path:
    """Location of the shipped table constants (TEI/TEO per dataset, K and model)."""
    return Path(str(resources.files("halftrack") / "data" / "published_tables.csv"))


def cons(tei: float, teo: float) -> float:
    """In/out-of-sample consistency ``|tei - teo|``."""
    if tei < 0 or teo < 0:
        raise ValueError(f"tracking errors must be >= 0, got {tei}, {teo}")
    return abs(tei - teo)


def supo(teo1: float, teo2: float) -> float:
    """Out-of-sample superiority of model 2 over model 1, in percent."""
    if teo1 <= 0:
        raise ZeroBaseline(f"baseline out-of-sample error must be > 0, got {teo1}")
    return (teo1 - teo2) / teo1 * 100.0


def load_reference(path=None, model: str = "evolutionary") -> dict[tuple[str, int], float]:
    """Map ``(dataset, k)`` to the reference TEO of ``model`` from a constants file."""
    path = Path(path) if path is not None else published_tables_path()
    out: dict[tuple[str, int], float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["model"] != model:
                continue
            out.setdefault((row["dataset"], int(row["k"])), float(row["teo"]))
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: list[tuple[str, str]]
    k_values: list[int]
    models: list[str]
    cfg: TrackerConfig = field(default_factory=lambda: TrackerConfig(k=5))
    reference_table: str | None = None
    reference_model: str = "evolutionary"
    seeds: list[int] = field(default_factory=lambda: [42])
    split_count: int | None = None

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("no datasets given")
        if not self.k_values:
            raise ValueError("no K values given")
        if not self.models:
            raise ValueError("no models given")
        if not self.seeds:
            raise ValueError("no seeds given")
        for m in self.models:
            if m not in MODELS:
                raise ValueError(f"unknown model {m!r}; expected one of {MODELS}")
        for _, layout in self.datasets:
            if layout is None:
                raise ValueError("every dataset needs a layout")
        for k in self.k_values:
            if not self.cfg.bounds.feasible_for(k):
                raise ValueError(
                    f"K={k} is infeasible for bounds [{self.cfg.bounds.eta}, {self.cfg.bounds.delta}]"
                )


@dataclass
class ResultRow:
    dataset: str
    n_stocks: int | None
    k: int
    model: str
    tei: float | None
    teo: float | None
    cons: float | None
    supo: float | None
    seed: int | str
    iterations: int | None
    runtime_ms: float | None
    error: str | None = None
    support: list[int] = field(default_factory=list)

    def sort_key(self):
        seed = (1, 0) if self.seed == MEDIAN else (0, int(self.seed))
        return (self.dataset, self.k, self.model, seed)


def _dataset_name(path: str) -> str:
    return Path(path).stem


def _run_cell(args) -> ResultRow:
    path, layout, k, model, seed, cfg, split_count, jobs = args
    name = _dataset_name(path)
    try:
        data = split(to_returns(load_orlib(path, layout)), split_count)
        cell_cfg = replace(cfg, k=k, seed=seed)
        res = track(model, data, cell_cfg, jobs=jobs)
    except HalftrackError as exc:
        log.warning("%s K=%d %s seed=%s failed: %s", name, k, model, seed, exc)
        return ResultRow(name, None, k, model, None, None, None, None, seed, None, None,
                         error=f"{type(exc).__name__}: {exc}")
    return ResultRow(name, data.n_stocks, k, model, res.tei, res.teo, res.cons, None, seed,
                     res.iterations, res.runtime_ms, support=res.support)


def _median_row(group: list[ResultRow]) -> ResultRow:
    ok = [r for r in group if r.error is None]
    first = group[0]
    if not ok:
        return replace(first, seed=MEDIAN)
    tei = statistics.median(r.tei for r in ok)
    teo = statistics.median(r.teo for r in ok)
    return ResultRow(
        first.dataset, ok[0].n_stocks, first.k, first.model, tei, teo, cons(tei, teo), None, MEDIAN,
        int(statistics.median(r.iterations for r in ok)),
        statistics.median(r.runtime_ms for r in ok),
    )


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[ResultRow]:
    """Run every (dataset, K, model, seed) cell; failures become error rows.

    With several seeds the thresholding stage starts from seeded random
    points (otherwise every seed would give the same row) and a median row
    is appended per cell.
    """
    cfg = spec.cfg
    if len(spec.seeds) > 1:
        cfg = replace(cfg, init="seeded-random")
    cells = [
        (path, layout, k, model, seed, cfg, spec.split_count, 1)
        for path, layout in spec.datasets
        for k in spec.k_values
        for model in spec.models
        for seed in spec.seeds
    ]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]

    if len(spec.seeds) > 1:
        groups: dict[tuple, list[ResultRow]] = {}
        for r in rows:
            groups.setdefault((r.dataset, r.k, r.model), []).append(r)
        rows.extend(_median_row(g) for g in groups.values())

    if spec.reference_table is not None:
        ref = load_reference(spec.reference_table, spec.reference_model)
        for r in rows:
            base = ref.get((r.dataset, r.k))
            if base is not None and r.teo is not None:
                r.supo = supo(base, r.teo)
    rows.sort(key=ResultRow.sort_key)
    return rows


def _sci(x) -> str:
    return "" if x is None else f"{x:.5e}"


def _int(x) -> str:
    return "" if x is None else str(int(x))


def format_csv(rows: list[ResultRow], timing: bool = False) -> str:
    """CSV text with a fixed header; floats in 6-significant-digit scientific
    notation. ``runtime_ms`` stays empty unless ``timing`` is set, which keeps
    repeated sweeps byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([
            r.dataset, _int(r.n_stocks), r.k, r.model,
            _sci(r.tei), _sci(r.teo), _sci(r.cons), _sci(r.supo),
            r.seed, _int(r.iterations), _sci(r.runtime_ms) if timing else "",
        ])
    return buf.getvalue()


def emit_csv(rows: list[ResultRow], destination, timing: bool = False) -> Path:
    if not rows:
        raise ValueError("no rows to write")
    destination = Path(destination)
    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_text(format_csv(rows, timing=timing))
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc
    return destination


def emit_plot_series(rows: list[ResultRow], destination) -> list[Path]:
    """One CSV per (dataset, metric) with columns ``k,<model>,...``.

    Multi-seed sweeps contribute their median rows only.
    """
    if not rows:
        raise ValueError("no rows to write")
    out_dir = Path(destination)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc
    has_median = any(r.seed == MEDIAN for r in rows)
    picked = [r for r in rows if (r.seed == MEDIAN) == has_median]
    written = []
    for dataset in sorted({r.dataset for r in picked}):
        sub = [r for r in picked if r.dataset == dataset]
        models = [m for m in MODELS if any(r.model == m for r in sub)]
        ks = sorted({r.k for r in sub})
        cell = {(r.k, r.model): r for r in sub}
        for metric in PLOT_METRICS:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["k", *models])
            for k in ks:
                w.writerow([k, *(_sci(getattr(cell[(k, m)], metric)) if (k, m) in cell else "" for m in models)])
            path = out_dir / f"{dataset}_{metric}.csv"
            try:
                path.write_text(buf.getvalue())
            except OSError as exc:
                raise IoFailure(f"cannot write {path}: {exc}") from exc
            written.append(path)
    return written
