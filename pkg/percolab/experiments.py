"""Config-driven Monte-Carlo campaigns.

A campaign is a flat key-value file: generator keys, `grid.<key> = v1,v2,...`
lines that span the parameter grid, and run keys (`replicates`, `seed`,
`observables`, `out`, ...). Every (grid point, replicate) task gets its own
stream, derived from (seed, grid index, replicate), so results do not depend
on the order the pool runs tasks in.
"""
from __future__ import annotations

import configparser
import itertools
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from . import analysis
from .generators import generate, sampler_options
from .graph import Graph, clustering_coefficient, components
from .params import (Boundary, HetLrpParams, LatticeBox, ModelSpec, ParameterError,
                     spec_from_mapping)
from .rng import RngStream, derive_stream
from .theory import (DistanceRegime, LambdaCRegime, classify_regime, distance_exponent,
                     homogeneous_distance_regime, loglog_upper_coefficient)

log = logging.getLogger(__name__)


# --- observables -------------------------------------------------------------------

def _largest_fraction(g, spec, box, rng):
    return components(g).largest_size / g.num_nodes if g.num_nodes else math.nan


def _crossing(g, spec, box, rng):
    if box is None:
        raise ParameterError('observables', "crossing needs a lattice model")
    return float(analysis.spans(g, box))


def _origin_degree(g, spec, box, rng):
    if not getattr(spec, 'plant_origin', False):
        raise ParameterError('observables', "origin_degree needs plant_origin = true")
    return float(g.degrees()[0])


Observable = Callable[[Graph, ModelSpec, 'LatticeBox | None', RngStream], float]

OBSERVABLES: dict[str, Observable] = {
    'num_edges': lambda g, spec, box, rng: float(g.num_edges),
    'mean_degree': lambda g, spec, box, rng: float(g.degrees().mean()) if g.num_nodes else math.nan,
    'largest_size': lambda g, spec, box, rng: float(components(g).largest_size),
    'largest_fraction': _largest_fraction,
    'num_components': lambda g, spec, box, rng: float(components(g).num_components),
    'clustering': lambda g, spec, box, rng: clustering_coefficient(g),
    'crossing': _crossing,
    'tail_tau': lambda g, spec, box, rng: analysis.degree_tail(g, rng).tau_hat,
    'typical_distance': lambda g, spec, box, rng: analysis.typical_distance(g, 50, rng.generator('pairs')),
    'origin_degree': _origin_degree,
}


# --- configuration -----------------------------------------------------------------

RUN_KEYS = ('seed', 'replicates', 'observables', 'out', 'threads', 'timing', 'method')


def _split_list(text: str) -> list[str]:
    return [tok.strip() for tok in str(text).split(',') if tok.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    base: dict[str, str]
    grid: dict[str, list[str]] = field(default_factory=dict)
    replicates: int = 1
    seed: int = 0
    observables: tuple[str, ...] = ('largest_fraction',)
    out: Path = Path('sweep')
    threads: int | None = None
    timing: bool = False
    method: str | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ParameterError('replicates', f"must be >= 1, got {self.replicates}")
        if not self.observables:
            raise ParameterError('observables', "need at least one observable")
        unknown = [o for o in self.observables if o not in OBSERVABLES]
        if unknown:
            raise ParameterError('observables', f"unknown observable(s) {', '.join(unknown)}; "
                                                f"choose from {', '.join(OBSERVABLES)}")
        for key, values in self.grid.items():
            if not values:
                raise ParameterError(f"grid.{key}", "grid lists must not be empty")
        if 'model' not in self.base and 'model' not in self.grid:
            raise ParameterError('model', "required")
        if self.threads is not None and self.threads < 1:
            raise ParameterError('threads', f"must be >= 1, got {self.threads}")

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> ExperimentConfig:
        if 'stream' in values:
            raise ParameterError('stream', "sweeps derive one stream per task from the seed; drop this key")
        base, grid, run = {}, {}, {}
        for key, raw in values.items():
            if key.startswith('grid.'):
                grid[key[5:]] = _split_list(raw)
            elif key in RUN_KEYS:
                run[key] = raw
            else:
                base[key] = str(raw).strip()
        kwargs: dict[str, Any] = {'base': base, 'grid': dict(sorted(grid.items()))}
        try:
            if 'replicates' in run:
                kwargs['replicates'] = int(run['replicates'])
            if 'seed' in run:
                kwargs['seed'] = int(run['seed'])
            if 'threads' in run and str(run['threads']).strip():
                kwargs['threads'] = int(run['threads'])
        except ValueError as exc:
            raise ParameterError(next(k for k in ('replicates', 'seed', 'threads') if k in run),
                                 f"not an integer: {exc}") from exc
        if 'observables' in run:
            kwargs['observables'] = tuple(_split_list(run['observables']))
        if 'out' in run:
            kwargs['out'] = Path(str(run['out']).strip())
        if 'timing' in run:
            kwargs['timing'] = str(run['timing']).strip().lower() in ('1', 'true', 'yes', 'on')
        if run.get('method'):
            kwargs['method'] = str(run['method']).strip()
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        """Read a flat `key = value` file; `#` starts a comment line."""
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=('#',),
                                           inline_comment_prefixes=('#',))
        parser.optionxform = str
        text = Path(path).read_text(encoding='utf-8')
        parser.read_string('[experiment]\n' + text, source=str(path))
        return cls.from_mapping(dict(parser['experiment']))

    def grid_points(self) -> list[dict[str, str]]:
        """Every grid point as a full flat mapping, in grid-index order."""
        keys = list(self.grid)
        points = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            point = dict(self.base)
            point.update(zip(keys, combo))
            points.append(point)
        return points

    def echo(self) -> dict[str, Any]:
        out: dict[str, Any] = dict(self.base)
        out.update({f"grid.{k}": ','.join(v) for k, v in self.grid.items()})
        out.update(replicates=self.replicates, seed=self.seed, observables=','.join(self.observables),
                   out=str(self.out), threads=self.threads, timing=self.timing, method=self.method)
        return out


# --- records -----------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRecord:
    params: dict[str, str]
    seed: int
    stream: int
    observable: str
    value: float | None
    walltime_ms: float | None = None
    error: str | None = None
    grid_index: int = 0
    replicate: int = 0


@dataclass(frozen=True)
class SweepTask:
    grid_index: int
    replicate: int
    point: dict[str, str]
    seed: int
    observables: tuple[str, ...]
    timing: bool = False
    method: str | None = None

    @property
    def stream(self) -> int:
        return derive_stream(self.seed, self.grid_index, self.replicate)


def run_task(task: SweepTask) -> list[ResultRecord]:
    """Evaluate every observable of one (grid point, replicate)."""
    rng = RngStream(task.seed, task.stream)

    def record(obs, value=None, ms=None, error=None):
        return ResultRecord(task.point, task.seed, task.stream, obs, value, ms, error,
                            task.grid_index, task.replicate)

    try:
        spec, box = spec_from_mapping(task.point)
        g = generate(spec, box, rng, **sampler_options(spec, task.method))
    except Exception as exc:
        log.warning('grid point %d replicate %d failed: %s', task.grid_index, task.replicate, exc)
        return [record(obs, error=f"{type(exc).__name__}: {exc}") for obs in task.observables]
    rows = []
    for obs in task.observables:
        start = time.perf_counter()
        try:
            value = float(OBSERVABLES[obs](g, spec, box, rng))
        except Exception as exc:
            log.warning('observable %s at grid point %d failed: %s', obs, task.grid_index, exc)
            rows.append(record(obs, error=f"{type(exc).__name__}: {exc}"))
            continue
        ms = (time.perf_counter() - start) * 1e3 if task.timing else None
        rows.append(record(obs, None if math.isnan(value) else value, ms))
    return rows


def pool_map(fn: Callable, tasks: Sequence, threads: int | None = None) -> list:
    """Map over a process pool, or inline for a single worker."""
    workers = threads or os.cpu_count() or 1
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def regenerate(record: ResultRecord, method: str | None = None) -> Graph:
    """Rebuild the graph a record was measured on from its params and stream."""
    spec, box = spec_from_mapping(record.params)
    return generate(spec, box, RngStream(record.seed, record.stream), **sampler_options(spec, method))


# --- persistence -------------------------------------------------------------------

FIXED_COLUMNS = ('seed', 'stream', 'observable', 'value', 'walltime_ms', 'error')


def records_frame(records: Iterable[ResultRecord]) -> pd.DataFrame:
    records = sorted(records, key=lambda r: (r.grid_index, r.replicate, r.observable))
    keys = sorted({k for r in records for k in r.params}, key=lambda k: (k.lower(), k))
    rows = []
    for r in records:
        row = {k: r.params.get(k) for k in keys}
        row.update(seed=r.seed, stream=r.stream, observable=r.observable, value=r.value,
                   walltime_ms=r.walltime_ms, error=r.error)
        rows.append(row)
    return pd.DataFrame(rows, columns=[*keys, *FIXED_COLUMNS])


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(frame: pd.DataFrame, path: Path):
    _atomic_write(path, frame.to_csv(index=False, na_rep='', lineterminator='\n'))


def summarise(frame: pd.DataFrame) -> list[dict[str, Any]]:
    """Per (grid point, observable): count, NA count, mean, std, min, max."""
    params = [c for c in frame.columns if c not in FIXED_COLUMNS]
    keyed = frame.assign(_point=frame[params].astype(str).agg('|'.join, axis=1) if params else '')
    out = []
    for (_, obs), grp in keyed.groupby(['_point', 'observable'], sort=False):
        vals = pd.to_numeric(grp['value'], errors='coerce').dropna()
        entry = {k: grp[k].iloc[0] for k in params}
        entry.update(observable=obs, count=int(vals.size), na=int(grp.shape[0] - vals.size),
                     mean=float(vals.mean()) if vals.size else None,
                     std=float(vals.std(ddof=1)) if vals.size > 1 else None,
                     min=float(vals.min()) if vals.size else None,
                     max=float(vals.max()) if vals.size else None)
        out.append(entry)
    return out


@dataclass(frozen=True)
class SweepResult:
    records: list[ResultRecord]
    csv_path: Path
    summary_path: Path


def output_paths(out: Path) -> tuple[Path, Path]:
    out = Path(out)
    return out.with_name(out.name + '.csv'), out.with_name(out.name + '.summary.json')


def run_sweep(config: ExperimentConfig, threads: int | None = None) -> SweepResult:
    """Run every (grid point, replicate), then write `<out>.csv` and `<out>.summary.json`."""
    points = config.grid_points()
    tasks = [SweepTask(gi, rep, point, config.seed, config.observables, config.timing, config.method)
             for gi, point in enumerate(points) for rep in range(config.replicates)]
    log.info('sweep: %d grid points x %d replicates, %d observables',
             len(points), config.replicates, len(config.observables))
    records = [r for rows in pool_map(run_task, tasks, threads or config.threads) for r in rows]
    frame = records_frame(records)
    csv_path, summary_path = output_paths(config.out)
    write_csv(frame, csv_path)
    failed = sum(r.error is not None for r in records)
    summary = {'config': config.echo(), 'rows': len(records), 'failed_rows': failed,
               'aggregates': summarise(frame)}
    _atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True, default=str) + '\n')
    log.info('wrote %s (%d rows, %d failed)', csv_path, len(records), failed)
    return SweepResult(sorted(records, key=lambda r: (r.grid_index, r.replicate, r.observable)),
                       csv_path, summary_path)


# --- phase diagram -------------------------------------------------------------------

def trend(sides: Sequence[int], indicators: np.ndarray, level: float = 0.05) -> tuple[str, float, float]:
    """Kendall trend of crossing indicators against box side.

    `indicators` has one row per side, one column per replicate. Returns
    ('increasing' | 'decreasing' | 'flat', tau, p-value).
    """
    x = np.repeat(np.asarray(sides, dtype=np.float64), indicators.shape[1])
    y = np.asarray(indicators, dtype=np.float64).ravel()
    if np.all(y == y[0]):
        return 'flat', 0.0, 1.0
    res = stats.kendalltau(x, y)
    tau, pval = float(res.statistic), float(res.pvalue)
    if math.isnan(tau) or pval >= level:
        return 'flat', tau, pval
    return ('increasing' if tau > 0 else 'decreasing'), tau, pval


def lambda_c_signature(trends: Sequence[str]) -> str:
    """Read the lambda_c signature off the trends at increasing lambda."""
    dec = [i for i, t in enumerate(trends) if t == 'decreasing']
    inc = [i for i, t in enumerate(trends) if t == 'increasing']
    if dec and inc and min(dec) < max(inc):
        return LambdaCRegime.POSITIVE_FINITE.value
    if inc and not dec:
        return LambdaCRegime.ZERO.value
    if dec and not inc:
        return LambdaCRegime.INFINITE.value
    return 'inconclusive'


@dataclass(frozen=True)
class _CrossingTask:
    d: int
    alpha: float
    beta: float
    side: int
    lambdas: tuple[float, ...]
    replicates: int
    seed: int
    stream: int


def _crossing_indicators(task: _CrossingTask) -> np.ndarray:
    box = LatticeBox(task.d, task.side, Boundary.FREE)
    lam_max = max(task.lambdas)
    spec = HetLrpParams(lam=lam_max, alpha=task.alpha, beta=task.beta)
    t = analysis.crossing_thresholds(spec, box, task.replicates, RngStream(task.seed, task.stream), cap=lam_max)
    return t[None, :] <= np.asarray(task.lambdas)[:, None]


def phase_diagram(d: int, alphas: Sequence[float], betas: Sequence[float], lambdas: Sequence[float],
                  sides: Sequence[int], replicates: int, seed: int,
                  threads: int | None = None) -> pd.DataFrame:
    """Crossing-probability size trends per (alpha, beta, lambda) and the cell's lambda_c signature.

    One row per (alpha, beta, lambda). Within a cell the replicates at every
    lambda share their pair clocks, so the lambda direction is exactly coupled.
    """
    lambdas = tuple(sorted(float(x) for x in lambdas))
    sides = sorted(int(s) for s in sides)
    cells = list(itertools.product([float(a) for a in alphas], [float(b) for b in betas]))
    tasks = [_CrossingTask(d, a, b, side, lambdas, replicates, seed, derive_stream(seed, ci, si))
             for ci, (a, b) in enumerate(cells) for si, side in enumerate(sides)]
    results = iter(pool_map(_crossing_indicators, tasks, threads))
    rows = []
    for a, b in cells:
        per_side = np.stack([next(results) for _ in sides])  # (side, lambda, replicate)
        predicted = classify_regime(d, a, b)
        cell_rows = []
        for j, lam in enumerate(lambdas):
            direction, tau, pval = trend(sides, per_side[:, j, :])
            row = {'d': d, 'alpha': a, 'beta': b, 'lambda': lam, 'trend': direction,
                   'kendall_tau': tau, 'p_value': pval}
            row.update({f"crossing_N{side}": float(per_side[k, j].mean()) for k, side in enumerate(sides)})
            cell_rows.append(row)
        signature = lambda_c_signature([r['trend'] for r in cell_rows])
        expected = predicted.lambda_c_regime.value
        for row in cell_rows:
            row.update(signature=signature, predicted=expected,
                       agrees=None if predicted.lambda_c_regime is LambdaCRegime.BOUNDARY
                       else signature == expected)
        log.info('cell alpha=%g beta=%g: signature %s, predicted %s', a, b, signature, expected)
        rows.extend(cell_rows)
    return pd.DataFrame(rows)


# --- distance regimes ----------------------------------------------------------------

GROWTH_LAWS = ('loglog', 'polylog', 'linear')


def _fit_affine(x: np.ndarray, y: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return lambda z: coef[0] + coef[1] * z


def _fit_law(law: str, r: np.ndarray, m: np.ndarray, delta: float | None):
    if law == 'loglog':
        f = _fit_affine(np.log(np.log(r)), m)
        return lambda z: f(np.log(np.log(z)))
    if law == 'linear':
        return _fit_affine(r, m)
    f = _fit_affine(np.log(r) ** delta, m)
    return lambda z: f(np.log(z) ** delta)


def growth_law_scores(radii: Sequence[float], medians: Sequence[float],
                      delta: float | None = None) -> dict[str, float]:
    """Leave-one-radius-out mean squared prediction error of each growth law.

    The (ln r)^delta law is only scored when delta is given; it is defined
    for alpha in (d, 2d) alone.
    """
    r = np.asarray(radii, dtype=np.float64)
    m = np.asarray(medians, dtype=np.float64)
    if r.size < 3:
        raise ValueError("need at least 3 radii to compare growth laws")
    if (r <= 1).any():
        raise ValueError("radii must exceed 1 for log log r")
    scores = {}
    for law in GROWTH_LAWS:
        if law == 'polylog' and delta is None:
            continue
        errs = []
        for i in range(r.size):
            keep = np.arange(r.size) != i
            pred = _fit_law(law, r[keep], m[keep], delta)(r[i:i + 1])[0]
            errs.append((pred - m[i]) ** 2)
        scores[law] = float(np.mean(errs))
    return scores


@dataclass(frozen=True)
class DistanceCell:
    spec: ModelSpec
    box: LatticeBox
    label: str = ''


def _theory_for(cell: DistanceCell) -> dict[str, Any]:
    d, spec = cell.box.d, cell.spec
    alpha = spec.alpha
    beta = getattr(spec, 'beta', math.inf)
    if math.isinf(beta):
        regime = homogeneous_distance_regime(d, alpha)
    else:
        regime = classify_regime(d, alpha, beta).distance_regime
    delta = distance_exponent(d, alpha) if d < alpha < 2 * d else None
    coeff = None
    if not math.isinf(beta) and d < beta * alpha < 2 * d:
        coeff = loglog_upper_coefficient(d, alpha, beta)
    return {'predicted': regime.value if isinstance(regime, DistanceRegime) else str(regime),
            'delta': delta, 'loglog_coefficient': coeff}


def distance_regimes(cells: Sequence[DistanceCell], radii: Sequence[float], pairs: int, replicates: int,
                     seed: int, min_pairs: int = 30, method: str | None = None) -> pd.DataFrame:
    """Fit the smoothed median chemical distance against ln ln r, (ln r)^Delta and r for each cell.

    Hop counts are integers, so the median is interpolated inside its unit
    class before fitting. The winner is the law with the smallest
    leave-one-radius-out error, and only when it is strictly smaller than the
    others. Cells with fewer than `min_pairs` pairs at some radius are
    INSUFFICIENT.
    """
    rows = []
    for ci, cell in enumerate(cells):
        theory = _theory_for(cell)
        opts = sampler_options(cell.spec, method)
        profile = analysis.chemical_distance_profile(cell.spec, cell.box, radii, pairs,
                                                     RngStream(seed, derive_stream(seed, ci)),
                                                     replicates=replicates, **opts)
        row: dict[str, Any] = {'cell': cell.label or f"{cell.spec.model}#{ci}", 'model': cell.spec.model,
                               'd': cell.box.d, 'side': cell.box.side, **theory}
        row.update({f"median_r{p.radius:g}": p.median for p in profile})
        row.update({f"smoothed_r{p.radius:g}": p.smoothed_median for p in profile})
        row.update({f"pairs_r{p.radius:g}": p.count for p in profile})
        if any(p.count < min_pairs for p in profile):
            row.update(status='INSUFFICIENT', best=None)
            log.warning('cell %s: fewer than %d pairs at some radius', row['cell'], min_pairs)
        else:
            scores = growth_law_scores([p.radius for p in profile], [p.smoothed_median for p in profile],
                                       theory['delta'])
            ranked = sorted(scores, key=scores.get)
            strict = scores[ranked[0]] < scores[ranked[1]]
            row.update({f"score_{k}": v for k, v in scores.items()})
            row.update(status='OK' if strict else 'TIE', best=ranked[0] if strict else None)
        rows.append(row)
    return pd.DataFrame(rows)
