"""Two-stage OMC design search: mirror-cell grid search, then a GA over the taper."""
from __future__ import annotations

import functools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quantities import TWO_PI, AngularFrequency
from .surrogate import (
    BandGap,
    CavitySolution,
    DesignVector,
    MaterialParams,
    SurrogateError,
    UnitCellGeometry,
    cell_layers,
    cavity_response,
    find_bandgap,
)


class InfeasibleError(RuntimeError):
    def __init__(self, message, trace=None, partial=None):
        super().__init__(message)
        self.trace = trace
        self.partial = partial


INFEASIBLE_GENERATIONS = 5


def gaussian_window(omega, mu, sigma):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return math.exp(-((omega - mu) ** 2) / (2.0 * sigma ** 2))


@dataclass(frozen=True)
class FitnessWindows:
    mu_o: AngularFrequency
    delta_o: AngularFrequency
    mu_m: AngularFrequency
    delta_m: AngularFrequency

    def __post_init__(self):
        if not (self.delta_o > 0 and self.delta_m > 0):
            raise ValueError("band-gap widths must be positive")

    @property
    def sigma_o(self) -> float:
        return self.delta_o / 6.0

    @property
    def sigma_m(self) -> float:
        return self.delta_m / 6.0

    @classmethod
    def from_gaps(cls, optical: BandGap, acoustic: BandGap) -> "FitnessWindows":
        return cls(optical.mu, optical.delta, acoustic.mu, acoustic.delta)


def fitness_terms(sol: CavitySolution, win: FitnessWindows) -> dict[str, float]:
    return {
        "g0": float(sol.g0),
        "q_o": float(sol.q_o),
        "window_optical": gaussian_window(sol.omega_o, win.mu_o, win.sigma_o),
        "window_mechanical": gaussian_window(sol.omega_m, win.mu_m, win.sigma_m),
    }


def fitness(sol: CavitySolution, win: FitnessWindows) -> float:
    """g0 * Qo weighted by Gaussian windows centred on each band gap (sigma = width / 6)."""
    t = fitness_terms(sol, win)
    return t["g0"] * t["q_o"] * t["window_optical"] * t["window_mechanical"]


# ---------------------------------------------------------------- grid stage

@dataclass(frozen=True)
class GridSpec:
    """Inclusive (lo, hi, steps) ranges for a, hx, hy in nm; w and t fixed."""

    a: tuple[float, float, int]
    hx: tuple[float, float, int]
    hy: tuple[float, float, int]
    w: float = 800.0
    t: float = 250.0

    def __post_init__(self):
        for name in ("a", "hx", "hy"):
            lo, hi, n = getattr(self, name)
            if int(n) < 1 or hi < lo or (int(n) == 1 and hi != lo):
                raise ValueError(f"grid axis {name}: need steps >= 1 and lo <= hi (lo == hi for one step)")
        list(self.cells())  # UnitCellGeometry validates each point

    def axis(self, name: str) -> np.ndarray:
        lo, hi, n = getattr(self, name)
        return np.linspace(lo, hi, int(n))

    def cells(self):
        for a in self.axis("a"):
            for hx in self.axis("hx"):
                for hy in self.axis("hy"):
                    yield UnitCellGeometry(float(a), self.w, float(hx), float(hy), self.t)

    @classmethod
    def around(cls, cell: UnitCellGeometry, rel: float = 0.1, steps: int = 5) -> "GridSpec":
        def ax(v):
            return (v * (1 - rel), v * (1 + rel), steps)
        return cls(ax(cell.a), ax(cell.hx), ax(cell.hy), cell.w, cell.t)


@dataclass
class GridRow:
    cell: UnitCellGeometry
    optical_gap: BandGap | None
    acoustic_gap: BandGap | None
    objective: float | None

    @property
    def key(self):
        return (self.cell.a, self.cell.hx, self.cell.hy)


@dataclass
class GridResult:
    best: UnitCellGeometry
    best_row: GridRow
    table: list[GridRow]


def _gap_or_none(layers):
    try:
        return find_bandgap(layers)
    except SurrogateError:
        return None


def evaluate_mirror_cell(cell: UnitCellGeometry, mat: MaterialParams) -> GridRow:
    og = _gap_or_none(cell_layers(cell, mat, "optical"))
    ag = _gap_or_none(cell_layers(cell, mat, "acoustic"))
    obj = og.fractional * ag.fractional if (og and ag) else None
    return GridRow(cell, og, ag, obj)


def argmax_rows(rows: Sequence[GridRow]) -> GridRow | None:
    """Largest objective; ties go to the lexicographically smallest (a, hx, hy)."""
    best = None
    for r in rows:
        if r.objective is None:
            continue
        if best is None or r.objective > best.objective or (
                r.objective == best.objective and r.key < best.key):
            best = r
    return best


def grid_search_mirror(grid: GridSpec, mat: MaterialParams = MaterialParams()) -> GridResult:
    """Exhaustive search maximizing the product of optical and acoustic fractional gaps."""
    table = [evaluate_mirror_cell(c, mat) for c in grid.cells()]
    best = argmax_rows(table)
    if best is None:
        partial = sorted(table, key=lambda r: -max(
            r.optical_gap.fractional if r.optical_gap else 0.0,
            r.acoustic_gap.fractional if r.acoustic_gap else 0.0))[:5]
        desc = "; ".join(
            f"(a={r.cell.a:g}, hx={r.cell.hx:g}, hy={r.cell.hy:g}) optical={'open' if r.optical_gap else 'closed'} "
            f"acoustic={'open' if r.acoustic_gap else 'closed'}" for r in partial)
        raise InfeasibleError(f"no grid point opens both band gaps; best partial results: {desc}",
                              partial=partial)
    return GridResult(best.cell, best, table)


# ---------------------------------------------------------------- GA stage

@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 100
    crossover_fraction: float = 0.9
    mutation_rate: float = 0.1
    mutation_scale: float = 0.05
    elitism_count: int = 2
    rng_seed: int = 0
    parallel_evaluations: int = 1

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        for name in ("crossover_fraction", "mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.generations < 1 or self.parallel_evaluations < 1 or self.mutation_scale < 0:
            raise ValueError("generations and parallel_evaluations must be >= 1, mutation_scale >= 0")


@dataclass
class Evaluation:
    fitness: float
    info: dict = field(default_factory=dict)
    failure: str | None = None


@dataclass
class EvaluationRecord:
    generation: int
    index: int
    genes: list[float]
    evaluation: Evaluation

    def to_json(self) -> str:
        rec = {"record": "evaluation", "generation": self.generation, "index": self.index,
               "genes": [float(g) for g in self.genes],
               "fitness": float(self.evaluation.fitness),
               "failure": self.evaluation.failure}
        rec.update({k: float(v) for k, v in self.evaluation.info.items()})
        return json.dumps(rec, sort_keys=True)


@dataclass
class GenerationSummary:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_genes: list[float]

    def to_json(self) -> str:
        return json.dumps({"record": "generation", "generation": self.generation,
                           "best_fitness": float(self.best_fitness), "mean_fitness": float(self.mean_fitness),
                           "best_genes": [float(g) for g in self.best_genes]}, sort_keys=True)


@dataclass
class OptimizationTrace:
    generations: list[GenerationSummary] = field(default_factory=list)
    evaluations: list[EvaluationRecord] = field(default_factory=list)

    @property
    def best_fitness(self) -> list[float]:
        return [g.best_fitness for g in self.generations]

    def to_jsonl(self) -> str:
        """One line per evaluation; each generation's summary follows its evaluations."""
        lines = []
        k = 0
        for summary in self.generations:
            while k < len(self.evaluations) and self.evaluations[k].generation <= summary.generation:
                lines.append(self.evaluations[k].to_json())
                k += 1
            lines.append(summary.to_json())
        lines.extend(r.to_json() for r in self.evaluations[k:])
        return "".join(line + "\n" for line in lines)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())


@dataclass
class GaResult:
    best_genes: np.ndarray
    best: Evaluation
    trace: OptimizationTrace
    n_evaluations: int


def _as_evaluation(v) -> Evaluation:
    return v if isinstance(v, Evaluation) else Evaluation(float(v))


def effective_workers(requested: int) -> int:
    cap = os.environ.get("OMC_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise ValueError(f"OMC_THREADS must be an integer, got {cap!r}") from None
    return requested


def _tournament(rng, fit, k=3) -> int:
    idx = rng.integers(0, fit.size, size=k)
    return int(idx[np.argmax(fit[idx])])


def run_ga(objective: Callable[[np.ndarray], "float | Evaluation"], lower, upper, cfg: GaConfig) -> GaResult:
    """Generational real-coded GA maximizing ``objective``.

    Tournament selection (size 3), uniform crossover, per-gene Gaussian
    mutation clamped to the box, elitism. All randomness comes from one
    generator seeded by ``cfg.rng_seed`` in the calling thread; evaluations may
    run in worker processes but results are merged by individual index.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    width = upper - lower
    if np.any(width < 0):
        raise ValueError("bounds need lower <= upper")
    rng = np.random.default_rng(cfg.rng_seed)
    pop = lower + rng.random((cfg.population_size, lower.size)) * width
    known: list[Evaluation | None] = [None] * cfg.population_size
    trace = OptimizationTrace()
    workers = effective_workers(cfg.parallel_evaluations)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    n_eval = 0
    infeasible_run = 0
    try:
        for gen in range(cfg.generations):
            todo = [i for i, e in enumerate(known) if e is None]
            genes = [pop[i] for i in todo]
            results = list(pool.map(objective, genes)) if pool else [objective(g) for g in genes]
            for i, r in zip(todo, results):
                known[i] = _as_evaluation(r)
                trace.evaluations.append(EvaluationRecord(gen, i, pop[i].tolist(), known[i]))
            n_eval += len(todo)
            fit = np.array([e.fitness for e in known])
            b = int(np.argmax(fit))
            trace.generations.append(GenerationSummary(gen, float(fit[b]), float(fit.mean()), pop[b].tolist()))

            infeasible_run = infeasible_run + 1 if all(e.failure for e in known) else 0
            if infeasible_run >= INFEASIBLE_GENERATIONS:
                raise InfeasibleError(
                    f"infeasible region: every individual failed for {INFEASIBLE_GENERATIONS} consecutive generations",
                    trace=trace)
            if gen == cfg.generations - 1:
                break

            order = np.argsort(-fit, kind="stable")
            new_pop = [pop[i].copy() for i in order[:cfg.elitism_count]]
            new_known = [known[i] for i in order[:cfg.elitism_count]]
            while len(new_pop) < cfg.population_size:
                p1 = pop[_tournament(rng, fit)]
                p2 = pop[_tournament(rng, fit)]
                if rng.random() < cfg.crossover_fraction:
                    child = np.where(rng.random(lower.size) < 0.5, p1, p2)
                else:
                    child = p1.copy()
                mutate = rng.random(lower.size) < cfg.mutation_rate
                child = child + mutate * rng.normal(0.0, 1.0, lower.size) * cfg.mutation_scale * width
                new_pop.append(np.clip(child, lower, upper))
                new_known.append(None)
            pop = np.array(new_pop)
            known = new_known
    finally:
        if pool:
            pool.shutdown()
    fit = np.array([e.fitness for e in known])
    b = int(np.argmax(fit))
    return GaResult(pop[b].copy(), known[b], trace, n_eval)


def random_search(objective, lower, upper, budget: int, seed: int = 0):
    """Uniform random sampling baseline; returns (best_genes, best_fitness)."""
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    best_x, best_f = None, -math.inf
    for _ in range(budget):
        x = lower + rng.random(lower.size) * (upper - lower)
        f = _as_evaluation(objective(x)).fitness
        if f > best_f:
            best_x, best_f = x, f
    return best_x, best_f


@dataclass(frozen=True)
class QuadraticBenchmark:
    """Separable negative quadratic in box-normalized genes, maximal (0) at ``optimum``.

    Stands in for the solver when checking the GA itself; picklable, so it also
    exercises the process-pool path.
    """

    optimum: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def normalized_distance(self, genes) -> float:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        z = (np.asarray(genes, dtype=float) - np.asarray(self.optimum)) / (hi - lo)
        return float(np.linalg.norm(z))

    def __call__(self, genes) -> float:
        return -self.normalized_distance(genes) ** 2


@dataclass(frozen=True)
class DesignBounds:
    """Search box for the taper GA. Genes: defect_scale, exponent_a, exponent_hx, exponent_hy."""

    mirror_cell: UnitCellGeometry
    n_mirror: int = 8
    n_taper: int = 6
    defect_scale: tuple[float, float] = (0.75, 0.98)
    taper_exponent: tuple[float, float] = (0.5, 4.0)

    GENES = ("defect_scale", "exponent_a", "exponent_hx", "exponent_hy")

    def __post_init__(self):
        lo, hi = self.defect_scale
        if not 0 < lo <= hi <= 1:
            raise ValueError("defect_scale bounds must satisfy 0 < lo <= hi <= 1")
        lo, hi = self.taper_exponent
        if not 0 < lo <= hi:
            raise ValueError("taper_exponent bounds must satisfy 0 < lo <= hi")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.defect_scale[0]] + [self.taper_exponent[0]] * 3)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.defect_scale[1]] + [self.taper_exponent[1]] * 3)

    def decode(self, genes) -> DesignVector:
        g = [float(v) for v in genes]
        return DesignVector(self.mirror_cell, self.n_mirror, self.n_taper, g[0], (g[1], g[2], g[3]))


def evaluate_design(design: DesignVector, win: FitnessWindows, mat: MaterialParams) -> Evaluation:
    """Fitness of one design; solver failures score 0 with the reason kept."""
    try:
        sol = cavity_response(design, mat)
    except (SurrogateError, ValueError) as exc:
        return Evaluation(0.0, {}, f"{type(exc).__name__}: {exc}")
    terms = fitness_terms(sol, win)
    info = {"omega_o_hz": sol.omega_o.hz, "q_o": sol.q_o, "omega_m_hz": sol.omega_m.hz,
            "g0_hz": sol.g0.hz, "window_optical": terms["window_optical"],
            "window_mechanical": terms["window_mechanical"]}
    return Evaluation(fitness(sol, win), info)


def _design_objective(genes, bounds: DesignBounds, win: FitnessWindows, mat: MaterialParams) -> Evaluation:
    try:
        design = bounds.decode(genes)
    except ValueError as exc:
        return Evaluation(0.0, {}, f"ValueError: {exc}")
    return evaluate_design(design, win, mat)


def ga_optimize(cfg: GaConfig, bounds: DesignBounds, win: FitnessWindows,
                mat: MaterialParams = MaterialParams()) -> tuple[DesignVector, GaResult]:
    objective = functools.partial(_design_objective, bounds=bounds, win=win, mat=mat)
    res = run_ga(objective, bounds.lower, bounds.upper, cfg)
    return bounds.decode(res.best_genes), res


def config_dict(cfg: GaConfig) -> dict:
    return asdict(cfg)
