"""Multi-objective search engines over binary genomes.

Two engines share the evaluation problems defined in ``objectives``:

* ``nsga2_run``: elitist non-dominated sorting with crowding tournaments,
  augmented recombination (with configured probability a non-geometric
  operator replaces plain uniform crossover), and per-bit mutation.
* ``eagd_run``: a decomposition engine with Tchebycheff aggregation over a
  simplex-lattice weight set, neighborhood mating, and an external dominance
  archive that both collects results and periodically supplies parents.

Both stop on a function-evaluation budget (cache hits are free) and are
bit-reproducible for a fixed seed. ``random_search_run`` evaluates the same
budget of uniform genomes and is the reference front for efficacy checks.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .genome import bits_to_string, string_to_bits
from .objectives import ObjectiveVector

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# dominance and archive
# ---------------------------------------------------------------------------

def dominates(a, b) -> bool:
    """Strict Pareto dominance, minimization."""
    a = a.as_tuple() if isinstance(a, ObjectiveVector) else tuple(a)
    b = b.as_tuple() if isinstance(b, ObjectiveVector) else tuple(b)
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


class ParetoArchive:
    """Mutually non-dominated (bitstring, objective) pairs, deduplicated by bits."""

    def __init__(self):
        self._members: dict[str, ObjectiveVector] = {}

    def __len__(self) -> int:
        return len(self._members)

    def members(self) -> list[tuple[str, ObjectiveVector]]:
        return sorted(self._members.items(),
                      key=lambda kv: (kv[1].as_tuple(), kv[0]))

    def objective_matrix(self) -> np.ndarray:
        return np.array([obj.as_tuple() for _, obj in self.members()]).reshape(-1, 3)

    def add(self, bits, objectives: ObjectiveVector) -> bool:
        bits_str = bits if isinstance(bits, str) else bits_to_string(bits)
        if bits_str in self._members:
            return False
        for obj in self._members.values():
            if dominates(obj, objectives):
                return False
        dominated = [k for k, v in self._members.items() if dominates(objectives, v)]
        for k in dominated:
            del self._members[k]
        self._members[bits_str] = objectives
        return True

    def is_dominance_fixed_point(self) -> bool:
        items = list(self._members.values())
        return not any(
            dominates(a, b) for i, a in enumerate(items) for j, b in enumerate(items) if i != j
        )


def merge_archives(archives) -> ParetoArchive:
    merged = ParetoArchive()
    for archive in archives:
        for bits_str, obj in archive.members():
            merged.add(bits_str, obj)
    return merged


# ---------------------------------------------------------------------------
# non-dominated sorting and crowding (Deb et al.)
# ---------------------------------------------------------------------------

def fast_nondominated_sort(objectives: list) -> list[list[int]]:
    """Partition indices into fronts; front 0 is the non-dominated set."""
    objs = [o.as_tuple() if isinstance(o, ObjectiveVector) else tuple(o) for o in objectives]
    n = len(objs)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objs[i], objs[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(objs[j], objs[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    for i in range(n):
        if domination_count[i] == 0:
            fronts[0].append(i)
    k = 0
    while fronts[k]:
        nxt = []
        for i in fronts[k]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        k += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(objectives: list) -> np.ndarray:
    """Crowding distances for one front; extremes are infinite."""
    n = len(objectives)
    objs = np.array([o.as_tuple() if isinstance(o, ObjectiveVector) else tuple(o)
                     for o in objectives], dtype=float)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for m in range(objs.shape[1]):
        order = np.argsort(objs[:, m], kind="stable")
        lo, hi = objs[order[0], m], objs[order[-1], m]
        dist[order[0]] = dist[order[-1]] = np.inf
        if hi > lo:
            gaps = (objs[order[2:], m] - objs[order[:-2], m]) / (hi - lo)
            dist[order[1:-1]] += gaps
    return dist


def crowding_tournament(rank_a, crowd_a, rank_b, crowd_b, rng: np.random.Generator) -> int:
    """0 if the first contestant wins, 1 otherwise (rank, then crowding, then coin)."""
    if rank_a != rank_b:
        return 0 if rank_a < rank_b else 1
    if crowd_a != crowd_b:
        return 0 if crowd_a > crowd_b else 1
    return int(rng.integers(2))


# ---------------------------------------------------------------------------
# variation operators
# ---------------------------------------------------------------------------

def uniform_crossover(p1: np.ndarray, p2: np.ndarray,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if p1.shape != p2.shape:
        raise ValueError("parent length mismatch")
    mask = rng.integers(0, 2, size=p1.shape, dtype=np.uint8).astype(bool)
    c1 = np.where(mask, p1, p2).astype(np.uint8)
    c2 = np.where(mask, p2, p1).astype(np.uint8)
    return c1, c2


def nongeometric_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator,
                           p_flip: float) -> np.ndarray:
    """Uniform-crossover child whose parent-agreeing bits each flip with p_flip.

    Flips at agreeing positions can move the child outside the parents'
    Hamming segment, which is the point of the operator.
    """
    if p1.shape != p2.shape:
        raise ValueError("parent length mismatch")
    child, _ = uniform_crossover(p1, p2, rng)
    agree = p1 == p2
    flips = agree & (rng.random(p1.shape) < p_flip)
    child[flips] ^= 1
    return child


def bitflip_mutation(bits: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    out = bits.copy()
    flips = rng.random(bits.shape) < rate
    out[flips] ^= 1
    return out


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

@dataclass
class Nsga2Config:
    population: int = 50
    crossover_rate: float = 0.9
    nongeometric_prob: float = 0.8
    flip_prob: float | None = None      # default 1/n
    mutation_rate: float | None = None  # default 1/n
    max_evaluations: int = 15000
    seed: int = 1

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be even and >= 2")
        for p in (self.crossover_rate, self.nongeometric_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")


@dataclass
class EagdConfig:
    population: int = 50
    crossover_rate: float = 1.0
    learning_generations: int = 8
    neighborhood_fraction: float = 0.10
    mutation_rate: float | None = None  # default 1/n
    max_evaluations: int = 15000
    seed: int = 1

    @property
    def neighborhood_size(self) -> int:
        return max(2, math.ceil(self.neighborhood_fraction * self.population))


@dataclass
class GenerationStats:
    generation: int
    evaluations: int
    front_size: int
    best: tuple[float, float, float]
    mean: tuple[float, float, float]
    hypervolume: float

    @staticmethod
    def csv_header() -> list[str]:
        return ["generation", "evaluations", "front_size",
                "best_e_cv", "best_c", "best_e_pr",
                "mean_e_cv", "mean_c", "mean_e_pr", "hypervolume"]

    def csv_row(self) -> list:
        return [self.generation, self.evaluations, self.front_size,
                *[repr(v) for v in self.best], *[repr(v) for v in self.mean],
                repr(self.hypervolume)]


def write_generation_csv(path, stats: list[GenerationStats], preamble: str | None = None):
    with open(path, "w", newline="") as fh:
        if preamble:
            fh.write(f"# {preamble}\n")
        w = csv.writer(fh)
        w.writerow(GenerationStats.csv_header())
        for s in stats:
            w.writerow(s.csv_row())


def _snapshot(gen: int, problem, pop_bits, pop_objs) -> GenerationStats:
    fronts = fast_nondominated_sort(pop_objs)
    front = [pop_objs[i].as_tuple() for i in fronts[0]]
    arr = np.array([o.as_tuple() for o in pop_objs])
    hv = hypervolume(np.array(front), np.array([1.0, 1.0, 1.0])) if front else 0.0
    return GenerationStats(
        generation=gen,
        evaluations=problem.fe_count,
        front_size=len(front),
        best=tuple(float(v) for v in arr.min(axis=0)),
        mean=tuple(float(v) for v in arr.mean(axis=0)),
        hypervolume=hv,
    )


def _evaluate_batch(problem, batch, cap):
    """Evaluate genomes until the FE cap would be exceeded; cache hits are free."""
    out = []
    exhausted = False
    for bits in batch:
        bits_str = bits_to_string(bits)
        if bits_str not in problem.cache and problem.fe_count >= cap:
            exhausted = True
            break
        out.append((bits_str, problem.evaluate(bits_str)))
    return out, exhausted


def nsga2_run(problem, cfg: Nsga2Config) -> tuple[ParetoArchive, list[GenerationStats]]:
    rng = np.random.default_rng(cfg.seed)
    n = problem.n_bits
    flip_prob = cfg.flip_prob if cfg.flip_prob is not None else 1.0 / n
    mutation_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n
    cap = cfg.max_evaluations

    def fresh_genome():
        bits = rng.integers(0, 2, size=n, dtype=np.uint8)
        return problem.repair(bits, rng)

    evaluated, exhausted = _evaluate_batch(
        problem, [fresh_genome() for _ in range(cfg.population)], cap)
    pop_bits = [string_to_bits(b) for b, _ in evaluated]
    pop_objs = [rec.objectives for _, rec in evaluated]
    stats = [_snapshot(0, problem, pop_bits, pop_objs)]
    gen = 0
    while not exhausted and problem.fe_count < cap:
        gen += 1
        ranks, crowds = _rank_and_crowd(pop_objs)

        def pick_parent():
            i, j = rng.integers(len(pop_bits)), rng.integers(len(pop_bits))
            winner = crowding_tournament(ranks[i], crowds[i], ranks[j], crowds[j], rng)
            return pop_bits[i if winner == 0 else j]

        offspring = []
        while len(offspring) < cfg.population:
            pa, pb = pick_parent(), pick_parent()
            if rng.random() < cfg.crossover_rate:
                if rng.random() < cfg.nongeometric_prob:
                    kids = [nongeometric_crossover(pa, pb, rng, flip_prob),
                            nongeometric_crossover(pa, pb, rng, flip_prob)]
                else:
                    kids = list(uniform_crossover(pa, pb, rng))
            else:
                kids = [pa.copy(), pb.copy()]
            for kid in kids:
                kid = bitflip_mutation(kid, mutation_rate, rng)
                offspring.append(problem.repair(kid, rng))
        offspring = offspring[:cfg.population]
        evaluated, exhausted = _evaluate_batch(problem, offspring, cap)
        child_bits = [string_to_bits(b) for b, _ in evaluated]
        child_objs = [rec.objectives for _, rec in evaluated]
        pool_bits = pop_bits + child_bits
        pool_objs = pop_objs + child_objs
        pop_bits, pop_objs = _environmental_selection(pool_bits, pool_objs, cfg.population)
        stats.append(_snapshot(gen, problem, pop_bits, pop_objs))
    archive = ParetoArchive()
    for idx in fast_nondominated_sort(pop_objs)[0]:
        archive.add(pop_bits[idx], pop_objs[idx])
    logger.info("nsga2: %d generations, %d evaluations (%d cache hits), front %d",
                gen, problem.fe_count, problem.cache_hits, len(archive))
    return archive, stats


def _rank_and_crowd(pop_objs):
    ranks = np.empty(len(pop_objs), dtype=int)
    crowds = np.empty(len(pop_objs), dtype=float)
    for r, front in enumerate(fast_nondominated_sort(pop_objs)):
        ranks[front] = r
        crowds[front] = crowding_distance([pop_objs[i] for i in front])
    return ranks, crowds


def _environmental_selection(pool_bits, pool_objs, target):
    fronts = fast_nondominated_sort(pool_objs)
    next_bits, next_objs = [], []
    for front in fronts:
        if len(next_bits) + len(front) <= target:
            next_bits.extend(pool_bits[i] for i in front)
            next_objs.extend(pool_objs[i] for i in front)
        else:
            crowds = crowding_distance([pool_objs[i] for i in front])
            order = sorted(range(len(front)), key=lambda i: -crowds[i])
            for i in order[:target - len(next_bits)]:
                next_objs.append(pool_objs[front[i]])
                next_bits.append(pool_bits[front[i]])
            break
        if len(next_bits) == target:
            break
    return next_bits, next_objs


def simplex_lattice_weights(n_obj: int, count: int) -> np.ndarray:
    """``count`` weight vectors thinned evenly from the smallest simplex lattice.

    The lattice with divisions H holds C(H + n_obj - 1, n_obj - 1) points; the
    smallest H whose lattice is at least ``count`` large is generated in
    lexicographic order and then sampled at evenly spaced positions.
    """
    h = 1
    while math.comb(h + n_obj - 1, n_obj - 1) < count:
        h += 1
    points = []
    for cuts in combinations(range(h + n_obj - 1), n_obj - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(h + n_obj - 2 - prev)
        points.append([p / h for p in parts])
    lattice = np.array(points)
    idx = np.round(np.linspace(0, len(lattice) - 1, count)).astype(int)
    return lattice[idx]


def _tchebycheff(obj: ObjectiveVector, weights: np.ndarray, ideal: np.ndarray) -> float:
    w = np.maximum(weights, 1e-6)
    return float(np.max(w * np.abs(np.asarray(obj.as_tuple()) - ideal)))


def eagd_run(problem, cfg: EagdConfig) -> tuple[ParetoArchive, list[GenerationStats]]:
    rng = np.random.default_rng(cfg.seed)
    n = problem.n_bits
    mutation_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n
    cap = cfg.max_evaluations
    weights = simplex_lattice_weights(3, cfg.population)
    dist = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=2)
    neighbors = np.argsort(dist, axis=1, kind="stable")[:, :cfg.neighborhood_size]

    genomes = []
    for _ in range(cfg.population):
        bits = rng.integers(0, 2, size=n, dtype=np.uint8)
        genomes.append(problem.repair(bits, rng))
    evaluated, exhausted = _evaluate_batch(problem, genomes, cap)
    pop_bits = [string_to_bits(b) for b, _ in evaluated]
    pop_objs = [rec.objectives for _, rec in evaluated]
    while len(pop_bits) < cfg.population:  # budget smaller than the population
        pop_bits.append(pop_bits[-1].copy())
        pop_objs.append(pop_objs[-1])
    archive = ParetoArchive()
    for b, o in zip(pop_bits, pop_objs):
        archive.add(b, o)
    ideal = np.array([o.as_tuple() for o in pop_objs]).min(axis=0)
    stats = [_snapshot(0, problem, pop_bits, pop_objs)]
    gen = 0
    while not exhausted and problem.fe_count < cap:
        gen += 1
        guided = cfg.learning_generations > 0 and gen % cfg.learning_generations == 0
        archive_members = archive.members() if guided else None
        for i in rng.permutation(cfg.population):
            hood = neighbors[i]
            if guided and archive_members:
                pa = string_to_bits(archive_members[int(rng.integers(len(archive_members)))][0])
                pb = pop_bits[hood[int(rng.integers(len(hood)))]]
            else:
                ja, jb = rng.choice(hood, size=2, replace=len(hood) < 2)
                pa, pb = pop_bits[ja], pop_bits[jb]
            if rng.random() < cfg.crossover_rate:
                child = uniform_crossover(pa, pb, rng)[0]
            else:
                child = pa.copy()
            child = problem.repair(bitflip_mutation(child, mutation_rate, rng), rng)
            child_str = bits_to_string(child)
            if child_str not in problem.cache and problem.fe_count >= cap:
                exhausted = True
                break
            rec = problem.evaluate(child_str)
            obj = rec.objectives
            ideal = np.minimum(ideal, np.asarray(obj.as_tuple()))
            replaced = 0
            for j in rng.permutation(hood):
                if _tchebycheff(obj, weights[j], ideal) <= _tchebycheff(pop_objs[j], weights[j], ideal):
                    pop_bits[j] = child.copy()
                    pop_objs[j] = obj
                    replaced += 1
                    if replaced >= 2:
                        break
            archive.add(child_str, obj)
        stats.append(_snapshot(gen, problem, pop_bits, pop_objs))
    logger.info("eagd: %d generations, %d evaluations (%d cache hits), archive %d",
                gen, problem.fe_count, problem.cache_hits, len(archive))
    return archive, stats


def random_search_run(problem, budget: int, seed: int) -> ParetoArchive:
    """Uniform random genomes under the same evaluation budget."""
    rng = np.random.default_rng(seed)
    archive = ParetoArchive()
    while problem.fe_count < budget:
        bits = problem.repair(rng.integers(0, 2, size=problem.n_bits, dtype=np.uint8), rng)
        rec = problem.evaluate(bits)
        archive.add(bits, rec.objectives)
    return archive


# ---------------------------------------------------------------------------
# hypervolume (exact, 3 objectives)
# ---------------------------------------------------------------------------

def _staircase_area_2d(points: np.ndarray, ref_x: float, ref_y: float) -> float:
    """Area of the union of [x_i, ref_x] x [y_i, ref_y] boxes."""
    keep = []
    for x, y in sorted(map(tuple, points)):
        if keep and y >= keep[-1][1]:
            continue  # dominated in 2D by an earlier (smaller-x) point
        keep.append((x, y))
    area = 0.0
    y_prev = ref_y
    for x, y in keep:
        area += (ref_x - x) * (y_prev - y)
        y_prev = y
    return area


def hypervolume(points, reference) -> float:
    """Exact dominated hypervolume for 3 minimization objectives (z-sweep)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    ref = np.asarray(reference, dtype=float)
    if pts.size == 0:
        return 0.0
    if np.any(pts > ref):
        raise ValueError("reference point lies inside the front (a member exceeds it)")
    front_idx = fast_nondominated_sort([tuple(p) for p in pts])[0]
    pts = pts[front_idx]
    order = np.argsort(pts[:, 2], kind="stable")
    pts = pts[order]
    z_levels = np.unique(pts[:, 2])
    volume = 0.0
    for li, z in enumerate(z_levels):
        z_next = z_levels[li + 1] if li + 1 < len(z_levels) else ref[2]
        active = pts[pts[:, 2] <= z][:, :2]
        volume += _staircase_area_2d(active, ref[0], ref[1]) * (z_next - z)
    return volume
