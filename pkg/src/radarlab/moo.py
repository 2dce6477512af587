"""Multi-objective machinery: Pareto dominance, fast non-dominated sorting,
crowding distance, NSGA-II over time-allocation genomes, and 2-D hypervolume.

Conventions: both objectives are maximized. Genomes are flat numpy arrays in
[0, 1]^(n_points * (1 + n_slots)); each decision point holds one scan weight
followed by per-slot dwell weights and governs an equal share of the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ObjectivePoint",
    "NsgaConfig",
    "NsgaResult",
    "dominates",
    "fast_non_dominated_sort",
    "crowding_distance",
    "environmental_selection",
    "extract_pareto",
    "hypervolume_2d",
    "clipped_hypervolume",
    "default_reference",
    "sbx_crossover",
    "polynomial_mutation",
    "decode_and_repair",
    "corner_genomes",
    "nsga2_run",
]


@dataclass(frozen=True)
class ObjectivePoint:
    """A (tracking, scanning) objective pair with its provenance."""

    obj_t: float
    obj_s: float
    algorithm: str = ""
    label: str = ""
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.obj_t) and np.isfinite(self.obj_s)):
            raise ValueError("objectives must be finite")

    @property
    def values(self) -> tuple:
        return (self.obj_t, self.obj_s)


def _objs(p):
    """Accept ObjectivePoint or any 2-sequence."""
    if isinstance(p, ObjectivePoint):
        return p.obj_t, p.obj_s
    t, s = p
    return float(t), float(s)


def dominates(a, b) -> bool:
    """True iff `a` is at least as good in both objectives and strictly
    better in at least one (maximization)."""
    at, as_ = _objs(a)
    bt, bs = _objs(b)
    return at >= bt and as_ >= bs and (at > bt or as_ > bs)


def _as_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2:
        return np.asarray(points, dtype=float)
    return np.array([_objs(p) for p in points], dtype=float)


def fast_non_dominated_sort(points) -> list:
    """Partition into fronts F1, F2, ... (lists of indices into `points`).

    F1 is the non-dominated set; each later front is non-dominated once the
    earlier fronts are removed.
    """
    obj = _as_array(points)
    n = obj.shape[0]
    if n == 0:
        return []
    t = obj[:, 0]
    s = obj[:, 1]
    ge = (t[:, None] >= t[None, :]) & (s[:, None] >= s[None, :])
    gt = (t[:, None] > t[None, :]) | (s[:, None] > s[None, :])
    dom = ge & gt  # dom[i, j]: i dominates j
    n_dominators = dom.sum(axis=0).astype(int)
    fronts = []
    assigned = np.zeros(n, dtype=bool)
    current = np.flatnonzero(n_dominators == 0)
    while current.size:
        fronts.append(current.tolist())
        assigned[current] = True
        n_dominators = n_dominators - dom[current].sum(axis=0)
        current = np.flatnonzero((n_dominators == 0) & ~assigned)
    return fronts


def crowding_distance(front_points) -> np.ndarray:
    """Per-point crowding distances for one front.

    Boundary points of each objective get infinity; interior points sum the
    neighbor gaps normalized by the objective range (zero-range objectives
    contribute nothing).
    """
    obj = _as_array(front_points)
    n = obj.shape[0]
    if n == 0:
        raise ValueError("front must be nonempty")
    dist = np.zeros(n)
    for k in range(obj.shape[1]):
        order = np.argsort(obj[:, k], kind="stable")
        vals = obj[order, k]
        span = vals[-1] - vals[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0 and n > 2:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def extract_pareto(points) -> list:
    """Maximal non-dominated subset, sorted by obj_t ascending.

    Duplicate objective pairs are collapsed to their first occurrence, so
    along the result obj_s is strictly descending.
    """
    pts = list(points)
    if not pts:
        return []
    obj = _as_array(pts)
    t, s = obj[:, 0], obj[:, 1]
    ge = (t[:, None] >= t[None, :]) & (s[:, None] >= s[None, :])
    gt = (t[:, None] > t[None, :]) | (s[:, None] > s[None, :])
    dominated = np.any(ge & gt, axis=0)
    kept = []
    seen = set()
    for i in np.flatnonzero(~dominated):
        vals = (t[i], s[i])
        if vals in seen:
            continue
        seen.add(vals)
        kept.append(pts[i])
    return sorted(kept, key=_objs)


def hypervolume_2d(front, reference) -> float:
    """Dominated area between a maximization front and a reference point,
    by the sorted sweep over obj_t.

    Every front point must strictly dominate the reference in both
    objectives.
    """
    ref_t, ref_s = _objs(reference)
    obj = _as_array(front)
    if obj.shape[0] == 0:
        return 0.0
    if np.any(obj[:, 0] <= ref_t) or np.any(obj[:, 1] <= ref_s):
        raise ValueError("reference point must be strictly dominated by every front point")
    pareto = _as_array(extract_pareto([tuple(row) for row in obj]))
    hv = 0.0
    next_s = ref_s
    # ascending obj_t -> descending obj_s; sweep from the rightmost block up
    for t, s in pareto[::-1]:
        hv += (t - ref_t) * (s - next_s)
        next_s = s
    return hv


def clipped_hypervolume(front, reference) -> float:
    """Hypervolume counting only points strictly beyond the reference.

    Monotone under front growth even when new points fall outside the
    reference box, which makes it safe for per-generation progress curves
    with a fixed reference.
    """
    ref_t, ref_s = _objs(reference)
    obj = _as_array(front)
    keep = (obj[:, 0] > ref_t) & (obj[:, 1] > ref_s)
    if not np.any(keep):
        return 0.0
    return hypervolume_2d(obj[keep], reference)


def default_reference(points, margin: float = 0.05) -> tuple:
    """Component-wise minima pushed out by a 5% margin of each objective's
    span (floored so degenerate spans still yield a strictly dominated
    reference)."""
    obj = _as_array(points)
    if obj.shape[0] == 0:
        raise ValueError("cannot build a reference from no points")
    lo = obj.min(axis=0)
    span = obj.max(axis=0) - lo
    pad = margin * np.maximum.reduce([span, np.abs(lo), np.ones(2)])
    return (float(lo[0] - pad[0]), float(lo[1] - pad[1]))


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def sbx_crossover(p1, p2, eta_c: float = 15.0, prob: float = 0.9, rng=None):
    """Simulated binary crossover, applied gene-wise with probability `prob`.

    Each crossed gene draws its own spread factor from the eta_c polynomial
    distribution; uncrossed genes copy the parents. Offspring are clipped to
    [0, 1]. The rng is consumed a fixed number of times regardless of gate
    outcomes, so population streams stay aligned.
    """
    if rng is None:
        rng = np.random.default_rng()
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("parent genomes must have the same length")
    gate = rng.random(p1.shape) < prob
    u = rng.random(p1.shape)
    swap = rng.random(p1.shape) < 0.5
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta_c + 1.0)),
        (0.5 / (1.0 - u)) ** (1.0 / (eta_c + 1.0)),
    )
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    # Random gene-wise swap keeps each child's expectation at the parent
    # mean (the spread factor's own mean exceeds 1).
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
    c1 = np.where(gate, np.clip(c1, 0.0, 1.0), p1)
    c2 = np.where(gate, np.clip(c2, 0.0, 1.0), p2)
    return c1, c2


def polynomial_mutation(genome, eta_m: float = 20.0, prob: float | None = None, rng=None):
    """Bound-respecting polynomial mutation on [0, 1] genes.

    Defaults to a per-gene rate of 1/len(genome). Genes at a bound can only
    move inward. The rng consumption count is independent of gate outcomes.
    """
    if rng is None:
        rng = np.random.default_rng()
    g = np.asarray(genome, dtype=float)
    if prob is None:
        prob = 1.0 / g.size
    gate = rng.random(g.shape) < prob
    u = rng.random(g.shape)
    d1 = g  # distance to the lower bound (range is 1)
    d2 = 1.0 - g
    exp = 1.0 / (eta_m + 1.0)
    low = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta_m + 1.0)) ** exp - 1.0
    high = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta_m + 1.0)) ** exp
    delta = np.where(u <= 0.5, low, high)
    return np.where(gate, np.clip(g + delta, 0.0, 1.0), g)


# ---------------------------------------------------------------------------
# Genome decoding
# ---------------------------------------------------------------------------


def decode_and_repair(
    genome, t0: float, horizon: int, n_points: int = 20
) -> np.ndarray:
    """Decode a flat genome into a per-cycle schedule (horizon, 1 + n_slots).

    Column 0 is the scan time, the rest are per-slot dwells. Each decision
    point's weights scale by t0; if their sum exceeds t0 they are rescaled
    proportionally (with the float residue shaved off the largest entry so
    the budget holds exactly). Decision point k governs an equal share of
    the horizon, with the final point absorbing any remainder.
    """
    g = np.asarray(genome, dtype=float)
    if g.size % n_points != 0:
        raise ValueError(f"genome length {g.size} not divisible by {n_points} decision points")
    if np.any(g < 0.0) or np.any(g > 1.0):
        raise ValueError("genes must lie in [0, 1]")
    width = g.size // n_points
    raw = g.reshape(n_points, width) * t0
    sums = raw.sum(axis=1)
    scale = np.where(sums > t0, np.divide(t0, sums, out=np.ones_like(sums), where=sums > 0), 1.0)
    repaired = raw * scale[:, None]
    # Shave float residue off the largest entry until the budget holds
    # exactly; each pass removes at least one ulp so this terminates fast.
    for _ in range(64):
        excess = repaired.sum(axis=1) - t0
        rows = np.flatnonzero(excess > 0.0)
        if rows.size == 0:
            break
        repaired[rows, np.argmax(repaired[rows], axis=1)] -= excess[rows]
    counts = np.full(n_points, horizon // n_points)
    counts[-1] += horizon - counts.sum()
    return np.repeat(repaired, counts, axis=0)


def corner_genomes(n_points: int, width: int, limit: int | None = None) -> np.ndarray:
    """Binary corner patterns of one decision point's gene block, tiled over
    all `n_points` blocks: one genome per pattern in {0, 1}^width.

    Uniform initial genomes decode onto the interior of the time-budget
    simplex (the repair rescales every over-budget row toward the centre),
    so the extreme allocations -- full scan, everything on one slot, full
    idle -- are effectively unreachable by random initialization at small
    population sizes. Seeding every binary corner gives the variation
    operators material to sweep the simplex edges from both ends. Patterns
    are ordered sparsest first (ties: scan gene set first, then ascending
    value) so truncation by `limit` keeps the sharpest corners.
    """
    if n_points < 1 or width < 1:
        raise ValueError("n_points and width must be positive")
    if width > 20:
        raise ValueError(f"corner enumeration is infeasible for width {width}")
    patterns = []
    for value in range(2**width):
        bits = [(value >> (width - 1 - j)) & 1 for j in range(width)]
        patterns.append((sum(bits), 1 - bits[0], value, bits))
    patterns.sort(key=lambda item: item[:3])
    genomes = np.stack(
        [np.tile(np.asarray(bits, dtype=float), n_points) for *_, bits in patterns]
    )
    if limit is not None:
        genomes = genomes[: max(0, int(limit))]
    return genomes


# ---------------------------------------------------------------------------
# NSGA-II
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NsgaConfig:
    """Evolution settings; the evaluator is supplied separately."""

    population_size: int = 120
    generations: int = 150
    genome_length: int = 80  # 20 points x (1 scan + 3 slots)
    crossover_prob: float = 0.9
    eta_c: float = 15.0
    mutation_prob: float | None = None  # default 1/genome_length
    eta_m: float = 20.0
    seed: int = 0
    # Optional deterministic genomes placed in the first initial-population
    # slots (e.g. corner_genomes output); the rest stay uniform random.
    initial_genomes: tuple = ()

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population size must be even and at least 4")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        if self.genome_length < 1:
            raise ValueError("genome length must be positive")
        if len(self.initial_genomes):
            seeds = np.asarray(self.initial_genomes, dtype=float)
            if seeds.ndim != 2 or seeds.shape[1] != self.genome_length:
                raise ValueError(
                    "initial genomes must be rows of genome_length genes"
                )
            if seeds.shape[0] > self.population_size:
                raise ValueError("more initial genomes than population slots")
            if np.any(seeds < 0.0) or np.any(seeds > 1.0):
                raise ValueError("initial genes must lie in [0, 1]")


@dataclass
class NsgaResult:
    population: np.ndarray  # (P, glen)
    objectives: np.ndarray  # (P, 2)
    front_genomes: np.ndarray  # archive of every non-dominated genome found
    front_objectives: np.ndarray  # matching (k, 2), sorted by obj_t
    history: list = field(default_factory=list)  # per-generation archive fronts


def _rank_and_crowd(obj: np.ndarray):
    fronts = fast_non_dominated_sort(obj)
    ranks = np.empty(obj.shape[0], dtype=int)
    crowd = np.empty(obj.shape[0])
    for r, f in enumerate(fronts):
        ranks[f] = r
        crowd[f] = crowding_distance(obj[f])
    return ranks, crowd, fronts


def environmental_selection(obj: np.ndarray, capacity: int) -> np.ndarray:
    """Elitist (mu + lambda) survival: whole fronts in rank order, with the
    overflowing front truncated by descending crowding distance (stable
    index order breaks exact ties)."""
    _, crowd, fronts = _rank_and_crowd(np.asarray(obj, dtype=float))
    chosen = []
    for f in fronts:
        if len(chosen) + len(f) <= capacity:
            chosen.extend(sorted(f))
        else:
            need = capacity - len(chosen)
            f_sorted = sorted(f)
            order = np.argsort(-crowd[f_sorted], kind="stable")
            chosen.extend([f_sorted[i] for i in order[:need]])
            break
    return np.asarray(chosen, dtype=int)


def _archive_update(arch_obj, arch_gen, new_obj, new_gen):
    """Keep the non-dominated subset of archive + newcomers (dedup exact)."""
    obj = np.concatenate([arch_obj, new_obj], axis=0)
    gen = np.concatenate([arch_gen, new_gen], axis=0)
    fronts = fast_non_dominated_sort(obj)
    keep = np.array(sorted(fronts[0]), dtype=int)
    obj, gen = obj[keep], gen[keep]
    _, unique = np.unique(obj, axis=0, return_index=True)
    unique = np.sort(unique)
    order = np.argsort(obj[unique, 0], kind="stable")
    sel = unique[order]
    return obj[sel], gen[sel]


def nsga2_run(config: NsgaConfig, evaluator) -> NsgaResult:
    """Standard elitist NSGA-II loop plus an external non-dominated archive.

    `evaluator(genomes)` maps a (P, genome_length) array to a (P, 2) array
    of (obj_t, obj_s), both maximized; it must be deterministic so elitism
    makes the archive front's hypervolume non-decreasing per generation.

    Selection is binary tournament on (rank, crowding); variation is SBX
    plus polynomial mutation; survival is (mu + lambda) truncation by rank
    then crowding. The returned front is the archive: the non-dominated set
    over every genome ever evaluated (a superset of the final population's
    first front under deterministic evaluation).
    """
    rng = np.random.default_rng(config.seed)
    p = config.population_size
    mut_prob = config.mutation_prob

    # Uniform initial population, with any supplied genomes taking the first
    # rows (the rng draw stays the same size either way, so seeded and
    # unseeded runs with the same seed share the remaining rows).
    pop = rng.random((p, config.genome_length))
    if len(config.initial_genomes):
        seeds = np.asarray(config.initial_genomes, dtype=float)
        pop[: seeds.shape[0]] = seeds
    obj = np.asarray(evaluator(pop), dtype=float)
    if obj.shape != (p, 2):
        raise ValueError(f"evaluator returned shape {obj.shape}, expected {(p, 2)}")

    arch_obj = np.empty((0, 2))
    arch_gen = np.empty((0, config.genome_length))
    arch_obj, arch_gen = _archive_update(arch_obj, arch_gen, obj, pop)

    history = [arch_obj.copy()]
    for _ in range(config.generations):
        ranks, crowd, _ = _rank_and_crowd(obj)

        # Binary tournaments pick each parent: lower rank, then higher crowding.
        cand = rng.integers(0, p, size=(p, 2))
        a, b = cand[:, 0], cand[:, 1]
        better = (ranks[a] < ranks[b]) | ((ranks[a] == ranks[b]) & (crowd[a] >= crowd[b]))
        parents = np.where(better, a, b)

        offspring = np.empty_like(pop)
        for k in range(0, p, 2):
            c1, c2 = sbx_crossover(
                pop[parents[k]], pop[parents[k + 1]], config.eta_c, config.crossover_prob, rng
            )
            offspring[k] = polynomial_mutation(c1, config.eta_m, mut_prob, rng)
            offspring[k + 1] = polynomial_mutation(c2, config.eta_m, mut_prob, rng)

        off_obj = np.asarray(evaluator(offspring), dtype=float)
        union_pop = np.concatenate([pop, offspring], axis=0)
        union_obj = np.concatenate([obj, off_obj], axis=0)

        chosen = environmental_selection(union_obj, p)
        pop = union_pop[chosen]
        obj = union_obj[chosen]

        arch_obj, arch_gen = _archive_update(arch_obj, arch_gen, off_obj, offspring)
        history.append(arch_obj.copy())

    return NsgaResult(
        population=pop,
        objectives=obj,
        front_genomes=arch_gen,
        front_objectives=arch_obj,
        history=history,
    )
