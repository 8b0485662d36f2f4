"""Invariant-set refinement algorithms.

Three interchangeable drivers compute a near-maximal controlled invariant
subset of a region of interest (a box union):

* ``under_I``      -- one backward sweep: classify queued boxes against a
                      frozen target (disjoint / inside with a continuous
                      input set / indeterminate / bisect).
* ``fixpoint``     -- iterate ``under_I`` until the box list stabilizes.
* ``accelerated``  -- single-queue variant that shrinks the target in place
                      and re-verifies surviving boxes against its version
                      counter; same fixed point, usually fewer pops.

``baseline_sampled`` reproduces the input-gridding approach used for
switched systems (pure interval images, no polytopes) for comparison, and
``brute_force_cis`` is a dense-grid oracle used only by tests.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AffineDecomposition, SystemModel, make_decomposition, reach_P0, reach_full, width_bounds
from .geometry import (
    Polytope,
    PolyUnion,
    convex_hull,
    insertion_set,
    intersect,
    intersects,
    overlap_set,
    preimage,
    set_difference,
)
from .intervals import Box, BoxUnion

CONTAIN_TOL = 1e-9


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class Classification:
    """Outcome of one box test: kind is disjoint | inside | indeterminate | split."""

    kind: str
    inputs: PolyUnion | None = None
    children: tuple[Box, Box] | None = None


@dataclass
class ControllerEntry:
    box: Box
    inputs: PolyUnion


class ControllerTable:
    """Pairs of CIS boxes with their certified invariance-enforcing input sets."""

    def __init__(self, entries=()):
        self.entries = list(entries)

    def add(self, box: Box, inputs: PolyUnion):
        self.entries.append(ControllerEntry(box, inputs))

    def lookup(self, x, tol: float = CONTAIN_TOL) -> ControllerEntry | None:
        for e in self.entries:
            if e.box.contains_point(x, tol):
                return e
        return None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class RunStats:
    pops: int = 0
    sweeps: int = 0
    wall_ms: float = 0.0
    epsilon: float = 0.0
    rho: float = 0.0
    r: float = 0.0
    volume_fraction: float = 0.0
    volumes: dict = field(default_factory=dict)


@dataclass
class RunResult:
    cis: BoxUnion
    controller: ControllerTable
    stats: RunStats
    excluded: list[Box] = field(default_factory=list)
    indeterminate: list[Box] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Per-box reach cache
# ---------------------------------------------------------------------------

class _ReachCache:
    """Decomposition and reach polytopes per box; valid across target changes."""

    def __init__(self, model: SystemModel):
        self.model = model
        self.data: dict = {}

    def get(self, box: Box):
        key = (box.lo.tobytes(), box.hi.tobytes())
        hit = self.data.get(key)
        if hit is None:
            dec = make_decomposition(self.model, box)
            p0 = reach_P0(dec, self.model.u_box)
            pfull = reach_full(dec, self.model.u_box, p0)
            hit = (dec, p0, pfull)
            self.data[key] = hit
        return hit


# ---------------------------------------------------------------------------
# Feasible inputs (the continuous input set certifying invariance of a box)
# ---------------------------------------------------------------------------

def feasible_inputs(
    box: Box,
    omega: BoxUnion,
    dec: AffineDecomposition,
    u_box: Box,
    p0: Polytope | None = None,
    pfull: Polytope | None = None,
) -> PolyUnion:
    """All u (a union of polytopes in input space) with P_u(box) inside omega.

    Clips omega to the full reach set, hulls the clip, removes the hull's
    non-omega gaps, and expresses the surviving reach-set translations in
    input space: insertion translations of P0 into the hull minus overlap
    translations into every gap piece, pulled back through u -> S u and
    intersected with the admissible box.
    """
    p0 = p0 if p0 is not None else reach_P0(dec, u_box)
    pfull = pfull if pfull is not None else reach_full(dec, u_box, p0)
    parts = _clip_target(omega, pfull)
    if not parts:
        return PolyUnion([])
    hull = parts[0] if len(parts) == 1 else convex_hull(np.vstack([p.vertices() for p in parts]))
    ins = insertion_set(p0, hull)
    if ins.is_empty():
        return PolyUnion([])
    t0 = preimage(ins, dec.S, u_box)
    if t0.is_empty():
        return PolyUnion([])
    if len(parts) == 1:
        return PolyUnion([t0])
    gaps = set_difference(hull, parts)
    if gaps.is_empty():
        return PolyUnion([t0])
    blockers = []
    for q in gaps:
        o = preimage(overlap_set(p0, q), dec.S, u_box)
        if not o.is_empty():
            blockers.append(o)
    return set_difference(t0, blockers)


def _clip_target(omega: BoxUnion, pfull: Polytope) -> list[Polytope]:
    """Nonempty intersections of the target's boxes with the reach set."""
    bb = pfull.bounding_box()
    parts = []
    for i in omega.indices_intersecting(bb.lo, bb.hi):
        piece = intersect(Polytope.from_box(omega.boxes[i]), pfull)
        if not piece.is_empty():
            parts.append(piece)
    return parts


# ---------------------------------------------------------------------------
# Classification (Algorithm 1 branch logic)
# ---------------------------------------------------------------------------

def classify(
    box: Box,
    omega: BoxUnion,
    model: SystemModel,
    epsilon: float,
    cache: _ReachCache | None = None,
) -> Classification:
    """Decide one box against the target omega."""
    cache = cache or _ReachCache(model)
    dec, p0, pfull = cache.get(box)
    bb = pfull.bounding_box()
    touching = [
        i
        for i in omega.indices_intersecting(bb.lo, bb.hi)
        if intersects(Polytope.from_box(omega.boxes[i]), pfull)
    ]
    if not touching:
        return Classification("disjoint")
    inputs = feasible_inputs(box, omega, dec, model.u_box, p0, pfull)
    if not inputs.is_empty():
        return Classification("inside", inputs=inputs)
    if box.width() <= epsilon:
        return Classification("indeterminate")
    return Classification("split", children=box.bisect())


# ---------------------------------------------------------------------------
# Algorithm 1: one sweep of the backward operator
# ---------------------------------------------------------------------------

def under_I(
    omega: BoxUnion,
    model: SystemModel,
    epsilon: float,
    margin_r: float = 0.0,
    cache: _ReachCache | None = None,
    threads: int = 1,
):
    """One refinement sweep against a frozen target.

    Returns (inside_boxes, controller, pops, excluded, indeterminate).
    The queue is depth-first: bisection children are pushed to the front.
    """
    cache = cache or _ReachCache(model)
    target = omega.eroded(margin_r) if margin_r > 0.0 else omega
    queue = deque(omega.boxes)
    inside: list[Box] = []
    table = ControllerTable()
    excluded: list[Box] = []
    indeterminate: list[Box] = []
    pops = 0
    if threads > 1:
        return _under_I_parallel(
            queue, target, model, epsilon, cache, threads, inside, table, excluded, indeterminate
        )
    while queue:
        box = queue.popleft()
        pops += 1
        c = classify(box, target, model, epsilon, cache)
        if c.kind == "disjoint":
            excluded.append(box)
        elif c.kind == "inside":
            inside.append(box)
            table.add(box, c.inputs)
        elif c.kind == "indeterminate":
            indeterminate.append(box)
        else:
            l, r = c.children
            queue.appendleft(l)
            queue.appendleft(r)
    return BoxUnion(inside), table, pops, excluded, indeterminate


def _under_I_parallel(
    queue, target, model, epsilon, cache, threads, inside, table, excluded, indeterminate
):
    """Level-synchronous variant: classifying against a frozen target is
    order-independent, so batches preserve the sequential result."""
    from concurrent.futures import ThreadPoolExecutor

    pops = 0
    pending = list(queue)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while pending:
            results = list(pool.map(lambda b: classify(b, target, model, epsilon, cache), pending))
            pops += len(pending)
            nxt = []
            for box, c in zip(pending, results):
                if c.kind == "disjoint":
                    excluded.append(box)
                elif c.kind == "inside":
                    inside.append(box)
                    table.add(box, c.inputs)
                elif c.kind == "indeterminate":
                    indeterminate.append(box)
                else:
                    nxt.extend(c.children)
            pending = nxt
    return BoxUnion(inside), table, pops, excluded, indeterminate


# ---------------------------------------------------------------------------
# Algorithm 2: iterate to the fixed point
# ---------------------------------------------------------------------------

def fixpoint(
    omega: BoxUnion,
    model: SystemModel,
    epsilon: float,
    margin_r: float = 0.0,
    threads: int = 1,
) -> RunResult:
    """Repeat sweeps until the box union stops changing."""
    t0 = time.perf_counter()
    cache = _ReachCache(model)
    stats = RunStats(epsilon=epsilon)
    current = BoxUnion(omega.disjoint_pieces(), version=omega.version)
    table = ControllerTable()
    excluded: list[Box] = []
    indeterminate: list[Box] = []
    while not current.is_empty():
        nxt, table, pops, exc, ind = under_I(
            current, model, epsilon, margin_r, cache, threads=threads
        )
        stats.pops += pops
        stats.sweeps += 1
        excluded.extend(exc)
        indeterminate.extend(ind)
        if nxt.same_as(current):
            current = nxt
            break
        # sweeps only remove material and pieces stay disjoint, so equal
        # volume is an accepted equality fast path
        v0 = sum(b.volume() for b in current.boxes)
        v1 = sum(b.volume() for b in nxt.boxes)
        current = nxt
        if abs(v0 - v1) <= 1e-12 * max(1.0, v0):
            break
    if current.is_empty():
        table = ControllerTable()
    _finish_stats(stats, omega, current, model, excluded, indeterminate, t0)
    return RunResult(current, table, stats, excluded, indeterminate)


# ---------------------------------------------------------------------------
# Algorithm 3: accelerated single-queue variant
# ---------------------------------------------------------------------------

@dataclass
class _Entry:
    box: Box
    mark: int = -1  # omega version at which this box was last verified inside
    log_pos: int = 0  # removal-log length at verification time
    inputs: PolyUnion | None = None


def accelerated(
    omega: BoxUnion,
    model: SystemModel,
    epsilon: float,
    margin_r: float = 0.0,
    threads: int = 1,  # accepted for interface parity; this driver is sequential
) -> RunResult:
    """Refine while mutating the target in place.

    Disjoint/indeterminate boxes are removed from omega immediately (version
    bump invalidates check marks); inside boxes are marked with the current
    version and requeued at the back.  Terminates when every queued box has
    been verified against the current omega.

    A classification depends on omega only through omega intersected with
    the box's reach set, so a stale mark is revalidated for free when no
    removal since it touches the reach set's bounding box; only genuinely
    affected boxes are reclassified (this is what makes the pop count beat
    the plain fixpoint iteration).
    """
    t0 = time.perf_counter()
    cache = _ReachCache(model)
    stats = RunStats(epsilon=epsilon)
    queue: deque[_Entry] = deque(_Entry(b) for b in omega.disjoint_pieces())
    excluded: list[Box] = []
    indeterminate: list[Box] = []
    removal_log: list[Box] = []
    version = 0
    checked = 0  # queue entries whose mark equals the current version

    # The queue is always an interior-disjoint partition of the current
    # omega (splits replace a box by its children, removals delete it), so
    # the classification target is rebuilt from queue boxes on removal
    # instead of mutating a box union in place.
    target = BoxUnion([e.box for e in queue], version=version)
    target_eroded = target.eroded(margin_r) if margin_r > 0.0 else target

    def mark_unaffected(e: _Entry) -> bool:
        _, _, pfull = cache.get(e.box)
        bb = pfull.bounding_box()
        return all(
            not (np.all(r.lo <= bb.hi + CONTAIN_TOL) and np.all(bb.lo - CONTAIN_TOL <= r.hi))
            for r in removal_log[e.log_pos :]
        )

    while queue and checked < len(queue):
        if target.version != version:
            target = BoxUnion([e.box for e in queue], version=version)
            target_eroded = target.eroded(margin_r) if margin_r > 0.0 else target
        e = queue.popleft()
        if e.mark == version:
            queue.append(e)  # termination scan, not a classification
            continue
        if e.mark >= 0 and mark_unaffected(e):
            # omega unchanged on this box's reach set: verification carries over
            e.mark = version
            e.log_pos = len(removal_log)
            queue.append(e)
            checked += 1
            continue
        stats.pops += 1
        c = classify(e.box, target_eroded, model, epsilon, cache)
        if c.kind == "inside":
            e.mark = version
            e.log_pos = len(removal_log)
            e.inputs = c.inputs
            queue.append(e)
            checked += 1
        elif c.kind == "split":
            l, r = c.children
            queue.appendleft(_Entry(l))
            queue.appendleft(_Entry(r))
        else:
            (excluded if c.kind == "disjoint" else indeterminate).append(e.box)
            grown = e.box if margin_r == 0.0 else Box(e.box.lo - margin_r, e.box.hi + margin_r)
            removal_log.append(grown)
            version += 1
            checked = 0  # every mark is now stale
    cis = BoxUnion([e.box for e in queue])
    table = ControllerTable()
    for e in queue:
        if e.inputs is not None:
            table.add(e.box, e.inputs)
    _finish_stats(stats, omega, cis, model, excluded, indeterminate, t0)
    return RunResult(cis, table, stats, excluded, indeterminate)


def _finish_stats(stats, omega0, cis, model, excluded, indeterminate, t0):
    stats.wall_ms = (time.perf_counter() - t0) * 1e3
    v_omega = omega0.volume()
    v_cis = sum(b.volume() for b in cis.boxes)  # algorithm outputs are disjoint
    stats.volume_fraction = v_cis / v_omega if v_omega > 0 else 0.0
    stats.volumes = {
        "omega": v_omega,
        "cis": v_cis,
        "excluded": float(sum(b.volume() for b in excluded)),
        "indeterminate": float(sum(b.volume() for b in indeterminate)),
    }
    try:
        wb = width_bounds(model, omega0)
        stats.rho = wb.rho
        stats.r = wb.rho * stats.epsilon
    except Exception:
        stats.rho = float("nan")
        stats.r = float("nan")


# ---------------------------------------------------------------------------
# Sampled-input baseline (switched-systems style comparison)
# ---------------------------------------------------------------------------

def _input_grid(u_box: Box, n_u: int) -> np.ndarray:
    """Uniform input samples: n_u grid steps across each input interval,
    i.e. the n_u + 1 points including both endpoints (and, for a symmetric
    interval with even n_u, the drift-free center).  A single sample sits at
    the midpoint."""
    if n_u < 1:
        raise ValueError("n_u must be at least 1")
    axes = []
    for i in range(u_box.dim):
        lo, hi = u_box.lo[i], u_box.hi[i]
        axes.append(np.array([0.5 * (lo + hi)]) if n_u == 1 else np.linspace(lo, hi, n_u + 1))
    if u_box.dim == 1:
        return axes[0][:, None]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _covered_by_union(lo, hi, omega: BoxUnion) -> bool:
    """Is the box [lo, hi] a subset of the union?"""
    idx = omega.indices_intersecting(lo, hi)
    for i in idx:
        b = omega.boxes[i]
        if np.all(lo >= b.lo - CONTAIN_TOL) and np.all(hi <= b.hi + CONTAIN_TOL):
            return True
    if len(idx) == 0:
        return False
    resid = BoxUnion([Box(lo, hi)])
    for i in idx:
        resid.subtract(omega.boxes[i])
        if resid.is_empty():
            return True
    return False


def baseline_sampled(
    omega: BoxUnion,
    model: SystemModel,
    epsilon: float,
    n_u: int,
    margin_r: float = 0.0,
) -> RunResult:
    """Input-gridding baseline: a box joins the invariant set when some
    sampled input's pure interval image is contained in the target; it is
    discarded when every sampled image misses the target. Runs the same
    outer fixpoint loop as the main algorithm."""
    t0 = time.perf_counter()
    stats = RunStats(epsilon=epsilon)
    ugrid = _input_grid(model.u_box, n_u)
    image_cache: dict = {}

    def interval_images(box: Box):
        key = (box.lo.tobytes(), box.hi.tobytes())
        hit = image_cache.get(key)
        if hit is None:
            f0iv = model.f0_interval(box)
            giv = model.g_interval(box)
            lo_c = np.minimum(giv.lo[None] * ugrid[:, None, :], giv.hi[None] * ugrid[:, None, :])
            hi_c = np.maximum(giv.lo[None] * ugrid[:, None, :], giv.hi[None] * ugrid[:, None, :])
            los = f0iv.lo[None] + lo_c.sum(axis=2)
            his = f0iv.hi[None] + hi_c.sum(axis=2)
            hit = (los, his)
            image_cache[key] = hit
        return hit

    current = BoxUnion(omega.disjoint_pieces(), version=omega.version)
    excluded: list[Box] = []
    indeterminate: list[Box] = []
    while not current.is_empty():
        target = current.eroded(margin_r) if margin_r > 0.0 else current
        tlos, this_ = (
            np.array([b.lo for b in target.boxes]),
            np.array([b.hi for b in target.boxes]),
        )
        queue = deque(current.boxes)
        inside: list[Box] = []
        exc_sweep: list[Box] = []
        ind_sweep: list[Box] = []
        while queue:
            box = queue.popleft()
            stats.pops += 1
            los, his = interval_images(box)
            hits = np.zeros(len(los), dtype=bool)
            if len(target.boxes):
                inter = np.all(los[:, None, :] <= this_[None] + CONTAIN_TOL, axis=2) & np.all(
                    tlos[None] - CONTAIN_TOL <= his[:, None, :], axis=2
                )
                hits = inter.any(axis=1)
            if not hits.any():
                exc_sweep.append(box)
                continue
            contained = False
            for k in np.nonzero(hits)[0]:
                if _covered_by_union(los[k], his[k], target):
                    contained = True
                    break
            if contained:
                inside.append(box)
            elif box.width() <= epsilon:
                ind_sweep.append(box)
            else:
                l, r = box.bisect()
                queue.appendleft(l)
                queue.appendleft(r)
        stats.sweeps += 1
        excluded.extend(exc_sweep)
        indeterminate.extend(ind_sweep)
        nxt = BoxUnion(inside)
        v0 = sum(b.volume() for b in current.boxes)
        v1 = sum(b.volume() for b in nxt.boxes)
        if nxt.same_as(current) or abs(v0 - v1) <= 1e-12 * max(1.0, v0):
            current = nxt
            break
        current = nxt
    _finish_stats(stats, omega, current, model, excluded, indeterminate, t0)
    return RunResult(current, ControllerTable(), stats, excluded, indeterminate)


# ---------------------------------------------------------------------------
# Dense-grid oracle (tests only)
# ---------------------------------------------------------------------------

def brute_force_cis(model: SystemModel, state_res, input_res: int) -> BoxUnion:
    """Grid approximation of the maximal controlled invariant set.

    Cells of the region's bounding grid survive while some gridded input
    maps the cell's center and all of its corners into the surviving
    region.  A test oracle only: grid error is not certified, so containment
    assertions against it carry an explicit one-cell margin.
    """
    omega = model.omega0
    bbox = omega.bounding_box()
    n = bbox.dim
    res = np.broadcast_to(np.asarray(state_res, dtype=int), (n,)).copy()
    cell = bbox.widths() / res
    ugrid = _input_grid(model.u_box, input_res)

    shape = tuple(res)
    centers_axes = [bbox.lo[d] + (np.arange(res[d]) + 0.5) * cell[d] for d in range(n)]
    mesh = np.meshgrid(*centers_axes, indexing="ij")
    centers = np.column_stack([g.ravel() for g in mesh])
    alive = np.array([omega.contains_point(c) for c in centers]).reshape(shape)

    # probe points: center plus corners of each cell
    offsets = [np.zeros(n)] + [c - 0.5 * cell for c in [np.diag(cell) @ s for s in _signs(n)]]
    n_probe, n_u, n_cells = len(offsets), len(ugrid), len(centers)

    # map every probe under every gridded input once
    img_idx = np.zeros((n_probe, n_u, n_cells), dtype=np.int64)
    img_ok = np.zeros((n_probe, n_u, n_cells), dtype=bool)
    for pi, off in enumerate(offsets):
        pts = centers + off
        for ki, u in enumerate(ugrid):
            out = model.step_many(pts, u)
            idx = np.floor((out - bbox.lo) / cell).astype(int)
            ok = np.all((idx >= 0) & (idx < res), axis=1)
            flat = np.zeros(n_cells, dtype=np.int64)
            flat[ok] = np.ravel_multi_index(idx[ok].T, shape)
            img_idx[pi, ki] = flat
            img_ok[pi, ki] = ok

    flat_alive = alive.ravel().copy()
    while True:
        # an input works when every probe of the cell lands on a live cell
        works = (img_ok & flat_alive[img_idx]).all(axis=0)
        keep = flat_alive & works.any(axis=0)
        if np.array_equal(keep, flat_alive):
            break
        flat_alive = keep
    boxes = [
        Box(centers[i] - 0.5 * cell, centers[i] + 0.5 * cell)
        for i in np.nonzero(flat_alive)[0]
    ]
    return BoxUnion(boxes)


def _signs(n):
    out = []
    for mask in range(1 << n):
        out.append(np.array([1.0 if (mask >> d) & 1 else 0.0 for d in range(n)]))
    return out


# ---------------------------------------------------------------------------
# Runtime invariance certificate
# ---------------------------------------------------------------------------

@dataclass
class VerifyReport:
    trials: int
    steps: int
    passes: int
    failures: int
    worst_margin: float

    @property
    def all_passed(self) -> bool:
        return self.failures == 0


def verify_invariance(
    cis: BoxUnion,
    table: ControllerTable,
    model: SystemModel,
    trials: int,
    horizon: int,
    seed: int = 0,
) -> VerifyReport:
    """Roll trajectories with table inputs and check they never leave the set.

    Each step looks up the covering box, applies that entry's representative
    input, and advances the true dynamics.  The margin reported is the worst
    single-box inset depth seen along all trajectories.
    """
    if cis.is_empty():
        return VerifyReport(0, horizon, 0, 0, float("inf"))
    rng = np.random.default_rng(seed)
    vols = np.array([b.volume() for b in cis.boxes])
    probs = vols / vols.sum() if vols.sum() > 0 else np.full(len(vols), 1.0 / len(vols))
    reps = np.array([e.inputs.parts[0].representative_point() for e in table])
    elos = np.array([e.box.lo for e in table])
    ehis = np.array([e.box.hi for e in table])
    clos = np.array([b.lo for b in cis.boxes])
    chis = np.array([b.hi for b in cis.boxes])

    choice = rng.choice(len(cis.boxes), size=trials, p=probs)
    x = rng.uniform(clos[choice], chis[choice])
    alive = np.ones(trials, dtype=bool)
    failures = 0
    worst = float("inf")
    for _ in range(horizon):
        if not alive.any():
            break
        act = np.nonzero(alive)[0]
        covered = np.all(
            (x[act, None, :] >= elos[None] - CONTAIN_TOL)
            & (x[act, None, :] <= ehis[None] + CONTAIN_TOL),
            axis=2,
        )
        has_entry = covered.any(axis=1)
        failures += int((~has_entry).sum())
        alive[act[~has_entry]] = False
        act = act[has_entry]
        idx_entry = covered[has_entry].argmax(axis=1)
        for k in np.unique(idx_entry):
            rows = act[idx_entry == k]
            x[rows] = model.step_many(x[rows], reps[k])
        # membership and inset margin against the invariant set
        slack = np.min(
            np.minimum(x[act, None, :] - clos[None], chis[None] - x[act, None, :]), axis=2
        ).max(axis=1)
        out = slack < -CONTAIN_TOL
        failures += int(out.sum())
        alive[act[out]] = False
        if np.any(~out):
            worst = min(worst, float(slack[~out].min()))
    passes = int(alive.sum())
    return VerifyReport(trials, horizon, passes, failures, worst)


# ---------------------------------------------------------------------------
# Set comparison helper
# ---------------------------------------------------------------------------

def symmetric_difference_volume(a: BoxUnion, b: BoxUnion) -> float:
    d1 = a.copy()
    for box in b.boxes:
        d1.subtract(box)
    d2 = b.copy()
    for box in a.boxes:
        d2.subtract(box)
    return d1.volume() + d2.volume()
