"""Cost matrices, rectangular linear assignment, and cross-frame mappings.

The solver is a dense Jonker-Volgenant shortest-augmenting-path method.
Rectangular inputs are handled natively: exactly ``min(n_rows, n_cols)``
pairs are matched at minimum total cost, so every pixel of the smaller side
maps to a single partner and every surplus pixel maps to none.

Determinism contract: among equal-cost optima the solver returns the
lexicographically smallest pair list (ordered by row index, then column
index). Ties are canonicalized after the solve by a greedy sweep over the
tight (zero-reduced-cost) edge graph certified by the dual variables; its
cost grows with the number of tied optima, which is negligible for generic
float costs.

Matching direction is current frame (rows) to previous frame (columns).
All functions are pure; per-part solves may run concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.spatial.distance import cdist

from .embedding import EmbeddingMap, N_PARTS, feature_matrix, part_pixels

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

BRUTE_FORCE_CAP = 8

# Cost differences at or below this relative scale count as exact ties.
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class Assignment:
    """Row/column index pairs of one solved assignment, row-ascending."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


@dataclass(frozen=True)
class Mapping:
    """Injective pixel pairs (q in frame i, s in frame i-1) with part ids.

    ``pairs`` is a (k, 5) int64 array with columns
    (q_row, q_col, s_row, s_col, part_id).
    """

    pairs: np.ndarray

    def __post_init__(self) -> None:
        p = self.pairs
        if p.ndim != 2 or p.shape[1] != 5:
            raise ValueError(f"mapping array must be (k, 5), got {p.shape}")
        if not np.issubdtype(p.dtype, np.integer):
            raise ValueError(f"mapping array must be integer typed, got {p.dtype}")
        if len(p):
            q_keys = p[:, 0].astype(np.int64) << 32 | p[:, 1].astype(np.int64)
            s_keys = p[:, 2].astype(np.int64) << 32 | p[:, 3].astype(np.int64)
            if len(np.unique(q_keys)) != len(p) or len(np.unique(s_keys)) != len(p):
                raise ValueError("mapping is not injective")

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    @property
    def q(self) -> np.ndarray:
        """(k, 2) current-frame pixel coordinates."""
        return self.pairs[:, 0:2]

    @property
    def s(self) -> np.ndarray:
        """(k, 2) previous-frame pixel coordinates."""
        return self.pairs[:, 2:4]

    @property
    def part_ids(self) -> np.ndarray:
        return self.pairs[:, 4]

    def transposed(self) -> Mapping:
        """Swap mapping direction (q <-> s)."""
        return Mapping(self.pairs[:, [2, 3, 0, 1, 4]].copy())


def empty_mapping() -> Mapping:
    return Mapping(np.empty((0, 5), dtype=np.int64))


def cost_matrix(f_i: np.ndarray, f_prev: np.ndarray) -> np.ndarray:
    """Pairwise L2 distances between feature rows of the two frames."""
    a = np.asarray(f_i, dtype=np.float64)
    b = np.asarray(f_prev, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"feature matrices incompatible: {a.shape} vs {b.shape}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("feature matrices must be non-empty")
    return cdist(a, b)


def _validate_cost(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.size == 0:
        raise ValueError(f"cost matrix must be non-empty 2-D, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix entries must be finite")
    if C.min() < 0:
        raise ValueError("cost matrix entries must be non-negative")
    return C


@njit(cache=True)
def _jv_kernel(cost):  # pragma: no cover - compiled
    nr, nc = cost.shape
    u = np.zeros(nr)
    v = np.zeros(nc)
    row2col = np.full(nr, -1, np.int64)
    col2row = np.full(nc, -1, np.int64)
    sp = np.empty(nc)
    pred = np.empty(nc, np.int64)
    done = np.empty(nc, np.bool_)
    for cur_row in range(nr):
        for j in range(nc):
            sp[j] = np.inf
            pred[j] = cur_row
            done[j] = False
        minval = 0.0
        i = cur_row
        sink = -1
        while sink < 0:
            lowest = np.inf
            jbest = -1
            base = minval - u[i]
            for j in range(nc):
                if done[j]:
                    continue
                r = base + cost[i, j] - v[j]
                if r < sp[j]:
                    sp[j] = r
                    pred[j] = i
                if sp[j] < lowest:
                    lowest = sp[j]
                    jbest = j
            minval = lowest
            done[jbest] = True
            if col2row[jbest] < 0:
                sink = jbest
            else:
                i = col2row[jbest]
        u[cur_row] += minval
        for j in range(nc):
            if done[j]:
                if col2row[j] >= 0:
                    u[col2row[j]] += minval - sp[j]
                v[j] -= minval - sp[j]
        j = sink
        while True:
            i = pred[j]
            col2row[j] = i
            jnext = row2col[i]
            row2col[i] = j
            if i == cur_row:
                break
            j = jnext
    return row2col, u, v


def _jv_shortest_path(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense JV solve for ``n_rows <= n_cols``.

    Returns (row2col, u, v) with every row matched. The duals certify
    optimality: cost - u - v >= 0 everywhere, assignment edges are tight,
    v <= 0, and every column with v < 0 is matched in every optimum.
    """
    if HAVE_NUMBA:
        return _jv_kernel(cost)
    return _jv_shortest_path_numpy(cost)


def _jv_shortest_path_numpy(
    cost: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized fallback used when numba is unavailable; identical output."""
    nr, nc = cost.shape
    u = np.zeros(nr)
    v = np.zeros(nc)
    row2col = np.full(nr, -1, dtype=np.int64)
    col2row = np.full(nc, -1, dtype=np.int64)
    for cur_row in range(nr):
        sp = np.full(nc, np.inf)
        pred = np.full(nc, cur_row, dtype=np.int64)
        done = np.zeros(nc, dtype=bool)
        minval = 0.0
        i = cur_row
        sink = -1
        while sink < 0:
            reduced = (minval - u[i]) + cost[i] - v
            improve = (reduced < sp) & ~done
            sp[improve] = reduced[improve]
            pred[improve] = i
            masked = np.where(done, np.inf, sp)
            j = int(np.argmin(masked))
            minval = float(masked[j])
            done[j] = True
            if col2row[j] < 0:
                sink = j
            else:
                i = int(col2row[j])
        scanned = np.flatnonzero(done)
        hit_rows = col2row[scanned]
        used = hit_rows >= 0
        u[hit_rows[used]] += minval - sp[scanned[used]]
        u[cur_row] += minval
        v[scanned] -= minval - sp[scanned]
        j = sink
        while True:
            i = int(pred[j])
            col2row[j] = i
            row2col[i], j = j, row2col[i]
            if i == cur_row:
                break
    return row2col, u, v


def _kuhn_augment(
    adj: np.ndarray,
    left_alive: np.ndarray,
    right_alive: np.ndarray,
    l2r: np.ndarray,
    r2l: np.ndarray,
    start: int,
) -> bool:
    """Find an alternating path from exposed left vertex ``start`` to a free
    right vertex and flip it in place. Returns False if none exists."""
    visited = np.zeros(adj.shape[1], dtype=bool)
    parent: dict[int, int] = {}
    stack = [start]
    while stack:
        left = stack.pop()
        for right in np.flatnonzero(adj[left] & right_alive & ~visited):
            right = int(right)
            visited[right] = True
            parent[right] = left
            owner = int(r2l[right])
            if owner < 0:
                while True:  # flip path back to start
                    left_node = parent[right]
                    freed = int(l2r[left_node])
                    l2r[left_node] = right
                    r2l[right] = left_node
                    if left_node == start:
                        return True
                    right = freed
            if left_alive[owner]:
                stack.append(owner)
    return False


def _clear_pair(l2r: np.ndarray, r2l: np.ndarray, left: int) -> int:
    """Unmatch ``left``; return its former partner (-1 if none)."""
    right = int(l2r[left])
    if right >= 0:
        l2r[left] = -1
        r2l[right] = -1
    return right


class _LexRefiner:
    """Greedy lexicographic sweep over the tight-edge graph.

    Maintains two certificate matchings: one saturating every row that must
    be matched, one saturating every column that must be matched. A fixed
    pair (r, c) is kept iff both certificates survive with r and c removed,
    which (by the Mendelsohn-Dulmage theorem) is equivalent to a joint
    optimal completion existing.
    """

    def __init__(
        self,
        tight: np.ndarray,
        row_must: np.ndarray,
        col_must: np.ndarray,
        init_r2c: np.ndarray,
    ) -> None:
        nr, nc = tight.shape
        self.tight = tight
        self.tight_t = np.ascontiguousarray(tight.T)
        self.row_must = row_must
        self.col_must = col_must
        self.row_alive = np.ones(nr, dtype=bool)
        self.col_alive = np.ones(nc, dtype=bool)
        # Each certificate tracks only its mandatory side; pairs touching
        # optional vertices are dropped so augmenting may freely abandon them.
        matched = np.flatnonzero(init_r2c >= 0)
        self.r_r2c = np.full(nr, -1, dtype=np.int64)
        keep_r = matched[row_must[matched]]
        self.r_r2c[keep_r] = init_r2c[keep_r]
        self.r_c2r = np.full(nc, -1, dtype=np.int64)
        self.r_c2r[init_r2c[keep_r]] = keep_r
        self.c_r2c = np.full(nr, -1, dtype=np.int64)
        keep_c = matched[col_must[init_r2c[matched]]]
        self.c_r2c[keep_c] = init_r2c[keep_c]
        self.c_c2r = np.full(nc, -1, dtype=np.int64)
        self.c_c2r[init_r2c[keep_c]] = keep_c

    def _try_fix(self, r: int, c: int) -> bool:
        row_alive = self.row_alive.copy()
        col_alive = self.col_alive.copy()
        row_alive[r] = False
        col_alive[c] = False

        r_r2c, r_c2r = self.r_r2c.copy(), self.r_c2r.copy()
        displaced_row = int(r_c2r[c])
        _clear_pair(r_r2c, r_c2r, r)
        if displaced_row >= 0 and displaced_row != r:
            _clear_pair(r_r2c, r_c2r, displaced_row)
            if self.row_must[displaced_row] and not _kuhn_augment(
                self.tight, row_alive, col_alive, r_r2c, r_c2r, displaced_row
            ):
                return False

        c_c2r, c_r2c = self.c_c2r.copy(), self.c_r2c.copy()
        displaced_col = int(c_r2c[r])
        _clear_pair(c_c2r, c_r2c, c)
        if displaced_col >= 0 and displaced_col != c:
            _clear_pair(c_c2r, c_r2c, displaced_col)
            if self.col_must[displaced_col] and not _kuhn_augment(
                self.tight_t, col_alive, row_alive, c_c2r, c_r2c, displaced_col
            ):
                return False

        self.row_alive, self.col_alive = row_alive, col_alive
        self.r_r2c, self.r_c2r = r_r2c, r_c2r
        self.c_c2r, self.c_r2c = c_c2r, c_r2c
        return True

    def _skip_row(self, r: int) -> None:
        _clear_pair(self.r_r2c, self.r_c2r, r)
        displaced_col = _clear_pair(self.c_r2c, self.c_c2r, r)
        self.row_alive[r] = False
        if displaced_col >= 0 and self.col_must[displaced_col]:
            ok = _kuhn_augment(
                self.tight_t,
                self.col_alive,
                self.row_alive,
                self.c_c2r,
                self.c_r2c,
                displaced_col,
            )
            if not ok:
                raise AssertionError("lex refinement lost a mandatory column")

    def sweep(self) -> list[tuple[int, int]]:
        fixed: list[tuple[int, int]] = []
        for r in range(self.tight.shape[0]):
            chosen = -1
            for c in np.flatnonzero(self.tight[r] & self.col_alive):
                if self._try_fix(r, int(c)):
                    chosen = int(c)
                    break
            if chosen >= 0:
                fixed.append((r, chosen))
            elif self.row_must[r]:
                raise AssertionError("lex refinement lost a mandatory row")
            else:
                self._skip_row(r)
        return fixed


@njit(cache=True)
def _alternatives_kernel(src, dst, matched, must, n_partial):  # pragma: no cover
    n_edges = src.shape[0]
    out_count = np.zeros(n_partial, np.int64)
    in_count = np.zeros(n_partial, np.int64)
    for e in range(n_edges):
        out_count[src[e]] += 1
        in_count[dst[e]] += 1
    out_start = np.zeros(n_partial + 1, np.int64)
    in_start = np.zeros(n_partial + 1, np.int64)
    for p in range(n_partial):
        out_start[p + 1] = out_start[p] + out_count[p]
        in_start[p + 1] = in_start[p] + in_count[p]
    out_edges = np.empty(n_edges, np.int64)
    in_edges = np.empty(n_edges, np.int64)
    out_fill = out_start[:-1].copy()
    in_fill = in_start[:-1].copy()
    for e in range(n_edges):
        out_edges[out_fill[src[e]]] = dst[e]
        out_fill[src[e]] += 1
        in_edges[in_fill[dst[e]]] = src[e]
        in_fill[dst[e]] += 1

    stack = np.empty(n_partial, np.int64)
    # can a matched, non-mandatory vertex hand its slot to a free one?
    reach = np.zeros(n_partial, np.bool_)
    top = 0
    for p in range(n_partial):
        if not matched[p]:
            reach[p] = True
            stack[top] = p
            top += 1
    while top > 0:
        top -= 1
        p = stack[top]
        for k in range(in_start[p], in_start[p + 1]):
            q = in_edges[k]
            if not reach[q]:
                reach[q] = True
                stack[top] = q
                top += 1
    for p in range(n_partial):
        if reach[p] and matched[p] and not must[p]:
            return True

    # alternating cycle = directed cycle, found by Kahn peeling
    indeg = in_count
    top = 0
    for p in range(n_partial):
        if indeg[p] == 0:
            stack[top] = p
            top += 1
    seen = top
    while top > 0:
        top -= 1
        p = stack[top]
        for k in range(out_start[p], out_start[p + 1]):
            q = out_edges[k]
            indeg[q] -= 1
            if indeg[q] == 0:
                stack[top] = q
                top += 1
                seen += 1
    return seen != n_partial


def _unique_optimum(
    tight_fp: np.ndarray, match_fp: np.ndarray, partial_must: np.ndarray
) -> bool:
    """Exact uniqueness certificate for an optimal assignment.

    ``tight_fp`` is the tight-edge matrix oriented (fully-matched side x
    partially-matched side); ``match_fp`` maps each full-side vertex to its
    partner. Alternative optima exist iff the partial-side digraph (partner
    -> other tight neighbors of the same full vertex) has a directed cycle,
    or a non-mandatory matched partial vertex can reach a free one.
    Degenerate duals make many edges tight without creating either, so this
    keeps generic solves off the tie-canonicalization path.
    """
    n_partial = tight_fp.shape[1]
    src_full, dst = np.nonzero(tight_fp)
    src = match_fp[src_full]
    keep = src != dst
    src = np.ascontiguousarray(src[keep])
    dst = np.ascontiguousarray(dst[keep])
    matched_mask = np.zeros(n_partial, dtype=bool)
    matched_mask[match_fp] = True
    return not _alternatives_kernel(
        src, dst, matched_mask, np.ascontiguousarray(partial_must), n_partial
    )


def solve_lap(C: np.ndarray) -> Assignment:
    """Minimum-total-cost assignment of size ``min(n_rows, n_cols)``.

    Deterministic: among equal-cost optima the lexicographically smallest
    pair list is returned.
    """
    C = _validate_cost(C)
    nr, nc = C.shape
    tol = _TIE_RTOL * max(1.0, float(C.max()))

    if nr <= nc:
        row2col, u, v = _jv_shortest_path(np.ascontiguousarray(C))
        tight = (C - u[:, None] - v[None, :]) <= tol
        row_must = np.ones(nr, dtype=bool)
        col_must = v < -tol
        init_r2c = row2col
        unique = _unique_optimum(tight, row2col, col_must)
    else:
        col2row, u_cols, v_rows = _jv_shortest_path(np.ascontiguousarray(C.T))
        tight = (C - v_rows[:, None] - u_cols[None, :]) <= tol
        row_must = v_rows < -tol
        col_must = np.ones(nc, dtype=bool)
        init_r2c = np.full(nr, -1, dtype=np.int64)
        init_r2c[col2row] = np.arange(nc)
        unique = _unique_optimum(np.ascontiguousarray(tight.T), col2row, row_must)

    if unique:
        rows = np.flatnonzero(init_r2c >= 0)
        pairs = tuple(zip(rows.tolist(), init_r2c[rows].tolist()))
        total = float(C[rows, init_r2c[rows]].sum())
    else:
        pairs = tuple(_LexRefiner(tight, row_must, col_must, init_r2c).sweep())
        idx = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        total = float(C[idx[:, 0], idx[:, 1]].sum())
    return Assignment(pairs=pairs, total_cost=total)


def brute_force_lap(C: np.ndarray) -> Assignment:
    """Exhaustive-enumeration assignment oracle for ``min(dims) <= 8``.

    Enumerates every injection of the smaller side into the larger one and
    keeps the cheapest, breaking exact cost ties toward the
    lexicographically smallest pair list.
    """
    C = _validate_cost(C)
    nr, nc = C.shape
    if min(nr, nc) > BRUTE_FORCE_CAP:
        raise ValueError(
            f"brute force capped at min dimension {BRUTE_FORCE_CAP}, got {min(nr, nc)}"
        )
    if nr <= nc:
        perms = np.array(list(permutations(range(nc), nr)), dtype=np.int64)
        totals = C[np.arange(nr)[None, :], perms].sum(axis=1)
        # permutations() yields column tuples in lexicographic order, which
        # matches pair-list order when rows are 0..nr-1.
        best = int(np.flatnonzero(totals == totals.min())[0])
        pairs = tuple((i, int(perms[best, i])) for i in range(nr))
        return Assignment(pairs=pairs, total_cost=float(totals[best]))
    perms = np.array(list(permutations(range(nr), nc)), dtype=np.int64)
    totals = C[perms, np.arange(nc)[None, :]].sum(axis=1)
    candidates = np.flatnonzero(totals == totals.min())
    best_pairs = min(
        tuple(sorted((int(perms[k, j]), j) for j in range(nc))) for k in candidates
    )
    return Assignment(pairs=best_pairs, total_cost=float(totals.min()))


def part_mapping(emb_i: EmbeddingMap, emb_prev: EmbeddingMap, j: int) -> Mapping:
    """Injective pixel mapping for body part ``j`` between two frames.

    Empty if the part is absent from either frame.
    """
    q_set = part_pixels(emb_i, j)
    s_set = part_pixels(emb_prev, j)
    if len(q_set) == 0 or len(s_set) == 0:
        return empty_mapping()
    C = cost_matrix(feature_matrix(emb_i, q_set), feature_matrix(emb_prev, s_set))
    assignment = solve_lap(C)
    pairs = np.empty((len(assignment.pairs), 5), dtype=np.int64)
    for k, (qi, si) in enumerate(assignment.pairs):
        pairs[k, 0:2] = q_set.pixels[qi]
        pairs[k, 2:4] = s_set.pixels[si]
        pairs[k, 4] = j
    return Mapping(pairs)


def full_mapping(emb_i: EmbeddingMap, emb_prev: EmbeddingMap) -> Mapping:
    """Union of per-part mappings over all 24 parts, sorted by q pixel.

    Injectivity is preserved because part pixel sets are disjoint within
    each frame.
    """
    if emb_i.labels.shape != emb_prev.labels.shape:
        raise ValueError(
            f"frame grids differ: {emb_i.labels.shape} vs {emb_prev.labels.shape}"
        )
    blocks = [part_mapping(emb_i, emb_prev, j).pairs for j in range(1, N_PARTS + 1)]
    stacked = np.concatenate(blocks, axis=0)
    order = np.lexsort((stacked[:, 1], stacked[:, 0]))
    return Mapping(stacked[order])


@dataclass(frozen=True)
class LapBenchResult:
    sizes: tuple[int, ...]
    seconds: tuple[float, ...]
    slope: float


def bench_lap(
    sizes: tuple[int, ...] = (128, 256, 512, 1024),
    seed: int = 0,
    repeats: int = 2,
    matrices: int = 5,
) -> LapBenchResult:
    """Time solve_lap on square uniform-random matrices and fit the log-log
    slope, the empirical scaling exponent.

    Per size, ``matrices`` distinct instances are each timed best-of-
    ``repeats`` and averaged; instance-to-instance variance in augmenting
    path lengths is large enough to distort a single-matrix fit. A small
    warmup solve keeps one-time costs (JIT compilation) out of the timings.
    """
    rng = np.random.default_rng(seed)
    solve_lap(rng.random((16, 16)))
    times = []
    for n in sizes:
        per_matrix = []
        for _ in range(max(1, matrices)):
            C = rng.random((n, n))
            best = np.inf
            for _ in range(max(1, repeats)):
                t0 = time.perf_counter()
                solve_lap(C)
                best = min(best, time.perf_counter() - t0)
            per_matrix.append(best)
        times.append(float(np.mean(per_matrix)))
    slope = float(np.polyfit(np.log(np.asarray(sizes)), np.log(np.asarray(times)), 1)[0])
    return LapBenchResult(sizes=tuple(sizes), seconds=tuple(times), slope=slope)
