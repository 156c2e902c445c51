"""Leader-follower communication graphs and dwell-time switching.

Node 0 is the leader; followers are 1..N. ``weights[i, j] > 0`` means
node ``j`` sends information to node ``i`` (row = receiver).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError, ScheduleExhaustedError
from .matops import eigenvalues

POSDEF_TOL = 1e-12


@dataclass(frozen=True)
class CommGraph:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise GraphError(f"adjacency must be square (N+1)x(N+1), got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise GraphError("edge weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0):
            raise GraphError("self-loops are not allowed")
        if np.any(w[0] != 0):
            raise GraphError("the leader (node 0) cannot receive information")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, n_followers, edges):
        """Build from ``(sender, receiver, weight)`` triples."""
        w = np.zeros((n_followers + 1, n_followers + 1))
        for edge in edges:
            if len(edge) == 2:
                src, dst, wt = edge[0], edge[1], 1.0
            else:
                src, dst, wt = edge
            src, dst = int(src), int(dst)
            if not (0 <= src <= n_followers and 0 <= dst <= n_followers):
                raise GraphError(f"edge {src}->{dst} references a node outside 0..{n_followers}")
            w[dst, src] = float(wt)
        return cls(w)

    @property
    def n_followers(self):
        return self.weights.shape[0] - 1

    def edges(self):
        dst, src = np.nonzero(self.weights)
        return [(int(s), int(d), float(self.weights[d, s])) for d, s in zip(dst, src)]

    def scaled(self, factor):
        return CommGraph(self.weights * factor)


def laplacian(g):
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def _grounded_matrix(g):
    return laplacian(g)[1:, 1:]


@dataclass(frozen=True)
class GroundedLaplacian:
    H: np.ndarray
    min_eigenvalue: float

    @property
    def spectrum(self):
        return np.sort(np.linalg.eigvalsh(self.H))


def validate_connected(g):
    """Leader reachable from every follower and follower block undirected.

    Decided through the grounded Laplacian: it must be symmetric and
    positive definite.
    """
    H = _grounded_matrix(g)
    if H.size == 0:
        return True
    if not np.allclose(H, H.T, atol=0.0, rtol=1e-12):
        return False
    return float(np.min(eigenvalues(H).real)) > POSDEF_TOL


def grounded(g):
    if not validate_connected(g):
        raise GraphError("graph is not connected (grounded Laplacian not positive definite)")
    H = _grounded_matrix(g)
    lam = float(np.min(np.linalg.eigvalsh(H))) if H.size else math.inf
    return GroundedLaplacian(H, lam)


def min_eigenvalue_over(graphs):
    graphs = list(graphs)
    if not graphs:
        raise ValueError("need at least one graph")
    return min(grounded(g).min_eigenvalue for g in graphs)


@dataclass(frozen=True)
class SwitchingSchedule:
    """Piecewise-constant topology signal.

    ``segments`` is a sequence of ``(graph_index, duration)`` with 0-based
    indices into ``graphs``. A periodic schedule repeats its segments
    forever; otherwise it ends after the last one.
    """

    graphs: tuple
    segments: tuple
    periodic: bool = True
    dwell_time: float = field(default=None)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        segments = tuple((int(k), float(d)) for k, d in self.segments)
        if not graphs:
            raise GraphError("schedule needs at least one graph")
        if not segments:
            raise GraphError("schedule needs at least one segment")
        sizes = {g.n_followers for g in graphs}
        if len(sizes) != 1:
            raise GraphError("all graphs in a schedule must have the same follower count")
        for k, d in segments:
            if not 0 <= k < len(graphs):
                raise GraphError(f"segment references graph {k}, only {len(graphs)} defined")
            if not d > 0:
                raise GraphError("segment durations must be positive")
        dwell = min(d for _, d in segments) if self.dwell_time is None else float(self.dwell_time)
        if dwell <= 0:
            raise GraphError("dwell time must be positive")
        short = [d for _, d in segments if d < dwell]
        if short:
            raise GraphError(f"segment duration {min(short)} is shorter than dwell time {dwell}")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "dwell_time", dwell)

    @property
    def n_followers(self):
        return self.graphs[0].n_followers

    @property
    def period(self):
        return sum(d for _, d in self.segments)

    def _locate(self, t):
        if t < 0:
            raise ValueError("t must be nonnegative")
        period = self.period
        if self.periodic:
            cycles = math.floor(t / period)
            base = cycles * period
        else:
            if t >= period:
                raise ScheduleExhaustedError(f"schedule ends at t = {period}, requested t = {t}")
            base = 0.0
        start = base
        for pos, (_, d) in enumerate(self.segments):
            end = start + d
            if t < end:
                return pos, start, end
            start = end
        # floating-point spill past the cycle end: first segment of next cycle
        return 0, start, start + self.segments[0][1]

    def graph_at(self, t):
        """Index of the graph active at time ``t`` (right-continuous)."""
        pos, _, _ = self._locate(t)
        return self.segments[pos][0]

    def switching_times(self, t_end):
        """Switching instants in ``(0, t_end)``, ascending."""
        return [start for start, _, _ in self.intervals(t_end)[1:]]

    def intervals(self, t_end):
        """``(start, end, graph_index)`` pieces covering ``[0, t_end]``.

        A zero-length horizon yields the single piece ``(0, 0, sigma(0))``.
        """
        ends = np.cumsum([d for _, d in self.segments])
        period = float(ends[-1])
        out = []
        start = 0.0
        cycle = 0
        while True:
            for (k, _), e in zip(self.segments, ends):
                end = cycle * period + float(e)
                if end >= t_end:
                    out.append((start, float(t_end), k))
                    return out
                out.append((start, end, k))
                start = end
            cycle += 1
            if not self.periodic:
                raise ScheduleExhaustedError(
                    f"schedule ends at t = {period}, requested t = {t_end}"
                )

    def validate_connected(self):
        return all(validate_connected(g) for g in self.graphs)

    def active_graphs(self):
        return [self.graphs[k] for k in sorted({k for k, _ in self.segments})]
