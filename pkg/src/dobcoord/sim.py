"""Switched closed-loop assembly, RK4 integration and tracking metrics.

The stacked state is laid out as ``x_1..x_N, d_1..d_N, r`` followed by the
controller states the chosen law needs (``xi_i``, ``zeta_i``, ``eta_i``).
All three laws are linear, so for each graph the vector field is a
matrix. That matrix is obtained by evaluating the controller right-hand
sides on the unit vectors, which keeps :mod:`dobcoord.controllers` the
single source of truth for the dynamics.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .controllers import (
    NeighborView,
    full_information_control,
    full_order_dob_rhs,
    reduced_order_dob_rhs,
)
from .errors import DimensionError, DivergenceError, DobError

log = logging.getLogger(__name__)

LAWS = ("full-info", "full-order", "reduced-order")


def _layout(agents, disturbances, leader, law):
    slices = {}
    pos = 0

    def add(key, size):
        nonlocal pos
        slices[key] = slice(pos, pos + size)
        pos += size

    N = len(agents)
    for i in range(N):
        add(("x", i), agents[i].n)
    for i in range(N):
        add(("d", i), disturbances[i].q)
    add(("r",), leader.n0)
    if law == "full-order":
        for i in range(N):
            add(("xi", i), agents[i].n)
    if law in ("full-order", "reduced-order"):
        for i in range(N):
            add(("zeta", i), disturbances[i].q)
        for i in range(N):
            add(("eta", i), leader.n0)
    return slices, pos


@dataclass(frozen=True)
class ClosedLoopSystem:
    agents: tuple
    disturbances: tuple
    leader: object
    schedule: object
    gains: object
    law: str
    layout: dict
    dim: int
    initial: np.ndarray = field(repr=False)

    @property
    def n_followers(self):
        return len(self.agents)

    def part(self, z, key):
        return z[..., self.layout[key]]

    def evaluate(self, graph_index, z):
        """``(dz/dt, u)`` with graph ``graph_index`` active; ``u`` stacked per agent."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise DimensionError(f"state must have {self.dim} entries, got {z.shape}")
        ld = self.leader
        dz = np.zeros(self.dim)
        us = []
        r = self.part(z, ("r",))
        dz[self.layout[("r",)]] = ld.S0 @ r
        weights = self.schedule.graphs[graph_index].weights
        if self.law != "full-info":
            y0 = ld.F0 @ r
            eta_out = [ld.F0 @ self.part(z, ("eta", j)) for j in range(self.n_followers)]
        for i, (agent, dist, g) in enumerate(zip(self.agents, self.disturbances, self.gains.agents)):
            x = self.part(z, ("x", i))
            d = self.part(z, ("d", i))
            dz[self.layout[("d", i)]] = dist.S @ d
            if self.law == "full-info":
                u = full_information_control(x, d, r, g)
            else:
                view = NeighborView.from_graph(weights, i + 1, eta_out, y0)
                eta = self.part(z, ("eta", i))
                zeta = self.part(z, ("zeta", i))
                if self.law == "full-order":
                    xi = self.part(z, ("xi", i))
                    u_pred = g.K1 @ xi + g.K2 @ zeta + g.K3 @ eta
                    y = agent.C @ x + agent.D @ u_pred
                    u, dxi, dzeta, deta = full_order_dob_rhs(agent, dist, g, xi, zeta, eta, y, view,
                                                             self.gains.L0, ld)
                    dz[self.layout[("xi", i)]] = dxi
                else:
                    u, dzeta, deta = reduced_order_dob_rhs(agent, dist, g, x, zeta, eta, view,
                                                           self.gains.L0, ld)
                dz[self.layout[("zeta", i)]] = dzeta
                dz[self.layout[("eta", i)]] = deta
            dz[self.layout[("x", i)]] = agent.A @ x + agent.B @ u + agent.E @ d
            us.append(u)
        return dz, np.concatenate(us) if us else np.zeros(0)

    def rhs(self, t, z):
        return self.evaluate(self.schedule.graph_at(t), z)[0]

    def _linearize(self, graph_index):
        eye = np.eye(self.dim)
        cols = [self.evaluate(graph_index, eye[k]) for k in range(self.dim)]
        M = np.column_stack([c[0] for c in cols]) if cols else np.zeros((0, 0))
        U = np.column_stack([c[1] for c in cols]) if cols else np.zeros((0, 0))
        return M, U

    @cached_property
    def _matrices(self):
        return {k: self._linearize(k)[0] for k in sorted({k for k, _ in self.schedule.segments})}

    def matrix(self, graph_index):
        """Constant system matrix while graph ``graph_index`` is active."""
        if graph_index in self._matrices:
            return self._matrices[graph_index]
        return self._linearize(graph_index)[0]

    @cached_property
    def control_map(self):
        """Stacked controls ``u = control_map @ z`` (graph independent)."""
        return self._linearize(self.schedule.segments[0][0])[1]

    @cached_property
    def output_map(self):
        """Rows give ``y_1..y_N`` (each ``l`` entries) as linear functions of ``z``."""
        rows = []
        u_off = 0
        for i, agent in enumerate(self.agents):
            Y = np.zeros((agent.l, self.dim))
            Y[:, self.layout[("x", i)]] = agent.C
            Y += agent.D @ self.control_map[u_off:u_off + agent.m]
            u_off += agent.m
            rows.append(Y)
        return np.vstack(rows)


def assemble(agents, disturbances, leader, schedule, gains, law, initials=None):
    """Build the closed-loop system.

    ``initials`` maps layout keys (``("x", i)``, ``("d", i)``, ``("r",)``,
    ``("xi", i)``, ...) to initial vectors; anything missing starts from the
    model's stored initial value (disturbances, leader) or from zero.
    """
    if law not in LAWS:
        raise ValueError(f"unknown law {law!r}; choose from {LAWS}")
    agents, disturbances = tuple(agents), tuple(disturbances)
    if not (len(agents) == len(disturbances) == len(gains.agents) == schedule.n_followers):
        raise DimensionError("agents, disturbances, gains and graphs disagree on the follower count")
    for i, (a, dist) in enumerate(zip(agents, disturbances), start=1):
        if a.q != dist.q or a.l != leader.l:
            raise DimensionError(f"agent {i} is not conformable with its disturbance/leader models")
    layout, dim = _layout(agents, disturbances, leader, law)
    z0 = np.zeros(dim)
    for i, dist in enumerate(disturbances):
        z0[layout[("d", i)]] = dist.initial
    z0[layout[("r",)]] = leader.initial
    for key, value in (initials or {}).items():
        if key not in layout:
            raise KeyError(f"initial value for {key!r} does not exist under law {law!r}")
        sl = layout[key]
        value = np.asarray(value, dtype=float).reshape(-1)
        if value.size != sl.stop - sl.start:
            raise DimensionError(f"initial value for {key!r} needs {sl.stop - sl.start} entries")
        z0[sl] = value
    z0.setflags(write=False)
    return ClosedLoopSystem(agents, disturbances, leader, schedule, gains, law, layout, dim, z0)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray  # (T, N, l)
    reference: np.ndarray  # (T, l)
    switch_times: tuple = ()

    @property
    def errors(self):
        return self.outputs - self.reference[:, None, :]

    @property
    def n_followers(self):
        return self.outputs.shape[1]


def _steps(duration, h):
    n = int(math.floor(duration / h + 1e-9))
    rem = duration - n * h
    steps = np.full(n, h)
    if rem > 1e-12 * max(1.0, duration):
        steps = np.append(steps, rem)
    return steps


def integrate(sys, t_end, h=1e-3, use_numba=None):
    """Classical RK4 with step boundaries on every switching instant.

    Every step is recorded. Raises :class:`DivergenceError` if the state
    max-norm exceeds ``1e9``.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    times = [np.zeros(1)]
    states = [sys.initial[None, :].copy()]
    z = np.array(sys.initial)
    for start, end, k in sys.schedule.intervals(t_end):
        steps = _steps(end - start, h)
        if steps.size == 0:
            continue
        out = np.empty((steps.size + 1, sys.dim))
        bad = kernels.rk4_linear(sys.matrix(k), z, steps, out, use_numba=use_numba)
        t = start + h * np.arange(steps.size + 1)
        t[-1] = end
        if bad >= 0:
            raise DivergenceError(float(t[bad]))
        times.append(t[1:])
        states.append(out[1:])
        z = out[-1]
    times = np.concatenate(times)
    states = np.vstack(states)
    log.debug("integrated %d steps of size %g up to t=%g", len(times) - 1, h, t_end)
    N, l = sys.n_followers, sys.leader.l
    outputs = (states @ sys.output_map.T).reshape(len(times), N, l)
    reference = states[:, sys.layout[("r",)]] @ sys.leader.F0.T
    return Trajectory(times, states, outputs, reference, tuple(sys.schedule.switching_times(t_end)))


def rk4(f, z0, t_end, h, t0=0.0):
    """Plain fixed-step RK4 for a callable ``f(t, z)``; returns ``(times, states)``."""
    steps = _steps(t_end - t0, h)
    z = np.array(z0, dtype=float)
    out = [z.copy()]
    t = t0
    for dt in steps:
        k1 = f(t, z)
        k2 = f(t + dt / 2, z + dt / 2 * k1)
        k3 = f(t + dt / 2, z + dt / 2 * k2)
        k4 = f(t + dt, z + dt * k3)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        out.append(z.copy())
    return t0 + np.concatenate([[0.0], np.cumsum(steps)]), np.array(out)


def _error_norms(traj):
    return np.max(np.abs(traj.errors), axis=2)  # (T, N)


def max_error_after(traj, T):
    """Per-agent max of ``|e_i(t)|_inf`` over samples with ``t >= T``."""
    mask = traj.times >= T - 1e-9
    if not np.any(mask):
        raise ValueError(f"no samples at or after t = {T}")
    return _error_norms(traj)[mask].max(axis=0)


def convergence_time(traj, tol):
    """Per agent, earliest ``t`` after which ``|e_i| <= tol`` holds; ``None`` if never."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    norms = _error_norms(traj)
    result = []
    for i in range(norms.shape[1]):
        bad = np.nonzero(norms[:, i] > tol)[0]
        if bad.size == 0:
            result.append(float(traj.times[0]))
        elif bad[-1] == len(traj.times) - 1:
            result.append(None)
        else:
            result.append(float(traj.times[bad[-1] + 1]))
    return result


def observer_error_norms(traj, sys):
    """Time series of observer errors per agent.

    Returns a dict with ``"leader"`` (``|eta_i - r|``), ``"disturbance"``
    (``|zeta_i - d_i|`` for the full-order law, ``|zeta_i - L_i x_i - d_i|``
    for the reduced-order one) and, for the full-order law, ``"state"``
    (``|xi_i - x_i|``). Each entry has shape ``(T, N)``.
    """
    if sys.law == "full-info":
        raise DobError("the full-information law has no observers")
    Z = traj.states
    r = sys.part(Z, ("r",))
    out = {"leader": [], "disturbance": []}
    if sys.law == "full-order":
        out["state"] = []
    for i, g in enumerate(sys.gains.agents):
        x, d = sys.part(Z, ("x", i)), sys.part(Z, ("d", i))
        zeta = sys.part(Z, ("zeta", i))
        out["leader"].append(np.linalg.norm(sys.part(Z, ("eta", i)) - r, axis=1))
        if sys.law == "full-order":
            out["state"].append(np.linalg.norm(sys.part(Z, ("xi", i)) - x, axis=1))
            out["disturbance"].append(np.linalg.norm(zeta - d, axis=1))
        else:
            out["disturbance"].append(np.linalg.norm(zeta - x @ g.L.T - d, axis=1))
    return {k: np.column_stack(v) for k, v in out.items()}


def csv_columns(traj, observer_norms=None):
    N, l = traj.outputs.shape[1:]
    suffix = (lambda k: "") if l == 1 else (lambda k: f".{k + 1}")
    header = ["t"] + [f"y0{suffix(k)}" for k in range(l)]
    cols = [traj.times] + [traj.reference[:, k] for k in range(l)]
    for name, data in (("y", traj.outputs), ("e", traj.errors)):
        for i in range(N):
            for k in range(l):
                header.append(f"{name}_{i + 1}{suffix(k)}")
                cols.append(data[:, i, k])
    for key in ("state", "disturbance", "leader"):
        if observer_norms and key in observer_norms:
            for i in range(N):
                header.append(f"{key}_err_{i + 1}")
                cols.append(observer_norms[key][:, i])
    return header, np.column_stack(cols)


def write_csv(path, traj, observer_norms=None, every=1, comments=()):
    """Write the trajectory with 15 significant digits.

    ``comments`` become leading ``# key=value`` lines. ``every`` keeps every
    k-th sample (the final sample is always kept).
    """
    header, data = csv_columns(traj, observer_norms)
    idx = np.arange(0, data.shape[0], max(1, int(every)))
    if idx[-1] != data.shape[0] - 1:
        idx = np.append(idx, data.shape[0] - 1)
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data[idx]:
            writer.writerow([f"{v:.15g}" for v in row])
