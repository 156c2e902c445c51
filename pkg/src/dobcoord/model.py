"""Follower, disturbance and leader models plus their standing checks."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .matops import as_matrix, eigenvalues, numerical_rank


def _vector(v, size, name):
    a = np.array(v, dtype=float).reshape(-1)
    if a.size != size:
        raise DimensionError(f"{name} must have {size} entries, got {a.size}")
    return a


@dataclass(frozen=True)
class AgentModel:
    """Follower ``x' = A x + B u + E d``, ``y = C x + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else as_matrix(self.D, "D")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        E = np.zeros((n, 0)) if self.E is None else np.array(self.E, dtype=float)
        if E.ndim != 2 or E.shape[0] != n:
            raise DimensionError(f"E must have {n} rows, got {E.shape}")
        for name, m in zip("ABCDE", (A, B, C, D, E)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def l(self):
        return self.C.shape[0]

    @property
    def q(self):
        return self.E.shape[1]


@dataclass(frozen=True)
class DisturbanceExosystem:
    S: np.ndarray
    initial: np.ndarray = field(default=None)

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.ndim == 0:
            S = S.reshape(1, 1)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError(f"disturbance S must be square, got {S.shape}")
        q = S.shape[0]
        d0 = np.zeros(q) if self.initial is None else _vector(self.initial, q, "d(0)")
        S.setflags(write=False)
        d0.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "initial", d0)

    @property
    def q(self):
        return self.S.shape[0]

    @classmethod
    def none(cls):
        return cls(np.zeros((0, 0)))


@dataclass(frozen=True)
class LeaderExosystem:
    """Reference generator ``r' = S0 r``, ``y0 = F0 r``."""

    S0: np.ndarray
    F0: np.ndarray
    initial: np.ndarray = field(default=None)

    def __post_init__(self):
        S0 = as_matrix(self.S0, "S0")
        F0 = as_matrix(self.F0, "F0")
        if S0.shape[0] != S0.shape[1]:
            raise DimensionError(f"S0 must be square, got {S0.shape}")
        if F0.shape[1] != S0.shape[0]:
            raise DimensionError(f"F0 must have {S0.shape[0]} columns, got {F0.shape}")
        r0 = np.zeros(S0.shape[0]) if self.initial is None else _vector(self.initial, S0.shape[0], "r(0)")
        for name, m in (("S0", S0), ("F0", F0), ("initial", r0)):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def n0(self):
        return self.S0.shape[0]

    @property
    def l(self):
        return self.F0.shape[0]


def mass_damper_spring(f, g, e_row=None):
    """Unit-mass ``y'' + g y' + f y = u + e_row . d`` in position/velocity form.

    The row ``e_row`` enters the velocity equation, so the state-space
    disturbance channel is ``E = [0; e_row]``.
    """
    A = np.array([[0.0, 1.0], [-float(f), -float(g)]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    D = np.zeros((1, 1))
    if e_row is None:
        E = np.zeros((2, 0))
    else:
        e_row = np.atleast_1d(np.array(e_row, dtype=float))
        E = np.vstack([np.zeros_like(e_row), e_row])
    return AgentModel(A, B, C, D, E)


def _unstable_modes(A):
    return [lam for lam in eigenvalues(A) if lam.real >= 0]


def check_detectability(C, A):
    """PBH: ``rank [A - lam I; C] = n`` for every eigenvalue with ``Re(lam) >= 0``."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    if n == 0:
        return True
    if C.ndim != 2 or C.shape[1] != n:
        raise DimensionError(f"C must have {n} columns, got {C.shape}")
    eye = np.eye(n)
    return all(numerical_rank(np.vstack([A - lam * eye, C])) == n for lam in _unstable_modes(A))


def check_stabilizability(A, B):
    A = np.asarray(A, dtype=float)
    return check_detectability(np.asarray(B, dtype=float).T, A.T)


def check_rank_condition(agent, exo_eigs):
    """Transmission-zero condition ``rank [A - lam I, B; C, D] = n + l`` at each ``lam``."""
    top = lambda lam: np.hstack([agent.A - lam * np.eye(agent.n), agent.B])
    bottom = np.hstack([agent.C, agent.D]).astype(complex)
    need = agent.n + agent.l
    return all(numerical_rank(np.vstack([top(lam), bottom])) == need for lam in np.atleast_1d(exo_eigs))


def composite_pair(agent, dist):
    """Output map and state matrix of the plant augmented with its disturbance."""
    q = dist.q
    Ac = np.block([[agent.A, agent.E], [np.zeros((q, agent.n)), dist.S]])
    Cc = np.hstack([agent.C, np.zeros((agent.l, q))])
    return Cc, Ac


@dataclass
class Issue:
    agent: int  # 0 = leader, -1 = whole scenario
    check: str
    message: str
    severity: str = "error"

    def __str__(self):
        who = "leader" if self.agent == 0 else ("scenario" if self.agent < 0 else f"agent {self.agent}")
        return f"[{self.severity}] {who}: {self.check}: {self.message}"


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    @property
    def errors(self):
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self):
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self):
        return not self.errors

    def add(self, *args, **kw):
        self.issues.append(Issue(*args, **kw))


def validate_scenario_models(agents, disturbances, leader):
    """Collect every violated standing assumption; nothing is raised."""
    report = ValidationReport()
    if len(agents) != len(disturbances):
        report.add(-1, "dimensions", f"{len(agents)} agents but {len(disturbances)} disturbance models")
        return report

    if np.any(eigenvalues(leader.S0).real < 0):
        report.add(0, "exosystem-eigenvalues", "S0 has eigenvalues in the open left half-plane", "warning")
    if not check_detectability(leader.F0, leader.S0):
        report.add(0, "detectability", "(F0, S0) is not detectable")

    s0_eigs = eigenvalues(leader.S0)
    for i, (agent, dist) in enumerate(zip(agents, disturbances), start=1):
        if agent.l != leader.l:
            report.add(i, "dimensions", f"output has {agent.l} channels, leader has {leader.l}")
            continue
        if agent.q != dist.q:
            report.add(i, "dimensions", f"E has {agent.q} columns, disturbance S is {dist.q}x{dist.q}")
            continue
        if not check_stabilizability(agent.A, agent.B):
            report.add(i, "stabilizability", "(A, B) is not stabilizable")
        if dist.q and np.any(eigenvalues(dist.S).real < 0):
            report.add(i, "exosystem-eigenvalues", "S has eigenvalues in the open left half-plane", "warning")
        Cc, Ac = composite_pair(agent, dist)
        if not check_detectability(Cc, Ac):
            report.add(i, "detectability", "([C, 0], [[A, E], [0, S]]) is not detectable")
        exo = np.concatenate([eigenvalues(dist.S), s0_eigs]) if dist.q else s0_eigs
        if not check_rank_condition(agent, exo):
            # sufficient only; the regulator solve is the real test
            report.add(i, "rank-condition", "transmission-zero rank condition fails", "warning")
    return report
