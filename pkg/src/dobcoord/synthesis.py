"""Gain synthesis for the distributed disturbance-observer controllers.

The pipeline per follower is: regulator equations -> stabilizing state
feedback -> feedforward gains -> disturbance observer gains. The leader
observer gain ``L0`` and its Lyapunov certificate ``P`` are shared by all
followers and depend on the graphs only through the smallest grounded
Laplacian eigenvalue.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import NoSolutionError, SynthesisError, UnsolvableRegulatorError
from .graph import grounded, min_eigenvalue_over
from .matops import (
    as_matrix,
    equation,
    is_hurwitz,
    solve_linear_matrix_system,
    spectral_abscissa,
    term,
)
from .model import check_detectability, check_stabilizability, composite_pair

HURWITZ_MARGIN = 1e-6
LYAPUNOV_STRICTNESS = 1e-8
MIN_DECAY = 1e-9
REGULATOR_TOL = 1e-10


def solve_care(A, G, Q):
    """Stabilizing solution of ``A^T X + X A - X G X + Q = 0``.

    Uses the stable invariant subspace of the Hamiltonian
    ``[[A, -G], [-Q, -A^T]]``, spanned by ordered real Schur vectors.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    ham = np.block([[A, -G], [-Q, -A.T]])
    T, Z, sdim = scipy.linalg.schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise SynthesisError(
            f"Hamiltonian has {sdim} stable eigenvalues, expected {n} "
            "(eigenvalues on the imaginary axis: pair not stabilizable/detectable)"
        )
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise SynthesisError("stable invariant subspace is not a graph; no stabilizing solution")
    X = np.linalg.solve(U1.T, U2.T).T
    return 0.5 * (X + X.T)


def lqr_gain(A, B):
    """Unit-weight LQR gain ``K`` so that ``A + B K`` is Hurwitz."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    X = solve_care(A, B @ B.T, np.eye(A.shape[0]))
    return -B.T @ X


def observer_gain(C, A):
    """Dual of :func:`lqr_gain`: ``L`` with ``A + L C`` Hurwitz."""
    return lqr_gain(np.asarray(A).T, np.asarray(C).T).T


@dataclass(frozen=True)
class RegulatorSolution:
    X1: np.ndarray
    U1: np.ndarray
    X2: np.ndarray
    U2: np.ndarray
    unique: bool = True

    def residuals(self, agent, dist, leader):
        A, B, C, D, E = agent.A, agent.B, agent.C, agent.D, agent.E
        r1 = np.linalg.norm(self.X1 @ dist.S - A @ self.X1 - B @ self.U1 - E)
        r2 = np.linalg.norm(C @ self.X1 + D @ self.U1)
        r3 = np.linalg.norm(self.X2 @ leader.S0 - A @ self.X2 - B @ self.U2)
        r4 = np.linalg.norm(C @ self.X2 + D @ self.U2 - leader.F0)
        return float(max(r1, r2)), float(max(r3, r4))


def _regulator_pair(agent, S, Ein, Fout):
    # X S - A X - B U = Ein ;  C X + D U = Fout
    n, m, k = agent.n, agent.m, S.shape[0]
    eqs = [
        equation([term(0, np.eye(n), S), term(0, -agent.A, np.eye(k)), term(1, -agent.B, np.eye(k))], Ein),
        equation([term(0, agent.C, np.eye(k)), term(1, agent.D, np.eye(k))], Fout),
    ]
    return solve_linear_matrix_system(eqs, [(n, k), (m, k)], tol=REGULATOR_TOL)


def solve_regulator_equations(agent, dist, leader):
    """Solve both regulator equation pairs (disturbance and reference)."""
    q, n0 = dist.q, leader.n0
    if q:
        try:
            sol1 = _regulator_pair(agent, dist.S, agent.E, np.zeros((agent.l, q)))
        except NoSolutionError as exc:
            raise UnsolvableRegulatorError(
                f"disturbance regulator equations have no solution (residual {exc.residual:.3e})",
                pair="disturbance",
            ) from exc
        X1, U1 = sol1.blocks
        unique1 = sol1.unique
    else:
        X1, U1, unique1 = np.zeros((agent.n, 0)), np.zeros((agent.m, 0)), True
    try:
        sol2 = _regulator_pair(agent, leader.S0, np.zeros((agent.n, n0)), leader.F0)
    except NoSolutionError as exc:
        raise UnsolvableRegulatorError(
            f"reference regulator equations have no solution (residual {exc.residual:.3e})",
            pair="reference",
        ) from exc
    X2, U2 = sol2.blocks
    return RegulatorSolution(X1, U1, X2, U2, unique1 and sol2.unique)


def stabilizing_gain(agent, margin=HURWITZ_MARGIN):
    if not check_stabilizability(agent.A, agent.B):
        raise SynthesisError("(A, B) is not stabilizable")
    K1 = lqr_gain(agent.A, agent.B)
    if not is_hurwitz(agent.A + agent.B @ K1, margin):
        raise SynthesisError("LQR gain failed to stabilize (A, B) with the required margin")
    return K1


def feedforward_gains(reg, K1):
    """``K2 = U1 - K1 X1`` and ``K3 = U2 - K1 X2``."""
    K1 = np.asarray(K1, dtype=float)
    return reg.U1 - K1 @ reg.X1, reg.U2 - K1 @ reg.X2


def lyapunov_certificate(leader):
    """Symmetric ``P > 0`` with ``P S0 + S0^T P - 2 F0^T F0 < 0``.

    ``P`` is the inverse of the stabilizing solution of the filter Riccati
    equation ``S0 Sig + Sig S0^T - Sig F0^T F0 Sig + I = 0``, which gives
    ``P S0 + S0^T P - 2 F0^T F0 = -F0^T F0 - P^2``.
    """
    if not check_detectability(leader.F0, leader.S0):
        raise SynthesisError("(F0, S0) is not detectable")
    S0, F0 = leader.S0, leader.F0
    sigma = solve_care(S0.T, F0.T @ F0, np.eye(leader.n0))
    P = np.linalg.inv(sigma)
    P = 0.5 * (P + P.T)
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise SynthesisError("Riccati solution is not positive definite")
    if lyapunov_slack(P, leader) > -LYAPUNOV_STRICTNESS:
        raise SynthesisError("Lyapunov inequality for the leader observer is not strict")
    return P


def lyapunov_slack(P, leader):
    """Largest eigenvalue of ``P S0 + S0^T P - 2 F0^T F0`` (negative when satisfied)."""
    M = P @ leader.S0 + leader.S0.T @ P - 2 * leader.F0.T @ leader.F0
    return float(np.max(np.linalg.eigvalsh(0.5 * (M + M.T))))


def leader_observer_gain(leader, lambda_bar):
    """Return ``(P, L0, mu_star)`` with ``L0 = -mu_star P^{-1} F0^T``."""
    if not lambda_bar > 0:
        raise ValueError("lambda_bar must be positive")
    P = lyapunov_certificate(leader)
    mu_star = max(1.0 / lambda_bar, 1.0)
    L0 = -mu_star * np.linalg.solve(P, leader.F0.T)
    return P, L0, mu_star


@dataclass(frozen=True)
class LyapunovCheck:
    ok: bool
    c: float
    per_eigenvalue: tuple
    violating: tuple = ()


def verify_common_lyapunov(P, L0, leader, eigs):
    """Largest ``c`` with ``M^T P + P M <= -c P`` for ``M = S0 + lam L0 F0``, every ``lam``.

    For each ``lam`` the best ``c`` is the smallest generalized eigenvalue
    of the pencil ``(-(M^T P + P M), P)``.
    """
    P = as_matrix(P, "P")
    L0 = as_matrix(np.reshape(L0, (leader.n0, leader.l)), "L0")
    P = 0.5 * (P + P.T)
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise ValueError("P must be positive definite")
    cs = []
    for lam in eigs:
        M = leader.S0 + lam * L0 @ leader.F0
        Q = M.T @ P + P @ M
        cs.append(float(np.min(scipy.linalg.eigh(-0.5 * (Q + Q.T), P, eigvals_only=True))))
    violating = tuple(float(lam) for lam, c in zip(eigs, cs) if c < MIN_DECAY)
    c = min(cs) if cs else np.inf
    return LyapunovCheck(not violating, c, tuple(cs), violating)


def full_order_observer_gains(agent, dist, margin=HURWITZ_MARGIN):
    """``(L1, L2)`` making ``[[A + L1 C, E], [L2 C, S]]`` Hurwitz."""
    Cc, Ac = composite_pair(agent, dist)
    if not check_detectability(Cc, Ac):
        raise SynthesisError("composite plant/disturbance pair is not detectable")
    Lc = observer_gain(Cc, Ac)
    L1, L2 = Lc[:agent.n], Lc[agent.n:]
    if not is_hurwitz(composite_observer_matrix(agent, dist, L1, L2), margin):
        raise SynthesisError("observer gain failed to stabilize the composite error dynamics")
    return L1, L2


def composite_observer_matrix(agent, dist, L1, L2):
    L1 = np.reshape(L1, (agent.n, agent.l))
    L2 = np.reshape(L2, (dist.q, agent.l))
    return np.block([[agent.A + L1 @ agent.C, agent.E], [L2 @ agent.C, dist.S]])


def reduced_order_observer_gain(agent, dist, margin=HURWITZ_MARGIN):
    """``L`` (q x n) with ``S + L E`` Hurwitz."""
    if dist.q == 0:
        return np.zeros((0, agent.n))
    if not check_detectability(agent.E, dist.S):
        raise SynthesisError("(E, S) is not detectable; no reduced-order observer exists")
    L = observer_gain(agent.E, dist.S)
    if not is_hurwitz(dist.S + L @ agent.E, margin):
        raise SynthesisError("reduced-order observer gain failed to stabilize S + L E")
    return L


@dataclass(frozen=True)
class AgentGains:
    K1: np.ndarray
    K2: np.ndarray
    K3: np.ndarray
    L1: np.ndarray = None
    L2: np.ndarray = None
    L: np.ndarray = None
    regulator: RegulatorSolution = None


@dataclass(frozen=True)
class GainSet:
    agents: tuple
    L0: np.ndarray
    P: np.ndarray = None
    mu_star: float = None
    c: float = None

    def with_agent(self, index, **changes):
        agents = list(self.agents)
        agents[index] = replace(agents[index], **changes)
        return replace(self, agents=tuple(agents))


@dataclass
class Check:
    name: str
    agent: int  # 0 for shared (leader) checks
    ok: bool
    value: float
    detail: str = ""

    def __str__(self):
        who = "shared" if self.agent == 0 else f"agent {self.agent}"
        status = "PASS" if self.ok else "FAIL"
        return f"{status}  {who:<8} {self.name:<28} {self.value: .6g}  {self.detail}".rstrip()


@dataclass
class GainReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.ok]


def validate_gains(agents, disturbances, leader, graphs, gains, margin=0.0):
    """Check every Hurwitz / Lyapunov / regulator condition a gain set must meet.

    The shared Lyapunov check uses ``gains.P`` when given, otherwise the
    Riccati certificate from :func:`lyapunov_certificate`.
    """
    report = GainReport()
    for i, (agent, dist, g) in enumerate(zip(agents, disturbances, gains.agents), start=1):
        a = spectral_abscissa(agent.A + agent.B @ g.K1)
        report.checks.append(Check("A + B K1 Hurwitz", i, a < -margin, a, "spectral abscissa"))
        reg = g.regulator if g.regulator is not None else solve_regulator_equations(agent, dist, leader)
        res = max(reg.residuals(agent, dist, leader))
        report.checks.append(Check("regulator residual", i, res <= REGULATOR_TOL, res))
        K2, K3 = feedforward_gains(reg, g.K1)
        dev = float(max(np.max(np.abs(K2 - g.K2), initial=0.0), np.max(np.abs(K3 - g.K3), initial=0.0)))
        report.checks.append(Check("feedforward consistency", i, dev <= 1e-9, dev, "max |K - (U - K1 X)|"))
        if g.L1 is not None:
            a = spectral_abscissa(composite_observer_matrix(agent, dist, g.L1, g.L2))
            report.checks.append(Check("full-order observer Hurwitz", i, a < -margin, a, "spectral abscissa"))
        if g.L is not None and dist.q:
            a = spectral_abscissa(dist.S + np.reshape(g.L, (dist.q, agent.n)) @ agent.E)
            report.checks.append(Check("reduced observer Hurwitz", i, a < -margin, a, "spectral abscissa"))
    P = gains.P if gains.P is not None else lyapunov_certificate(leader)
    slack = lyapunov_slack(P, leader)
    report.checks.append(Check("Lyapunov inequality", 0, slack <= -LYAPUNOV_STRICTNESS, slack, "max eig"))
    lyap = verify_common_lyapunov(P, gains.L0, leader, grounded_spectrum(graphs))
    detail = "decay c" + (f"; violated at {list(lyap.violating)}" if lyap.violating else "")
    report.checks.append(Check("common Lyapunov decay", 0, lyap.ok, lyap.c, detail))
    return report


def synthesize(agents, disturbances, leader, graphs, overrides=None, check=True):
    """Build a complete :class:`GainSet`.

    ``overrides`` maps ``"L0"`` and per-agent lists (``"agents"``: list of
    dicts with any of ``K1, L1, L2, L``) to fixed values used instead of
    synthesized ones. ``K2``/``K3`` are always recomputed from the regulator
    solution so they stay consistent with ``K1``. With ``check`` the result
    is re-validated and :class:`SynthesisError` raised on any failure.
    """
    overrides = overrides or {}
    per_agent = overrides.get("agents") or [{}] * len(agents)
    lambda_bar = min_eigenvalue_over(graphs)
    P, L0, mu_star = leader_observer_gain(leader, lambda_bar)
    if overrides.get("L0") is not None:
        L0 = np.reshape(np.array(overrides["L0"], dtype=float), (leader.n0, leader.l))

    out = []
    for agent, dist, ov in zip(agents, disturbances, per_agent):
        ov = ov or {}
        reg = solve_regulator_equations(agent, dist, leader)
        K1 = np.reshape(ov["K1"], (agent.m, agent.n)) if ov.get("K1") is not None else stabilizing_gain(agent)
        K2, K3 = feedforward_gains(reg, K1)
        if ov.get("L1") is not None or ov.get("L2") is not None:
            L1 = np.reshape(ov["L1"], (agent.n, agent.l))
            L2 = np.reshape(ov["L2"], (dist.q, agent.l))
        else:
            L1, L2 = full_order_observer_gains(agent, dist)
        if ov.get("L") is not None:
            L = np.reshape(ov["L"], (dist.q, agent.n))
        else:
            L = reduced_order_observer_gain(agent, dist)
        out.append(AgentGains(np.asarray(K1, float), K2, K3, np.asarray(L1, float), np.asarray(L2, float),
                              np.asarray(L, float), reg))

    lyap = verify_common_lyapunov(P, L0, leader, grounded_spectrum(graphs))
    gains = GainSet(tuple(out), L0, P, mu_star, lyap.c)
    if not check:
        return gains
    report = validate_gains(agents, disturbances, leader, graphs, gains, margin=HURWITZ_MARGIN)
    if not report.ok:
        raise SynthesisError("synthesized gains fail validation: " + "; ".join(str(c) for c in report.failures()))
    return gains


def grounded_spectrum(graphs):
    """Distinct grounded-Laplacian eigenvalues over all graphs, ascending."""
    return sorted({round(float(v), 12) for g in graphs for v in grounded(g).spectrum})
