"""Right-hand sides of the follower control laws and the leader observer.

Every function is a pure evaluator: it reads explicit state values and
returns the control and the controller-state derivatives. Nothing here
integrates or stores state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class NeighborView:
    """What follower ``i`` can see from the active graph at one instant.

    ``neighbors`` holds ``(a_ij, F0 @ eta_j)`` for followers ``j`` with
    ``a_ij > 0``; ``leader_weight`` is ``a_i0`` and ``leader_output`` is
    ``y0``. Only outputs are exchanged, never full observer states.
    """

    neighbors: tuple
    leader_weight: float
    leader_output: np.ndarray

    @classmethod
    def from_graph(cls, weights, i, eta_outputs, y0):
        """``eta_outputs[j-1]`` is ``F0 @ eta_j`` for follower ``j``; ``i`` is 1-based."""
        row = weights[i]
        neighbors = tuple((float(row[j]), eta_outputs[j - 1]) for j in np.nonzero(row[1:])[0] + 1)
        return cls(neighbors, float(row[0]), np.asarray(y0, dtype=float))


def leader_observer_rhs(eta, view, L0, leader):
    """``S0 eta + L0 sum_j a_ij (F0 eta - F0 eta_j)``, the leader term using ``y0``."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (leader.n0,):
        raise DimensionError(f"eta must have {leader.n0} entries, got {eta.shape}")
    own = leader.F0 @ eta
    innovation = view.leader_weight * (own - view.leader_output)
    for a, out in view.neighbors:
        innovation = innovation + a * (own - out)
    return leader.S0 @ eta + np.reshape(L0, (leader.n0, leader.l)) @ innovation


def full_information_control(x, d, r, gains):
    """Baseline ``u = K1 x + K2 d + K3 r`` using the true exogenous states."""
    return gains.K1 @ np.asarray(x, float) + gains.K2 @ np.asarray(d, float) + gains.K3 @ np.asarray(r, float)


def full_order_dob_rhs(agent, dist, gains, xi, zeta, eta, y, view, L0, leader):
    """Output-feedback DOB law.

    Returns ``(u, dxi, dzeta, deta)``. The control only depends on the
    controller's own estimates, so ``y_hat = C xi + D u`` is explicit even
    when ``D`` is nonzero.
    """
    xi = np.asarray(xi, float)
    zeta = np.asarray(zeta, float)
    u = gains.K1 @ xi + gains.K2 @ zeta + gains.K3 @ np.asarray(eta, float)
    innovation = np.asarray(y, float) - (agent.C @ xi + agent.D @ u)
    dxi = agent.A @ xi + agent.E @ zeta + agent.B @ u - gains.L1 @ innovation
    dzeta = dist.S @ zeta - gains.L2 @ innovation
    deta = leader_observer_rhs(eta, view, L0, leader)
    return u, dxi, dzeta, deta


def reduced_order_dob_rhs(agent, dist, gains, x, zeta, eta, view, L0, leader):
    """State-feedback DOB law with a reduced-order disturbance observer.

    Returns ``(u, dzeta, deta)``; the disturbance estimate is ``zeta - L x``.
    """
    x = np.asarray(x, float)
    zeta = np.asarray(zeta, float)
    L, S, E = gains.L, dist.S, agent.E
    d_hat = zeta - L @ x
    u = gains.K1 @ x + gains.K2 @ d_hat + gains.K3 @ np.asarray(eta, float)
    dzeta = (S + L @ E) @ zeta + (L @ agent.A - S @ L - L @ E @ L) @ x + L @ agent.B @ u
    deta = leader_observer_rhs(eta, view, L0, leader)
    return u, dzeta, deta
