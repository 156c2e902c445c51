"""Scenario and gain files.

Both are TOML documents; the grammar is described in ``docs/scenario-format.md``.
Syntax errors carry line/column positions from the TOML parser; semantic
errors carry the dotted key path of the offending value.
"""

import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import DimensionError, GraphError, ScenarioError
from .graph import CommGraph, SwitchingSchedule, validate_connected
from .model import AgentModel, DisturbanceExosystem, LeaderExosystem, validate_scenario_models
from .synthesis import AgentGains, GainSet
from .sim import LAWS

RANDOM = "random"


@dataclass
class Scenario:
    agents: tuple
    disturbances: tuple
    leader: LeaderExosystem
    graphs: tuple
    schedule: SwitchingSchedule
    law: str = "full-order"
    h: float = 1e-3
    t_end: float = 30.0
    seed: int = 0
    random_range: tuple = (-1.0, 1.0)
    error_after: float = 21.0
    tolerance: float = 2e-3
    csv_every: int = 1
    x0: tuple = ()  # per agent: array or None (random)
    d0: tuple = ()  # per agent: array or None (random)
    agent_overrides: tuple = ()  # per agent: dict of K1/L1/L2/L arrays
    L0_override: np.ndarray = None

    @property
    def n_followers(self):
        return len(self.agents)

    @property
    def overrides(self):
        return {"L0": self.L0_override, "agents": [dict(o) for o in self.agent_overrides]}

    def without_overrides(self):
        n = self.n_followers
        return replace(self, agent_overrides=tuple({} for _ in range(n)), L0_override=None)

    def initial_conditions(self, seed=None):
        """Follower and disturbance initial values.

        Entries marked random are drawn uniformly from ``random_range`` with
        ``numpy.random.default_rng(seed)``: all ``x_i`` in agent order first,
        then all ``d_i``. Controller states are left at zero.
        """
        rng = np.random.default_rng(self.seed if seed is None else seed)
        lo, hi = self.random_range
        init = {}
        for i, agent in enumerate(self.agents):
            v = self.x0[i]
            init[("x", i)] = rng.uniform(lo, hi, agent.n) if v is None else np.asarray(v, float)
        for i, dist in enumerate(self.disturbances):
            v = self.d0[i]
            init[("d", i)] = rng.uniform(lo, hi, dist.q) if v is None else np.asarray(v, float)
        return init

    def validate(self):
        """Model assumptions plus connectivity of every graph in the schedule."""
        report = validate_scenario_models(self.agents, self.disturbances, self.leader)
        for k, g in enumerate(self.graphs, start=1):
            if not validate_connected(g):
                report.add(-1, "connectivity", f"graph {k} is not connected")
        return report


# -- parsing ---------------------------------------------------------------


def _matrix(value, where, shape=None):
    if isinstance(value, bool):
        raise ScenarioError("expected a matrix, got a boolean", where)
    if isinstance(value, (int, float)):
        value = [[value]]
    if not isinstance(value, list):
        raise ScenarioError("expected a matrix (list of rows)", where)
    if value and not all(isinstance(row, list) for row in value):
        raise ScenarioError("matrix rows must be lists of numbers", where)
    rows = [[_number(v, where) for v in row] for row in value]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ScenarioError(f"ragged matrix: row lengths {sorted(widths)}", where)
    if rows and widths == {0}:
        rows = []
    m = np.array(rows, dtype=float).reshape(len(rows), widths.pop() if rows else 0)
    if shape is not None:
        if m.size == 0 and math.prod(shape) == 0:
            return np.zeros(shape)
        if m.shape != tuple(shape):
            raise ScenarioError(f"expected a {shape[0]}x{shape[1]} matrix, got {m.shape[0]}x{m.shape[1]}", where)
    return m


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {v!r}", where)
    if not math.isfinite(v):
        raise ScenarioError("numbers must be finite", where)
    return float(v)


def _vector(value, where, size=None, allow_random=False):
    if allow_random and value == RANDOM:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list):
        raise ScenarioError("expected a list of numbers" + (' or "random"' if allow_random else ""), where)
    v = np.array([_number(x, where) for x in value], dtype=float)
    if size is not None and v.size != size:
        raise ScenarioError(f"expected {size} entries, got {v.size}", where)
    return v


def _table(doc, key, where, required=True):
    if key not in doc:
        if required:
            raise ScenarioError(f"missing required block [{key}]", where or "document")
        return {}
    value = doc[key]
    if not isinstance(value, dict):
        raise ScenarioError(f"[{key}] must be a table", f"{where}.{key}" if where else key)
    return value


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown key(s) {', '.join(unknown)}", where or "document")


_TOP = ("simulation", "leader", "agents", "graphs", "schedule", "gains")
_SIM = ("law", "h", "t_end", "seed", "random_range", "error_after", "tolerance", "csv_every")
_AGENT = ("A", "B", "C", "D", "E", "S", "x0", "d0", "gains")
_AGENT_GAINS = ("K1", "L1", "L2", "L")


def _load_toml(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        loc = None
        if "(at line" in msg:
            msg, _, tail = msg.partition(" (at ")
            loc = tail.rstrip(")")
        raise ScenarioError(f"syntax error: {msg}", loc) from None


def parse_scenario(text):
    doc = _load_toml(text)
    _check_keys(doc, _TOP, None)

    sim = _table(doc, "simulation", None, required=False)
    _check_keys(sim, _SIM, "simulation")
    law = sim.get("law", "full-order")
    if law not in LAWS:
        raise ScenarioError(f"law must be one of {', '.join(LAWS)}", "simulation.law")
    rr = _vector(sim.get("random_range", [-1.0, 1.0]), "simulation.random_range", 2)
    seed = sim.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ScenarioError("seed must be an unsigned 64-bit integer", "simulation.seed")
    every = sim.get("csv_every", 1)
    if isinstance(every, bool) or not isinstance(every, int) or every < 1:
        raise ScenarioError("csv_every must be a positive integer", "simulation.csv_every")
    settings = dict(
        law=law,
        h=_number(sim.get("h", 1e-3), "simulation.h"),
        t_end=_number(sim.get("t_end", 30.0), "simulation.t_end"),
        seed=seed,
        random_range=(float(rr[0]), float(rr[1])),
        error_after=_number(sim.get("error_after", 21.0), "simulation.error_after"),
        tolerance=_number(sim.get("tolerance", 2e-3), "simulation.tolerance"),
        csv_every=every,
    )
    if not settings["h"] > 0:
        raise ScenarioError("h must be positive", "simulation.h")
    if settings["t_end"] < 0:
        raise ScenarioError("t_end must be nonnegative", "simulation.t_end")

    lt = _table(doc, "leader", None)
    _check_keys(lt, ("S0", "F0", "r0"), "leader")
    for k in ("S0", "F0"):
        if k not in lt:
            raise ScenarioError(f"missing required key {k}", "leader")
    S0 = _matrix(lt["S0"], "leader.S0")
    F0 = _matrix(lt["F0"], "leader.F0")
    try:
        leader = LeaderExosystem(S0, F0, _vector(lt.get("r0", [0.0] * S0.shape[0]), "leader.r0", S0.shape[0]))
    except DimensionError as exc:
        raise ScenarioError(str(exc), "leader") from None

    raw_agents = doc.get("agents")
    if not raw_agents:
        raise ScenarioError("missing required block [[agents]]", "document")
    if not isinstance(raw_agents, list):
        raise ScenarioError("[[agents]] must be an array of tables", "agents")
    agents, dists, x0s, d0s, agent_ov = [], [], [], [], []
    for idx, at in enumerate(raw_agents, start=1):
        where = f"agents[{idx}]"
        _check_keys(at, _AGENT, where)
        for k in ("A", "B", "C"):
            if k not in at:
                raise ScenarioError(f"missing required key {k}", where)
        A = _matrix(at["A"], f"{where}.A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ScenarioError(f"A must be square, got {A.shape[0]}x{A.shape[1]}", f"{where}.A")
        B = _matrix(at["B"], f"{where}.B")
        if B.shape[0] != n:
            raise ScenarioError(f"agent {idx}: B has {B.shape[0]} rows but A is {n}x{n}", f"{where}.B")
        m = B.shape[1]
        C = _matrix(at["C"], f"{where}.C")
        if C.shape[1] != n:
            raise ScenarioError(f"agent {idx}: C has {C.shape[1]} columns but A is {n}x{n}", f"{where}.C")
        l = C.shape[0]
        if l != leader.l:
            raise ScenarioError(f"agent {idx}: output has {l} channels, leader has {leader.l}", f"{where}.C")
        D = _matrix(at["D"], f"{where}.D", (l, m)) if "D" in at else np.zeros((l, m))
        if ("E" in at) != ("S" in at):
            raise ScenarioError(f"agent {idx}: E and S must be given together", where)
        if "S" in at:
            S = _matrix(at["S"], f"{where}.S")
            q = S.shape[0]
            if S.shape != (q, q):
                raise ScenarioError("S must be square", f"{where}.S")
            E = _matrix(at["E"], f"{where}.E", (n, q))
        else:
            S, E = np.zeros((0, 0)), np.zeros((n, 0))
        q = S.shape[0]
        agents.append(AgentModel(A, B, C, D, E))
        dists.append(DisturbanceExosystem(S))
        x0s.append(_vector(at.get("x0", RANDOM), f"{where}.x0", n, allow_random=True))
        d0s.append(_vector(at.get("d0", RANDOM), f"{where}.d0", q, allow_random=True))
        gt = _table(at, "gains", where, required=False)
        _check_keys(gt, _AGENT_GAINS, f"{where}.gains")
        shapes = {"K1": (m, n), "L1": (n, l), "L2": (q, l), "L": (q, n)}
        ov = {k: _matrix(gt[k], f"{where}.gains.{k}", shapes[k]) for k in _AGENT_GAINS if k in gt}
        if ("L1" in ov) != ("L2" in ov):
            raise ScenarioError("L1 and L2 must be overridden together", f"{where}.gains")
        agent_ov.append(ov)

    raw_graphs = doc.get("graphs")
    if not raw_graphs:
        raise ScenarioError("missing required block [[graphs]]", "document")
    if not isinstance(raw_graphs, list):
        raise ScenarioError("[[graphs]] must be an array of tables", "graphs")
    N = len(agents)
    graphs = []
    for gi, gt in enumerate(raw_graphs, start=1):
        where = f"graphs[{gi}]"
        _check_keys(gt, ("edges",), where)
        edges = gt.get("edges", [])
        if not isinstance(edges, list):
            raise ScenarioError("edges must be a list of [from, to, weight]", f"{where}.edges")
        triples = []
        for e in edges:
            if not isinstance(e, list) or len(e) not in (2, 3):
                raise ScenarioError(f"edge {e!r} must be [from, to] or [from, to, weight]", f"{where}.edges")
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in e[:2]):
                raise ScenarioError(f"edge endpoints must be integers, got {e!r}", f"{where}.edges")
            triples.append((e[0], e[1], _number(e[2], f"{where}.edges") if len(e) == 3 else 1.0))
        try:
            graphs.append(CommGraph.from_edges(N, triples))
        except GraphError as exc:
            raise ScenarioError(str(exc), where) from None

    st = _table(doc, "schedule", None, required=False)
    _check_keys(st, ("segments", "periodic", "dwell_time"), "schedule")
    segs = st.get("segments", [[1, 1.0]])
    if not isinstance(segs, list) or not all(isinstance(s, list) and len(s) == 2 for s in segs):
        raise ScenarioError("segments must be a list of [graph, duration]", "schedule.segments")
    segments = []
    for g, d in segs:
        if isinstance(g, bool) or not isinstance(g, int) or not 1 <= g <= len(graphs):
            raise ScenarioError(f"graph index {g!r} is not in 1..{len(graphs)}", "schedule.segments")
        segments.append((g - 1, _number(d, "schedule.segments")))
    periodic = st.get("periodic", True)
    if not isinstance(periodic, bool):
        raise ScenarioError("periodic must be true or false", "schedule.periodic")
    dwell = st.get("dwell_time")
    try:
        schedule = SwitchingSchedule(
            tuple(graphs), tuple(segments), periodic,
            None if dwell is None else _number(dwell, "schedule.dwell_time"),
        )
    except GraphError as exc:
        raise ScenarioError(str(exc), "schedule") from None

    shared = _table(doc, "gains", None, required=False)
    _check_keys(shared, ("L0",), "gains")
    L0 = _matrix(shared["L0"], "gains.L0", (leader.n0, leader.l)) if "L0" in shared else None

    return Scenario(
        agents=tuple(agents), disturbances=tuple(dists), leader=leader, graphs=tuple(graphs),
        schedule=schedule, x0=tuple(x0s), d0=tuple(d0s), agent_overrides=tuple(agent_ov),
        L0_override=L0, **settings,
    )


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def paper_example_text():
    return resources.files("dobcoord.data").joinpath("paper_example.toml").read_text(encoding="utf-8")


def paper_example():
    return parse_scenario(paper_example_text())


# -- serialization ----------------------------------------------------------


def _fmt_num(v):
    v = float(v)
    if v == 0:
        return "0.0"
    return repr(v)


def _fmt_vec(v):
    return "[" + ", ".join(_fmt_num(x) for x in np.asarray(v).reshape(-1)) + "]"


def _fmt_mat(m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return "[]"
    return "[" + ", ".join(_fmt_vec(row) for row in m) + "]"


def serialize_scenario(sc):
    out = ["[simulation]"]
    out.append(f'law = "{sc.law}"')
    out.append(f"h = {_fmt_num(sc.h)}")
    out.append(f"t_end = {_fmt_num(sc.t_end)}")
    out.append(f"seed = {int(sc.seed)}")
    out.append(f"random_range = {_fmt_vec(sc.random_range)}")
    out.append(f"error_after = {_fmt_num(sc.error_after)}")
    out.append(f"tolerance = {_fmt_num(sc.tolerance)}")
    out.append(f"csv_every = {int(sc.csv_every)}")
    ld = sc.leader
    out += ["", "[leader]", f"S0 = {_fmt_mat(ld.S0)}", f"F0 = {_fmt_mat(ld.F0)}", f"r0 = {_fmt_vec(ld.initial)}"]
    if sc.L0_override is not None:
        out += ["", "[gains]", f"L0 = {_fmt_mat(sc.L0_override)}"]
    for i, (a, dist) in enumerate(zip(sc.agents, sc.disturbances)):
        out += ["", "[[agents]]"]
        for name in "ABCD":
            out.append(f"{name} = {_fmt_mat(getattr(a, name))}")
        if dist.q:
            out.append(f"E = {_fmt_mat(a.E)}")
            out.append(f"S = {_fmt_mat(dist.S)}")
        out.append(f"x0 = {_fmt_vec(sc.x0[i])}" if sc.x0[i] is not None else f'x0 = "{RANDOM}"')
        if dist.q:
            out.append(f"d0 = {_fmt_vec(sc.d0[i])}" if sc.d0[i] is not None else f'd0 = "{RANDOM}"')
        ov = sc.agent_overrides[i] if sc.agent_overrides else {}
        if ov:
            out.append("[agents.gains]")
            for k in _AGENT_GAINS:
                if k in ov:
                    out.append(f"{k} = {_fmt_mat(ov[k])}")
    for g in sc.graphs:
        edges = ", ".join(f"[{s}, {d}, {_fmt_num(w)}]" for s, d, w in g.edges())
        out += ["", "[[graphs]]", f"edges = [{edges}]"]
    segs = ", ".join(f"[{k + 1}, {_fmt_num(d)}]" for k, d in sc.schedule.segments)
    out += [
        "", "[schedule]", f"segments = [{segs}]",
        f"periodic = {'true' if sc.schedule.periodic else 'false'}",
        f"dwell_time = {_fmt_num(sc.schedule.dwell_time)}",
    ]
    return "\n".join(out) + "\n"


def serialize_gains(gains):
    out = ["[shared]", f"L0 = {_fmt_mat(gains.L0)}"]
    if gains.P is not None:
        out.append(f"P = {_fmt_mat(gains.P)}")
    if gains.mu_star is not None:
        out.append(f"mu_star = {_fmt_num(gains.mu_star)}")
    if gains.c is not None:
        out.append(f"c = {_fmt_num(gains.c)}")
    for g in gains.agents:
        out += ["", "[[agents]]"]
        for k in ("K1", "K2", "K3", "L1", "L2", "L"):
            v = getattr(g, k)
            if v is not None:
                out.append(f"{k} = {_fmt_mat(v)}")
    return "\n".join(out) + "\n"


def parse_gains(text, scenario):
    """Read a gain file written by :func:`serialize_gains` for ``scenario``'s dimensions."""
    doc = _load_toml(text)
    _check_keys(doc, ("shared", "agents"), None)
    shared = _table(doc, "shared", None)
    _check_keys(shared, ("L0", "P", "mu_star", "c"), "shared")
    ld = scenario.leader
    if "L0" not in shared:
        raise ScenarioError("missing required key L0", "shared")
    L0 = _matrix(shared["L0"], "shared.L0", (ld.n0, ld.l))
    P = _matrix(shared["P"], "shared.P", (ld.n0, ld.n0)) if "P" in shared else None
    mu = _number(shared["mu_star"], "shared.mu_star") if "mu_star" in shared else None
    c = _number(shared["c"], "shared.c") if "c" in shared else None
    raw = doc.get("agents") or []
    if len(raw) != scenario.n_followers:
        raise ScenarioError(f"expected {scenario.n_followers} [[agents]] blocks, got {len(raw)}", "agents")
    agents = []
    for idx, (gt, a, dist) in enumerate(zip(raw, scenario.agents, scenario.disturbances), start=1):
        where = f"agents[{idx}]"
        _check_keys(gt, ("K1", "K2", "K3", "L1", "L2", "L"), where)
        shapes = {"K1": (a.m, a.n), "K2": (a.m, dist.q), "K3": (a.m, ld.n0),
                  "L1": (a.n, a.l), "L2": (dist.q, a.l), "L": (dist.q, a.n)}
        for k in ("K1", "K2", "K3"):
            if k not in gt:
                raise ScenarioError(f"missing required key {k}", where)
        vals = {k: _matrix(gt[k], f"{where}.{k}", shapes[k]) if k in gt else None for k in shapes}
        agents.append(AgentGains(**vals))
    return GainSet(tuple(agents), L0, P, mu, c)


def load_gains(path, scenario):
    with open(path, encoding="utf-8") as fh:
        return parse_gains(fh.read(), scenario)
