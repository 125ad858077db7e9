"""Multi-area small-signal power system model.

States are ordered as all rotor-angle deviations followed by all speed
deviations, ``x = (d_1..d_N, w_1..w_N)``; inputs are one power injection
per area.  Area indices are 0-based in code and 1-based in config files.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InconsistentRegularity
from .matkit import rank_deficient

__all__ = [
    "AreaParams",
    "TieNetwork",
    "PowerSystem",
    "StateSpace",
    "RegularityReport",
    "build_torque_matrix",
    "graph_laplacian",
    "assemble_state_space",
    "check_regularity",
    "two_area_system",
    "ring_system",
]

EPS_RANGE = (0.03, 0.10)


@dataclass(frozen=True)
class AreaParams:
    inertia: float
    damping: float

    def __post_init__(self):
        if not np.isfinite(self.inertia) or self.inertia <= 0:
            raise ValueError(f"inertia must be > 0, got {self.inertia}")
        if not np.isfinite(self.damping) or self.damping < 0:
            raise ValueError(f"damping must be >= 0, got {self.damping}")


def _connected(n, edges):
    seen = {0} if n else set()
    stack = [0] if n else []
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    while stack:
        k = stack.pop()
        for m in adj[k] - seen:
            seen.add(m)
            stack.append(m)
    return len(seen) == n


@dataclass(frozen=True)
class TieNetwork:
    """Tie-line topology and per-area self-stiffness factors.

    ``ties`` holds ``(i, j, T_ij)`` once per undirected line, ``i != j``.
    """

    n_areas: int
    ties: tuple = ()
    stiffness_eps: tuple = ()

    def __post_init__(self):
        ties = tuple((int(i), int(j), float(c)) for i, j, c in self.ties)
        eps = tuple(float(e) for e in self.stiffness_eps) or (0.0,) * self.n_areas
        object.__setattr__(self, "ties", ties)
        object.__setattr__(self, "stiffness_eps", eps)
        if self.n_areas < 1:
            raise ValueError("n_areas must be >= 1")
        if len(eps) != self.n_areas:
            raise ValueError(f"expected {self.n_areas} stiffness factors, got {len(eps)}")
        if any(not np.isfinite(e) or e < 0 for e in eps):
            raise ValueError("stiffness factors must be finite and >= 0")
        pairs = set()
        for i, j, c in ties:
            if not (0 <= i < self.n_areas and 0 <= j < self.n_areas):
                raise ValueError(f"tie ({i}, {j}) references a missing area")
            if i == j:
                raise ValueError(f"tie ({i}, {j}) is a self-loop")
            if not np.isfinite(c) or c <= 0:
                raise ValueError(f"tie ({i}, {j}) needs a positive coefficient")
            key = (min(i, j), max(i, j))
            if key in pairs:
                raise ValueError(f"tie {key} listed twice")
            pairs.add(key)
        if not _connected(self.n_areas, pairs):
            raise ValueError("tie-line graph is not connected")

    def with_eps(self, eps):
        if np.isscalar(eps):
            eps = (float(eps),) * self.n_areas
        return TieNetwork(self.n_areas, self.ties, tuple(eps))


@dataclass(frozen=True)
class PowerSystem:
    areas: tuple
    network: TieNetwork
    f_nom: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(self.areas))
        if len(self.areas) != self.network.n_areas:
            raise ValueError("number of areas does not match the tie network")
        if not self.f_nom > 0:
            raise ValueError("f_nom must be positive")

    @property
    def n_areas(self):
        return self.network.n_areas

    @property
    def inertia(self):
        return np.array([a.inertia for a in self.areas])

    @property
    def damping(self):
        return np.array([a.damping for a in self.areas])

    def with_eps(self, eps):
        return PowerSystem(self.areas, self.network.with_eps(eps), self.f_nom)


@dataclass(frozen=True, eq=False)
class StateSpace:
    a: np.ndarray
    b: np.ndarray
    n_areas: int
    torque: np.ndarray = field(default=None, repr=False)

    @property
    def n_states(self):
        return self.a.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]


@dataclass(frozen=True)
class RegularityReport:
    a_singular: bool
    t_singular: bool
    eps_hint: float = None

    @property
    def regular(self):
        return not self.a_singular


def graph_laplacian(n_areas, ties, weighted=False):
    lap = np.zeros((n_areas, n_areas))
    for i, j, c in ties:
        w = c if weighted else 1.0
        lap[i, j] -= w
        lap[j, i] -= w
        lap[i, i] += w
        lap[j, j] += w
    return lap


def build_torque_matrix(net):
    """Synchronizing-torque matrix with self-stiffness on the diagonal.

    Off-diagonals are ``-T_ij``; the diagonal is ``(1 + eps_i) * sum_j T_ij``,
    which is ``T_12 + eps_1 T_12`` for two areas.
    """
    lap = graph_laplacian(net.n_areas, net.ties, weighted=True)
    degree = np.diag(lap).copy()
    return lap + np.diag(np.asarray(net.stiffness_eps) * degree)


def assemble_state_space(system):
    n = system.n_areas
    torque = build_torque_matrix(system.network)
    m_inv = np.diag(1.0 / system.inertia)
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.eye(n)
    a[n:, :n] = -m_inv @ torque
    a[n:, n:] = -m_inv @ np.diag(system.damping)
    b = np.zeros((2 * n, n))
    b[n:, :] = m_inv
    return StateSpace(a=a, b=b, n_areas=n, torque=torque)


def check_regularity(ss, net, tol=1e-10):
    """Rank-test both ``A`` and ``T`` and insist they agree.

    When singular, ``eps_hint`` is the smallest self-stiffness on a 0.01
    grid over ``[0.03, 0.10]`` that makes ``T`` nonsingular.
    """
    torque = build_torque_matrix(net)
    a_sing = rank_deficient(ss.a, tol)
    t_sing = rank_deficient(torque, tol)
    if a_sing != t_sing:
        raise InconsistentRegularity(
            f"A singular={a_sing} but T singular={t_sing}; inertia matrix must be invertible"
        )
    hint = None
    if t_sing:
        for eps in np.round(np.arange(EPS_RANGE[0], EPS_RANGE[1] + 1e-9, 0.01), 2):
            if not rank_deficient(build_torque_matrix(net.with_eps(float(eps))), tol):
                hint = float(eps)
                break
    return RegularityReport(a_singular=a_sing, t_singular=t_sing, eps_hint=hint)


def two_area_system(eps=0.05, inertia=6.0, damping=1.2, t12=3.132, f_nom=60.0):
    """Two areas joined by one tie line (defaults: the published two-area case)."""
    eps = (eps, eps) if np.isscalar(eps) else tuple(eps)
    net = TieNetwork(2, ((0, 1, t12),), eps)
    return PowerSystem((AreaParams(inertia, damping),) * 2, net, f_nom)


def ring_system(n_areas=3, eps=0.05, inertia=6.0, damping=1.2, t_ij=3.132, f_nom=60.0):
    """Symmetric ring of identical areas; a stand-in, not published data."""
    if n_areas == 1:
        ties = ()
    elif n_areas == 2:
        ties = ((0, 1, t_ij),)
    else:
        ties = tuple((i, (i + 1) % n_areas, t_ij) for i in range(n_areas))
    eps = (eps,) * n_areas if np.isscalar(eps) else tuple(eps)
    net = TieNetwork(n_areas, ties, eps)
    return PowerSystem((AreaParams(inertia, damping),) * n_areas, net, f_nom)
