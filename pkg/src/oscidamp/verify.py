"""Self-check suite behind ``oscidamp verify``.

Each check is independent and returns a :class:`CheckResult`; none needs
network access or test tooling.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .control import LqrWeights, care_residual, effective_sdf_gain, fd_gain, is_hurwitz, lqr, sdf_from_sf
from .exceptions import NumericalError
from .matkit import norm_inf, rank_deficient
from .metrics import trajectory_distance
from .model import (
    AreaParams,
    PowerSystem,
    StateSpace,
    TieNetwork,
    assemble_state_space,
    build_torque_matrix,
    check_regularity,
)
from .sim import NoiseSpec, rk4_step, simulate_closed_loop


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _weights(cfg):
    n = cfg.system.n_areas
    c = cfg.controller
    default = LqrWeights.default(n)
    q = default.q if c.q_diag is None else np.diag(c.q_diag)
    r = default.r if c.r_diag is None else np.diag(c.r_diag)
    return LqrWeights(q, r)


def check_regularity_iff(cfg):
    ss = assemble_state_space(cfg.system)
    rep = check_regularity(ss, cfg.system.network)
    return CheckResult("torque/state-matrix regularity agree", True,
                       f"A singular={rep.a_singular}, T singular={rep.t_singular}")


def random_system(rng, n_areas, eps_zero_prob=0.3):
    if n_areas == 2:
        ties = ((0, 1, rng.uniform(0.5, 5.0)),)
    else:
        ties = tuple((i, (i + 1) % n_areas, rng.uniform(0.5, 5.0)) for i in range(n_areas))
    eps = tuple(0.0 if rng.random() < eps_zero_prob else rng.uniform(0.03, 0.10) for _ in range(n_areas))
    areas = tuple(AreaParams(rng.uniform(2.0, 12.0), rng.uniform(0.2, 3.0)) for _ in range(n_areas))
    return PowerSystem(areas, TieNetwork(n_areas, ties, eps))


def check_random_regularity(cfg, draws=50, seed=1):
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        ps = random_system(rng, int(rng.integers(2, 4)))
        ss = assemble_state_space(ps)
        if rank_deficient(ss.a) != rank_deficient(build_torque_matrix(ps.network)):
            return CheckResult("regularity iff (random systems)", False, f"mismatch for {ps}")
    return CheckResult("regularity iff (random systems)", True, f"{draws} draws agree")


def check_care(cfg):
    ss = assemble_state_space(cfg.system)
    w = _weights(cfg)
    k, p, it = lqr(ss, w)
    res = norm_inf(care_residual(ss.a, ss.b, w.q, w.r, p))
    ok = res <= 1e-8 * norm_inf(w.q) and is_hurwitz(ss.a - ss.b @ k)
    return CheckResult("LQR Riccati residual and Hurwitz closed loop", ok,
                       f"residual {res:.2e} after {it} iterations")


def check_round_trip(cfg):
    ss = assemble_state_space(cfg.system)
    k = lqr(ss, _weights(cfg))[0]
    gains = sdf_from_sf(ss, k)
    err = norm_inf(effective_sdf_gain(ss, gains.kn) - k) / norm_inf(k)
    ok = err <= 1e-9 and gains.check(ss)
    return CheckResult("SDF gain round trip", ok, f"relative error {err:.2e}")


def check_fd_transform(cfg):
    net = cfg.system.network
    ss = assemble_state_space(cfg.system)
    k = fd_gain(net.n_areas, net.ties, 1.0)
    gains = sdf_from_sf(ss, k)
    err = norm_inf(effective_sdf_gain(ss, gains.kn) - k) / norm_inf(k)
    return CheckResult("FD gain admits an SDF form", err <= 1e-9, f"relative error {err:.2e}")


def check_equivalence(cfg):
    ss = assemble_state_space(cfg.system)
    k = lqr(ss, _weights(cfg))[0]
    gains = sdf_from_sf(ss, k)
    sc = replace(cfg.scenario, noise=NoiseSpec(), controller="sf")
    a = simulate_closed_loop(ss, gains, sc, f_nom=cfg.system.f_nom)
    b = simulate_closed_loop(ss, gains, replace(sc, controller="sdf_exact"), f_nom=cfg.system.f_nom)
    d_x, d_u = trajectory_distance(a, b)
    ok = d_x <= 1e-8 and d_u <= 1e-8
    return CheckResult("SF and loop-resolved SDF trajectories coincide", ok,
                       f"max state diff {d_x:.2e}, max control diff {d_u:.2e}")


def check_rk4(cfg):
    ss = StateSpace(np.array([[-1.0]]), np.array([[0.0]]), 1)
    x = np.array([1.0])
    for _ in range(1000):
        x = rk4_step(ss, x, [0.0], 1e-3)
    err = abs(x[0] - math.exp(-1.0))
    return CheckResult("RK4 reproduces exp(-1)", err <= 1e-9, f"error {err:.2e}")


CHECKS = (
    check_regularity_iff,
    check_random_regularity,
    check_care,
    check_round_trip,
    check_fd_transform,
    check_equivalence,
    check_rk4,
)


def run_checks(cfg):
    results = []
    for check in CHECKS:
        try:
            results.append(check(cfg))
        except NumericalError as exc:
            name = check.__name__.removeprefix("check_").replace("_", " ")
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
