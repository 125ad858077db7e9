"""Damping controller design.

Three families share one gain representation:

* frequency-difference (FD): ``u = -kd * L * dw`` with ``L`` the tie-line
  graph Laplacian, i.e. ``Ks = [0 | kd L]``;
* state feedback (SF): ``u = -Ks x`` with ``Ks`` from an LQR design;
* state-derivative feedback (SDF): ``u = -Kn xdot + Kn B dP`` with
  ``Kn = Ks (A - B Ks)^-1`` and ``Nn = (I + Kn B) Ns``.

The controllers are also exposed as scikit-learn style estimators so
they can be cloned, parametrised and inspected with ``get_params``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    NoConvergence,
    NotStabilizable,
    SingularA,
    SingularClosedLoop,
    SingularLoop,
    SingularMatrix,
)
from .matkit import (
    as_mat,
    inverse,
    is_positive_definite,
    lu_solve,
    lyapunov_solve,
    norm_inf,
    rank_deficient,
)
from .model import PowerSystem, StateSpace, assemble_state_space, graph_laplacian

__all__ = [
    "LqrWeights",
    "GainSet",
    "AssumptionReport",
    "fd_gain",
    "is_hurwitz",
    "care_residual",
    "lqr",
    "lqr_gain",
    "sdf_from_sf",
    "validate_assumptions",
    "effective_sdf_gain",
    "FrequencyDifferenceController",
    "LQRController",
    "SDFController",
]


@dataclass(frozen=True, eq=False)
class LqrWeights:
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = as_mat(self.q, "q")
        r = as_mat(self.r, "r")
        if not np.allclose(q, q.T, atol=1e-12) or not np.allclose(r, r.T, atol=1e-12):
            raise ValueError("LQR weights must be symmetric")
        if not is_positive_definite(q + 1e-12 * np.eye(len(q)), pivot_tol=0.0):
            raise ValueError("q must be positive semidefinite")
        if not is_positive_definite(r):
            raise ValueError("r must be positive definite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @classmethod
    def default(cls, n_areas, angle_weight=10.0, speed_weight=1.0, r_weight=2.0):
        """Angles weighted 10, speeds 1, ``R = 2 I`` in grouped state order."""
        q = np.diag([angle_weight] * n_areas + [speed_weight] * n_areas)
        return cls(q, r_weight * np.eye(n_areas))

    @classmethod
    def from_diagonals(cls, q_diag, r_diag):
        return cls(np.diag(np.asarray(q_diag, float)), np.diag(np.asarray(r_diag, float)))


@dataclass(frozen=True, eq=False)
class GainSet:
    """Feedback gains for one controller.

    ``kn`` and ``nn`` are only populated for ``mode == "sdf"``; ``kd`` only
    for ``mode == "fd"``.
    """

    mode: str
    ks: np.ndarray
    ns: np.ndarray
    kn: np.ndarray = None
    nn: np.ndarray = None
    kd: float = None

    def check(self, ss, rtol=1e-10):
        """Verify the SDF gain relations against ``ss``; no-op for FD/SF."""
        if self.mode != "sdf":
            return True
        kn = self.ks @ inverse(ss.a - ss.b @ self.ks)
        nn = (np.eye(ss.n_inputs) + self.kn @ ss.b) @ self.ns
        ok_kn = norm_inf(kn - self.kn) <= rtol * max(norm_inf(kn), 1.0)
        ok_nn = norm_inf(nn - self.nn) <= rtol * max(norm_inf(nn), 1.0)
        return ok_kn and ok_nn

    def to_dict(self):
        out = {"mode": self.mode, "ks": self.ks.tolist(), "ns": self.ns.tolist()}
        if self.kd is not None:
            out["kd"] = self.kd
        if self.kn is not None:
            out["kn"] = self.kn.tolist()
            out["nn"] = self.nn.tolist()
        return out


@dataclass(frozen=True)
class AssumptionReport:
    a_nonsingular: bool
    closed_loop_nonsingular: bool
    b_full_column_rank: bool

    @property
    def all_hold(self):
        return self.a_nonsingular and self.closed_loop_nonsingular and self.b_full_column_rank

    def describe(self):
        mark = {True: "holds", False: "FAILS"}
        return "\n".join([
            f"assumption (i)   A nonsingular:            {mark[self.a_nonsingular]}",
            f"assumption (ii)  A - B Ks nonsingular:     {mark[self.closed_loop_nonsingular]}",
            f"assumption (iii) B full column rank:       {mark[self.b_full_column_rank]}",
        ])


def _state_space(system):
    if isinstance(system, StateSpace):
        return system
    if isinstance(system, PowerSystem):
        return assemble_state_space(system)
    raise TypeError(f"expected PowerSystem or StateSpace, got {type(system).__name__}")


def fd_gain(n_areas, ties, kd):
    """FD baseline written as a state-feedback gain ``[0 | kd * L]``."""
    if not kd > 0:
        raise ValueError("kd must be positive")
    gain = np.zeros((n_areas, 2 * n_areas))
    gain[:, n_areas:] = kd * graph_laplacian(n_areas, ties)
    return gain


def is_hurwitz(a):
    """Lyapunov certificate: ``A^T P + P A = -I`` has a PD solution."""
    try:
        p = lyapunov_solve(a, np.eye(len(a)))
    except SingularMatrix:
        return False
    return is_positive_definite(p)


def care_residual(a, b, q, r, p):
    return a.T @ p + p @ a - p @ b @ lu_solve(r, b.T @ p) + q


def _bass_seed(a, b):
    # A - B B^T W^-1 is Hurwitz when W solves (A+bI)W + W(A+bI)^T = 2 B B^T
    shift = norm_inf(a) + 1.0
    f = -(a + shift * np.eye(len(a))).T
    w = lyapunov_solve(f, 2.0 * b @ b.T)
    return lu_solve(w, b).T


def lqr(ss, weights, k0=None, max_iter=50, tol=1e-10):
    """Newton-Kleinman solution of the continuous algebraic Riccati equation.

    Parameters
    ----------
    ss : StateSpace
    weights : LqrWeights
    k0 : array, optional
        Stabilizing seed gain.  Defaults to zero when ``A`` is Hurwitz and
        to a Bass-type seed otherwise.
    max_iter : int
    tol : float
        Stop when successive gains differ by less than ``tol`` (inf-norm).

    Returns
    -------
    K : (m, n) array
        Optimal gain ``R^-1 B^T P``.
    P : (n, n) array
        Stabilizing Riccati solution.
    n_iter : int
    """
    a, b = ss.a, ss.b
    q, r = weights.q, weights.r
    if q.shape != a.shape or r.shape != (b.shape[1], b.shape[1]):
        raise ValueError("weight dimensions do not match the system")
    if k0 is None:
        if is_hurwitz(a):
            k = np.zeros((b.shape[1], a.shape[0]))
        else:
            try:
                k = _bass_seed(a, b)
            except SingularMatrix as exc:
                raise NotStabilizable("could not build a stabilizing seed gain") from exc
    else:
        k = as_mat(k0, "k0")
    if not is_hurwitz(a - b @ k):
        raise NotStabilizable("seed gain does not make A - B K Hurwitz")

    p = None
    for it in range(1, max_iter + 1):
        acl = a - b @ k
        p = lyapunov_solve(acl, q + k.T @ r @ k)
        k_next = lu_solve(r, b.T @ p)
        step = norm_inf(k_next - k)
        k = k_next
        if step < tol:
            return k, p, it
    raise NoConvergence(f"Newton-Kleinman did not converge in {max_iter} iterations")


def lqr_gain(ss, weights, k0=None):
    return lqr(ss, weights, k0=k0)[0]


def validate_assumptions(ss, ks, tol=1e-10):
    ks = as_mat(ks, "ks")
    b = ss.b
    return AssumptionReport(
        a_nonsingular=not rank_deficient(ss.a, tol),
        closed_loop_nonsingular=not rank_deficient(ss.a - b @ ks, tol),
        b_full_column_rank=not rank_deficient(b.T @ b, tol),
    )


def sdf_from_sf(ss, ks, ns=None):
    """Map an SF design ``(Ks, Ns)`` to the equivalent SDF gains.

    Raises
    ------
    SingularA
        ``A`` is singular; no derivative feedback can reproduce ``Ks``.
    SingularClosedLoop
        ``A - B Ks`` is singular.
    """
    ks = as_mat(ks, "ks")
    m = ss.n_inputs
    if ks.shape != (m, ss.n_states):
        raise ValueError(f"ks must be {m}x{ss.n_states}, got {ks.shape}")
    ns = np.eye(m) if ns is None else as_mat(ns, "ns")
    report = validate_assumptions(ss, ks)
    if not report.a_nonsingular:
        raise SingularA(
            "assumption (i) violated: state matrix A is singular; "
            "add self-stiffness (eps > 0) to make the torque matrix nonsingular"
        )
    if not report.closed_loop_nonsingular:
        raise SingularClosedLoop("assumption (ii) violated: A - B Ks is singular")
    if not report.b_full_column_rank:
        raise ValueError("assumption (iii) violated: B lacks full column rank")
    # Kn = Ks (A - B Ks)^-1, computed as a transposed solve
    kn = lu_solve((ss.a - ss.b @ ks).T, ks.T).T
    nn = (np.eye(m) + kn @ ss.b) @ ns
    return GainSet(mode="sdf", ks=ks, ns=ns, kn=kn, nn=nn)


def effective_sdf_gain(ss, kn):
    """State gain equivalent to ``u = -Kn (A x + B u)``: ``(I + Kn B)^-1 Kn A``."""
    kn = as_mat(kn, "kn")
    loop = np.eye(ss.n_inputs) + kn @ ss.b
    try:
        return lu_solve(loop, kn @ ss.a)
    except SingularMatrix as exc:
        raise SingularLoop("I + Kn B is singular") from exc


def loop_feedthrough(ss, kn):
    """``(I + Kn B)^-1 Kn B``, the gain from disturbance mismatch to ``u``."""
    loop = np.eye(ss.n_inputs) + kn @ ss.b
    try:
        return lu_solve(loop, kn @ ss.b)
    except SingularMatrix as exc:
        raise SingularLoop("I + Kn B is singular") from exc


def _rows(x, n_features):
    x = check_array(np.atleast_2d(np.asarray(x, dtype=float)))
    if x.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features per sample, got {x.shape[1]}")
    return x


class _StateFeedbackMixin:
    def predict(self, X):
        """Control inputs ``u = -Ks x`` for each row of ``X``."""
        check_is_fitted(self, "ks_")
        return -_rows(X, self.ks_.shape[1]) @ self.ks_.T


class FrequencyDifferenceController(_StateFeedbackMixin, BaseEstimator):
    """Tie-line frequency-difference damping with a single scalar gain."""

    def __init__(self, kd=1.0):
        self.kd = kd

    def fit(self, system, y=None):
        if not isinstance(system, PowerSystem):
            raise TypeError("FD design needs a PowerSystem (for its tie topology)")
        net = system.network
        self.ks_ = fd_gain(net.n_areas, net.ties, float(self.kd))
        self.ns_ = np.eye(net.n_areas)
        self.gains_ = GainSet(mode="fd", ks=self.ks_, ns=self.ns_, kd=float(self.kd))
        return self


class LQRController(_StateFeedbackMixin, BaseEstimator):
    """Full-state LQR.

    ``q`` and ``r`` default to the grouped-order weights of
    :meth:`LqrWeights.default`.
    """

    def __init__(self, q=None, r=None):
        self.q = q
        self.r = r

    def _weights(self, n_areas):
        default = LqrWeights.default(n_areas)
        q = default.q if self.q is None else self.q
        r = default.r if self.r is None else self.r
        q, r = np.asarray(q, float), np.asarray(r, float)
        if q.ndim == 1:
            q = np.diag(q)
        if r.ndim == 1:
            r = np.diag(r)
        return LqrWeights(q, r)

    def fit(self, system, y=None):
        ss = _state_space(system)
        self.weights_ = self._weights(ss.n_areas)
        self.ks_, self.p_, self.n_iter_ = lqr(ss, self.weights_)
        self.ns_ = np.eye(ss.n_inputs)
        self.gains_ = GainSet(mode="sf", ks=self.ks_, ns=self.ns_)
        return self


class SDFController(BaseEstimator):
    """State-derivative feedback built on top of a state-feedback design.

    Parameters
    ----------
    base : estimator, optional
        Any fitted-on-system SF estimator exposing ``ks_``; cloned before
        fitting.  Defaults to :class:`LQRController`.
    ns : array, optional
        Reference gain of the SF design, identity by default.
    """

    def __init__(self, base=None, ns=None):
        self.base = base
        self.ns = ns

    def fit(self, system, y=None):
        base = LQRController() if self.base is None else self.base
        ss = _state_space(system)
        self.base_ = clone(base).fit(system)
        self.gains_ = sdf_from_sf(ss, self.base_.ks_, self.ns)
        self.ks_ = self.gains_.ks
        self.kn_ = self.gains_.kn
        self.nn_ = self.gains_.nn
        self.k_eff_ = effective_sdf_gain(ss, self.kn_)
        self.assumptions_ = validate_assumptions(ss, self.ks_)
        self.b_ = ss.b
        return self

    def predict(self, Xdot, dp=None):
        """``u = -Kn xdot + Kn B dP`` for each row of ``Xdot``."""
        check_is_fitted(self, "kn_")
        xdot = _rows(Xdot, self.kn_.shape[1])
        u = -xdot @ self.kn_.T
        if dp is not None:
            u = u + _rows(dp, self.kn_.shape[0]) @ (self.kn_ @ self.b_).T
        return u

    def resolve(self, X):
        """Loop-resolved control ``-K_eff x`` with the disturbance known exactly."""
        check_is_fitted(self, "k_eff_")
        return -_rows(X, self.k_eff_.shape[1]) @ self.k_eff_.T
