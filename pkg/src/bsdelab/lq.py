"""Linear-quadratic control problem instances.

Dynamics dX = (A X + B u) dt + sigma dW with X0 ~ N(m0, Sigma0), running
cost (1/2) x'Qx + (1/2) u'Ru and terminal cost (1/2) x'Qf x on a finite
horizon [0, T].
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonFiniteError,
    NonPDError,
    NonPSDError,
    SingularSigmaError,
)

SYMMETRY_RTOL = 1e-8
PSD_EIG_TOL = 1e-10
COND_LIMIT = 1e12
GRID_RTOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid {0, dt, ..., K*dt = T}; times has K+1 entries."""

    dt: float
    K: int
    times: np.ndarray

    @property
    def T(self) -> float:
        return self.K * self.dt

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TimeGrid)
            and self.K == other.K
            and self.dt == other.dt
        )


def uniform_grid(T: float, dt: float) -> TimeGrid:
    """Build the uniform grid on [0, T]; T/dt must be integral."""
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > GRID_RTOL * T:
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return TimeGrid(dt=float(dt), K=K, times=_readonly(np.linspace(0.0, T, K + 1)))


@dataclass(frozen=True)
class LQProblem:
    """Validated, immutable problem instance (arrays are read-only)."""

    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray
    m0: np.ndarray
    Sigma0: np.ndarray
    T: float

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def _check_symmetric_and_sym(M: np.ndarray, name: str, err_cls) -> np.ndarray:
    scale = np.linalg.norm(M)
    if scale > 0 and np.linalg.norm(M - M.T) > SYMMETRY_RTOL * scale:
        raise err_cls(f"{name} is not symmetric (relative tolerance {SYMMETRY_RTOL})")
    return 0.5 * (M + M.T)


def make_lq(A, B, sigma, Q, R, Qf, m0, Sigma0, T) -> LQProblem:
    """Validate and build an LQProblem.

    Q, Qf, Sigma0 must be symmetric PSD, R symmetric PD, sigma invertible.
    Near-symmetric inputs are symmetrized as (M + M')/2 before the
    eigenvalue checks.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Qf = np.atleast_2d(np.asarray(Qf, dtype=float))
    m0 = np.asarray(m0, dtype=float).ravel()
    Sigma0 = np.atleast_2d(np.asarray(Sigma0, dtype=float))
    T = float(T)

    n = A.shape[0]
    m = B.shape[1]
    shapes = {
        "A": (A, (n, n)),
        "B": (B, (n, m)),
        "sigma": (sigma, (n, n)),
        "Q": (Q, (n, n)),
        "R": (R, (m, m)),
        "Qf": (Qf, (n, n)),
        "m0": (m0, (n,)),
        "Sigma0": (Sigma0, (n, n)),
    }
    for name, (arr, want) in shapes.items():
        if arr.shape != want:
            raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {want}")
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"{name} contains non-finite entries")
    if T <= 0:
        raise ValueError("T must be positive")

    Q = _check_symmetric_and_sym(Q, "Q", NonPSDError)
    Qf = _check_symmetric_and_sym(Qf, "Qf", NonPSDError)
    Sigma0 = _check_symmetric_and_sym(Sigma0, "Sigma0", NonPSDError)
    R = _check_symmetric_and_sym(R, "R", NonPDError)

    for name, M in (("Q", Q), ("Qf", Qf), ("Sigma0", Sigma0)):
        w = np.linalg.eigvalsh(M)
        if w.min() < -PSD_EIG_TOL * max(1.0, abs(w).max()):
            raise NonPSDError(f"{name} has negative eigenvalue {w.min():.3e}")
    wR = np.linalg.eigvalsh(R)
    if wR.min() <= PSD_EIG_TOL * max(1.0, abs(wR).max()):
        raise NonPDError(f"R has non-positive eigenvalue {wR.min():.3e}")

    if np.linalg.cond(sigma) > COND_LIMIT:
        raise SingularSigmaError("sigma is singular or nearly singular")

    return LQProblem(
        A=_readonly(A),
        B=_readonly(B),
        sigma=_readonly(sigma),
        Q=_readonly(Q),
        R=_readonly(R),
        Qf=_readonly(Qf),
        m0=_readonly(m0),
        Sigma0=_readonly(Sigma0),
        T=T,
    )


def builtin_2d(T: float = 4.0) -> LQProblem:
    """The built-in 2-D benchmark instance used throughout the experiments."""
    A = np.array([[0.0, 1.0], [-1.0, -0.1]])
    B = np.array([[0.0], [1.0]])
    I2 = np.eye(2)
    return make_lq(A, B, I2, I2, np.array([[1.0]]), I2, np.array([1.0, 0.0]), I2, T)


def mass_spring(p: int, T: float = 4.0) -> LQProblem:
    """Chain of p coupled mass-springs; state dimension n = 2p.

    A = [[0, I], [-Tp, -I]] with Tp tridiagonal Toeplitz (2 on the main
    diagonal, -1 on the first super- and sub-diagonal), B = [0; I], and
    sigma = Q = Qf = Sigma0 = I, R = I.  The initial mean is the all-ones
    vector so trajectories are nontrivial; override by building the problem
    directly with make_lq if another start is wanted.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    Tp = 2.0 * np.eye(p) - np.eye(p, k=1) - np.eye(p, k=-1)
    Ip = np.eye(p)
    Z = np.zeros((p, p))
    A = np.block([[Z, Ip], [-Tp, -Ip]])
    B = np.vstack([Z, Ip])
    I2p = np.eye(2 * p)
    return make_lq(A, B, I2p, I2p, Ip, I2p, np.ones(2 * p), I2p, T)


def control_affine_parts(prob: LQProblem):
    """Split the drift as a(x, u) = atilde(x) + sigma @ Btilde @ u.

    Returns (atilde, Btilde) with atilde the map x -> A x (batch aware) and
    Btilde = sigma^{-1} B, so sigma @ Btilde reproduces B exactly.
    """
    if np.linalg.cond(prob.sigma) > COND_LIMIT:
        raise SingularSigmaError("sigma is singular; no control-affine split")
    Btilde = np.linalg.solve(prob.sigma, prob.B)

    def atilde(x):
        return np.asarray(x, dtype=float) @ prob.A.T

    return atilde, Btilde


def running_cost(prob: LQProblem, x, u):
    """(1/2) x'Qx + (1/2) u'Ru for a single point or a batch of rows."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[-1] != prob.n or (u.ndim and u.shape[-1] != prob.m):
        raise DimensionMismatchError(
            f"state/control dims {x.shape[-1]}/{u.shape[-1] if u.ndim else 1} "
            f"do not match problem dims {prob.n}/{prob.m}"
        )
    xq = 0.5 * np.sum((x @ prob.Q) * x, axis=-1)
    ur = 0.5 * np.sum((u @ prob.R) * u, axis=-1)
    return xq + ur


def terminal_cost(prob: LQProblem, x):
    """(1/2) x'Qf x for a single point or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != prob.n:
        raise DimensionMismatchError(
            f"state dim {x.shape[-1]} does not match problem dim {prob.n}"
        )
    return 0.5 * np.sum((x @ prob.Qf) * x, axis=-1)


# --- JSON round trip -------------------------------------------------------

_JSON_KEYS = ("A", "B", "sigma", "Q", "R", "Qf", "m0", "Sigma0")


def problem_to_dict(prob: LQProblem) -> dict:
    d = {k: np.asarray(getattr(prob, k)).tolist() for k in _JSON_KEYS}
    d["T"] = prob.T
    return d


def problem_from_dict(d: dict) -> LQProblem:
    missing = [k for k in (*_JSON_KEYS, "T") if k not in d]
    if missing:
        raise KeyError(f"problem JSON is missing keys: {missing}")
    return make_lq(**{k: d[k] for k in (*_JSON_KEYS, "T")})


def save_problem(prob: LQProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(prob), fh, indent=2)
        fh.write("\n")


def load_problem(path) -> LQProblem:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
