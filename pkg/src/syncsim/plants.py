"""Node dynamics: Lur'e-type oscillators with incremental passivity certificates.

A plant is a passive linear block (A, B_in, C_out, P) in negative feedback
with a static nonlinearity phi on the output:

    x' = A x + B_in (u + d - phi(y)),      y = C_out x.

The certificate pair (A^T P + P A <= 0, P B_in = C_out^T) together with the
declared Lipschitz bound of phi inside [-tau_star, tau_star] gives the
incremental output-feedback shortage parameter sigma used everywhere else.
Factories are provided for the Van der Pol oscillator and the Chua circuit;
both come out certified by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BadBreakpointsError,
    NonPositiveParameterError,
    NoStorageMatrixError,
)

CERT_TOL = 1e-10


# ------------------------------------------------------------ nonlinearities

def cubic_minus_linear(gain: float) -> Callable[[np.ndarray], np.ndarray]:
    """phi(y) = gain * (y^3/3 - y): negative slope at 0, monotone for |y| >= 1."""
    def phi(y):
        return gain * (y ** 3 / 3.0 - y)
    return phi


def piecewise_linear(tau_b: float, tau_star: float, z0: float, z1: float,
                     z2: float) -> Callable[[np.ndarray], np.ndarray]:
    """Odd continuous piecewise-linear characteristic.

    Slope -z0 on [-tau_b, tau_b], slope -z1 on the two middle bands, slope
    +z2 outside [-tau_star, tau_star]; phi(0) = 0 and continuity at the
    breakpoints hold by construction.
    """
    if not (0.0 < tau_b < tau_star):
        raise BadBreakpointsError(f"need 0 < tau_b < tau_star, got ({tau_b}, {tau_star})")
    if z2 <= 0.0:
        raise NonPositiveParameterError("outer slope z2 must be positive")
    if z0 < 0.0 or z1 < 0.0:
        raise NonPositiveParameterError("inner slopes z0, z1 must be nonnegative")
    v_b = -z0 * tau_b
    v_star = v_b - z1 * (tau_star - tau_b)

    def phi(y):
        y = np.asarray(y, dtype=float)
        a = np.abs(y)
        inner = -z0 * a
        mid = v_b - z1 * (a - tau_b)
        outer = v_star + z2 * (a - tau_star)
        val = np.where(a <= tau_b, inner, np.where(a <= tau_star, mid, outer))
        return np.sign(y) * val
    return phi


NONLINEARITIES = {
    "cubic_minus_linear": cubic_minus_linear,
    "piecewise_linear": piecewise_linear,
}


# ------------------------------------------------------------------- plants

@dataclass(frozen=True)
class LurePlant:
    """Lur'e plant with a quadratic incremental storage certificate.

    phi must be vectorized and elementwise; tau_star and phi_slope_bound
    declare the interval and Lipschitz constant backing sigma.
    """

    A: np.ndarray
    B_in: np.ndarray
    C_out: np.ndarray
    P: np.ndarray
    phi: Callable[[np.ndarray], np.ndarray]
    sigma: float
    tau_star: float
    phi_slope_bound: float
    name: str = "lure"

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def output_dim(self) -> int:
        return self.C_out.shape[0]

    def output(self, x: np.ndarray) -> np.ndarray:
        return self.C_out @ x

    def derivative(self, x: np.ndarray, u, d) -> np.ndarray:
        y = self.C_out @ x
        return self.A @ x + self.B_in @ (np.atleast_1d(u) + np.atleast_1d(d) - self.phi(y))

    # Batch forms evaluate all N nodes at once; rows are nodes.
    def output_batch(self, X: np.ndarray) -> np.ndarray:
        return X @ self.C_out.T

    def derivative_batch(self, X: np.ndarray, U: np.ndarray, D: np.ndarray) -> np.ndarray:
        Y = X @ self.C_out.T
        return X @ self.A.T + (U + D - self.phi(Y)) @ self.B_in.T

    def same_dynamics(self, other: "LurePlant") -> bool:
        return (
            self.name == other.name
            and self.A.shape == other.A.shape
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B_in, other.B_in)
            and np.array_equal(self.C_out, other.C_out)
            and np.array_equal(self.P, other.P)
            and self.phi is other.phi
        )


def _as_matrix(M, rows, cols, what) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (rows, cols):
        raise NonPositiveParameterError(f"{what} must be {rows}x{cols}, got {M.shape}")
    return M


def vanderpol(nu: float) -> LurePlant:
    """Van der Pol oscillator in Lur'e form.

    x1' = x2,  x2' = -x1 + nu (x2 - x2^3/3) + u + d,  y = x2.
    Certificate: P = I_2 (the linear block is a rotation); sigma = nu with
    phi monotone outside [-1, 1].
    """
    if nu <= 0.0:
        raise NonPositiveParameterError(f"nu must be positive, got {nu}")
    return LurePlant(
        A=np.array([[0.0, 1.0], [-1.0, 0.0]]),
        B_in=np.array([[0.0], [1.0]]),
        C_out=np.array([[0.0, 1.0]]),
        P=np.eye(2),
        phi=cubic_minus_linear(nu),
        sigma=nu,
        tau_star=1.0,
        phi_slope_bound=nu,
        name="vanderpol",
    )


def chua(c1: float, c2: float, tau_b: float, tau_star: float, z0: float,
         z1: float, z2: float) -> LurePlant:
    """Chua circuit (dimensionless form) as a Lur'e plant.

    x1' = c1 (x2 - x1 - phi(x1) + u + d), x2' = x1 - x2 + x3, x3' = -c2 x2,
    y = x1. The input enters scaled by c1, so B_in = (c1, 0, 0)^T with
    C_out = (1, 0, 0) and P = diag(1/c1, 1, 1/c2) satisfying P B_in = C^T.
    """
    if c1 <= 0.0 or c2 <= 0.0:
        raise NonPositiveParameterError(f"c1, c2 must be positive, got ({c1}, {c2})")
    phi = piecewise_linear(tau_b, tau_star, z0, z1, z2)
    return LurePlant(
        A=np.array([[-c1, c1, 0.0], [1.0, -1.0, 1.0], [0.0, -c2, 0.0]]),
        B_in=np.array([[c1], [0.0], [0.0]]),
        C_out=np.array([[1.0, 0.0, 0.0]]),
        P=np.diag([1.0 / c1, 1.0, 1.0 / c2]),
        phi=phi,
        sigma=max(z0, z1),
        tau_star=tau_star,
        phi_slope_bound=max(z0, z1),
        name="chua",
    )


def lure(A, B_in, C_out, P, phi: Callable, sigma: float, tau_star: float,
         phi_slope_bound: float | None = None) -> LurePlant:
    """Assemble a user-specified Lur'e plant (certificate not enforced here)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = np.asarray(B_in, dtype=float).reshape(n, -1)
    q = B.shape[1]
    return LurePlant(
        A=_as_matrix(A, n, n, "A"),
        B_in=B,
        C_out=_as_matrix(C_out, q, n, "C_out"),
        P=_as_matrix(P, n, n, "P"),
        phi=phi,
        sigma=float(sigma),
        tau_star=float(tau_star),
        phi_slope_bound=float(sigma if phi_slope_bound is None else phi_slope_bound),
    )


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class CertificateReport:
    """Numerical check of A^T P + P A <= 0 and P B_in = C_out^T."""

    max_eigenvalue: float
    max_pb_residual: float
    tolerance: float
    passed: bool


def check_passivity_certificate(p: LurePlant, tol: float = CERT_TOL) -> CertificateReport:
    """Report-only check of the plant's linear passivity certificate."""
    lyap = p.A.T @ p.P + p.P @ p.A
    max_eig = float(np.max(np.linalg.eigvalsh(0.5 * (lyap + lyap.T))))
    pb_res = float(np.max(np.abs(p.P @ p.B_in - p.C_out.T)))
    return CertificateReport(
        max_eigenvalue=max_eig,
        max_pb_residual=pb_res,
        tolerance=tol,
        passed=(max_eig <= tol and pb_res <= tol),
    )


@dataclass(frozen=True)
class PairSampler:
    """Sampling region for the incremental dissipation check.

    Scalar bounds apply to every component of the state, input, and
    disturbance boxes; `count` independent pairs are drawn with the seed.
    """

    state_low: float = -5.0
    state_high: float = 5.0
    input_low: float = -3.0
    input_high: float = 3.0
    dist_low: float = -3.0
    dist_high: float = 3.0
    count: int = 10_000
    seed: int = 42

    def draw(self, n: int, q: int):
        rng = np.random.default_rng(self.seed)
        def box(lo, hi, cols):
            return rng.uniform(lo, hi, size=(self.count, cols))
        X = box(self.state_low, self.state_high, n)
        Xp = box(self.state_low, self.state_high, n)
        U = box(self.input_low, self.input_high, q)
        Up = box(self.input_low, self.input_high, q)
        D = box(self.dist_low, self.dist_high, q)
        Dp = box(self.dist_low, self.dist_high, q)
        return X, U, D, Xp, Up, Dp


@dataclass(frozen=True)
class IofpReport:
    """Outcome of sampling the incremental dissipation inequality."""

    sigma: float
    max_violation: float        # max of (LHS - RHS) / (1 + |RHS|) over samples
    count: int
    seed: int
    tolerance: float
    passed: bool
    region: str = ""


def check_iofp(p: LurePlant, sigma: float, sampler: PairSampler | None = None,
               tol: float = 1e-9) -> IofpReport:
    """Sample the incremental dissipation inequality with shortage sigma.

    Uses the quadratic storage 0.5 (x - x')^T P (x - x'), whose directional
    derivative along the pair of vector fields is exact:

        LHS = (x - x')^T P (f(x,u,d) - f(x',u',d'))
        RHS = sigma ||y - y'||^2 + (y - y')^T ((u + d) - (u' + d')).

    Passes iff LHS - RHS <= tol * (1 + |RHS|) on every sampled pair.
    """
    if p.P is None:
        raise NoStorageMatrixError("plant has no storage matrix P")
    sampler = sampler or PairSampler()
    X, U, D, Xp, Up, Dp = sampler.draw(p.state_dim, p.output_dim)

    F = p.derivative_batch(X, U, D)
    Fp = p.derivative_batch(Xp, Up, Dp)
    dX = X - Xp
    lhs = np.einsum("ki,ij,kj->k", dX, p.P, F - Fp)
    dY = p.output_batch(X) - p.output_batch(Xp)
    rhs = sigma * np.einsum("kq,kq->k", dY, dY) + np.einsum(
        "kq,kq->k", dY, (U + D) - (Up + Dp)
    )
    violation = float(np.max((lhs - rhs) / (1.0 + np.abs(rhs))))
    region = (f"x in [{sampler.state_low}, {sampler.state_high}]^{p.state_dim}, "
              f"u,d in [{sampler.input_low}, {sampler.input_high}]^{p.output_dim}")
    return IofpReport(
        sigma=sigma,
        max_violation=violation,
        count=sampler.count,
        seed=sampler.seed,
        tolerance=tol,
        passed=violation <= tol,
        region=region,
    )


def phi_tail_min_slope(p: LurePlant, span: float = 10.0, num: int = 201) -> float:
    """Smallest finite-difference slope of phi beyond +-tau_star (grid spot check)."""
    grid = np.linspace(p.tau_star, p.tau_star + span, num)
    slopes = []
    for side in (grid, -grid[::-1]):
        vals = p.phi(side)
        slopes.append(np.min(np.diff(vals) / np.diff(side)))
    return float(min(slopes))
