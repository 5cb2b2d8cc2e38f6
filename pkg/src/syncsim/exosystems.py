"""Disturbance generators: w' = s(w), d = R w with non-expansive s.

Built-in generators are linear with s(w) = S w for S either zero (constant
disturbances) or skew-symmetric (rotations producing sinusoids); both make
every ball around the origin forward invariant. A custom generator callable
can be supplied as long as it keeps the monotonicity property
(w - w')^T (s(w) - s(w')) <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError

SKEW_TOL = 1e-12


@dataclass(frozen=True)
class Exosystem:
    """One node's disturbance generator.

    S is the linear generator matrix (None for a user-supplied callable in
    `generator`); R maps the internal state to the q-dimensional
    disturbance. `w0` is optional: when absent, the simulator draws the
    initial state from the scenario's initial-condition box.
    """

    dim: int
    output_dim: int
    S: np.ndarray | None
    R: np.ndarray
    w0: np.ndarray | None = None
    kind: str = "custom"
    generator: Callable[[np.ndarray], np.ndarray] | None = None

    def s(self, w: np.ndarray) -> np.ndarray:
        if self.S is not None:
            return self.S @ w
        return self.generator(w)

    def d(self, w: np.ndarray) -> np.ndarray:
        return self.R @ w


def constant_exo(q: int, w0=None) -> Exosystem:
    """Constant disturbance: w' = 0, d = w (R = I_q, dim q)."""
    w0 = None if w0 is None else np.asarray(w0, dtype=float).reshape(q)
    return Exosystem(
        dim=q, output_dim=q, S=np.zeros((q, q)), R=np.eye(q), w0=w0, kind="constant"
    )


def rotation_exo(omega: float, w0=None, R=None, q: int = 1) -> Exosystem:
    """Harmonic disturbance of frequency omega from a 2-state rotation.

    w' = omega [[0, 1], [-1, 0]] w; the default output row [1, 0] gives
    d(t) = w0_1 cos(omega t) + w0_2 sin(omega t) for q = 1.
    """
    S = omega * np.array([[0.0, 1.0], [-1.0, 0.0]])
    if R is None:
        R = np.zeros((q, 2))
        R[:, 0] = 1.0
    else:
        R = np.asarray(R, dtype=float).reshape(-1, 2)
        q = R.shape[0]
    w0 = None if w0 is None else np.asarray(w0, dtype=float).reshape(2)
    return Exosystem(dim=2, output_dim=q, S=S, R=R, w0=w0, kind="rotation")


def no_exo(q: int) -> Exosystem:
    """Zero-dimensional generator for an undisturbed node (d = 0)."""
    return Exosystem(
        dim=0, output_dim=q, S=np.zeros((0, 0)), R=np.zeros((q, 0)), kind="none"
    )


@dataclass(frozen=True)
class MonotoneReport:
    max_inner_product: float    # max of (w - w')^T (s(w) - s(w')) / ||w - w'||^2
    count: int
    seed: int
    tolerance: float
    passed: bool


def check_monotone(e: Exosystem, count: int = 2000, seed: int = 0,
                   box: float = 5.0, tol: float = 1e-12) -> MonotoneReport:
    """Sample the non-expansiveness of the generator on random state pairs."""
    if e.dim == 0:
        return MonotoneReport(0.0, 0, seed, tol, True)
    rng = np.random.default_rng(seed)
    W = rng.uniform(-box, box, size=(count, e.dim))
    Wp = rng.uniform(-box, box, size=(count, e.dim))
    if e.S is not None:
        dS = (W - Wp) @ e.S.T
    else:
        dS = np.array([e.s(w) - e.s(wp) for w, wp in zip(W, Wp)])
    num = np.einsum("km,km->k", W - Wp, dS)
    den = np.einsum("km,km->k", W - Wp, W - Wp)
    worst = float(np.max(num / np.maximum(den, 1e-300)))
    return MonotoneReport(
        max_inner_product=worst, count=count, seed=seed, tolerance=tol,
        passed=worst <= tol,
    )


def is_skew(e: Exosystem, tol: float = SKEW_TOL) -> bool:
    """True when the linear generator satisfies S + S^T = 0 within tol."""
    if e.S is None:
        return False
    scale = max(1.0, float(np.max(np.abs(e.S))) if e.S.size else 0.0)
    return float(np.max(np.abs(e.S + e.S.T))) <= tol * scale if e.S.size else True


def stack_generators(exos: list[Exosystem]):
    """Block-diagonal (S_bd, R_bd) over all nodes plus per-node state slices.

    R_bd has shape (N*q, m_total) so that the stacked disturbance is
    d = R_bd @ w for the stacked exosystem state w.
    """
    if not exos:
        raise DimensionMismatchError("need at least one exosystem")
    q = exos[0].output_dim
    if any(e.output_dim != q for e in exos):
        raise DimensionMismatchError("exosystems disagree on the disturbance dimension")
    dims = [e.dim for e in exos]
    m_total = sum(dims)
    S_bd = np.zeros((m_total, m_total))
    R_bd = np.zeros((len(exos) * q, m_total))
    slices = []
    pos = 0
    for i, e in enumerate(exos):
        sl = slice(pos, pos + e.dim)
        slices.append(sl)
        if e.S is None:
            raise DimensionMismatchError(
                "stacked internal models require linear generators"
            )
        S_bd[sl, sl] = e.S
        R_bd[i * q:(i + 1) * q, sl] = e.R
        pos += e.dim
    return S_bd, R_bd, slices
