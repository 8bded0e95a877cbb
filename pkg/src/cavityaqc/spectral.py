"""Ground-state observables: X_ss(b), its derivative, energy gaps and the gap position."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateGround, InvalidInput
from .models import BdGModel, tfim_bdg_hamiltonian

MAX_DIM = 2**10
DEGENERACY_TOL = 1e-9
RICHARDSON_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def residual(self, h: np.ndarray) -> float:
        """max_i ||H v_i - E_i v_i|| relative to ||H||."""
        r = h @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.max(np.linalg.norm(r, axis=0)) / max(np.linalg.norm(h, 2), 1e-300))


def eigh(h, max_dim: int = MAX_DIM, tol: float = 1e-12) -> Spectrum:
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {h.shape}")
    if h.shape[0] > max_dim:
        raise InvalidInput(f"dimension {h.shape[0]} exceeds cap {max_dim}")
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.T)) > tol * scale:
        raise InvalidInput("matrix is not symmetric")
    w, v = np.linalg.eigh(h)
    return Spectrum(w, v)


@dataclass(frozen=True)
class GroundObservables:
    b_eff: float
    x_ss: float
    x_ss_prime: float
    gap: float
    degenerate: bool = False


def default_fd_step(model) -> float:
    return 1e-4 * model.j0


def xss_prime_fd(model, b_eff: float, fd_step: float | None = None) -> float:
    """Central difference of X_ss with one Richardson step (h and h/2)."""
    h = default_fd_step(model) if fd_step is None else fd_step
    if not h > 0:
        raise InvalidInput("fd_step must be positive")
    xs = np.asarray(model.x_ss(np.array([b_eff - h, b_eff + h, b_eff - h / 2, b_eff + h / 2])))
    d1 = (xs[1] - xs[0]) / (2 * h)
    d2 = (xs[3] - xs[2]) / h
    if abs(d2 - d1) <= RICHARDSON_TOL * max(abs(d2), 1e-12):
        return float(d2)
    return float((4 * d2 - d1) / 3)


def ground_observables(model, b_eff: float, fd_step: float | None = None) -> GroundObservables:
    if isinstance(model, BdGModel):
        x = model.x_ss(b_eff)
        gap = model.gap(b_eff)
        degenerate = gap < DEGENERACY_TOL * max(model.j0, abs(b_eff))
    else:
        h = model.hamiltonian(b_eff)
        w, v = np.linalg.eigh(h)
        x = float(v[:, 0] @ model.h0 @ v[:, 0])
        gap = float(w[1] - w[0]) if len(w) > 1 else np.inf
        degenerate = gap < DEGENERACY_TOL * max(np.linalg.norm(h, 2), 1e-300)
        if model.pair_gap:
            gap /= 2
    return GroundObservables(float(b_eff), float(x), xss_prime_fd(model, b_eff, fd_step), float(gap), bool(degenerate))


def xss_prime_perturbative(model, b_eff: float) -> float:
    """2 * sum_{n != G} |<n|H_0|G>|^2 / (E_n - E_G).

    The factor 2 makes this the exact derivative dX_ss/db (Hellmann-Feynman
    plus first-order state correction).
    """
    if isinstance(model, BdGModel):
        total = 0.0
        for k in model.modes:
            w, v = np.linalg.eigh(tfim_bdg_hamiltonian(k, b_eff, model.j0))
            if w[1] - w[0] < DEGENERACY_TOL * max(model.j0, 1.0):
                raise DegenerateGround(f"mode k={k:.6g} degenerate at b={b_eff:.6g}")
            # H_0 restricted to a pair mode acts as diag(2, -2) on (U, V)
            elem = v[:, 1] @ np.diag([2.0, -2.0]) @ v[:, 0]
            total += elem**2 / (w[1] - w[0])
        return 2 * total
    w, v = np.linalg.eigh(model.hamiltonian(b_eff))
    if w[1] - w[0] < DEGENERACY_TOL * max(np.max(np.abs(w)), 1.0):
        raise DegenerateGround(f"ground state degenerate at b={b_eff:.6g}")
    elems = v[:, 1:].T @ (model.h0 @ v[:, 0])
    return float(2 * np.sum(elems**2 / (w[1:] - w[0])))


def tls_xss_analytic(b_eff, b_x: float, j0: float):
    u = 2 * np.asarray(b_eff, dtype=float) - b_x
    out = u / np.sqrt(u**2 + j0**2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GapLocation:
    b_gap: float
    gap_min: float
    interior: bool


def gap_location(model, b_range: tuple[float, float] | None = None, n_samples: int = 200) -> GapLocation:
    """Coarse scan of the gap followed by golden-section refinement."""
    if n_samples < 3:
        raise InvalidInput("n_samples must be >= 3")
    lo, hi = (0.0, model.b_x) if b_range is None else b_range
    grid = np.linspace(lo, hi, n_samples)
    gaps = np.array([model.gap(b) for b in grid])
    i = int(np.argmin(gaps))
    if i == 0 or i == n_samples - 1:
        return GapLocation(float(grid[i]), float(gaps[i]), False)
    res = minimize_scalar(model.gap, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          options={"xtol": 1e-10})
    if res.fun <= gaps[i]:
        return GapLocation(float(res.x), float(res.fun), True)
    return GapLocation(float(grid[i]), float(gaps[i]), True)


def observables_table(model, b_grid, fd_step: float | None = None) -> list[GroundObservables]:
    return [ground_observables(model, float(b), fd_step) for b in b_grid]


def xss_prime_curve(model, b_grid, fd_step: float | None = None) -> np.ndarray:
    """Vectorised finite-difference X'_ss over a grid."""
    b = np.asarray(b_grid, dtype=float)
    h = default_fd_step(model) if fd_step is None else fd_step
    if isinstance(model, BdGModel):
        return (model.x_ss(b + h) - model.x_ss(b - h)) / (2 * h)
    return np.array([xss_prime_fd(model, bi, h) for bi in b])

