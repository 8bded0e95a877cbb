"""Mean-field stationary states of the cavity-coupled system.

The cavity equation d<a>/dt = i D <a> - (kappa/2) <a> + i (eps - g X) has the
stationary displacement x_ss = (eps - g X_ss(b)) / alpha with
alpha = -(D^2 + kappa^2/4) / (2 D) and b = B_x - g x_ss. Roots of

    f(x) = alpha x - eps + g X_ss(B_x - g x)

are the self-consistent cavity displacements. Bistability appears when
alpha / g^2 lies between X'_ss(0) and max X'_ss.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import EmptyResult, InvalidInput
from .spectral import gap_location, xss_prime_curve, xss_prime_fd


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


class Control(str, enum.Enum):
    EPSILON = "epsilon"
    DELTA_C = "delta_c"


@dataclass(frozen=True)
class CavityParams:
    delta_c: float
    kappa: float
    g: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidInput(f"kappa must be positive, got {self.kappa}")

    @property
    def alpha(self) -> float:
        return alpha(self.delta_c, self.kappa)

    def with_control(self, control, value: float) -> "CavityParams":
        if Control(control) is Control.EPSILON:
            return replace(self, epsilon=value)
        return replace(self, delta_c=value)


def alpha(delta_c: float, kappa: float) -> float:
    if delta_c == 0:
        raise ZeroDivisionError("alpha is undefined at zero detuning")
    return -(delta_c**2 + (kappa / 2) ** 2) / (2 * delta_c)


def detuning_for_alpha(alpha_value: float, kappa: float, branch: str = "far") -> float:
    """Negative detuning giving ``alpha_value``.

    alpha(D) for D < 0 has its minimum kappa/2 at D = -kappa/2; ``far`` picks
    the root with |D| >= kappa/2, ``near`` the other one.
    """
    disc = alpha_value**2 - kappa**2 / 4
    if disc < 0:
        raise EmptyResult(f"alpha={alpha_value:.6g} below the minimum kappa/2={kappa / 2:.6g}")
    root = np.sqrt(disc)
    return float(-alpha_value - root if branch == "far" else -alpha_value + root)


@dataclass(frozen=True)
class StationaryPoint:
    x_ss: float
    b_eff: float
    stability: Stability
    x_ss_prime: float = float("nan")


@dataclass(frozen=True)
class BifurcationPoint:
    b_eff: float
    x: float
    control_value: float
    control_kind: Control = Control.EPSILON


def root_bracket(model, g: float, alphas, epsilons) -> tuple[float, float]:
    """Displacement interval holding every root for the given alpha and drive values.

    Since |X_ss| <= x_max, any root obeys |alpha x - eps| <= |g| x_max. The
    interval always covers the physical window 0 <= b <= B_x as well.
    """
    lo, hi = sorted((-0.05 * model.b_x / g, 1.05 * model.b_x / g))
    span = abs(g) * model.x_max
    for a in np.atleast_1d(alphas):
        for e in np.atleast_1d(epsilons):
            lo = min(lo, (e - span) / a)
            hi = max(hi, (e + span) / a)
    pad = 1e-6 * (hi - lo)
    return lo - pad, hi + pad


class _RootScanner:
    """X_ss tabulated once on a displacement grid, reused across drive values."""

    def __init__(self, model, g: float, x_range=None, n_grid: int = 2000):
        self.model = model
        self.g = g
        lo, hi = x_range if x_range is not None else sorted((-0.05 * model.b_x / g, 1.05 * model.b_x / g))
        self.x = np.linspace(lo, hi, n_grid)
        self.xs = np.asarray(model.x_ss(model.b_x - g * self.x), dtype=float)

    def refined(self) -> "_RootScanner":
        new = object.__new__(_RootScanner)
        new.model, new.g = self.model, self.g
        new.x = np.linspace(self.x[0], self.x[-1], 2 * len(self.x) - 1)
        xs = np.empty(len(new.x))
        xs[::2] = self.xs
        xs[1::2] = self.model.x_ss(self.model.b_x - self.g * new.x[1::2])
        new.xs = xs
        return new

    def residual(self, x, alpha_value, eps):
        return alpha_value * x - eps + self.g * self.model.x_ss(self.model.b_x - self.g * x)

    def roots(self, alpha_value: float, eps: float) -> list[float]:
        f = alpha_value * self.x - eps + self.g * self.xs
        tol = 1e-10 * max(abs(eps), 1.0)
        out = []
        for i in range(len(self.x) - 1):
            fa, fb = f[i], f[i + 1]
            if fa == 0.0:
                out.append(float(self.x[i]))
            elif fa * fb < 0:
                r = brentq(self.residual, self.x[i], self.x[i + 1], args=(alpha_value, eps),
                           xtol=1e-14, rtol=1e-15, maxiter=200)
                if abs(self.residual(r, alpha_value, eps)) > tol:
                    r = _bisect_to(self.residual, self.x[i], self.x[i + 1], tol, (alpha_value, eps))
                out.append(float(r))
        if f[-1] == 0.0:
            out.append(float(self.x[-1]))
        return out


def _bisect_to(fun, a, b, tol, args):
    fa = fun(a, *args)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = fun(m, *args)
        if abs(fm) <= tol:
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _classify(model, cavity: CavityParams, x: float) -> StationaryPoint:
    b = model.b_x - cavity.g * x
    xp = xss_prime_fd(model, b)
    slope = cavity.alpha - cavity.g**2 * xp
    return StationaryPoint(x, b, Stability.STABLE if slope > 0 else Stability.UNSTABLE, xp)


def stationary_points(model, cavity: CavityParams, x_range=None, n_grid: int = 2000,
                      scanner: _RootScanner | None = None) -> list[StationaryPoint]:
    """All self-consistent displacements, tagged by the sign of alpha - g^2 X'_ss.

    Raises EmptyResult when no root lies in the displacement bracket.
    """
    a = cavity.alpha
    if not a > 0:
        raise InvalidInput("stationary analysis needs alpha > 0 (negative detuning)")
    if cavity.g == 0:
        return [StationaryPoint(cavity.epsilon / a, model.b_x, Stability.STABLE, 0.0)]
    if scanner is None and x_range is None:
        x_range = root_bracket(model, cavity.g, a, cavity.epsilon)
    scan = scanner if scanner is not None else _RootScanner(model, cavity.g, x_range, n_grid)
    roots = scan.roots(a, cavity.epsilon)
    for _ in range(4):
        cell = scan.x[1] - scan.x[0]
        if len(roots) < 2 or np.min(np.diff(roots)) >= 3 * cell:
            break
        scan = scan.refined()
        roots = scan.roots(a, cavity.epsilon)
    if not roots:
        raise EmptyResult(f"no stationary point for {cavity}")
    return [_classify(model, cavity, r) for r in roots]


def bifurcation_points(model, cavity: CavityParams, control=Control.EPSILON, n_grid: int = 2000,
                       branch: str = "far") -> list[BifurcationPoint]:
    """Turning points d(control)/dx_ss = 0, sorted by control value.

    For the drive amplitude these are the solutions of X'_ss(b) = alpha/g^2.
    For the detuning (drive fixed at ``cavity.epsilon``) alpha itself varies:
    the condition becomes g^2 X'_ss(b) = g (eps - g X_ss(b)) / (B_x - b) and the
    detuning follows from alpha on the chosen ``branch``.
    """
    control = Control(control)
    g = cavity.g
    if g == 0:
        raise EmptyResult("no bifurcations without coupling")
    bx = model.b_x
    lo, hi = 0.0, bx * (1 - 1e-9)
    grid = np.linspace(lo, hi, n_grid)
    xp_grid = xss_prime_curve(model, grid)
    xs_grid = np.asarray(model.x_ss(grid), dtype=float)

    points = []
    if control is Control.EPSILON:
        a = cavity.alpha
        target = a / g**2
        vals = xp_grid - target

        def fun(b):
            return xss_prime_fd(model, b) - target
    else:
        eps = cavity.epsilon
        vals = g**2 * xp_grid - g * (eps - g * xs_grid) / (bx - grid)

        def fun(b):
            return g**2 * xss_prime_fd(model, b) - g * (eps - g * model.x_ss(b)) / (bx - b)

    for i in range(n_grid - 1):
        if vals[i] * vals[i + 1] < 0:
            b = brentq(fun, grid[i], grid[i + 1], xtol=1e-13)
            x = (bx - b) / g
            if control is Control.EPSILON:
                points.append(BifurcationPoint(b, x, a * x + g * model.x_ss(b), control))
            else:
                a_i = g**2 * xss_prime_fd(model, b)
                try:
                    d = detuning_for_alpha(a_i, cavity.kappa, branch)
                except EmptyResult:
                    continue
                points.append(BifurcationPoint(b, x, d, control))
    if not points:
        raise EmptyResult("bifurcation condition has no solution on [0, B_x]")
    return sorted(points, key=lambda p: p.control_value)


def linearization_matrix(x_ss_prime: float, cavity: CavityParams) -> np.ndarray:
    """Jacobian of (delta x_a, delta p_a) about a stationary point.

    With x = 2 Re<a>, p = 2 Im<a> and X linearised as X_ss - g X'_ss delta x.
    """
    d, k = cavity.delta_c, cavity.kappa
    return np.array([[-k / 2, -d], [d + 2 * cavity.g**2 * x_ss_prime, -k / 2]])


def secular_frequencies(x_ss_prime: float, cavity: CavityParams) -> tuple[complex, complex]:
    d = cavity.delta_c
    root = np.sqrt(complex(-2 * d * cavity.g**2 * x_ss_prime - d**2))
    return -cavity.kappa / 2 + root, -cavity.kappa / 2 - root


@dataclass(frozen=True)
class SweepRow:
    control_value: float
    points: tuple[StationaryPoint, ...]
    empty: bool = False


def sweep_control(model, cavity: CavityParams, control, lo: float, hi: float, n: int,
                  n_grid: int = 2000) -> list[SweepRow]:
    if n < 2:
        raise InvalidInput("sweep needs n >= 2")
    if not lo < hi:
        raise InvalidInput("sweep bounds must satisfy lo < hi")
    return sweep_values(model, cavity, control, np.linspace(lo, hi, n), n_grid)


def sweep_values(model, cavity: CavityParams, control, values, n_grid: int = 2000) -> list[SweepRow]:
    """Stationary points at each control value; empty rows are flagged, not raised."""
    control = Control(control)
    values = np.asarray(values, dtype=float)
    scanner = None
    if cavity.g != 0:
        if control is Control.EPSILON:
            bracket = root_bracket(model, cavity.g, cavity.alpha, [values.min(), values.max()])
        else:
            alphas = [alpha(d, cavity.kappa) for d in values if d < 0]
            bracket = root_bracket(model, cavity.g, [min(alphas), max(alphas)], cavity.epsilon) if alphas else None
        scanner = _RootScanner(model, cavity.g, bracket, n_grid)
    rows = []
    for value in values:
        cav = cavity.with_control(control, float(value))
        try:
            pts = stationary_points(model, cav, scanner=scanner)
            rows.append(SweepRow(float(value), tuple(pts)))
        except EmptyResult:
            rows.append(SweepRow(float(value), (), True))
    return rows


def follow_stable_branch(rows: list[SweepRow], reverse: bool = False) -> list[float | None]:
    """Quasi-static branch selection: stay on the stable point nearest the previous one."""
    order = range(len(rows) - 1, -1, -1) if reverse else range(len(rows))
    chosen: list[float | None] = [None] * len(rows)
    prev = None
    for i in order:
        stable = [p.x_ss for p in rows[i].points if p.stability is Stability.STABLE]
        if not stable:
            continue
        pick = stable[0] if prev is None else min(stable, key=lambda x: abs(x - prev))
        chosen[i] = prev = pick
    return chosen


@dataclass(frozen=True)
class FeasibilityReport:
    alpha: float
    alpha_over_g2: float
    xp_at_zero: float
    xp_max: float
    b_at_xp_max: float
    x_ss_at_bx: float
    eps_0: float
    eps_f: float
    negative_detuning: bool
    bistable_window: bool
    switching_order: bool

    @property
    def passed(self) -> bool:
        return self.negative_detuning and self.bistable_window and self.switching_order


def max_xss_prime(model, n_grid: int = 400) -> tuple[float, float]:
    """Maximum of X'_ss over [0, B_x], refined around the gap position."""
    grid = np.linspace(0.0, model.b_x, n_grid)
    gl = gap_location(model)
    width = 4 * (grid[1] - grid[0])
    fine = np.linspace(max(gl.b_gap - width, 0.0), min(gl.b_gap + width, model.b_x), 81)
    allb = np.concatenate([grid, fine])
    vals = xss_prime_curve(model, allb)
    i = int(np.argmax(vals))
    b0 = allb[i]
    step = grid[1] - grid[0]
    lo, hi = max(b0 - step, 0.0), min(b0 + step, model.b_x)
    res = minimize_scalar(lambda b: -xss_prime_fd(model, b), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-9})
    if -res.fun > vals[i]:
        return float(-res.fun), float(res.x)
    return float(vals[i]), float(b0)


def feasibility_check(model, cavity: CavityParams) -> FeasibilityReport:
    g = cavity.g
    negative = cavity.delta_c < 0
    a = alpha(cavity.delta_c, cavity.kappa)
    ratio = a / g**2 if g else float("inf")
    xp0 = xss_prime_fd(model, 0.0)
    xpmax, bmax = max_xss_prime(model)
    x_bx = float(model.x_ss(model.b_x))
    x_0 = float(model.x_ss(0.0))
    eps_0 = g * x_bx
    eps_f = a * model.b_x / g + g * x_0 if g else float("inf")
    return FeasibilityReport(
        alpha=a,
        alpha_over_g2=ratio,
        xp_at_zero=xp0,
        xp_max=xpmax,
        b_at_xp_max=bmax,
        x_ss_at_bx=x_bx,
        eps_0=eps_0,
        eps_f=eps_f,
        negative_detuning=negative,
        bistable_window=bool(xp0 < ratio < xpmax),
        switching_order=bool(x_bx / model.b_x < ratio),
    )
