"""Responsibility-weighted local likelihood density estimation.

At each fit point ``w`` the log-density near ``w`` is modelled by a
polynomial ``zeta(u - w) = sum_r beta_r (u - w)**r`` and ``beta`` maximizes
the kernel-localized likelihood

    sum_m mass_m K_h(w_m - w) zeta(w_m - w)
        - M * (integral_X K_h(u - w) exp(zeta(u - w)) du - 1),

with ``M`` the total mass.  ``beta_0`` at the optimum is the log-density
estimate at ``w``.  The kernel is Gaussian, truncated at ``truncation * h``;
the integral uses 40-node Gauss-Legendre quadrature over the kernel window
clipped to the support.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (DegenerateSample, LocalFitDiverged, NonFiniteObjective,
                     ZeroMassDensity)

DENSITY_FLOOR = 1e-12
LOG_DENSITY_FLOOR = float(np.log(DENSITY_FLOOR))
N_QUAD = 40
GRID_SIZE = 101
# bound on polynomial coefficients in bandwidth units; beyond it the fit is a
# spike the quadrature cannot resolve
MAX_SCALED_COEF = 50.0
DEGREE_INFLATION = {0: 1.0, 1: 1.0, 2: 1.5}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(N_QUAD)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float
    truncation: float = 4.0

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.truncation < 3:
            raise ValueError(f"truncation must be >= 3, got {self.truncation}")

    def __call__(self, x):
        """Truncated Gaussian kernel ``phi(x/h)/h``."""
        h = self.bandwidth
        t = np.asarray(x, dtype=float) / h
        return np.where(np.abs(t) <= self.truncation, np.exp(-0.5 * t * t) * _INV_SQRT_2PI / h, 0.0)

    @property
    def radius(self):
        return self.truncation * self.bandwidth


@dataclass(frozen=True)
class WeightedSample:
    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        m = np.asarray(self.masses, dtype=float).ravel()
        if v.shape != m.shape:
            raise ValueError("values and masses must have equal length")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and non-negative")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if m.sum() <= 0:
            raise DegenerateSample("total mass must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "masses", m)

    @classmethod
    def unit(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones_like(values))

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def sorted(self) -> "WeightedSample":
        if self.values.size < 2 or np.all(np.diff(self.values) >= 0):
            return self
        order = np.argsort(self.values, kind="stable")
        return WeightedSample(self.values[order], self.masses[order])


@dataclass(frozen=True)
class LocalFitCoefficients:
    beta: np.ndarray
    w: float
    degree: int = 2

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if beta.shape != (self.degree + 1,):
            raise ValueError(f"beta must have length {self.degree + 1}")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class DensityEstimate:
    """Log-density tabulated on a grid.

    ``fallback[g]`` is True where the local fit diverged and the plain
    kernel density value was substituted.
    """

    grid: np.ndarray
    log_density: np.ndarray
    bandwidth: float
    degree: int
    support: tuple[float, float]
    fallback: np.ndarray = field(default=None)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        ld = np.asarray(self.log_density, dtype=float)
        if grid.ndim != 1 or grid.shape != ld.shape or grid.size < 2:
            raise ValueError("grid and log_density must be equal-length 1-d arrays")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        fb = np.zeros(grid.size, bool) if self.fallback is None else np.asarray(self.fallback, bool)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "log_density", ld)
        object.__setattr__(self, "fallback", fb)
        object.__setattr__(self, "support", (float(self.support[0]), float(self.support[1])))

    @property
    def density(self):
        return np.exp(self.log_density)

    def integral(self) -> float:
        return float(integrate.trapezoid(np.exp(self.log_density), self.grid))

    def __call__(self, w):
        return evaluate_density(self, w)


# ---------------------------------------------------------------------------
# bandwidth and grid

def weighted_quantile(values, masses, q):
    """Quantiles of a mass-weighted sample (midpoint interpolation)."""
    if values.size > 1 and np.all(np.diff(values) >= 0):
        v, m = values, masses
    else:
        order = np.argsort(values, kind="stable")
        v, m = values[order], masses[order]
    cum = np.cumsum(m)
    pos = (cum - 0.5 * m) / cum[-1]
    return np.interp(q, pos, v)


def select_bandwidth(sample: WeightedSample) -> float:
    """Silverman-type bandwidth for a mass-weighted sample.

    ``h = 0.9 * min(sd, IQR/1.34) * n_eff**(-1/5)`` with the effective size
    ``n_eff = (sum m)**2 / sum m**2``.  When the weighted IQR is zero the
    standard deviation is used alone.
    """
    v, m = sample.values, sample.masses
    if np.unique(v[m > 0]).size < 2:
        raise DegenerateSample("bandwidth selection needs at least 2 distinct values")
    M = m.sum()
    mean = float(np.dot(m, v) / M)
    sd = float(np.sqrt(np.dot(m, (v - mean) ** 2) / M))
    if not sd > 0:
        return max(abs(mean), 1.0) * 1e-2
    q25, q75 = weighted_quantile(v, m, [0.25, 0.75])
    spread = sd if q75 <= q25 else min(sd, (q75 - q25) / 1.34)
    n_eff = M * M / float(np.dot(m, m))
    return 0.9 * spread * n_eff ** (-0.2)


def bandwidth_for_degree(sample: WeightedSample, degree: int = 2) -> float:
    """Rule-of-thumb bandwidth for a local fit of the given polynomial degree.

    Degrees 0 and 1 use :func:`select_bandwidth` as is.  The local quadratic
    fit has an equivalent kernel with about 1.7 times the roughness of the
    Gaussian, so its variance at a given ``h`` is correspondingly larger
    while its bias is of higher order; it gets ``h`` inflated by
    ``DEGREE_INFLATION[2]``.
    """
    return select_bandwidth(sample) * DEGREE_INFLATION[degree]


def make_grid(values, bandwidth: float, size: int = GRID_SIZE) -> np.ndarray:
    """Equally spaced fit points over ``[min - 3h, max + 3h]``."""
    values = np.asarray(values, dtype=float)
    return np.linspace(values.min() - 3 * bandwidth, values.max() + 3 * bandwidth, size)


# ---------------------------------------------------------------------------
# local objective

def _quadrature(w, kernel: KernelSpec, support):
    """Nodes and kernel-weighted quadrature weights of ``int_X K_h(u-w) g(u) du``."""
    lo = max(w - kernel.radius, support[0])
    hi = min(w + kernel.radius, support[1])
    if hi <= lo:
        return np.zeros(N_QUAD), np.zeros(N_QUAD)
    half = 0.5 * (hi - lo)
    u = 0.5 * (hi + lo) + half * _GL_NODES
    return u, half * _GL_WEIGHTS * kernel(u - w)


def _quadrature_grid(grid, kernel: KernelSpec, support):
    """Row-wise :func:`_quadrature` for every fit point at once."""
    lo = np.maximum(grid - kernel.radius, support[0])
    hi = np.minimum(grid + kernel.radius, support[1])
    half = np.where(hi > lo, 0.5 * (hi - lo), 0.0)
    u = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_NODES
    qw = half[:, None] * _GL_WEIGHTS * kernel(u - grid[:, None])
    return u, qw


def local_objective(coeffs: LocalFitCoefficients, sample: WeightedSample, kernel: KernelSpec,
                    support=None):
    """Local log-likelihood at ``coeffs.w`` with exact gradient and Hessian in beta.

    ``support`` defaults to the whole real line restricted to the kernel
    window.  Returns ``(value, gradient, hessian)``.
    """
    w, beta = coeffs.w, coeffs.beta
    p = coeffs.degree
    if support is None:
        support = (-np.inf, np.inf)
    powers = np.arange(p + 1)

    x = sample.values - w
    kw = sample.masses * kernel(x)
    X = x[:, None] ** powers
    data = kw @ X

    u, qw = _quadrature(w, kernel, support)
    U = (u - w)[:, None] ** powers
    with np.errstate(over="raise", invalid="raise"):
        try:
            e = qw * np.exp(U @ beta)
        except FloatingPointError as exc:
            raise NonFiniteObjective(f"exp overflow at w={w}") from exc
    M = sample.total_mass
    value = float(data @ beta - M * (e.sum() - 1.0))
    grad = data - M * (e @ U)
    hess = -M * (U.T * e) @ U
    if not (np.isfinite(value) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise NonFiniteObjective(f"non-finite local objective at w={w}")
    return value, grad, hess


def _local_moments(sample: WeightedSample, grid, kernel: KernelSpec, p: int):
    """Kernel moments of the sample around every grid point.

    Returns ``S[g, r] = sum_m mass_m K_h(w_m - w_g) ((w_m - w_g)/h)**r / M``
    and the local effective sample size ``(sum mK)**2 / sum (mK)**2``.
    """
    v, m = sample.values, sample.masses
    h, rad = kernel.bandwidth, kernel.radius
    lo = np.searchsorted(v, grid - rad, side="left")
    hi = np.searchsorted(v, grid + rad, side="right")
    S = np.zeros((grid.size, p + 1))
    n_loc = np.zeros(grid.size)
    for g in range(grid.size):
        if hi[g] <= lo[g]:
            continue
        t = (v[lo[g]:hi[g]] - grid[g]) / h
        kw = m[lo[g]:hi[g]] * np.exp(-0.5 * t * t)
        S[g, 0] = s0 = kw.sum()
        if s0 > 0:
            n_loc[g] = s0 * s0 / np.dot(kw, kw)
        if p >= 1:
            S[g, 1] = kw @ t
        if p >= 2:
            S[g, 2] = kw @ (t * t)
    return S * (_INV_SQRT_2PI / h / sample.total_mass), n_loc


def _batched_newton(S, T, C, max_iter=50, tol=1e-8, max_halvings=30, c_armijo=1e-4, skip=None):
    """Maximize ``S.b - (sum_q C exp(T b) - 1)`` independently for every row.

    ``S`` is (G, P), ``T`` is (G, Q, P) powers of scaled offsets at the
    quadrature nodes and ``C`` is (G, Q) kernel quadrature weights.  Rows
    flagged in ``skip`` keep their starting value and count as failed.
    Returns the coefficients, a convergence mask and the final gradient norms.
    """
    G, P = S.shape
    q = C.sum(axis=1)
    beta = np.zeros((G, P))
    with np.errstate(divide="ignore"):
        beta[:, 0] = np.log(np.where(q > 0, S[:, 0] / np.where(q > 0, q, 1.0), 0.0))
    ok = np.isfinite(beta[:, 0])
    beta[~ok, 0] = 0.0
    if skip is not None:
        ok &= ~skip
    done = ~ok
    failed = ~ok
    gnorm = np.full(G, np.inf)

    def evaluate(b, rows):
        with np.errstate(over="ignore", invalid="ignore"):
            eta = np.einsum("gqp,gp->gq", T[rows], b)
            e = C[rows] * np.exp(eta)
            val = np.einsum("gp,gp->g", S[rows], b) - (e.sum(axis=1) - 1.0)
        return val, e

    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        b = beta[act]
        val, e = evaluate(b, act)
        Ta = T[act]
        grad = S[act] - np.einsum("gq,gqp->gp", e, Ta)
        gn = np.linalg.norm(grad, axis=1)
        gnorm[act] = gn
        conv = gn <= tol
        done[act[conv]] = True
        keep = ~conv
        if not keep.any():
            break
        act, b, val, grad, e, Ta = act[keep], b[keep], val[keep], grad[keep], e[keep], Ta[keep]
        # -H is a Gram matrix, so a tiny ridge keeps the solve well posed
        A = np.einsum("gq,gqp,gqr->gpr", e, Ta, Ta)
        ridge = 1e-12 * np.maximum(np.trace(A, axis1=1, axis2=2), 1e-300)
        A = A + ridge[:, None, None] * np.eye(P)
        direction = np.linalg.solve(A, grad[..., None])[..., 0]
        slope = np.einsum("gp,gp->g", grad, direction)
        step = np.ones(act.size)
        accepted = np.zeros(act.size, bool)
        for _ in range(max_halvings + 1):
            idx = np.flatnonzero(~accepted)
            if idx.size == 0:
                break
            trial = b[idx] + step[idx, None] * direction[idx]
            tval, _ = evaluate(trial, act[idx])
            good = np.isfinite(tval) & (tval >= val[idx] + c_armijo * step[idx] * slope[idx])
            accepted[idx[good]] = True
            beta[act[idx[good]]] = trial[good]
            step[idx[~good]] *= 0.5
        stuck = ~accepted
        if stuck.any():
            # no ascent possible at float precision: accept as converged when the
            # gradient is already small, otherwise the point has diverged
            small = gnorm[act[stuck]] <= 1e-6
            done[act[stuck]] = True
            failed[act[stuck][~small]] = True
    converged = done & ~failed
    # points still active after max_iter
    left = ~done
    if left.any():
        failed |= left & (gnorm > 1e-6)
        converged |= left & (gnorm <= 1e-6)
    return beta, converged, gnorm


def fit_local_density(sample: WeightedSample, grid, kernel: KernelSpec, degree: int = 2,
                      support=None, strict: bool = False,
                      min_local_size: float = 5.0) -> DensityEstimate:
    """Fit the log-density at every grid point and normalize the result.

    Each grid point is an independent damped-Newton maximization (at most 50
    iterations, gradient norm of the mass-normalized objective <= 1e-8,
    Armijo halving up to 30 times), started from the kernel density value.
    Points whose fit diverges fall back to the kernel density value, floored
    at :data:`DENSITY_FLOOR`, and are flagged in ``fallback``.  The same
    fallback applies where the kernel window holds fewer than
    ``min_local_size * (degree + 1)`` effective points, since the polynomial
    fit is unbounded there.  With
    ``strict=True`` the first divergence raises :class:`LocalFitDiverged`.
    """
    grid = np.asarray(grid, dtype=float)
    if support is None:
        support = (float(grid[0]), float(grid[-1]))
    if degree not in (0, 1, 2):
        raise ValueError(f"degree must be 0, 1 or 2, got {degree}")
    sample = sample.sorted()
    h = kernel.bandwidth
    P = degree + 1
    S, n_loc = _local_moments(sample, grid, kernel, degree)

    u, C = _quadrature_grid(grid, kernel, support)
    T = ((u - grid[:, None]) / h)[..., None] ** np.arange(P)

    # A window holding only a few effective points makes the polynomial fit
    # unbounded (the log-density collapses onto a spike), and a spike that
    # the quadrature cannot resolve shows up as huge scaled coefficients.
    sparse = (n_loc < min_local_size * (degree + 1)) if degree > 0 else np.zeros(grid.size, bool)
    beta, converged, _ = _batched_newton(S, T, C, skip=sparse)
    kde = S[:, 0] / np.where(C.sum(axis=1) > 0, C.sum(axis=1), np.inf)
    log_kde = np.log(np.maximum(kde, DENSITY_FLOOR))
    ill_posed = sparse | np.any(np.abs(beta[:, 1:]) > MAX_SCALED_COEF, axis=1)
    fallback = ~converged | (S[:, 0] <= 0) | ill_posed
    if strict and fallback.any():
        g = int(np.argmax(fallback))
        reason = "empty kernel window" if S[g, 0] <= 0 else "too few local points" if ill_posed[g] else ""
        raise LocalFitDiverged(float(grid[g]), reason)
    log_f = np.where(fallback, log_kde, beta[:, 0])
    log_f = np.maximum(log_f, LOG_DENSITY_FLOOR)
    est = DensityEstimate(grid, log_f, h, degree, support, fallback)
    return normalize_density(est)


def normalize_density(est: DensityEstimate) -> DensityEstimate:
    """Rescale so the trapezoidal integral over the grid equals 1."""
    ld = est.log_density
    if not np.all(np.isfinite(ld)):
        raise ZeroMassDensity("log-density must be finite on the grid")
    top = ld.max()
    z = integrate.trapezoid(np.exp(ld - top), est.grid)
    if not (np.isfinite(z) and z > 0):
        raise ZeroMassDensity("density integrates to zero")
    log_z = top + np.log(z)
    return DensityEstimate(est.grid, ld - log_z, est.bandwidth, est.degree, est.support,
                           est.fallback)


def log_density_at(est: DensityEstimate, w) -> np.ndarray:
    """Floored log-density at ``w``; linear in log between grid points."""
    w = np.asarray(w, dtype=float)
    out = np.interp(w, est.grid, est.log_density)
    outside = (w < est.grid[0]) | (w > est.grid[-1])
    out = np.where(outside, LOG_DENSITY_FLOOR, out)
    return np.maximum(out, LOG_DENSITY_FLOOR)


def evaluate_density(est: DensityEstimate, w):
    """Density at ``w``; ``DENSITY_FLOOR`` outside the grid or on underflow."""
    ld = log_density_at(est, w)
    out = np.where(ld <= LOG_DENSITY_FLOOR, DENSITY_FLOOR, np.exp(ld))
    return float(out) if out.ndim == 0 else out
