"""Regularized minimization of mu, stationarity residuals and sharp-inequality checks.

The eps-regularized functional replaces the Green energy by
(1 - eps) lambda_1^eps <F, A^{-1-eps} F>, which is strictly smaller on
every non-constant mode when eps > 0.  Its minimizers over V_F = V are
searched by preconditioned descent in u = log F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conformal import (ConformalFactor, FunctionalReport, _as_values, _mass_values, ball_masses,
                        functional, mass_transform)
from .errors import ConfigError, InequalityViolated, LineSearchFailed, NonpositiveF
from .geometry import diameter, geodesic_distance
from .green_mass import RobinMassField, trace_robin
from .spectral import SpectralModel, sphere_model

__all__ = [
    "DEFAULT_SCHEDULE",
    "ConcentrationIndex",
    "MinimizerState",
    "mu_eps",
    "el_residual",
    "first_variation",
    "minimize",
    "concentration_index",
    "mobius_jacobian",
    "mobius_map",
    "verify_sharp_hls",
    "verify_duality",
    "truncated_bubble",
    "delta_sweep",
]

DEFAULT_SCHEDULE = (0.2, 0.1, 0.05, 0.02, 0.01, 0.0)
CONCENTRATION_FRACTIONS = (0.1, 0.3, 0.5)


def mu_eps(model: SpectralModel, mass_field, F, epsilon: float) -> FunctionalReport:
    """mu^(eps)(M, g, F); identical to :func:`robinlab.conformal.mu` at eps = 0."""
    if not 0.0 <= epsilon <= 0.5:
        raise ConfigError(f"epsilon must lie in [0, 1/2], got {epsilon}")
    return functional(model, mass_field, F, epsilon)


def _residual_raw(model, m, vals, epsilon):
    gamma = model.surface.constants.gamma_n
    VF = float(np.dot(model.weights, vals))
    factor = (1.0 - epsilon) * model.lambda1 ** epsilon
    KF = factor * model.apply_inverse_power(vals, 1.0 + epsilon)
    return m + (2.0 / gamma) * np.log(vals) - (2.0 / VF) * KF


def el_residual(model: SpectralModel, mass_field, F, epsilon: float = 0.0):
    """Stationarity residual of mu^(eps) on V_F = V.

    r = m + (2/gamma_n) log F - (2/V_F)(1 - eps) lambda_1^eps A^{-1-eps} F,
    centered by its F dV-weighted mean.  Returns ``(r_centered, norm)``
    with the L2(dV) norm.
    """
    vals = _as_values(F)
    if np.any(~(vals > 0)):
        raise NonpositiveF("the residual needs F > 0")
    r = _residual_raw(model, _mass_values(mass_field), vals, epsilon)
    w = model.weights
    r = r - float(np.dot(w, vals * r)) / float(np.dot(w, vals))
    return r, math.sqrt(float(np.dot(w, r * r)))


def first_variation(model: SpectralModel, mass_field, F, H, epsilon: float = 0.0) -> float:
    """d/dt mu^(eps)(F + tH) at t = 0 for mean-zero H: <residual integrand, H>_{dV}."""
    vals = _as_values(F)
    r = _residual_raw(model, _mass_values(mass_field), vals, epsilon)
    return float(np.dot(model.weights, r * np.asarray(H, dtype=float).ravel()))


@dataclass(frozen=True)
class ConcentrationIndex:
    delta: float
    best_mass_fraction: float
    argmax_point: np.ndarray


def concentration_index(model: SpectralModel, F, delta: float) -> ConcentrationIndex:
    """Largest fraction of V_F in a geodesic ball of radius delta centred at a grid point."""
    if not delta > 0:
        raise ConfigError("delta must be positive")
    vals = _as_values(F)
    VF = float(np.dot(model.weights, vals))
    masses = ball_masses(model, vals, delta)
    k = int(np.argmax(masses))
    frac = min(1.0, max(0.0, float(masses[k]) / VF))
    return ConcentrationIndex(float(delta), frac, model.grid.points[k].copy())


@dataclass(frozen=True)
class MinimizerState:
    u: np.ndarray
    F: np.ndarray
    epsilon: float
    steps: int
    report: FunctionalReport
    residual_norm: float
    mass_std: float
    concentration: tuple
    converged: bool
    budget_exhausted: bool
    regime: str
    history: tuple = field(repr=False)


def _normalize_u(model, u):
    w = model.weights
    top = float(u.max())
    return u - top + math.log(model.volume / float(np.dot(w, np.exp(u - top))))


def _concentration_all(model, F):
    diam = diameter(model.surface)
    return tuple(concentration_index(model, F, c * diam) for c in CONCENTRATION_FRACTIONS)


def minimize(model: SpectralModel, mass_field, F0=None, schedule=DEFAULT_SCHEDULE, tol: float = 1e-6,
             budget: int = 500, band: int | None = None, log=None) -> MinimizerState:
    """Minimize mu^(eps) over V_F = V along a decreasing eps schedule.

    Each step moves u = log F by -eta (gamma_n/2) r with r the centered
    residual, projects u to modes of index <= ``band`` (default half the
    truncation), rescales to V_F = V and accepts by Armijo backtracking on
    mu^(eps).  A stage ends when the residual norm drops below ``tol``; the
    next stage starts from its result.  ``budget`` caps the total number of
    steps.  ``log`` (a callable) receives one dict per step.
    """
    sched = [float(e) for e in schedule]
    if not sched or any(b > a for a, b in zip(sched, sched[1:])) or sched[-1] < 0:
        raise ConfigError("epsilon schedule must be nonempty, decreasing and end at a value >= 0")
    m = _mass_values(mass_field)
    gamma = model.surface.constants.gamma_n
    w = model.weights
    band = model.truncation // 2 if band is None else band
    F0 = np.ones(w.size) if F0 is None else _as_values(F0)
    if np.any(~(F0 > 0)):
        raise NonpositiveF("starting factor must be positive")
    u = _normalize_u(model, model.lowpass(np.log(F0), band))
    history = []
    steps = 0
    exhausted = False
    conc = _concentration_all(model, np.exp(u))
    eta = 1.0
    for eps in sched:
        F = np.exp(u)
        val = mu_eps(model, m, F, eps).mu
        r, rn = el_residual(model, m, F, eps)
        while rn >= tol:
            if steps >= budget:
                exhausted = True
                break
            direction = -(gamma / 2.0) * r
            slope = float(np.dot(w, F * r * direction))    # < 0
            eta = min(1.0, 2.0 * eta)
            while True:
                trial = _normalize_u(model, model.lowpass(u + eta * direction, band))
                Ft = np.exp(trial)
                vt = mu_eps(model, m, Ft, eps).mu
                if vt <= val + 1e-4 * eta * slope or (vt <= val and eta < 1e-3):
                    break
                eta *= 0.5
                if eta < 1e-12:
                    raise LineSearchFailed(f"no decrease found at step {steps} (eps = {eps})")
            u, F, val = trial, Ft, vt
            r, rn = el_residual(model, m, F, eps)
            steps += 1
            entry = {"step": steps, "epsilon": eps, "mu": val, "residual_norm": rn,
                     "mass_std": float(np.std(mass_transform(m, model, F).values)),
                     "concentration": [c.best_mass_fraction for c in conc]}
            history.append(entry)
            if log is not None:
                log(entry)
        conc = _concentration_all(model, F)
        if exhausted:
            break
    F = np.exp(u)
    eps = sched[-1] if not exhausted else eps
    _, rn = el_residual(model, m, F, eps)
    report = mu_eps(model, m, F, eps)
    mstd = float(np.std(mass_transform(m, model, F).values))
    diam = diameter(model.surface)
    # a uniform density already fills half of a half-diameter ball; require a clear excess
    concentrated = any(c.best_mass_fraction > 1.0 - c.delta / diam + 1e-3 for c in conc)
    regime = "sphere-limit" if concentrated else "interior"
    return MinimizerState(u, F, eps, steps, report, rn, mstd, conc,
                          bool(rn < tol and not exhausted), exhausted, regime, tuple(history))


# ---------------------------------------------------------------------------
# conformal dilations of S^2
# ---------------------------------------------------------------------------

def _check_sphere2(model):
    if model.surface.kind != "sphere" or model.surface.n != 2:
        raise ConfigError("conformal dilations are implemented on S^2")


def mobius_jacobian(model: SpectralModel, tau: float, center=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Jacobian of the dilation of S^2 by ``tau`` about ``center``.

    Stereographic projection from the antipode of ``center`` sends a point
    at angle theta from the centre to radius tan(theta/2); the dilation
    multiplies that radius by ``tau``.  With t = <x, center>,

        F(x) = 4 tau^2 / ((1 + tau^2) + (1 - tau^2) t)^2,

    which integrates to the volume exactly and peaks at ``center`` when tau > 1.
    """
    _check_sphere2(model)
    if not tau > 0:
        raise ConfigError("tau must be positive")
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    t = model.grid.points @ c
    return 4.0 * tau ** 2 / ((1.0 + tau ** 2) + (1.0 - tau ** 2) * t) ** 2


def mobius_map(points, tau: float, center=(0.0, 0.0, 1.0)) -> np.ndarray:
    """The dilation itself, acting on unit vectors; its Jacobian is :func:`mobius_jacobian`."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    x = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.clip(x @ c, -1.0, 1.0)
    perp = x - t[:, None] * c
    s = np.linalg.norm(perp, axis=1)
    e = np.divide(perp, s[:, None], out=np.zeros_like(perp), where=s[:, None] > 0)
    theta = np.arctan2(s, t)
    theta2 = 2.0 * np.arctan(tau * np.tan(theta / 2.0))
    out = np.cos(theta2)[:, None] * c + np.sin(theta2)[:, None] * e
    return out.reshape(np.shape(points))


# ---------------------------------------------------------------------------
# verification of the sharp inequality and its dual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SharpHLSReport:
    trace: float
    gaps: np.ndarray
    min_gap: float
    mobius_taus: tuple
    mobius_gaps: tuple
    passed: bool


def verify_sharp_hls(model: SpectralModel, mass_field, ensemble, taus=(1.5, 2.0, 3.0),
                     tol: float = 1e-6, equality_tol: float = 1e-4) -> SharpHLSReport:
    """mu(S^2, g, F) >= Robin trace of the round sphere for every member (rescaled to V_F = V).

    Conformal dilations with parameters ``taus`` must attain equality to
    ``equality_tol``.  Violations raise :class:`InequalityViolated` carrying
    the offending F.
    """
    _check_sphere2(model)
    V = model.volume
    tr = trace_robin(model, mass_field if isinstance(mass_field, RobinMassField) else None)
    gaps = []
    for F in ensemble:
        cf = ConformalFactor(_as_values(F), model.weights).normalized(V)
        g = functional(model, mass_field, cf.values).mu - tr
        gaps.append(g)
        if g < -tol:
            raise InequalityViolated(f"mu below the sphere trace by {-g:.3e}", witness=cf.values)
    mob = []
    for tau in taus:
        F = mobius_jacobian(model, tau)
        g = functional(model, mass_field, F).mu - tr
        mob.append(g)
        if abs(g) > equality_tol:
            raise InequalityViolated(f"dilation tau={tau} misses equality by {g:.3e}", witness=F)
    gaps = np.array(gaps)
    return SharpHLSReport(tr, gaps, float(gaps.min()) if gaps.size else 0.0, tuple(taus), tuple(mob), True)


@dataclass(frozen=True)
class DualityReport:
    gaps: np.ndarray
    min_gap: float
    jensen_defect: float
    pairing_defect: float
    mobius_gaps: tuple
    passed: bool


def _onofri_sides(model, u):
    """(V / 2 gamma) int u A u dsigma and log int e^u dsigma - int u dsigma, dsigma = dV / V."""
    V = model.volume
    gamma = model.surface.constants.gamma_n
    w = model.weights / V
    lhs = model.quadratic_form(u, None, 1.0) / (2.0 * gamma)
    top = float(u.max())
    rhs = top + math.log(float(np.dot(w, np.exp(u - top)))) - float(np.dot(w, u))
    return lhs, rhs


def verify_duality(model: SpectralModel, ensemble, taus=(1.5, 2.0, 3.0), tol: float = 1e-6,
                   equality_tol: float = 1e-4, identity_tol: float = 1e-10) -> DualityReport:
    """Dual (Onofri-type) inequality and the two steps linking it to log-HLS.

    For each u: (V/2gamma) int uAu dsigma >= log int e^u dsigma - int u dsigma;
    at F = e^u / int e^u dsigma the Jensen step int (u - log F) F dsigma =
    log int e^u dsigma holds with equality; and with beta = gamma/V,
    F = 1 + Au/beta attains equality in
    int F (u - sigma_u) dsigma <= (beta/2) int F A^{-1}F dsigma + (1/2beta) int uAu dsigma.
    """
    V = model.volume
    gamma = model.surface.constants.gamma_n
    beta = gamma / V
    w = model.weights / V
    gaps, jensen, pairing = [], 0.0, 0.0
    for u in ensemble:
        u = np.asarray(u, dtype=float).ravel()
        lhs, rhs = _onofri_sides(model, u)
        gaps.append(lhs - rhs)
        if lhs - rhs < -tol:
            raise InequalityViolated(f"dual inequality fails by {rhs - lhs:.3e}", witness=u)
        top = float(u.max())
        Z = float(np.dot(w, np.exp(u - top)))
        F = np.exp(u - top) / Z
        j = abs(float(np.dot(w, (u - np.log(F)) * F)) - (top + math.log(Z)))
        jensen = max(jensen, j / (1.0 + abs(top + math.log(Z))))
        Fp = 1.0 + model.apply_power(u, 1.0) / beta
        sig = float(np.dot(w, u))
        left = float(np.dot(w, Fp * (u - sig)))
        right = (beta / 2.0) * model.quadratic_form(Fp, None) / V + model.quadratic_form(u, None, 1.0) / (2.0 * beta * V)
        pairing = max(pairing, abs(left - right) / (1.0 + abs(left)))
    if jensen > identity_tol:
        raise InequalityViolated(f"Jensen identity off by {jensen:.3e}")
    if pairing > identity_tol:
        raise InequalityViolated(f"pairing equality off by {pairing:.3e}")
    mob = []
    if model.surface.kind == "sphere" and model.surface.n == 2:
        for tau in taus:
            u = np.log(mobius_jacobian(model, tau))
            lhs, rhs = _onofri_sides(model, u)
            mob.append(lhs - rhs)
            if abs(lhs - rhs) > equality_tol:
                raise InequalityViolated(f"dilation tau={tau} misses equality by {lhs - rhs:.3e}", witness=u)
    gaps = np.array(gaps)
    return DualityReport(gaps, float(gaps.min()) if gaps.size else 0.0, jensen, pairing, tuple(mob), True)


# ---------------------------------------------------------------------------
# concentrating bubbles
# ---------------------------------------------------------------------------

def truncated_bubble(model: SpectralModel, center, support: float, kappa: float = 4.0) -> np.ndarray:
    """Round-sphere bubble (delta^2 + d^2)^{-2} with delta = support / kappa, cut at d = support.

    Normalized to V_F = V.  In the plane the untruncated bubble is an exact
    minimizer of the planar functional at every scale.
    """
    delta = support / kappa
    d = geodesic_distance(model.surface, model.grid.points, np.asarray(center, dtype=float))
    F = np.where(d < support, 1.0 / (delta ** 2 + d ** 2) ** 2, 0.0)
    VF = float(np.dot(model.weights, F))
    if VF <= 0:
        raise ConfigError("bubble support is not resolved by the grid")
    return F * (model.volume / VF)


@dataclass(frozen=True)
class SweepReport:
    supports: tuple
    mu_values: tuple
    sphere_value: float
    relative_excess: tuple
    concentration: tuple


def delta_sweep(model: SpectralModel, mass_field, supports, kappa: float = 4.0, center=None) -> SweepReport:
    """mu of bubbles of shrinking support against the round-sphere trace of the same volume."""
    V = model.volume
    sph = trace_robin(sphere_model(2, V, 1, resolution=1))
    if center is None:
        center = model.grid.points[0]
    mus, exc, conc = [], [], []
    for s in supports:
        F = truncated_bubble(model, center, s, kappa)
        val = functional(model, mass_field, F).mu
        mus.append(val)
        exc.append((val - sph) / abs(sph))
        conc.append(concentration_index(model, F, s).best_mass_fraction)
    return SweepReport(tuple(supports), tuple(mus), sph, tuple(exc), tuple(conc))
