"""Conformal calculus on a model surface and the planar log-HLS functional.

For a conformal factor F >= 0 on (M, g) with Robin mass m and Green's
operator A^{-1},

    mu(M, g, F) = int m F dV + (2/gamma_n) int F log F dV - (1/V_F) int F A^{-1} F dV

is the Robin trace of the metric F^{2/n} g.  This module evaluates mu, the
mass transformation law, and empirical probes of the inequalities around it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConcentratedInput, ConfigError, NonpositiveF, ZeroMass
from .geometry import geodesic_distance, torus_min_image
from .green_mass import RobinMassField
from .spectral import SpectralModel

__all__ = [
    "ConformalFactor",
    "FunctionalReport",
    "ConformalModel",
    "functional",
    "mu",
    "mass_transform",
    "trace_conformal",
    "mu_flat",
    "polarized_form_check",
    "weak_hls_probe",
    "nonconcentration_probe",
    "green_sup_probe",
    "ball_masses",
    "random_log_normal",
    "random_band_limited",
    "bump",
    "write_factor_csv",
    "read_factor_csv",
]

# mean of log|x - y| for x, y independent and uniform in the unit square
UNIT_SQUARE_LOG_MEAN = -25.0 / 12.0 + math.pi / 3.0 + math.log(2.0) / 3.0

_LOG_FLOOR = 1e-300


def _xlogx(F: np.ndarray) -> np.ndarray:
    out = np.zeros_like(F)
    pos = F > 0
    out[pos] = F[pos] * np.log(F[pos])
    return out


def _mass_values(mass_field) -> np.ndarray:
    if isinstance(mass_field, RobinMassField):
        return mass_field.values
    return np.asarray(mass_field, dtype=float)


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Nonnegative density sampled on a quadrature grid."""

    values: np.ndarray
    weights: np.ndarray
    volume_F: float = field(init=False)
    entropy: float = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.shape != np.asarray(self.weights).shape:
            raise ConfigError("conformal factor and grid sizes differ")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise NonpositiveF("conformal factor must be finite and nonnegative")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "volume_F", float(np.dot(self.weights, vals)))
        object.__setattr__(self, "entropy", float(np.dot(self.weights, _xlogx(vals))))

    @classmethod
    def on(cls, model: SpectralModel, values) -> "ConformalFactor":
        return cls(np.asarray(values, dtype=float), model.weights)

    def normalized(self, volume: float) -> "ConformalFactor":
        if self.volume_F <= 0:
            raise ZeroMass("V_F = 0")
        return ConformalFactor(self.values * (volume / self.volume_F), self.weights)


@dataclass(frozen=True)
class FunctionalReport:
    mu: float
    term_mass: float
    term_entropy: float
    term_quadratic: float
    epsilon: float
    volume_F: float


def _as_values(F) -> np.ndarray:
    if isinstance(F, ConformalFactor):
        return F.values
    return np.asarray(F, dtype=float).ravel()


def functional(model: SpectralModel, mass_field, F, epsilon: float = 0.0) -> FunctionalReport:
    """mu^(eps): the quadratic term uses (1 - eps) lambda_1^eps A^{-1-eps}; eps = 0 gives mu."""
    vals = _as_values(F)
    w = model.weights
    VF = float(np.dot(w, vals))
    if not VF > 0:
        raise ZeroMass("V_F = 0")
    gamma = model.surface.constants.gamma_n
    t_mass = float(np.dot(w, _mass_values(mass_field) * vals))
    t_ent = (2.0 / gamma) * float(np.dot(w, _xlogx(vals)))
    factor = (1.0 - epsilon) * model.lambda1 ** epsilon
    t_quad = -factor * model.quadratic_form(vals, None, -1.0 - epsilon) / VF
    return FunctionalReport(t_mass + t_ent + t_quad, t_mass, t_ent, t_quad, float(epsilon), VF)


def mu(model: SpectralModel, mass_field, F) -> FunctionalReport:
    """The log-HLS functional mu(M, g, F)."""
    return functional(model, mass_field, F, 0.0)


class ConformalModel:
    """The operator and measure of the metric F^{2/n} g, expressed on the base grid.

    A for the new metric is F^{-1} A_g, its volume element is F dV, and its
    inverse acts on F dV-mean-zero data.  Only the pieces the mass law needs
    are provided, so conformal changes can be chained.
    """

    def __init__(self, base, F):
        self.base = base
        self.F = _as_values(F)
        if np.any(self.F <= 0):
            raise NonpositiveF("conformal factor must be positive")
        self.surface = base.surface
        self.weights = base.weights * self.F
        self.volume = float(self.weights.sum())

    def apply_inverse_power(self, H, s: float = 1.0):
        if s != 1.0:
            raise NotImplementedError("only A^{-1} is available after a conformal change")
        H = np.asarray(H, dtype=float).ravel()
        hbar = float(np.dot(self.weights, H)) / self.volume
        u = self.base.apply_inverse_power(self.F * (H - hbar), 1.0)
        return u - float(np.dot(self.weights, u)) / self.volume

    def quadratic_form(self, F, H=None, s: float = -1.0):
        H = F if H is None else H
        return float(np.dot(self.weights, np.asarray(F).ravel() * self.apply_inverse_power(H, -s)))


def mass_transform(mass_field, model, F) -> RobinMassField:
    """Robin mass of F^{2/n} g:  m + (2/gamma_n) log F - (2/V_F) A^{-1}F + <F, A^{-1}F> / V_F^2.

    Zeros of F are floored at 1e-300 inside the logarithm; negative or
    non-finite values raise :class:`NonpositiveF`.
    """
    vals = _as_values(F)
    if np.any(~np.isfinite(vals)) or np.any(vals < 0):
        raise NonpositiveF("conformal factor must be positive")
    w = model.weights
    VF = float(np.dot(w, vals))
    if not VF > 0:
        raise ZeroMass("V_F = 0")
    gamma = model.surface.constants.gamma_n
    AF = model.apply_inverse_power(vals, 1.0)
    quad = float(np.dot(w, vals * AF))
    out = (_mass_values(mass_field) + (2.0 / gamma) * np.log(np.maximum(vals, _LOG_FLOOR))
           - (2.0 / VF) * AF + quad / VF ** 2)
    return RobinMassField(out, float(np.std(out)))


def trace_conformal(model: SpectralModel, mass_field, F, rtol: float = 1e-8):
    """Robin trace of F^{2/n} g as int m_F F dV, checked against mu(M, g, F).

    Returns ``(trace, mu_value)``; raises ``AssertionError`` if the two
    routes differ by more than ``rtol * (1 + |mu|)``.
    """
    vals = _as_values(F)
    mF = mass_transform(mass_field, model, vals)
    lhs = float(np.dot(model.weights * vals, mF.values))
    rhs = mu(model, mass_field, vals).mu
    if abs(lhs - rhs) > rtol * (1.0 + abs(rhs)):
        raise AssertionError(f"conformal trace identity off by {abs(lhs - rhs):.3e}")
    return lhs, rhs


# ---------------------------------------------------------------------------
# the functional on R^2
# ---------------------------------------------------------------------------

def mu_flat(f, h: float, n: int = 2) -> float:
    """mu(R^2, f) = (2/gamma_2) (int f log f + (2/V_f) iint f(x) log|x - y| f(y))
    for a piecewise-constant density on a square grid of spacing ``h``.

    Off-diagonal cell pairs use the centre-to-centre logarithm; the diagonal
    uses the exact mean of log|x - y| over a square cell, log h + const.
    """
    if n != 2:
        raise ConfigError("mu_flat is implemented for planar densities (n = 2)")
    f = np.asarray(f, dtype=float)
    if f.ndim != 2:
        raise ConfigError("f must be a 2D array")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise NonpositiveF("density must be finite and nonnegative")
    cell = h * h
    Vf = cell * float(f.sum())
    if not Vf > 0:
        raise ZeroMass("V_f = 0")
    ent = cell * float(_xlogx(f).sum())
    idx = np.argwhere(f > 0)
    a = f[f > 0] * cell
    xy = idx.astype(float) * h
    pair = kernels.log_pair_sum(xy, a)
    diag = float(np.sum(a * a)) * (math.log(h) + UNIT_SQUARE_LOG_MEAN)
    gamma2 = 8.0 * math.pi
    return (2.0 / gamma2) * (ent + (n / Vf) * (pair + diag))


# ---------------------------------------------------------------------------
# inequality probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarizedReport:
    cauchy_schwarz_defect: float
    form_b: float
    form_a_Q: float
    form_a_R: float
    chain_holds: bool


def polarized_form_check(model: SpectralModel, Q, R) -> PolarizedReport:
    """Cauchy-Schwarz defect of the Green pairing and the (a) -> (b) chain.

    form_a_X = (1/V) <X, A^{-1}X> - (2/gamma_n) int X log X and
    form_b = (1/V) <Q, A^{-1}R> - (1/gamma_n)(int Q log Q + int R log R);
    the chain is form_b <= (form_a_Q + form_a_R) / 2.
    """
    q = _as_values(Q)
    r = _as_values(R)
    V = model.volume
    gamma = model.surface.constants.gamma_n
    w = model.weights
    qq = model.quadratic_form(q, None)
    rr = model.quadratic_form(r, None)
    qr = model.quadratic_form(q, r)
    defect = qr - math.sqrt(max(qq, 0.0) * max(rr, 0.0))
    eq = float(np.dot(w, _xlogx(q)))
    er = float(np.dot(w, _xlogx(r)))
    fa_q = qq / V - (2.0 / gamma) * eq
    fa_r = rr / V - (2.0 / gamma) * er
    fb = qr / V - (eq + er) / gamma
    return PolarizedReport(defect, fb, fa_q, fa_r, bool(fb <= 0.5 * (fa_q + fa_r) + 1e-12))


@dataclass(frozen=True)
class ProbeReport:
    values: np.ndarray
    minimum: float
    argmin: int


def _weak_lhs(model, vals, scale_entropy=1.0):
    gamma = model.surface.constants.gamma_n
    VF = float(np.dot(model.weights, vals))
    return (scale_entropy * (2.0 / gamma) * float(np.dot(model.weights, _xlogx(vals)))
            - model.quadratic_form(vals, None) / VF)


def weak_hls_probe(model: SpectralModel, ensemble) -> ProbeReport:
    """(2/gamma_n) int F log F - (1/V) <F, A^{-1}F> over an ensemble normalized to V_F = V.

    Members are rescaled to V_F = V first.  The minimum is reported; no
    bound is asserted.
    """
    V = model.volume
    vals = []
    for F in ensemble:
        cf = ConformalFactor(_as_values(F), model.weights).normalized(V)
        vals.append(_weak_lhs(model, cf.values))
    vals = np.array(vals)
    k = int(np.argmin(vals))
    return ProbeReport(vals, float(vals[k]), k)


@dataclass(frozen=True)
class NonconcentrationReport:
    value: float
    max_ball_fraction: float
    delta: float


def nonconcentration_probe(model: SpectralModel, F, delta: float) -> NonconcentrationReport:
    """(1 - delta)(2/gamma_n) int F log F - (1/V_F) <F, A^{-1}F> for non-concentrating F.

    Requires max_p int_{B(p, delta)} F dV <= (1 - delta) V_F, otherwise
    :class:`ConcentratedInput`.
    """
    vals = _as_values(F)
    VF = float(np.dot(model.weights, vals))
    if not VF > 0:
        raise ZeroMass("V_F = 0")
    frac = float(ball_masses(model, vals, delta).max()) / VF
    if frac > 1.0 - delta:
        raise ConcentratedInput(f"a ball of radius {delta} carries {frac:.4f} of the mass")
    return NonconcentrationReport(_weak_lhs(model, vals, 1.0 - delta), frac, float(delta))


def green_sup_probe(model: SpectralModel, ensemble, epsilon: float) -> ProbeReport:
    """max |A^{-1}F| - (1 + eps)(2/gamma_n) int F log F for each member; the maximum is of interest.

    ``minimum`` / ``argmin`` refer to the negated values so that the
    report shape matches the other probes: ``-minimum`` is the empirical sup.
    """
    gamma = model.surface.constants.gamma_n
    out = []
    for F in ensemble:
        vals = _as_values(F)
        sup = float(np.max(np.abs(model.apply_inverse_power(vals, 1.0))))
        ent = float(np.dot(model.weights, _xlogx(vals)))
        out.append(-(sup - (1.0 + epsilon) * (2.0 / gamma) * ent))
    out = np.array(out)
    k = int(np.argmin(out))
    return ProbeReport(out, float(out[k]), k)


# ---------------------------------------------------------------------------
# ball masses and field generators
# ---------------------------------------------------------------------------

def ball_masses(model: SpectralModel, F, radius: float) -> np.ndarray:
    """int_{B(p, radius)} F dV for every grid point p (open geodesic balls)."""
    vals = _as_values(F)
    grid = model.grid
    mass = grid.weights * vals
    surface = model.surface
    if surface.kind == "sphere":
        ang = radius / surface.radius
        if ang >= math.pi:
            return np.full(vals.size, mass.sum())
        return kernels.sphere_ball_masses(grid.points, mass, math.cos(ang))
    N = grid.resolution
    disp = torus_min_image(surface.basis_array, grid.points)
    ind = (np.sqrt((disp ** 2).sum(-1)) < radius).astype(float).reshape(N, N)
    M = mass.reshape(N, N)
    conv = np.fft.ifft2(np.fft.fft2(M) * np.conj(np.fft.fft2(ind))).real
    # the indicator is symmetric under x -> -x, so correlation equals convolution
    return np.clip(conv, 0.0, mass.sum()).ravel()


def random_log_normal(model: SpectralModel, rng: np.random.Generator, amplitude: float = 0.5,
                      band: int = 8, decay: float = 1.0) -> np.ndarray:
    """exp(u) for a random band-limited field u, normalized to V_F = V.

    u has independent Gaussian coefficients with standard deviation
    proportional to (1 + lambda/lambda_1)^(-decay/2) on modes up to ``band``
    and is scaled to have L2(dV/V) norm ``amplitude``.
    """
    u = random_band_limited(model, rng, band, decay)
    rms = math.sqrt(model.inner(u, u) / model.volume)
    u = u * (amplitude / rms if rms > 0 else 0.0)
    F = np.exp(u - u.max())
    return F * (model.volume / float(np.dot(model.weights, F)))


def random_band_limited(model: SpectralModel, rng: np.random.Generator, band: int = 8,
                        decay: float = 1.0) -> np.ndarray:
    """Mean-zero random field with Gaussian coefficients on modes of index <= band."""
    shape = model.multiplier(lambda lam: lam).shape
    lam1 = model.lambda1
    std = model.multiplier(lambda lam: (1.0 + lam / lam1) ** (-decay / 2.0))
    if np.iscomplexobj(model.analysis(np.zeros(model.grid.size))):
        coef = std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    else:
        coef = std * rng.standard_normal(shape)
    u = model.synthesis(coef)
    return model.lowpass(u, band) - model.mean(model.lowpass(u, band))


def bump(model: SpectralModel, center, width: float) -> np.ndarray:
    """Gaussian bump exp(-d^2 / (2 width^2)) around ``center``, normalized to V_F = V."""
    d = geodesic_distance(model.surface, model.grid.points, np.asarray(center, dtype=float))
    F = np.exp(-0.5 * (d / width) ** 2)
    return F * (model.volume / float(np.dot(model.weights, F)))


def write_factor_csv(path, F) -> None:
    vals = _as_values(F)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "F"])
        for i, v in enumerate(vals):
            w.writerow([i, repr(float(v))])


def read_factor_csv(path, model: SpectralModel) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    vals = np.zeros(model.grid.size)
    if len(rows) != vals.size:
        raise ConfigError(f"{path}: expected {vals.size} rows, found {len(rows)}")
    for row in rows:
        vals[int(row["index"])] = float(row["F"])
    return vals
