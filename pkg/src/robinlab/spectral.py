"""Truncated eigenbases of operators of type Laplacian^{n/2}.

A model stores its eigenvalues in the layout of its coefficient arrays, so
fractional powers, inverses and quadratic forms are exact modewise products.

* Sphere S^2: real spherical harmonics, coefficients ``c[cs, m, l]`` with
  ``cs = 0`` for cosine and ``cs = 1`` for sine in longitude.  Transforms are a
  longitude rFFT followed by a Gauss-Legendre sum against a Legendre table.
* Flat torus: plane waves in lattice coordinates, coefficients from a 2D FFT
  (complex internally, real sine/cosine modes exposed by :meth:`modes`).
* Sphere S^n, n >= 4: spectrum only (eigenvalues and multiplicities).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (ConfigError, ExtrapolationUnstable, SBelowOne,
                     TruncationTooLargeForGrid, UnsupportedDimension)
from .geometry import (QuadratureGrid, SurfaceSpec, build_sphere_grid,
                       build_torus_grid, sphere_volume)

__all__ = [
    "gjms_eigenvalue",
    "harmonic_dimension",
    "SpectralModel",
    "SphereModel",
    "TorusModel",
    "sphere_model",
    "torus_model",
    "model_for",
    "apply_inverse_power",
    "apply_power",
    "ZetaSample",
    "ZetaResult",
    "zeta_partial",
    "zeta_sample",
    "zeta_finite_part",
    "zeta_residue",
    "dump_spectrum_csv",
]

DEFAULT_SPHERE_TRUNCATION = 64
DEFAULT_TORUS_TRUNCATION = 48


def gjms_eigenvalue(n: int, k: int) -> float:
    """k (k+1) ... (k+n-1), the eigenvalue on degree-k harmonics of S^n."""
    if n < 2 or n % 2:
        raise UnsupportedDimension(f"n must be even and >= 2, got {n}")
    out = 1
    for j in range(n):
        out *= k + j
    return float(out)


def harmonic_dimension(n: int, k: int) -> int:
    """Dimension of the space of degree-k spherical harmonics on S^n."""
    if k == 0:
        return 1
    return math.comb(n + k, n) - math.comb(n + k - 2, n)


class SpectralModel:
    """Common interface; subclasses fill in the transforms.

    Eigenfunctions are orthonormal against the volume-``surface.volume``
    measure, i.e. against ``grid.weights``.  The zero mode is excluded from
    every operator but kept by :meth:`analysis` / :meth:`synthesis`.
    """

    surface: SurfaceSpec
    truncation: int
    grid: QuadratureGrid | None
    _lam: np.ndarray     # eigenvalue per coefficient slot
    _mask: np.ndarray    # retained nonzero modes

    # -- transforms (subclass) ------------------------------------------
    def analysis(self, f) -> np.ndarray:
        raise NotImplementedError

    def synthesis(self, c) -> np.ndarray:
        raise NotImplementedError

    def _pair(self, a, b) -> float:
        """Sum over retained modes of a * b (coefficient layout)."""
        raise NotImplementedError

    def levels(self, cutoff: float | None = None):
        """Distinct eigenvalues <= cutoff with multiplicities (sorted)."""
        raise NotImplementedError

    def _require_grid(self):
        if self.grid is None:
            raise UnsupportedDimension("this model carries a spectrum only, no grid")

    # -- derived operations ----------------------------------------------
    @property
    def volume(self) -> float:
        return self.surface.volume

    @property
    def weights(self) -> np.ndarray:
        self._require_grid()
        return self.grid.weights

    @property
    def lambda1(self) -> float:
        lam, _ = self.levels()
        return float(lam[0])

    def multiplier(self, fn) -> np.ndarray:
        """Array ``fn(lambda)`` on retained modes, zero elsewhere."""
        out = np.zeros(self._lam.shape)
        out[self._mask] = fn(self._lam[self._mask])
        return out

    def apply_multiplier(self, f, mult) -> np.ndarray:
        return self.synthesis(mult * self.analysis(f))

    def apply_inverse_power(self, F, s: float = 1.0) -> np.ndarray:
        return self.apply_multiplier(F, self.multiplier(lambda lam: lam ** (-s)))

    def apply_power(self, F, s: float = 1.0) -> np.ndarray:
        return self.apply_multiplier(F, self.multiplier(lambda lam: lam ** s))

    def quadratic_form(self, F, H=None, s: float = -1.0) -> float:
        """``<F, A^s H>`` against dV, evaluated by Parseval on the truncated basis."""
        a = self.analysis(F)
        b = a if H is None else self.analysis(H)
        return self._pair(a * self.multiplier(lambda lam: lam ** s), b)

    def lowpass(self, f, cutoff: int) -> np.ndarray:
        """Project onto modes of degree (sphere) or box index (torus) <= cutoff, constants kept."""
        raise NotImplementedError

    def inner(self, f, g) -> float:
        return float(np.dot(self.weights, np.asarray(f).ravel() * np.asarray(g).ravel()))

    def mean(self, f) -> float:
        return self.inner(f, np.ones(self.weights.size)) / self.volume

    def eigenvalues(self) -> np.ndarray:
        """Retained eigenvalues with multiplicity, nondecreasing."""
        lam, mult = self.levels()
        return np.repeat(lam, mult)


# ---------------------------------------------------------------------------
# sphere
# ---------------------------------------------------------------------------

class SphereModel(SpectralModel):
    def __init__(self, surface: SurfaceSpec, truncation: int, grid: QuadratureGrid | None):
        if surface.kind != "sphere":
            raise ConfigError("SphereModel needs a sphere surface")
        self.surface = surface
        self.truncation = L = int(truncation)
        if L < 1:
            raise ConfigError("truncation must be >= 1")
        self._scale = sphere_volume(surface.n) / surface.volume   # eigenvalue factor
        self.grid = grid
        if grid is None:
            self._lam = np.array([self._scale * gjms_eigenvalue(surface.n, k) for k in range(L + 1)])
            self._mask = np.arange(L + 1) >= 1
            return
        if surface.n != 2:
            raise UnsupportedDimension("gridded sphere models require n = 2")
        if grid.kind != "sphere":
            raise ConfigError("grid does not belong to a sphere")
        if grid.resolution < L:
            raise TruncationTooLargeForGrid(
                f"truncation {L} needs grid resolution >= {L}, got {grid.resolution}")
        if abs(grid.total - surface.volume) > 1e-12 * surface.volume:
            raise ConfigError("grid weights do not sum to the surface volume")
        nodes = grid.nodes
        self._x = nodes["cos_theta"]
        self._wx = nodes["theta_weights"]
        self._nphi = len(nodes["phi"])
        self._ntheta = len(self._x)
        self._P = kernels.legendre_table(self._x, L)          # [m, l, i]
        self._alpha = np.where(np.arange(L + 1) == 0, 1.0, math.sqrt(2.0))
        self._norm = math.sqrt(4.0 * math.pi / surface.volume)  # unit-sphere -> volume-V normalization
        m = np.arange(L + 1)[:, None]
        l = np.arange(L + 1)[None, :]
        deg = np.broadcast_to(l, (L + 1, L + 1)).astype(float)
        lam = self._scale * deg * (deg + 1.0)
        valid = (l >= m) & (l >= 1)
        mask = np.stack([valid, valid & (m >= 1)])
        self._lam = np.stack([lam, lam])
        self._mask = mask
        self._valid0 = np.stack([l >= m, (l >= m) & (m >= 1)])
        self._degree = np.stack([deg, deg])

    # ring-by-ring transforms on the unit sphere, then volume rescale
    def analysis(self, f) -> np.ndarray:
        self._require_grid()
        L = self.truncation
        f = np.asarray(f, dtype=float).reshape(self._ntheta, self._nphi)
        G = np.fft.rfft(f, axis=1)[:, :L + 1] * (2.0 * np.pi / self._nphi)
        wP = self._P * self._wx[None, None, :]
        c = np.empty((2, L + 1, L + 1))
        c[0] = np.einsum("mli,im->ml", wP, G.real)
        c[1] = np.einsum("mli,im->ml", wP, -G.imag)
        c *= self._alpha[None, :, None]
        c *= self._valid0
        return c / self._norm

    def synthesis(self, c) -> np.ndarray:
        self._require_grid()
        L = self.truncation
        c = np.asarray(c, dtype=float) * self._valid0 * self._norm
        gc = np.einsum("ml,mli->im", c[0], self._P) * self._alpha
        gs = np.einsum("ml,mli->im", c[1], self._P) * self._alpha
        X = np.zeros((self._ntheta, self._nphi // 2 + 1), dtype=complex)
        X[:, :L + 1] = 0.5 * self._nphi * (gc - 1j * gs)
        X[:, 0] = self._nphi * gc[:, 0]
        return np.fft.irfft(X, n=self._nphi, axis=1).ravel()

    def _pair(self, a, b) -> float:
        return float(np.sum((a * b)[self._mask]))

    def lowpass(self, f, cutoff: int) -> np.ndarray:
        c = self.analysis(f)
        c[self._degree > cutoff] = 0.0
        return self.synthesis(c)

    def levels(self, cutoff: float | None = None):
        n = self.surface.n
        kmax = self.truncation
        if cutoff is not None:
            kmax = 0
            while self._scale * gjms_eigenvalue(n, kmax + 1) <= cutoff:
                kmax += 1
        k = np.arange(1, kmax + 1)
        lam = np.array([self._scale * gjms_eigenvalue(n, int(j)) for j in k])
        mult = np.array([harmonic_dimension(n, int(j)) for j in k])
        return lam, mult

    def level_after(self, lam_max: float) -> float:
        k = 1
        while self._scale * gjms_eigenvalue(self.surface.n, k) <= lam_max:
            k += 1
        return self._scale * gjms_eigenvalue(self.surface.n, k)

    def modes(self):
        """Materialized real orthonormal modes: ``(eigenvalues, samples)``, samples (modes, points)."""
        self._require_grid()
        idx = np.argwhere(self._mask)
        order = np.lexsort((idx[:, 1], idx[:, 0], self._lam[tuple(idx.T)]))
        idx = idx[order]
        rows = []
        for cs, m, l in idx:
            c = np.zeros(self._lam.shape)
            c[cs, m, l] = 1.0
            rows.append(self.synthesis(c))
        return self._lam[tuple(idx.T)], np.array(rows)


# ---------------------------------------------------------------------------
# flat torus
# ---------------------------------------------------------------------------

class TorusModel(SpectralModel):
    def __init__(self, surface: SurfaceSpec, truncation: int, grid: QuadratureGrid):
        if surface.kind != "torus":
            raise ConfigError("TorusModel needs a torus surface")
        self.surface = surface
        self.truncation = L = int(truncation)
        if L < 1:
            raise ConfigError("truncation must be >= 1")
        if grid is None or grid.kind != "torus":
            raise ConfigError("torus model needs a torus grid")
        N = grid.resolution
        if N < 2 * L + 1:
            raise TruncationTooLargeForGrid(f"truncation {L} needs at least {2 * L + 1} points per side, got {N}")
        if not np.allclose(grid.nodes["basis"], surface.basis_array, rtol=0, atol=1e-14):
            raise ConfigError("grid basis differs from the surface basis")
        self.grid = grid
        self._N = N
        self._basis = surface.basis_array
        self._dual = np.linalg.inv(self._basis).T            # columns: dual generators
        k = np.fft.fftfreq(N, 1.0 / N).round().astype(int)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        self._k = np.stack([k1, k2], axis=-1)
        kstar = self._k @ self._dual.T
        self._lam = 4.0 * np.pi ** 2 * (kstar ** 2).sum(-1)
        self._box = np.maximum(np.abs(k1), np.abs(k2))
        self._mask = (self._box <= L) & (self._box > 0)

    def analysis(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float).reshape(self._N, self._N)
        return np.fft.fft2(f) / (self._N * self._N)

    def synthesis(self, c) -> np.ndarray:
        return np.fft.ifft2(np.asarray(c) * (self._N * self._N)).real.ravel()

    def _pair(self, a, b) -> float:
        return float(self.volume * np.sum((np.conj(a) * b)[self._mask]).real)

    def lowpass(self, f, cutoff: int) -> np.ndarray:
        c = self.analysis(f)
        c[self._box > cutoff] = 0.0
        return self.synthesis(c)

    @property
    def inscribed_radius(self) -> float:
        """Radius of the largest dual-space disc inside the retained index box."""
        return self.truncation / float(np.max(np.linalg.norm(self._basis, axis=0)))

    def _dual_norms(self, radius: float) -> np.ndarray:
        r = float(np.max(np.linalg.norm(self._basis, axis=0))) * radius
        K = int(math.ceil(r)) + 1
        i = np.arange(-K, K + 1)
        k1, k2 = np.meshgrid(i, i, indexing="ij")
        ks = np.stack([k1.ravel(), k2.ravel()], -1) @ self._dual.T
        nrm = np.sqrt((ks ** 2).sum(-1))
        return nrm[(nrm > 0) & (nrm <= radius)]

    def levels(self, cutoff: float | None = None):
        if cutoff is None:
            cutoff = 4.0 * np.pi ** 2 * self.inscribed_radius ** 2
        lam = 4.0 * np.pi ** 2 * self._dual_norms(math.sqrt(cutoff) / (2.0 * np.pi)) ** 2
        # merge eigenvalues equal up to roundoff
        lam = np.sort(lam)
        key = np.round(lam / lam[0], 9)
        uniq, first, mult = np.unique(key, return_index=True, return_counts=True)
        return lam[first], mult

    def level_after(self, lam_max: float) -> float:
        lam, _ = self.levels(lam_max * 1.5 + 4.0 * np.pi ** 2 / self.volume)
        return float(lam[lam > lam_max * (1 + 1e-12)][0])

    def modes(self):
        """Materialized real orthonormal modes (cos and sin plane waves), sorted by eigenvalue."""
        pts = self.grid.nodes["frac"]
        half = []
        for k1, k2 in self._k[self._mask]:
            if k1 > 0 or (k1 == 0 and k2 > 0):
                half.append((int(k1), int(k2)))
        half.sort(key=lambda k: (self._lam_of(k), k))
        lam, rows = [], []
        norm = math.sqrt(2.0 / self.volume)
        for k in half:
            ph = 2.0 * np.pi * (pts @ np.array(k, dtype=float))
            for fn in (np.cos, np.sin):
                lam.append(self._lam_of(k))
                rows.append(norm * fn(ph))
        return np.array(lam), np.array(rows)

    def _lam_of(self, k) -> float:
        ks = self._dual @ np.array(k, dtype=float)
        return float(4.0 * np.pi ** 2 * ks @ ks)


# ---------------------------------------------------------------------------
# constructors and module-level operations
# ---------------------------------------------------------------------------

def sphere_model(n: int = 2, volume: float | None = None, truncation: int = DEFAULT_SPHERE_TRUNCATION,
                 grid: QuadratureGrid | None = None, resolution: int | None = None) -> SphereModel:
    """Round sphere of volume ``volume`` (default omega_n) truncated at degree ``truncation``.

    For n = 2 a Gauss-Legendre grid (resolution ``truncation`` unless given)
    is built and scaled to total weight ``volume``.  For n >= 4 only the
    spectrum is available.
    """
    surface = SurfaceSpec.sphere(n, volume)
    if n == 2:
        if grid is None:
            grid = build_sphere_grid(2, truncation if resolution is None else resolution)
            grid = grid.scaled(surface.volume / (4.0 * np.pi))
    elif grid is not None:
        raise UnsupportedDimension("gridded sphere models require n = 2")
    return SphereModel(surface, truncation, grid)


def torus_model(basis, truncation: int = DEFAULT_TORUS_TRUNCATION, grid: QuadratureGrid | None = None,
                resolution: int | None = None) -> TorusModel:
    """Flat torus R^2 / B Z^2 with plane waves of box index <= ``truncation``."""
    surface = SurfaceSpec.torus(basis)
    if grid is None:
        grid = build_torus_grid(surface.basis_array, 2 * truncation + 2 if resolution is None else resolution)
    return TorusModel(surface, truncation, grid)


def model_for(surface: SurfaceSpec, truncation: int | None = None, resolution: int | None = None) -> SpectralModel:
    if surface.kind == "sphere":
        L = DEFAULT_SPHERE_TRUNCATION if truncation is None else truncation
        return sphere_model(surface.n, surface.volume, L, resolution=resolution)
    L = DEFAULT_TORUS_TRUNCATION if truncation is None else truncation
    return torus_model(surface.basis_array, L, resolution=resolution)


def apply_inverse_power(model: SpectralModel, s: float, F) -> np.ndarray:
    """sum_j lambda_j^{-s} phi_j <phi_j, F>_{dV}; zero mean by construction."""
    if s < 1:
        raise SBelowOne(f"s must be >= 1, got {s}")
    return model.apply_inverse_power(np.asarray(F, dtype=float), s)


def apply_power(model: SpectralModel, s: float, F) -> np.ndarray:
    return model.apply_power(np.asarray(F, dtype=float), s)


# ---------------------------------------------------------------------------
# zeta function
# ---------------------------------------------------------------------------

def zeta_residue(surface: SurfaceSpec) -> float:
    """Residue 2V/gamma_n of the spectral zeta function at s = 1."""
    return 2.0 * surface.volume / surface.constants.gamma_n


@dataclass(frozen=True)
class ZetaSample:
    s: np.ndarray
    values: np.ndarray
    residue: float


@dataclass(frozen=True)
class ZetaResult:
    value: float
    error: float
    residue: float
    cutoff: float
    count: int


def _tail_cut(model: SpectralModel, cutoff: float | None):
    """Levels up to the cutoff plus the Weyl matching point Lambda inside the gap."""
    lam, mult = model.levels(cutoff)
    C = zeta_residue(model.surface)
    N = int(mult.sum())
    top = float(lam[-1])
    nxt = model.level_after(top)
    Lam = min(max(N / C, top), nxt * (1 - 1e-12))
    return lam, mult, N, C, Lam


def zeta_partial(model: SpectralModel, s: float, cutoff: float | None = None):
    """Z(s) = sum lambda_j^{-s}: partial sum plus a Weyl-law tail. Returns ``(value, error_bound)``.

    The tail beyond the matching point Lambda is the Stieltjes integral of
    lambda^{-s} against the Weyl counting function C lambda; the error bound is
    the change of the estimate when the cutoff is divided by four.
    """
    if not s > 1:
        raise SBelowOne(f"zeta sums need s > 1, got {s}")

    def est(cut):
        lam, mult, N, C, Lam = _tail_cut(model, cut)
        return float(np.sum(mult * lam ** (-s)) + C * s * Lam ** (1 - s) / (s - 1) - N * Lam ** (-s)), Lam

    value, Lam = est(cutoff)
    coarse, _ = est(Lam / 4.0)
    return value, abs(value - coarse)


def zeta_sample(model: SpectralModel, s_values, cutoff: float | None = None) -> ZetaSample:
    s_values = np.asarray(s_values, dtype=float)
    vals = np.array([zeta_partial(model, s, cutoff)[0] for s in s_values])
    return ZetaSample(s_values, vals, zeta_residue(model.surface))


def _finite_part_at(lam, mult, N, C, Lam, t):
    """Z(1+t) - C/t with the Weyl tail, in a form that is smooth at t = 0."""
    ell = math.log(Lam)
    partial = float(np.sum(mult * lam ** (-1.0 - t)))
    if t == 0.0:
        return partial - N / Lam + C * (1.0 - ell)
    pole = C * ((1.0 + t) * math.expm1(-t * ell) / t + 1.0)
    return partial - N * Lam ** (-1.0 - t) + pole


def _neville(ts, vals):
    """Polynomial extrapolation to t = 0; returns the diagonal of the tableau."""
    p = list(vals)
    diag = [p[0]]
    n = len(ts)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (ts[i + k] * p[i] - ts[i] * p[i + 1]) / (ts[i + k] - ts[i])
        diag.append(p[0])
    return diag


def zeta_finite_part(model: SpectralModel, cutoff: float | None = None, n_points: int = 6,
                     tol: float = 1e-6) -> ZetaResult:
    """Finite part of Z(s) at s = 1 using the exact residue 2V/gamma_n.

    Z(s) - residue/(s-1) is evaluated at s = 1 + 0.1 / 2^k, k < ``n_points``,
    and extrapolated to s = 1 with Neville's scheme.  Successive tableau
    entries must agree to ``tol``; otherwise :class:`ExtrapolationUnstable`.
    The reported error adds the spread of the tableau to the change of the
    result under a four times smaller spectral cutoff.
    """

    def run(cut):
        lam, mult, N, C, Lam = _tail_cut(model, cut)
        ts = [0.1 / 2 ** k for k in range(n_points)]
        vals = [_finite_part_at(lam, mult, N, C, Lam, t) for t in ts]
        diag = _neville(ts, vals)
        spread = abs(diag[-1] - diag[-2])
        if not np.isfinite(diag[-1]) or spread > tol * max(1.0, abs(diag[-1])):
            raise ExtrapolationUnstable(
                f"finite-part extrapolation did not settle: last two estimates differ by {spread:.3e}")
        return diag[-1], spread, Lam, N, C

    value, spread, Lam, N, C = run(cutoff)
    coarse = run(Lam / 4.0)[0]
    err = spread + abs(value - coarse) / 3.0
    return ZetaResult(float(value), float(err), C, float(Lam), N)


def dump_spectrum_csv(model: SpectralModel, path, cutoff: float | None = None) -> None:
    """Write ``index, eigenvalue, multiplicity`` rows for the distinct levels."""
    lam, mult = model.levels(cutoff)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "multiplicity"])
        for i, (a, m) in enumerate(zip(lam, mult), start=1):
            w.writerow([i, repr(float(a)), int(m)])
