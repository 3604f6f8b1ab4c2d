"""Model surfaces, quadrature grids and distances.

Two geometries are supported: the round sphere S^n (gridded only for n = 2)
and flat tori R^2 / (B Z^2).  A round sphere of volume V is always the unit
sphere carrying the constant conformal factor V / omega_n; points stay unit
vectors and only weights and distances are rescaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SingularLattice, UnsupportedDimension

__all__ = [
    "Constants",
    "constants",
    "SurfaceSpec",
    "QuadratureGrid",
    "build_sphere_grid",
    "build_torus_grid",
    "lagrange_reduce",
    "geodesic_distance",
    "chordal_distance",
    "diameter",
    "surface_from_mapping",
    "surface_to_mapping",
]


@dataclass(frozen=True)
class Constants:
    n: int
    omega_n: float
    gamma_n: float

    @property
    def singular_coefficient(self) -> float:
        """Coefficient 2n/gamma_n of -log(distance) in the Green's function."""
        return 2.0 * self.n / self.gamma_n


def sphere_volume(n: int) -> float:
    """Volume of the unit n-sphere in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def constants(n: int) -> Constants:
    omega = sphere_volume(n)
    return Constants(n=n, omega_n=omega, gamma_n=math.factorial(n) * omega)


def lagrange_reduce(basis) -> np.ndarray:
    """Lagrange-Gauss reduction of a 2D lattice basis (columns are generators).

    Returns a basis of the same lattice with |b1| <= |b2| and
    |<b1, b2>| <= |b1|^2 / 2, with positive orientation.
    """
    b = np.array(basis, dtype=float)
    if b.shape != (2, 2):
        raise ConfigError("basis must be a 2x2 matrix")
    if abs(np.linalg.det(b)) < 1e-14 * max(1.0, np.abs(b).max() ** 2):
        raise SingularLattice("lattice basis is singular")
    u, v = b[:, 0].copy(), b[:, 1].copy()
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(200):
        mu = round((u @ v) / (u @ u))
        v = v - mu * u
        if v @ v >= u @ u:
            break
        u, v = v, u
    out = np.column_stack([u, v])
    if np.linalg.det(out) < 0:
        out[:, 1] = -out[:, 1]
    return out


@dataclass(frozen=True)
class SurfaceSpec:
    """A model closed surface.

    ``kind`` is ``"sphere"`` (with even dimension ``n``) or ``"torus"``
    (``n = 2``, ``basis`` columns generate the lattice, stored reduced).
    """

    kind: str
    n: int
    volume: float
    basis: tuple | None = None

    def __post_init__(self):
        if self.kind == "sphere":
            if self.n < 2 or self.n % 2:
                raise UnsupportedDimension(f"sphere dimension must be even and >= 2, got {self.n}")
            if not (self.volume > 0 and math.isfinite(self.volume)):
                raise ConfigError("volume must be a positive real")
        elif self.kind == "torus":
            if self.n != 2:
                raise UnsupportedDimension("only flat 2-tori are supported")
            if self.basis is None:
                raise ConfigError("torus needs a basis")
            det = abs(np.linalg.det(np.array(self.basis)))
            if det == 0:
                raise SingularLattice("lattice basis is singular")
            if self.volume != det:
                raise ConfigError("torus volume must equal |det basis|")
        else:
            raise ConfigError(f"unknown surface kind {self.kind!r}")

    @classmethod
    def sphere(cls, n: int = 2, volume: float | None = None) -> "SurfaceSpec":
        if volume is None:
            volume = sphere_volume(n)
        return cls("sphere", int(n), float(volume))

    @classmethod
    def torus(cls, basis) -> "SurfaceSpec":
        red = lagrange_reduce(basis)
        det = abs(float(np.linalg.det(red)))
        return cls("torus", 2, det, tuple(map(tuple, red.tolist())))

    @property
    def constants(self) -> Constants:
        return constants(self.n)

    @property
    def radius(self) -> float:
        """Radius of the round sphere with this volume."""
        if self.kind != "sphere":
            raise AttributeError("radius is defined for spheres only")
        return (self.volume / sphere_volume(self.n)) ** (1.0 / self.n)

    @property
    def basis_array(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere"


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Quadrature nodes and positive weights on a surface.

    Sphere points are unit vectors in R^3 laid out ring by ring
    (``shape = (n_theta, n_phi)``); torus points are Cartesian coordinates in
    the fundamental domain laid out as ``shape = (N, N)`` in lattice
    (fractional) coordinates.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    resolution: int
    shape: tuple
    nodes: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.points, self.weights):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def scaled(self, factor: float) -> "QuadratureGrid":
        """Same nodes, weights multiplied by ``factor``."""
        return QuadratureGrid(self.kind, self.points.copy(), self.weights * factor,
                              self.resolution, self.shape, dict(self.nodes))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float).ravel()))


def build_sphere_grid(n: int, resolution: int) -> QuadratureGrid:
    """Gauss-Legendre (in cos theta) x uniform longitude product rule on S^2.

    With ``resolution = L`` the rule has L+1 latitudes and 2L+2 longitudes
    and integrates every spherical harmonic of degree <= 2L+1 exactly.  The
    weights sum to 4*pi (unit sphere).
    """
    if n != 2:
        raise UnsupportedDimension(f"gridded spheres require n = 2, got n = {n}")
    L = int(resolution)
    if L < 1:
        raise ConfigError("resolution must be >= 1")
    x, wx = np.polynomial.legendre.leggauss(L + 1)
    nphi = 2 * L + 2
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    sint = np.sqrt(1.0 - x * x)
    pts = np.stack([
        np.outer(sint, np.cos(phi)),
        np.outer(sint, np.sin(phi)),
        np.outer(x, np.ones(nphi)),
    ], axis=-1).reshape(-1, 3)
    w = np.outer(wx, np.full(nphi, 2.0 * np.pi / nphi)).ravel()
    return QuadratureGrid("sphere", pts, w, L, (L + 1, nphi),
                          {"cos_theta": x, "theta_weights": wx, "phi": phi})


def build_torus_grid(basis, resolution: int) -> QuadratureGrid:
    """Uniform N x N grid on the fundamental domain, equal weights |det| / N^2."""
    b = np.array(basis, dtype=float)
    if b.shape != (2, 2):
        raise ConfigError("basis must be a 2x2 matrix")
    det = abs(float(np.linalg.det(b)))
    if det == 0 or not math.isfinite(det):
        raise SingularLattice("lattice basis is singular")
    N = int(resolution)
    if N < 1:
        raise ConfigError("resolution must be >= 1")
    s = np.arange(N) / N
    s1, s2 = np.meshgrid(s, s, indexing="ij")
    frac = np.stack([s1.ravel(), s2.ravel()], axis=-1)
    pts = frac @ b.T
    w = np.full(N * N, det / (N * N))
    return QuadratureGrid("torus", pts, w, N, (N, N), {"basis": b, "frac": frac})


def _torus_translates(b: np.ndarray, reach: int = 1) -> np.ndarray:
    i = np.arange(-reach, reach + 1)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    return np.stack([ii.ravel(), jj.ravel()], axis=-1) @ b.T


def torus_min_image(b: np.ndarray, disp) -> np.ndarray:
    """Shortest representative of each displacement modulo the lattice."""
    disp = np.asarray(disp, dtype=float)
    frac = disp @ np.linalg.inv(b).T
    frac = frac - np.round(frac)
    base = frac @ b.T
    cand = base[..., None, :] - _torus_translates(b)
    k = np.argmin((cand ** 2).sum(-1), axis=-1)
    return np.take_along_axis(cand, k[..., None, None], axis=-2)[..., 0, :]


def geodesic_distance(surface: SurfaceSpec, p, q) -> np.ndarray:
    """Riemannian distance; broadcasts over leading axes of ``p`` and ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if surface.kind == "sphere":
        c = np.clip((p * q).sum(-1), -1.0, 1.0)
        ang = np.arccos(c)
        # arccos loses accuracy near 0; use the chord there
        chord = np.sqrt(((p - q) ** 2).sum(-1))
        small = chord < 1e-2
        ang = np.where(small, 2.0 * np.arcsin(np.minimum(chord, 2.0) / 2.0), ang)
        return surface.radius * ang
    b = surface.basis_array
    d = torus_min_image(b, q - p)
    return np.sqrt((d ** 2).sum(-1))


def chordal_distance(p, q) -> np.ndarray:
    """Euclidean norm |x - y| of embedded sphere points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.sqrt(((p - q) ** 2).sum(-1))


def diameter(surface: SurfaceSpec) -> float:
    if surface.kind == "sphere":
        return math.pi * surface.radius
    b = surface.basis_array
    # circumradius of the Voronoi cell: max over a fine sample of the centered cell
    s = np.linspace(-0.5, 0.5, 201)
    s1, s2 = np.meshgrid(s, s, indexing="ij")
    pts = np.stack([s1.ravel(), s2.ravel()], -1) @ b.T
    d = torus_min_image(b, pts)
    return float(np.sqrt((d ** 2).sum(-1)).max())


def surface_from_mapping(cfg: dict) -> SurfaceSpec:
    """Build a surface from the ``surface = "sphere" | "torus"`` config keys."""
    kind = cfg.get("surface")
    if kind == "sphere":
        n = cfg.get("n", 2)
        if not isinstance(n, int) or isinstance(n, bool):
            raise ConfigError("field 'n' must be an integer")
        vol = cfg.get("volume")
        if vol is not None and not isinstance(vol, (int, float)):
            raise ConfigError("field 'volume' must be a number")
        try:
            return SurfaceSpec.sphere(n, None if vol is None else float(vol))
        except (ConfigError, UnsupportedDimension) as exc:
            raise ConfigError(f"field 'n'/'volume': {exc}") from exc
    if kind == "torus":
        basis = cfg.get("basis")
        try:
            arr = np.array(basis, dtype=float)
        except (TypeError, ValueError):
            arr = None
        if arr is None or arr.shape != (2, 2) or not np.all(np.isfinite(arr)):
            raise ConfigError("field 'basis' must be [[a, b], [c, d]] with finite entries")
        try:
            return SurfaceSpec.torus(arr)
        except SingularLattice as exc:
            raise ConfigError(f"field 'basis': {exc}") from exc
    raise ConfigError(f"field 'surface' must be \"sphere\" or \"torus\", got {kind!r}")


def surface_to_mapping(surface: SurfaceSpec) -> dict:
    if surface.kind == "sphere":
        return {"surface": "sphere", "n": surface.n, "volume": surface.volume}
    return {"surface": "torus", "basis": [list(r) for r in surface.basis]}
