"""Radial harmonic analysis on the real hyperbolic space of dimension n.

The ambient geometry enters through the surface density sinh^{n-1}(r) and
the half-sum parameter rho = (n-1)/2, whose square lambda0 = rho^2 is the
bottom of the L^2 spectrum of the (nonnegative) Laplace-Beltrami operator.
Radial eigenfunctions phi_xi solve

    phi'' + (n-1) coth(r) phi' + (xi^2 + rho^2) phi = 0,
    phi(0) = 1, phi'(0) = 0,

and the transform pair implemented here is

    F(xi) = c_n * int_0^inf f(r) phi_xi(r) sinh^{n-1}(r) dr,
    f(r)  = C_n * int_0^inf F(xi) phi_xi(r) w(xi) dxi,

with c_n the area of the unit (n-1)-sphere, w(xi) the Gamma-quotient
spectral density (see :func:`plancherel_density`) and the inversion
constant C_n = 2 / (Gamma(n/2) (4 pi)^{n/2}).

Normalization convention: with the constants above the heat semigroup has
multiplier exactly exp(-t (xi^2 + rho^2)) and the Plancherel identity
||f||_2^2 = C_n * int |F|^2 w(xi) dxi holds.  The inversion constant is a
convention (only the product of the forward and inverse constants is
canonical); it is frozen here and verified by the Plancherel tests.

Evaluation of phi_xi: a Frobenius-type power series in z = -sinh^2(r) is
used near the origin (the coth singularity rules out starting an ODE
there), and the substitution psi = sinh^{rho}(r) * phi turns the eigen-ODE
into psi'' = (V(r) - xi^2) psi with V = rho(rho-1)/sinh^2(r), which is
integrated with a high-order explicit scheme.  psi has O(1) amplitude for
all radii, so the table stays well conditioned out to large r where phi
itself decays like e^{-rho r}.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.special import loggamma

__all__ = [
    "ModelParams",
    "RadialGrid",
    "SpectralGrid",
    "RadialFn",
    "SpectralFn",
    "SphericalTransform",
    "radial_grid",
    "spectral_grid",
    "plancherel_density",
    "spherical_function",
    "forward_transform",
    "inverse_transform",
    "plancherel_check",
    "radial_fn_from_callable",
    "sphere_area",
    "inversion_constant",
    "log_sinh",
]

# Radius below which phi_xi is summed as a power series.  Kept small so the
# alternating series loses at most ~5 digits of headroom at xi ~ 60.
_SERIES_RADIUS = 0.15

_CACHE_MAGIC = b"HYPFRAC1"
_CACHE_VERSION = 1


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def inversion_constant(n: int) -> float:
    """Frozen normalization constant of the inverse transform."""
    return 2.0 / (math.gamma(n / 2.0) * (4.0 * math.pi) ** (n / 2.0))


def log_sinh(r):
    """log(sinh r), stable for large r."""
    r = np.asarray(r, dtype=float)
    return r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0)


@dataclass(frozen=True)
class ModelParams:
    """Ambient geometry and equation parameters.

    n        dimension of the hyperbolic space (>= 2)
    sigma    fractional order, in (0, 1)
    lam      spectral shift lambda, in [0, lambda0]
    beta     exponential forcing rate (evolution only), > 0
    gamma    nonlinearity exponent, > 1
    """

    n: int
    sigma: float
    lam: float = 0.0
    beta: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 <= self.lam <= self.lambda0:
            raise ValueError(
                f"lambda must lie in [0, lambda0={self.lambda0}], got {self.lam}"
            )
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")

    @property
    def rho(self) -> float:
        return (self.n - 1) / 2.0

    @property
    def lambda0(self) -> float:
        return self.rho**2

    @property
    def lam_sigma(self) -> float:
        """lambda^sigma (zero at lambda = 0)."""
        return self.lam**self.sigma

    @property
    def lambda0_sigma(self) -> float:
        return self.lambda0**self.sigma

    @property
    def gamma_star(self) -> float:
        """Threshold exponent 1 + beta / lambda0^sigma."""
        return 1.0 + self.beta / self.lambda0_sigma

    @property
    def sobolev_critical(self) -> float:
        """Critical exponent 2n / (n - 2 sigma)."""
        return 2.0 * self.n / (self.n - 2.0 * self.sigma)


def _gauss_panels(edges, order):
    """Composite Gauss-Legendre nodes/weights on consecutive panels."""
    x, w = leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    nodes = (0.5 * (hi - lo) * (x[None, :] + 1.0) + lo).ravel()
    weights = (0.5 * (hi - lo) * w[None, :]).ravel()
    return nodes, weights


def _panel_edges(outer, inner, grow, width):
    """Geometric panels from 0 through `inner` up to panel size `width`,
    then uniform panels to `outer`."""
    edges = [0.0, inner]
    e = inner
    while e * (grow - 1.0) < width and e * grow < outer:
        e *= grow
        edges.append(e)
    if e < outer:
        k = max(1, int(math.ceil((outer - e) / width)))
        edges.extend(np.linspace(e, outer, k + 1)[1:].tolist())
    edges[-1] = outer
    return np.array(edges)


def _fingerprint(*arrays, extra=b"") -> str:
    h = hashlib.sha256()
    h.update(extra)
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature grid on (0, r_max] with measure weights c_n sinh^{n-1}(r).

    `weights` integrate against the Riemannian measure; `quad_weights` are
    the bare Gauss-Legendre weights.  r = 0 is never a node (the measure
    vanishes there and several kernels are singular); functions carry the
    origin value separately.
    """

    n: int
    r_max: float
    nodes: np.ndarray
    weights: np.ndarray
    quad_weights: np.ndarray

    @property
    def fingerprint(self) -> str:
        return _fingerprint(self.nodes, extra=f"r{self.n}".encode())

    def integrate(self, values) -> float:
        """Integral against the Riemannian measure."""
        return float(self.weights @ np.asarray(values))


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Quadrature grid on (0, xi_max] with Plancherel-weighted weights.

    `weights` include the spectral density and the inversion constant, so
    that inverse transforms and spectral L^2 norms are plain weighted sums.
    """

    n: int
    xi_max: float
    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    quad_weights: np.ndarray

    @property
    def fingerprint(self) -> str:
        return _fingerprint(self.nodes, extra=f"s{self.n}".encode())

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values))


def radial_grid(n, r_max=40.0, *, inner=1e-5, width=0.4, order=16, grow=2.0) -> RadialGrid:
    if (n - 1) * r_max > 700.0:
        raise ValueError(
            "sinh^{n-1}(r_max) overflows double precision; reduce r_max or n"
        )
    edges = _panel_edges(r_max, inner, grow, width)
    nodes, qw = _gauss_panels(edges, order)
    meas = sphere_area(n) * np.exp((n - 1) * log_sinh(nodes))
    return RadialGrid(n=n, r_max=float(r_max), nodes=nodes, weights=qw * meas,
                      quad_weights=qw)


def plancherel_density(n, xi):
    """Spectral density |Gamma(rho + i xi)|^2 / |Gamma(i xi)|^2.

    Behaves like xi^2 for xi <= 1 and like xi^{n-1} for xi >= 1 (with
    constant 1 at infinity).  Vanishes at xi = 0.  Negative xi is a domain
    error; the density is even and only xi >= 0 is ever evaluated.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("spectral parameter must be nonnegative")
    rho = (n - 1) / 2.0
    out = np.zeros_like(xi)
    pos = xi > 0
    z = 1j * xi[pos]
    out[pos] = np.exp(2.0 * (np.real(loggamma(rho + z)) - np.real(loggamma(z))))
    return out if out.ndim else float(out)


def spectral_grid(n, xi_max=60.0, *, inner=1e-4, width_low=0.25, split=10.0,
                  width_high=0.5, order=16, grow=2.0, xi_min=0.0) -> SpectralGrid:
    """Spectral quadrature grid on (xi_min, xi_max].

    xi_min = 0 refines geometrically toward the origin (appropriate for
    multiplication operators).  Solvers that invert nearly-vanishing
    multipliers should set xi_min of order 1/r_max: a domain truncated at
    r_max cannot tell frequencies below its own resolving scale apart, and
    quadrature nodes there act as spurious zero-cost degrees of freedom.
    """
    split = min(split, xi_max)
    if xi_min > 0.0:
        k = int(math.ceil((split - xi_min) / width_low))
        edges = np.concatenate([[xi_min], np.linspace(xi_min, split, k + 1)[1:]])
    else:
        edges = _panel_edges(split, inner, grow, width_low)
    if xi_max > split:
        k = int(math.ceil((xi_max - split) / width_high))
        edges = np.concatenate([edges, np.linspace(split, xi_max, k + 1)[1:]])
    nodes, qw = _gauss_panels(edges, order)
    dens = plancherel_density(n, nodes)
    weights = inversion_constant(n) * dens * qw
    return SpectralGrid(n=n, xi_max=float(xi_max), nodes=nodes, weights=weights,
                        density=dens, quad_weights=qw)


@dataclass(eq=False)
class RadialFn:
    """Samples of a radial function on a radial grid.

    The origin value is stored separately since r = 0 is not a node.
    """

    grid: RadialGrid
    values: np.ndarray
    value_at_origin: float = 0.0
    meta: dict = field(default_factory=dict)

    def l2_norm(self) -> float:
        return math.sqrt(float(self.grid.weights @ self.values**2))

    def lq_norm(self, q) -> float:
        if q == math.inf:
            return self.sup_norm()
        return float(self.grid.weights @ np.abs(self.values) ** q) ** (1.0 / q)

    def lq_norm_pow(self, q) -> float:
        """||f||_q^q (the integral itself)."""
        return float(self.grid.weights @ np.abs(self.values) ** q)

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(self.values))), abs(self.value_at_origin))

    def integral(self) -> float:
        return float(self.grid.weights @ self.values)

    def scaled(self, a) -> "RadialFn":
        return RadialFn(self.grid, a * self.values, a * self.value_at_origin)


@dataclass(eq=False)
class SpectralFn:
    """Samples of a transform on a spectral grid (implicitly even in xi)."""

    grid: SpectralGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def l2_norm(self) -> float:
        return math.sqrt(float(self.grid.weights @ self.values**2))


def radial_fn_from_callable(grid: RadialGrid, fn) -> RadialFn:
    return RadialFn(grid, np.asarray(fn(grid.nodes), dtype=float),
                    float(fn(np.array([0.0]))[0] if callable(fn) else 0.0))


# ---------------------------------------------------------------------------
# Spherical eigenfunctions
# ---------------------------------------------------------------------------

def _phi_series(n, xi, r, max_terms=200, with_derivatives=False):
    """Power series for phi_xi(r) in z = -sinh^2 r, valid for small r.

    Returns phi of shape (len(xi), len(r)); optionally also dphi/dr and
    d2phi/dr2.  The coefficient recursion has positive terms against
    negative z, so the sum is alternating; callers keep |z| small.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rho = (n - 1) / 2.0
    c = n / 2.0
    sh = np.sinh(r)
    z = -(sh**2)

    coef = np.ones((xi.size, 1))
    phi = np.ones((xi.size, r.size))
    dphi_dz = np.zeros_like(phi)
    d2phi_dz2 = np.zeros_like(phi)
    zk = np.ones((1, r.size))
    term_prev = None
    for k in range(max_terms):
        ratio = ((rho / 2.0 + k) ** 2 + (xi[:, None] ** 2) / 4.0) / ((c + k) * (k + 1))
        coef = coef * ratio
        zk_next = zk * z[None, :]
        term = coef * zk_next
        phi += term
        dphi_dz += coef * (k + 1) * zk
        if k >= 1:
            d2phi_dz2 += coef * (k + 1) * k * zk / z[None, :]
        zk = zk_next
        tmax = np.max(np.abs(term))
        if tmax < 1e-18 * max(1.0, np.max(np.abs(phi))):
            break
        term_prev = tmax
    else:
        raise RuntimeError(
            f"phi series did not converge (last term {term_prev}); radius too large"
        )
    if not with_derivatives:
        return phi
    dz_dr = -np.sinh(2.0 * r)
    d2z_dr2 = -2.0 * np.cosh(2.0 * r)
    dphi_dr = dphi_dz * dz_dr[None, :]
    d2phi_dr2 = d2phi_dz2 * (dz_dr**2)[None, :] + dphi_dz * d2z_dr2[None, :]
    return phi, dphi_dr, d2phi_dr2


def _phi_ode(n, xi, r_out, r_start, psi0, dpsi0, rtol=1e-11, atol=1e-13):
    """Integrate psi'' = (V - xi^2) psi for all xi at once.

    psi = sinh^{rho}(r) phi, V = rho(rho-1)/sinh^2(r).  Returns psi at the
    (sorted, increasing) radii r_out > r_start.
    """
    xi = np.asarray(xi, dtype=float)
    rho = (n - 1) / 2.0
    vcoef = rho * (rho - 1.0)
    xi2 = xi**2
    m = xi.size

    def rhs(r, y):
        psi = y[:m]
        dpsi = y[m:]
        v = vcoef / math.sinh(r) ** 2
        return np.concatenate([dpsi, (v - xi2) * psi])

    y0 = np.concatenate([psi0, dpsi0])
    sol = solve_ivp(rhs, (r_start, r_out[-1]), y0, method="DOP853",
                    t_eval=r_out, rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"eigenfunction integration failed: {sol.message}")
    return sol.y[:m, :]


def _phi_table(n, xi_nodes, r_nodes, rtol=1e-11):
    """Table phi[j, i] = phi_{xi_j}(r_i) for sorted positive radii."""
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    r_nodes = np.asarray(r_nodes, dtype=float)
    rho = (n - 1) / 2.0
    table = np.empty((xi_nodes.size, r_nodes.size))

    near = r_nodes <= _SERIES_RADIUS
    if np.any(near):
        table[:, near] = _phi_series(n, xi_nodes, r_nodes[near])
    far = ~near
    if np.any(far):
        r0 = _SERIES_RADIUS
        phi0, dphi0, _ = _phi_series(n, xi_nodes, np.array([r0]),
                                     with_derivatives=True)
        shp = math.sinh(r0) ** rho
        dshp = rho * math.cosh(r0) * math.sinh(r0) ** (rho - 1.0)
        psi0 = (phi0 * shp)[:, 0]
        dpsi0 = (dphi0 * shp + phi0 * dshp)[:, 0]
        psi = _phi_ode(n, xi_nodes, r_nodes[far], r0, psi0, dpsi0, rtol=rtol)
        table[:, far] = psi * np.exp(-rho * log_sinh(r_nodes[far]))[None, :]
    return table


def spherical_function(n, xi, r, rtol=1e-11):
    """Evaluate phi_xi(r) for scalar xi >= 0 and radii r >= 0.

    Output is even in xi by construction (the series and ODE involve xi^2
    only).  Radii past the point where sinh^{rho} overflows return 0.0;
    with default grids this is far beyond any radius of interest.
    """
    if xi < 0:
        xi = -xi
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    zero = r == 0.0
    out[zero] = 1.0
    pos = ~zero
    if np.any(pos):
        uniq, inverse = np.unique(r[pos], return_inverse=True)
        vals = _phi_table(n, np.array([xi]), uniq, rtol=rtol)[0]
        out[pos] = vals[inverse]
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# Transform pair
# ---------------------------------------------------------------------------

_TABLE_CACHE: dict = {}


class SphericalTransform:
    """Forward/inverse transform pair bound to one (radial, spectral) grid pair.

    The eigenfunction table is built once (or loaded from a binary cache)
    and shared read-only; all operations on it are pure.
    """

    def __init__(self, n, rgrid: RadialGrid, sgrid: SpectralGrid,
                 cache_dir=None, rtol=1e-11):
        if rgrid.n != n or sgrid.n != n:
            raise ValueError("grid dimensions disagree with transform dimension")
        self.n = n
        self.rgrid = rgrid
        self.sgrid = sgrid
        key = (n, rgrid.fingerprint, sgrid.fingerprint)
        table = _TABLE_CACHE.get(key)
        if table is None and cache_dir is not None:
            table = _load_table(cache_dir, n, rgrid, sgrid)
        if table is None:
            table = _phi_table(n, sgrid.nodes, rgrid.nodes, rtol=rtol)
        if cache_dir is not None and not os.path.exists(
                _cache_path(cache_dir, n, rgrid, sgrid)):
            _save_table(cache_dir, n, rgrid, sgrid, table)
        _TABLE_CACHE[key] = table
        self.table = table

    # -- operations --------------------------------------------------------

    def forward(self, f: RadialFn, tail_tol=1e-9) -> SpectralFn:
        """Spectral samples of f; warns in metadata when the radial tail
        carries mass above `tail_tol` (truncated integral suspect)."""
        if f.grid is not self.rgrid and f.grid.fingerprint != self.rgrid.fingerprint:
            raise ValueError("function lives on a different radial grid")
        weighted = self.rgrid.weights * f.values
        out = SpectralFn(self.sgrid, self.table @ weighted)
        tail = _tail_fraction(self.rgrid.nodes, np.abs(f.values) * self.rgrid.weights)
        if tail > tail_tol:
            out.meta["truncation_warning"] = (
                f"radial tail mass fraction {tail:.3e} exceeds {tail_tol:.1e}"
            )
        return out

    def inverse(self, F: SpectralFn, tail_tol=1e-9) -> RadialFn:
        if F.grid is not self.sgrid and F.grid.fingerprint != self.sgrid.fingerprint:
            raise ValueError("function lives on a different spectral grid")
        weighted = self.sgrid.weights * F.values
        values = self.table.T @ weighted
        origin = float(np.sum(weighted))  # phi_xi(0) = 1
        out = RadialFn(self.rgrid, values, origin)
        tail = _tail_fraction(self.sgrid.nodes, np.abs(F.values) * self.sgrid.weights)
        if tail > tail_tol:
            out.meta["truncation_warning"] = (
                f"spectral tail mass fraction {tail:.3e} exceeds {tail_tol:.1e}"
            )
        return out

    def plancherel_check(self, f: RadialFn) -> "PlancherelReport":
        real_l2 = f.l2_norm()
        spec_l2 = self.forward(f).l2_norm()
        rel = 0.0 if real_l2 == 0.0 else abs(real_l2 - spec_l2) / real_l2
        return PlancherelReport(real_l2, spec_l2, rel)

    # -- helpers ------------------------------------------------------------

    def spectral_multiplier_apply(self, f: RadialFn, multiplier) -> RadialFn:
        """inverse(multiplier * forward(f)) in one pass."""
        F = self.forward(f)
        return self.inverse(SpectralFn(self.sgrid, F.values * multiplier))

    def from_multiplier(self, multiplier_values) -> RadialFn:
        """Inverse transform of explicit spectral samples."""
        return self.inverse(SpectralFn(self.sgrid, np.asarray(multiplier_values)))


@dataclass(frozen=True)
class PlancherelReport:
    real_l2: float
    spectral_l2: float
    rel_error: float


def _tail_fraction(nodes, mass):
    total = float(np.sum(mass))
    if total <= 0.0:
        return 0.0
    cut = nodes >= 0.9 * nodes[-1]
    return float(np.sum(mass[cut])) / total


def forward_transform(f: RadialFn, transform: SphericalTransform) -> SpectralFn:
    return transform.forward(f)


def inverse_transform(F: SpectralFn, transform: SphericalTransform) -> RadialFn:
    return transform.inverse(F)


def plancherel_check(f: RadialFn, transform: SphericalTransform) -> PlancherelReport:
    return transform.plancherel_check(f)


# ---------------------------------------------------------------------------
# Binary table cache: header (magic, version, n, grid hashes) followed by the
# row-major float64 little-endian table, rows indexed by xi.
# ---------------------------------------------------------------------------

def _cache_path(cache_dir, n, rgrid, sgrid):
    name = f"sphtab_n{n}_{rgrid.fingerprint[:16]}_{sgrid.fingerprint[:16]}.bin"
    return os.path.join(cache_dir, name)


def _save_table(cache_dir, n, rgrid, sgrid, table):
    os.makedirs(cache_dir, exist_ok=True)
    path = _cache_path(cache_dir, n, rgrid, sgrid)
    header = struct.pack(
        "<8sII", _CACHE_MAGIC, _CACHE_VERSION, n
    ) + bytes.fromhex(rgrid.fingerprint) + bytes.fromhex(sgrid.fingerprint) + struct.pack(
        "<QQ", table.shape[0], table.shape[1]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table, dtype="<f8").tobytes())


def _load_table(cache_dir, n, rgrid, sgrid):
    path = _cache_path(cache_dir, n, rgrid, sgrid)
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        head = fh.read(8 + 4 + 4)
        magic, version, n_stored = struct.unpack("<8sII", head)
        if magic != _CACHE_MAGIC or version != _CACHE_VERSION or n_stored != n:
            return None
        rhash = fh.read(32).hex()
        shash = fh.read(32).hex()
        if rhash != rgrid.fingerprint or shash != sgrid.fingerprint:
            return None
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy()
