"""Fractional Laplacian of radial functions by two independent routes,
shifted Sobolev-type norms, and the pair-distance convolution engine.

The spectral route multiplies the transform by (xi^2 + lambda0)^sigma.
The singular-integral route evaluates

    (1/|Gamma(-sigma)|) p.v. int (f(x) - f(y)) P0(d(x,y)) dmu(y)

through spherical means: for radial f the integral collapses to a single
integral over the distance t of [f(x) - M_t f(x)] against the weighted
kernel c_n sinh^{n-1}(t) P0(t), where M_t is the mean over the geodesic
sphere of radius t.  Below a small radius the bracket is replaced by its
second-order expansion -(t^2 / 2n) (f'' + (n-1) coth(r) f'); first-order
terms vanish by symmetry of the sphere average, so no principal-value
cancellation is left to resolve numerically.

Convolutions of radial functions use the pair-distance reduction

    (f * k)(r1) = |S^{n-2}| int f(r2) sinh^{n-1}(r2)
                  int_0^pi k(d(r1, r2, theta)) sin^{n-2}(theta) dtheta dr2

with Gauss-Jacobi angle nodes matched to the sin^{n-2} weight and
cosh d = cosh r1 cosh r2 - sinh r1 sinh r2 cos(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import kv, roots_jacobi

from .kernels import log_panels, p0_values, p0_weighted3
from .spectral import (
    ModelParams,
    RadialFn,
    RadialGrid,
    SphericalTransform,
    SpectralFn,
    log_sinh,
    sphere_area,
)

__all__ = [
    "RadialTestFn",
    "LsigmaReport",
    "geodesic_distance",
    "angle_nodes",
    "radial_convolve",
    "convolution_matrix",
    "frac_laplacian_spectral",
    "frac_laplacian_integral",
    "cross_validate_laplacian",
    "shifted_norm",
    "shifted_norm_sq",
    "double_integral_norm",
    "lsigma_membership",
    "abs_and_radialization_contractivity",
]


@dataclass(frozen=True)
class RadialTestFn:
    """A radial profile with derivatives, as needed by the pointwise
    singular-integral route (C^2 regularity near the evaluation point)."""

    fn: object
    d1: object
    d2: object
    support: float | None = None   # radius beyond which fn is negligible
    unbounded: bool = False        # grows at infinity (slow tail handling)

    def __call__(self, r):
        return self.fn(r)


def test_fn_from_radialfn(f: RadialFn) -> RadialTestFn:
    r = np.concatenate([[0.0], f.grid.nodes])
    v = np.concatenate([[f.value_at_origin], f.values])
    sp = CubicSpline(r, v, bc_type=((1, 0.0), "not-a-knot"))
    top = f.grid.r_max

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= top, sp(np.minimum(x, top)), 0.0)

    return RadialTestFn(fn=fn, d1=sp.derivative(1), d2=sp.derivative(2),
                        support=top)


# ---------------------------------------------------------------------------
# Pair distances and convolution
# ---------------------------------------------------------------------------

def geodesic_distance(r1, r2, cos_theta):
    """d(x, y) for |x| = r1, |y| = r2 and angle theta between directions.

    Uses cosh d - 1 = (cosh(r1 - r2) - 1) + sinh r1 sinh r2 (1 - cos theta)
    so nearby points do not lose precision to cancellation.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    u = 2.0 * np.sinh(0.5 * (r1 - r2)) ** 2 \
        + np.sinh(r1) * np.sinh(r2) * (1.0 - cos_theta)
    return 2.0 * np.arcsinh(np.sqrt(0.5 * u))


_ANGLE_CACHE: dict = {}


def angle_nodes(n, n_theta=24):
    """Gauss-Jacobi nodes (x = cos theta) and weights for the sin^{n-2} weight."""
    key = (n, n_theta)
    if key not in _ANGLE_CACHE:
        a = (n - 3) / 2.0
        x, w = roots_jacobi(n_theta, a, a)
        _ANGLE_CACHE[key] = (x, w)
    return _ANGLE_CACHE[key]


@dataclass(eq=False)
class PairDistanceTable:
    """Angle quadrature nodes/weights and distances for a (r1, r2) grid pair.

    Built lazily in row blocks by the convolution routines; kept as a type
    so the geometric invariants (symmetry, triangle bounds) are testable.
    """

    n: int
    r_out: np.ndarray
    r_in: np.ndarray
    cos_nodes: np.ndarray
    angle_weights: np.ndarray

    def distances(self, i_lo, i_hi):
        """Distance block of shape (i_hi - i_lo, len(r_in), n_theta)."""
        return geodesic_distance(self.r_out[i_lo:i_hi, None, None],
                                 self.r_in[None, :, None],
                                 self.cos_nodes[None, None, :])


def pair_distance_table(n, r_out, r_in, n_theta=24) -> PairDistanceTable:
    x, w = angle_nodes(n, n_theta)
    return PairDistanceTable(n=n, r_out=np.asarray(r_out, dtype=float),
                             r_in=np.asarray(r_in, dtype=float),
                             cos_nodes=x, angle_weights=w)


_V_TEMPLATE: dict = {}


def _v_template(n_v=32):
    """Master nodes/weights on (0, 1]: log panels toward 0 for kernel
    singularities plus uniform panels across the bulk."""
    key = n_v
    if key not in _V_TEMPLATE:
        x8, w8 = leggauss(8)
        k_log = max(3, n_v // 16)
        log_edges = np.exp(np.linspace(math.log(1e-7), math.log(0.1), k_log + 1))
        edges = np.concatenate([log_edges, np.linspace(0.1, 1.0, 10)[1:]])
        lo = edges[:-1][:, None]
        hi = edges[1:][:, None]
        nodes = (0.5 * (hi - lo) * (x8[None, :] + 1.0) + lo).ravel()
        weights = (0.5 * (hi - lo) * w8[None, :]).ravel()
        _V_TEMPLATE[key] = (nodes, weights)
    return _V_TEMPLATE[key]


def _angular_integrals_v(kfun, r_out, r_in, n, n_v=32):
    """int_0^pi k(d(r1, r2, theta)) sin^{n-2}(theta) dtheta as a matrix.

    Integrates in the distance variable v in [|r1-r2|, r1+r2], where
    sinh(v) dv = sinh(r1) sinh(r2) sin(theta) dtheta; the template nodes
    cluster at the lower endpoint so singular kernels are resolved exactly
    where the angular parametrization would smear them.  n >= 3 (the n = 2
    weight is endpoint-singular and handled by Gauss-Jacobi instead).
    """
    r1 = np.asarray(r_out, dtype=float)[:, None, None]
    r2 = np.asarray(r_in, dtype=float)[None, :, None]
    tmpl_x, tmpl_w = _v_template(n_v)
    v_lo = np.abs(r1 - r2)
    span = (r1 + r2) - v_lo
    v = v_lo + span * tmpl_x[None, None, :]
    kv_ = kfun(v.ravel()).reshape(v.shape)
    # sinh(v) / (sinh r1 sinh r2) in pure negative-exponent form
    ratio = 2.0 * np.exp(v - (r1 + r2)) * (-np.expm1(-2.0 * v)) / (
        (-np.expm1(-2.0 * r1)) * (-np.expm1(-2.0 * r2)))
    integ = kv_ * ratio
    if n > 3:
        # sin^{n-3}(theta) with cos(theta) reconstructed from v, stably
        num = (np.exp(np.abs(r1 - r2) - (r1 + r2))
               + np.exp(-np.abs(r1 - r2) - (r1 + r2))
               + 1.0 + np.exp(-2.0 * (r1 + r2))
               - 2.0 * np.exp(v - (r1 + r2)) - 2.0 * np.exp(-v - (r1 + r2)))
        den = (-np.expm1(-2.0 * r1)) * (-np.expm1(-2.0 * r2))
        cos_t = np.clip(num / den, -1.0, 1.0)
        integ = integ * np.sqrt(np.maximum(1.0 - cos_t ** 2, 0.0)) ** (n - 3)
    return (integ * span) @ tmpl_w


def _angular_integrals_gj(kfun, r_out, r_in, n, n_theta=48):
    x, w = angle_nodes(n, n_theta)
    d = geodesic_distance(np.asarray(r_out, dtype=float)[:, None, None],
                          np.asarray(r_in, dtype=float)[None, :, None],
                          x[None, None, :])
    return kfun(d.ravel()).reshape(d.shape) @ w


def angular_kernel_integrals(kfun, r_out, r_in, n, n_nodes=32):
    """Angle-integrated kernel matrix A[i, j] = int k(d(r_i, r_j, .)) dangle."""
    if n >= 3:
        return _angular_integrals_v(kfun, r_out, r_in, n, n_v=n_nodes)
    return _angular_integrals_gj(kfun, r_out, r_in, n, n_theta=max(n_nodes, 48))


def _kernel_callable(kernel):
    if callable(kernel):
        return kernel
    if isinstance(kernel, RadialFn):
        nodes = kernel.grid.nodes
        vals = kernel.values
        pos = np.all(vals > 0)
        if pos:
            sp = CubicSpline(np.log(nodes), np.log(vals))

            def call(d):
                d = np.asarray(d, dtype=float)
                out = np.zeros_like(d)
                inside = (d >= nodes[0]) & (d <= nodes[-1])
                out[inside] = np.exp(sp(np.log(d[inside])))
                small = d < nodes[0]
                out[small] = vals[0]
                return out

            return call

        def call(d):
            d = np.asarray(d, dtype=float)
            return np.interp(d, nodes, vals, left=vals[0], right=0.0)

        return call
    raise TypeError("kernel must be callable or a RadialFn")


def _cumulative_kernel(kfun, v_max, floor=1e-8):
    """Spline of Phi(x) = int_ref^x k(v) sinh(v) dv anchored at ref = 1.

    Anchoring away from the origin keeps the accumulation free of the
    (possibly divergent) near-zero mass: each knot value is built from
    sums at its own scale, so differences Phi(b) - Phi(a) of the spline
    stay accurate for integrable and non-integrable kernels alike.
    Arguments below `floor` are clamped.
    """
    x8, w8 = leggauss(8)
    log_edges = np.exp(np.linspace(math.log(floor), math.log(0.25), 96))
    lin_edges = np.arange(0.25 + 0.05, v_max + 0.1, 0.05)
    edges = np.unique(np.concatenate([log_edges, lin_edges, [1.0]]))
    lo = edges[:-1][:, None]
    hi = edges[1:][:, None]
    nodes = (0.5 * (hi - lo) * (x8[None, :] + 1.0) + lo).ravel()
    weights = (0.5 * (hi - lo) * w8[None, :]).ravel()
    seg = (kfun(nodes) * np.sinh(nodes) * weights).reshape(-1, 8).sum(axis=1)
    i_ref = int(np.searchsorted(edges, 1.0))
    cum = np.empty_like(edges)
    cum[i_ref] = 0.0
    cum[i_ref + 1:] = np.cumsum(seg[i_ref:])
    cum[:i_ref] = -np.cumsum(seg[:i_ref][::-1])[::-1]
    spline = CubicSpline(edges, cum)
    lo_edge, hi_edge = edges[0], edges[-1]

    def phi(x):
        return spline(np.clip(x, lo_edge, hi_edge))

    return phi


def convolution_matrix(kernel, grid: RadialGrid, n_nodes=32, out_grid=None,
                       block=128):
    """Matrix M with (f * k)(r_i) = (M @ (grid.weights * f))_i.

    On n = 3 the angular integral collapses to a difference of the
    antiderivative of k(v) sinh(v), which handles kernels of any scale or
    singularity exactly; other dimensions use nodal angle quadrature.
    """
    out_grid = grid if out_grid is None else out_grid
    kfun = _kernel_callable(kernel)
    ang_const = sphere_area(grid.n - 1) / sphere_area(grid.n)
    if grid.n == 3:
        phi = _cumulative_kernel(kfun, float(out_grid.r_max + grid.r_max))
        r1 = out_grid.nodes[:, None]
        r2 = grid.nodes[None, :]
        m = (phi(r1 + r2) - phi(np.abs(r1 - r2))) / (np.sinh(r1) * np.sinh(r2))
        if out_grid is grid:
            # coincident nodes: evaluating the lower limit at 0 misassigns the
            # (possibly divergent) near-origin kernel mass to one node; use a
            # distance matching the node's own quadrature resolution instead
            # (0.184 h reproduces the panel average for a log singularity)
            spacing = np.gradient(grid.nodes)
            idx = np.arange(grid.nodes.size)
            m[idx, idx] = (phi(2.0 * grid.nodes) - phi(0.184 * spacing)) \
                / np.sinh(grid.nodes) ** 2
        return ang_const * m
    m = np.empty((out_grid.nodes.size, grid.nodes.size))
    for i in range(0, out_grid.nodes.size, block):
        j = min(i + block, out_grid.nodes.size)
        m[i:j] = angular_kernel_integrals(kfun, out_grid.nodes[i:j],
                                          grid.nodes, grid.n, n_nodes)
    return ang_const * m


def radial_convolve(f: RadialFn, kernel, n_nodes=32, matrix=None) -> RadialFn:
    """Convolution f * k of radial functions (k given by profile or callable).

    Commutes with swapping f and k when both are integrable; the invariance
    is a test-suite property, not enforced here.
    """
    g = f.grid
    if matrix is None:
        matrix = convolution_matrix(kernel, g, n_nodes)
    weighted = g.weights * f.values
    values = matrix @ weighted
    kfun = _kernel_callable(kernel)
    origin = float(kfun(g.nodes) @ weighted)
    return RadialFn(g, values, origin)


# ---------------------------------------------------------------------------
# Spectral route
# ---------------------------------------------------------------------------

def frac_laplacian_spectral(f: RadialFn, sigma, transform: SphericalTransform,
                            lambda0=None) -> RadialFn:
    lam0 = ((transform.n - 1) / 2.0) ** 2 if lambda0 is None else lambda0
    mult = (transform.sgrid.nodes ** 2 + lam0) ** sigma
    return transform.spectral_multiplier_apply(f, mult)


# ---------------------------------------------------------------------------
# Singular-integral route
# ---------------------------------------------------------------------------

def _sphere_radii(r0, t_nodes, cos_a):
    """|y| over geodesic spheres of radii t around x, |x| = r0; shape (nt, na).

    Uses a large-sphere branch r = t + log(cosh r0 - sinh r0 cos a) past
    t = 40 where cosh(t) would overflow long before the radii of interest.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    out = np.empty((t_nodes.size, cos_a.size))
    small = t_nodes < 40.0
    if np.any(small):
        ts = t_nodes[small][:, None]
        z = math.cosh(r0) * np.cosh(ts) \
            - math.sinh(r0) * np.sinh(ts) * cos_a[None, :]
        out[small] = np.arccosh(np.maximum(z, 1.0))
    if np.any(~small):
        out[~small] = t_nodes[~small][:, None] + np.log(
            math.cosh(r0) - math.sinh(r0) * cos_a)[None, :]
    return out


def _sphere_means(fn, r0, t_nodes, n, n_theta=32):
    """Means of a radial profile over geodesic spheres of radii t around x.

    For n >= 3 the angular integral is taken in the radius variable u of
    the sphere point, over [|t - r0|, t + r0]; the weight concentrates
    exponentially at the top end (most of a hyperbolic sphere sits near its
    far pole), so the window is clipped 45 units below the top.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    if r0 < 1e-9:
        return np.asarray(fn(t_nodes), dtype=float)
    norm_ang = math.sqrt(math.pi) * math.gamma((n - 1) / 2.0) / math.gamma(n / 2.0)
    if n == 2:
        x_ang, w_ang = angle_nodes(2, max(n_theta, 48))
        rr = _sphere_radii(r0, t_nodes, x_ang)
        return (np.asarray(fn(rr), dtype=float) @ w_ang) / norm_ang
    x8, w8 = leggauss(8)
    out = np.empty_like(t_nodes)
    for idx, t in enumerate(t_nodes):
        # offset coordinate v = u - (t + r0) <= 0: beyond t ~ 1e15 the float
        # spacing exceeds the window width, so u itself cannot carry it
        win = min(2.0 * min(t, r0), 45.0)
        k = max(3, int(math.ceil(win / 0.35)))
        edges = np.linspace(-win, 0.0, k + 1)
        v = (0.5 * (edges[1:] - edges[:-1])[:, None] * (x8[None, :] + 1.0)
             + edges[:-1][:, None]).ravel()
        dv = (0.5 * (edges[1:] - edges[:-1])[:, None] * w8[None, :]).ravel()
        u = t + r0 + v
        ex2u = np.exp(np.maximum(-2.0 * u, -700.0))
        weight = 2.0 * np.exp(v) * (1.0 - ex2u) / (
            (-math.expm1(-2.0 * r0)) * (-math.expm1(-2.0 * t)))
        if n > 3:
            # cos(angle) = (cosh r0 cosh t - cosh u)/(sinh r0 sinh t) in
            # pure negative-exponent form: 2 e^{-t-r0} cosh x expansions
            e_min = math.exp(max(-2.0 * min(t, r0), -700.0))
            e_max = math.exp(max(-2.0 * max(t, r0), -700.0))
            e_2s = math.exp(max(-2.0 * (t + r0), -700.0))
            num = (1.0 + e_2s + e_min + e_max
                   - 2.0 * np.exp(v) - 2.0 * e_2s * np.exp(-v))
            den = (-math.expm1(-2.0 * r0)) * (-math.expm1(-2.0 * t))
            cos_a = np.clip(num / den, -1.0, 1.0)
            weight = weight * np.sqrt(np.maximum(1.0 - cos_a ** 2, 0.0)) ** (n - 3)
        out[idx] = float(dv @ (np.asarray(fn(u), dtype=float) * weight))
    return out / norm_ang


def _weighted_p0(n, sigma, t):
    """c_n sinh^{n-1}(t) P0(t), overflow-safe."""
    t = np.asarray(t, dtype=float)
    if n == 3:
        return p0_weighted3(sigma, t)
    vals = p0_values(n, sigma, t)
    return sphere_area(n) * np.exp((n - 1) * log_sinh(t)) * vals


def _p0_weighted_tail(n, sigma, t_from, t_big=None):
    """int_{t_from}^inf of the weighted kernel, power tail extrapolated."""
    if t_big is None:
        t_big = max(10.0 * t_from, 1e4)
    nodes, w = log_panels(t_from, t_big, per_decade=10, order=10)
    bulk = float(w @ _weighted_p0(n, sigma, nodes))
    c_fit = float(_weighted_p0(n, sigma, np.array([t_big]))[0]) * t_big ** (
        1.0 + sigma)
    return bulk + c_fit * t_big ** (-sigma) / sigma


def frac_laplacian_integral(f, sigma, r0, n=3, n_theta=32, delta0=1e-2,
                            t_min=1e-12):
    """Pointwise fractional Laplacian of a radial function at radius r0.

    `f` is a :class:`RadialTestFn` (or RadialFn, converted via a spline);
    C^2 regularity near r0 is required for the near-field expansion.
    """
    if isinstance(f, RadialFn):
        rep = lsigma_membership(f, sigma)
        if not math.isfinite(rep.integral_value):
            raise ValueError("function is outside the admissible decay class")
        f = test_fn_from_radialfn(f)
    gamma_abs = math.gamma(1.0 - sigma) / sigma  # |Gamma(-sigma)|

    # near field: bracket ~ -(t^2/2n) (f'' + (n-1) coth(r0) f')
    if r0 == 0.0:
        ell = n * float(f.d2(0.0))
    else:
        ell = float(f.d2(r0)) + (n - 1) / math.tanh(r0) * float(f.d1(r0))
    t_nodes, t_w = log_panels(t_min, delta0, per_decade=10, order=10)
    wkern = _weighted_p0(n, sigma, t_nodes)
    near = -(ell / (2.0 * n)) * float(t_w @ (t_nodes ** 2 * wkern))
    # analytic continuation of the t^2-weighted power law below t_min
    near += -(ell / (2.0 * n)) * float(wkern[0]) * t_nodes[0] ** 2 * t_nodes[0] \
        / max(2.0 - 2.0 * sigma, 0.25)

    # mid/far field through spherical means
    f_r0 = float(np.asarray(f.fn(np.array([r0])), dtype=float).ravel()[0])
    if f.unbounded:
        t_top = 10.0 ** math.ceil(4.8 / sigma)
    else:
        t_top = (f.support or 40.0) + r0 + 5.0
    t_nodes, t_w = log_panels(delta0, t_top, per_decade=16, order=12)
    means = _sphere_means(f.fn, r0, t_nodes, n, n_theta)
    wkern_mid = _weighted_p0(n, sigma, t_nodes)
    mid = float(t_w @ ((f_r0 - means) * wkern_mid))

    far = 0.0
    if not f.unbounded and f_r0 != 0.0:
        far = f_r0 * _p0_weighted_tail(n, sigma, t_top)
    return (near + mid + far) / gamma_abs


def cross_validate_laplacian(f: RadialTestFn, sigma, sample_radii,
                             transform: SphericalTransform):
    """Max deviation between the spectral and integral routes, relative to
    the peak magnitude over the samples."""
    g = transform.rgrid
    fn_vals = np.asarray(f.fn(g.nodes), dtype=float)
    rf = RadialFn(g, fn_vals, float(f.fn(np.array([0.0]))[0]))
    spec = frac_laplacian_spectral(rf, sigma, transform)
    spec_interp = CubicSpline(np.concatenate([[0.0], g.nodes]),
                              np.concatenate([[spec.value_at_origin], spec.values]))
    radii = np.asarray(sample_radii, dtype=float)
    spec_vals = spec_interp(radii)
    int_vals = np.array([
        frac_laplacian_integral(f, sigma, float(r), n=transform.n)
        for r in radii])
    scale = float(np.max(np.abs(spec_vals)))
    if scale == 0.0:
        return {"max_rel_deviation": float(np.max(np.abs(int_vals))),
                "scale": 0.0, "spectral": spec_vals, "integral": int_vals}
    dev = float(np.max(np.abs(spec_vals - int_vals)) / scale)
    return {"max_rel_deviation": dev, "scale": scale,
            "spectral": spec_vals, "integral": int_vals}


# ---------------------------------------------------------------------------
# Shifted norms
# ---------------------------------------------------------------------------

def _shift_multiplier(transform, lam, sigma):
    lam0 = ((transform.n - 1) / 2.0) ** 2
    if not 0.0 <= lam <= lam0:
        raise ValueError(f"lambda must lie in [0, {lam0}], got {lam}")
    return (transform.sgrid.nodes ** 2 + lam0) ** sigma - lam ** sigma


def shifted_norm_sq(f: RadialFn, lam, sigma, transform: SphericalTransform) -> float:
    F = transform.forward(f)
    mult = _shift_multiplier(transform, lam, sigma)
    return float(transform.sgrid.weights @ (mult * F.values ** 2))


def shifted_norm(f: RadialFn, lam, sigma, transform: SphericalTransform) -> float:
    return math.sqrt(max(shifted_norm_sq(f, lam, sigma, transform), 0.0))


def shifted_inner(f_spec, g_spec, lam, sigma, transform) -> float:
    """Inner product in spectral samples (both already transformed)."""
    mult = _shift_multiplier(transform, lam, sigma)
    return float(transform.sgrid.weights @ (mult * f_spec.values * g_spec.values))


# ---------------------------------------------------------------------------
# Double-integral (heat-difference) form of the shifted norm
# ---------------------------------------------------------------------------

def _q_lambda_closed3(sigma, lam, d):
    """int (1 - e^{-t lam}) h_t(d) t^{-1-sigma} dt on n = 3, via Bessel K."""
    d = np.asarray(d, dtype=float)
    nu = 1.5 + sigma
    pref = (d / np.sinh(d)) * (4 * math.pi) ** -1.5 * 2.0 * (d / 2.0) ** (-nu)
    return pref * (kv(nu, d) - (1.0 + lam) ** (nu / 2.0) * kv(
        nu, d * math.sqrt(1.0 + lam)))


def double_integral_norm(f: RadialFn, lam, sigma,
                         n_theta=24, block=64) -> float:
    """Triple-integral evaluation of the squared shifted norm (coarse oracle).

    Cubically expensive by construction; intended for validation on coarse
    grids, not production use.  n = 3 only (closed-form time integrals).
    """
    g = f.grid
    if g.n != 3:
        raise NotImplementedError("double-integral norm implemented for n = 3")
    lam0 = 1.0
    if not 0.0 <= lam <= lam0:
        raise ValueError(f"lambda must lie in [0, {lam0}], got {lam}")
    gamma_abs = math.gamma(1.0 - sigma) / sigma
    ang_const = sphere_area(2) / sphere_area(3)
    c_n = sphere_area(3)
    vals = f.values
    nodes = g.nodes
    spacing = np.gradient(nodes)
    band = spacing  # half-width of the analytically integrated diagonal band
    in_band = np.abs(nodes[:, None] - nodes[None, :]) < band[:, None]
    dvals = test_fn_from_radialfn(f).d1(nodes)

    # pair part outside the band
    p0fun = lambda d: p0_values(3, sigma, np.maximum(d, 1e-14))
    m_p0 = convolution_matrix(p0fun, g)
    diff2 = (vals[:, None] - vals[None, :]) ** 2
    inner = np.where(in_band, 0.0, m_p0 * diff2)
    if lam > 0:
        qfun = lambda d: _q_lambda_closed3(sigma, lam, np.maximum(d, 1e-14))
        m_q = convolution_matrix(qfun, g)
        sq_sum = vals[:, None] ** 2 + vals[None, :] ** 2
        inner = inner - np.where(in_band, 0.0, m_q * sq_sum)
    total = float(g.weights @ (inner @ g.weights))

    # diagonal band, integrated against the cumulative kernels: near the
    # ridge |f(x)-f(y)|^2 ~ f'(r)^2 D^2 meets the D^{-1-2 sigma} tail of the
    # angular P0 integral, which no fixed pair grid resolves
    phi_p = _cumulative_kernel(_kernel_callable(p0fun), 2.0 * g.r_max + 1.0)
    phi_q = _cumulative_kernel(_kernel_callable(qfun), 2.0 * g.r_max + 1.0) \
        if lam > 0 else None
    x8, w8 = leggauss(8)

    def _band_int(phi_fn, power, b):
        edges = b * np.exp(np.linspace(math.log(1e-6), 0.0, 7))
        edges = np.concatenate([[0.0], edges])
        lo = edges[:-1][:, None]
        hi = edges[1:][:, None]
        dn = (0.5 * (hi - lo) * (x8[None, :] + 1.0) + lo).ravel()
        dw = (0.5 * (hi - lo) * w8[None, :]).ravel()
        return float(dw @ (dn ** power * phi_fn(np.maximum(dn, 1e-9))))

    band_total = 0.0
    for i in range(nodes.size):
        b = band[i]
        s_i = 2.0 * nodes[i]
        phi_s = float(np.asarray(phi_p(s_i)))
        contrib = dvals[i] ** 2 * 2.0 * (phi_s * b ** 3 / 3.0 - _band_int(phi_p, 2, b))
        if lam > 0:
            phi_qs = float(np.asarray(phi_q(s_i)))
            contrib -= 2.0 * vals[i] ** 2 * 2.0 * (
                phi_qs * b - _band_int(phi_q, 0, b))
        band_total += g.weights[i] * c_n * ang_const * contrib

    # pairs with one point beyond the grid: the weighted kernel has a slow
    # polynomial tail, so the truncated domain misses 2 ||f||_2^2 times the
    # tail mass (damped by e^{-lam t / 2} when the shift is on, since the
    # kernel difference P0 - Q localizes the time integral near t = d/2)
    t_nodes, t_w = log_panels(g.r_max, max(1e6, 100.0 * g.r_max),
                              per_decade=8, order=8)
    damp = np.exp(-0.5 * lam * t_nodes)
    tail_int = float(t_w @ (p0_weighted3(sigma, t_nodes) * damp))
    if lam == 0.0:
        t_big = float(t_nodes[-1])
        tail_int += 2.0 ** sigma * t_big ** (-sigma) / sigma
    l2_sq = float(g.weights @ vals ** 2)
    tail_total = 2.0 * l2_sq * tail_int
    return (total + band_total + tail_total) / (2.0 * gamma_abs)


# ---------------------------------------------------------------------------
# Admissible decay class
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LsigmaReport:
    integral_value: float
    converged: bool
    tail_fraction: float


def lsigma_membership(f: RadialFn, sigma) -> LsigmaReport:
    """Integral of |f| against (1+r)^{-1-sigma} e^{-(n-1)r} dmu, plus a tail
    extrapolated from the measured log-slope over the outermost decade."""
    g = f.grid
    n = g.n
    factor = (1.0 + g.nodes) ** (-1.0 - sigma) * np.exp(-(n - 1) * g.nodes)
    bulk = float(g.weights @ (np.abs(f.values) * factor))
    # fit the tail decay rate of |f|
    cut = g.nodes >= 0.75 * g.r_max
    rv = g.nodes[cut]
    fv = np.abs(f.values[cut])
    if np.all(fv < 1e-300):
        return LsigmaReport(bulk, True, 0.0)
    fv = np.maximum(fv, 1e-300)
    slope = float(np.polyfit(rv, np.log(fv), 1)[0])
    f_end = float(fv[-1])
    r_end = float(rv[-1])
    if slope > 1e-6:
        return LsigmaReport(math.inf, False, math.inf)
    a = min(slope, 0.0)
    t_nodes, t_w = log_panels(r_end, r_end * 1e6, per_decade=8, order=8)
    dens = sphere_area(n) * 2.0 ** (-(n - 1))  # e^{-(n-1)r} sinh^{n-1} -> const
    tail = f_end * dens * float(t_w @ (np.exp(a * (t_nodes - r_end))
                                       * (1.0 + t_nodes) ** (-1.0 - sigma)))
    total = bulk + tail
    frac = tail / total if total > 0 else 0.0
    return LsigmaReport(total, frac < 1e-8, frac)


# ---------------------------------------------------------------------------
# Contractivity diagnostics
# ---------------------------------------------------------------------------

def abs_and_radialization_contractivity(f: RadialFn, lam, sigma,
                                        transform: SphericalTransform,
                                        angular_factor=None, n_theta=48):
    """Checks that |f| does not increase the shifted norm, and that the
    angular average of a separable surrogate f(r) * Y(theta) contracts.

    In the radial data model the radialization of f * Y is mean(Y) * f, so
    the surrogate check reduces to |mean(Y)| <= sqrt(mean(Y^2)).
    """
    norm_f = shifted_norm(f, lam, sigma, transform)
    absf = RadialFn(f.grid, np.abs(f.values), abs(f.value_at_origin))
    norm_abs = shifted_norm(absf, lam, sigma, transform)
    report = {
        "norm": norm_f,
        "norm_abs": norm_abs,
        "abs_contractive": norm_abs <= norm_f * (1.0 + 1e-12),
    }
    if angular_factor is not None:
        x, w = angle_nodes(transform.n, n_theta)
        y = np.asarray(angular_factor(np.arccos(x)), dtype=float)
        m1 = float(w @ y) / float(np.sum(w))
        m2 = math.sqrt(float(w @ y ** 2) / float(np.sum(w)))
        report["radialized_norm"] = abs(m1) * norm_f
        report["surrogate_norm_bound"] = m2 * norm_f
        report["radialization_contractive"] = abs(m1) <= m2 * (1.0 + 1e-12)
    return report
