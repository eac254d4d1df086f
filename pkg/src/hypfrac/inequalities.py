"""Numerical verification of the fractional Poincare-type inequality and
the multiplier comparisons behind it.

The central quantity is the quotient ||u||_{lambda,sigma}^2 / ||u||_q^2
over families of radial test functions, for 2 < q <= 2n/(n - 2 sigma);
the inequality asserts a positive lower bound (with lambda = lambda0 the
strongest case).  The constant is existential, so runs report empirical
minima labelled as lower-envelope estimates, never sharp values.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .fraclap import shifted_norm_sq
from .spectral import ModelParams, RadialFn, SphericalTransform

__all__ = [
    "QuotientSample",
    "poincare_quotient",
    "test_family",
    "family_hash",
    "estimate_best_constant",
    "compare_shift_orders",
    "multiplier_equivalence_check",
    "write_quotient_csv",
]


@dataclass(frozen=True)
class QuotientSample:
    family_id: str
    fn_id: str
    q: float
    sigma: float
    lam: float
    quotient: float


def _check_q(n, sigma, q):
    top = 2.0 * n / (n - 2.0 * sigma)
    if not 2.0 < q <= top:
        raise ValueError(f"exponent q must lie in (2, {top}], got {q}")


def poincare_quotient(u: RadialFn, q, sigma, lam,
                      transform: SphericalTransform) -> float:
    """||u||_{lam,sigma}^2 / ||u||_q^2; scale invariant and positive for
    nonzero u in the admissible range of q."""
    _check_q(transform.n, sigma, q)
    if u.sup_norm() == 0.0:
        raise ValueError("quotient undefined for the zero function")
    nsq = shifted_norm_sq(u, lam, sigma, transform)
    return nsq / u.lq_norm(q) ** 2


def test_family(transform: SphericalTransform, seed=1234, size=100):
    """The declared quotient test family: plain bumps over seven dyadic
    widths, translated profiles, oscillatory bumps, and seeded two-atom
    combinations, exactly `size` members."""
    nodes = transform.rgrid.nodes
    fns = []

    def add(tag, values):
        origin = float(values[0])
        fns.append((tag, RadialFn(transform.rgrid, values, origin)))

    for k in range(-3, 4):
        w = 2.0 ** k
        add(f"bump_w{w:g}", np.exp(-((nodes / w) ** 2)))
    for c in (0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 8.0):
        for w in (0.5, 1.0, 2.0, 3.0):
            add(f"shift_c{c:g}_w{w:g}", np.exp(-(((nodes - c) / w) ** 2)))
    for w in (0.5, 1.0, 2.0, 4.0, 8.0):
        for a in (0.5, 1.0, 2.0, 4.0, 8.0):
            add(f"osc_w{w:g}_a{a:g}",
                np.exp(-((nodes / w) ** 2)) * np.cos(a * nodes))
    rng = np.random.default_rng(seed)
    while len(fns) < size:
        c1, c2 = rng.normal(size=2)
        w1, w2 = rng.uniform(0.4, 4.0, size=2)
        s1, s2 = rng.uniform(0.0, 5.0, size=2)
        vals = c1 * np.exp(-(((nodes - s1) / w1) ** 2)) \
            + c2 * np.exp(-(((nodes - s2) / w2) ** 2))
        add(f"atoms_{len(fns)}", vals)
    return fns[:size]


def family_hash(fns) -> str:
    h = hashlib.sha256()
    for tag, f in fns:
        h.update(tag.encode())
        h.update(np.ascontiguousarray(f.values).tobytes()[:256])
    return h.hexdigest()[:16]


def estimate_best_constant(fns, q, sigma, lam, transform):
    """Minimum quotient over a family (an empirical lower envelope of the
    inequality's constant, reported with the family hash)."""
    if not fns:
        raise ValueError("family must be nonempty")
    samples = []
    for tag, f in fns:
        samples.append(QuotientSample(
            family_id=family_hash(fns), fn_id=tag, q=q, sigma=sigma, lam=lam,
            quotient=poincare_quotient(f, q, sigma, lam, transform)))
    best = min(s.quotient for s in samples)
    return best, samples


def compare_shift_orders(u: RadialFn, sigma, transform: SphericalTransform):
    """Norms under the two shift orders: ||(Delta - lambda0)^{sigma/2} u||
    versus ||(Delta^sigma - lambda0^sigma)^{1/2} u||.

    The first dominates the second pointwise on multipliers (subadditivity
    of s -> s^sigma), so the forward ratio is at least one; the reverse
    ratio degrades for data concentrated at the bottom of the spectrum,
    where the multipliers scale as xi^{2 sigma} versus xi^2.
    """
    lam0 = ((transform.n - 1) / 2.0) ** 2
    F = transform.forward(u)
    xi = transform.sgrid.nodes
    w = transform.sgrid.weights
    outer = float(w @ (xi ** (2.0 * sigma) * F.values ** 2))
    inner = float(w @ (((xi ** 2 + lam0) ** sigma - lam0 ** sigma)
                       * F.values ** 2))
    ratio = math.sqrt(outer / inner) if inner > 0 else math.inf
    return {
        "outer_norm": math.sqrt(outer),
        "inner_norm": math.sqrt(inner),
        "ratio": ratio,
        "reverse_ratio": 1.0 / ratio if ratio > 0 else math.inf,
    }


def multiplier_equivalence_check(lam, sigma, lam0, xi=None):
    """Bounded-ratio checks of (xi^2 + lambda0)^sigma - lambda^sigma
    against its three reference regimes."""
    if xi is None:
        xi = np.concatenate([np.logspace(-3, 0, 25), np.logspace(0, 3, 25)])
    xi = np.asarray(xi, dtype=float)
    mult = (xi ** 2 + lam0) ** sigma - lam ** sigma
    report = {}
    hi = xi >= 1.0
    if np.any(hi):
        r = mult[hi] / xi[hi] ** (2.0 * sigma)
        report["high"] = (float(r.min()), float(r.max()))
    lo = xi <= 1.0
    if np.any(lo):
        if lam == lam0:
            r = mult[lo] / xi[lo] ** 2
        else:
            r = mult[lo] / 1.0
        report["low"] = (float(r.min()), float(r.max()))
    return report


def write_quotient_csv(samples, path, header_lines=()):
    cols = ("familyId", "fnId", "q", "sigma", "lambda", "quotient")
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for s in samples:
            fh.write(",".join([
                s.family_id, s.fn_id,
                format(s.q, ".17g"), format(s.sigma, ".17g"),
                format(s.lam, ".17g"), format(s.quotient, ".17g"),
            ]) + "\n")
