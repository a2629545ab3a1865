"""Constructive divergence families for binary alphabets.

Two constructions:

* KL-type distances generated from a nonnegative nondecreasing function h on
  (0, 1/2]: set G(x) = (x-1) h(x) / x there, reflect G(x) = G(1-x) on the
  upper half, and integrate f'(x) = G(x)/x into a quadrature table anchored
  at f(1/2) = 0.  Every valid h yields a divergence with the data-processing
  property; a decreasing h breaks it.
* Bregman divergences generated by a symmetric convex g2 on [0, 1] through
  G(p, 1-p) = g2(p).  These are exactly the binary Bregman divergences that
  are invariant under sufficient transformations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .divergences import (DivergenceError, DivergenceSpec,
                          MultivariateConvexFunction, ScalarFunction)

H_GRID_TOL = 1e-12        # slack for the h >= 0 / nondecreasing grid checks
SYMMETRY_TOL = 1e-12
QUAD_DOMAIN_LO = 1e-9     # f tables are truncated to [lo, 1-lo]
QUAD_TOL = 1e-10
DEFAULT_SAMPLES = 4096


class FamilyError(DivergenceError):
    """Raised when a generator violates the family's invariants."""


# ---------------------------------------------------------------------------
# h generators and the KL-type family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HGenerator:
    """A candidate h on (0, 1/2] plus the quadrature resolution to use.

    `breakpoints` lists interior points where h (or its derivative) has a
    kink; they become table knots so interpolation stays clean across them.
    """

    h: Callable
    label: str = "h"
    samples: int = DEFAULT_SAMPLES
    breakpoints: tuple[float, ...] = ()

    def grid(self) -> np.ndarray:
        return np.geomspace(QUAD_DOMAIN_LO, 0.5, 512)

    def validate(self) -> None:
        x = self.grid()
        v = np.asarray(self.h(x), dtype=float)
        if np.min(v) < -H_GRID_TOL:
            raise FamilyError(f"h({self.label}) is negative: min {np.min(v):.3g}")
        # flat segments are allowed, strict decreases are not
        if np.min(np.diff(v)) < -H_GRID_TOL:
            raise FamilyError(f"h({self.label}) decreases on (0, 1/2]")


def _reflected_G(h: Callable) -> Callable:
    def G(x):
        x = np.asarray(x, dtype=float)
        xl = np.where(x <= 0.5, x, 1.0 - x)
        return (xl - 1.0) * np.asarray(h(xl)) / xl
    return G


def build_G_from_h(gen: HGenerator, validate: bool = True) -> ScalarFunction:
    """G(x) = (x-1) h(x) / x on (0, 1/2], reflected onto [1/2, 1).

    Nonpositive everywhere for valid h.  `validate=False` skips the h
    invariants so that deliberately broken generators can be probed.
    """
    if validate:
        gen.validate()
    return ScalarFunction(_reflected_G(gen.h), domain=(0.0, 1.0),
                          label=f"G[{gen.label}]")


def build_f_from_h(gen: HGenerator, validate: bool = True) -> ScalarFunction:
    """Integrate f'(x) = G(x)/x into a knot table anchored at f(1/2) = 0.

    Knots are geometric in both halves of (0, 1), with declared breakpoints
    (and their reflections) inserted; each gap is integrated with adaptive
    quadrature.  The table interpolates with the exact derivative G(x)/x at
    every knot, and the derivative evaluator returns G(x)/x directly rather
    than differentiating the table.  The reflection at 1/2 generally puts a
    curvature jump there, which is why 1/2 is always a knot.
    """
    G = build_G_from_h(gen, validate=validate)

    def fprime(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(G(x)) / x

    half = gen.samples // 2
    lower = np.geomspace(QUAD_DOMAIN_LO, 0.5, half)
    extra = [0.5]
    for bp in gen.breakpoints:
        if QUAD_DOMAIN_LO < bp < 1.0 - QUAD_DOMAIN_LO:
            extra += [bp, 1.0 - bp]
    knots = np.unique(np.concatenate([lower, 1.0 - lower, extra]))
    anchor = int(np.searchsorted(knots, 0.5))

    scalar_fp = lambda t: float(fprime(t))
    vals = np.zeros_like(knots)
    for i in range(anchor, len(knots) - 1):
        seg, err = quad(scalar_fp, knots[i], knots[i + 1],
                        epsabs=1e-13, epsrel=QUAD_TOL, limit=200)
        if not np.isfinite(seg):
            raise FamilyError(
                f"quadrature diverged on [{knots[i]:.3g}, {knots[i + 1]:.3g}]")
        vals[i + 1] = vals[i] + seg
    for i in range(anchor, 0, -1):
        seg, err = quad(scalar_fp, knots[i - 1], knots[i],
                        epsabs=1e-13, epsrel=QUAD_TOL, limit=200)
        if not np.isfinite(seg):
            raise FamilyError(
                f"quadrature diverged on [{knots[i - 1]:.3g}, {knots[i]:.3g}]")
        vals[i - 1] = vals[i] - seg

    fn = ScalarFunction.from_table(knots, vals, deriv=fprime,
                                   label=f"f[{gen.label}]",
                                   deriv_values=fprime(knots))
    return fn


def kl_type_from_h(gen: HGenerator, validate: bool = True) -> DivergenceSpec:
    """The KL-type divergence generated by h, restricted to binary alphabets."""
    f = build_f_from_h(gen, validate=validate)
    return DivergenceSpec("kl_type", f"kl_type[{gen.label}]", f=f, n=2,
                          source={"family": "kl_type", "h": gen.label},
                          validate=False)


# -- h parsing ---------------------------------------------------------------

# name -> (callable, kink locations on (0, 1/2])
H_CATALOG: dict[str, tuple[Callable, tuple[float, ...]]] = {
    "square": (lambda x: np.square(x), ()),
    "linear": (lambda x: np.asarray(x, dtype=float), ()),
    "kl": (lambda x: x / (1.0 - x), ()),
    "ramp": (lambda x: np.minimum(x, 0.25), (0.25,)),
    "zero": (lambda x: np.zeros_like(np.asarray(x, dtype=float)), ()),
    # invalid on purpose: a decreasing h breaks data processing
    "decreasing": (lambda x: 0.5 - x, ()),
}


def parse_h(text: str) -> tuple[Callable, str, tuple[float, ...]]:
    """Parse an h description: "name:<catalog>", "poly:c0,c1,..." (low-to-high
    coefficients) or "table:<csv path>" with two columns x, h(x)."""
    if ":" not in text:
        raise FamilyError(f"h spec {text!r} must look like name:..., poly:... or table:...")
    kind, _, rest = text.partition(":")
    if kind == "name":
        if rest not in H_CATALOG:
            raise FamilyError(f"unknown h name {rest!r}; known: {', '.join(H_CATALOG)}")
        fn, breaks = H_CATALOG[rest]
        return fn, text, breaks
    if kind == "poly":
        try:
            coeffs = [float(c) for c in rest.split(",")]
        except ValueError as e:
            raise FamilyError(f"bad polynomial coefficients in {text!r}: {e}") from None
        poly = np.polynomial.Polynomial(coeffs)
        return (lambda x: poly(np.asarray(x, dtype=float))), text, ()
    if kind == "table":
        rows = np.loadtxt(rest, delimiter=",", ndmin=2)
        if rows.shape[1] != 2:
            raise FamilyError(f"h table {rest!r} must have two columns x,h(x)")
        xs, hs = rows[:, 0], rows[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise FamilyError("h table x column must be strictly increasing")
        spline = CubicSpline(xs, hs)
        lo, hi = float(xs[0]), float(xs[-1])
        return (lambda x: spline(np.clip(x, lo, hi))), text, ()
    raise FamilyError(f"unknown h spec kind {kind!r}")


def h_generator_from_spec(text: str, samples: int = DEFAULT_SAMPLES) -> HGenerator:
    fn, label, breaks = parse_h(text)
    return HGenerator(fn, label=label, samples=samples, breakpoints=breaks)


def family_table(gen: HGenerator, points: int = 512,
                 validate: bool = True) -> np.ndarray:
    """Columns (x, G(x), f(x)) on an interior grid, ready for plotting."""
    G = build_G_from_h(gen, validate=validate)
    f = build_f_from_h(gen, validate=validate)
    x = np.linspace(0.005, 0.995, points)
    return np.column_stack([x, np.asarray(G(x)), np.asarray(f(x))])


def write_family_csv(gen: HGenerator, path, points: int = 512,
                     validate: bool = True) -> None:
    table = family_table(gen, points=points, validate=validate)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "G", "f"])
        for row in table:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# symmetric convex generators and the binary Bregman family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricConvexG:
    """g2 on [0, 1] with g2(x) = g2(1-x), convex, differentiable inside."""

    g2: Callable
    d_g2: Callable | None = field(default=None)
    label: str = "g2"

    def validate(self) -> None:
        x = np.linspace(0.01, 0.99, 197)
        v = np.asarray(self.g2(x), dtype=float)
        sym = np.max(np.abs(v - np.asarray(self.g2(1.0 - x))))
        if sym > SYMMETRY_TOL:
            raise FamilyError(f"g2({self.label}) asymmetric by {sym:.3g}")
        mid = 0.5 * (x[:-1] + x[1:])
        gap = 0.5 * (v[:-1] + v[1:]) - np.asarray(self.g2(mid))
        if np.min(gap) < -H_GRID_TOL:
            raise FamilyError(f"g2({self.label}) fails midpoint convexity")
        self._check_differentiable(x)

    def _check_differentiable(self, _: np.ndarray) -> None:
        # compare one-sided slopes at the same point: for smooth g2 the
        # left/right gap shrinks linearly with the stencil, at a kink it stays
        x = np.linspace(0.02, 0.98, 961)

        def onesided_gap(h):
            v = np.asarray(self.g2(x))
            right = (np.asarray(self.g2(x + h)) - v) / h
            left = (v - np.asarray(self.g2(x - h))) / h
            return np.abs(right - left)

        coarse = onesided_gap(2e-3)
        fine = onesided_gap(2e-4)
        scale = max(1.0, float(np.max(np.abs(self.derivative(x)))))
        kink = (fine > 0.3 * coarse) & (fine > 1e-3 * scale)
        if np.any(kink):
            k = int(np.argmax(np.where(kink, fine, -np.inf)))
            raise FamilyError(
                f"g2({self.label}) has a derivative jump near x={x[k]:.4g}; "
                "the generator must be differentiable on the interior")

    def derivative(self, x):
        if self.d_g2 is not None:
            return np.asarray(self.d_g2(np.asarray(x, dtype=float)))
        h = 1e-6
        x = np.asarray(x, dtype=float)
        return (np.asarray(self.g2(x + h)) - np.asarray(self.g2(x - h))) / (2 * h)


def bregman_from_symmetric_g(g: SymmetricConvexG, validate: bool = True) -> DivergenceSpec:
    """Binary Bregman divergence with G(p, 1-p) = g2(p)."""
    if validate:
        g.validate()

    def value(P):
        P = np.asarray(P, dtype=float)
        return np.asarray(g.g2(P[..., 0]))

    def grad(Q):
        Q = np.asarray(Q, dtype=float)
        out = np.zeros_like(Q)
        out[..., 0] = g.derivative(Q[..., 0])
        return out

    G = MultivariateConvexFunction(value, grad=grad, label=f"G[{g.label}]", n=2)
    return DivergenceSpec("bregman", f"bregman[{g.label}]", G=G, n=2,
                          validate=False)


def random_symmetric_convex_g(rng: np.random.Generator) -> SymmetricConvexG:
    """A random positive combination of smooth symmetric convex basis terms."""
    c_quad = rng.uniform(0.1, 3.0)
    c_quart = rng.uniform(0.0, 2.0)
    c_cosh = rng.uniform(0.0, 1.0)
    rate = rng.uniform(1.0, 4.0)
    c_ent = rng.uniform(0.0, 1.0)

    def g2(x):
        x = np.asarray(x, dtype=float)
        u = x - 0.5
        ent = np.where((x > 0) & (x < 1),
                       x * np.log(np.clip(x, 1e-300, None))
                       + (1 - x) * np.log(np.clip(1 - x, 1e-300, None)),
                       0.0)
        return (c_quad * u ** 2 + c_quart * u ** 4
                + c_cosh * np.cosh(rate * u) + c_ent * ent)

    def d_g2(x):
        x = np.asarray(x, dtype=float)
        u = x - 0.5
        ent = np.log(np.clip(x, 1e-300, None)) - np.log(np.clip(1 - x, 1e-300, None))
        return (2 * c_quad * u + 4 * c_quart * u ** 3
                + c_cosh * rate * np.sinh(rate * u) + c_ent * ent)

    label = f"rand[{c_quad:.3f},{c_quart:.3f},{c_cosh:.3f},{rate:.3f},{c_ent:.3f}]"
    return SymmetricConvexG(g2, d_g2=d_g2, label=label)
