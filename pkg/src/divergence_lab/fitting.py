"""Representability probes: is a binary divergence expressible in the
f-divergence form, or in the Bregman form, up to fitting residual?

Both probes solve a shape-constrained least-squares problem over the values
of a piecewise-linear convex function on a knot grid.  Feasibility is kept
at every iterate by parameterizing with segment slopes and projecting onto
nondecreasing slope sequences with pool-adjacent-violators, which is exactly
the convexity constraint on second differences.  A regularized linear solve
provides the starting point; an accelerated projected-gradient loop with a
monotone best-iterate record does the constrained polish.  numpy/scipy only,
no external solver.

The pass/fail threshold is scale-free (residual against the root-mean-square
of the divergence over the sample set) and is surfaced in every result
rather than hidden: it is an artifact choice, not a theorem.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .divergences import DivergenceSpec, MultivariateConvexFunction, ScalarFunction

CONVEXITY_SLACK = 1e-10          # allowed dip in fitted second differences
MAX_ITERS = 10_000
REL_IMPROVEMENT = 1e-12          # stop when the best objective stalls
STALL_WINDOW = 300
PASS_SCALE = 1e-5                # passed iff residual <= PASS_SCALE * rms(D)
SAMPLE_LO, SAMPLE_HI = 0.05, 0.95
RATIO_LO, RATIO_HI = 0.05, 20.0


def pav_nondecreasing(y: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Project a sequence onto nondecreasing sequences (pool adjacent violators).

    With weights this is the projection in the diag(w) norm, which is what
    the preconditioned gradient steps need.
    """
    if w is None:
        w = np.ones(len(y))
    vals: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for yi, wi in zip(y, w):
        v, ww, c = float(yi), float(wi), 1
        while vals and vals[-1] > v:
            pv, pw, pc = vals.pop(), wts.pop(), counts.pop()
            v = (v * ww + pv * pw) / (ww + pw)
            ww += pw
            c += pc
        vals.append(v)
        wts.append(ww)
        counts.append(c)
    out = np.empty(len(y))
    i = 0
    for v, c in zip(vals, counts):
        out[i:i + c] = v
        i += c
    return out


@dataclass
class ConvexPiecewiseLinearFit:
    """A fitted convex piecewise-linear function plus fit diagnostics.

    `objective_history` is the best objective seen after each iteration and
    is nonincreasing by construction.
    """

    knots: np.ndarray
    values: np.ndarray
    residual: float               # rms fit error over the sample set
    rms_target: float             # rms of the divergence over the sample set
    threshold: float
    passed: bool
    iterations: int
    objective_history: np.ndarray = field(repr=False, default=None)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.knots, self.values)

    def slope_at(self, x):
        """Derivative from knot slopes, interpolated between segment midpoints."""
        slopes = np.diff(self.values) / np.diff(self.knots)
        mids = 0.5 * (self.knots[:-1] + self.knots[1:])
        return np.interp(np.asarray(x, dtype=float), mids, slopes)

    def summary(self) -> dict:
        return {"residual": float(self.residual),
                "passed": bool(self.passed),
                "threshold": float(self.threshold),
                "rms_target": float(self.rms_target),
                "iterations": int(self.iterations)}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["knot", "value"])
            for k, v in zip(self.knots, self.values):
                w.writerow([repr(float(k)), repr(float(v))])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# shared constrained least-squares machinery
# ---------------------------------------------------------------------------

class _SlopeParam:
    """Values as cumulative sums of slopes, pinned to 0 at one knot."""

    def __init__(self, knots: np.ndarray, pin: int):
        self.dx = np.diff(knots)
        self.pin = pin
        self.K = len(knots)

    def values(self, s: np.ndarray) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(s * self.dx)])
        return c - c[self.pin]

    def grad_slopes(self, gv: np.ndarray) -> np.ndarray:
        # adjoint of values(): gv is a gradient w.r.t. knot values
        w = gv.copy()
        w[self.pin] -= gv.sum()
        rc = np.cumsum(w[::-1])[::-1]
        return self.dx * rc[1:]


def _warm_start(A: sp.csr_matrix, y: np.ndarray, knots: np.ndarray, pin: int):
    """Regularized least squares in value space, then slope projection.

    A deterministic ladder of smoothness weights is tried and the feasible
    point with the smallest residual wins.
    """
    K = len(knots)
    par = _SlopeParam(knots, pin)
    AtA = (A.T @ A).tocsc()
    Aty = A.T @ y
    scale = max(float(AtA.diagonal().max()), 1e-300)
    D2 = sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(K - 2, K))
    R = (D2.T @ D2).tocsc()
    best_s, best_rms = np.zeros(K - 1), np.inf
    for lam in (1e-4, 1e-6, 1e-8):
        M = (AtA + lam * scale * R + 1e-14 * scale * sp.eye(K)).tocsc()
        try:
            v0 = spla.spsolve(M, Aty)
        except RuntimeError:
            continue
        if not np.all(np.isfinite(v0)):
            continue
        s0 = pav_nondecreasing(np.diff(v0) / par.dx)
        rms = float(np.sqrt(np.mean((A @ par.values(s0) - y) ** 2)))
        if rms < best_rms:
            best_s, best_rms = s0, rms
    return best_s


def _slope_column_weights(A: sp.csr_matrix, dx: np.ndarray, pin: int) -> np.ndarray:
    """Squared column norms of the slope-space design, without forming it.

    The column for slope j is dx_j * (sum of A's knot columns above j), minus
    the row sums when j sits below the pinned knot.  Per-row prefix sums over
    the sparse structure give every norm in O(nnz + K).
    """
    K = A.shape[1]
    coo = A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    r, c, v = coo.row[order], coo.col[order], coo.data[order]
    cs = np.cumsum(v)
    new_row = np.concatenate([[True], r[1:] != r[:-1]])
    base_candidates = np.concatenate([[0.0], cs[:-1]])
    first_idx = np.maximum.accumulate(np.where(new_row, np.arange(v.size), 0))
    row_base = base_candidates[first_idx]
    prefix_after = cs - row_base                     # row prefix incl. current nnz
    prefix_before = prefix_after - v
    totals = np.zeros(A.shape[0])
    np.add.at(totals, r, v)
    # ||C_j||^2 with C_j = sum of columns <= j, via difference arrays over j
    d_sq = np.zeros(K)
    np.add.at(d_sq, c, prefix_after ** 2 - prefix_before ** 2)
    C2 = np.cumsum(d_sq)
    d_cross = np.zeros(K)
    np.add.at(d_cross, c, totals[r] * v)
    TC = np.cumsum(d_cross)                          # sum_rows total * C_j
    TT = float(np.sum(totals ** 2))
    j = np.arange(K - 1)
    col_sq = np.where(j < pin, C2[j], TT - 2 * TC[j] + C2[j])
    w = dx ** 2 * np.maximum(col_sq, 0.0)
    return np.maximum(w, 1e-12 * max(float(w.max()), 1e-300))


def _fit_convex(A: sp.csr_matrix, y: np.ndarray, knots: np.ndarray, pin: int,
                iters: int = MAX_ITERS):
    """Accelerated, diagonally preconditioned projected gradient over slopes.

    The PAV projection runs in the preconditioner's metric, so every iterate
    is feasible (nondecreasing slopes, i.e. nonnegative second differences).
    """
    m, K = A.shape
    par = _SlopeParam(knots, pin)

    def objective(s):
        r = A @ par.values(s) - y
        return 0.5 * float(r @ r), r

    w = _slope_column_weights(A, par.dx, pin)
    winv = 1.0 / w
    sqrt_winv = np.sqrt(winv)
    # Lipschitz constant in the preconditioned metric via power iteration
    z = np.ones(K - 1) + 1e-3 * np.sin(np.arange(K - 1))
    nz = 1.0
    for _ in range(60):
        z2 = sqrt_winv * par.grad_slopes(A.T @ (A @ par.values(sqrt_winv * z)))
        nz = float(np.linalg.norm(z2))
        if nz == 0:
            break
        z = z2 / nz
    L = max(nz * 1.01, 1e-300)

    s = _warm_start(A, y, knots, pin)
    s_prev = s.copy()
    tk = 1.0
    f_best, _ = objective(s)
    s_best = s.copy()
    history = [f_best]
    it = 0
    while it < iters:
        it += 1
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        yk = s + ((tk - 1.0) / t_next) * (s - s_prev)
        _, ry = objective(yk)
        gy = par.grad_slopes(A.T @ ry)
        s_new = pav_nondecreasing(yk - winv * gy / L, w)
        f_new, _ = objective(s_new)
        if f_new < f_best:
            f_best, s_best = f_new, s_new.copy()
        s_prev, s, tk = s, s_new, t_next
        history.append(f_best)
        if len(history) > STALL_WINDOW:
            if history[-STALL_WINDOW - 1] - history[-1] \
                    < REL_IMPROVEMENT * max(history[-1], 1e-30):
                break
    v = par.values(s_best)
    rms = float(np.sqrt(np.mean((A @ v - y) ** 2)))
    return v, rms, it, np.asarray(history)


def _sample_pairs(sample_pairs: int, seed: int):
    rng = np.random.default_rng(seed)
    p = rng.uniform(SAMPLE_LO, SAMPLE_HI, sample_pairs)
    q = rng.uniform(SAMPLE_LO, SAMPLE_HI, sample_pairs)
    return p, q


def _binary_values(d: DivergenceSpec, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    P = np.column_stack([p, 1.0 - p])
    Q = np.column_stack([q, 1.0 - q])
    return d.evaluate_batch(P, Q)


def _interp_entries(x, knots, weights, m):
    j = np.clip(np.searchsorted(knots, x) - 1, 0, len(knots) - 2)
    t = (x - knots[j]) / (knots[j + 1] - knots[j])
    rows = np.concatenate([np.arange(m), np.arange(m)])
    cols = np.concatenate([j, j + 1])
    data = np.concatenate([weights * (1 - t), weights * t])
    return rows, cols, data


# ---------------------------------------------------------------------------
# the two probes
# ---------------------------------------------------------------------------

def fit_f_divergence(d: DivergenceSpec, sample_pairs: int = 4000,
                     knots: int = 2001, seed: int = 0,
                     iters: int = MAX_ITERS) -> ConvexPiecewiseLinearFit:
    """Least-squares fit of q f(p/q) + (1-q) f((1-p)/(1-q)) to d on binary pairs.

    f is convex piecewise-linear on a geometric ratio grid with a knot pinned
    to f(1) = 0.  Sample pairs keep p, q in [0.05, 0.95] so infinite or huge
    divergence values cannot dominate the least squares.  On binary alphabets
    the form is blind to multiples of (x - 1), so fitted values are only
    determined modulo that direction.
    """
    p, q = _sample_pairs(sample_pairs, seed)
    y = _binary_values(d, p, q)
    grid = np.geomspace(RATIO_LO, RATIO_HI, knots)
    pin = knots // 2
    grid[pin] = 1.0  # geometric center of [0.05, 20]; pin exactly
    m = sample_pairs
    parts = [_interp_entries(p / q, grid, q, m),
             _interp_entries((1 - p) / (1 - q), grid, 1 - q, m)]
    rows = np.concatenate([pr[0] for pr in parts])
    cols = np.concatenate([pr[1] for pr in parts])
    data = np.concatenate([pr[2] for pr in parts])
    A = sp.csr_matrix((data, (rows, cols)), shape=(m, knots))
    v, rms, it, hist = _fit_convex(A, y, grid, pin, iters)
    rms_target = float(np.sqrt(np.mean(y ** 2)))
    thr = PASS_SCALE * rms_target
    return ConvexPiecewiseLinearFit(grid, v, rms, rms_target, thr, rms <= thr,
                                    it, hist)


def fit_bregman_binary(d: DivergenceSpec, sample_pairs: int = 4000,
                       knots: int = 801, seed: int = 0,
                       iters: int = MAX_ITERS) -> ConvexPiecewiseLinearFit:
    """Least-squares fit of g2(p) - g2(q) - g2'(q)(p-q) to d on binary pairs.

    g2 is convex piecewise-linear on a uniform grid; its derivative comes
    from the knot slopes, interpolated between segment midpoints.  The
    Bregman form is blind to affine parts of g2, so fitted values are only
    meaningful up to an affine offset.
    """
    p, q = _sample_pairs(sample_pairs, seed)
    y = _binary_values(d, p, q)
    grid = np.linspace(SAMPLE_LO - 0.01, SAMPLE_HI + 0.01, knots)
    pin = knots // 2
    m = sample_pairs
    mids = 0.5 * (grid[:-1] + grid[1:])
    dx = np.diff(grid)

    rows_l, cols_l, data_l = [], [], []

    def add(rows, cols, data):
        rows_l.append(rows); cols_l.append(cols); data_l.append(data)

    add(*_interp_entries(p, grid, np.ones(m), m))
    add(*_interp_entries(q, grid, -np.ones(m), m))
    # -g2'(q)(p-q): slopes of the two segments around q, midpoint-interpolated
    jq = np.clip(np.searchsorted(mids, q) - 1, 0, knots - 3)
    tq = np.clip((q - mids[jq]) / (mids[jq + 1] - mids[jq]), 0.0, 1.0)
    w = -(p - q)
    for seg, frac in ((jq, 1.0 - tq), (jq + 1, tq)):
        add(np.arange(m), seg, -w * frac / dx[seg])
        add(np.arange(m), seg + 1, w * frac / dx[seg])
    A = sp.csr_matrix((np.concatenate(data_l),
                       (np.concatenate(rows_l), np.concatenate(cols_l))),
                      shape=(m, knots))
    v, rms, it, hist = _fit_convex(A, y, grid, pin, iters)
    rms_target = float(np.sqrt(np.mean(y ** 2)))
    thr = PASS_SCALE * rms_target
    return ConvexPiecewiseLinearFit(grid, v, rms, rms_target, thr, rms <= thr,
                                    it, hist)


def bregman_f_residual(G: MultivariateConvexFunction, f: ScalarFunction,
                       grid: int = 200) -> float:
    """Max interior-grid residual of the identity linking a binary Bregman
    generator with an f-divergence generator:

        h(p) - h(q) - h'(q)(p-q) = q f(p/q) + (1-q) f((1-p)/(1-q))

    where h(p) = G((p, 1-p)).  Zero residual (within rounding) means the two
    describe the same divergence.
    """
    x = np.linspace(1.0 / (grid + 1), grid / (grid + 1.0), grid)
    P, Q = np.meshgrid(x, x, indexing="ij")
    rows_p = np.column_stack([P.ravel(), 1.0 - P.ravel()])
    rows_q = np.column_stack([Q.ravel(), 1.0 - Q.ravel()])
    h_p = np.asarray(G.value(rows_p))
    h_q = np.asarray(G.value(rows_q))
    gq = np.asarray(G.gradient(rows_q))
    hprime_q = gq[:, 0] - gq[:, 1]  # d/dp of G((p,1-p))
    breg = h_p - h_q - hprime_q * (P.ravel() - Q.ravel())
    fdiv = (Q.ravel() * np.asarray(f(P.ravel() / Q.ravel()))
            + (1 - Q.ravel()) * np.asarray(f((1 - P.ravel()) / (1 - Q.ravel()))))
    return float(np.max(np.abs(breg - fdiv)))
