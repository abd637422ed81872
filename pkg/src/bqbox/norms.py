r"""Lorentz and Morrey-Lorentz norms via decreasing rearrangement.

The Lorentz functional is built from the averaged rearrangement
f**(t) = (1/t) int_0^t f*(s) ds of the decreasing rearrangement f*:

    ||f||_{p,q} = [ int_0^inf (t^{1/p} f**(t))^q dt/t ]^{1/q}     (q < inf)
    ||f||_{p,inf} = sup_t t^{1/p} f**(t)

On the grid f* is a step function over cells of equal measure w, so f** is
piecewise  (A + v t)/t  and the q < inf integral is evaluated segment by
segment: in closed form where A or v vanishes (this covers indicator fields
exactly) and by Gauss-Legendre quadrature elsewhere, with the analytic tail
beyond the total measure added in closed form.

The Morrey-Lorentz norm localizes this over balls:

    ||f||_{p,q,lam} = sup_{x0, rho} rho^{-lam/p} ||f||_{L^{p,q}(D(x0, rho))}

with balls taken in the torus metric.  The sup is lower-bounded by a
stratified sampler (grid-aligned centers x geometric radius ladder); the
estimate is monotone under sampler refinement.  For lam = 0 the whole box is
included as a candidate region, where the sup is exact.

Norm evaluations are pure functions of immutable fields; individual ball
evaluations are independent and the final sup is an associative reduction,
so callers may parallelize freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DiagnosticsError, HypothesisError
from .grid import ScalarField, State, TensorField, VectorField

INF = float("inf")


@dataclass(frozen=True)
class NormParams:
    """A Morrey-Lorentz index triple (p, q, lam); q defaults to infinity."""

    p: float
    q: float = INF
    lam: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise HypothesisError(f"primary exponent p must exceed 1, got {self.p}")
        if not self.q >= 1:
            raise HypothesisError(f"secondary exponent q must be >= 1, got {self.q}")
        if self.p == INF and self.q != INF:
            raise HypothesisError("q must be infinity when p is infinity")
        if self.lam < 0:
            raise HypothesisError(f"Morrey exponent lam must be >= 0, got {self.lam}")

    def tau(self, n):
        """Scaling exponent tau = (n - lam)/p."""
        if self.lam >= n:
            raise HypothesisError(f"need lam < n, got lam={self.lam} with n={n}")
        return (n - self.lam) / self.p


@dataclass(frozen=True)
class TimeWeightParams:
    """Weight t^beta with beta = 1 - p/(2b); requires b > p/2 so beta in (0,1)."""

    p: float
    b: float

    def __post_init__(self):
        if not self.b > self.p / 2:
            raise HypothesisError(f"need b > p/2, got b={self.b}, p={self.p}")

    @property
    def beta(self):
        return 1.0 - self.p / (2.0 * self.b)


@dataclass(frozen=True)
class BallSampler:
    """Stratified sampling of ball centers and radii for the Morrey sup.

    Centers are grid-aligned, one per stratum (optionally jittered inside
    the stratum by a seeded counter-based generator).  Radii form a
    geometric ladder in [2*cell, L/2] unless given explicitly.
    """

    num_centers: int = 64
    num_radii: int = 12
    rho_min: float | None = None
    rho_max: float | None = None
    radii_list: tuple | None = None
    jitter_seed: int | None = None

    def radii(self, grid):
        if self.radii_list is not None:
            radii = np.asarray(self.radii_list, dtype=float)
        else:
            lo = self.rho_min if self.rho_min is not None else 2.0 * grid.cell_size
            hi = self.rho_max if self.rho_max is not None else grid.L / 2.0
            if self.num_radii == 1:
                radii = np.array([hi])
            else:
                radii = lo * (hi / lo) ** (np.arange(self.num_radii) / (self.num_radii - 1))
        if np.any(radii <= 0):
            raise DiagnosticsError("ball radii must be positive")
        if np.max(radii) > grid.L / 2.0 + 1e-12:
            raise DiagnosticsError(
                f"largest ball radius {np.max(radii):.6g} exceeds L/2 = {grid.L / 2:.6g}"
            )
        return radii

    def centers(self, grid):
        """Array of center grid indices, shape (C, n)."""
        m = max(1, round(self.num_centers ** (1.0 / grid.n)))
        base = (np.arange(m) * grid.N) // m
        axes = np.meshgrid(*([base] * grid.n), indexing="ij")
        centers = np.stack([a.ravel() for a in axes], axis=1)
        if self.jitter_seed is not None:
            rng = np.random.Generator(np.random.Philox(self.jitter_seed))
            jitter = rng.integers(0, max(1, grid.N // m), size=centers.shape)
            centers = (centers + jitter) % grid.N
        return centers


@lru_cache(maxsize=512)
def _ball_offsets(n, N, L, rho):
    """Index offsets of cells within torus distance rho of a grid point."""
    h = L / N
    half = np.arange(N)
    disp = (half + N // 2) % N - N // 2  # min-image integer offsets
    axes = np.meshgrid(*([disp] * n), indexing="ij")
    dist2 = sum((a * h) ** 2 for a in axes)
    inside = dist2 <= rho * rho + 1e-12 * h * h
    offsets = np.stack([a[inside] for a in axes], axis=1)
    return offsets


def _gather_ball_values(grid, flat_values, centers, rho):
    offsets = _ball_offsets(grid.n, grid.N, grid.L, float(rho))
    idx = (centers[:, np.newaxis, :] + offsets[np.newaxis, :, :]) % grid.N
    strides = np.array([grid.N ** (grid.n - 1 - j) for j in range(grid.n)], dtype=np.int64)
    flat_idx = np.sum(idx * strides, axis=2)
    return flat_values[flat_idx]  # (C, m)


# ---------------------------------------------------------------------------
# Lorentz functional on a sorted sample
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _weak_norm_rows(sorted_desc, w, p):
    """t^{1/p} f**(t) maximized over step endpoints, one value per row."""
    if p == INF:
        return sorted_desc[:, 0]
    m = sorted_desc.shape[1]
    S = np.cumsum(sorted_desc, axis=1) * w
    t = (np.arange(1, m + 1) * w) ** (1.0 / p - 1.0)
    return np.max(S * t[np.newaxis, :], axis=1)


def _lorentz_q_finite(sorted_desc, w, p, q):
    """Segment-exact evaluation of the q < inf Lorentz integral for one sample."""
    v = sorted_desc
    M = v.shape[0]
    t = np.arange(M + 1) * w
    S = np.concatenate([[0.0], np.cumsum(v) * w])
    total = S[-1]
    if total == 0.0:
        return 0.0
    a = q / p
    A = S[:-1] - v * t[:-1]
    acc = 0.0

    # proportional segments: |A| negligible against v*t on the segment
    prop = np.abs(A) <= 1e-12 * np.maximum(v * np.maximum(t[:-1], w), 0.0)
    prop[0] = True  # t_0 = 0 forces A_0 = 0
    flat = v <= 0.0
    general = ~(prop | flat)

    if np.any(prop & ~flat):
        i = np.nonzero(prop & ~flat)[0]
        acc += np.sum(v[i] ** q * (t[i + 1] ** a - t[i] ** a) / a)
    if np.any(flat):
        i = np.nonzero(flat & (A > 0))[0]
        e = a - q  # < 0 for p > 1
        acc += np.sum(A[i] ** q * (t[i + 1] ** e - t[i] ** e) / e)
    if np.any(general):
        i = np.nonzero(general)[0]
        t1, t2 = t[i], t[i + 1]
        mid = 0.5 * (t1 + t2)
        halfw = 0.5 * (t2 - t1)
        nodes = mid[:, np.newaxis] + halfw[:, np.newaxis] * _GL_NODES[np.newaxis, :]
        integrand = nodes ** (a - q - 1.0) * (A[i][:, np.newaxis] + v[i][:, np.newaxis] * nodes) ** q
        acc += np.sum(halfw * np.sum(integrand * _GL_WEIGHTS[np.newaxis, :], axis=1))

    # tail beyond total measure: f** = total/t, integrand total^q t^{a-q-1}
    e = a - q
    acc += -(total**q) * t[-1] ** e / e
    return acc ** (1.0 / q)


def _lorentz_from_values(values, w, p, q):
    v = np.sort(np.abs(np.asarray(values, dtype=float).ravel()))[::-1]
    if v.size == 0:
        raise DiagnosticsError("Lorentz norm of an empty region")
    if v[0] == 0.0:
        return 0.0
    if q == INF:
        return float(_weak_norm_rows(v[np.newaxis, :], w, p)[0])
    if p == INF:
        raise HypothesisError("q must be infinity when p is infinity")
    return float(_lorentz_q_finite(v, w, p, q))


def _as_scalar_values(f):
    if isinstance(f, ScalarField):
        return f.values
    if isinstance(f, (VectorField, TensorField)):
        return f.magnitude.values
    raise DiagnosticsError(f"cannot take a norm of {type(f).__name__}")


def lorentz_norm(f, p, q=INF, region=None):
    """Lorentz L^{p,q} norm of a field over the whole box or a torus ball.

    ``region`` is either None (whole box) or a pair (center, radius) with
    the center given in coordinates.
    """
    if not p > 1:
        raise HypothesisError(f"Lorentz norm needs p > 1, got {p}")
    grid = f.grid
    values = _as_scalar_values(f)
    if region is None:
        sample = values.ravel()
    else:
        center, rho = region
        cidx = np.array(
            [[int(round(c / grid.cell_size)) % grid.N for c in center]], dtype=np.int64
        )
        sample = _gather_ball_values(grid, values.ravel(), cidx, rho)[0]
    return _lorentz_from_values(sample, grid.cell_volume, p, q)


# ---------------------------------------------------------------------------
# Morrey-Lorentz norm
# ---------------------------------------------------------------------------


@dataclass
class BallNormRow:
    center: tuple
    radius: float
    local_norm: float  # rho^{-lam/p} * local Lorentz norm


def morrey_lorentz_table(f, params: NormParams, sampler: BallSampler):
    """Per-(center, radius) localized norms; the sup is the Morrey estimate."""
    grid = f.grid
    params.tau(grid.n)  # validates lam < n
    values = _as_scalar_values(f).ravel()
    w = grid.cell_volume
    centers = sampler.centers(grid)
    rows = []
    for rho in sampler.radii(grid):
        weight = float(rho) ** (-params.lam / params.p)
        gathered = _gather_ball_values(grid, values, centers, rho)
        if params.q == INF:
            sorted_desc = -np.sort(-np.abs(gathered), axis=1)
            local = _weak_norm_rows(sorted_desc, w, params.p) * weight
            for ci, val in enumerate(local):
                rows.append(BallNormRow(tuple(centers[ci] * grid.cell_size), float(rho), float(val)))
        else:
            for ci in range(centers.shape[0]):
                val = _lorentz_from_values(gathered[ci], w, params.p, params.q) * weight
                rows.append(BallNormRow(tuple(centers[ci] * grid.cell_size), float(rho), float(val)))
    if params.lam == 0.0:
        # the sup over arbitrarily large balls reduces to the whole box
        whole = _lorentz_from_values(values, w, params.p, params.q)
        rows.append(BallNormRow((np.nan,) * grid.n, np.inf, float(whole)))
    return rows


def morrey_lorentz_norm(f, params: NormParams, sampler: BallSampler | None = None):
    """Sampled lower bound of the Morrey-Lorentz sup ||f||_{p,q,lam}.

    At lam = 0 the sup is attained by the whole box (a subset's Lorentz
    norm never exceeds the full region's), so the ball scan is skipped and
    the value is exact.
    """
    if params.lam == 0.0:
        params.tau(f.grid.n)
        return _lorentz_from_values(
            _as_scalar_values(f).ravel(), f.grid.cell_volume, params.p, params.q
        )
    if sampler is None:
        sampler = BallSampler()
    rows = morrey_lorentz_table(f, params, sampler)
    return max(r.local_norm for r in rows)


# ---------------------------------------------------------------------------
# scaling / Hoelder / embedding diagnostics
# ---------------------------------------------------------------------------


def gaussian_profile(grid, sigma, amplitude=1.0, center=None):
    """exp(-d^2 / 2 sigma^2) with d the torus distance to the center."""
    if center is None:
        center = (grid.L / 2.0,) * grid.n
    d2 = np.zeros(grid.shape)
    for j in range(grid.n):
        dj = np.mod(grid.coordinates[j] - center[j] + grid.L / 2.0, grid.L) - grid.L / 2.0
        d2 = d2 + dj * dj
    return ScalarField(grid, amplitude * np.exp(-d2 / (2.0 * sigma * sigma)))


def ball_indicator(grid, radius, amplitude=1.0, center=None):
    if center is None:
        center = (grid.L / 2.0,) * grid.n
    d2 = np.zeros(grid.shape)
    for j in range(grid.n):
        dj = np.mod(grid.coordinates[j] - center[j] + grid.L / 2.0, grid.L) - grid.L / 2.0
        d2 = d2 + dj * dj
    return ScalarField(grid, amplitude * (d2 <= radius * radius).astype(float))


_SCALING_PRESETS = {"gaussian": gaussian_profile, "ball": ball_indicator}


@dataclass
class ScalingReport:
    ratio: float
    base_norm: float
    scaled_norm: float
    tau: float


def scaling_check(preset, c, params: NormParams, grid, sampler=None, **preset_params):
    """Report ||f(c .)|| * c^tau / ||f||; exact dilation invariance gives 1.

    The preset must rescale analytically inside the box: 'gaussian' (param
    sigma) or 'ball' (param radius).
    """
    if preset not in _SCALING_PRESETS:
        raise DiagnosticsError(f"unknown scaling preset {preset!r}; use 'gaussian' or 'ball'")
    if c <= 0:
        raise DiagnosticsError("scale factor must be positive")
    build = _SCALING_PRESETS[preset]
    size_key = "sigma" if preset == "gaussian" else "radius"
    size = preset_params[size_key]
    reach = 5.0 * size if preset == "gaussian" else size
    if reach / min(c, 1.0) > 0.45 * grid.L:
        raise DiagnosticsError(
            f"rescaled support (reach {reach / min(c, 1.0):.3g}) leaves the box"
        )
    base = build(grid, **preset_params)
    scaled_params = dict(preset_params)
    scaled_params[size_key] = size / c
    scaled = build(grid, **scaled_params)
    tau = params.tau(grid.n)
    n0 = morrey_lorentz_norm(base, params, sampler)
    n1 = morrey_lorentz_norm(scaled, params, sampler)
    ratio = n1 * c**tau / n0 if n0 > 0 else 0.0
    return ScalingReport(ratio=ratio, base_norm=n0, scaled_norm=n1, tau=tau)


@dataclass
class HolderReport:
    ratio: float
    product_norm: float
    left_norm: float
    right_norm: float


def holder_check(f, g, split, target: NormParams, sampler=None):
    """Ratio ||f g||_target / (||f||_split0 ||g||_split1).

    Validates the exponent arithmetic 1/r = 1/p0 + 1/p1,
    beta/r = lam0/p0 + lam1/p1, and 1/q0 + 1/q1 >= 1/s.
    """
    p0, p1 = split

    def _inv(x):
        return 0.0 if x == INF else 1.0 / x

    if abs(_inv(target.p) - (_inv(p0.p) + _inv(p1.p))) > 1e-10:
        raise HypothesisError(
            f"need 1/r = 1/p0 + 1/p1: 1/{target.p} vs 1/{p0.p} + 1/{p1.p}"
        )
    lhs = target.lam * _inv(target.p)
    rhs = p0.lam * _inv(p0.p) + p1.lam * _inv(p1.p)
    if abs(lhs - rhs) > 1e-10:
        raise HypothesisError(
            f"need beta/r = lam0/p0 + lam1/p1: {lhs:.6g} vs {rhs:.6g}"
        )
    if _inv(p0.q) + _inv(p1.q) < _inv(target.q) - 1e-12:
        raise HypothesisError("need 1/q0 + 1/q1 >= 1/s for the target secondary index")

    from .operators import pointwise_product

    prod = pointwise_product(f, g)
    np_ = morrey_lorentz_norm(prod, target, sampler)
    nf = morrey_lorentz_norm(f, p0, sampler)
    ng = morrey_lorentz_norm(g, p1, sampler)
    ratio = np_ / (nf * ng) if nf * ng > 0 else 0.0
    return HolderReport(ratio=ratio, product_norm=np_, left_norm=nf, right_norm=ng)


def weighted_time_sup(samples, weights: TimeWeightParams, lam, sampler=None, t_grid=None):
    """sup over the time grid of t^beta ||g(., t)||_{b, inf, lam}.

    ``samples`` is a sequence of (t, field) pairs; ``t_grid`` optionally
    restricts which times enter the sup.
    """
    entries = [(t, f) for (t, f) in samples if t_grid is None or t in set(t_grid)]
    if not entries:
        raise DiagnosticsError("weighted time sup over an empty time grid")
    params = NormParams(p=weights.b, q=INF, lam=lam)
    best = 0.0
    for t, f in entries:
        if t <= 0 or not np.isfinite(t):
            raise DiagnosticsError(f"time grid must be positive and finite, got {t}")
        best = max(best, t**weights.beta * morrey_lorentz_norm(f, params, sampler))
    return best


@dataclass
class EmbeddingRow:
    morrey_norm: float
    weak_lebesgue_norm: float
    lorentz_nn_norm: float

    @property
    def morrey_over_weak(self):
        return 0.0 if self.weak_lebesgue_norm == 0 else self.morrey_norm / self.weak_lebesgue_norm

    @property
    def weak_over_strong(self):
        return 0.0 if self.lorentz_nn_norm == 0 else self.weak_lebesgue_norm / self.lorentz_nn_norm


def verify_embeddings(fields, p, sampler=None):
    """Empirical ratios along M_{p,inf,n-p} <- L^{n,inf} <- L^{n,n}."""
    rows = []
    for f in fields:
        n = f.grid.n
        if n < 3:
            raise HypothesisError("embedding chain requires an n >= 3 grid")
        morrey = morrey_lorentz_norm(f, NormParams(p=p, q=INF, lam=n - p), sampler)
        weak = lorentz_norm(f, p=n, q=INF)
        strong = lorentz_norm(f, p=n, q=n)
        rows.append(EmbeddingRow(morrey, weak, strong))
    return rows


# ---------------------------------------------------------------------------
# state / trajectory norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormContext:
    """How to evaluate product-space norms along trajectories."""

    params: NormParams
    sampler: BallSampler
    time_stride: int = 1

    def with_params(self, params):
        return replace(self, params=params)


def state_norm(state: State, ctx: NormContext):
    """||u||_{p,q,lam} + ||theta||_{p,q,lam} with u via its magnitude."""
    return morrey_lorentz_norm(state.u, ctx.params, ctx.sampler) + morrey_lorentz_norm(
        state.theta, ctx.params, ctx.sampler
    )


def trajectory_sup_norm(traj, ctx: NormContext):
    """Discrete sup-in-time of the product norm over the stored grid."""
    idx = list(range(0, len(traj.times), max(1, ctx.time_stride)))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    return max(state_norm(traj.states[i], ctx) for i in idx)


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
