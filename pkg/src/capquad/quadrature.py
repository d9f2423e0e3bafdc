"""Reference integration over caps, collars, and full spheres.

d=2 domains get a product rule: Gauss-Legendre in t = cos(theta) over the
domain's t-interval crossed with a uniform azimuthal grid of M angles,
each carrying weight 2*pi/M.  After azimuthal averaging, every spherical
polynomial restricted to the domain reduces to a polynomial in t, so the
product rule is exact (to rounding) once M exceeds the trigonometric
degree and the polar order covers the t-degree.

d=1 arcs use Gauss-Legendre directly in the angle.  That rule is not
exact in the Gaussian sense for trigonometric integrands, but with the
order picked from the arc length it lands far below the 1e-12 relative
target; full circles use the uniform rule, which is exact.

Gauss-Legendre nodes come from Newton iteration on the Legendre
recurrence, converged to 1e-15 and symmetrized.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .geometry import (
    Cap,
    Collar,
    Sphere,
    boundary_distance_many,
    north_frame,
)
from .polys import as_point_function

DEGREE_CAP = 200


class QuadratureError(RuntimeError):
    """Adaptive integration failed to converge; carries the last two estimates."""

    def __init__(self, message, estimates):
        super().__init__(message)
        self.estimates = tuple(estimates)


@functools.lru_cache(maxsize=1024)
def gauss_legendre(order):
    """Nodes and weights on [-1, 1], by Newton iteration on the recurrence."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        x1, w1 = np.zeros(1), np.full(1, 2.0)
        x1.setflags(write=False)
        w1.setflags(write=False)
        return x1, w1
    i = np.arange(order)
    x = np.cos(math.pi * (4 * i + 3) / (4 * order + 2))
    for _ in range(100):
        p_prev = np.ones_like(x)
        p = x.copy()
        for k in range(2, order + 1):
            p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp = order * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # one clean evaluation at the converged nodes for the weights
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, order + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = order * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # enforce the +-x symmetry exactly
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    order_idx = np.argsort(x)
    x, w = x[order_idx], w[order_idx]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_on(a, b, order):
    x, w = gauss_legendre(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


class ProductRule:
    """Immutable positive rule with materialized points and weights."""

    __slots__ = ("domain", "polar_nodes", "polar_weights", "azimuth_count",
                 "points", "weights", "target_degree")

    def __init__(self, domain, polar_nodes, polar_weights, azimuth_count,
                 points, weights, target_degree):
        for arr in (polar_nodes, polar_weights, points, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "polar_nodes", polar_nodes)
        object.__setattr__(self, "polar_weights", polar_weights)
        object.__setattr__(self, "azimuth_count", azimuth_count)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "target_degree", target_degree)

    def __setattr__(self, name, value):
        raise AttributeError("ProductRule is immutable")

    def __repr__(self):
        return (f"ProductRule(domain={self.domain!r}, npoints={self.points.shape[0]}, "
                f"target_degree={self.target_degree})")


def _d1_polar_order(target, half_width):
    # generous: geometric decay of Gauss error on analytic integrands gives
    # ~ (k * a * e / (4m))^(2m); this choice keeps it far below 1e-13
    return max(target + 2, int(math.ceil(0.75 * target * half_width)) + 26)


def _materialize_d2(domain, t_lo, t_hi, polar_order, azimuth_count):
    t, wt = gauss_legendre_on(t_lo, t_hi, polar_order)
    phi = np.arange(azimuth_count) * (2.0 * math.pi / azimuth_count)
    s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    local = np.empty((polar_order * azimuth_count, 3))
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    local[:, 0] = np.outer(s, cos_phi).ravel()
    local[:, 1] = np.outer(s, sin_phi).ravel()
    local[:, 2] = np.repeat(t, azimuth_count)
    if isinstance(domain, Sphere):
        points = local
    else:
        points = local @ north_frame(domain.center)  # frame is symmetric
    weights = np.repeat(wt * (2.0 * math.pi / azimuth_count), azimuth_count)
    return t, wt, points, weights


def _materialize_d1(domain, segments, polar_order):
    nodes, wts = [], []
    for lo, hi in segments:
        u, w = gauss_legendre_on(lo, hi, polar_order)
        nodes.append(u)
        wts.append(w)
    u = np.concatenate(nodes)
    w = np.concatenate(wts)
    local = np.column_stack([np.sin(u), np.cos(u)])
    if isinstance(domain, Sphere):
        points = local
    else:
        points = local @ north_frame(domain.center)
    return u, w, points, w.copy()


@functools.lru_cache(maxsize=512)
def build_rule(domain, target_degree):
    """A rule integrating every member of the polynomial space of the given
    degree, restricted to the domain, to ~1e-12 relative error."""
    target_degree = int(target_degree)
    if target_degree > DEGREE_CAP:
        raise ValueError(f"target degree {target_degree} exceeds cap {DEGREE_CAP}")
    if target_degree < 0:
        raise ValueError("target degree must be >= 0")
    d = domain.dim
    if d == 2:
        azimuth = max(2 * target_degree + 1, 4)
        polar = target_degree + 2
        if isinstance(domain, Sphere):
            t_lo, t_hi = -1.0, 1.0
        elif isinstance(domain, Cap):
            t_lo, t_hi = math.cos(domain.alpha), 1.0
        elif isinstance(domain, Collar):
            t_lo, t_hi = math.cos(domain.beta), math.cos(domain.alpha)
        else:
            raise TypeError(f"not a domain: {domain!r}")
        t, wt, points, weights = _materialize_d2(domain, t_lo, t_hi, polar, azimuth)
        return ProductRule(domain, t, wt, azimuth, points, weights, target_degree)
    # d == 1
    if isinstance(domain, Sphere):
        m = max(2 * target_degree + 2, 8)
        u = np.arange(m) * (2.0 * math.pi / m) - math.pi
        w = np.full(m, 2.0 * math.pi / m)
        points = np.column_stack([np.sin(u), np.cos(u)])
        return ProductRule(domain, u, w, 0, points, w.copy(), target_degree)
    if isinstance(domain, Cap):
        order = _d1_polar_order(target_degree, domain.alpha)
        segments = [(-domain.alpha, domain.alpha)]
    elif isinstance(domain, Collar):
        order = _d1_polar_order(target_degree, 0.5 * (domain.beta - domain.alpha))
        segments = [(domain.alpha, domain.beta), (-domain.beta, -domain.alpha)]
    else:
        raise TypeError(f"not a domain: {domain!r}")
    u, wu, points, weights = _materialize_d1(domain, segments, order)
    return ProductRule(domain, u, wu, 0, points, weights, target_degree)


def integrate(rule, f):
    """Sum of weights times values; f maps an (N, d+1) array to (N,) values."""
    vals = as_point_function(f)(rule.points)
    return float(rule.weights @ vals)


_ADAPTIVE_ORDERS = (8, 16, 32, 64, 128, DEGREE_CAP)


def integrate_adaptive(domain, f, tol=1e-10, on_fail="raise"):
    """Double the rule order until successive estimates agree to tol (relative).

    Raises QuadratureError with the two last estimates when the order cap
    is reached without convergence; pass on_fail="last" to accept the
    final estimate instead (statistics that only need constant-factor
    accuracy use that mode).
    """
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    fv = as_point_function(f)
    prev = None
    est = 0.0
    for order in _ADAPTIVE_ORDERS:
        est = integrate(build_rule(domain, order), fv)
        if prev is not None and abs(est - prev) <= tol * (abs(est) + 1e-14):
            return est
        prev = est
    if on_fail == "last":
        return est
    raise QuadratureError(
        f"no convergence by order {DEGREE_CAP}: last estimates ({prev}, {est})",
        (prev, est),
    )


# ---------------------------------------------------------------------------
# analytic moments of the orthonormal basis


def _legendre_values(c, lmax):
    """P_0(c) .. P_{lmax}(c) by the three-term recurrence."""
    vals = np.empty(lmax + 1)
    vals[0] = 1.0
    if lmax >= 1:
        vals[1] = c
    for l in range(2, lmax + 1):
        vals[l] = ((2 * l - 1) * c * vals[l - 1] - (l - 1) * vals[l - 2]) / l
    return vals


def _legendre_antiderivative(c, lmax):
    """I_l = integral of P_l over [c, 1] for l = 0..lmax.

    I_0 = 1 - c and I_l = (P_{l-1}(c) - P_{l+1}(c)) / (2l + 1) for l >= 1.
    """
    p = _legendre_values(c, lmax + 1)
    out = np.empty(lmax + 1)
    out[0] = 1.0 - c
    for l in range(1, lmax + 1):
        out[l] = (p[l - 1] - p[l + 1]) / (2 * l + 1)
    return out


def domain_moments(domain, n):
    """Moments of the orthonormal basis over a cap, collar, or sphere.

    The domain is taken in its canonical north-pole position, which is how
    the cubature solver consumes it; there every entry with azimuthal
    dependence vanishes identically and the rest follow from the closed
    Legendre antiderivative (d=2) or elementary sine integrals (d=1).
    """
    n = int(n)
    d = domain.dim
    if d == 2:
        size = (n + 1) ** 2
        out = np.zeros(size)
        if isinstance(domain, Sphere):
            out[0] = 4.0 * math.pi / math.sqrt(4.0 * math.pi)
            return out
        if isinstance(domain, Cap):
            ints = _legendre_antiderivative(math.cos(domain.alpha), n)
        else:
            ints = (
                _legendre_antiderivative(math.cos(domain.beta), n)
                - _legendre_antiderivative(math.cos(domain.alpha), n)
            )
        for l in range(n + 1):
            out[l * l + l] = 2.0 * math.pi * math.sqrt((2 * l + 1) / (4.0 * math.pi)) * ints[l]
        return out
    # d == 1: [const, cos k, sin k, ...] against arc length
    out = np.zeros(2 * n + 1)
    if isinstance(domain, Sphere):
        out[0] = 2.0 * math.pi / math.sqrt(2.0 * math.pi)
        return out
    inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
    if isinstance(domain, Cap):
        out[0] = 2.0 * domain.alpha / math.sqrt(2.0 * math.pi)
        for k in range(1, n + 1):
            out[2 * k - 1] = 2.0 * math.sin(k * domain.alpha) / k * inv_sqrt_pi
    else:
        a, b = domain.alpha, domain.beta
        out[0] = 2.0 * (b - a) / math.sqrt(2.0 * math.pi)
        for k in range(1, n + 1):
            out[2 * k - 1] = 2.0 * (math.sin(k * b) - math.sin(k * a)) / k * inv_sqrt_pi
    return out


def cap_moments(cap, n):
    """Moments of the basis over the cap (canonical north-pole frame)."""
    if not isinstance(cap, Cap):
        raise TypeError("cap_moments needs a Cap")
    return domain_moments(cap, n)


# ---------------------------------------------------------------------------
# localized rho-ball quadrature


def _ball_boxes(domain, theta_c, sqrt_b_c, radius):
    """Tight polar-interval and azimuth half-window containing each ball.

    The metric forces both a distance bound and a boundary-distance band:
    sqrt(b) can move by at most sqrt(alpha)*radius, which pins the polar
    angle into an annulus, and the chordal bound pins the azimuth.  Using
    the box instead of a bounding cap keeps the ball a constant fraction
    of the integration region even hard against the boundary, where balls
    flatten into slivers.
    """
    alpha = domain.alpha
    shift = math.sqrt(alpha) * radius
    b_lo = np.maximum(sqrt_b_c - shift, 0.0) ** 2
    b_hi = (sqrt_b_c + shift) ** 2
    chord_bound = min(alpha * radius, 2.0)
    if isinstance(domain, Cap):
        dmax = min(alpha * radius, math.pi)
        lo = np.maximum.reduce([np.zeros_like(theta_c), theta_c - dmax, alpha - b_hi])
        hi = np.minimum(np.minimum(np.full_like(theta_c, alpha), theta_c + dmax),
                        alpha - b_lo)
    else:
        dmax = 2.0 * math.asin(0.5 * chord_bound)
        lo = np.maximum(np.maximum(np.full_like(theta_c, domain.alpha),
                                   theta_c - dmax), domain.alpha + b_lo)
        hi = np.minimum(np.minimum(np.full_like(theta_c, domain.beta),
                                   theta_c + dmax), domain.beta - b_lo)
    lo = np.minimum(lo, theta_c)
    hi = np.maximum(hi, theta_c)
    sin_min = np.minimum(np.sin(lo), np.sin(hi))
    full = (lo <= 1e-12) | (hi >= math.pi - 1e-12) | (sin_min <= 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = 2.0 * np.arcsin(np.minimum(1.0, chord_bound / (2.0 * sin_min)))
    half = np.where(full, math.pi, np.minimum(half, math.pi))
    return lo, hi, half


def _eval_balls_d2(domain, centers_polar, sqrt_b_c, radius, boxes, sel, res,
                   weight_fn, frame):
    """One resolution level of box quadrature for the selected d=2 balls."""
    alpha = domain.alpha
    theta_c, phi_c = centers_polar
    lo, hi, half = boxes
    xi, wxi = gauss_legendre_on(0.0, 1.0, res)
    span = (hi[sel] - lo[sel])[:, None]
    theta = lo[sel][:, None] + span * xi[None, :]
    w_th = span * wxi[None, :] * np.sin(theta)
    dphi = (2.0 * half[sel])[:, None] * xi[None, :] - half[sel][:, None]
    w_ph = (2.0 * half[sel])[:, None] * wxi[None, :]

    cos_tc = np.cos(theta_c[sel])[:, None, None]
    sin_tc = np.sin(theta_c[sel])[:, None, None]
    cos_d = (cos_tc * np.cos(theta)[:, :, None]
             + sin_tc * np.sin(theta)[:, :, None] * np.cos(dphi)[:, None, :])
    cos_d = np.clip(cos_d, -1.0, 1.0)
    if isinstance(domain, Collar):
        dist2 = 2.0 - 2.0 * cos_d
        b = np.minimum(theta - domain.alpha, domain.beta - theta)
    else:
        d = np.arccos(cos_d)
        dist2 = d * d
        b = domain.alpha - theta
    sqb = np.sqrt(np.maximum(b, 0.0))[:, :, None]
    rho_val = np.sqrt(dist2 + alpha * (sqb - sqrt_b_c[sel][:, None, None]) ** 2) / alpha
    mask = rho_val <= radius + 1e-12
    cell_w = w_th[:, :, None] * w_ph[:, None, :]
    vols = np.einsum("kij,kij->k", mask.astype(float), cell_w)
    if weight_fn is None:
        return vols, vols
    phi = phi_c[sel][:, None, None] + dphi[:, None, :]
    st = np.sin(theta)[:, :, None]
    local = np.stack(
        [np.broadcast_to(st * np.cos(phi), cos_d.shape),
         np.broadcast_to(st * np.sin(phi), cos_d.shape),
         np.broadcast_to(np.cos(theta)[:, :, None], cos_d.shape)], axis=-1)
    flat = local.reshape(-1, 3) @ frame
    wv = np.asarray(weight_fn(flat), float).reshape(cos_d.shape)
    masses = np.einsum("kij,kij->k", (mask * wv), cell_w)
    return vols, masses


def _eval_balls_d1(domain, u_c, sqrt_b_c, radius, res, weight_fn, frame):
    """One resolution level for d=1 balls: union of arc segments."""
    alpha = domain.alpha
    if isinstance(domain, Cap):
        dmax = min(alpha * radius, math.pi)
        segments = [(-alpha, alpha)]
    else:
        dmax = 2.0 * math.asin(0.5 * min(alpha * radius, 2.0))
        segments = [(domain.alpha, domain.beta), (-domain.beta, -domain.alpha)]
    xi, wxi = gauss_legendre_on(0.0, 1.0, res)
    k = u_c.shape[0]
    vols = np.zeros(k)
    masses = np.zeros(k)
    for seg_lo, seg_hi in segments:
        lo = np.maximum(seg_lo, u_c - dmax)
        hi = np.minimum(seg_hi, u_c + dmax)
        ok = lo < hi
        if not np.any(ok):
            continue
        span = (hi - lo)[:, None]
        u = lo[:, None] + span * xi[None, :]
        w = span * wxi[None, :]
        gap = np.abs(u - u_c[:, None])
        if isinstance(domain, Collar):
            dist2 = (2.0 * np.sin(0.5 * gap)) ** 2
            b = np.minimum(np.abs(u) - domain.alpha, domain.beta - np.abs(u))
        else:
            geo = np.minimum(gap, 2.0 * math.pi - gap)
            dist2 = geo * geo
            b = alpha - np.abs(u)
        sqb = np.sqrt(np.maximum(b, 0.0))
        rho_val = np.sqrt(dist2 + alpha * (sqb - sqrt_b_c[:, None]) ** 2) / alpha
        mask = (rho_val <= radius + 1e-12) & ok[:, None]
        vols += np.einsum("ki,ki->k", mask.astype(float), w)
        if weight_fn is not None:
            pts = np.column_stack([np.sin(u).ravel(), np.cos(u).ravel()]) @ frame
            wv = np.asarray(weight_fn(pts), float).reshape(u.shape)
            masses += np.einsum("ki,ki->k", mask * wv, w)
    if weight_fn is None:
        masses = vols.copy()
    return vols, masses


def balls_integral(domain, centers, radius, weight_fn=None, resolution=32,
                   rtol=0.01, max_resolution=1024, point_budget=4_000_000):
    """(volumes, masses) of the rho-balls at many centers, vectorized.

    Indicator quadrature over a tight per-ball box; the rule order doubles
    per ball until its two successive estimates agree to ``rtol`` relative,
    exactly as for a single ball, just batched.
    """
    centers = np.atleast_2d(np.asarray(centers, float))
    k = centers.shape[0]
    resolution = max(int(resolution), 32)
    frame = north_frame(domain.center)
    canon = centers @ frame
    sqrt_b_c = np.sqrt(boundary_distance_many(domain, centers))
    if domain.dim == 2:
        theta_c = np.arccos(np.clip(canon[:, 2], -1.0, 1.0))
        phi_c = np.arctan2(canon[:, 1], canon[:, 0])
        boxes = _ball_boxes(domain, theta_c, sqrt_b_c, radius)
        polar = (theta_c, phi_c)
    else:
        u_c = np.arctan2(canon[:, 0], canon[:, 1])

    vols = np.zeros(k)
    masses = np.zeros(k)
    prev_v = np.full(k, np.nan)
    prev_m = np.full(k, np.nan)
    active = np.ones(k, bool)
    res = resolution
    while np.any(active):
        idx = np.flatnonzero(active)
        per_ball = res * res if domain.dim == 2 else res
        block = max(1, point_budget // max(per_ball, 1))
        for lo_i in range(0, idx.size, block):
            sel = idx[lo_i : lo_i + block]
            if domain.dim == 2:
                v, m = _eval_balls_d2(domain, polar, sqrt_b_c, radius, boxes,
                                      sel, res, weight_fn, frame)
            else:
                v, m = _eval_balls_d1(domain, u_c[sel], sqrt_b_c[sel], radius,
                                      res, weight_fn, frame)
            vols[sel] = v
            masses[sel] = m
        have_prev = ~np.isnan(prev_v)
        conv = (
            have_prev
            & (np.abs(vols - prev_v) <= rtol * (np.abs(vols) + 1e-15))
            & (np.abs(masses - prev_m) <= rtol * (np.abs(masses) + 1e-15))
        )
        active &= ~conv
        prev_v[active] = vols[active]
        prev_m[active] = masses[active]
        res *= 2
        if res > max_resolution:
            break
    return vols, masses


def ball_integral(ball, weight_fn=None, resolution=32, rtol=0.01, max_resolution=1024):
    """(volume, weighted mass) of a single rho-ball; see balls_integral."""
    vols, masses = balls_integral(ball.domain, ball.center.coords.reshape(1, -1),
                                  ball.radius, weight_fn, resolution=resolution,
                                  rtol=rtol, max_resolution=max_resolution)
    return float(vols[0]), float(masses[0])


def ball_volume(ball, resolution=32):
    return ball_integral(ball, None, resolution=resolution)[0]


def ball_average(ball, weight_fn, resolution=32):
    """Mean of weight_fn over the rho-ball (exactly 1-safe for constants)."""
    vol, mass = ball_integral(ball, weight_fn, resolution=resolution)
    if vol <= 0.0:
        raise QuadratureError("empty rho-ball in ball_average", (vol, mass))
    return mass / vol


def balls_average(domain, centers, radius, weight_fn, resolution=32):
    """Batched ball averages: mean of weight_fn over each center's ball."""
    vols, masses = balls_integral(domain, centers, radius, weight_fn,
                                  resolution=resolution)
    if np.any(vols <= 0.0):
        raise QuadratureError("empty rho-ball in balls_average", (vols.min(), 0))
    return masses / vols
