"""Strictly positive cubature weights on a node set, by moment matching.

The weight vector must reproduce the analytic moments of the orthonormal
basis over the cap (or collar) while staying strictly positive.  A plain
nonnegative least-squares solve would do the former but lands on a
vertex of the feasible polytope, zeroing all but ~dim(basis) nodes; such
sparse rules cannot carry the two-sided sampling inequalities this
package exists to check.  So the solve is split:

  weights = base + correction,   base = eta * t * profile,  correction >= 0

where ``profile`` is the ball-volume surrogate at the set's separation
radius (the size the weights are expected to have), ``t`` fits the profile
to the moments in one dimension, and the correction comes from a
Lawson-Hanson active-set solve on the residual moment system with
columns pre-scaled by the profile.  Every node keeps at least its base
weight, so positivity is structural; ``eta`` backs off geometrically when
the residual target is missed, ending at a pure nonnegative solve with a
single prune-and-resolve pass before the set is declared infeasible.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import delta_r_many, domain_measure, north_frame
from .points import NodeSet
from .polys import PolySpace, eval_basis_many
from .quadrature import domain_moments

_ETA_SCHEDULE = (0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0)
DEFAULT_TOL = 1e-10


class Infeasible:
    """Returned when no acceptable weight vector exists for (nodes, degree).

    Carries the best achieved residual and the nodes that ended with zero
    weight; the usual remedy is to halve delta and regenerate the set.
    """

    __slots__ = ("residual", "zero_nodes", "message")

    def __init__(self, residual, zero_nodes, message):
        self.residual = float(residual)
        self.zero_nodes = zero_nodes
        self.message = message

    def __repr__(self):
        return f"Infeasible(residual={self.residual:.3e}, zeros={len(self.zero_nodes)})"


class CubatureRule:
    """Nodes, strictly positive weights, exactness degree, and a residual certificate."""

    __slots__ = ("nodes", "weights", "degree", "residual", "solver_meta")

    def __init__(self, nodes, weights, degree, residual, solver_meta):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(nodes),):
            raise ValueError("one weight per node required")
        floor = positivity_floor(nodes)
        if np.any(weights < floor):
            raise ValueError("weights must be strictly positive")
        weights = weights.copy()
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "degree", int(degree))
        object.__setattr__(self, "residual", float(residual))
        object.__setattr__(self, "solver_meta", dict(solver_meta))

    def __setattr__(self, name, value):
        raise AttributeError("CubatureRule is immutable")

    def __repr__(self):
        return (f"CubatureRule(n={len(self.nodes)}, degree={self.degree}, "
                f"residual={self.residual:.3e})")


def positivity_floor(nodes):
    return 1e-14 * domain_measure(nodes.domain) / max(len(nodes), 1)


def nnls(a, b, max_iter=None):
    """Active-set nonnegative least squares on ``min ||a x - b|| s.t. x >= 0``.

    Thin wrapper over the library Lawson-Hanson-style solver; returns
    (x, residual_norm, support_size).
    """
    from scipy.optimize import nnls as _lh_nnls

    x, rnorm = _lh_nnls(np.asarray(a, float), np.asarray(b, float), maxiter=max_iter)
    return x, float(rnorm), int(np.count_nonzero(x))


def _moment_matrix(nodes, degree):
    """Basis-at-nodes matrix and analytic moments, in the canonical frame."""
    domain = nodes.domain
    frame = north_frame(domain.center)
    canon = nodes.coords @ frame
    space = PolySpace(domain.dim, degree)
    a = eval_basis_many(space, canon).T
    moments = domain_moments(domain, degree)
    return a, moments


def moment_residual(a, weights, moments):
    """Max relative moment error: |A w - m|_k / (1 + |m_k|), maximized over k."""
    err = a @ weights - moments
    return float(np.max(np.abs(err) / (1.0 + np.abs(moments))))


def _profile(nodes):
    eps = nodes.epsilon if nodes.epsilon > 0 else 1.0 / max(nodes.degree, 1)
    prof = delta_r_many(nodes.domain, nodes.coords, eps)
    return np.maximum(prof, 1e-300)


def solve_weights(nodes, degree, tol=DEFAULT_TOL):
    """Positive weights exact on the polynomial space over the domain.

    Returns a CubatureRule on acceptance (relative moment residual at most
    ``tol`` with all weights strictly positive) or an Infeasible carrying
    diagnostics.  An Infeasible outcome signals that the set is too
    sparse for the requested degree.
    """
    if len(nodes) == 0:
        raise ValueError("empty node set")
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    a, moments = _moment_matrix(nodes, degree)
    profile = _profile(nodes)
    scaled = a * profile[None, :]
    g = scaled.sum(axis=1)
    gg = float(g @ g)
    t_fit = float(g @ moments) / gg if gg > 0 else 0.0
    if not (t_fit > 0 and np.isfinite(t_fit)):
        t_fit = domain_measure(nodes.domain) / float(profile.sum())

    floor = positivity_floor(nodes)
    total_iters = 0
    best_resid = math.inf
    for back_offs, eta in enumerate(_ETA_SCHEDULE):
        base = eta * t_fit * profile
        target = moments - a @ base
        u, _, it = nnls(scaled, target)
        total_iters += it
        weights = base + profile * u
        resid = moment_residual(a, weights, moments)
        best_resid = min(best_resid, resid)
        if resid <= tol and np.all(weights >= floor):
            meta = {"iterations": total_iters, "back_offs": back_offs, "seed": nodes.seed}
            return CubatureRule(nodes, weights, degree, resid, meta)
        if eta == 0.0 and resid <= tol:
            # pure nonnegative solve met the moments but zeroed some nodes:
            # prune them and resolve once on the survivors
            keep = weights > floor
            pruned = NodeSet(nodes.domain, nodes.coords[keep], nodes.epsilon,
                             degree=nodes.degree, delta=nodes.delta,
                             seed=nodes.seed, validate=False)
            a2 = a[:, keep]
            u2, _, it2 = nnls(a2 * profile[None, keep], moments)
            total_iters += it2
            w2 = profile[keep] * u2
            resid2 = moment_residual(a2, w2, moments)
            if resid2 <= tol and np.all(w2 >= positivity_floor(pruned)):
                meta = {"iterations": total_iters, "back_offs": back_offs,
                        "seed": nodes.seed, "pruned": int(np.sum(~keep))}
                return CubatureRule(pruned, w2, degree, resid2, meta)
            zeros = [i for i, k in enumerate(keep) if not k]
            return Infeasible(min(best_resid, resid2),
                              zeros, "zero weights persist after prune-and-resolve")
    zeros = [int(i) for i in np.flatnonzero(weights < floor)]
    return Infeasible(best_resid, zeros,
                      f"residual {best_resid:.3e} above tol {tol:.1e}")


def verify_exactness(rule, probe_degree=None):
    """Max relative moment error of the rule at the probe degree."""
    if probe_degree is None:
        probe_degree = rule.degree
    if probe_degree > rule.degree:
        raise ValueError("probe degree exceeds the rule's exactness degree")
    a, moments = _moment_matrix(rule.nodes, probe_degree)
    return moment_residual(a, rule.weights, moments)


def weight_sharpness(rule):
    """(min, max) over nodes of weight / ball-volume surrogate at the
    separation radius; the two-sided bracket the weights are expected to sit in."""
    prof = _profile(rule.nodes)
    ratios = rule.weights / prof
    return float(ratios.min()), float(ratios.max())


def solve_with_backoff(domain, degree, delta, seed=0, tol=DEFAULT_TOL, max_backoffs=3):
    """Generate a maximal set and solve, halving delta on infeasibility.

    Returns (rule, delta_used, backoffs).  Degree stays fixed: node
    density is the free parameter.
    """
    from .points import greedy_maximal_set

    delta_used = float(delta)
    for k in range(max_backoffs + 1):
        nodes = greedy_maximal_set(domain, delta_used / degree, seed=seed,
                                   degree=degree, delta=delta_used)
        result = solve_weights(nodes, degree, tol=tol)
        if isinstance(result, CubatureRule):
            meta = dict(result.solver_meta)
            meta["delta_backoffs"] = k
            return CubatureRule(result.nodes, result.weights, result.degree,
                                result.residual, meta), delta_used, k
        delta_used *= 0.5
    raise RuntimeError(f"no feasible rule after {max_backoffs} delta halvings "
                       f"(last residual {result.residual:.3e})")
