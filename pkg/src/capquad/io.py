"""Canonical JSON persistence for node sets, rules, and reports.

Canonical form: sorted keys, compact separators, shortest round-trip
floats (repr, capped at 17 significant digits by the float type itself),
newline-terminated.  Writing the same object twice yields byte-identical
files, which the reproducibility checks compare directly.
"""

from __future__ import annotations

import json

import numpy as np

from .geometry import Cap, Collar, SpherePoint
from .points import NodeSet
from .polys import PolyCoeffs, PolySpace
from .solver import CubatureRule
from .verify import VerificationReport

RULE_VERSION = "capquad-rule/1"
POINTS_VERSION = "capquad-points/1"
REPORT_VERSION = "capquad-report/1"
POLY_VERSION = "capquad-poly/1"


class FormatError(ValueError):
    """Malformed or wrong-version input file."""


def canonical_dumps(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_canonical(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(data))


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _domain_to_fields(domain):
    fields = {
        "d": domain.dim,
        "alpha": domain.alpha,
        "center": [float(v) for v in domain.center.coords],
    }
    fields["beta"] = domain.beta if isinstance(domain, Collar) else None
    return fields


def _domain_from_fields(data):
    center = SpherePoint(np.asarray(data["center"], float))
    if center.dim != int(data["d"]):
        raise FormatError("center length inconsistent with d")
    if data.get("beta") is not None:
        return Collar(center, float(data["alpha"]), float(data["beta"]))
    return Cap(center, float(data["alpha"]))


def points_to_dict(nodes):
    out = _domain_to_fields(nodes.domain)
    out.update({
        "version": POINTS_VERSION,
        "degree": nodes.degree,
        "delta": nodes.delta,
        "epsilon": nodes.epsilon,
        "nodes": [[float(v) for v in row] for row in nodes.coords],
        "generator": {"seed": nodes.seed, "algorithm": "greedy-fps"},
    })
    return out


def nodes_from_dict(data):
    version = data.get("version")
    if version not in (POINTS_VERSION, RULE_VERSION):
        raise FormatError(f"unsupported version {version!r}")
    domain = _domain_from_fields(data)
    nodes = np.asarray(data["nodes"], float)
    if nodes.ndim != 2 or nodes.shape[1] != domain.dim + 1:
        raise FormatError("nodes must be an array of unit vectors of length d+1")
    return NodeSet(
        domain,
        nodes,
        float(data.get("epsilon", 0.0)),
        degree=int(data.get("degree", 1)),
        delta=float(data["delta"]) if data.get("delta") is not None else None,
        seed=int(data.get("generator", {}).get("seed", 0)),
    )


def rule_to_dict(rule):
    nodes = rule.nodes
    out = _domain_to_fields(nodes.domain)
    meta = rule.solver_meta
    out.update({
        "version": RULE_VERSION,
        "degree": rule.degree,
        "delta": nodes.delta,
        "epsilon": nodes.epsilon,
        "nodes": [[float(v) for v in row] for row in nodes.coords],
        "weights": [float(w) for w in rule.weights],
        "residual": rule.residual,
        "generator": {
            "seed": int(meta.get("seed", nodes.seed)),
            "algorithm": "greedy-fps",
            "solver": "nnls-active-set",
            "back_offs": int(meta.get("back_offs", 0)),
        },
    })
    return out


def rule_from_dict(data):
    if data.get("version") != RULE_VERSION:
        raise FormatError(f"unsupported version {data.get('version')!r}")
    nodes = nodes_from_dict(data)
    weights = np.asarray(data["weights"], float)
    if weights.shape[0] != len(nodes):
        raise FormatError("nodes and weights must have equal length")
    if np.any(weights <= 0):
        raise FormatError("rule weights must be strictly positive")
    meta = {
        "seed": int(data.get("generator", {}).get("seed", 0)),
        "back_offs": int(data.get("generator", {}).get("back_offs", 0)),
        "iterations": 0,
    }
    return CubatureRule(nodes, weights, int(data["degree"]), float(data["residual"]), meta)


def poly_to_dict(p):
    # coefficient ordering: d=1 as [const, cos 1, sin 1, ...];
    # d=2 lexicographic in (l, m) with m in [-l, l], index l*l + l + m
    return {
        "version": POLY_VERSION,
        "d": p.space.dim_sphere,
        "degree": p.space.degree,
        "coeffs": [float(c) for c in p.coeffs],
    }


def poly_from_dict(data):
    if data.get("version") != POLY_VERSION:
        raise FormatError(f"unsupported version {data.get('version')!r}")
    space = PolySpace(int(data["d"]), int(data["degree"]))
    return PolyCoeffs(space, np.asarray(data["coeffs"], float))


def report_to_dict(report):
    return report.to_dict()


def report_from_dict(data):
    if data.get("version") != REPORT_VERSION:
        raise FormatError(f"unsupported version {data.get('version')!r}")
    return VerificationReport.from_dict(data)


def write_report_csv(path, report):
    rows = list(report.csv_rows())
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
