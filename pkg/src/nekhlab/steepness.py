"""Monte Carlo certificates for quantitative transversality of ``grad h``.

An integrable Hamiltonian ``h`` is *steep* on the ball ``B_rho`` when, for
every dimension ``k``, every affine ``k``-dimensional subspace meeting the
ball, and every short curve drawn inside that subspace, the projection of
``grad h`` onto the subspace direction becomes large somewhere along the
curve before the curve strays far from its start.  This module checks the
discretized version of that statement on randomly sampled subspaces and
piecewise-linear curves.  A pass is always reported as "no counterexample
found" — the search is necessary-not-sufficient, never a proof.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hamcore import (
    IntegrableH,
    PolynomialH,
    PowerLaw,
    QuadraticForm,
    _as_vector,
    stream_rng,
)

__all__ = [
    "SubspaceSample",
    "CurveSample",
    "CurveCheck",
    "SteepnessRecord",
    "SteepnessReport",
    "project_gradient",
    "check_curve",
    "check_steepness",
    "default_constants",
    "curve_to_csv",
]

# fixed search resolution: every curve segment is sampled at this many
# uniform subdivisions (the far node included)
SEGMENT_REFINEMENTS = 16

# random piecewise-linear curves carry at most this many nodes
MAX_CURVE_NODES = 8

_ORTHO_TOL = 1e-12


def _ball_point(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """Uniform point in the Euclidean ball of the given radius."""
    u = rng.standard_normal(n)
    norm = np.linalg.norm(u)
    while norm == 0.0:  # pragma: no cover - measure zero
        u = rng.standard_normal(n)
        norm = np.linalg.norm(u)
    return (radius * rng.random() ** (1.0 / n) / norm) * u


def _haar_basis(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Haar-distributed orthonormal (n, k) frame."""
    m = rng.standard_normal((n, k))
    q, r = np.linalg.qr(m)
    # sign-fix for a canonical representative
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class SubspaceSample:
    """Affine subspace ``basepoint + span(basis)`` meeting the action ball.

    ``basis`` holds k orthonormal columns; orthonormality is enforced to
    1e-12 so projections are basis-independent.
    """

    basepoint: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.basepoint, dtype=float)
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if bp.ndim != 1 or b.shape[0] != bp.shape[0]:
            raise ValueError("basis rows must match the basepoint dimension")
        if not 1 <= b.shape[1] <= b.shape[0]:
            raise ValueError("subspace dimension k must satisfy 1 <= k <= n")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(b.shape[1]))) > _ORTHO_TOL:
            raise ValueError("basis columns must be orthonormal to 1e-12")
        object.__setattr__(self, "basepoint", bp)
        object.__setattr__(self, "basis", b)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class CurveSample:
    """Piecewise-linear curve inside one affine subspace section.

    Nodes live in the ambient action space; the endpoint gap
    ``delta = |nodes[-1] - nodes[0]|`` must be positive.
    """

    subspace: SubspaceSample
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] < 2:
            raise ValueError("a curve needs at least two nodes")
        if nodes.shape[1] != self.subspace.dimension:
            raise ValueError("node dimension must match the subspace")
        # confinement to the affine subspace: the off-plane component of
        # every node (relative to the basepoint) must vanish
        rel = nodes - self.subspace.basepoint
        off = rel - rel @ self.subspace.basis @ self.subspace.basis.T
        if np.max(np.abs(off)) > 1e-9:
            raise ValueError("curve nodes must lie in the affine subspace")
        if np.linalg.norm(nodes[-1] - nodes[0]) <= 0.0:
            raise ValueError("endpoint gap delta must be positive")
        object.__setattr__(self, "nodes", nodes)

    @property
    def delta(self) -> float:
        return float(np.linalg.norm(self.nodes[-1] - self.nodes[0]))


@dataclass(frozen=True)
class CurveCheck:
    """Outcome of scanning one curve for a transversality witness.

    ``margin`` is max-over-candidates of the projected gradient minus the
    threshold ``C * delta**p``; a strictly positive margin certifies a
    witness, a negative one records a violation of the tested constants.
    """

    witness_t: float | None
    witness_point: np.ndarray | None
    max_projection: float
    threshold: float
    delta: float

    @property
    def margin(self) -> float:
        return self.max_projection - self.threshold

    @property
    def violated(self) -> bool:
        return self.witness_t is None


@dataclass(frozen=True)
class SteepnessRecord:
    """Per-dimension aggregate of the Monte Carlo steepness search."""

    k: int
    p_k: float
    C_k: float
    delta_k: float
    n_subspaces: int
    n_curves_per: int
    delta_grid: tuple
    worst_margin: float
    n_violations: int
    counterexample: CurveSample | None = None
    counterexample_delta: float | None = None
    counterexample_margin: float | None = None

    @property
    def passed(self) -> bool:
        """True when no tested curve had a negative margin."""
        return self.worst_margin >= 0.0

    def to_dict(self) -> dict:
        d = {
            "k": self.k,
            "p_k": self.p_k,
            "C_k": self.C_k,
            "delta_k": self.delta_k,
            "n_subspaces": self.n_subspaces,
            "n_curves_per": self.n_curves_per,
            "delta_grid": list(self.delta_grid),
            "worst_margin": self.worst_margin,
            "n_violations": self.n_violations,
            "passed": self.passed,
        }
        if self.counterexample is not None:
            sub = self.counterexample.subspace
            d["counterexample"] = {
                "delta": self.counterexample_delta,
                "margin": self.counterexample_margin,
                "basepoint": sub.basepoint.tolist(),
                "basis": sub.basis.tolist(),
                "nodes": self.counterexample.nodes.tolist(),
            }
        else:
            d["counterexample"] = None
        return d


@dataclass(frozen=True)
class SteepnessReport:
    """Search report across subspace dimensions, JSON-exportable."""

    h_label: str
    rho: float
    seed: int
    records: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(rec.passed for rec in self.records)

    def record_for(self, k: int) -> SteepnessRecord:
        for rec in self.records:
            if rec.k == k:
                return rec
        raise KeyError(f"no record for k={k}")

    def to_dict(self) -> dict:
        return {
            "h": self.h_label,
            "rho": self.rho,
            "seed": self.seed,
            "passed": self.passed,
            "records": [rec.to_dict() for rec in self.records],
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _h_label(h: IntegrableH) -> str:
    if isinstance(h, PowerLaw):
        return f"power_law(p={h.p}, n={h.dimension})"
    if isinstance(h, QuadraticForm):
        return f"quadratic_form(n={h.dimension})"
    if isinstance(h, PolynomialH):
        return f"polynomial(n={h.dimension})"
    return type(h).__name__


def _grad_rows(h: IntegrableH, pts: np.ndarray) -> np.ndarray:
    """Gradient of h at each row of ``pts`` (vectorized where possible)."""
    if isinstance(h, PowerLaw):
        return h.p * pts ** (h.p - 1)
    if isinstance(h, QuadraticForm):
        return 2.0 * pts @ h.matrix
    return np.array([h.grad(p) for p in pts])


def project_gradient(h: IntegrableH, point, basis) -> float:
    """Euclidean norm of the projection of ``grad h(point)`` onto span(basis).

    ``basis`` may be any full-rank spanning set (columns); the projection is
    computed through an orthonormalization, so it depends only on the span.
    Raises on a rank-deficient basis.
    """
    point = _as_vector(point, h.dimension, "point")
    b = np.asarray(basis, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != h.dimension:
        raise ValueError("basis rows must match the dimension of h")
    q, r = np.linalg.qr(b)
    scale = max(np.max(np.abs(b)), 1.0)
    if np.min(np.abs(np.diag(r))) <= 1e-8 * scale:
        raise ValueError("degenerate basis: columns are linearly dependent")
    return float(np.linalg.norm(q.T @ h.grad(point)))


def _refine_params(n_nodes: int) -> np.ndarray:
    """Curve parameters: nodes plus uniform subdivisions per segment."""
    n_seg = n_nodes - 1
    out = np.empty(n_seg * SEGMENT_REFINEMENTS + 1)
    out[0] = 0.0
    j = np.arange(1, SEGMENT_REFINEMENTS + 1) / SEGMENT_REFINEMENTS
    for i in range(n_seg):
        lo = i * SEGMENT_REFINEMENTS + 1
        out[lo : lo + SEGMENT_REFINEMENTS] = (i + j) / n_seg
    return out


def _refine_nodes(nodes: np.ndarray) -> np.ndarray:
    """Sampled points along the polyline: (S, dim) for S refined params."""
    n_seg = nodes.shape[0] - 1
    j = (np.arange(1, SEGMENT_REFINEMENTS + 1) / SEGMENT_REFINEMENTS)[:, None]
    pieces = [nodes[:1]]
    for i in range(n_seg):
        pieces.append(nodes[i] + j * (nodes[i + 1] - nodes[i]))
    return np.concatenate(pieces, axis=0)


def _candidate_mask(gaps: np.ndarray, delta: float) -> np.ndarray:
    """Admissible scan points: all strictly earlier samples stayed < delta.

    The first sample at which the curve reaches gap >= delta is still a
    candidate (its strict predecessors were all inside); everything after
    it is not.
    """
    exited = gaps >= delta
    earlier_exits = np.cumsum(exited, axis=-1) - exited
    return earlier_exits == 0


def check_curve(h: IntegrableH, curve: CurveSample, constants) -> CurveCheck:
    """Scan one curve for a transversality witness.

    ``constants`` is ``(p_k, C_k)`` or ``(p_k, C_k, delta_k)``; with a
    ``delta_k`` present the endpoint gap must satisfy ``delta < delta_k``.
    The curve is sampled at its nodes plus 16 uniform subdivisions per
    segment.  Scanning in parameter order, a sample is a candidate while
    every strictly earlier sample had ``|gamma(t) - gamma(0)| < delta``;
    the witness is the first candidate whose projected gradient strictly
    exceeds ``C_k * delta**p_k``.  Without a witness the check reports the
    maximal projected gradient seen over the candidates.
    """
    if len(constants) == 3:
        p_k, c_k, delta_k = constants
        if not curve.delta < delta_k:
            raise ValueError("endpoint gap delta must be < delta_k")
    else:
        p_k, c_k = constants
    if c_k <= 0.0 or p_k <= 0.0:
        raise ValueError("steepness constants p_k, C_k must be positive")
    delta = curve.delta
    threshold = c_k * delta**p_k

    params = _refine_params(curve.nodes.shape[0])
    pts = _refine_nodes(curve.nodes)
    gaps = np.linalg.norm(pts - pts[0], axis=1)
    cand = _candidate_mask(gaps, delta)
    grads = _grad_rows(h, pts[cand])
    proj = np.linalg.norm(grads @ curve.subspace.basis, axis=1)
    cand_params = params[cand]

    max_projection = float(np.max(proj))
    above = np.nonzero(proj > threshold)[0]
    if above.size:
        i = int(above[0])
        return CurveCheck(
            witness_t=float(cand_params[i]),
            witness_point=pts[cand][i],
            max_projection=max_projection,
            threshold=threshold,
            delta=delta,
        )
    return CurveCheck(
        witness_t=None,
        witness_point=None,
        max_projection=max_projection,
        threshold=threshold,
        delta=delta,
    )


def default_constants(h: IntegrableH) -> tuple:
    """Constants (p_k, C_k, delta_k) tested by default for power-law h.

    For h(I) = sum I_i**p the tested index is p - 1 with unit constants;
    other integrable parts carry no default and must be given explicitly.
    """
    if isinstance(h, PowerLaw):
        return (float(h.p - 1), 1.0, 1.0)
    raise ValueError(
        "no default steepness constants for this h; pass constants=(p_k, C_k, delta_k)"
    )


def _default_delta_grid(delta_k: float) -> tuple:
    grid = [0.01, 0.05, 0.1, 0.25, 0.5 * delta_k]
    return tuple(sorted(set(g for g in grid if g < delta_k)))


def _sample_section(rng, n, k, rho, min_radius):
    """Random affine section with enough in-plane room for the curves.

    Returns (subspace, center, r_sec): ``center`` is the point of the
    subspace closest to the origin and ``r_sec`` the radius of the disc
    the subspace cuts out of B_rho.  Subspaces whose section is too small
    to host the curve family are resampled deterministically.
    """
    for _ in range(200):
        basepoint = _ball_point(rng, n, rho)
        basis = _haar_basis(rng, n, k)
        center = basepoint - basis @ (basis.T @ basepoint)
        r_sq = rho * rho - float(center @ center)
        if r_sq <= 0.0:  # pragma: no cover - basepoint inside the ball
            continue
        r_sec = math.sqrt(r_sq)
        if r_sec >= min_radius:
            return SubspaceSample(basepoint, basis), center, r_sec
    raise RuntimeError(
        "could not sample a subspace section large enough for the delta grid"
    )


def _straight_nodes(rng, k, delta, r_sec, n_nodes=MAX_CURVE_NODES):
    """Straight segment with endpoint gap delta, in section coordinates."""
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v)
    r_mid = max(r_sec - 0.5 * delta, 0.0) * 0.98
    mid = _ball_point(rng, k, r_mid) if r_mid > 0.0 else np.zeros(k)
    t = np.linspace(-0.5, 0.5, n_nodes)[:, None]
    return mid + t * (delta * v)


def _walk_nodes(rng, k, delta, r_sec):
    """Random piecewise-linear curve with endpoint gap exactly delta.

    A drifting random walk is rescaled so its endpoints are delta apart,
    then anchored uniformly inside the section; walks too wide for the
    section are re-drawn, with a straight segment as the final fallback.
    """
    for _ in range(50):
        n_nodes = int(rng.integers(3, MAX_CURVE_NODES + 1))
        v = rng.standard_normal(k)
        v /= np.linalg.norm(v)
        steps = delta * (0.8 * v + 0.75 * rng.standard_normal((n_nodes - 1, k)))
        w = np.vstack([np.zeros((1, k)), np.cumsum(steps, axis=0)])
        disp = np.linalg.norm(w[-1])
        if disp < 1e-12:
            continue
        w *= delta / disp
        mid = 0.5 * (w.min(axis=0) + w.max(axis=0))
        r_walk = float(np.max(np.linalg.norm(w - mid, axis=1)))
        room = 0.995 * r_sec - r_walk
        if room <= 0.0:
            continue
        anchor = _ball_point(rng, k, room)
        nodes = (anchor - mid) + w
        if n_nodes < MAX_CURVE_NODES:  # pad so batches share one shape
            pad = np.repeat(nodes[-1:], MAX_CURVE_NODES - n_nodes, axis=0)
            nodes = np.vstack([nodes, pad])
        return nodes
    return _straight_nodes(rng, k, delta, r_sec)


def _batch_margins(h, basis, center, local_nodes, delta, threshold):
    """Margins for a batch of curves given as local-coordinate node arrays."""
    n_curves = local_nodes.shape[0]
    world = center + local_nodes @ basis.T  # (n_curves, nodes, n)
    pts = np.stack([_refine_nodes(world[i]) for i in range(n_curves)])
    gaps = np.linalg.norm(pts - pts[:, :1], axis=2)
    cand = _candidate_mask(gaps, delta)
    flat = pts.reshape(-1, pts.shape[2])
    proj = np.linalg.norm(_grad_rows(h, flat) @ basis, axis=1)
    proj = proj.reshape(pts.shape[0], pts.shape[1])
    masked = np.where(cand, proj, -np.inf)
    return masked.max(axis=1) - threshold, world


def check_steepness(
    h: IntegrableH,
    k=None,
    n_subspaces: int = 100,
    n_curves_per: int = 20,
    delta_grid=None,
    constants=None,
    seed: int = 0,
) -> SteepnessReport:
    """Monte Carlo search for violations of tested steepness constants.

    For each subspace dimension ``k`` (all of 1..n when omitted), draws
    ``n_subspaces`` affine subspaces (uniform basepoints in the action
    ball, Haar-random orthonormal directions) and, per subspace and per
    endpoint gap in ``delta_grid``, tests ``n_curves_per`` curves: one
    straight segment plus random piecewise-linear curves of at most 8
    nodes, all confined to the subspace's section of the ball.  Margins
    aggregate by min; a record fails when some curve's margin is negative,
    and the worst such curve is kept as the counterexample.  Fully
    deterministic for a given seed.
    """
    if constants is None:
        constants = default_constants(h)
    p_k, c_k, delta_k = (float(v) for v in constants)
    if min(p_k, c_k, delta_k) <= 0.0:
        raise ValueError("steepness constants must be positive")
    if delta_grid is None:
        delta_grid = _default_delta_grid(delta_k)
    else:
        delta_grid = tuple(float(d) for d in delta_grid)
        if not all(0.0 < d < delta_k for d in delta_grid):
            raise ValueError("every delta in the grid must satisfy 0 < delta < delta_k")
    if n_subspaces < 1 or n_curves_per < 1:
        raise ValueError("n_subspaces and n_curves_per must be >= 1")

    n = h.dimension
    rho = h.radius
    if k is None:
        ks = tuple(range(1, n + 1))
    elif np.isscalar(k):
        ks = (int(k),)
    else:
        ks = tuple(int(v) for v in k)
    if not all(1 <= v <= n for v in ks):
        raise ValueError("subspace dimensions k must lie in 1..n")

    delta_max = max(delta_grid)
    min_radius = 0.55 * delta_max
    records = []
    for kk in ks:
        worst = math.inf
        n_viol = 0
        best_counter = None
        for i_sub in range(n_subspaces):
            rng = stream_rng(seed, kk, i_sub, 0)
            sub, center, r_sec = _sample_section(rng, n, kk, rho, min_radius)
            for i_delta, delta in enumerate(delta_grid):
                crng = stream_rng(seed, kk, i_sub, 1000 + i_delta)
                local = np.empty((n_curves_per, MAX_CURVE_NODES, kk))
                local[0] = _straight_nodes(crng, kk, delta, r_sec)
                for j in range(1, n_curves_per):
                    local[j] = _walk_nodes(crng, kk, delta, r_sec)
                threshold = c_k * delta**p_k
                margins, world = _batch_margins(
                    h, sub.basis, center, local, delta, threshold
                )
                n_viol += int(np.sum(margins < 0.0))
                i_min = int(np.argmin(margins))
                if margins[i_min] < worst:
                    worst = float(margins[i_min])
                    if worst < 0.0:
                        best_counter = (
                            CurveSample(sub, world[i_min]),
                            delta,
                            worst,
                        )
        rec = SteepnessRecord(
            k=kk,
            p_k=p_k,
            C_k=c_k,
            delta_k=delta_k,
            n_subspaces=n_subspaces,
            n_curves_per=n_curves_per,
            delta_grid=delta_grid,
            worst_margin=worst,
            n_violations=n_viol,
            counterexample=best_counter[0] if best_counter else None,
            counterexample_delta=best_counter[1] if best_counter else None,
            counterexample_margin=best_counter[2] if best_counter else None,
        )
        records.append(rec)
    return SteepnessReport(
        h_label=_h_label(h), rho=rho, seed=seed, records=tuple(records)
    )


def curve_to_csv(curve: CurveSample, path) -> None:
    """Write a curve's node list as CSV (node index + action coordinates)."""
    n = curve.nodes.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node"] + [f"I_{i + 1}" for i in range(n)])
        for i, node in enumerate(curve.nodes):
            writer.writerow([i] + [repr(float(v)) for v in node])
