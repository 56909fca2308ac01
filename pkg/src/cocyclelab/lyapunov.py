"""Finite-scale Lyapunov exponents by quadrature over T^d.

Two scale families are computed: L'_N, the plain averaged log-norm of the
N-fold product, and L_N, the same quantity for the determinant-renormalized
cocycle. They are tied together by

    L_N = L'_N - (1/2) * integral of ln|det A(x)| dx,

which this module exposes as three independent computations (the two exponent
routes plus the determinant integral) so the identity stays checkable instead
of being true by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._util import fmt17, halton, pairwise_total
from .cocycle import (
    Cocycle,
    TrigPolyMatrix,
    det_scalar,
    iterate_log_norm_many,
    renormalize,
    strip_norm,
)
from .errors import AllSamplesSingular, IdenticallySingular, ScanTooLarge

# Memory guard for explicit node sets.
MAX_NODES = 1 << 22

DEFAULT_CLIP_FLOOR = math.exp(-700.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """A concrete discretization of the integral over T^d.

    kind "uniform-grid" uses the midpoint grid ((i + 1/2)/M per axis), which
    keeps log-singularities of the integrands off the nodes and stays closed
    under rational shifts p/q when q divides M. The other kinds fill the torus
    with Halton points or seeded uniform samples. Weights are always equal.
    """

    kind: str = "uniform-grid"
    points_per_dim: Optional[int] = None
    total_points: Optional[int] = None
    seed: int = 0
    clip_floor: float = DEFAULT_CLIP_FLOOR

    def __post_init__(self):
        if self.kind not in ("uniform-grid", "low-discrepancy", "monte-carlo"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.kind == "uniform-grid":
            if not self.points_per_dim or self.points_per_dim < 1:
                raise ValueError("uniform-grid needs points_per_dim >= 1")
        else:
            if not self.total_points or self.total_points < 1:
                raise ValueError(f"{self.kind} needs total_points >= 1")
        if self.clip_floor <= 0:
            raise ValueError("clip_floor must be positive")

    def count(self, d: int) -> int:
        if self.kind == "uniform-grid":
            return self.points_per_dim ** d
        return self.total_points

    def nodes(self, d: int) -> np.ndarray:
        n = self.count(d)
        if n > MAX_NODES:
            raise ScanTooLarge(f"{n} quadrature nodes exceeds guard {MAX_NODES}")
        if self.kind == "uniform-grid":
            M = self.points_per_dim
            axis = (np.arange(M) + 0.5) / M
            grids = np.meshgrid(*(axis,) * d, indexing="ij")
            return np.stack(grids, axis=-1).reshape(-1, d)
        if self.kind == "low-discrepancy":
            return halton(n, d)
        return np.random.default_rng(self.seed).random((n, d))


def default_quadrature(d: int) -> QuadratureSpec:
    if d == 1:
        return QuadratureSpec(kind="uniform-grid", points_per_dim=4096)
    if d == 2:
        return QuadratureSpec(kind="uniform-grid", points_per_dim=128)
    return QuadratureSpec(kind="low-discrepancy", total_points=65536)


@dataclass(frozen=True)
class LEEstimate:
    N: int
    value: float
    excised_mass: float
    quad: QuadratureSpec = field(repr=False, compare=False)
    stderr: float = 0.0


def _mean_and_stderr(vals: np.ndarray) -> Tuple[float, float]:
    n = vals.size
    mean = pairwise_total(vals) / n
    if n < 2:
        return mean, 0.0
    var = pairwise_total((vals - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def L_prime_N(C: Cocycle, N: int, quad: Optional[QuadratureSpec] = None) -> LEEstimate:
    """L'_N(A, omega): node average of (1/N) ln ||A_N(x)||.

    Underflowed nodes (the product degenerated below 1e-300) are excised and
    the retained weights renormalized; the dropped fraction is reported as
    excised_mass.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    quad = default_quadrature(C.d) if quad is None else quad
    X = quad.nodes(C.d)
    avg, under = iterate_log_norm_many(C, N, X)
    keep = ~under
    kept = int(np.count_nonzero(keep))
    if kept == 0:
        raise AllSamplesSingular(f"all {X.shape[0]} nodes underflowed at N={N}")
    value, stderr = _mean_and_stderr(avg[keep])
    return LEEstimate(N=N, value=value, excised_mass=1.0 - kept / X.shape[0],
                      quad=quad, stderr=stderr)


def L_N_renormalized(C: Cocycle, N: int, quad: Optional[QuadratureSpec] = None,
                     floor: float = 1e-300) -> LEEstimate:
    """L_N(A, omega): L'_N of the pointwise-renormalized cocycle A/|det A|^{1/2}.

    Computed by iterating the renormalized evaluator directly, not by
    correcting L'_N with the determinant integral; the two routes are compared
    in tests and experiments, never merged.
    """
    rn = renormalize(C.A, floor=floor)
    return L_prime_N(Cocycle(rn, C.omega), N, quad)


@dataclass(frozen=True)
class DetLogIntegral:
    """Quadrature of ln|det A(x)| with explicit clipping accounting."""

    value: float
    clipped_mass: float
    nodes: int

    def __float__(self) -> float:
        return self.value


def det_log_integral(A, quad: Optional[QuadratureSpec] = None) -> DetLogIntegral:
    """Integral of ln|det A(x)| over T^d.

    The integrand is clipped below at ln(clip_floor) instead of excised: the
    singularity here is explicit and log-integrable, so clipping converges as
    the floor drops, and the clipped fraction is reported.
    """
    if isinstance(A, TrigPolyMatrix) and det_scalar(A).is_zero():
        raise IdenticallySingular("det A is identically zero")
    quad = default_quadrature(A.d) if quad is None else quad
    X = quad.nodes(A.d)
    vals = A.eval_many(X)
    det = vals[:, 0, 0] * vals[:, 1, 1] - vals[:, 0, 1] * vals[:, 1, 0]
    mag = np.abs(det)
    clipped = mag < quad.clip_floor
    logs = np.log(np.maximum(mag, quad.clip_floor))
    value = pairwise_total(logs) / logs.size
    return DetLogIntegral(value=value,
                          clipped_mass=float(np.count_nonzero(clipped)) / logs.size,
                          nodes=logs.size)


@dataclass(frozen=True)
class ExtrapolationResult:
    """L'_N along a scale schedule with Cauchy increments.

    The limit proxy is the final entry; increments |L_{N_{i+1}} - L_{N_i}| are
    the quality metric. No power-law extrapolation is attempted: subadditive
    sequences need not follow one.
    """

    table: List[LEEstimate]
    limit: float
    increments: List[float]


def le_extrapolate(C: Cocycle, schedule: Sequence[int],
                   quad: Optional[QuadratureSpec] = None) -> ExtrapolationResult:
    if len(schedule) < 1:
        raise ValueError("schedule must be nonempty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    table = [L_prime_N(C, int(N), quad) for N in schedule]
    incs = [abs(b.value - a.value) for a, b in zip(table, table[1:])]
    return ExtrapolationResult(table=table, limit=table[-1].value, increments=incs)


@dataclass(frozen=True)
class ModulusRow:
    delta: float
    diff: float


@dataclass(frozen=True)
class ModulusTable:
    """Empirical finite-scale continuity: |L_N(A) - L_N(B)| against ||A-B||_rho."""

    N: int
    rows: List[ModulusRow]
    envelope: List[ModulusRow]


def finite_scale_modulus(C: Cocycle, N: int,
                         perturbations: Sequence[TrigPolyMatrix],
                         quad: Optional[QuadratureSpec] = None) -> ModulusTable:
    """Continuity table of the distance ||A-B||_rho against |L_N(A) - L_N(B)|.

    All perturbed matrices must share d and rho with A. The envelope is the
    running max of |diff| with rows sorted by distance, a monotone summary of
    the observed modulus.
    """
    A = C.A
    if not isinstance(A, TrigPolyMatrix):
        raise TypeError("finite_scale_modulus needs a trig-polynomial cocycle")
    base = L_N_renormalized(C, N, quad)
    rows: List[ModulusRow] = []
    for B in perturbations:
        if B.d != A.d:
            raise ValueError("perturbation dimension mismatch")
        if abs(B.rho - A.rho) > 1e-12:
            raise ValueError("perturbation rho mismatch")
        delta = strip_norm(A, B, rho=A.rho).value
        other = L_N_renormalized(Cocycle(B, C.omega), N, quad)
        rows.append(ModulusRow(delta=delta, diff=abs(base.value - other.value)))
    env: List[ModulusRow] = []
    running = 0.0
    for r in sorted(rows, key=lambda r: r.delta):
        running = max(running, r.diff)
        env.append(ModulusRow(delta=r.delta, diff=running))
    return ModulusTable(N=N, rows=rows, envelope=env)


def le_table_to_csv(rows: Sequence[LEEstimate]) -> str:
    """CSV with the fixed header N,value,excised_mass,stderr."""
    lines = ["N,value,excised_mass,stderr"]
    for r in rows:
        lines.append(",".join([str(r.N), fmt17(r.value), fmt17(r.excised_mass),
                               fmt17(r.stderr)]))
    return "\n".join(lines) + "\n"
