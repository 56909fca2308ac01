"""Frequency arithmetic on the d-torus.

Distance-to-integer norms, brute-force Diophantine scans, rational-dependence
detection, and integer unimodular changes of variables. Everything here is a
pure function of its inputs; scans are deterministic regardless of chunking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import NotCoprime, NotUnimodular, ScanTooLarge

SCAN_GUARD = 10**9  # reject scans with K**d above this


def dist_to_Z(t):
    """Distance from t to the nearest integer, in [0, 1/2].

    Accepts a float or an ndarray; returns the matching type.
    """
    arr = np.asarray(t, dtype=float)
    out = np.abs(arr - np.round(arr))
    if np.ndim(t) == 0 and not isinstance(t, np.ndarray):
        return float(out)
    return out


@dataclass(frozen=True)
class Frequency:
    """A point of T^d; components are reduced mod 1 to [0, 1) on construction."""

    components: tuple

    def __init__(self, components: Sequence[float]):
        comps = tuple(float(c) - math.floor(float(c)) for c in components)
        if len(comps) == 0:
            raise ValueError("Frequency needs dimension d >= 1")
        object.__setattr__(self, "components", comps)

    @property
    def d(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=float)

    def split(self, d1: int) -> tuple["Frequency | None", "Frequency | None"]:
        """View as (omega_1, omega_2) over index ranges [0, d1) and [d1, d)."""
        if not 0 <= d1 <= self.d:
            raise ValueError(f"bad split index {d1} for d={self.d}")
        first = Frequency(self.components[:d1]) if d1 > 0 else None
        second = Frequency(self.components[d1:]) if d1 < self.d else None
        return first, second


def freq_norm(omega: Frequency, q: int) -> float:
    """Sum over components of dist_to_Z(q * omega_j)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return float(np.sum(dist_to_Z(q * omega.as_array())))


def torus_distance(a: Frequency, b: Frequency) -> float:
    """Distance on T^d as the sum of componentwise distances to Z.

    The choice of norm on R^d/Z^d is a convention; this is the one used by
    every scan in this package.
    """
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    return float(np.sum(dist_to_Z(a.as_array() - b.as_array())))


@dataclass(frozen=True)
class DiophantineReport:
    K: int
    delta: float
    argmin_k: tuple


def _check_guard(d: int, K: int) -> None:
    if K < 1:
        raise ValueError("K must be >= 1")
    if K**d > SCAN_GUARD:
        raise ScanTooLarge(f"K**d = {K}**{d} exceeds the scan guard {SCAN_GUARD}")


def _box_chunks(dims: int, K: int, max_rows: int) -> Iterator[np.ndarray]:
    """Full box [-K, K]^dims in lexicographic order, yielded in row chunks."""
    side = 2 * K + 1
    if side**dims <= max_rows:
        grids = np.meshgrid(*(np.arange(-K, K + 1, dtype=np.int64),) * dims,
                            indexing="ij")
        yield np.stack(grids, axis=-1).reshape(-1, dims)
        return
    if dims == 1:
        for start in range(-K, K + 1, max_rows):
            stop = min(K + 1, start + max_rows)
            yield np.arange(start, stop, dtype=np.int64).reshape(-1, 1)
        return
    for v in range(-K, K + 1):
        for chunk in _box_chunks(dims - 1, K, max_rows):
            lead = np.full((chunk.shape[0], 1), v, dtype=np.int64)
            yield np.hstack([lead, chunk])


def _half_lattice_chunks(d: int, K: int, max_rows: int = 1 << 19) -> Iterator[np.ndarray]:
    """Nonzero k in [-K, K]^d with first nonzero component positive, lex order.

    dist_to_Z(k . omega) is even in k, so scanning this canonical half-space is
    exhaustive, and lex order within it fixes the tie-break deterministically.
    """
    if d == 1:
        for start in range(1, K + 1, max_rows):
            stop = min(K + 1, start + max_rows)
            yield np.arange(start, stop, dtype=np.int64).reshape(-1, 1)
        return
    for chunk in _half_lattice_chunks(d - 1, K, max_rows):
        yield np.hstack([np.zeros((chunk.shape[0], 1), dtype=np.int64), chunk])
    for v in range(1, K + 1):
        for chunk in _box_chunks(d - 1, K, max_rows):
            lead = np.full((chunk.shape[0], 1), v, dtype=np.int64)
            yield np.hstack([lead, chunk])


def _tie_key(k_row: np.ndarray) -> tuple:
    return (int(np.max(np.abs(k_row))), tuple(int(v) for v in k_row))


def _best_in_chunk(chunk: np.ndarray, mask: np.ndarray) -> Optional[np.ndarray]:
    """Row of chunk[mask] minimizing (max-norm, lex); None if mask is empty."""
    if not mask.any():
        return None
    cand = chunk[mask]
    norms = np.max(np.abs(cand), axis=1)
    cand = cand[norms == norms.min()]
    order = np.lexsort(cand.T[::-1])  # lex by first column, then second, ...
    return cand[order[0]]


def min_dot_norm(omega: Frequency, K: int) -> DiophantineReport:
    """Exact brute-force minimum of dist_to_Z(k . omega) over 0 < |k| <= K.

    |k| is the max-norm. Ties: smallest |k| first, then lexicographic over the
    canonical half-space. Raises ScanTooLarge when K**d > 1e9.
    """
    _check_guard(omega.d, K)
    w = omega.as_array()
    best_val = math.inf
    best_key: Optional[tuple] = None
    best_k: Optional[np.ndarray] = None
    for chunk in _half_lattice_chunks(omega.d, K):
        vals = dist_to_Z(chunk @ w)
        cmin = float(vals.min())
        if cmin > best_val:
            continue
        row = _best_in_chunk(chunk, vals == cmin)
        key = _tie_key(row)
        if cmin < best_val or (best_key is not None and key < best_key):
            best_val, best_key, best_k = cmin, key, row
    assert best_k is not None
    return DiophantineReport(K=K, delta=best_val,
                             argmin_k=tuple(int(v) for v in best_k))


def rational_dependence(omega: Frequency, K: int, tol: float) -> Optional[tuple]:
    """Some k with 0 < |k| <= K and dist_to_Z(k . omega) <= tol, or None.

    Returns the smallest such k by (max-norm, lex). With tol=0 this detects
    exact integer values of k . omega in floating point.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    _check_guard(omega.d, K)
    w = omega.as_array()
    best_key: Optional[tuple] = None
    best_k: Optional[np.ndarray] = None
    for chunk in _half_lattice_chunks(omega.d, K):
        vals = dist_to_Z(chunk @ w)
        row = _best_in_chunk(chunk, vals <= tol)
        if row is None:
            continue
        key = _tie_key(row)
        if best_key is None or key < best_key:
            best_key, best_k = key, row
        if omega.d == 1:
            break  # 1-d chunks arrive in (max-norm, lex) order already
    if best_k is None:
        return None
    return tuple(int(v) for v in best_k)


# ---------------------------------------------------------------------------
# Integer unimodular automorphisms
# ---------------------------------------------------------------------------

def _int_det(rows: list) -> int:
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = 0
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * rows[0][j] * _int_det(minor)
    return total


def _adjugate(rows: list) -> list:
    n = len(rows)
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(rows) if k != i]
            adj[j][i] = (-1) ** (i + j) * _int_det(minor) if n > 1 else 1
    return adj


@dataclass(frozen=True)
class Automorphism:
    """B in SL_d(Z) with its exact integer inverse attached."""

    entries: tuple
    inverse: tuple

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[int]]) -> "Automorphism":
        rows = [[int(v) for v in r] for r in entries]
        d = len(rows)
        if any(len(r) != d for r in rows):
            raise ValueError("entries must be a square matrix")
        det = _int_det(rows)
        if det != 1:
            raise NotUnimodular(f"determinant is {det}, need +1")
        inv = _adjugate(rows)  # det == 1, so the adjugate is the inverse
        ident = [[sum(rows[i][k] * inv[k][j] for k in range(d)) for j in range(d)]
                 for i in range(d)]
        assert ident == [[int(i == j) for j in range(d)] for i in range(d)]
        return cls(entries=tuple(tuple(r) for r in rows),
                   inverse=tuple(tuple(r) for r in inv))

    @property
    def d(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def inverse_array(self) -> np.ndarray:
        return np.array(self.inverse, dtype=np.int64)

    def map_frequency(self, omega: Frequency) -> Frequency:
        return Frequency(self.as_array() @ omega.as_array())

    def inverse_map_frequency(self, omega: Frequency) -> Frequency:
        return Frequency(self.inverse_array() @ omega.as_array())


def _complete_two(k1: int, k2: int) -> list:
    """Second row (x, y) with k1*y - k2*x = 1 and max(|x|,|y|) <= max(|k1|,|k2|)."""
    m = max(abs(k1), abs(k2))
    if k2 == 0:
        s = 1 if k1 > 0 else -1  # k1 = +-1
        return [0, s]
    if k1 == 0:
        s = 1 if k2 > 0 else -1
        return [-s, 0]
    g, u, v = _ext_gcd(k1, k2)
    assert g == 1
    a, b = -v, u  # k1*b - k2*a = k1*u + k2*v = 1
    # The solution line is (a, b) + t*(k1, k2); take the integer t minimizing
    # the sup-norm, found near the crossings of |a + t*k1| and |b + t*k2|.
    cands = set()
    for num, den in ((b - a, k1 - k2), (-(a + b), k1 + k2), (-a, k1), (-b, k2)):
        if den != 0:
            t0 = num / den
            cands.update({math.floor(t0) - 1, math.floor(t0), math.ceil(t0),
                          math.ceil(t0) + 1})
    best = min(((max(abs(a + t * k1), abs(b + t * k2)), t) for t in cands))
    t = best[1]
    x, y = a + t * k1, b + t * k2
    assert k1 * y - k2 * x == 1 and max(abs(x), abs(y)) <= m
    return [x, y]


def _ext_gcd(a: int, b: int) -> tuple:
    """(g, u, v) with u*a + v*b = g = gcd(a, b), g >= 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_u, u = u, old_u - q * u
        old_v, v = v, old_v - q * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def _complete_first_row(k: tuple) -> list:
    """Rows of a det +1 integer matrix with first row k, entries <= max|k_l|."""
    d = len(k)
    if d == 2:
        return [list(k), _complete_two(k[0], k[1])]
    prefix, kd = k[:-1], k[-1]
    g = math.gcd(*(abs(v) for v in prefix))
    if g == 0:
        # prefix all zero, so kd = +-1; basis rows complete it
        rows = [list(k)] + [[int(i == j) for j in range(d)] for i in range(d - 1)]
        if _int_det(rows) == -1:
            rows[-1] = [-v for v in rows[-1]]
        return rows
    kp = tuple(v // g for v in prefix)
    sub = _complete_first_row(kp)  # (d-1) x (d-1), first row kp
    gg, u, v = _ext_gcd(g, kd)
    assert gg == 1
    if g > 1:
        # balance v mod g so the last row stays within the entry bound
        t = (v + g // 2) // g if v >= 0 else -((-v + g // 2) // g)
        v -= t * g
        u += t * kd
        assert u * g + v * kd == 1
    rows = [list(k)]
    for r in sub[1:]:
        rows.append(list(r) + [0])
    rows.append([-v * kpj for kpj in kp] + [u])
    return rows


def build_automorphism(k: Sequence[int]) -> Automorphism:
    """Complete the integer vector k (gcd 1) to B in SL_d(Z) with first row k.

    All entries of B are bounded by max|k_l| in absolute value; the exact
    integer inverse is attached. Raises NotCoprime when gcd(k) != 1.
    """
    kt = tuple(int(v) for v in k)
    if len(kt) == 0:
        raise ValueError("k must be nonempty")
    g = math.gcd(*(abs(v) for v in kt)) if len(kt) > 1 else abs(kt[0])
    if g != 1:
        raise NotCoprime(f"gcd{kt} = {g}, need 1")
    if len(kt) == 1:
        if kt[0] != 1:
            raise NotCoprime("d=1 admits only k=(1,): no det +1 completion of (-1,)")
        return Automorphism.from_entries([[1]])
    rows = _complete_first_row(kt)
    m = max(abs(v) for v in kt)
    assert all(abs(v) <= m for r in rows for v in r), "entry bound violated"
    det = _int_det(rows)
    assert det == 1, f"internal completion error: det = {det}"
    return Automorphism.from_entries(rows)
