"""k-th-nearest-neighbor manifolds, membership tests, precision and coverage.

A manifold over a reference set is the union of per-point hyperspheres,
each with radius equal to that point's Euclidean distance to its k-th
nearest other reference point (self excluded, k defaults to 3).

Precision is the fraction of generated points inside at least one
hypersphere, over a caller-supplied total that may exceed the embedded
row count (items with no object segmentation count in the denominator
only).  Coverage is the fraction of reference points whose hypersphere
contains at least one generated point.

Numeric contract: all squared distances are accumulated in float64 and
membership compares squared distances against squared radii, boundary
inclusive.  The fast path expands ||a-b||^2 = |a|^2 + |b|^2 - 2ab per
block, then routes every comparison that lands within a conservative
rounding margin of its decision boundary through direct differencing,
the same elementary kernel ``brute_force_oracle`` uses for everything.
Radii are likewise selected from directly-differenced candidates.  The
fast path therefore reproduces the oracle's radii and membership
booleans bit for bit, duplicates and exact ties included, while staying
one matrix product per block for the overwhelming majority of entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, TooFewPoints, ZeroDenominator

DEFAULT_K = 3

# Rows per block in the pairwise-distance passes.  Sized so a block of
# squared distances against ~30k reference rows stays a few hundred MB.
BLOCK_ROWS = 1024

# The Gram expansion's rounding error is below eps*d*(|a|^2+|b|^2) by a
# wide margin; comparisons closer than this to their boundary are re-run
# on directly-differenced values.  1e-9 leaves 3+ orders of headroom at
# d=768 and still makes recomputation rare on continuous data.
_BOUNDARY_RTOL = 1e-9


def _as_matrix(x) -> np.ndarray:
    vectors = getattr(x, "vectors", x)
    arr = np.asarray(vectors)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def _item_ids(x) -> tuple[str, ...] | None:
    records = getattr(x, "records", None)
    if records is None:
        return None
    return tuple(r.item_id for r in records)


def _sq_dists(a64: np.ndarray, a_sqn: np.ndarray,
              b64: np.ndarray, b_sqn: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of two float64 blocks,
    by Gram expansion (fast, approximately rounded)."""
    d2 = a_sqn[:, None] + b_sqn[None, :]
    d2 -= 2.0 * (a64 @ b64.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _exact_sq_dists(rows64: np.ndarray, point64: np.ndarray) -> np.ndarray:
    """Directly-differenced squared distances from one point to each row.

    This is the reference kernel: identical operations (and therefore
    identical floats) to the brute-force oracle's inner loop.
    """
    diff = rows64 - point64
    return (diff * diff).sum(axis=1)


def _hits_block(gen64: np.ndarray, gen_sqn: np.ndarray,
                ref64: np.ndarray, ref_sqn: np.ndarray,
                radii_sq: np.ndarray) -> np.ndarray:
    """Boundary-inclusive membership booleans, (gen row, ref row) indexed.

    Gram-expanded comparisons within the rounding margin of the boundary
    are re-decided on exact distances, so every boolean equals the
    oracle's.
    """
    d2 = _sq_dists(gen64, gen_sqn, ref64, ref_sqn)
    hit = d2 <= radii_sq[None, :]
    near = np.abs(d2 - radii_sq[None, :]) \
        <= _BOUNDARY_RTOL * (gen_sqn[:, None] + ref_sqn[None, :])
    if near.any():
        for i in np.flatnonzero(near.any(axis=1)):
            cols = np.flatnonzero(near[i])
            exact = _exact_sq_dists(ref64[cols], gen64[i])
            hit[i, cols] = exact <= radii_sq[cols]
    return hit


@dataclass(frozen=True)
class Manifold:
    """Per-reference-point hypersphere radii over one embedding slice."""

    reference_vectors: np.ndarray
    radii: np.ndarray          # Euclidean k-NN distances, for reporting
    radii_sq: np.ndarray       # squared radii, authoritative for membership
    k: int
    item_ids: tuple[str, ...] | None = None
    # float64 copies reused by the membership passes
    _ref64: np.ndarray | None = None
    _ref_sqnorms: np.ndarray | None = None

    def __len__(self) -> int:
        return self.radii.shape[0]

    @property
    def dimension(self) -> int:
        return self.reference_vectors.shape[1]

    def ref64(self) -> tuple[np.ndarray, np.ndarray]:
        ref = self._ref64
        sqn = self._ref_sqnorms
        if ref is None:
            ref = np.asarray(self.reference_vectors, dtype=np.float64)
            sqn = np.einsum("ij,ij->i", ref, ref)
        return ref, sqn


def build_manifold(reference, k: int = DEFAULT_K,
                   block_rows: int = BLOCK_ROWS) -> Manifold:
    """Radii = distance from each reference row to its k-th nearest other
    reference row.  Deterministic for fixed input; raises TooFewPoints
    when the slice has fewer than k+1 rows."""
    ref = _as_matrix(reference)
    n = ref.shape[0]
    if k < 1:
        raise TooFewPoints(f"k must be >= 1, got {k}")
    if n <= k:
        raise TooFewPoints(f"need more than k={k} reference points, got {n}")
    ref64 = np.asarray(ref, dtype=np.float64)
    sqn = np.einsum("ij,ij->i", ref64, ref64)
    max_sqn = float(sqn.max())
    radii_sq = np.empty(n, dtype=np.float64)
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        d2 = _sq_dists(ref64[start:stop], sqn[start:stop], ref64, sqn)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for local, j in enumerate(range(start, stop)):
            # every row whose exact distance could be among the k smallest
            margin = 2.0 * _BOUNDARY_RTOL * (sqn[j] + max_sqn)
            cand = np.flatnonzero(d2[local] <= kth[local] + margin)
            exact = _exact_sq_dists(ref64[cand], ref64[j])
            radii_sq[j] = np.partition(exact, k - 1)[k - 1]
    return Manifold(
        reference_vectors=ref,
        radii=np.sqrt(radii_sq),
        radii_sq=radii_sq,
        k=k,
        item_ids=_item_ids(reference),
        _ref64=ref64,
        _ref_sqnorms=sqn,
    )


@dataclass(frozen=True)
class MembershipMatrix:
    """Boolean hypersphere membership, indexed (reference row, generated row)."""

    entries: np.ndarray
    ref_item_ids: tuple[str, ...] | None = None
    gen_item_ids: tuple[str, ...] | None = None

    @property
    def gen_inside(self) -> np.ndarray:
        """Per generated row: inside at least one hypersphere (realism indicator)."""
        return self.entries.any(axis=0)

    @property
    def ref_covered(self) -> np.ndarray:
        """Per reference row: hypersphere contains at least one generated row
        (diversity indicator)."""
        return self.entries.any(axis=1)

    @property
    def per_ref_counts(self) -> np.ndarray:
        """Number of generated rows inside each reference hypersphere."""
        return self.entries.sum(axis=1)


@dataclass(frozen=True)
class MembershipProfile:
    """Blocked membership reduction without the full boolean matrix."""

    gen_inside: np.ndarray
    ref_covered: np.ndarray
    per_ref_counts: np.ndarray


def _check_dims(manifold: Manifold, gen: np.ndarray) -> None:
    if gen.shape[1] != manifold.dimension:
        raise DimensionMismatch(
            f"generated dimension {gen.shape[1]} != reference dimension "
            f"{manifold.dimension}")


def membership(manifold: Manifold, generated) -> MembershipMatrix:
    """Full boolean matrix: entries[j, i] iff generated row i lies within
    reference row j's hypersphere (boundary inclusive).

    Materializes n_ref x n_gen booleans; intended for per-cell workloads.
    The blocked :func:`membership_profile` serves full-scale metric runs.
    """
    gen = _as_matrix(generated)
    _check_dims(manifold, gen)
    n_gen = gen.shape[0]
    entries = np.zeros((len(manifold), n_gen), dtype=bool)
    ref64, ref_sqn = manifold.ref64()
    gen64 = np.asarray(gen, dtype=np.float64)
    gen_sqn = np.einsum("ij,ij->i", gen64, gen64)
    for start in range(0, n_gen, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n_gen)
        hit = _hits_block(gen64[start:stop], gen_sqn[start:stop],
                          ref64, ref_sqn, manifold.radii_sq)
        entries[:, start:stop] = hit.T
    return MembershipMatrix(
        entries=entries,
        ref_item_ids=manifold.item_ids,
        gen_item_ids=_item_ids(generated),
    )


def membership_profile(manifold: Manifold, generated,
                       block_rows: int = BLOCK_ROWS) -> MembershipProfile:
    """Membership indicators computed block by block.

    Never holds more than one block of squared distances, so memory is
    O(block_rows x n_ref) regardless of the generated row count.
    """
    gen = _as_matrix(generated)
    _check_dims(manifold, gen)
    n_ref, n_gen = len(manifold), gen.shape[0]
    gen_inside = np.zeros(n_gen, dtype=bool)
    ref_covered = np.zeros(n_ref, dtype=bool)
    per_ref_counts = np.zeros(n_ref, dtype=np.int64)
    ref64, ref_sqn = manifold.ref64()
    gen64 = np.asarray(gen, dtype=np.float64)
    gen_sqn = np.einsum("ij,ij->i", gen64, gen64)
    for start in range(0, n_gen, block_rows):
        stop = min(start + block_rows, n_gen)
        hit = _hits_block(gen64[start:stop], gen_sqn[start:stop],
                          ref64, ref_sqn, manifold.radii_sq)
        gen_inside[start:stop] = hit.any(axis=1)
        ref_covered |= hit.any(axis=0)
        per_ref_counts += hit.sum(axis=0)
    return MembershipProfile(gen_inside, ref_covered, per_ref_counts)


@dataclass(frozen=True)
class MetricResult:
    """Precision and coverage with their exact integer numerators and
    denominators."""

    precision: float
    coverage: float
    n_generated_total: int
    n_generated_embedded: int
    n_real: int
    inside_count: int
    covered_count: int


def precision(manifold: Manifold, generated, n_generated_total: int) -> float:
    """Fraction of generated rows inside at least one hypersphere, over
    ``n_generated_total`` (which includes items with no embedded row)."""
    gen = _as_matrix(generated)
    if n_generated_total == 0:
        raise ZeroDenominator("n_generated_total is 0")
    if n_generated_total < gen.shape[0]:
        raise ValueError(
            f"n_generated_total {n_generated_total} < embedded rows {gen.shape[0]}")
    profile = membership_profile(manifold, gen)
    return int(profile.gen_inside.sum()) / n_generated_total


def coverage(manifold: Manifold, generated) -> float:
    """Fraction of reference rows whose hypersphere contains at least one
    generated row."""
    if len(manifold) == 0:
        raise ZeroDenominator("empty reference set")
    profile = membership_profile(manifold, generated)
    return int(profile.ref_covered.sum()) / len(manifold)


def compute_metrics(manifold: Manifold, generated,
                    n_generated_total: int | None = None,
                    profile: MembershipProfile | None = None) -> MetricResult:
    """Precision and coverage in one pass over the generated rows."""
    gen = _as_matrix(generated)
    n_embedded = gen.shape[0]
    if n_generated_total is None:
        n_generated_total = n_embedded
    if n_generated_total == 0:
        raise ZeroDenominator("n_generated_total is 0")
    if n_generated_total < n_embedded:
        raise ValueError(
            f"n_generated_total {n_generated_total} < embedded rows {n_embedded}")
    if len(manifold) == 0:
        raise ZeroDenominator("empty reference set")
    if profile is None:
        profile = membership_profile(manifold, gen)
    inside = int(profile.gen_inside.sum())
    covered = int(profile.ref_covered.sum())
    return MetricResult(
        precision=inside / n_generated_total,
        coverage=covered / len(manifold),
        n_generated_total=int(n_generated_total),
        n_generated_embedded=n_embedded,
        n_real=len(manifold),
        inside_count=inside,
        covered_count=covered,
    )


@dataclass(frozen=True)
class OracleResult:
    precision: float
    coverage: float
    gen_inside: np.ndarray
    ref_covered: np.ndarray
    radii_sq: np.ndarray

    def __iter__(self):
        return iter((self.precision, self.coverage))


def brute_force_oracle(reference, generated, k: int = DEFAULT_K,
                       n_generated_total: int | None = None) -> OracleResult:
    """Exhaustive O(n^2) recomputation of precision and coverage.

    No blocking, no Gram expansion, no selection shortcuts: every pairwise
    squared distance is formed by direct differencing and each radius by
    sorting a full row.  Intended for small inputs (n <= a few hundred);
    the fast path must match it exactly.
    """
    ref64 = np.asarray(_as_matrix(reference), dtype=np.float64)
    gen64 = np.asarray(_as_matrix(generated), dtype=np.float64)
    n_ref, n_gen = ref64.shape[0], gen64.shape[0]
    if k < 1:
        raise TooFewPoints(f"k must be >= 1, got {k}")
    if n_ref <= k:
        raise TooFewPoints(f"need more than k={k} reference points, got {n_ref}")
    if gen64.shape[1] != ref64.shape[1]:
        raise DimensionMismatch(
            f"generated dimension {gen64.shape[1]} != reference dimension "
            f"{ref64.shape[1]}")
    if n_generated_total is None:
        n_generated_total = n_gen
    if n_generated_total == 0:
        raise ZeroDenominator("n_generated_total is 0")
    if n_generated_total < n_gen:
        raise ValueError(
            f"n_generated_total {n_generated_total} < embedded rows {n_gen}")

    radii_sq = np.empty(n_ref, dtype=np.float64)
    ref_covered = np.zeros(n_ref, dtype=bool)
    gen_inside = np.zeros(n_gen, dtype=bool)
    for j in range(n_ref):
        diff = ref64 - ref64[j]
        d2 = (diff * diff).sum(axis=1)
        d2 = np.delete(d2, j)  # exclude self by index, not by value
        d2.sort()
        radii_sq[j] = d2[k - 1]
        if n_gen:
            gdiff = gen64 - ref64[j]
            gd2 = (gdiff * gdiff).sum(axis=1)
            hit = gd2 <= radii_sq[j]
            ref_covered[j] = bool(hit.any())
            gen_inside |= hit
    return OracleResult(
        precision=int(gen_inside.sum()) / n_generated_total,
        coverage=int(ref_covered.sum()) / n_ref,
        gen_inside=gen_inside,
        ref_covered=ref_covered,
        radii_sq=radii_sq,
    )
