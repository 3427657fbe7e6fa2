"""Min-entropy tools and the thin-slice partitioning of permutation images.

The partitioning procedure takes a point set S inside ({0,1}^n)^w and
repeatedly cuts out *bottleneck slices*: nonempty axis-aligned slices
(fix coordinate i to a value y) whose size is strictly below
2^(alpha_n*(w-1-eps1-eps2)). Cut slices for coordinate i accumulate in a
pile; when no slice qualifies any more, the remainder is R0 and each pile
either becomes the part C_i (when it holds more than 2^(alpha_n*(w-eps2))
points) or is swept into R1. By construction every i-slice of a kept C_i
is thinner than 2^(-(1+eps1)*alpha_n) * |C_i|, which is exactly a
per-coordinate min-entropy boost of the uniform distribution on C_i, and
|R1| never exceeds w * 2^((w-eps2)*alpha_n).

The residual bound |R0| <= 2^((1-eps3)*alpha_n*w) is conditional: it
needs every q-box V to satisfy |S ∩ V| < 2^(alpha_n*w*(1-eps1-eps2-eps3-
1/alpha_n)). ``verify_converse_bounds`` checks that precondition
exhaustively when it can and otherwise marks the bound unverified.

Slice scan order is pinned (coordinate ascending, then value ascending)
so reference traces are reproducible. Size-versus-threshold comparisons
go through :func:`size_below` / :func:`size_above`, which are exact
whenever the integer size is a power of two or the exponent is clear of
the unit interval around log2(size).
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from .boxes import PointSet, QBox, image_of_box
from .errors import RangeError, ShapeError, UndefinedEntropyError
from .perms import PermutationSpec, unpack_words

PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FiniteDistribution:
    """A probability distribution with finite, explicit support.

    Keys must be hashable and mutually orderable (ints, tuples, ...).
    """

    probs: dict

    def __post_init__(self):
        for x, p in self.probs.items():
            if p < 0:
                raise RangeError(f"negative probability {p} at {x!r}")
        if self.probs:
            total = sum(self.probs.values())
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                raise RangeError(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform_on(cls, outcomes) -> "FiniteDistribution":
        outcomes = list(outcomes)
        if not outcomes:
            raise UndefinedEntropyError("uniform distribution needs outcomes")
        p = 1.0 / len(outcomes)
        return cls({x: p for x in outcomes})

    @property
    def support(self):
        return [x for x, p in self.probs.items() if p > 0]


def min_entropy(dist: FiniteDistribution) -> float:
    """-log2 of the largest point probability."""
    probs = [p for p in dist.probs.values() if p > 0]
    if not probs:
        raise UndefinedEntropyError("min-entropy of an empty distribution")
    return -math.log2(max(probs))


@dataclass(frozen=True)
class FlatDecomposition:
    """Outcome of the flat-peeling construction.

    ``terms`` is a list of (weight, atoms) pairs; each atoms tuple has
    exactly 2^k outcomes and the weights are exact rationals summing to 1
    when ``ok``. ``residual_norm`` is the mass left unexplained.
    """

    ok: bool
    k: int
    terms: tuple
    residual_norm: float
    reason: str | None = None


def flat_decomposition_check(dist: FiniteDistribution, k: int) -> FlatDecomposition:
    """Certify that min-entropy >= k admits a convex combination of
    uniform distributions on size-2^k sets, by constructing one.

    Peels greedily: take the 2^k heaviest atoms (ties toward the smaller
    key), subtract the largest uniform chunk that keeps the residual
    inside the max-probability polytope, repeat. Runs on exact rationals,
    so accepted inputs always finish with a zero residual. A distribution
    with min-entropy below k yields ``ok=False`` rather than an error.
    """
    if k < 0:
        raise RangeError(f"k must be nonnegative, got {k}")
    if not dist.probs:
        raise UndefinedEntropyError("empty distribution")
    size = 1 << k
    residual = {x: Fraction(p) for x, p in dist.probs.items() if p > 0}
    norm = sum(residual.values())
    if max(residual.values()) * size > norm:
        return FlatDecomposition(
            ok=False,
            k=k,
            terms=(),
            residual_norm=float(norm),
            reason=f"min-entropy below {k}: some atom exceeds 2**-{k}",
        )

    terms = []
    guard = len(residual) + size + 8
    for _ in range(guard):
        if norm == 0:
            break
        order = sorted(residual, key=lambda x: (-residual[x], x))
        top, rest = order[:size], order[size:]
        mu = size * residual[top[-1]]
        if rest:
            mu = min(mu, norm - size * residual[rest[0]])
        share = Fraction(mu, size)
        for x in top:
            residual[x] -= share
            if residual[x] == 0:
                del residual[x]
        norm -= mu
        terms.append((mu, tuple(sorted(top))))
    else:
        raise AssertionError("flat peeling failed to terminate")

    return FlatDecomposition(
        ok=True, k=k, terms=tuple(terms), residual_norm=float(norm)
    )


# --- exact integer-versus-2^exponent comparisons ---------------------------


def size_below(size: int, exponent: float) -> bool:
    """Exact-where-possible test of ``size < 2**exponent`` for size >= 1."""
    j = size.bit_length() - 1
    if size == 1 << j:
        return j < exponent
    if exponent <= j:
        return False
    if exponent >= j + 1:
        return True
    return math.log2(size) < exponent


def size_above(size: int, exponent: float) -> bool:
    """Exact-where-possible test of ``size > 2**exponent`` for size >= 1."""
    j = size.bit_length() - 1
    if size == 1 << j:
        return j > exponent
    if exponent <= j:
        return True
    if exponent >= j + 1:
        return False
    return math.log2(size) > exponent


def _scaled_below(size: int, shift: float, limit: int) -> bool:
    """Exact-where-possible test of ``size * 2**shift < limit``."""
    if shift == int(shift):
        s = int(shift)
        lhs = size << s if s >= 0 else size
        rhs = limit if s >= 0 else limit << -s
        return lhs < rhs
    return math.log2(size) + shift < math.log2(limit)


# --- slices and the partitioning procedure ----------------------------------


@dataclass(frozen=True)
class Slice:
    """An axis-aligned slice: the points whose ``coord``-th word is ``value``."""

    coord: int
    value: int
    points: PointSet

    def __post_init__(self):
        for t in self.points.word_tuples():
            if t[self.coord] != self.value:
                raise ShapeError("slice contains a point off its hyperplane")


def cut_exponent(alpha_n: float, w: int, eps1: float, eps2: float) -> float:
    """Exponent of the bottleneck threshold 2^(alpha_n*(w-1-eps1-eps2))."""
    return alpha_n * (w - 1 - eps1 - eps2)


def keep_exponent(alpha_n: float, w: int, eps2: float) -> float:
    """Exponent of the pile-keeping threshold 2^(alpha_n*(w-eps2))."""
    return alpha_n * (w - eps2)


def find_bottleneck_slice(points: PointSet, alpha_n: float, eps1: float,
                          eps2: float) -> Slice | None:
    """First slice (coordinate ascending, then value ascending) whose size
    is strictly between 0 and the bottleneck threshold; None when no slice
    qualifies."""
    threshold = cut_exponent(alpha_n, points.w, eps1, eps2)
    tuples = points.word_tuples()
    for i in range(points.w):
        groups = defaultdict(list)
        for p, t in zip(points.points, tuples):
            groups[t[i]].append(p)
        for y in sorted(groups):
            if size_below(len(groups[y]), threshold):
                return Slice(i, y, PointSet(groups[y], points.n, points.w))
    return None


@dataclass(frozen=True)
class Decomposition:
    """Partition of a point set into per-coordinate parts and residuals.

    ``parts[i]`` collects the slices cut for coordinate i when their pile
    ended up large enough; otherwise the pile went to ``r1``. ``r0`` is
    what remained when no bottleneck slice was left. ``slice_log`` records
    every cut as (iteration, coordinate, value, size), 1-based iterations.
    """

    parts: tuple
    r0: PointSet
    r1: PointSet
    n: int
    w: int
    alpha_n: float
    eps1: float
    eps2: float
    slice_log: tuple = field(default_factory=tuple)

    @property
    def q(self) -> float:
        exact = 2.0 ** self.alpha_n
        return int(round(exact)) if abs(exact - round(exact)) < 1e-9 else exact

    def source_points(self) -> PointSet:
        merged = []
        for part in (*self.parts, self.r0, self.r1):
            merged.extend(part.points)
        return PointSet(merged, self.n, self.w)

    def validate(self) -> None:
        """Raise AssertionError on any violated structural invariant."""
        seen = set()
        for part in (*self.parts, self.r0, self.r1):
            overlap = seen & set(part.points)
            assert not overlap, f"parts overlap on {sorted(overlap)[:3]}"
            seen.update(part.points)
        keep_e = keep_exponent(self.alpha_n, self.w, self.eps2)
        for i, part in enumerate(self.parts):
            if not len(part):
                continue
            assert size_above(len(part), keep_e), (
                f"kept part {i} has only {len(part)} points"
            )
            cut_e = cut_exponent(self.alpha_n, self.w, self.eps1, self.eps2)
            shift = (1 + self.eps1) * self.alpha_n
            for _, count in slice_sizes(part, i).items():
                assert size_below(count, cut_e), "slice at/over cut threshold"
                assert _scaled_below(count, shift, len(part)), (
                    "slice too fat relative to its part"
                )
        r1_limit = self.w * 2.0 ** keep_e
        assert len(self.r1) <= r1_limit, f"|R1| = {len(self.r1)} over bound"
        assert len(self.slice_log) <= len(seen), "more cuts than points"

    def to_json_dict(self) -> dict:
        digits = -(-self.n * self.w // 4)

        def hex_points(ps):
            return [f"{p:0{digits}x}" for p in ps.points]

        return {
            "format": "condlab-decomposition v1",
            "n": self.n,
            "w": self.w,
            "alpha_n": self.alpha_n,
            "q": self.q,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "thresholds": {
                "cut_exponent": cut_exponent(self.alpha_n, self.w, self.eps1, self.eps2),
                "keep_exponent": keep_exponent(self.alpha_n, self.w, self.eps2),
            },
            "parts": {
                "C": [hex_points(p) for p in self.parts],
                "R0": hex_points(self.r0),
                "R1": hex_points(self.r1),
            },
            "slice_log": [
                [it, coord, f"{value:x}", size]
                for it, coord, value, size in self.slice_log
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Decomposition":
        n, w = d["n"], d["w"]

        def ps(items):
            return PointSet((int(h, 16) for h in items), n, w)

        return cls(
            parts=tuple(ps(part) for part in d["parts"]["C"]),
            r0=ps(d["parts"]["R0"]),
            r1=ps(d["parts"]["R1"]),
            n=n,
            w=w,
            alpha_n=d["alpha_n"],
            eps1=d["eps1"],
            eps2=d["eps2"],
            slice_log=tuple(
                (it, coord, int(value, 16), size)
                for it, coord, value, size in d["slice_log"]
            ),
        )


def slice_sizes(points: PointSet, coord: int) -> dict:
    """Value -> slice size along one coordinate."""
    sizes = defaultdict(int)
    for t in points.word_tuples():
        sizes[t[coord]] += 1
    return dict(sizes)


def decompose(points: PointSet, alpha_n: float, eps1: float, eps2: float) -> Decomposition:
    """Run the slice-cutting procedure on a point set.

    Iteratively removes the first qualifying bottleneck slice (coordinate
    ascending, value ascending) into the per-coordinate pile, then keeps
    each pile as a part only when it clears the keeping threshold; small
    piles are swept into R1 and the uncut remainder is R0. Terminates in
    at most |points| cuts since every cut removes at least one point.
    """
    if len(points) == 0:
        raise ShapeError("cannot decompose an empty point set")
    n, w = points.n, points.w
    cut_e = cut_exponent(alpha_n, w, eps1, eps2)
    keep_e = keep_exponent(alpha_n, w, eps2)

    groups = [defaultdict(set) for _ in range(w)]
    for p, t in zip(points.points, points.word_tuples()):
        for i in range(w):
            groups[i][t[i]].add(p)

    piles = [[] for _ in range(w)]
    log = []
    iteration = 0
    while True:
        found = None
        for i in range(w):
            for y in sorted(groups[i]):
                if size_below(len(groups[i][y]), cut_e):
                    found = (i, y)
                    break
            if found:
                break
        if not found:
            break
        iteration += 1
        i, y = found
        cut = sorted(groups[i][y])
        log.append((iteration, i, y, len(cut)))
        piles[i].extend(cut)
        for p in cut:
            t = unpack_words(p, n, w)
            for j in range(w):
                bucket = groups[j][t[j]]
                bucket.discard(p)
                if not bucket:
                    del groups[j][t[j]]

    remaining = sorted(p for bucket in groups[0].values() for p in bucket)
    r1 = []
    parts = []
    for i in range(w):
        if piles[i] and size_above(len(piles[i]), keep_e):
            parts.append(PointSet(piles[i], n, w))
        else:
            r1.extend(piles[i])
            parts.append(PointSet((), n, w))

    return Decomposition(
        parts=tuple(parts),
        r0=PointSet(remaining, n, w),
        r1=PointSet(r1, n, w),
        n=n,
        w=w,
        alpha_n=alpha_n,
        eps1=eps1,
        eps2=eps2,
        slice_log=tuple(log),
    )


# --- conditional residual bounds ---------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool | None  # None = unverified
    note: str = ""


@dataclass(frozen=True)
class ConverseReport:
    """Residual-size checks for one decomposition.

    The R1 bound is unconditional. The R0 bound only follows when every
    q-box V intersects the source set in strictly fewer than
    2^(alpha_n*w*(1-eps1-eps2-eps3-1/alpha_n)) points; when that
    precondition fails or cannot be checked, the R0 line reports
    ``holds=None`` (unverified), never a failure.
    """

    checks: tuple
    eps3: float
    precondition_checked: bool
    precondition_held: bool | None
    max_box_intersection: int | None
    precondition_exponent: float

    def to_json_dict(self) -> dict:
        return {
            "eps3": self.eps3,
            "precondition": {
                "checked": self.precondition_checked,
                "held": self.precondition_held,
                "max_box_intersection": self.max_box_intersection,
                "exponent": self.precondition_exponent,
            },
            "checks": [
                {
                    "name": c.name,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "holds": c.holds,
                    "note": c.note,
                }
                for c in self.checks
            ],
        }


def verify_converse_bounds(dec: Decomposition, eps3: float, *,
                           max_box_intersection: int | None = None,
                           check_precondition: bool = True) -> ConverseReport:
    """Check the residual bounds of a decomposition.

    ``max_box_intersection`` may carry a precomputed exact maximum of
    |S ∩ V| over q-boxes V for the source set S; otherwise, when q is an
    integer and checking is requested, it is computed exhaustively here.
    """
    if eps3 < 0:
        raise RangeError(f"eps3 must be nonnegative, got {eps3}")
    alpha_n, w = dec.alpha_n, dec.w
    pre_exp = alpha_n * w * (1 - dec.eps1 - dec.eps2 - eps3) - w

    held: bool | None = None
    checked = False
    max_int = max_box_intersection
    q = dec.q
    if max_int is None and check_precondition and isinstance(q, int):
        from .conductance import _best_box_bnb

        source = dec.source_points()
        if len(source):
            max_int, _ = _best_box_bnb(source.word_tuples(), dec.n, w, q)
            checked = True
    elif max_int is not None:
        checked = True
    if checked and max_int is not None:
        held = size_below(max_int, pre_exp)

    checks = []
    keep_e = keep_exponent(alpha_n, w, dec.eps2)
    r1_rhs = w * 2.0 ** keep_e
    checks.append(
        BoundCheck(
            name="r1_size",
            lhs=len(dec.r1),
            rhs=r1_rhs,
            holds=len(dec.r1) <= r1_rhs,
            note="unconditional; margin "
                 f"{r1_rhs - len(dec.r1):.6g}",
        )
    )

    r0_exp = (1 - eps3) * alpha_n * w
    r0_rhs = 2.0 ** r0_exp
    if held:
        r0_holds: bool | None = not size_above(len(dec.r0), r0_exp) if len(dec.r0) else True
        note = "precondition held"
    else:
        r0_holds = None
        note = (
            "unverified: intersection precondition "
            + ("failed" if held is False else "not checked")
        )
    checks.append(
        BoundCheck(name="r0_size", lhs=len(dec.r0), rhs=r0_rhs,
                   holds=r0_holds, note=note)
    )

    return ConverseReport(
        checks=tuple(checks),
        eps3=eps3,
        precondition_checked=checked,
        precondition_held=held,
        max_box_intersection=max_int,
        precondition_exponent=pre_exp,
    )


# --- empirical condenser profile ----------------------------------------------


@dataclass(frozen=True)
class TrialProfile:
    index: int
    box_ranks: tuple
    gamma: float
    coordinate_entropies: dict  # coord -> (part size, fattest slice, bits, met)


@dataclass(frozen=True)
class CondenserProfile:
    """Per-trial decomposition statistics for seeded random boxes.

    gamma is the residual weight (|R0|+|R1|)/q^w of one trial. A kept
    part meets its target when the uniform distribution on it has
    coordinate min-entropy strictly above (1+eps1)*alpha_n.
    """

    spec_digest: str
    alpha_n: float
    eps1: float
    eps2: float
    trials: tuple
    worst_gamma: float | None
    mean_gamma: float | None
    all_targets_met: bool | None

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec_digest,
            "alpha_n": self.alpha_n,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "trials": [
                {
                    "index": t.index,
                    "box_ranks": list(t.box_ranks),
                    "gamma": t.gamma,
                    "coordinates": {
                        str(i): {
                            "part_size": v[0],
                            "fattest_slice": v[1],
                            "min_entropy_bits": v[2],
                            "met_target": v[3],
                        }
                        for i, v in t.coordinate_entropies.items()
                    },
                }
                for t in self.trials
            ],
            "summary": {
                "trials": len(self.trials),
                "worst_gamma": self.worst_gamma,
                "mean_gamma": self.mean_gamma,
                "all_targets_met": self.all_targets_met,
            },
        }


def coordinate_min_entropy(part: PointSet, coord: int) -> tuple[int, float]:
    """(fattest slice size, min-entropy in bits of coordinate ``coord`` of
    the uniform distribution on ``part``)."""
    sizes = slice_sizes(part, coord)
    fattest = max(sizes.values())
    return fattest, math.log2(len(part)) - math.log2(fattest)


def empirical_condenser_profile(spec: PermutationSpec, alpha_n: float,
                                eps1: float, eps2: float, trials: int,
                                seed: int, threads: int = 1) -> CondenserProfile:
    """Decompose the images of ``trials`` seeded random q-boxes and report
    residual weights and per-part coordinate min-entropies.

    Boxes are sampled by drawing one combination rank per side from a
    single seeded generator (unranked to the actual subsets), so profiles
    are reproducible; trials may run in parallel and merge by index.
    """
    if trials < 0:
        raise RangeError(f"trials must be nonnegative, got {trials}")
    q = 2.0 ** alpha_n
    if abs(q - round(q)) > 1e-9:
        raise RangeError(
            f"box sampling needs an integer side size, got 2^{alpha_n}"
        )
    q = int(round(q))
    radix = comb(1 << spec.n, q)
    rng = random.Random(seed)
    all_ranks = [
        tuple(rng.randrange(radix) for _ in range(spec.w)) for _ in range(trials)
    ]

    target_shift = (1 + eps1) * alpha_n

    def run_trial(args):
        index, ranks = args
        box = QBox.from_ranks(ranks, spec.n, q)
        img = image_of_box(spec, box)
        dec = decompose(img, alpha_n, eps1, eps2)
        gamma = (len(dec.r0) + len(dec.r1)) / (q ** spec.w)
        entropies = {}
        for i, part in enumerate(dec.parts):
            if not len(part):
                continue
            fattest, bits = coordinate_min_entropy(part, i)
            met = _scaled_below(fattest, target_shift, len(part))
            entropies[i] = (len(part), fattest, bits, met)
        return TrialProfile(index, ranks, gamma, entropies)

    jobs = list(enumerate(all_ranks))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_trial, jobs))
    else:
        results = [run_trial(j) for j in jobs]

    gammas = [t.gamma for t in results]
    met_flags = [
        v[3] for t in results for v in t.coordinate_entropies.values()
    ]
    return CondenserProfile(
        spec_digest=spec.digest(),
        alpha_n=alpha_n,
        eps1=eps1,
        eps2=eps2,
        trials=tuple(results),
        worst_gamma=max(gammas) if gammas else None,
        mean_gamma=sum(gammas) / len(gammas) if gammas else None,
        all_targets_met=all(met_flags) if met_flags else None,
    )
