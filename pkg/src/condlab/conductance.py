"""Exact and heuristic search for the conductance degree of a permutation.

For side size q, the conductance degree is log_q of the largest
|pi(U) ∩ V| over all pairs of q-boxes U, V; it always lies in [1, w].
Exact mode enumerates every U and solves the inner maximization over V
with a depth-first branch and bound: a partial box is pruned when the
per-coordinate top-q frequency sums of the surviving points cannot beat
the incumbent. The incumbent only ever moves on a strict improvement and
candidates are visited in lexicographic order, so the reported witnesses
are the lexicographically smallest (U, V) achieving the maximum and
serial, sharded, and resumed runs agree bit for bit.

Heuristic mode hill-climbs over U with random single-value side swaps
(restarting when stuck) and solves V greedily per U; its result is a
certified lower bound because the witness pair replays to the claimed
count. It is sequential by design, so a thread count never changes it.

q is taken directly (side size); alpha = log2(q)/n is derived and
reported. Side sizes that are not powers of two are accepted as an
extension and flagged in the report.
"""

from __future__ import annotations

import itertools
import math
import os
import random
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb

from .boxes import (
    QBox,
    PointSet,
    box_count,
    combination_unrank,
    enumerate_qboxes_range,
    greedy_box,
    image_of_box,
    intersection_count,
    _check_box_params,
)
from .errors import BudgetError, CondlabError, RangeError, ShapeError
from .perms import PermutationSpec

DEFAULT_OUTER_BUDGET = 10 ** 6
DEFAULT_INNER_NODE_BUDGET = 10 ** 7


def degree_from_count(q: int, count: int, w: int) -> float:
    """log_q(count). The side size q = 1 pins no exponent (1 = 1**d for
    every d); w is reported then, because a 1-box always maps onto a
    1-box, which is exactly the count = q**w case."""
    if q < 1 or count < 1:
        raise RangeError(f"need q >= 1 and count >= 1, got q={q}, count={count}")
    if q == 1:
        return float(w)
    return math.log2(count) / math.log2(q)


@dataclass(frozen=True)
class ConductanceReport:
    """Result of one conductance search, exact or heuristic."""

    n: int
    w: int
    q: int
    alpha: float
    mode: str  # "exact" | "heuristic"
    max_count: int
    condd: float
    witness_u: QBox
    witness_v: QBox
    boxes_examined: int
    exhausted: bool
    wall_seconds: float

    @property
    def q_is_power_of_two(self) -> bool:
        return self.q & (self.q - 1) == 0

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "w": self.w,
            "q": self.q,
            "alpha": self.alpha,
            "mode": self.mode,
            "max_count": self.max_count,
            "condd": self.condd,
            "witness_u": [list(s) for s in self.witness_u.sides],
            "witness_v": [list(s) for s in self.witness_v.sides],
            "boxes_examined": self.boxes_examined,
            "exhausted": self.exhausted,
            "wall_seconds": self.wall_seconds,
            "q_is_power_of_two": self.q_is_power_of_two,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ConductanceReport":
        return cls(
            n=d["n"],
            w=d["w"],
            q=d["q"],
            alpha=d["alpha"],
            mode=d["mode"],
            max_count=d["max_count"],
            condd=d["condd"],
            witness_u=QBox(tuple(tuple(s) for s in d["witness_u"]), d["n"]),
            witness_v=QBox(tuple(tuple(s) for s in d["witness_v"]), d["n"]),
            boxes_examined=d["boxes_examined"],
            exhausted=d["exhausted"],
            wall_seconds=d["wall_seconds"],
        )


def replay_witness(spec: PermutationSpec, report: ConductanceReport) -> int:
    """Recompute |pi(witness_u) ∩ witness_v|; must equal max_count."""
    img = image_of_box(spec, report.witness_u)
    return intersection_count(img, report.witness_v)


# --- inner maximization: densest q-box over a point set -------------------


def _top_q_sum(tuples, coord: int, q: int) -> int:
    freq = Counter(t[coord] for t in tuples)
    if len(freq) <= q:
        return len(tuples)
    return sum(sorted(freq.values(), reverse=True)[:q])


def _best_box_bnb(tuples, n: int, w: int, q: int, incumbent: int = -1,
                  node_budget: int | None = None):
    """Exact max of |tuples ∩ V| over q-boxes V, beating ``incumbent``.

    Returns (count, sides) where sides is None when nothing beats the
    incumbent. Visits per-coordinate subsets in lexicographic order and
    updates only on strict improvement, so the returned sides are the
    lexicographically smallest maximizer.
    """
    all_sides = list(itertools.combinations(range(1 << n), q))
    best = incumbent
    best_sides = None
    nodes = 0

    def visit(depth, pts, chosen):
        nonlocal best, best_sides, nodes
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            raise BudgetError(
                f"inner search exceeded its node budget of {node_budget}",
                refused=nodes,
            )
        if depth == w:
            if len(pts) > best:
                best = len(pts)
                best_sides = tuple(chosen)
            return
        bound = min(_top_q_sum(pts, j, q) for j in range(depth, w))
        if bound <= best:
            return
        for side in all_sides:
            in_side = set(side).__contains__
            sub = [t for t in pts if in_side(t[depth])]
            if len(sub) <= best:
                continue
            visit(depth + 1, sub, chosen + (side,))

    visit(0, list(tuples), ())
    return best, best_sides


def best_V_for_U(points: PointSet, q: int,
                 node_budget: int | None = DEFAULT_INNER_NODE_BUDGET) -> tuple[QBox, int]:
    """Exact inner maximization of |points ∩ V| over all q-boxes V."""
    if len(points) == 0:
        raise ShapeError("cannot maximize over an empty point set")
    _check_box_params(points.n, q, points.w)
    count, sides = _best_box_bnb(
        points.word_tuples(), points.n, points.w, q, node_budget=node_budget
    )
    return QBox(sides, points.n), count


# --- exact outer search ----------------------------------------------------


def _budget_refusal_message(n: int, q: int, w: int, total: int, budget: int) -> str:
    msg = (
        f"exact search needs C(2^{n},{q})^{w} = {total} outer boxes, over "
        f"the budget of {budget}"
    )
    # name the smallest single parameter whose reduction fits the budget
    for name, nn, qq, ww in (("q", n, q - 1, w), ("w", n, q, w - 1), ("n", n - 1, min(q, 1 << (n - 1)), w)):
        if qq >= 1 and ww >= 1 and nn >= 1 and box_count(nn, qq, ww) <= budget:
            return msg + f"; reducing {name} would fit"
    return msg


def _scan_range(spec, q, start, stop, incumbent, inner_node_budget,
                checkpoint_path=None, checkpoint_every=0,
                init_u=None, init_v=None):
    """Scan boxes with global ranks in [start, stop); returns the local
    best (count, u_rank, u_sides, v_sides) and the number examined.
    ``init_u``/``init_v`` carry resumed witnesses so that checkpoints
    written before any improvement stay replayable."""
    best = incumbent
    best_rank = None
    best_u = init_u
    best_v = init_v
    rank = start
    for ubox in enumerate_qboxes_range(spec.n, q, spec.w, start, stop):
        img = image_of_box(spec, ubox)
        count, sides = _best_box_bnb(
            img.word_tuples(), spec.n, spec.w, q, incumbent=best,
            node_budget=inner_node_budget,
        )
        if sides is not None:
            best, best_rank, best_u, best_v = count, rank, ubox.sides, sides
        rank += 1
        if checkpoint_path and checkpoint_every and (rank - start) % checkpoint_every == 0:
            write_checkpoint(
                checkpoint_path, spec, q, rank, best, best_u, best_v, rank,
            )
    return best, best_rank, best_u, best_v, rank - start


def exact_conductance(spec: PermutationSpec, q: int, *,
                      outer_budget: int = DEFAULT_OUTER_BUDGET,
                      inner_node_budget: int = DEFAULT_INNER_NODE_BUDGET,
                      threads: int = 1,
                      checkpoint_path: str | None = None,
                      checkpoint_every: int = 1000) -> ConductanceReport:
    """The true maximum of |pi(U) ∩ V| over all q-box pairs, with the
    lexicographically smallest witnesses. Deterministic for any thread
    count; checkpointing requires threads == 1."""
    t0 = time.monotonic()
    _check_box_params(spec.n, q, spec.w)
    total = box_count(spec.n, q, spec.w)
    if total > outer_budget:
        raise BudgetError(
            _budget_refusal_message(spec.n, q, spec.w, total, outer_budget),
            refused=total,
        )
    if checkpoint_path and threads > 1:
        raise CondlabError("checkpointing requires threads=1")

    start = 0
    incumbent = -1
    resumed_u = resumed_v = None
    examined_before = 0
    if checkpoint_path and os.path.exists(checkpoint_path):
        ck = read_checkpoint(checkpoint_path)
        if ck["spec"] != spec.digest() or ck["q"] != q or len(ck["cursor"]) != spec.w:
            raise CondlabError(
                f"checkpoint {checkpoint_path} belongs to a different search"
            )
        start = _tuple_to_rank(ck["cursor"], comb(1 << spec.n, q))
        incumbent = ck["max_count"]
        resumed_u, resumed_v = ck["witness_u"], ck["witness_v"]
        examined_before = ck["boxes_examined"]

    if threads <= 1:
        best, _, u_sides, v_sides, done = _scan_range(
            spec, q, start, total, incumbent, inner_node_budget,
            checkpoint_path, checkpoint_every, resumed_u, resumed_v,
        )
        examined = examined_before + done
    else:
        # contiguous shards in rank order; merge keeps the max count and,
        # on ties, the earliest shard, which is the lexicographic rule
        bounds = [start + (total - start) * i // threads for i in range(threads + 1)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_scan_range, spec, q, lo, hi, -1, inner_node_budget)
                for lo, hi in zip(bounds, bounds[1:])
                if lo < hi
            ]
            results = [f.result() for f in futures]
        best, u_sides, v_sides = incumbent, resumed_u, resumed_v
        examined = examined_before
        for count, rank, us, vs, done in results:
            examined += done
            if us is not None and count > best:
                best, u_sides, v_sides = count, us, vs

    if checkpoint_path:
        write_checkpoint(checkpoint_path, spec, q, total, best, u_sides,
                         v_sides, examined)
    wall = time.monotonic() - t0
    return ConductanceReport(
        n=spec.n,
        w=spec.w,
        q=q,
        alpha=math.log2(q) / spec.n,
        mode="exact",
        max_count=best,
        condd=degree_from_count(q, best, spec.w),
        witness_u=QBox(u_sides, spec.n),
        witness_v=QBox(v_sides, spec.n),
        boxes_examined=examined,
        exhausted=True,
        wall_seconds=wall,
    )


def naive_max_count(spec: PermutationSpec, q: int,
                    outer_budget: int = DEFAULT_OUTER_BUDGET) -> int:
    """Plain double loop over all (U, V) pairs. Exists as a slow reference
    path; tests carry their own independent oracle."""
    from .boxes import enumerate_qboxes

    best = -1
    vboxes = list(enumerate_qboxes(spec.n, q, spec.w, budget=outer_budget))
    for ubox in enumerate_qboxes(spec.n, q, spec.w, budget=outer_budget):
        img = image_of_box(spec, ubox)
        for vbox in vboxes:
            best = max(best, intersection_count(img, vbox))
    return best


# --- heuristic lower bound --------------------------------------------------


def heuristic_lower_bound(spec: PermutationSpec, q: int, budget: int = 200,
                          seed: int = 0, threads: int = 1) -> ConductanceReport:
    """Certified lower bound on the max intersection: random-restart hill
    climbing over U (one side value swapped per move) with a greedy V per
    U. Deterministic for a fixed (seed, budget); ``threads`` is accepted
    for interface symmetry and ignored."""
    del threads
    t0 = time.monotonic()
    _check_box_params(spec.n, q, spec.w)
    if budget < 1:
        raise RangeError(f"budget must be at least 1, got {budget}")
    n, w = spec.n, spec.w
    size = 1 << n
    radix = comb(size, q)
    rng = random.Random(seed)
    patience = max(16, 2 * w * q)

    best_count = -1
    best_u = best_v = None
    evals = 0

    def evaluate(sides):
        nonlocal best_count, best_u, best_v, evals
        box = QBox(sides, n)
        vbox, cnt = greedy_box(image_of_box(spec, box), q)
        evals += 1
        if cnt > best_count:
            best_count, best_u, best_v = cnt, box, vbox
        return cnt

    while evals < budget:
        sides = tuple(
            combination_unrank(rng.randrange(radix), size, q) for _ in range(w)
        )
        cur = evaluate(sides)
        if radix == 1:
            break  # the full cube is the only box; nothing to climb
        stale = 0
        while evals < budget and stale < patience:
            i = rng.randrange(w)
            side = sides[i]
            v_out = side[rng.randrange(q)]
            while True:
                v_in = rng.randrange(size)
                if v_in not in side:
                    break
            new_side = tuple(sorted(set(side) - {v_out} | {v_in}))
            cand = sides[:i] + (new_side,) + sides[i + 1:]
            cnt = evaluate(cand)
            if cnt > cur:
                sides, cur = cand, cnt
                stale = 0
            else:
                stale += 1

    # replay the witness so the reported count is certified
    assert intersection_count(image_of_box(spec, best_u), best_v) == best_count
    return ConductanceReport(
        n=n,
        w=w,
        q=q,
        alpha=math.log2(q) / n if q > 1 else 0.0,
        mode="heuristic",
        max_count=best_count,
        condd=degree_from_count(q, best_count, w),
        witness_u=best_u,
        witness_v=best_v,
        boxes_examined=evals,
        exhausted=False,
        wall_seconds=time.monotonic() - t0,
    )


# --- notation conversion ----------------------------------------------------


def condd_to_cond(q: int, condd: float, w: int | None = None) -> float:
    """cond = q**condd (the query-count notation of the same quantity)."""
    if q < 2:
        raise RangeError(f"q must be at least 2, got {q}")
    if condd < 1 or (w is not None and condd > w):
        hi = w if w is not None else "w"
        raise RangeError(f"condd={condd} outside [1, {hi}]")
    return 2.0 ** (condd * math.log2(q))


def cond_to_condd(q: int, cond: float, w: int | None = None) -> float:
    """Inverse of :func:`condd_to_cond`."""
    if q < 2:
        raise RangeError(f"q must be at least 2, got {q}")
    if cond < q or (w is not None and cond > float(q) ** w * (1 + 1e-9)):
        hi = f"{q}^{w}" if w is not None else "q^w"
        raise RangeError(f"cond={cond} outside [q, {hi}]")
    return math.log2(cond) / math.log2(q)


# --- closed-form bound sheet -------------------------------------------------


def _log2_sum_of_powers(e1: float, e2: float) -> float:
    """log2(2**e1 + 2**e2), stable for any magnitudes."""
    hi, lo = (e1, e2) if e1 >= e2 else (e2, e1)
    return hi + math.log2(1.0 + 2.0 ** (lo - hi))


@dataclass(frozen=True)
class BoundSheet:
    """Closed-form bounds evaluated at one parameter point.

    A bound is *vacuous* when its value falls outside [1, w] (the full
    range of the conductance degree) and therefore says nothing.
    """

    n: int
    w: int
    q: int
    alpha: float
    eps1: float | None
    eps2: float | None
    c: float | None
    condenser_bound: float | None
    condenser_vacuous: bool | None
    repetition_bound: float | None
    repetition_vacuous: bool | None
    random_perm_bound: float
    random_perm_precondition_ok: bool
    random_perm_vacuous: bool
    precondition_by_alpha: bool
    precondition_by_q: bool
    precondition_agree: bool

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


def bound_sheet(n: int, w: int, q: int, eps1: float | None = None,
                eps2: float | None = None, c: float | None = None) -> BoundSheet:
    """Evaluate the closed-form bounds at one parameter point.

    * condenser bound (needs eps1, eps2): log_q(q**(w-eps1) + eps2*q**w);
      exactly w - eps1 when eps2 == 0.
    * repetition bound (needs c): w - floor(w/3)*c, the serial repetition
      of three-word blocks.
    * random permutation bound: 1 + log2(3*n*w)/(alpha*n), valid when
      alpha <= 1/2 - 1/(n*w).
    * precondition equivalence: q**(2w) <= 2**(nw)/4 iff
      alpha <= 1/2 - 1/(n*w); both sides are evaluated independently
      (integers vs floats) and compared.
    """
    if n < 1 or w < 1 or q < 2:
        raise RangeError(f"need n,w >= 1 and q >= 2, got n={n}, w={w}, q={q}")
    alpha = math.log2(q) / n
    alpha_n = math.log2(q)

    condenser = condenser_vac = None
    if eps1 is not None and eps2 is not None:
        if eps1 < 0 or eps2 < 0:
            raise RangeError("eps1 and eps2 must be nonnegative")
        if eps2 == 0:
            condenser = w - eps1
        else:
            condenser = _log2_sum_of_powers(
                alpha_n * (w - eps1), math.log2(eps2) + alpha_n * w
            ) / alpha_n
        condenser_vac = not (1.0 <= condenser <= w)

    repetition = repetition_vac = None
    if c is not None:
        repetition = w - (w // 3) * c
        repetition_vac = not (1.0 <= repetition <= w)

    random_perm = 1.0 + math.log2(3 * n * w) / (alpha * n)
    rp_ok = alpha <= 0.5 - 1.0 / (n * w)
    rp_vac = not (1.0 <= random_perm <= w)

    by_q = q ** (2 * w) * 4 <= 2 ** (n * w)
    by_alpha = alpha <= 0.5 - 1.0 / (n * w)

    return BoundSheet(
        n=n,
        w=w,
        q=q,
        alpha=alpha,
        eps1=eps1,
        eps2=eps2,
        c=c,
        condenser_bound=condenser,
        condenser_vacuous=condenser_vac,
        repetition_bound=repetition,
        repetition_vacuous=repetition_vac,
        random_perm_bound=random_perm,
        random_perm_precondition_ok=rp_ok,
        random_perm_vacuous=rp_vac,
        precondition_by_alpha=by_alpha,
        precondition_by_q=by_q,
        precondition_agree=by_alpha == by_q,
    )


# --- checkpoint files --------------------------------------------------------
#
# Format: `condlab-ckpt v1` header, then key=value lines: the spec digest,
# the cursor as a decimal tuple of per-side combination ranks for the next
# box to process, the incumbent max count, the incumbent witnesses as hex
# sides, and the number of boxes examined so far.


def _rank_to_tuple(rank: int, radix: int, w: int) -> tuple[int, ...]:
    out = []
    for _ in range(w - 1):
        rank, r = divmod(rank, radix)
        out.append(r)
    # the leading digit keeps any overflow so rank == radix**w (an
    # exhausted cursor) survives the round trip
    out.append(rank)
    return tuple(reversed(out))


def _tuple_to_rank(tup, radix: int) -> int:
    acc = 0
    for r in tup:
        acc = acc * radix + r
    return acc


def _sides_to_text(sides) -> str:
    if sides is None:
        return "-"
    return ";".join(",".join(f"{v:x}" for v in side) for side in sides)


def _sides_from_text(text: str):
    if text == "-":
        return None
    return tuple(
        tuple(int(v, 16) for v in side.split(",")) for side in text.split(";")
    )


def write_checkpoint(path, spec: PermutationSpec, q: int, next_rank: int,
                     max_count: int, u_sides, v_sides, examined: int) -> None:
    radix = comb(1 << spec.n, q)
    cursor = _rank_to_tuple(next_rank, radix, spec.w)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("condlab-ckpt v1\n")
        fh.write(f"spec={spec.digest()}\n")
        fh.write(f"q={q}\n")
        fh.write(f"cursor=({','.join(str(i) for i in cursor)})\n")
        fh.write(f"max_count={max_count}\n")
        fh.write(f"witness_u={_sides_to_text(u_sides)}\n")
        fh.write(f"witness_v={_sides_to_text(v_sides)}\n")
        fh.write(f"boxes_examined={examined}\n")
    os.replace(tmp, path)


def read_checkpoint(path) -> dict:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "condlab-ckpt v1":
            raise CondlabError(f"bad checkpoint header {header!r}")
        fields = {}
        for raw in fh:
            key, _, value = raw.rstrip("\n").partition("=")
            fields[key] = value
    try:
        cursor = tuple(int(t) for t in fields["cursor"].strip("()").split(",") if t)
        return {
            "spec": fields["spec"],
            "q": int(fields["q"]),
            "cursor": cursor,
            "max_count": int(fields["max_count"]),
            "witness_u": _sides_from_text(fields["witness_u"]),
            "witness_v": _sides_from_text(fields["witness_v"]),
            "boxes_examined": int(fields["boxes_examined"]),
        }
    except (KeyError, ValueError) as exc:
        raise CondlabError(f"malformed checkpoint {path}: {exc}") from exc
