"""Witnessing partitionings: linear greedy approximation, exact augmenting-path
decomposition, and an exhaustive oracle for testing.

All three operate on Y-groups: every tuple sharing a Y-projection moves as one
unit, since degrees count distinct Y-projections and splitting a group never
helps.
"""
from __future__ import annotations

import gc
import heapq
import json
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .relations import Relation, ScaleExceededError, SchemaError
from .stats import compute_dc, family_label

YKey = tuple[int, ...]


@contextmanager
def _gc_paused():
    """Pause collection during container-heavy batch loops; the churn of
    millions of short-lived sets and heap entries otherwise dominates."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


@dataclass(frozen=True)
class Partitioning:
    """Disjoint sub-relations indexed by family, together with the degree they achieve."""

    source: Relation
    y_vars: tuple[str, ...]
    families: tuple[frozenset[str], ...]
    parts: tuple[Relation, ...]
    achieved_degree: int

    @property
    def by_family(self) -> dict[frozenset[str], Relation]:
        return dict(zip(self.families, self.parts))

    def part_for(self, family: Iterable[str]) -> Relation:
        key = frozenset(family)
        for fam, part in zip(self.families, self.parts):
            if fam == key:
                return part
        raise SchemaError(f"no part for family {sorted(key)}")

    def validate(self) -> None:
        seen: set[tuple[int, ...]] = set()
        total = 0
        for part in self.parts:
            total += len(part)
            seen.update(part.tuples)
        if total != len(seen):
            raise AssertionError("parts overlap")
        if seen != set(self.source.tuples):
            raise AssertionError("parts do not union to the source relation")
        for fam, part in zip(self.families, self.parts):
            got = compute_dc(part, fam, self.y_vars)
            if got > self.achieved_degree:
                raise AssertionError(
                    f"part {family_label(fam)} has degree {got} > {self.achieved_degree}"
                )
        # all tuples of one Y-group must sit in the same part
        ypos = self.source.positions(self.y_vars)
        owner: dict[YKey, int] = {}
        for i, part in enumerate(self.parts):
            for t in part.tuples:
                yk = tuple(t[p] for p in ypos)
                if owner.setdefault(yk, i) != i:
                    raise AssertionError("a Y-group is split across parts")

    def to_manifest(self) -> dict:
        index = {t: i for i, t in enumerate(self.source.tuples)}
        return {
            "relation": self.source.name,
            "y": list(self.y_vars),
            "achieved_degree": self.achieved_degree,
            "parts": {
                family_label(fam): [index[t] for t in part.tuples]
                for fam, part in zip(self.families, self.parts)
            },
        }

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_manifest(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class AugmentingPath:
    """A cascade of group reallocations absorbing one new group.

    ``groups[i]`` currently sits in part ``families[i]`` and moves to
    ``families[i+1]``; the new group lands in ``families[0]``. An empty
    ``groups`` is the zero-hop case: the new group fits directly.
    """

    groups: tuple[YKey, ...]
    families: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.groups)


class DegreeBucketQueue:
    """Min-queue over (family, x-value) pairs keyed by live group count.

    Pop order is (count, family index, x-value), which pins a deterministic
    argmin for the greedy peeling; x-values may be any comparable hashable
    keys (value tuples, or rank ids standing in for them). Backed by a heap
    with lazy invalidation: decrements push a fresh entry and stale ones are
    skipped on pop, so every operation is O(log n) while preserving the exact
    tie-break.
    """

    __slots__ = ("_heap", "_live")

    def __init__(self, entries: Iterable[tuple[int, object, int]] = ()):
        self._live: dict[tuple[int, object], int] = {}
        self._heap: list[tuple[int, int, object]] = []
        for family, xkey, count in entries:
            self._live[(family, xkey)] = count
            self._heap.append((count, family, xkey))
        heapq.heapify(self._heap)

    def __len__(self) -> int:
        return len(self._live)

    def count(self, family: int, xkey: object) -> int:
        return self._live.get((family, xkey), 0)

    def decrement(self, family: int, xkey: object, by: int = 1) -> None:
        key = (family, xkey)
        count = self._live[key] - by
        if count <= 0:
            del self._live[key]
        else:
            self._live[key] = count
            heapq.heappush(self._heap, (count, family, xkey))

    def remove(self, family: int, xkey: object) -> None:
        self._live.pop((family, xkey), None)

    def pop_min(self) -> tuple[int, int, object] | None:
        while self._heap:
            count, family, xkey = heapq.heappop(self._heap)
            if self._live.get((family, xkey)) == count:
                del self._live[(family, xkey)]
                return count, family, xkey
        return None


def _validate_shapes(
    rel: Relation, families: Sequence[frozenset[str]], y_vars: Iterable[str]
) -> tuple[tuple[frozenset[str], ...], tuple[str, ...]]:
    yv = frozenset(y_vars)
    unknown = yv - set(rel.schema)
    if unknown:
        raise SchemaError(f"Y contains variables {sorted(unknown)} not in the schema")
    fams = tuple(frozenset(f) for f in families)
    if not fams:
        raise SchemaError("no families given")
    if len(set(fams)) != len(fams):
        raise SchemaError("duplicate family")
    for fam in fams:
        if not fam <= yv:
            raise SchemaError(f"family {sorted(fam)} not a subset of Y {sorted(yv)}")
    y_ordered = tuple(v for v in rel.schema if v in yv)
    return fams, y_ordered


def _group_tuples(rel: Relation, y_ordered: tuple[str, ...]) -> dict[YKey, Sequence[tuple[int, ...]]]:
    ypos = rel.positions(y_ordered)
    if ypos == tuple(range(rel.arity)):
        # Y covers the whole schema: every tuple is its own group
        return {t: (t,) for t in rel.tuples}
    groups: dict[YKey, list[tuple[int, ...]]] = {}
    for t in rel.tuples:
        groups.setdefault(tuple(t[i] for i in ypos), []).append(t)
    return groups


def _family_positions(
    families: Sequence[frozenset[str]], y_ordered: tuple[str, ...]
) -> list[tuple[int, ...]]:
    return [
        tuple(i for i, v in enumerate(y_ordered) if v in fam) for fam in families
    ]


def _build_partitioning(
    rel: Relation,
    y_ordered: tuple[str, ...],
    families: tuple[frozenset[str], ...],
    groups: dict[YKey, list[tuple[int, ...]]],
    assignment: dict[YKey, int],
    degree: int,
) -> Partitioning:
    buckets: list[list[tuple[int, ...]]] = [[] for _ in families]
    for ykey, fidx in assignment.items():
        buckets[fidx].extend(groups[ykey])
    parts = tuple(
        Relation.build(f"{rel.name}^{family_label(fam)}", rel.schema, rows)
        for fam, rows in zip(families, buckets)
    )
    return Partitioning(rel, y_ordered, families, parts, degree)


def decompose_approx(
    rel: Relation, families: Sequence[Iterable[str]], y_vars: Iterable[str]
) -> Partitioning:
    """Greedy peeling: repeatedly move the globally rarest (family, x-value)
    batch of residual groups into that family's part.

    The achieved degree is at most |families| times the optimum, and the whole
    run is near-linear in the relation size.
    """
    fams, y_ordered = _validate_shapes(rel, [frozenset(f) for f in families], y_vars)
    with _gc_paused():
        return _decompose_approx_core(rel, fams, y_ordered)


def _decompose_approx_core(
    rel: Relation, fams: tuple[frozenset[str], ...], y_ordered: tuple[str, ...]
) -> Partitioning:
    groups = _group_tuples(rel, y_ordered)
    fpos = _family_positions(fams, y_ordered)
    nfam = len(fams)

    # rank-intern the x-values per family: ranks follow the sorted value order,
    # so the queue's tie-break on rank matches the tie-break on the raw tuples
    group_list = sorted(groups)
    ngroups = len(group_list)
    xid: list[list[int]] = []
    members: list[list[set[int]]] = []
    for f in range(nfam):
        pos = fpos[f]
        raw = [tuple(g[i] for i in pos) for g in group_list]
        rank = {k: r for r, k in enumerate(sorted(set(raw)))}
        ids = [rank[k] for k in raw]
        xid.append(ids)
        sets: list[set[int]] = [set() for _ in range(len(rank))]
        for gi, x in enumerate(ids):
            sets[x].add(gi)
        members.append(sets)
    queue = DegreeBucketQueue(
        (f, x, len(members[f][x]))
        for f in range(nfam)
        for x in range(len(members[f]))
    )

    assign = [-1] * ngroups
    max_batch = 0
    others = [[f2 for f2 in range(nfam) if f2 != f] for f in range(nfam)]
    while True:
        popped = queue.pop_min()
        if popped is None:
            break
        count, f, x = popped
        batch = members[f][x]
        assert len(batch) == count
        if count > max_batch:
            max_batch = count
        # the batch's groups match x exactly, so only other families decrement;
        # within-batch order does not affect counts or the final assignment
        for gi in batch:
            assign[gi] = f
            for f2 in others[f]:
                x2 = xid[f2][gi]
                members[f2][x2].discard(gi)
                queue.decrement(f2, x2)
        batch.clear()

    assignment = {group_list[gi]: f for gi, f in enumerate(assign)}
    # the degree of part X at value x is exactly the size of the one batch that
    # moved x, so the running maximum is the achieved degree
    return _build_partitioning(rel, y_ordered, fams, groups, assignment, max_batch)


class DecompositionState:
    """Mutable group-to-family assignment with per-(family, x-value) slot sets.

    Used by the exact decomposition and exposed so augmenting-path searches can
    be exercised on arbitrary in-progress states.
    """

    def __init__(self, families: Sequence[Iterable[str]], y_ordered: Sequence[str]):
        self.families = tuple(frozenset(f) for f in families)
        self.y_ordered = tuple(y_ordered)
        self._fpos = _family_positions(self.families, self.y_ordered)
        self.assignment: dict[YKey, int] = {}
        self.slots: list[dict[tuple[int, ...], set[YKey]]] = [
            {} for _ in self.families
        ]
        self.d = 0

    def xkey(self, family: int, ykey: YKey) -> tuple[int, ...]:
        return tuple(ykey[i] for i in self._fpos[family])

    def count(self, family: int, xkey: tuple[int, ...]) -> int:
        return len(self.slots[family].get(xkey, ()))

    def place(self, ykey: YKey, family: int) -> None:
        if ykey in self.assignment:
            raise ValueError(f"group {ykey} already placed")
        self.assignment[ykey] = family
        self.slots[family].setdefault(self.xkey(family, ykey), set()).add(ykey)

    def move(self, ykey: YKey, family: int) -> None:
        old = self.assignment.pop(ykey)
        slot = self.slots[old][self.xkey(old, ykey)]
        slot.discard(ykey)
        if not slot:
            del self.slots[old][self.xkey(old, ykey)]
        self.place(ykey, family)

    def max_degree(self) -> int:
        return max(
            (len(s) for slots in self.slots for s in slots.values()), default=0
        )

    def apply_path(self, path: AugmentingPath, new_group: YKey) -> None:
        for i in range(len(path.groups) - 1, -1, -1):
            self.move(path.groups[i], path.families[i + 1])
        self.place(new_group, path.families[0])


def find_augmenting_path(state: DecompositionState, new_group: YKey) -> AugmentingPath | None:
    """Breadth-first search for a shortest reallocation cascade absorbing
    ``new_group`` without raising the current maximum degree.

    Nodes alternate between (family, x-value) slots and the groups occupying
    them; both sides carry visited sets, so each pointer is followed once and
    the first slot found with spare capacity yields a shortest path.
    """
    if new_group in state.assignment:
        raise ValueError(f"group {new_group} is already allocated")
    nfam = len(state.families)
    limit = state.d
    parent_of_slot: dict[tuple[int, tuple[int, ...]], YKey | None] = {}
    parent_of_group: dict[YKey, tuple[int, tuple[int, ...]]] = {}
    queue: deque[tuple[int, tuple[int, ...]]] = deque()

    def reconstruct(slot: tuple[int, tuple[int, ...]]) -> AugmentingPath:
        families_rev = [slot[0]]
        groups_rev: list[YKey] = []
        via = parent_of_slot[slot]
        while via is not None:
            groups_rev.append(via)
            prev_slot = parent_of_group[via]
            families_rev.append(prev_slot[0])
            via = parent_of_slot[prev_slot]
        return AugmentingPath(tuple(reversed(groups_rev)), tuple(reversed(families_rev)))

    def push_slots(origin: YKey | None, source: YKey) -> AugmentingPath | None:
        for f in range(nfam):
            slot = (f, state.xkey(f, source))
            if slot in parent_of_slot:
                continue
            parent_of_slot[slot] = origin
            if state.count(*slot) < limit:
                return reconstruct(slot)
            queue.append(slot)
        return None

    found = push_slots(None, new_group)
    if found is not None:
        return found
    while queue:
        slot = queue.popleft()
        for group in sorted(state.slots[slot[0]].get(slot[1], ())):
            if group in parent_of_group:
                continue
            parent_of_group[group] = slot
            found = push_slots(group, group)
            if found is not None:
                return found
    return None


def decompose_exact(
    rel: Relation,
    families: Sequence[Iterable[str]],
    y_vars: Iterable[str],
    step_hook: Callable[[DecompositionState, YKey], None] | None = None,
) -> Partitioning:
    """Insert Y-groups one at a time, reallocating along a shortest augmenting
    path when one exists and enlarging the degree budget otherwise.

    The running budget always equals the minimal achievable degree of the
    allocated prefix, so the final value is the exact partition constraint.
    ``step_hook`` (used by tests) observes the state after every insertion.
    """
    fams, y_ordered = _validate_shapes(rel, [frozenset(f) for f in families], y_vars)
    groups = _group_tuples(rel, y_ordered)
    state = DecompositionState(fams, y_ordered)
    for ykey in sorted(groups):
        path = find_augmenting_path(state, ykey)
        if path is not None:
            state.apply_path(path, ykey)
        else:
            state.d += 1
            # every direct slot is saturated here; min collision count with
            # family-index tie-break keeps the choice deterministic
            best = min(
                range(len(fams)), key=lambda f: (state.count(f, state.xkey(f, ykey)), f)
            )
            state.place(ykey, best)
        if step_hook is not None:
            step_hook(state, ykey)
    return _build_partitioning(rel, y_ordered, fams, groups, state.assignment, state.d)


def decompose_bruteforce(
    rel: Relation,
    families: Sequence[Iterable[str]],
    y_vars: Iterable[str],
    limit: int = 10,
) -> Partitioning:
    """Exhaustive assignment of Y-groups to families; the testing oracle.

    Tries every placement (with sound cut-off pruning on the running maximum)
    and returns the lexicographically first minimizer.
    """
    fams, y_ordered = _validate_shapes(rel, [frozenset(f) for f in families], y_vars)
    groups = _group_tuples(rel, y_ordered)
    keys = sorted(groups)
    if len(keys) > limit:
        raise ScaleExceededError(
            f"oracle scale exceeded: {len(keys)} Y-groups > limit {limit}"
        )
    fpos = _family_positions(fams, y_ordered)
    nfam = len(fams)
    xkeys = [[tuple(k[i] for i in fpos[f]) for f in range(nfam)] for k in keys]

    best_d = len(keys) + 1
    best_assign: list[int] | None = None
    counts: list[dict[tuple[int, ...], int]] = [{} for _ in range(nfam)]
    current: list[int] = []

    def recurse(i: int, running_max: int) -> None:
        nonlocal best_d, best_assign
        if running_max >= best_d:
            return
        if i == len(keys):
            best_d = running_max
            best_assign = current.copy()
            return
        for f in range(nfam):
            xk = xkeys[i][f]
            c = counts[f].get(xk, 0) + 1
            counts[f][xk] = c
            current.append(f)
            recurse(i + 1, max(running_max, c))
            current.pop()
            if c == 1:
                del counts[f][xk]
            else:
                counts[f][xk] = c - 1

    recurse(0, 0)
    if best_assign is None:  # empty relation
        return _build_partitioning(rel, y_ordered, fams, groups, {}, 0)
    assignment = {k: f for k, f in zip(keys, best_assign)}
    return _build_partitioning(rel, y_ordered, fams, groups, assignment, best_d)
