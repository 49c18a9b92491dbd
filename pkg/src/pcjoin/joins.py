"""Full-CQ evaluation: nested-loop oracle, trie-based generic join,
prefix-size profiling, the partition-lifted join, and the linear hexagon
algorithm."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, MutableMapping, Sequence

from .decompose import Partitioning, decompose_approx, decompose_exact
from .relations import (
    ConstraintViolationError,
    Instance,
    ParameterError,
    Query,
    Relation,
    SchemaError,
    project,
)
from .stats import ConstraintSet, compute_dc

VariableOrder = tuple[str, ...]


@dataclass(frozen=True)
class VaatProfile:
    """Exact sizes of the per-prefix joins under one variable order."""

    order: VariableOrder
    sizes: tuple[int, ...]

    @property
    def max_size(self) -> int:
        return max(self.sizes) if self.sizes else 0


def _check_order(query: Query, order: Sequence[str]) -> VariableOrder:
    order = tuple(order)
    if sorted(order) != sorted(query.head):
        raise SchemaError(
            f"order {order} is not a permutation of the query variables {query.head}"
        )
    return order


def nested_loop_join_oracle(query: Query, instance: Instance) -> Relation:
    """Ground truth by naive backtracking over atom tuples; no indexes."""
    instance.validate_for(query)
    rels = [instance.get(a.relation) for a in query.atoms]
    head = query.head
    out: list[tuple[int, ...]] = []
    binding: dict[str, int] = {}

    def recurse(i: int) -> None:
        if i == len(rels):
            out.append(tuple(binding[v] for v in head))
            return
        vars = query.atoms[i].vars
        for t in rels[i].tuples:
            ok = True
            added: list[str] = []
            for v, val in zip(vars, t):
                bound = binding.get(v)
                if bound is None:
                    binding[v] = val
                    added.append(v)
                elif bound != val:
                    ok = False
                    break
            if ok:
                recurse(i + 1)
            for v in added:
                del binding[v]

    recurse(0)
    return Relation.build(query.name, head, out)


def default_variable_order(query: Query, instance: Instance) -> VariableOrder:
    """Greedy heuristic: next variable with the smallest distinct-value count
    over any atom containing it; ties alphabetical."""
    distinct: dict[str, int] = {}
    for atom in query.atoms:
        rel = instance.get(atom.relation)
        for v in atom.vars:
            n = len(project(rel, (v,)))
            if v not in distinct or n < distinct[v]:
                distinct[v] = n
    return tuple(sorted(query.head, key=lambda v: (distinct.get(v, 0), v)))


def _join_dfs(
    atoms: Sequence[tuple[tuple[str, ...], Relation]],
    order: Sequence[str],
    emit: Callable[[tuple[int, ...]], None] | None = None,
    level_counter: list[int] | None = None,
) -> None:
    """Shared variable-at-a-time DFS over per-atom nested indexes.

    Visits exactly the prefix-join members at each depth: a prefix survives iff
    every atom's projection onto the seen variables contains it. Every atom
    variable must occur in ``order``.
    """
    order = tuple(order)
    depth_of = {v: i for i, v in enumerate(order)}

    # per-atom nested dict index, keyed in the atom's order-restricted sequence;
    # the atom is probed at exactly the depths of its own variables
    indexes: list[dict] = []
    active_at: list[list[int]] = [[] for _ in order]
    for ai, (vars, rel) in enumerate(atoms):
        restricted = sorted(range(len(vars)), key=lambda i: depth_of[vars[i]])
        index: dict = {}
        for t in rel.tuples:
            node = index
            for i in restricted[:-1]:
                node = node.setdefault(t[i], {})
            node.setdefault(t[restricted[-1]], None)
        indexes.append(index)
        for i in restricted:
            active_at[depth_of[vars[i]]].append(ai)

    nodes: list[dict | None] = list(indexes)
    stack_vals: list[int] = []

    def descend(depth: int) -> None:
        active = active_at[depth]
        if not active:
            # cannot happen for a full CQ whose atoms were projected onto order
            raise SchemaError(f"variable {order[depth]!r} not covered by any atom")
        smallest = min(active, key=lambda ai: len(nodes[ai]))
        saved = [nodes[ai] for ai in active]
        for value in nodes[smallest]:
            ok = True
            for ai in active:
                node = nodes[ai]
                if value in node:
                    nodes[ai] = node[value]
                else:
                    ok = False
                    break
            if ok:
                if level_counter is not None:
                    level_counter[depth] += 1
                stack_vals.append(value)
                if depth + 1 == len(order):
                    if emit is not None:
                        emit(tuple(stack_vals))
                else:
                    descend(depth + 1)
                stack_vals.pop()
            for ai, node in zip(active, saved):
                nodes[ai] = node

    if order:
        descend(0)


def _atoms_for(query: Query, instance: Instance) -> list[tuple[tuple[str, ...], Relation]]:
    return [(a.vars, instance.get(a.relation)) for a in query.atoms]


def generic_join(
    query: Query, instance: Instance, order: Sequence[str] | None = None
) -> Relation:
    """Worst-case-optimal style variable-at-a-time join over nested indexes."""
    instance.validate_for(query)
    if any(instance.get(a.relation).is_empty() for a in query.atoms):
        return Relation.build(query.name, query.head, [])
    real_order = (
        default_variable_order(query, instance) if order is None else _check_order(query, order)
    )
    out: list[tuple[int, ...]] = []
    _join_dfs(_atoms_for(query, instance), real_order, emit=out.append)
    pos = {v: i for i, v in enumerate(real_order)}
    perm = [pos[v] for v in query.head]
    return Relation.build(query.name, query.head, [tuple(t[i] for i in perm) for t in out])


def prefix_join_size(
    query: Query,
    instance: Instance,
    prefix: Sequence[str],
    cache: MutableMapping[frozenset, int] | None = None,
) -> int:
    """Exact size of the join of the per-atom projections onto ``prefix``.

    Sizes depend only on the variable set, so callers profiling many orders can
    share a ``cache``.
    """
    key = frozenset(prefix)
    if cache is not None and key in cache:
        return cache[key]
    if any(instance.get(a.relation).is_empty() for a in query.atoms):
        size = 0
    else:
        proj_atoms: list[tuple[tuple[str, ...], Relation]] = []
        for atom in query.atoms:
            kept = tuple(v for v in atom.vars if v in key)
            if kept:
                proj_atoms.append((kept, project(instance.get(atom.relation), kept)))
        if not proj_atoms:
            size = 1  # every atom projects to the nonempty nullary relation
        else:
            order = [v for v in prefix if any(v in vars for vars, _ in proj_atoms)]
            counter = [0] * len(order)
            _join_dfs(proj_atoms, order, level_counter=counter)
            size = counter[-1] if counter else 1
    if cache is not None:
        cache[key] = size
    return size


def vaat_profile(
    query: Query,
    instance: Instance,
    order: Sequence[str],
    cache: MutableMapping[frozenset, int] | None = None,
) -> VaatProfile:
    """Sizes of all prefix joins Q_1..Q_r under ``order``."""
    instance.validate_for(query)
    real_order = _check_order(query, order)
    sizes = tuple(
        prefix_join_size(query, instance, real_order[: i + 1], cache)
        for i in range(len(real_order))
    )
    return VaatProfile(real_order, sizes)


@dataclass(frozen=True)
class LiftedResult:
    """Output of the lifted join plus the plan facts tests care about: the
    family choice behind each sub-query, its output size, and the witnessing
    partitionings."""

    output: Relation
    choices: tuple[tuple[int, ...], ...]
    sub_sizes: tuple[int, ...]
    partitionings: tuple[Partitioning, ...]


def _base_engine(name: str):
    if name == "generic":
        return generic_join
    if name == "oracle":
        return nested_loop_join_oracle
    if name == "hexagon":
        return _hexagon_engine
    raise ParameterError(f"unknown base join engine {name!r}")


def lifted_join_detailed(
    query: Query,
    instance: Instance,
    constraints: ConstraintSet,
    base: str = "generic",
    exact: bool = False,
    jobs: int = 1,
) -> LiftedResult:
    """Decompose every constrained relation, run the base join once per choice
    of one part per constraint, and concatenate the (pairwise disjoint) results.

    Raises ConstraintViolationError when a relation demonstrably violates its
    constraint: exactly for singleton families and exact mode, and at the
    factor-|families| approximation threshold otherwise.
    """
    instance.validate_for(query)
    engine = _base_engine(base)
    pcs = list(constraints)
    decompose = decompose_exact if exact else decompose_approx

    partitionings: list[Partitioning] = []
    tuple_tags: list[dict[tuple[int, ...], int]] = []
    for c in pcs:
        rel = instance.get(c.relation)
        if c.is_singleton:
            got = compute_dc(rel, c.families[0], c.y_vars)
            if got > c.degree:
                raise ConstraintViolationError(
                    f"relation {c.relation!r} violates its degree constraint: "
                    f"{got} > {c.degree}"
                )
            parts = Partitioning(
                rel,
                tuple(v for v in rel.schema if v in c.y_vars),
                c.families,
                (rel,),
                got,
            )
        else:
            parts = decompose(rel, c.families, c.y_vars)
            threshold = c.degree if exact else len(c.families) * c.degree
            if parts.achieved_degree > threshold:
                raise ConstraintViolationError(
                    f"relation {c.relation!r} violates its partition constraint: "
                    f"achieved degree {parts.achieved_degree} > {threshold}"
                )
        partitionings.append(parts)
        tags: dict[tuple[int, ...], int] = {}
        for idx, part in enumerate(parts.parts):
            for t in part.tuples:
                tags[t] = idx
        tuple_tags.append(tags)

    constrained = sorted({c.relation for c in pcs})
    by_relation: dict[str, list[int]] = {
        name: [i for i, c in enumerate(pcs) if c.relation == name] for name in constrained
    }

    def run_combination(choice: tuple[int, ...]) -> Relation:
        sub = Instance(instance.catalog, instance.relations)
        for name in constrained:
            rel = instance.get(name)
            rows = [
                t
                for t in rel.tuples
                if all(tuple_tags[i].get(t) == choice[i] for i in by_relation[name])
            ]
            sub.bind(Relation(rel.name, rel.schema, tuple(rows)))
        return engine(query, sub)

    choices = list(itertools.product(*(range(len(c.families)) for c in pcs)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(run_combination, choices))
    else:
        outputs = [run_combination(ch) for ch in choices]

    union: set[tuple[int, ...]] = set()
    total = 0
    for rel in outputs:
        total += len(rel)
        union.update(rel.tuples)
    if total != len(union):
        raise AssertionError("sub-query outputs overlap; they must partition the result")
    output = Relation.build(query.name, query.head, union)
    return LiftedResult(
        output,
        tuple(choices),
        tuple(len(r) for r in outputs),
        tuple(partitionings),
    )


def pc_lifted_join(
    query: Query,
    instance: Instance,
    constraints: ConstraintSet,
    base: str = "generic",
    exact: bool = False,
    jobs: int = 1,
) -> Relation:
    return lifted_join_detailed(query, instance, constraints, base, exact, jobs).output


_HEX_TEXT = "Q(A,B,C,U,V,W) <- R1(A,W,B), R2(B,U,C), R3(C,V,A), R4(U,V,W)."


def _hexagon_engine(query: Query, instance: Instance) -> Relation:
    """Adapter so the hexagon algorithm can serve as a lifted-join base."""
    shape = _hexagon_shape(query)
    if shape is None:
        raise ParameterError("hexagon engine requires a hexagon-shaped query")
    rels = [instance.get(a.relation) for a in query.atoms]
    out = hexagon_join(*rels)
    pos = [out.column(v) for v in query.head]
    return Relation.build(
        query.name, query.head, [tuple(t[i] for i in pos) for t in out.tuples]
    )


def _hexagon_shape(query: Query) -> tuple[str, ...] | None:
    """Returns (A,B,C,U,V,W) if the query matches the hexagon pattern."""
    if len(query.atoms) != 4 or any(len(a.vars) != 3 for a in query.atoms):
        return None
    a1, a2, a3, a4 = query.atoms
    A, W, B = a1.vars
    if a2.vars[0] != B:
        return None
    U, C = a2.vars[1], a2.vars[2]
    if a3.vars != (C, a3.vars[1], A):
        return None
    V = a3.vars[1]
    if a4.vars != (U, V, W):
        return None
    if len({A, B, C, U, V, W}) != 6:
        return None
    return (A, B, C, U, V, W)


def hexagon_join(
    r1: Relation,
    r2: Relation,
    r3: Relation,
    r4: Relation,
    stats: dict | None = None,
) -> Relation:
    """Linear-time evaluation of the six-variable cycle-of-triples query.

    Splits the (U,V,W) relation into one part per variable (each part keeping
    at most 3 tuples per value of its variable), then for each part runs a
    nested loop anchored on the triple relation that shares that variable;
    all selections are O(1) via composite-key hash maps built once.
    """
    A, W, B = r1.schema
    if r2.schema[0] != B or len(r2.schema) != 3:
        raise SchemaError("second relation must share its first variable with the first")
    U, C = r2.schema[1], r2.schema[2]
    if r3.schema != (C, r3.schema[1], A) or len(r3.schema) != 3:
        raise SchemaError("third relation must close the triangle on its outer variables")
    V = r3.schema[1]
    if r4.schema != (U, V, W):
        raise SchemaError(f"fourth relation schema must be ({U},{V},{W})")
    if len({A, B, C, U, V, W}) != 6:
        raise SchemaError("the six query variables must be distinct")

    parts = decompose_approx(r4, [(U,), (V,), (W,)], (U, V, W))
    if parts.achieved_degree > 3:
        raise ConstraintViolationError(
            "PC precondition violated: the (U,V,W) relation does not admit a "
            f"degree-1 partition (approximate degree {parts.achieved_degree} > 3)"
        )
    part_u, part_v, part_w = parts.parts

    def group_pairs(rel: Relation, key: int, val1: int, val2: int) -> dict:
        out: dict[int, list[tuple[int, int]]] = {}
        for t in rel.tuples:
            out.setdefault(t[key], []).append((t[val1], t[val2]))
        return out

    def group_composite(rel: Relation, k1: int, k2: int, val: int) -> dict:
        out: dict[tuple[int, int], set[int]] = {}
        for t in rel.tuples:
            out.setdefault((t[k1], t[k2]), set()).add(t[val])
        return out

    by_w = group_pairs(part_w, 2, 0, 1)  # w -> (u, v)
    by_u = group_pairs(part_u, 0, 1, 2)  # u -> (v, w)
    by_v = group_pairs(part_v, 1, 0, 2)  # v -> (u, w)
    r2_bu = group_composite(r2, 0, 1, 2)  # (b, u) -> {c}
    r2_uc = group_composite(r2, 1, 2, 0)  # (u, c) -> {b}
    r3_av = group_composite(r3, 2, 1, 0)  # (a, v) -> {c}
    r3_cv = group_composite(r3, 0, 1, 2)  # (c, v) -> {a}
    r1_bw = group_composite(r1, 2, 1, 0)  # (b, w) -> {a}
    r1_aw = group_composite(r1, 0, 1, 2)  # (a, w) -> {b}

    empty: set[int] = set()
    max_part = 0
    max_intersection = 0
    out: list[tuple[int, ...]] = []

    for a, w, b in r1.tuples:
        pairs = by_w.get(w, ())
        max_part = max(max_part, len(pairs))
        for u, v in pairs:
            left = r2_bu.get((b, u), empty)
            right = r3_av.get((a, v), empty)
            if len(right) < len(left):
                left, right = right, left
            max_intersection = max(max_intersection, len(left))
            for c in left:
                if c in right:
                    out.append((a, b, c, u, v, w))

    for b, u, c in r2.tuples:
        pairs = by_u.get(u, ())
        max_part = max(max_part, len(pairs))
        for v, w in pairs:
            left = r1_bw.get((b, w), empty)
            right = r3_cv.get((c, v), empty)
            if len(right) < len(left):
                left, right = right, left
            max_intersection = max(max_intersection, len(left))
            for a in left:
                if a in right:
                    out.append((a, b, c, u, v, w))

    for c, v, a in r3.tuples:
        pairs = by_v.get(v, ())
        max_part = max(max_part, len(pairs))
        for u, w in pairs:
            left = r1_aw.get((a, w), empty)
            right = r2_uc.get((u, c), empty)
            if len(right) < len(left):
                left, right = right, left
            max_intersection = max(max_intersection, len(left))
            for b in left:
                if b in right:
                    out.append((a, b, c, u, v, w))

    if stats is not None:
        stats["max_part_candidates"] = max_part
        stats["max_intersection"] = max_intersection
        stats["achieved_degree"] = parts.achieved_degree
    return Relation.build("Q", (A, B, C, U, V, W), out)
