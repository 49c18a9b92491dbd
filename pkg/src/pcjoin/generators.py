"""Adversarial and randomized instance families, plus small built-in fixtures.

All generators are deterministic given their parameters and seed, and every
asserted constraint on their output is re-verified by the statistics module in
tests rather than trusted by construction.
"""
from __future__ import annotations

import random
from typing import Sequence

from .relations import Catalog, Instance, ParameterError, Query, Relation, parse_query
from .stats import ConstraintSet, cc, pc

HEX_QUERY_TEXT = "Q(A,B,C,U,V,W) <- R1(A,W,B), R2(B,U,C), R3(C,V,A), R4(U,V,W)."

_HEX_ATOMS: tuple[tuple[str, tuple[str, str, str]], ...] = (
    ("R1", ("A", "W", "B")),
    ("R2", ("B", "U", "C")),
    ("R3", ("C", "V", "A")),
    ("R4", ("U", "V", "W")),
)


def hexagon_query() -> Query:
    return parse_query(HEX_QUERY_TEXT)


def hexagon_dc_set(n: int) -> ConstraintSet:
    """The degree-constraint side: six degree-1 pair constraints plus one
    cardinality constraint per relation."""
    cset = ConstraintSet()
    cset.add(pc("R1", [("A", "W")], ("A", "W", "B"), 1))
    cset.add(pc("R1", [("W", "B")], ("A", "W", "B"), 1))
    cset.add(pc("R2", [("B", "U")], ("B", "U", "C"), 1))
    cset.add(pc("R2", [("U", "C")], ("B", "U", "C"), 1))
    cset.add(pc("R3", [("C", "V")], ("C", "V", "A"), 1))
    cset.add(pc("R3", [("V", "A")], ("C", "V", "A"), 1))
    for name, vars in _HEX_ATOMS:
        cset.add(cc(name, vars, n))
    return cset


def hexagon_pc_set(n: int) -> ConstraintSet:
    """The full constraint side: the DC set plus the three-way partition
    constraint on the (U,V,W) relation."""
    cset = hexagon_dc_set(n)
    cset.add(pc("R4", [("U",), ("V",), ("W",)], ("U", "V", "W"), 1))
    return cset


def _cube_root(n: int) -> int:
    m = round(n ** (1 / 3))
    for cand in (m - 1, m, m + 1):
        if cand >= 1 and cand**3 == n:
            return cand
    raise ParameterError(f"{n} is not a perfect cube")


def _require_odd_cube(n: int) -> int:
    m = _cube_root(n)
    if m % 2 == 0:
        raise ParameterError(f"{n} = {m}^3 but the cube root must be odd")
    return m


def adjust_to_odd_cube(n: int) -> int:
    """Largest cube of an odd number that is <= n (>= 1)."""
    if n < 1:
        raise ParameterError("scale must be positive")
    m = 1
    while (m + 2) ** 3 <= n:
        m += 2
    return m**3


def _val(catalog: Catalog, var: str, index: int, block: str | None = None) -> int:
    return catalog.intern(f"{block}.{var}{index}" if block else f"{var}{index}")


def gen_mod_relation(
    n: int,
    var_names: Sequence[str] = ("X", "Y", "Z"),
    catalog: Catalog | None = None,
    block: str | None = None,
) -> Relation:
    """Shifted-modular bipartite relation: first and third columns range over
    n^(2/3) values, the middle one over n^(1/3), and the third is the sum of
    the other two recentered mod n^(2/3). Both two-column prefixes and
    suffixes determine the remaining column."""
    m = _require_odd_cube(n)
    if catalog is None:
        catalog = Catalog()
    x, y, z = var_names
    m2 = m * m
    shift = m // 2
    rows = []
    for i in range(m2):
        for j in range(m):
            k = (i + j - shift) % m2
            rows.append(
                (
                    _val(catalog, x, i, block),
                    _val(catalog, y, j, block),
                    _val(catalog, z, k, block),
                )
            )
    return Relation.build(f"R_{x}{y}{z}", tuple(var_names), rows)


def gen_hexagon_hard_dc(n: int, catalog: Catalog | None = None) -> Instance:
    """Instance satisfying the hexagon DC set but not the partition constraint:
    three shifted-modular relations plus a full cross product on (U,V,W)."""
    m = _require_odd_cube(n)
    inst = Instance(catalog)
    cat = inst.catalog
    inst.bind(gen_mod_relation(n, ("A", "W", "B"), cat).with_name("R1"))
    inst.bind(gen_mod_relation(n, ("B", "U", "C"), cat).with_name("R2"))
    inst.bind(gen_mod_relation(n, ("C", "V", "A"), cat).with_name("R3"))
    rows = [
        (_val(cat, "U", i), _val(cat, "V", j), _val(cat, "W", k))
        for i in range(m)
        for j in range(m)
        for k in range(m)
    ]
    inst.bind(Relation.build("R4", ("U", "V", "W"), rows))
    return inst


def gen_pc_hexagon(n: int, seed: int = 0, catalog: Catalog | None = None) -> Instance:
    """Instance satisfying the full hexagon constraint set, with linear output.

    The scale is adjusted down to the nearest odd cube. The (U,V,W) relation is
    a shuffled union of three degree-1 pieces (one value of the piece variable
    per tuple), every tuple aligned so that it completes the outer triangles.
    """
    adjusted = adjust_to_odd_cube(n)
    m = _cube_root(adjusted)
    inst = Instance(catalog)
    cat = inst.catalog
    inst.bind(gen_mod_relation(adjusted, ("A", "W", "B"), cat).with_name("R1"))
    inst.bind(gen_mod_relation(adjusted, ("B", "U", "C"), cat).with_name("R2"))
    inst.bind(gen_mod_relation(adjusted, ("C", "V", "A"), cat).with_name("R3"))

    rng = random.Random(seed)
    target = 3 * (m // 2)  # tuples with u+v+w at this value close the cycle
    rows: list[tuple[int, int, int]] = []

    def aligned_pair(fixed: int) -> tuple[int, int]:
        # pick (p, q) with p + q = target - fixed, both within [0, m)
        s = target - fixed
        lo, hi = max(0, s - (m - 1)), min(m - 1, s)
        p = rng.randint(lo, hi)
        return p, s - p

    for u in range(m):
        v, w = aligned_pair(u)
        rows.append((u, v, w))
    for v in range(m):
        u, w = aligned_pair(v)
        rows.append((u, v, w))
    for w in range(m):
        u, v = aligned_pair(w)
        rows.append((u, v, w))
    inst.bind(
        Relation.build(
            "R4",
            ("U", "V", "W"),
            [
                (_val(cat, "U", u), _val(cat, "V", v), _val(cat, "W", w))
                for u, v, w in rows
            ],
        )
    )
    return inst


def _require_square_seventh(n: int) -> int:
    if n % 7 != 0:
        raise ParameterError(f"scale {n} must be a multiple of 7")
    part = n // 7
    q = round(part**0.5)
    for cand in (q - 1, q, q + 1):
        if cand >= 1 and cand * cand == part:
            return cand
    raise ParameterError(f"{n}/7 = {part} is not a perfect square")


def gen_complete_bipartite(
    n: int,
    var_names: Sequence[str] = ("X", "Y", "Z"),
    catalog: Catalog | None = None,
    block: str | None = None,
) -> Relation:
    """All pairs over two sqrt(n/7)-sized domains; the third column uniquely
    identifies the pair."""
    q = _require_square_seventh(n)
    if catalog is None:
        catalog = Catalog()
    x, y, z = var_names
    rows = [
        (
            _val(catalog, x, i, block),
            _val(catalog, y, j, block),
            _val(catalog, z, i * q + j, block),
        )
        for i in range(q)
        for j in range(q)
    ]
    return Relation.build(f"C_{x}{y}{z}", tuple(var_names), rows)


def gen_disjoint_paths(
    n: int,
    var_names: Sequence[str] = ("X", "Y", "Z"),
    catalog: Catalog | None = None,
    block: str | None = None,
) -> Relation:
    """n/7 tuples with all three positions at the same index; every value
    appears exactly once."""
    _require_square_seventh(n)
    if catalog is None:
        catalog = Catalog()
    x, y, z = var_names
    rows = [
        (
            _val(catalog, x, i, block),
            _val(catalog, y, i, block),
            _val(catalog, z, i, block),
        )
        for i in range(n // 7)
    ]
    return Relation.build(f"P_{x}{y}{z}", tuple(var_names), rows)


_OPPOSITE_PAIRS = (("A", "U"), ("B", "V"), ("C", "W"))


def gen_vaat_hard(n: int, catalog: Catalog | None = None) -> Instance:
    """Disjoint union (by per-block constant renaming) of seven sub-databases:
    one per atom, where that atom is the disjoint-path relation and the others
    are complete-bipartite relations split on the shared variable; and one per
    opposite variable pair, where every atom is complete-bipartite split on its
    member of the pair.

    Every atom ends up with exactly n tuples, and the whole instance satisfies
    the full hexagon constraint set while forcing every variable-at-a-time
    evaluation through a polynomially larger intermediate.
    """
    _require_square_seventh(n)
    inst = Instance(catalog)
    cat = inst.catalog
    per_atom_rows: dict[str, list[tuple[int, int, int]]] = {name: [] for name, _ in _HEX_ATOMS}

    def c_relation(block: str, pair: tuple[str, str], shared: str, atom_vars: Sequence[str]):
        rel = gen_complete_bipartite(n, (pair[0], pair[1], shared), cat, block)
        role = {pair[0]: 0, pair[1]: 1, shared: 2}
        return [tuple(t[role[v]] for v in atom_vars) for t in rel.tuples]

    for block_name, _ in _HEX_ATOMS:
        block = f"d{block_name}"
        anchor_vars = dict(_HEX_ATOMS)[block_name]
        for atom_name, atom_vars in _HEX_ATOMS:
            if atom_name == block_name:
                rel = gen_disjoint_paths(n, atom_vars, cat, block)
                per_atom_rows[atom_name].extend(rel.tuples)
            else:
                pair = tuple(v for v in atom_vars if v not in anchor_vars)
                (shared,) = (v for v in atom_vars if v in anchor_vars)
                per_atom_rows[atom_name].extend(
                    c_relation(block, (pair[0], pair[1]), shared, atom_vars)
                )

    for x, y in _OPPOSITE_PAIRS:
        block = f"d{x}{y}"
        for atom_name, atom_vars in _HEX_ATOMS:
            pair = tuple(v for v in atom_vars if v not in (x, y))
            (shared,) = (v for v in atom_vars if v in (x, y))
            per_atom_rows[atom_name].extend(
                c_relation(block, (pair[0], pair[1]), shared, atom_vars)
            )

    for atom_name, atom_vars in _HEX_ATOMS:
        inst.bind(Relation.build(atom_name, atom_vars, per_atom_rows[atom_name]))
    return inst


def gen_planted_pc(
    num_groups: int,
    families: Sequence[Sequence[int]],
    y_arity: int,
    target_d: int,
    seed: int = 0,
    catalog: Catalog | None = None,
) -> Relation:
    """Random relation whose partition constraint over the given families
    (column-index sets) is at most ``target_d``, by construction: each group is
    planted into a family slot with remaining capacity."""
    if num_groups < 0 or y_arity < 1 or target_d < 1 or not families:
        raise ParameterError("need num_groups >= 0, y_arity >= 1, target_d >= 1, families")
    fams = [tuple(sorted(set(f))) for f in families]
    for f in fams:
        if any(i < 0 or i >= y_arity for i in f):
            raise ParameterError(f"family {f} has column indexes outside 0..{y_arity - 1}")
    if len(set(fams)) != len(fams):
        raise ParameterError("duplicate family")
    if catalog is None:
        catalog = Catalog()
    schema = tuple(f"C{i}" for i in range(y_arity))
    rng = random.Random(seed)
    domain = max(4, num_groups)
    open_slots: list[list[tuple[int, ...]]] = [[] for _ in fams]
    slot_load: list[dict[tuple[int, ...], int]] = [{} for _ in fams]
    rows: set[tuple[int, ...]] = set()

    def rand_coord(col: int) -> int:
        return _val(catalog, schema[col], rng.randrange(domain))

    for _ in range(num_groups):
        f = rng.randrange(len(fams))
        cols = fams[f]
        xkey: tuple[int, ...] | None = None
        if open_slots[f] and rng.random() < 0.6:
            xkey = rng.choice(open_slots[f])
        else:
            for _attempt in range(64):
                cand = tuple(rand_coord(c) for c in cols)
                if slot_load[f].get(cand, 0) < target_d:
                    xkey = cand
                    break
            if xkey is None and open_slots[f]:
                xkey = rng.choice(open_slots[f])
        if xkey is None:
            raise ParameterError("domain too small to respect the planted degree")
        for _attempt in range(64):
            row = [0] * y_arity
            for c, v in zip(cols, xkey):
                row[c] = v
            for c in range(y_arity):
                if c not in cols:
                    row[c] = rand_coord(c)
            t = tuple(row)
            if t not in rows:
                break
        else:
            raise ParameterError("domain too small to place distinct groups")
        rows.add(t)
        load = slot_load[f].get(xkey, 0) + 1
        slot_load[f][xkey] = load
        if load >= target_d:
            if xkey in open_slots[f]:
                open_slots[f].remove(xkey)
        elif xkey not in open_slots[f]:
            open_slots[f].append(xkey)
    return Relation.build(f"planted_{len(fams)}x{target_d}", schema, rows)


def gen_profile_planted(
    max_dc: int,
    min_dc: int,
    pc_target: int,
    num_nonkey: int,
    seed: int = 0,
    catalog: Catalog | None = None,
) -> Relation:
    """Relation with a key column and ``num_nonkey`` payload columns whose
    non-key profile hits (max_dc, min_dc, pc_target) exactly.

    Built from value-disjoint blocks: a torus gadget pinning the partition
    constraint at pc_target with per-column degree k*pc_target, one star
    raising the first column to max_dc, and one star per remaining column
    raising it to min_dc.
    """
    k = num_nonkey
    if k < 2:
        raise ParameterError("need at least 2 non-key columns")
    if pc_target < 1 or min_dc < k * pc_target or max_dc < min_dc:
        raise ParameterError(
            f"need 1 <= pc, {k}*pc <= min_dc <= max_dc; got pc={pc_target}, "
            f"min={min_dc}, max={max_dc}"
        )
    if catalog is None:
        catalog = Catalog()
    rng = random.Random(seed)
    schema = ("K",) + tuple(f"N{i}" for i in range(1, k + 1))
    rows: list[tuple[int, ...]] = []
    serial = 0

    def key() -> int:
        nonlocal serial
        serial += 1
        return catalog.intern(f"k{serial}")

    # torus gadget: tuples t_{i,j}[l] = i + l*j mod B over B = k*pc values per
    # column; column degree k*pc everywhere, optimal split has degree pc
    B = k * pc_target
    perm = list(range(B))
    rng.shuffle(perm)
    for i in range(B):
        for j in range(B):
            rows.append(
                (key(),)
                + tuple(
                    _val(catalog, schema[1 + l], perm[(i + l * j) % B]) for l in range(k)
                )
            )
    # one star per column: a single anchored value with the target number of
    # completions, everything else fresh
    targets = [max_dc] + [min_dc] * (k - 1)
    for col, degree in enumerate(targets):
        anchor = catalog.intern(f"star{col}")
        for t in range(degree):
            row = [key()]
            for l in range(k):
                row.append(anchor if l == col else catalog.intern(f"s{col}_{l}_{t}"))
            rows.append(tuple(row))
    return Relation.build(f"profile_{max_dc}_{min_dc}_{pc_target}", schema, rows)


def sample_room_access(catalog: Catalog | None = None) -> Relation:
    """Ten-row keycard table: six people with one room each plus one porter
    holding four rooms. Single-column degrees are 4 and 3; the two-way
    partition constraint is 1."""
    if catalog is None:
        catalog = Catalog()
    rows = [
        ("Ava", "Beacon Hall"),
        ("Ben", "Beacon Hall"),
        ("Cole", "Delta Hall"),
        ("Dan", "Delta Hall"),
        ("Emma", "Gala Hall"),
        ("Finn", "Jade Hall"),
        ("Porter", "Beacon Hall"),
        ("Porter", "Delta Hall"),
        ("Porter", "Gala Hall"),
        ("Porter", "Jade Hall"),
    ]
    return Relation.build(
        "Access",
        ("PersonID", "RoomID"),
        [catalog.intern_row(r) for r in rows],
    )


def sample_skewed_digraph(catalog: Catalog | None = None) -> Relation:
    """Sixteen directed edges on eight nodes with max in- and out-degree 5,
    yet splittable into an out-degree-1 part and an in-degree-1 part."""
    if catalog is None:
        catalog = Catalog()
    out_part = [  # each source once
        ("A", "F"),
        ("B", "E"),
        ("C", "D"),
        ("D", "F"),
        ("E", "F"),
        ("F", "C"),
        ("A2", "D2"),
        ("D2", "F"),
    ]
    in_part = [  # each target once
        ("A", "B"),
        ("A", "C"),
        ("A", "E"),
        ("B", "A"),
        ("B", "F"),
        ("B", "D"),
        ("A", "A2"),
        ("E", "D2"),
    ]
    return Relation.build(
        "E", ("X", "Y"), [catalog.intern_row(r) for r in out_part + in_part]
    )


def random_relation(
    rng: random.Random,
    arity: int,
    num_tuples: int,
    domain: int,
    catalog: Catalog,
    name: str = "R",
    schema: Sequence[str] | None = None,
) -> Relation:
    """Uniform random relation over per-column domains of the given size."""
    schema = tuple(schema) if schema else tuple(f"V{i}" for i in range(arity))
    rows = {
        tuple(_val(catalog, schema[c], rng.randrange(domain)) for c in range(arity))
        for _ in range(num_tuples)
    }
    return Relation.build(name, schema, rows)


GENERATOR_FAMILIES = (
    "mod",
    "hexagon-dc",
    "vaat-hard",
    "pc-hexagon",
    "planted",
    "profile-planted",
)
