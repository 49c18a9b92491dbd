"""Degree and partition constraints: computation, checking, witnesses, profiles."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .relations import (
    ConstraintViolationError,
    CoverageError,
    ParameterError,
    Query,
    Relation,
    SchemaError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .decompose import Partitioning


def _as_varset(vars: Iterable[str]) -> frozenset[str]:
    return frozenset(vars)


def family_label(family: frozenset[str]) -> str:
    return "_".join(sorted(family)) if family else "empty"


@dataclass(frozen=True)
class DegreeConstraint:
    """For every fixed x over ``x_vars``, at most ``degree`` distinct
    ``y_vars``-projections occur among the matching tuples."""

    relation: str
    x_vars: frozenset[str]
    y_vars: frozenset[str]
    degree: int

    def __post_init__(self) -> None:
        if not self.x_vars <= self.y_vars:
            raise SchemaError(
                f"DC on {self.relation!r}: X {sorted(self.x_vars)} not a subset of "
                f"Y {sorted(self.y_vars)}"
            )
        if self.degree < 0:
            raise SchemaError(f"DC on {self.relation!r}: negative degree {self.degree}")

    @property
    def is_cardinality(self) -> bool:
        return not self.x_vars

    def scaled(self, alpha: int) -> "DegreeConstraint":
        return DegreeConstraint(self.relation, self.x_vars, self.y_vars, self.degree * alpha)


@dataclass(frozen=True)
class PartitionConstraint:
    """The relation can be split into one part per family so that part X
    satisfies DC(X, y_vars, degree)."""

    relation: str
    families: tuple[frozenset[str], ...]
    y_vars: frozenset[str]
    degree: int

    def __post_init__(self) -> None:
        if not self.families:
            raise SchemaError(f"PC on {self.relation!r}: empty family set")
        if len(set(self.families)) != len(self.families):
            raise SchemaError(f"PC on {self.relation!r}: duplicate family")
        for fam in self.families:
            if not fam <= self.y_vars:
                raise SchemaError(
                    f"PC on {self.relation!r}: family {sorted(fam)} not a subset of "
                    f"Y {sorted(self.y_vars)}"
                )
        if self.degree < 0:
            raise SchemaError(f"PC on {self.relation!r}: negative degree {self.degree}")

    @property
    def is_singleton(self) -> bool:
        return len(self.families) == 1

    def as_dc(self, family_index: int) -> DegreeConstraint:
        return DegreeConstraint(
            self.relation, self.families[family_index], self.y_vars, self.degree
        )

    @staticmethod
    def from_dc(dc: DegreeConstraint) -> "PartitionConstraint":
        return PartitionConstraint(dc.relation, (dc.x_vars,), dc.y_vars, dc.degree)


def dc(relation: str, x_vars: Iterable[str], y_vars: Iterable[str], degree: int) -> DegreeConstraint:
    return DegreeConstraint(relation, _as_varset(x_vars), _as_varset(y_vars), degree)


def pc(
    relation: str,
    families: Iterable[Iterable[str]],
    y_vars: Iterable[str],
    degree: int,
) -> PartitionConstraint:
    return PartitionConstraint(
        relation, tuple(_as_varset(f) for f in families), _as_varset(y_vars), degree
    )


def cc(relation: str, schema: Iterable[str], size: int) -> PartitionConstraint:
    """Cardinality constraint: the degenerate DC with empty X over the full schema."""
    return pc(relation, [()], schema, size)


@dataclass
class ConstraintSet:
    """An ordered collection of partition constraints (DCs as singleton families).

    Duplicate (relation, families, Y) entries collapse to the smaller degree;
    several PCs sharing (relation, Y) with different families are allowed but
    flagged with a warning, since downstream sums still treat them independently.
    """

    constraints: list[PartitionConstraint] = field(default_factory=list)

    def add(self, c: PartitionConstraint) -> None:
        key = (c.relation, frozenset(c.families), c.y_vars)
        for i, existing in enumerate(self.constraints):
            if (existing.relation, frozenset(existing.families), existing.y_vars) == key:
                if c.degree < existing.degree:
                    self.constraints[i] = c
                return
        if not c.is_singleton:
            clash = any(
                not e.is_singleton
                and e.relation == c.relation
                and e.y_vars == c.y_vars
                for e in self.constraints
            )
            if clash:
                # plain degree constraints share (relation, Y) all the time;
                # only stacked multi-family constraints are worth flagging
                warnings.warn(
                    f"multiple multi-family partition constraints on {c.relation!r} "
                    f"share Y={sorted(c.y_vars)}; the extension still sums over all "
                    "family combinations",
                    stacklevel=2,
                )
        self.constraints.append(c)

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def for_relation(self, name: str) -> list[PartitionConstraint]:
        return [c for c in self.constraints if c.relation == name]

    def validate_for(self, query: Query, instance=None) -> None:
        """Shape-check against a query: names resolve, Y fits the atom schema,
        and every query variable is covered by a cardinality constraint."""
        atom_vars: dict[str, frozenset[str]] = {}
        for atom in query.atoms:
            atom_vars.setdefault(atom.relation, frozenset(atom.vars))
        for c in self.constraints:
            if c.relation not in atom_vars:
                raise SchemaError(
                    f"constraint names relation {c.relation!r} absent from the query"
                )
            if not c.y_vars <= atom_vars[c.relation]:
                raise SchemaError(
                    f"constraint on {c.relation!r}: Y {sorted(c.y_vars)} not within the "
                    f"atom variables {sorted(atom_vars[c.relation])}"
                )
        covered: set[str] = set()
        for c in self.constraints:
            if (
                c.is_singleton
                and not c.families[0]
                and c.y_vars == atom_vars.get(c.relation)
            ):
                covered.update(c.y_vars)
        missing = set(query.head) - covered
        if missing:
            raise CoverageError(
                f"variables {sorted(missing)} are not covered by any cardinality constraint"
            )

    def to_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.constraints:
                fh.write(
                    json.dumps(
                        {
                            "relation": c.relation,
                            "families": [sorted(f) for f in c.families],
                            "y": sorted(c.y_vars),
                            "d": c.degree,
                        }
                    )
                    + "\n"
                )

    @staticmethod
    def from_jsonl(path: str) -> "ConstraintSet":
        cset = ConstraintSet()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                    cset.add(
                        pc(doc["relation"], doc["families"], doc["y"], int(doc["d"]))
                    )
                except (KeyError, ValueError, TypeError) as exc:
                    raise SchemaError(f"bad constraint at line {lineno}: {exc}") from exc
        return cset


def compute_dc(rel: Relation, x_vars: Iterable[str], y_vars: Iterable[str]) -> int:
    """Minimal d such that every x-value has at most d distinct Y-projections.

    Maximizes over the x-values present in the relation; absent values have
    zero matching tuples and can never attain the maximum. Empty relation: 0.
    With empty X this is just the number of distinct Y-projections.
    """
    xv = _as_varset(x_vars)
    yv = _as_varset(y_vars)
    if not xv <= yv:
        raise SchemaError(f"X {sorted(xv)} must be a subset of Y {sorted(yv)}")
    ypos = rel.positions(sorted(yv))
    xpos = rel.positions(sorted(xv))
    if rel.is_empty():
        return 0
    groups: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
    for t in rel.tuples:
        xkey = tuple(t[i] for i in xpos)
        groups.setdefault(xkey, set()).add(tuple(t[i] for i in ypos))
    return max(len(s) for s in groups.values())


def check_dc(rel: Relation, constraint: DegreeConstraint) -> bool:
    """True iff the relation satisfies the constraint (its name is not checked,
    so sub-relations with derived names can be validated too)."""
    return compute_dc(rel, constraint.x_vars, constraint.y_vars) <= constraint.degree


def check_pc_witness(rel: Relation, constraint: PartitionConstraint, parts: "Partitioning") -> bool:
    """True iff ``parts`` is a valid witness: indexed by the constraint's
    families, pairwise disjoint, unions to ``rel``, and every part meets the
    degree bound for its family."""
    if set(parts.families) != set(constraint.families):
        raise PcWitnessShapeError(
            f"witness families {[sorted(f) for f in parts.families]} do not match "
            f"constraint families {[sorted(f) for f in constraint.families]}"
        )
    total = 0
    seen: set[tuple[int, ...]] = set()
    for part in parts.parts:
        total += len(part)
        seen.update(part.tuples)
    if total != len(seen) or seen != set(rel.tuples):
        return False
    for fam, part in zip(parts.families, parts.parts):
        if compute_dc(part, fam, constraint.y_vars) > constraint.degree:
            return False
    return True


class PcWitnessShapeError(SchemaError):
    """Witness parts are not indexed by the constraint's families."""


def pc_value(rel: Relation, families: Iterable[Iterable[str]], y_vars: Iterable[str]) -> int:
    """Minimal degree over all partitionings; computed by the exact decomposition."""
    from .decompose import decompose_exact

    fams = tuple(_as_varset(f) for f in families)
    return decompose_exact(rel, fams, _as_varset(y_vars)).achieved_degree


@dataclass(frozen=True)
class PcProfile:
    """Per-relation summary over the non-key attributes: extreme single-column
    degrees, the partition constraint over all singleton families, and the
    family count."""

    relation: str
    y_vars: tuple[str, ...]
    max_dc: int
    min_dc: int
    pc: int
    family_count: int

    def as_dict(self) -> dict:
        return {
            "relation": self.relation,
            "y": list(self.y_vars),
            "max_dc": self.max_dc,
            "min_dc": self.min_dc,
            "pc": self.pc,
            "families": self.family_count,
        }


def nonkey_pc_profile(rel: Relation, key_vars: Iterable[str]) -> PcProfile:
    """Profile the non-key attributes: with Y the non-key columns and one
    singleton family per column, report max/min single-column DC and the PC."""
    keys = _as_varset(key_vars)
    unknown = keys - set(rel.schema)
    if unknown:
        raise SchemaError(f"unknown key attributes {sorted(unknown)}")
    y = tuple(v for v in rel.schema if v not in keys)
    if len(y) < 2:
        raise ParameterError(
            f"profile undefined: need at least 2 non-key attributes, have {len(y)}"
        )
    degs = [compute_dc(rel, (v,), y) for v in y]
    value = pc_value(rel, [(v,) for v in y], y)
    return PcProfile(rel.name, y, max(degs), min(degs), value, len(y))


def check_instance(instance, cset: ConstraintSet, exact: bool = True) -> None:
    """Raise ConstraintViolationError if some relation fails its constraint.

    Singleton families are checked directly; true PCs are certified through a
    decomposition witness (exact, or the approximate one with its factor-
    |families| guarantee when ``exact`` is false).
    """
    from .decompose import decompose_approx, decompose_exact

    for c in cset:
        rel = instance.get(c.relation)
        if c.is_singleton:
            got = compute_dc(rel, c.families[0], c.y_vars)
            if got > c.degree:
                raise ConstraintViolationError(
                    f"relation {c.relation!r} violates DC("
                    f"{sorted(c.families[0])}, {sorted(c.y_vars)}, {c.degree}): actual {got}"
                )
        elif exact:
            got = decompose_exact(rel, c.families, c.y_vars).achieved_degree
            if got > c.degree:
                raise ConstraintViolationError(
                    f"relation {c.relation!r} violates its partition constraint: "
                    f"minimal degree {got} > {c.degree}"
                )
        else:
            got = decompose_approx(rel, c.families, c.y_vars).achieved_degree
            if got > len(c.families) * c.degree:
                raise ConstraintViolationError(
                    f"relation {c.relation!r} violates its partition constraint: "
                    f"approximate degree {got} > {len(c.families)} * {c.degree}"
                )
