"""Value-interned relations, projections/selections, tries, CSV ingestion, and query parsing."""
from __future__ import annotations

import csv as _csv
import json
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence


class PcjoinError(Exception):
    """Base class for library errors."""


class SchemaError(PcjoinError):
    """Schema mismatch, unknown variable, or malformed constraint shape."""


class ParseError(PcjoinError):
    """Malformed CSV / query text; carries a 1-based location when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ParameterError(PcjoinError):
    """Invalid generator or operation parameters."""


class ConstraintViolationError(PcjoinError):
    """An instance does not satisfy a required constraint."""


class CoverageError(ConstraintViolationError):
    """Some query variable is not covered by the available constraints."""


class ScaleExceededError(PcjoinError):
    """Input exceeds the supported exhaustive-search scale."""


class Catalog:
    """Bijective string<->id interning table shared by all relations of an instance.

    Ids are dense and assigned in first-seen order, which makes every
    downstream sort on ids reproducible for a fixed ingestion order.
    """

    __slots__ = ("_ids", "_names")

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []

    def intern(self, text: str) -> int:
        vid = self._ids.get(text)
        if vid is None:
            vid = len(self._names)
            self._ids[text] = vid
            self._names.append(text)
        return vid

    def intern_row(self, row: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.intern(v) for v in row)

    def name_of(self, vid: int) -> str:
        return self._names[vid]

    def id_of(self, text: str) -> int | None:
        return self._ids.get(text)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, text: str) -> bool:
        return text in self._ids

    def values(self) -> list[str]:
        return list(self._names)


@dataclass(frozen=True)
class Relation:
    """A named set of fixed-arity tuples of interned values.

    ``tuples`` is sorted and duplicate-free; every operation that builds a
    Relation goes through :meth:`build`, so the representation is canonical
    and iteration order is deterministic.
    """

    name: str
    schema: tuple[str, ...]
    tuples: tuple[tuple[int, ...], ...]

    @staticmethod
    def build(name: str, schema: Sequence[str], rows: Iterable[Sequence[int]]) -> "Relation":
        schema = tuple(schema)
        if len(set(schema)) != len(schema):
            raise SchemaError(f"relation {name!r}: duplicate variable in schema {schema}")
        if not schema:
            raise SchemaError(f"relation {name!r}: empty schema")
        arity = len(schema)
        out = set()
        for row in rows:
            t = tuple(row)
            if len(t) != arity:
                raise SchemaError(
                    f"relation {name!r}: tuple arity {len(t)} != schema arity {arity}"
                )
            out.add(t)
        return Relation(name, schema, tuple(sorted(out)))

    @cached_property
    def tuple_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(self.tuples)

    @property
    def arity(self) -> int:
        return len(self.schema)

    def __len__(self) -> int:
        return len(self.tuples)

    def is_empty(self) -> bool:
        return not self.tuples

    def column(self, var: str) -> int:
        try:
            return self.schema.index(var)
        except ValueError:
            raise SchemaError(f"relation {self.name!r}: unknown variable {var!r}") from None

    def positions(self, vars: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.column(v) for v in vars)

    def with_name(self, name: str) -> "Relation":
        return Relation(name, self.schema, self.tuples)

    def with_tuples(self, rows: Iterable[Sequence[int]], name: str | None = None) -> "Relation":
        return Relation.build(name or self.name, self.schema, rows)


@dataclass(frozen=True)
class LoadReport:
    """Ingestion summary: the relation plus raw vs. deduplicated row counts."""

    relation: Relation
    raw_rows: int
    duplicates_dropped: int


def read_csv(
    path: str,
    name: str,
    catalog: Catalog,
    delimiter: str = ",",
    header: bool = True,
    columns: Sequence[str] | None = None,
) -> LoadReport:
    """Read a delimited UTF-8 file into a Relation, collapsing duplicate rows.

    With ``header`` the first row names the schema; otherwise ``columns``
    must be supplied. Ragged rows raise :class:`ParseError` with the 1-based
    line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh, delimiter=delimiter)
        lineno = 0
        schema: Sequence[str] | None = None
        if header:
            for row in reader:
                lineno += 1
                schema = [c.strip() for c in row]
                break
            if schema is None or not any(schema):
                raise SchemaError(f"{path}: empty schema")
        else:
            if columns is None:
                raise SchemaError(f"{path}: no header and no column names given")
            schema = list(columns)
        if not schema:
            raise SchemaError(f"{path}: empty schema")
        arity = len(schema)
        rows: set[tuple[int, ...]] = set()
        raw = 0
        for row in reader:
            lineno += 1
            if not row:
                continue
            if len(row) != arity:
                raise ParseError(
                    f"{path}: row has {len(row)} values, schema has {arity}", line=lineno
                )
            raw += 1
            rows.add(catalog.intern_row(row))
    rel = Relation.build(name, schema, rows)
    return LoadReport(rel, raw, raw - len(rel))


def load_csv(
    path: str,
    name: str,
    catalog: Catalog,
    delimiter: str = ",",
    header: bool = True,
    columns: Sequence[str] | None = None,
) -> Relation:
    return read_csv(path, name, catalog, delimiter, header, columns).relation


def write_csv(path: str, rel: Relation, catalog: Catalog, delimiter: str = ",") -> None:
    """Emit a relation as CSV, rows sorted canonically on interned ids."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, delimiter=delimiter)
        writer.writerow(rel.schema)
        for row in rel.tuples:
            writer.writerow([catalog.name_of(v) for v in row])


def project(rel: Relation, vars: Sequence[str], name: str | None = None) -> Relation:
    """Set-semantics projection onto ``vars``, preserving the given order."""
    vars = tuple(vars)
    if len(set(vars)) != len(vars):
        raise SchemaError(f"project: duplicate variable in {vars}")
    idx = rel.positions(vars)
    rows = {tuple(t[i] for i in idx) for t in rel.tuples}
    return Relation.build(name or rel.name, vars, rows)


def select_eq(rel: Relation, binding: Mapping[str, int], name: str | None = None) -> Relation:
    """Equality selection: keep tuples agreeing with ``binding`` on its variables."""
    if not binding:
        return rel if name is None else rel.with_name(name)
    items = [(rel.column(v), val) for v, val in binding.items()]
    rows = [t for t in rel.tuples if all(t[i] == val for i, val in items)]
    return Relation(name or rel.name, rel.schema, tuple(rows))


class TrieNode:
    """One level of a sorted-vector trie: sorted child keys plus a child map."""

    __slots__ = ("keys", "children")

    def __init__(self, keys: list[int], children: dict[int, "TrieNode"] | None):
        self.keys = keys
        self.children = children

    def child(self, value: int) -> "TrieNode | None":
        if self.children is None:
            return None
        return self.children.get(value)

    def __contains__(self, value: int) -> bool:
        if self.children is not None:
            return value in self.children
        # leaf level: linear membership over the (sorted) key vector
        import bisect

        i = bisect.bisect_left(self.keys, value)
        return i < len(self.keys) and self.keys[i] == value


@dataclass(frozen=True)
class TrieIndex:
    """Nested sorted index over a relation reordered by ``order``."""

    relation: Relation
    order: tuple[str, ...]
    root: TrieNode

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        """Depth-first traversal; yields the tuple set reordered by ``order``."""
        arity = len(self.order)

        def walk(node: TrieNode, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
            if len(prefix) == arity:
                yield prefix
                return
            if node.children is None:
                for v in node.keys:
                    yield prefix + (v,)
                return
            for v in node.keys:
                yield from walk(node.children[v], prefix + (v,))

        yield from walk(self.root, ())


def build_trie(rel: Relation, order: Sequence[str]) -> TrieIndex:
    """Index ``rel`` by the variable permutation ``order``."""
    order = tuple(order)
    if sorted(order) != sorted(rel.schema):
        raise SchemaError(
            f"build_trie: order {order} is not a permutation of schema {rel.schema}"
        )
    perm = rel.positions(order)
    rows = sorted(tuple(t[i] for i in perm) for t in rel.tuples)

    def build(rows: list[tuple[int, ...]], depth: int) -> TrieNode:
        if depth == len(order) - 1:
            return TrieNode([r[depth] for r in rows], None)
        keys: list[int] = []
        children: dict[int, TrieNode] = {}
        start = 0
        for i in range(1, len(rows) + 1):
            if i == len(rows) or rows[i][depth] != rows[start][depth]:
                v = rows[start][depth]
                keys.append(v)
                children[v] = build(rows[start:i], depth + 1)
                start = i
        return TrieNode(keys, children)

    if not rows:
        root = TrieNode([], {} if len(order) > 1 else None)
    else:
        root = build(rows, 0)
    return TrieIndex(rel, order, root)


@dataclass(frozen=True)
class Atom:
    relation: str
    vars: tuple[str, ...]


@dataclass(frozen=True)
class Query:
    """A full conjunctive query: every variable of every atom appears in the head."""

    name: str
    head: tuple[str, ...]
    atoms: tuple[Atom, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        return self.head

    def atom_indices(self, relation: str) -> list[int]:
        return [i for i, a in enumerate(self.atoms) if a.relation == relation]

    def text(self) -> str:
        body = ", ".join(f"{a.relation}({','.join(a.vars)})" for a in self.atoms)
        return f"{self.name}({','.join(self.head)}) <- {body}."


_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<arrow><-)|(?P<punct>[(),.]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    # '#' starts a comment running to end of line
    stripped = []
    for line in text.splitlines():
        cut = line.find("#")
        stripped.append(line if cut < 0 else line[:cut])
    text = "\n".join(stripped)
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", column=pos + 1)
        if m.end() == m.start() and not text[pos:].strip():
            break
        kind = m.lastgroup
        if kind is None:
            break
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    return tokens


def parse_query(text: str) -> Query:
    """Parse ``Q(V1,...,Vk) <- R1(A,B), R2(B,C), ... .`` into a full CQ.

    Rejects queries whose head is not exactly the union of the atom
    variables, and atoms with a repeated variable.
    """
    tokens = _tokenize(text)
    pos = 0

    def peek() -> tuple[str, str, int] | None:
        return tokens[pos] if pos < len(tokens) else None

    def expect(kind: str, value: str | None = None) -> tuple[str, str, int]:
        nonlocal pos
        tok = peek()
        if tok is None:
            raise ParseError(f"unexpected end of query, expected {value or kind}")
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or kind}, found {tok[1]!r}", column=tok[2])
        pos += 1
        return tok

    def parse_atom() -> tuple[str, tuple[str, ...]]:
        name_tok = expect("id")
        expect("punct", "(")
        vars: list[str] = []
        while True:
            vars.append(expect("id")[1])
            tok = peek()
            if tok and tok[0] == "punct" and tok[1] == ",":
                pos_tok = expect("punct", ",")
                continue
            break
        expect("punct", ")")
        if len(set(vars)) != len(vars):
            raise ParseError(
                f"repeated variable inside one atom: {name_tok[1]}({','.join(vars)})",
                column=name_tok[2],
            )
        return name_tok[1], tuple(vars)

    qname, head = parse_atom()
    expect("arrow")
    atoms: list[Atom] = []
    while True:
        rel, vars = parse_atom()
        atoms.append(Atom(rel, vars))
        tok = peek()
        if tok and tok[0] == "punct" and tok[1] == ",":
            expect("punct", ",")
            continue
        break
    tok = peek()
    if tok is not None:
        if tok[0] == "punct" and tok[1] == ".":
            pos += 1
            tok = peek()
        if tok is not None:
            raise ParseError(f"trailing input {tok[1]!r}", column=tok[2])
    body_vars = set()
    for a in atoms:
        body_vars.update(a.vars)
    if set(head) != body_vars or len(set(head)) != len(head):
        missing = sorted(body_vars - set(head))
        extra = sorted(set(head) - body_vars)
        detail = []
        if missing:
            detail.append(f"head misses {missing}")
        if extra:
            detail.append(f"head has unused {extra}")
        raise ParseError("not a full CQ: " + "; ".join(detail or ["duplicate head variable"]))
    return Query(qname, head, tuple(atoms))


def parse_query_file(path: str) -> Query:
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh.read())


class Instance:
    """A catalog plus a binding of relation names to relations."""

    def __init__(self, catalog: Catalog | None = None,
                 relations: Mapping[str, Relation] | None = None):
        self.catalog = catalog if catalog is not None else Catalog()
        self.relations: dict[str, Relation] = dict(relations or {})

    def bind(self, rel: Relation) -> None:
        self.relations[rel.name] = rel

    def get(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise SchemaError(f"no relation named {name!r} in instance") from None

    def validate_for(self, query: Query) -> None:
        for atom in query.atoms:
            rel = self.get(atom.relation)
            if rel.arity != len(atom.vars):
                raise SchemaError(
                    f"atom {atom.relation}({','.join(atom.vars)}) has arity "
                    f"{len(atom.vars)} but relation has arity {rel.arity}"
                )

    def total_size(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def save(self, path: str) -> None:
        doc = {
            "values": self.catalog.values(),
            "relations": {
                name: {"schema": list(rel.schema), "tuples": [list(t) for t in rel.tuples]}
                for name, rel in sorted(self.relations.items())
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @staticmethod
    def load(path: str) -> "Instance":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        catalog = Catalog()
        for v in doc["values"]:
            catalog.intern(v)
        inst = Instance(catalog)
        for name, spec in doc["relations"].items():
            inst.bind(Relation.build(name, spec["schema"], [tuple(t) for t in spec["tuples"]]))
        return inst
