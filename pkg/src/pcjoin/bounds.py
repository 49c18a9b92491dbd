"""Cardinality bounds behind a pluggable estimator interface, plus the
partition-constraint extension that sums a base bound over all family choices."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .exactnum import BoundValue, PowerProduct
from .relations import (
    CoverageError,
    PcjoinError,
    Query,
    ScaleExceededError,
    SchemaError,
)
from .stats import ConstraintSet, DegreeConstraint

MAX_LP_ATOMS = 16
MAX_CHAIN_VARS = 12


@dataclass(frozen=True)
class CoverCertificate:
    """Optimal fractional edge cover: per-atom weights over the sized atoms."""

    atom_sizes: tuple[int | None, ...]
    weights: tuple[Fraction, ...]

    def reevaluate(self) -> BoundValue:
        term = PowerProduct.make(1)
        for n, u in zip(self.atom_sizes, self.weights):
            if u:
                assert n is not None
                term = term * (PowerProduct.from_int(n) ** u)
        return BoundValue.make([term])


@dataclass(frozen=True)
class ChainStep:
    constraint: DegreeConstraint
    new_vars: tuple[str, ...]


@dataclass(frozen=True)
class ChainCertificate:
    """The minimizing sequence of constraint applications."""

    steps: tuple[ChainStep, ...]

    def reevaluate(self) -> BoundValue:
        value = 1
        for step in self.steps:
            value *= step.constraint.degree
        return BoundValue.from_int(value)

    @property
    def order(self) -> tuple[str, ...]:
        out: list[str] = []
        for step in self.steps:
            out.extend(step.new_vars)
        return tuple(out)


@dataclass(frozen=True)
class ExtensionCertificate:
    """One base result per choice of family across all partition constraints."""

    choices: tuple[tuple[int, ...], ...]
    results: tuple["BoundResult", ...]

    def reevaluate(self) -> BoundValue:
        total = BoundValue.zero()
        for res in self.results:
            total = total + res.value
        return total


@dataclass(frozen=True)
class BoundResult:
    value: BoundValue
    certificate: CoverCertificate | ChainCertificate | ExtensionCertificate

    def as_json(self) -> dict:
        doc = {"value": self.value.as_json()}
        cert = self.certificate
        if isinstance(cert, CoverCertificate):
            doc["certificate"] = {
                "kind": "cover",
                "weights": [[u.numerator, u.denominator] for u in cert.weights],
                "sizes": list(cert.atom_sizes),
            }
        elif isinstance(cert, ChainCertificate):
            doc["certificate"] = {
                "kind": "chain",
                "steps": [
                    {
                        "relation": s.constraint.relation,
                        "x": sorted(s.constraint.x_vars),
                        "y": sorted(s.constraint.y_vars),
                        "d": s.constraint.degree,
                        "binds": list(s.new_vars),
                    }
                    for s in cert.steps
                ],
            }
        else:
            doc["certificate"] = {
                "kind": "extension",
                "combinations": [
                    {"choice": list(choice), "value": res.value.as_json()}
                    for choice, res in zip(cert.choices, cert.results)
                ],
            }
        return doc


@dataclass(frozen=True)
class CoverLP:
    """Fractional edge cover polytope: one weight per sized atom, one >=1 row
    per variable, nonnegativity rows per atom."""

    atom_vars: tuple[tuple[str, ...], ...]
    atom_sizes: tuple[int, ...]

    def cover_rows(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        variables = sorted({v for vars in self.atom_vars for v in vars})
        rows = []
        seen = set()
        for v in variables:
            coeffs = tuple(
                Fraction(1 if v in vars else 0) for vars in self.atom_vars
            )
            if coeffs not in seen:  # identical incidence: identical constraint
                seen.add(coeffs)
                rows.append((coeffs, Fraction(1)))
        return rows


def _solve_square(
    rows: list[tuple[Fraction, ...]], rhs: list[Fraction]
) -> list[Fraction] | None:
    """Gaussian elimination over Fractions; None if singular."""
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        pv = a[col][col]
        a[col] = [x / pv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def solve_cover_lp(lp: CoverLP) -> tuple[Fraction, ...]:
    """Exact optimum of the cover LP by basic-feasible-solution enumeration.

    Chooses dim-many tight constraints among cover and nonnegativity rows,
    solves the rational system, keeps feasible points, and minimizes the
    objective prod(N_i ** u_i) exactly; ties break to the lexicographically
    smallest vertex.
    """
    dim = len(lp.atom_sizes)
    if dim > MAX_LP_ATOMS:
        raise ScaleExceededError(f"LP scale exceeded: {dim} atoms > {MAX_LP_ATOMS}")
    cover = lp.cover_rows()
    rows: list[tuple[tuple[Fraction, ...], Fraction]] = list(cover)
    for i in range(dim):
        coeffs = tuple(Fraction(1 if j == i else 0) for j in range(dim))
        rows.append((coeffs, Fraction(0)))

    best_u: tuple[Fraction, ...] | None = None
    best_obj: PowerProduct | None = None
    for chosen in itertools.combinations(range(len(rows)), dim):
        sol = _solve_square([rows[i][0] for i in chosen], [rows[i][1] for i in chosen])
        if sol is None:
            continue
        if any(u < 0 for u in sol):
            continue
        feasible = all(
            sum(c * u for c, u in zip(coeffs, sol)) >= rhs for coeffs, rhs in cover
        )
        if not feasible:
            continue
        u = tuple(sol)
        obj = PowerProduct.make(1)
        for n, w in zip(lp.atom_sizes, u):
            if w:
                obj = obj * (PowerProduct.from_int(n) ** w)
        if best_obj is None or obj < best_obj or (not (best_obj < obj) and u < best_u):
            best_obj, best_u = obj, u
    if best_u is None:
        raise PcjoinError("cover LP infeasible; cannot happen for a full CQ")
    return best_u


def agm_bound(query: Query, atom_sizes: Sequence[int | None]) -> BoundResult:
    """Fractional-edge-cover bound: prod over atoms of N_i ** u_i for an optimal
    rational cover. Atoms without a cardinality (None) take no weight."""
    if len(atom_sizes) != len(query.atoms):
        raise SchemaError("one size entry per atom required")
    sized = [i for i, n in enumerate(atom_sizes) if n is not None]
    covered = {v for i in sized for v in query.atoms[i].vars}
    missing = set(query.head) - covered
    if missing:
        raise CoverageError(
            f"variables {sorted(missing)} appear only in atoms without a "
            "cardinality constraint"
        )
    lp = CoverLP(
        tuple(query.atoms[i].vars for i in sized),
        tuple(atom_sizes[i] for i in sized),
    )
    weights = solve_cover_lp(lp)
    full = [Fraction(0)] * len(query.atoms)
    for i, w in zip(sized, weights):
        full[i] = w
    cert = CoverCertificate(tuple(atom_sizes), tuple(full))
    return BoundResult(cert.reevaluate(), cert)


def chain_dc_bound(query: Query, dcs: Iterable[DegreeConstraint]) -> BoundResult:
    """Min over variable orders of the product of per-step degrees.

    A constraint applies once its X block is bound and binds the rest of its Y
    block. Equivalent to the exhaustive order search, computed as a shortest
    path over bound-variable subsets.
    """
    variables = tuple(query.head)
    nv = len(variables)
    if nv > MAX_CHAIN_VARS:
        raise ScaleExceededError(f"chain bound supports at most {MAX_CHAIN_VARS} variables")
    vidx = {v: i for i, v in enumerate(variables)}
    atom_vars = {a.relation: frozenset(a.vars) for a in query.atoms}

    usable: list[tuple[int, int, int, DegreeConstraint]] = []
    for c in dcs:
        if c.relation not in atom_vars or not c.y_vars <= atom_vars[c.relation]:
            raise SchemaError(
                f"constraint on {c.relation!r} does not match any query atom"
            )
        xmask = sum(1 << vidx[v] for v in c.x_vars)
        ymask = sum(1 << vidx[v] for v in c.y_vars)
        usable.append((xmask, ymask, c.degree, c))

    full = (1 << nv) - 1
    INF = None
    best: list[tuple[int, tuple[int, DegreeConstraint] | None] | None] = [
        INF
    ] * (full + 1)
    best[0] = (1, None)
    for mask in range(full + 1):
        cur = best[mask]
        if cur is None:
            continue
        value = cur[0]
        for xmask, ymask, degree, c in usable:
            if xmask & ~mask or not (ymask & ~mask):
                continue
            nxt = mask | ymask
            cand = value * degree
            if best[nxt] is None or cand < best[nxt][0]:
                best[nxt] = (cand, (mask, c))
    if best[full] is None:
        raise CoverageError("no constraint order covers all query variables")
    steps: list[ChainStep] = []
    mask = full
    while mask:
        _, parent = best[mask]
        assert parent is not None
        prev, c = parent
        new_vars = tuple(v for v in variables if (1 << vidx[v]) & (mask & ~prev))
        steps.append(ChainStep(c, new_vars))
        mask = prev
    cert = ChainCertificate(tuple(reversed(steps)))
    return BoundResult(BoundValue.from_int(best[full][0]), cert)


class AgmEstimator:
    """AGM base: consumes only cardinality constraints (X empty over the full
    atom schema); other degree constraints are ignored, which stays sound."""

    name = "agm"

    def bound(self, query: Query, dcs: Iterable[DegreeConstraint]) -> BoundResult:
        atom_sizes: list[int | None] = [None] * len(query.atoms)
        for c in dcs:
            if not c.is_cardinality:
                continue
            for i, atom in enumerate(query.atoms):
                if atom.relation == c.relation and c.y_vars == frozenset(atom.vars):
                    if atom_sizes[i] is None or c.degree < atom_sizes[i]:
                        atom_sizes[i] = c.degree
        return agm_bound(query, atom_sizes)


class ChainEstimator:
    name = "chain"

    def bound(self, query: Query, dcs: Iterable[DegreeConstraint]) -> BoundResult:
        return chain_dc_bound(query, dcs)


ESTIMATORS = {"agm": AgmEstimator(), "chain": ChainEstimator()}


def extended_bound(
    query: Query,
    constraints: ConstraintSet,
    base: AgmEstimator | ChainEstimator | str,
) -> BoundResult:
    """Sum the base bound over every choice of one family per partition
    constraint; with all-singleton families this is exactly the base bound."""
    if isinstance(base, str):
        base = ESTIMATORS[base]
    constraints.validate_for(query)
    pcs = list(constraints)
    choices_iter = itertools.product(*(range(len(c.families)) for c in pcs))
    choices: list[tuple[int, ...]] = []
    results: list[BoundResult] = []
    total = BoundValue.zero()
    for choice in choices_iter:
        dcs = [c.as_dc(j) for c, j in zip(pcs, choice)]
        res = base.bound(query, dcs)
        choices.append(choice)
        results.append(res)
        total = total + res.value
    cert = ExtensionCertificate(tuple(choices), tuple(results))
    return BoundResult(total, cert)
