"""Exact linear algebra over the expression field.

Everything here is generic-point linear algebra: a pivot is usable once the
three-valued zero test certifies it nonzero, and every pivot that is not a
rational constant is recorded as a nonvanishing assumption.  A candidate
pivot whose test returns Unknown is skipped; if a column offers no decidable
pivot at all the elimination aborts with :class:`PivotUndecidable`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import sympy as sp

from .expr import Verdict, is_zero, normalize, print_expression
from .report import Report


class PivotUndecidable(Exception):
    def __init__(self, entry):
        super().__init__(
            f"cannot decide whether candidate pivot {entry} vanishes"
        )
        self.entry = entry


def _pivot_cost(e: sp.Expr) -> tuple:
    """Pivot policy: rational constants, then monomials, then fewest atoms."""
    if e.is_Rational:
        return (0, 0, 0)
    n_atoms = sum(1 for _ in e.atoms(sp.Function)) + sum(
        1 for p in e.atoms(sp.Pow) if not p.exp.is_Integer
    )
    num, den = e.as_numer_denom()
    is_monomial = num.is_Mul or num.is_Symbol or num.is_Pow or num.is_Rational
    return (1, n_atoms, 0 if (is_monomial and den.is_Rational) else sp.count_ops(e))


@dataclass
class Echelon:
    """Row echelon form together with its bookkeeping.

    ``rows`` are the nonzero echelon rows (normalized, leading entry 1),
    ``pivots`` the pivot column indices, and ``assumptions`` the pivot
    nonvanishing facts this shape relies on.
    """

    rows: list[list[sp.Expr]]
    pivots: list[int]
    assumptions: list[str]

    @property
    def rank(self) -> int:
        return len(self.rows)


def echelon(matrix: Sequence[Sequence[sp.Expr]]) -> Echelon:
    """Reduced row echelon form over the expression field."""
    rows = [[normalize(e) for e in row] for row in matrix]
    ncols = len(rows[0]) if rows else 0
    out: list[list[sp.Expr]] = []
    pivots: list[int] = []
    assumptions: list[str] = []
    work = [r for r in rows if any(x != 0 for x in r)]
    col = 0
    while work and col < ncols:
        candidates = []
        for i, r in enumerate(work):
            if r[col] == 0:
                continue
            v = is_zero(r[col])
            if v.verdict is Verdict.PROVEN_NONZERO:
                candidates.append((_pivot_cost(r[col]), i))
            elif v.verdict is Verdict.UNKNOWN:
                candidates.append(((9, 0, 0), -i - 1))
        live = [c for c in candidates if c[1] >= 0]
        if not live:
            if candidates:
                bad = work[-candidates[0][1] - 1][col]
                raise PivotUndecidable(print_expression(bad))
            col += 1
            continue
        live.sort()
        i = live[0][1]
        row = work.pop(i)
        piv = row[col]
        if not piv.is_Rational:
            assumptions.append(f"{print_expression(piv)} != 0")
        row = [normalize(x / piv) for x in row]
        for r in work:
            if r[col] != 0:
                f = r[col]
                for c in range(ncols):
                    r[c] = normalize(r[c] - f * row[c])
        for r in out:
            if r[col] != 0:
                f = r[col]
                for c in range(ncols):
                    r[c] = normalize(r[c] - f * row[c])
        out.append(row)
        pivots.append(col)
        work = [r for r in work if any(x != 0 for x in r)]
        col += 1
    return Echelon(out, pivots, assumptions)


def rank(matrix: Sequence[Sequence[sp.Expr]]) -> tuple[int, list[str]]:
    e = echelon(matrix)
    return e.rank, e.assumptions


def kernel(matrix: Sequence[Sequence[sp.Expr]]) -> tuple[list[list[sp.Expr]], list[str]]:
    """Basis of the right null space (vectors v with M v = 0)."""
    if not matrix:
        return [], []
    ech = echelon(matrix)
    ncols = len(matrix[0])
    free_cols = [c for c in range(ncols) if c not in ech.pivots]
    basis = []
    for fc in free_cols:
        v = [sp.Integer(0)] * ncols
        v[fc] = sp.Integer(1)
        for row, pc in zip(ech.rows, ech.pivots):
            v[pc] = normalize(-row[fc])
        basis.append(v)
    return basis, ech.assumptions


def solve_linear(
    matrix: Sequence[Sequence[sp.Expr]], rhs: Sequence[sp.Expr]
) -> Optional[tuple[list[sp.Expr], list[str]]]:
    """One solution of M x = b over the field, or None if inconsistent."""
    if not matrix:
        return ([], []) if all(normalize(b) == 0 for b in rhs) else None
    ncols = len(matrix[0])
    aug = [list(row) + [b] for row, b in zip(matrix, rhs)]
    ech = echelon(aug)
    if ncols in ech.pivots:
        return None
    x = [sp.Integer(0)] * ncols
    for row, pc in zip(ech.rows, ech.pivots):
        x[pc] = normalize(row[ncols])
    return x, ech.assumptions


def member_of_span(
    vector: Sequence[sp.Expr], span_rows: Sequence[Sequence[sp.Expr]]
) -> tuple[Optional[list[sp.Expr]], list[str]]:
    """Coefficients expressing ``vector`` in the row span, or None."""
    if not span_rows:
        ok = all(normalize(v) == 0 for v in vector)
        return ([] if ok else None), []
    cols = list(zip(*span_rows))
    sol = solve_linear([list(c) for c in cols], list(vector))
    if sol is None:
        return None, []
    return sol[0], sol[1]


def span_equal(
    a_rows: Sequence[Sequence[sp.Expr]],
    b_rows: Sequence[Sequence[sp.Expr]],
    name: str = "span-equality",
) -> Report:
    """Two-sided membership check that two row families span the same space."""
    rep = Report(name)
    for label, rows, other in (("A in B", a_rows, b_rows), ("B in A", b_rows, a_rows)):
        for i, v in enumerate(rows):
            try:
                coeffs, assume = member_of_span(v, other)
            except PivotUndecidable as exc:
                rep.add(Report.unknown(f"{label}[{i}]", str(exc)))
                continue
            if coeffs is None:
                rep.add(
                    Report.failed(
                        f"{label}[{i}]",
                        "vector outside span",
                        witness="(" + ", ".join(print_expression(x) for x in v) + ")",
                    )
                )
            else:
                child = Report.passed(f"{label}[{i}]")
                child.assume(assume)
                rep.add(child)
    return rep


def intersect(
    a_rows: Sequence[Sequence[sp.Expr]], b_rows: Sequence[Sequence[sp.Expr]]
) -> tuple[list[list[sp.Expr]], list[str]]:
    """Basis of (row span of A) ∩ (row span of B)."""
    if not a_rows or not b_rows:
        return [], []
    ncols = len(a_rows[0])
    # Solve sum c_i a_i - sum d_j b_j = 0: kernel of the stacked transpose.
    cols = []
    for c in range(ncols):
        cols.append([row[c] for row in a_rows] + [-row[c] for row in b_rows])
    basis, assume = kernel(cols)
    vectors = []
    for v in basis:
        vec = [
            normalize(sum(v[i] * a_rows[i][c] for i in range(len(a_rows))))
            for c in range(ncols)
        ]
        if any(x != 0 for x in vec):
            vectors.append(vec)
    ech = echelon(vectors) if vectors else Echelon([], [], [])
    return ech.rows, assume + ech.assumptions
