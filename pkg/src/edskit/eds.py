"""Pfaffian systems, exterior differential systems, derived flags, Cauchy
characteristics and semi-basic subspaces.

All ranks are generic-point ranks over the expression field; the pivot
assumptions accumulated while deciding them ride along on the results.
Reductions modulo a Pfaffian span are computed by contracting with a basis
of annihilating vector fields, which keeps the linear algebra small.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import sympy as sp

from . import linalg
from .expr import Verdict, is_zero, normalize, print_expression
from .geometry import (
    Chart,
    DifferentialForm,
    VectorField,
    evaluate,
    exterior_derivative,
    form_components,
    interior_product,
    one_form,
    print_form,
    wedge,
)
from .report import CheckError, Report, Status


class RankUnknown(CheckError):
    def __init__(self, what: str):
        super().__init__("RankUnknown", what)


class FrobeniusCheckFailed(CheckError):
    def __init__(self, what: str):
        super().__init__("FrobeniusCheckFailed", what)


def _echelon_forms(chart: Chart, forms: Sequence[DifferentialForm]):
    mat = [form_components(f) for f in forms]
    if not mat:
        return [], [], []
    try:
        ech = linalg.echelon(mat)
    except linalg.PivotUndecidable as exc:
        raise RankUnknown(str(exc))
    rows = [one_form(chart, r) for r in ech.rows]
    return rows, ech.pivots, ech.assumptions


@dataclass(frozen=True)
class Subspace:
    """A constant-rank subbundle of T*M presented by echelonized 1-forms."""

    chart: Chart
    forms: tuple[DifferentialForm, ...]
    assumptions: tuple[str, ...] = ()

    @staticmethod
    def span(chart: Chart, forms: Sequence[DifferentialForm]) -> "Subspace":
        rows, _, assume = _echelon_forms(chart, forms)
        return Subspace(chart, tuple(rows), tuple(assume))

    @property
    def rank(self) -> int:
        return len(self.forms)

    def matrix(self) -> list[list[sp.Expr]]:
        return [form_components(f) for f in self.forms]

    def contains(self, form: DifferentialForm) -> bool:
        coeffs, _ = linalg.member_of_span(form_components(form), self.matrix())
        return coeffs is not None

    def annihilator(self) -> tuple[list[VectorField], list[str]]:
        """Vector fields annihilating every form of the subspace."""
        if not self.forms:
            basis = [[sp.Integer(1 if i == j else 0) for i in range(self.chart.dimension)]
                     for j in range(self.chart.dimension)]
            return [VectorField.make(self.chart, b) for b in basis], []
        basis, assume = linalg.kernel(self.matrix())
        return [VectorField.make(self.chart, b) for b in basis], assume

    def plus(self, other: "Subspace") -> "Subspace":
        return Subspace.span(self.chart, list(self.forms) + list(other.forms))

    def intersect(self, other: "Subspace") -> "Subspace":
        rows, assume = linalg.intersect(self.matrix(), other.matrix())
        return Subspace(self.chart, tuple(one_form(self.chart, r) for r in rows),
                        tuple(assume))

    def span_equal_report(self, other: "Subspace", name: str) -> Report:
        return linalg.span_equal(self.matrix(), other.matrix(), name)


@dataclass(frozen=True)
class PfaffianSystem:
    """A constant-rank Pfaffian system presented by independent 1-forms."""

    chart: Chart
    generators: tuple[DifferentialForm, ...]
    assumptions: tuple[str, ...] = ()

    @staticmethod
    def make(chart: Chart, generators: Sequence[DifferentialForm]) -> "PfaffianSystem":
        rows, _, assume = _echelon_forms(chart, generators)
        if len(rows) != len(generators):
            raise CheckError("DependentGenerators",
                             "Pfaffian generators are linearly dependent")
        return PfaffianSystem(chart, tuple(generators), tuple(assume))

    @staticmethod
    def span(chart: Chart, forms: Sequence[DifferentialForm]) -> "PfaffianSystem":
        rows, _, assume = _echelon_forms(chart, forms)
        return PfaffianSystem(chart, tuple(rows), tuple(assume))

    @property
    def rank(self) -> int:
        return len(self.generators)

    def subspace(self) -> Subspace:
        return Subspace.span(self.chart, self.generators)

    def matrix(self) -> list[list[sp.Expr]]:
        return [form_components(f) for f in self.generators]

    def contains(self, form: DifferentialForm) -> bool:
        return self.subspace().contains(form)

    def as_eds(self) -> "ExteriorDifferentialSystem":
        two = [exterior_derivative(f) for f in self.generators]
        return ExteriorDifferentialSystem.make(
            self.chart, self.generators, [t for t in two if t.coeffs]
        )

    def __repr__(self) -> str:  # pragma: no cover
        return f"Pfaffian({self.chart.name}, rank={self.rank})"


def derived_system(I: PfaffianSystem) -> PfaffianSystem:
    """Span of the theta in I with d(theta) = 0 mod I.

    Coefficients are allowed to be arbitrary expressions: we solve for c with
    d(sum c_i theta_i) wedge theta_1 ... theta_r = 0, evaluated through the
    annihilator of I (pairs of complementary directions).
    """
    chart = I.chart
    r = I.rank
    if r == 0:
        return I
    ann, assume = I.subspace().annihilator()
    dthetas = [exterior_derivative(f) for f in I.generators]
    rows = []
    for a, b in itertools.combinations(range(len(ann)), 2):
        row = [evaluate(dt, ann[a], ann[b]) for dt in dthetas]
        if any(normalize(x) != 0 for x in row):
            rows.append(row)
    if not rows:
        return I
    try:
        basis, assume2 = linalg.kernel(rows)
    except linalg.PivotUndecidable as exc:
        raise RankUnknown(str(exc))
    forms = []
    for vec in basis:
        f = DifferentialForm.zero(chart, 1)
        for c, gen in zip(vec, I.generators):
            if c != 0:
                f = f + gen.scale(c)
        forms.append(f)
    # kernel basis vectors have unit entries in complementary positions, so
    # the combinations are independent; skip the echelon pass (it bloats the
    # coefficients that the next derived step would differentiate)
    out = PfaffianSystem(chart, tuple(forms),
                         tuple(dict.fromkeys(list(assume) + assume2)))
    return out


def derived_flag(I: PfaffianSystem) -> list[PfaffianSystem]:
    """[I, I', I'', ...] down to stabilization."""
    flag = [I]
    while True:
        nxt = derived_system(flag[-1])
        if nxt.rank == flag[-1].rank:
            break
        flag.append(nxt)
        if nxt.rank == 0:
            break
    return flag


def flag_ranks(I: PfaffianSystem) -> list[int]:
    return [s.rank for s in derived_flag(I)]


def infinite_derived(I: PfaffianSystem) -> PfaffianSystem:
    """The terminal derived system, certified completely integrable."""
    last = derived_flag(I)[-1]
    if last.rank:
        wedge_all_forms = last.generators[0]
        for f in last.generators[1:]:
            wedge_all_forms = wedge(wedge_all_forms, f)
        for tau in last.generators:
            test = wedge(exterior_derivative(tau), wedge_all_forms)
            for v in test.coeffs.values():
                if not is_zero(v).is_zero:
                    raise FrobeniusCheckFailed(
                        f"d({print_form(tau)}) fails the Frobenius condition"
                    )
    return last


@dataclass(frozen=True)
class ExteriorDifferentialSystem:
    """An EDS presented by algebraic generators in degrees 1 and 2."""

    chart: Chart
    one_forms: tuple[DifferentialForm, ...]
    two_forms: tuple[DifferentialForm, ...]
    assumptions: tuple[str, ...] = ()

    @staticmethod
    def make(chart: Chart, one_forms: Sequence[DifferentialForm],
             two_forms: Sequence[DifferentialForm] = ()) -> "ExteriorDifferentialSystem":
        for f in one_forms:
            if f.degree != 1:
                raise CheckError("BadEDS", "a 1-form generator has wrong degree")
        for f in two_forms:
            if f.degree != 2:
                raise CheckError("BadEDS", "a 2-form generator has wrong degree")
        return ExteriorDifferentialSystem(chart, tuple(one_forms), tuple(two_forms))

    @property
    def pfaffian(self) -> PfaffianSystem:
        return PfaffianSystem.span(self.chart, self.one_forms)

    def all_two_forms(self) -> list[DifferentialForm]:
        """2-form generators plus d of the 1-form generators."""
        out = list(self.two_forms)
        for f in self.one_forms:
            df = exterior_derivative(f)
            if df.coeffs:
                out.append(df)
        return out

    def is_differentially_closed(self) -> Report:
        rep = Report("differentially-closed")
        for i, f in enumerate(self.two_forms):
            df = exterior_derivative(f)
            rep.add(membership(df, self, name=f"d(two-form[{i}]) in ideal"))
        for i, f in enumerate(self.one_forms):
            df = exterior_derivative(f)
            rep.add(membership(df, self, name=f"d(one-form[{i}]) in ideal"))
        return rep

    def __repr__(self) -> str:  # pragma: no cover
        return (f"EDS({self.chart.name}, {len(self.one_forms)} one-forms, "
                f"{len(self.two_forms)} two-forms)")


def membership(alpha: DifferentialForm, S: ExteriorDifferentialSystem,
               name: str = "membership") -> Report:
    """Decide alpha in the algebraic ideal of S by linear solves.

    Degrees 1..3 are supported (all the paper's checks live there).
    """
    rep = Report(name)
    if alpha.chart is not S.chart:
        rep.add(Report.failed("chart", "form lives on a different chart"))
        return rep
    if not alpha.coeffs:
        rep.add(Report.passed("zero form"))
        return rep
    try:
        theta = Subspace.span(S.chart, S.one_forms)
        ann, assume = theta.annihilator()
    except linalg.PivotUndecidable as exc:
        rep.add(Report.unknown("annihilator", str(exc)))
        return rep
    rep.assume(assume)
    rep.assume(theta.assumptions)
    if alpha.degree == 0:
        v = is_zero(alpha.coeffs.get((), sp.Integer(0)))
        if v.is_zero:
            rep.add(Report.passed("degree-0"))
        elif v.is_nonzero:
            rep.add(Report.failed("degree-0", "nonzero function not in ideal"))
        else:
            rep.add(Report.unknown("degree-0"))
        return rep
    if alpha.degree == 1:
        coeffs, assume2 = linalg.member_of_span(
            form_components(alpha), theta.matrix()
        )
        if coeffs is None:
            rep.add(Report.failed("degree-1", "1-form outside Pfaffian span",
                                  witness=print_form(alpha)))
        else:
            ch = Report.passed("degree-1")
            ch.assume(assume2)
            rep.add(ch)
        return rep
    two = S.all_two_forms()
    if alpha.degree == 2:
        pairs = list(itertools.combinations(range(len(ann)), 2))
        mat = [[evaluate(om, ann[a], ann[b]) for om in two] for a, b in pairs]
        rhs = [evaluate(alpha, ann[a], ann[b]) for a, b in pairs]
        sol = linalg.solve_linear(mat, rhs) if two else (
            None if any(normalize(x) != 0 for x in rhs) else ([], [])
        )
        if sol is None:
            rep.add(Report.failed("degree-2", "2-form outside algebraic ideal",
                                  witness=print_form(alpha)))
        else:
            ch = Report.passed("degree-2")
            ch.assume(sol[1])
            rep.add(ch)
        return rep
    if alpha.degree == 3:
        triples = list(itertools.combinations(range(len(ann)), 3))
        if not triples:
            rep.add(Report.passed("degree-3", "no transverse directions"))
            return rep
        # unknowns: for each 2-form generator k a 1-form residue g_k on the
        # quotient, represented by its values g_{k,a} on the annihilator basis
        nun = len(two) * len(ann)
        mat = []
        rhs = []
        for (a, b, c) in triples:
            row = [sp.Integer(0)] * nun
            for k, om in enumerate(two):
                row[k * len(ann) + a] = evaluate(om, ann[b], ann[c])
                row[k * len(ann) + b] = normalize(-evaluate(om, ann[a], ann[c]))
                row[k * len(ann) + c] = evaluate(om, ann[a], ann[b])
            mat.append(row)
            rhs.append(evaluate(alpha, ann[a], ann[b], ann[c]))
        sol = linalg.solve_linear(mat, rhs) if nun else (
            None if any(normalize(x) != 0 for x in rhs) else ([], [])
        )
        if sol is None:
            rep.add(Report.failed("degree-3", "3-form outside algebraic ideal",
                                  witness=print_form(alpha)))
        else:
            ch = Report.passed("degree-3")
            ch.assume(sol[1])
            rep.add(ch)
        return rep
    rep.add(Report.failed("degree", f"membership in degree {alpha.degree} unsupported"))
    return rep


def cauchy_characteristics(S: ExteriorDifferentialSystem) -> tuple[list[VectorField], list[str]]:
    """All X with X .| S inside S, computed degreewise by linear solve.

    In degree 1 the condition is theta(X) = 0; in degree 2 it is
    (X .| omega)(Z) = 0 for every direction Z transverse to the 1-form span
    (the theta-components of X .| omega are unconstrained).
    """
    chart = S.chart
    n = chart.dimension
    theta = Subspace.span(chart, S.one_forms)
    ann, assume = theta.annihilator()
    two = S.all_two_forms()
    rows = [form_components(f) for f in theta.forms]
    basis_fields = [
        VectorField.make(chart, [sp.Integer(1 if i == j else 0) for i in range(n)])
        for j in range(n)
    ]
    for om in two:
        contractions = [interior_product(e, om) for e in basis_fields]
        for Z in ann:
            rows.append([evaluate(contractions[j], Z) for j in range(n)])
    if not rows:
        return basis_fields, list(assume)
    try:
        basis, assume2 = linalg.kernel(rows)
    except linalg.PivotUndecidable as exc:
        raise RankUnknown(str(exc))
    fields = [VectorField.make(chart, vec) for vec in basis]
    return fields, list(dict.fromkeys(list(assume) + list(theta.assumptions) + assume2))


def semibasic_subspace(A: Subspace, D: Sequence[VectorField]) -> Subspace:
    """{alpha in A : X .| alpha = 0 for all X in D}."""
    if not A.forms:
        return A
    rows = []
    for X in D:
        rows.append([evaluate(f, X) for f in A.forms])
    if not rows or all(all(normalize(x) == 0 for x in r) for r in rows):
        return A
    try:
        basis, assume = linalg.kernel(rows)
    except linalg.PivotUndecidable as exc:
        raise RankUnknown(str(exc))
    forms = []
    for vec in basis:
        f = DifferentialForm.zero(A.chart, 1)
        for c, gen in zip(vec, A.forms):
            if c != 0:
                f = f + gen.scale(c)
        forms.append(f)
    out = Subspace.span(A.chart, forms)
    return Subspace(out.chart, out.forms,
                    tuple(dict.fromkeys(list(A.assumptions) + assume + list(out.assumptions))))
