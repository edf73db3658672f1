"""Symmetry verification, transversality, and reduction of an EDS by an
explicitly given quotient map.

Quotient maps are inputs, never discovered: the code verifies invariance and
submersivity, computes the semi-basic invariant generators upstairs, and
expresses them downstairs through a local section of the quotient map (the
result is re-verified by pulling back, so the section is a mere device).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import sympy as sp

from . import linalg
from .eds import (
    ExteriorDifferentialSystem,
    PfaffianSystem,
    RankUnknown,
    Subspace,
    infinite_derived,
    membership,
    semibasic_subspace,
)
from .expr import Verdict, is_zero, normalize, print_expression
from .geometry import (
    Chart,
    Coframe,
    DifferentialForm,
    SmoothMap,
    VectorField,
    build_section,
    evaluate,
    exterior_derivative,
    form_components,
    interior_product,
    lie_derivative,
    one_form,
    print_form,
    pullback,
    wedge,
)
from .report import CheckError, Report, Status


class NotExpressible(CheckError):
    def __init__(self, what: str):
        super().__init__("NotExpressible", what)


@dataclass(frozen=True)
class GroupAction:
    """An infinitesimal group action: generators, structure constants and an
    optional explicit quotient map.

    ``constants[(i, j)]`` holds the coefficient list (C^1_ij, ..., C^r_ij)
    of [X_i, X_j]; omitted pairs mean zero bracket.  Construction verifies
    the bracket relations and, when a quotient is present, the invariance of
    each quotient formula.
    """

    chart: Chart
    generators: tuple[VectorField, ...]
    constants: dict
    quotient: Optional[SmoothMap] = None
    section_freeze: Optional[tuple[str, ...]] = None

    @staticmethod
    def make(chart: Chart, generators: Sequence[VectorField],
             constants: Optional[dict] = None,
             quotient: Optional[SmoothMap] = None,
             section_freeze: Optional[Sequence[str]] = None) -> "GroupAction":
        constants = dict(constants or {})
        r = len(generators)
        for i, j in itertools.combinations(range(r), 2):
            want = constants.get((i, j), [0] * r)
            br = generators[i].bracket(generators[j])
            resid = list(br.components)
            for k in range(r):
                for c_i, comp in enumerate(generators[k].components):
                    resid[c_i] = resid[c_i] - sp.sympify(want[k]) * comp
            for c_i, val in enumerate(resid):
                if not is_zero(val).is_zero:
                    raise CheckError(
                        "BadStructureConstants",
                        f"[X_{i+1}, X_{j+1}] != C^k_({i+1}{j+1}) X_k "
                        f"(component {chart.coordinates[c_i].name})",
                    )
        if quotient is not None:
            if quotient.source is not chart:
                raise CheckError("BadAction", "quotient source chart mismatch")
            for X in generators:
                for f, z in zip(quotient.formulas, quotient.target.coordinates):
                    if not is_zero(X.apply(f)).is_zero:
                        raise CheckError(
                            "NotInvariant",
                            f"quotient formula for {z.name} is not invariant",
                        )
        return GroupAction(chart, tuple(generators), constants, quotient,
                           tuple(section_freeze) if section_freeze else None)

    @property
    def dimension(self) -> int:
        return len(self.generators)

    def span_matrix(self) -> list[list[sp.Expr]]:
        return [list(X.components) for X in self.generators]

    def is_free(self) -> tuple[bool, list[str]]:
        r, assume = linalg.rank(self.span_matrix())
        return r == self.dimension, assume


@dataclass
class ReductionResult:
    reduced: ExteriorDifferentialSystem
    action: GroupAction
    section: SmoothMap
    rank_report: Report
    assumptions: list[str]


def check_symmetry(S: ExteriorDifferentialSystem, A: GroupAction) -> Report:
    """L_X(generator) must lie in the algebraic ideal, for every generator."""
    rep = Report("symmetry")
    if S.chart is not A.chart:
        rep.add(Report.failed("chart", "action lives on a different chart"))
        return rep
    gens = list(S.one_forms) + list(S.two_forms)
    for gi, X in enumerate(A.generators):
        for fi, f in enumerate(gens):
            lf = lie_derivative(X, f)
            sub = membership(lf, S, name=f"L_X{gi+1}(gen{fi+1}) in ideal")
            if sub.status is Status.FAIL:
                sub.witness = print_form(lf)
            rep.add(sub)
    return rep


def check_transversality(S: ExteriorDifferentialSystem, A: GroupAction) -> Report:
    """ann(I^1) meets the generator distribution only in zero."""
    rep = Report("transversality")
    theta = Subspace.span(S.chart, S.one_forms)
    if not theta.forms:
        rep.add(Report.failed("setup", "Pfaffian part is empty"))
        return rep
    # a vector sum a_i X_i annihilates I^1 iff theta(sum a_i X_i) = 0
    rows = [[evaluate(f, X) for X in A.generators] for f in theta.forms]
    try:
        basis, assume = linalg.kernel(rows)
    except linalg.PivotUndecidable as exc:
        rep.add(Report.unknown("rank", str(exc)))
        return rep
    rep.assume(assume)
    # kernel vectors must correspond to the zero field (free actions: none)
    for vec in basis:
        comps = [sp.Integer(0)] * S.chart.dimension
        for a, X in zip(vec, A.generators):
            for i, c in enumerate(X.components):
                comps[i] = normalize(comps[i] + a * c)
        if any(normalize(c) != 0 for c in comps):
            rep.add(Report.failed(
                "intersection",
                "a generator combination annihilates the Pfaffian span",
                witness=str(VectorField.make(S.chart, comps)),
            ))
            return rep
    rep.add(Report.passed("intersection", "ann(I^1) ∩ Γ = 0"))
    return rep


def _invariant_semibasic_oneforms(
    S: ExteriorDifferentialSystem, A: GroupAction
) -> tuple[list[DifferentialForm], list[str]]:
    """Basis over the expression field of the semi-basic part of span(I^1)."""
    theta = Subspace.span(S.chart, S.one_forms)
    sb = semibasic_subspace(theta, list(A.generators))
    return list(sb.forms), list(sb.assumptions)


def _semibasic_two_forms(
    S: ExteriorDifferentialSystem, A: GroupAction
) -> tuple[list[DifferentialForm], list[str]]:
    """Semi-basic elements of the degree-2 part of the algebraic ideal.

    Candidates are spanned by {theta_i ^ dx_j} and the stored/derived
    2-forms; semi-basic means contraction with every generator vanishes.
    """
    chart = S.chart
    cands: list[DifferentialForm] = []
    for th in S.one_forms:
        for j in range(chart.dimension):
            w = wedge(th, one_form(chart, [sp.Integer(1 if i == j else 0)
                                           for i in range(chart.dimension)]))
            if w.coeffs:
                cands.append(w)
    cands.extend(S.all_two_forms())
    # linear solve: combinations with all generator contractions zero
    keys = sorted({k for c in cands for k in c.coeffs})
    rows = []
    for X in A.generators:
        contr = [interior_product(X, c) for c in cands]
        ckeys = sorted({k for f in contr for k in f.coeffs})
        for key in ckeys:
            rows.append([f.coeffs.get(key, sp.Integer(0)) for f in contr])
    if not rows:
        sel = cands
        assume: list[str] = []
    else:
        basis, assume = linalg.kernel(rows)
        sel = []
        for vec in basis:
            f = DifferentialForm.zero(chart, 2)
            for c, cand in zip(vec, cands):
                if c != 0:
                    f = f + cand.scale(c)
            if f.coeffs:
                sel.append(f)
    return sel, assume


def reduce_system(
    S: ExteriorDifferentialSystem,
    A: GroupAction,
    presupplied: Optional[Report] = None,
) -> ReductionResult:
    """Reduce S by the action's explicit quotient map.

    Preconditions (symmetry, transversality, invariance, submersion) are
    verified; the reduced generators are produced degree by degree and the
    result is re-verified by pullback membership plus the rank law
    rank(I^1/G) = rank(I^1) - rank(Gamma).
    """
    if A.quotient is None:
        raise CheckError("NoQuotient", "reduce requires an explicit quotient map")
    rep = presupplied if presupplied is not None else Report("reduce")
    sym = check_symmetry(S, A)
    rep.add(sym)
    tr = check_transversality(S, A)
    rep.add(tr)
    q = A.quotient
    ok, assume = q.is_submersion()
    if not ok:
        raise CheckError("NotSubmersion", "quotient map is not a submersion")
    rep.assume(assume)
    if sym.status is Status.FAIL or tr.status is Status.FAIL:
        raise CheckError("PreconditionFailed", "symmetry or transversality failed")

    section = build_section(q, freeze=A.section_freeze)

    # degree 1
    sb1, assume1 = _invariant_semibasic_oneforms(S, A)
    rep.assume(assume1)
    reduced_one: list[DifferentialForm] = []
    for f in sb1:
        cand = pullback(section, f)
        if cand.coeffs:
            reduced_one.append(cand)
    one_span = Subspace.span(q.target, reduced_one)
    reduced_one = list(one_span.forms)

    # degree 2, modulo what the 1-forms already generate
    sb2, assume2 = _semibasic_two_forms(S, A)
    rep.assume(assume2)
    reduced_two: list[DifferentialForm] = []
    for f in sb2:
        cand = pullback(section, f)
        if cand.coeffs:
            reduced_two.append(cand)

    partial = ExteriorDifferentialSystem.make(q.target, reduced_one, [])
    extra_two = []
    for f in reduced_two:
        m = membership(f, partial, name="redundant-two-form")
        if m.status is not Status.PASS:
            extra_two.append(f)
            partial = ExteriorDifferentialSystem.make(
                q.target, reduced_one, extra_two
            )
    reduced = ExteriorDifferentialSystem.make(q.target, reduced_one, extra_two)

    # verification: pullbacks land in S
    verify = Report("pullback-membership")
    for i, f in enumerate(reduced_one):
        verify.add(membership(pullback(q, f), S, name=f"q*(one-form[{i}])"))
    for i, f in enumerate(extra_two):
        verify.add(membership(pullback(q, f), S, name=f"q*(two-form[{i}])"))
    rep.add(verify)
    if verify.status is Status.FAIL:
        raise NotExpressible(
            "a reduced generator fails to pull back into the system; the "
            "supplied map is not the quotient of the declared action"
        )

    # rank law: rank(I^1/G) = rank(I^1) - rank(Gamma_G)
    rank_rep = Report("rank-law")
    theta = Subspace.span(S.chart, S.one_forms)
    gr, gassume = linalg.rank(A.span_matrix())
    rank_rep.assume(gassume)
    want = theta.rank - gr
    got = len(reduced_one)
    if got == want:
        rank_rep.add(Report.passed(
            "rank", f"rank(I1/G) = {got} = {theta.rank} - {gr}"))
    else:
        rank_rep.add(Report.failed(
            "rank", f"rank(I1/G) = {got}, expected {theta.rank} - {gr} = {want}"))
    rep.add(rank_rep)
    if rank_rep.status is Status.FAIL:
        raise NotExpressible("reduced rank violates the rank law")

    return ReductionResult(reduced, A, section, rep, rep.all_assumptions())


def check_reduced_infinite_derived(
    S: ExteriorDifferentialSystem, A: GroupAction,
    candidate: Optional[PfaffianSystem] = None,
) -> Report:
    """(I/G)^infinity must equal (I^infinity)/G as spans downstairs."""
    rep = Report("reduced-infinite-derived")
    res = reduce_system(S, A, presupplied=Report("reduce"))
    down = infinite_derived(res.reduced.pfaffian)
    up = infinite_derived(PfaffianSystem.span(S.chart, S.one_forms))
    up_eds = ExteriorDifferentialSystem.make(S.chart, up.generators, [])
    sb = semibasic_subspace(up.subspace(), list(A.generators))
    reduced_up = []
    for f in sb.forms:
        cand = pullback(res.section, f)
        if cand.coeffs:
            reduced_up.append(cand)
    lhs = Subspace.span(A.quotient.target, list(down.generators))
    rhs = Subspace.span(A.quotient.target, reduced_up)
    rep.add(lhs.span_equal_report(rhs, "(I/G)^inf = I^inf/G"))
    if candidate is not None:
        rep.add(lhs.span_equal_report(
            Subspace.span(A.quotient.target, list(candidate.generators)),
            "matches supplied candidate"))
    return rep


def check_adapted_coframe(
    S: ExteriorDifferentialSystem, A: GroupAction, cf: Coframe
) -> Report:
    """Verify the free-reduction adapted-coframe conditions.

    Roles must label each coframe member theta / eta / sigma.  Checked:
    [i] span{theta, eta} = span(I^1); [ii] eta and sigma are invariant and
    semi-basic; [iii] theta^i(X_j) = delta^i_j; [v] d(sigma) = 0,
    d(eta) = 0 mod {eta, sigma}, and d(theta^i) has no theta^eta or
    theta^sigma terms while its theta-theta part equals
    -1/2 C^i_jk theta^j ^ theta^k for the declared constants.
    """
    rep = Report("adapted-coframe")
    free, assume = A.is_free()
    rep.assume(assume)
    if not free:
        rep.add(Report.failed("freeness", "generators are pointwise dependent"))
        return rep
    thetas = cf.by_role("theta")
    etas = cf.by_role("eta", "eta-hat", "eta-check")
    sigmas = cf.by_role("sigma", "sigma-hat", "sigma-check")
    if len(thetas) != A.dimension:
        rep.add(Report.failed("roles", "theta block size != action dimension"))
        return rep

    span_theta_eta = Subspace.span(S.chart, thetas + etas)
    rep.add(span_theta_eta.span_equal_report(
        Subspace.span(S.chart, S.one_forms), "[i] span{theta,eta} = I^1"))

    basic = Report("[ii] eta, sigma basic")
    for name, group in (("eta", etas), ("sigma", sigmas)):
        for i, f in enumerate(group):
            for j, X in enumerate(A.generators):
                c = evaluate(f, X)
                v = is_zero(c)
                if not v.is_zero:
                    basic.add(Report.failed(f"{name}[{i}](X_{j+1})",
                                            "not semi-basic",
                                            witness=print_expression(c)))
                lf = lie_derivative(X, f)
                if any(not is_zero(v2).is_zero for v2 in lf.coeffs.values()):
                    basic.add(Report.failed(f"L_X{j+1} {name}[{i}]",
                                            "not invariant",
                                            witness=print_form(lf)))
    if not basic.children:
        basic.add(Report.passed("all"))
    rep.add(basic)

    dual = Report("[iii] theta^i(X_j) = delta")
    for i, f in enumerate(thetas):
        for j, X in enumerate(A.generators):
            val = evaluate(f, X)
            want = sp.Integer(1 if i == j else 0)
            if not is_zero(val - want).is_zero:
                dual.add(Report.failed(
                    f"theta^{i+1}(X_{j+1})",
                    f"= {print_expression(val)}, want {want}"))
    if not dual.children:
        dual.add(Report.passed("all"))
    rep.add(dual)

    struct = Report("[v] structure equations")
    n = S.chart.dimension
    order = list(thetas) + list(etas) + list(sigmas)
    if len(order) != n:
        struct.add(Report.failed("coframe", "coframe does not span T*M"))
        rep.add(struct)
        return rep
    full = Coframe.make(S.chart, order)
    nt, ne = len(thetas), len(etas)
    for i, f in enumerate(sigmas):
        df = exterior_derivative(f)
        if df.coeffs:
            struct.add(Report.failed(f"d(sigma[{i}])", "not closed",
                                     witness=print_form(df)))
    for i, f in enumerate(etas):
        df = exterior_derivative(f)
        try:
            co = full.expand_two_form(df)
        except CheckError as exc:
            struct.add(Report.unknown(f"d(eta[{i}])", str(exc)))
            continue
        bad = [p for p in co if p[0] < nt]
        if bad:
            struct.add(Report.failed(
                f"d(eta[{i}])", "contains theta terms", witness=str(bad)))
    for i, f in enumerate(thetas):
        df = exterior_derivative(f)
        try:
            co = full.expand_two_form(df)
        except CheckError as exc:
            struct.add(Report.unknown(f"d(theta[{i}])", str(exc)))
            continue
        for (a, b), val in co.items():
            if a < nt and nt <= b:
                struct.add(Report.failed(
                    f"d(theta[{i}])",
                    "contains theta^(eta or sigma) terms",
                    witness=f"theta[{a}]^cf[{b}]: {print_expression(val)}"))
        # theta-theta block must be -C^i_jk (j < k)
        for j in range(nt):
            for k in range(j + 1, nt):
                got = co.get((j, k), sp.Integer(0))
                want = -sp.sympify(A.constants.get((j, k), [0] * nt)[i])
                if not is_zero(got - want).is_zero:
                    struct.add(Report.failed(
                        f"d(theta[{i}]) theta-theta part",
                        f"coefficient of theta[{j}]^theta[{k}] is "
                        f"{print_expression(got)}, want {print_expression(want)}"))
    if not struct.children:
        struct.add(Report.passed("all"))
    rep.add(struct)
    return rep
