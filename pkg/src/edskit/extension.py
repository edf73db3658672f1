"""Integrable-extension verification and prolongation of linear Pfaffian
systems with independence condition.

An extension witness packages the submersion, the admissible bundle J and
the rank bookkeeping; prolongation solves the tableau's linear homogeneous
system over the expression field and adjoins fiber coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import sympy as sp

from . import linalg
from .eds import (
    ExteriorDifferentialSystem,
    PfaffianSystem,
    RankUnknown,
    Subspace,
    membership,
)
from .expr import is_zero, normalize, print_expression
from .geometry import (
    Chart,
    DifferentialForm,
    SmoothMap,
    VectorField,
    evaluate,
    exterior_derivative,
    form_components,
    one_form,
    print_form,
    pullback,
    wedge,
)
from .report import CheckError, Report, Status


class TransversalityFailure(CheckError):
    def __init__(self, what: str):
        super().__init__("TransversalityFailure", what)


class ClosureFailure(CheckError):
    def __init__(self, what: str):
        super().__init__("ClosureFailure", what)


class NonconstantSolutionSpace(CheckError):
    def __init__(self, what: str):
        super().__init__("NonconstantSolutionSpace", what)


class KernelDegenerate(CheckError):
    def __init__(self, what: str):
        super().__init__("KernelDegenerate", what)


@dataclass
class ExtensionWitness:
    """A verified integrable extension p: (E, N) -> (I, M)."""

    total: ExteriorDifferentialSystem
    base: ExteriorDifferentialSystem
    projection: SmoothMap
    admissible: tuple[DifferentialForm, ...]
    fiber_dimension: int
    report: Report


def _pullback_system(p: SmoothMap, S: ExteriorDifferentialSystem) -> ExteriorDifferentialSystem:
    return ExteriorDifferentialSystem.make(
        p.source,
        [pullback(p, f) for f in S.one_forms],
        [pullback(p, f) for f in S.two_forms],
    )


def check_integrable_extension(
    E: ExteriorDifferentialSystem,
    I: ExteriorDifferentialSystem,
    p: SmoothMap,
    J: Optional[Sequence[DifferentialForm]] = None,
) -> ExtensionWitness:
    """Verify that p defines E as an integrable extension of I.

    When J is omitted, a complement to p*(I^1) inside E^1 is computed by
    echelon completion, preferring forms from the derived system E'.
    """
    rep = Report("integrable-extension")
    if p.source is not E.chart or p.target is not I.chart:
        raise CheckError("ChartMismatch", "projection charts do not match systems")
    ok, assume = p.is_submersion()
    rep.assume(assume)
    if not ok:
        raise TransversalityFailure("projection is not a submersion")
    v = E.chart.dimension - I.chart.dimension
    pb = _pullback_system(p, I)
    E1 = Subspace.span(E.chart, E.one_forms)
    pbI1 = Subspace.span(E.chart, pb.one_forms)

    if J is None:
        J = _auto_complement(E, pbI1, v)
    J = list(J)
    rep.add(Report.passed("admissible-bundle",
                          f"rank J = {len(J)}, fiber dimension = {v}"))
    if len(J) != v:
        raise TransversalityFailure(
            f"J has rank {len(J)} but the fiber dimension is {v}")

    # E^1 = J + p*(I^1) as a direct sum
    joined = Subspace.span(E.chart, list(J) + list(pb.one_forms))
    if joined.rank != len(J) + pbI1.rank or joined.rank != E1.rank:
        raise TransversalityFailure("E^1 is not J (+) p*(I^1)")
    rep.add(E1.span_equal_report(joined, "E^1 = J (+) p*(I^1)"))

    # transversality: ann(J) cap ker(p_*) = 0, i.e. the pairing of J with the
    # vertical fields is nondegenerate
    verticals, assume2 = p.vertical_fields()
    rep.assume(assume2)
    pairing = [[evaluate(xi, Z) for Z in verticals] for xi in J]
    r, assume3 = linalg.rank(pairing)
    rep.assume(assume3)
    if r != v:
        raise TransversalityFailure("ann(J) meets ker(p_*): pairing is degenerate")
    rep.add(Report.passed("transversality", "ann(J) ∩ ker(p_*) = 0"))

    # closure: d(xi) = 0 mod {p*(I), all xi}
    closure_sys = ExteriorDifferentialSystem.make(
        E.chart, list(pb.one_forms) + list(J), pb.all_two_forms()
    )
    for i, xi in enumerate(J):
        m = membership(exterior_derivative(xi), closure_sys,
                       name=f"d(xi[{i}]) = 0 mod (p*(I), xi)")
        rep.add(m)
        if m.status is Status.FAIL:
            raise ClosureFailure(f"d(xi[{i}]) escapes the extension ideal")

    # E = S(J) + p*(I): two-sided algebraic membership
    gen_sys = ExteriorDifferentialSystem.make(
        E.chart, list(pb.one_forms) + list(J), list(pb.two_forms)
    )
    both = Report("E = S(J) + p*(I)")
    for i, f in enumerate(E.one_forms):
        both.add(membership(f, gen_sys, name=f"E one-form[{i}]"))
    for i, f in enumerate(E.two_forms):
        both.add(membership(f, gen_sys, name=f"E two-form[{i}]"))
    for i, f in enumerate(pb.one_forms):
        both.add(membership(f, E, name=f"p* one-form[{i}]"))
    for i, f in enumerate(pb.two_forms):
        both.add(membership(f, E, name=f"p* two-form[{i}]"))
    for i, f in enumerate(J):
        both.add(membership(f, E, name=f"xi[{i}] in E"))
    rep.add(both)
    if both.status is Status.FAIL:
        raise ClosureFailure("algebraic generation E = S(J) + p*(I) fails")

    return ExtensionWitness(E, I, p, tuple(J), v, rep)


def _auto_complement(
    E: ExteriorDifferentialSystem, pbI1: Subspace, v: int
) -> list[DifferentialForm]:
    """Complete p*(I^1) to E^1, preferring derived-system forms."""
    chart = E.chart
    base_rows = [form_components(f) for f in pbI1.forms]
    candidates: list[DifferentialForm] = []
    try:
        derived = PfaffianSystem.span(chart, E.one_forms)
        from .eds import derived_system

        candidates.extend(derived_system(derived).generators)
    except CheckError:
        pass
    candidates.extend(E.one_forms)
    out: list[DifferentialForm] = []
    rows = list(base_rows)
    rank_now, _ = linalg.rank(rows) if rows else (0, [])
    for c in candidates:
        if len(out) == v:
            break
        trial = rows + [form_components(c)]
        r, _ = linalg.rank(trial)
        if r > rank_now:
            out.append(c)
            rows = trial
            rank_now = r
    return out


def check_rank_law(w: ExtensionWitness) -> Report:
    """rank(E) = rank(I) + v and rank(E') = rank(I') + v."""
    from .eds import derived_system

    rep = Report("extension-rank-law")
    Epf = PfaffianSystem.span(w.total.chart, w.total.one_forms)
    Ipf = PfaffianSystem.span(w.base.chart, w.base.one_forms)
    v = w.fiber_dimension
    if Epf.rank == Ipf.rank + v:
        rep.add(Report.passed("rank(E) = rank(I) + v",
                              f"{Epf.rank} = {Ipf.rank} + {v}"))
    else:
        rep.add(Report.failed("rank(E) = rank(I) + v",
                              f"{Epf.rank} != {Ipf.rank} + {v}"))
    Ed = derived_system(Epf)
    Id = derived_system(Ipf)
    if Ed.rank == Id.rank + v:
        rep.add(Report.passed("rank(E') = rank(I') + v",
                              f"{Ed.rank} = {Id.rank} + {v}"))
    else:
        rep.add(Report.failed("rank(E') = rank(I') + v",
                              f"{Ed.rank} != {Id.rank} + {v}"))
    return rep


@dataclass
class ProlongationResult:
    base: PfaffianSystem
    prolonged_chart: Chart
    prolonged: PfaffianSystem
    projection: SmoothMap
    fiber_names: tuple[str, ...]
    tableau_basis: list
    report: Report


def prolong(
    I: PfaffianSystem,
    independence: Sequence[DifferentialForm],
    complement: Optional[Sequence[DifferentialForm]] = None,
    two_forms: Sequence[DifferentialForm] = (),
    fiber_prefix: str = "s",
) -> ProlongationResult:
    """Prolong a linear Pfaffian system with independence condition.

    The coframe is (theta^a; omega^i = independence; pi^eps = complement,
    auto-completed when omitted).  Requires d(theta^a) to have no pi^pi
    terms modulo I (a linear Pfaffian system); absorbs torsion, solves the
    homogeneous tableau system for a basis S over the expression field,
    adjoins one fiber coordinate per basis element, and verifies the kernel
    condition (k_eps S^eps_vi = 0 forces k = 0) needed for
    (I^[1])' = pi*(I).

    ``two_forms`` supplies additional degree-2 generators (a decomposable
    system's hats and checks); they constrain integral elements exactly like
    the d(theta) rows.
    """
    chart = I.chart
    rep = Report("prolongation")
    thetas = list(I.generators)
    omegas = list(independence)
    rows = [form_components(f) for f in thetas + omegas]
    r0, assume = linalg.rank(rows)
    if r0 != len(rows):
        raise CheckError("BadIndependence",
                         "independence forms dependent with the system")
    rep.assume(assume)
    pis: list[DifferentialForm] = list(complement) if complement else []
    if not pis:
        for j in range(chart.dimension):
            cand = one_form(chart, [sp.Integer(1 if i == j else 0)
                                    for i in range(chart.dimension)])
            trial = rows + [form_components(cand)]
            r, _ = linalg.rank(trial)
            if r > len(rows):
                pis.append(cand)
                rows = trial
    coframe = thetas + omegas + pis
    if len(coframe) != chart.dimension:
        raise CheckError("BadCoframe", "could not complete to a coframe")
    nt, nw, npi = len(thetas), len(omegas), len(pis)

    from .geometry import Coframe

    full = Coframe.make(chart, coframe)
    # structure of d(theta^a) and of the extra 2-form generators in the
    # coframe, mod theta
    A: dict[tuple[int, int, int], sp.Expr] = {}
    torsion: dict[tuple[int, int, int], sp.Expr] = {}
    sources = [exterior_derivative(th) for th in thetas] + list(two_forms)
    for a, src in enumerate(sources):
        co = full.expand_two_form(src)
        for (i, j), val in co.items():
            if i < nt:
                continue  # theta wedge anything: absorbed mod I
            bi = _block(i, nt, nw)
            bj = _block(j, nt, nw)
            if bi == "omega" and bj == "omega":
                torsion[(a, i - nt, j - nt)] = val
            elif bi == "omega" and bj == "pi":
                A[(a, j - nt - nw, i - nt)] = normalize(-val)
            elif bi == "pi" and bj == "omega":
                A[(a, i - nt - nw, j - nt)] = val
            else:
                raise CheckError(
                    "NotLinearPfaffian",
                    f"generator 2-form {a} has a pi^pi term at {(i, j)}")
    nt_rows = len(sources)

    # absorb torsion: find p^eps_i with A^a_{eps i} p^eps_j - A^a_{eps j}
    # p^eps_i + c^a_{ij} = 0
    if torsion:
        nun = npi * nw
        mat, rhs = [], []
        for a in range(nt_rows):
            for i in range(nw):
                for j in range(i + 1, nw):
                    row = [sp.Integer(0)] * nun
                    for eps in range(npi):
                        row[eps * nw + j] = normalize(
                            row[eps * nw + j] + A.get((a, eps, i), sp.Integer(0)))
                        row[eps * nw + i] = normalize(
                            row[eps * nw + i] - A.get((a, eps, j), sp.Integer(0)))
                    mat.append(row)
                    rhs.append(normalize(-torsion.get((a, i, j), sp.Integer(0))))
        sol = linalg.solve_linear(mat, rhs)
        if sol is None:
            raise CheckError("TorsionNotAbsorbable",
                             "no integral elements: torsion cannot be absorbed")
        rep.assume(sol[1])
        absorb = sol[0]
        new_pis = []
        for eps in range(npi):
            f = pis[eps]
            for i in range(nw):
                c = absorb[eps * nw + i]
                if c != 0:
                    f = f + omegas[i].scale(c)
            new_pis.append(f)
        pis = new_pis
        rep.add(Report.passed("torsion-absorbed"))

    # homogeneous tableau system: A^a_{eps i} S^eps_j - A^a_{eps j} S^eps_i = 0
    nun = npi * nw
    mat = []
    for a in range(nt_rows):
        for i in range(nw):
            for j in range(i + 1, nw):
                row = [sp.Integer(0)] * nun
                for eps in range(npi):
                    row[eps * nw + j] = normalize(
                        row[eps * nw + j] + A.get((a, eps, i), sp.Integer(0)))
                    row[eps * nw + i] = normalize(
                        row[eps * nw + i] - A.get((a, eps, j), sp.Integer(0)))
                mat.append(row)
    if mat:
        basis, assume2 = linalg.kernel(mat)
        rep.assume(assume2)
    else:
        basis = [[sp.Integer(1 if k == l else 0) for k in range(nun)]
                 for l in range(nun)]
    t = len(basis)
    rep.add(Report.passed("tableau", f"solution space dimension {t}"))

    # kernel condition: k_eps S^eps_{vi} = 0 => k = 0
    cols = [[vec[eps * nw + i] for vec in basis for i in range(nw)]
            for eps in range(npi)]
    kr, assume3 = linalg.rank([list(col) for col in zip(*cols)]) if cols else (0, [])
    rep.assume(assume3)
    if kr != npi:
        raise KernelDegenerate(
            "the tableau solutions do not separate the pi directions")
    rep.add(Report.passed("kernel-condition"))

    # build the prolonged chart and system
    fiber = [f"{fiber_prefix}{v + 1}" for v in range(t)]
    pro_chart = Chart.make(
        f"{chart.name}_prolonged",
        [s.name for s in chart.coordinates] + fiber,
    )
    old_new = {s.name: c for s, c in zip(chart.coordinates,
                                         pro_chart.coordinates)}
    subs = {s: pro_chart.coordinates[i] for i, s in enumerate(chart.coordinates)}

    def lift(form: DifferentialForm) -> DifferentialForm:
        return DifferentialForm.make(
            pro_chart, form.degree,
            {idx: sp.sympify(v).subs(subs, simultaneous=True)
             for idx, v in form.coeffs.items()},
        )

    fiber_syms = pro_chart.coordinates[chart.dimension:]
    new_thetas = [lift(th) for th in thetas]
    for eps in range(npi):
        f = lift(pis[eps])
        for v_i, vec in enumerate(basis):
            for i in range(nw):
                c = vec[eps * nw + i]
                if c != 0:
                    c = sp.sympify(c).subs(subs, simultaneous=True)
                    f = f + lift(omegas[i]).scale(normalize(fiber_syms[v_i] * c))
        new_thetas.append(f)
    prolonged = PfaffianSystem.make(pro_chart, new_thetas)
    projection = SmoothMap.make(pro_chart, chart,
                                list(pro_chart.coordinates[:chart.dimension]))
    return ProlongationResult(I, pro_chart, prolonged, projection,
                              tuple(fiber), basis, rep)


def _block(i: int, nt: int, nw: int) -> str:
    if i < nt:
        return "theta"
    if i < nt + nw:
        return "omega"
    return "pi"


def check_prolongation_derived(res: ProlongationResult) -> Report:
    """(I^[1])' = pi*(I) as spans on the prolonged chart."""
    from .eds import derived_system

    rep = Report("prolonged-derived-system")
    got = derived_system(res.prolonged)
    want = Subspace.span(res.prolonged_chart,
                         [pullback(res.projection, f) for f in res.base.generators])
    rep.add(Subspace.span(res.prolonged_chart, list(got.generators))
            .span_equal_report(want, "(I1)' = pi*(I)"))
    return rep


def prolong_extension(
    witness: ExtensionWitness,
    total_prolonged: ProlongationResult,
    base_prolonged: ProlongationResult,
) -> ExtensionWitness:
    """Lift a verified extension through prolongations of both systems.

    The lifted projection sends base coordinates through p and solves for
    the fiber coordinates: the pullback of each prolonged base generator
    must land in the span of the prolonged total system.
    """
    p = witness.projection
    Nc = total_prolonged.prolonged_chart
    Mc = base_prolonged.prolonged_chart
    nbase = p.source.dimension
    subs = {s: Nc.coordinates[i] for i, s in enumerate(p.source.coordinates)}
    base_formulas = [sp.sympify(f).subs(subs, simultaneous=True) for f in p.formulas]

    fiber_cnt = Mc.dimension - p.target.dimension
    unknowns = [sp.Dummy(f"fs{k}", real=True) for k in range(fiber_cnt)]
    lifted = SmoothMap(Nc, Mc, tuple(base_formulas + list(unknowns)))
    span_rows = [form_components(f) for f in total_prolonged.prolonged.generators]
    sols: dict = {}
    for g in base_prolonged.prolonged.generators[base_prolonged.base.rank:]:
        pb = pullback(lifted, g)
        comps = form_components(pb)
        coeffs, assume = linalg.member_of_span(
            [normalize(c) for c in comps], span_rows
        )
        if coeffs is None:
            # solve for the unknown fiber values making membership hold
            free = sorted(
                {u for c in comps for u in sp.sympify(c).free_symbols
                 if u in set(unknowns)},
                key=lambda d: d.name,
            )
            sol = _solve_membership(comps, span_rows, free)
            if sol is None:
                raise CheckError("LiftFailure",
                                 "cannot solve for the lifted fiber map")
            sols.update(sol)
    formulas = base_formulas + [
        normalize(sp.sympify(sols.get(u, sp.Integer(0))))
        for u in unknowns
    ]
    lifted = SmoothMap.make(Nc, Mc, formulas)
    E1 = ExteriorDifferentialSystem.make(
        Nc, total_prolonged.prolonged.generators, [])
    I1 = ExteriorDifferentialSystem.make(
        Mc, base_prolonged.prolonged.generators, [])
    return check_integrable_extension(E1, I1, lifted, None)


def _solve_membership(comps, span_rows, unknowns):
    """Choose values of the unknowns making a covector lie in a span."""
    if not unknowns:
        return None
    # residual after projecting onto the span: solve residual == 0 linearly
    mat = [list(col) for col in zip(*span_rows)] if span_rows else []
    aug_unknowns = [sp.Dummy(f"c{k}") for k in range(len(span_rows))]
    eqs = []
    for i, comp in enumerate(comps):
        lhs = sp.sympify(comp)
        for c, row in zip(aug_unknowns, span_rows):
            lhs = lhs - c * row[i]
        eqs.append(sp.expand(lhs, power_exp=False, power_base=False, log=False))
    try:
        sol = sp.solve(eqs, list(unknowns) + aug_unknowns, dict=True)
    except Exception:
        return None
    if not sol:
        return None
    out = {}
    for u in unknowns:
        if u in sol[0]:
            out[u] = sol[0][u]
    return out
