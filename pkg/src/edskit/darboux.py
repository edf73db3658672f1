"""Decomposability, singular Pfaffian systems, Darboux pairs, Vessiot
structure constants and the small Lie-algebra classification the worked
examples need (abelian, 2d solvable, sl2, so3).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import sympy as sp

from . import linalg
from .eds import (
    ExteriorDifferentialSystem,
    PfaffianSystem,
    Subspace,
    infinite_derived,
    membership,
)
from .expr import Verdict, differentiate, is_zero, normalize, print_expression
from .extension import ExtensionWitness
from .geometry import (
    Chart,
    Coframe,
    DifferentialForm,
    SmoothMap,
    VectorField,
    evaluate,
    exterior_derivative,
    form_components,
    interior_product,
    one_form,
    print_form,
    pullback,
    wedge,
)
from .report import CheckError, Report, Status


class NotDecomposable(CheckError):
    def __init__(self, what: str):
        super().__init__("NotDecomposable", what)


class NonconstantStructureFunctions(CheckError):
    def __init__(self, what: str):
        super().__init__("NonconstantStructureFunctions", what)


class ShapeMismatch(CheckError):
    def __init__(self, what: str):
        super().__init__("ShapeMismatch", what)


class UnclassifiedAlgebra(CheckError):
    def __init__(self, what: str):
        super().__init__("UnclassifiedAlgebra", what)


@dataclass
class Decomposition:
    """A type-[p, rho] splitting of an EDS into two 2-form blocks."""

    system: ExteriorDifferentialSystem
    thetas: list[DifferentialForm]
    sigma_hat: list[DifferentialForm]
    sigma_check: list[DifferentialForm]
    omega_hat: list[DifferentialForm]
    omega_check: list[DifferentialForm]
    assumptions: list[str] = field(default_factory=list)

    @property
    def type_signature(self) -> tuple[int, int]:
        return (len(self.sigma_hat), len(self.sigma_check))


@dataclass
class DarbouxPair:
    """Singular Pfaffian systems of a decomposition with their flags."""

    chart: Chart
    v_hat: PfaffianSystem
    v_check: PfaffianSystem
    v_hat_inf: PfaffianSystem
    v_check_inf: PfaffianSystem
    decomposition: Optional[Decomposition] = None

    @staticmethod
    def from_systems(v_hat: PfaffianSystem, v_check: PfaffianSystem,
                     decomposition: Optional[Decomposition] = None) -> "DarbouxPair":
        return DarbouxPair(
            v_hat.chart, v_hat, v_check,
            infinite_derived(v_hat), infinite_derived(v_check),
            decomposition,
        )

    def rank_table(self) -> dict:
        return {
            "dim": self.chart.dimension,
            "v_hat": self.v_hat.rank,
            "v_check": self.v_check.rank,
            "v_hat_inf": self.v_hat_inf.rank,
            "v_check_inf": self.v_check_inf.rank,
        }


def detect_decomposition(
    S: ExteriorDifferentialSystem,
    hint: Optional[Coframe] = None,
) -> Decomposition:
    """Split the 2-form generation of S into two wedge-orthogonal blocks.

    With a hint coframe (roles theta / sigma-hat / sigma-check) the span of
    the generators modulo theta-wedge terms must decompose as a direct sum
    of a pure sigma-hat-wedge part and a pure sigma-check part; the block
    bases become the new generators (the algebraic ideal is unchanged).
    Without a hint, the sigma blocks are discovered by grouping the
    transverse directions the generators touch.
    """
    if hint is not None:
        thetas = hint.by_role("theta")
        sigma_hat = hint.by_role("sigma-hat")
        sigma_check = hint.by_role("sigma-check")
        if not sigma_hat or not sigma_check:
            raise NotDecomposable("hint coframe lacks sigma blocks")
        theta_span = Subspace.span(S.chart, thetas)
        rep_theta = theta_span.span_equal_report(
            Subspace.span(S.chart, S.one_forms), "hint theta block = I^1")
        if rep_theta.status is not Status.PASS:
            raise NotDecomposable("hint theta block does not span I^1")
        return _split_blocks(S, thetas, sigma_hat, sigma_check,
                             list(hint.assumptions))
    return _detect_blocks(S)


def _detect_blocks(S: ExteriorDifferentialSystem) -> Decomposition:
    """Characteristic splitting: the decomposable elements of the 2-form
    span modulo theta give the two sigma blocks.

    Handles the class-s hyperbolic case where that span is 2-dimensional
    (one quadratic, two rays); richer systems need a hint coframe.
    """
    chart = S.chart
    theta = Subspace.span(chart, S.one_forms)
    complements = _complete_coframe(chart, theta)
    order = list(theta.forms) + complements
    full = Coframe.make(chart, order)
    nt = theta.rank
    two = S.all_two_forms()
    if not two:
        raise NotDecomposable("no 2-form generators")

    reduced = []
    for om in two:
        co = full.expand_two_form(om)
        f = DifferentialForm.zero(chart, 2)
        for (i, j), val in co.items():
            if i < nt:
                continue
            f = f + wedge(order[i], order[j]).scale(val)
        if f.coeffs:
            reduced.append(f)
    keys = sorted({k for f in reduced for k in f.coeffs})
    rows = [[f.coeffs.get(k, sp.Integer(0)) for k in keys] for f in reduced]
    ech = linalg.echelon(rows)
    if ech.rank != 2:
        raise NotDecomposable(
            f"2-form span modulo theta has rank {ech.rank}; automatic "
            f"splitting handles rank 2 only, supply a hint coframe")
    basis = []
    for r in ech.rows:
        f = DifferentialForm.zero(chart, 2)
        for k, val in zip(keys, r):
            if val != 0:
                f = f + DifferentialForm.make(chart, 2, {k: val})
        basis.append(f)
    om1, om2 = basis
    # rays of decomposable elements: (om1 + t om2)^2 = 0, plus t = infinity
    t = sp.Dummy("t", real=True)
    sq = wedge(om1 + om2.scale(t), om1 + om2.scale(t))
    eqs = [sp.Eq(sp.together(v), 0) for v in sq.coeffs.values()]
    try:
        sols = sp.solve(eqs, t, dict=True)
    except Exception:
        sols = []
    roots = []
    for s_ in sols:
        if t in s_:
            roots.append(s_[t])
    rays = [om1 + om2.scale(r) for r in dict.fromkeys(roots)]
    inf_sq = wedge(om2, om2)
    if all(is_zero(v).is_zero for v in inf_sq.coeffs.values()):
        rays.append(om2)
    rays = rays[:2]
    if len(rays) != 2:
        raise NotDecomposable(
            "could not find two decomposable rays in the 2-form span")
    blocks = []
    ann, assume = theta.annihilator()
    for ray in rays:
        sup = Subspace.span(chart, [interior_product(Z, ray) for Z in ann])
        if sup.rank != 2:
            raise NotDecomposable("a characteristic 2-form is not of rank one")
        blocks.append(list(sup.forms))
    return _split_blocks(S, list(S.one_forms), blocks[0], blocks[1],
                         list(assume))


def _complete_coframe(chart, theta) -> list[DifferentialForm]:
    out = []
    rows_now = [r[:] for r in theta.matrix()]
    rank_now, _ = linalg.rank(rows_now) if rows_now else (0, [])
    for j in range(chart.dimension):
        cand = one_form(chart, [sp.Integer(1 if i == j else 0)
                                for i in range(chart.dimension)])
        trial = rows_now + [form_components(cand)]
        r, _ = linalg.rank(trial)
        if r > rank_now:
            out.append(cand)
            rows_now = trial
            rank_now = r
    return out


def _split_blocks(S: ExteriorDifferentialSystem,
                  thetas: list[DifferentialForm],
                  sigma_hat: list[DifferentialForm],
                  sigma_check: list[DifferentialForm],
                  assumptions: list[str]) -> Decomposition:
    """Recombine the generator span into pure hat / pure check 2-forms."""
    nt = len(thetas)
    nh = len(sigma_hat)
    order = thetas + sigma_hat + sigma_check
    if len(order) != S.chart.dimension:
        raise NotDecomposable("block coframe does not span T*M")
    full = Coframe.make(S.chart, order)
    n = len(order)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    col_of = {p: k for k, p in enumerate(pairs)}
    rows = []
    for om in S.all_two_forms():
        co = full.expand_two_form(om)
        row = [sp.Integer(0)] * len(pairs)
        for (i, j), val in co.items():
            if i < nt:
                continue  # theta wedge term: always inside the ideal
            row[col_of[(i, j)]] = val
        rows.append(row)
    ech = linalg.echelon(rows)
    total = ech.rank

    def pure(rows_, block):
        # intersection of the row space with the pure-block columns
        bad_cols = [k for k, (i, j) in enumerate(pairs)
                    if not _pair_in_block(i, j, nt, nh, block)]
        mat = [[r[k] for r in rows_] for k in bad_cols]
        if not mat:
            basis = [[sp.Integer(1 if a == b else 0) for a in range(len(rows_))]
                     for b in range(len(rows_))]
        else:
            basis, _ = linalg.kernel(mat)
        out = []
        for vec in basis:
            comb = [normalize(sum(vec[a] * rows_[a][k] for a in range(len(rows_))))
                    for k in range(len(pairs))]
            if any(x != 0 for x in comb):
                out.append(comb)
        return linalg.echelon(out).rows if out else []

    hat_rows = pure(ech.rows, "hat")
    check_rows = pure(ech.rows, "check")
    if len(hat_rows) + len(check_rows) != total:
        raise NotDecomposable(
            f"generator span (rank {total}) does not split into pure blocks "
            f"({len(hat_rows)} + {len(check_rows)})")
    if not hat_rows or not check_rows:
        raise NotDecomposable("a block has no 2-form generator (s, tau >= 1)")

    def rebuild(rows_):
        out = []
        for r in rows_:
            f = DifferentialForm.zero(S.chart, 2)
            for k, val in enumerate(r):
                if val != 0:
                    i, j = pairs[k]
                    f = f + wedge(order[i], order[j]).scale(val)
            out.append(f)
        return out

    dec = Decomposition(S, thetas, sigma_hat, sigma_check,
                        rebuild(hat_rows), rebuild(check_rows), assumptions)
    _verify_decomposition(dec)
    return dec


def _pair_in_block(i: int, j: int, nt: int, nh: int, block: str) -> bool:
    if block == "hat":
        return nt <= i < nt + nh and nt <= j < nt + nh
    return i >= nt + nh and j >= nt + nh


def _verify_decomposition(dec: Decomposition) -> None:
    p, rho = dec.type_signature
    if p < 2 or rho < 2:
        raise NotDecomposable(f"type [{p}, {rho}] needs p, rho >= 2")
    # residual check: each omega-hat expands in sigma-hat wedges alone
    chart = dec.system.chart
    for tag, oms, sigmas in (("hat", dec.omega_hat, dec.sigma_hat),
                             ("check", dec.omega_check, dec.sigma_check)):
        pairs = list(itertools.combinations(range(len(sigmas)), 2))
        wedges = [wedge(sigmas[i], sigmas[j]) for i, j in pairs]
        for om in oms:
            keys = sorted({k for w in wedges for k in w.coeffs} | set(om.coeffs))
            mat = [[w.coeffs.get(k, sp.Integer(0)) for w in wedges] for k in keys]
            rhs = [om.coeffs.get(k, sp.Integer(0)) for k in keys]
            if linalg.solve_linear(mat, rhs) is None:
                raise NotDecomposable(
                    f"a {tag} 2-form does not lie in its sigma-wedge span")


def singular_systems(dec: Decomposition) -> DarbouxPair:
    """Assemble V-hat = {theta, sigma-hat}, V-check = {theta, sigma-check}."""
    chart = dec.system.chart
    v_hat = PfaffianSystem.make(chart, dec.thetas + dec.sigma_hat)
    v_check = PfaffianSystem.make(chart, dec.thetas + dec.sigma_check)
    return DarbouxPair.from_systems(v_hat, v_check, dec)


def check_darboux_pair(P: DarbouxPair, shortcut: bool = False) -> Report:
    """Darboux-pair conditions as rank equalities.

    Always: rank(V-hat + V-check-inf) = dim M and mirrored.  With shortcut,
    verify (I^1)-inf = (V-hat cap V-check)-inf = 0 instead of the direct
    intersection condition V-hat-inf cap V-check-inf = 0 (Theorem-4.3 style).
    """
    rep = Report("darboux-pair")
    n = P.chart.dimension
    plus1 = P.v_hat.subspace().plus(P.v_check_inf.subspace())
    plus2 = P.v_check.subspace().plus(P.v_hat_inf.subspace())
    rep.assume(plus1.assumptions)
    rep.assume(plus2.assumptions)
    if plus1.rank == n:
        rep.add(Report.passed("V-hat + V-check-inf = T*M", f"rank {plus1.rank}"))
    else:
        rep.add(Report.failed("V-hat + V-check-inf = T*M",
                              f"rank {plus1.rank} < {n}"))
    if plus2.rank == n:
        rep.add(Report.passed("V-check + V-hat-inf = T*M", f"rank {plus2.rank}"))
    else:
        rep.add(Report.failed("V-check + V-hat-inf = T*M",
                              f"rank {plus2.rank} < {n}"))
    if shortcut:
        inter = P.v_hat.subspace().intersect(P.v_check.subspace())
        icap = infinite_derived(PfaffianSystem.span(P.chart, [f for f in inter.forms]))
        if icap.rank == 0:
            rep.add(Report.passed("(V-hat cap V-check)-inf = 0"))
        else:
            rep.add(Report.failed("(V-hat cap V-check)-inf = 0",
                                  f"rank {icap.rank}"))
    else:
        cap = P.v_hat_inf.subspace().intersect(P.v_check_inf.subspace())
        if cap.rank == 0:
            rep.add(Report.passed("V-hat-inf cap V-check-inf = 0"))
        else:
            rep.add(Report.failed("V-hat-inf cap V-check-inf = 0",
                                  f"rank {cap.rank}"))
    return rep


def vessiot_dimension(P: DarbouxPair) -> int:
    return P.chart.dimension - P.v_hat_inf.rank - P.v_check_inf.rank


def check_darboux_compatible(
    E_pair: DarbouxPair, I_pair: DarbouxPair, p: SmoothMap
) -> Report:
    """Theorem-5.3 style criteria for a compatible extension pair."""
    rep = Report("darboux-compatible")
    verticals, assume = p.vertical_fields()
    rep.assume(assume)
    vdim = len(verticals)
    for name, Zinf in (("Z-hat-inf", E_pair.v_hat_inf),
                       ("Z-check-inf", E_pair.v_check_inf)):
        pairing = [[evaluate(f, Z) for Z in verticals] for f in Zinf.generators]
        r, a2 = linalg.rank(pairing)
        rep.assume(a2)
        if r == vdim:
            rep.add(Report.passed(f"ker(p_*) cap ann({name}) = 0"))
        else:
            rep.add(Report.failed(f"ker(p_*) cap ann({name}) = 0",
                                  f"pairing rank {r} < {vdim}"))
    for name, Zinf, Vinf in (("hat", E_pair.v_hat_inf, I_pair.v_hat_inf),
                             ("check", E_pair.v_check_inf, I_pair.v_check_inf)):
        want = vdim + Vinf.rank
        if Zinf.rank == want:
            rep.add(Report.passed(
                f"rank(Z-{name}-inf) = rank(ker p_*) + rank(V-{name}-inf)",
                f"{Zinf.rank} = {vdim} + {Vinf.rank}"))
        else:
            rep.add(Report.failed(
                f"rank(Z-{name}-inf) = rank(ker p_*) + rank(V-{name}-inf)",
                f"{Zinf.rank} != {vdim} + {Vinf.rank}"))
    return rep


def check_zero_adapted(cf: Coframe, P: DarbouxPair) -> Report:
    """Span equalities of the 0-adapted coframe conditions."""
    rep = Report("zero-adapted")
    chart = cf.chart
    thetas = cf.by_role("theta")
    eta_hat = cf.by_role("eta-hat")
    eta_check = cf.by_role("eta-check")
    sigma_hat = cf.by_role("sigma-hat")
    sigma_check = cf.by_role("sigma-check")

    def span(forms):
        return Subspace.span(chart, forms)

    checks = [
        ("V-hat = {theta, eta-hat, eta-check, sigma-hat}",
         span(thetas + eta_hat + eta_check + sigma_hat), P.v_hat.subspace()),
        ("V-check = {theta, eta-hat, eta-check, sigma-check}",
         span(thetas + eta_hat + eta_check + sigma_check), P.v_check.subspace()),
        ("V-hat-inf = {eta-hat, sigma-hat}",
         span(eta_hat + sigma_hat), P.v_hat_inf.subspace()),
        ("V-check-inf = {eta-check, sigma-check}",
         span(eta_check + sigma_check), P.v_check_inf.subspace()),
    ]
    for name, got, want in checks:
        rep.add(got.span_equal_report(want, name))
    return rep


@dataclass
class VessiotData:
    """Structure constants extracted from a verified 4-adapted coframe.

    ``brackets[(i, j)]`` holds the components of [e_i, e_j] in the theta-dual
    basis; ``label`` is the classification and ``invariants`` carries the
    derived-series dimensions and the Killing signature.
    """

    dimension: int
    brackets: dict
    label: str
    invariants: dict

    def bracket_matrix(self, i: int, j: int) -> list:
        if i == j:
            return [sp.Integer(0)] * self.dimension
        if (i, j) in self.brackets:
            return self.brackets[(i, j)]
        return [normalize(-c) for c in self.brackets.get((j, i), [0] * self.dimension)]


def extract_vessiot(cf: Coframe, P: DarbouxPair) -> VessiotData:
    """Read the Vessiot structure constants off a 4-adapted coframe.

    The coframe roles must mark the theta block; the remaining members split
    into the hat block (inside V-hat-inf) and the check block.  Shape
    requirements: d(theta) may contain hat^hat, check^check and hat^theta
    terms plus a constant-coefficient theta-theta part; mixed hat^check and
    check^theta terms are ShapeMismatch.
    """
    chart = cf.chart
    thetas = cf.by_role("theta")
    if not thetas:
        raise ShapeMismatch("coframe has no theta block")
    nt = len(thetas)
    rest = [f for f, r in zip(cf.forms, cf.roles) if r != "theta"]
    hat_span = P.v_hat_inf.subspace()
    check_span = P.v_check_inf.subspace()
    hats, checks = [], []
    for f in rest:
        if hat_span.contains(f):
            hats.append(f)
        elif check_span.contains(f):
            checks.append(f)
        else:
            raise ShapeMismatch(
                f"coframe member {print_form(f)} lies in neither V-hat-inf "
                f"nor V-check-inf")
    order = thetas + hats + checks
    full = Coframe.make(chart, order)
    nh = len(hats)
    constants: dict = {}
    mixed_seen = set()
    for a, th in enumerate(thetas):
        co = full.expand_two_form(exterior_derivative(th))
        for (i, j), val in co.items():
            bi = "t" if i < nt else ("h" if i < nt + nh else "c")
            bj = "t" if j < nt else ("h" if j < nt + nh else "c")
            pair = "".join(sorted(bi + bj))
            if pair == "tt":
                for x in chart.coordinates:
                    if differentiate(val, x) != 0:
                        raise NonconstantStructureFunctions(
                            f"theta-theta coefficient {print_expression(val)} "
                            f"is not constant")
                constants[(a, i, j)] = val
            elif pair == "ch":
                raise ShapeMismatch("mixed hat^check term in d(theta)")
            elif pair in ("ht", "ct"):
                # a 4-adapted coframe pairs theta with only one side
                mixed_seen.add(pair)
                if len(mixed_seen) > 1:
                    raise ShapeMismatch(
                        "d(theta) pairs theta with both sigma blocks")
            # "hh", "cc" terms are always allowed
    # brackets of the dual frame: [e_i, e_j] = -C^a_{ij} e_a where
    # d(theta^a) = sum_{i<j} C^a_{ij} theta^i ^ theta^j + ...
    brackets: dict = {}
    for i in range(nt):
        for j in range(i + 1, nt):
            vec = [normalize(-constants.get((a, i, j), sp.Integer(0)))
                   for a in range(nt)]
            brackets[(i, j)] = vec
    _check_jacobi(nt, brackets)
    label, invariants = classify_lie_algebra(nt, brackets)
    return VessiotData(nt, brackets, label, invariants)


def _bracket(nt, brackets, u, v):
    """[u, v] for coefficient vectors u, v."""
    out = [sp.Integer(0)] * nt
    for i in range(nt):
        for j in range(nt):
            if i == j:
                continue
            key = (i, j) if i < j else (j, i)
            sign = 1 if i < j else -1
            vec = brackets.get(key, [sp.Integer(0)] * nt)
            c = normalize(u[i] * v[j] * sign)
            if c != 0:
                for a in range(nt):
                    out[a] = normalize(out[a] + c * vec[a])
    return out


def _check_jacobi(nt, brackets) -> None:
    basis = [[sp.Integer(1 if i == j else 0) for i in range(nt)]
             for j in range(nt)]
    for i, j, k in itertools.combinations(range(nt), 3):
        total = [sp.Integer(0)] * nt
        for (a, b, c) in ((i, j, k), (j, k, i), (k, i, j)):
            inner = _bracket(nt, brackets, basis[b], basis[c])
            outer = _bracket(nt, brackets, basis[a], inner)
            total = [normalize(t + o) for t, o in zip(total, outer)]
        if any(t != 0 for t in total):
            raise CheckError("JacobiFailure",
                             f"Jacobi identity fails on (e{i+1}, e{j+1}, e{k+1})")


def _derived_series_dims(nt, brackets) -> list[int]:
    space = [[sp.Integer(1 if i == j else 0) for i in range(nt)]
             for j in range(nt)]
    dims = [nt]
    while True:
        gens = []
        for a in range(len(space)):
            for b in range(a + 1, len(space)):
                v = _bracket(nt, brackets, space[a], space[b])
                if any(x != 0 for x in v):
                    gens.append(v)
        if not gens:
            dims.append(0)
            break
        ech = linalg.echelon(gens)
        space = ech.rows
        dims.append(len(space))
        if dims[-1] == dims[-2]:
            break
        if dims[-1] == 0:
            break
    return dims


def _killing_matrix(nt, brackets) -> sp.Matrix:
    basis = [[sp.Integer(1 if i == j else 0) for i in range(nt)]
             for j in range(nt)]
    ad = []
    for i in range(nt):
        mat = sp.zeros(nt, nt)
        for j in range(nt):
            col = _bracket(nt, brackets, basis[i], basis[j])
            for a in range(nt):
                mat[a, j] = col[a]
        ad.append(mat)
    K = sp.zeros(nt, nt)
    for i in range(nt):
        for j in range(nt):
            K[i, j] = sp.trace(ad[i] * ad[j])
    return K


def _signature(K: sp.Matrix) -> tuple[int, int, int]:
    """(n_plus, n_minus, n_zero) of a rational symmetric matrix, by
    congruence diagonalization."""
    M = K.as_mutable()
    n = M.shape[0]
    pos = neg = zero = 0
    idx = list(range(n))
    while idx:
        # find nonzero diagonal entry
        pivot = None
        for i in idx:
            if M[i, i] != 0:
                pivot = i
                break
        if pivot is None:
            off = None
            for i in idx:
                for j in idx:
                    if i < j and M[i, j] != 0:
                        off = (i, j)
                        break
                if off:
                    break
            if off is None:
                zero += len(idx)
                break
            i, j = off
            # basis change e_i <- e_i + e_j creates a nonzero diagonal entry
            for k in range(n):
                M[i, k] = M[i, k] + M[j, k]
            for k in range(n):
                M[k, i] = M[k, i] + M[k, j]
            continue
        d = M[pivot, pivot]
        if d > 0:
            pos += 1
        else:
            neg += 1
        for k in idx:
            if k == pivot:
                continue
            f = M[pivot, k] / d
            for l in idx:
                if l == pivot:
                    continue
                M[k, l] = M[k, l] - f * M[pivot, l]
            M[k, pivot] = 0
        for k in idx:
            M[pivot, k] = 0
        idx = [k for k in idx if k != pivot]
    return pos, neg, zero


def classify_lie_algebra(nt, brackets) -> tuple[str, dict]:
    """Label among the paper's cases; invariants always reported."""
    derived = _derived_series_dims(nt, brackets)
    K = _killing_matrix(nt, brackets)
    sig = _signature(K)
    inv = {"derived_series": derived, "killing_signature": sig}
    abelian = derived[1] == 0 if len(derived) > 1 else True
    if abelian:
        return f"abelian{nt}", inv
    if nt == 2:
        return "solvable2", inv
    if nt == 3:
        if sig == (0, 3, 0):
            return "so3", inv
        if sig == (2, 1, 0):
            return "sl2", inv
        return "other", inv
    return "other", inv


# ---------------------------------------------------------------------------
# subalgebra obstruction
# ---------------------------------------------------------------------------

def check_subalgebra_obstruction(sub: VessiotData, big: VessiotData) -> Report:
    """Decide whether an algebra of sub's type embeds into 'big'.

    Covers: 1-dimensional subs (always embed); 2-dimensional subs of a
    3-dimensional algebra via the closure quadratic form on the Plucker
    line (definite <=> no 2-dimensional subalgebra at all).
    """
    rep = Report("subalgebra-obstruction")
    if sub.dimension == 1:
        if big.dimension >= 1:
            rep.add(Report.passed("embedding-exists", "every line is a subalgebra"))
            rep.detail = "embedding exists"
        else:
            rep.add(Report.passed("embedding-blocked", "target algebra is zero"))
            rep.detail = "no embedding"
        return rep
    if sub.dimension == 2 and big.dimension == 3:
        Q = _closure_quadratic_form(big)
        sig = _signature(Q)
        rep.add(Report.passed("closure-form-signature", str(sig)))
        definite = sig[2] == 0 and (sig[0] == 0 or sig[1] == 0)
        if definite:
            rep.add(Report.passed(
                "NoSubalgebraOfDim(2)",
                "closure form is definite: no real 2-dimensional subalgebra"))
            rep.detail = "no embedding"
            return rep
        witness = _isotropic_witness(Q)
        if witness is None:
            rep.add(Report.unknown(
                "embedding-exists", "indefinite form but no rational witness found"))
            return rep
        u, v = _plane_basis(witness)
        br = _bracket(3, big.brackets, u, v)
        found = "abelian" if all(normalize(x) == 0 for x in br) else "solvable2"
        want = "abelian" if sub.label.startswith("abelian") else sub.label
        if found == want:
            rep.add(Report.passed(
                "embedding-exists",
                f"2-dimensional subalgebra of type {found} at m = {witness}"))
            rep.detail = "embedding exists"
        else:
            alt = _isotropic_witness(Q, avoid=witness, want_type=want, big=big)
            if alt is not None:
                rep.add(Report.passed(
                    "embedding-exists", f"subalgebra of type {want} at m = {alt}"))
                rep.detail = "embedding exists"
            else:
                rep.add(Report.passed(
                    "embedding-blocked",
                    f"2-dimensional subalgebras exist but have type {found}, "
                    f"not {want}"))
                rep.detail = "no embedding"
        return rep
    raise UnclassifiedAlgebra(
        f"no decision procedure for sub dim {sub.dimension} in big dim "
        f"{big.dimension}")


def _closure_quadratic_form(big: VessiotData) -> sp.Matrix:
    """q(m) = <beta(m), m> where the plane with Plucker coordinates m is
    closed iff q(m) = 0 (dimension 3 only)."""
    # m_k are the coordinates of u ^ v via e_i ^ e_j = eps_ijk m_k
    # beta(m)^a = sum over (i<j) of m's dual: [e_i, e_j] component
    m = sp.symbols("m1 m2 m3")
    # u^v = m_k eps-dual: (i,j) -> (k, sign) with eps_{ijk}
    pairs = {(1, 2): 0, (0, 2): 1, (0, 1): 2}
    signs = {(1, 2): 1, (0, 2): -1, (0, 1): 1}
    beta = [sp.Integer(0)] * 3
    for (i, j), k in pairs.items():
        vec = big.bracket_matrix(i, j)
        for a in range(3):
            beta[a] += signs[(i, j)] * m[k] * vec[a]
    q = sum(beta[a] * m[a] for a in range(3))
    q = sp.expand(q)
    Q = sp.zeros(3, 3)
    for a in range(3):
        for b in range(3):
            Q[a, b] = sp.Rational(1, 2) * (q.diff(m[a]).diff(m[b]))
    return Q


def _isotropic_witness(Q: sp.Matrix, avoid=None, want_type=None, big=None):
    rng = range(-6, 7)
    for m1 in rng:
        for m2 in rng:
            for m3 in rng:
                if m1 == m2 == m3 == 0:
                    continue
                vec = sp.Matrix([m1, m2, m3])
                if (vec.T * Q * vec)[0, 0] == 0:
                    tup = (m1, m2, m3)
                    if avoid is not None and tup == tuple(avoid):
                        continue
                    if want_type is not None and big is not None:
                        u, v = _plane_basis(tup)
                        br = _bracket(3, big.brackets, u, v)
                        found = ("abelian"
                                 if all(normalize(x) == 0 for x in br)
                                 else "solvable2")
                        if found != want_type:
                            continue
                    return tup
    return None


def _plane_basis(m):
    """Two independent vectors spanning the plane with Plucker coords m."""
    m1, m2, m3 = [sp.Integer(x) for x in m]
    n = sp.Matrix([m1, m2, m3])  # normal covector of the plane
    basis = []
    for cand in (sp.Matrix([0, m3, -m2]), sp.Matrix([-m3, 0, m1]),
                 sp.Matrix([m2, -m1, 0]),
                 sp.Matrix([1, 0, 0]), sp.Matrix([0, 1, 0]), sp.Matrix([0, 0, 1])):
        if (n.T * cand)[0, 0] != 0:
            continue
        trial = basis + [list(cand)]
        if sp.Matrix(trial).rank() == len(trial):
            basis.append(list(cand))
        if len(basis) == 2:
            break
    return [ [sp.Integer(x) for x in b] for b in basis ]
