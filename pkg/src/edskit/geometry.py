"""Coordinate charts, differential forms, vector fields and smooth maps.

Forms are stored in the coordinate coframe only: a degree-p form is a map
from strictly increasing coordinate-index tuples to normalized expression
coefficients (zero coefficients absent).  All operations are pure; values
are treated as immutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import sympy as sp

from . import linalg
from .expr import Verdict, differentiate, is_zero, normalize, print_expression
from .report import CheckError, Report


class ChartMismatch(CheckError):
    def __init__(self, what: str):
        super().__init__("ChartMismatch", what)


class NotProjectable(CheckError):
    def __init__(self, what: str):
        super().__init__("NotProjectable", what)


@dataclass(frozen=True)
class Chart:
    """An ordered coordinate chart with positivity/sign assumptions.

    ``signs`` maps coordinate names to one of ``positive`` / ``negative``;
    unlisted coordinates are plain real.  The sign enters the sympy symbol
    assumptions, so downstream radical and log rewrites stay sound.
    """

    name: str
    coordinates: tuple[sp.Symbol, ...]
    assumptions: tuple[str, ...] = ()

    @staticmethod
    def make(name: str, coords: Sequence[str], signs: Optional[Mapping[str, str]] = None,
             assumptions: Sequence[str] = ()) -> "Chart":
        signs = dict(signs or {})
        if len(set(coords)) != len(coords):
            raise CheckError("BadChart", f"duplicate coordinate in {coords}")
        syms = []
        for c in coords:
            kw = {"real": True}
            if signs.get(c) == "positive":
                kw["positive"] = True
            elif signs.get(c) == "negative":
                kw["negative"] = True
            syms.append(sp.Symbol(c, **kw))
        return Chart(name, tuple(syms), tuple(assumptions))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def symbol_map(self) -> dict[str, sp.Symbol]:
        return {s.name: s for s in self.coordinates}

    def index_of(self, sym: sp.Symbol) -> int:
        return self.coordinates.index(sym)

    def extended(self, name: str, extra: Sequence[str],
                 signs: Optional[Mapping[str, str]] = None) -> "Chart":
        """A new chart with additional trailing coordinates (fiber adjoin)."""
        base_names = [s.name for s in self.coordinates]
        ext = Chart.make(name, base_names + list(extra), signs)
        # reuse the original symbols so expressions carry over unchanged
        merged = list(self.coordinates) + list(ext.coordinates[self.dimension:])
        return Chart(name, tuple(merged), self.assumptions)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Chart({self.name}, dim={self.dimension})"


@dataclass(frozen=True)
class DifferentialForm:
    chart: Chart
    degree: int
    coeffs: Mapping[tuple[int, ...], sp.Expr]

    @staticmethod
    def make(chart: Chart, degree: int,
             coeffs: Mapping[tuple[int, ...], sp.Expr]) -> "DifferentialForm":
        clean: dict[tuple[int, ...], sp.Expr] = {}
        for idx, val in coeffs.items():
            idx = tuple(idx)
            if len(idx) != degree or len(set(idx)) != len(idx):
                raise CheckError("BadForm", f"bad index tuple {idx} for degree {degree}")
            perm_sorted = tuple(sorted(idx))
            sign = _perm_sign(idx)
            v = normalize(sign * val)
            if perm_sorted in clean:
                v = normalize(clean[perm_sorted] + v)
            clean[perm_sorted] = v
        clean = {k: v for k, v in clean.items() if v != 0}
        if degree > chart.dimension:
            clean = {}
        return DifferentialForm(chart, degree, clean)

    @staticmethod
    def zero(chart: Chart, degree: int = 1) -> "DifferentialForm":
        return DifferentialForm(chart, degree, {})

    @staticmethod
    def function(chart: Chart, value) -> "DifferentialForm":
        v = normalize(value)
        return DifferentialForm(chart, 0, {(): v} if v != 0 else {})

    def is_zero_form(self) -> bool:
        return not self.coeffs

    def coefficient(self, idx: Sequence[int]) -> sp.Expr:
        idx = tuple(idx)
        sign = _perm_sign(idx)
        return normalize(sign * self.coeffs.get(tuple(sorted(idx)), sp.Integer(0)))

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        self._check(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = normalize(out.get(k, sp.Integer(0)) + v)
        return DifferentialForm(self.chart, self.degree,
                                {k: v for k, v in out.items() if v != 0})

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + (-other)

    def __neg__(self) -> "DifferentialForm":
        return self.scale(-1)

    def scale(self, factor) -> "DifferentialForm":
        f = normalize(factor)
        if f == 0:
            return DifferentialForm(self.chart, self.degree, {})
        return DifferentialForm(
            self.chart, self.degree,
            {k: normalize(f * v) for k, v in self.coeffs.items()},
        )

    def _check(self, other: "DifferentialForm"):
        if self.chart is not other.chart:
            raise ChartMismatch(
                f"forms live on {self.chart.name} and {other.chart.name}"
            )
        if self.degree != other.degree:
            raise CheckError("DegreeMismatch", "cannot add forms of different degree")

    def __repr__(self) -> str:  # pragma: no cover
        return f"Form({print_form(self)})"


def _perm_sign(idx: Sequence[int]) -> int:
    sign = 1
    idx = list(idx)
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign


def d_coordinate(chart: Chart, name_or_index) -> DifferentialForm:
    """The coordinate differential dx_i."""
    if isinstance(name_or_index, str):
        i = [s.name for s in chart.coordinates].index(name_or_index)
    elif isinstance(name_or_index, sp.Symbol):
        i = chart.index_of(name_or_index)
    else:
        i = int(name_or_index)
    return DifferentialForm.make(chart, 1, {(i,): sp.Integer(1)})


def one_form(chart: Chart, components) -> DifferentialForm:
    """A 1-form from a dense component list or an {index: coeff} mapping."""
    if isinstance(components, Mapping):
        coeffs = {}
        for k, c in components.items():
            i = chart.index_of(k) if isinstance(k, sp.Symbol) else int(k)
            coeffs[(i,)] = c
        return DifferentialForm.make(chart, 1, coeffs)
    return DifferentialForm.make(
        chart, 1, {(i,): c for i, c in enumerate(components)}
    )


def form_components(a: DifferentialForm) -> list[sp.Expr]:
    """Dense coefficient vector of a 1-form."""
    if a.degree != 1:
        raise CheckError("DegreeMismatch", "component vector requires a 1-form")
    return [a.coeffs.get((i,), sp.Integer(0)) for i in range(a.chart.dimension)]


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    if a.chart is not b.chart:
        raise ChartMismatch("wedge of forms on different charts")
    out: dict[tuple[int, ...], sp.Expr] = {}
    deg = a.degree + b.degree
    for ia, va in a.coeffs.items():
        for ib, vb in b.coeffs.items():
            if set(ia) & set(ib):
                continue
            idx = ia + ib
            key = tuple(sorted(idx))
            val = normalize(_perm_sign(idx) * va * vb)
            out[key] = normalize(out.get(key, sp.Integer(0)) + val)
    return DifferentialForm(a.chart, deg, {k: v for k, v in out.items() if v != 0})


def wedge_all(forms: Sequence[DifferentialForm]) -> DifferentialForm:
    it = iter(forms)
    first = next(it)
    out = first
    for f in it:
        out = wedge(out, f)
    return out


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    chart = a.chart
    out: dict[tuple[int, ...], sp.Expr] = {}
    for idx, val in a.coeffs.items():
        for i, x in enumerate(chart.coordinates):
            if i in idx:
                continue
            dv = differentiate(val, x)
            if dv == 0:
                continue
            key = tuple(sorted((i,) + idx))
            sign = _perm_sign((i,) + idx)
            out[key] = normalize(out.get(key, sp.Integer(0)) + sign * dv)
    return DifferentialForm(chart, a.degree + 1,
                            {k: v for k, v in out.items() if v != 0})


def differential(chart: Chart, f) -> DifferentialForm:
    """df for a scalar function f on the chart."""
    return exterior_derivative(DifferentialForm.function(chart, f))


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple[sp.Expr, ...]

    @staticmethod
    def make(chart: Chart, comps: Mapping | Sequence) -> "VectorField":
        if isinstance(comps, Mapping):
            dense = [sp.Integer(0)] * chart.dimension
            for k, v in comps.items():
                i = chart.index_of(k) if isinstance(k, sp.Symbol) else int(k)
                dense[i] = normalize(v)
        else:
            dense = [normalize(v) for v in comps]
            if len(dense) != chart.dimension:
                raise CheckError("BadField", "component count != dimension")
        return VectorField(chart, tuple(dense))

    def apply(self, f) -> sp.Expr:
        """Directional derivative X(f)."""
        out = sp.Integer(0)
        for c, x in zip(self.components, self.chart.coordinates):
            if c != 0:
                out += c * sp.diff(sp.sympify(f), x)
        return normalize(out)

    def bracket(self, other: "VectorField") -> "VectorField":
        if self.chart is not other.chart:
            raise ChartMismatch("bracket of fields on different charts")
        comps = []
        for i, x in enumerate(self.chart.coordinates):
            comps.append(normalize(self.apply(other.components[i])
                                   - other.apply(self.components[i])))
        return VectorField(self.chart, tuple(comps))

    def __repr__(self) -> str:  # pragma: no cover
        parts = [
            f"({print_expression(c)})*D({x.name})"
            for c, x in zip(self.components, self.chart.coordinates)
            if c != 0
        ]
        return "Field(" + (" + ".join(parts) or "0") + ")"


def interior_product(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    if X.chart is not a.chart:
        raise ChartMismatch("interior product across charts")
    if a.degree == 0:
        return DifferentialForm.zero(a.chart, 0)
    out: dict[tuple[int, ...], sp.Expr] = {}
    for idx, val in a.coeffs.items():
        for pos, i in enumerate(idx):
            xi = X.components[i]
            if xi == 0:
                continue
            rest = idx[:pos] + idx[pos + 1:]
            sign = (-1) ** pos
            out[rest] = normalize(out.get(rest, sp.Integer(0)) + sign * xi * val)
    return DifferentialForm(a.chart, a.degree - 1,
                            {k: v for k, v in out.items() if v != 0})


def lie_derivative(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    """Cartan formula L_X = X .| d + d (X .| .)."""
    return interior_product(X, exterior_derivative(a)) + exterior_derivative(
        interior_product(X, a)
    )


def evaluate(a: DifferentialForm, *fields: VectorField) -> sp.Expr:
    """Full contraction of a degree-p form with p vector fields."""
    out = a
    for X in reversed(fields):
        out = interior_product(X, out)
    if out.degree != 0:
        raise CheckError("DegreeMismatch", "wrong number of fields in evaluation")
    return out.coeffs.get((), sp.Integer(0))


@dataclass(frozen=True)
class SmoothMap:
    """A map between charts given by one source-expression per target
    coordinate."""

    source: Chart
    target: Chart
    formulas: tuple[sp.Expr, ...]

    @staticmethod
    def make(source: Chart, target: Chart,
             formulas: Mapping | Sequence) -> "SmoothMap":
        if isinstance(formulas, Mapping):
            dense = []
            by_name = {
                (k.name if isinstance(k, sp.Symbol) else str(k)): v
                for k, v in formulas.items()
            }
            for t in target.coordinates:
                if t.name not in by_name:
                    raise CheckError("BadMap", f"no formula for target {t.name}")
                dense.append(normalize(by_name[t.name]))
        else:
            dense = [normalize(v) for v in formulas]
        if len(dense) != target.dimension:
            raise CheckError("BadMap", "formula count != target dimension")
        allowed = set(source.coordinates)
        for f in dense:
            extra = f.free_symbols - allowed
            if extra:
                raise CheckError(
                    "BadMap", f"formula {f} uses non-source symbols {extra}"
                )
        return SmoothMap(source, target, tuple(dense))

    @staticmethod
    def identity(chart: Chart) -> "SmoothMap":
        return SmoothMap(chart, chart, tuple(chart.coordinates))

    def substitution(self) -> dict[sp.Symbol, sp.Expr]:
        return dict(zip(self.target.coordinates, self.formulas))

    def pull_scalar(self, f) -> sp.Expr:
        return normalize(sp.sympify(f).subs(self.substitution(), simultaneous=True))

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """self o inner (inner applied first)."""
        if inner.target is not self.source:
            raise ChartMismatch("composition chart mismatch")
        return SmoothMap(
            inner.source, self.target,
            tuple(inner.pull_scalar(f) for f in self.formulas),
        )

    def jacobian(self) -> list[list[sp.Expr]]:
        return [
            [differentiate(f, x) for x in self.source.coordinates]
            for f in self.formulas
        ]

    def is_submersion(self) -> tuple[bool, list[str]]:
        r, assume = linalg.rank(self.jacobian())
        return r == self.target.dimension, assume

    def vertical_fields(self) -> tuple[list[VectorField], list[str]]:
        """Basis of ker(p_*): vector fields annihilating every pullback."""
        basis, assume = linalg.kernel(self.jacobian())
        return [VectorField.make(self.source, v) for v in basis], assume


def pullback(phi: SmoothMap, a: DifferentialForm) -> DifferentialForm:
    if a.chart is not phi.target:
        raise ChartMismatch("form does not live on the map's target")
    subs = phi.substitution()
    diffs = [
        one_form(phi.source, [differentiate(f, x) for x in phi.source.coordinates])
        for f in phi.formulas
    ]
    if a.degree == 0:
        return DifferentialForm.function(phi.source, a.coeffs.get((), sp.Integer(0))
                                         .subs(subs, simultaneous=True))
    out = DifferentialForm.zero(phi.source, a.degree)
    for idx, val in a.coeffs.items():
        coeff = normalize(sp.sympify(val).subs(subs, simultaneous=True))
        if coeff == 0:
            continue
        block = wedge_all([diffs[i] for i in idx])
        out = out + block.scale(coeff)
    return out


def pushforward_along_map(
    phi: SmoothMap, X: VectorField, section: Optional[SmoothMap] = None
) -> VectorField:
    """The unique Y with Y(g) o phi = X(g o phi), if X is projectable.

    Projectability is certified either through a supplied section (compose
    with it and re-verify) or by checking that each X(g o phi) is constant on
    fibers, i.e. annihilated by every vertical field.
    """
    if X.chart is not phi.source:
        raise ChartMismatch("field does not live on the map's source")
    applied = [X.apply(f) for f in phi.formulas]
    verticals, _ = phi.vertical_fields()
    for V in verticals:
        for g in applied:
            v = is_zero(V.apply(g))
            if v.verdict is Verdict.PROVEN_NONZERO:
                raise NotProjectable(
                    f"vertical derivative of {print_expression(g)} is nonzero"
                )
            if v.verdict is Verdict.UNKNOWN:
                raise NotProjectable(
                    f"cannot certify fiber-constancy of {print_expression(g)}"
                )
    if section is not None:
        if section.source is not phi.target or section.target is not phi.source:
            raise ChartMismatch("section must map target -> source")
        comps = [section.pull_scalar(g) for g in applied]
        return VectorField.make(phi.target, comps)
    # express the fiberwise-constant functions downstairs by solving the
    # substitution system q^k = z_k for a fiber-transverse coordinate set
    sec = build_section(phi)
    comps = [sec.pull_scalar(g) for g in applied]
    return VectorField.make(phi.target, comps)


class SectionError(CheckError):
    def __init__(self, what: str):
        super().__init__("SectionError", what)


def build_section(phi: SmoothMap, freeze: Optional[Sequence[str]] = None) -> SmoothMap:
    """Construct a local right inverse of a submersion by freezing a fiber
    coordinate set at generic rational values and solving for the rest.

    The result is verified: phi o section must be the identity on the target
    (ProvenZero residuals), otherwise SectionError is raised.
    """
    src, tgt = phi.source, phi.target
    m, n = tgt.dimension, src.dimension
    fiber_dim = n - m
    candidates: list[Sequence[str]]
    if freeze is not None:
        candidates = [list(freeze)]
    else:
        jac = phi.jacobian()
        # prefer freezing coordinates whose Jacobian column looks dependent
        names = [s.name for s in src.coordinates]
        candidates = []
        for combo in itertools.combinations(range(n), fiber_dim):
            candidates.append([names[i] for i in combo])
            if len(candidates) >= 40:
                break
    by_name = {s.name: s for s in src.coordinates}
    jac = phi.jacobian()
    for combo in candidates:
        keep = [i for i, s in enumerate(src.coordinates) if s.name not in combo]
        sub = [[row[i] for i in keep] for row in jac]
        try:
            r, _ = linalg.rank(sub)
        except linalg.PivotUndecidable:
            continue
        if r != m:
            continue
        frozen = {by_name[c]: _generic_value(by_name[c]) for c in combo}
        unknowns = [s for s in src.coordinates if s.name not in combo]
        # target coordinates may shadow source symbols of the same name, so
        # solve against placeholders and rename afterwards
        placeholders = [sp.Dummy(f"z{k}", real=True) for k in range(m)]
        eqs = [
            sp.Eq(f.subs(frozen, simultaneous=True), z)
            for z, f in zip(placeholders, phi.formulas)
        ]
        try:
            sols = sp.solve(eqs, unknowns, dict=True)
        except Exception:
            sols = []
        rename = dict(zip(placeholders, tgt.coordinates))
        for sol in sols:
            if set(sol) != set(unknowns):
                continue
            comps = []
            for s in src.coordinates:
                if s.name in combo:
                    comps.append(frozen[s])
                else:
                    comps.append(sp.sympify(sol[s]).subs(rename, simultaneous=True))
            try:
                candidate = SmoothMap.make(tgt, src, comps)
            except CheckError:
                continue
            if _verify_section(phi, candidate):
                return candidate
    raise SectionError(f"no computable section of {src.name} -> {tgt.name}")


def _generic_value(sym: sp.Symbol) -> sp.Rational:
    if sym.is_negative:
        return sp.Rational(-5, 3)
    return sp.Rational(5, 3) if sym.is_positive else sp.Rational(3, 7)


def _verify_section(phi: SmoothMap, sec: SmoothMap) -> bool:
    comp = [sec.pull_scalar(f) for f in phi.formulas]
    for got, want in zip(comp, phi.target.coordinates):
        if not is_zero(got - want).is_zero:
            return False
    return True


@dataclass(frozen=True)
class Coframe:
    """An ordered pointwise-independent family of 1-forms spanning T*M.

    ``roles`` optionally labels each member (theta / eta-hat / eta-check /
    sigma-hat / sigma-check / tau); role order follows the form order.
    """

    chart: Chart
    forms: tuple[DifferentialForm, ...]
    roles: tuple[str, ...] = ()
    assumptions: tuple[str, ...] = ()

    @staticmethod
    def make(chart: Chart, forms: Sequence[DifferentialForm],
             roles: Sequence[str] = ()) -> "Coframe":
        if len(forms) != chart.dimension:
            raise CheckError("BadCoframe", "coframe size != chart dimension")
        mat = [form_components(f) for f in forms]
        r, assume = linalg.rank(mat)
        if r != chart.dimension:
            raise CheckError("BadCoframe", "coframe forms are dependent")
        return Coframe(chart, tuple(forms), tuple(roles), tuple(assume))

    def with_roles(self, roles: Sequence[str]) -> "Coframe":
        return Coframe(self.chart, self.forms, tuple(roles), self.assumptions)

    def by_role(self, *wanted: str) -> list[DifferentialForm]:
        return [f for f, r in zip(self.forms, self.roles) if r in wanted]

    def dual_frame(self) -> list[VectorField]:
        """Vector fields E_j with cf_i(E_j) = delta_ij (cached)."""
        cached = getattr(self, "_dual", None)
        if cached is not None:
            return cached
        n = self.chart.dimension
        mat = [form_components(f) for f in self.forms]
        aug = [row + [sp.Integer(1 if i == j else 0) for j in range(n)]
               for i, row in enumerate(mat)]
        ech = linalg.echelon(aug)
        if ech.pivots != list(range(n)):
            raise CheckError("BadCoframe", "coframe matrix is not invertible")
        inv_rows = [row[n:] for row in ech.rows]
        # rows of A^{-1}: E_j has components (A^{-1})_{ij} over i
        fields = [VectorField.make(self.chart, [inv_rows[i][j] for i in range(n)])
                  for j in range(n)]
        object.__setattr__(self, "_dual", fields)
        return fields

    def expand_one_form(self, alpha: DifferentialForm) -> list[sp.Expr]:
        dual = self.dual_frame()
        return [evaluate(alpha, E) for E in dual]

    def expand_two_form(self, omega: DifferentialForm) -> dict[tuple[int, int], sp.Expr]:
        """Coefficients of a 2-form in the basis {cf_i ^ cf_j : i < j}."""
        n = self.chart.dimension
        dual = self.dual_frame()
        out: dict[tuple[int, int], sp.Expr] = {}
        for i in range(n):
            ei = interior_product(dual[i], omega)
            if not ei.coeffs:
                continue
            for j in range(i + 1, n):
                v = evaluate(ei, dual[j])
                if v != 0:
                    out[(i, j)] = v
        return out


def print_form(a: DifferentialForm) -> str:
    if not a.coeffs:
        return "0"
    names = [s.name for s in a.chart.coordinates]
    parts = []
    for idx, val in sorted(a.coeffs.items()):
        basis = "^".join(f"d({names[i]})" for i in idx) or "1"
        coeff = print_expression(val)
        if coeff == "1" and idx:
            parts.append(basis)
        elif coeff == "-1" and idx:
            parts.append(f"-{basis}")
        else:
            wrapped = f"({coeff})" if ("+" in coeff or "-" in coeff[1:]) else coeff
            parts.append(f"{wrapped}*{basis}" if idx else wrapped)
    out = " + ".join(parts)
    return out.replace("+ -", "- ")
