"""Exact scalar arithmetic over a field of rational functions with
transcendental atoms (exp, log, sin, cos, rational powers).

Scalars are sympy expressions built from real-assumed coordinate symbols,
rational constants and the atom functions above.  Every value that crosses a
module boundary is kept in the canonical form produced by :func:`normalize`:
a single gcd-reduced fraction whose numerator and denominator are expanded
polynomials in the coordinates and atoms, with

* products and integer powers of ``exp`` merged into one ``exp`` with an
  expanded argument,
* ``exp(c1*log(a1) + ...)`` rewritten into radicals/powers (real semantics,
  so fractional exponents are only split off positive-provable factors),
* even powers of ``cos`` eliminated via ``cos(u)**2 -> 1 - sin(u)**2``,
* ``sqrt(a)*sqrt(a) -> a`` and friends (sympy auto-evaluation).

Atoms are otherwise treated as algebraically independent, so structural
equality of canonical forms certifies mathematical equality but inequality
proves nothing; :func:`is_zero` therefore backs the syntactic test with
exact/interval sampling and returns a three-valued verdict.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import mpmath
import sympy as sp

Expression = sp.Expr

_ATOM_HEADS = (sp.exp, sp.log, sp.sin, sp.cos)

#: sample points per :func:`is_zero` call before giving up with Unknown.
DEFAULT_SAMPLES = 32

_rng_seed = 20240801


def set_seed(seed: int) -> None:
    """Reseed the sampling fallback used by :func:`is_zero`."""
    global _rng_seed
    _rng_seed = int(seed)


class Verdict(Enum):
    PROVEN_ZERO = "proven-zero"
    PROVEN_NONZERO = "proven-nonzero"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ZeroVerdict:
    """Outcome of a zero test, with a numeric witness when one exists."""

    verdict: Verdict
    witness: Optional[dict] = None

    def __bool__(self) -> bool:  # pragma: no cover - guard against misuse
        raise TypeError("ZeroVerdict is three-valued; test .verdict explicitly")

    @property
    def is_zero(self) -> bool:
        return self.verdict is Verdict.PROVEN_ZERO

    @property
    def is_nonzero(self) -> bool:
        return self.verdict is Verdict.PROVEN_NONZERO

    @property
    def is_unknown(self) -> bool:
        return self.verdict is Verdict.UNKNOWN


@dataclass(frozen=True)
class Atom:
    """A transcendental atom occurring in an expression.

    ``kind`` is one of ``exp``, ``log``, ``sin``, ``cos`` or ``power`` (a
    power with non-integer rational exponent).  Instances are hash-consed
    through :func:`atom_of`.
    """

    kind: str
    argument: sp.Expr
    exponent: Optional[sp.Rational] = None

    def as_sympy(self) -> sp.Expr:
        if self.kind == "power":
            return sp.Pow(self.argument, self.exponent)
        return getattr(sp, self.kind)(self.argument)


_ATOM_TABLE: dict = {}


def atom_of(e: sp.Expr) -> Optional[Atom]:
    """Return the interned Atom for a sympy subexpression, or None."""
    key = e
    hit = _ATOM_TABLE.get(key)
    if hit is not None:
        return hit
    atom = None
    if isinstance(e, (sp.exp, sp.log, sp.sin, sp.cos)):
        name = type(e).__name__
        atom = Atom(name, e.args[0])
    elif isinstance(e, sp.Pow) and isinstance(e.exp, sp.Rational) and not e.exp.is_Integer:
        atom = Atom("power", e.base, e.exp)
    if atom is not None:
        _ATOM_TABLE[key] = atom
    return atom


def atoms_in(e: sp.Expr) -> list[Atom]:
    """All transcendental atoms of ``e`` (outermost first, deterministic)."""
    found = []
    for sub in sp.preorder_traversal(e):
        a = atom_of(sub)
        if a is not None and a not in found:
            found.append(a)
    return found


def symbols_in(e: sp.Expr) -> list[sp.Symbol]:
    return sorted(e.free_symbols, key=lambda s: s.name)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def _rewrite_exp_of_logs(e: sp.Expr) -> sp.Expr:
    """exp(c1*log(a1) + ... + r) -> a1**c1 * ... * exp(r), real semantics.

    Only sound recombinations are performed: after merging the log terms the
    resulting product of rational powers is refactored so that integer
    exponents always split off, while fractional exponents split off only
    factors that are provably positive or have odd root order.
    """

    def fix(ex):
        if not isinstance(ex, sp.exp):
            return ex
        arg = sp.expand(ex.args[0], power_exp=False, power_base=False, log=False)
        terms = sp.Add.make_args(arg)
        powers = []
        rest = []
        for t in terms:
            c, logs = t.as_coeff_Mul()
            if isinstance(logs, sp.log) and isinstance(c, sp.Rational):
                powers.append((logs.args[0], c))
            else:
                rest.append(t)
        if not powers:
            return ex
        prod, leftover = _recombine_powers(powers)
        tail = sp.Add(*(rest + leftover))
        return prod * sp.exp(tail) if tail != 0 else prod

    return e.replace(lambda ex: isinstance(ex, sp.exp), fix)


def _recombine_powers(
    powers: Sequence[tuple[sp.Expr, sp.Rational]],
) -> tuple[sp.Expr, list[sp.Expr]]:
    """Combine prod(base**exp) by factoring bases over the rationals.

    Returns the extractable product and the log terms that must stay inside
    the exponential (fractional exponents on factors of unknown sign with
    even root order; a real power of those is not well defined).
    """
    exponents: dict = {}
    for base, c in powers:
        b = sp.cancel(sp.together(base))
        num, den = b.as_numer_denom()
        bad = False
        for part in (num, den):
            if not part.is_polynomial():
                bad = True
        if bad:
            exponents[base] = exponents.get(base, 0) + c
            continue
        for part, sign in ((num, 1), (den, -1)):
            coeff, factors = sp.factor_list(part)
            exponents[coeff] = exponents.get(coeff, 0) + sign * c
            for f, m in factors:
                exponents[f] = exponents.get(f, 0) + sign * m * c
    out = sp.Integer(1)
    leftover: list[sp.Expr] = []
    for f, exp_ in exponents.items():
        exp_ = sp.nsimplify(exp_)
        if exp_ == 0 or f == 1:
            continue
        if exp_.is_Integer or not exp_.is_Rational:
            out *= f ** exp_
        elif exp_.q % 2 == 1 or _provably_positive(f):
            # odd root order has a unique real root; positive factors are
            # safe for any rational exponent.
            out *= sp.Pow(f, exp_)
        else:
            leftover.append(exp_ * sp.log(f))
    return out, leftover


def _provably_positive(e: sp.Expr) -> bool:
    pos = e.is_positive
    return bool(pos)


def _split_rational_logs(e: sp.Expr) -> sp.Expr:
    """log(p/q) -> sum of prime-factor logs, so rational-log constants
    cancel syntactically in sums."""

    def fix(ex):
        arg = ex.args[0]
        if not (isinstance(arg, sp.Rational) and arg.is_positive and arg != 1):
            return ex
        out = sp.Integer(0)
        for prime, mult in sp.factorint(arg.p).items():
            out += mult * sp.log(sp.Integer(prime))
        for prime, mult in sp.factorint(arg.q).items():
            out -= mult * sp.log(sp.Integer(prime))
        return out

    return e.replace(lambda ex: isinstance(ex, sp.log), fix)


def _reduce_trig(e: sp.Expr) -> sp.Expr:
    """Eliminate cos(u)**2 in favour of sin via polynomial remainder."""
    cos_atoms = sorted({a for a in e.atoms(sp.cos)}, key=sp.default_sort_key)
    if not cos_atoms:
        return e
    num, den = sp.fraction(sp.cancel(e))
    changed = False
    for c in cos_atoms:
        u = c.args[0]
        rel = sp.sin(u) ** 2 + c ** 2 - 1
        new = []
        for p in (num, den):
            try:
                if p.has(c) and sp.degree(sp.Poly(p, c)) >= 2:
                    p = sp.rem(sp.expand(p), rel, c)
                    changed = True
            except sp.PolynomialError:
                pass
            new.append(p)
        num, den = new
    if not changed:
        return e
    return sp.cancel(num / den)


_NORMAL_CACHE: dict = {}
_NORMAL_FORMS: set = set()


def normalize(e: Expression) -> Expression:
    """Canonical form: see module docstring.  Idempotent."""
    e = sp.sympify(e)
    if e.is_Rational:
        return e
    if e in _NORMAL_FORMS:
        return e
    hit = _NORMAL_CACHE.get(e)
    if hit is not None:
        return hit
    out = _normalize_uncached(e)
    if len(_NORMAL_CACHE) < 400000:
        _NORMAL_CACHE[e] = out
        _NORMAL_FORMS.add(out)
    return out


def _normalize_uncached(e: Expression) -> Expression:
    e = sp.powsimp(e, deep=True, combine="exp")
    if e.has(sp.exp) and e.has(sp.log):
        e = _rewrite_exp_of_logs(e)
        e = sp.powsimp(e, deep=True, combine="exp")
    if e.has(sp.log):
        e = _split_rational_logs(e)
    e = sp.cancel(sp.together(e))
    if e.has(sp.cos):
        e = _reduce_trig(e)
    num, den = e.as_numer_denom()
    num = sp.expand(num, power_exp=False, power_base=False, log=False)
    den = sp.expand(den, power_exp=False, power_base=False, log=False)
    if den == 1:
        return num
    return num / den


def differentiate(e: Expression, v: sp.Symbol) -> Expression:
    """Exact partial derivative (chain rule through atoms), normalized."""
    return normalize(sp.diff(sp.sympify(e), v))


# ---------------------------------------------------------------------------
# zero testing
# ---------------------------------------------------------------------------

def _lcg(seed: int):
    state = seed & 0xFFFFFFFF
    while True:
        state = (1103515245 * state + 12345) & 0x7FFFFFFF
        yield state


def _sample_values(symbols: Sequence[sp.Symbol], gen) -> dict:
    vals = {}
    for s in symbols:
        n = next(gen) % 97 + 1
        d = next(gen) % 23 + 1
        sign = -1 if (next(gen) % 2 and not s.is_positive and not s.is_nonnegative) else 1
        if s.is_negative:
            sign = -1
        vals[s] = sp.Rational(sign * n, d)
    return vals


class _IntervalEval:
    """Interval evaluation via mpmath.iv; raises ValueError outside domains."""

    def __init__(self, subs: dict):
        self.subs = subs
        self.iv = mpmath.iv

    def _rat(self, p: int, q: int):
        return self.iv.mpf(int(p)) / self.iv.mpf(int(q))

    def __call__(self, e: sp.Expr):
        iv = self.iv
        if e.is_Rational:
            return self._rat(e.p, e.q)
        if e.is_Symbol:
            v = self.subs[e]
            return self._rat(v.p, v.q)
        if isinstance(e, sp.Add):
            return sum((self(a) for a in e.args), iv.mpf(0))
        if isinstance(e, sp.Mul):
            out = iv.mpf(1)
            for a in e.args:
                out *= self(a)
            return out
        if isinstance(e, sp.Pow):
            base = self(e.base)
            if e.exp.is_Integer:
                k = int(e.exp)
                if k < 0 and 0 in base:
                    raise ValueError("division by interval containing 0")
                return base ** k
            if isinstance(e.exp, sp.Rational):
                ex = self._rat(e.exp.p, e.exp.q)
                if base < 0 and e.exp.q % 2 == 1:
                    neg = -base
                    root = iv.exp(ex * iv.log(neg))
                    return -root if e.exp.p % 2 == 1 else root
                if not (base > 0):
                    raise ValueError("radicand not provably positive")
                return iv.exp(ex * iv.log(base))
            ex = self(e.exp)
            if not (base > 0):
                raise ValueError("power base not positive")
            return iv.exp(ex * iv.log(base))
        if isinstance(e, sp.exp):
            return iv.exp(self(e.args[0]))
        if isinstance(e, sp.log):
            a = self(e.args[0])
            if not (a > 0):
                raise ValueError("log argument not provably positive")
            return iv.log(a)
        if isinstance(e, sp.sin):
            return iv.sin(self(e.args[0]))
        if isinstance(e, sp.cos):
            return iv.cos(self(e.args[0]))
        raise ValueError(f"unsupported node {type(e).__name__}")


def _certify_nonzero_at(e: sp.Expr, subs: dict) -> bool:
    free = e.free_symbols
    point = {s: subs[s] for s in free}
    plugged = e.subs(point, simultaneous=True)
    if plugged.is_Rational:
        return plugged != 0
    with mpmath.workprec(120):
        try:
            val = _IntervalEval(point)(e)
        except (ValueError, ZeroDivisionError, OverflowError):
            return False
        return not (0 in val)


_ZERO_CACHE: dict = {}


def is_zero(e: Expression, samples: int = DEFAULT_SAMPLES) -> ZeroVerdict:
    """Sound three-valued zero test.

    PROVEN_ZERO only when the canonical form is literally 0; PROVEN_NONZERO
    only with a rational sample point where an exact or interval evaluation
    excludes zero and every atom is defined.
    """
    e = normalize(e)
    cached = _ZERO_CACHE.get(e)
    if cached is not None:
        return cached
    out = _is_zero_uncached(e, samples)
    if out.verdict is not Verdict.UNKNOWN and len(_ZERO_CACHE) < 400000:
        _ZERO_CACHE[e] = out
    return out


def _is_zero_uncached(e: Expression, samples: int) -> ZeroVerdict:
    if e == 0:
        return ZeroVerdict(Verdict.PROVEN_ZERO)
    if e.is_Rational or (e.is_number and e.is_nonzero):
        return ZeroVerdict(Verdict.PROVEN_NONZERO, witness={})
    syms = symbols_in(e)
    gen = _lcg(_rng_seed)
    for _ in range(samples):
        subs = _sample_values(syms, gen)
        if _certify_nonzero_at(e, subs):
            return ZeroVerdict(
                Verdict.PROVEN_NONZERO,
                witness={str(s): str(v) for s, v in subs.items()},
            )
    return ZeroVerdict(Verdict.UNKNOWN)


# ---------------------------------------------------------------------------
# surface syntax
# ---------------------------------------------------------------------------

_FUNCTIONS: dict[str, Callable] = {
    "exp": sp.exp,
    "log": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "sqrt": sp.sqrt,
}


class ParseError(ValueError):
    pass


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.toks: list[tuple[str, str]] = []
        self._scan()
        self.i = 0

    def _scan(self):
        t, i = self.text, 0
        while i < len(t):
            c = t[i]
            if c.isspace():
                i += 1
                continue
            if c.isdigit():
                j = i
                while j < len(t) and t[j].isdigit():
                    j += 1
                self.toks.append(("int", t[i:j]))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < len(t) and (t[j].isalnum() or t[j] == "_"):
                    j += 1
                self.toks.append(("name", t[i:j]))
                i = j
                continue
            if c in "+-*/^(),":
                self.toks.append((c, c))
                i += 1
                continue
            raise ParseError(f"unexpected character {c!r} at column {i}")

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("end", "")

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}")
        return tok


def parse_expression(text: str, symbols: dict[str, sp.Symbol]) -> Expression:
    """Parse infix surface syntax (operators + - * / ^, atoms exp/log/sin/
    cos/sqrt, rational literals ``p/q``) into a normalized expression.

    ``symbols`` maps names to declared indeterminates; unknown names are an
    error so fixtures cannot silently invent coordinates.
    """

    toks = _Tokens(text)

    def parse_sum():
        node = parse_term()
        while toks.peek()[0] in "+-":
            op = toks.next()[0]
            rhs = parse_term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def parse_term():
        node = parse_factor()
        while toks.peek()[0] in "*/":
            op = toks.next()[0]
            rhs = parse_factor()
            node = node * rhs if op == "*" else node / rhs
        return node

    def parse_factor():
        tok = toks.peek()
        if tok[0] == "-":
            toks.next()
            return -parse_factor()
        if tok[0] == "+":
            toks.next()
            return parse_factor()
        return parse_power()

    def parse_power():
        base = parse_atom()
        if toks.peek()[0] == "^":
            toks.next()
            expo = parse_factor()
            return base ** expo
        return base

    def parse_atom():
        kind, text_ = toks.next()
        if kind == "int":
            return sp.Integer(int(text_))
        if kind == "(":
            node = parse_sum()
            toks.expect(")")
            return node
        if kind == "name":
            if toks.peek()[0] == "(":
                fn = _FUNCTIONS.get(text_)
                if fn is None:
                    raise ParseError(f"unknown function {text_!r}")
                toks.next()
                arg = parse_sum()
                toks.expect(")")
                return fn(arg)
            sym = symbols.get(text_)
            if sym is None:
                raise ParseError(f"unknown symbol {text_!r}")
            return sym
        raise ParseError(f"unexpected token {text_!r}")

    node = parse_sum()
    if toks.peek()[0] != "end":
        raise ParseError(f"trailing input at {toks.peek()[1]!r}")
    return normalize(node)


class _SurfacePrinter(sp.printing.str.StrPrinter):
    def _print_Pow(self, expr, rational=False):
        if expr.exp is sp.S.Half:
            return f"sqrt({self._print(expr.base)})"
        if expr.exp == -sp.S.Half:
            return f"1/sqrt({self._print(expr.base)})"
        b = self.parenthesize(expr.base, 25)
        e = self.parenthesize(expr.exp, 25)
        return f"{b}^{e}"

    def _print_exp(self, expr):
        return f"exp({self._print(expr.args[0])})"


def print_expression(e: Expression) -> str:
    """Inverse of :func:`parse_expression` up to normalization."""
    return _SurfacePrinter().doprint(sp.sympify(e))
