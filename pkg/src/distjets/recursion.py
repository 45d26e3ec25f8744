"""Symbolic polynomial tensors built from jets of the second fundamental form.

A term is a small tensor network: a product of factors (covariant derivatives
of the second fundamental form ``B`` and Kronecker deltas) whose slots are
either bonded pairwise or mapped to free positions.  Free positions are the
tangent arguments ``i0 .. i(s-1)`` and the ambient labels ``j0 .. j(k-s-1)``.

Slot layout of ``BJET(a)``, i.e. the a-th covariant derivative of ``B``::

    [d0, ..., d(a-1), b0, b1, label]

Derivative slots are distinguishable (never commuted), the two base slots are
symmetric, and the label is an ambient index.  A bare ``B`` label is always
normal, so bonding it to a tangent slot kills the term.

All coefficients are exact ``Fraction`` values.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Iterator, Mapping

__all__ = [
    "TensorFactor",
    "Term",
    "PolyTensor",
    "RecursionTable",
    "ScalarExpression",
    "canonicalize",
    "formal_derivative",
    "base_table",
    "extend",
    "build_table",
    "leading_term",
    "chain_power_p_k2",
    "merge_labels",
    "permute_labels",
    "squared_norm_expr",
    "max_derivative_order",
]

# slot classes; derivative slot q has class q
_BASE = 100
_LABEL = 200
_DELTA = 300


@dataclass(frozen=True, order=True)
class TensorFactor:
    """One factor of a term: ``BJET(order)`` or the Kronecker delta."""

    kind: str  # "B" or "delta"
    order: int = 0

    def __post_init__(self):
        if self.kind not in ("B", "delta"):
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "delta" and self.order != 0:
            raise ValueError("delta carries no derivative order")

    @property
    def n_slots(self) -> int:
        return 2 if self.kind == "delta" else self.order + 3

    @property
    def label_slot(self) -> int | None:
        return None if self.kind == "delta" else self.order + 2

    def slot_class(self, slot: int) -> int:
        if self.kind == "delta":
            return _DELTA
        if slot < self.order:
            return slot
        return _BASE if slot < self.order + 2 else _LABEL

    def is_tangent_slot(self, slot: int) -> bool:
        return self.kind == "delta" or slot != self.order + 2


# Link targets: ("i", p), ("j", p) for free positions, ("s", factor, slot) for bonds.
Target = tuple


@dataclass(frozen=True)
class Term:
    coefficient: Fraction
    factors: tuple[TensorFactor, ...]
    links: tuple[tuple[Target, ...], ...]

    @property
    def structure(self) -> tuple:
        return (self.factors, self.links)

    def max_order(self) -> int:
        return max((f.order for f in self.factors if f.kind == "B"), default=-1)

    def free_targets(self) -> list[Target]:
        return [t for row in self.links for t in row if t[0] != "s"]


# ---------------------------------------------------------------------------
# canonical form
# ---------------------------------------------------------------------------

def _contract_deltas(factors: list, links: list) -> tuple[list, list]:
    """Eliminate Kronecker factors that are bonded on at least one side."""
    factors = list(factors)
    links = [list(row) for row in links]
    while True:
        idx = None
        for f, fac in enumerate(factors):
            if fac.kind == "delta" and any(t[0] == "s" for t in links[f]):
                idx = f
                break
        if idx is None:
            break
        a, b = links[idx]
        if a[0] == "s" and a[1] == idx:
            raise ValueError("closed delta loop (trace of the metric) is not representable")
        if a[0] == "s" and b[0] == "s":
            links[a[1]][a[2]] = b
            links[b[1]][b[2]] = a
        elif a[0] == "s":
            links[a[1]][a[2]] = b
        else:
            links[b[1]][b[2]] = a
        factors.pop(idx)
        links.pop(idx)
        for row in links:
            for q, t in enumerate(row):
                if t[0] == "s" and t[1] > idx:
                    row[q] = ("s", t[1] - 1, t[2])
    return factors, links


def _annihilated(factors, links) -> bool:
    for f, fac in enumerate(factors):
        if fac.kind != "B" or fac.order != 0:
            continue
        t = links[f][fac.label_slot]
        if t[0] == "i":
            return True
        if t[0] == "s" and factors[t[1]].is_tangent_slot(t[2]):
            return True
    return False


def _slot_groups(fac: TensorFactor) -> list[list[int]]:
    if fac.kind == "delta":
        return [[0, 1]]
    a = fac.order
    return [[q] for q in range(a)] + [[a, a + 1], [a + 2]]


def _free_desc(t: Target) -> tuple:
    return (0, t[1]) if t[0] == "i" else (1, t[1])


def _refine_colors(factors, links) -> list[int]:
    def rank(keys):
        table = {k: r for r, k in enumerate(sorted(set(keys)))}
        return [table[k] for k in keys]

    def describe(f, colors):
        fac = factors[f]
        out = []
        for group in _slot_groups(fac):
            descs = []
            for slot in group:
                t = links[f][slot]
                if t[0] == "s":
                    other = factors[t[1]]
                    descs.append((2, colors[t[1]] if colors else (other.kind, other.order),
                                  other.slot_class(t[2])))
                else:
                    descs.append(_free_desc(t))
            out.append(tuple(sorted(descs)))
        return (fac.kind, fac.order, tuple(out))

    colors = rank([describe(f, None) for f in range(len(factors))])
    while True:
        new = rank([(colors[f], describe(f, colors)) for f in range(len(factors))])
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def _encode(factors, links, order) -> tuple:
    pos = {f: p for p, f in enumerate(order)}
    enc = []
    for f in order:
        fac = factors[f]
        groups = []
        for group in _slot_groups(fac):
            descs = []
            for slot in group:
                t = links[f][slot]
                if t[0] == "s":
                    descs.append((2, pos[t[1]], factors[t[1]].slot_class(t[2])))
                else:
                    descs.append(_free_desc(t))
            groups.append(tuple(sorted(descs)))
        enc.append((fac.kind, fac.order, tuple(groups)))
    return tuple(enc)


def _decode(enc: tuple) -> tuple[tuple[TensorFactor, ...], tuple[tuple[Target, ...], ...]]:
    factors = tuple(TensorFactor(kind, order) for kind, order, _ in enc)
    links: list[list] = [[None] * fac.n_slots for fac in factors]
    pending: dict[tuple, list[int]] = {}
    for f, (fac, (_, _, groups)) in enumerate(zip(factors, enc)):
        for group, descs in zip(_slot_groups(fac), groups):
            for slot, d in zip(group, descs):
                if d[0] == 0:
                    links[f][slot] = ("i", d[1])
                elif d[0] == 1:
                    links[f][slot] = ("j", d[1])
                else:
                    key = (f, fac.slot_class(slot), d[1], d[2])
                    pending.setdefault(key, []).append(slot)
    for (f, ca, g, cb), mine in sorted(pending.items()):
        if (f, ca) > (g, cb):
            continue
        if (f, ca) == (g, cb):
            pairs = list(zip(mine[0::2], mine[1::2]))
        else:
            pairs = list(zip(mine, pending[(g, cb, f, ca)]))
        for sa, sb in pairs:
            links[f][sa] = ("s", g, sb)
            links[g][sb] = ("s", f, sa)
    return factors, tuple(tuple(row) for row in links)


def _canonical_structure(factors, links):
    factors, links = _contract_deltas(factors, links)
    if _annihilated(factors, links):
        return None
    colors = _refine_colors(factors, links)
    by_color: dict[int, list[int]] = {}
    for f, c in enumerate(colors):
        by_color.setdefault(c, []).append(f)
    blocks = [by_color[c] for c in sorted(by_color)]
    best = None
    for choice in itertools.product(*(itertools.permutations(b) for b in blocks)):
        order = [f for block in choice for f in block]
        enc = _encode(factors, links, order)
        if best is None or enc < best:
            best = enc
    return _decode(best)


def canonicalize(term: Term) -> Term | None:
    """Normal form of ``term``; ``None`` when the term vanishes identically.

    Deltas bonded to anything are contracted away, then the factor order,
    base-slot order and dummy bonds are fixed by minimising an encoding over
    the orderings allowed by colour refinement.
    """
    if term.coefficient == 0:
        return None
    structure = _canonical_structure(term.factors, term.links)
    if structure is None:
        return None
    return Term(term.coefficient, *structure)


# ---------------------------------------------------------------------------
# polynomial tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyTensor:
    """Sum of canonical terms with ``s`` tangent and ``k - s`` label positions.

    ``merged`` marks the equal-label specialisation in which every label
    endpoint carries the single free label ``j0``.
    """

    k: int
    s: int
    terms: tuple[Term, ...] = ()
    merged: bool = False

    @property
    def n_labels(self) -> int:
        return 1 if self.merged else self.k - self.s

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self) -> Iterator[Term]:
        return iter(self.terms)

    def __add__(self, other: PolyTensor) -> PolyTensor:
        _check_compatible(self, other)
        return _collect(self.k, self.s, list(self.terms) + list(other.terms), self.merged)

    def __neg__(self) -> PolyTensor:
        return self.scale(-1)

    def __sub__(self, other: PolyTensor) -> PolyTensor:
        return self + (-other)

    def scale(self, c) -> PolyTensor:
        c = Fraction(c)
        return _collect(self.k, self.s,
                        [Term(t.coefficient * c, t.factors, t.links) for t in self.terms],
                        self.merged)

    def max_order(self) -> int:
        return max((t.max_order() for t in self.terms), default=-1)

    def to_text(self) -> str:
        return format_text(self)

    def to_json(self) -> dict:
        return format_json(self)


def _check_compatible(a: PolyTensor, b: PolyTensor):
    if (a.k, a.s, a.merged) != (b.k, b.s, b.merged):
        raise ValueError(f"incompatible tensors ({a.k},{a.s}) and ({b.k},{b.s})")


def _collect(k: int, s: int, raw: Iterable[Term], merged: bool = False) -> PolyTensor:
    acc: dict[tuple, Fraction] = {}
    for term in raw:
        canon = canonicalize(term)
        if canon is None:
            continue
        acc[canon.structure] = acc.get(canon.structure, Fraction(0)) + canon.coefficient
    terms = [Term(c, *struct) for struct, c in sorted(acc.items(), key=lambda kv: _sort_key(kv[0])) if c != 0]
    return PolyTensor(k, s, tuple(terms), merged)


def _sort_key(structure):
    factors, links = structure
    return (len(factors), tuple(f.order for f in factors), repr(structure))


def zero(k: int, s: int) -> PolyTensor:
    return PolyTensor(k, s, ())


def max_derivative_order(p: PolyTensor) -> int:
    return p.max_order()


# ---------------------------------------------------------------------------
# term surgery
# ---------------------------------------------------------------------------

class _Builder:
    """Mutable copy of a term, used to splice in new factors and bonds."""

    def __init__(self, term: Term, imap: Mapping[int, object], jmap: Mapping[int, object]):
        self.coefficient = term.coefficient
        self.factors = list(term.factors)
        self.links = [list(row) for row in term.links]
        self.hooks: dict[str, tuple[int, int]] = {}
        for f, row in enumerate(self.links):
            for slot, t in enumerate(row):
                if t[0] == "s":
                    continue
                new = (imap if t[0] == "i" else jmap)[t[1]]
                if isinstance(new, str):
                    self.hooks[new] = (f, slot)
                else:
                    row[slot] = new

    def add_factor(self, fac: TensorFactor) -> int:
        self.factors.append(fac)
        self.links.append([None] * fac.n_slots)
        return len(self.factors) - 1

    def bond(self, a: tuple[int, int], b: tuple[int, int]):
        self.links[a[0]][a[1]] = ("s", b[0], b[1])
        self.links[b[0]][b[1]] = ("s", a[0], a[1])

    def set_free(self, ep: tuple[int, int], target: Target):
        self.links[ep[0]][ep[1]] = target

    def term(self, sign: int = 1) -> Term:
        return Term(self.coefficient * sign, tuple(self.factors), tuple(tuple(r) for r in self.links))


def _attach_bare_b(bld: _Builder, base0, base1, label):
    """Append a bare ``B`` whose slots go to endpoints (tuples) or free targets."""
    f = bld.add_factor(TensorFactor("B", 0))
    for slot, dest in zip((0, 1, 2), (base0, base1, label)):
        if dest[0] in ("i", "j"):
            bld.set_free((f, slot), dest)
        else:
            bld.bond((f, slot), dest)
    return f


def _shift_i(s: int, by: int = 1) -> dict[int, Target]:
    return {p: ("i", p + by) for p in range(s)}


def _identity_j(n: int) -> dict[int, Target]:
    return {q: ("j", q) for q in range(n)}


def _differentiate_term(term: Term, s: int, n_labels: int, projection_terms: bool) -> list[Term]:
    out = []
    imap, jmap = _shift_i(s), _identity_j(n_labels)
    for f, fac in enumerate(term.factors):
        if fac.kind != "B":
            continue
        bld = _Builder(term, imap, jmap)
        bld.factors[f] = TensorFactor("B", fac.order + 1)
        bld.links[f] = [("i", 0)] + bld.links[f]
        for g, row in enumerate(bld.links):
            for slot, t in enumerate(row):
                if t[0] == "s" and t[1] == f and not (g == f and slot == 0):
                    row[slot] = ("s", f, t[2] + 1)
        out.append(bld.term())
    if not projection_terms:
        return out
    # an ambient label read against a tangent slot sees the moving tangent
    # projection: d(P)F contributes <B(i0, e_t), F> on that slot
    for f, fac in enumerate(term.factors):
        if fac.kind != "B":
            continue
        lab = fac.label_slot
        t = term.links[f][lab]
        if t[0] == "s" and term.factors[t[1]].is_tangent_slot(t[2]):
            bld = _Builder(term, imap, jmap)
            _attach_bare_b(bld, ("i", 0), (t[1], t[2]), (f, lab))
            out.append(bld.term())
        elif t[0] == "i":
            bld = _Builder(term, imap, jmap)
            _attach_bare_b(bld, ("i", 0), ("i", t[1] + 1), (f, lab))
            out.append(bld.term())
    return out


def formal_derivative(p: PolyTensor, *, projection_terms: bool = True) -> PolyTensor:
    """Covariant derivative with the ambient label frozen.

    The new derivative slot is the leading slot of the differentiated factor
    and becomes free tangent position ``i0``; existing tangent positions move
    up by one.  Deltas are parallel and drop out.
    """
    if p.merged:
        raise ValueError("differentiate before merging labels")
    raw = []
    for term in p.terms:
        raw.extend(_differentiate_term(term, p.s, p.n_labels, projection_terms))
    return _collect(p.k + 1, p.s + 1, raw)


# ---------------------------------------------------------------------------
# the recursion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecursionTable:
    entries: Mapping[tuple[int, int], PolyTensor] = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return max(k for k, _ in self.entries)

    def __getitem__(self, key: tuple[int, int]) -> PolyTensor:
        return self.entries[key]

    def __contains__(self, key) -> bool:
        return key in self.entries

    def row(self, k: int) -> list[PolyTensor]:
        return [self.entries[(k, s)] for s in range(k + 1)]


def base_table() -> RecursionTable:
    delta = Term(Fraction(1), (TensorFactor("delta"),), ((("i", 0), ("i", 1)),))
    return RecursionTable({
        (2, 0): zero(2, 0),
        (2, 1): zero(2, 1),
        (2, 2): _collect(2, 2, [delta]),
    })


def extend(table: RecursionTable, k_new: int, *, top_gradient: bool = True,
           projection_terms: bool = True) -> RecursionTable:
    """Add row ``k_new`` computed from row ``k_new - 1``.

    ``top_gradient=False`` drops the gradient of ``p^{k,k}`` from the
    all-tangent entry, and ``projection_terms=False`` uses the bare Leibniz
    rule in the derivative; both exist only to show, numerically, what goes
    wrong without them.
    """
    k = k_new - 1
    if k_new < 3:
        raise ValueError("extend starts at k_new = 3")
    missing = [(k, s) for s in range(k + 1) if (k, s) not in table]
    if missing:
        raise ValueError(f"table lacks prerequisite entries {missing}")
    if (k_new, 0) in table:
        return table
    prev = {s: table[(k, s)] for s in range(k + 1)}
    entries = dict(table.entries)
    entries[(k_new, 0)] = zero(k_new, 0)
    entries[(k_new, 1)] = zero(k_new, 1)
    for s in range(2, k_new + 1):
        n_lab = k_new - s
        raw: list[Term] = []
        if s < k_new or top_gradient:
            raw.extend(formal_derivative(prev[s - 1], projection_terms=projection_terms).terms)
        if s < k_new:
            # label j_h of p^{k,s-1} read along the tangent part of dN_h
            for term in prev[s - 1].terms:
                for h in range(n_lab):
                    jmap = {q: ("j", q) for q in range(n_lab)}
                    jmap[h] = "hook"
                    bld = _Builder(term, _shift_i(s - 1), jmap)
                    _attach_bare_b(bld, bld.hooks["hook"], ("i", 0), ("j", h))
                    raw.append(bld.term(-1))
            # a tangent slot of p^{k,s} fed with the tangent part of dN_h
            for term in prev[s].terms:
                for h in range(n_lab):
                    imap = _shift_i(s - 1)
                    imap[s - 1] = "hook"
                    rest = [q for q in range(n_lab) if q != h]
                    jmap = {q: ("j", rest[q]) for q in range(n_lab - 1)}
                    bld = _Builder(term, imap, jmap)
                    _attach_bare_b(bld, bld.hooks["hook"], ("i", 0), ("j", h))
                    raw.append(bld.term(1))
        # normal part of dX_h absorbed by an extra label of p^{k,s-2}
        for term in prev[s - 2].terms:
            for h in range(1, s):
                targets = [x for x in range(1, s) if x != h]
                imap = {q: ("i", targets[q]) for q in range(s - 2)}
                jmap = {q + 1: ("j", q) for q in range(n_lab)}
                jmap[0] = "hook"
                bld = _Builder(term, imap, jmap)
                _attach_bare_b(bld, ("i", 0), ("i", h), bld.hooks["hook"])
                raw.append(bld.term(-1))
        entries[(k_new, s)] = _collect(k_new, s, raw)
    return RecursionTable(entries)


def build_table(k_max: int, **kwargs) -> RecursionTable:
    table = base_table()
    for k in range(3, k_max + 1):
        table = extend(table, k, **kwargs)
    return table


def leading_term(table: RecursionTable, k: int) -> PolyTensor:
    """Part of ``p^{k,k-1}`` that carries the top derivative ``BJET(k-3)``."""
    if k < 3:
        raise ValueError("leading term is defined for k >= 3")
    if (k, k - 1) not in table:
        raise ValueError(f"table not filled through k={k}")
    p = table[(k, k - 1)]
    keep = [t for t in p.terms if any(f.kind == "B" and f.order == k - 3 for f in t.factors)]
    return PolyTensor(p.k, p.s, tuple(keep))


def permute_labels(p: PolyTensor, perm: Iterable[int]) -> PolyTensor:
    """Relabel free label positions: position ``q`` goes to ``perm[q]``."""
    perm = list(perm)
    if sorted(perm) != list(range(p.n_labels)):
        raise ValueError("not a permutation of the label positions")
    raw = []
    for t in p.terms:
        bld = _Builder(t, {q: ("i", q) for q in range(p.s)}, {q: ("j", perm[q]) for q in range(p.n_labels)})
        raw.append(bld.term())
    return _collect(p.k, p.s, raw, p.merged)


def merge_labels(p: PolyTensor) -> PolyTensor:
    """Equal-label specialisation ``p_{j...j}``: every label becomes ``j0``."""
    raw = []
    for t in p.terms:
        bld = _Builder(t, {q: ("i", q) for q in range(p.s)}, {q: ("j", 0) for q in range(p.n_labels)})
        raw.append(bld.term())
    return _collect(p.k, p.s, raw, merged=True)


def chain_power_p_k2(k: int) -> PolyTensor:
    """Closed form ``(k-2)! B_{i0 r1} B_{r1 r2} ... B_{r(k-3) i1}`` with one shared label."""
    if k < 2:
        raise ValueError("k >= 2 required")
    if k == 2:
        return PolyTensor(2, 2, base_table()[(2, 2)].terms, merged=True)
    n = k - 2
    factors = tuple(TensorFactor("B", 0) for _ in range(n))
    links = []
    for f in range(n):
        left = ("i", 0) if f == 0 else ("s", f - 1, 1)
        right = ("i", 1) if f == n - 1 else ("s", f + 1, 0)
        links.append((left, right, ("j", 0)))
    term = Term(Fraction(factorial(k - 2)), factors, tuple(links))
    return _collect(k, 2, [term], merged=True)


# ---------------------------------------------------------------------------
# |A^k|^2 as a formal scalar
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarExpression:
    """``sum_s weight_s * <p^{k,s}, p^{k,s}>`` with tangent positions paired
    over the tangent frame and labels over the normal frame."""

    k: int
    parts: tuple[tuple[int, PolyTensor], ...]

    def evaluate(self, jets):
        from .evaluator import evaluate_scalar
        return evaluate_scalar(self, jets)

    def curve_polynomial(self):
        from .evaluator import curve_polynomial
        return curve_polynomial(self)


def squared_norm_expr(table: RecursionTable, k: int) -> ScalarExpression:
    if (k, k) not in table:
        raise ValueError(f"table not filled through k={k}")
    parts = tuple((comb(k, s), table[(k, s)]) for s in range(k + 1) if not table[(k, s)].is_zero())
    return ScalarExpression(k, parts)


# ---------------------------------------------------------------------------
# dump formats
# ---------------------------------------------------------------------------

def _free_name(t: Target) -> str:
    return f"{t[0]}{t[1] + 1}"


def _term_names(term: Term) -> list[list[str]]:
    names: dict[tuple[int, int], str] = {}
    counter = itertools.count(1)
    out = []
    for f, row in enumerate(term.links):
        cur = []
        for slot, t in enumerate(row):
            if t[0] != "s":
                cur.append(_free_name(t))
            elif (f, slot) in names:
                cur.append(names[(f, slot)])
            else:
                r = f"r{next(counter)}"
                names[(t[1], t[2])] = r
                cur.append(r)
        out.append(cur)
    return out


def _factor_text(fac: TensorFactor, names: list[str]) -> str:
    if fac.kind == "delta":
        return f"delta[{','.join(names)}]"
    a = fac.order
    head = "B" if a == 0 else f"D{a}B"
    parts = []
    if a:
        parts.append(",".join(names[:a]))
    parts.append(",".join(names[a:a + 2]))
    parts.append(names[a + 2])
    return f"{head}[{'; '.join(parts)}]"


def format_text(p: PolyTensor) -> str:
    if p.is_zero():
        return "0"
    lines = []
    for term in p.terms:
        names = _term_names(term)
        body = " * ".join(_factor_text(f, n) for f, n in zip(term.factors, names))
        lines.append(f"{term.coefficient} * {body}")
    return "\n".join(lines)


def format_json(p: PolyTensor) -> dict:
    terms = []
    for term in p.terms:
        edges = []
        free = []
        for f, row in enumerate(term.links):
            for slot, t in enumerate(row):
                if t[0] == "s":
                    if (f, slot) < (t[1], t[2]):
                        edges.append([[f, slot], [t[1], t[2]]])
                else:
                    free.append({"factor": f, "slot": slot, "position": _free_name(t)})
        terms.append({
            "coeff": str(term.coefficient),
            "factors": [{"kind": fac.kind, "order": fac.order, "slots": fac.n_slots}
                        for fac in term.factors],
            "edges": edges,
            "free": free,
        })
    return {"k": p.k, "s": p.s, "terms": terms}


def dumps_json(p: PolyTensor) -> str:
    return json.dumps(format_json(p), indent=2)
