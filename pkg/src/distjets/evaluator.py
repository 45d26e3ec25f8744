"""Numerical instantiation of polynomial tensors on second-fundamental-form jets."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np
import sympy as sp

from .recursion import PolyTensor, RecursionTable, ScalarExpression, Term, squared_norm_expr

__all__ = [
    "JetSample",
    "ScanReport",
    "random_jets",
    "evaluate",
    "evaluate_scalar",
    "norm_Ak",
    "assemble_Ak",
    "chain_lower_bound",
    "inequality_scan",
    "curve_polynomial",
    "curve_jet_components",
]


@dataclass
class JetSample:
    """Components of ``D^a B`` in an adapted frame, batched along axis 0.

    ``bjets[a]`` has shape ``(S,) + (n,) * (a + 2) + (n + m,)``: ``a``
    derivative slots, two base slots, then the ambient label whose first
    ``n`` components are tangent.
    """

    n: int
    m: int
    bjets: list

    def __post_init__(self):
        for a, arr in enumerate(self.bjets):
            want = (self.n,) * (a + 2) + (self.n + self.m,)
            if tuple(arr.shape[1:]) != want:
                raise ValueError(f"bjets[{a}] has shape {arr.shape}, expected (S,)+{want}")

    @property
    def size(self) -> int:
        return self.bjets[0].shape[0]

    @property
    def a_max(self) -> int:
        return len(self.bjets) - 1

    @classmethod
    def single(cls, n: int, m: int, bjets) -> JetSample:
        return cls(n, m, [np.asarray(b)[None] for b in bjets])

    def b_norm(self) -> np.ndarray:
        b = self.bjets[0]
        return np.sqrt(np.sum(b.reshape(b.shape[0], -1) ** 2, axis=1))


def random_jets(n: int, m: int, a_max: int, size: int, rng: np.random.Generator,
                *, zero_derivatives: bool = False) -> JetSample:
    """Seeded synthetic jets with ``|B| = 1`` and higher jets uniform in [-1, 1].

    These ignore the Gauss and Codazzi constraints; only ``B`` itself is
    forced to be symmetric with normal values.
    """
    d = n + m
    b = np.zeros((size, n, n, d))
    raw = rng.standard_normal((size, n, n, m))
    b[..., n:] = raw + raw.transpose(0, 2, 1, 3)
    b /= np.sqrt(np.sum(b.reshape(size, -1) ** 2, axis=1))[:, None, None, None]
    bjets = [b]
    for a in range(1, a_max + 1):
        shape = (size,) + (n,) * (a + 2) + (d,)
        if zero_derivatives:
            bjets.append(np.zeros(shape))
            continue
        arr = rng.uniform(-1.0, 1.0, shape)
        bjets.append(0.5 * (arr + np.swapaxes(arr, a + 1, a + 2)))
    return JetSample(n, m, bjets)


# ---------------------------------------------------------------------------
# tensor-network contraction
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _plan(term: Term, s: int, n_labels: int, labels: str):
    """Operand recipe and einsum sublists for one term; index 0 is the batch."""
    counter = iter(range(1, 10_000))
    free = {("i", p): next(counter) for p in range(s)}
    free.update({("j", q): next(counter) for q in range(n_labels)})
    bonds: dict[tuple, int] = {}
    operands = []
    for f, (fac, row) in enumerate(zip(term.factors, term.links)):
        subs = [0]
        for slot, t in enumerate(row):
            if t[0] == "s":
                key = tuple(sorted([(f, slot), (t[1], t[2])]))
                if key not in bonds:
                    bonds[key] = next(counter)
                subs.append(bonds[key])
            else:
                subs.append(free[t])
        if fac.kind == "delta":
            operands.append(("delta", None, subs))
            continue
        t = row[fac.label_slot]
        if t[0] == "i" or (t[0] == "s" and term.factors[t[1]].is_tangent_slot(t[2])):
            cut = "tangent"
        elif t[0] == "j":
            cut = labels
        else:
            cut = "full"
        operands.append((fac.order, cut, subs))
    out = [0] + [free[("i", p)] for p in range(s)] + [free[("j", q)] for q in range(n_labels)]
    return tuple(operands), out


def _operand(jets: JetSample, order, cut):
    n = jets.n
    if order == "delta":
        return np.broadcast_to(np.eye(n, dtype=jets.bjets[0].dtype), (jets.size, n, n))
    if order > jets.a_max:
        raise ValueError(f"jets carry derivatives up to {jets.a_max}, term needs {order}")
    arr = jets.bjets[order]
    if cut == "tangent":
        return arr[..., :n]
    if cut == "normal":
        return arr[..., n:]
    return arr


def evaluate(p: PolyTensor, jets: JetSample, labels: str = "normal") -> np.ndarray:
    """All components of ``p`` at every jet in the batch.

    Output axes: batch, tangent positions ``i0..``, then label positions.
    Free labels range over the normal frame (``labels="normal"``) or the
    full ambient frame (``labels="full"``).  Bonds between two labels run
    over the full ambient frame, bonds that touch a tangent slot over the
    tangent frame.
    """
    if labels not in ("normal", "full"):
        raise ValueError("labels must be 'normal' or 'full'")
    n, m = jets.n, jets.m
    lab_dim = m if labels == "normal" else n + m
    shape = (jets.size,) + (n,) * p.s + (lab_dim,) * p.n_labels
    dtype = jets.bjets[0].dtype
    total = np.zeros(shape, dtype=dtype)
    for term in p.terms:
        operands, out = _plan(term, p.s, p.n_labels, labels)
        args = []
        for order, cut, subs in operands:
            args.extend([_operand(jets, order, cut), subs])
        args.append(out)
        val = np.einsum(*args, optimize=dtype != object) if len(operands) > 1 else np.einsum(*args)
        coeff = term.coefficient
        if dtype == object:
            total = total + sp.Rational(coeff.numerator, coeff.denominator) * val
        else:
            total += float(coeff) * val
    return total


def evaluate_scalar(expr: ScalarExpression, jets: JetSample) -> np.ndarray:
    out = np.zeros(jets.size, dtype=jets.bjets[0].dtype)
    for weight, p in expr.parts:
        vals = evaluate(p, jets).reshape(jets.size, -1)
        out = out + weight * np.sum(vals * vals, axis=1)
    return out


def norm_Ak(jets: JetSample, table: RecursionTable, k: int) -> np.ndarray:
    """``|A^k|^2`` from the recursion, one value per jet in the batch."""
    return evaluate_scalar(squared_norm_expr(table, k), jets)


def assemble_Ak(jets: JetSample, table: RecursionTable, k: int) -> np.ndarray:
    """Full symmetric k-tensor ``A^k`` in the adapted frame.

    An index tuple with tangent entries at some positions takes the value of
    ``p^{k,s}`` with the tangent indices in their order of appearance.
    """
    n, d = jets.n, jets.n + jets.m
    parts = {s: evaluate(table[(k, s)], jets) for s in range(k + 1)}
    out = np.zeros((jets.size,) + (d,) * k)
    for idx in np.ndindex(*(d,) * k):
        tan = tuple(c for c in idx if c < n)
        nor = tuple(c - n for c in idx if c >= n)
        out[(slice(None),) + idx] = parts[len(tan)][(slice(None),) + tan + nor]
    return out


# ---------------------------------------------------------------------------
# lower bound scan
# ---------------------------------------------------------------------------

def chain_lower_bound(jets: JetSample, k: int) -> np.ndarray:
    """``[(k-2)!]^2 sum_j sum_s (lambda^j_s)^(2(k-2))`` from the eigenvalues of ``B^j``."""
    n = jets.n
    b = jets.bjets[0][..., n:]
    lam = np.linalg.eigvalsh(np.moveaxis(b, -1, 1))  # (S, m, n)
    return factorial(k - 2) ** 2 * np.sum(lam ** (2 * (k - 2)), axis=(1, 2))


@dataclass
class ScanReport:
    k: int
    n: int
    m: int
    samples: int
    seed: int
    min_ratio: float
    mean_ratio: float
    c_hat: float
    zero_derivative_min_ratio: float
    zero_derivative_mean_ratio: float
    chain_bound_violations: int

    def to_dict(self) -> dict:
        return asdict(self)


def inequality_scan(table: RecursionTable, k: int, n: int, m: int, samples: int,
                    seed: int = 42) -> ScanReport:
    """Empirical ``min |A^k|^2 / |B|^(2k-4)`` over seeded random jets.

    Two sub-scans share one generator: generic jets and jets whose
    derivatives vanish.  ``c_hat`` is the minimum of the latter, where the
    ratio is exactly homogeneous in ``B``.
    """
    if k < 3:
        raise ValueError("k >= 3 required")
    rng = np.random.default_rng(seed)
    expr = squared_norm_expr(table, k)
    full = random_jets(n, m, max(k - 3, 0), samples, rng)
    flat = random_jets(n, m, max(k - 3, 0), samples, rng, zero_derivatives=True)
    r_full = evaluate_scalar(expr, full) / full.b_norm() ** (2 * k - 4)
    r_flat = evaluate_scalar(expr, flat) / flat.b_norm() ** (2 * k - 4)
    bound = chain_lower_bound(flat, k) / flat.b_norm() ** (2 * k - 4)
    violations = int(np.sum(r_flat < bound * (1 - 1e-12)))
    return ScanReport(
        k=k, n=n, m=m, samples=samples, seed=seed,
        min_ratio=float(r_full.min()), mean_ratio=float(r_full.mean()),
        c_hat=float(r_flat.min()),
        zero_derivative_min_ratio=float(r_flat.min()),
        zero_derivative_mean_ratio=float(r_flat.mean()),
        chain_bound_violations=violations,
    )


# ---------------------------------------------------------------------------
# plane curves: |A^k|^2 as a polynomial in curvature and its arc-length derivatives
# ---------------------------------------------------------------------------

def kappa_symbols(count: int) -> tuple[sp.Symbol, ...]:
    return sp.symbols(f"kappa0:{max(count, 1)}")


def _d_ds(expr, syms):
    return sum(sp.diff(expr, syms[i]) * syms[i + 1] for i in range(len(syms) - 1))


def curve_jet_components(a_max: int):
    """Frame components ``(tangent, normal)`` of ``D^a B(T, .., T)`` for a plane curve.

    With ``B(T, T) = kappa N``, ``T' = kappa N`` and ``N' = -kappa T``, the
    ambient-frozen derivative of ``alpha T + beta N`` along arc length is
    ``(alpha' - kappa beta) T + (beta' + kappa alpha) N``.
    """
    syms = kappa_symbols(a_max + 2)
    kappa = syms[0]
    alpha, beta = sp.Integer(0), kappa
    out = [(alpha, beta)]
    for _ in range(a_max):
        alpha, beta = (sp.expand(_d_ds(alpha, syms) - kappa * beta),
                       sp.expand(_d_ds(beta, syms) + kappa * alpha))
        out.append((alpha, beta))
    return out, syms[: a_max + 1]


def curve_polynomial(expr: ScalarExpression) -> tuple[sp.Expr, tuple[sp.Symbol, ...]]:
    """``|A^k|^2`` for a plane curve as a polynomial in ``kappa, kappa', ...``."""
    a_max = max(expr.k - 3, 0)
    comps, syms = curve_jet_components(a_max)
    bjets = []
    for a, (alpha, beta) in enumerate(comps):
        arr = np.empty((1,) * (a + 3) + (2,), dtype=object)
        arr[(0,) * (a + 3) + (0,)] = alpha
        arr[(0,) * (a + 3) + (1,)] = beta
        bjets.append(arr)
    jets = JetSample(1, 1, bjets)
    value = evaluate_scalar(expr, jets)[0]
    return sp.expand(value), syms
