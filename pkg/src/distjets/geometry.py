"""Analytic immersions, their second-fundamental-form jets, and the squared
distance oracle.

Jets come from forward-mode automatic differentiation of closed-form
parametrisations (jax, float64).  The oracle is independent of them: it
projects points onto the immersion with multistart Newton and differentiates
the squared distance with finite-difference stencils.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._jax import jax, jnp

__all__ = [
    "GeometryError",
    "ImmersionError",
    "ProjectionError",
    "StepTooLargeError",
    "Immersion",
    "JetData",
    "DistanceField",
    "FDTensor",
    "parse_shape",
    "jets",
    "project",
    "project_many",
    "fd_Ak",
    "fd_gradient",
    "default_step",
    "verify_prop1",
    "oracle_compare",
    "oracle_step_factor",
    "sample_parameters",
]


class GeometryError(RuntimeError):
    pass


class ImmersionError(GeometryError):
    """Degenerate metric: the map is not an immersion at the point."""


class ProjectionError(GeometryError):
    """Newton projection failed from every seed."""


class StepTooLargeError(GeometryError):
    """Finite-difference stencil reaches outside the tubular neighbourhood."""


_SHAPES = {
    # kind: (n, m, parameter names, periodic)
    "circle": (1, 1, ("R",), True),
    "ellipse": (1, 1, ("a", "b"), True),
    "torus3": (2, 1, ("R", "r"), True),
    "clifford4": (2, 2, ("R",), True),
    "line": (1, 1, (), False),
    "plane": (2, 1, (), False),
}


@dataclass(frozen=True)
class Immersion:
    """Closed-form immersion ``u -> x``; ``rotation`` is an optional ambient rotation."""

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    rotation: tuple[tuple[float, ...], ...] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in _SHAPES:
            raise ValueError(f"unknown shape {self.kind!r}; choose from {sorted(_SHAPES)}")
        names = _SHAPES[self.kind][2]
        given = dict(self.params)
        if set(given) != set(names):
            raise ValueError(f"{self.kind} needs parameters {names}, got {tuple(given)}")
        if any(v <= 0 for v in given.values()):
            raise ValueError("shape parameters must be positive")
        if self.kind == "torus3" and given["r"] >= given["R"]:
            raise ValueError("torus3 needs r < R")

    @classmethod
    def make(cls, kind: str, **params) -> Immersion:
        names = _SHAPES[kind][2] if kind in _SHAPES else ()
        return cls(kind, tuple((k, float(params[k])) for k in names if k in params))

    @property
    def p(self) -> dict:
        return dict(self.params)

    @property
    def n(self) -> int:
        return _SHAPES[self.kind][0]

    @property
    def m(self) -> int:
        return _SHAPES[self.kind][1]

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def periodic(self) -> bool:
        return _SHAPES[self.kind][3]

    @property
    def flat(self) -> bool:
        return self.kind in ("line", "plane")

    @property
    def half_width(self) -> float:
        """Conservative tubular half-width, well inside the focal distance."""
        p = self.p
        if self.kind == "circle":
            return p["R"] / 2
        if self.kind == "ellipse":
            a, b = max(p["a"], p["b"]), min(p["a"], p["b"])
            return b * b / (2 * a)
        if self.kind == "torus3":
            return p["r"] / 2
        if self.kind == "clifford4":
            return p["R"] / 2
        return 1.0

    def rotated(self, q) -> Immersion:
        q = np.asarray(q, dtype=float)
        if self.rotation is not None:
            q = q @ np.asarray(self.rotation)
        return Immersion(self.kind, self.params, tuple(map(tuple, q)))

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}:" + ",".join(f"{k}={v:g}" for k, v in self.params)

    def param(self, u, xp=np):
        """Ambient point(s) for parameter(s) ``u`` with trailing axis of size ``n``."""
        p = self.p
        u = xp.asarray(u)
        if self.kind == "circle":
            t = u[..., 0]
            x = xp.stack([p["R"] * xp.cos(t), p["R"] * xp.sin(t)], axis=-1)
        elif self.kind == "ellipse":
            t = u[..., 0]
            x = xp.stack([p["a"] * xp.cos(t), p["b"] * xp.sin(t)], axis=-1)
        elif self.kind == "torus3":
            s, t = u[..., 0], u[..., 1]
            w = p["R"] + p["r"] * xp.cos(t)
            x = xp.stack([w * xp.cos(s), w * xp.sin(s), p["r"] * xp.sin(t)], axis=-1)
        elif self.kind == "clifford4":
            s, t = u[..., 0], u[..., 1]
            R = p["R"]
            x = xp.stack([R * xp.cos(s), R * xp.sin(s), R * xp.cos(t), R * xp.sin(t)], axis=-1)
        elif self.kind == "line":
            t = u[..., 0]
            x = xp.stack([t, 0.0 * t], axis=-1)
        else:
            s, t = u[..., 0], u[..., 1]
            x = xp.stack([s, t, 0.0 * s], axis=-1)
        if self.rotation is not None:
            x = x @ xp.asarray(self.rotation).T
        return x

    def seeds(self, count: int = 64) -> np.ndarray:
        if self.n == 1:
            if self.periodic:
                return (2 * np.pi * np.arange(count) / count)[:, None]
            return np.linspace(-4.0, 4.0, count)[:, None]
        side = max(int(round(math.sqrt(count))), 2)
        if self.periodic:
            g = 2 * np.pi * np.arange(side) / side
        else:
            g = np.linspace(-4.0, 4.0, side)
        a, b = np.meshgrid(g, g, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=-1)


def parse_shape(text: str) -> Immersion:
    """Parse ``circle:R=1``, ``ellipse:a=2,b=1``, ``torus3:R=2,r=0.5``,
    ``clifford4:R=1``, ``line`` or ``plane``."""
    kind, _, rest = text.strip().partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"malformed shape parameter {item!r} in {text!r}")
            params[key.strip()] = float(val)
    if kind not in _SHAPES:
        raise ValueError(f"unknown shape {kind!r}")
    names = _SHAPES[kind][2]
    extra = set(params) - set(names)
    if extra or len(params) != len(names):
        raise ValueError(f"{kind} takes parameters {names}, got {sorted(params)}")
    return Immersion(kind, tuple((k, params[k]) for k in names))


def sample_parameters(im: Immersion, count: int) -> np.ndarray:
    """Deterministic, non-symmetric sample of parameter points."""
    if im.n == 1:
        t = 2 * np.pi * (np.arange(count) + 0.37) / count
        if not im.periodic:
            t = np.linspace(-1.0, 1.0, count)
        return t[:, None]
    golden = (math.sqrt(5) - 1) / 2
    i = np.arange(count) + 0.5
    a = 2 * np.pi * i / count
    b = 2 * np.pi * ((i * golden + 0.21) % 1.0)
    if not im.periodic:
        a, b = np.cos(a), np.sin(b)
    return np.stack([a, b], axis=-1)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

@dataclass
class JetData:
    """Pointwise geometry at ``u``; ``bjets[a]`` holds ``D^a B`` in the adapted frame."""

    u: np.ndarray
    point: np.ndarray
    frame: np.ndarray  # columns: n tangent vectors, then m normal vectors
    metric: np.ndarray
    christoffel: np.ndarray  # [d, a, b] = Gamma^d_{ab}
    bjets: list
    mean_curvature: np.ndarray  # ambient vector
    n: int
    m: int

    @property
    def tangent(self) -> np.ndarray:
        return self.frame[:, : self.n]

    @property
    def normal(self) -> np.ndarray:
        return self.frame[:, self.n:]

    def sample(self):
        from .evaluator import JetSample
        return JetSample.single(self.n, self.m, self.bjets)

    def b_ambient(self) -> np.ndarray:
        """``B^k_{ij}`` in ambient coordinates, extended by tangent projection."""
        e, q = self.tangent, self.frame
        return np.einsum("ia,jb,abl,kl->ijk", e, e, self.bjets[0], q)

    def principal_radius(self) -> float:
        """Smallest principal radius over all normal directions (inf when flat)."""
        b = self.bjets[0][..., self.n:]
        lam = np.abs(np.linalg.eigvalsh(np.moveaxis(b, -1, 0))).max()
        return math.inf if lam < 1e-14 else 1.0 / lam


def _covariant_step(fn, gamma_fn):
    """Ambient-frozen covariant derivative of a jet function of ``u``.

    The new derivative slot goes in front; every tangent slot receives a
    Christoffel correction and the last (ambient) axis is left alone.
    """
    def nxt(u):
        t = fn(u)
        dt = jnp.moveaxis(jax.jacfwd(fn)(u), -1, 0)
        gam = gamma_fn(u)  # [d, a, b]
        n_tan = t.ndim - 1
        for p in range(n_tan):
            # sum_d Gamma^d_{g, s_p} T[.., d at p, ..]
            c = jnp.tensordot(gam, t, axes=([0], [p]))  # [g, s_p, rest without p]
            c = jnp.moveaxis(c, 1, p + 1)
            dt = dt - c
        return dt
    return nxt


@lru_cache(maxsize=None)
def _jet_functions(im: Immersion, a_max: int):
    phi = lambda u: im.param(u, jnp)
    d1 = jax.jacfwd(phi)
    d2 = jax.jacfwd(d1)

    def metric(u):
        j = d1(u)
        return j.T @ j

    def gamma(u):
        j, h = d1(u), d2(u)
        return jnp.einsum("de,Ne,Nab->dab", jnp.linalg.inv(metric(u)), j, h)

    def bform(u):
        j, h = d1(u), d2(u)
        proj = j @ jnp.linalg.solve(j.T @ j, j.T)
        normal_part = h - jnp.einsum("NM,Mab->Nab", proj, h)
        return jnp.moveaxis(normal_part, 0, -1)  # [a, b, N]

    fns = [bform]
    for _ in range(a_max):
        fns.append(_covariant_step(fns[-1], gamma))

    @jax.jit
    def everything(u):
        return phi(u), d1(u), metric(u), gamma(u), [f(u) for f in fns]

    return everything


def jets(im: Immersion, u, a_max: int = 0) -> JetData:
    """Metric, Christoffel symbols and ``D^a B`` (0 <= a <= a_max) at ``u``."""
    if a_max < 0:
        raise ValueError("a_max must be >= 0")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (im.n,):
        raise ValueError(f"parameter point must have {im.n} components")
    x, j, g, gam, raw = _jet_functions(im, a_max)(jnp.asarray(u))
    x, j, g, gam = map(np.asarray, (x, j, g, gam))
    if np.linalg.det(g) <= 1e-12 * max(1.0, np.trace(g)) ** im.n:
        raise ImmersionError(f"degenerate metric at u={u}")
    q, _ = np.linalg.qr(j, mode="complete")
    # coefficients of the orthonormal tangent frame in the coordinate basis
    c = np.linalg.solve(g, j.T @ q[:, : im.n])
    bjets = []
    for arr in raw:
        arr = np.asarray(arr)
        for p in range(arr.ndim - 1):
            arr = np.moveaxis(np.tensordot(arr, c, axes=([p], [0])), -1, p)
        bjets.append(np.tensordot(arr, q, axes=([-1], [0])))
    h = np.einsum("aal->l", bjets[0]) @ q.T
    return JetData(u, x, q, g, gam, bjets, h, im.n, im.m)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceField:
    source: Immersion
    half_width: float | None = None

    @property
    def width(self) -> float:
        return self.source.half_width if self.half_width is None else self.half_width


@lru_cache(maxsize=None)
def _newton(im: Immersion, iterations: int = 40):
    def f(u, x):
        r = x - im.param(u, jnp)
        return 0.5 * jnp.dot(r, r)

    grad = jax.grad(f)
    hess = jax.hessian(f)

    def solve_one(u, x):
        def body(_, u):
            g = grad(u, x)
            h = hess(u, x)
            lam, vec = jnp.linalg.eigh(h)
            scale = jnp.maximum(jnp.abs(lam), 1e-8 * (1.0 + jnp.max(jnp.abs(lam))))
            step = -vec @ ((vec.T @ g) / scale)
            size = jnp.linalg.norm(step)
            step = jnp.where(size > 0.5, step * 0.5 / size, step)
            return u + step
        u = jax.lax.fori_loop(0, iterations, body, u)
        return u, f(u, x), jnp.linalg.norm(grad(u, x)), jnp.linalg.eigvalsh(hess(u, x))[0]

    batched = jax.vmap(jax.vmap(solve_one, in_axes=(0, None)), in_axes=(None, 0))
    return jax.jit(batched)


def project_many(df: DistanceField, xs, seeds: int = 64, guess=None):
    """Nearest points for a batch ``xs`` of shape ``(P, n+m)``.

    Returns ``(feet, eta, u)``.  Every point runs damped Newton from ``seeds``
    grid seeds (plus ``guess`` when given); the lowest converged local minimum
    wins.
    """
    im = df.source
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    starts = im.seeds(seeds)
    if guess is not None:
        starts = np.vstack([np.atleast_2d(guess), starts])
    u, val, gnorm, hmin = map(np.asarray, _newton(im)(jnp.asarray(starts), jnp.asarray(xs)))
    scale = max(1.0, float(np.max(np.abs(xs))))
    ok = (gnorm < 1e-9 * scale) & (hmin > -1e-9)
    val = np.where(ok, val, np.inf)
    best = np.argmin(val, axis=1)
    if np.any(~np.isfinite(val[np.arange(len(xs)), best])):
        bad = np.where(~np.isfinite(val[np.arange(len(xs)), best]))[0]
        raise ProjectionError(f"projection failed for {len(bad)} point(s), e.g. {xs[bad[0]]}")
    ub = u[np.arange(len(xs)), best]
    if im.periodic:
        ub = np.mod(ub, 2 * np.pi)
    feet = im.param(ub)
    r = xs - feet
    return feet, np.sum(r * r, axis=1), ub


def project(df: DistanceField, x, seeds: int = 64):
    """``(foot, eta)``: nearest point on the immersion and squared distance."""
    feet, eta, _ = project_many(df, np.asarray(x, dtype=float)[None], seeds)
    return feet[0], float(eta[0])


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _stencil(order: int) -> tuple[tuple[int, float], ...]:
    """Second-order central stencil for the ``order``-th derivative (unit step)."""
    if order == 0:
        return ((0, 1.0),)
    half = (order + 1) // 2
    offs = np.arange(-half, half + 1)
    vand = np.vander(offs, increasing=True).T.astype(float)
    rhs = np.zeros(len(offs))
    rhs[order] = math.factorial(order)
    coef = np.linalg.solve(vand, rhs)
    return tuple((int(o), float(c)) for o, c in zip(offs, coef) if abs(c) > 1e-12)


def _multi_indices(dim: int, k: int):
    for combo in itertools.combinations_with_replacement(range(dim), k):
        alpha = [0] * dim
        for c in combo:
            alpha[c] += 1
        yield tuple(alpha)


def _product_stencil(alpha):
    pts = []
    for choice in itertools.product(*(_stencil(a) for a in alpha)):
        off = tuple(o for o, _ in choice)
        coef = math.prod(c for _, c in choice)
        pts.append((off, coef))
    return pts


@dataclass
class FDTensor:
    """Finite-difference derivative tensor with its raw ingredients."""

    k: int
    h: float
    tensor: np.ndarray  # Richardson-extrapolated, symmetrised
    coarse: np.ndarray  # step h
    fine: np.ndarray  # step h/2
    asymmetry: float
    observed_order: float | None = None


def _eta_derivatives(df, x, k, h, guess, ordered: bool):
    dim = df.source.dim
    alphas = list(_multi_indices(dim, k))
    stencils = {alpha: _product_stencil(alpha) for alpha in alphas}
    reach = max(abs(o) for st in stencils.values() for off, _ in st for o in off) * h
    if reach * math.sqrt(dim) > df.width:
        raise StepTooLargeError(f"stencil reach {reach:.3g} exceeds half-width {df.width:.3g}")
    offsets = sorted({off for st in stencils.values() for off, _ in st})
    pts = x[None, :] + h * np.asarray(offsets, dtype=float)
    _, eta, _ = project_many(df, pts, guess=guess)
    value = dict(zip(offsets, eta))
    out = np.zeros((dim,) * k)
    if not ordered:
        for alpha, st in stencils.items():
            v = sum(c * value[off] for off, c in st) / h ** k
            for idx in set(itertools.permutations([d for d in range(dim) for _ in range(alpha[d])])):
                out[idx] = v
        return out
    for idx in itertools.product(range(dim), repeat=k):
        alpha = tuple(idx.count(d) for d in range(dim))
        # accumulate in an order tied to the index tuple so rounding differs
        first = sorted(range(dim), key=lambda d: idx.index(d) if d in idx else dim + d)
        st = sorted(stencils[alpha], key=lambda oc: tuple(oc[0][d] for d in first))
        out[idx] = sum(c * value[off] for off, c in st) / h ** k
    return out


def _symmetrize(t: np.ndarray) -> np.ndarray:
    k = t.ndim
    perms = list(itertools.permutations(range(k)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def fd_Ak(df: DistanceField, x, k: int, h: float, *, guess=None,
          estimate_order: bool = False) -> FDTensor:
    """k-th ambient derivative of ``A = (|x|^2 - eta) / 2`` at ``x``.

    Only ``eta`` is differenced; the quadratic part is added exactly.  Central
    product stencils at steps ``h`` and ``h/2`` are combined by Richardson
    extrapolation.
    """
    if not 1 <= k <= 6:
        raise ValueError("fd_Ak supports 1 <= k <= 6")
    x = np.asarray(x, dtype=float)
    dim = df.source.dim

    def raw(step):
        t = -0.5 * _eta_derivatives(df, x, k, step, guess, ordered=k <= 4 or dim <= 3)
        if k == 1:
            t = t + x
        elif k == 2:
            t = t + np.eye(dim)
        return t

    coarse, fine = raw(h), raw(h / 2)
    extrap = (4 * fine - coarse) / 3
    sym = _symmetrize(extrap)
    asym = float(np.max(np.abs(extrap - sym)))
    order = None
    if estimate_order:
        finer = raw(h / 4)
        e1 = np.linalg.norm(coarse - fine)
        e2 = np.linalg.norm(fine - finer)
        order = float(np.log2(e1 / e2)) if e2 > 0 else math.inf
    return FDTensor(k, h, sym, _symmetrize(coarse), _symmetrize(fine), asym, order)


def fd_gradient(df: DistanceField, x, h: float, guess=None) -> np.ndarray:
    return fd_Ak(df, x, 1, h, guess=guess).tensor


def default_step(df: DistanceField, jd: JetData, c: float = 1e-2) -> float:
    """``c`` times the local curvature radius (unit radius for flat shapes)."""
    rho = jd.principal_radius()
    if not math.isfinite(rho):
        rho = 1.0
    return c * min(rho, 2 * df.width)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def verify_prop1(im: Immersion, samples: int, c: float = 1e-2) -> dict:
    """Max absolute errors of the projection/second-fundamental-form identities.

    Keys: ``gradient_is_projection``, ``hessian_is_tangent_projection``,
    ``b_from_a``, ``a3_from_b``, ``mean_curvature_trace`` and
    ``hessian_eta_normal_projection``.
    """
    df = DistanceField(im)
    errs = {key: 0.0 for key in (
        "gradient_is_projection", "hessian_is_tangent_projection", "b_from_a",
        "a3_from_b", "mean_curvature_trace", "hessian_eta_normal_projection")}
    dim = im.dim
    eye = np.eye(dim)
    for u in sample_parameters(im, samples):
        jd = jets(im, u, 0)
        x = jd.point
        h = default_step(df, jd, c)
        ptan = jd.tangent @ jd.tangent.T
        a2 = fd_Ak(df, x, 2, h, guess=u).tensor
        a3 = fd_Ak(df, x, 3, h, guess=u).tensor
        b = jd.b_ambient()

        y = x + 0.5 * df.width * jd.normal[:, 0]
        grad_a = fd_gradient(df, y, h, guess=u)
        foot, _ = project(df, y)
        errs["gradient_is_projection"] = max(errs["gradient_is_projection"],
                                             float(np.max(np.abs(grad_a - foot))))
        errs["hessian_is_tangent_projection"] = max(errs["hessian_is_tangent_projection"],
                                                    float(np.max(np.abs(a2 - ptan))))
        hess_eta = 2 * (eye - a2)
        errs["hessian_eta_normal_projection"] = max(
            errs["hessian_eta_normal_projection"],
            float(np.max(np.abs(hess_eta - 2 * (eye - ptan)))))
        b_rec = np.einsum("ijs,ks->ijk", a3, eye - a2)
        errs["b_from_a"] = max(errs["b_from_a"], float(np.max(np.abs(b - b_rec))))
        a3_rec = b + np.einsum("ijk->jki", b) + np.einsum("ijk->kij", b)
        errs["a3_from_b"] = max(errs["a3_from_b"], float(np.max(np.abs(a3 - a3_rec))))
        h_fd = np.einsum("iik->k", a3)
        errs["mean_curvature_trace"] = max(errs["mean_curvature_trace"],
                                           float(np.max(np.abs(h_fd - jd.mean_curvature))))
    return {"shape": str(im), "samples": samples, "max_abs_error": errs}


# ---------------------------------------------------------------------------
# recursion vs oracle
# ---------------------------------------------------------------------------

def oracle_step_factor(k: int) -> float:
    """Step factor ``c`` for ``fd_Ak`` of order ``k``.

    Roundoff in a k-th difference grows like ``h^-k``, so the step doubles
    for each order above 4 to keep the extrapolated error below 1e-4.
    """
    return 1e-2 * 2.0 ** max(0, k - 4)


def oracle_compare(im: Immersion, table, k_values, samples: int) -> dict:
    """Evaluator ``A^k`` against ``fd_Ak`` at sampled points of ``im``.

    Component errors are measured in the max norm relative to the
    Frobenius norm of the oracle tensor, floored at 1e-3 so that exactly
    vanishing tensors (flat shapes) are judged absolutely.  Norm errors are
    relative errors of ``|A^k|^2``, with the same floor.
    """
    from .evaluator import assemble_Ak, norm_Ak

    df = DistanceField(im)
    k_values = list(k_values)
    a_max = max(max(k_values) - 3, 0)
    out = {}
    params = sample_parameters(im, samples)
    pts = [jets(im, u, a_max) for u in params]
    for k in k_values:
        comp, nerr, norms, fd_norms, asym = 0.0, 0.0, [], [], 0.0
        for u, jd in zip(params, pts):
            sample = jd.sample()
            frame_t = assemble_Ak(sample, table, k)[0]
            amb = frame_t
            for _ in range(k):
                amb = np.tensordot(amb, jd.frame, axes=([0], [1]))
            fd = fd_Ak(df, jd.point, k, default_step(df, jd, oracle_step_factor(k)), guess=u)
            scale = max(float(np.linalg.norm(fd.tensor)), 1e-3)
            comp = max(comp, float(np.max(np.abs(amb - fd.tensor))) / scale)
            value = float(norm_Ak(sample, table, k)[0])
            fd_value = float(np.sum(fd.tensor ** 2))
            nerr = max(nerr, abs(value - fd_value) / max(fd_value, 1e-3))
            norms.append(value)
            fd_norms.append(fd_value)
            asym = max(asym, fd.asymmetry)
        out[k] = {
            "max_component_error": comp,
            "max_norm_error": nerr,
            "norm_Ak": norms,
            "fd_norm_Ak": fd_norms,
            "fd_asymmetry": asym,
        }
    return {"shape": str(im), "samples": samples, "by_k": out}
