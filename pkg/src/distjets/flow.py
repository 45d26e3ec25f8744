"""Gradient flows of ``G = sum (1 + eps |A^k|^2) ds`` for closed plane polygons.

Curvature jets come from periodic order-6 central differences in the node
index, rescaled to arc length.  The energy density is the curve polynomial
of ``|A^k|^2`` produced by the recursion, and the flow uses the exact
gradient of this discrete energy (jax reverse mode).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import sympy as sp
from scipy.integrate import RK45, solve_ivp

from ._jax import jax, jnp
from .evaluator import curve_polynomial
from .recursion import RecursionTable, build_table, squared_norm_expr

__all__ = [
    "FlowError",
    "InvalidStateError",
    "CurveState",
    "FlowConfig",
    "Trajectory",
    "EnergyParts",
    "energy",
    "energy_parts",
    "gradient",
    "gradient_norm",
    "curvature",
    "run",
    "mcf_compare",
    "circle_radius_ode",
    "circle_coefficient",
    "self_intersects",
    "radius_fit",
    "isoperimetric_deficit",
    "redistribute",
    "hausdorff",
]

_D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
_D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


class FlowError(RuntimeError):
    pass


class InvalidStateError(FlowError):
    """The polygon is not simple."""


@dataclass
class CurveState:
    nodes: np.ndarray  # (N, 2), periodic order
    time: float = 0.0

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (N, 2)")

    @property
    def size(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_shape(cls, shape, nodes: int) -> CurveState:
        """Sample a closed plane curve (``circle`` or ``ellipse`` immersion) at uniform parameter."""
        from .geometry import Immersion, parse_shape
        im = parse_shape(shape) if isinstance(shape, str) else shape
        if not isinstance(im, Immersion) or im.n != 1 or im.dim != 2 or not im.periodic:
            raise ValueError(f"flow needs a closed plane curve, got {shape}")
        u = 2 * np.pi * np.arange(nodes) / nodes
        return cls(im.param(u[:, None]))

    def perturbed(self, amplitude: float, seed: int, modes: int = 4) -> CurveState:
        """Add a few random smooth Fourier modes in the radial direction."""
        rng = np.random.default_rng(seed)
        n = self.size
        u = 2 * np.pi * np.arange(n) / n
        centre = self.nodes.mean(axis=0)
        rel = self.nodes - centre
        r = np.linalg.norm(rel, axis=1)
        bump = np.zeros(n)
        for j in range(2, modes + 2):
            a, b = rng.uniform(-1, 1, 2)
            bump += (a * np.cos(j * u) + b * np.sin(j * u)) / j
        return CurveState(centre + rel * (1 + amplitude * bump / r.mean())[:, None], self.time)


@dataclass
class FlowConfig:
    k: int = 3
    eps: float = 1.0
    nodes: int = 128
    stepper: str = "descent"  # or "explicit"
    t_end: float = math.inf
    grad_tol: float = 1e-6
    max_steps: int = 100_000
    dt_min: float = 1e-14
    dt_max: float = 1e-1
    rtol: float = 1e-7
    atol: float = 1e-10
    redistribute_every: int = 50
    snapshot_every: int = 1  # descent: accepted steps between snapshots
    snapshot_dt: float = 0.01  # explicit: time between snapshots
    seed: int = 42

    def __post_init__(self):
        if not 3 <= self.k <= 6:
            raise ValueError("k must lie in 3..6")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.nodes < 16 or self.nodes < 4 * self.k:
            raise ValueError("need at least max(16, 4k) nodes")
        if self.stepper not in ("descent", "explicit"):
            raise ValueError("stepper must be 'descent' or 'explicit'")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["t_end"]):
            d["t_end"] = "inf"
        return d


@dataclass
class Trajectory:
    config: dict
    snapshots: list = field(default_factory=list)  # (t, nodes)
    log: list = field(default_factory=list)  # (t, energy, length, max_abs_curvature, radius_fit)
    status: str = "running"

    @property
    def flagged(self) -> bool:
        return self.status == "self_intersection"

    @property
    def final(self) -> CurveState:
        t, nodes = self.snapshots[-1]
        return CurveState(nodes, t)

    def energies(self) -> np.ndarray:
        return np.array([row[1] for row in self.log])

    def column(self, name: str) -> np.ndarray:
        idx = ("t", "energy", "length", "max_abs_curvature", "radius_fit").index(name)
        return np.array([row[idx] for row in self.log])

    def write_csv(self, directory) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        snap = directory / "snapshots.csv"
        with snap.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "node", "x", "y"])
            for t, nodes in self.snapshots:
                for i, (x, y) in enumerate(nodes):
                    w.writerow([f"{t:.17e}", i, f"{x:.17e}", f"{y:.17e}"])
        log = directory / "energy_log.csv"
        with log.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "energy", "length", "max_abs_curvature", "radius_fit"])
            for row in self.log:
                w.writerow([f"{v:.17e}" for v in row])
        return snap, log


# ---------------------------------------------------------------------------
# discrete energy
# ---------------------------------------------------------------------------

def _roll_stencil(f, coeffs):
    out = 0.0
    for off, c in zip(range(-3, 4), coeffs):
        if c:
            out = out + c * jnp.roll(f, -off, axis=0)
    return out


@lru_cache(maxsize=None)
def _density(k: int):
    """jax function of the curvature jets giving ``|A^k|^2``."""
    table = _table(k)
    poly, syms = curve_polynomial(squared_norm_expr(table, k))
    fn = sp.lambdify(syms, poly, modules=jnp)
    return fn, len(syms), poly


@lru_cache(maxsize=None)
def _table(k: int) -> RecursionTable:
    return build_table(max(k, 3))


def circle_coefficient(k: int) -> float:
    """``|A^k|^2 / kappa^(2k-4)`` on a circle."""
    _, nsym, poly = _density(k)
    syms = sp.symbols(f"kappa0:{nsym}")
    return float(poly.subs({syms[0]: 1, **{s: 0 for s in syms[1:]}}))


def _jets_and_speed(x, k):
    n = x.shape[0]
    du = 2 * jnp.pi / n
    xu = _roll_stencil(x, _D1) / du
    xuu = _roll_stencil(x, _D2) / du ** 2
    speed = jnp.sqrt(jnp.sum(xu * xu, axis=1))
    kappa = (xu[:, 0] * xuu[:, 1] - xu[:, 1] * xuu[:, 0]) / speed ** 3
    jets = [kappa]
    for _ in range(max(k - 3, 0)):
        jets.append(_roll_stencil(jets[-1], _D1) / du / speed)
    return jets, speed, du


def _parts(x, k):
    fn, nsym, _ = _density(k)
    jets, speed, du = _jets_and_speed(x, k)
    ds = speed * du
    dens = fn(*jets[:nsym]) * jnp.ones_like(ds)
    return jnp.sum(ds), jnp.sum(dens * ds)


@lru_cache(maxsize=None)
def _compiled(k: int):
    def total(x, eps):
        length, curv = _parts(x, k)
        return length + eps * curv

    parts = jax.jit(lambda x: _parts(x, k))
    value_and_grad = jax.jit(jax.value_and_grad(total))
    arc = jax.jit(lambda x: _jets_and_speed(x, k)[1] * (2 * jnp.pi / x.shape[0]))
    kap = jax.jit(lambda x: _jets_and_speed(x, 3)[0][0])
    return parts, value_and_grad, arc, kap


@dataclass(frozen=True)
class EnergyParts:
    length: float
    curvature: float
    eps: float

    @property
    def total(self) -> float:
        return self.length + self.eps * self.curvature


def _check(state: CurveState, k: int):
    if state.size < max(16, 4 * k):
        raise InvalidStateError(f"{state.size} nodes are too few for k={k}")
    if self_intersects(state.nodes):
        raise InvalidStateError("polygon self-intersects")


def energy_parts(state: CurveState, config: FlowConfig, table: RecursionTable | None = None) -> EnergyParts:
    """Length and curvature parts of the discrete energy.

    ``table`` is accepted for interface symmetry; the curve polynomial is
    built from (and cached with) a table of the same recursion.
    """
    _check(state, config.k)
    length, curv = _compiled(config.k)[0](jnp.asarray(state.nodes))
    return EnergyParts(float(length), float(curv), config.eps)


def energy(state: CurveState, config: FlowConfig, table: RecursionTable | None = None) -> float:
    return energy_parts(state, config, table).total


def gradient(state: CurveState, config: FlowConfig, table: RecursionTable | None = None) -> np.ndarray:
    """Exact derivative of the discrete energy with respect to the nodes, shape (N, 2)."""
    _check(state, config.k)
    _, g = _compiled(config.k)[1](jnp.asarray(state.nodes), config.eps)
    return np.asarray(g)


def curvature(nodes) -> np.ndarray:
    return np.asarray(_compiled(3)[3](jnp.asarray(nodes)))


# ---------------------------------------------------------------------------
# shape diagnostics
# ---------------------------------------------------------------------------

def self_intersects(nodes) -> bool:
    """Segment-segment test over all non-adjacent edge pairs."""
    p = np.asarray(nodes)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    if np.any(np.all(p == q, axis=1)):
        return True

    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    a, b = p[:, None, :], q[:, None, :]
    c, d = p[None, :, :], q[None, :, :]
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((n, n))
    gap = np.abs(i - j)
    cross &= (gap > 1) & (gap < n - 1)
    return bool(np.any(cross))


def radius_fit(nodes) -> float:
    """Algebraic least-squares circle fit."""
    p = np.asarray(nodes)
    a = np.column_stack([p[:, 0], p[:, 1], np.ones(len(p))])
    rhs = np.sum(p * p, axis=1)
    (cx2, cy2, c), *_ = np.linalg.lstsq(a, rhs, rcond=None)
    return float(np.sqrt(c + (cx2 / 2) ** 2 + (cy2 / 2) ** 2))


def isoperimetric_deficit(nodes) -> float:
    """``1 - 4 pi Area / Length^2`` of the polygon."""
    p = np.asarray(nodes)
    q = np.roll(p, -1, axis=0)
    area = 0.5 * abs(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))
    length = np.sum(np.linalg.norm(q - p, axis=1))
    return float(1 - 4 * np.pi * area / length ** 2)


def _fourier_eval(coef, u):
    """Trigonometric interpolant from FFT coefficients; the Nyquist mode is split evenly."""
    n = len(coef)
    freq = np.fft.fftfreq(n, 1.0 / n)
    basis = np.exp(1j * np.outer(u, freq))
    if n % 2 == 0:
        basis[:, n // 2] = np.cos(n // 2 * np.asarray(u))
    return (basis @ coef) / n


def redistribute(nodes) -> np.ndarray:
    """Resample the trigonometric interpolant at equal arc-length spacing, node 0 fixed."""
    p = np.asarray(nodes)
    n = len(p)
    z = p[:, 0] + 1j * p[:, 1]
    coef = np.fft.fft(z)
    freq = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        coef = coef.copy()
        coef[n // 2] = 0.5 * coef[n // 2]
        coef = np.append(coef, coef[n // 2])
        freq = np.append(freq, -freq[n // 2])
    dcoef = 1j * freq * coef

    def speed(u):
        return np.abs(np.exp(1j * np.outer(u, freq)) @ dcoef) / n

    # cumulative arc length from a fine trapezoid on the interpolant
    fine = np.linspace(0, 2 * np.pi, 16 * n + 1)
    sp_ = speed(fine)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (sp_[1:] + sp_[:-1]) * np.diff(fine))])
    total = cum[-1]
    target = total * np.arange(n) / n
    u = np.interp(target, cum, fine)
    for _ in range(3):
        s_u = np.interp(u, fine, cum)
        u = u - (s_u - target) / speed(u)
    u[0] = 0.0
    znew = np.exp(1j * np.outer(u, freq)) @ coef / n
    return np.column_stack([znew.real, znew.imag])


def _point_to_polyline(points, poly):
    a = poly
    d = np.roll(poly, -1, axis=0) - a
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(rel * d[None], axis=2) / np.sum(d * d, axis=1)[None], 0.0, 1.0)
    gap = rel - t[..., None] * d[None]
    return np.sqrt(np.min(np.sum(gap * gap, axis=2), axis=1))


def hausdorff(a, b, upsample: int = 8) -> float:
    """Hausdorff distance between the trigonometric interpolants of two closed polygons.

    Both curves are upsampled; each dense point is measured against the other
    dense polyline, so sampling gaps do not count as distance.
    """
    def dense(p):
        n = len(p)
        z = p[:, 0] + 1j * p[:, 1]
        u = 2 * np.pi * np.arange(n * upsample) / (n * upsample)
        out = _fourier_eval(np.fft.fft(z), u)
        return np.column_stack([out.real, out.imag])
    pa, pb = dense(np.asarray(a)), dense(np.asarray(b))
    return float(max(_point_to_polyline(pa, pb).max(), _point_to_polyline(pb, pa).max()))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _precondition(g: np.ndarray, nodes: np.ndarray, k: int, eps: float) -> np.ndarray:
    """Circulant Sobolev-type metric matching the stiffness of each Fourier mode."""
    n = len(nodes)
    length = float(np.sum(np.linalg.norm(np.roll(nodes, -1, axis=0) - nodes, axis=1)))
    rl = length / (2 * np.pi)
    q = 2 * np.pi * np.fft.fftfreq(n, 1.0 / n) / length
    symbol = (length / n) * (1 / rl ** 2 + q ** 2 + 2 * k * eps * np.abs(q) ** (2 * k - 2))
    return np.real(np.fft.ifft(np.fft.fft(g, axis=0) / symbol[:, None], axis=0))


def _log_row(t, e, length, nodes):
    return (float(t), float(e), float(length), float(np.max(np.abs(curvature(nodes)))),
            radius_fit(nodes))


def gradient_norm(g, nodes, length) -> float:
    """Euclidean norm of the normal part of the node gradient per unit length.

    Tangential components only move nodes along the curve, so they are left
    out of the stopping measure.
    """
    g = np.asarray(g)
    p = np.asarray(nodes)
    tangent = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1)[:, None]
    normal = g - np.sum(g * tangent, axis=1)[:, None] * tangent
    return float(np.linalg.norm(normal)) / length


def run(initial: CurveState, config: FlowConfig, *, eps_override: float | None = None) -> Trajectory:
    """Integrate the flow from ``initial``.

    ``descent`` takes Armijo-backtracked steps along a preconditioned
    negative gradient, so every accepted step lowers the energy; time is the
    accumulated step length.  ``explicit`` integrates ``dx/dt = -grad / ds``
    with an adaptive embedded Runge-Kutta pair and a stiffness cap on the
    step.  A self-intersection halts the run with ``status =
    "self_intersection"``.

    ``eps_override`` (may be 0) replaces ``config.eps`` and exists for the
    pure curve-shortening reference runs.
    """
    eps = config.eps if eps_override is None else eps_override
    _check(initial, config.k)
    traj = Trajectory(config=config.to_dict())
    if config.stepper == "descent":
        _run_descent(initial, config, eps, traj)
    else:
        _run_explicit(initial, config, eps, traj)
    return traj


def _run_descent(state: CurveState, config: FlowConfig, eps: float, traj: Trajectory):
    parts, value_and_grad, arc, _ = _compiled(config.k)
    x = state.nodes.copy()
    t = state.time

    def evaluate(y):
        e, g = value_and_grad(jnp.asarray(y), eps)
        return float(e), np.asarray(g)

    e, g = evaluate(x)
    length = float(parts(jnp.asarray(x))[0])
    traj.snapshots.append((t, x.copy()))
    traj.log.append(_log_row(t, e, length, x))
    alpha = 1.0
    for step in range(1, config.max_steps + 1):
        if gradient_norm(g, x, length) < config.grad_tol:
            traj.status = "converged"
            break
        if t >= config.t_end:
            traj.status = "t_end"
            break
        d = -_precondition(g, x, config.k, eps)
        slope = float(np.sum(g * d))
        accepted = False
        while alpha > 1e-16:
            y = x + alpha * d
            if not self_intersects(y):
                e_new, g_new = evaluate(y)
                if np.isfinite(e_new) and e_new <= e + 1e-4 * alpha * slope and e_new <= e:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            traj.status = "stalled"
            break
        x, e, g = y, e_new, g_new
        t += alpha
        alpha = min(alpha * 2.0, 1e6)
        if config.redistribute_every and step % config.redistribute_every == 0:
            y = redistribute(x)
            if not self_intersects(y):
                e_r, g_r = evaluate(y)
                if e_r <= e:
                    x, e, g = y, e_r, g_r
        length = float(parts(jnp.asarray(x))[0])
        traj.log.append(_log_row(t, e, length, x))
        if step % config.snapshot_every == 0:
            traj.snapshots.append((t, x.copy()))
    else:
        traj.status = "max_steps"
    if traj.snapshots[-1][0] != t:
        traj.snapshots.append((t, x.copy()))


_CAP_REFRESH = 50


def _spectral_radius(velocity, y, seed: int, iters: int = 40) -> float:
    """Largest ``|lambda|`` of the velocity Jacobian by power iteration on jvps."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(y.shape)
    v /= np.linalg.norm(v)
    y = jnp.asarray(y)
    lam = 0.0
    for _ in range(iters):
        w = np.asarray(jax.jvp(velocity, (y,), (jnp.asarray(v),))[1])
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            break
        v = w / lam
    return lam


def _run_explicit(state: CurveState, config: FlowConfig, eps: float, traj: Trajectory):
    parts, value_and_grad, arc, _ = _compiled(config.k)
    n = state.size

    def velocity_jax(y):
        x = y.reshape(n, 2)
        _, g = value_and_grad(x, eps)
        return -(g / arc(x)[:, None]).ravel()

    velocity_jax = jax.jit(velocity_jax)

    def velocity(_t, y):
        return np.asarray(velocity_jax(jnp.asarray(y)))

    def stability_cap(y):
        # RK45 is stable on the negative real axis up to about 3.3
        return min(2.0 / max(_spectral_radius(velocity_jax, y, config.seed), 1e-300), config.dt_max)

    def record(t, y):
        x = y.reshape(n, 2)
        length, curv = parts(jnp.asarray(x))
        traj.snapshots.append((float(t), x.copy()))
        traj.log.append(_log_row(t, float(length + eps * curv), float(length), x))

    t0 = state.time
    t_end = config.t_end if math.isfinite(config.t_end) else t0 + 1.0
    y = state.nodes.ravel().copy()
    record(t0, y)
    next_snap = t0 + config.snapshot_dt
    cap = stability_cap(y)
    solver = RK45(velocity, t0, y, t_end, max_step=cap, rtol=config.rtol, atol=config.atol,
                  first_step=cap / 4)
    steps = 0
    traj.status = "t_end"
    while solver.status == "running":
        last_t, last_y = solver.t, solver.y.copy()
        solver.step()
        steps += 1
        if solver.status == "failed":
            traj.status = "stalled"
            break
        x = solver.y.reshape(n, 2)
        if self_intersects(x):
            traj.status = "self_intersection"
            if traj.snapshots[-1][0] < last_t:
                record(last_t, last_y)
            return
        dense = solver.dense_output()
        while next_snap <= solver.t + 1e-15 and next_snap <= t_end + 1e-15:
            record(next_snap, dense(next_snap))
            next_snap += config.snapshot_dt
        redistribute_now = config.redistribute_every and steps % config.redistribute_every == 0
        if solver.status == "running" and (redistribute_now or steps % _CAP_REFRESH == 0):
            if redistribute_now:
                xr = redistribute(x)
                if not self_intersects(xr):
                    x = xr
            cap = stability_cap(x.ravel())
            solver = RK45(velocity, solver.t, x.ravel(), t_end, max_step=cap, rtol=config.rtol,
                          atol=config.atol,
                          first_step=min(solver.step_size, cap, t_end - solver.t))
        if steps >= config.max_steps:
            traj.status = "max_steps"
            break
    if traj.snapshots[-1][0] < solver.t - 1e-15:
        record(solver.t, solver.y)


# ---------------------------------------------------------------------------
# comparison with curve shortening
# ---------------------------------------------------------------------------

def circle_radius_ode(r0: float, k: int, eps: float, times) -> np.ndarray:
    """Radius of a circle under the flow: ``dR/dt = -(1 + eps c (5-2k) R^(4-2k)) / R``.

    ``c`` is :func:`circle_coefficient`; ``eps = 0`` is curve shortening.
    """
    c = circle_coefficient(k)
    times = np.asarray(times, dtype=float)

    def rhs(_t, r):
        return [-(1 + eps * c * (5 - 2 * k) * r[0] ** (4 - 2 * k)) / r[0]]

    sol = solve_ivp(rhs, (0.0, float(times.max())), [r0], t_eval=times, rtol=1e-12, atol=1e-14,
                    method="DOP853")
    return sol.y[0]


def mcf_compare(initial: CurveState, configs: list[FlowConfig], t_window: float,
                *, circle_radius: float | None = None, reference_nodes: int | None = None) -> dict:
    """Deviation of each flow from curve shortening over ``[0, t_window]``.

    For a round initial circle (``circle_radius`` given) the reference is the
    shrinking-circle law and the deviation is the sup of the fitted-radius
    error; otherwise a pure curve-shortening run of the same polygon (at
    ``reference_nodes``) is the reference and the deviation is the largest
    Hausdorff distance between snapshots at common times.
    """
    eps_list = [c.eps for c in configs]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    reference = None
    if circle_radius is None:
        base = configs[-1]
        ref_nodes = reference_nodes or initial.size
        start = initial if ref_nodes == initial.size else CurveState(_resample(initial.nodes, ref_nodes))
        ref_cfg = FlowConfig(**{**base.to_dict(), "t_end": t_window, "stepper": "explicit",
                                "nodes": ref_nodes, "k": 3})
        reference = run(start, ref_cfg, eps_override=0.0)
    rows = []
    for cfg in configs:
        cfg = FlowConfig(**{**cfg.to_dict(), "t_end": t_window})
        traj = run(initial, cfg)
        times = np.array([t for t, _ in traj.snapshots])
        if circle_radius is not None:
            radii = np.array([radius_fit(x) for _, x in traj.snapshots])
            ref = np.sqrt(np.maximum(circle_radius ** 2 - 2 * times, 0.0))
            dev = float(np.max(np.abs(radii - ref)))
        else:
            ref_snaps = {round(t, 9): x for t, x in reference.snapshots}
            dev = 0.0
            for t, x in traj.snapshots:
                key = round(t, 9)
                if key in ref_snaps:
                    dev = max(dev, hausdorff(x, ref_snaps[key]))
        rows.append({"eps": cfg.eps, "deviation": dev, "status": traj.status,
                     "t_reached": float(times[-1])})
    devs = [r["deviation"] for r in rows]
    return {
        "t_window": t_window,
        "reference": "circle_law" if circle_radius is not None else "curve_shortening_run",
        "rows": rows,
        "monotone": all(b < a for a, b in zip(devs, devs[1:])),
    }


def _resample(nodes, count):
    p = np.asarray(nodes)
    z = p[:, 0] + 1j * p[:, 1]
    coef = np.fft.fft(z)
    u = 2 * np.pi * np.arange(count) / count
    out = _fourier_eval(coef, u)
    return np.column_stack([out.real, out.imag])
