"""Truncated infinite-dimensional Riccati system for the Fourier-Laplace functional.

Solver time tau = T - t runs forward from psi(0) = psi0. Each step of the
quasi-implicit scheme freezes the left factor of the quadratic term at the
previous step and solves

    J psi_{i+1} = E psi_i + G P(tau_i),   J = I - G (c^2/2 R(psi_i) + l(tau_i) N + Q),

where E = exp(A Delta) and G = A^{-1}(E - I) act diagonally.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .errors import InputError, NonFinite, Overflow, SingularJ
from .models import ModelSpec
from .oulaw import g0 as g0_fn
from .powerseries import romano_touzi_series

PIVOT_RTOL = 1e-14

_OK, _SINGULAR, _NONFINITE = 0, 1, 2


@dataclass(frozen=True)
class RiccatiConfig:
    """Truncation degree M, time steps, cap level k_max.

    Steps: n if given, else ceil(steps_per_year T) if given, else ceil(200 max(1, T)).
    A positive ``layer`` splits off the last ``layer`` years of solver time
    (calendar times near 0) and steps it ``layer_factor`` times finer; the grid is
    then uniform on each of the two pieces.
    """

    M: int = 32
    n: int | None = None
    k_max: int = 15
    steps_per_year: float | None = None
    layer: float = 0.0
    layer_factor: int = 1

    def __post_init__(self) -> None:
        if self.M < 2:
            raise InputError("M must be >= 2")
        if self.n is not None and self.n < 1:
            raise InputError("n must be >= 1")
        if self.k_max < 2:
            raise InputError("k_max must be >= 2")
        if self.steps_per_year is not None and not self.steps_per_year > 0:
            raise InputError("steps_per_year must be > 0")
        if not self.layer >= 0 or self.layer_factor < 1:
            raise InputError("layer must be >= 0 and layer_factor >= 1")

    def _bulk_steps(self, length: float, T: float) -> int:
        if self.n is not None:
            return max(1, int(round(self.n * length / T)))
        if self.steps_per_year is not None:
            return max(1, int(math.ceil(self.steps_per_year * length - 1e-9)))
        return max(1, int(math.ceil(200 * max(1.0, T) * length / T - 1e-9)))

    def segments(self, T: float) -> list[tuple[float, float, int]]:
        """(start, length, steps) of each uniform piece of the solver-time grid."""
        if not T > 0:
            raise InputError("T must be > 0")
        if self.layer <= 0 or self.layer_factor == 1 or self.layer >= T:
            if self.n is not None:
                return [(0.0, T, int(self.n))]
            return [(0.0, T, self._bulk_steps(T, T))]
        head = T - self.layer
        tail_steps = max(1, int(math.ceil(self._bulk_steps(self.layer, T) * self.layer_factor - 1e-9)))
        return [(0.0, head, self._bulk_steps(head, T)), (head, self.layer, tail_steps)]

    def refined(self, factor: float, T: float) -> "RiccatiConfig":
        """Same grid shape with the step rate multiplied by ``factor``."""
        rate = self.n / T if self.n is not None else (
            self.steps_per_year if self.steps_per_year is not None else 200 * max(1.0, T) / T)
        return dataclasses.replace(self, n=None, steps_per_year=rate * factor)

    def steps(self, T: float) -> int:
        return sum(s[2] for s in self.segments(T))

    def grid(self, T: float) -> np.ndarray:
        parts = [np.array([0.0])]
        for start, length, n in self.segments(T):
            parts.append(start + length * np.arange(1, n + 1) / n)
        g = np.concatenate(parts)
        g[-1] = T
        return g


@dataclass(frozen=True)
class Schedule:
    """Complex function of solver time: a constant, or a table interpolated linearly."""

    value: complex = 0j
    times: tuple[float, ...] = ()
    values: tuple[complex, ...] = ()

    def __post_init__(self) -> None:
        if self.times:
            if len(self.times) != len(self.values):
                raise InputError("schedule table length mismatch")
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
            object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
            if not np.isfinite(np.asarray(self.values)).all():
                raise InputError("schedule values must be finite")
        else:
            object.__setattr__(self, "value", complex(self.value))
            if not np.isfinite(self.value):
                raise InputError("schedule value must be finite")

    @property
    def is_constant(self) -> bool:
        return not self.times

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.is_constant:
            out = np.full(tau.shape, self.value, dtype=complex)
        else:
            v = np.asarray(self.values)
            out = np.interp(tau, self.times, v.real) + 1j * np.interp(tau, self.times, v.imag)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CoefficientSchedule:
    """The pair (g1, g2) on the horizon T defining one functional evaluation."""

    g1: Schedule
    g2: Schedule
    T: float

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise InputError("T must be > 0")
        for name in ("g1", "g2"):
            v = getattr(self, name)
            if not isinstance(v, Schedule):
                object.__setattr__(self, name, Schedule(complex(v)))

    @classmethod
    def constant(cls, g1: complex, g2: complex, T: float) -> "CoefficientSchedule":
        return cls(Schedule(complex(g1)), Schedule(complex(g2)), float(T))


TransformQuery = CoefficientSchedule


@dataclass(frozen=True, eq=False)
class StaticMatrices:
    """Step-independent pieces of the scheme (0-based, dimension M+1)."""

    delta: float
    A: np.ndarray  # diagonal of A
    E: np.ndarray  # diagonal of exp(A delta)
    G: np.ndarray  # diagonal of A^{-1}(exp(A delta) - I)
    Q: np.ndarray
    N: np.ndarray
    pp: np.ndarray  # (p*p) truncated to degree M
    p: np.ndarray  # p truncated to degree M


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    grid: np.ndarray
    psi: np.ndarray
    config: RiccatiConfig
    T: float
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.psi[-1]


def assemble_static(model: ModelSpec, cfg: RiccatiConfig, T: float, delta: float | None = None) -> StaticMatrices:
    """Matrices for step size ``delta`` (default: the first grid piece of cfg on [0, T])."""
    D = cfg.M + 1
    if delta is None:
        _, length, n = cfg.segments(T)[0]
        delta = length / n
    a, b, c = model.ou.a, model.ou.b, model.ou.c
    k = np.arange(D, dtype=float)
    A = b * k
    E = np.exp(A * delta)
    x = A * delta
    small = np.abs(x) < 1e-8
    G = np.where(small, delta * (1.0 + 0.5 * x), np.expm1(np.where(small, 1.0, x)) / np.where(small, 1.0, A))
    G[0] = delta
    Q = np.zeros((D, D))
    idx = np.arange(D - 1)
    Q[idx, idx + 1] = a * (idx + 1)
    idx = np.arange(D - 2)
    Q[idx, idx + 2] = 0.5 * c * c * np.minimum((idx + 1) * (idx + 2), cfg.k_max ** 2)
    p = model.p.array(D)
    jj, kk = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    m = jj + 1 - kk
    N = np.where((m >= 0) & (m < D), kk * p[np.clip(m, 0, D - 1)], 0.0)
    pp = np.convolve(model.p.array(), model.p.array())
    return StaticMatrices(delta=delta, A=A, E=E, G=G, Q=Q, N=N, pp=_pad(pp, D), p=p)


def inhomogeneous_term(model: ModelSpec, query: CoefficientSchedule, cfg: RiccatiConfig,
                       t_solver: float) -> tuple[np.ndarray, complex]:
    """Forcing vector P(tau) and the scalar l(tau) multiplying N."""
    g1 = complex(query.g1(t_solver))
    g2 = complex(query.g2(t_solver))
    g0v = float(g0_fn(model, query.T - t_solver))
    pp = _pad(np.convolve(model.p.array(), model.p.array()), cfg.M + 1)
    P = (g2 + 0.5 * g1 * (g1 - 1.0)) * g0v * g0v * pp
    l = model.ou.c * model.rho * g1 * g0v
    return P.astype(complex), l


def r_matrix(psi: np.ndarray) -> np.ndarray:
    """R[j, k] = (j+2-k) k psi[j+2-k], zero outside 0..M."""
    D = psi.size
    jj, kk = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    m = jj + 2 - kk
    valid = (m >= 0) & (m < D)
    return np.where(valid, m * kk * psi[np.clip(m, 0, D - 1)], 0.0)


def step(psi_i: np.ndarray, t_i: float, static: StaticMatrices, model: ModelSpec,
         query: CoefficientSchedule, cfg: RiccatiConfig, index: int = 0) -> np.ndarray:
    """One quasi-implicit step with a LAPACK LU (reference path for the batched kernel)."""
    psi_i = np.asarray(psi_i, dtype=complex)
    if not np.isfinite(psi_i).all():
        raise NonFinite(index, "input state")
    P, l = inhomogeneous_term(model, query, cfg, t_i)
    c2 = model.ou.c ** 2
    J = np.eye(psi_i.size) - static.G[:, None] * (0.5 * c2 * r_matrix(psi_i) + l * static.N + static.Q)
    rhs = static.E * psi_i + static.G * P
    lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * np.linalg.norm(J, np.inf):
        raise SingularJ(index)
    out = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    if not np.isfinite(out).all():
        raise NonFinite(index)
    return out


@numba.njit(cache=True, nogil=True)
def _march(psi0, E, G, GQ, GN, pp, half_c2, c_rho, g1, g2, g0, traj, keep):
    """Step every batch element through all time steps.

    Dense LU with partial pivoting in natural order. Row j of J vanishes beyond
    column j+2, so each row's last nonzero column is tracked and updates skip
    the known zeros; without row swaps elimination costs O(D^2).
    """
    B, D = psi0.shape
    n = g0.shape[0]
    status = np.zeros(B, dtype=np.int64)
    where = np.full(B, -1, dtype=np.int64)
    A = np.empty((D, D), dtype=np.complex128)
    r = np.empty(D, dtype=np.complex128)
    ext = np.empty(D, dtype=np.int64)
    for bi in range(B):
        psi = psi0[bi].copy()
        if keep:
            traj[bi, 0, :] = psi
        for i in range(n):
            gg = g0[i]
            G1 = g1[bi, i]
            pfac = (g2[bi, i] + 0.5 * G1 * (G1 - 1.0)) * gg * gg
            l = c_rho * G1 * gg
            norm = 0.0
            for j in range(D):
                row = 0.0
                top = min(j + 3, D)
                for k in range(top, D):
                    A[j, k] = 0.0
                for k in range(top):
                    val = -(GQ[j, k] + l * GN[j, k])
                    m = j + 2 - k
                    if m >= 0 and m < D:
                        val -= G[j] * half_c2 * (m * k) * psi[m]
                    if j == k:
                        val += 1.0
                    A[j, k] = val
                    row += abs(val.real) + abs(val.imag)
                if row > norm:
                    norm = row
                r[j] = E[j] * psi[j] + G[j] * pfac * pp[j]
                ext[j] = min(j + 2, D - 1)
            tol2 = (1e-14 * norm) ** 2
            bad = False
            for s in range(D):
                piv = s
                a = A[s, s]
                best = a.real * a.real + a.imag * a.imag
                for q in range(s + 1, D):
                    a = A[q, s]
                    mag = a.real * a.real + a.imag * a.imag
                    if mag > best:
                        best = mag
                        piv = q
                if not (best >= tol2) or best == 0.0:
                    bad = True
                    break
                if piv != s:
                    hi = max(ext[s], ext[piv])
                    for t in range(s, hi + 1):
                        tmp = A[s, t]
                        A[s, t] = A[piv, t]
                        A[piv, t] = tmp
                    tmp = r[s]
                    r[s] = r[piv]
                    r[piv] = tmp
                    e = ext[s]
                    ext[s] = ext[piv]
                    ext[piv] = e
                e = ext[s]
                inv = 1.0 / A[s, s]
                for q in range(s + 1, D):
                    f = A[q, s] * inv
                    if f != 0.0:
                        for t in range(s + 1, e + 1):
                            A[q, t] -= f * A[s, t]
                        r[q] -= f * r[s]
                        if e > ext[q]:
                            ext[q] = e
                    A[q, s] = 0.0
            if bad:
                status[bi] = 1
                where[bi] = i
                break
            finite = True
            for s in range(D - 1, -1, -1):
                acc = r[s]
                for t in range(s + 1, ext[s] + 1):
                    acc -= A[s, t] * r[t]
                v = acc / A[s, s]
                r[s] = v
                if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                    finite = False
            if not finite:
                status[bi] = 2
                where[bi] = i
                break
            for j in range(D):
                psi[j] = r[j]
            if keep:
                traj[bi, i + 1, :] = psi
        if not keep:
            traj[bi, 0, :] = psi
    return status, where


def solve_batch(model: ModelSpec, g1, g2, T: float, cfg: RiccatiConfig, psi0=None,
                threads: int = 1, trajectory: bool = False, raise_errors: bool = True,
                static: StaticMatrices | None = None, g0_values: np.ndarray | None = None):
    """Solve B independent systems sharing (model, T, cfg).

    g1, g2 are arrays of shape (B,) (constant in time) or (B, n) sampled at the
    left endpoints of cfg.grid(T). Returns psi(T) with shape (B, M+1), or the
    full (B, n+1, M+1) trajectory. With ``raise_errors`` False also returns the
    per-element status codes (0 ok, 1 singular J, 2 non-finite) and failing steps.
    """
    segments = cfg.segments(T)
    if static is not None and len(segments) != 1:
        raise InputError("a precomputed static block needs a single-piece grid")
    grid = cfg.grid(T)
    n = grid.size - 1
    D = cfg.M + 1
    g1 = np.atleast_1d(np.asarray(g1, dtype=complex))
    B = g1.shape[0]
    g2 = np.asarray(g2, dtype=complex)
    g1 = _broadcast_schedule(g1, B, n)
    g2 = _broadcast_schedule(np.broadcast_to(g2, (B,) + g2.shape[1:]) if g2.ndim <= 1 else g2, B, n)
    if g0_values is None:
        g0_values = np.asarray(g0_fn(model, T - grid[:-1]), dtype=float)
    g0_values = np.ascontiguousarray(np.broadcast_to(g0_values, (n,)), dtype=float)
    if psi0 is None:
        start = np.zeros((B, D), dtype=complex)
    else:
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.shape[-1] != D:
            raise InputError(f"psi0 must have length M+1={D}")
        start = np.ascontiguousarray(np.broadcast_to(psi0, (B, D)), dtype=complex)
    half_c2 = 0.5 * model.ou.c ** 2
    c_rho = model.ou.c * model.rho
    steps_kept = n + 1 if trajectory else 1
    traj = np.empty((B, steps_kept, D), dtype=complex)
    status = np.zeros(B, dtype=np.int64)
    where = np.full(B, -1, dtype=np.int64)
    pieces = []
    offset = 0
    for _, length, m in segments:
        st = static if static is not None else assemble_static(model, cfg, T, delta=length / m)
        pieces.append((offset, m, st, st.G[:, None] * st.Q, st.G[:, None] * st.N, st.pp.astype(float)))
        offset += m

    def run(lo: int, hi: int) -> None:
        state = start[lo:hi].copy()
        alive = np.ones(hi - lo, dtype=bool)
        if trajectory:
            traj[lo:hi, 0] = state
        for off, m, st, GQ, GN, pp in pieces:
            sub = np.empty((hi - lo, m + 1 if trajectory else 1, D), dtype=complex)
            s, w = _march(state, st.E, st.G, GQ, GN, pp, half_c2, c_rho,
                          np.ascontiguousarray(g1[lo:hi, off:off + m]),
                          np.ascontiguousarray(g2[lo:hi, off:off + m]),
                          np.ascontiguousarray(g0_values[off:off + m]), sub, trajectory)
            fresh = alive & (s != 0)
            status[lo:hi][fresh] = s[fresh]
            where[lo:hi][fresh] = w[fresh] + off
            alive &= s == 0
            if trajectory:
                traj[lo:hi, off + 1:off + m + 1] = sub[:, 1:]
                state = np.ascontiguousarray(sub[:, -1])
            else:
                state = np.ascontiguousarray(sub[:, 0])
        if not trajectory:
            traj[lo:hi, 0] = state

    chunks = _chunks(B, threads)
    if len(chunks) == 1:
        run(*chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            list(ex.map(lambda ab: run(*ab), chunks))
    if raise_errors and np.any(status):
        first = int(np.flatnonzero(status)[0])
        detail = f"batch element {first}, g1={g1[first, 0]:.6g}"
        if status[first] == _SINGULAR:
            raise SingularJ(int(where[first]), detail)
        raise NonFinite(int(where[first]), detail)
    out = traj if trajectory else traj[:, 0, :]
    if raise_errors:
        return out
    return out, status, where


def solve(model: ModelSpec, query: CoefficientSchedule, cfg: RiccatiConfig, psi0=None,
          threads: int = 1) -> RiccatiSolution:
    """Full trajectory of one system; psi0 defaults to zero."""
    T = query.T
    grid = cfg.grid(T)
    taus = grid[:-1]
    g1 = np.asarray(query.g1(taus), dtype=complex)[None, :]
    g2 = np.asarray(query.g2(taus), dtype=complex)[None, :]
    psi = solve_batch(model, g1, g2, T, cfg, psi0=psi0, threads=threads, trajectory=True)[0]
    return RiccatiSolution(grid=grid, psi=psi, config=cfg, T=T)


def solve_discretized(model: ModelSpec, query: CoefficientSchedule, cfg: RiccatiConfig,
                      n_jumps: int) -> RiccatiSolution:
    """Jump-discretized system: homogeneous flow plus Dirac increments at tau = T j / n_jumps.

    Each increment carries the mass of its cell, integrated adaptively in s = T - tau,
    so the steep g0 layer near s = 0 is not point-sampled. The homogeneous pieces use
    the quasi-implicit stepper with P = 0 and l = 0, ceil(n / n_jumps) sub-steps per
    interval. The returned grid holds the jump times.
    """
    if n_jumps < 1:
        raise InputError("n_jumps must be >= 1")
    T = query.T
    rho, c = model.rho, model.ou.c
    D = cfg.M + 1
    p1, p2, p3, q = (s.array(D).astype(complex) for s in romano_touzi_series(model))
    sub = max(1, math.ceil(cfg.steps(T) / n_jumps))
    h = T / n_jumps
    sub_cfg = RiccatiConfig(M=cfg.M, n=sub, k_max=cfg.k_max)
    static = assemble_static(model, sub_cfg, h)
    zeros = np.zeros((1, sub), dtype=complex)
    ones = np.ones(sub)
    taus = np.linspace(0.0, T, n_jumps + 1)
    pk = np.zeros(D)
    pk[1:] = model.p.array(D)[:-1] / np.arange(1, D)

    def g0s(s: float) -> float:
        return float(g0_fn(model, s))

    def g1s(s: float) -> complex:
        return complex(query.g1(T - s))

    def shift(tau: float) -> np.ndarray:
        return rho * complex(query.g1(tau)) * g0s(T - tau) / c * pk

    m1, m2 = _cell_masses(model, query, taus)
    phi = rho * complex(query.g1(0.0)) * g0s(T) * q
    out = np.empty((n_jumps + 1, D), dtype=complex)
    out[0] = phi - shift(0.0)
    for j in range(1, n_jumps + 1):
        phi = solve_batch(model, zeros, zeros, h, sub_cfg, psi0=phi, static=static, g0_values=ones)[0]
        lo, hi = T - taus[j], T - taus[j - 1]
        # the p3 density is rho d/ds (g1 g0), so its cell mass is a difference
        m3 = rho * (g1s(hi) * g0s(hi) - g1s(lo) * g0s(lo))
        phi = phi + m1[j - 1] * p1 + m2[j - 1] * p2 + m3 * p3
        if not np.isfinite(phi).all():
            raise NonFinite(j, "jump increment")
        out[j] = phi - shift(taus[j])
    return RiccatiSolution(grid=taus, psi=out, config=cfg, T=T, meta={"n_jumps": n_jumps, "substeps": sub})


CELL_NODES = 32


def _cell_masses(model: ModelSpec, query: CoefficientSchedule, taus: np.ndarray):
    """Integrals of the p1 and p2 jump densities over each cell, Gauss-Legendre in sqrt(s)."""
    T = query.T
    rho = model.rho
    x, w = np.polynomial.legendre.leggauss(CELL_NODES)
    r_lo = np.sqrt(T - taus[1:])[:, None]
    r_hi = np.sqrt(T - taus[:-1])[:, None]
    r = 0.5 * (r_hi - r_lo) * x[None, :] + 0.5 * (r_hi + r_lo)
    wt = 0.5 * (r_hi - r_lo) * w[None, :] * 2.0 * r  # ds = 2 r dr
    s = r * r
    tau = (T - s).ravel()
    G1 = np.asarray(query.g1(tau), dtype=complex).reshape(s.shape)
    G2 = np.asarray(query.g2(tau), dtype=complex).reshape(s.shape)
    g = np.asarray(g0_fn(model, s.ravel()), dtype=float).reshape(s.shape)
    d1 = (0.5 * (1 - rho * rho) * G1 * G1 - 0.5 * G1 + G2) * g * g
    d2 = rho * G1 * g
    return (d1 * wt).sum(axis=1), (d2 * wt).sum(axis=1)


def functional_value(sol: RiccatiSolution, x: float) -> complex:
    """exp(sum_k psi_k(T) x^k)."""
    return exponent_value(sol.final, x)


def exponent_value(psi: np.ndarray, x: float) -> complex:
    acc = 0j
    for v in psi[::-1]:
        acc = acc * x + v
    if not np.isfinite(acc):
        raise Overflow("non-finite exponent")
    if acc.real > 700:
        raise Overflow(f"exponent real part {acc.real:.3g} exceeds 700")
    return complex(np.exp(acc))


def _pad(a: np.ndarray, D: int) -> np.ndarray:
    out = np.zeros(D)
    m = min(D, a.size)
    out[:m] = a[:m]
    return out


def _broadcast_schedule(g: np.ndarray, B: int, n: int) -> np.ndarray:
    if g.ndim == 1:
        return np.ascontiguousarray(np.repeat(g[:, None], n, axis=1))
    if g.shape != (B, n):
        raise InputError(f"schedule array must have shape ({B},) or ({B}, {n})")
    return np.ascontiguousarray(g)


def _chunks(B: int, threads: int) -> list[tuple[int, int]]:
    k = max(1, min(int(threads), B))
    edges = np.linspace(0, B, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
