"""Gauss-Newton dogleg trust-region fitting of rank-(L,L,1) block terms.

The factors are complex; because the model is holomorphic in its parameters,
the Gauss-Newton normal equations over the interleaved real/imag coordinates
reduce exactly to their complex counterparts, which is what is implemented
(same steps, half the memory).  The real-coordinate gradient is exposed for
finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor_core import BTDModel, BlockTerm, check_finite, frobenius

TIKHONOV = 1e-12
RANK_TOL = 1e-10


class SolverFailure(Exception):
    """All restarts diverged (non-finite residual)."""


class CanonicalizationFailure(Exception):
    """A fitted factor is rank deficient; the term cannot be demapped."""


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    rel_residual_tol: float = 1e-8
    grad_tol: float = 1e-8
    trust_radius_init: float = 1.0
    trust_radius_max: float = 1e3
    step_accept_ratio: float = 0.1
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.rel_residual_tol <= 0 or self.grad_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    model: BTDModel
    relative_residual: float
    iterations: int
    converged: bool
    restart_index: int
    residual_history: tuple[float, ...] = ()
    undecodable: tuple[int, ...] = ()


# ---------------------------------------------------------------------------
# Parameter packing: per term [vec(A) | vec(B) | h], Fortran order, complex.
# ---------------------------------------------------------------------------

def _factor_sizes(dims, L):
    T1, T2, N = dims
    return T1 * L, T2 * L, N


def pack_factors(factors, dims, L) -> np.ndarray:
    chunks = []
    for A, B, h in factors:
        chunks.extend([A.ravel(order="F"), B.ravel(order="F"), h])
    return np.concatenate(chunks)


def unpack_factors(x: np.ndarray, dims, K: int, L: int):
    T1, T2, N = dims
    na, nb, nh = _factor_sizes(dims, L)
    per = na + nb + nh
    factors = []
    for k in range(K):
        s = k * per
        A = x[s:s + na].reshape(T1, L, order="F")
        B = x[s + na:s + na + nb].reshape(T2, L, order="F")
        h = x[s + na + nb:s + per]
        factors.append((A, B, h))
    return factors


def complex_to_real(x: np.ndarray) -> np.ndarray:
    out = np.empty(2 * x.size)
    out[0::2] = x.real
    out[1::2] = x.imag
    return out


def real_to_complex(x: np.ndarray) -> np.ndarray:
    return x[0::2] + 1j * x[1::2]


def _model_vec(factors, dims) -> np.ndarray:
    T1, T2, N = dims
    m = np.zeros(T1 * T2 * N, dtype=np.complex128)
    for A, B, h in factors:
        m += np.einsum("il,jl,n->ijn", A, B, h).ravel(order="F")
    return m


def _jacobian(factors, dims, L) -> np.ndarray:
    """d vec(model) / d x as a dense complex matrix."""
    T1, T2, N = dims
    M = T1 * T2 * N
    na, nb, nh = _factor_sizes(dims, L)
    per = na + nb + nh
    J = np.empty((M, per * len(factors)), dtype=np.complex128)
    I1, I2, IN = np.eye(T1), np.eye(T2), np.eye(N)
    for k, (A, B, h) in enumerate(factors):
        s = k * per
        for ell in range(L):
            J[:, s + ell * T1:s + (ell + 1) * T1] = \
                np.kron(h[:, None], np.kron(B[:, ell][:, None], I1))
        for ell in range(L):
            J[:, s + na + ell * T2:s + na + (ell + 1) * T2] = \
                np.kron(h[:, None], np.kron(I2, A[:, ell][:, None]))
        J[:, s + na + nb:s + per] = np.kron(IN, (A @ B.T).ravel(order="F")[:, None])
    return J


def objective(Y: np.ndarray, x: np.ndarray, K: int, L: int) -> float:
    """Squared Frobenius misfit of the packed complex parameter vector."""
    factors = unpack_factors(x, Y.shape, K, L)
    r = Y.ravel(order="F") - _model_vec(factors, Y.shape)
    return float(np.vdot(r, r).real)


def gradient_real(Y: np.ndarray, x: np.ndarray, K: int, L: int) -> np.ndarray:
    """Gradient of :func:`objective` w.r.t. interleaved real/imag coordinates."""
    factors = unpack_factors(x, Y.shape, K, L)
    r = Y.ravel(order="F") - _model_vec(factors, Y.shape)
    J = _jacobian(factors, Y.shape, L)
    return -2.0 * complex_to_real(J.conj().T @ r)


# ---------------------------------------------------------------------------
# Dogleg trust-region core.
# ---------------------------------------------------------------------------

def _dogleg_step(J, r, radius):
    """Minimize ||r - J d|| within ||d|| <= radius (Cauchy/GN dogleg)."""
    g = J.conj().T @ r
    G = J.conj().T @ J
    lam = TIKHONOV * max(1.0, float(np.max(G.diagonal().real)))
    G[np.diag_indices_from(G)] += lam
    try:
        d_gn = np.linalg.solve(G, g)
    except np.linalg.LinAlgError:
        d_gn = np.linalg.lstsq(G, g, rcond=None)[0]
    if np.linalg.norm(d_gn) <= radius:
        return d_gn, g
    Jg = J @ g
    t = float(np.vdot(g, g).real / max(np.vdot(Jg, Jg).real, 1e-300))
    d_sd = t * g
    n_sd = np.linalg.norm(d_sd)
    if n_sd >= radius:
        return (radius / np.linalg.norm(g)) * g, g
    diff = d_gn - d_sd
    a = float(np.vdot(diff, diff).real)
    b = 2.0 * float(np.vdot(d_sd, diff).real)
    c = n_sd * n_sd - radius * radius
    s = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return d_sd + s * diff, g


def _run_gndl(y_vec, dims, K, L, x0, config):
    """One GN-dogleg descent from x0; returns (x, residual, iters, converged, history)."""
    x = x0.copy()
    factors = unpack_factors(x, dims, K, L)
    r = y_vec - _model_vec(factors, dims)
    res = float(np.linalg.norm(r))
    history = [res]
    radius = config.trust_radius_init * max(1.0, float(np.linalg.norm(x)))
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        J = _jacobian(factors, dims, L)
        d, g = _dogleg_step(J, r, radius)
        if 2.0 * np.linalg.norm(g) < config.grad_tol:
            converged = True
            it -= 1
            break
        pred = res * res - float(np.linalg.norm(r - J @ d) ** 2)
        x_new = x + d
        r_new = y_vec - _model_vec(unpack_factors(x_new, dims, K, L), dims)
        res_new = float(np.linalg.norm(r_new))
        if not np.isfinite(res_new):
            radius *= 0.25
            continue
        actual = res * res - res_new * res_new
        rho = actual / pred if pred > 0 else -1.0
        if rho > 0.75:
            radius = min(2.0 * radius, config.trust_radius_max)
        elif rho < 0.1:
            radius *= 0.25
        if rho >= config.step_accept_ratio and actual > 0:
            rel_change = abs(res - res_new) / max(res, 1e-300)
            x, r, res = x_new, r_new, res_new
            factors = unpack_factors(x, dims, K, L)
            history.append(res)
            if rel_change < config.rel_residual_tol:
                converged = True
                break
        if radius < 1e-14:
            break
    return x, res, it, converged, history


def init_random(dims, K: int, L: int, seed) -> BTDModel:
    """Random model: Gaussian factors with A, B column-orthonormalized."""
    rng = np.random.default_rng(seed)
    T1, T2, N = dims

    def gauss(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    terms = []
    for _ in range(K):
        A = np.linalg.qr(gauss(T1, L))[0]
        B = np.linalg.qr(gauss(T2, L))[0]
        terms.append(BlockTerm(A=A, B=B, h=gauss(N)))
    return BTDModel(terms=tuple(terms))


def _term_unchecked(A, B, h) -> BlockTerm:
    term = object.__new__(BlockTerm)
    object.__setattr__(term, "A", A)
    object.__setattr__(term, "B", B)
    object.__setattr__(term, "h", h)
    return term


def orthonormalize_term(term: BlockTerm) -> BlockTerm:
    """Canonical form: A, B get orthogonal columns of equal norm (the core's
    singular values and the channel magnitude split between the pair), h is
    scaled to unit norm.  The synthesized tensor is unchanged."""
    Qa, Ra = np.linalg.qr(term.A)
    Qb, Rb = np.linalg.qr(term.B)
    U, S, Vh = np.linalg.svd(Ra @ Rb.T)
    hn = np.linalg.norm(term.h)
    if hn == 0 or S[-1] < RANK_TOL * S[0]:
        raise CanonicalizationFailure("rank-deficient block term")
    scale = np.sqrt(S * hn)
    return BlockTerm(A=(Qa @ U) * scale, B=(Qb @ Vh.T) * scale, h=term.h / hn)


def orthonormalize_terms(model: BTDModel) -> BTDModel:
    return BTDModel(terms=tuple(orthonormalize_term(t) for t in model.terms))


def orthonormal_factors(term: BlockTerm) -> tuple[np.ndarray, np.ndarray]:
    """Column-orthonormal bases of the column spaces of A and B."""
    return np.linalg.qr(term.A)[0], np.linalg.qr(term.B)[0]


def gndl_fit(Y: np.ndarray, K: int, L: int, config: SolverConfig,
             init: BTDModel | None = None) -> SolveResult:
    """Best-of-restarts GN-dogleg fit of K rank-(L,L,1) terms to Y."""
    Y = check_finite(np.asarray(Y, dtype=np.complex128))
    if Y.ndim != 3:
        raise ValueError("Y must be a third-order tensor")
    if K < 1:
        raise ValueError("K must be >= 1")
    dims = Y.shape
    y_vec = Y.ravel(order="F")
    y_norm = max(float(np.linalg.norm(y_vec)), 1e-300)

    best = None
    for restart in range(config.restarts):
        if init is not None and restart == 0:
            model0 = init
        else:
            model0 = init_random(dims, K, L, seed=(config.seed, restart))
        x0 = pack_factors([(t.A, t.B, t.h) for t in model0.terms], dims, L)
        x, res, iters, converged, history = _run_gndl(y_vec, dims, K, L, x0, config)
        if not np.isfinite(res):
            continue
        if best is None or res < best[1]:
            best = (x, res, iters, converged, history, restart)
        if converged and res / y_norm < 1e-10:
            break
    if best is None:
        raise SolverFailure("all restarts diverged")

    x, res, iters, converged, history, restart = best
    terms = []
    undecodable = []
    for k, (A, B, h) in enumerate(unpack_factors(x, dims, K, L)):
        try:
            terms.append(orthonormalize_term(_term_unchecked(A, B, h)))
        except CanonicalizationFailure:
            undecodable.append(k)
            terms.append(_term_unchecked(A, B, h))
    return SolveResult(
        model=BTDModel(terms=tuple(terms)),
        relative_residual=res / y_norm,
        iterations=iters,
        converged=converged,
        restart_index=restart,
        residual_history=tuple(history),
        undecodable=tuple(undecodable),
    )


def cpd_fit(Y: np.ndarray, K: int, config: SolverConfig,
            init: BTDModel | None = None) -> SolveResult:
    """Rank-1-terms baseline: gndl_fit with L = 1."""
    return gndl_fit(Y, K, 1, config, init=init)
