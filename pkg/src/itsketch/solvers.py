"""Least-squares solution strategies.

Sketch-and-solve, stable iterative sketching (basic / damped / momentum),
right-preconditioned LSQR for sketch-and-precondition, the three
deliberately unstable baselines, and the residual-change stopping rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .embed import SparseSignEmbedding, default_distortion, sparse_sign_new
from .linalg import (
    QrFactors,
    SingularMatrixError,
    cond_est,
    householder_qr_econ,
    rand_power_norm_est,
    tri_solve_upper,
    tri_solve_upper_transpose,
)
from .problems import Truth


class RateHypothesisError(ValueError):
    """A convergence-rate formula was evaluated outside its hypothesis."""


@dataclass
class SolverConfig:
    d: int
    zeta: int = 8
    variant: str = "basic"  # basic | damped | momentum
    init: str = "sketch_and_solve"  # sketch_and_solve | zero
    max_iters: int = 50
    unit_roundoff: float = 2.0**-53
    stop_gamma: float = 1.0
    stop_rho: float = 0.04
    epsilon_for_params: float | None = None  # defaults to sqrt(n/d)
    rng_seed: int = 0
    extra_iters: int = 0  # iterations to run after the stopping rule fires
    track_be: bool = False  # backward error is expensive; opt in

    def validate(self, n: int) -> None:
        if self.d < n:
            raise ValueError(f"embedding dimension d={self.d} must be >= n={n}")
        if self.zeta < 1:
            raise ValueError("zeta must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0 < self.unit_roundoff < 1:
            raise ValueError("unit_roundoff must be in (0, 1)")
        if self.variant not in ("basic", "damped", "momentum"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.init not in ("sketch_and_solve", "zero"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class SolveTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    residual_vectors: list[np.ndarray] = field(default_factory=list)
    residual_changes: list[float] = field(default_factory=list)
    fe: list[float] = field(default_factory=list)
    re: list[float] = field(default_factory=list)
    be: list[float] = field(default_factory=list)
    stop_reason: str = "max_iters"  # stopped_by_rule | max_iters | diverged
    normest: float = 0.0
    condest: float = 0.0


@dataclass
class SolveResult:
    solution: np.ndarray
    trace: SolveTrace
    config: SolverConfig

    @property
    def iterations(self) -> int:
        return len(self.trace.iterates) - 1


def damping_params(epsilon: float) -> tuple[float, float]:
    """Optimal damped step size: alpha = (1-eps^2)^2 / (1+eps^2), beta = 0."""
    if not 0 <= epsilon < 1:
        raise ValueError(f"need 0 <= eps < 1, got {epsilon}")
    return (1 - epsilon**2) ** 2 / (1 + epsilon**2), 0.0


def momentum_params(epsilon: float) -> tuple[float, float]:
    """Optimal heavy-ball parameters: alpha = (1-eps^2)^2, beta = eps^2."""
    if not 0 <= epsilon < 1:
        raise ValueError(f"need 0 <= eps < 1, got {epsilon}")
    return (1 - epsilon**2) ** 2, epsilon**2


def rate_g_is(epsilon: float) -> float:
    """Per-iteration contraction of the basic iteration: (2-e)e/(1-e)^2."""
    if not 0 <= epsilon < 1:
        raise RateHypothesisError(f"need 0 <= eps < 1, got {epsilon}")
    return (2 - epsilon) * epsilon / (1 - epsilon) ** 2


def rate_g_damp(epsilon: float) -> float:
    """Contraction with optimal damping: 2e/(1+e^2)."""
    if not 0 <= epsilon < 1:
        raise RateHypothesisError(f"need 0 <= eps < 1, got {epsilon}")
    return 2 * epsilon / (1 + epsilon**2)


def rate_g_mom(epsilon: float) -> float:
    """Contraction with optimal momentum: e."""
    if not 0 <= epsilon < 1:
        raise RateHypothesisError(f"need 0 <= eps < 1, got {epsilon}")
    return epsilon


def prefactor_c(epsilon: float) -> float:
    """Damping bound prefactor 2(1+e)sqrt(e)/(1-e)^2."""
    if not 0 <= epsilon < 1:
        raise RateHypothesisError(f"need 0 <= eps < 1, got {epsilon}")
    return 2 * (1 + epsilon) * math.sqrt(epsilon) / (1 - epsilon) ** 2


def prefactor_c_prime(epsilon: float) -> float:
    """Momentum bound prefactor 8*sqrt(2)(1+e)/((1-e)^2 sqrt(e))."""
    if not 0 < epsilon < 1:
        raise RateHypothesisError(f"need 0 < eps < 1, got {epsilon}")
    return 8 * math.sqrt(2) * (1 + epsilon) / ((1 - epsilon) ** 2 * math.sqrt(epsilon))


_EPS_BASIC_MAX = 1 - 1 / math.sqrt(2)


def theoretical_bound_curve(
    variant: str,
    epsilon: float,
    kappa: float,
    norm_a: float,
    norm_r: float,
    iters: int,
    first_iter: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact-arithmetic error-bound sequences (fe_bound_i, re_bound_i) for
    i = first_iter .. iters, for overlaying on measured traces.

    The momentum bound is only stated for i >= 2; requesting earlier
    iterations raises.
    """
    idx = np.arange(first_iter, iters + 1, dtype=float)
    if variant == "basic":
        if not 0 <= epsilon < _EPS_BASIC_MAX:
            raise RateHypothesisError(
                f"basic bound needs eps < 1 - 1/sqrt(2), got {epsilon}"
            )
        re = (8 - 2 * math.sqrt(2)) * math.sqrt(epsilon) * rate_g_is(epsilon) ** idx * norm_r
    elif variant == "damped":
        re = prefactor_c(epsilon) * rate_g_damp(epsilon) ** idx * norm_r
    elif variant == "momentum":
        if first_iter < 2:
            raise RateHypothesisError("momentum bound is stated for i >= 2")
        re = prefactor_c_prime(epsilon) * (idx - 1) * rate_g_mom(epsilon) ** idx * norm_r
    else:
        raise ValueError(f"unknown variant {variant!r}")
    fe = re * (kappa / norm_a)
    return fe, re


def should_stop(
    r_next: np.ndarray,
    r_curr: np.ndarray,
    x_next: np.ndarray,
    normest: float,
    condest: float,
    u: float,
    gamma: float = 1.0,
    rho: float = 0.04,
) -> bool:
    """Residual-change stopping rule (inclusive comparison):
    ||r_{i+1} - r_i|| <= u * (gamma*normest*||x_{i+1}|| + rho*condest*||r_{i+1}||).
    """
    change = np.linalg.norm(np.asarray(r_next) - np.asarray(r_curr))
    rhs = u * (
        gamma * normest * np.linalg.norm(x_next)
        + rho * condest * np.linalg.norm(r_next)
    )
    return bool(change <= rhs)


def _sketch_matrix(s: SparseSignEmbedding, a) -> np.ndarray:
    return s.apply_sparse(a) if sp.issparse(a) else s.apply_dense(a)


def sketch_and_solve(
    a, b: np.ndarray, s: SparseSignEmbedding
) -> tuple[np.ndarray, QrFactors]:
    """Solve the sketched problem min ||Sb - (SA)y|| via economy QR of SA.

    Returns the solution and the QR factors for reuse by the iteration.
    A singular R signals a rank-deficient sketch; resample the embedding.
    """
    qr = householder_qr_econ(_sketch_matrix(s, a))
    sb = s.apply_vec(np.asarray(b, dtype=float))
    x0 = tri_solve_upper(qr.r, qr.q.T @ sb)
    return x0, qr


class _DivergenceGuard:
    """Flags divergence when the residual norm climbs 10^4x above its
    running minimum while still growing over the trailing 5 steps, or when
    any iterate turns non-finite.

    The growth factor is large enough that an exponentially diverging run
    is still captured over ~10-20 iterations before termination, while a
    converged solver jittering at its plateau never trips the guard (its
    residual norm stays near the running minimum)."""

    WINDOW = 5
    FACTOR = 1.0e4

    def __init__(self) -> None:
        self._norms: list[float] = []
        self._min = math.inf

    def diverged(self, resnorm: float, x: np.ndarray) -> bool:
        if not (np.isfinite(resnorm) and np.all(np.isfinite(x))):
            return True
        self._norms.append(resnorm)
        self._min = min(self._min, resnorm)
        if len(self._norms) <= self.WINDOW:
            return False
        still_growing = resnorm > self._norms[-(self.WINDOW + 1)]
        return still_growing and resnorm > self.FACTOR * self._min


def _record(
    trace: SolveTrace, a, b, x: np.ndarray, r: np.ndarray, truth: Truth | None,
    track_be: bool,
) -> None:
    trace.iterates.append(x)
    trace.residual_vectors.append(r)
    if truth is not None:
        trace.fe.append(float(np.linalg.norm(truth.x - x) / np.linalg.norm(truth.x)))
        if truth.beta > 0:
            trace.re.append(float(np.linalg.norm(truth.r - r) / truth.beta))
        else:
            trace.re.append(float(np.linalg.norm(r) / np.linalg.norm(b)))
        if track_be:
            from .metrics import backward_error

            trace.be.append(backward_error(np.asarray(a.todense()) if sp.issparse(a) else a, b, x))


def _update_coeffs(cfg: SolverConfig, n: int) -> tuple[float, float]:
    if cfg.variant == "basic":
        return 1.0, 0.0
    eps = cfg.epsilon_for_params
    if eps is None:
        eps = default_distortion(n, cfg.d)
    if cfg.variant == "damped":
        return damping_params(eps)
    return momentum_params(eps)


def _run_refinement(
    a,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: np.ndarray,
    solve_step,
    rhs,
    normest: float,
    condest: float,
    truth: Truth | None,
) -> SolveResult:
    """Shared refinement loop: x_{i+1} = x_i + alpha*d_i + beta*(x_i - x_{i-1})
    with d_i = solve_step(rhs(x_i)), plus tracing, stopping rule, and the
    divergence guard."""
    n = x0.shape[0]
    alpha, beta = _update_coeffs(cfg, n)
    trace = SolveTrace(normest=normest, condest=condest)
    guard = _DivergenceGuard()
    x = x0
    x_prev = x0  # momentum start: x_{-1} := x_0
    r = b - a @ x
    _record(trace, a, b, x, r, truth, cfg.track_be)
    remaining_extra: int | None = None
    for _ in range(cfg.max_iters):
        d = solve_step(rhs(x, r))
        if cfg.variant == "basic":
            x_next = x + d
        else:
            x_next = x + alpha * d + beta * (x - x_prev)
        r_next = b - a @ x_next
        change = float(np.linalg.norm(r_next - r))
        trace.residual_changes.append(change)
        if guard.diverged(float(np.linalg.norm(r_next)), x_next):
            _record(trace, a, b, x_next, r_next, truth, cfg.track_be)
            trace.stop_reason = "diverged"
            return SolveResult(solution=x_next, trace=trace, config=cfg)
        x_prev, x, r = x, x_next, r_next
        _record(trace, a, b, x, r, truth, cfg.track_be)
        if remaining_extra is None:
            if should_stop(
                r, trace.residual_vectors[-2], x, normest, condest,
                cfg.unit_roundoff, cfg.stop_gamma, cfg.stop_rho,
            ):
                remaining_extra = cfg.extra_iters
        if remaining_extra is not None:
            if remaining_extra == 0:
                trace.stop_reason = "stopped_by_rule"
                return SolveResult(solution=x, trace=trace, config=cfg)
            remaining_extra -= 1
    trace.stop_reason = "max_iters"
    return SolveResult(solution=x, trace=trace, config=cfg)


def iterative_sketching(
    a, b: np.ndarray, cfg: SolverConfig, truth: Truth | None = None
) -> SolveResult:
    """Iterative refinement on the normal equations preconditioned by
    (SA)'(SA), implemented in the stable order: fused residual b - A x,
    then A'r, then two triangular solves against the R factor of SA."""
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    cfg.validate(n)
    s = sparse_sign_new(cfg.d, m, cfg.zeta, cfg.rng_seed)
    x0, qr = sketch_and_solve(a, b, s)
    if cfg.init == "zero":
        x0 = np.zeros(n)
    normest = rand_power_norm_est(qr.r, rng_seed=cfg.rng_seed)
    condest = cond_est(qr.r)

    def solve_step(c: np.ndarray) -> np.ndarray:
        return tri_solve_upper(qr.r, tri_solve_upper_transpose(qr.r, c))

    def rhs(x: np.ndarray, r: np.ndarray) -> np.ndarray:
        return a.T @ r

    return _run_refinement(a, b, cfg, x0, solve_step, rhs, normest, condest, truth)


def bad_variant(
    a, b: np.ndarray, cfg: SolverConfig, kind: str, truth: Truth | None = None
) -> SolveResult:
    """Deliberately unstable baselines.

    bad_matrix: form (SA)'(SA) explicitly, factorize by Cholesky (LU with
    partial pivoting on Cholesky breakdown). bad_residual: evaluate the
    right-hand side in the unstable order A'b - A'(Ax). bad_init: the stable
    iteration started from zero. Divergence is a reportable outcome, not an
    error.
    """
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    cfg.validate(n)
    s = sparse_sign_new(cfg.d, m, cfg.zeta, cfg.rng_seed)

    if kind == "bad_init":
        return iterative_sketching(a, b, replace(cfg, init="zero"), truth)

    if kind == "bad_residual":
        x0, qr = sketch_and_solve(a, b, s)
        normest = rand_power_norm_est(qr.r, rng_seed=cfg.rng_seed)
        condest = cond_est(qr.r)
        atb = a.T @ b

        def solve_step(c: np.ndarray) -> np.ndarray:
            return tri_solve_upper(qr.r, tri_solve_upper_transpose(qr.r, c))

        def rhs(x: np.ndarray, r: np.ndarray) -> np.ndarray:
            return atb - a.T @ (a @ x)

        return _run_refinement(a, b, cfg, x0, solve_step, rhs, normest, condest, truth)

    if kind == "bad_matrix":
        sa = _sketch_matrix(s, a)
        gram = sa.T @ sa
        try:
            chol = np.linalg.cholesky(gram)

            def solve_step(c: np.ndarray) -> np.ndarray:
                y = scipy.linalg.solve_triangular(chol, c, lower=True)
                return scipy.linalg.solve_triangular(chol.T, y, lower=False)
        except np.linalg.LinAlgError:
            lu_piv = scipy.linalg.lu_factor(gram)

            def solve_step(c: np.ndarray) -> np.ndarray:
                return scipy.linalg.lu_solve(lu_piv, c)

        sb = s.apply_vec(b)
        x0 = solve_step(sa.T @ sb)
        # no R factor exists here; estimate scale/conditioning from the Gram matrix
        normest = math.sqrt(rand_power_norm_est(gram, rng_seed=cfg.rng_seed))
        gram_sv = np.linalg.svd(gram, compute_uv=False)
        condest = float(math.sqrt(gram_sv[0] / max(gram_sv[-1], np.finfo(float).tiny)))

        def rhs(x: np.ndarray, r: np.ndarray) -> np.ndarray:
            return a.T @ r

        return _run_refinement(a, b, cfg, x0, solve_step, rhs, normest, condest, truth)

    raise ValueError(f"unknown bad variant {kind!r}")


def lsqr(
    a,
    b: np.ndarray,
    x0: np.ndarray,
    precond_r: np.ndarray,
    max_iters: int,
    rtol: float = 1e-14,
    callback=None,
) -> tuple[np.ndarray, int]:
    """Golub-Kahan-bidiagonalization LSQR on min ||(b - A x0) - (A R^-1) z||,
    returning x = x0 + R^-1 z and the iteration count.

    The preconditioner is applied through triangular solves; R^-1 is never
    formed. Stops at max_iters or when the normal-equation residual estimate
    ||Op' r|| / (||Op|| ||r||) falls to rtol. callback(z) runs once per
    iteration.
    """
    precond_r = np.asarray(precond_r, dtype=float)
    if np.any(np.diag(precond_r) == 0.0):
        raise SingularMatrixError("singular preconditioner")
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = precond_r.shape[0]

    def op(v: np.ndarray) -> np.ndarray:
        return a @ tri_solve_upper(precond_r, v)

    def op_t(u: np.ndarray) -> np.ndarray:
        return tri_solve_upper_transpose(precond_r, a.T @ u)

    # Paige-Saunders recurrences, no reorthogonalization
    u = b - a @ x0
    beta = float(np.linalg.norm(u))
    z = np.zeros(n)
    if beta == 0.0:
        return x0.copy(), 0
    u = u / beta
    v = op_t(u)
    alpha = float(np.linalg.norm(v))
    if alpha == 0.0:
        return x0.copy(), 0
    v = v / alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    anorm2 = alpha**2
    iters = 0
    for _ in range(max_iters):
        u = op(v) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0:
            u = u / beta
            v = op_t(u) - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0:
                v = v / alpha
        anorm2 += beta**2 + alpha**2
        rho = math.hypot(rhobar, beta)
        c, sn = rhobar / rho, beta / rho
        theta = sn * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = sn * phibar
        z = z + (phi / rho) * w
        w = v - (theta / rho) * w
        iters += 1
        if callback is not None:
            callback(z)
        # ||Op' r|| = phibar * alpha * |c|; relative to ||Op|| ||r||
        normar = phibar * alpha * abs(c)
        if phibar == 0.0 or normar <= rtol * math.sqrt(anorm2) * phibar:
            break
    return x0 + tri_solve_upper(precond_r, z), iters


def sketch_and_precondition(
    a, b: np.ndarray, cfg: SolverConfig, truth: Truth | None = None
) -> SolveResult:
    """Sketch, QR-factorize the sketch, then run LSQR on A right-preconditioned
    by the R factor, starting from the sketch-and-solve or zero iterate."""
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    cfg.validate(n)
    s = sparse_sign_new(cfg.d, m, cfg.zeta, cfg.rng_seed)
    x0, qr = sketch_and_solve(a, b, s)
    if cfg.init == "zero":
        x0 = np.zeros(n)
    normest = rand_power_norm_est(qr.r, rng_seed=cfg.rng_seed)
    condest = cond_est(qr.r)
    trace = SolveTrace(normest=normest, condest=condest)
    r0 = b - a @ x0
    _record(trace, a, b, x0, r0, truth, cfg.track_be)

    def on_iterate(z: np.ndarray) -> None:
        xk = x0 + tri_solve_upper(qr.r, z)
        rk = b - a @ xk
        trace.residual_changes.append(
            float(np.linalg.norm(rk - trace.residual_vectors[-1]))
        )
        _record(trace, a, b, xk, rk, truth, cfg.track_be)

    x, _ = lsqr(
        a, b, x0, qr.r, max_iters=cfg.max_iters,
        rtol=cfg.unit_roundoff, callback=on_iterate,
    )
    trace.stop_reason = "max_iters" if len(trace.iterates) - 1 >= cfg.max_iters else "stopped_by_rule"
    # the final x applies one last triangular solve to the converged z; make
    # the reported solution consistent with the last traced iterate
    trace.iterates[-1] = x
    trace.residual_vectors[-1] = b - a @ x
    if truth is not None:
        trace.fe[-1] = float(np.linalg.norm(truth.x - x) / np.linalg.norm(truth.x))
        rlast = trace.residual_vectors[-1]
        if truth.beta > 0:
            trace.re[-1] = float(np.linalg.norm(truth.r - rlast) / truth.beta)
    return SolveResult(solution=x, trace=trace, config=cfg)
