"""Weighted least-squares recovery on T(Lambda) and the uniform-error bound check.

``lsw_solve`` minimizes sum_nu w_nu |f(xi_nu) - u(xi_nu)|^2 over u in
T(Lambda).  Given lower frame bound C1^2 (lambda_min of the weighted Gram
matrix) and weight sum C2, its L2 error is at most
(2 sqrt(C2) / C1 + 1) times the best uniform approximation error of f.
``verify_at1`` measures both sides of that inequality, estimating the
uniform best approximation with Lawson's iteration on a fine grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .classes import ClassMember
from .discretization import DiscretizationCertificate, SampleSet, certify, gram
from .errors import SingularSystemError
from .trig import (
    FrequencySet,
    GridSpec,
    TrigPolynomial,
    basis_matrix,
    evaluate,
    iter_basis_blocks,
    uniform_grid,
)

# design-matrix condition number above which the normal equations are avoided
NORMAL_EQUATIONS_MAX_COND = 1e6
# design-matrix condition number above which the system counts as singular
MAX_DESIGN_COND = 1e10
# basis entries lsw_solve keeps in memory to avoid re-evaluating for the residual
_KEEP_BLOCK_ENTRIES = 8_000_000


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    approximant: TrigPolynomial
    weighted_residual: float
    certificate: DiscretizationCertificate
    p: int = 2

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "approximant": self.approximant.to_json(),
            "weighted_residual": self.weighted_residual,
            "certificate": self.certificate.to_json(),
        }


def _design_condition(cert: DiscretizationCertificate) -> float:
    return math.sqrt(cert.condition)


def _check_solvable(cert: DiscretizationCertificate):
    if not cert.lambda_min > 0 or _design_condition(cert) > MAX_DESIGN_COND:
        raise SingularSystemError(
            f"weighted Gram matrix is singular or too ill-conditioned "
            f"(lambda_min={cert.lambda_min:.3e}, lambda_max={cert.lambda_max:.3e})",
            certificate=cert,
        )


def _weighted_design(freqs, samples):
    return np.sqrt(samples.weights)[:, None] * basis_matrix(freqs, samples.points)


def recovery_matrix(
    freqs: FrequencySet,
    samples: SampleSet,
    certificate: DiscretizationCertificate | None = None,
) -> np.ndarray:
    """(N, m) matrix A with lsw_solve(freqs, samples, y).coefficients == A @ y."""
    G = gram(freqs, samples)
    cert = certificate or certify(freqs, samples, G=G)
    _check_solvable(cert)
    if _design_condition(cert) <= NORMAL_EQUATIONS_MAX_COND:
        factor = scipy.linalg.cho_factor(G)
        rhs = basis_matrix(freqs, samples.points).conj().T * samples.weights[None, :]
        return scipy.linalg.cho_solve(factor, rhs)
    B = _weighted_design(freqs, samples)
    return np.linalg.pinv(B, rcond=1.0 / MAX_DESIGN_COND) * np.sqrt(samples.weights)[None, :]


def lsw_solve(
    freqs: FrequencySet,
    samples: SampleSet,
    values,
    certificate: DiscretizationCertificate | None = None,
) -> RecoveryResult:
    """Weighted least-squares fit in T(``freqs``) to ``values`` observed at ``samples``."""
    y = np.asarray(values, dtype=complex).reshape(-1)
    if y.shape[0] != samples.m:
        raise ValueError(f"{y.shape[0]} values for {samples.m} sample points")
    w = samples.weights
    # one pass for Gram matrix and right-hand side; blocks kept for the residual when small
    keep = samples.m * freqs.N <= _KEEP_BLOCK_ENTRIES
    G = np.zeros((freqs.N, freqs.N), dtype=complex)
    b = np.zeros(freqs.N, dtype=complex)
    blocks = []
    for sl, V in iter_basis_blocks(freqs, samples.points):
        WV = V.conj().T * w[sl][None, :]
        G += WV @ V
        b += WV @ y[sl]
        if keep:
            blocks.append((sl, V))
    G = 0.5 * (G + G.conj().T)
    cert = certificate or certify(freqs, samples, G=G)
    _check_solvable(cert)
    if _design_condition(cert) <= NORMAL_EQUATIONS_MAX_COND:
        c = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), b)
    else:
        sw = np.sqrt(w)
        c = scipy.linalg.lstsq(_weighted_design(freqs, samples), sw * y, cond=1.0 / MAX_DESIGN_COND)[0]
    u = TrigPolynomial(freqs, c)
    if keep:
        fitted = np.empty(samples.m, dtype=complex)
        for sl, V in blocks:
            fitted[sl] = V @ c
    else:
        fitted = evaluate(u, samples.points)
    wres = float(np.sqrt(np.sum(w * np.abs(y - fitted) ** 2)))
    return RecoveryResult(u, wres, cert)


def l2_error(f_spectrum: TrigPolynomial, u: TrigPolynomial) -> float:
    """||f - u||_2 by Parseval, with u zero-extended to the basis of f."""
    if not u.basis.issubset(f_spectrum.basis):
        raise ValueError("approximant frequencies are not contained in the truth box")
    diff = f_spectrum.coefficients.copy()
    diff[u.basis.indices_in(f_spectrum.basis)] -= u.coefficients
    return float(np.linalg.norm(diff))


@dataclass(frozen=True, eq=False)
class MinimaxApprox:
    """Best Lawson iterate for the discrete uniform approximation problem.

    ``grid_sup_error`` is attained by ``approximant``; the discrete minimax
    value lies in [grid_sup_error - duality_gap_estimate, grid_sup_error].
    """

    approximant: TrigPolynomial
    grid_sup_error: float
    duality_gap_estimate: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)

    @property
    def lower_bound(self) -> float:
        return self.grid_sup_error - self.duality_gap_estimate

    def to_json(self) -> dict:
        return {
            "approximant": self.approximant.to_json(),
            "grid_sup_error": self.grid_sup_error,
            "duality_gap_estimate": self.duality_gap_estimate,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def lawson_minimax(
    f_evals,
    freqs: FrequencySet,
    grid,
    iters: int = 500,
    tol: float = 1e-6,
) -> MinimaxApprox:
    """Lawson's iteratively reweighted least squares for min_u max_grid |f - u|.

    Weights start uniform and are multiplied by the current residual moduli,
    then renormalized to sum one.  For any such weights the weighted L2
    residual of the weighted fit is a lower bound for the discrete minimax
    value; the best one seen gives the duality gap.  Stops once the gap is
    below ``tol`` times the sup error; otherwise returns the best iterate with
    ``converged=False``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    f = np.asarray(f_evals, dtype=complex).reshape(-1)
    V = basis_matrix(freqs, grid)
    n = V.shape[0]
    if n != f.shape[0]:
        raise ValueError(f"{f.shape[0]} values for {n} grid points")
    if n < 4 * freqs.N:
        raise ValueError(f"grid has {n} points, need at least 4N = {4 * freqs.N}")
    floor = 1e-14 * max(float(np.max(np.abs(f))), 1.0)

    w = np.full(n, 1.0 / n)
    best_sup, best_c, best_lower = math.inf, None, 0.0
    history = []
    converged = False
    it = 0
    for it in range(1, iters + 1):
        sw = np.sqrt(w)
        c = scipy.linalg.lstsq(sw[:, None] * V, sw * f)[0]
        res = np.abs(f - V @ c)
        sup = float(res.max())
        lower = float(np.sqrt(np.sum(w * res**2)))
        history.append(lower)
        if sup < best_sup:
            best_sup, best_c = sup, c
        best_lower = max(best_lower, lower)
        if best_sup - best_lower <= tol * best_sup + floor:
            converged = True
            break
        w = w * res
        total = w.sum()
        if not total > 0:
            break
        w /= total
    gap = max(best_sup - best_lower, 0.0)
    return MinimaxApprox(TrigPolynomial(freqs, best_c), best_sup, gap, it, converged, tuple(history))


def grid_sup_inflation(degree: int, s: int, d: int = 1) -> float:
    """Factor bounding sup over the torus by the max on an s-point-per-axis grid.

    For a trigonometric polynomial g of coordinate degree K every point lies
    within pi/s of a grid node in each axis, and Bernstein's inequality gives
    ||g||_inf <= max_grid |g| / (1 - d pi K / s).  Returns inf when that
    denominator is not positive.
    """
    q = d * math.pi * degree / s
    return math.inf if q >= 1 else 1.0 / (1.0 - q)


def at1_multiplier(C1: float, C2: float, p: float = 2) -> float:
    """2 C1^{-1} C2^{1/p} + 1."""
    if C1 <= 0:
        return math.inf
    return 2.0 * C2 ** (1.0 / p) / C1 + 1.0


@dataclass(frozen=True)
class AT1Report:
    lhs: float
    d_inf_estimate: float
    duality_gap: float
    C1: float
    C2: float
    bound: float
    ratio: float
    slack: float
    passed: bool
    p: int = 2

    @property
    def multiplier(self) -> float:
        return at1_multiplier(self.C1, self.C2, self.p)

    @property
    def ratio_vs_lower(self) -> float:
        """lhs against the bound built from the certified lower minimax estimate."""
        lo = self.multiplier * (self.d_inf_estimate - self.duality_gap)
        return self.lhs / lo if lo > 0 else math.inf

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["multiplier"] = self.multiplier
        out["ratio_vs_lower"] = self.ratio_vs_lower
        return out


def default_minimax_grid(box: FrequencySet, N: int, factor: int = 16) -> np.ndarray:
    """Uniform grid with factor * (max |k_j|) points per axis, and at least 4N points."""
    s = max(factor * max(box.radius(), 1), 2 * box.radius() + 1)
    while s**box.d < 4 * N:
        s += 1
    return uniform_grid(GridSpec(box.d, s))


def verify_at1(
    f,
    freqs: FrequencySet,
    samples: SampleSet,
    grid=None,
    certificate: DiscretizationCertificate | None = None,
    slack: float = 0.0,
    iters: int = 500,
    tol: float = 1e-6,
) -> AT1Report:
    """Check ||f - lsw(f)||_2 <= (2 sqrt(C2)/C1 + 1) d(f, T(Lambda))_inf on one function.

    ``f`` is a :class:`ClassMember` or a :class:`TrigPolynomial` spectrum.  The
    left side is exact (Parseval); the uniform distance is the Lawson grid sup
    error, whose gap to the discrete optimum is reported alongside.
    """
    spectrum = f.f if isinstance(f, ClassMember) else f
    if spectrum.basis.d != freqs.d:
        raise ValueError("dimension mismatch between f and the frequency set")
    union = FrequencySet(np.concatenate([spectrum.basis.frequencies, freqs.frequencies]))
    spectrum = spectrum.embed(union)

    cert = certificate or certify(freqs, samples)
    result = lsw_solve(freqs, samples, evaluate(spectrum, samples.points), certificate=cert)
    lhs = l2_error(spectrum, result.approximant)

    pts = default_minimax_grid(union, freqs.N) if grid is None else np.asarray(grid, dtype=float)
    minimax = lawson_minimax(evaluate(spectrum, pts), freqs, pts, iters=iters, tol=tol)
    d_inf = minimax.grid_sup_error
    bound = at1_multiplier(cert.C1, cert.C2) * d_inf
    atol = 1e-12 * max(1.0, float(np.linalg.norm(spectrum.coefficients)))
    if bound > 0:
        ratio = lhs / bound
    else:
        ratio = 0.0 if lhs <= atol else math.inf
    passed = lhs <= atol or ratio <= 1.0 + slack
    return AT1Report(
        lhs=lhs,
        d_inf_estimate=d_inf,
        duality_gap=minimax.duality_gap_estimate,
        C1=cert.C1,
        C2=cert.C2,
        bound=bound,
        ratio=ratio,
        slack=slack,
        passed=passed,
    )
