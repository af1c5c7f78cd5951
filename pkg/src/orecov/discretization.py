"""Weighted sample sets on the torus and certificates of their frame bounds.

A sample set (points xi, weights w) discretizes the L2 norm on T(Lambda) when
the weighted Gram matrix G = sum_nu w_nu v(xi_nu) v(xi_nu)^H has eigenvalues
bounded away from zero.  :func:`certify` measures those bounds,
:func:`bss_subsample` thins an oversampled set down to O(N) points with a
two-sided barrier greedy while keeping them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BarrierStuck, DiscretizationNotAchieved, EigensolverError
from .trig import TWO_PI, FrequencySet, basis_matrix, iter_basis_blocks, uniform_grid, GridSpec

log = logging.getLogger(__name__)

EIG_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Points in [0, 2pi)^d with positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] < 1:
            raise ValueError("a sample set needs at least one point")
        if pts.shape[0] != w.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not np.all(w > 0):
            raise ValueError("all weights must be positive")
        pts = np.mod(pts, TWO_PI)
        pts.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.m

    def merge(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
        )

    def scaled(self, factor: float) -> "SampleSet":
        return SampleSet(self.points, self.weights * factor)

    def to_json(self) -> dict:
        return {"d": self.d, "points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "SampleSet":
        pts = np.asarray(data["points"], dtype=float).reshape(-1, int(data["d"]))
        return cls(pts, np.asarray(data["weights"], dtype=float))


@dataclass(frozen=True)
class DiscretizationCertificate:
    """Measured frame bounds of a weighted sample set on T(Lambda)."""

    N: int
    m: int
    lambda_min: float
    lambda_max: float
    weight_sum: float
    # lambda_min <= weight_sum <= lambda_max; None when 0 is not a frequency
    constant_sandwich: bool | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def C1(self) -> float:
        return math.sqrt(self.lambda_min)

    @property
    def C2(self) -> float:
        return self.weight_sum

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min if self.lambda_min > 0 else math.inf

    def passes(self, c1_floor: float, c2_cap: float = math.inf) -> bool:
        return self.C1 >= c1_floor and self.C2 <= c2_cap

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "weight_sum": self.weight_sum,
            "C1": self.C1,
            "C2": self.C2,
            "constant_sandwich": self.constant_sandwich,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiscretizationCertificate":
        return cls(
            N=int(data["N"]),
            m=int(data["m"]),
            lambda_min=float(data["lambda_min"]),
            lambda_max=float(data["lambda_max"]),
            weight_sum=float(data["weight_sum"]),
            constant_sandwich=data.get("constant_sandwich"),
            metadata=dict(data.get("metadata", {})),
        )


def gram(freqs: FrequencySet, samples: SampleSet) -> np.ndarray:
    """G = V^H diag(w) V, so that c^H G c = sum_nu w_nu |u(xi_nu)|^2."""
    if samples.d != freqs.d:
        raise ValueError(f"sample dimension {samples.d} != frequency dimension {freqs.d}")
    G = np.zeros((freqs.N, freqs.N), dtype=complex)
    for sl, V in iter_basis_blocks(freqs, samples.points):
        G += V.conj().T @ (samples.weights[sl, None] * V)
    return 0.5 * (G + G.conj().T)


def certify(freqs: FrequencySet, samples: SampleSet, G: np.ndarray | None = None, **metadata):
    """Frame-bound certificate of ``samples`` on T(``freqs``)."""
    if G is None:
        G = gram(freqs, samples)
    try:
        eig = np.linalg.eigvalsh(G)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigvalsh failed on the {freqs.N}x{freqs.N} Gram matrix: {exc}")
    if not np.all(np.isfinite(eig)):
        raise EigensolverError("eigvalsh returned non-finite eigenvalues")
    lam_max = float(eig[-1])
    # PSD by construction; values below the eigensolver noise floor are unresolved zeros
    noise = freqs.N * np.finfo(float).eps * max(lam_max, 0.0)
    lam_min = float(eig[0]) if eig[0] > noise else 0.0
    wsum = float(np.sum(samples.weights))
    sandwich = None
    zero = (0,) * freqs.d
    if zero in freqs:
        tol = EIG_RTOL * max(lam_max, 1.0)
        sandwich = bool(lam_min - tol <= wsum <= lam_max + tol)
    return DiscretizationCertificate(
        N=freqs.N,
        m=samples.m,
        lambda_min=lam_min,
        lambda_max=lam_max,
        weight_sum=wsum,
        constant_sandwich=sandwich,
        metadata=dict(metadata),
    )


def random_points(d: int, M: int, seed: int) -> SampleSet:
    """M i.i.d. uniform points on the torus, equal weights 1/M."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(seed)
    return SampleSet(rng.uniform(0.0, TWO_PI, size=(M, d)), np.full(M, 1.0 / M))


def grid_points(d: int, s: int) -> SampleSet:
    """Equal-weight uniform tensor grid with s points per axis."""
    pts = uniform_grid(GridSpec(d, s))
    return SampleSet(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


def oversampled_size(N: int, kappa: float = 10.0) -> int:
    """ceil(kappa * N * log N), never below N."""
    return max(N, math.ceil(kappa * N * math.log(N))) if N > 1 else 1


def equal_weight_verify(
    freqs: FrequencySet,
    d: int,
    m: int,
    seed: int,
    c1_floor: float,
    max_retries: int = 10,
):
    """Draw m equal-weight random points until the lower frame bound reaches ``c1_floor``.

    Seeds ``seed, seed + 1, ...`` are tried in turn.  Returns the first passing
    ``(SampleSet, DiscretizationCertificate)``; raises
    :class:`DiscretizationNotAchieved` with the best certificate otherwise.
    """
    if m < freqs.N:
        raise ValueError(f"m = {m} < N = {freqs.N}: the Gram matrix would be singular")
    if d != freqs.d:
        raise ValueError("dimension mismatch")
    best, best_set = None, None
    for attempt in range(max_retries):
        S = random_points(d, m, seed + attempt)
        cert = certify(
            freqs, S, method="equal_weight", seed=seed + attempt, attempt=attempt,
            c1_floor=c1_floor,
        )
        if cert.C1 >= c1_floor:
            return S, cert
        if best is None or cert.lambda_min > best.lambda_min:
            best, best_set = cert, S
    raise DiscretizationNotAchieved(
        f"discretization not achieved: best C1 = {best.C1:.4g} < {c1_floor} after {max_retries} draws",
        best=best,
        sample_set=best_set,
    )


def _barrier_schedule(N: int, c: float):
    """Initial barriers and per-step shifts of the two-sided potential method."""
    sq = math.sqrt(c)
    delta_l = 1.0
    delta_u = (sq + 1.0) / (sq - 1.0)
    eps_l = 1.0 / sq
    eps_u = (sq - 1.0) / (c + sq)
    return -N / eps_l, N / eps_u, delta_l, delta_u


def bss_subsample(
    freqs: FrequencySet,
    candidates: SampleSet,
    c: float = 12.0,
    candidate_cert: DiscretizationCertificate | None = None,
) -> SampleSet:
    """Reweighted subset of at most ceil(c N) candidates with controlled frame bounds.

    The candidates are whitened by their own Gram matrix, then a barrier greedy
    adds one rank-one term t * y y^H per step for ceil(c N) steps.  With
    upper and lower barriers u, l advanced by fixed shifts each step, the
    whitened sum ends with spectrum in [l_T, u_T].  Weights are rescaled by
    1/sqrt(l_T u_T), so the output frame bounds satisfy

        lambda_min(out) >= beta_lo * lambda_min(candidates)
        lambda_max(out) <= beta_hi * lambda_max(candidates)

    with beta_lo = sqrt(l_T / u_T) and beta_hi = 1 / beta_lo.  Among admissible
    candidates the one with the widest weight interval [1/L, 1/U] is taken
    (lowest index on ties) and the midpoint weight is used.
    """
    if c <= 1:
        raise ValueError("oversampling factor c must exceed 1")
    N = freqs.N
    target = math.ceil(c * N)
    if candidates.m <= target:
        return candidates

    G = gram(freqs, candidates)
    cert = candidate_cert or certify(freqs, candidates, G=G)
    if not cert.lambda_min > 0:
        raise ValueError("candidate set is not a frame for T(Lambda) (lambda_min = 0)")

    evals, evecs = np.linalg.eigh(G)
    # row nu holds y_nu^H, y_nu = D^{-1/2} E^H sqrt(w_nu) conj(V[nu]); sum y y^H = I
    whiten = evecs / np.sqrt(evals)[None, :]
    Y = np.empty((candidates.m, N), dtype=complex)
    for sl, V in iter_basis_blocks(freqs, candidates.points):
        Y[sl] = (np.sqrt(candidates.weights[sl])[:, None] * V) @ whiten

    lower, upper, delta_l, delta_u = _barrier_schedule(N, c)
    A_vals = np.zeros(N)
    Z = Y  # row nu: (Q^H y_nu)^H for the current eigenbasis Q of A
    chosen = np.zeros(candidates.m)

    for step in range(target):
        u_next, l_next = upper + delta_u, lower + delta_l
        inv_u = 1.0 / (u_next - A_vals)
        inv_l = 1.0 / (A_vals - l_next)
        phi_u = float(np.sum(1.0 / (upper - A_vals)))
        phi_l = float(np.sum(1.0 / (A_vals - lower)))
        drop_u = phi_u - float(np.sum(inv_u))
        rise_l = float(np.sum(inv_l)) - phi_l
        P = np.abs(Z) ** 2
        U = (P @ inv_u**2) / drop_u + P @ inv_u
        L = (P @ inv_l**2) / rise_l - P @ inv_l
        ok = (L > 0) & (U <= L * (1.0 + 1e-12))
        if not np.any(ok):
            raise BarrierStuck(
                f"barrier stuck at step {step}: no admissible candidate "
                f"(u={upper:.6g}, l={lower:.6g}, phi_u={phi_u:.6g}, phi_l={phi_l:.6g})",
                step=step, upper=upper, lower=lower, phi_upper=phi_u, phi_lower=phi_l,
            )
        width = np.where(ok, 1.0 / U - 1.0 / np.where(ok, L, 1.0), -np.inf)
        j = int(np.argmax(width))
        t = 0.5 * (1.0 / U[j] + 1.0 / L[j])
        chosen[j] += t

        # rank-one update of A = Q diag(A_vals) Q^H by t y_j y_j^H
        z = Z[j].conj()
        M = np.diag(A_vals).astype(complex) + t * np.outer(z, z.conj())
        A_vals, R = np.linalg.eigh(0.5 * (M + M.conj().T))
        Z = Z @ R
        upper, lower = u_next, l_next

    scale = 1.0 / math.sqrt(upper * lower)
    picked = np.nonzero(chosen > 0)[0]
    out = SampleSet(candidates.points[picked], scale * chosen[picked] * candidates.weights[picked])
    log.debug(
        "bss: %d candidates -> %d points (N=%d, c=%g, barriers [%g, %g])",
        candidates.m, out.m, N, c, lower, upper,
    )
    return out


def bss_bounds(N: int, c: float) -> tuple[float, float]:
    """(beta_lo, beta_hi) guaranteed by :func:`bss_subsample` for given N and c."""
    lower, upper, delta_l, delta_u = _barrier_schedule(N, c)
    steps = math.ceil(c * N)
    lower += steps * delta_l
    upper += steps * delta_u
    beta_lo = math.sqrt(lower / upper)
    return beta_lo, 1.0 / beta_lo


def build_sample_set(
    freqs: FrequencySet,
    method: str,
    seed: int = 0,
    kappa: float = 10.0,
    c: float = 12.0,
    c1_floor: float = 0.1,
    max_retries: int = 10,
    grid_s: int | None = None,
):
    """Sample set and certificate from one of the pipelines ``grid``, ``random``, ``bss``.

    grid: equal-weight tensor grid, ``grid_s`` points per axis (default 2 max|k| + 1).
    random: ceil(kappa N log N) equal-weight points, redrawn until C1 >= c1_floor.
    bss: the same random candidates thinned by :func:`bss_subsample` to ceil(c N) points.
    """
    d, N = freqs.d, freqs.N
    if method == "grid":
        s = grid_s or 2 * freqs.radius() + 1
        S = grid_points(d, s)
        return S, certify(freqs, S, method="grid", s=s)
    M = oversampled_size(N, kappa)
    if method == "random":
        return equal_weight_verify(freqs, d, M, seed, c1_floor, max_retries)
    if method != "bss":
        raise ValueError(f"unknown sampling method {method!r}")
    candidates = random_points(d, M, seed)
    cand = certify(freqs, candidates)
    if not cand.lambda_min > 0:
        raise DiscretizationNotAchieved(
            f"bss candidates (M={M}) are not a frame for N={N}", best=cand, sample_set=candidates
        )
    S = bss_subsample(freqs, candidates, c, candidate_cert=cand)
    beta_lo, beta_hi = bss_bounds(N, c)
    cert = certify(
        freqs, S, method="bss", seed=seed, candidates=M, c=c,
        candidate_lambda_min=cand.lambda_min, candidate_lambda_max=cand.lambda_max,
        beta_lo=beta_lo, beta_hi=beta_hi,
    )
    return S, cert


def condition_e(freqs: FrequencySet, probe, system=None) -> float:
    """Smallest t with sum_i |u_i(x)|^2 <= N t^2 over the probe points.

    By default u_i are the exponentials of ``freqs``.  ``system`` may be any
    callable mapping an (P, d) point array to a (P, N) matrix of basis values,
    for checking other orthonormal systems.
    """
    pts = np.asarray(probe, dtype=float)
    if pts.size == 0:
        raise ValueError("probe set is empty")
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if freqs.d == 1 else pts.reshape(1, -1)
    values = basis_matrix(freqs, pts) if system is None else np.asarray(system(pts))
    n = values.shape[1]
    return float(np.sqrt(np.max(np.sum(np.abs(values) ** 2, axis=1)) / n))
