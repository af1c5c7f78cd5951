"""Bernoulli kernels, members of the classes W^r_q, and worst-case errors of linear recovery.

A member of W^r_q is f = phi * F_r with ||phi||_q <= 1, so its Fourier
coefficients are phi_hat(k) times the kernel coefficients
prod_j b_r(k_j), b_r(0) = 1, b_r(k) = |k|^{-r} exp(-i sign(k) r pi / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.special import zeta

from .errors import ResourceLimitError
from .trig import FrequencySet, TrigPolynomial, cube, evaluate, iter_basis_blocks

# kernel partial sums are accumulated in blocks of this many terms
_SUM_BLOCK = 1 << 20
MAX_KERNEL_TERMS = 1 << 26
# dense eigensolver below this truth-box size, Lanczos above
_DENSE_LIMIT = 1500


def bernoulli_coeffs(r: float, freqs) -> np.ndarray:
    """Kernel coefficients for every row of an (N, d) frequency array or FrequencySet."""
    if r <= 0:
        raise ValueError("smoothness r must be positive")
    k = freqs.frequencies if isinstance(freqs, FrequencySet) else np.atleast_2d(freqs)
    k = np.asarray(k, dtype=float)
    modulus = np.prod(np.maximum(1.0, np.abs(k)), axis=1) ** (-r)
    phase = np.exp(-1j * (r * np.pi / 2) * np.sum(np.sign(k), axis=1))
    return modulus * phase


def bernoulli_coeff(r: float, k) -> complex:
    return complex(bernoulli_coeffs(r, np.reshape(np.asarray(k), (1, -1)))[0])


def kernel_weights(r: float, freqs: FrequencySet) -> np.ndarray:
    """prod_j max(1, |k_j|)^{-r}, the moduli of the kernel coefficients."""
    return freqs.mixed_size().astype(float) ** (-r)


def _kernel_terms(r, x, tol):
    """Number of terms K so that the 1-d kernel tail beyond K is at most tol."""
    # integral bound: 2 sum_{k>K} k^{-r} <= 2 K^{1-r} / (r - 1)
    k_int = _ceil_power(2.0 / ((r - 1.0) * tol), 1.0 / (r - 1.0))
    # summation by parts: |sum_{k>K} k^{-r} e^{ikx}| <= (K+1)^{-r} / |sin(x/2)|
    s = abs(math.sin(x / 2.0))
    k_abel = _ceil_power(2.0 / (tol * s), 1.0 / r) if s > 0 else k_int
    return max(1, min(k_int, k_abel))


def _ceil_power(base, exponent):
    # saturates instead of overflowing; callers compare against a term cap
    log_k = exponent * math.log(base)
    return math.ceil(math.exp(log_k)) if log_k < 700 else math.inf


def _kernel_1d(r, x, tol, max_terms):
    K = _kernel_terms(r, x, tol)
    if K > max_terms:
        raise ResourceLimitError(
            f"Bernoulli kernel at r={r}, x={x:.6g} needs {K:.3g} terms for tol={tol:g} "
            f"(cap {max_terms}); loosen tol"
        )
    total = 0.0
    shift = r * np.pi / 2
    for start in range(1, K + 1, _SUM_BLOCK):
        k = np.arange(start, min(start + _SUM_BLOCK, K + 1), dtype=float)
        total += float(np.sum(k ** (-r) * np.cos(k * x - shift)))
    return 1.0 + 2.0 * total


def bernoulli_eval(r: float, x, tol: float = 1e-8, max_terms: int = MAX_KERNEL_TERMS) -> float:
    """F_r(x) = prod_j F_r(x_j), truncated so the total error is at most ``tol``."""
    if r <= 1:
        raise ValueError("kernel evaluation requires r > 1 for absolute convergence")
    if tol <= 0:
        raise ValueError("tol must be positive")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    d = xs.shape[0]
    # every factor and partial product is bounded by 1 + 2 zeta(r)
    bound = 1.0 + 2.0 * float(zeta(r))
    tol1 = tol / (d * bound ** (d - 1))
    value = 1.0
    for xj in np.mod(xs, 2 * np.pi):
        value *= _kernel_1d(r, float(xj), tol1, max_terms)
    return value


def _require_symmetric(box: FrequencySet):
    if FrequencySet(-box.frequencies) != box:
        raise ValueError("box must be symmetric under k -> -k for real-valued members")
    return np.array([box.index_of(-k) for k in box.frequencies], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ClassMember:
    """f = phi * F_r given by the spectra of phi and f on a common box."""

    class_id: str
    r: float
    phi: TrigPolynomial
    f: TrigPolynomial

    def __call__(self, x):
        return evaluate(self.f, x)

    @property
    def box(self) -> FrequencySet:
        return self.f.basis

    def to_json(self) -> dict:
        return {
            "class_id": self.class_id,
            "r": self.r,
            "phi": self.phi.to_json(),
            "f": self.f.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClassMember":
        return cls(
            class_id=data["class_id"],
            r=float(data["r"]),
            phi=TrigPolynomial.from_json(data["phi"]),
            f=TrigPolynomial.from_json(data["f"]),
        )


def member_from_phi(phi: TrigPolynomial, r: float, class_id: str = "w2r") -> ClassMember:
    f = phi.coefficients * bernoulli_coeffs(r, phi.basis)
    return ClassMember(class_id, r, phi, TrigPolynomial(phi.basis, f))


def random_w2r_member(box: FrequencySet, r: float, seed: int) -> ClassMember:
    """Random real-valued member of W^r_2 band-limited to ``box``, with ||phi||_2 = 1."""
    if r <= 0:
        raise ValueError("smoothness r must be positive")
    mirror = _require_symmetric(box)
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(box.N) + 1j * rng.standard_normal(box.N)
    phi = 0.5 * (raw + raw[mirror].conj())
    phi /= np.linalg.norm(phi)
    return member_from_phi(TrigPolynomial(box, phi), r, "w2r")


def fejer_member(d: int, K: int, r: float, shift=None) -> ClassMember:
    """W^r_1 surrogate: phi is the tensor Fejer kernel of order K centred at ``shift``.

    The Fejer kernel is nonnegative with mean one, so ||phi||_1 = 1 and the
    member sits on the boundary of the unit ball, concentrating like a spike
    as K grows.
    """
    box = cube(d, K)
    taper = np.prod(1.0 - np.abs(box.frequencies) / (K + 1.0), axis=1)
    x0 = np.zeros(d) if shift is None else np.asarray(shift, dtype=float).reshape(d)
    phi = taper * np.exp(-1j * (box.frequencies @ x0))
    return member_from_phi(TrigPolynomial(box, phi), r, "w1r")


def l1_norm_quadrature(u: TrigPolynomial, s: int | None = None) -> float:
    """Mean of |u| over a uniform grid (exact for |u| = u >= 0 once s > 2 max|k|)."""
    from .trig import GridSpec, uniform_grid

    s = s or 2 * u.basis.radius() + 2
    pts = uniform_grid(GridSpec(u.basis.d, s))
    return float(np.mean(np.abs(evaluate(u, pts))))


@dataclass(frozen=True, eq=False)
class WorstCaseProblem:
    """Linear recovery of band-limited W^r_2 members on ``truth_box``.

    ``algorithm`` is an (N, m) matrix mapping m data values to coefficients
    on ``freqs``.
    """

    truth_box: FrequencySet
    freqs: FrequencySet
    algorithm: np.ndarray
    r: float

    def __post_init__(self):
        if not self.freqs.issubset(self.truth_box):
            raise ValueError("approximation frequencies must lie inside the truth box")
        A = np.asarray(self.algorithm, dtype=complex)
        if A.ndim != 2 or A.shape[0] != self.freqs.N:
            raise ValueError(f"algorithm must have {self.freqs.N} rows, got shape {A.shape}")
        object.__setattr__(self, "algorithm", A)


@dataclass(frozen=True, eq=False)
class WorstCaseReport:
    value: float
    worst: ClassMember
    truncation: float
    problem_meta: dict

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "truncation": self.truncation,
            "problem": self.problem_meta,
            "worst_member": self.worst.to_json(),
        }


def truncation_value(truth_box: FrequencySet, freqs: FrequencySet, r: float) -> float:
    """Largest kernel weight outside ``freqs``: the error of exact orthogonal projection."""
    mask = np.ones(truth_box.N, dtype=bool)
    mask[freqs.indices_in(truth_box)] = False
    w = kernel_weights(r, truth_box)[mask]
    return float(w.max()) if w.size else 0.0


def _top_singular(head: np.ndarray, tail_diag: np.ndarray):
    """Largest singular value and right vector of the stacked operator [head; diag(tail)].

    E^H E = head^H head + diag(tail^2); solved densely for small sizes and by
    Lanczos with a fixed start vector otherwise.
    """
    n = head.shape[1]
    if n <= _DENSE_LIMIT:
        H = head.conj().T @ head
        H[np.diag_indices(n)] += tail_diag**2
        vals, vecs = scipy.linalg.eigh(H, subset_by_index=[n - 1, n - 1])
        return math.sqrt(max(float(vals[0]), 0.0)), vecs[:, 0]
    op = scipy.sparse.linalg.LinearOperator(
        (n, n),
        matvec=lambda v: head.conj().T @ (head @ v) + tail_diag**2 * v,
        dtype=complex,
    )
    vals, vecs = scipy.sparse.linalg.eigsh(op, k=1, which="LA", v0=np.ones(n, dtype=complex), tol=0)
    return math.sqrt(max(float(vals[0]), 0.0)), vecs[:, 0]


def _information_on_box(problem: WorstCaseProblem, information) -> np.ndarray:
    """A @ S where S maps box coefficients to data; S is a SampleSet or a matrix."""
    A = problem.algorithm
    box = problem.truth_box
    if hasattr(information, "points"):
        if information.m != A.shape[1]:
            raise ValueError(f"algorithm expects {A.shape[1]} samples, sample set has {information.m}")
        out = np.zeros((A.shape[0], box.N), dtype=complex)
        for sl, V in iter_basis_blocks(box, information.points):
            out += A[:, sl] @ V
        return out
    S = np.asarray(information, dtype=complex)
    if S.shape != (A.shape[1], box.N):
        raise ValueError(f"information matrix must be {(A.shape[1], box.N)}, got {S.shape}")
    return A @ S


def worst_case_report(problem: WorstCaseProblem, information) -> WorstCaseReport:
    """sup over band-limited W^r_2 of the L2 recovery error, with the extremal member.

    The error operator (I - A S) D acts on box coefficients of phi; D holds the
    kernel coefficients.  Rows outside ``freqs`` reduce to the diagonal of D,
    so only the N rows on ``freqs`` need to be formed densely.
    """
    box, freqs, r = problem.truth_box, problem.freqs, problem.r
    weights = kernel_weights(r, box)
    idx = freqs.indices_in(box)
    head = -_information_on_box(problem, information) * weights[None, :]
    head[np.arange(freqs.N), idx] += weights[idx]
    tail = weights.copy()
    tail[idx] = 0.0
    value, v = _top_singular(head, tail)
    # the error operator used moduli; restore kernel phases on the worst phi
    phase = bernoulli_coeffs(r, box) / weights
    v = v * phase.conj()
    # deterministic sign/phase: make the largest entry real positive
    j = int(np.argmax(np.abs(v)))
    v = v * (abs(v[j]) / v[j])
    worst = member_from_phi(TrigPolynomial(box, v / np.linalg.norm(v)), r, "w2r")
    meta = {"r": r, "N": freqs.N, "box_size": box.N, "m": int(problem.algorithm.shape[1])}
    return WorstCaseReport(value, worst, truncation_value(box, freqs, r), meta)


def worst_case_linear(problem: WorstCaseProblem, information) -> float:
    """Largest singular value of (I - A S) D on the truth box."""
    return worst_case_report(problem, information).value
