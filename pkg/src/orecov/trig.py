"""Trigonometric subspaces on the torus [0, 2pi)^d with normalized measure.

Frequencies are stored as an ``(N, d)`` integer array in lexicographic order,
so every matrix built from a :class:`FrequencySet` is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError

TWO_PI = 2.0 * np.pi

#: Default cap on the number of frequencies or grid points built in one call.
MAX_SIZE = 2_000_000

# Rows per block when evaluating exponentials, keeps temporaries below ~100 MB.
_BLOCK_ENTRIES = 4_000_000


def _as_points(x, d):
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    if pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {d}")
    return pts


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """A finite set of integer frequencies in Z^d, lexicographically sorted."""

    frequencies: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = np.asarray(self.frequencies)
        if k.ndim == 1:
            k = k.reshape(-1, 1)
        if k.ndim != 2 or k.shape[1] < 1:
            raise ValueError("frequencies must be an (N, d) array with d >= 1")
        if k.size and not np.all(np.equal(np.mod(k, 1), 0)):
            raise ValueError("frequencies must be integers")
        k = np.unique(k.astype(np.int64), axis=0)
        if k.shape[0] == 0:
            raise ValueError("a frequency set needs at least one frequency")
        k.setflags(write=False)
        object.__setattr__(self, "frequencies", k)
        object.__setattr__(self, "_index", {tuple(row): i for i, row in enumerate(k.tolist())})

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    @property
    def N(self) -> int:
        return self.frequencies.shape[0]

    def __len__(self):
        return self.N

    def __iter__(self):
        return iter(map(tuple, self.frequencies.tolist()))

    def __contains__(self, k):
        return tuple(int(v) for v in np.atleast_1d(k)) in self._index

    def __eq__(self, other):
        if not isinstance(other, FrequencySet):
            return NotImplemented
        return self.frequencies.shape == other.frequencies.shape and bool(
            np.array_equal(self.frequencies, other.frequencies)
        )

    def __hash__(self):
        return hash(self.frequencies.tobytes())

    def index_of(self, k) -> int:
        return self._index[tuple(int(v) for v in np.atleast_1d(k))]

    def indices_in(self, other: "FrequencySet") -> np.ndarray:
        """Positions of this set's frequencies inside ``other``.

        Raises ``ValueError`` when this set is not a subset of ``other``.
        """
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        try:
            return np.array([other._index[k] for k in self], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"frequency {exc.args[0]} not in the target set") from None

    def issubset(self, other: "FrequencySet") -> bool:
        return other.d == self.d and all(k in other._index for k in self)

    def radius(self) -> int:
        """Largest absolute component, i.e. the max |k_j| over the set."""
        return int(np.abs(self.frequencies).max())

    def mixed_size(self) -> np.ndarray:
        """prod_j max(1, |k_j|) for each frequency."""
        return np.prod(np.maximum(1, np.abs(self.frequencies)), axis=1)

    def to_json(self) -> dict:
        return {"d": self.d, "frequencies": self.frequencies.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "FrequencySet":
        k = np.asarray(data["frequencies"], dtype=np.int64).reshape(-1, int(data["d"]))
        return cls(k)


def hyperbolic_cross(d: int, Q: float, max_size: int = MAX_SIZE) -> FrequencySet:
    """Return {k in Z^d : prod_j max(1, |k_j|) <= Q}."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if Q < 1:
        raise ValueError("Q must be >= 1")
    radius = int(np.floor(Q))
    rows = np.zeros((1, 0), dtype=np.int64)
    sizes = np.ones(1, dtype=np.int64)
    axis_values = np.arange(-radius, radius + 1, dtype=np.int64)
    axis_sizes = np.maximum(1, np.abs(axis_values))
    for _ in range(d):
        new_sizes = sizes[:, None] * axis_sizes[None, :]
        keep = new_sizes <= Q
        count = int(keep.sum())
        if count > max_size:
            raise ResourceLimitError(
                f"hyperbolic cross d={d}, Q={Q} exceeds the cap of {max_size} frequencies"
            )
        parent, col = np.nonzero(keep)
        rows = np.concatenate([rows[parent], axis_values[col][:, None]], axis=1)
        sizes = new_sizes[parent, col]
    return FrequencySet(rows)


def cube(d: int, radius: int) -> FrequencySet:
    """Full box {-radius..radius}^d."""
    axis = np.arange(-radius, radius + 1)
    if (2 * radius + 1) ** d > MAX_SIZE:
        raise ResourceLimitError(f"box of radius {radius} in d={d} exceeds the size cap")
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return FrequencySet(np.stack([m.ravel() for m in mesh], axis=1))


def basis_matrix(freqs: FrequencySet, points) -> np.ndarray:
    """Evaluation matrix V with V[nu, j] = exp(i (k_j, x_nu)), shape (m, N)."""
    pts = np.mod(_as_points(points, freqs.d), TWO_PI)
    K = freqs.frequencies
    if freqs.N == 0 or freqs.d == 1:
        return np.exp(1j * (pts @ K.T.astype(float)))
    lo, hi = K.min(axis=0), K.max(axis=0)
    if int(np.sum(hi - lo + 1)) > freqs.N:
        return np.exp(1j * (pts @ K.T.astype(float)))
    # product of per-axis tables e^{i k x_j}: one complex exp per (point, axis, k_j)
    V = None
    for j in range(freqs.d):
        table = np.exp(1j * np.outer(pts[:, j], np.arange(lo[j], hi[j] + 1, dtype=float)))
        factor = table[:, K[:, j] - lo[j]]
        V = factor if V is None else np.multiply(V, factor, out=V)
    return V


def basis_vector(freqs: FrequencySet, x) -> np.ndarray:
    """Values e^{i(k, x)} for all k in ``freqs`` at a single point."""
    return basis_matrix(freqs, np.reshape(np.asarray(x, dtype=float), (1, freqs.d)))[0]


def iter_basis_blocks(freqs: FrequencySet, points):
    """Yield ``(slice, V_block)`` pairs covering ``points`` row-wise."""
    pts = _as_points(points, freqs.d)
    step = max(1, _BLOCK_ENTRIES // max(1, freqs.N))
    for start in range(0, pts.shape[0], step):
        sl = slice(start, min(start + step, pts.shape[0]))
        yield sl, basis_matrix(freqs, pts[sl])


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """u(x) = sum_k c_k e^{i(k, x)} over a frequency set."""

    basis: FrequencySet
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).reshape(-1)
        if c.shape[0] != self.basis.N:
            raise ValueError(f"{c.shape[0]} coefficients for a basis of size {self.basis.N}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, basis: FrequencySet) -> "TrigPolynomial":
        return cls(basis, np.zeros(basis.N, dtype=complex))

    def __call__(self, x):
        return evaluate(self, x)

    def coefficient(self, k) -> complex:
        return complex(self.coefficients[self.basis.index_of(k)]) if k in self.basis else 0j

    def embed(self, target: FrequencySet) -> "TrigPolynomial":
        """Zero-extend onto a superset of the basis."""
        out = np.zeros(target.N, dtype=complex)
        out[self.basis.indices_in(target)] = self.coefficients
        return TrigPolynomial(target, out)

    def restrict(self, target: FrequencySet) -> "TrigPolynomial":
        """Keep only the coefficients on ``target`` (frequencies absent here count as 0)."""
        out = np.array([self.coefficient(k) for k in target], dtype=complex)
        return TrigPolynomial(target, out)

    def to_json(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrigPolynomial":
        pairs = np.asarray(data["coefficients"], dtype=float).reshape(-1, 2)
        return cls(FrequencySet.from_json(data["basis"]), pairs[:, 0] + 1j * pairs[:, 1])


def evaluate(u: TrigPolynomial, x):
    """Evaluate ``u`` at one point (returns complex) or at an array of points.

    In d = 1 a scalar is a point and a 1-d array is a list of points; in
    d > 1 a 1-d array of length d is a single point.
    """
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0 or (pts.ndim == 1 and u.basis.d > 1):
        return complex(basis_vector(u.basis, pts) @ u.coefficients)
    pts = _as_points(pts, u.basis.d)
    out = np.empty(pts.shape[0], dtype=complex)
    for sl, block in iter_basis_blocks(u.basis, pts):
        out[sl] = block @ u.coefficients
    return out


def parseval_norm(u: TrigPolynomial) -> float:
    """L2 norm under the normalized measure, computed from the coefficients."""
    return float(np.linalg.norm(u.coefficients))


@dataclass(frozen=True)
class GridSpec:
    d: int
    s: int

    def __post_init__(self):
        if self.d < 1 or self.s < 1:
            raise ValueError("grid needs d >= 1 and s >= 1")


def uniform_grid(spec: GridSpec, max_size: int = MAX_SIZE) -> np.ndarray:
    """Tensor grid of points 2*pi*j/s, shape (s^d, d), last axis fastest."""
    if spec.s**spec.d > max_size:
        raise ResourceLimitError(f"grid with {spec.s}^{spec.d} points exceeds the cap {max_size}")
    axis = TWO_PI * np.arange(spec.s) / spec.s
    mesh = np.meshgrid(*([axis] * spec.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
