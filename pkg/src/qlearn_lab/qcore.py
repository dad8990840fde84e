"""Dense complex-Hermitian linear algebra and quantum state primitives.

Value types (:class:`DensityMatrix`, :class:`PureState`, :class:`Observable`,
:class:`BinaryPovm`) are immutable after construction and validated against
explicit tolerances, so they are safe to share read-only across workers.  All
operations are pure functions.

Numerical policy
----------------
* Nominally Hermitian inputs are symmetrized as ``(M + M^dag)/2`` before any
  eigendecomposition; asymmetry beyond ``SYMMETRIZE_ATOL`` is rejected.
* Slightly negative eigenvalues produced by round-off or tomography are
  repaired by clamping values in ``[-PSD_ATOL, 0)`` to zero followed by trace
  renormalization; anything more negative raises :class:`~.errors.DataError`.
* Dimensions are capped (default 4096) so joint spaces stay at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, DataError, NumericalError, ShapeError

__all__ = [
    "DEFAULT_DIM_CAP",
    "HERMITIAN_ATOL",
    "SYMMETRIZE_ATOL",
    "PSD_ATOL",
    "TRACE_ATOL",
    "DensityMatrix",
    "PureState",
    "Observable",
    "BinaryPovm",
    "EntropyTriple",
    "tensor",
    "partial_trace",
    "eig_hermitian",
    "matrix_sign",
    "trace_norm",
    "trace_distance",
    "entropies",
    "uhlmann_fidelity",
    "overlap",
    "computational_povm",
    "density_to_json",
    "density_from_json",
]

DEFAULT_DIM_CAP = 4096
HERMITIAN_ATOL = 1e-10
SYMMETRIZE_ATOL = 1e-8
PSD_ATOL = 1e-9
TRACE_ATOL = 1e-10


def _as_complex_matrix(entries: np.ndarray | Sequence) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_hermitian(m: np.ndarray, atol: float, what: str) -> None:
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym > atol:
        raise DataError(f"{what} is not Hermitian: max |M - M^dag| = {asym:.3e} > {atol:g}")


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    m.setflags(write=False)
    return m


def repair_psd_spectrum(values: np.ndarray, atol: float = PSD_ATOL, what: str = "matrix") -> np.ndarray:
    """Clamp eigenvalues in ``[-atol, 0)`` to zero; reject anything lower."""
    low = float(values.min()) if values.size else 0.0
    if low < -atol:
        raise DataError(f"{what} has eigenvalue {low:.3e} < -{atol:g}; not repairable")
    return np.clip(values, 0.0, None)


@dataclass(frozen=True)
class DensityMatrix:
    """A complex Hermitian, positive semidefinite, unit-trace matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        _check_hermitian(m, HERMITIAN_ATOL, "density matrix")
        m = (m + m.conj().T) / 2.0
        tr = float(np.real(np.trace(m)))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise DataError(f"density matrix trace {tr!r} differs from 1 beyond {TRACE_ATOL:g}")
        vals = np.linalg.eigvalsh(m)
        if float(vals.min()) < -PSD_ATOL:
            raise DataError(
                f"density matrix has eigenvalue {float(vals.min()):.3e} < -{PSD_ATOL:g}"
            )
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @staticmethod
    def from_matrix(entries: np.ndarray, repair: bool = False) -> "DensityMatrix":
        """Build a state, optionally repairing small negative eigenvalues.

        With ``repair=True`` the spectrum is clamped at zero (values below
        ``-PSD_ATOL`` still raise) and the trace renormalized, which is the
        documented policy for tomographic estimates.
        """
        m = _as_complex_matrix(entries)
        if repair:
            _check_hermitian(m, SYMMETRIZE_ATOL, "density matrix")
            m = (m + m.conj().T) / 2.0
            vals, vecs = np.linalg.eigh(m)
            vals = repair_psd_spectrum(vals, what="density matrix")
            if vals.sum() <= 0:
                raise DataError("density matrix repair left zero trace")
            vals = vals / vals.sum()
            m = (vecs * vals) @ vecs.conj().T
        return DensityMatrix(m)

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(np.eye(dim) / dim)


@dataclass(frozen=True)
class PureState:
    """A unit vector in a ``dim``-dimensional Hilbert space."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        nrm = float(np.linalg.norm(v))
        if abs(nrm - 1.0) > 1e-12:
            raise DataError(f"pure state norm {nrm!r} differs from 1 beyond 1e-12")
        object.__setattr__(self, "amplitudes", _freeze(v.reshape(-1)))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @staticmethod
    def from_vector(v: np.ndarray | Sequence) -> "PureState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise DataError("cannot normalize the zero vector")
        return PureState(v / nrm)

    @staticmethod
    def basis(dim: int, index: int) -> "PureState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return PureState(v)

    def to_density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()))


@dataclass(frozen=True)
class Observable:
    """A Hermitian matrix; stored symmetrized."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        _check_hermitian(m, SYMMETRIZE_ATOL, "observable")
        object.__setattr__(self, "entries", _freeze((m + m.conj().T) / 2.0))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class BinaryPovm:
    """A pair of PSD effects summing to the identity."""

    effect_plus: np.ndarray
    effect_minus: np.ndarray

    def __post_init__(self):
        ep = _as_complex_matrix(self.effect_plus)
        em = _as_complex_matrix(self.effect_minus)
        if ep.shape != em.shape:
            raise ShapeError("POVM effects must share a dimension")
        for name, e in (("effect_plus", ep), ("effect_minus", em)):
            _check_hermitian(e, SYMMETRIZE_ATOL, name)
            low = float(np.linalg.eigvalsh((e + e.conj().T) / 2).min())
            if low < -PSD_ATOL:
                raise DataError(f"{name} has eigenvalue {low:.3e} < -{PSD_ATOL:g}")
        dev = float(np.max(np.abs(ep + em - np.eye(ep.shape[0]))))
        if dev > 1e-9:
            raise DataError(f"POVM effects sum to identity only within {dev:.3e} > 1e-9")
        object.__setattr__(self, "effect_plus", _freeze((ep + ep.conj().T) / 2))
        object.__setattr__(self, "effect_minus", _freeze((em + em.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.effect_plus.shape[0]

    def effects(self) -> list[np.ndarray]:
        return [self.effect_plus, self.effect_minus]


class EntropyTriple(NamedTuple):
    renyi_half: float
    von_neumann: float
    purity: float


def _entries(x) -> np.ndarray:
    if isinstance(x, (DensityMatrix, Observable)):
        return x.entries
    if isinstance(x, PureState):
        return x.to_density().entries
    return _as_complex_matrix(x)


def tensor(a: DensityMatrix, b: DensityMatrix, cap: int = DEFAULT_DIM_CAP) -> DensityMatrix:
    """Kronecker product ``a (x) b`` with a dimension cap."""
    dim = a.dim * b.dim
    if dim > cap:
        raise CapacityError(f"tensor dimension {dim} exceeds cap {cap}")
    return DensityMatrix(np.kron(a.entries, b.entries))


def partial_trace(
    rho: DensityMatrix | np.ndarray,
    dims: Sequence[int],
    keep: Iterable[int],
) -> DensityMatrix:
    """Reduced state over the subsystems in ``keep`` (ascending order).

    ``dims`` lists the subsystem dimensions whose product must equal the
    total dimension of ``rho``.
    """
    m = _entries(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != m.shape[0]:
        raise ShapeError(f"prod(dims)={int(np.prod(dims))} does not match dim {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ShapeError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ShapeError(f"keep indices {keep} out of range for {n} subsystems")
    t = m.reshape(dims + dims)
    for idx in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=idx, axis2=idx + t.ndim // 2)
    kept = int(np.prod([dims[k] for k in keep]))
    return DensityMatrix(t.reshape(kept, kept))


def eig_hermitian(m: Observable | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of a Hermitian matrix.

    The input is symmetrized first; asymmetry beyond ``SYMMETRIZE_ATOL`` is
    rejected.  The reconstruction residual ``|V L V^dag - M|_F`` must stay
    below ``1e-9 * dim`` or :class:`~.errors.NumericalError` is raised.
    """
    a = _entries(m)
    _check_hermitian(a, SYMMETRIZE_ATOL, "eig_hermitian input")
    sym = (a + a.conj().T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    residual = float(np.linalg.norm((vecs * vals) @ vecs.conj().T - sym))
    if residual > 1e-9 * sym.shape[0]:
        raise NumericalError(f"eigendecomposition residual {residual:.3e} too large")
    return vals, vecs


def matrix_sign(h: Observable | np.ndarray, zero_tol: float = 1e-10) -> Observable:
    """Spectral sign with a symmetric kernel convention.

    Eigenvalues above ``zero_tol`` map to +1, below ``-zero_tol`` to -1, and
    the near-kernel maps to 0, so ``(I +/- sign)/2`` always forms a valid
    binary POVM that splits degenerate directions equally.
    """
    vals, vecs = eig_hermitian(h)
    signs = np.where(vals > zero_tol, 1.0, np.where(vals < -zero_tol, -1.0, 0.0))
    return Observable((vecs * signs) @ vecs.conj().T)


def trace_norm(m: Observable | np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    vals, _ = eig_hermitian(m)
    return float(np.sum(np.abs(vals)))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Trace distance ``|a - b|_1 / 2``, in ``[0, 1]`` for states."""
    return 0.5 * trace_norm(a.entries - b.entries)


def entropies(rho: DensityMatrix) -> EntropyTriple:
    """Order-1/2 Renyi entropy, von Neumann entropy and purity (base-2 logs)."""
    vals = np.linalg.eigvalsh(rho.entries)
    vals = repair_psd_spectrum(vals, what="density matrix")
    vals = vals / vals.sum()
    renyi_half = 2.0 * np.log2(np.sum(np.sqrt(vals)))
    pos = vals[vals > 0]
    von_neumann = float(-np.sum(pos * np.log2(pos)))
    purity = float(np.sum(vals**2))
    return EntropyTriple(float(renyi_half), von_neumann, purity)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2.0)
    vals = repair_psd_spectrum(vals, what="matrix square root input")
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def uhlmann_fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2`` in [0, 1]."""
    sa = _psd_sqrt(a.entries)
    inner = sa @ b.entries @ sa
    vals = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(max(f, 0.0), 1.0)


def overlap(a: DensityMatrix, b: DensityMatrix) -> float:
    """Hilbert-Schmidt overlap ``Tr[a b]``; equals fidelity when one state is pure."""
    return float(np.real(np.trace(a.entries @ b.entries)))


def computational_povm(dim: int) -> list[np.ndarray]:
    """The projective measurement onto the computational basis."""
    return [np.outer(e, e.conj()) for e in np.eye(dim, dtype=complex)]


def density_to_json(rho: DensityMatrix) -> str:
    """Serialize as ``{dim, re, im}`` with row-major entry arrays."""
    m = rho.entries
    return json.dumps(
        {
            "dim": rho.dim,
            "re": [float(x) for x in m.real.reshape(-1)],
            "im": [float(x) for x in m.imag.reshape(-1)],
        }
    )


def density_from_json(text: str) -> DensityMatrix:
    """Load and validate a state serialized by :func:`density_to_json`."""
    doc = json.loads(text)
    try:
        dim = int(doc["dim"])
        re = np.asarray(doc["re"], dtype=float).reshape(dim, dim)
        im = np.asarray(doc["im"], dtype=float).reshape(dim, dim)
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed density-matrix document: {exc}") from exc
    return DensityMatrix(re + 1j * im)
