"""Finite-copy measurement simulation.

Born-rule sampling, swap-test overlap estimation, linear-inversion state
tomography and majority voting, with explicit copy accounting through
:class:`CopyLedger`.  Every stochastic routine takes an explicit generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, CopyExhausted, DataError
from .qcore import BinaryPovm, DensityMatrix, Observable, eig_hermitian

__all__ = [
    "ShotRecord",
    "CopyLedger",
    "born_probabilities",
    "born_sample",
    "swap_test_estimate",
    "gell_mann_basis",
    "tomography_reconstruct",
    "majority_vote",
    "majority_vote_batch",
    "pauli_string_terms",
    "observable_shot_mean",
]


@dataclass(frozen=True)
class ShotRecord:
    """Outcome indices of repeated Born sampling from one POVM."""

    outcomes: np.ndarray
    povm_id: str
    copies_consumed: int

    def __post_init__(self):
        out = np.asarray(self.outcomes, dtype=int)
        if out.ndim != 1 or len(out) != self.copies_consumed:
            raise DataError("copies_consumed must equal the number of outcomes")
        object.__setattr__(self, "outcomes", out)


@dataclass
class CopyLedger:
    """Remaining copy counts per training item; debits never go negative."""

    remaining: np.ndarray

    def __init__(self, remaining: Sequence[int]):
        arr = np.asarray(remaining, dtype=int).copy()
        if (arr < 0).any():
            raise DataError("copy counts must be nonnegative")
        self.remaining = arr

    def debit(self, item: int, copies: int) -> None:
        if copies < 0:
            raise ConfigError("cannot debit a negative number of copies")
        if self.remaining[item] < copies:
            raise CopyExhausted(
                f"item {item} has {self.remaining[item]} copies left, needs {copies}"
            )
        self.remaining[item] -= copies

    def total_remaining(self) -> int:
        return int(self.remaining.sum())


def _validated_probabilities(rho: DensityMatrix, effects: Sequence[np.ndarray]) -> np.ndarray:
    total = sum(np.asarray(e, dtype=complex) for e in effects)
    dev = float(np.max(np.abs(total - np.eye(rho.dim))))
    if dev > 1e-9:
        raise DataError(f"effects sum to identity only within {dev:.3e} > 1e-9")
    for e in effects:
        low = float(np.linalg.eigvalsh((e + e.conj().T) / 2).min())
        if low < -1e-9:
            raise DataError(f"effect has eigenvalue {low:.3e} < -1e-9")
    p = np.array([float(np.real(np.trace(e @ rho.entries))) for e in effects])
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def born_probabilities(rho: DensityMatrix, effects: Sequence[np.ndarray]) -> np.ndarray:
    """Outcome distribution ``p(k) = Tr[Pi_k rho]`` of a POVM."""
    return _validated_probabilities(rho, effects)


def born_sample(
    rho: DensityMatrix,
    povm: Sequence[np.ndarray] | BinaryPovm,
    shots: int,
    rng: np.random.Generator,
    ledger: CopyLedger | None = None,
    item: int = 0,
    povm_id: str = "povm",
) -> ShotRecord:
    """Draw ``shots`` i.i.d. outcomes; one copy is consumed per shot."""
    if shots < 1:
        raise ConfigError("shots must be at least 1")
    effects = povm.effects() if isinstance(povm, BinaryPovm) else list(povm)
    p = _validated_probabilities(rho, effects)
    if ledger is not None:
        ledger.debit(item, shots)
    outcomes = rng.choice(len(effects), size=shots, p=p)
    return ShotRecord(outcomes=outcomes, povm_id=povm_id, copies_consumed=shots)


def swap_test_estimate(
    rho: DensityMatrix,
    sigma: DensityMatrix,
    shots: int,
    rng: np.random.Generator,
    ledger: CopyLedger | None = None,
    items: tuple[int, int] = (0, 1),
) -> tuple[float, float]:
    """Unbiased swap-test estimate of ``Tr[rho sigma]`` with its std error.

    Each shot consumes one copy of each input and returns +/-1 with
    ``P(+1) = (1 + Tr[rho sigma]) / 2``; the reported error is
    ``sqrt((1 - est^2)/shots)`` clamped at zero, using the estimated overlap.
    """
    if shots < 1:
        raise ConfigError("shots must be at least 1")
    if rho.dim != sigma.dim:
        raise DataError("swap test requires equal dimensions")
    if ledger is not None:
        ledger.debit(items[0], shots)
        ledger.debit(items[1], shots)
    t = float(np.real(np.trace(rho.entries @ sigma.entries)))
    p_plus = min(max((1.0 + t) / 2.0, 0.0), 1.0)
    n_plus = rng.binomial(shots, p_plus)
    est = 2.0 * n_plus / shots - 1.0
    stderr = math.sqrt(max(0.0, 1.0 - est**2) / shots)
    return est, stderr


def gell_mann_basis(d: int) -> list[np.ndarray]:
    """The d^2 - 1 generalized Pauli (Gell-Mann) matrices, ``Tr[G_a G_b] = 2 d_ab``."""
    basis = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j, 1j
            basis.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        basis.append(np.diag(diag).astype(complex) * math.sqrt(2.0 / (l * (l + 1))))
    return basis


def tomography_reconstruct(
    copies: int,
    rho_true: DensityMatrix,
    rng: np.random.Generator,
    exact: bool = False,
    ledger: CopyLedger | None = None,
    item: int = 0,
) -> DensityMatrix:
    """Linear-inversion state tomography from generalized Pauli expectations.

    Each of the ``d^2 - 1`` basis observables is estimated from an equal share
    of the copy budget (remainder to the leading observables) by sampling its
    eigenbasis; the inverted estimate is repaired to a valid state by
    eigenvalue clipping and trace renormalization.  ``exact=True`` emulates
    the infinite-copy limit by plugging in exact expectations.
    """
    d = rho_true.dim
    n_obs = d * d - 1
    if not exact and copies < d * d:
        raise ConfigError(f"tomography needs at least d^2 = {d * d} copies, got {copies}")
    if ledger is not None and not exact:
        ledger.debit(item, copies)
    basis = gell_mann_basis(d)
    estimate = np.eye(d, dtype=complex) / d
    base, extra = (0, 0) if exact else divmod(int(copies), n_obs)
    for a, g in enumerate(basis):
        if exact:
            c = float(np.real(np.trace(g @ rho_true.entries)))
        else:
            shots = base + (1 if a < extra else 0)
            if shots == 0:
                c = 0.0
            else:
                vals, vecs = eig_hermitian(g)
                probs = np.real(np.einsum("ij,ji->i", vecs.conj().T, rho_true.entries @ vecs))
                probs = np.clip(probs, 0.0, None)
                probs /= probs.sum()
                counts = rng.multinomial(shots, probs)
                c = float(np.dot(counts, vals) / shots)
        estimate = estimate + (c / 2.0) * g
    return DensityMatrix.from_matrix(estimate, repair=True)


def majority_vote(
    rho_test: DensityMatrix,
    povm: BinaryPovm,
    v: int,
    rng: np.random.Generator,
    ledger: CopyLedger | None = None,
    item: int = 0,
) -> int:
    """Label from the majority of ``v`` independent binary measurements."""
    if v < 1 or v % 2 == 0:
        raise ConfigError("majority voting requires an odd number of copies")
    record = born_sample(rho_test, povm, v, rng, ledger=ledger, item=item, povm_id="majority")
    n_plus = int(np.sum(record.outcomes == 0))
    return +1 if 2 * n_plus > v else -1


def majority_vote_batch(
    rho_test: DensityMatrix,
    povm: BinaryPovm,
    v: int,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Labels of ``trials`` independent majority votes, drawn in one batch.

    Distributionally identical to calling :func:`majority_vote` repeatedly:
    the number of +1 outcomes among the ``v`` i.i.d. Born samples of each
    trial is binomial with the single-shot probability.
    """
    if v < 1 or v % 2 == 0:
        raise ConfigError("majority voting requires an odd number of copies")
    p_plus = float(born_probabilities(rho_test, povm.effects())[0])
    n_plus = rng.binomial(v, p_plus, size=int(trials))
    return np.where(2 * n_plus > v, +1, -1)


def _single_qubit_paulis() -> dict[str, np.ndarray]:
    return {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }


def pauli_string_terms(a: Observable) -> list[tuple[float, Observable]]:
    """Decompose an n-qubit observable over tensor products of Paulis.

    Returns ``(coefficient, term)`` pairs with nonzero coefficients; the
    weighted sum of terms reconstructs the observable exactly.
    """
    d = a.dim
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise ConfigError(f"Pauli decomposition needs a power-of-two dim, got {d}")
    paulis = _single_qubit_paulis()
    names = ["I", "X", "Y", "Z"]
    terms = []
    for idx in np.ndindex(*(4,) * n):
        p = np.array([[1.0]], dtype=complex)
        for i in idx:
            p = np.kron(p, paulis[names[i]])
        coeff = float(np.real(np.trace(p @ a.entries))) / d
        if abs(coeff) > 1e-12:
            terms.append((coeff, Observable(p)))
    return terms


def observable_shot_mean(
    rho: DensityMatrix,
    a: Observable,
    decomposition: Sequence[tuple[float, Observable]],
    shots: int,
    rng: np.random.Generator,
    ledger: CopyLedger | None = None,
    item: int = 0,
) -> float:
    """Estimate ``Tr[A rho]`` by measuring each decomposition term's eigenbasis.

    The shot budget is split evenly across terms with the remainder assigned
    to the terms of largest coefficient magnitude; the estimate is unbiased.
    """
    if shots < 1:
        raise ConfigError("shots must be at least 1")
    terms = list(decomposition)
    if not terms:
        raise ConfigError("decomposition must contain at least one term")
    recon = sum(c * t.entries for c, t in terms)
    if float(np.max(np.abs(recon - a.entries))) > 1e-9:
        raise DataError("decomposition does not reconstruct the observable within 1e-9")
    if ledger is not None:
        ledger.debit(item, shots)
    decomposed = [(c, *eig_hermitian(t)) for c, t in terms]
    total = 0.0
    sampled = []
    for coeff, vals, vecs in decomposed:
        if float(np.max(vals) - np.min(vals)) < 1e-12:
            total += coeff * float(vals[0])  # deterministic outcome, no copies needed
        else:
            sampled.append((coeff, vals, vecs))
    if sampled:
        if shots < len(sampled):
            raise ConfigError(
                f"need at least one shot per non-trivial term ({len(sampled)}), got {shots}"
            )
        order = np.argsort([-abs(c) for c, _, _ in sampled])
        base, extra = divmod(int(shots), len(sampled))
        alloc = np.full(len(sampled), base)
        alloc[order[:extra]] += 1
        for (coeff, vals, vecs), n_shots in zip(sampled, alloc):
            probs = np.real(np.einsum("ij,ji->i", vecs.conj().T, rho.entries @ vecs))
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum()
            counts = rng.multinomial(int(n_shots), probs)
            total += coeff * float(np.dot(counts, vals) / n_shots)
    return total
