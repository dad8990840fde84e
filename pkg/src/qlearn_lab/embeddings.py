"""State families and datasets: Fourier embeddings, the entanglement toy
problem, locality projections, and environment-perturbed copies.

Dataset generation takes an explicit seeded generator and splits streams by
item index, so results do not depend on worker count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DataError, ShapeError
from .qcore import (
    DEFAULT_DIM_CAP,
    DensityMatrix,
    PureState,
    density_from_json,
    density_to_json,
    partial_trace,
)
from .rng import stream

__all__ = [
    "LabeledEnsemble",
    "FourierSpec",
    "fourier_embed",
    "haar_unitary",
    "entangled_pair_state",
    "separable_pair_state",
    "entanglement_dataset",
    "swap_operator",
    "swap_projection",
    "local_map",
    "perturbed_copies",
    "save_ensemble",
    "load_ensemble",
]


@dataclass(frozen=True)
class LabeledEnsemble:
    """A training set of ``(x, y, rho(x))`` triples with per-item copy budgets.

    ``copy_budget[n]`` is the number of copies of item ``n`` available to a
    finite-copy learner; the budget sums to ``N * S`` when built from a global
    per-item copy count ``S``.
    """

    xs: tuple
    labels: tuple
    states: tuple
    copy_budget: tuple

    def __post_init__(self):
        n = len(self.states)
        if not (len(self.xs) == len(self.labels) == n == len(self.copy_budget)):
            raise ShapeError("ensemble fields must have equal lengths")
        if n == 0:
            raise ConfigError("ensemble must contain at least one item")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise DataError(f"all states must share a dimension, got {sorted(dims)}")
        if any(y not in (-1, 1) for y in self.labels):
            raise DataError("labels must be +1 or -1")
        if any(int(c) <= 0 for c in self.copy_budget):
            raise DataError("copy budgets must be positive")

    @property
    def n_items(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @staticmethod
    def build(
        items: Sequence[tuple[np.ndarray, int, DensityMatrix]],
        copies_per_item: int | Sequence[int] = 1,
    ) -> "LabeledEnsemble":
        xs, labels, states = zip(*items)
        if isinstance(copies_per_item, int):
            budget = (copies_per_item,) * len(states)
        else:
            budget = tuple(int(c) for c in copies_per_item)
        return LabeledEnsemble(
            xs=tuple(np.atleast_1d(np.asarray(x, dtype=float)) for x in xs),
            labels=tuple(int(y) for y in labels),
            states=tuple(states),
            copy_budget=budget,
        )

    def class_indices(self, label: int) -> list[int]:
        return [i for i, y in enumerate(self.labels) if y == label]

    def class_mean(self, label: int) -> DensityMatrix:
        idx = self.class_indices(label)
        if not idx:
            raise ConfigError(f"no items with label {label:+d}")
        return DensityMatrix(sum(self.states[i].entries for i in idx) / len(idx))

    def class_weight(self, label: int) -> float:
        return len(self.class_indices(label)) / self.n_items

    def map_states(self, f: Callable[[DensityMatrix], DensityMatrix]) -> "LabeledEnsemble":
        return LabeledEnsemble(
            xs=self.xs,
            labels=self.labels,
            states=tuple(f(s) for s in self.states),
            copy_budget=self.copy_budget,
        )


@dataclass(frozen=True)
class FourierSpec:
    """A finite frequency set with an orthonormal embedding basis.

    The default basis is computational; a custom basis is given as a matrix
    whose columns are the basis vectors (orthonormal within 1e-10).
    """

    frequencies: tuple
    basis: np.ndarray | None = field(default=None)

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        if len(freqs) == 0:
            raise ConfigError("frequency set must be nonempty")
        if len(set(freqs)) != len(freqs):
            raise ConfigError("frequencies must be distinct")
        object.__setattr__(self, "frequencies", freqs)
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=complex)
            if b.shape != (len(freqs), len(freqs)):
                raise ShapeError("basis must be square with one column per frequency")
            dev = np.max(np.abs(b.conj().T @ b - np.eye(len(freqs))))
            if dev > 1e-10:
                raise DataError(f"basis is orthonormal only within {dev:.3e} > 1e-10")
            object.__setattr__(self, "basis", b)

    @property
    def size(self) -> int:
        return len(self.frequencies)


def fourier_embed(x: float, spec: FourierSpec) -> PureState:
    """Embed ``x`` as the equal-weight phase state over ``spec.frequencies``."""
    phases = np.exp(1j * np.asarray(spec.frequencies) * float(x)) / math.sqrt(spec.size)
    if spec.basis is not None:
        phases = spec.basis @ phases
    return PureState(phases)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix.

    The R diagonal phases are divided out, which makes the distribution
    exactly Haar (hence a 2-design).
    """
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def separable_pair_state(u_a: np.ndarray, u_b: np.ndarray) -> PureState:
    """``U_A|0> (x) U_B|0>`` on the (A, B) pair."""
    return PureState(np.kron(u_a[:, 0], u_b[:, 0]))


def entangled_pair_state(u_a: np.ndarray, u_b: np.ndarray) -> PureState:
    """``(U_A (x) U_B) |Phi>`` with ``|Phi>`` maximally entangled on (A, B)."""
    d = u_a.shape[0]
    phi = np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)
    return PureState(np.kron(u_a, u_b) @ phi)


def _two_copies(psi: PureState, cap: int) -> DensityMatrix:
    dim = psi.dim**2
    if dim > cap:
        raise CapacityError(f"two-copy dimension {dim} exceeds cap {cap}")
    v = np.kron(psi.amplitudes, psi.amplitudes)
    return DensityMatrix(np.outer(v, v.conj()))


def entanglement_dataset(
    d: int,
    n_per_class: int,
    rng_seed: int,
    copies_per_item: int = 1,
    cap: int = DEFAULT_DIM_CAP,
) -> LabeledEnsemble:
    """Two-copy separable (y=+1) vs maximally entangled (y=-1) states.

    Each item draws fresh Haar-random local unitaries; two copies of the pair
    state live on subsystems ordered (A, B, A', B') with dimension ``d**4``.
    """
    if d < 2:
        raise ConfigError("local dimension must be at least 2")
    if d**4 > cap:
        raise CapacityError(f"two-copy dimension {d ** 4} exceeds cap {cap}")
    items = []
    for i in range(n_per_class):
        gen = stream(rng_seed, 0, i)
        u_a, u_b = haar_unitary(d, gen), haar_unitary(d, gen)
        items.append((np.array([float(i)]), +1, _two_copies(separable_pair_state(u_a, u_b), cap)))
    for i in range(n_per_class):
        gen = stream(rng_seed, 1, i)
        u_a, u_b = haar_unitary(d, gen), haar_unitary(d, gen)
        items.append((np.array([float(i)]), -1, _two_copies(entangled_pair_state(u_a, u_b), cap)))
    return LabeledEnsemble.build(items, copies_per_item)


def swap_operator(d: int) -> np.ndarray:
    """The SWAP operator on two ``d``-dimensional subsystems."""
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def swap_projection(state: DensityMatrix, d: int) -> DensityMatrix:
    """Project a two-copy (A, B, A', B') state to symmetric/antisymmetric
    outcome probabilities of the A-pair, returned as a diagonal qubit state.

    The projection averages out all local details, so on the entanglement
    dataset it maps every separable item to ``diag(1, 0)`` and every
    entangled item to ``diag((1 + 1/d)/2, (1 - 1/d)/2)`` regardless of the
    random unitaries.
    """
    if state.dim != d**4:
        raise ShapeError(f"state dim {state.dim} is not {d}^4 = {d ** 4}")
    rho_aa = partial_trace(state, [d, d, d, d], keep=[0, 2])
    p_sym = float(
        np.real(np.trace((np.eye(d * d) + swap_operator(d)) / 2 @ rho_aa.entries))
    )
    p_sym = min(max(p_sym, 0.0), 1.0)
    return DensityMatrix(np.diag([p_sym, 1.0 - p_sym]).astype(complex))


def local_map(
    state: DensityMatrix,
    k: int,
    variant: str = "averaged",
    cap: int = DEFAULT_DIM_CAP,
) -> DensityMatrix:
    """Locality projection over all k-qubit subsets of an n-qubit state.

    ``averaged`` returns the mean of the reduced states on a ``2**k`` space;
    ``direct_sum`` returns their block-diagonal concatenation, each block
    weighted by ``1/C(n, k)``.
    """
    n = int(round(math.log2(state.dim)))
    if 2**n != state.dim:
        raise ShapeError(f"state dim {state.dim} is not a power of two")
    if not 1 <= k <= n:
        raise ConfigError(f"locality k={k} must lie in [1, {n}]")
    subsets = list(combinations(range(n), k))
    n_k = len(subsets)
    reduced = [partial_trace(state, [2] * n, keep=s).entries for s in subsets]
    if variant == "averaged":
        return DensityMatrix(sum(reduced) / n_k)
    if variant == "direct_sum":
        out_dim = n_k * 2**k
        if out_dim > cap:
            raise CapacityError(f"direct-sum dimension {out_dim} exceeds cap {cap}")
        out = np.zeros((out_dim, out_dim), dtype=complex)
        for i, block in enumerate(reduced):
            lo = i * 2**k
            out[lo : lo + 2**k, lo : lo + 2**k] = block / n_k
        return DensityMatrix(out)
    raise ConfigError(f"unknown local_map variant {variant!r}")


def perturbed_copies(
    state_builder: Callable[[float], DensityMatrix],
    x: float,
    s: int,
    noise_strength: float,
    rng: np.random.Generator,
) -> list[DensityMatrix]:
    """Imperfect copies: each copy is depolarized with a random strength.

    The strength of copy ``i`` is drawn uniformly from the widest interval
    inside ``[0, 1]`` centered at ``p``, i.e. ``[max(0, 2p-1), min(1, 2p)]``,
    so the mean over the environment is exactly ``(1-p) rho(x) + p I/d``.
    The endpoints are deterministic: ``p=0`` gives exact copies and ``p=1``
    gives maximally mixed ones.
    """
    p = float(noise_strength)
    if not 0.0 <= p <= 1.0:
        raise ConfigError("noise strength must lie in [0, 1]")
    rho = state_builder(x)
    eye = np.eye(rho.dim) / rho.dim
    lo, hi = max(0.0, 2 * p - 1.0), min(1.0, 2 * p)
    out = []
    for _ in range(int(s)):
        e = float(rng.uniform(lo, hi)) if hi > lo else lo
        out.append(DensityMatrix((1.0 - e) * rho.entries + e * eye))
    return out


def save_ensemble(ensemble: LabeledEnsemble, path: str | Path, meta: dict | None = None) -> None:
    """Write metadata JSON, an items CSV and one state file per item."""
    root = Path(path)
    (root / "states").mkdir(parents=True, exist_ok=True)
    doc = {
        "dim": ensemble.dim,
        "n_items": ensemble.n_items,
        "total_copies": int(sum(ensemble.copy_budget)),
    }
    doc.update(meta or {})
    (root / "meta.json").write_text(json.dumps(doc, indent=2))
    with open(root / "items.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", "copy_budget", "x"])
        for i in range(ensemble.n_items):
            x = " ".join(repr(float(v)) for v in ensemble.xs[i])
            writer.writerow([i, ensemble.labels[i], ensemble.copy_budget[i], x])
    for i, state in enumerate(ensemble.states):
        (root / "states" / f"item_{i:05d}.json").write_text(density_to_json(state))


def load_ensemble(path: str | Path) -> LabeledEnsemble:
    """Load an ensemble written by :func:`save_ensemble`, validating states."""
    root = Path(path)
    if not (root / "items.csv").exists():
        raise ConfigError(f"no ensemble at {root}")
    rows = []
    with open(root / "items.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    items, budget = [], []
    for row in rows:
        i = int(row["index"])
        state = density_from_json((root / "states" / f"item_{i:05d}.json").read_text())
        x = np.array([float(v) for v in row["x"].split()]) if row["x"] else np.zeros(1)
        items.append((x, int(row["label"]), state))
        budget.append(int(row["copy_budget"]))
    return LabeledEnsemble.build(items, budget)
