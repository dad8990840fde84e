"""Classification rules: optimal binary measurements, dictionary rules for
fixed POVMs, regularized decision observables, kernel machines, and the
average-case joint discriminator.

Sign decisions map a zero argument to +1 everywhere (Bayes rules, kernel
prediction, majority votes), so ties never depend on float noise direction.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import LabeledEnsemble
from .errors import (
    CapacityError,
    ConfigError,
    DataError,
    DegenerateStates,
)
from .qcore import (
    DEFAULT_DIM_CAP,
    BinaryPovm,
    DensityMatrix,
    Observable,
    eig_hermitian,
    matrix_sign,
    trace_norm,
)

__all__ = [
    "DictionaryRule",
    "KernelModel",
    "helstrom",
    "helstrom_of_difference",
    "empirical_helstrom",
    "bayes_rule_for_fixed_povm",
    "dictionary_rule_loss",
    "representer_observable",
    "kernel_train",
    "kernel_predict",
    "bayesian_joint_discriminator",
]


@dataclass(frozen=True)
class DictionaryRule:
    """A total map from measurement outcomes to labels in {+1, -1}."""

    mapping: tuple

    def __post_init__(self):
        labels = tuple(int(v) for v in self.mapping)
        if any(v not in (-1, 1) for v in labels):
            raise DataError("dictionary values must be +1 or -1")
        object.__setattr__(self, "mapping", labels)

    def __call__(self, outcome: int) -> int:
        return self.mapping[outcome]

    @property
    def n_outcomes(self) -> int:
        return len(self.mapping)


def helstrom_of_difference(weighted_difference: np.ndarray) -> BinaryPovm:
    """Binary POVM ``(I +/- sign(D))/2`` from a Hermitian difference operator.

    Near-kernel directions of the difference are split equally between the
    two effects, which keeps the pair a valid POVM in degenerate cases.
    """
    s = matrix_sign(weighted_difference).entries
    eye = np.eye(s.shape[0])
    return BinaryPovm((eye + s) / 2.0, (eye - s) / 2.0)


def helstrom(rho_plus: DensityMatrix, rho_minus: DensityMatrix) -> tuple[BinaryPovm, float]:
    """Minimum-error measurement for two equiprobable states.

    Returns the optimal POVM together with its single-shot error
    ``1/2 - |rho_plus - rho_minus|_1 / 4``.
    """
    if rho_plus.dim != rho_minus.dim:
        raise DataError("states must share a dimension")
    diff = rho_plus.entries - rho_minus.entries
    min_loss = 0.5 - 0.25 * trace_norm(diff)
    return helstrom_of_difference(diff), float(min(max(min_loss, 0.0), 0.5))


def empirical_helstrom(ensemble: LabeledEnsemble) -> tuple[BinaryPovm, float]:
    """Optimal measurement for the class means of a labeled ensemble.

    Class imbalance is handled by weighting each class mean with its sample
    fraction; the returned training loss is the exact 01 dataset loss of the
    measurement, which reduces to ``1/2 - |difference|_1 / 4`` for balanced
    classes.
    """
    if not ensemble.class_indices(+1) or not ensemble.class_indices(-1):
        raise ConfigError("empirical Helstrom requires both labels present")
    w_plus, w_minus = ensemble.class_weight(+1), ensemble.class_weight(-1)
    mean_plus, mean_minus = ensemble.class_mean(+1), ensemble.class_mean(-1)
    weighted = w_plus * mean_plus.entries - w_minus * mean_minus.entries
    povm = helstrom_of_difference(weighted)
    loss = 1.0 - (
        w_plus * float(np.real(np.trace(povm.effect_plus @ mean_plus.entries)))
        + w_minus * float(np.real(np.trace(povm.effect_minus @ mean_minus.entries)))
    )
    return povm, float(min(max(loss, 0.0), 1.0))


def bayes_rule_for_fixed_povm(
    p_plus: Sequence[float], p_minus: Sequence[float]
) -> DictionaryRule:
    """Optimal outcome-to-label map for two outcome distributions (ties to +1)."""
    pp, pm = np.asarray(p_plus, dtype=float), np.asarray(p_minus, dtype=float)
    if pp.shape != pm.shape:
        raise DataError("distributions must share an outcome set")
    return DictionaryRule(tuple(np.where(pp >= pm, 1, -1)))


def dictionary_rule_loss(
    rule: DictionaryRule, p_plus: Sequence[float], p_minus: Sequence[float]
) -> float:
    """Average 01 loss of a dictionary rule on equiprobable classes."""
    pp, pm = np.asarray(p_plus, dtype=float), np.asarray(p_minus, dtype=float)
    choose = np.asarray(rule.mapping)
    return float(0.5 * (pp[choose == -1].sum() + pm[choose == +1].sum()))


def representer_observable(
    rho_plus: DensityMatrix,
    rho_minus: DensityMatrix,
    singularity_tol: float = 1e-10,
) -> Observable:
    """Optimal 2-norm-penalized decision observable.

    The minimizer is a linear combination of the two states,
    ``[(P_- + F) rho_+ - (P_+ + F) rho_-] / (P_+ P_- - F^2)`` with purities
    ``P_+-`` and overlap ``F``; for pure states its expectations on the two
    states are exactly +/-1.
    """
    if rho_plus.dim != rho_minus.dim:
        raise DataError("states must share a dimension")
    p_plus = float(np.real(np.trace(rho_plus.entries @ rho_plus.entries)))
    p_minus = float(np.real(np.trace(rho_minus.entries @ rho_minus.entries)))
    f = float(np.real(np.trace(rho_plus.entries @ rho_minus.entries)))
    denom = p_plus * p_minus - f * f
    if denom <= singularity_tol:
        raise DegenerateStates(
            f"P+P- - F^2 = {denom:.3e} <= {singularity_tol:g}; states indistinguishable"
        )
    a = ((p_minus + f) * rho_plus.entries - (p_plus + f) * rho_minus.entries) / denom
    return Observable(a)


@dataclass(frozen=True)
class KernelModel:
    """Trained kernel classifier: coefficients over the training items."""

    alphas: np.ndarray
    mu: float
    loss: str
    gram_hash: str
    objective: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float).copy())
        self.alphas.setflags(write=False)

    @property
    def n_train(self) -> int:
        return len(self.alphas)

    def to_json(self) -> str:
        return json.dumps(
            {
                "alphas": [float(a) for a in self.alphas],
                "mu": self.mu,
                "loss": self.loss,
                "gram_hash": self.gram_hash,
                "objective": self.objective,
            }
        )

    @staticmethod
    def from_json(text: str) -> "KernelModel":
        doc = json.loads(text)
        return KernelModel(
            alphas=np.asarray(doc["alphas"], dtype=float),
            mu=float(doc["mu"]),
            loss=str(doc["loss"]),
            gram_hash=str(doc["gram_hash"]),
            objective=float(doc["objective"]),
        )


def _repair_gram(gram: np.ndarray) -> np.ndarray:
    g = np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DataError("Gram matrix must be square")
    if float(np.max(np.abs(g - g.T))) > 1e-8:
        raise DataError("Gram matrix is not symmetric within 1e-8")
    g = (g + g.T) / 2.0
    vals, vecs = np.linalg.eigh(g)
    if float(vals.min()) < -1e-8 * max(1.0, float(np.abs(vals).max())):
        raise DataError(f"Gram matrix eigenvalue {float(vals.min()):.3e} below repair threshold")
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


def kernel_objective(
    gram: np.ndarray, labels: np.ndarray, alphas: np.ndarray, mu: float, loss: str
) -> float:
    """Regularized empirical loss ``mean(L(y_n margin_n)) + mu a^T K a``."""
    margins = labels * (gram @ alphas)
    if loss == "hinge":
        data_term = np.maximum(0.0, 1.0 - margins).mean()
    elif loss == "logistic":
        data_term = np.logaddexp(0.0, -margins).mean()
    else:
        raise ConfigError(f"unknown loss {loss!r}")
    return float(data_term + mu * alphas @ gram @ alphas)


def kernel_train(
    gram: np.ndarray,
    labels: Sequence[int],
    mu: float,
    loss: str = "hinge",
    iters: int = 2000,
    step: float = 1.0,
) -> KernelModel:
    """Deterministic projected subgradient descent on the regularized loss.

    The Gram matrix is symmetrized and PSD-repaired by eigenvalue clipping
    (failures beyond 1e-8 raise).  Steps decay as ``step / sqrt(t)`` and the
    best iterate seen is returned, so recorded objectives are non-increasing.
    """
    if mu <= 0:
        raise ConfigError("regularizer mu must be positive")
    g = _repair_gram(gram)
    y = np.asarray(labels, dtype=float)
    if y.shape != (g.shape[0],):
        raise DataError("labels length must match the Gram dimension")
    n = len(y)
    alphas = np.zeros(n)
    best = alphas.copy()
    best_obj = kernel_objective(g, y, alphas, mu, loss)
    for t in range(1, int(iters) + 1):
        margins = y * (g @ alphas)
        if loss == "hinge":
            active = (margins < 1.0).astype(float)
            data_grad = -(g * (y * active)).mean(axis=1)
        else:
            weights = 0.5 * (1.0 - np.tanh(margins / 2.0))  # sigmoid(-margin), overflow-safe
            data_grad = -(g * (y * weights)).mean(axis=1)
        grad = data_grad + 2.0 * mu * (g @ alphas)
        alphas = alphas - (step / math.sqrt(t)) * grad
        obj = kernel_objective(g, y, alphas, mu, loss)
        if obj < best_obj:
            best_obj, best = obj, alphas.copy()
    digest = hashlib.sha256(np.ascontiguousarray(g).tobytes()).hexdigest()[:16]
    return KernelModel(alphas=best, mu=float(mu), loss=loss, gram_hash=digest, objective=best_obj)


def kernel_predict(model: KernelModel, kernel_row: Sequence[float]) -> int:
    """Label ``sign(sum_n alpha_n k(x_n, x))`` with zero mapped to +1."""
    row = np.asarray(kernel_row, dtype=float)
    if row.shape != (model.n_train,):
        raise DataError(f"kernel row must have length {model.n_train}")
    return +1 if float(model.alphas @ row) >= 0.0 else -1


def bayesian_joint_discriminator(
    prior_samples: Sequence[tuple[DensityMatrix, DensityMatrix]],
    s: int,
    v: int,
    cap: int = DEFAULT_DIM_CAP,
) -> tuple[BinaryPovm, float]:
    """Average-case discriminator on the joint training-plus-test space.

    Builds the two prior-averaged joint states (training block
    ``rho_+^(x)s (x) rho_-^(x)s`` followed by ``v`` test copies of either
    state), then returns their optimal measurement and its average error.
    """
    if s < 0 or v < 1:
        raise ConfigError("need s >= 0 training copies and v >= 1 test copies")
    if not prior_samples:
        raise ConfigError("prior sample set is empty")
    d = prior_samples[0][0].dim
    joint_dim = d ** (2 * s + v)
    if joint_dim > cap:
        raise CapacityError(f"joint dimension {joint_dim} exceeds cap {cap}")
    sigma_plus = np.zeros((joint_dim, joint_dim), dtype=complex)
    sigma_minus = np.zeros((joint_dim, joint_dim), dtype=complex)
    for rho_p, rho_m in prior_samples:
        if rho_p.dim != d or rho_m.dim != d:
            raise DataError("all prior samples must share a dimension")
        train = np.array([[1.0]], dtype=complex)
        for _ in range(s):
            train = np.kron(train, rho_p.entries)
        for _ in range(s):
            train = np.kron(train, rho_m.entries)
        test_p = np.array([[1.0]], dtype=complex)
        test_m = np.array([[1.0]], dtype=complex)
        for _ in range(v):
            test_p = np.kron(test_p, rho_p.entries)
            test_m = np.kron(test_m, rho_m.entries)
        sigma_plus += np.kron(train, test_p)
        sigma_minus += np.kron(train, test_m)
    sigma_plus /= len(prior_samples)
    sigma_minus /= len(prior_samples)
    diff = sigma_plus - sigma_minus
    povm = helstrom_of_difference(diff)
    avg_error = 0.5 - 0.25 * trace_norm(diff)
    return povm, float(min(max(avg_error, 0.0), 0.5))
