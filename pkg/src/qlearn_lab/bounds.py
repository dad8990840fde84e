"""Closed-form statistical-complexity quantities.

Every bound is a pure function of concrete data (an ensemble, a histogram, a
frequency set, resource counts), evaluated for comparison against measured
errors.  All logarithms are base 2.

Scaling laws without a known constant (tomography knowledge gap, SE+PE
failure) are reported as the bare scaling expression; harness code that fits
a constant must label the fit as such.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .embeddings import FourierSpec, LabeledEnsemble
from .errors import ConfigError, DataError
from .qcore import DensityMatrix, trace_distance

__all__ = [
    "min_loss_and_minentropy",
    "rademacher_B",
    "generalization_bound",
    "renyi_mutual_info",
    "kernel_spectrum_entropy",
    "majority_bound_factor",
    "majority_error_exact",
    "fixed_measurement_bounds",
    "fourier_bound",
    "strategy_gap_bounds",
    "BoundsReport",
]


def min_loss_and_minentropy(
    rho_plus_avg: DensityMatrix, rho_minus_avg: DensityMatrix
) -> tuple[float, float]:
    """Minimum single-shot error of equiprobable classes and the matching
    conditional min-entropy ``-log2(1 - loss)``."""
    if rho_plus_avg.dim != rho_minus_avg.dim:
        raise DataError("states must share a dimension")
    loss = 0.5 - 0.5 * trace_distance(rho_plus_avg, rho_minus_avg)
    loss = min(max(loss, 0.0), 0.5)
    return float(loss), float(-math.log2(1.0 - loss))


def _mean_square_root_trace(ensemble: LabeledEnsemble) -> float:
    mean_sq = sum(s.entries @ s.entries for s in ensemble.states) / ensemble.n_items
    vals = np.linalg.eigvalsh((mean_sq + mean_sq.conj().T) / 2.0)
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum())


def rademacher_B(ensemble: LabeledEnsemble) -> float:
    """Model-capacity factor ``(Tr sqrt(mean_n rho(x_n)^2))^2``, in [1, d].

    The uniform-deviation bound on the generalization error of unconstrained
    binary measurements scales as ``sqrt(B / N)``.
    """
    b = _mean_square_root_trace(ensemble) ** 2
    return float(b)


def generalization_bound(ensemble: LabeledEnsemble) -> float:
    """The ``sqrt(B / N)`` uniform-deviation scale for the given ensemble."""
    return math.sqrt(rademacher_B(ensemble) / ensemble.n_items)


def renyi_mutual_info(ensemble: LabeledEnsemble) -> float:
    """Order-1/2 mutual information between input index and state,
    ``2 log2 Tr sqrt(mean_n rho(x_n)^2)`` (equals ``log2 B``).

    Computed through the spectrum route so that the identity with
    :func:`rademacher_B` is a genuine two-path check.
    """
    return float(2.0 * math.log2(_mean_square_root_trace(ensemble)))


def kernel_spectrum_entropy(gram: np.ndarray) -> float:
    """Order-1/2 entropy of the spectrum of ``K / N`` for a PSD Gram matrix.

    For an ensemble of pure states with amplitude Gram
    ``K_nm = <psi(x_n)|psi(x_m)>`` this equals the mutual information of the
    ensemble exactly.
    """
    k = np.asarray(gram, dtype=complex)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DataError("Gram matrix must be square")
    if float(np.max(np.abs(k - k.conj().T))) > 1e-8:
        raise DataError("Gram matrix is not Hermitian within 1e-8")
    n = k.shape[0]
    vals = np.linalg.eigvalsh((k + k.conj().T) / 2.0) / n
    if float(vals.min()) < -1e-8:
        raise DataError(f"Gram matrix eigenvalue {float(vals.min()):.3e} below -1e-8")
    vals = np.clip(vals, 0.0, None)
    return float(2.0 * math.log2(np.sqrt(vals).sum()))


def majority_bound_factor(v: int) -> float:
    """Growth factor ``sqrt(v + 1)`` of the generalization bound under
    v-copy majority testing."""
    if v < 1 or v % 2 == 0:
        raise ConfigError("majority voting requires an odd v")
    return math.sqrt(v + 1.0)


def majority_error_exact(p: float, v: int) -> float:
    """Exact majority-vote error: the binomial tail ``P(at most (v-1)/2
    successes)`` at single-shot success probability ``p``."""
    if v < 1 or v % 2 == 0:
        raise ConfigError("majority voting requires an odd v")
    if not 0.0 <= p <= 1.0:
        raise ConfigError("p must lie in [0, 1]")
    half = (v - 1) // 2
    return float(
        sum(math.comb(v, i) * p**i * (1.0 - p) ** (v - i) for i in range(half + 1))
    )


def fixed_measurement_bounds(counts: Sequence[int], s: int) -> tuple[float, float]:
    """Dictionary-rule complexity bounds from an outcome histogram.

    ``empirical`` is ``sum_k sqrt(N_k) / (2N)`` with ``N = 2s`` total shots;
    ``entropy_form`` is ``sqrt(2**H_half(p) / (8s))`` with ``p_k = N_k / N``.
    The two agree for uniform histograms.
    """
    ns = np.asarray(counts, dtype=float)
    if (ns < 0).any():
        raise DataError("histogram counts must be nonnegative")
    n_total = 2 * int(s)
    if int(ns.sum()) != n_total:
        raise DataError(f"histogram total {int(ns.sum())} must equal 2s = {n_total}")
    empirical = float(np.sqrt(ns).sum() / (2.0 * n_total))
    p = ns / n_total
    h_half = 2.0 * math.log2(np.sqrt(p[p > 0]).sum())
    entropy_form = math.sqrt(2.0**h_half / (8.0 * s))
    return empirical, float(entropy_form)


def fourier_bound(inputs: Sequence[float], spec: FourierSpec) -> tuple[float, float]:
    """Spectral entropy of the frequency matrix of an input sample, with its
    dimension cap ``log2 |Omega|``.

    The matrix ``F_{w,w'} = mean_n exp(i x_n (w - w')) / |Omega|`` shares its
    spectrum with the mean embedded state, so its order-1/2 entropy bounds the
    ensemble mutual information.
    """
    xs = np.asarray(list(inputs), dtype=float)
    if xs.size == 0:
        raise ConfigError("need at least one input point")
    w = np.asarray(spec.frequencies)
    phase = np.exp(1j * np.outer(xs, w))  # rows: e^{i x_n w}
    f = (phase.conj().T @ phase) / (len(xs) * spec.size)
    vals = np.clip(np.linalg.eigvalsh((f + f.conj().T) / 2.0), 0.0, None)
    h_half = float(2.0 * math.log2(np.sqrt(vals).sum()))
    return h_half, float(math.log2(spec.size))


def strategy_gap_bounds(
    d: int,
    n: int,
    s: int,
    v: int,
    f_overlap: float,
    purities: tuple[float, float] = (1.0, 1.0),
    eps_tomo: float | None = None,
    lipschitz: float = 1.0,
) -> dict[str, dict]:
    """Per-strategy bound values for the gaps opened by finite resources.

    Each entry carries the numeric value and the formula it was plugged into.
    When the overlap makes the representer construction degenerate (F >= 1 or
    ``P+ P- - F^2`` vanishing), the affected entries carry an error marker
    while every other entry is still returned.
    """
    if v < 1:
        raise ConfigError("need at least one test copy")
    out: dict[str, dict] = {}
    if eps_tomo is not None:
        out["tomography"] = {"value": 2.0 * eps_tomo, "formula": "2*eps"}
    out["tomography_scaling"] = {"value": d / math.sqrt(max(1, n * s)), "formula": "d/sqrt(N*S)"}
    out["se_pe_scaling"] = {
        "value": (max(1, n * s)) ** (-1.0 / 3.0),
        "formula": "(N*S)**(-1/3)",
    }
    out["fidelity_decay"] = {
        "value": 0.5 * f_overlap ** (v / 2.0),
        "formula": "F**(V/2)/2",
    }
    p_plus, p_minus = purities
    degenerate = f_overlap >= 1.0 or p_plus * p_minus - f_overlap**2 <= 1e-10
    if degenerate:
        out["representer"] = {"error": "DegenerateStates", "formula": "undefined for F >= 1"}
        out["observable_shots"] = {"error": "DegenerateStates", "formula": "undefined for F >= 1"}
    else:
        s_prime = max(1, s)
        out["representer"] = {
            "value": 2.0
            * lipschitz
            * math.sqrt((1.0 + f_overlap) / ((1.0 - f_overlap) * s_prime)),
            "formula": "2*lambda*sqrt((1+F)/((1-F)*S'))",
        }
        # Tail bound for the sign of a shot-averaged pure-state fidelity
        # classifier: expectation 1, spectral norm 1/sqrt(1-F).
        out["observable_shots"] = {
            "value": math.exp(-v * (1.0 - f_overlap) / 2.0),
            "formula": "exp(-V*<A>^2/(2*|A|_inf^2))",
        }
    b_worst = float(d)  # capacity factor is at most the dimension
    if n > b_worst:
        out["copy_crossover"] = {
            "value": math.log2(n / b_worst) * math.sqrt(n / b_worst**3),
            "formula": "log2(N/B)*sqrt(N/B^3), B=d",
        }
    return out


@dataclass(frozen=True)
class BoundsReport:
    """Bundle of the closed-form quantities for one ensemble."""

    min_loss: float
    h_min: float
    renyi_mutual_info: float
    rademacher_B: float
    majority_factor: float
    fixed_meas_bound: float | None = None
    fourier_bound: float | None = None
    gap_bounds: Mapping[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.min_loss <= 0.5 + 1e-12:
            raise DataError(f"min_loss {self.min_loss} outside [0, 1/2]")
        if abs(2.0**self.renyi_mutual_info - self.rademacher_B) > 1e-9 * max(
            1.0, self.rademacher_B
        ):
            raise DataError("2**renyi_mutual_info must equal rademacher_B")

    @staticmethod
    def from_ensemble(
        ensemble: LabeledEnsemble,
        v: int = 1,
        fixed_counts: Sequence[int] | None = None,
        fourier: tuple[Sequence[float], FourierSpec] | None = None,
        gap_bounds: Mapping[str, dict] | None = None,
    ) -> "BoundsReport":
        loss, h_min = min_loss_and_minentropy(
            ensemble.class_mean(+1), ensemble.class_mean(-1)
        )
        fixed = None
        if fixed_counts is not None:
            fixed = fixed_measurement_bounds(fixed_counts, int(sum(fixed_counts)) // 2)[1]
        four = None
        if fourier is not None:
            four = fourier_bound(fourier[0], fourier[1])[0]
        return BoundsReport(
            min_loss=loss,
            h_min=h_min,
            renyi_mutual_info=renyi_mutual_info(ensemble),
            rademacher_B=rademacher_B(ensemble),
            majority_factor=majority_bound_factor(v if v % 2 == 1 else v + 1),
            fixed_meas_bound=fixed,
            fourier_bound=four,
            gap_bounds=dict(gap_bounds or {}),
        )

    def to_json(self) -> str:
        doc = {
            "min_loss": {"value": self.min_loss, "formula": "1/2 - |d+ - d-|_1/4"},
            "h_min": {"value": self.h_min, "formula": "-log2(1 - min_loss)"},
            "renyi_mutual_info": {
                "value": self.renyi_mutual_info,
                "formula": "2*log2 Tr sqrt(mean rho^2)",
            },
            "rademacher_B": {
                "value": self.rademacher_B,
                "formula": "(Tr sqrt(mean rho^2))^2",
            },
            "majority_factor": {"value": self.majority_factor, "formula": "sqrt(V+1)"},
        }
        if self.fixed_meas_bound is not None:
            doc["fixed_meas_bound"] = {
                "value": self.fixed_meas_bound,
                "formula": "sqrt(2**H_half(p)/(8s))",
            }
        if self.fourier_bound is not None:
            doc["fourier_bound"] = {
                "value": self.fourier_bound,
                "formula": "H_half(spectrum(F))",
            }
        if self.gap_bounds:
            doc["gap_bounds"] = dict(self.gap_bounds)
        return json.dumps(doc, indent=2)
