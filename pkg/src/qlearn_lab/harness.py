"""Config-driven experiment runner.

A scenario bundles a data-generation mechanism the simulator knows exactly
(finite support population, true class means, a sampler) with a learning
strategy that only sees ledger-limited measurement data.  Every loss in the
reported error decomposition is computed analytically from the generator's
omniscient vantage; Monte Carlo randomness lives only inside the strategies.

Trials are independent work items; each derives its randomness from
``(seed, trial)`` so output is byte-identical regardless of worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from . import bounds as bounds_mod
from .classifiers import (
    bayes_rule_for_fixed_povm,
    empirical_helstrom,
    helstrom,
    helstrom_of_difference,
    representer_observable,
)
from .embeddings import (
    FourierSpec,
    LabeledEnsemble,
    entanglement_dataset,
    fourier_embed,
    load_ensemble,
    swap_operator,
    swap_projection,
)
from .errors import CapacityError, ConfigError, InternalError
from .qcore import (
    DEFAULT_DIM_CAP,
    BinaryPovm,
    DensityMatrix,
    Observable,
    computational_povm,
    eig_hermitian,
)
from .rng import stream
from .sampling import CopyLedger, born_sample, swap_test_estimate
from .transductive import PhaseEstimationConfig, pe_first_bit_probability

__all__ = [
    "ExperimentConfig",
    "ErrorZooReport",
    "Population",
    "Scenario",
    "error_zoo",
    "make_scenario",
    "run_scenario",
    "sweep",
    "CSV_COLUMNS",
]

ZOO_ATOL = 1e-9


@dataclass(frozen=True)
class ErrorZooReport:
    """The error decomposition of one trial.

    ``generalization`` refers to the rule learned from the abstract data set;
    the identity ``test_loss = dataset_loss + generalization(finite rule) +
    knowledge_gap`` is checked on construction, with the finite rule's
    generalization derived from the stored fields.
    """

    min_loss: float
    dataset_loss: float
    generalization: float
    knowledge_gap: float
    excess_testing: float
    test_loss: float
    test_loss_dataset_rule: float
    dataset_loss_finite_rule: float

    def residual(self) -> float:
        gen_finite = self.test_loss - self.dataset_loss_finite_rule
        return abs(self.test_loss - (self.dataset_loss + gen_finite + self.knowledge_gap))

    def as_row(self) -> dict:
        return {
            "min_loss": self.min_loss,
            "dataset_loss": self.dataset_loss,
            "gen_err": self.generalization,
            "knowledge_gap": self.knowledge_gap,
            "excess_test": self.excess_testing,
            "test_loss": self.test_loss,
        }


def error_zoo(
    min_loss: float,
    dataset_loss_fs: float,
    test_loss_fs: float,
    dataset_loss_fss: float,
    test_loss_fss: float,
    check_minimality: bool = True,
) -> ErrorZooReport:
    """Assemble the decomposition from the five exact losses.

    Raises :class:`~.errors.InternalError` when the inputs violate the
    defining order relations beyond tolerance (the optimal rule must be
    optimal, the abstract-data rule must minimize the dataset loss).
    """
    if check_minimality:
        if min_loss > test_loss_fs + ZOO_ATOL or min_loss > test_loss_fss + ZOO_ATOL:
            raise InternalError(
                f"min_loss {min_loss} exceeds a rule's test loss; inconsistent inputs"
            )
        if dataset_loss_fs > dataset_loss_fss + ZOO_ATOL:
            raise InternalError(
                "abstract-data rule does not minimize the dataset loss; inconsistent inputs"
            )
    report = ErrorZooReport(
        min_loss=min_loss,
        dataset_loss=dataset_loss_fs,
        generalization=test_loss_fs - dataset_loss_fs,
        knowledge_gap=dataset_loss_fss - dataset_loss_fs,
        excess_testing=test_loss_fss - test_loss_fs,
        test_loss=test_loss_fss,
        test_loss_dataset_rule=test_loss_fs,
        dataset_loss_finite_rule=dataset_loss_fss,
    )
    if report.residual() > ZOO_ATOL:
        raise InternalError(f"decomposition residual {report.residual():.3e} > {ZOO_ATOL:g}")
    return report


@dataclass(frozen=True)
class Population:
    """Finite-support description of the true data distribution."""

    weights: tuple
    xs: tuple
    labels: tuple
    states: tuple

    def __post_init__(self):
        total = float(sum(self.weights))
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"population weights sum to {total}, expected 1")

    def class_mean(self, label: int) -> DensityMatrix:
        w = sum(wt for wt, y in zip(self.weights, self.labels) if y == label)
        acc = sum(
            wt * s.entries
            for wt, y, s in zip(self.weights, self.labels, self.states)
            if y == label
        )
        return DensityMatrix(acc / w)

    def label_weight(self, label: int) -> float:
        return float(sum(wt for wt, y in zip(self.weights, self.labels) if y == label))


@dataclass(frozen=True)
class Scenario:
    """A data-generation mechanism the harness knows exactly."""

    name: str
    dim: int
    population: Population | None
    mean_plus: DensityMatrix
    mean_minus: DensityMatrix
    sampler: Callable[[int, int, int], LabeledEnsemble]  # (seed, n, s) -> ensemble

    def sample(self, seed: int, n_items: int, s_copies: int) -> LabeledEnsemble:
        return self.sampler(seed, n_items, s_copies)


# ---------------------------------------------------------------------------
# scenario builders


def _two_state_scenario(name: str, params: dict) -> Scenario:
    d = int(params.get("dim", 2))
    kind = params.get("states", "pure")
    seed0 = int(params.get("state_seed", 7))
    gen = stream(seed0, 99)
    if kind == "pure":
        from .embeddings import haar_unitary

        u = haar_unitary(d, gen)
        v = haar_unitary(d, gen)
        rho_p = DensityMatrix(np.outer(u[:, 0], u[:, 0].conj()))
        rho_m = DensityMatrix(np.outer(v[:, 0], v[:, 0].conj()))
    elif kind == "overlapping":
        # a mixed pair separated by a small traceless direction
        sep = float(params.get("separation", 0.05))
        base = np.eye(d, dtype=complex) / d
        g = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
        g = (g + g.conj().T) / 2.0
        g -= np.trace(g) / d * np.eye(d)
        g /= np.abs(np.linalg.eigvalsh(g)).max() * d
        rho_p = DensityMatrix.from_matrix(base + sep * g, repair=True)
        rho_m = DensityMatrix.from_matrix(base - sep * g, repair=True)
    elif kind == "mixed":
        def rand_mixed() -> DensityMatrix:
            a = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
            m = a @ a.conj().T
            return DensityMatrix(m / np.trace(m))

        rho_p, rho_m = rand_mixed(), rand_mixed()
    else:
        raise ConfigError(f"unknown two-state kind {kind!r}")

    population = Population(
        weights=(0.5, 0.5),
        xs=(0.0, 1.0),
        labels=(+1, -1),
        states=(rho_p, rho_m),
    )

    def sampler(seed: int, n: int, s: int) -> LabeledEnsemble:
        if n % 2:
            raise ConfigError("two-state scenarios need an even item count")
        items = [
            (np.array([0.0]), +1, rho_p) if i % 2 == 0 else (np.array([1.0]), -1, rho_m)
            for i in range(n)
        ]
        return LabeledEnsemble.build(items, s)

    return Scenario(name, d, population, rho_p, rho_m, sampler)


def _fourier_scenario(name: str, params: dict) -> Scenario:
    n_freq = int(params.get("omega_count", 4))
    grid_size = int(params.get("grid_size", 64))
    flip = float(params.get("label_flip", 0.0))
    spec = FourierSpec(frequencies=tuple(range(n_freq)))
    xs = [2.0 * math.pi * g / grid_size for g in range(grid_size)]
    states = [fourier_embed(x, spec).to_density() for x in xs]
    rule = [+1 if g < grid_size // 2 else -1 for g in range(grid_size)]

    weights, pxs, labels, pstates = [], [], [], []
    for x, s, y0 in zip(xs, states, rule):
        for y in (+1, -1):
            w = (1.0 - flip if y == y0 else flip) / grid_size
            if w > 0:
                weights.append(w)
                pxs.append(x)
                labels.append(y)
                pstates.append(s)
    population = Population(tuple(weights), tuple(pxs), tuple(labels), tuple(pstates))

    def sampler(seed: int, n: int, s: int) -> LabeledEnsemble:
        gen = stream(seed, 7)
        items = []
        for _ in range(n):
            g = int(gen.integers(grid_size))
            y = rule[g]
            if flip > 0 and gen.random() < flip:
                y = -y
            items.append((np.array([xs[g]]), y, states[g]))
        return LabeledEnsemble.build(items, s)

    return Scenario(name, n_freq, population, population.class_mean(+1), population.class_mean(-1), sampler)


def haar_average_two_copy_means(d: int) -> tuple[DensityMatrix, DensityMatrix]:
    """Exact class means of the entanglement toy problem on (A, B, A', B').

    Averaging the two-copy states over Haar local unitaries projects onto the
    symmetric/antisymmetric subspaces of the (A, A') and (B, B') pairs.
    """
    sym = (np.eye(d * d) + swap_operator(d)) / 2.0
    anti = (np.eye(d * d) - swap_operator(d)) / 2.0
    d_s, d_a = d * (d + 1) / 2.0, d * (d - 1) / 2.0

    def reorder(m: np.ndarray) -> np.ndarray:
        # (A, A', B, B') -> (A, B, A', B')
        t = m.reshape([d] * 8)
        t = np.transpose(t, (0, 2, 1, 3, 4, 6, 5, 7))
        return t.reshape(d**4, d**4)

    mean_sep = reorder(np.kron(sym / d_s, sym / d_s))
    w_s, w_a = (1.0 + 1.0 / d) / 2.0, (1.0 - 1.0 / d) / 2.0
    mean_ent = reorder(
        w_s * np.kron(sym, sym) / d_s**2 + w_a * np.kron(anti, anti) / d_a**2
    )
    return DensityMatrix(mean_sep), DensityMatrix(mean_ent)


def _entanglement_scenario(name: str, params: dict, projected: bool) -> Scenario:
    d = int(params.get("dim", 2))
    mean_sep, mean_ent = haar_average_two_copy_means(d)
    if projected:
        mean_p = swap_projection(mean_sep, d)
        mean_m = swap_projection(mean_ent, d)
        population = Population((0.5, 0.5), (0.0, 1.0), (+1, -1), (mean_p, mean_m))
    else:
        mean_p, mean_m = mean_sep, mean_ent
        population = None  # continuous inputs: only linear (V=1) rules are exact

    def sampler(seed: int, n: int, s: int) -> LabeledEnsemble:
        if n % 2:
            raise ConfigError("entanglement scenarios need an even item count")
        ens = entanglement_dataset(d, n // 2, rng_seed=seed, copies_per_item=s)
        if projected:
            ens = ens.map_states(lambda st: swap_projection(st, d))
        return ens

    dim = 2 if projected else d**4
    return Scenario(name, dim, population, mean_p, mean_m, sampler)


def make_scenario(kind: str, params: dict | None = None) -> Scenario:
    params = dict(params or {})
    if kind == "two_state":
        return _two_state_scenario(kind, params)
    if kind == "fourier":
        return _fourier_scenario(kind, params)
    if kind == "entanglement_raw":
        return _entanglement_scenario(kind, params, projected=False)
    if kind == "entanglement_projected":
        return _entanglement_scenario(kind, params, projected=True)
    raise ConfigError(f"unknown scenario kind {kind!r}")


# ---------------------------------------------------------------------------
# exact losses of binary POVM rules


def _tensor_power(m: np.ndarray, v: int, cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for _ in range(v):
        if out.shape[0] * m.shape[0] > cap:
            raise CapacityError("tensor power exceeds the dimension cap")
        out = np.kron(out, m)
    return out


def _binomial_tail_error(p_correct: float, v: int) -> float:
    return bounds_mod.majority_error_exact(min(max(p_correct, 0.0), 1.0), v)


@dataclass(frozen=True)
class PovmRule:
    """A binary decision rule evaluated exactly under a test protocol.

    ``protocol`` is ``single`` (one copy), ``majority`` (v independent
    repetitions), or ``vcopy`` (the POVM itself acts on the v-copy space).
    """

    povm: BinaryPovm
    protocol: str = "single"
    v: int = 1

    def item_error(self, state: DensityMatrix, label: int) -> float:
        effect = self.povm.effect_plus if label == +1 else self.povm.effect_minus
        if self.protocol == "single":
            p = float(np.real(np.trace(effect @ state.entries)))
            return 1.0 - min(max(p, 0.0), 1.0)
        if self.protocol == "majority":
            p = float(np.real(np.trace(effect @ state.entries)))
            return _binomial_tail_error(p, self.v)
        if self.protocol == "vcopy":
            big = _tensor_power(state.entries, self.v)
            p = float(np.real(np.trace(effect @ big)))
            return 1.0 - min(max(p, 0.0), 1.0)
        raise ConfigError(f"unknown protocol {self.protocol!r}")


def rule_population_loss(rule: PovmRule, population: Population) -> float:
    return float(
        sum(
            w * rule.item_error(s, y)
            for w, y, s in zip(population.weights, population.labels, population.states)
        )
    )


def rule_mean_loss(rule: PovmRule, mean_plus: DensityMatrix, mean_minus: DensityMatrix) -> float:
    if rule.protocol != "single":
        raise ConfigError("mean-based losses are exact only for single-copy rules")
    return 0.5 * (rule.item_error(mean_plus, +1) + rule.item_error(mean_minus, -1))


def rule_dataset_loss(rule, ensemble: LabeledEnsemble) -> float:
    return float(
        np.mean([rule.item_error(s, y) for s, y in zip(ensemble.states, ensemble.labels)])
    )


def _sign_flip_probability(values: np.ndarray, probs: np.ndarray, v: int) -> float:
    """Exact probability that the mean of ``v`` i.i.d. draws from a finite
    outcome distribution is strictly negative (ties decide +1)."""
    dists = [(0.0, 1.0)]  # (partial sum of outcomes, probability)
    for _ in range(v):
        nxt: dict[float, float] = {}
        for total, p in dists:
            for val, q in zip(values, probs):
                key = round(total + val, 12)
                nxt[key] = nxt.get(key, 0.0) + p * q
        dists = list(nxt.items())
    return float(sum(p for total, p in dists if total < 0.0))


@dataclass(frozen=True)
class ObservableRule:
    """Sign-of-expectation rule with a v-shot empirical average.

    ``v`` shots of the observable's eigenbasis measurement are averaged and
    the sign taken (zero to +1); the per-item error is the exact probability
    of deciding the wrong label.  ``v=0`` means the exact expectation.
    """

    observable: Observable
    v: int = 0

    def item_error(self, state: DensityMatrix, label: int) -> float:
        vals, vecs = eig_hermitian(self.observable)
        probs = np.real(np.einsum("ij,ji->i", vecs.conj().T, state.entries @ vecs))
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
        if self.v == 0:
            expect = float(np.dot(vals, probs))
            decided = +1 if expect >= 0 else -1
            return 0.0 if decided == label else 1.0
        flip = _sign_flip_probability(np.asarray(vals), probs, self.v)
        # flip: probability the v-shot mean is <= 0, i.e. the rule outputs -1
        return flip if label == +1 else 1.0 - flip


# ---------------------------------------------------------------------------
# strategies


def _povm_for_protocol(
    diff_source_plus: DensityMatrix,
    diff_source_minus: DensityMatrix,
    protocol: str,
    v: int,
) -> BinaryPovm:
    """Helstrom POVM matched to the test protocol (v-copy rules discriminate
    the v-fold products of the class means)."""
    if protocol == "vcopy":
        big_p = _tensor_power(diff_source_plus.entries, v)
        big_m = _tensor_power(diff_source_minus.entries, v)
        return helstrom_of_difference(big_p - big_m)
    return helstrom_of_difference(diff_source_plus.entries - diff_source_minus.entries)


def _pooled_class_tomography(
    ensemble: LabeledEnsemble,
    label: int,
    rng: np.random.Generator,
    ledger: CopyLedger,
) -> DensityMatrix:
    """Tomography of a class mean from the pooled class copy budget.

    Sampling a fresh uniformly-drawn item per shot realizes Born sampling of
    the class-mean mixture, so the reconstruction target is the empirical
    class mean; the ledger is debited item by item.
    """
    from .sampling import tomography_reconstruct

    idx = ensemble.class_indices(label)
    copies = int(sum(ensemble.copy_budget[i] for i in idx))
    for i in idx:
        ledger.debit(i, ensemble.copy_budget[i])
    return tomography_reconstruct(copies, ensemble.class_mean(label), rng)


def _strategy_rules(
    cfg: "ExperimentConfig",
    scenario: Scenario,
    ensemble: LabeledEnsemble,
    rng: np.random.Generator,
) -> tuple[PovmRule, PovmRule, PovmRule, bool]:
    """Build (optimal, abstract-data, finite-copy) rules for the strategy.

    Returns the three rules plus a flag telling whether minimality checks are
    exact for this strategy.
    """
    protocol, v = cfg.test_rule, cfg.v_copies
    ledger = CopyLedger(ensemble.copy_budget)
    emp_plus, emp_minus = ensemble.class_mean(+1), ensemble.class_mean(-1)

    rule_star = PovmRule(
        _povm_for_protocol(scenario.mean_plus, scenario.mean_minus, protocol, v), protocol, v
    )
    rule_dataset = PovmRule(_povm_for_protocol(emp_plus, emp_minus, protocol, v), protocol, v)

    if cfg.known_states:
        return rule_star, rule_dataset, rule_dataset, True

    if cfg.strategy == "tomography":
        est_plus = _pooled_class_tomography(ensemble, +1, rng, ledger)
        est_minus = _pooled_class_tomography(ensemble, -1, rng, ledger)
        rule_finite = PovmRule(_povm_for_protocol(est_plus, est_minus, protocol, v), protocol, v)
        return rule_star, rule_dataset, rule_finite, True

    if cfg.strategy == "pe_helstrom":
        if protocol == "vcopy":
            raise ConfigError("pe_helstrom supports single or majority test rules")
        m_bits = int(cfg.strategy_params.get("m", 6))
        h = (emp_plus.entries - emp_minus.entries) / 2.0
        vals, vecs = eig_hermitian(h)
        # effective measurement enacted by exact-unitary phase estimation:
        # each eigenvector contributes its first-bit-zero probability
        qs = np.array([pe_first_bit_probability(phi % 1.0, m_bits) for phi in vals])
        effect_plus = (vecs * qs) @ vecs.conj().T
        povm = BinaryPovm(effect_plus, np.eye(h.shape[0]) - effect_plus)
        rule_finite = PovmRule(povm, protocol, v)
        return rule_star, rule_dataset, rule_finite, True

    if cfg.strategy in ("fixed_povm", "dictionary"):
        effects = _strategy_povm_effects(cfg, scenario)
        p_true = {
            y: np.array(
                [
                    float(np.real(np.trace(e @ (scenario.mean_plus if y > 0 else scenario.mean_minus).entries)))
                    for e in effects
                ]
            )
            for y in (+1, -1)
        }
        p_emp = {
            y: np.array(
                [float(np.real(np.trace(e @ (emp_plus if y > 0 else emp_minus).entries))) for e in effects]
            )
            for y in (+1, -1)
        }
        star_rule = bayes_rule_for_fixed_povm(p_true[+1], p_true[-1])
        data_rule = bayes_rule_for_fixed_povm(p_emp[+1], p_emp[-1])
        counts = {}
        for y in (+1, -1):
            idx = ensemble.class_indices(y)
            hist = np.zeros(len(effects))
            for i in idx:
                shots = ensemble.copy_budget[i]
                rec = born_sample(
                    ensemble.states[i], effects, shots, rng, ledger=ledger, item=i
                )
                hist += np.bincount(rec.outcomes, minlength=len(effects))
            counts[y] = hist / hist.sum()
        finite_rule = bayes_rule_for_fixed_povm(counts[+1], counts[-1])

        def induced(rule) -> BinaryPovm:
            plus = np.zeros_like(effects[0])
            minus = np.zeros_like(effects[0])
            for e, lab in zip(effects, rule.mapping):
                if lab == +1:
                    plus = plus + e
                else:
                    minus = minus + e
            return BinaryPovm(plus, minus)

        if protocol == "vcopy":
            raise ConfigError("fixed-measurement strategies support single or majority rules")
        return (
            PovmRule(induced(star_rule), protocol, v),
            PovmRule(induced(data_rule), protocol, v),
            PovmRule(induced(finite_rule), protocol, v),
            True,
        )

    if cfg.strategy == "representer":
        return _representer_rules(cfg, scenario, ensemble, rng, ledger)

    if cfg.strategy == "kernel":
        return _kernel_rules(cfg, scenario, ensemble, rng, ledger)

    raise ConfigError(f"unknown strategy {cfg.strategy!r}")


def _classwise_identical(ensemble: LabeledEnsemble, label: int) -> bool:
    idx = ensemble.class_indices(label)
    ref = ensemble.states[idx[0]].entries
    return all(float(np.max(np.abs(ensemble.states[i].entries - ref))) < 1e-12 for i in idx)


def _debit_class(ensemble: LabeledEnsemble, ledger: CopyLedger, label: int, copies: int) -> None:
    remaining = copies
    for i in ensemble.class_indices(label):
        take = min(remaining, int(ledger.remaining[i]))
        if take:
            ledger.debit(i, take)
            remaining -= take
        if remaining == 0:
            return
    if remaining:
        ledger.debit(ensemble.class_indices(label)[0], remaining)  # raises CopyExhausted


def _representer_rules(cfg, scenario, ensemble, rng, ledger):
    """Fidelity-classifier learning: purities and overlap from swap tests.

    Requires a two-state style scenario (all items of a class identical) so
    pooled swap tests target the class states exactly.  Estimates are
    projected onto the feasible region (purities in [1/d, 1], overlap below
    the Cauchy-Schwarz cap) before the observable is assembled.
    """
    v_shots = int(cfg.strategy_params.get("v_shots", max(1, cfg.v_copies)))
    if not (_classwise_identical(ensemble, +1) and _classwise_identical(ensemble, -1)):
        raise ConfigError("representer strategy requires identical states within each class")
    emp_plus, emp_minus = ensemble.class_mean(+1), ensemble.class_mean(-1)
    rule_star = ObservableRule(
        representer_observable(scenario.mean_plus, scenario.mean_minus), v_shots
    )
    rule_dataset = ObservableRule(representer_observable(emp_plus, emp_minus), v_shots)

    budget_p = sum(ensemble.copy_budget[i] for i in ensemble.class_indices(+1))
    budget_m = sum(ensemble.copy_budget[i] for i in ensemble.class_indices(-1))
    shots_pp, shots_mm = budget_p // 4, budget_m // 4
    shots_pm = min(budget_p - 2 * shots_pp, budget_m - 2 * shots_mm)
    if min(shots_pp, shots_mm, shots_pm) < 1:
        raise ConfigError("representer strategy needs at least 4 copies per class")
    _debit_class(ensemble, ledger, +1, 2 * shots_pp + shots_pm)
    _debit_class(ensemble, ledger, -1, 2 * shots_mm + shots_pm)
    p_hat_p, _ = swap_test_estimate(emp_plus, emp_plus, shots_pp, rng)
    p_hat_m, _ = swap_test_estimate(emp_minus, emp_minus, shots_mm, rng)
    f_hat, _ = swap_test_estimate(emp_plus, emp_minus, shots_pm, rng)
    d = ensemble.dim
    p_hat_p = min(max(p_hat_p, 1.0 / d), 1.0)
    p_hat_m = min(max(p_hat_m, 1.0 / d), 1.0)
    f_cap = math.sqrt(p_hat_p * p_hat_m) * (1.0 - 1e-6)
    f_hat = min(max(f_hat, 0.0), f_cap)
    denom = p_hat_p * p_hat_m - f_hat**2
    a_hat = (
        (p_hat_m + f_hat) * emp_plus.entries - (p_hat_p + f_hat) * emp_minus.entries
    ) / denom
    return rule_star, rule_dataset, ObservableRule(Observable(a_hat), v_shots), False


@dataclass(frozen=True)
class KernelRule:
    """Kernel sign rule with exact overlap kernels at prediction time."""

    alphas: np.ndarray
    train_states: tuple

    def item_error(self, state: DensityMatrix, label: int) -> float:
        row = np.array(
            [float(np.real(np.trace(t.entries @ state.entries))) for t in self.train_states]
        )
        decided = +1 if float(self.alphas @ row) >= 0.0 else -1
        return 0.0 if decided == label else 1.0


def _exact_gram(states: Sequence[DensityMatrix]) -> np.ndarray:
    n = len(states)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = float(np.real(np.trace(states[i].entries @ states[j].entries)))
    return g


def _psd_clip(g: np.ndarray) -> np.ndarray:
    sym = (g + g.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def _kernel_rules(cfg, scenario, ensemble, rng, ledger):
    """Kernel machine: exact kernels for the abstract rules, swap-test
    estimated Gram (projected onto the PSD cone) for the finite-copy rule."""
    from .classifiers import kernel_train

    if scenario.population is None:
        raise ConfigError("kernel strategy needs a finite-support population")
    mu = float(cfg.strategy_params.get("mu", 1e-3))
    iters = int(cfg.strategy_params.get("iters", 400))
    pop = scenario.population
    pop_states = list(pop.states)
    pop_labels = list(pop.labels)
    model_star = kernel_train(_exact_gram(pop_states), pop_labels, mu, iters=iters)
    rule_star = KernelRule(model_star.alphas, tuple(pop_states))

    states, labels = list(ensemble.states), list(ensemble.labels)
    n = len(states)
    gram = _exact_gram(states)
    model_dataset = kernel_train(gram, labels, mu, iters=iters)
    rule_dataset = KernelRule(model_dataset.alphas, tuple(states))

    shots = min(ensemble.copy_budget) // max(1, n - 1)
    if shots < 1:
        raise ConfigError("kernel strategy needs at least N-1 copies per item")
    est = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            ledger.debit(i, shots)
            ledger.debit(j, shots)
            est_ij, _ = swap_test_estimate(states[i], states[j], shots, rng)
            est[i, j] = est[j, i] = min(max(est_ij, 0.0), 1.0)
    model_finite = kernel_train(_psd_clip(est), labels, mu, iters=iters)
    rule_finite = KernelRule(model_finite.alphas, tuple(states))
    return rule_star, rule_dataset, rule_finite, False


def _strategy_povm_effects(cfg: "ExperimentConfig", scenario: Scenario) -> list[np.ndarray]:
    kind = cfg.strategy_params.get("povm", "computational")
    if kind == "computational":
        return computational_povm(scenario.dim)
    if kind == "helstrom_of_true":
        povm, _ = helstrom(scenario.mean_plus, scenario.mean_minus)
        return povm.effects()
    raise ConfigError(f"unknown POVM spec {kind!r}")


# ---------------------------------------------------------------------------
# experiment driver


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    dim: int = 2
    n_items: int = 8
    s_copies: int = 16
    v_copies: int = 1
    strategy: str = "tomography"
    test_rule: str = "single"  # single | majority | vcopy
    known_states: bool = False
    dataset: dict = field(default_factory=dict)
    dataset_path: str | None = None
    strategy_params: dict = field(default_factory=dict)
    seed: int = 0
    trials: int = 8
    output: str | None = None

    def __post_init__(self):
        if self.test_rule not in ("single", "majority", "vcopy"):
            raise ConfigError(f"unknown test rule {self.test_rule!r}")
        if self.test_rule in ("majority", "vcopy") and self.v_copies % 2 == 0:
            raise ConfigError("v_copies must be odd for repeated-copy test rules")
        if self.trials < 1:
            raise ConfigError("need at least one trial")

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return ExperimentConfig(**doc)


CSV_COLUMNS = [
    "scenario",
    "axis",
    "value",
    "trial",
    "seed",
    "min_loss",
    "dataset_loss",
    "gen_err",
    "knowledge_gap",
    "excess_test",
    "test_loss",
    "bound_gen",
    "bound_B",
    "bound_majority",
    "bound_tomo_scaling",
]


def _scenario_for(cfg: ExperimentConfig) -> Scenario:
    params = dict(cfg.dataset)
    params.setdefault("dim", cfg.dim)
    return make_scenario(cfg.scenario, params)


def _population_loss(rule: PovmRule, scenario: Scenario) -> float:
    if scenario.population is not None:
        return rule_population_loss(rule, scenario.population)
    return rule_mean_loss(rule, scenario.mean_plus, scenario.mean_minus)


def run_trial(cfg: ExperimentConfig, trial: int) -> tuple[ErrorZooReport, dict]:
    """One seeded trial: sample, learn, evaluate all five losses exactly."""
    rng = stream(cfg.seed, trial)
    scenario = _scenario_for(cfg)
    if cfg.dataset_path:
        ensemble = load_ensemble(cfg.dataset_path)
    else:
        ensemble = scenario.sample(
            int(stream(cfg.seed, trial, 1).integers(2**31)), cfg.n_items, cfg.s_copies
        )
    rule_star, rule_dataset, rule_finite, strict = _strategy_rules(cfg, scenario, ensemble, rng)

    min_loss = _population_loss(rule_star, scenario)
    test_fs = _population_loss(rule_dataset, scenario)
    test_fss = _population_loss(rule_finite, scenario)
    data_fs = rule_dataset_loss(rule_dataset, ensemble)
    data_fss = rule_dataset_loss(rule_finite, ensemble)

    report = error_zoo(min_loss, data_fs, test_fs, data_fss, test_fss, check_minimality=strict)

    b = bounds_mod.rademacher_B(ensemble)
    extras = {
        "bound_gen": math.sqrt(b / ensemble.n_items),
        "bound_B": b,
        "bound_majority": math.sqrt(cfg.v_copies + 1.0),
        "bound_tomo_scaling": scenario.dim / math.sqrt(max(1, cfg.n_items * cfg.s_copies)),
    }
    return report, extras


def _trial_row(args: tuple) -> dict:
    cfg_doc, trial, axis, value = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    report, extras = run_trial(cfg, trial)
    row = {
        "scenario": cfg.scenario,
        "axis": axis,
        "value": value,
        "trial": trial,
        "seed": cfg.seed,
    }
    row.update(report.as_row())
    row.update(extras)
    return row


def _format_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _pool_size() -> int:
    raw = os.environ.get("QLEARN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"QLEARN_THREADS must be an integer, got {raw!r}")


def _run_rows(work: list[tuple]) -> list[dict]:
    workers = _pool_size()
    if workers == 1 or len(work) <= 1:
        return [_trial_row(w) for w in work]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_row, work))


def _cfg_doc(cfg: ExperimentConfig) -> dict:
    doc = asdict(cfg)
    return doc


def run_scenario(cfg: ExperimentConfig) -> list[dict]:
    """All trials of one configuration, as CSV-ready rows in trial order."""
    work = [(_cfg_doc(cfg), t, "none", 0.0) for t in range(cfg.trials)]
    return _run_rows(work)


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence) -> list[dict]:
    """Rows for every (axis value, trial) pair.

    ``axis`` is one of N, S, V, d, omega; each value overrides the matching
    config field before the trials run.
    """
    field_map = {
        "N": "n_items",
        "S": "s_copies",
        "V": "v_copies",
        "d": "dim",
        "omega": None,
    }
    if axis not in field_map:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    work = []
    for value in values:
        doc = _cfg_doc(cfg)
        if axis == "omega":
            doc.setdefault("dataset", {})
            doc["dataset"] = dict(doc["dataset"], omega_count=int(value))
        else:
            doc[field_map[axis]] = type(doc[field_map[axis]])(value)
        for t in range(cfg.trials):
            work.append((doc, t, axis, float(value)))
    return _run_rows(work)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(c, "")) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"
