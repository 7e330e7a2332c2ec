"""Reproducible numerical experiments, each a pure function of its spec and seed.

Every driver returns a list of row dicts and can write them as CSV with a
fixed header (see ``HEADERS``).  Per-cell random streams are derived from the
master seed and the cell key, so cells are independent of execution order.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import alignment, codec
from .graphs import (
    LabelledGraph,
    Permutation,
    check_perm_budget,
    num_pairs,
    pair_permutation_table,
    structure_index,
)
from .logmath import h2, log2sumexp
from .model import (
    JointEdgeDistribution,
    SourceVariant,
    entropy_report,
    exact_entropy_terms,
    exact_structure_entropy,
    joint_graph_table,
    perm_log_joint_chunks,
    sample_pair_arrays,
    subsampling_conditional_entropy,
    subsampling_model,
)

SANDWICH_TOL = 1e-9


class ExperimentKind(enum.Enum):
    ConvergenceSweep = "ConvergenceSweep"
    SandwichCheck = "SandwichCheck"
    RateSweep = "RateSweep"
    BoundComparison = "BoundComparison"
    StructuralEntropyCheck = "StructuralEntropyCheck"
    AlignmentConcentration = "AlignmentConcentration"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    model: dict = field(default_factory=lambda: {"model": "subsampling", "p": 0.5, "gamma": 0.5})
    n_list: tuple[int, ...] = (4, 5, 6)
    trials: int = 1000
    seed: int = 0
    output: str | None = None
    variant: str = "GraphGivenStructure"
    delta: float = 0.5
    deltas: tuple[float, ...] = (0.5, 1.0)
    rates: tuple[float, ...] = ()
    seeds: int = 20
    epsilon: float | None = None
    grid: bool = False

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ExperimentKind(self.kind))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")

    @property
    def dist(self) -> JointEdgeDistribution:
        return JointEdgeDistribution.from_json(self.model)

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            doc = json.loads(Path(doc).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**doc)


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


HEADERS = {
    ExperimentKind.ConvergenceSweep: [
        "quantity", "n", "trials", "mean", "median", "q05", "q95", "reference",
        "abs_dev", "std_err", "tail_delta", "tail_freq", "tail_bound",
    ],
    ExperimentKind.SandwichCheck: ["n", "inequality", "lower", "middle", "upper", "lower_margin", "upper_margin", "ok"],
    ExperimentKind.RateSweep: [
        "variant", "n", "R", "delta", "seed", "trials", "errors", "none_typical",
        "ambiguous", "bound", "exact_error",
    ],
    ExperimentKind.BoundComparison: ["p", "gamma", "epsilon", "sigma2", "s", "delta_prior", "prior_bound", "H_A_given_B", "gap"],
    ExperimentKind.StructuralEntropyCheck: ["n", "H_G", "H_S", "approx", "residual", "log2_nfact", "H_G_minus_H_S"],
    ExperimentKind.AlignmentConcentration: [
        "n", "shape", "fixed_points", "transpositions", "trials", "mean", "std_err",
        "expected", "z", "delta", "tail_freq", "tail_bound",
    ],
}


def to_csv(rows: list[dict], kind: ExperimentKind) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=HEADERS[kind], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(rows: list[dict], kind: ExperimentKind, path: str | Path) -> None:
    Path(path).write_text(to_csv(rows, kind))


# information spectrum -------------------------------------------------------


@dataclass
class SpectrumSample:
    """Normalized (per vertex pair) log-likelihood quantities for one CER draw."""

    joint_identity: float  # -log P(ga, gb) / m
    joint_max: float  # -log max_pi P(ga, pi(gb)) / m
    conditional: float  # -log P(ua | ub) / m for the chosen variant
    max_statistic: int | None  # max_pi sum a_ij b_pi(i)pi(j), unweighted only


def spectrum_sample(a: np.ndarray, b: np.ndarray, dist: JointEdgeDistribution, n: int, variant: SourceVariant) -> SpectrumSample:
    m = num_pairs(n)
    lm = dist.log_matrix
    identity = float(lm[a, b].sum())
    log_pb = float(dist.log_marginal("b")[b].sum())
    values = np.concatenate([v for _, v in perm_log_joint_chunks(a, b, lm, n)])
    top = float(values.max())
    if variant is SourceVariant.GraphGivenGraph:
        cond = identity - log_pb
    else:
        total = log2sumexp(values)
        if variant is SourceVariant.GraphGivenStructure:
            cond = total - math.log2(math.factorial(n)) - log_pb
        else:
            table = pair_permutation_table(n)
            aut = int(np.count_nonzero((a[table] == a).all(axis=1)))
            cond = total - math.log2(aut) - log_pb
    stat = None
    if dist.unweighted:
        stat = int((b[pair_permutation_table(n)] @ a).max())
    return SpectrumSample(-identity / m, -top / m, -cond / m, stat)


def joint_max_tail_bound(n: int, delta: float, dist: JointEdgeDistribution) -> float:
    """Bound on P(|-log max_pi P(Ga, pi(Gb)) / m - H(A,B)| > 2 delta), base 2."""
    m = num_pairs(n)
    log_c = math.log2(dist.min_support_prob)
    first = 2.0 ** (-(m * delta - n * math.log2(n)))
    second = 2.0 ** (-2 * delta**2 * m / log_c**2) if log_c != 0 else 0.0
    return first + second


def run_convergence_sweep(spec: ExperimentSpec) -> list[dict]:
    dist = spec.dist
    variant = SourceVariant.parse(spec.variant)
    report = entropy_report(dist)
    rows = []
    for n in spec.n_list:
        check_perm_budget(n)
        rng = cell_rng(spec.seed, n)
        a_arr, b_arr = sample_pair_arrays(dist, n, rng, size=spec.trials)
        samples = [spectrum_sample(a, b, dist, n, variant) for a, b in zip(a_arr, b_arr)]
        series = {
            "joint_identity": (np.array([s.joint_identity for s in samples]), report.H_AB),
            "joint_max": (np.array([s.joint_max for s in samples]), report.H_AB),
            f"conditional_{variant.value}": (np.array([s.conditional for s in samples]), report.H_A_given_B),
        }
        if dist.unweighted:
            m = num_pairs(n)
            stats = np.array([s.max_statistic for s in samples]) / m
            series["max_statistic"] = (stats, dist.p11)
        for name, (x, ref) in series.items():
            row = {
                "quantity": name,
                "n": n,
                "trials": spec.trials,
                "mean": float(x.mean()),
                "median": float(np.median(x)),
                "q05": float(np.quantile(x, 0.05)),
                "q95": float(np.quantile(x, 0.95)),
                "reference": float(ref),
                "abs_dev": float(abs(x.mean() - ref)),
                "std_err": float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0,
                "tail_delta": "",
                "tail_freq": "",
                "tail_bound": "",
            }
            if name == "max_statistic":
                row["abs_dev"] = float(np.median(np.abs(x - ref)))
            if name == "joint_max":
                row["tail_delta"] = spec.delta
                row["tail_freq"] = float(np.mean(np.abs(x - ref) > 2 * spec.delta))
                row["tail_bound"] = joint_max_tail_bound(n, spec.delta, dist)
            rows.append(row)
    return rows


# exact entropy checks -------------------------------------------------------


def automorphism_entropy_identity(n: int, dist: JointEdgeDistribution) -> float:
    """log2(n!) - sum_s P(s) log2 |Aut(s)|, which equals H(Gb) - H(Sb)."""
    from .graphs import automorphism_count
    from .model import marginal_graph_probs

    ids, keys = structure_index(n, dist.kb)
    probs = np.bincount(ids, weights=marginal_graph_probs(n, dist, "b"), minlength=len(keys))
    aut = np.array([automorphism_count(k.graph()) for k in keys])
    return math.log2(math.factorial(n)) - float((probs * np.log2(aut)).sum())


def sandwich_rows(n: int, dist: JointEdgeDistribution) -> list[dict]:
    t = exact_entropy_terms(n, dist)
    gg, gs, sg, ss = t["H(Ga|Gb)"], t["H(Ga|Sb)"], t["H(Sa|Gb)"], t["H(Sa|Sb)"]
    checks = [
        ("H(Ga|Gb) <= H(Ga|Sb) <= H(Ga|Gb)+H(Gb|Sb)", gg, gs, gg + t["H(Gb|Sb)"]),
        ("H(Ga|Gb)-H(Ga|Sa) <= H(Sa|Gb) <= H(Ga|Gb)", gg - t["H(Ga|Sa)"], sg, gg),
        ("H(Sa|Gb) <= H(Sa|Sb) <= H(Ga|Sb)", sg, ss, gs),
    ]
    rows = []
    for name, lo, mid, hi in checks:
        rows.append({
            "n": n,
            "inequality": name,
            "lower": lo,
            "middle": mid,
            "upper": hi,
            "lower_margin": mid - lo,
            "upper_margin": hi - mid,
            "ok": (mid - lo >= -SANDWICH_TOL) and (hi - mid >= -SANDWICH_TOL),
        })
    return rows


def run_sandwich_check(spec: ExperimentSpec) -> list[dict]:
    """Six conditional-entropy inequalities (three two-sided rows) per n, exactly."""
    dist = spec.dist
    rows = []
    for n in spec.n_list:
        rows.extend(sandwich_rows(n, dist))
    return rows


def sandwich_passed(rows: list[dict]) -> bool:
    return all(r["ok"] for r in rows)


def run_structural_entropy_check(spec: ExperimentSpec) -> list[dict]:
    dist = spec.dist
    h_a = entropy_report(dist).H_A
    rows = []
    for n in spec.n_list:
        m = num_pairs(n)
        h_s = exact_structure_entropy(n, dist, "a")
        h_g = m * h_a
        approx = h_g - n * math.log2(n) if n > 1 else h_g
        rows.append({
            "n": n,
            "H_G": h_g,
            "H_S": h_s,
            "approx": approx,
            "residual": h_s - approx,
            "log2_nfact": math.log2(math.factorial(n)),
            "H_G_minus_H_S": h_g - h_s,
        })
    return rows


# prior achievable-rate comparison -------------------------------------------


@dataclass(frozen=True)
class NikpeyBoundInputs:
    """Parameters of the earlier achievable rate h2(p gamma) - delta for the subsampling model."""

    p: float
    gamma: float
    epsilon: float | None = None  # defaults to (1 - p) / 2

    def __post_init__(self):
        if not (0 <= self.p < 1 and 0 <= self.gamma <= 1):
            raise ValueError("need 0 <= p < 1 and 0 <= gamma <= 1")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", (1 - self.p) / 2)
        if not 0 < self.epsilon < 1 - self.p:
            raise ValueError("epsilon must lie in (0, 1 - p)")

    @property
    def sigma2(self) -> float:
        pg2 = (self.p * self.gamma) ** 2
        return pg2 * (1 - pg2)

    @property
    def s(self) -> float:
        pg2 = (self.p * self.gamma) ** 2
        eps = self.epsilon
        return min(1.0, (1 - eps - self.p) / ((1 - eps + self.p) * (1 - pg2)))

    @property
    def delta_prior(self) -> float:
        s = self.s
        return 2 * s**2 * self.sigma2 / (s + 2) ** 2


def run_bound_comparison(inputs: NikpeyBoundInputs) -> dict:
    prior = h2(inputs.p * inputs.gamma) - inputs.delta_prior
    exact = subsampling_conditional_entropy(inputs.p, inputs.gamma)
    return {
        "p": inputs.p,
        "gamma": inputs.gamma,
        "epsilon": inputs.epsilon,
        "sigma2": inputs.sigma2,
        "s": inputs.s,
        "delta_prior": inputs.delta_prior,
        "prior_bound": prior,
        "H_A_given_B": exact,
        "gap": prior - exact,
    }


def run_bound_grid(spec: ExperimentSpec) -> list[dict]:
    """The comparison at the configured subsampling point, or on a 5 x 4 (p, gamma) grid."""
    if not spec.grid:
        if spec.model.get("model") != "subsampling":
            raise ValueError("the bound comparison needs a subsampling model")
        return [run_bound_comparison(NikpeyBoundInputs(spec.model["p"], spec.model["gamma"], spec.epsilon))]
    ps = np.linspace(0.1, 0.9, 5)
    gammas = np.linspace(0.2, 1.0, 4)
    return [run_bound_comparison(NikpeyBoundInputs(float(p), float(g))) for p in ps for g in gammas]


# codec and alignment sweeps -------------------------------------------------


def default_rates() -> tuple[float, ...]:
    return tuple(float(r) for r in np.round(np.linspace(0.1, 1.5, 10), 4))


def run_rate_sweep(spec: ExperimentSpec) -> list[dict]:
    dist = spec.dist
    variant = SourceVariant.parse(spec.variant)
    rates = spec.rates or default_rates()
    rows = []
    for n in spec.n_list:
        base = codec.CodecConfig(n, dist, variant, rates[0], spec.delta, 0)
        model = codec.exact_codebook_model(base)
        for rate in rates:
            for s in range(spec.seeds):
                cfg = codec.CodecConfig(n, dist, variant, rate, spec.delta, s)
                # the sample stream is shared across rates so cells differ only by codebook
                sim = codec.simulate_error_rate(cfg, spec.trials, cell_rng(spec.seed, n, s), model)
                rows.append({
                    "variant": variant.name,
                    "n": n,
                    "R": rate,
                    "delta": spec.delta,
                    "seed": s,
                    "trials": spec.trials,
                    "errors": sim.errors,
                    "none_typical": sim.none_typical,
                    "ambiguous": sim.ambiguous,
                    "bound": sim.bound,
                    "exact_error": codec.exact_error_probability(model, cfg)[0],
                })
    return rows


def standard_shapes(n: int) -> dict[str, Permutation]:
    """Identity, a single transposition, and the full n-cycle."""
    swap = list(range(n))
    swap[0], swap[1] = 1, 0
    cycle = [(i + 1) % n for i in range(n)]
    return {
        "identity": Permutation.identity(n),
        "transposition": Permutation(tuple(swap)),
        "cycle": Permutation(tuple(cycle)),
    }


def alignment_statistic_samples(dist: JointEdgeDistribution, n: int, p: Permutation, rng: np.random.Generator, trials: int) -> np.ndarray:
    """Vectorized draws of sum a_ij b_pi(i)pi(j) at a fixed permutation."""
    from .graphs import pair_index, pairs

    a_arr, b_arr = sample_pair_arrays(dist, n, rng, size=trials)
    idx = np.array([pair_index(p(i), p(j), n) for i, j in pairs(n)], dtype=np.int64)
    return (a_arr * b_arr[:, idx]).sum(axis=1)


def run_alignment_concentration(spec: ExperimentSpec) -> list[dict]:
    dist = spec.dist
    rows = []
    for n in spec.n_list:
        m = num_pairs(n)
        for si, (name, perm) in enumerate(standard_shapes(n).items()):
            shape = alignment.permutation_shape(perm)
            stats = alignment_statistic_samples(dist, n, perm, cell_rng(spec.seed, n, si), spec.trials)
            expected = alignment.expected_statistic(shape, dist, n)
            se = float(stats.std(ddof=1) / math.sqrt(len(stats)))
            for delta in spec.deltas:
                rows.append({
                    "n": n,
                    "shape": name,
                    "fixed_points": shape.fixed_points,
                    "transpositions": shape.transpositions,
                    "trials": spec.trials,
                    "mean": float(stats.mean()),
                    "std_err": se,
                    "expected": expected,
                    "z": (float(stats.mean()) - expected) / se if se > 0 else 0.0,
                    "delta": delta,
                    "tail_freq": float(np.mean(stats - expected >= m * delta)),
                    "tail_bound": alignment.concentration_bounds(n, delta, dist).single_permutation,
                })
    return rows


RUNNERS = {
    ExperimentKind.ConvergenceSweep: run_convergence_sweep,
    ExperimentKind.SandwichCheck: run_sandwich_check,
    ExperimentKind.RateSweep: run_rate_sweep,
    ExperimentKind.BoundComparison: run_bound_grid,
    ExperimentKind.StructuralEntropyCheck: run_structural_entropy_check,
    ExperimentKind.AlignmentConcentration: run_alignment_concentration,
}


def run_experiment(spec: ExperimentSpec) -> str:
    """Run, optionally write ``spec.output``, and return the CSV text."""
    rows = RUNNERS[spec.kind](spec)
    text = to_csv(rows, spec.kind)
    if spec.output:
        Path(spec.output).write_text(text)
    return text
