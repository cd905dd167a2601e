"""Permutation oracle: how good is the rank-paired replacement plan?

Candidate plans are built from (T, B) set choices and bijections between
them. A bijection is a permutation ``pi`` of ranks applied in every layer:
``T[r] -> B[pi(r)]``. Each plan is scored by noisy-output MSE against clean
inference, averaged over deployment seeds.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.rng import TRIAL_STREAM, RandomStream
from src.moe.model import MoEModel
from src.noise.specs import NoiseConfig
from src.profiler.activation import ActivationMap
from src.profiler.spread import output_mse
from src.romer.calibration import CalibrationConfig
from src.romer.pipeline import romer_model_forward
from src.romer.plan import LayerPlan, ReplacementPlan, apply_replacement, build_replacement_plan

logger = logging.getLogger(__name__)


class OracleBudgetError(ValueError):
    """Too many bijections to enumerate; use sampling mode."""


@dataclass(frozen=True)
class OracleEntry:
    label: str
    set_choice: int  # 0 = heuristic sets, 1.. = random sets
    permutation: Tuple[int, ...]
    mse: float
    plan: ReplacementPlan


@dataclass
class OracleReport:
    entries: List[OracleEntry] = field(default_factory=list)
    heuristic_index: int = 0
    bijections_per_set: int = 0
    sampled: bool = False

    @property
    def total(self) -> int:
        return len(self.entries)

    @property
    def heuristic(self) -> OracleEntry:
        return self.entries[self.heuristic_index]

    @property
    def heuristic_rank(self) -> int:
        """1-based rank of the heuristic plan by MSE (ties share the better rank)."""
        h = self.heuristic.mse
        return 1 + sum(1 for e in self.entries if e.mse < h)

    @property
    def heuristic_percentile(self) -> float:
        return self.heuristic_rank / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total_plans": self.total,
            "bijections_per_set": self.bijections_per_set,
            "sampled": self.sampled,
            "heuristic_rank": self.heuristic_rank,
            "heuristic_percentile": self.heuristic_percentile,
            "heuristic_mse": self.heuristic.mse,
            "plans": [
                {
                    "label": e.label,
                    "set_choice": e.set_choice,
                    "permutation": list(e.permutation),
                    "mse": e.mse,
                    "layers": e.plan.to_dict()["layers"],
                }
                for e in self.entries
            ],
        }


def permuted_plan(sets: Sequence[LayerPlan], perm: Sequence[int]) -> ReplacementPlan:
    layers = tuple(lp.with_pairing([lp.bottom[j] for j in perm]) for lp in sets)
    return ReplacementPlan(layers, len(perm))


def random_sets(num_layers: int, num_experts: int, n: int, rs: RandomStream) -> List[LayerPlan]:
    sets = []
    for _ in range(num_layers):
        perm = rs.permutation(num_experts)
        sets.append(LayerPlan(tuple(int(i) for i in perm[:n]), tuple(int(i) for i in perm[n : 2 * n])))
    return sets


def bijections(
    n: int, max_bijections: int, sample: Optional[int], rs: RandomStream
) -> Tuple[List[Tuple[int, ...]], bool]:
    """Every rank permutation, or a sample (identity first) when asked.

    Raises:
        OracleBudgetError: when n! exceeds ``max_bijections`` and no sample
            size is given.
    """
    count = math.factorial(n)
    if sample is None:
        if count > max_bijections:
            raise OracleBudgetError(
                f"{count} bijections per set choice exceed the budget of {max_bijections}; "
                f"set oracle.sample_bijections to evaluate a random subset"
            )
        return list(itertools.permutations(range(n))), False
    if sample >= count and count <= max_bijections:
        return list(itertools.permutations(range(n))), False
    perms = [tuple(range(n))]
    seen = set(perms)
    while len(perms) < min(sample, count):
        p = tuple(int(i) for i in rs.permutation(n))
        if p not in seen:
            seen.add(p)
            perms.append(p)
    return perms, True


def permutation_oracle(
    model: MoEModel,
    amap: ActivationMap,
    n: int,
    cfg: NoiseConfig,
    trials: int,
    *,
    tokens: Sequence[np.ndarray],
    clean_outputs: Sequence[np.ndarray],
    seed: int = 0,
    lam: float = 0.0,
    random_set_count: int = 8,
    max_bijections: int = 24,
    sample_bijections: Optional[int] = None,
    calibration: Optional[CalibrationConfig] = None,
) -> OracleReport:
    """Score the heuristic plan against its alternative bijections and random sets."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rs = RandomStream(seed, (TRIAL_STREAM, 0))
    perms, sampled = bijections(n, max_bijections, sample_bijections, rs)
    base = calibration or CalibrationConfig()
    calib = CalibrationConfig(
        lam=lam,
        n=n,
        bottom_mode=base.bottom_mode,
        replacement=True,
        calibration=lam > 0,
        halve_top_logits=base.halve_top_logits,
        order=base.order,
        extended_lambda=base.extended_lambda,
    )
    seeds = [seed + j for j in range(trials)]

    def score(plan: ReplacementPlan) -> float:
        patched = apply_replacement(model, plan)
        total = 0.0
        for s in seeds:
            outputs, _ = romer_model_forward(patched, plan, tokens, cfg, calib, s)
            total += output_mse(clean_outputs, outputs)
        return total / len(seeds)

    heuristic = build_replacement_plan(amap, n)
    set_choices = [list(heuristic.layers)]
    set_choices += [
        random_sets(model.num_layers, model.num_experts, n, rs) for _ in range(random_set_count)
    ]

    report = OracleReport(bijections_per_set=len(perms), sampled=sampled)
    for c, sets in enumerate(set_choices):
        for perm in perms:
            plan = permuted_plan(sets, perm)
            label = "heuristic" if c == 0 and perm == tuple(range(n)) else f"sets{c}/pi{perm}"
            report.entries.append(OracleEntry(label, c, tuple(perm), score(plan), plan))
    logger.info(
        f"Oracle: {report.total} plans, heuristic rank {report.heuristic_rank} "
        f"(percentile {report.heuristic_percentile:.2f})"
    )
    return report
