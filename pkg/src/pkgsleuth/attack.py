"""Query-efficient black-box evasion against a package scorer.

Round 0 applies all single-round (SR) transformations once: sensitive-import
renaming, API obfuscation of imports and call sites, and one randomly chosen
data obfuscation (encoding or binary-array representation) per IOC kind,
applied to all matching strings. Each following multi-round (MR) step
generates a population of inert-code-injection mutants of the current best
and keeps the argmin score. The attack stops at the score threshold, at the
round limit, or after two consecutive rounds without improvement.

Every random choice derives from per-step seeds recorded in the plan trace,
so replaying a trace reproduces the winning artifact and score bit-exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .behavior import ApiCatalog, default_catalog
from .errors import ScorerFailure
from .ingest import PackageArtifact
from .srcmodel import parse_unit
from .transform import PlanStep, TransformationPlan, apply_plan, detect_iocs

IOC_KINDS = ("url", "ip", "command")
# the single-round data-obfuscation choice per IOC kind; reordering stays a
# plan-level transformation but is not part of the optimizer's SR draw
DATA_TRANSFORMS = ("encode", "binary_array")


@dataclass
class AttackConfig:
    max_rounds: int = 10
    population_per_round: int = 4
    mr_budget_per_round: int = 8
    stop_threshold: float | None = None
    seed: int = 0
    plateau_rounds: int = 2
    # resolver-opaque rewrites by default; all five variants remain selectable
    api_variant_pool: tuple[str, ...] = ("getattribute_ref", "dict_ref")

    def __post_init__(self):
        if self.max_rounds < 1 or self.population_per_round < 1 or self.mr_budget_per_round < 0:
            raise ValueError("attack config values must be positive")
        if self.stop_threshold is not None and not 0.0 <= self.stop_threshold <= 1.0:
            raise ValueError("stop_threshold must lie in [0, 1]")


@dataclass
class AdversarialResult:
    best_artifact: PackageArtifact
    best_score: float
    original_score: float
    rounds_used: int
    queries_used: int
    plan_trace: TransformationPlan
    evaded: bool
    round_scores: list[float] = field(default_factory=list)

    def to_record(self, package_id: str) -> dict:
        return {
            "package": package_id,
            "original_score": self.original_score,
            "best_score": self.best_score,
            "rounds": self.rounds_used,
            "queries": self.queries_used,
            "evaded": self.evaded,
        }


def query_bound(config: AttackConfig) -> int:
    return 1 + config.max_rounds * config.population_per_round + 1


def build_sr_plan(artifact: PackageArtifact, rng: random.Random,
                  config: AttackConfig, catalog: ApiCatalog) -> TransformationPlan:
    """The round-0 recipe: rename + API obfuscation + one data obfuscation per IOC kind."""
    steps = [
        PlanStep("rename", {"unit": "*"}, {}, rng.getrandbits(32)),
        PlanStep("api_obfuscate", {"unit": "*"}, {"site": "import"}, rng.getrandbits(32)),
        PlanStep(
            "api_obfuscate",
            {"unit": "*"},
            {"site": "call", "pool": list(config.api_variant_pool)},
            rng.getrandbits(32),
        ),
    ]
    kinds_present = set()
    for unit in artifact.units:
        tree = parse_unit(unit)
        if tree.parse_ok:
            kinds_present.update(ioc.kind for ioc in detect_iocs(tree))
    for kind in IOC_KINDS:
        if kind not in kinds_present:
            continue
        transform = rng.choice(DATA_TRANSFORMS)
        steps.append(PlanStep(transform, {"unit": "*", "ioc_kind": kind}, {}, rng.getrandbits(32)))
    return TransformationPlan(steps)


def optimize(artifact: PackageArtifact, score_fn, config: AttackConfig,
             catalog: ApiCatalog | None = None) -> AdversarialResult:
    """Minimize ``score_fn`` over functionality-preserving package variants."""
    catalog = catalog or default_catalog()
    rng = random.Random(config.seed)
    queries = 0
    trace: list[float] = []
    original_score = 0.0

    def partial() -> AdversarialResult:
        return AdversarialResult(artifact, original_score, original_score, 0, queries,
                                 TransformationPlan([]), False, trace)

    def query(candidate: PackageArtifact) -> float:
        nonlocal queries
        queries += 1
        try:
            score = float(score_fn(candidate))
        except ScorerFailure:
            raise
        except Exception as exc:
            raise ScorerFailure(f"scorer raised: {exc}", partial()) from exc
        if not 0.0 <= score <= 1.0:
            raise ScorerFailure(f"scorer returned {score} outside [0, 1]", partial())
        return score

    original_score = query(artifact)
    best_artifact = artifact
    best_score = original_score
    best_plan: list[PlanStep] = []

    sr_plan = build_sr_plan(artifact, rng, config, catalog)
    sr_artifact = apply_plan(artifact, sr_plan, catalog)
    sr_score = query(sr_artifact)
    if sr_score < best_score:
        best_artifact, best_score, best_plan = sr_artifact, sr_score, list(sr_plan.steps)

    rounds_used = 0
    stale = 0
    trace.append(best_score)
    stop = config.stop_threshold
    if stop is None or best_score >= stop:
        for _ in range(config.max_rounds):
            rounds_used += 1
            round_best = None
            for _ in range(config.population_per_round):
                step = PlanStep("inject", {"unit": "*"}, {"budget": config.mr_budget_per_round},
                                rng.getrandbits(32))
                mutant = apply_plan(best_artifact, TransformationPlan([step]), catalog)
                score = query(mutant)
                if round_best is None or score < round_best[0]:
                    round_best = (score, mutant, step)
            score, mutant, step = round_best
            if score < best_score:
                best_artifact, best_score = mutant, score
                best_plan.append(step)
                stale = 0
            else:
                stale += 1
            trace.append(best_score)
            if stop is not None and best_score < stop:
                break
            if stale >= config.plateau_rounds:
                break

    evaded = stop is not None and best_score < stop
    return AdversarialResult(
        best_artifact=best_artifact,
        best_score=best_score,
        original_score=original_score,
        rounds_used=rounds_used,
        queries_used=queries,
        plan_trace=TransformationPlan(best_plan),
        evaded=evaded,
        round_scores=trace,
    )


def replay(artifact: PackageArtifact, plan: TransformationPlan,
           catalog: ApiCatalog | None = None) -> PackageArtifact:
    """Reapply a recorded plan trace; bit-exact given the embedded seeds."""
    return apply_plan(artifact, plan, catalog or default_catalog())
