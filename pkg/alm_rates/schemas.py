"""
Experiment configuration.

One canonical format: a JSON document validated against the models below.
Unknown keys are rejected. Type errors and semantic violations are collected
and raised together as a ConfigError.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import FrozenSet, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import INNER_TOL, MAX_INNER_ITERATIONS, MAX_OUTER_ITERATIONS
from .core.alm import TauSchedule
from .core.index_functions import IndexFunction
from .core.operators import OperatorSpec, first_difference
from .core.regularizers import PowerSparsity, Quadratic, Regularizer
from .errors import ConfigError
from .experiments.problems import SourceKind, SourceSpec
from .experiments.sweep import validate_delta_grid

logger = logging.getLogger(__name__)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemConfig(StrictModel):
    operator: Literal["diagonal", "convolution", "dense"] = "diagonal"
    size: int = Field(default=100, ge=1)
    cols: Optional[int] = Field(default=None, ge=1)
    decay: float = Field(default=1.0, ge=0)
    width: float = Field(default=0.0, ge=0)
    seed: int = 0

    @property
    def n_cols(self) -> int:
        return self.cols if self.cols is not None else self.size

    def operator_spec(self) -> OperatorSpec:
        return OperatorSpec(
            kind=self.operator, size=self.size, cols=self.cols, decay=self.decay, width=self.width, seed=self.seed
        )


class RegularizerConfig(StrictModel):
    kind: Literal["quadratic", "sparsity"] = "quadratic"
    q: float = 1.0
    # derivative: first difference with step 1/n
    penalty: Literal["identity", "first_difference", "derivative"] = "identity"


class SourceConfig(StrictModel):
    kind: Literal["standard", "holder"] = "standard"
    nu: float = 0.5
    support_size: int = Field(default=3, ge=1)
    magnitude: float = Field(default=1.0, gt=0)
    seed: int = 0
    profile: float = Field(default=0.0, ge=0)


class PhiConfig(StrictModel):
    c: float = Field(gt=0)
    p: float = Field(gt=0)


class DeltaGridConfig(StrictModel):
    start: float = Field(gt=0)
    stop: float = Field(gt=0)
    points: int = Field(ge=2)


class NoiseConfig(StrictModel):
    deltas: List[float] = Field(default_factory=list)
    grid: Optional[DeltaGridConfig] = None
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)

    def delta_values(self) -> List[float]:
        if self.grid is not None:
            return [float(d) for d in np.geomspace(self.grid.start, self.grid.stop, self.grid.points)]
        return list(self.deltas)


class ScheduleConfig(StrictModel):
    kind: Literal["constant", "geometric", "explicit"] = "constant"
    tau0: float = Field(default=1.0, gt=0)
    ratio: float = Field(default=1.0, ge=1)
    values: List[float] = Field(default_factory=list)

    @property
    def bounded(self) -> bool:
        return self.kind != "geometric" or self.ratio == 1.0


class SolverConfig(StrictModel):
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    inner_tol: float = Field(default=INNER_TOL, gt=0)
    max_inner_iterations: int = Field(default=MAX_INNER_ITERATIONS, ge=1)
    max_outer_iterations: int = Field(default=MAX_OUTER_ITERATIONS, ge=1)


class StoppingConfig(StrictModel):
    kind: Literal["apriori", "morozov", "fixed"] = "apriori"
    rho: Optional[float] = None
    iterations: Optional[int] = None


class MonitorsConfig(StrictModel):
    guler: bool = True
    ppm: bool = True
    kkt: bool = True
    dual_objective: bool = True
    dual_samples: int = Field(default=20, ge=1)
    probes: int = Field(default=10, ge=1)
    vi_samples: int = Field(default=1000, ge=1)

    def names(self) -> FrozenSet[str]:
        flags = {"guler": self.guler, "ppm": self.ppm, "kkt": self.kkt, "dual_objective": self.dual_objective}
        return frozenset(name for name, on in flags.items() if on)


class AnalysisConfig(StrictModel):
    distance: Optional[Literal["bregman", "norm", "dual_norm"]] = None
    bound_ratio_limit: float = Field(default=3.0, gt=1)
    slope_tolerance: float = Field(default=0.1, ge=0)


class OutputConfig(StrictModel):
    directory: Optional[str] = None
    formats: List[Literal["csv", "xlsx"]] = Field(default_factory=lambda: ["csv"], min_length=1)

    @field_validator("formats", mode="before")
    @classmethod
    def lower_formats(cls, v):
        return [str(f).strip().lower() for f in v] if isinstance(v, list) else v


class ExperimentConfig(StrictModel):
    name: str = "experiment"
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    regularizer: RegularizerConfig = Field(default_factory=RegularizerConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    phi: Optional[PhiConfig] = None
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    stopping: StoppingConfig = Field(default_factory=StoppingConfig)
    monitors: MonitorsConfig = Field(default_factory=MonitorsConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    # -----------------------------
    # Domain objects
    # -----------------------------

    def build_regularizer(self) -> Regularizer:
        reg = self.regularizer
        if reg.kind == "sparsity":
            return PowerSparsity(q=reg.q)
        n = self.problem.n_cols
        if reg.penalty == "first_difference":
            return Quadratic(first_difference(n))
        if reg.penalty == "derivative":
            return Quadratic(first_difference(n, step=1.0 / n))
        return Quadratic()

    def source_spec(self) -> SourceSpec:
        src = self.source
        return SourceSpec(
            kind=SourceKind(src.kind),
            nu=src.nu if src.kind == "holder" else 0.5,
            support_size=src.support_size,
            magnitude=src.magnitude,
            seed=src.seed,
            profile=src.profile,
        )

    def schedule(self) -> TauSchedule:
        sched = self.solver.schedule
        if sched.kind == "explicit":
            return TauSchedule.explicit(sched.values)
        if sched.kind == "geometric":
            return TauSchedule.geometric(sched.tau0, sched.ratio)
        return TauSchedule.constant(sched.tau0)

    def index_function_override(self) -> Optional[IndexFunction]:
        return None if self.phi is None else IndexFunction(c=self.phi.c, p=self.phi.p)

    def distance(self) -> str:
        if self.analysis.distance is not None:
            return self.analysis.distance
        return "norm" if self.regularizer.kind == "sparsity" else "bregman"

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Operator and source seeds become `seed`, noise seeds seed, seed+1, ..."""
        noise_seeds = [seed + i for i in range(len(self.noise.seeds))]
        return self.model_copy(
            update={
                "problem": self.problem.model_copy(update={"seed": seed}),
                "source": self.source.model_copy(update={"seed": seed}),
                "noise": self.noise.model_copy(update={"seeds": noise_seeds}),
            }
        )


def semantic_violations(cfg: ExperimentConfig) -> List[str]:
    """Cross-field rules; every violation is reported, not just the first."""
    out: List[str] = []
    stop, sched = cfg.stopping, cfg.solver.schedule
    deltas = cfg.noise.delta_values()

    if stop.kind == "morozov":
        if stop.rho is None or not stop.rho > 1:
            out.append("morozov requires rho > 1")
        if not sched.bounded:
            out.append("morozov requires a bounded step-size schedule (constant or explicit)")
    if stop.kind == "fixed" and (stop.iterations is None or stop.iterations < 1):
        out.append("fixed stopping requires iterations >= 1")
    if stop.kind in ("apriori", "morozov") and any(d <= 0 for d in deltas):
        out.append(f"{stop.kind} stopping requires every delta > 0")
    if sched.kind == "explicit" and (not sched.values or any(v <= 0 for v in sched.values)):
        out.append("explicit schedule requires a non-empty list of positive values")

    if cfg.source.kind == "holder" and not 0 < cfg.source.nu <= 0.5:
        out.append(f"holder source requires nu in (0, 1/2], got {cfg.source.nu}")
    if cfg.phi is not None and cfg.phi.p > 0.5:
        out.append(f"phi exponent p = {cfg.phi.p} exceeds the exponent cap p <= 1/2")

    reg, prob = cfg.regularizer, cfg.problem
    if reg.kind == "sparsity":
        if not 1 <= reg.q < 2:
            out.append(f"sparsity requires q in [1, 2), got {reg.q}")
        if reg.penalty != "identity":
            out.append("penalty applies to quadratic regularizers only")
        if cfg.source.support_size > prob.n_cols / 4:
            out.append(f"support_size {cfg.source.support_size} exceeds cols/4 = {prob.n_cols / 4:g}")
    if prob.cols is not None and prob.operator != "dense":
        out.append("cols applies to dense operators only")
    if reg.kind == "quadratic" and reg.penalty != "identity" and cfg.source.kind == "holder":
        identity = (prob.operator == "diagonal" and prob.decay == 0) or (
            prob.operator == "convolution" and prob.width == 0
        )
        if not identity:
            out.append(f"holder sources with a {reg.penalty} penalty need an identity operator")
    if reg.kind == "sparsity" and cfg.source.profile > 0:
        out.append("source profile applies to quadratic regularizers only")

    if not deltas:
        out.append("noise requires deltas or a grid")
    if cfg.noise.deltas and cfg.noise.grid is not None:
        out.append("noise takes either deltas or grid, not both")
    if any(d < 0 for d in cfg.noise.deltas):
        out.append("noise levels must be non-negative")
    if len(deltas) > 1:
        try:
            validate_delta_grid(deltas)
        except ConfigError as e:
            out.extend(e.violations)
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    Raises:
        ConfigError: with the decoder position for malformed JSON, or with
            every schema and semantic violation.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(["top level of the config must be an object"])
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            [f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
        ) from e
    violations = semantic_violations(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"cannot read config {path}: {e}"]) from e
    cfg = parse_config(text)
    logger.info("Loaded config %s from %s", cfg.name, path)
    return cfg
