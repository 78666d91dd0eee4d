"""Строгая схема конфигурации эксперимента (неизвестные ключи запрещены)."""
from typing import Any, Dict, List, Literal, Optional
import re

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import Config

SYMBOL_REFERENCE = re.compile(r"@([A-Za-z_][A-Za-z0-9_]*)")

COMMANDS = (
    "build", "orbit", "coverage", "classify", "residue", "powers", "decide-affine",
    "dichotomy", "birkhoff", "probe-product", "equicontinuity", "expansivity", "time-s-scan",
)

SYSTEM_KINDS = (
    "translation", "affine", "automorphism", "time_s", "product_pm_flow",
    "translation_factor_product", "subshift", "product",
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TolerancesSpec(StrictModel):
    dense_threshold: float = Field(Config.DENSE_THRESHOLD, gt=0.0, le=1.0)
    period_tolerance: float = Field(Config.PERIOD_TOLERANCE, gt=0.0)
    period_confirmations: int = Field(Config.PERIOD_CONFIRMATIONS, ge=1)
    stall_window: float = Field(Config.STALL_WINDOW, gt=0.0, lt=1.0)
    asymptotic_distance: float = Field(Config.ASYMPTOTIC_DISTANCE, gt=0.0)
    field_zero_tolerance: float = Field(Config.FIELD_ZERO_TOLERANCE, gt=0.0)


class IntegratorSpec(StrictModel):
    rtol: float = Field(Config.RTOL, gt=0.0)
    atol: float = Field(Config.ATOL, gt=0.0)
    max_step: float = Field(Config.MAX_STEP, gt=0.0)
    min_step: float = Field(Config.MIN_STEP, gt=0.0)
    max_wall_steps: int = Field(Config.MAX_WALL_STEPS, ge=1)


class SystemSpec(StrictModel):
    '''
    Описание системы. Точные значения записываются строками "p/q", "@name"
    или их линейными комбинациями.
    '''
    kind: Literal[SYSTEM_KINDS]
    a: Optional[List[str]] = None
    matrix: Optional[List[List[int]]] = None
    n: Optional[int] = Field(None, ge=2)
    gamma: Optional[List[str]] = None
    centers: Optional[List[List[float]]] = None
    bump_radius: float = Field(0.1, gt=0.0, le=0.25)
    s: Optional[str] = None
    profile: Literal["exp_bump", "smoothstep"] = "exp_bump"
    circle_speed: str = "1"
    alphabet_size: Optional[int] = Field(None, ge=2, le=10)
    transitions: Optional[List[List[int]]] = None
    preset: Optional[Literal["full_shift", "golden_mean"]] = None
    base: Optional["SystemSpec"] = None
    left: Optional["SystemSpec"] = None
    right: Optional["SystemSpec"] = None

    @model_validator(mode="after")
    def _required_fields(self) -> "SystemSpec":
        required = {
            "translation": ("a",),
            "affine": ("matrix", "a"),
            "automorphism": ("matrix",),
            "time_s": ("gamma", "centers", "s"),
            "product_pm_flow": ("n", "gamma", "centers", "s"),
            "translation_factor_product": ("a", "base"),
            "product": ("left", "right"),
        }.get(self.kind, ())
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Для системы {self.kind} не заданы поля: {missing}")
        if self.kind == "subshift" and self.preset is None and (self.alphabet_size is None or self.transitions is None):
            raise ValueError("Для подсдвига задайте preset или alphabet_size вместе с transitions")
        return self

    def exact_entries(self) -> List[str]:
        entries = list(self.a or []) + list(self.gamma or []) + [self.circle_speed]
        if self.s is not None:
            entries.append(self.s)
        for child in (self.base, self.left, self.right):
            if child is not None:
                entries.extend(child.exact_entries())
        return entries


SystemSpec.model_rebuild()


class SetSpec(StrictModel):
    '''
    Растровое множество: отрезок/параллелепипед [low, high], шар (center, radius),
    набор точек или вся область; complement=True берёт дополнение.
    '''
    shape: Literal["box", "disk", "points", "full", "empty"]
    low: Optional[List[float]] = None
    high: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(None, gt=0.0)
    points: Optional[List[List[float]]] = None
    complement: bool = False
    interior: bool = False


class RasterSpec(StrictModel):
    map: str = "identity"
    domain: Literal["torus", "box"] = "torus"
    dimension: int = Field(1, ge=1, le=3)
    resolution: int = Field(4096, ge=2)
    lower: float = 0.0
    upper: float = 1.0
    samples_per_axis: int = Field(Config.RASTER_SAMPLES_PER_AXIS, ge=1)
    alpha: Optional[float] = None
    factor: Optional[float] = None
    U: Optional[SetSpec] = None
    A: Optional[SetSpec] = None
    D0: Optional[SetSpec] = None
    n_max: int = Field(256, ge=1)


class AnalysisSpec(StrictModel):
    command: Optional[Literal[COMMANDS]] = None
    steps: int = Field(10_000, ge=1, le=Config.MAX_STEPS)
    resolution: int = Field(Config.DEFAULT_RESOLUTION, ge=1)
    direction: Literal["forward", "backward"] = "forward"
    seeds: List[List[float]] = Field(default_factory=list)
    seed_count: int = Field(1, ge=1)
    primes: List[int] = Field(default_factory=lambda: [2, 3, 5])
    p: int = 2
    burn_in: int = Field(0, ge=0)
    tolerances: TolerancesSpec = Field(default_factory=TolerancesSpec)
    epsilon: float = Field(0.05, gt=0.0, lt=0.5)
    horizon: int = Field(30, ge=1)
    sample_pairs: int = Field(1000, ge=1)
    s_values: List[str] = Field(default_factory=list)
    power: Optional[int] = Field(None, ge=1)
    separation: float = Field(0.5, gt=0.0, lt=1.0)
    witness_pairs: int = Field(20, ge=1)
    raster: Optional[RasterSpec] = None

    @model_validator(mode="after")
    def _check_resolution(self) -> "AnalysisSpec":
        if self.resolution & (self.resolution - 1):
            raise ValueError(f"Разрешение сетки должно быть степенью двойки: {self.resolution}")
        return self


class OutputSpec(StrictModel):
    directory: Optional[str] = None
    name: str = "experiment"


class ExperimentConfig(StrictModel):
    symbols: Dict[str, str] = Field(default_factory=dict)
    system: Optional[SystemSpec] = None
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    integrator: IntegratorSpec = Field(default_factory=IntegratorSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    deterministic: bool = False
    workers: Optional[int] = Field(None, ge=1)
    rng_seed: int = Config.DEFAULT_RNG_SEED

    @model_validator(mode="after")
    def _symbols_declared(self) -> "ExperimentConfig":
        if self.system is None:
            return self
        used = {name for entry in self.system.exact_entries() for name in SYMBOL_REFERENCE.findall(entry)}
        missing = sorted(used - set(self.symbols))
        if missing:
            raise ValueError(f"Символы использованы без объявления: {['@' + m for m in missing]}")
        return self

    def resolved(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
