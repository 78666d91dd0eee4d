from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..analysis.orbit_analyzer import (
    INCONCLUSIVE, ClassificationTolerances, classify_orbit, coverage_experiment,
    power_minimality_scan, product_pm_probe, residue_limit_sets, time_s_scan,
)
from ..analysis.stability_estimator import equicontinuity_modulus, pointwise_modulus
from ..config import Config
from ..constructions.example_builder import (
    build_product_pm_flow, build_slowed_system, build_translation_factor_product, generic_seeds,
)
from ..decider.affine_decider import affine_power, decide_affine_minimality, decide_power_minimality, verify_certificate
from ..flow.flow_integrator import IntegratorConfig, TimeSMap
from ..reporting.report_store import ReportStore
from ..set_dynamics.raster_set import RasterDomain, RasterMap, RasterSet
from ..set_dynamics.set_chains import birkhoff_chain, decreasing_chain_check, preimage_intersection_chain
from ..systems.exact_vector import ExactVector, SymbolBasis
from ..systems.subshift import Subshift, SubshiftDescriptor, expansivity_check
from ..systems.system_descriptor import AffineMap, Automorphism, ProductSystem, SystemDescriptor, Translation
from .experiment_config import ExperimentConfig, RasterSpec, SetSpec, SystemSpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3


@dataclass
class Outcome:
    result: Dict[str, Any]
    curves: Dict[str, Tuple[List[Sequence[float]], Sequence[str]]] = field(default_factory=dict)
    verdicts: List[str] = field(default_factory=list)
    failures: int = 0
    tasks: int = 1


def build_system(spec: SystemSpec, basis: SymbolBasis, cfg: IntegratorConfig) -> SystemDescriptor:
    """Строит SystemDescriptor по описанию из конфигурации."""
    kind = spec.kind
    if kind == "translation":
        return Translation(ExactVector.parse(spec.a, basis))
    if kind == "affine":
        return AffineMap(spec.matrix, ExactVector.parse(spec.a, basis))
    if kind == "automorphism":
        return Automorphism(spec.matrix)
    if kind == "time_s":
        gamma = ExactVector.parse(spec.gamma, basis)
        return build_slowed_system(spec.n or gamma.dimension, gamma, spec.centers, spec.bump_radius, spec.s, spec.profile, cfg)
    if kind == "product_pm_flow":
        gamma = ExactVector.parse(spec.gamma, basis)
        return build_product_pm_flow(spec.n, gamma, spec.centers, spec.bump_radius, spec.s,
                                     spec.circle_speed, spec.profile, cfg)
    if kind == "translation_factor_product":
        base = build_system(spec.base, basis, cfg)
        return build_translation_factor_product(Translation(ExactVector.parse(spec.a, basis)), base)
    if kind == "subshift":
        if spec.preset == "full_shift":
            sub = SubshiftDescriptor.full_shift(spec.alphabet_size or 2)
        elif spec.preset == "golden_mean":
            sub = SubshiftDescriptor.golden_mean()
        else:
            sub = SubshiftDescriptor(spec.alphabet_size, tuple(tuple(r) for r in spec.transitions))
        return Subshift(sub)
    if kind == "product":
        return ProductSystem(build_system(spec.left, basis, cfg), build_system(spec.right, basis, cfg))
    raise ValueError(f"Неизвестный тип системы: {kind}")


def raster_domain(spec: RasterSpec) -> RasterDomain:
    if spec.domain == "torus":
        return RasterDomain.torus(spec.dimension, spec.resolution)
    return RasterDomain.box(spec.dimension, spec.resolution, spec.lower, spec.upper)


def raster_set(spec: Optional[SetSpec], domain: RasterDomain) -> RasterSet:
    if spec is None:
        return RasterSet.empty(domain)
    if spec.shape == "full":
        out = RasterSet.full(domain)
    elif spec.shape == "empty":
        out = RasterSet.empty(domain)
    elif spec.shape == "box":
        if spec.low is None or spec.high is None:
            raise ValueError("Для множества box нужны low и high")
        out = RasterSet.box(domain, spec.low, spec.high)
    elif spec.shape == "disk":
        if spec.center is None or spec.radius is None:
            raise ValueError("Для множества disk нужны center и radius")
        out = RasterSet.disk(domain, spec.center, spec.radius)
    else:
        if not spec.points:
            raise ValueError("Для множества points нужен непустой список точек")
        out = RasterSet.points(domain, spec.points)
    if spec.complement:
        out = out.complement()
    if spec.interior:
        out = out.interior()
    return out


class ExperimentRunner:
    '''
    Класс ExperimentRunner выполняет команду из конфигурации: строит систему,
    раздаёт задачи по начальным точкам пулу потоков и собирает отчёт.
    '''
    def __init__(self, config: ExperimentConfig, store: Optional[ReportStore] = None, workers: Optional[int] = None):
        self.config = config
        base = Path(config.output.directory) if config.output.directory else None
        self.store = store or ReportStore(base)
        if config.deterministic:
            self.workers = 1
        else:
            self.workers = workers or config.workers or Config.MAX_WORKERS
        self.basis = SymbolBasis.declare(config.symbols)
        self.integrator = IntegratorConfig(**config.integrator.model_dump())
        self._system: Optional[SystemDescriptor] = None
        logger.info(f"Инициализация ExperimentRunner, workers: {self.workers}")

    @property
    def system(self) -> SystemDescriptor:
        if self._system is None:
            if self.config.system is None:
                raise ValueError("Для команды нужна система (ключ system)")
            self._system = build_system(self.config.system, self.basis, self.integrator)
        return self._system

    def seeds(self) -> List[Any]:
        analysis = self.config.analysis
        if self.system.kind == "Subshift":
            rng = np.random.default_rng(self.config.rng_seed)
            return self.system.sub.sample_points(rng, analysis.seed_count)
        if analysis.seeds:
            for seed in analysis.seeds:
                if len(seed) != self.system.dimension:
                    raise ValueError(f"Размерность начальной точки {len(seed)} не равна {self.system.dimension}")
            return [np.asarray(s, dtype=float) for s in analysis.seeds]
        return list(generic_seeds(self.system.dimension, analysis.seed_count, self.config.rng_seed))

    def _fan_out(self, fn: Callable[[Any], Dict[str, Any]], items: Sequence[Any]) -> Tuple[List[Dict[str, Any]], int]:
        """Параллельная обработка с общим пулом потоков, результаты в порядке постановки."""
        results, failures = [], 0
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            future_to_index = {executor.submit(fn, item): i for i, item in enumerate(items)}
            for future in future_to_index:
                index = future_to_index[future]
                try:
                    results.append(future.result())
                except Exception as e:
                    logger.error(f"Ошибка задачи {index}: {e}")
                    results.append({"index": index, "error": str(e)})
                    failures += 1
        return results, failures

    # Команды

    def cmd_build(self) -> Outcome:
        return Outcome({"system": self.system.describe(), "metadata": self.system.metadata()})

    def cmd_orbit(self) -> Outcome:
        analysis = self.config.analysis
        seed = self.seeds()[0]
        rows = []
        index = 0
        for chunk in self.system.orbit(seed, analysis.steps, analysis.direction):
            points = self.system.embed(chunk)
            for p in points:
                rows.append([index, *p])
                index += 1
        columns = ["step"] + [f"x{i + 1}" for i in range(self.system.embedding_dimension)]
        final = rows[-1][1:] if rows else []
        return Outcome({"steps": index - 1, "final_state": final}, {"orbit": (rows, columns)})

    def cmd_coverage(self) -> Outcome:
        analysis = self.config.analysis

        def task(seed):
            run = coverage_experiment(self.system, seed, analysis.steps, analysis.resolution,
                                      analysis.direction, analysis.tolerances.dense_threshold)
            return {"seed": _seed_repr(seed), **run.to_dict(), "curve": run.curve}

        results, failures = self._fan_out(task, self.seeds())
        curves = {
            f"coverage_{i}": (r["curve"], ("step", "fraction")) for i, r in enumerate(results) if "curve" in r
        }
        for r in results:
            r.pop("curve", None)
        return Outcome({"runs": results}, curves, failures=failures, tasks=len(results))

    def cmd_classify(self) -> Outcome:
        analysis = self.config.analysis
        tol = ClassificationTolerances(**analysis.tolerances.model_dump())

        def task(seed):
            report = classify_orbit(self.system, seed, analysis.steps, analysis.resolution, tol)
            return {"seed": _seed_repr(seed), "report": report}

        results, failures = self._fan_out(task, self.seeds())
        curves, entries, verdicts = {}, [], []
        for i, r in enumerate(results):
            if "report" not in r:
                entries.append(r)
                continue
            report = r["report"]
            curves[f"classify_{i}_forward"] = (report.forward_curve, ("step", "fraction"))
            curves[f"classify_{i}_backward"] = (report.backward_curve, ("step", "fraction"))
            entries.append({"seed": r["seed"], **report.to_dict()})
            verdicts.append(report.classification)
        return Outcome({"orbits": entries}, curves, verdicts, failures, len(results))

    def cmd_residue(self) -> Outcome:
        analysis = self.config.analysis

        def task(seed):
            profile = residue_limit_sets(self.system, seed, analysis.p, analysis.steps, analysis.resolution)
            return {"seed": _seed_repr(seed), **profile.to_dict()}

        results, failures = self._fan_out(task, self.seeds())
        return Outcome({"profiles": results}, failures=failures, tasks=len(results))

    def cmd_powers(self) -> Outcome:
        analysis = self.config.analysis

        def task(seed):
            entries = power_minimality_scan(self.system, seed, analysis.primes, analysis.steps,
                                            analysis.resolution, analysis.tolerances.dense_threshold)
            return {"seed": _seed_repr(seed), "entries": entries}

        results, failures = self._fan_out(task, self.seeds())
        curves, out = {}, []
        for i, r in enumerate(results):
            if "entries" not in r:
                out.append(r)
                continue
            for e in r["entries"]:
                curves[f"powers_{i}_p{e.prime}"] = (e.run.curve, ("step", "fraction"))
            out.append({"seed": r["seed"], "primes": [e.to_dict() for e in r["entries"]]})
        return Outcome({"scans": out}, curves, failures=failures, tasks=len(results))

    def cmd_decide_affine(self) -> Outcome:
        system = self.system
        if isinstance(system, AffineMap):
            tau, a = [[int(v) for v in row] for row in system.matrix.tolist()], system.a
        elif isinstance(system, Translation):
            tau, a = np.eye(system.dimension, dtype=int).tolist(), system.a
        else:
            raise ValueError(f"decide-affine применим к аффинным системам, получено {system.kind}")
        power = self.config.analysis.power or 1
        if power > 1:
            verdict = decide_power_minimality(tau, a, power)
            tau, a = affine_power(tau, a, power)
        else:
            verdict = decide_affine_minimality(tau, a)
        verified = verify_certificate(verdict, tau, a)
        result = {**verdict.to_dict(), "certificate_verified": verified}
        logger.info(f"Вердикт решателя: {verdict.verdict.value}")
        return Outcome(result, verdicts=[verdict.verdict.value])

    def _raster_map(self, spec: RasterSpec) -> RasterMap:
        if spec.map == "system":
            if spec.domain != "torus" or spec.dimension != self.system.dimension:
                raise ValueError("Отображение системы растеризуется на торе её размерности")
            return RasterMap.from_system(self.system, spec.resolution, spec.samples_per_axis)
        params = {k: v for k, v in (("alpha", spec.alpha), ("factor", spec.factor)) if v is not None}
        return RasterMap.named(spec.map, raster_domain(spec), spec.samples_per_axis, **params)

    def _raster_spec(self) -> RasterSpec:
        spec = self.config.analysis.raster
        if spec is None:
            raise ValueError("Для растровых команд нужен ключ analysis.raster")
        return spec

    def cmd_dichotomy(self) -> Outcome:
        spec = self._raster_spec()
        f = self._raster_map(spec)
        if spec.U is None:
            raise ValueError("Для дихотомии нужно множество U")
        U = raster_set(spec.U, f.domain)
        A = raster_set(spec.A, f.domain)
        result = preimage_intersection_chain(f, U, A, spec.n_max)
        name = self.config.output.name
        out = {**result.to_dict(), "map": f.describe()}
        out["E_path"] = str(result.E.save(self.store.rasters_dir / f"{name}_E.pmr"))
        if result.V is not None:
            out["V_path"] = str(result.V.save(self.store.rasters_dir / f"{name}_V.pmr"))
        return Outcome(out, verdicts=[result.verdict])

    def cmd_birkhoff(self) -> Outcome:
        spec = self._raster_spec()
        f = self._raster_map(spec)
        if spec.D0 is None or spec.A is None:
            raise ValueError("Для цепочки Биркгофа нужны множества D0 и A")
        result = birkhoff_chain(f, raster_set(spec.D0, f.domain), raster_set(spec.A, f.domain), spec.n_max)
        out = {**result.to_dict(), "decreasing": decreasing_chain_check(result), "map": f.describe()}
        out["K_path"] = str(result.K.save(self.store.rasters_dir / f"{self.config.output.name}_K.pmr"))
        return Outcome(out, verdicts=[result.status])

    def cmd_probe_product(self) -> Outcome:
        analysis = self.config.analysis
        report = product_pm_probe(self.system, analysis.steps, analysis.resolution,
                                  analysis.seed_count, self.config.rng_seed)
        return Outcome(report.to_dict())

    def cmd_equicontinuity(self) -> Outcome:
        analysis = self.config.analysis
        estimate = equicontinuity_modulus(self.system, analysis.epsilon, analysis.horizon,
                                          analysis.sample_pairs, self.config.rng_seed)
        result = estimate.to_dict()
        if analysis.seeds:
            result["pointwise"] = [
                pointwise_modulus(self.system, seed, analysis.epsilon, analysis.horizon, direction,
                                  rng_seed=self.config.rng_seed)
                for seed in self.seeds() for direction in ("forward", "backward")
            ]
        return Outcome(result)

    def cmd_expansivity(self) -> Outcome:
        system = self.system
        if not isinstance(system, Subshift):
            raise ValueError("Проверка экспансивности выполняется для подсдвигов")
        analysis = self.config.analysis
        rng = np.random.default_rng(self.config.rng_seed)
        points = system.sub.sample_points(rng, 2 * analysis.witness_pairs)
        pairs = list(zip(points[::2], points[1::2]))
        report = expansivity_check(system.sub, analysis.separation, analysis.horizon, pairs)
        return Outcome({**report.to_dict(), "all_separated": report.all_separated})

    def cmd_time_s_scan(self) -> Outcome:
        system = self.system
        if not isinstance(system, TimeSMap):
            raise ValueError("Сканирование по s выполняется для отображения потока за время s")
        analysis = self.config.analysis
        s_values = analysis.s_values or [str(system.s)]
        seed = self.seeds()[0]
        rows = time_s_scan(system.field, s_values, seed, analysis.steps, analysis.resolution, system.cfg)
        return Outcome({"seed": _seed_repr(seed), "scan": rows})

    COMMAND_HANDLERS = {
        "build": "cmd_build",
        "orbit": "cmd_orbit",
        "coverage": "cmd_coverage",
        "classify": "cmd_classify",
        "residue": "cmd_residue",
        "powers": "cmd_powers",
        "decide-affine": "cmd_decide_affine",
        "dichotomy": "cmd_dichotomy",
        "birkhoff": "cmd_birkhoff",
        "probe-product": "cmd_probe_product",
        "equicontinuity": "cmd_equicontinuity",
        "expansivity": "cmd_expansivity",
        "time-s-scan": "cmd_time_s_scan",
    }

    def execute(self, command: Optional[str] = None, created_at: Optional[str] = None) -> Tuple[Dict[str, Any], int]:
        '''
        Выполняет команду и сохраняет отчёт. Возвращает отчёт и код выхода:
        0 при успехе, 1 если все задачи упали, 3 если все результаты неопределённые.
        '''
        command = command or self.config.analysis.command
        if command not in self.COMMAND_HANDLERS:
            raise ValueError(f"Неизвестная команда: {command}")
        logger.info(f"Запуск команды {command}")
        outcome: Outcome = getattr(self, self.COMMAND_HANDLERS[command])()
        declarations = self.basis.declaration()
        if self._system is not None:
            declarations = {**declarations, **self._system.independence_declarations()}
        report = self.store.build_report(command, outcome.result, self.config.resolved(), declarations, created_at)
        name = self.config.output.name
        curve_paths = {}
        for curve_name, (rows, columns) in outcome.curves.items():
            curve_paths[curve_name] = str(self.store.save_curve(f"{name}_{curve_name}", rows, columns))
        report["curves"] = curve_paths
        report["report_path"] = str(self.store.base_dir / f"{name}.json")
        self.store.save(report, Path(report["report_path"]))

        if outcome.failures and outcome.failures == outcome.tasks:
            return report, EXIT_FAILURE
        if outcome.verdicts and all(v == INCONCLUSIVE for v in outcome.verdicts):
            return report, EXIT_INCONCLUSIVE
        return report, EXIT_OK


def _seed_repr(seed) -> Any:
    if isinstance(seed, np.ndarray):
        return [float(v) for v in seed]
    if hasattr(seed, "to_dict"):
        return seed.to_dict()
    return seed
