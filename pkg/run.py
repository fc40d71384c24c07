import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.cond_ import CondensingMode
from src.ms_ import CmonConfig
from src.nmpc_ import ClosedLoop, SimConfig, SimLog
from src.ocp_ import OcpProblem, get_benchmark, list_benchmarks, BENCHMARKS
from src.ocp_.errors import ConfigurationError, IntegrationError, QpFailure
from src.qp_ import QpPath, QpSolverConfig
from src.rk_ import IntegratorConfig
from src.sqp_ import PHASES, NmpcOptions, NmpcSolver, SqpConfig, SqpMode
from utils import read_json, write_csv, write_json

logger = logging.getLogger(__name__)

SPEC_VERSION = 1
SWEEPS = ("none", "qp-path", "cmon")

# Spec-file key -> config field, per section
SECTIONS: Dict[str, Dict[str, str]] = {
    "integrator": {
        "scheme": "scheme",
        "steps": "steps_per_interval",
        "newton_tol": "newton_tol",
        "newton_max_iters": "newton_max_iters",
    },
    "condensing": {"mode": "mode"},
    "qp": {"path": "path", "tol": "tol", "max_iters": "max_iters", "reg_eps": "reg_eps"},
    "sqp": {
        key: key
        for key in (
            "mode",
            "max_iters",
            "kkt_tol",
            "armijo_eta",
            "backtrack_factor",
            "min_alpha",
            "merit_rho",
            "merit_sigma",
        )
    },
    "cmon": {key: key for key in ("enabled", "eta_pri", "eta_dual", "eps_abs", "eps_rel")},
    "sim": {
        key: key
        for key in ("t_end", "plant_substeps", "noise_std", "seed", "warm_start_sqp", "plant_scheme")
    },
}
TOP_LEVEL = {"version", "benchmark", "out", "repeats", "sweep", "workers", "problem", "perturb"}


@dataclass
class RunSpec:
    """
    A validated run: benchmark, every solver option, simulation settings and outputs.

    Attributes:
        benchmark: registered benchmark name
        options: solver options
        sim: closed-loop settings
        problem: benchmark factory overrides for the controller model
        perturb: extra overrides for the plant model (model mismatch)
        out: output directory
        repeats: bench repetitions
        sweep: bench variant family
    """

    benchmark: str = "pendulum"
    options: NmpcOptions = field(default_factory=NmpcOptions)
    sim: SimConfig = field(default_factory=SimConfig)
    problem: Dict[str, Any] = field(default_factory=dict)
    perturb: Dict[str, Any] = field(default_factory=dict)
    out: Path = Path("out")
    repeats: int = 1
    sweep: str = "none"

    def build_problem(self) -> OcpProblem:
        return get_benchmark(self.benchmark, **self.problem)

    def build_plant(self) -> Optional[OcpProblem]:
        if not self.perturb:
            return None
        return get_benchmark(self.benchmark, **{**self.problem, **self.perturb})

    def describe(self) -> Dict[str, Any]:
        o = self.options
        return {
            "benchmark": self.benchmark,
            "scheme": o.integrator.scheme.value,
            "steps": o.integrator.steps_per_interval,
            "condensing": o.condensing.value,
            "qp_path": o.qp_path.value,
            "mode": o.sqp.mode.value,
            "cmon": o.cmon.enabled,
            "eta_pri": o.cmon.eta_pri,
            "eta_dual": o.cmon.eta_dual,
            "workers": o.workers,
            "t_end": self.sim.t_end,
            "seed": self.sim.seed,
        }


def _check_keys(data: Dict[str, Any], allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_spec(file: Optional[str | Path]) -> Dict[str, Any]:
    """Read and key-check a JSON run spec; None gives an empty spec."""
    if file is None:
        return {}
    try:
        data = read_json(file)
    except (OSError, ValueError) as err:
        raise ConfigurationError(f"cannot read run spec {file}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigurationError("run spec must be a JSON object")
    if data.get("version", SPEC_VERSION) != SPEC_VERSION:
        raise ConfigurationError(f"unsupported run spec version {data['version']!r}")
    _check_keys(data, TOP_LEVEL | set(SECTIONS), "run spec")
    for section, keys in SECTIONS.items():
        value = data.get(section, {})
        if not isinstance(value, dict):
            raise ConfigurationError(f"section {section!r} must be an object")
        _check_keys(value, keys, f"section {section!r}")
    for section in ("problem", "perturb"):
        if not isinstance(data.get(section, {}), dict):
            raise ConfigurationError(f"section {section!r} must be an object")
    return data


def set_override(data: Dict[str, Any], dotted: str, value: Any) -> None:
    """Set `section.key` (or a top-level key) unless the value is None."""
    if value is None:
        return
    if "." in dotted:
        section, key = dotted.split(".", 1)
        data.setdefault(section, {})[key] = value
    else:
        data[dotted] = value


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    return {SECTIONS[name][k]: v for k, v in data.get(name, {}).items()}


def _workers(value: int) -> int:
    if value == 0:
        return os.cpu_count() or 1
    return value


def build_spec(data: Dict[str, Any]) -> RunSpec:
    """Turn a raw spec dictionary into a validated RunSpec."""
    try:
        qp = _section(data, "qp")
        path = QpPath(qp.pop("path", QpPath.DENSE))
        condensing = data.get("condensing", {}).get(
            "mode", CondensingMode.FULL if path is QpPath.DENSE else CondensingMode.NONE
        )
        cmon = _section(data, "cmon")
        if "eps_rel" in cmon and not {"eta_pri", "eta_dual"} & set(cmon):
            cmon_config = CmonConfig.from_tolerances(
                cmon.get("eps_abs"), cmon["eps_rel"], cmon.get("enabled", True)
            )
        else:
            cmon_config = CmonConfig(**cmon)
        options = NmpcOptions(
            integrator=IntegratorConfig(**_section(data, "integrator")),
            condensing=CondensingMode(condensing),
            qp=QpSolverConfig(**qp),
            qp_path=path,
            sqp=SqpConfig(**_section(data, "sqp")),
            cmon=cmon_config,
            workers=_workers(int(data.get("workers", 0))),
        )
        spec = RunSpec(
            benchmark=data.get("benchmark", "pendulum"),
            options=options,
            sim=SimConfig(**_section(data, "sim")),
            problem=dict(data.get("problem", {})),
            perturb=dict(data.get("perturb", {})),
            out=Path(data.get("out", "out")),
            repeats=int(data.get("repeats", 1)),
            sweep=data.get("sweep", "none"),
        )
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigurationError(str(err)) from err
    if spec.benchmark not in BENCHMARKS:
        raise ConfigurationError(
            f"unknown benchmark {spec.benchmark!r}; choose from {', '.join(list_benchmarks())}"
        )
    if spec.repeats < 1:
        raise ConfigurationError("repeats must be >= 1")
    if spec.sweep not in SWEEPS:
        raise ConfigurationError(f"sweep must be one of {', '.join(SWEEPS)}")
    return spec


def _run_info(command: str, spec: RunSpec) -> None:
    info = " | ".join(f"{k}={v}" for k, v in spec.describe().items())
    print(f"Run info:\n{command=} | {info} | out={spec.out.as_posix()}")


# 1. Closed-loop run
def cmd_run(spec: RunSpec, progress: bool = True) -> int:
    """Closed-loop simulation; writes sim.csv, solver.csv and summary.json into `spec.out`."""
    _run_info("run", spec)
    loop = ClosedLoop(spec.build_problem(), spec.options, spec.sim, spec.build_plant())
    error = None
    try:
        loop.run(progress=progress)
    except IntegrationError as err:
        logger.error("closed loop aborted: %s", err)
        error = str(err)
    log = loop.log

    spec.out.mkdir(parents=True, exist_ok=True)
    write_csv(spec.out / "sim.csv", log.to_rows())
    write_csv(spec.out / "solver.csv", log.solver_rows)
    summary = {**spec.describe(), **log.summary(), "error": error}
    write_json(spec.out / "summary.json", summary)

    failed = error is not None or summary.get("failures", 0) > 0
    print(
        f"samples={len(log)} | failures={summary.get('failures', 0)} | "
        f"solve_time_mean={summary.get('solve_time_mean', float('nan')):.3e} s | "
        f"solve_time_max={summary.get('solve_time_max', float('nan')):.3e} s"
    )
    return 1 if failed else 0


# 2. Open-loop KKT check
def cmd_check(spec: RunSpec) -> int:
    """Solve the open-loop OCP to convergence; exit 0 iff every KKT residual is within tolerance."""
    _run_info("check", spec)
    problem = spec.build_problem()
    options = replace(spec.options, sqp=replace(spec.options.sqp, mode=SqpMode.CONVERGE))
    with NmpcSolver(problem, options) as solver:
        try:
            traj, report = solver.solve()
        except QpFailure as err:
            print(f"QP failure: {err}")
            return 1
        kkt = solver.kkt_residual(traj)
    print(
        f"status={report.status.value} | iters={report.iters} | "
        f"stationarity={kkt.stationarity:.3e} | eq_violation={kkt.eq_violation:.3e} | "
        f"ineq_violation={kkt.ineq_violation:.3e}"
    )
    return 0 if report.converged and kkt.max <= options.sqp.kkt_tol else 1


# 3. Timing benchmark
def bench_variants(spec: RunSpec) -> List[Tuple[str, NmpcOptions]]:
    """Option variants for a sweep."""
    o = spec.options
    if spec.sweep == "qp-path":
        return [
            ("dense", replace(o, qp_path=QpPath.DENSE, condensing=CondensingMode.FULL)),
            ("sparse", replace(o, qp_path=QpPath.SPARSE, condensing=CondensingMode.NONE)),
        ]
    if spec.sweep == "cmon":
        return [
            ("cmon_off", replace(o, cmon=replace(o.cmon, enabled=False))),
            ("cmon_on", replace(o, cmon=replace(o.cmon, enabled=True))),
        ]
    return [("base", o)]


def _bench_records(variant: str, repeat: int, log: SimLog) -> List[Dict[str, Any]]:
    totals = {phase: float(np.sum(log.timings[phase])) for phase in PHASES}
    totals["total"] = sum(totals.values())
    return [
        {"variant": variant, "repeat": repeat, "phase": phase, "seconds": seconds}
        for phase, seconds in totals.items()
    ]


def cmd_bench(spec: RunSpec, progress: bool = True) -> int:
    """
    Repeat the closed loop per sweep variant and write bench.csv: one row per variant
    and phase with mean/max/p50/p95 of the per-run phase time, plus final KKT,
    tracking error and mean CMoN update fraction.
    """
    _run_info("bench", spec)
    problem = spec.build_problem()
    plant = spec.build_plant()
    timings: List[Dict[str, Any]] = []
    quality: Dict[str, Dict[str, Any]] = {}
    failed = False

    variants = bench_variants(spec)
    runs = [(name, options, r) for name, options in variants for r in range(spec.repeats)]
    bar = tqdm(runs, desc="Bench", disable=not progress)
    for name, options, r in bar:
        loop = ClosedLoop(problem, options, spec.sim, plant)
        try:
            log = loop.run(progress=False)
        except IntegrationError as err:
            logger.error("variant %s aborted: %s", name, err)
            failed = True
            continue
        summary = log.summary()
        failed |= summary["failures"] > 0
        timings.extend(_bench_records(name, r, log))
        quality[name] = {
            **{f"final_{k}": v for k, v in summary["final_kkt"].items()},
            "tracking_error_final": summary["tracking_error_final"],
            "tracking_error_rms": summary["tracking_error_rms"],
            "update_fraction_mean": summary["update_fraction_mean"],
        }
        bar.set_description(f"Bench | {name} | run {r + 1}/{spec.repeats}")

    if not timings:
        return 1
    frame = pd.DataFrame(timings)
    stats = (
        frame.groupby(["variant", "phase"], sort=False)["seconds"]
        .agg(
            repeats="count",
            mean="mean",
            max="max",
            p50=lambda s: s.quantile(0.5),
            p95=lambda s: s.quantile(0.95),
        )
        .reset_index()
    )
    rows = [{**rec, **quality[rec["variant"]]} for rec in stats.to_dict(orient="records")]
    write_csv(spec.out / "bench.csv", rows)
    print(stats.to_string(index=False))
    return 1 if failed else 0


# 4. Registry listing
def cmd_list() -> int:
    for name in list_benchmarks():
        doc = (BENCHMARKS[name].__doc__ or "").strip().split("\n")[0]
        print(f"{name}\t{doc}")
    return 0
