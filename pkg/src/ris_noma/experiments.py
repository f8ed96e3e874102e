"""Experiment dispatch, artifact writing and region comparison."""

import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Union

import numpy as np
import structlog

from ris_noma.__about__ import __version__
from ris_noma.beamforming.alternating import DesignMode, alternating_design
from ris_noma.beamforming.clusters import (
    ClusterAssignment,
    centralized_cluster_design,
    distributed_cluster_design,
)
from ris_noma.beamforming.sinr import BeamformerSet
from ris_noma.channel_models import ChannelSet, draw_channels
from ris_noma.config import ExperimentConfig, config_hash
from ris_noma.converters import (
    channels_digest,
    channelset_to_dict,
    dump_json,
    encode_complex,
    profile_to_dict,
    write_points_csv,
)
from ris_noma.deployment_planner import (
    DeploymentProblem,
    classify_deployment,
    optimize_deployment,
)
from ris_noma.errors import DomainError, IncompatibleArtifactsError
from ris_noma.region_engine import (
    ConfigMode,
    RateRegion,
    contains,
    dynamic_region,
    profile_regions,
    region_area,
    region_from_csv,
    region_to_csv,
    union_region,
)

logger = structlog.get_logger(__name__)

_VERSIONED = ("numpy", "scipy", "cvxpy", "pydantic", "structlog")


class CompareMetric(str, Enum):
    CONTAINMENT = "containment"
    AREA_RATIO = "area_ratio"


@dataclass
class RunSummary:
    experiment: str
    output_dir: Path
    artifacts: List[str] = field(default_factory=list)
    config_hash: str = ""


def _draw(config: ExperimentConfig, draw: int, antennas: int) -> ChannelSet:
    return draw_channels(
        config.network(),
        config.fading(),
        config.system_params(),
        seed=config.seed,
        draw=draw,
        antennas=antennas,
        elements=config.system.elements,
        blocked_direct=config.blocked_direct(default=False),
    )


def _stamp(config: ExperimentConfig, **extra: Any) -> Dict[str, Any]:
    stamp: Dict[str, Any] = {"config_hash": config_hash(config), "seed": config.seed}
    stamp.update(extra)
    return stamp


def _dump_channels(config: ExperimentConfig, channels: ChannelSet, out: Path) -> str:
    data = {**channelset_to_dict(channels), **_stamp(config)}
    return dump_json(data, out / "channels.json").name


def run_region(config: ExperimentConfig, out: Path) -> List[str]:
    section = config.region
    if section is None:  # guarded by the schema
        return []
    if config.system.antennas != 1:
        msg = "rate regions are defined for a single-antenna BS"
        raise DomainError(msg)
    channels = _draw(config, section.draw, 1)
    channel_hash = channels_digest([channels])
    enumeration = config.enumeration(section.enumeration)
    power = config.system_params().transmit_power_w
    artifacts = [_dump_channels(config, channels, out)]
    for scheme in section.schemes:
        regions = profile_regions(
            channels, enumeration, scheme, power, section.boundary_samples, section.fdma_grid
        )
        built: Dict[ConfigMode, RateRegion] = {}
        if ConfigMode.STATIC in section.modes:
            built[ConfigMode.STATIC] = union_region(regions)
        if ConfigMode.DYNAMIC in section.modes:
            built[ConfigMode.DYNAMIC] = dynamic_region(regions)
        for mode, region in built.items():
            region.metadata.clear()
            path = out / f"region_{scheme.value}_{mode.value}.csv"
            region_to_csv(
                region,
                path,
                _stamp(
                    config,
                    channel_hash=channel_hash,
                    enumeration=enumeration.describe(),
                    profiles=len(regions),
                ),
            )
            artifacts.append(path.name)
    return artifacts


def run_deploy(config: ExperimentConfig, out: Path) -> List[str]:
    section = config.deploy
    if section is None:
        return []
    geometry = config.network()
    summary: Dict[str, Any] = {"seed": config.seed, "weights": list(section.weights), "schemes": {}}
    artifacts = []
    for scheme in section.schemes:
        problem = DeploymentProblem(
            geometry_template=geometry,
            weights=tuple(section.weights),
            scheme=scheme,
            candidate_grid=section.grid(),
            channel_draws=section.channel_draws,
            seed=config.seed,
            fading=config.fading(),
            system=config.system_params(),
            elements=config.system.elements,
            profile_search=config.enumeration(section.enumeration),
            min_rates=tuple(section.min_rates) if section.min_rates is not None else None,
            grid_bounds=section.bounds,
            blocked_direct=config.blocked_direct(default=True),
        )
        result = optimize_deployment(problem)
        table = np.array(
            [[x, v, e] for (x, v), e in zip(result.per_x, result.stderr)]
        ).reshape(-1, 3)
        path = out / f"deploy_{scheme.value}.csv"
        write_points_csv(
            path, ["x_m", "wsr_avg", "wsr_stderr"], table, _stamp(config, scheme=scheme.value)
        )
        artifacts.append(path.name)
        summary["schemes"][scheme.value] = {
            "optimum_x": result.optimum_x,
            "optimum_value": result.optimum_value,
            "classification": classify_deployment(result, geometry, config.fading()).value,
            **result.metadata,
        }
    summary["config_hash"] = config_hash(config)
    artifacts.append(dump_json(summary, out / "deploy_summary.json").name)
    return artifacts


def run_beamform(config: ExperimentConfig, out: Path) -> List[str]:
    section = config.beamform
    if section is None:
        return []
    channels = _draw(config, section.draw, config.system.antennas)
    power = config.system_params().transmit_power_w
    values = section.targets if section.mode is DesignMode.POWER_MIN else section.weights
    result = alternating_design(
        channels,
        values,
        section.mode,
        section.max_iters,
        section.tolerance,
        power=power,
        bits=config.system.bits,
        active_method=section.active_method,
        reorder=section.reorder,
    )
    stamp = _stamp(config, channel_hash=channels_digest([channels]), mode=section.mode.value)
    trace_path = result.trace.to_csv(out / "beamform_trace.csv", stamp)
    solution = {
        "beamformers": encode_complex(result.beamformers.vectors),
        "profile": profile_to_dict(result.profile),
        "order": list(result.order),
        "rates": {"r_mm": result.triple.r_mm, "r_nm": result.triple.r_nm, "r_nn": result.triple.r_nn},
        "sic_satisfied": result.sic_satisfied,
        "converged": result.converged,
        "iterations": result.iterations,
        "objective": result.objective,
        "power": result.beamformers.total_power,
        **stamp,
    }
    return [
        _dump_channels(config, channels, out),
        trace_path.name,
        dump_json(solution, out / "beamform_solution.json").name,
    ]


def cluster_beamformers(
    channels: ChannelSet, assignment: ClusterAssignment, power: float
) -> BeamformerSet:
    """Equal-power matched filters toward each cluster's summed unit-profile channel."""
    rows = channels.equivalent_rows(channels.unit_profiles())
    vectors = []
    for members in assignment.clusters:
        direction = rows[list(members)].conj().sum(axis=0)
        norm = np.linalg.norm(direction)
        if norm == 0:
            direction = np.ones(channels.num_antennas, dtype=complex)
            norm = np.linalg.norm(direction)
        vectors.append(direction / norm * np.sqrt(power / assignment.num_clusters))
    return BeamformerSet(np.vstack(vectors))


def run_cluster(config: ExperimentConfig, out: Path) -> List[str]:
    section = config.cluster
    if section is None:
        return []
    channels = _draw(config, section.draw, config.system.antennas)
    assignment = ClusterAssignment(
        tuple(tuple(c) for c in section.clusters), tuple(section.serving_ris)
    )
    beamformers = cluster_beamformers(channels, assignment, config.system_params().transmit_power_w)
    stamp = _stamp(config, channel_hash=channels_digest([channels]), design=section.design)
    solution: Dict[str, Any] = {
        "clusters": [list(c) for c in assignment.clusters],
        "beamformers": encode_complex(beamformers.vectors),
        **stamp,
    }
    if section.design == "centralized":
        design = centralized_cluster_design(
            channels,
            assignment,
            beamformers,
            gain_floors=section.gain_floors,
            penalty=section.penalty,
            bits=config.system.bits,
        )
        solution.update(
            profiles=[profile_to_dict(design.profile)],
            leakage=design.leakage,
            intra_gains={str(k): v for k, v in design.intra_gains.items()},
            shortfall={str(k): v for k, v in design.shortfall.items()},
            floors_met=design.floors_met,
        )
    else:
        distributed = distributed_cluster_design(
            channels, assignment, beamformers, bits=config.system.bits
        )
        solution.update(
            profiles=[profile_to_dict(p) for p in distributed.profiles],
            serving_ris=list(assignment.serving_ris),
            min_gains={str(k): v for k, v in distributed.min_gains.items()},
            serving_power={str(k): v for k, v in distributed.serving_power.items()},
            cross_leakage={str(k): v for k, v in distributed.cross_leakage.items()},
        )
    return [
        _dump_channels(config, channels, out),
        dump_json(solution, out / "cluster_solution.json").name,
    ]


RUNNERS: Dict[str, Callable[[ExperimentConfig, Path], List[str]]] = {
    "region": run_region,
    "deploy": run_deploy,
    "beamform": run_beamform,
    "cluster": run_cluster,
}


def _versions() -> Dict[str, str]:
    versions = {"ris-noma": __version__}
    for name in _VERSIONED:
        try:
            versions[name] = importlib_metadata.version(name)
        except importlib_metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def run(config: ExperimentConfig) -> RunSummary:
    """Run one experiment and write its artifacts plus ``manifest.json``.

    Numeric artifacts depend only on the config; wall time is recorded in the
    manifest alone.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    logger.info("experiment_started", experiment=config.experiment, seed=config.seed, config_hash=digest)
    started = time.perf_counter()
    artifacts = RUNNERS[config.experiment](config, out)
    elapsed = time.perf_counter() - started
    manifest = {
        "experiment": config.experiment,
        "config": config.model_dump(mode="json"),
        "config_hash": digest,
        "versions": _versions(),
        "wall_time_s": elapsed,
        "artifacts": sorted(artifacts),
    }
    dump_json(manifest, out / "manifest.json")
    logger.info("experiment_finished", experiment=config.experiment, artifacts=len(artifacts), wall_time_s=elapsed)
    return RunSummary(config.experiment, out, sorted(artifacts), digest)


@dataclass
class CompareReport:
    metric: CompareMetric
    files: List[str]
    containment: Dict[str, bool] = field(default_factory=dict)
    area_ratios: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric.value,
            "files": self.files,
            "containment": self.containment,
            "area_ratios": self.area_ratios,
        }


def _label(path: Path, region: RateRegion) -> str:
    return f"{path.name}[{region.scheme.value}/{region.config_mode.value}]"


def compare_regions(
    region_files: Sequence[Union[str, Path]],
    metric: Union[CompareMetric, str] = CompareMetric.CONTAINMENT,
    *,
    tolerance: float = 1e-6,
    allow_mismatch: bool = False,
) -> CompareReport:
    """Containment verdicts or area ratios between exported regions.

    ``containment`` reports, for every ordered pair, whether the first region
    contains every boundary point of the second. ``area_ratio`` reports each
    file's area relative to the first file and, per scheme, the dynamic over
    static ratio when both are present.

    Raises:
        IncompatibleArtifactsError: If the files differ in user count, power,
            or channel hash (the last unless ``allow_mismatch``)
    """
    metric = CompareMetric(metric)
    paths = [Path(p) for p in region_files]
    if not paths:
        msg = "no region files to compare"
        raise IncompatibleArtifactsError(msg)
    regions = [region_from_csv(p) for p in paths]
    first = regions[0]
    for path, region in zip(paths[1:], regions[1:]):
        if region.num_users != first.num_users:
            msg = f"{path} has K={region.num_users}, {paths[0]} has K={first.num_users}"
            raise IncompatibleArtifactsError(msg)
        if not np.isclose(region.total_power, first.total_power, rtol=1e-12, atol=0.0):
            msg = f"{path} was computed at a different transmit power"
            raise IncompatibleArtifactsError(msg)
        if region.metadata.get("channel_hash") != first.metadata.get("channel_hash"):
            if not allow_mismatch:
                msg = f"{path} and {paths[0]} were computed on different channels"
                raise IncompatibleArtifactsError(msg)
            logger.warning("channel_hash_mismatch_allowed", file=str(path))

    report = CompareReport(metric, [str(p) for p in paths])
    labels = [_label(p, r) for p, r in zip(paths, regions)]
    if metric is CompareMetric.CONTAINMENT:
        for i, outer in enumerate(regions):
            for j, inner in enumerate(regions):
                if i == j and len(regions) > 1:
                    continue
                verdict = all(contains(outer, point, tolerance) for point in inner.boundary)
                report.containment[f"{labels[i]} >= {labels[j]}"] = verdict
        return report

    base = region_area(first)
    for label, region in zip(labels, regions):
        report.area_ratios[f"{label} / {labels[0]}"] = region_area(region) / base if base > 0 else float("nan")
    by_scheme: Dict[str, Dict[ConfigMode, RateRegion]] = {}
    for region in regions:
        by_scheme.setdefault(region.scheme.value, {})[region.config_mode] = region
    for scheme, modes in sorted(by_scheme.items()):
        if ConfigMode.STATIC in modes and ConfigMode.DYNAMIC in modes:
            static_area = region_area(modes[ConfigMode.STATIC])
            report.area_ratios[f"{scheme}: dynamic / static"] = (
                region_area(modes[ConfigMode.DYNAMIC]) / static_area if static_area > 0 else float("nan")
            )
    return report
