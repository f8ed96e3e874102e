"""Joint active and passive beamforming for multi-antenna RIS-NOMA."""

from ris_noma.beamforming.active import (
    ActiveMethod,
    ActiveSolution,
    active_power_min,
    quasi_degraded,
    solve_active_power_min,
    wsr_active_step,
)
from ris_noma.beamforming.alternating import (
    AlternatingResult,
    AlternatingTrace,
    DesignMode,
    TraceRow,
    alternating_design,
)
from ris_noma.beamforming.clusters import (
    CentralizedDesign,
    ClusterAssignment,
    DistributedDesign,
    centralized_cluster_design,
    cluster_noma_rates,
    distributed_cluster_design,
)
from ris_noma.beamforming.passive import (
    PassiveObjective,
    PassiveResult,
    coordinate_ascent,
    passive_step,
    passive_update,
)
from ris_noma.beamforming.sinr import (
    BeamformerSet,
    SicRateTriple,
    sic_condition,
    sic_rate_triple,
)

__all__ = [
    "ActiveMethod",
    "ActiveSolution",
    "AlternatingResult",
    "AlternatingTrace",
    "BeamformerSet",
    "CentralizedDesign",
    "ClusterAssignment",
    "DesignMode",
    "DistributedDesign",
    "PassiveObjective",
    "PassiveResult",
    "SicRateTriple",
    "TraceRow",
    "active_power_min",
    "alternating_design",
    "centralized_cluster_design",
    "cluster_noma_rates",
    "coordinate_ascent",
    "distributed_cluster_design",
    "passive_step",
    "passive_update",
    "quasi_degraded",
    "sic_condition",
    "sic_rate_triple",
    "solve_active_power_min",
    "wsr_active_step",
]
