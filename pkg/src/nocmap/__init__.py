"""Cycle-level NoC simulation of a mesh DNN accelerator and travel-time task mapping."""

from .accelerator import DeviceConfig, LayerRunResult, TravelRecord, run_layer
from .experiments import ScenarioConfig, config_from_dict, emit_csv, load_config, parse_csv, run_scenario, run_sweep
from .mapping import (
    MappingPlan,
    StaticLatencyParams,
    map_distance_based,
    map_post_run,
    map_row_major,
    map_static_latency,
    map_with_sampling_window,
    run_strategy,
    solve_inverse_time_allocation,
)
from .metrics import LayerSummary, ModelReport, improvement, unevenness
from .noc import Network, Packet, PacketKind, SimConfig
from .topology import ARCHITECTURES, Topology, TopologyConfig, build_topology, classify_distances
from .workload import LayerKind, LayerSpec, channel_variant, kernel_variant, lenet_preset, task_count

__version__ = "0.1.0"
