"""Python bindings for the mmosim simulation core."""

from ._core import (
    ConfigError,
    __version__,
    brute_force_select,
    coverage,
    covered_tiles,
    expand_sweeps,
    greedy_assignment,
    greedy_select,
    jc,
    lookup,
    migration_time,
    optimal_assignment,
    player_count,
    preset_text,
    presets,
    run,
    run_preset,
    sample_migration_times,
    score_select,
    slow_start_rounds,
    vs_size_bytes,
)

__all__ = [
    "ConfigError",
    "__version__",
    "brute_force_select",
    "coverage",
    "covered_tiles",
    "expand_sweeps",
    "greedy_assignment",
    "greedy_select",
    "jc",
    "lookup",
    "migration_time",
    "optimal_assignment",
    "player_count",
    "preset_text",
    "presets",
    "run",
    "run_preset",
    "sample_migration_times",
    "score_select",
    "slow_start_rounds",
    "vs_size_bytes",
]
