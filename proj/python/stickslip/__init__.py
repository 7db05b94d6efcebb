"""Spring-block stick-slip lattice, OFC automaton, event statistics,
granular sonification and light-pattern scoring."""

from ._core import (
    AestheticScore,
    EventCatalog,
    LatticeConfig,
    StickSlipError,
    Vec2,
    World,
    activity_series,
    birkhoff,
    build_corpus_json,
    ccdf,
    complexity_score,
    default_settings_json,
    descriptor_centroid,
    descriptor_periodicity,
    fit_power_law,
    ingest_command,
    net_force,
    ofc_relax,
    order_score,
    oscillate,
    power_spectrum,
    run_dynamic,
    run_ofc,
    segment_grains,
    spectral_slope,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
