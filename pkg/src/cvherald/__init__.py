"""Truncated Fock-space simulation of homodyne-heralded photonic circuits."""

from .states import (
    BeamSplitterSpec,
    DensityMatrix,
    DimensionMismatchError,
    ModeState,
    MultiModeState,
    TruncationLossError,
    apply_beam_splitter,
    apply_displacement,
    apply_phase,
    coherent_state,
    fidelity_with_pure,
    make_fock,
    partial_trace,
    pure_density,
    tensor_product,
)
from .measurement import (
    QuadratureConvergenceError,
    QuadratureKind,
    Window,
    collapse_windowed,
    collapse_windows,
    epr_project_ideal,
    epr_project_physical,
    overlap_p,
    overlap_x,
    project_fock,
    project_sharp,
)
from .protocols import (
    DegenerateResourceError,
    GeneralPrepParams,
    GridTooNarrowError,
    HeraldRecord,
    PipelineParams,
    ResourceState,
    feedforward_alpha,
    herald_x5,
    photon_subtract_analytic,
    photon_subtract_simulated,
    prep_single_photon_general,
    remove_vacuum_displace,
    remove_vacuum_feedforward,
    two_photon_pipeline_averaged,
    two_photon_pipeline_conditional,
)
from .gates import (
    NsgParams,
    ProcessProbe,
    nsg_circuit,
    nsg_ideal_reference,
    nsg_process_fidelity,
)
from .sweep import (
    OptimizationResult,
    SweepRow,
    nelder_mead,
    optimize_multistart,
    optimize_transmittances,
    sweep_window,
)

__all__ = [name for name in dir() if not name.startswith("_")]
