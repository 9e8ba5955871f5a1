"""Overloaded MISO broadcast simulator: TP/PP rate-splitting and SDMA
strategies, DoF analysis, and WMMSE-based ergodic sum rate optimization."""

from .config import SystemConfig, theta_zero_array
from .channel import (
    ChannelRealization,
    ChannelSampleSet,
    csit_error_variance,
    derive_seed,
    draw_channel,
    draw_conditional_samples,
    rng_from,
)
from .ratemodel import (
    PrecoderSet,
    RateReport,
    average_rate,
    ergodic_sum_rate,
    sinr_common,
    sinr_private,
    sinr_zero_pp,
    snr_zero_tp,
    stream_sinr_samples,
    user_rates_pp,
    user_rates_tp,
)
from .dof import (
    DegenerateChannelError,
    DofPowerAllocation,
    DofRegion,
    MembershipReport,
    dof_gain_pp_over_tp,
    dof_pp,
    dof_region,
    dof_tp,
    low_complexity_precoders,
    measure_dof_slope,
    region_contains,
    simulate_low_complexity_esr,
    sum_dof_upper_bound,
)
from .qcqp import (
    KktReport,
    QcqpProblem,
    QcqpSolution,
    QuadExpr,
    parse_dump,
    solve,
    verify_kkt,
)
from .wmmse import (
    AoTrace,
    CoeffBundle,
    OptResult,
    PrecoderLayout,
    WmmseState,
    assemble_coefficients,
    awmse,
    build_pp_subproblem,
    init_precoders,
    mmse_equalizer,
    mmse_state,
    mmse_weight,
    mse,
    rate_wmmse_check,
    solve_pp_asr,
    solve_sdma_variant,
    solve_tp_asr,
)
from .harness import (
    STRATEGIES,
    ExperimentSpec,
    SweepResult,
    SweepRow,
    bootstrap_margin,
    emit_results,
    load_results,
    result_schema,
    run_dof_report,
    run_experiment,
    run_matched_zero_rate_comparison,
    run_strategies_on_use,
    validate_results,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
