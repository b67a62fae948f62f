//! Exact oracles, equation residuals and closed-form checks.

mod agreement;
mod checks;
mod closed_form;
mod grid_bayes;
mod kalman;
mod residual;
mod sweep;

pub use agreement::{
    change_detection_agreement, kalman_agreement, AgreementConfig, ChangeDetectionAgreement,
    KalmanAgreement,
};
pub use checks::{
    ks_ablation_report, residual_suite, run_check, CheckParams, Verdict, CHECK_NAMES,
    NEGATIVE_CONTROLS,
};
pub use closed_form::{
    dufresne_check, dufresne_target, kazamaki_gap_check, kazamaki_partial_sum, revuz_yor_energy,
    DufresneCheck, HittingRow, KazamakiCheck, RevuzYorEnergy, HITTING_BAND,
};
pub use grid_bayes::{change_detection_oracle, GridPosterior, GridTrajectory};
pub use kalman::{
    kalman_bucy_oracle, stationary_covariance, KalmanTrajectory, LinearGaussian, PSD_TOLERANCE,
};
pub use residual::{
    ks_residual, residual_report, zakai_residual, Equation, ObservationSource, ResidualConfig,
    ResidualReport, ResidualStats,
};
pub use sweep::{
    independence_identity_check, local_boundedness_sweep, BoundednessSweep, IndependenceCheck,
};
