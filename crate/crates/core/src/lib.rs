//! Hermite eigenstructure of rotation-invariant kernels on Gaussian data.
//!
//! Given the second-moment spectrum of a dataset and a kernel's on-sphere
//! level coefficients, the crate builds the Hermite eigensystem
//! (`λ_α = c_{|α|} ∏ γ_i^{α_i}`, eigenfunctions `h_α` in PCA coordinates),
//! decomposes targets in that basis and feeds the result to the KRR
//! eigenframework to predict learning curves. Empirical KRR curves,
//! empirical kernel spectra and exact Mehler eigensystems are provided
//! for checking the predictions.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is on
//! (the default); every entry point taking an [`Execution`] also runs
//! sequentially with identical results.

pub mod data;
pub mod decomp;
pub mod eigensystem;
pub mod error;
pub mod framework;
pub mod hermite;
pub mod io;
pub mod kernels;
pub mod krr;
pub mod linalg;
pub mod mehler;
pub mod par;
pub mod pipeline;
pub mod quadrature;
pub mod spectral;

pub use data::{
    estimate_covariance, normalize_samples, powerlaw_target, sample_gaussian, zca_whiten, CovarianceSpectrum,
    DataMatrix, PreprocessConfig, ZcaNorm,
};
pub use decomp::{decompose_from_dataset, gram_schmidt_decompose, grf, DecompositionMethod, TargetDecomposition};
pub use eigensystem::{build_eigensystem, degree_major_ordering, evaluate_eigensystem, HermiteEigensystem, Mode};
pub use error::{Error, Result};
pub use framework::{learning_curve_prediction, predict_risk, solve_kappa, RiskPrediction, TaskSpectrum};
pub use hermite::{hermite_1d, multi_hermite, pca_coordinates, MultiIndex};
pub use kernels::{kernel_matrix, level_coefficients, KernelSpec, LevelCoefficients};
pub use krr::{
    empirical_learning_curve, empirical_learning_curves, krr_fit_predict, sample_complexity, CurveProtocol,
    LearningCurveResult, SampleComplexity,
};
pub use mehler::{mehler_parameters, rate_probe, MehlerEigensystem, ProbeFamily, RateReport};
pub use par::Execution;
pub use pipeline::{predict_learning_curve, PredictSettings, PredictionReport};
pub use spectral::{check_hea, empirical_eigensystem, spectral_bins, subspace_overlap, HeaCheckConfig, OverlapReport};
