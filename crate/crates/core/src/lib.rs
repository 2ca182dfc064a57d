//! Sub-sampled Newton optimization with eigenvalue-thresholded scaling.
//!
//! [`newsamp::run`] minimizes an [`Objective`] with iterations
//! θ ← P_C(θ − η Q ∇f(θ)), where Q inverts the top r eigenpairs of a
//! sub-sampled Hessian and treats the rest of the spectrum as flat.

pub mod baselines;
pub mod data;
pub mod error;
pub mod linalg;
pub mod newsamp;
pub mod numeric;
pub mod problems;
pub mod sampling;
pub mod theory;
pub mod trace;

pub use baselines::{reference_solution, run_baseline, BaselineConfig, BaselineMethod, LineStep};
pub use data::{generate_spiked, generate_spiked_with_truth, LabelModel, SpikedModelSpec};
pub use error::{Error, Result};
pub use linalg::{ScalingMatrix, SymEigen, SymMatrix};
pub use newsamp::{ConvexSet, NewSampConfig, StepMode};
pub use problems::{Dataset, GlmLink, Objective, ObjectiveKind, ProblemConstants, SvmLoss};
pub use sampling::{SampleScheme, SchemeFamily};
pub use theory::{CoefficientReport, CompositeBound, PhaseSplit};
pub use trace::{Record, Termination, Trace};

pub use nalgebra::{DMatrix, DVector};
