//! Curriculum-regularized training for a small encoder-decoder describer.
//!
//! The crate bundles everything a desk-scale study needs:
//!
//! * [`schedules`]: epoch-indexed ramps for input-noise sigma and dropout rate.
//! * [`activation`]: Mish (plus ReLU/GELU baselines) with analytic derivatives.
//! * [`tensor`]: a dense tensor type and a single-use reverse-mode tape.
//! * [`model`]: the transformer encoder-decoder with noise and dropout sites.
//! * [`metrics`]: BLEU@4, ROUGE-L, CIDEr-D, Div-n and RE-4 caption scores.
//! * [`datasynth`]: a deterministic synthetic "feature sequence to caption" task.
//! * [`experiment`]: the training recipe, evaluation and ablation runners.

pub mod activation;
pub mod datasynth;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod schedules;
pub mod tensor;

pub use activation::ActivationKind;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, TrainingLog};
pub use metrics::{corpus_report, CaptionSet, MetricReport, MetricRow};
pub use model::{Batch, Curriculum, DescriberModel, ModelConfig, StepRngs};
pub use rng::{Purpose, RngStreams};
pub use schedules::{DropoutMode, DropoutSchedule, NoiseMode, NoiseSchedule};
pub use tensor::{Tape, Tensor, Var};
