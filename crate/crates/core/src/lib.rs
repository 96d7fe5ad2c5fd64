//! Speaker diarization scoring, hypothesis selection, and simulation.
//!
//! The toolkit scores diarization hypotheses (DER with its
//! MISS/FA/SpkErr decomposition under an optimal speaker mapping),
//! detects poorly separated utterances from separation-based diarization
//! output, selects per utterance between clustering-based and
//! separation-based results, evaluates detection quality, computes
//! separation metrics (Si-SNR, uPIT), and simulates corpora that
//! reproduce the characteristic failure modes at desk scale.
//!
//! All timeline arithmetic is exact (integer centiseconds); every
//! operation is a pure function over immutable inputs, so corpus-level
//! parallelism is safe and results never depend on worker count.

pub mod assignment;
pub mod cli;
pub mod der;
pub mod rttm;
pub mod selector;
pub mod sep;
pub mod sim;
pub mod strategies;
pub mod timeline;
pub mod wav;
