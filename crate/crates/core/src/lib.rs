//! Imprecise-probability uncertainty toolkit.
//!
//! First-order uncertainty is carried by precise distributions ([`PrecisePmf`]),
//! second-order uncertainty by probability intervals, finite credal sets and
//! possibility assignments. The modules here are pure and offline:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`types`] | validated domain types shared by everything else |
//! | [`coherence`] | axiom / interval verifiers, possibility normalization |
//! | [`mmi`] | Maximum Mean Imprecision (exact, upper bound, possibility forms) |
//! | [`scores`] | entropy, Bernoulli entropy, CE = H + KL, multiplicative combination |
//! | [`decision`] | precise argmax, maximin, maximax, Bayes expected utility |
//! | [`synth`] | rotation / cyclic-shift ICL tasks with case noise and exact answer sets |
//! | [`eval`] | AUROC, concordance index, API cost ledger |
//!
//! ```
//! use ipelicit_core::{CandidateSet, CredalSet, build_pmf, mmi};
//!
//! let ys = CandidateSet::new(["England", "Wales"], false).unwrap();
//! let a = build_pmf(&ys, &[0.2, 0.8], false).unwrap();
//! let b = build_pmf(&ys, &[0.5, 0.5], false).unwrap();
//! let credal = CredalSet::new(vec![a, b], vec!["m1".into(), "m2".into()]).unwrap();
//! let exact = mmi::exact_mmi_credal(&credal).unwrap();
//! assert!((exact.value - 0.3).abs() < 1e-12);
//! ```

pub mod coherence;
pub mod decision;
mod error;
pub mod eval;
pub mod mmi;
pub mod par;
pub mod scores;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use par::ExecPolicy;
pub use types::{
    build_pmf, fold_answer, interval_from_credal, CandidateSet, CredalSet, PossibilityAssignment, PrecisePmf,
    ProbabilityIntervalSet, QaRecord, PROB_TOL,
};
