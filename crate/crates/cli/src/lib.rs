//! Command-line front end: configuration, the experiment pipeline and the
//! oracle suite.

pub mod config;
pub mod experiment;
pub mod oracle_suite;

/// Sizes the global rayon pool from `WEAKKAM_THREADS` if set. Calling it
/// twice is harmless.
pub fn init_threads() {
    if let Some(n) = std::env::var("WEAKKAM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
