//! Neumann–Poincaré spectra of closed curves and surfaces, inversion in a
//! sphere, and certification of negative NP eigenvalues.

pub mod certify;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod layerpot;
pub mod spectral;

pub use error::{Error, Result};

/// Cap the worker count of assembly and dense linear algebra. Effective
/// only before the first parallel operation of the process.
pub fn configure_threads(threads: usize) -> Result<()> {
    let threads = threads.max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Unsupported(format!("thread pool already initialized: {e}")))?;
    faer::set_global_parallelism(if threads == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(threads)
    });
    Ok(())
}
