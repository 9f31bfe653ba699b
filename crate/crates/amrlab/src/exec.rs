//! Trial executors: sequential or thread-parallel, with a wall clock.

use std::time::Instant;

use amrlab_core::refine::{Executor, Trial, TrialJob};
use amrlab_core::Result;

/// Runs up to `jobs` trials at once on scoped threads. With
/// `deterministic`, runs one at a time and reports zero timings.
#[derive(Debug)]
pub struct Runner {
    jobs: usize,
    start: Option<Instant>,
}

impl Runner {
    pub fn new(jobs: usize, deterministic: bool) -> Self {
        if deterministic {
            Runner { jobs: 1, start: None }
        } else {
            Runner { jobs: jobs.max(1), start: Some(Instant::now()) }
        }
    }

    pub fn deterministic() -> Self {
        Self::new(1, true)
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }
}

impl Executor for Runner {
    fn batch_size(&self) -> usize {
        self.jobs
    }

    fn run(&self, job: &TrialJob<'_>, pcts: &[f64]) -> Vec<Result<Trial>> {
        if self.jobs == 1 || pcts.len() < 2 {
            return pcts.iter().map(|&p| job(p)).collect();
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = pcts.iter().map(|&p| s.spawn(move || job(p))).collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e))).collect()
        })
    }

    fn now(&self) -> f64 {
        self.start.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}
