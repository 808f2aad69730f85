//! Experiments built from the solvers: epsilon sweeps against the planar
//! limits, sign probes and threshold bisection, phase tables, concavity of
//! the level in the mass, and randomized property checks.
//!
//! Every experiment is deterministic: multi-start positions are fixed, and
//! randomized checks draw from a seeded ChaCha8 stream. Independent rows run
//! on up to `workers` scoped threads and are collected by index.

mod existence;
mod properties;
mod sweep;

pub use existence::{
    analytic_sign, concavity_check, find_threshold, gaussian_starts, grid_ground_state, grid_sign,
    phase_table, AnalyticCutoffs, ConcavityReport, Expected, GridModel, PhaseCell, Probe,
    ProbeSettings, StartSettings, ThresholdReport, VertexFamily,
};
pub use properties::{
    check_properties, discrepancy_sequence, extension_ratios, gn_ratios, norm_gaps, trace_ratios,
    PropertyRow, PropertySettings,
};
pub use sweep::{
    sweep_epsilon, trend_verdict, ReferenceSettings, ReferenceSummary, SweepConfig, SweepFamily,
    SweepOutput, SweepReport, SweepRow, TrendVerdict,
};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Maps `f` over `items` on up to `workers` threads; results keep the input
/// order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(usize, &T) -> R + Sync,
) -> Vec<R> {
    let threads = workers.min(items.len());
    if threads <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                *slots[i].lock().expect("worker panicked") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("worker panicked")
                .expect("every slot filled")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        for workers in [0, 1, 3, 64] {
            let out = par_map(&items, workers, |i, x| (i as u64) * 100 + x * x);
            assert_eq!(
                out,
                items.iter().map(|x| x * 100 + x * x).collect::<Vec<_>>()
            );
        }
    }
}
