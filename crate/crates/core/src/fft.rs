//! n-dimensional complex FFT over row-major buffers, built on `rustfft`.
//!
//! Plans are cached globally per (length, direction). Transforms are
//! unnormalized here; the field layer applies the `1/N` forward scaling.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanKey = (usize, bool);

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// Unnormalized FFT along every axis of a row-major nd buffer.
///
/// `forward = false` runs the conjugate (inverse) transform; composing the
/// two multiplies the data by the total point count.
pub fn fft_nd(data: &mut [Complex64], sizes: &[usize], forward: bool) {
    debug_assert_eq!(data.len(), sizes.iter().product::<usize>());
    let dim = sizes.len();
    for ax in 0..dim {
        let n = sizes[ax];
        let stride: usize = sizes[ax + 1..].iter().product();
        let fft = plan(n, forward);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        if stride == 1 {
            // contiguous lanes: rustfft batches over chunks of length n
            for lane in data.chunks_exact_mut(n) {
                fft.process_with_scratch(lane, &mut scratch);
            }
        } else {
            let block = n * stride;
            let mut lane = vec![Complex64::default(); n];
            for blk in data.chunks_exact_mut(block) {
                for r in 0..stride {
                    for (j, v) in lane.iter_mut().enumerate() {
                        *v = blk[j * stride + r];
                    }
                    fft.process_with_scratch(&mut lane, &mut scratch);
                    for (j, v) in lane.iter().enumerate() {
                        blk[j * stride + r] = *v;
                    }
                }
            }
        }
    }
}
