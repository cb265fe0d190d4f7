//! Lock-free shared parameters for multi-threaded negative sampling.
//!
//! Workers read and write rows through relaxed atomic loads and stores, so
//! individual scalars are never torn, but concurrent read-modify-write of the
//! same row may lose updates. Collisions are rare because each step touches
//! only `negatives + 2` rows.

use std::sync::atomic::{AtomicU64, Ordering};

use super::sgd::ParamStore;

/// Reinterprets an exclusively borrowed `f64` slice as atomics.
fn as_atomic(v: &mut [f64]) -> &[AtomicU64] {
    assert_eq!(std::mem::size_of::<AtomicU64>(), std::mem::size_of::<f64>());
    assert_eq!(v.as_ptr() as usize % std::mem::align_of::<AtomicU64>(), 0, "misaligned parameter buffer");
    // SAFETY: same size, alignment checked above, and the `&mut` borrow
    // guarantees no non-atomic access for the lifetime of the returned slice.
    unsafe { &*(v as *mut [f64] as *const [AtomicU64]) }
}

#[derive(Clone, Copy)]
pub(crate) struct SharedParams<'a> {
    dim: usize,
    center: &'a [AtomicU64],
    context: &'a [AtomicU64],
}

impl<'a> SharedParams<'a> {
    pub(crate) fn new(dim: usize, center: &'a mut [f64], context: &'a mut [f64]) -> Self {
        SharedParams { dim, center: as_atomic(center), context: as_atomic(context) }
    }

    #[inline]
    fn read(src: &[AtomicU64], dim: usize, i: usize, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&src[i * dim..(i + 1) * dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn add(dst: &[AtomicU64], dim: usize, i: usize, delta: &[f64]) {
        for (a, d) in dst[i * dim..(i + 1) * dim].iter().zip(delta) {
            let x = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((x + d).to_bits(), Ordering::Relaxed);
        }
    }
}

impl ParamStore for SharedParams<'_> {
    fn read_center(&self, i: usize, out: &mut [f64]) {
        Self::read(self.center, self.dim, i, out)
    }

    fn read_context(&self, i: usize, out: &mut [f64]) {
        Self::read(self.context, self.dim, i, out)
    }

    fn add_center(&mut self, i: usize, delta: &[f64]) {
        Self::add(self.center, self.dim, i, delta)
    }

    fn add_context(&mut self, i: usize, delta: &[f64]) {
        Self::add(self.context, self.dim, i, delta)
    }
}
