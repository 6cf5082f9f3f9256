//! Parameter access for the SGD kernel.
//!
//! The kernel is written once against [`ParamAccess`]. Single-threaded
//! training goes through [`ExclusiveParams`] (plain slices); multi-threaded
//! training goes through [`SharedParams`], which views the same storage as
//! relaxed atomics so that workers can race on updates without undefined
//! behaviour.

use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) const ADAGRAD_EPS: f64 = 1e-8;

pub(crate) trait ParamAccess {
    fn read_input(&self, row: usize, out: &mut [f64]);

    fn context_dot(&self, word: usize, v: &[f64]) -> f64;

    /// Reads context vector `word` into `grad_center` scaled by `coeff`, then
    /// applies the AdaGrad step for gradient `coeff * center`.
    fn update_context(
        &mut self,
        word: usize,
        coeff: f64,
        center: &[f64],
        lr: f64,
        grad_center: &mut [f64],
    );

    fn update_input(&mut self, row: usize, grad: &[f64], lr: f64);
}

#[inline]
fn adagrad(param: f64, acc: f64, g: f64, lr: f64) -> (f64, f64) {
    let acc = acc + g * g;
    (param - lr * g / (acc + ADAGRAD_EPS).sqrt(), acc)
}

pub(crate) struct ExclusiveParams<'a> {
    pub dim: usize,
    pub input: &'a mut [f64],
    pub input_acc: &'a mut [f64],
    pub context: &'a mut [f64],
    pub context_acc: &'a mut [f64],
}

impl ParamAccess for ExclusiveParams<'_> {
    #[inline]
    fn read_input(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.input[row * self.dim..(row + 1) * self.dim]);
    }

    #[inline]
    fn context_dot(&self, word: usize, v: &[f64]) -> f64 {
        crate::math::dot(&self.context[word * self.dim..(word + 1) * self.dim], v)
    }

    #[inline]
    fn update_context(
        &mut self,
        word: usize,
        coeff: f64,
        center: &[f64],
        lr: f64,
        grad_center: &mut [f64],
    ) {
        let range = word * self.dim..(word + 1) * self.dim;
        let ctx = &mut self.context[range.clone()];
        let acc = &mut self.context_acc[range];
        for i in 0..ctx.len() {
            grad_center[i] += coeff * ctx[i];
            let (p, a) = adagrad(ctx[i], acc[i], coeff * center[i], lr);
            ctx[i] = p;
            acc[i] = a;
        }
    }

    #[inline]
    fn update_input(&mut self, row: usize, grad: &[f64], lr: f64) {
        let range = row * self.dim..(row + 1) * self.dim;
        let v = &mut self.input[range.clone()];
        let acc = &mut self.input_acc[range];
        for i in 0..v.len() {
            let (p, a) = adagrad(v[i], acc[i], grad[i], lr);
            v[i] = p;
            acc[i] = a;
        }
    }
}

const _: () = assert!(std::mem::size_of::<AtomicU64>() == std::mem::size_of::<f64>());
const _: () = assert!(std::mem::align_of::<AtomicU64>() == std::mem::align_of::<f64>());

#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
pub(crate) fn as_atomic(values: &mut [f64]) -> &[AtomicU64] {
    // SAFETY: AtomicU64 and f64 share size and alignment (checked above),
    // and the exclusive borrow guarantees no non-atomic access while the
    // returned view is alive.
    unsafe { std::slice::from_raw_parts(values.as_mut_ptr() as *const AtomicU64, values.len()) }
}

#[derive(Clone, Copy)]
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
pub(crate) struct SharedParams<'a> {
    pub dim: usize,
    pub input: &'a [AtomicU64],
    pub input_acc: &'a [AtomicU64],
    pub context: &'a [AtomicU64],
    pub context_acc: &'a [AtomicU64],
}

#[inline]
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
fn load(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(Ordering::Relaxed))
}

#[inline]
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
fn store(a: &AtomicU64, v: f64) {
    a.store(v.to_bits(), Ordering::Relaxed)
}

impl ParamAccess for SharedParams<'_> {
    #[inline]
    fn read_input(&self, row: usize, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.input[row * self.dim..]) {
            *o = load(a);
        }
    }

    #[inline]
    fn context_dot(&self, word: usize, v: &[f64]) -> f64 {
        let ctx = &self.context[word * self.dim..(word + 1) * self.dim];
        let mut acc = [0.0f64; 4];
        let chunks = v.len() / 4;
        for i in 0..chunks {
            let j = 4 * i;
            acc[0] += load(&ctx[j]) * v[j];
            acc[1] += load(&ctx[j + 1]) * v[j + 1];
            acc[2] += load(&ctx[j + 2]) * v[j + 2];
            acc[3] += load(&ctx[j + 3]) * v[j + 3];
        }
        let mut tail = 0.0;
        for j in 4 * chunks..v.len() {
            tail += load(&ctx[j]) * v[j];
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    #[inline]
    fn update_context(
        &mut self,
        word: usize,
        coeff: f64,
        center: &[f64],
        lr: f64,
        grad_center: &mut [f64],
    ) {
        let range = word * self.dim..(word + 1) * self.dim;
        let ctx = &self.context[range.clone()];
        let acc = &self.context_acc[range];
        for i in 0..ctx.len() {
            let c = load(&ctx[i]);
            grad_center[i] += coeff * c;
            let (p, a) = adagrad(c, load(&acc[i]), coeff * center[i], lr);
            store(&ctx[i], p);
            store(&acc[i], a);
        }
    }

    #[inline]
    fn update_input(&mut self, row: usize, grad: &[f64], lr: f64) {
        let range = row * self.dim..(row + 1) * self.dim;
        let v = &self.input[range.clone()];
        let acc = &self.input_acc[range];
        for i in 0..v.len() {
            let (p, a) = adagrad(load(&v[i]), load(&acc[i]), grad[i], lr);
            store(&v[i], p);
            store(&acc[i], a);
        }
    }
}
