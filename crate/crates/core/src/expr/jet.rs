//! Second-order forward-mode jets: value, gradient and full Hessian.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct Jet {
    pub v: f64,
    pub g: Vec<f64>,
    /// Row-major `n × n`.
    pub h: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, n: usize) -> Self {
        Self {
            v,
            g: vec![0.0; n],
            h: vec![0.0; n * n],
        }
    }

    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut j = Self::constant(v, n);
        j.g[i] = 1.0;
        j
    }

    pub fn neg(mut self) -> Self {
        self.v = -self.v;
        self.g.iter_mut().for_each(|x| *x = -*x);
        self.h.iter_mut().for_each(|x| *x = -*x);
        self
    }

    pub fn add(mut self, o: &Jet) -> Self {
        self.v += o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a += b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a += b);
        self
    }

    pub fn sub(mut self, o: &Jet) -> Self {
        self.v -= o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a -= b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a -= b);
        self
    }

    pub fn mul(&self, o: &Jet) -> Self {
        let n = self.g.len();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                h[k] = self.v * o.h[k]
                    + o.v * self.h[k]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        Self {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| self.v * b + o.v * a).collect(),
            h,
        }
    }

    /// Composes a scalar function with value `f0`, first derivative `f1` and
    /// second derivative `f2` at `self.v`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.g.len();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let curv = if f2 == 0.0 { 0.0 } else { f2 * self.g[i] * self.g[j] };
                let lin = if f1 == 0.0 { 0.0 } else { f1 * self.h[k] };
                h[k] = lin + curv;
            }
        }
        Self {
            v: f0,
            g: self.g.iter().map(|a| if f1 == 0.0 { 0.0 } else { f1 * a }).collect(),
            h,
        }
    }
}
