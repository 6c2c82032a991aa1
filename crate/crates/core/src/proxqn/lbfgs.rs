use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Limited-memory BFGS approximation `B` of the Hessian in compact form
///
/// ```text
/// B = sigma I - W M^{-1} W^T,  W = [sigma S, Y],
/// M = [[sigma S^T S, L], [L^T, -D]]
/// ```
///
/// where `L` is the strictly lower triangle of `S^T Y` and `D` its diagonal.
/// `sigma = <y, y> / <s, y>` of the newest pair (1 with no pairs).
#[derive(Debug, Clone)]
pub struct LbfgsState {
    memory: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    sigma: f64,
    /// Pairs rejected by the curvature test.
    pub skipped: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LbfgsState {
    pub fn new(memory: usize) -> Self {
        LbfgsState {
            memory,
            s: VecDeque::with_capacity(memory),
            y: VecDeque::with_capacity(memory),
            sigma: 1.0,
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
        self.sigma = 1.0;
    }

    /// Stores `(s, y)` unless `<s, y> <= 1e-12 ||s|| ||y||`. Returns whether
    /// the pair was kept.
    pub fn update(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        if self.memory == 0 {
            return false;
        }
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        let ss = dot(&s, &s);
        if !(sy > 1e-12 * (ss * yy).sqrt()) || !sy.is_finite() {
            self.skipped += 1;
            return false;
        }
        if self.s.len() == self.memory {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.sigma = yy / sy;
        true
    }

    fn compact(&self) -> (Vec<Vec<f64>>, DMatrix<f64>) {
        let k = self.s.len();
        let sigma = self.sigma;
        let mut w: Vec<Vec<f64>> = self.s.iter().map(|s| s.iter().map(|v| sigma * v).collect()).collect();
        w.extend(self.y.iter().cloned());
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = sigma * dot(&self.s[i], &self.s[j]);
            }
            for j in 0..k {
                if i > j {
                    let l = dot(&self.s[i], &self.y[j]);
                    m[(i, k + j)] = l;
                    m[(k + j, i)] = l;
                }
            }
            m[(k + i, k + i)] = -dot(&self.s[i], &self.y[i]);
        }
        (w, m)
    }

    fn w_t(w: &[Vec<f64>], v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(w.len(), w.iter().map(|c| dot(c, v)))
    }

    fn w_times(w: &[Vec<f64>], c: &DVector<f64>, out: &mut [f64], scale: f64) {
        for (col, &ci) in w.iter().zip(c.iter()) {
            for (o, wv) in out.iter_mut().zip(col) {
                *o += scale * ci * wv;
            }
        }
    }

    /// `B v`.
    pub fn apply_b(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = v.iter().map(|x| self.sigma * x).collect();
        if self.is_empty() {
            return Ok(out);
        }
        let (w, m) = self.compact();
        let rhs = Self::w_t(&w, v);
        let c = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular L-BFGS middle matrix".into()))?;
        Self::w_times(&w, &c, &mut out, -1.0);
        Ok(out)
    }

    /// `(I + gamma B)^{-1} v` through the Woodbury identity:
    /// with `c = 1 + gamma sigma`,
    /// `(1/c) v + (1/c^2) W (M/gamma - W^T W / c)^{-1} W^T v`.
    pub fn apply_inv_shifted(&self, gamma: f64, v: &[f64]) -> Result<Vec<f64>> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("shift must be positive, got {gamma}")));
        }
        let c = 1.0 + gamma * self.sigma;
        let mut out: Vec<f64> = v.iter().map(|x| x / c).collect();
        if self.is_empty() {
            return Ok(out);
        }
        let (w, m) = self.compact();
        let k2 = w.len();
        let mut inner = m / gamma;
        for i in 0..k2 {
            for j in 0..k2 {
                inner[(i, j)] -= dot(&w[i], &w[j]) / c;
            }
        }
        let rhs = Self::w_t(&w, v);
        let z = inner
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular Woodbury system".into()))?;
        Self::w_times(&w, &z, &mut out, 1.0 / (c * c));
        Ok(out)
    }

    /// Prepared `(I + gamma B)^{-1}` for repeated application with one `gamma`.
    pub fn shifted_inverse(&self, gamma: f64) -> Result<ShiftedInverse> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("shift must be positive, got {gamma}")));
        }
        let c = 1.0 + gamma * self.sigma;
        if self.is_empty() {
            return Ok(ShiftedInverse { c, w: Vec::new(), inner: None });
        }
        let (w, m) = self.compact();
        let k2 = w.len();
        let mut inner = m / gamma;
        for i in 0..k2 {
            for j in 0..k2 {
                inner[(i, j)] -= dot(&w[i], &w[j]) / c;
            }
        }
        let inv = inner
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular Woodbury system".into()))?;
        Ok(ShiftedInverse { c, w, inner: Some(inv) })
    }
}

/// Cached factors of `(I + gamma B)^{-1}`.
#[derive(Debug, Clone)]
pub struct ShiftedInverse {
    c: f64,
    w: Vec<Vec<f64>>,
    inner: Option<DMatrix<f64>>,
}

impl ShiftedInverse {
    pub fn apply(&self, v: &mut [f64]) {
        match &self.inner {
            None => v.iter_mut().for_each(|x| *x /= self.c),
            Some(inv) => {
                let z = inv * LbfgsState::w_t(&self.w, v);
                let c = self.c;
                v.iter_mut().for_each(|x| *x /= c);
                LbfgsState::w_times(&self.w, &z, v, 1.0 / (c * c));
            }
        }
    }
}
