//! Smooth penalty formulation of the worst-case search.
//!
//! Variables are the iterates and subgradients of the outer search plus the
//! function values `f1^0..f1^{N−1}` and `f2^1..f2^N` (`f1^N = f2^0 = 0`).
//! The objective to minimize is
//!
//! ```text
//! −softmin_τ(½‖G^k‖²) + ρ/2·(Σ min(s_ij, 0)² + (F(x^0) − F(x^N) − 1)²)
//! ```
//!
//! with interpolation slacks `s_ij` taken for slightly tightened classes, so
//! that near-feasible minimizers are feasible for the declared ones.

use std::cell::{Cell, RefCell};

use argmin::core::{CostFunction, Error, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use crate::curvature::CurvatureClass;

/// Tightened `(μ, 1/L)` pair.
#[derive(Clone, Copy)]
struct Tight {
    mu: f64,
    il: f64,
}

impl Tight {
    fn new(cls: &CurvatureClass) -> Self {
        let mu = cls.mu + 1e-5 * cls.mu.abs().max(1.0);
        let il = cls.l.inv() * (1.0 + 1e-5) + 1e-7;
        Self { mu, il }
    }

    /// Coefficient of `‖Δg − μΔx‖²`.
    fn c(&self) -> f64 {
        0.5 * self.il / (1.0 - self.mu * self.il)
    }
}

pub(super) struct Penalty {
    n: usize,
    d: usize,
    c1: Tight,
    c2: Tight,
    rho: f64,
    tau: f64,
    evals: Cell<usize>,
    limit: usize,
    /// Lowest penalized value seen in the current stage.
    best: RefCell<Option<(f64, Vec<f64>)>>,
}

struct Full {
    x: Vec<Vec<f64>>,
    g1: Vec<Vec<f64>>,
    g2: Vec<Vec<f64>>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

impl Penalty {
    pub(super) fn new(n: usize, d: usize, c1: &CurvatureClass, c2: &CurvatureClass) -> Self {
        Self {
            n,
            d,
            c1: Tight::new(c1),
            c2: Tight::new(c2),
            rho: 1.0,
            tau: 1.0,
            evals: Cell::new(0),
            limit: usize::MAX,
            best: RefCell::new(None),
        }
    }

    pub(super) fn z_len(&self) -> usize {
        self.d * (2 * self.n + 1)
    }

    pub(super) fn evaluations(&self) -> usize {
        self.evals.get()
    }

    fn unpack(&self, v: &[f64]) -> Full {
        let (n, d) = (self.n, self.d);
        let chunk = |i: usize| v[i * d..(i + 1) * d].to_vec();
        let mut x: Vec<Vec<f64>> = (0..n).map(chunk).collect();
        x.push(vec![0.0; d]);
        let mut g2: Vec<Vec<f64>> = (0..n).map(|k| chunk(n + 1 + k)).collect();
        g2.push(vec![0.0; d]);
        let mut g1 = vec![chunk(n)];
        g1.extend(g2[..n].iter().cloned());
        let f = &v[self.z_len()..];
        let mut f1 = f[..n].to_vec();
        f1.push(0.0);
        let mut f2 = vec![0.0];
        f2.extend_from_slice(&f[n..2 * n]);
        Full { x, g1, g2, f1, f2 }
    }

    fn pack_grad(&self, gx: &[Vec<f64>], gg1: &[Vec<f64>], gg2: &[Vec<f64>], gf1: &[f64], gf2: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.z_len() + 2 * n);
        for v in &gx[..n] {
            out.extend_from_slice(v);
        }
        out.extend_from_slice(&gg1[0]);
        for k in 0..n {
            out.extend(gg2[k].iter().zip(&gg1[k + 1]).map(|(a, b)| a + b));
        }
        out.extend_from_slice(&gf1[..n]);
        out.extend_from_slice(&gf2[1..]);
        out
    }

    fn record(&self, value: f64, v: &[f64]) {
        let mut best = self.best.borrow_mut();
        if value.is_finite() && best.as_ref().is_none_or(|(b, _)| value < *b) {
            *best = Some((value, v.to_vec()));
        }
    }

    fn tick(&self) -> Result<(), Error> {
        let e = self.evals.get() + 1;
        self.evals.set(e);
        if e > self.limit {
            return Err(Error::msg("evaluation budget reached"));
        }
        Ok(())
    }

    /// Value and, if requested, gradient of the penalized objective.
    fn eval(&self, v: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let (n, d) = (self.n, self.d);
        let p = self.unpack(v);
        let mut gx = vec![vec![0.0; d]; n + 1];
        let mut gg1 = vec![vec![0.0; d]; n + 1];
        let mut gg2 = vec![vec![0.0; d]; n + 1];
        let mut gf1 = vec![0.0; n + 1];
        let mut gf2 = vec![0.0; n + 1];

        // soft minimum of the half squared gaps
        let gaps: Vec<Vec<f64>> = (0..=n)
            .map(|k| p.g1[k].iter().zip(&p.g2[k]).map(|(a, b)| a - b).collect())
            .collect();
        let a: Vec<f64> = gaps.iter().map(|g| 0.5 * g.iter().map(|v| v * v).sum::<f64>()).collect();
        let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = a.iter().map(|ak| (-(ak - amin) / self.tau).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let softmin = amin - self.tau * wsum.ln();
        let mut value = -softmin;
        if want_grad {
            for k in 0..=n {
                let wk = w[k] / wsum;
                for t in 0..d {
                    gg1[k][t] -= wk * gaps[k][t];
                    gg2[k][t] += wk * gaps[k][t];
                }
            }
        }

        let rho = self.rho;
        for (g, f, cls, gg, gf) in [
            (&p.g1, &p.f1, self.c1, &mut gg1, &mut gf1),
            (&p.g2, &p.f2, self.c2, &mut gg2, &mut gf2),
        ] {
            let c = cls.c();
            let mu = cls.mu;
            for i in 0..=n {
                for j in 0..=n {
                    if i == j {
                        continue;
                    }
                    let dx: Vec<f64> = (0..d).map(|t| p.x[i][t] - p.x[j][t]).collect();
                    let r: Vec<f64> = (0..d).map(|t| g[i][t] - g[j][t] - mu * dx[t]).collect();
                    let mut s = f[i] - f[j];
                    for t in 0..d {
                        s -= g[j][t] * dx[t] + 0.5 * mu * dx[t] * dx[t] + c * r[t] * r[t];
                    }
                    if s >= 0.0 {
                        continue;
                    }
                    value += 0.5 * rho * s * s;
                    if !want_grad {
                        continue;
                    }
                    let lam = rho * s;
                    gf[i] += lam;
                    gf[j] -= lam;
                    for t in 0..d {
                        let ddx = -g[j][t] - mu * dx[t] + 2.0 * c * mu * r[t];
                        gx[i][t] += lam * ddx;
                        gx[j][t] -= lam * ddx;
                        gg[i][t] += lam * (-2.0 * c * r[t]);
                        gg[j][t] += lam * (-dx[t] + 2.0 * c * r[t]);
                    }
                }
            }
        }

        let dev = (p.f1[0] - p.f2[0]) - (p.f1[n] - p.f2[n]) - 1.0;
        value += 0.5 * rho * dev * dev;
        if want_grad {
            gf1[0] += rho * dev;
            gf2[0] -= rho * dev;
            gf1[n] -= rho * dev;
            gf2[n] += rho * dev;
        }
        let grad = if want_grad {
            self.pack_grad(&gx, &gg1, &gg2, &gf1, &gf2)
        } else {
            Vec::new()
        };
        (value, grad)
    }

    /// Runs the continuation schedule from `v` within `budget` evaluations.
    /// Returns the last iterate reached.
    pub(super) fn solve(&mut self, mut v: Vec<f64>, budget: usize) -> Vec<f64> {
        const SCHEDULE: [(f64, f64); 6] = [(1e1, 1e-1), (1e2, 1e-2), (1e3, 1e-3), (1e4, 1e-4), (1e5, 1e-5), (1e6, 1e-6)];
        for (stage, (rho, tau)) in SCHEDULE.into_iter().enumerate() {
            let used = self.evals.get();
            if used >= budget {
                break;
            }
            // even split of what is left, so the last stages always run
            self.limit = used + (budget - used) / (SCHEDULE.len() - stage);
            self.rho = rho;
            self.tau = tau;
            let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
                .with_tolerance_grad(1e-10)
                .and_then(|s| s.with_tolerance_cost(1e-14));
            let Ok(solver) = solver else { break };
            *self.best.borrow_mut() = None;
            let start = v.clone();
            let run = Executor::new(&*self, solver)
                .configure(|s| s.param(start).max_iters(3000))
                .run();
            let stage_best = self.best.borrow_mut().take();
            match run {
                Ok(res) => {
                    if let Some(best) = res.state().get_best_param() {
                        v = best.clone();
                    }
                }
                // line-search failure or budget: continue from the best point seen
                Err(_) => {
                    if let Some((_, b)) = stage_best {
                        v = b;
                    }
                }
            }
        }
        v
    }

    /// Function-value block consistent with `z` is produced by the exact
    /// elimination afterwards; this only seeds the penalty variables.
    pub(super) fn seed(&self, z: &[f64], f1: &[f64], f2: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut v = z.to_vec();
        v.extend(f1[..n].iter().map(|v| v - f1[n]));
        v.extend(f2[1..].iter().map(|v| v - f2[0]));
        v
    }
}

impl CostFunction for &Penalty {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, v: &Self::Param) -> Result<f64, Error> {
        self.tick()?;
        let value = self.eval(v, false).0;
        self.record(value, v);
        Ok(value)
    }
}

impl Gradient for &Penalty {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, v: &Self::Param) -> Result<Vec<f64>, Error> {
        self.tick()?;
        let (value, grad) = self.eval(v, true);
        self.record(value, v);
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::ExtReal;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut pen = Penalty::new(3, 2, &CurvatureClass::new(1.0, 4.0), &CurvatureClass::new(-0.8, ExtReal::Infinity));
        pen.rho = 10.0;
        pen.tau = 0.1;
        let len = pen.z_len() + 6;
        let v: Vec<f64> = (0..len).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.13).collect();
        let (_, g) = pen.eval(&v, true);
        for i in 0..len {
            let h = 1e-6;
            let mut a = v.clone();
            let mut b = v.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (pen.eval(&a, false).0 - pen.eval(&b, false).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "coordinate {i}: {fd} vs {}", g[i]);
        }
    }
}
