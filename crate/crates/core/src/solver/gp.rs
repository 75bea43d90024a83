//! Geometric programs in convex (log-domain) form.
//!
//! With y = ln x, a monomial c·∏x_i^{a_i} becomes exp(ln c + aᵀy) and each
//! posynomial constraint Σ_j g_j(x) ≤ 1 becomes LSE_j(ln c_j + a_jᵀy) ≤ 0.
//! A two-phase barrier method solves
//!
//! ```text
//! minimize ln c₀ + a₀ᵀy  s.t.  LSE_j(b_ij + a_ijᵀy) ≤ 0  for every constraint i.
//! ```
//!
//! The caller is responsible for a bounded feasible set (lower bounds on every
//! variable are enough in practice).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::psd::IpmSettings;
use super::spd_solve;
use crate::{Error, Result};

/// c·∏x_i^{a_i}, stored as ln c and sparse exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub log_coeff: f64,
    pub exponents: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<(usize, f64)>) -> Self {
        Self {
            log_coeff: coeff.ln(),
            exponents,
        }
    }

    pub fn log_value(&self, y: &[f64]) -> f64 {
        self.log_coeff + self.exponents.iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        self.log_value(&y).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.value(x)).sum()
    }
}

/// minimize `objective` s.t. every posynomial in `constraints` is at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricProgram {
    pub n_vars: usize,
    pub objective: Monomial,
    pub constraints: Vec<Posynomial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl fmt::Display for GpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    pub x: Vec<f64>,
    pub status: GpStatus,
    pub objective: f64,
    pub newton_steps: usize,
}

/// Value of LSE_j(ln c_j + a_jᵀy) without derivatives.
fn lse_value(p: &Posynomial, y: &[f64]) -> f64 {
    if let [m] = p.terms.as_slice() {
        return m.log_value(y);
    }
    let top = p
        .terms
        .iter()
        .map(|m| m.log_value(y))
        .fold(f64::NEG_INFINITY, f64::max);
    top + p
        .terms
        .iter()
        .map(|m| (m.log_value(y) - top).exp())
        .sum::<f64>()
        .ln()
}

/// Log-sum-exp of one constraint with its gradient and Hessian restricted to
/// the variables it involves.
struct Lse {
    value: f64,
    vars: Vec<usize>,
    grad: Vec<f64>,
    /// Row-major over `vars`; empty for a single monomial (zero Hessian).
    hess: Vec<f64>,
}

fn lse(p: &Posynomial, y: &[f64]) -> Lse {
    let mut vars: Vec<usize> = p
        .terms
        .iter()
        .flat_map(|m| m.exponents.iter().map(|e| e.0))
        .collect();
    vars.sort_unstable();
    vars.dedup();
    let k = vars.len();
    let slot = |i: usize| vars.binary_search(&i).expect("variable collected above");
    if let [m] = p.terms.as_slice() {
        let mut grad = vec![0.0; k];
        for &(i, a) in &m.exponents {
            grad[slot(i)] += a;
        }
        return Lse {
            value: m.log_value(y),
            vars,
            grad,
            hess: Vec::new(),
        };
    }
    let logs: Vec<f64> = p.terms.iter().map(|m| m.log_value(y)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut grad = vec![0.0; k];
    let mut hess = vec![0.0; k * k];
    for (m, w) in p.terms.iter().zip(&weights) {
        let pj = w / total;
        for &(i, a) in &m.exponents {
            let si = slot(i);
            grad[si] += pj * a;
            for &(j, b) in &m.exponents {
                hess[si * k + slot(j)] += pj * a * b;
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            hess[a * k + b] -= grad[a] * grad[b];
        }
    }
    Lse {
        value: top + total.ln(),
        vars,
        grad,
        hess,
    }
}

/// Barrier problem over z = (y, [s]): `t·cost(z) − Σ ln(s − f_i(y))`, where
/// s is a variable in phase 1 and the constant 0 in phase 2.
struct Stage<'a> {
    gp: &'a GeometricProgram,
    phase_one: bool,
}

impl Stage<'_> {
    fn width(&self) -> usize {
        self.gp.n_vars + usize::from(self.phase_one)
    }

    fn slack_var(&self, z: &[f64]) -> f64 {
        if self.phase_one {
            z[self.gp.n_vars]
        } else {
            0.0
        }
    }

    fn cost(&self, z: &[f64]) -> f64 {
        if self.phase_one {
            self.slack_var(z)
        } else {
            self.gp.objective.log_value(z)
        }
    }

    fn value(&self, t: f64, z: &[f64]) -> Option<f64> {
        let s = self.slack_var(z);
        let mut barrier = 0.0;
        for c in &self.gp.constraints {
            let slack = s - lse_value(c, z);
            if !(slack > 0.0) {
                return None;
            }
            barrier -= slack.ln();
        }
        let v = t * self.cost(z) + barrier;
        v.is_finite().then_some(v)
    }

    fn newton_system(&self, t: f64, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.gp.n_vars;
        let w = self.width();
        let s = self.slack_var(z);
        let mut g = DVector::zeros(w);
        let mut h = DMatrix::zeros(w, w);
        if self.phase_one {
            g[n] = t;
        } else {
            for &(i, a) in &self.gp.objective.exponents {
                g[i] += t * a;
            }
        }
        for c in &self.gp.constraints {
            let f = lse(c, z);
            let slack = s - f.value;
            // Barrier −ln(slack) with d(slack) = e_s − ∇f.
            let mut idx = f.vars.clone();
            let mut ds: Vec<f64> = f.grad.iter().map(|v| -v).collect();
            if self.phase_one {
                idx.push(n);
                ds.push(1.0);
            }
            let k = f.vars.len();
            for (a, &ia) in idx.iter().enumerate() {
                g[ia] -= ds[a] / slack;
                for (b, &ib) in idx.iter().enumerate() {
                    h[(ia, ib)] += ds[a] * ds[b] / (slack * slack);
                }
            }
            if !f.hess.is_empty() {
                for a in 0..k {
                    for b in 0..k {
                        h[(f.vars[a], f.vars[b])] += f.hess[a * k + b] / slack;
                    }
                }
            }
        }
        (g, h)
    }

    fn max_constraint(&self, z: &[f64]) -> f64 {
        self.gp
            .constraints
            .iter()
            .map(|c| lse_value(c, z))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

enum Centering {
    Centered,
    Stalled,
    Budget,
    Feasible,
}

/// Damped Newton centering; in phase 1 stops as soon as every constraint is
/// satisfied with margin.
fn center(
    stage: &Stage,
    t: f64,
    z: &mut Vec<f64>,
    steps: &mut usize,
    cap: usize,
) -> Result<Centering> {
    const MARGIN: f64 = 1e-7;
    loop {
        if stage.phase_one && stage.max_constraint(z) < -MARGIN {
            return Ok(Centering::Feasible);
        }
        let (g, h) = stage.newton_system(t, z);
        let dz = spd_solve(&h, &(-&g))
            .ok_or_else(|| Error::Numerical("singular GP Newton system".into()))?;
        let slope = g.dot(&dz);
        if -slope <= 1e-9 {
            return Ok(Centering::Centered);
        }
        if *steps >= cap {
            return Ok(Centering::Budget);
        }
        let f0 = stage
            .value(t, z)
            .ok_or_else(|| Error::Numerical("GP iterate left the domain".into()))?;
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-14 {
            let cand: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(f1) = stage.value(t, &cand) {
                if f1 <= f0 + 0.25 * step * slope {
                    next = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        *steps += 1;
        match next {
            Some(c) if c != *z => *z = c,
            _ => return Ok(Centering::Stalled),
        }
    }
}

/// Solves the GP from a strictly positive starting point `x0` (which need not
/// be feasible).
pub fn solve_gp(gp: &GeometricProgram, x0: &[f64], settings: &IpmSettings) -> Result<GpSolution> {
    if x0.len() != gp.n_vars {
        return Err(Error::DimensionMismatch(format!(
            "{} start values for {} variables",
            x0.len(),
            gp.n_vars
        )));
    }
    if x0.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(
            "GP start point must be strictly positive".into(),
        ));
    }
    let n = gp.n_vars;
    let m = gp.constraints.len();
    let mut y: Vec<f64> = x0.iter().map(|v| v.ln()).collect();
    let mut steps = 0usize;
    let cap = settings.max_newton_steps;

    let phase_two = Stage {
        gp,
        phase_one: false,
    };
    if phase_two.max_constraint(&y) >= -1e-12 {
        let stage = Stage {
            gp,
            phase_one: true,
        };
        let mut z = y.clone();
        z.push(stage.max_constraint(&y).max(0.0) + 1.0);
        let mut t = 1.0;
        let mut found = false;
        loop {
            match center(&stage, t, &mut z, &mut steps, cap)? {
                Centering::Feasible => {
                    found = true;
                    break;
                }
                Centering::Budget => break,
                Centering::Centered | Centering::Stalled => {}
            }
            if (m as f64) / t < 1e-12 {
                break;
            }
            t *= settings.growth;
        }
        z.truncate(n);
        if !found && stage.max_constraint(&z) >= 0.0 {
            let x = z.iter().map(|v| v.exp()).collect();
            let objective = gp.objective.log_value(&z).exp();
            return Ok(GpSolution {
                x,
                status: GpStatus::Infeasible,
                objective,
                newton_steps: steps,
            });
        }
        y = z;
    }

    let mut t = 1.0;
    let mut status = GpStatus::Optimal;
    loop {
        match center(&phase_two, t, &mut y, &mut steps, cap)? {
            Centering::Budget => {
                status = GpStatus::IterationLimit;
                break;
            }
            Centering::Centered | Centering::Stalled | Centering::Feasible => {}
        }
        if (m as f64) / t <= settings.tol {
            break;
        }
        t *= settings.growth;
    }
    let x = y.iter().map(|v| v.exp()).collect();
    let objective = gp.objective.log_value(&y).exp();
    Ok(GpSolution {
        x,
        status,
        objective,
        newton_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(c: f64, e: &[(usize, f64)]) -> Monomial {
        Monomial::new(c, e.to_vec())
    }

    #[test]
    fn box_volume() {
        // max x·y·z s.t. x + y + z ≤ 3 → x = y = z = 1.
        let gp = GeometricProgram {
            n_vars: 3,
            objective: mono(1.0, &[(0, -1.0), (1, -1.0), (2, -1.0)]),
            constraints: vec![Posynomial {
                terms: vec![
                    mono(1.0 / 3.0, &[(0, 1.0)]),
                    mono(1.0 / 3.0, &[(1, 1.0)]),
                    mono(1.0 / 3.0, &[(2, 1.0)]),
                ],
            }],
        };
        let sol = solve_gp(&gp, &[0.1, 0.2, 0.3], &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Optimal);
        for v in &sol.x {
            assert!((v - 1.0).abs() < 1e-6, "{:?}", sol.x);
        }
    }

    #[test]
    fn infeasible_start_is_repaired() {
        // min 1/x s.t. x ≤ 2, 1/x ≤ 1, start at 10.
        let gp = GeometricProgram {
            n_vars: 1,
            objective: mono(1.0, &[(0, -1.0)]),
            constraints: vec![
                Posynomial {
                    terms: vec![mono(0.5, &[(0, 1.0)])],
                },
                Posynomial {
                    terms: vec![mono(1.0, &[(0, -1.0)])],
                },
            ],
        };
        let sol = solve_gp(&gp, &[10.0], &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infeasibility_is_detected() {
        // x ≤ 1 and 2/x ≤ 1 cannot both hold.
        let gp = GeometricProgram {
            n_vars: 1,
            objective: mono(1.0, &[(0, 1.0)]),
            constraints: vec![
                Posynomial {
                    terms: vec![mono(1.0, &[(0, 1.0)])],
                },
                Posynomial {
                    terms: vec![mono(2.0, &[(0, -1.0)])],
                },
            ],
        };
        let sol = solve_gp(&gp, &[1.0], &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, GpStatus::Infeasible);
    }

    #[test]
    fn posynomial_objective_via_epigraph() {
        // min x + 1/x as min t s.t. (x + 1/x)/t ≤ 1 → t = 2 at x = 1.
        let gp = GeometricProgram {
            n_vars: 2,
            objective: mono(1.0, &[(1, 1.0)]),
            constraints: vec![
                Posynomial {
                    terms: vec![
                        mono(1.0, &[(0, 1.0), (1, -1.0)]),
                        mono(1.0, &[(0, -1.0), (1, -1.0)]),
                    ],
                },
                Posynomial {
                    terms: vec![mono(1e-3, &[(0, -1.0)])],
                },
                Posynomial {
                    terms: vec![mono(1e-3, &[(0, 1.0)])],
                },
            ],
        };
        let sol = solve_gp(&gp, &[3.0, 100.0], &IpmSettings::default()).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-7);
        assert!((sol.x[0] - 1.0).abs() < 1e-3);
    }
}
