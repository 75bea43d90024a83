//! Unit-diagonal PSD programs with a log-sum rate term.
//!
//! The problem
//!
//! ```text
//! maximize tr(AΦ)  s.t.  Φ ⪰ 0,  diag(Φ) = 1,  Σ_n ln(1 + a_n tr(C_nΦ)) ≥ c
//! ```
//!
//! is solved through its dual
//!
//! ```text
//! minimize Σ_i ν_i − m(λ)  s.t.  Diag(ν) − A − Σ_n λ_n a_n C_n ⪰ 0,  λ ≥ 0
//! ```
//!
//! where m(λ) = min { Σ λ_n τ_n : Σ ln(1 + τ_n) ≥ c, τ ≥ 0 } is a closed-form
//! water-fill. A log-det barrier on the slack matrix Z and log barriers on λ
//! give a smooth problem in d + K real variables; the primal matrix is read
//! off the central path as Φ = Z⁻¹/t and rescaled to an exact unit diagonal.
//! Rate maximization uses the same machinery with the conjugate of
//! Σ ln(1 + τ_n) in place of −m(λ).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spd_solve;
use crate::linalg::{
    hermitian_cholesky, hermitian_defect, hermitize, trace_product, CMat, CVec, C64,
};
use crate::{Error, Result};

/// One term a_n·tr(C_nΦ) of the rate constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTerm {
    pub coupling: CMat,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdSubproblem {
    /// Hermitian objective matrix A.
    pub objective: CMat,
    pub rate_terms: Vec<RateTerm>,
    /// Rate floor in bits.
    pub rate_floor: f64,
    pub include_rate: bool,
}

impl PsdSubproblem {
    pub fn dim(&self) -> usize {
        self.objective.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    /// Cap on damped Newton steps per solve.
    pub max_newton_steps: usize,
    /// Barrier parameter growth per outer iteration.
    pub growth: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton_steps: 400,
            growth: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdStatus {
    Optimal,
    /// The floor sits at the maximum achievable rate; the rate-maximizing
    /// matrix is returned.
    RateBoundary,
    Infeasible,
    IterationLimit,
}

impl fmt::Display for PsdStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Optimal => "optimal",
            Self::RateBoundary => "rate-boundary",
            Self::Infeasible => "infeasible",
            Self::IterationLimit => "iteration-limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdSolution {
    pub phi: CMat,
    pub status: PsdStatus,
    /// tr(AΦ) at the returned Φ.
    pub objective: f64,
    /// Σ ln(1 + a_n tr(C_nΦ)) / ln 2 at the returned Φ.
    pub rate: f64,
    /// Dual minus primal objective, in the units of the problem solved.
    pub gap: f64,
    pub newton_steps: usize,
}

/// Relative distance below the maximum rate at which a floor is treated as
/// sitting on the boundary.
pub const RATE_BOUNDARY_TOL: f64 = 1e-7;

pub fn solve_psd(p: &PsdSubproblem, settings: &IpmSettings) -> Result<PsdSolution> {
    validate(p)?;
    if !p.include_rate || p.rate_floor <= 0.0 {
        return solve_psd_given_capacity(p, f64::INFINITY, settings);
    }
    let cap = maximize_rate(p.dim(), &p.rate_terms, settings)?;
    finish_with_capacity(p, cap, settings)
}

/// As [`solve_psd`] when the maximum achievable rate (bits) is already known.
pub fn solve_psd_given_capacity(
    p: &PsdSubproblem,
    capacity: f64,
    settings: &IpmSettings,
) -> Result<PsdSolution> {
    validate(p)?;
    let floor_active = p.include_rate && p.rate_floor > 0.0;
    if floor_active && p.rate_floor >= capacity * (1.0 - RATE_BOUNDARY_TOL) {
        let cap = maximize_rate(p.dim(), &p.rate_terms, settings)?;
        return finish_with_capacity(p, cap, settings);
    }
    solve_core(p, floor_active, settings)
}

fn finish_with_capacity(
    p: &PsdSubproblem,
    cap: PsdSolution,
    settings: &IpmSettings,
) -> Result<PsdSolution> {
    if p.rate_floor > cap.rate * (1.0 + RATE_BOUNDARY_TOL) {
        return Ok(PsdSolution {
            status: PsdStatus::Infeasible,
            ..with_objective(p, cap)
        });
    }
    if p.rate_floor >= cap.rate * (1.0 - RATE_BOUNDARY_TOL) {
        return Ok(boundary(p, cap));
    }
    solve_core(p, true, settings)
}

fn with_objective(p: &PsdSubproblem, sol: PsdSolution) -> PsdSolution {
    let objective = trace_product(&p.objective, &sol.phi).re;
    PsdSolution { objective, ..sol }
}

fn boundary(p: &PsdSubproblem, cap: PsdSolution) -> PsdSolution {
    PsdSolution {
        status: PsdStatus::RateBoundary,
        ..with_objective(p, cap)
    }
}

fn validate(p: &PsdSubproblem) -> Result<()> {
    let d = p.dim();
    if d == 0 || p.objective.ncols() != d {
        return Err(Error::DimensionMismatch(
            "objective must be square and nonempty".into(),
        ));
    }
    let scale = p.objective.norm().max(f64::MIN_POSITIVE);
    if hermitian_defect(&p.objective) > 1e-9 * scale {
        return Err(Error::InvariantViolation(
            "objective matrix is not Hermitian".into(),
        ));
    }
    for t in &p.rate_terms {
        if t.coupling.nrows() != d || t.coupling.ncols() != d {
            return Err(Error::DimensionMismatch(
                "rate coupling matrix has the wrong size".into(),
            ));
        }
        if !(t.scale >= 0.0 && t.scale.is_finite()) {
            return Err(Error::Domain(format!(
                "rate scale must be nonnegative, got {}",
                t.scale
            )));
        }
    }
    Ok(())
}

/// Rate (bits) of Φ under the given terms.
pub fn rate_of(terms: &[RateTerm], phi: &CMat) -> f64 {
    terms
        .iter()
        .map(|t| {
            (t.scale * trace_product(&t.coupling, phi).re)
                .max(0.0)
                .ln_1p()
        })
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Maximizes Σ ln(1 + a_n tr(C_nΦ)) over unit-diagonal PSD Φ. The reported
/// `objective` is zero; `rate` carries the optimum in bits.
pub fn maximize_rate(
    dim: usize,
    terms: &[RateTerm],
    settings: &IpmSettings,
) -> Result<PsdSolution> {
    if dim == 0 {
        return Err(Error::DimensionMismatch("empty PSD problem".into()));
    }
    let scaled = scaled_terms(terms);
    if dim == 1 || scaled.is_empty() {
        let phi = CMat::identity(dim, dim);
        let rate = rate_of(terms, &phi);
        return Ok(PsdSolution {
            phi,
            status: PsdStatus::Optimal,
            objective: 0.0,
            rate,
            gap: 0.0,
            newton_steps: 0,
        });
    }
    let zero = CMat::zeros(dim, dim);
    let barrier = Barrier {
        a: &zero,
        terms: &scaled,
        conj: Conjugate::LogSum,
    };
    let out = barrier.run(settings)?;
    let rate = rate_of(terms, &out.phi);
    Ok(PsdSolution {
        phi: out.phi,
        status: out.status,
        objective: 0.0,
        rate,
        gap: out.gap,
        newton_steps: out.steps,
    })
}

/// A scaled rate term, with its factor u (C = uuᴴ) when it has rank one.
struct Term {
    dense: CMat,
    factor: Option<CVec>,
}

fn rank_one_factor(c: &CMat) -> Option<CVec> {
    let (j, cjj) = (0..c.nrows())
        .map(|i| (i, c[(i, i)].re))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    if cjj <= 0.0 {
        return None;
    }
    let u: CVec = c.column(j) / C64::new(cjj.sqrt(), 0.0);
    let residual = (c - &u * u.adjoint()).norm();
    (residual <= RANK_ONE_TOL * c.norm()).then_some(u)
}

const RANK_ONE_TOL: f64 = 1e-10;
/// Squared Newton decrement below which the undamped step is taken.
const QUADRATIC_REGION: f64 = 1e-2;

fn scaled_terms(terms: &[RateTerm]) -> Vec<Term> {
    terms
        .iter()
        .filter(|t| t.scale > 0.0 && t.coupling.norm() > 0.0)
        .map(|t| {
            let dense = hermitize(&t.coupling) * C64::new(t.scale, 0.0);
            let factor = rank_one_factor(&dense);
            Term { dense, factor }
        })
        .collect()
}

fn solve_core(
    p: &PsdSubproblem,
    floor_active: bool,
    settings: &IpmSettings,
) -> Result<PsdSolution> {
    let d = p.dim();
    let a_norm = p.objective.norm();
    let finish = |phi: CMat, status, gap, steps| {
        let objective = trace_product(&p.objective, &phi).re;
        let rate = rate_of(&p.rate_terms, &phi);
        PsdSolution {
            phi,
            status,
            objective,
            rate,
            gap,
            newton_steps: steps,
        }
    };
    if d == 1 {
        return Ok(finish(CMat::identity(1, 1), PsdStatus::Optimal, 0.0, 0));
    }
    if a_norm == 0.0 {
        // Every feasible point is optimal; prefer the most rate-friendly one.
        let cap = maximize_rate(d, &p.rate_terms, settings)?;
        return Ok(finish(cap.phi, cap.status, 0.0, cap.newton_steps));
    }
    let a = hermitize(&p.objective) / C64::new(a_norm, 0.0);
    let scaled = if floor_active {
        scaled_terms(&p.rate_terms)
    } else {
        Vec::new()
    };
    let conj = if floor_active {
        Conjugate::Floor {
            c: p.rate_floor * std::f64::consts::LN_2,
        }
    } else {
        Conjugate::None
    };
    let barrier = Barrier {
        a: &a,
        terms: &scaled,
        conj,
    };
    let out = barrier.run(settings)?;
    Ok(finish(out.phi, out.status, out.gap * a_norm, out.steps))
}

/// Part of the dual objective that depends on λ.
#[derive(Debug, Clone, Copy)]
enum Conjugate {
    None,
    /// −m(λ) for the floor Σ ln(1 + τ) ≥ c (nats).
    Floor {
        c: f64,
    },
    /// Σ ψ(λ_n), the conjugate of the log-sum objective.
    LogSum,
}

struct ConjugateEval {
    value: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

impl Conjugate {
    fn eval(&self, lam: &[f64]) -> ConjugateEval {
        let k = lam.len();
        match *self {
            Conjugate::None => ConjugateEval {
                value: 0.0,
                grad: vec![0.0; k],
                hess: DMatrix::zeros(k, k),
            },
            Conjugate::LogSum => {
                let mut value = 0.0;
                let mut grad = vec![0.0; k];
                let mut hess = DMatrix::zeros(k, k);
                for (n, &l) in lam.iter().enumerate() {
                    if l < 1.0 {
                        value += l - 1.0 - l.ln();
                        grad[n] = 1.0 - 1.0 / l;
                        hess[(n, n)] = 1.0 / (l * l);
                    }
                }
                ConjugateEval { value, grad, hess }
            }
            Conjugate::Floor { c } => {
                let wf = floor_waterfill(lam, c);
                let mut hess = DMatrix::zeros(k, k);
                for &i in &wf.active {
                    for &j in &wf.active {
                        // Hessian of m is μ/(kλ_iλ_j) − δ_ij μ/λ_i²; we store that of −m.
                        let mut h = wf.mu / (wf.active.len() as f64 * lam[i] * lam[j]);
                        if i == j {
                            h -= wf.mu / (lam[i] * lam[i]);
                        }
                        hess[(i, j)] = -h;
                    }
                }
                let grad = wf.tau.iter().map(|t| -t).collect();
                ConjugateEval {
                    value: -wf.value,
                    grad,
                    hess,
                }
            }
        }
    }
}

struct FloorWaterfill {
    value: f64,
    mu: f64,
    tau: Vec<f64>,
    active: Vec<usize>,
}

/// m(λ) = min Σ λ_n τ_n s.t. Σ ln(1 + τ_n) ≥ c, τ ≥ 0, for λ > 0, c > 0.
fn floor_waterfill(lam: &[f64], c: f64) -> FloorWaterfill {
    let mut order: Vec<usize> = (0..lam.len()).collect();
    order.sort_by(|&i, &j| lam[i].total_cmp(&lam[j]).then(i.cmp(&j)));
    let mut log_sum = 0.0;
    let mut chosen = (lam.len(), 0.0);
    for (k, &idx) in order.iter().enumerate() {
        log_sum += lam[idx].ln();
        let log_mu = (c + log_sum) / (k + 1) as f64;
        let next_ok = order.get(k + 1).is_none_or(|&j| log_mu <= lam[j].ln());
        if log_mu > lam[idx].ln() && next_ok {
            chosen = (k + 1, log_mu);
            break;
        }
        chosen = (k + 1, log_mu);
    }
    let (count, log_mu) = chosen;
    let mu = log_mu.exp();
    let active: Vec<usize> = order[..count].to_vec();
    let mut tau = vec![0.0; lam.len()];
    let mut value = 0.0;
    for &i in &active {
        tau[i] = mu / lam[i] - 1.0;
        value += mu - lam[i];
    }
    FloorWaterfill {
        value,
        mu,
        tau,
        active,
    }
}

struct BarrierOutcome {
    phi: CMat,
    status: PsdStatus,
    gap: f64,
    steps: usize,
}

struct Barrier<'a> {
    a: &'a CMat,
    terms: &'a [Term],
    conj: Conjugate,
}

struct Point {
    nu: Vec<f64>,
    lam: Vec<f64>,
}

struct Factored {
    logdet: f64,
    inv: CMat,
}

impl Barrier<'_> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn slack(&self, y: &Point) -> CMat {
        let mut z = -self.a.clone();
        for (i, &v) in y.nu.iter().enumerate() {
            z[(i, i)] += v;
        }
        for (c, &l) in self.terms.iter().zip(&y.lam) {
            z -= &c.dense * C64::new(l, 0.0);
        }
        z
    }

    fn factor(&self, y: &Point, with_inverse: bool) -> Option<Factored> {
        if y.lam.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let chol = hermitian_cholesky(self.slack(y))?;
        let l = chol.l_dirty();
        let mut logdet = 0.0;
        for i in 0..l.nrows() {
            let v = l[(i, i)].re;
            if !(v > 0.0) {
                return None;
            }
            logdet += 2.0 * v.ln();
        }
        let inv = if with_inverse {
            chol.inverse()
        } else {
            CMat::zeros(0, 0)
        };
        Some(Factored { logdet, inv })
    }

    fn dual_value(&self, y: &Point) -> f64 {
        y.nu.iter().sum::<f64>() + self.conj.eval(&y.lam).value
    }

    fn barrier_value(&self, t: f64, y: &Point) -> Option<f64> {
        let f = self.factor(y, false)?;
        let lam_barrier: f64 = y.lam.iter().map(|l| l.ln()).sum();
        let v = t * self.dual_value(y) - f.logdet - lam_barrier;
        v.is_finite().then_some(v)
    }

    fn newton_system(&self, t: f64, y: &Point) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let k = self.terms.len();
        let f = self.factor(y, true)?;
        let s = &f.inv;
        let conj = self.conj.eval(&y.lam);
        let mut g = DVector::zeros(d + k);
        let mut h = DMatrix::zeros(d + k, d + k);
        for i in 0..d {
            g[i] = t - s[(i, i)].re;
            for j in 0..d {
                h[(i, j)] = s[(i, j)].norm_sqr();
            }
        }
        let factors: Option<Vec<&CVec>> = self.terms.iter().map(|c| c.factor.as_ref()).collect();
        match factors {
            // tr(SC_n) = u_nᴴSu_n, diag(SC_nS) = |Su_n|², tr(SC_nSC_m) = |u_mᴴSu_n|².
            Some(u) => {
                let v: Vec<CVec> = u.iter().map(|u| s * *u).collect();
                for n in 0..k {
                    g[d + n] = t * conj.grad[n] + u[n].dotc(&v[n]).re - 1.0 / y.lam[n];
                    for i in 0..d {
                        let e = -v[n][i].norm_sqr();
                        h[(i, d + n)] = e;
                        h[(d + n, i)] = e;
                    }
                    for m in n..k {
                        let e = u[m].dotc(&v[n]).norm_sqr() + t * conj.hess[(n, m)];
                        h[(d + n, d + m)] = e;
                        h[(d + m, d + n)] = e;
                    }
                }
            }
            None => {
                let scs: Vec<CMat> = self.terms.iter().map(|c| s * &c.dense * s).collect();
                for n in 0..k {
                    g[d + n] = t * conj.grad[n] + trace_product(s, &self.terms[n].dense).re
                        - 1.0 / y.lam[n];
                    for i in 0..d {
                        let e = -scs[n][(i, i)].re;
                        h[(i, d + n)] = e;
                        h[(d + n, i)] = e;
                    }
                    for m in n..k {
                        let e =
                            trace_product(&scs[n], &self.terms[m].dense).re + t * conj.hess[(n, m)];
                        h[(d + n, d + m)] = e;
                        h[(d + m, d + n)] = e;
                    }
                }
            }
        }
        for n in 0..k {
            h[(d + n, d + n)] += 1.0 / (y.lam[n] * y.lam[n]);
        }
        Some((g, h))
    }

    fn initial_point(&self) -> Point {
        let d = self.dim();
        let lam = vec![0.5; self.terms.len()];
        let mut m = self.a.clone();
        for (c, &l) in self.terms.iter().zip(&lam) {
            m += &c.dense * C64::new(l, 0.0);
        }
        let nu = (0..d)
            .map(|i| (0..d).map(|j| m[(i, j)].norm()).sum::<f64>() + 1.0)
            .collect();
        Point { nu, lam }
    }

    fn primal(&self, t: f64, y: &Point) -> Option<CMat> {
        let f = self.factor(y, true)?;
        let phi = hermitize(&(f.inv / C64::new(t, 0.0)));
        Some(unit_diagonal(&phi))
    }

    fn primal_value(&self, phi: &CMat) -> f64 {
        let tr_a = trace_product(self.a, phi).re;
        match self.conj {
            Conjugate::LogSum => self
                .terms
                .iter()
                .map(|c| trace_product(&c.dense, phi).re.max(0.0).ln_1p())
                .sum(),
            _ => tr_a,
        }
    }

    fn run(&self, settings: &IpmSettings) -> Result<BarrierOutcome> {
        let d = self.dim();
        let k = self.terms.len();
        let mut y = self.initial_point();
        let mut t = 1.0;
        let mut steps = 0usize;
        let mut status = PsdStatus::Optimal;
        'outer: loop {
            // Centering.
            loop {
                let (g, h) = self
                    .newton_system(t, &y)
                    .ok_or_else(|| Error::Numerical("barrier iterate left the domain".into()))?;
                let Some(dx) = spd_solve(&h, &(-&g)) else {
                    return Err(Error::Numerical("singular Newton system".into()));
                };
                let decrement2 = -g.dot(&dx);
                if decrement2 <= 1e-10 {
                    break;
                }
                if steps >= settings.max_newton_steps {
                    status = PsdStatus::IterationLimit;
                    break 'outer;
                }
                let f0 = self.barrier_value(t, &y).unwrap_or(f64::INFINITY);
                let slope = g.dot(&dx);
                let mut step = 1.0;
                let mut accepted = None;
                // Inside the quadratic region the full step is taken whenever it
                // stays in the domain; Armijo on values of size t·|dual| is lost
                // to rounding there.
                if decrement2 < QUADRATIC_REGION {
                    let cand = Point {
                        nu: (0..d).map(|i| y.nu[i] + dx[i]).collect(),
                        lam: (0..k).map(|n| y.lam[n] + dx[d + n]).collect(),
                    };
                    if self.barrier_value(t, &cand).is_some() {
                        accepted = Some(cand);
                        step = 0.0;
                    }
                }
                while accepted.is_none() && step > 1e-14 {
                    let cand = Point {
                        nu: (0..d).map(|i| y.nu[i] + step * dx[i]).collect(),
                        lam: (0..k).map(|n| y.lam[n] + step * dx[d + n]).collect(),
                    };
                    if let Some(f1) = self.barrier_value(t, &cand) {
                        if f1 <= f0 + 0.25 * step * slope {
                            accepted = Some(cand);
                            break;
                        }
                    }
                    step *= 0.5;
                }
                steps += 1;
                match accepted {
                    Some(p) if p.nu != y.nu || p.lam != y.lam => y = p,
                    _ => break,
                }
            }
            let dual = self.dual_value(&y);
            if (d + k) as f64 / t <= settings.tol * dual.abs().max(1.0) {
                break;
            }
            t *= settings.growth;
        }
        let phi = self
            .primal(t, &y)
            .ok_or_else(|| Error::Numerical("could not recover the primal matrix".into()))?;
        let gap = self.dual_value(&y) - self.primal_value(&phi);
        Ok(BarrierOutcome {
            phi,
            status,
            gap,
            steps,
        })
    }
}

/// D^{-1/2} Φ D^{-1/2} with D = diag(Φ).
pub fn unit_diagonal(phi: &CMat) -> CMat {
    let d: Vec<f64> = (0..phi.nrows())
        .map(|i| phi[(i, i)].re.max(f64::MIN_POSITIVE).sqrt())
        .collect();
    let mut out = CMat::from_fn(phi.nrows(), phi.ncols(), |i, j| {
        phi[(i, j)] / C64::new(d[i] * d[j], 0.0)
    });
    for i in 0..out.nrows() {
        out[(i, i)] = C64::new(1.0, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitian_eigen};
    use crate::scenario::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
        let b = CMat::from_fn(d, d, |_, _| complex_normal(rng, 1.0));
        hermitize(&b)
    }

    fn rank_one(rng: &mut ChaCha8Rng, d: usize) -> CMat {
        let u = CVec::from_fn(d, |_, _| complex_normal(rng, 1.0));
        &u * u.adjoint()
    }

    fn objective_only(a: CMat) -> PsdSubproblem {
        PsdSubproblem {
            objective: a,
            rate_terms: vec![],
            rate_floor: 0.0,
            include_rate: false,
        }
    }

    fn check_feasible(phi: &CMat) {
        assert!(hermitian_defect(phi) < 1e-9);
        for i in 0..phi.nrows() {
            assert!((phi[(i, i)].re - 1.0).abs() < 1e-7);
        }
        let (vals, _) = hermitian_eigen(phi);
        assert!(*vals.last().unwrap() >= -1e-7);
    }

    /// Rank-d Burer–Monteiro projected gradient ascent: rows of V are kept on
    /// the unit sphere and Φ = V Vᴴ.
    fn projected_gradient(a: &CMat) -> f64 {
        let d = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut v = CMat::from_fn(d, d, |_, _| complex_normal(&mut rng, 1.0));
        let normalize = |v: &mut CMat| {
            for i in 0..d {
                let n = v.row(i).norm();
                for j in 0..d {
                    v[(i, j)] /= C64::new(n, 0.0);
                }
            }
        };
        normalize(&mut v);
        let step = 0.5 / a.norm();
        for _ in 0..20_000 {
            let g = a * &v;
            v += g * C64::new(step, 0.0);
            normalize(&mut v);
        }
        trace_product(a, &(&v * v.adjoint())).re
    }

    #[test]
    fn identity_objective() {
        let sol = solve_psd(
            &objective_only(CMat::identity(5, 5)),
            &IpmSettings::default(),
        )
        .unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-7);
        check_feasible(&sol.phi);
    }

    #[test]
    fn two_by_two_off_diagonal() {
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let sol = solve_psd(&objective_only(a), &IpmSettings::default()).unwrap();
        assert_eq!(sol.status, PsdStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-7);
        for v in sol.phi.iter() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn matches_projected_gradient_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let a = random_hermitian(&mut rng, 4);
            let sol = solve_psd(&objective_only(a.clone()), &IpmSettings::default()).unwrap();
            let reference = projected_gradient(&a);
            assert!(
                (sol.objective - reference).abs() <= 1e-5 * reference.abs(),
                "ipm {} reference {}",
                sol.objective,
                reference
            );
            check_feasible(&sol.phi);
        }
    }

    #[test]
    fn floor_waterfill_matches_definition() {
        let lam = [0.3, 2.0, 0.9, 5.0];
        let c = 1.7;
        let wf = floor_waterfill(&lam, c);
        let rate: f64 = wf.tau.iter().map(|t| t.ln_1p()).sum();
        assert!((rate - c).abs() < 1e-12);
        let cost: f64 = lam.iter().zip(&wf.tau).map(|(l, t)| l * t).sum();
        assert!((cost - wf.value).abs() < 1e-12);
        // No feasible perturbation along the constraint lowers the cost.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            use rand::Rng;
            let mut tau: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let r: f64 = tau.iter().map(|t| t.ln_1p()).sum();
            if r < c {
                continue;
            }
            // Shrink onto the constraint keeps feasibility and reduces cost.
            let s = bisect_scale(&tau, c);
            tau.iter_mut().for_each(|t| *t *= s);
            let other: f64 = lam.iter().zip(&tau).map(|(l, t)| l * t).sum();
            assert!(other >= wf.value - 1e-9);
        }
    }

    fn bisect_scale(tau: &[f64], c: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let r: f64 = tau.iter().map(|t| (t * mid).ln_1p()).sum();
            if r >= c {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn rate_maximization_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let terms: Vec<RateTerm> = (0..3)
            .map(|_| RateTerm {
                coupling: rank_one(&mut rng, d),
                scale: 2.0,
            })
            .collect();
        let sol = maximize_rate(d, &terms, &IpmSettings::default()).unwrap();
        check_feasible(&sol.phi);
        for _ in 0..500 {
            let u = CVec::from_fn(d, |_, _| {
                crate::linalg::cis(rand::Rng::random_range(&mut rng, 0.0..6.3))
            });
            let phi = &u * u.adjoint();
            assert!(rate_of(&terms, &phi) <= sol.rate + 1e-9);
        }
    }

    #[test]
    fn rate_floor_is_respected_and_binding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 5;
        let terms: Vec<RateTerm> = (0..4)
            .map(|_| RateTerm {
                coupling: rank_one(&mut rng, d),
                scale: 1.0,
            })
            .collect();
        let a = rank_one(&mut rng, d);
        let settings = IpmSettings::default();
        let free = solve_psd(&objective_only(a.clone()), &settings).unwrap();
        let cap = maximize_rate(d, &terms, &settings).unwrap();
        let free_rate = rate_of(&terms, &free.phi);
        assert!(free_rate < cap.rate);
        let floor = 0.5 * (free_rate + cap.rate);
        let p = PsdSubproblem {
            objective: a,
            rate_terms: terms.clone(),
            rate_floor: floor,
            include_rate: true,
        };
        let sol = solve_psd(&p, &settings).unwrap();
        assert_eq!(sol.status, PsdStatus::Optimal);
        check_feasible(&sol.phi);
        assert!(
            sol.rate >= floor - 1e-6,
            "rate {} floor {}",
            sol.rate,
            floor
        );
        assert!((sol.rate - floor).abs() < 1e-4, "floor should bind");
        assert!(sol.objective <= free.objective + 1e-7);
        // Any rank-one point meeting the floor does no better.
        for _ in 0..3000 {
            let u = CVec::from_fn(d, |_, _| {
                crate::linalg::cis(rand::Rng::random_range(&mut rng, 0.0..6.3))
            });
            let phi = &u * u.adjoint();
            if rate_of(&terms, &phi) >= floor {
                assert!(trace_product(&p.objective, &phi).re <= sol.objective + 1e-6);
            }
        }
    }

    #[test]
    fn infeasible_floor_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let terms = vec![RateTerm {
            coupling: rank_one(&mut rng, d),
            scale: 1.0,
        }];
        let cap = maximize_rate(d, &terms, &IpmSettings::default()).unwrap();
        let p = PsdSubproblem {
            objective: rank_one(&mut rng, d),
            rate_terms: terms,
            rate_floor: cap.rate * 1.1,
            include_rate: true,
        };
        assert_eq!(
            solve_psd(&p, &IpmSettings::default()).unwrap().status,
            PsdStatus::Infeasible
        );
    }

    #[test]
    fn scalar_problem_is_trivial() {
        let p = objective_only(CMat::from_element(1, 1, c(3.0, 0.0)));
        let sol = solve_psd(&p, &IpmSettings::default()).unwrap();
        assert_eq!(sol.phi, CMat::identity(1, 1));
        assert_eq!(sol.objective, 3.0);
    }

    #[test]
    fn rank_one_objective_gives_rank_one_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = rank_one(&mut rng, 8);
        let sol = solve_psd(&objective_only(a), &IpmSettings::default()).unwrap();
        let (vals, _) = hermitian_eigen(&sol.phi);
        assert!(vals[1] / vals[0] < 1e-5, "ratio {}", vals[1] / vals[0]);
    }

    #[test]
    fn rank_one_newton_system_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 6;
        let a = random_hermitian(&mut rng, d);
        let terms: Vec<RateTerm> = (0..3)
            .map(|_| RateTerm {
                coupling: rank_one(&mut rng, d),
                scale: 2.0,
            })
            .collect();
        let factored = scaled_terms(&terms);
        assert!(factored.iter().all(|t| t.factor.is_some()));
        let dense: Vec<Term> = factored
            .iter()
            .map(|t| Term {
                dense: t.dense.clone(),
                factor: None,
            })
            .collect();
        let conj = Conjugate::Floor { c: 1.0 };
        let fast = Barrier {
            a: &a,
            terms: &factored,
            conj,
        };
        let slow = Barrier {
            a: &a,
            terms: &dense,
            conj,
        };
        let y = fast.initial_point();
        let (g1, h1) = fast.newton_system(3.0, &y).unwrap();
        let (g2, h2) = slow.newton_system(3.0, &y).unwrap();
        assert!((&g1 - &g2).norm() <= 1e-10 * g2.norm());
        assert!((&h1 - &h2).norm() <= 1e-10 * h2.norm());
        assert!(rank_one_factor(&random_hermitian(&mut rng, d)).is_none());
    }
}
