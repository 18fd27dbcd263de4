//! Beamformer weight computation.
//!
//! [`cg_solve`] minimizes `f(w) = ½ wᴴRw + Re(wᴴâ)` with Polak-Ribiere-Polyak
//! conjugate gradients, touching `R` only through [`IncModel::apply`]. The
//! minimizer is `−R⁻¹â`; the final rescale to `wᴴâ = 1` gives MVDR weights.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inc::IncModel;
use crate::linalg::{dot_h, norm_sqr, CMat, CVec, Cholesky, OpCounter};
use crate::spectrum::CovarianceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CmrIsps,
    CmrIspsDirect,
    Smi,
    CaponBaseline,
    Optimal,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CmrIsps,
        Method::CmrIspsDirect,
        Method::Smi,
        Method::CaponBaseline,
        Method::Optimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CmrIsps => "cmr-isps",
            Method::CmrIspsDirect => "cmr-isps-direct",
            Method::Smi => "smi",
            Method::CaponBaseline => "capon-baseline",
            Method::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `wᴴâ = 1`.
    Distortionless,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub w: CVec,
    pub normalization: Normalization,
    pub method: Method,
}

/// Rescales `w` so that `wᴴa = 1`.
pub fn distortionless(w: &CVec, a: &CVec) -> Result<CVec> {
    let g = dot_h(w, a);
    if !(g.norm() > 0.0) || !g.is_finite() {
        return Err(Error::ZeroSteering);
    }
    Ok(w / g.conj())
}

/// Iterate history of a conjugate-gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct CgState {
    pub w: CVec,
    pub g: CVec,
    pub d: CVec,
    pub mu: f64,
    pub beta: f64,
    pub iter: usize,
    /// `‖∇f(w_t)‖` for `t = 0..=iter`.
    pub grad_norms: Vec<f64>,
    /// `f(w_t)` for `t = 0..=iter`.
    pub costs: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CgOptions {
    /// Absolute gradient-norm tolerance; `1e-6·‖â‖` when unset.
    pub tol: Option<f64>,
    /// Iteration cap; `2M` when unset.
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub weights: BeamformerWeights,
    /// Unnormalized minimizer `w_t`.
    pub raw: CVec,
    pub state: CgState,
}

/// `½ wᴴRw + Re(wᴴâ)`.
pub fn cost(inc: &IncModel, a_hat: &CVec, w: &CVec) -> f64 {
    0.5 * inc.quadratic(w) + dot_h(w, a_hat).re
}

/// `Rw + â`.
pub fn gradient(inc: &IncModel, a_hat: &CVec, w: &CVec, counter: Option<&OpCounter>) -> CVec {
    inc.apply(w, counter) + a_hat
}

/// `Re(g_newᴴ(g_new − g_old)) / ‖g_old‖²`.
pub fn prp_beta(g_new: &CVec, g_old: &CVec) -> f64 {
    let den = norm_sqr(g_old);
    if den == 0.0 {
        return 0.0;
    }
    dot_h(g_new, &(g_new - g_old)).re / den
}

pub fn cg_solve(inc: &IncModel, a_hat: &CVec, opts: CgOptions, counter: Option<&OpCounter>) -> Result<CgSolution> {
    let m = inc.dim();
    let a_norm = norm_sqr(a_hat).sqrt();
    if !(a_norm > 0.0) {
        return Err(Error::ZeroSteering);
    }
    let tol = opts.tol.unwrap_or(1e-6 * a_norm);
    let max_iter = opts.max_iter.unwrap_or(2 * m);

    let mut w = CVec::from_element(m, Complex64::new(1.0, 0.0));
    let mut g = gradient(inc, a_hat, &w, counter);
    let mut d = -&g;
    let mut state = CgState {
        w: w.clone(),
        g: g.clone(),
        d: d.clone(),
        mu: 0.0,
        beta: 0.0,
        iter: 0,
        grad_norms: vec![norm_sqr(&g).sqrt()],
        costs: vec![cost(inc, a_hat, &w)],
        converged: false,
    };

    while state.iter < max_iter {
        if *state.grad_norms.last().unwrap() <= tol {
            state.converged = true;
            break;
        }
        let rd = inc.apply(&d, counter);
        let curvature = dot_h(&d, &rd).re;
        let mu = -dot_h(&d, &g).re / curvature;
        if !mu.is_finite() || !(curvature > 0.0) {
            return Err(Error::Diverged {
                iter: state.iter,
                state: Box::new(state),
            });
        }
        w.axpy(Complex64::new(mu, 0.0), &d, Complex64::new(1.0, 0.0));
        let g_new = gradient(inc, a_hat, &w, counter);
        let beta = prp_beta(&g_new, &g);
        d = &d * Complex64::new(beta, 0.0) - &g_new;
        if dot_h(&g_new, &d).re > 0.0 {
            d = -&g_new;
        }
        g = g_new;

        let gn = norm_sqr(&g).sqrt();
        if !gn.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iter: state.iter + 1,
                state: Box::new(state),
            });
        }
        state.iter += 1;
        state.mu = mu;
        state.beta = beta;
        state.grad_norms.push(gn);
        state.costs.push(cost(inc, a_hat, &w));
    }
    if *state.grad_norms.last().unwrap() <= tol {
        state.converged = true;
    }
    state.w = w.clone();
    state.g = g;
    state.d = d;

    Ok(CgSolution {
        weights: BeamformerWeights {
            w: distortionless(&w, a_hat)?,
            normalization: Normalization::Distortionless,
            method: Method::CmrIsps,
        },
        raw: w,
        state,
    })
}

/// `R⁻¹a / (aᴴR⁻¹a)` via a Cholesky solve of an explicit matrix.
pub fn mvdr(r: &CMat, a: &CVec, method: Method, counter: Option<&OpCounter>) -> Result<BeamformerWeights> {
    let chol = Cholesky::factor(r, counter).ok_or_else(|| Error::Singular {
        condition: crate::linalg::condition_estimate(r),
    })?;
    let x = chol.solve(a, counter);
    Ok(BeamformerWeights {
        w: distortionless(&x, a)?,
        normalization: Normalization::Distortionless,
        method,
    })
}

/// Closed-form weights from the materialized reconstruction.
pub fn direct_weights(inc: &IncModel, a_hat: &CVec) -> Result<BeamformerWeights> {
    direct_weights_counted(inc, a_hat, None)
}

/// As [`direct_weights`], tallying factorization and solve work.
pub fn direct_weights_counted(inc: &IncModel, a_hat: &CVec, counter: Option<&OpCounter>) -> Result<BeamformerWeights> {
    if !(norm_sqr(a_hat) > 0.0) {
        return Err(Error::ZeroSteering);
    }
    let r = match inc.explicit() {
        Some(r) => r.clone(),
        None => inc.to_matrix(),
    };
    mvdr(&r, a_hat, Method::CmrIspsDirect, counter)
}

/// Sample matrix inversion with the presumed steering vector.
pub fn smi_weights(r_hat: &CovarianceMatrix, a_bar: &CVec) -> Result<BeamformerWeights> {
    mvdr(&r_hat.loaded(), a_bar, Method::Smi, None)
}
