use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use nalgebra::DVector;

use crate::error::{HjError, Result};
use crate::gibbs::model::{sqrt_two_h, ModelSpec, Prior};
use crate::gibbs::table::log_sum_exp;
use crate::symcone::{is_psd, SymMatrix, PSD_TOL};

pub const MIN_QUAD_ORDER: usize = 16;

/// Nodes and weights of the standard normal from Gauss-Hermite.
pub fn normal_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let deg = NonZeroUsize::new(order)
        .ok_or_else(|| HjError::InvalidArgument("quadrature order must be positive".into()))?;
    let rule = GaussHermite::new(deg);
    let nodes = rule.nodes().map(|x| std::f64::consts::SQRT_2 * x).collect();
    let weights = rule
        .weights()
        .map(|w| w / std::f64::consts::PI.sqrt())
        .collect();
    Ok((nodes, weights))
}

/// `F-bar_1(0, h)` for a single row with the given prior.
pub fn psi_row(prior: &Prior, h: &SymMatrix, quad_order: usize) -> Result<f64> {
    if quad_order < MIN_QUAD_ORDER {
        return Err(HjError::InvalidArgument(format!(
            "quadrature order must be at least {MIN_QUAD_ORDER}"
        )));
    }
    let k = prior.k();
    if h.dim() != k {
        return Err(HjError::DimensionMismatch {
            expected: k,
            got: h.dim(),
        });
    }
    if !is_psd(h, PSD_TOL) {
        return Err(HjError::NotPsd {
            min_eigenvalue: h.min_eigenvalue(),
        });
    }
    let (nodes, weights) = normal_rule(quad_order)?;
    let r = sqrt_two_h(h).to_dense();
    let hd = h.to_dense();
    let atoms: Vec<DVector<f64>> = prior
        .atoms()
        .iter()
        .map(|a| DVector::from_column_slice(a))
        .collect();
    let log_w: Vec<f64> = prior.weights().iter().map(|w| w.ln()).collect();
    // x^T r and x^T h x per atom.
    let xr: Vec<DVector<f64>> = atoms.iter().map(|x| r.transpose() * x).collect();
    let quad: Vec<f64> = atoms
        .iter()
        .map(|x| (x.transpose() * &hd * x)[(0, 0)])
        .collect();
    let total_nodes = quad_order.pow(k as u32);
    let mut total = 0.0;
    for (xi, px) in atoms.iter().zip(prior.weights()) {
        if *px == 0.0 {
            continue;
        }
        let shift = &r * xi;
        let mut inner = 0.0;
        let mut zv = DVector::zeros(k);
        let mut lw = vec![0.0; atoms.len()];
        for m in 0..total_nodes {
            let mut rest = m;
            let mut wz = 1.0;
            for j in (0..k).rev() {
                let d = rest % quad_order;
                rest /= quad_order;
                zv[j] = nodes[d];
                wz *= weights[d];
            }
            let ybar = &shift + &zv;
            for (c, l) in lw.iter_mut().enumerate() {
                *l = log_w[c] + xr[c].dot(&ybar) - quad[c];
            }
            inner += wz * log_sum_exp(&lw);
        }
        total += px * inner;
    }
    Ok(total)
}

/// `psi(h) = F-bar_1(0, h)` for the row prior of an i.i.d. model.
pub fn psi_decoupled(ms: &ModelSpec, h: &SymMatrix, quad_order: usize) -> Result<f64> {
    if !ms.is_iid() {
        return Err(HjError::InvalidArgument(
            "the decoupled initial condition needs i.i.d. rows".into(),
        ));
    }
    psi_row(ms.row_prior(0), h, quad_order)
}
