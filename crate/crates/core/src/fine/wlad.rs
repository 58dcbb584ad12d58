//! Weighted least-absolute-deviation regression by iteratively reweighted
//! least squares.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_PARAMS: usize = 8;
pub type Row = [f64; N_PARAMS];

type Mat8 = SMatrix<f64, N_PARAMS, N_PARAMS>;
type Vec8 = SVector<f64, N_PARAMS>;

/// Smallest accepted eigenvalue ratio of the column-normalized normal matrix.
const RANK_RTOL: f64 = 1e-12;
/// Backtracking halvings tried when a reweighted step raises the objective.
const MAX_BACKTRACK: usize = 4;

/// How residuals are scaled before the `1 / (1 + |d|)` reweighting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualScale {
    /// Raw residuals.
    Unit,
    /// Residuals divided by their median magnitude from the previous pass.
    Adaptive,
}

impl std::str::FromStr for ResidualScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(ResidualScale::Unit),
            "adaptive" => Ok(ResidualScale::Adaptive),
            other => Err(Error::Parameter(format!("unknown residual scale '{other}'"))),
        }
    }
}

impl std::fmt::Display for ResidualScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResidualScale::Unit => "unit",
            ResidualScale::Adaptive => "adaptive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WladOptions {
    pub max_iters: usize,
    /// Stop once no coefficient moves by more than this.
    pub tol: f64,
    pub scale: ResidualScale,
}

impl Default for WladOptions {
    fn default() -> Self {
        WladOptions {
            max_iters: 10,
            tol: 1e-6,
            scale: ResidualScale::Adaptive,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WladSolution {
    pub x: Row,
    /// `B x - l` at the returned solution.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Weighted L1 objective after each accepted iteration.
    pub objective_trace: Vec<f64>,
}

impl WladSolution {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one iteration")
    }
}

/// Solves the weighted normal equations `(Bᵀ W B) x = Bᵀ W l`.
///
/// Columns are equilibrated before factorization; a normal matrix whose
/// equilibrated spectrum spans more than `1e12` is reported as rank deficient.
pub fn weighted_least_squares(b: &[Row], l: &[f64], w: &[f64]) -> Result<Row> {
    assert_eq!(b.len(), l.len());
    assert_eq!(b.len(), w.len());
    let mut n = Mat8::zeros();
    let mut rhs = Vec8::zeros();
    for ((row, &li), &wi) in b.iter().zip(l).zip(w) {
        for j in 0..N_PARAMS {
            let wr = wi * row[j];
            rhs[j] += wr * li;
            for k in j..N_PARAMS {
                n[(j, k)] += wr * row[k];
            }
        }
    }
    for j in 0..N_PARAMS {
        for k in 0..j {
            n[(j, k)] = n[(k, j)];
        }
    }
    if !n.iter().chain(rhs.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numeric("normal equations"));
    }
    let diag_max = (0..N_PARAMS).map(|j| n[(j, j)]).fold(0.0, f64::max);
    if !(diag_max > 0.0) {
        return Err(Error::Rank);
    }
    let mut d = Vec8::zeros();
    for j in 0..N_PARAMS {
        let v = n[(j, j)];
        if v <= RANK_RTOL * diag_max {
            return Err(Error::Rank);
        }
        d[j] = 1.0 / v.sqrt();
    }
    let scaled = Mat8::from_fn(|j, k| n[(j, k)] * d[j] * d[k]);
    let eig = scaled.symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(lo > RANK_RTOL * hi) {
        return Err(Error::Rank);
    }
    let chol = scaled.cholesky().ok_or(Error::Rank)?;
    let y = chol.solve(&rhs.component_mul(&d));
    let x = y.component_mul(&d);
    let mut out = [0.0; N_PARAMS];
    out.copy_from_slice(x.as_slice());
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Numeric("solution"))
    }
}

fn residuals(b: &[Row], l: &[f64], x: &Row) -> Vec<f64> {
    b.iter()
        .zip(l)
        .map(|(row, &li)| row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() - li)
        .collect()
}

fn l1(d: &[f64], w: &[f64]) -> f64 {
    d.iter().zip(w).map(|(r, wi)| wi * r.abs()).sum()
}

fn median_abs(d: &[f64]) -> f64 {
    let mut a: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let mid = a.len() / 2;
    *a.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Minimizes `Σ w_struct_i · |B_i x - l_i|`.
///
/// The first pass is weighted least squares with the structural weights.
/// Later passes multiply them by `1 / (1 + |d_i| / s)` where `d` are the
/// previous residuals and `s` is 1 or the median absolute residual (see
/// [`ResidualScale`]). A pass that would raise the weighted L1 objective is
/// pulled back towards the previous estimate by halving; if that fails the
/// iteration stops, so the recorded objective never increases.
pub fn wlad_solve(b: &[Row], l: &[f64], w_struct: &[f64], opts: &WladOptions) -> Result<WladSolution> {
    if b.len() < 16 {
        return Err(Error::Parameter(format!("need at least 16 observations, got {}", b.len())));
    }
    if b.len() != l.len() || b.len() != w_struct.len() {
        return Err(Error::Parameter("observation, row and weight counts differ".into()));
    }
    if l.iter().chain(w_struct).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("observations"));
    }
    let l_inf = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let exact = 1e-12 * (1.0 + l_inf);
    let scale_floor = 1e-10 * (1.0 + l_inf);

    let mut x = weighted_least_squares(b, l, w_struct)?;
    let mut d = residuals(b, l, &x);
    let mut obj = l1(&d, w_struct);
    let mut trace = vec![obj];
    let mut iterations = 1;

    let mut w = vec![0.0; b.len()];
    while iterations < opts.max_iters {
        if d.iter().all(|r| r.abs() <= exact) {
            break;
        }
        let s = match opts.scale {
            ResidualScale::Unit => 1.0,
            ResidualScale::Adaptive => median_abs(&d).max(scale_floor),
        };
        for ((wi, ws), di) in w.iter_mut().zip(w_struct).zip(&d) {
            *wi = ws / (1.0 + di.abs() / s);
        }
        let proposal = weighted_least_squares(b, l, &w)?;

        let mut accepted = None;
        let mut frac = 1.0;
        for _ in 0..=MAX_BACKTRACK {
            let mut cand = x;
            for (c, (p, x0)) in cand.iter_mut().zip(proposal.iter().zip(&x)) {
                *c = x0 + frac * (p - x0);
            }
            let dc = residuals(b, l, &cand);
            let oc = l1(&dc, w_struct);
            if oc <= obj {
                accepted = Some((cand, dc, oc));
                break;
            }
            frac *= 0.5;
        }
        let Some((cand, dc, oc)) = accepted else { break };
        let change = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = cand;
        d = dc;
        obj = oc;
        trace.push(obj);
        iterations += 1;
        if change < opts.tol {
            break;
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("residuals"));
    }
    Ok(WladSolution {
        x,
        residuals: d,
        iterations,
        objective_trace: trace,
    })
}
