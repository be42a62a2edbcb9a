//! Critical age as a function of carbon intensity at a fixed carbon price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::whittle::{critical_age, IndexContext};

use super::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub xi: f64,
    /// Effective per-update cost C(ξ).
    pub cost: f64,
    pub critical_age: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTable {
    pub lambda: f64,
    pub rows: Vec<BoundaryRow>,
    /// Slope of ln Δ_crit against ln C over rows with C > 0; `None` when fewer
    /// than two such rows have distinct cost.
    pub fitted_exponent: Option<f64>,
}

/// Rows of Δ_crit over an increasing ξ grid. `ctx_base` supplies μ, E and
/// the duty term; its λ is replaced by `lambda_star`.
pub fn boundary_table(xi_grid: &[f64], ctx_base: &IndexContext, lambda_star: f64) -> Result<BoundaryTable> {
    if xi_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("ξ grid must be strictly increasing"));
    }
    let base = IndexContext { lambda: lambda_star, ..*ctx_base };
    base.check()?;
    let rows: Vec<BoundaryRow> = xi_grid
        .iter()
        .map(|&xi| {
            let ctx = base.at_xi(xi);
            BoundaryRow { xi, cost: ctx.cost(), critical_age: critical_age(&ctx) }
        })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.cost > 0.0).map(|r| (r.cost.ln(), (r.critical_age as f64).ln())).unzip();
    let fitted_exponent = linear_fit(&lx, &ly).map(|f| f.slope);
    Ok(BoundaryTable { lambda: lambda_star, rows, fitted_exponent })
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}
