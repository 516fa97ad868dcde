use std::collections::BTreeMap;
use super::{PnEstimateSet, PnGrid};
use crate::numerics::{cholesky_solve, SymMatrix};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    Mmse,
    Bilinear,
}

/// Zero-mean prior `var · ρ_t^{|Δsample|} · ρ_s^{|Δsymbol|}` over the phase
/// grid. Without an explicit variance it is set from the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnPrior {
    pub rho_t: f64,
    pub rho_s: f64,
    pub variance: Option<f64>,
}

impl Default for PnPrior {
    fn default() -> Self {
        PnPrior {
            rho_t: 0.999,
            rho_s: 0.95,
            variance: None,
        }
    }
}

impl PnPrior {
    /// Moment-matched prior from sample trajectories of the phase-noise
    /// process: mean power, lag-1 correlation along samples and lag
    /// `nc + n_cp` correlation across symbols, clamped to `[0, 1)`.
    pub fn from_trajectories(trajectories: &[&[f64]], nc: usize, n_cp: usize) -> Result<Self> {
        let lag_s = nc + n_cp;
        if trajectories.is_empty() || trajectories.iter().any(|t| t.len() <= lag_s) {
            return Err(Error::invalid("trajectories must be longer than one symbol"));
        }
        let (mut p0, mut n0, mut p1, mut n1, mut ps, mut nsym) = (0.0, 0usize, 0.0, 0usize, 0.0, 0usize);
        for t in trajectories {
            p0 += t.iter().map(|x| x * x).sum::<f64>();
            n0 += t.len();
            p1 += t.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
            n1 += t.len() - 1;
            ps += t.iter().zip(&t[lag_s..]).map(|(a, b)| a * b).sum::<f64>();
            nsym += t.len() - lag_s;
        }
        let var = p0 / n0 as f64;
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::invalid("trajectories carry no phase power"));
        }
        let clamp = |r: f64| r.clamp(0.0, 0.9999);
        Ok(PnPrior {
            rho_t: clamp(p1 / n1 as f64 / var),
            rho_s: clamp(ps / nsym as f64 / var),
            variance: Some(var),
        })
    }
}

const RIDGE: f64 = 1e-6;

/// Observed phases per symbol with their error variance
/// `noise_var / (2|s|²)`. Each phase is placed on the branch nearest the
/// symbol's weighted circular mean, so isolated outliers cannot drag the
/// rest of the symbol by multiples of 2π.
fn unwrapped(est: &PnEstimateSet, noise_var: f64) -> BTreeMap<usize, Vec<(usize, f64, f64)>> {
    let mut centre: BTreeMap<usize, C64> = BTreeMap::new();
    for e in &est.entries {
        *centre.entry(e.symbol).or_default() += e.psi * e.weight;
    }
    let mut by_symbol: BTreeMap<usize, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for e in &est.entries {
        let c = centre[&e.symbol].arg();
        let p = c + (e.psi * C64::from_polar(1.0, -c)).arg();
        by_symbol
            .entry(e.symbol)
            .or_default()
            .push((e.sample, p, noise_var / (2.0 * e.weight)));
    }
    for obs in by_symbol.values_mut() {
        obs.sort_by_key(|o| o.0);
    }
    by_symbol
}

/// Empirical-Bayes split of the observed phases: scatter within a symbol
/// beyond the per-entry noise becomes extra observation noise, and the
/// spread of per-symbol means sets the prior variance.
fn empirical_prior(obs: &BTreeMap<usize, Vec<(usize, f64, f64)>>) -> (f64, f64) {
    let n: usize = obs.values().map(Vec::len).sum();
    let mean_r = obs.values().flatten().map(|o| o.2).sum::<f64>() / n as f64;
    let (mut scatter, mut dof) = (0.0, 0usize);
    let mut means = Vec::with_capacity(obs.len());
    for v in obs.values() {
        let m = v.iter().map(|o| o.1).sum::<f64>() / v.len() as f64;
        scatter += v.iter().map(|o| (o.1 - m).powi(2)).sum::<f64>();
        dof += v.len() - 1;
        means.push((m, v.len()));
    }
    let extra = if dof > 0 { (scatter / dof as f64 - mean_r).max(0.0) } else { 0.0 };
    let noise = mean_r + extra;
    let spread = means.iter().map(|&(m, k)| m * m - noise / k as f64).sum::<f64>() / means.len() as f64;
    (extra, spread.max(1e-3 * noise).max(1e-12))
}

/// Fills the whole (sample × symbol) phase grid from scattered estimates.
pub fn interpolate_pn_grid(
    est: &PnEstimateSet,
    nc: usize,
    ns: usize,
    mode: InterpMode,
    prior: &PnPrior,
    noise_var: f64,
) -> Result<PnGrid> {
    if est.entries.is_empty() {
        return Err(Error::invalid("no phase estimates to interpolate"));
    }
    if let Some(e) = est.entries.iter().find(|e| e.sample >= nc || e.symbol >= ns) {
        return Err(Error::invalid(format!(
            "estimate at ({}, {}) outside {nc}x{ns} grid",
            e.sample, e.symbol
        )));
    }
    let obs = unwrapped(est, noise_var);
    match mode {
        InterpMode::Mmse => mmse(&obs, nc, ns, prior),
        InterpMode::Bilinear => Ok(bilinear(&obs, nc, ns)),
    }
}

fn mmse(obs: &BTreeMap<usize, Vec<(usize, f64, f64)>>, nc: usize, ns: usize, prior: &PnPrior) -> Result<PnGrid> {
    if !(0.0..=1.0).contains(&prior.rho_t) || !(0.0..=1.0).contains(&prior.rho_s) {
        return Err(Error::invalid("prior correlations must lie in [0, 1]"));
    }
    let mut flat: Vec<(usize, usize, f64, f64)> = obs
        .iter()
        .flat_map(|(&i, v)| v.iter().map(move |&(j, p, r)| (i, j, p, r)))
        .collect();
    let n = flat.len();
    let var = match prior.variance {
        Some(v) if v > 0.0 => v,
        Some(_) => return Err(Error::invalid("prior variance must be positive")),
        None => {
            let (extra, var) = empirical_prior(obs);
            flat.iter_mut().for_each(|o| o.3 += extra);
            var
        }
    };
    let pt: Vec<f64> = (0..nc).map(|d| prior.rho_t.powi(d as i32)).collect();
    let ps: Vec<f64> = (0..ns).map(|d| prior.rho_s.powi(d as i32)).collect();
    let cov = |i1: usize, j1: usize, i2: usize, j2: usize| var * pt[j1.abs_diff(j2)] * ps[i1.abs_diff(i2)];

    let mut a = SymMatrix::from_fn(n, |r, c| cov(flat[r].0, flat[r].1, flat[c].0, flat[c].1));
    a.add_diagonal(&flat.iter().map(|o| o.3).collect::<Vec<_>>());
    let b: Vec<f64> = flat.iter().map(|o| o.2).collect();
    let alpha = match cholesky_solve(&a, &b) {
        Ok(x) => x,
        Err(_) => {
            a.add_diagonal(&vec![RIDGE; n]);
            cholesky_solve(&a, &b).map_err(|_| Error::Internal("phase interpolation system is singular".into()))?
        }
    };
    let mut phases = vec![0.0; nc * ns];
    for i in 0..ns {
        for j in 0..nc {
            phases[i * nc + j] = flat
                .iter()
                .zip(&alpha)
                .map(|(o, w)| cov(i, j, o.0, o.1) * w)
                .sum();
        }
    }
    Ok(PnGrid { nc, ns, phases })
}

/// Piecewise-linear in `x` through `(x_n, y_n)`, constant beyond the ends.
fn linear(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let n = points.partition_point(|p| p.0 <= x);
    let (x0, y0) = points[n - 1];
    let (x1, y1) = points[n];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn bilinear(obs: &BTreeMap<usize, Vec<(usize, f64, f64)>>, nc: usize, ns: usize) -> PnGrid {
    let rows: Vec<(usize, Vec<f64>)> = obs
        .iter()
        .map(|(&i, v)| {
            let pts: Vec<(f64, f64)> = v.iter().map(|&(j, p, _)| (j as f64, p)).collect();
            (i, (0..nc).map(|j| linear(&pts, j as f64)).collect())
        })
        .collect();
    let mut phases = vec![0.0; nc * ns];
    for j in 0..nc {
        let pts: Vec<(f64, f64)> = rows.iter().map(|(i, r)| (*i as f64, r[j])).collect();
        for i in 0..ns {
            phases[i * nc + j] = linear(&pts, i as f64);
        }
    }
    PnGrid { nc, ns, phases }
}
