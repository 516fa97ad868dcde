use std::collections::BTreeMap;

use super::{ComplexGrid, SparseGrid};
use crate::{Error, Result, C64};

/// Natural cubic spline through `(xs[i], ys[i])`.
///
/// Beyond the outer knots the spline continues along its end tangent, which
/// is where the natural boundary condition (zero curvature) leaves it. One
/// knot gives a constant, two knots a straight line.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<C64>,
    // second derivatives at the knots
    m: Vec<C64>,
}

pub fn natural_cubic_spline(xs: &[f64], ys: &[C64]) -> Result<NaturalCubicSpline> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::invalid("spline needs equal, non-zero knot and value counts"));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("spline knots must be strictly increasing"));
    }
    let n = xs.len();
    let mut m = vec![C64::new(0.0, 0.0); n];
    if n >= 3 {
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let inner = n - 2;
        let mut diag = vec![0.0; inner];
        let mut rhs = vec![C64::new(0.0, 0.0); inner];
        let mut upper = vec![0.0; inner];
        for j in 0..inner {
            let i = j + 1;
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        for j in 1..inner {
            let w = h[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            let prev = rhs[j - 1];
            rhs[j] -= prev * w;
        }
        m[inner] = rhs[inner - 1] / diag[inner - 1];
        for j in (0..inner - 1).rev() {
            m[j + 1] = (rhs[j] - m[j + 2] * upper[j]) / diag[j];
        }
    }
    Ok(NaturalCubicSpline {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        m,
    })
}

impl NaturalCubicSpline {
    pub fn eval(&self, x: f64) -> C64 {
        let n = self.xs.len();
        if n == 1 {
            return self.ys[0];
        }
        let (x0, xn) = (self.xs[0], self.xs[n - 1]);
        if x < x0 {
            return self.ys[0] + self.slope(0, true) * (x - x0);
        }
        if x > xn {
            return self.ys[n - 1] + self.slope(n - 2, false) * (x - xn);
        }
        let seg = match self.xs.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let (xa, xb) = (self.xs[seg], self.xs[seg + 1]);
        let h = xb - xa;
        let a = (xb - x) / h;
        let b = (x - xa) / h;
        self.ys[seg] * a
            + self.ys[seg + 1] * b
            + (self.m[seg] * (a * a * a - a) + self.m[seg + 1] * (b * b * b - b)) * (h * h / 6.0)
    }

    // Derivative at the left (start=true) or right end of segment `seg`.
    fn slope(&self, seg: usize, start: bool) -> C64 {
        let h = self.xs[seg + 1] - self.xs[seg];
        let secant = (self.ys[seg + 1] - self.ys[seg]) / h;
        if start {
            secant - (self.m[seg] * 2.0 + self.m[seg + 1]) * (h / 6.0)
        } else {
            secant + (self.m[seg] + self.m[seg + 1] * 2.0) * (h / 6.0)
        }
    }
}

/// How a 2D spline fit was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineStatus {
    Full2d,
    /// All points on one OFDM symbol: spline along frequency, held in time.
    AlongFrequencyOnly,
    /// All points on one subcarrier: spline along time, held in frequency.
    AlongTimeOnly,
}

#[derive(Debug, Clone)]
pub struct SplineFit {
    pub grid: ComplexGrid,
    pub status: SplineStatus,
}

/// Separable cubic-spline completion of a sparse grid.
///
/// Each symbol that carries points is first completed along frequency;
/// every subcarrier is then completed along time through those symbols.
/// Real and imaginary parts are independent because the fit is linear.
pub fn spline_interpolate_2d(sparse: &SparseGrid) -> Result<SplineFit> {
    let (nc, ns) = sparse.dims();
    if sparse.mask().is_empty() {
        return Err(Error::invalid("spline_interpolate_2d: empty mask"));
    }
    let mut by_symbol: BTreeMap<usize, BTreeMap<usize, C64>> = BTreeMap::new();
    for &(k, i) in sparse.mask() {
        by_symbol.entry(i).or_default().insert(k, sparse.grid().get(k, i));
    }
    let mut rows: Vec<usize> = sparse.mask().iter().map(|&(k, _)| k).collect();
    rows.sort_unstable();
    rows.dedup();

    let along_frequency = |points: &BTreeMap<usize, C64>| -> Result<Vec<C64>> {
        let xs: Vec<f64> = points.keys().map(|&k| k as f64).collect();
        let ys: Vec<C64> = points.values().copied().collect();
        let s = natural_cubic_spline(&xs, &ys)?;
        Ok((0..nc).map(|k| s.eval(k as f64)).collect())
    };

    if by_symbol.len() == 1 {
        let (_, points) = by_symbol.iter().next().unwrap();
        let col = along_frequency(points)?;
        let grid = ComplexGrid::from_fn(nc, ns, |k, _| col[k]);
        return Ok(SplineFit {
            grid,
            status: SplineStatus::AlongFrequencyOnly,
        });
    }

    let status = if rows.len() == 1 {
        SplineStatus::AlongTimeOnly
    } else {
        SplineStatus::Full2d
    };
    let symbols: Vec<f64> = by_symbol.keys().map(|&i| i as f64).collect();
    let columns: Vec<Vec<C64>> = by_symbol
        .values()
        .map(|points| {
            if status == SplineStatus::AlongTimeOnly {
                let v = *points.values().next().unwrap();
                Ok(vec![v; nc])
            } else {
                along_frequency(points)
            }
        })
        .collect::<Result<_>>()?;

    let mut grid = ComplexGrid::zeros(nc, ns);
    for k in 0..nc {
        let ys: Vec<C64> = columns.iter().map(|c| c[k]).collect();
        let s = natural_cubic_spline(&symbols, &ys)?;
        for i in 0..ns {
            grid.set(k, i, s.eval(i as f64));
        }
    }
    Ok(SplineFit { grid, status })
}
