use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    x - TWO_PI * ((x - PI) / TWO_PI).ceil()
}

/// Removes 2π jumps so that adjacent differences lie in `(−π, π]`.
///
/// The first sample is kept as is; each later sample is moved by a multiple
/// of 2π.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut iter = phases.iter();
    let Some(&first) = iter.next() else {
        return out;
    };
    out.push(first);
    let mut prev_raw = first;
    let mut prev_out = first;
    for &p in iter {
        let step = wrap_to_pi(p - prev_raw);
        prev_out += step;
        prev_raw = p;
        out.push(prev_out);
    }
    out
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Fits a line through `(x, y)` pairs. Returns `None` for fewer than two
/// points or degenerate abscissae.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (xi, yi) in x[..n].iter().zip(&y[..n]) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}
