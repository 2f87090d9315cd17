use super::WaveletSpec;
use crate::error::{Error, Result};

/// Multi-stage decomposition; index `k` holds stage `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtPyramid {
    pub approximations: Vec<Vec<f64>>,
    pub details: Vec<Vec<f64>>,
    pub stages: usize,
}

impl DwtPyramid {
    pub fn final_approximation(&self) -> &[f64] {
        self.approximations.last().map_or(&[], Vec::as_slice)
    }
}

/// One analysis stage with periodic extension:
/// `a[k] = sum_j h[j] x[(2k + j) mod N]`, likewise `d` with the highpass.
/// Odd-length inputs are first extended by repeating the last sample.
pub fn dwt_step(x: &[f64], w: &WaveletSpec) -> (Vec<f64>, Vec<f64>) {
    let mut ext;
    let x = if x.len() % 2 == 1 {
        ext = x.to_vec();
        ext.push(*x.last().unwrap());
        ext.as_slice()
    } else {
        x
    };
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (j, (h, g)) in w.lowpass.iter().zip(&w.highpass).enumerate() {
            let v = x[(2 * k + j) % n];
            sa += h * v;
            sd += g * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

/// Synthesis stage; exact inverse of [`dwt_step`] on even-length input.
pub fn idwt_step(a: &[f64], d: &[f64], w: &WaveletSpec) -> Result<Vec<f64>> {
    if a.len() != d.len() {
        return Err(Error::ShapeMismatch(format!(
            "approximation ({}) and detail ({}) lengths differ",
            a.len(),
            d.len()
        )));
    }
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (j, (h, g)) in w.lowpass.iter().zip(&w.highpass).enumerate() {
            x[(2 * k + j) % n] += h * a[k] + g * d[k];
        }
    }
    Ok(x)
}

/// Cascade `stages` analysis steps, each on the previous approximation.
pub fn dwt_decompose(signal: &[f64], w: &WaveletSpec, stages: usize) -> Result<DwtPyramid> {
    if stages == 0 {
        return Err(Error::InvalidInput("dwt needs at least one stage".into()));
    }
    if signal.len() < w.len() {
        return Err(Error::InvalidInput(format!(
            "signal of {} samples is shorter than the {}-tap {} filter",
            signal.len(),
            w.len(),
            w.name()
        )));
    }
    let mut approximations = Vec::with_capacity(stages);
    let mut details = Vec::with_capacity(stages);
    let mut cur = signal.to_vec();
    for _ in 0..stages {
        let (a, d) = dwt_step(&cur, w);
        cur = a.clone();
        approximations.push(a);
        details.push(d);
    }
    Ok(DwtPyramid {
        approximations,
        details,
        stages,
    })
}
