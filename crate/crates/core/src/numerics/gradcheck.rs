//! Finite-difference verification of tape gradients (64-bit only).

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates to probe; all coordinates when the parameter set is smaller.
    pub samples: usize,
    /// Denominator floor of the relative error, guarding near-zero gradients.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            samples: 256,
            floor: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(tensor index, element index)` of the worst coordinate.
    pub worst: (usize, usize),
}

pub(crate) fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn eval_loss<F>(f: &F, params: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let loss = f(&mut tape, &vars)?;
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(Error::Shape("gradient check needs a scalar loss".into()));
    }
    Ok(v.data()[0])
}

/// Compares reverse-mode gradients of the scalar computation `f` with
/// central finite differences over sampled parameter coordinates.
pub fn check_gradients<F>(f: F, params: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
{
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
        let loss = f(&mut tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter()
            .zip(params)
            .map(|(v, p)| grads.get(*v).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]))
            .collect()
    };

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(t, p)| (0..p.len()).map(move |e| (t, e)))
        .collect();
    let chosen: Vec<(usize, usize)> = if coords.len() <= opts.samples {
        coords
    } else {
        let mut rng = RngStream::new(opts.seed);
        let mut idx: Vec<usize> = (0..coords.len()).collect();
        rng.shuffle(&mut idx);
        idx.truncate(opts.samples);
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    };

    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: (0, 0),
    };
    for (t, e) in chosen {
        let orig = work[t].data()[e];
        work[t].data_mut()[e] = orig + opts.step;
        let plus = eval_loss(&f, &work)?;
        work[t].data_mut()[e] = orig - opts.step;
        let minus = eval_loss(&f, &work)?;
        work[t].data_mut()[e] = orig;
        let numeric = (plus - minus) / (2.0 * opts.step);
        let err = relative_error(analytic[t][e], numeric, opts.floor);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = (t, e);
        }
        report.checked += 1;
    }
    Ok(report)
}
