//! The variational energy of droplet sequences and numerical minimization of
//! the sharp metastability constant λ.
//!
//! The work of growing droplet D into D ⊆ D' is
//!   W(D, D') = Σ_u h_u(m_u(D)) · s_u(D, D')
//! over the frame directions, where m_u is the dimension of the smaller
//! droplet and s_u the per-direction location of the larger relative to the
//! smaller, with the conventions s_u = 0 ⇒ term 0 (even for infinite h) and
//! m_u = 0, s_u > 0 ⇒ term +∞. The energy of a growing sequence is half the
//! sum of consecutive works, extended to arbitrarily small and large droplets
//! by dyadic shrinking/doubling; λ is the infimum over sequences.

use crate::direction::Direction;
use crate::droplet::{DirectionFrame, Droplet, DropletError};
use crate::hfun::HFunction;
use crate::rng::CounterRng;
use crate::DropletF64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LambdaError {
    #[error("h assignment has {got} entries for a frame of {want} directions")]
    AssignmentLength { got: usize, want: usize },
    #[error("sequence needs at least one droplet")]
    EmptySequence,
    #[error("sequence radii must be positive and nondecreasing row to row")]
    NotMonotone,
    #[error("dyadic {0} correction did not converge: the energy diverges")]
    Divergent(&'static str),
    #[error(transparent)]
    Droplet(#[from] DropletError),
}

/// One cost function per frame direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HAssignment {
    fns: Vec<HFunction>,
}

impl HAssignment {
    pub fn uniform(frame: &DirectionFrame, h: HFunction) -> HAssignment {
        HAssignment {
            fns: vec![h; frame.dirs().len()],
        }
    }

    pub fn per_direction(
        frame: &DirectionFrame,
        fns: Vec<HFunction>,
    ) -> Result<HAssignment, LambdaError> {
        if fns.len() != frame.dirs().len() {
            return Err(LambdaError::AssignmentLength {
                got: fns.len(),
                want: frame.dirs().len(),
            });
        }
        Ok(HAssignment { fns })
    }

    pub fn get(&self, i: usize) -> &HFunction {
        &self.fns[i]
    }
}

const ZERO_TOL: f64 = 1e-12;

fn work_terms(
    m: &[f64],
    s: &[f64],
    h: &HAssignment,
    scale_x: f64,
    scale_out: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..m.len() {
        if s[i] <= ZERO_TOL {
            continue;
        }
        if m[i] <= ZERO_TOL {
            return f64::INFINITY;
        }
        total += scale_out * h.get(i).eval(scale_x * m[i]) * s[i];
    }
    total
}

/// W(D, D'): the work of growing `d1` into `d2 ⊇ d1`.
pub fn work(d1: &DropletF64, d2: &DropletF64, h: &HAssignment) -> Result<f64, LambdaError> {
    let (s, _) = d1.location(d2)?;
    let m = d1.metrics().dimension;
    Ok(work_terms(&m, &s, h, 1.0, 1.0))
}

/// Finite-density work: p^α · Σ_u h_u(p^α · m_u) · s_u, whose p → 0 limit is
/// [`work`] after the droplet coordinates are rescaled by p^α.
pub fn work_p(
    d1: &DropletF64,
    d2: &DropletF64,
    h: &HAssignment,
    p: f64,
    alpha: u32,
) -> Result<f64, LambdaError> {
    let (s, _) = d1.location(d2)?;
    let m = d1.metrics().dimension;
    let f = p.powi(alpha as i32);
    Ok(work_terms(&m, &s, h, f, f))
}

/// A nested sequence of droplets over one frame, stored as rows of raw radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DropletSequence {
    frame: DirectionFrame,
    rows: Vec<Vec<f64>>,
}

impl DropletSequence {
    pub fn new(frame: DirectionFrame, rows: Vec<Vec<f64>>) -> Result<DropletSequence, LambdaError> {
        if rows.is_empty() {
            return Err(LambdaError::EmptySequence);
        }
        let k = frame.dirs().len();
        let ok = rows.iter().all(|r| r.len() == k && r.iter().all(|&a| a > 0.0))
            && rows
                .windows(2)
                .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
        if !ok {
            return Err(LambdaError::NotMonotone);
        }
        Ok(DropletSequence { frame, rows })
    }

    pub fn frame(&self) -> &DirectionFrame {
        &self.frame
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn droplet(&self, i: usize) -> Result<DropletF64, DropletError> {
        Droplet::new(self.frame.clone(), self.rows[i].clone())
    }
}

const DYADIC_TOL: f64 = 1e-8;
const DYADIC_CAP: usize = 800;
/// Step ratio of the head/tail ladders: quarter octaves keep the
/// discretization error of the corrections well below the target accuracy.
const DYADIC_STEP: f64 = 1.189_207_115_002_721_1; // 2^(1/4)
/// Smallest droplet scale the head recursion descends to: well above the
/// geometric tolerance regime; the contribution below it is O(ε·log 1/ε).
const HEAD_SCALE_FLOOR: f64 = 1e-7;

fn scaled(frame: &DirectionFrame, row: &[f64], factor: f64) -> Result<DropletF64, DropletError> {
    Droplet::new(frame.clone(), row.iter().map(|a| a * factor).collect())
}

fn work_rows(
    frame: &DirectionFrame,
    r1: &[f64],
    r2: &[f64],
    h: &HAssignment,
) -> Result<f64, LambdaError> {
    let d1 = Droplet::new(frame.clone(), r1.to_vec())?;
    let d2 = Droplet::new(frame.clone(), r2.to_vec())?;
    work(&d1, &d2, h)
}

/// Dyadic head correction: … ⊂ D₀/4 ⊂ D₀/2 ⊂ D₀.
fn head_sum(frame: &DirectionFrame, first: &[f64], h: &HAssignment) -> Result<f64, LambdaError> {
    let scale0 = first.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut total = 0.0_f64;
    let mut outer_factor = 1.0;
    for step in 0.. {
        if step >= DYADIC_CAP || !total.is_finite() {
            return Err(LambdaError::Divergent("head"));
        }
        let inner = scaled(frame, first, outer_factor / DYADIC_STEP)?;
        let outer = scaled(frame, first, outer_factor)?;
        let e = work(&inner, &outer, h)?;
        total += e;
        outer_factor /= DYADIC_STEP;
        if e.is_finite() && (e < DYADIC_TOL || outer_factor * scale0 < HEAD_SCALE_FLOOR) {
            break;
        }
    }
    Ok(total)
}

/// Dyadic tail correction: D_N ⊂ 2·D_N ⊂ 4·D_N ⊂ …
fn tail_sum(frame: &DirectionFrame, last: &[f64], h: &HAssignment) -> Result<f64, LambdaError> {
    let mut total = 0.0;
    let mut inner_factor = 1.0;
    let mut prev = f64::INFINITY;
    for step in 0.. {
        let inner = scaled(frame, last, inner_factor)?;
        let outer = scaled(frame, last, inner_factor * DYADIC_STEP)?;
        let e = work(&inner, &outer, h)?;
        total += e;
        inner_factor *= DYADIC_STEP;
        if e < DYADIC_TOL {
            break;
        }
        // the increments of a convergent tail shrink; growth means divergence
        if step >= DYADIC_CAP || !e.is_finite() || (step > 0 && e >= prev) {
            return Err(LambdaError::Divergent("tail"));
        }
        prev = e;
    }
    Ok(total)
}

/// Energy 𝒲 of the sequence: half the sum of consecutive works, plus the
/// dyadic head (shrinking the first droplet towards a point) and tail
/// (doubling the last towards infinity) corrections.
pub fn sequence_energy(seq: &DropletSequence, h: &HAssignment) -> Result<f64, LambdaError> {
    let frame = &seq.frame;
    let mut total = 0.0;
    for w in seq.rows.windows(2) {
        total += work_rows(frame, &w[0], &w[1], h)?;
    }
    total += head_sum(frame, &seq.rows[0], h)?;
    total += tail_sum(frame, seq.rows.last().expect("non-empty"), h)?;
    Ok(total / 2.0)
}

/// An upper bound on λ: any admissible sequence certifies its own energy.
pub fn lambda_upper_certificate(
    seq: &DropletSequence,
    h: &HAssignment,
) -> Result<f64, LambdaError> {
    sequence_energy(seq, h)
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub starts: usize,
    /// Number of droplets in each optimized sequence.
    pub steps: usize,
    pub seed: u64,
    /// Coordinate-descent sweeps per start.
    pub sweeps: usize,
    /// Radius scale of the smallest start droplet.
    pub r_min: f64,
    /// Radius scale of the largest start droplet.
    pub r_max: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            starts: 8,
            steps: 48,
            seed: 0,
            sweeps: 40,
            r_min: 1.0 / 16.0,
            r_max: 48.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    pub best_start: usize,
    pub start_energies: Vec<f64>,
    pub sequence: DropletSequence,
}

fn unit_uniform(rng: &CounterRng, stream: u64, counter: u64) -> f64 {
    rng.uniform(stream, counter) as f64 / u64::MAX as f64
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..48 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd { c } else { d }
}

fn descend(
    frame: &DirectionFrame,
    rows: &mut Vec<Vec<f64>>,
    h: &HAssignment,
    sweeps: usize,
) -> f64 {
    let k = frame.dirs().len();
    let n = rows.len();
    // objective terms that depend on row i, for fixed neighbours
    let local = |rows: &Vec<Vec<f64>>, row_i: &[f64], i: usize| -> f64 {
        let before = if i == 0 {
            head_sum(frame, row_i, h).unwrap_or(f64::INFINITY)
        } else {
            work_rows(frame, &rows[i - 1], row_i, h).unwrap_or(f64::INFINITY)
        };
        let after = if i + 1 == n {
            tail_sum(frame, row_i, h).unwrap_or(f64::INFINITY)
        } else {
            work_rows(frame, row_i, &rows[i + 1], h).unwrap_or(f64::INFINITY)
        };
        before + after
    };
    for _ in 0..sweeps {
        let mut improved = false;
        for i in 0..n {
            for u in 0..k {
                let lo = if i == 0 {
                    rows[0][u] / 8.0
                } else {
                    rows[i - 1][u]
                };
                let hi = if i + 1 == n {
                    rows[n - 1][u] * 4.0
                } else {
                    rows[i + 1][u]
                };
                if hi - lo < 1e-12 {
                    continue;
                }
                let mut row_i = rows[i].clone();
                let eval = |a: f64| {
                    let mut r = row_i.clone();
                    r[u] = a;
                    local(rows, &r, i)
                };
                let cur_e = local(rows, &row_i, i);
                let a = golden_section(&eval, lo, hi);
                if eval(a) < cur_e - 1e-13 {
                    row_i[u] = a;
                    rows[i] = row_i;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let seq = DropletSequence {
        frame: frame.clone(),
        rows: rows.clone(),
    };
    sequence_energy(&seq, h).unwrap_or(f64::INFINITY)
}

/// Minimize the sequence energy over nested droplet sequences on `frame` by
/// deterministic multi-start projected coordinate descent. The result is an
/// upper bound on λ that is tight as `steps` grows.
pub fn minimize_lambda(
    frame: &DirectionFrame,
    h: &HAssignment,
    opts: &MinimizeOptions,
) -> Result<LambdaResult, LambdaError> {
    if h.fns.len() != frame.dirs().len() {
        return Err(LambdaError::AssignmentLength {
            got: h.fns.len(),
            want: frame.dirs().len(),
        });
    }
    let rng = CounterRng::new(opts.seed);
    let k = frame.dirs().len();
    let n = opts.steps.max(2);
    let growth = (opts.r_max / opts.r_min).powf(1.0 / (n as f64 - 1.0));
    let runs: Vec<(f64, Vec<Vec<f64>>)> = (0..opts.starts)
        .into_par_iter()
        .map(|start| {
            // geometric ladder with a per-direction deterministic stretch
            let sigma = 0.4 * start as f64 / opts.starts.max(1) as f64;
            let stretch: Vec<f64> = (0..k)
                .map(|u| {
                    let t = unit_uniform(&rng, start as u64, u as u64);
                    (sigma * (t - 0.5)).exp()
                })
                .collect();
            let mut rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let base = opts.r_min * growth.powi(i as i32);
                    (0..k).map(|u| base * stretch[u]).collect()
                })
                .collect();
            // the stretch can break row monotonicity only via rounding; it is a
            // common factor per direction, so rows stay nested
            let e = descend(frame, &mut rows, h, opts.sweeps);
            (e, rows)
        })
        .collect();
    let (best_start, _) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).expect("finite energies"))
        .ok_or(LambdaError::EmptySequence)?;
    let (lambda, rows) = runs[best_start].clone();
    Ok(LambdaResult {
        lambda,
        best_start,
        start_energies: runs.iter().map(|r| r.0).collect(),
        sequence: DropletSequence {
            frame: frame.clone(),
            rows,
        },
    })
}

/// The frame spanned by the given directions; convenience for building
/// assignments for isotropic families.
pub fn frame_of(dirs: Vec<Direction>) -> Result<DirectionFrame, DropletError> {
    DirectionFrame::new(dirs, crate::droplet::FrameTag::SAlpha)
}
