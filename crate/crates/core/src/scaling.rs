//! Rectangles, occupied lines, the events A^u(m,n), traversability, and
//! Monte Carlo estimation of the per-line cost functions h^u_p.

use crate::analysis::{self, Budget};
use crate::direction::Direction;
use crate::droplet::{Droplet, DropletError};
use crate::engine::{closure, Configuration, Window};
use crate::lattice::LatticeVector;
use crate::rng::{probability_threshold, stream_id, CounterRng};
use crate::rules::UpdateFamily;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("no certified helping sets for direction {0:?}")]
    NoHelpingSets(Direction),
    #[error("no W-helping width for direction {0:?}")]
    NoWWidth(Direction),
    #[error("width {m} cannot fit the widest helping set ({widest} sites across)")]
    TooNarrow { m: i64, widest: i64 },
    #[error("width {m} must exceed twice the V estimate {v}")]
    WidthVsV { m: i64, v: i64 },
    #[error("estimate for x = {x} unusable: all {reps} replicates failed")]
    AllFailed { x: f64, reps: u64 },
    #[error("extrapolation needs at least 3 decreasing p values with a common grid")]
    BadExtrapolation,
    #[error("direction difficulty is not finite")]
    NotFinite,
    #[error(transparent)]
    Droplet(#[from] DropletError),
}

/// A translate of R^u(m, n): n lines of m sites, anchored at `anchor`
/// (the site with line offset 0 and transverse offset 0).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Rectangle {
    pub u: Direction,
    pub m: i64,
    pub n: i64,
    pub anchor: LatticeVector,
}

impl Rectangle {
    /// Coordinates (line k, offset j) of a site, if inside.
    pub fn coords(&self, x: LatticeVector) -> Option<(i64, i64)> {
        let d = x - self.anchor;
        let k = self.u.line_value(d);
        let perp = self.u.perp();
        let j = (d - self.u.line_rep(k)).dot(perp) / perp.norm_sq();
        (0 <= k && k < self.n && 0 <= j && j < self.m).then_some((k, j))
    }

    pub fn site(&self, k: i64, j: i64) -> LatticeVector {
        self.anchor + self.u.line_rep(k) + self.u.perp().scale(j)
    }

    pub fn sites(&self) -> Vec<LatticeVector> {
        (0..self.n)
            .flat_map(|k| (0..self.m).map(move |j| self.site(k, j)))
            .collect()
    }
}

/// Per-direction data shared by all the estimators: helping-set classes in
/// (line, offset) coordinates, their reach and width, the W-helping width,
/// and the V constant.
#[derive(Clone, Debug)]
pub struct DirectionData {
    pub u: Direction,
    pub alpha: u32,
    /// Canonical helping-set classes as (line, transverse offset) cells.
    pub classes: Vec<Vec<(i64, i64)>>,
    /// Highest line any class reaches.
    pub reach: i64,
    /// Widest transverse extent over classes (in sites).
    pub widest: i64,
    pub w_width: u32,
    /// V estimate: reach + W-helping width + 1.
    pub v: i64,
}

pub fn direction_data(
    f: &UpdateFamily,
    u: Direction,
    budget: &Budget,
) -> Result<DirectionData, ScalingError> {
    let alpha = match analysis::difficulty(f, u, budget) {
        analysis::Difficulty::Finite(a) if a > 0 => a,
        _ => return Err(ScalingError::NotFinite),
    };
    let raw = analysis::helping_sets(f, u, budget)
        .map_err(|_| ScalingError::NoHelpingSets(u))?;
    if raw.is_empty() {
        return Err(ScalingError::NoHelpingSets(u));
    }
    let rep1 = u.line_rep(1);
    let perp = u.perp();
    let pn = perp.norm_sq();
    let classes: Vec<Vec<(i64, i64)>> = raw
        .iter()
        .map(|class| {
            class
                .iter()
                .map(|&x| {
                    let k = u.line_value(x);
                    (k, (x - rep1.scale(k)).dot(perp) / pn)
                })
                .collect()
        })
        .collect();
    let reach = classes
        .iter()
        .flatten()
        .map(|c| c.0)
        .max()
        .unwrap_or(0);
    let widest = classes
        .iter()
        .map(|c| {
            let js: Vec<i64> = c.iter().map(|x| x.1).collect();
            js.iter().max().unwrap() - js.iter().min().unwrap() + 1
        })
        .max()
        .unwrap_or(1);
    let w_width = analysis::w_helping_width(f, u, budget.w_cap)
        .ok_or(ScalingError::NoWWidth(u))?;
    let v = reach + w_width as i64 + 1;
    Ok(DirectionData {
        u,
        alpha,
        classes,
        reach,
        widest,
        w_width,
        v,
    })
}

/// Line k is occupied when some helping-set translate fits inside the
/// infected cells within transverse window [j0, j0 + width).
fn line_occupied_cells(
    data: &DirectionData,
    k: i64,
    j0: i64,
    width: i64,
    infected: &dyn Fn(i64, i64) -> bool,
) -> bool {
    data.classes.iter().any(|class| {
        let jmax = class.iter().map(|c| c.1).max().unwrap_or(0);
        (j0..=j0 + width - 1 - jmax)
            .any(|t| class.iter().all(|&(dk, dj)| infected(k + dk, t + dj)))
    })
}

/// Public form over a concrete site set: is l_u(n) occupied in
/// A ∩ R^u(width_window, ∞)?
pub fn line_occupied(
    f: &UpdateFamily,
    u: Direction,
    n: i64,
    a: &BTreeSet<LatticeVector>,
    width_window: i64,
) -> Result<bool, ScalingError> {
    let data = direction_data(f, u, &Budget::default())?;
    let rep1 = u.line_rep(1);
    let perp = u.perp();
    let infected = |k: i64, j: i64| {
        (0..width_window).contains(&j) && k >= 0 && a.contains(&(rep1.scale(k) + perp.scale(j)))
    };
    Ok(line_occupied_cells(&data, n, 0, width_window, &infected))
}

fn wilson_ci(successes: u64, trials: u64) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (ph + z2 / (2.0 * n)) / denom;
    let half = z / denom * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo estimate of ℙ_p(A^u(m,n)) with a Wilson 95% interval.
/// Samples the taller rectangle R^u(m, n + reach); bitwise reproducible for a
/// given seed regardless of thread count.
pub fn prob_a_mc(
    f: &UpdateFamily,
    u: Direction,
    m: i64,
    n: i64,
    p: f64,
    reps: u64,
    seed: u64,
) -> Result<(f64, (f64, f64)), ScalingError> {
    let data = direction_data(f, u, &Budget::default())?;
    prob_a_mc_with(&data, m, n, p, reps, seed, 0)
}

pub(crate) fn prob_a_mc_with(
    data: &DirectionData,
    m: i64,
    n: i64,
    p: f64,
    reps: u64,
    seed: u64,
    entry: u64,
) -> Result<(f64, (f64, f64)), ScalingError> {
    if m < data.widest {
        return Err(ScalingError::TooNarrow {
            m,
            widest: data.widest,
        });
    }
    let rng = CounterRng::new(seed);
    let thresh = probability_threshold(p);
    let rows = n + data.reach;
    let successes: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let stream = stream_id("prob_a", entry * reps + rep);
            let mut cells = vec![false; (rows * m) as usize];
            for k in 0..rows {
                for j in 0..m {
                    cells[(k * m + j) as usize] =
                        rng.bernoulli(stream, (k * m + j) as u64, thresh);
                }
            }
            let infected =
                |k: i64, j: i64| k >= 0 && k < rows && j >= 0 && j < m && cells[(k * m + j) as usize];
            u64::from((0..n).all(|k| line_occupied_cells(data, k, 0, m, &infected)))
        })
        .sum();
    let ph = successes as f64 / reps as f64;
    Ok((ph, wilson_ci(successes, reps)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HEntry {
    pub x: f64,
    pub m: i64,
    pub p_hat: f64,
    pub h_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub usable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HTable {
    pub direction: Direction,
    pub p: f64,
    pub alpha: u32,
    pub n: i64,
    pub reps: u64,
    pub seed: u64,
    pub v: i64,
    pub estimator_version: String,
    pub entries: Vec<HEntry>,
}

impl HTable {
    /// (x, ĥ) pairs of the usable entries, for interpolation.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.usable)
            .map(|e| (e.x, e.h_hat))
            .collect()
    }

    /// Largest confidence half-width over usable entries.
    pub fn max_halfwidth(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.usable)
            .map(|e| (e.ci_hi - e.ci_lo) / 2.0)
            .fold(0.0, f64::max)
    }
}

pub const ESTIMATOR_VERSION: &str = "1";

/// Estimator ĥ(x) = −log ℙ̂_p(A^u(m,n)) / n with m = round(x·p^{−α}).
/// Confidence bounds combine the Wilson binomial interval with the
/// systematic ±ĥ·V/n truncation band.
pub fn estimate_h(
    f: &UpdateFamily,
    u: Direction,
    p: f64,
    x_grid: &[f64],
    n: i64,
    reps: u64,
    seed: u64,
) -> Result<HTable, ScalingError> {
    let data = direction_data(f, u, &Budget::default())?;
    let mut entries = Vec::with_capacity(x_grid.len());
    for (idx, &x) in x_grid.iter().enumerate() {
        let m = ((x * (p.powi(-(data.alpha as i32)))).round() as i64).max(data.widest);
        let (ph, (lo, hi)) = prob_a_mc_with(&data, m, n, p, reps, seed, idx as u64)?;
        let usable = ph > 0.0;
        let h_hat = if usable { -(ph.ln()) / n as f64 } else { f64::INFINITY };
        let band = h_hat * data.v as f64 / n as f64;
        let ci_lo = if hi > 0.0 { (-(hi.ln()) / n as f64 - band).max(0.0) } else { 0.0 };
        let ci_hi = if lo > 0.0 {
            -(lo.ln()) / n as f64 + band
        } else {
            f64::INFINITY
        };
        entries.push(HEntry {
            x,
            m,
            p_hat: ph,
            h_hat,
            ci_lo,
            ci_hi,
            usable,
        });
    }
    Ok(HTable {
        direction: u,
        p,
        alpha: data.alpha,
        n,
        reps,
        seed,
        v: data.v,
        estimator_version: ESTIMATOR_VERSION.to_string(),
        entries,
    })
}

/// Per-x linear extrapolation ĥ(x; p) = c₀ + c₁·p to p → 0, following the
/// first-order expansion of the finite-p correction. Residuals are folded
/// into the confidence bounds.
pub fn h_limit_table(tables: &[HTable]) -> Result<HTable, ScalingError> {
    if tables.len() < 3
        || tables.windows(2).any(|w| w[1].p >= w[0].p)
        || tables
            .windows(2)
            .any(|w| w[0].entries.len() != w[1].entries.len())
    {
        return Err(ScalingError::BadExtrapolation);
    }
    let first = &tables[0];
    let mut entries = Vec::with_capacity(first.entries.len());
    for i in 0..first.entries.len() {
        let pts: Vec<(f64, f64)> = tables
            .iter()
            .map(|t| (t.p, t.entries[i].h_hat))
            .collect();
        let usable = tables.iter().all(|t| t.entries[i].usable);
        let (c0, c1) = least_squares(&pts);
        let resid = pts
            .iter()
            .map(|&(p, h)| (h - c0 - c1 * p).abs())
            .fold(0.0, f64::max);
        let ci = tables
            .iter()
            .map(|t| (t.entries[i].ci_hi - t.entries[i].ci_lo) / 2.0)
            .fold(0.0, f64::max)
            + resid;
        entries.push(HEntry {
            x: first.entries[i].x,
            m: 0,
            p_hat: f64::NAN,
            h_hat: c0,
            ci_lo: (c0 - ci).max(0.0),
            ci_hi: c0 + ci,
            usable: usable && c0 > 0.0,
        });
    }
    Ok(HTable {
        direction: first.direction,
        p: 0.0,
        alpha: first.alpha,
        n: first.n,
        reps: first.reps,
        seed: first.seed,
        v: first.v,
        estimator_version: ESTIMATOR_VERSION.to_string(),
        entries,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (sy / n, 0.0);
    }
    let c1 = (n * sxy - sx * sy) / denom;
    let c0 = (sy - c1 * sx) / n;
    (c0, c1)
}

/// Traversability of R^u(m,n) in A: for tall rectangles, occupied lines on
/// the inset sub-rectangle plus W-helping sets on the top V lines; for short
/// ones, W-helping sets on every line.
pub fn is_traversable(
    data: &DirectionData,
    rect: &Rectangle,
    a: &BTreeSet<LatticeVector>,
) -> Result<bool, ScalingError> {
    let v = data.v;
    if rect.m <= 2 * v {
        return Err(ScalingError::WidthVsV { m: rect.m, v });
    }
    let mut cells = BTreeSet::new();
    for &x in a {
        if let Some(c) = rect.coords(x) {
            cells.insert(c);
        }
    }
    let infected = |k: i64, j: i64| cells.contains(&(k, j));
    let w = data.w_width as i64;
    let has_w_helping = |k: i64| (0..=rect.m - w).any(|j| (j..j + w).all(|jj| infected(k, jj)));
    if rect.n > v {
        let occupied = (0..rect.n - v)
            .all(|k| line_occupied_cells(data, k, v, rect.m - 2 * v, &infected));
        let top = (1..=v).all(|i| has_w_helping(rect.n - i));
        Ok(occupied && top)
    } else {
        Ok((0..rect.n).all(has_w_helping))
    }
}

// --- growth events on droplets ------------------------------------------------

/// Lattice sites of a droplet with f64 radii (closed constraints, with a tiny
/// tolerance absorbing normalization round-off).
pub fn droplet_sites(d: &Droplet<f64>) -> Vec<LatticeVector> {
    let dirs = d.frame().dirs();
    let radii = d.radii();
    let bound = radii
        .iter()
        .zip(dirs)
        .map(|(a, u)| (a.abs() / u.vector().norm()).ceil() as i64 + 1)
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            let s = LatticeVector { x, y };
            if dirs
                .iter()
                .zip(radii)
                .all(|(u, a)| (u.line_value(s) as f64) <= a + 1e-9)
            {
                out.push(s);
            }
        }
    }
    out
}

/// Transverse offset interval of droplet sites on line l_u(vline), if any.
fn line_interval(d: &Droplet<f64>, u: Direction, vline: i64) -> Option<(i64, i64)> {
    let rep = u.line_rep(vline);
    let perp = u.perp();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&v, &a) in d.frame().dirs().iter().zip(d.radii()) {
        let c = v.vector().dot(perp) as f64; // coefficient of j
        let rhs = a + 1e-9 - v.line_value(rep) as f64;
        if c > 0.0 {
            hi = hi.min(rhs / c);
        } else if c < 0.0 {
            lo = lo.max(rhs / c);
        } else if rhs < 0.0 {
            return None;
        }
    }
    let (lo, hi) = (lo.ceil() as i64, hi.floor() as i64);
    (lo <= hi).then_some((lo, hi))
}

#[derive(Clone, Debug)]
pub struct GrowthCheck {
    /// All per-direction rectangles were traversable.
    pub traversable: bool,
    /// Closure check D1 ∪ (A ∩ D2) ⊇ D2, run when traversable.
    pub filled: Option<bool>,
    /// Sites of D2 missed by the closure, if any.
    pub counterexample: Vec<LatticeVector>,
}

/// The growth mechanism check: traversability of the largest rectangle in
/// each growth band of D1 → D2 must imply that D1 plus the infections inside
/// D2 fill D2.
pub fn verify_growth_event(
    f: &UpdateFamily,
    data_for: &dyn Fn(Direction) -> Option<DirectionData>,
    d1: &Droplet<f64>,
    d2: &Droplet<f64>,
    a: &BTreeSet<LatticeVector>,
) -> Result<GrowthCheck, ScalingError> {
    let (s, _) = d1.location(d2)?;
    let dirs = d1.frame().dirs().to_vec();
    let mut all_traversable = true;
    for (i, &u) in dirs.iter().enumerate() {
        let su = s[i].round() as i64;
        if su < 1 {
            continue;
        }
        let data = data_for(u).ok_or(ScalingError::NoHelpingSets(u))?;
        // extended droplet: D1 grown by s_u in direction u only
        let mut raw = d1.radii().to_vec();
        raw[i] += su as f64;
        let ext = Droplet::new(d1.frame().clone(), raw)?;
        let base = d1.radii()[i].floor() as i64;
        // common transverse interval across the band's lines
        let (mut jlo, mut jhi) = (i64::MIN, i64::MAX);
        for k in 1..=su {
            match line_interval(&ext, u, base + k) {
                Some((lo, hi)) => {
                    jlo = jlo.max(lo);
                    jhi = jhi.min(hi);
                }
                None => {
                    jlo = 1;
                    jhi = 0;
                }
            }
        }
        let m = jhi - jlo + 1;
        let rect = Rectangle {
            u,
            m: m.max(0),
            n: su,
            anchor: u.line_rep(base + 1) + u.perp().scale(jlo),
        };
        if !is_traversable(&data, &rect, a)? {
            all_traversable = false;
        }
    }
    if !all_traversable {
        return Ok(GrowthCheck {
            traversable: false,
            filled: None,
            counterexample: vec![],
        });
    }
    // engine check: closure(D1 ∪ (A ∩ D2)) ⊇ D2
    let d2_sites = droplet_sites(d2);
    let d1_sites = droplet_sites(d1);
    let d2_set: BTreeSet<LatticeVector> = d2_sites.iter().copied().collect();
    let margin = f.diameter().max(1);
    let (x0, x1) = d2_sites.iter().fold((i64::MAX, i64::MIN), |(lo, hi), s| {
        (lo.min(s.x), hi.max(s.x))
    });
    let (y0, y1) = d2_sites.iter().fold((i64::MAX, i64::MIN), |(lo, hi), s| {
        (lo.min(s.y), hi.max(s.y))
    });
    let window = Window::boxed(x0 - margin, x1 + margin, y0 - margin, y1 + margin);
    let initial: Vec<LatticeVector> = d1_sites
        .into_iter()
        .chain(a.iter().copied().filter(|x| d2_set.contains(x)))
        .collect();
    let cl = closure(f, &Configuration::from_sites(window, &initial));
    let missed: Vec<LatticeVector> = d2_sites.into_iter().filter(|&x| !cl.get(x)).collect();
    Ok(GrowthCheck {
        traversable: true,
        filled: Some(missed.is_empty()),
        counterexample: missed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droplet::{DirectionFrame, FrameTag};
    use crate::lattice::v;
    use crate::oracle;
    use crate::rules::two_neighbour;

    fn dir(a: i64, b: i64) -> Direction {
        Direction::new(a, b).unwrap()
    }

    fn east_data() -> DirectionData {
        direction_data(&two_neighbour(), dir(1, 0), &Budget::default()).unwrap()
    }

    #[test]
    fn two_neighbour_direction_data() {
        let d = east_data();
        assert_eq!(d.alpha, 1);
        assert_eq!(d.classes, vec![vec![(0, 0)], vec![(1, 0)]]);
        assert_eq!((d.reach, d.widest, d.w_width, d.v), (1, 1, 1, 3));
    }

    #[test]
    fn occupied_lines() {
        let f = two_neighbour();
        let u = dir(1, 0);
        // site on the next line occupies this one
        let a: BTreeSet<LatticeVector> = [v(1, 0)].into_iter().collect();
        assert!(line_occupied(&f, u, 0, &a, 2).unwrap());
        assert!(line_occupied(&f, u, 1, &a, 2).unwrap());
        assert!(!line_occupied(&f, u, 2, &a, 2).unwrap());
        assert!(!line_occupied(&f, u, 0, &BTreeSet::new(), 2).unwrap());
        // outside the width window
        let far: BTreeSet<LatticeVector> = [v(0, 5)].into_iter().collect();
        assert!(!line_occupied(&f, u, 0, &far, 2).unwrap());
    }

    #[test]
    fn prob_a_small_case() {
        let f = two_neighbour();
        let (ph, (lo, hi)) = prob_a_mc(&f, dir(1, 0), 2, 1, 0.5, 100_000, 7).unwrap();
        assert!(lo <= 0.9375 && 0.9375 <= hi, "estimate {ph} CI [{lo},{hi}]");
        // n = 0: empty conjunction
        let (p0, _) = prob_a_mc(&f, dir(1, 0), 2, 0, 0.5, 100, 7).unwrap();
        assert_eq!(p0, 1.0);
    }

    #[test]
    fn prob_a_matches_oracle() {
        let f = two_neighbour();
        let (m, n, p) = (5i64, 10i64, 0.2);
        let exact = oracle::prob_a_exact(m as u32, n as u32, p);
        let (ph, (lo, hi)) = prob_a_mc(&f, dir(1, 0), m, n, p, 40_000, 11).unwrap();
        assert!(lo - 1e-9 <= exact && exact <= hi + 1e-9, "MC {ph} vs exact {exact}");
    }

    #[test]
    fn too_narrow_is_an_error() {
        let f = two_neighbour();
        assert!(matches!(
            prob_a_mc(&f, dir(1, 0), 0, 1, 0.5, 10, 1),
            Err(ScalingError::TooNarrow { .. })
        ));
    }

    #[test]
    fn h_estimates_track_the_oracle() {
        let f = two_neighbour();
        let p = 0.1;
        let n = 8;
        let t = estimate_h(&f, dir(1, 0), p, &[1.0, 2.0, 3.0], n, 4000, 3).unwrap();
        for e in &t.entries {
            assert!(e.usable);
            let exact = -oracle::prob_a_exact(e.m as u32, n as u32, p).ln() / n as f64;
            assert!(
                e.ci_lo <= exact && exact <= e.ci_hi,
                "x={} h={} oracle={exact} ci=[{},{}]",
                e.x,
                e.h_hat,
                e.ci_lo,
                e.ci_hi
            );
        }
        // nonincreasing within joint bands
        for w in t.entries.windows(2) {
            assert!(w[1].ci_lo <= w[0].ci_hi + 1e-9);
        }
    }

    #[test]
    fn extrapolation_recovers_linear_models() {
        let f = two_neighbour();
        let base = estimate_h(&f, dir(1, 0), 0.1, &[1.0], 32, 200, 5).unwrap();
        let synthetic = |p: f64, h: f64| {
            let mut t = base.clone();
            t.p = p;
            t.entries[0].h_hat = h;
            t
        };
        // constant inputs → the constant
        let tables = vec![synthetic(0.3, 0.7), synthetic(0.2, 0.7), synthetic(0.1, 0.7)];
        let lim = h_limit_table(&tables).unwrap();
        assert!((lim.entries[0].h_hat - 0.7).abs() < 1e-12);
        // linear bias c0 + c1 p → c0
        let tables = vec![
            synthetic(0.3, 0.5 + 0.9 * 0.3),
            synthetic(0.2, 0.5 + 0.9 * 0.2),
            synthetic(0.1, 0.5 + 0.9 * 0.1),
        ];
        let lim = h_limit_table(&tables).unwrap();
        assert!((lim.entries[0].h_hat - 0.5).abs() < 1e-12);
        // needs ≥ 3 decreasing p values
        assert!(h_limit_table(&tables[..2]).is_err());
    }

    #[test]
    fn traversability_branches() {
        let data = east_data();
        let rect = Rectangle {
            u: dir(1, 0),
            m: 8,
            n: 2, // n ≤ V: W-helping set on every line
            anchor: v(0, 0),
        };
        let mut a: BTreeSet<LatticeVector> = BTreeSet::new();
        assert!(!is_traversable(&data, &rect, &a).unwrap());
        // transverse offsets run along u^⊥ = (0,−1)
        a.insert(v(0, -3));
        a.insert(v(1, -5));
        assert!(is_traversable(&data, &rect, &a).unwrap());
        // width precondition
        let thin = Rectangle {
            u: dir(1, 0),
            m: 6,
            n: 2,
            anchor: v(0, 0),
        };
        assert!(matches!(
            is_traversable(&data, &thin, &a),
            Err(ScalingError::WidthVsV { .. })
        ));
    }

    #[test]
    fn growth_event_trivial_cases() {
        let f = two_neighbour();
        let frame = DirectionFrame::axes(FrameTag::SAlpha);
        let d1 = Droplet::new(frame.clone(), vec![4.0; 4]).unwrap();
        let d2 = Droplet::new(frame.clone(), vec![6.0; 4]).unwrap();
        let lookup = |u: Direction| {
            direction_data(&two_neighbour(), u, &Budget::default()).ok()
        };
        // A ⊇ D2 → traversable and filled
        let full: BTreeSet<LatticeVector> = droplet_sites(&d2).into_iter().collect();
        let chk = verify_growth_event(&f, &lookup, &d1, &d2, &full).unwrap();
        assert!(chk.traversable && chk.filled == Some(true));
        // A = ∅ with Ψ > 0 → not traversable
        let chk = verify_growth_event(&f, &lookup, &d1, &d2, &BTreeSet::new()).unwrap();
        assert!(!chk.traversable);
    }

    #[test]
    fn traversable_implies_filled_on_samples() {
        let f = two_neighbour();
        let frame = DirectionFrame::axes(FrameTag::SAlpha);
        let lookup =
            |u: Direction| direction_data(&two_neighbour(), u, &Budget::default()).ok();
        let rng = CounterRng::new(99);
        let mut positives = 0;
        for inst in 0..60 {
            let d1 = Droplet::new(frame.clone(), vec![8.0; 4]).unwrap();
            let d2 = Droplet::new(frame.clone(), vec![10.0; 4]).unwrap();
            let thresh = probability_threshold(0.35);
            let a: BTreeSet<LatticeVector> = droplet_sites(&d2)
                .into_iter()
                .enumerate()
                .filter(|(i, _)| {
                    rng.bernoulli(stream_id("growth", inst), *i as u64, thresh)
                })
                .map(|(_, s)| s)
                .collect();
            let chk = verify_growth_event(&f, &lookup, &d1, &d2, &a).unwrap();
            if chk.traversable {
                positives += 1;
                assert_eq!(chk.filled, Some(true), "instance {inst}");
            }
        }
        assert!(positives > 0, "no traversable samples drawn");
    }
}
