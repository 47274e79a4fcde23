//! Direction-level theory: stable/unstable directions, quasi-stable set,
//! difficulties, helping sets, voracity, and isotropy.
//!
//! Infinite-growth claims are only ever made with a certificate: a finite
//! patch P with [ℍ_u ∪ P] ⊇ P + u^⊥ pumps forever because ℍ_u is invariant
//! under u^⊥ translations. Finite-growth claims are only made after an exact
//! fixed-point verification of the stabilized set on ℤ². Anything else is
//! reported as unknown/inconclusive.

use crate::direction::Direction;
use crate::lattice::LatticeVector;
use crate::rules::UpdateFamily;
use itertools::Itertools;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("direction {0:?} has infinite difficulty (non-isolated stable)")]
    InfiniteDifficulty(Direction),
    #[error("difficulty for {0:?} not certified within budget")]
    Uncertified(Direction),
}

#[derive(Clone, Copy, Debug)]
pub struct Budget {
    /// Largest |Z| attempted by the difficulty search.
    pub max_size: usize,
    /// Multiplier on the default search window (3·diam lines).
    pub window_scale: i64,
    /// Cap on W in the W-helping-set search.
    pub w_cap: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_size: 4,
            window_scale: 1,
            w_cap: 8,
        }
    }
}

// --- stability ----------------------------------------------------------------

/// u is unstable iff some rule lies entirely in the open half-plane ℍ_u.
pub fn is_stable(f: &UpdateFamily, u: Direction) -> bool {
    if let Some(t) = f.threshold() {
        let below = t
            .punctured()
            .iter()
            .filter(|&&k| u.line_value(k) < 0)
            .count();
        return below < t.theta;
    }
    !f.rules()
        .expect("family has rules or threshold")
        .iter()
        .any(|r| r.sites().iter().all(|&s| u.line_value(s) < 0))
}

/// Counterclockwise comparison starting from angle 0 at (1,0); exact.
pub(crate) fn ccw_cmp(p: LatticeVector, q: LatticeVector) -> Ordering {
    let half = |w: LatticeVector| u8::from(!(w.y > 0 || (w.y == 0 && w.x > 0)));
    half(p).cmp(&half(q)).then_with(|| q.cross(p).cmp(&0))
}

/// Directions perpendicular to some rule site, ± both orientations,
/// counterclockwise from angle 0.
pub fn quasi_stable_set(f: &UpdateFamily) -> Vec<Direction> {
    let mut set = BTreeSet::new();
    for s in f.rule_sites() {
        if let Some(p) = s.primitive() {
            set.insert(Direction { a: p.y, b: -p.x });
            set.insert(Direction { a: -p.y, b: p.x });
        }
    }
    let mut dirs: Vec<Direction> = set.into_iter().collect();
    dirs.sort_by(|a, b| ccw_cmp(a.vector(), b.vector()));
    dirs
}

/// A rational direction strictly inside the open arc from u1 to u2 (ccw).
fn arc_sample(u1: Direction, u2: Direction) -> Direction {
    let sum = u1.vector() + u2.vector();
    if let Some(p) = sum.primitive() {
        if u1.vector().cross(u2.vector()) > 0 {
            return Direction { a: p.x, b: p.y };
        }
        // reflex arc: the bisector is on the far side
        return Direction { a: -p.x, b: -p.y };
    }
    // opposite directions: rotate 90° counterclockwise
    Direction { a: -u1.b, b: u1.a }
}

#[derive(Clone, Debug, Serialize)]
pub struct StableSet {
    pub isolated: Vec<Direction>,
    /// Maximal closed stable arcs, as (ccw start, ccw end) breakpoints.
    pub arcs: Vec<(Direction, Direction)>,
}

/// Stability is constant on open arcs between consecutive quasi-stable
/// directions, so evaluating breakpoints and one sample per arc decides it
/// everywhere.
pub fn stable_directions(f: &UpdateFamily) -> StableSet {
    let s = quasi_stable_set(f);
    let n = s.len();
    if n == 0 {
        return StableSet {
            isolated: vec![],
            arcs: vec![],
        };
    }
    let bp: Vec<bool> = s.iter().map(|&u| is_stable(f, u)).collect();
    let arc: Vec<bool> = (0..n)
        .map(|i| is_stable(f, arc_sample(s[i], s[(i + 1) % n])))
        .collect();

    let mut isolated = Vec::new();
    for i in 0..n {
        let prev = arc[(i + n - 1) % n];
        if bp[i] && !prev && !arc[i] {
            isolated.push(s[i]);
        }
    }

    let mut arcs = Vec::new();
    if arc.iter().all(|&a| a) {
        arcs.push((s[0], s[0])); // whole circle stable
    } else {
        // maximal runs of consecutive stable arcs
        let mut i = 0;
        while i < n {
            if arc[i] && !arc[(i + n - 1) % n] {
                let mut j = i;
                while arc[(j + 1) % n] {
                    j += 1;
                }
                arcs.push((s[i % n], s[(j + 1) % n]));
                i = j + 1;
            } else {
                i += 1;
            }
        }
    }
    StableSet { isolated, arcs }
}

// --- half-plane dynamics with certificates --------------------------------------
//
// All half-plane work happens in (line, offset) coordinates: the site
// line_rep(n) + j·u^⊥ becomes the cell (n, j), and rule offsets become pure
// translations in this coordinate system, so the dynamics reduce to integer
// grid operations.

enum RuleEval {
    Threshold { offs: Vec<(i64, i64)>, theta: usize },
    Explicit(Vec<Vec<(i64, i64)>>),
}

struct HpCtx {
    u: Direction,
    rep1: LatticeVector,
    perp: LatticeVector,
    pnorm: i64,
    d: i64,
    eval: RuleEval,
    /// Union of rule offsets, for candidate generation.
    offs_union: Vec<(i64, i64)>,
}

impl HpCtx {
    fn new(f: &UpdateFamily, u: Direction) -> HpCtx {
        let rep1 = u.line_rep(1);
        let perp = u.perp();
        let pnorm = perp.norm_sq();
        let co = |s: LatticeVector| {
            let n = u.line_value(s);
            (n, (s - rep1.scale(n)).dot(perp) / pnorm)
        };
        let eval = if let Some(t) = f.threshold() {
            RuleEval::Threshold {
                offs: t.punctured().iter().map(|&s| co(s)).collect(),
                theta: t.theta,
            }
        } else {
            RuleEval::Explicit(
                f.rules()
                    .expect("family has rules or threshold")
                    .iter()
                    .map(|r| r.sites().iter().map(|&s| co(s)).collect())
                    .collect(),
            )
        };
        let offs_union = f.rule_sites().iter().map(|&s| co(s)).collect();
        HpCtx {
            u,
            rep1,
            perp,
            pnorm,
            d: f.diameter().max(1),
            eval,
            offs_union,
        }
    }

    fn coords(&self, x: LatticeVector) -> (i64, i64) {
        let n = self.u.line_value(x);
        (n, (x - self.rep1.scale(n)).dot(self.perp) / self.pnorm)
    }

    fn site(&self, n: i64, j: i64) -> LatticeVector {
        self.rep1.scale(n) + self.perp.scale(j)
    }

    fn activates(&self, view: &dyn Fn(i64, i64) -> bool, n: i64, j: i64) -> bool {
        match &self.eval {
            RuleEval::Threshold { offs, theta } => {
                let mut hits = 0;
                for &(dn, dj) in offs {
                    if view(n + dn, j + dj) {
                        hits += 1;
                        if hits >= *theta {
                            return true;
                        }
                    }
                }
                false
            }
            RuleEval::Explicit(rules) => rules
                .iter()
                .any(|r| r.iter().all(|&(dn, dj)| view(n + dn, j + dj))),
        }
    }
}

/// Dense boolean grid over cells (n, j), 0 ≤ n ≤ nmax, jmin ≤ j ≤ jmax.
#[derive(Clone)]
struct Grid {
    nmax: i64,
    jmin: i64,
    jmax: i64,
    width: i64,
    cells: Vec<bool>,
}

impl Grid {
    fn new(nmax: i64, jmin: i64, jmax: i64) -> Grid {
        let width = jmax - jmin + 1;
        Grid {
            nmax,
            jmin,
            jmax,
            width,
            cells: vec![false; ((nmax + 1) * width) as usize],
        }
    }

    fn idx(&self, n: i64, j: i64) -> Option<usize> {
        if n < 0 || n > self.nmax || j < self.jmin || j > self.jmax {
            None
        } else {
            Some((n * self.width + (j - self.jmin)) as usize)
        }
    }

    fn get(&self, n: i64, j: i64) -> bool {
        self.idx(n, j).map(|i| self.cells[i]).unwrap_or(false)
    }

    fn set(&mut self, n: i64, j: i64) {
        if let Some(i) = self.idx(n, j) {
            self.cells[i] = true;
        }
    }

    fn clear(&mut self, n: i64, j: i64) {
        if let Some(i) = self.idx(n, j) {
            self.cells[i] = false;
        }
    }

    fn infected(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for n in 0..=self.nmax {
            for j in self.jmin..=self.jmax {
                if self.get(n, j) {
                    out.push((n, j));
                }
            }
        }
        out
    }
}

/// Worklist closure of `initial` over the grid window, against a background
/// of ℍ_u plus the given fully-infected lines. Exact within the window.
fn hp_closure(
    ctx: &HpCtx,
    initial: &[(i64, i64)],
    nmax: i64,
    jmin: i64,
    jmax: i64,
    completed: &BTreeSet<i64>,
) -> Grid {
    let env = |n: i64| n < 0 || completed.contains(&n);
    let mut grid = Grid::new(nmax, jmin, jmax);
    for &(n, j) in initial {
        if !env(n) {
            grid.set(n, j);
        }
    }
    let mut queue: VecDeque<(i64, i64)> = VecDeque::new();
    let mut queued = Grid::new(nmax, jmin, jmax);
    for n in 0..=nmax {
        if env(n) {
            continue;
        }
        for j in jmin..=jmax {
            if !grid.get(n, j) {
                queue.push_back((n, j));
                queued.set(n, j);
            }
        }
    }
    while let Some((n, j)) = queue.pop_front() {
        if grid.get(n, j) {
            continue;
        }
        let view = |nn: i64, jj: i64| env(nn) || grid.get(nn, jj);
        if ctx.activates(&view, n, j) {
            grid.set(n, j);
            for &(dn, dj) in &ctx.offs_union {
                let (cn, cj) = (n - dn, j - dj);
                if cn >= 0 && cn <= nmax && cj >= jmin && cj <= jmax && !env(cn) && !grid.get(cn, cj) && !queued.get(cn, cj)
                {
                    queued.set(cn, cj);
                    queue.push_back((cn, cj));
                }
            }
        } else {
            queued.clear(n, j);
        }
    }
    grid
}

/// Does [ℍ_u ∪ completed lines ∪ patch] contain patch shifted by sign·u^⊥?
fn patch_pumps(ctx: &HpCtx, patch: &[(i64, i64)], sign: i64, completed: &BTreeSet<i64>) -> bool {
    if patch.is_empty() {
        return false;
    }
    let d = ctx.d;
    let nmax = patch.iter().map(|c| c.0).max().unwrap() + d + 1;
    let jmin = patch.iter().map(|c| c.1).min().unwrap() - (2 * d + 3);
    let jmax = patch.iter().map(|c| c.1).max().unwrap() + (2 * d + 3);
    let cl = hp_closure(ctx, patch, nmax, jmin, jmax, completed);
    patch
        .iter()
        .all(|&(n, j)| cl.get(n, j + sign) || completed.contains(&n))
}

struct PumpScan {
    /// Lines certified fully infected (a contiguous run pumps both ways).
    complete: BTreeSet<i64>,
    /// Some patch pumps in at least one direction (infinite growth).
    any: bool,
}

fn scan_pumps(ctx: &HpCtx, grid: &Grid, completed: &BTreeSet<i64>, early_exit: bool) -> PumpScan {
    let d = ctx.d;
    let wcap = 2 * d + 4;
    let mut by_line: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (n, j) in grid.infected() {
        by_line.entry(n).or_default().push(j);
    }
    let band_patch = |n: i64, jlo: i64, jhi: i64| -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for (&m, js) in by_line.range(..=n) {
            for &j in js {
                if (jlo..=jhi).contains(&j) {
                    out.push((m, j));
                }
            }
        }
        out
    };
    let mut out = PumpScan {
        complete: BTreeSet::new(),
        any: false,
    };
    for (&n, js) in &by_line {
        if completed.contains(&n) {
            continue;
        }
        let mut js = js.clone();
        js.sort_unstable();
        js.dedup();
        let mut runs: Vec<(i64, i64)> = Vec::new();
        for &j in &js {
            match runs.last_mut() {
                Some((_, hi)) if *hi + 1 == j => *hi = j,
                _ => runs.push((j, j)),
            }
        }
        for (j0, j1) in runs {
            let plus = patch_pumps(ctx, &band_patch(n, (j1 - wcap + 1).max(j0), j1), 1, completed);
            if plus && early_exit {
                out.any = true;
                return out;
            }
            let minus =
                patch_pumps(ctx, &band_patch(n, j0, (j0 + wcap - 1).min(j1)), -1, completed);
            out.any |= plus || minus;
            if early_exit && out.any {
                return out;
            }
            if plus && minus {
                out.complete.insert(n);
            }
        }
    }
    out
}

/// Verify that ℍ_u ∪ completed lines ∪ clutter is a fixed point on all of ℤ².
fn certify_settled(ctx: &HpCtx, clutter: &[(i64, i64)], completed: &BTreeSet<i64>) -> bool {
    // Far from the clutter the environment is u^⊥-translation invariant, so
    // one representative per line decides activation there.
    let env = |n: i64| n < 0 || completed.contains(&n);
    let top = completed.iter().max().copied().unwrap_or(-1) + ctx.d;
    for n in 0..=top {
        if completed.contains(&n) {
            continue;
        }
        if ctx.activates(&|nn, _| env(nn), n, 0) {
            return false;
        }
    }
    // Near the clutter: a healthy site can newly activate only if some rule
    // offset points from it to a clutter cell, so candidates are clutter − offs.
    let set: BTreeSet<(i64, i64)> = clutter.iter().copied().collect();
    let view = |n: i64, j: i64| env(n) || set.contains(&(n, j));
    for &(n, j) in clutter {
        for &(dn, dj) in &ctx.offs_union {
            let (cn, cj) = (n - dn, j - dj);
            if view(cn, cj) {
                continue;
            }
            if ctx.activates(&view, cn, cj) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Verdict {
    Infinite,
    Settled,
    Undecided,
}

fn window_dims(ctx: &HpCtx, zc: &[(i64, i64)], scale: i64) -> (i64, i64, i64) {
    let d = ctx.d;
    let zn = zc.iter().map(|c| c.0).max().unwrap_or(0);
    let zj0 = zc.iter().map(|c| c.1).min().unwrap_or(0);
    let zj1 = zc.iter().map(|c| c.1).max().unwrap_or(0);
    (
        (zn + 3 * d) * scale,
        zj0 - (4 * d + 4) * scale,
        zj1 + (4 * d + 4) * scale,
    )
}

/// Fast decision used by the difficulty search: one closure pass, pump scan
/// with early exit, and the exact settledness check.
fn quick_verdict(ctx: &HpCtx, zc: &[(i64, i64)], scale: i64) -> Verdict {
    let (nmax, jmin, jmax) = window_dims(ctx, zc, scale);
    let none = BTreeSet::new();
    let grid = hp_closure(ctx, zc, nmax, jmin, jmax, &none);
    let scan = scan_pumps(ctx, &grid, &none, true);
    if scan.any {
        return Verdict::Infinite;
    }
    if certify_settled(ctx, &grid.infected(), &none) {
        return Verdict::Settled;
    }
    Verdict::Undecided
}

fn quick_verdict_retry(ctx: &HpCtx, zc: &[(i64, i64)], budget: &Budget) -> Verdict {
    match quick_verdict(ctx, zc, budget.window_scale) {
        Verdict::Undecided => quick_verdict(ctx, zc, budget.window_scale * 2),
        v => v,
    }
}

pub(crate) struct FullOutcome {
    /// Lines l_u(n), n ≥ 0, certified fully infected.
    pub completed: BTreeSet<i64>,
    /// Exact ℤ² closure certified equal to env ∪ clutter.
    pub settled: bool,
}

/// Alternating closure / line-completion passes, for voracity verdicts.
fn full_outcome(ctx: &HpCtx, zc: &[(i64, i64)], scale: i64) -> FullOutcome {
    let (nmax, jmin, jmax) = window_dims(ctx, zc, scale);
    let mut completed: BTreeSet<i64> = BTreeSet::new();
    let mut clutter;
    loop {
        let grid = hp_closure(ctx, zc, nmax, jmin, jmax, &completed);
        let scan = scan_pumps(ctx, &grid, &completed, false);
        clutter = grid.infected();
        let fresh: Vec<i64> = scan.complete.difference(&completed).copied().collect();
        if fresh.is_empty() {
            break;
        }
        completed.extend(fresh);
    }
    let settled = certify_settled(ctx, &clutter, &completed);
    FullOutcome { completed, settled }
}

fn full_outcome_retry(ctx: &HpCtx, zc: &[(i64, i64)], budget: &Budget) -> FullOutcome {
    let first = full_outcome(ctx, zc, budget.window_scale);
    if first.settled || first.completed.contains(&0) {
        return first;
    }
    full_outcome(ctx, zc, budget.window_scale * 2)
}

// --- difficulty & helping sets --------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Finite(u32),
    Infinite,
    Unknown { searched_up_to: u32 },
}

fn is_isolated_stable(f: &UpdateFamily, u: Direction) -> bool {
    stable_directions(f).isolated.contains(&u)
}

/// Closed form for symmetric threshold families: α(u) = max(0, θ − |K∖l_u|/2).
fn threshold_difficulty(f: &UpdateFamily, u: Direction) -> Option<u32> {
    let t = f.threshold()?;
    if !f.is_symmetric() {
        return None;
    }
    let off_line = t
        .punctured()
        .iter()
        .filter(|&&k| u.line_value(k) != 0)
        .count();
    Some((t.theta as i64 - off_line as i64 / 2).max(0) as u32)
}

fn canonical_class(ctx: &HpCtx, zc: &[(i64, i64)]) -> Vec<LatticeVector> {
    let jmin = zc.iter().map(|c| c.1).min().unwrap_or(0);
    let mut out: Vec<LatticeVector> = zc.iter().map(|&(n, j)| ctx.site(n, j - jmin)).collect();
    out.sort();
    out
}

/// Exhaustive search over candidate sets near l_u, smallest size first.
fn difficulty_search(
    f: &UpdateFamily,
    u: Direction,
    budget: &Budget,
) -> (Difficulty, Vec<Vec<LatticeVector>>) {
    let ctx = HpCtx::new(f, u);
    let span = 3 * ctx.d * budget.window_scale;
    let grid: Vec<(i64, i64)> = (0..=span)
        .flat_map(|n| (0..=span).map(move |j| (n, j)))
        .collect();

    for size in 1..=budget.max_size {
        let mut classes: Vec<Vec<LatticeVector>> = Vec::new();
        let mut undecided = false;
        for combo in grid.iter().copied().combinations(size) {
            // canonical translate: some member sits at offset 0 on its line
            if combo.iter().map(|c| c.1).min() != Some(0) {
                continue;
            }
            match quick_verdict_retry(&ctx, &combo, budget) {
                Verdict::Infinite => classes.push(canonical_class(&ctx, &combo)),
                Verdict::Settled => {}
                Verdict::Undecided => undecided = true,
            }
        }
        if !classes.is_empty() {
            classes.sort();
            classes.dedup();
            return (Difficulty::Finite(size as u32), classes);
        }
        if undecided {
            return (
                Difficulty::Unknown {
                    searched_up_to: size as u32,
                },
                vec![],
            );
        }
    }
    (
        Difficulty::Unknown {
            searched_up_to: budget.max_size as u32,
        },
        vec![],
    )
}

/// Helping-set search for symmetric threshold families. Any helping set must
/// sit inside x + K for the first site x ∈ l_u(0) it infects, because the
/// half-plane supplies at most θ − α(u) of the θ required sites and K meets
/// l_u(±1); so candidates range over the upper half of K.
fn threshold_helping_sets(
    f: &UpdateFamily,
    u: Direction,
    alpha: u32,
    budget: &Budget,
) -> Vec<Vec<LatticeVector>> {
    let t = f.threshold().expect("threshold family");
    let ctx = HpCtx::new(f, u);
    let pool: Vec<(i64, i64)> = t
        .neighbourhood
        .iter()
        .filter(|&&k| u.line_value(k) >= 0)
        .map(|&k| ctx.coords(k))
        .collect();
    let mut classes = Vec::new();
    for combo in pool.iter().copied().combinations(alpha as usize) {
        if quick_verdict_retry(&ctx, &combo, budget) == Verdict::Infinite {
            classes.push(canonical_class(&ctx, &combo));
        }
    }
    classes.sort();
    classes.dedup();
    classes
}

pub fn difficulty(f: &UpdateFamily, u: Direction, budget: &Budget) -> Difficulty {
    if !is_stable(f, u) {
        return Difficulty::Finite(0);
    }
    if !is_isolated_stable(f, u) {
        return Difficulty::Infinite;
    }
    if let Some(a) = threshold_difficulty(f, u) {
        return Difficulty::Finite(a);
    }
    difficulty_search(f, u, budget).0
}

/// Difficulty by exhaustive search only, ignoring threshold closed forms.
pub fn difficulty_brute_force(f: &UpdateFamily, u: Direction, budget: &Budget) -> Difficulty {
    if !is_stable(f, u) {
        return Difficulty::Finite(0);
    }
    if !is_isolated_stable(f, u) {
        return Difficulty::Infinite;
    }
    difficulty_search(f, u, budget).0
}

/// All certified helping-set classes for u, canonicalized modulo translation
/// along u^⊥.
pub fn helping_sets(
    f: &UpdateFamily,
    u: Direction,
    budget: &Budget,
) -> Result<Vec<Vec<LatticeVector>>, AnalysisError> {
    if !is_stable(f, u) {
        return Ok(vec![vec![]]);
    }
    if !is_isolated_stable(f, u) {
        return Err(AnalysisError::InfiniteDifficulty(u));
    }
    if let Some(alpha) = threshold_difficulty(f, u) {
        let t = f.threshold().expect("threshold family");
        let meets_first_line = t.punctured().iter().any(|&k| u.line_value(k) == 1);
        if meets_first_line {
            let classes = threshold_helping_sets(f, u, alpha, budget);
            if !classes.is_empty() {
                return Ok(classes);
            }
        }
    }
    match difficulty_search(f, u, budget) {
        (Difficulty::Finite(_), classes) => Ok(classes),
        _ => Err(AnalysisError::Uncertified(u)),
    }
}

/// Smallest W such that W consecutive sites on l_u(0), with ℍ_u, immediately
/// extend by one site at each end (hence fill the whole line).
pub fn w_helping_width(f: &UpdateFamily, u: Direction, cap: u32) -> Option<u32> {
    let ctx = HpCtx::new(f, u);
    let d = ctx.d;
    for wlen in 1..=cap as i64 {
        let sigma: Vec<(i64, i64)> = (1..=wlen).map(|t| (0, t)).collect();
        let cl = hp_closure(
            &ctx,
            &sigma,
            2 * d + 1,
            -(2 * d + 3),
            wlen + 2 * d + 3,
            &BTreeSet::new(),
        );
        if cl.get(0, 0) && cl.get(0, wlen + 1) {
            return Some(wlen as u32);
        }
    }
    None
}

// --- voracity -------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Voracity {
    Yes,
    No { witness: Vec<LatticeVector> },
    Inconclusive,
}

/// u is voracious when every helping set eventually infects all of l_u(0).
pub fn check_voracity(f: &UpdateFamily, u: Direction, budget: &Budget) -> Voracity {
    let classes = match helping_sets(f, u, budget) {
        Ok(c) if !c.is_empty() => c,
        _ => return Voracity::Inconclusive,
    };
    check_voracity_with(f, u, &classes, budget)
}

fn check_voracity_with(
    f: &UpdateFamily,
    u: Direction,
    classes: &[Vec<LatticeVector>],
    budget: &Budget,
) -> Voracity {
    let ctx = HpCtx::new(f, u);
    let mut inconclusive = false;
    for z in classes {
        if z.is_empty() {
            continue; // unstable direction: nothing to check
        }
        let zc: Vec<(i64, i64)> = z.iter().map(|&x| ctx.coords(x)).collect();
        let out = full_outcome_retry(&ctx, &zc, budget);
        if out.completed.contains(&0) {
            continue;
        }
        if out.settled {
            return Voracity::No { witness: z.clone() };
        }
        inconclusive = true;
    }
    if inconclusive {
        Voracity::Inconclusive
    } else {
        Voracity::Yes
    }
}

// --- whole-family report ----------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DirectionReport {
    pub direction: Direction,
    pub stable: bool,
    pub isolated: bool,
    pub difficulty: Difficulty,
    pub helping_sets: Vec<Vec<LatticeVector>>,
    pub w_width: Option<u32>,
    pub voracious: Option<Voracity>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub name: Option<String>,
    pub quasi_stable: Vec<Direction>,
    pub isolated_stable: Vec<Direction>,
    pub stable_arcs: Vec<(Direction, Direction)>,
    pub alpha: Option<u32>,
    pub s_alpha: Vec<Direction>,
    pub isotropic: bool,
    pub symmetric: bool,
    pub voracious: Voracity,
    pub directions: Vec<DirectionReport>,
}

/// Every open semicircle contains a member iff consecutive ccw gaps are < π.
fn semicircle_covered(dirs: &[Direction]) -> bool {
    if dirs.len() < 3 {
        // two or fewer directions always leave an open semicircle uncovered
        return false;
    }
    let mut sorted: Vec<Direction> = dirs.to_vec();
    sorted.sort_by(|a, b| ccw_cmp(a.vector(), b.vector()));
    (0..sorted.len()).all(|i| {
        let a = sorted[i].vector();
        let b = sorted[(i + 1) % sorted.len()].vector();
        a.cross(b) > 0
    })
}

pub fn analyze(f: &UpdateFamily, budget: &Budget) -> FamilyReport {
    let s = quasi_stable_set(f);
    let stable = stable_directions(f);
    let symmetric = f.is_symmetric();

    let mut directions = Vec::new();
    for &u in &s {
        let st = is_stable(f, u);
        let isolated = stable.isolated.contains(&u);
        let diff = if !st {
            Difficulty::Finite(0)
        } else if !isolated {
            Difficulty::Infinite
        } else if let Some(a) = threshold_difficulty(f, u) {
            Difficulty::Finite(a)
        } else {
            difficulty_search(f, u, budget).0
        };
        let (help, ww, vor) = if isolated {
            let help = helping_sets(f, u, budget).unwrap_or_default();
            let ww = w_helping_width(f, u, budget.w_cap);
            let vor = if help.is_empty() {
                Voracity::Inconclusive
            } else {
                check_voracity_with(f, u, &help, budget)
            };
            (help, ww, Some(vor))
        } else if !st {
            (vec![vec![]], None, None)
        } else {
            (vec![], None, None)
        };
        directions.push(DirectionReport {
            direction: u,
            stable: st,
            isolated,
            difficulty: diff,
            helping_sets: help,
            w_width: ww,
            voracious: vor,
        });
    }

    let isolated_diffs: Vec<Difficulty> = directions
        .iter()
        .filter(|r| r.isolated)
        .map(|r| r.difficulty)
        .collect();
    let alpha = if !isolated_diffs.is_empty()
        && isolated_diffs
            .iter()
            .all(|d| matches!(d, Difficulty::Finite(_)))
    {
        isolated_diffs
            .iter()
            .map(|d| match d {
                Difficulty::Finite(a) => *a,
                _ => unreachable!(),
            })
            .max()
    } else {
        None
    };
    let s_alpha: Vec<Direction> = match alpha {
        Some(a) => directions
            .iter()
            .filter(|r| r.isolated && r.difficulty == Difficulty::Finite(a))
            .map(|r| r.direction)
            .collect(),
        None => vec![],
    };
    let isotropic = stable.arcs.is_empty()
        && !stable.isolated.is_empty()
        && alpha.is_some()
        && semicircle_covered(&s_alpha);

    let verdicts: Vec<&Voracity> = directions
        .iter()
        .filter_map(|r| r.voracious.as_ref())
        .collect();
    let voracious = if let Some(no) = verdicts.iter().find(|v| matches!(v, Voracity::No { .. })) {
        (*no).clone()
    } else if verdicts.iter().any(|v| matches!(v, Voracity::Inconclusive)) {
        Voracity::Inconclusive
    } else {
        Voracity::Yes
    };

    FamilyReport {
        name: f.name.clone(),
        quasi_stable: s,
        isolated_stable: stable.isolated.clone(),
        stable_arcs: stable.arcs.clone(),
        alpha,
        s_alpha,
        isotropic,
        symmetric,
        voracious,
        directions,
    }
}

/// Furthest line l_u(n) reached by any helping-set class.
pub fn helping_line_reach(u: Direction, classes: &[Vec<LatticeVector>]) -> i64 {
    classes
        .iter()
        .flatten()
        .map(|&x| u.line_value(x))
        .max()
        .unwrap_or(0)
}

/// The V-constant used by traversability: line reach of helping sets plus
/// the W-helping width, with one line of slack.
pub fn v_estimate(u: Direction, classes: &[Vec<LatticeVector>], w_width: u32) -> i64 {
    helping_line_reach(u, classes) + w_width as i64 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::v;
    use crate::rules::{modified_two_neighbour, two_neighbour, UpdateFamily, UpdateRule};

    fn dir(a: i64, b: i64) -> Direction {
        Direction::new(a, b).unwrap()
    }

    fn u1_family() -> UpdateFamily {
        let rules = [
            vec![v(1, 1), v(-1, 1)],
            vec![v(1, 1), v(1, -1)],
            vec![v(-1, -1), v(-1, 1)],
            vec![v(-1, -1), v(1, -1)],
        ]
        .into_iter()
        .map(|s| UpdateRule::new(s).unwrap())
        .collect();
        UpdateFamily::from_rules(rules).unwrap()
    }

    #[test]
    fn two_neighbour_stability() {
        let f = two_neighbour();
        assert!(is_stable(&f, dir(1, 0)));
        assert!(!is_stable(&f, dir(1, 1)));
        let east = UpdateFamily::from_rules(vec![UpdateRule::new(vec![v(1, 0)]).unwrap()]).unwrap();
        assert!(!is_stable(&east, dir(-1, 0)));
    }

    #[test]
    fn quasi_stable_sets() {
        let f = two_neighbour();
        assert_eq!(
            quasi_stable_set(&f),
            vec![dir(1, 0), dir(0, 1), dir(-1, 0), dir(0, -1)]
        );
        let single =
            UpdateFamily::from_rules(vec![UpdateRule::new(vec![v(1, 2)]).unwrap()]).unwrap();
        assert_eq!(quasi_stable_set(&single), vec![dir(-2, 1), dir(2, -1)]);
    }

    #[test]
    fn two_neighbour_stable_set() {
        let st = stable_directions(&two_neighbour());
        assert_eq!(
            st.isolated,
            vec![dir(1, 0), dir(0, 1), dir(-1, 0), dir(0, -1)]
        );
        assert!(st.arcs.is_empty());
    }

    #[test]
    fn east_erosion_semicircle() {
        let east = UpdateFamily::from_rules(vec![UpdateRule::new(vec![v(1, 0)]).unwrap()]).unwrap();
        let st = stable_directions(&east);
        assert!(st.isolated.is_empty());
        assert_eq!(st.arcs, vec![(dir(0, -1), dir(0, 1))]);
    }

    #[test]
    fn two_neighbour_difficulty() {
        let f = two_neighbour();
        let b = Budget::default();
        assert_eq!(difficulty(&f, dir(1, 0), &b), Difficulty::Finite(1));
        assert_eq!(
            difficulty_brute_force(&f, dir(1, 0), &b),
            Difficulty::Finite(1)
        );
        assert_eq!(difficulty(&f, dir(1, 1), &b), Difficulty::Finite(0));
    }

    #[test]
    fn two_neighbour_helping_sets() {
        let f = two_neighbour();
        let classes = helping_sets(&f, dir(1, 0), &Budget::default()).unwrap();
        assert_eq!(classes, vec![vec![v(0, 0)], vec![v(1, 0)]]);
    }

    #[test]
    fn w_widths() {
        assert_eq!(w_helping_width(&two_neighbour(), dir(1, 0), 8), Some(1));
        assert_eq!(
            w_helping_width(&modified_two_neighbour(), dir(1, 0), 8),
            Some(1)
        );
        assert_eq!(w_helping_width(&two_neighbour(), dir(1, 0), 0), None);
    }

    #[test]
    fn two_neighbour_voracity() {
        let f = two_neighbour();
        assert_eq!(
            check_voracity(&f, dir(1, 0), &Budget::default()),
            Voracity::Yes
        );
    }

    #[test]
    fn two_neighbour_report() {
        let r = analyze(&two_neighbour(), &Budget::default());
        assert_eq!(r.alpha, Some(1));
        assert!(r.isotropic && r.symmetric);
        assert_eq!(r.voracious, Voracity::Yes);
        assert_eq!(r.s_alpha.len(), 4);
    }

    #[test]
    fn u1_is_non_voracious() {
        let f = u1_family();
        let st = stable_directions(&f);
        assert_eq!(st.isolated.len(), 4);
        assert!(st.arcs.is_empty());
        let u = dir(1, 1);
        assert!(st.isolated.contains(&u));
        assert_eq!(difficulty(&f, u, &Budget::default()), Difficulty::Finite(1));
        match check_voracity(&f, u, &Budget::default()) {
            Voracity::No { witness } => {
                // the failing class sits above the boundary line
                assert!(witness.iter().all(|&x| u.line_value(x) > 0));
            }
            other => panic!("expected non-voracious, got {other:?}"),
        }
    }

    #[test]
    fn symmetry_transfer() {
        let f = two_neighbour();
        let b = Budget::default();
        for &(a, bb) in &[(1, 0), (0, 1), (1, 1), (2, 1)] {
            let u = dir(a, bb);
            assert_eq!(difficulty(&f, u, &b), difficulty(&f, u.negated(), &b));
        }
    }
}
