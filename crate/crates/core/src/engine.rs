//! Bootstrap dynamics: stepped infection, closure, infection time, and
//! Bernoulli sampling on bounded windows or tori.

use crate::lattice::{v, LatticeVector};
use crate::rng::{probability_threshold, stream_id, CounterRng};
use crate::rules::UpdateFamily;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("site {0:?} outside window")]
    OutsideWindow(LatticeVector),
}

/// What a rule sees when it reaches past the edge of a box window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Out-of-window sites count as healthy.
    Free,
    /// Out-of-window sites count as infected iff ⟨x, dir⟩ < offset,
    /// realizing a half-plane with outer normal `dir`.
    InfectedHalfplane { dir: LatticeVector, offset: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    /// Inclusive bounds.
    Box { x0: i64, x1: i64, y0: i64, y1: i64 },
    Torus { lx: i64, ly: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub kind: WindowKind,
    pub boundary: Boundary,
}

impl Window {
    pub fn boxed(x0: i64, x1: i64, y0: i64, y1: i64) -> Window {
        assert!(x0 <= x1 && y0 <= y1, "box bounds out of order");
        Window {
            kind: WindowKind::Box { x0, x1, y0, y1 },
            boundary: Boundary::Free,
        }
    }

    pub fn torus(lx: i64, ly: i64) -> Window {
        assert!(lx >= 1 && ly >= 1, "torus sides must be positive");
        Window {
            kind: WindowKind::Torus { lx, ly },
            boundary: Boundary::Free,
        }
    }

    pub fn with_halfplane(mut self, dir: LatticeVector, offset: i64) -> Window {
        self.boundary = Boundary::InfectedHalfplane { dir, offset };
        self
    }

    fn dims(&self) -> (i64, i64, i64, i64) {
        match self.kind {
            WindowKind::Box { x0, x1, y0, y1 } => (x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            WindowKind::Torus { lx, ly } => (0, 0, lx, ly),
        }
    }

    pub fn contains(&self, s: LatticeVector) -> bool {
        let (x0, y0, w, h) = self.dims();
        match self.kind {
            WindowKind::Box { .. } => {
                s.x >= x0 && s.x < x0 + w && s.y >= y0 && s.y < y0 + h
            }
            WindowKind::Torus { .. } => true,
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = LatticeVector> {
        let (x0, y0, w, h) = self.dims();
        (0..h).flat_map(move |j| (0..w).map(move |i| v(x0 + i, y0 + j)))
    }

    pub fn site_count(&self) -> usize {
        let (_, _, w, h) = self.dims();
        (w * h) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub window: Window,
    bits: Vec<u64>,
}

impl Configuration {
    pub fn empty(window: Window) -> Configuration {
        let n = window.site_count();
        Configuration {
            window,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_sites(window: Window, sites: &[LatticeVector]) -> Configuration {
        let mut c = Configuration::empty(window);
        for &s in sites {
            c.set(s);
        }
        c
    }

    fn index(&self, s: LatticeVector) -> Option<usize> {
        let (x0, y0, w, h) = self.window.dims();
        match self.window.kind {
            WindowKind::Box { .. } => {
                if s.x < x0 || s.x >= x0 + w || s.y < y0 || s.y >= y0 + h {
                    None
                } else {
                    Some(((s.y - y0) * w + (s.x - x0)) as usize)
                }
            }
            WindowKind::Torus { .. } => {
                let x = s.x.rem_euclid(w);
                let y = s.y.rem_euclid(h);
                Some((y * w + x) as usize)
            }
        }
    }

    /// Infected test with the boundary rule applied to out-of-window sites.
    pub fn get(&self, s: LatticeVector) -> bool {
        match self.index(s) {
            Some(i) => self.bits[i / 64] >> (i % 64) & 1 != 0,
            None => match self.window.boundary {
                Boundary::Free => false,
                Boundary::InfectedHalfplane { dir, offset } => s.dot(dir) < offset,
            },
        }
    }

    pub fn set(&mut self, s: LatticeVector) {
        let i = self.index(s).expect("set outside window");
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn infected_sites(&self) -> Vec<LatticeVector> {
        self.window.sites().filter(|&s| self.get(s)).collect()
    }

    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.bits
            .iter()
            .zip(&other.bits)
            .all(|(a, b)| a & !b == 0)
    }

    /// Product-Bernoulli(p) sample; deterministic in (seed, stream) and
    /// monotonically coupled across p for a fixed seed.
    pub fn bernoulli(window: Window, p: f64, seed: u64, stream: u64) -> Configuration {
        let rng = CounterRng::new(seed);
        let t = probability_threshold(p);
        let mut c = Configuration::empty(window);
        let (x0, y0, w, h) = window.dims();
        for j in 0..h {
            for i in 0..w {
                let counter = (j * w + i) as u64;
                if rng.bernoulli(stream, counter, t) {
                    c.set(v(x0 + i, y0 + j));
                }
            }
        }
        c
    }
}

fn would_infect(f: &UpdateFamily, c: &Configuration, x: LatticeVector) -> bool {
    f.activates(&|u| c.get(x + u))
}

/// One synchronous round of the dynamics.
pub fn step(f: &UpdateFamily, c: &Configuration) -> Configuration {
    let mut out = c.clone();
    for s in c.window.sites() {
        if !c.get(s) && would_infect(f, c, s) {
            out.set(s);
        }
    }
    out
}

/// Least fixed point of `step` containing `c`, via a worklist: when a site is
/// infected, only sites that can see it through some rule offset are retested.
pub fn closure(f: &UpdateFamily, c: &Configuration) -> Configuration {
    let mut cur = c.clone();
    let offsets = f.rule_sites();
    let mut queue: VecDeque<LatticeVector> = VecDeque::new();
    let mut queued = Configuration::empty(c.window);

    let enqueue = |q: &mut VecDeque<LatticeVector>, qd: &mut Configuration, s| {
        if qd.window.contains(s) && !qd.get(s) {
            qd.set(s);
            q.push_back(s);
        }
    };

    for s in c.window.sites() {
        if !cur.get(s) {
            enqueue(&mut queue, &mut queued, s);
        }
    }
    while let Some(x) = queue.pop_front() {
        if cur.get(x) {
            continue;
        }
        if would_infect(f, &cur, x) {
            cur.set(x);
            for &u in &offsets {
                let cand = x - u;
                if !cur.get(cand) {
                    enqueue(&mut queue, &mut queued, cand);
                }
            }
        } else {
            // Allow later re-queueing once a neighbour changes.
            let i = queued.index(x).unwrap();
            queued.bits[i / 64] &= !(1 << (i % 64));
        }
    }
    cur
}

/// Least t with `target` infected at time t, or None when never infected.
pub fn infection_time(
    f: &UpdateFamily,
    c: &Configuration,
    target: LatticeVector,
) -> Result<Option<u64>, EngineError> {
    if !c.window.contains(target) {
        return Err(EngineError::OutsideWindow(target));
    }
    if c.get(target) {
        return Ok(Some(0));
    }
    let offsets = f.rule_sites();
    let mut cur = c.clone();
    // Frontier of last round's new infections; a site can newly activate only
    // if one of its rule-offset sites changed (or in round 1, via boundary).
    let mut frontier: Vec<LatticeVector> = c.window.sites().filter(|&s| !cur.get(s)).collect();
    let mut t = 0u64;
    loop {
        t += 1;
        let mut newly: Vec<LatticeVector> = Vec::new();
        for &x in &frontier {
            if !cur.get(x) && would_infect(f, &cur, x) {
                newly.push(x);
            }
        }
        if newly.is_empty() {
            return Ok(None);
        }
        for &x in &newly {
            cur.set(x);
            if x == target {
                return Ok(Some(t));
            }
            // On a torus the target may be reached modulo wrapping.
            if cur.index(x) == cur.index(target) {
                return Ok(Some(t));
            }
        }
        let mut cand = Configuration::empty(c.window);
        let mut next = Vec::new();
        for &x in &newly {
            for &u in &offsets {
                let s = x - u;
                if cand.window.contains(s) && !cur.get(s) && !cand.get(s) {
                    cand.set(s);
                    next.push(s);
                }
            }
        }
        frontier = next;
    }
}

/// Draw A ~ Bernoulli(p) on an L×L torus and return τ of the origin.
pub fn sample_tau(
    f: &UpdateFamily,
    p: f64,
    l: i64,
    seed: u64,
    replicate: u64,
) -> Option<u64> {
    let window = Window::torus(l, l);
    let c = Configuration::bernoulli(window, p, seed, stream_id("tau", replicate));
    infection_time(f, &c, v(0, 0)).expect("origin is on the torus")
}
