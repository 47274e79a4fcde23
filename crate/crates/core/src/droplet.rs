//! Exact polygonal droplet algebra over a direction frame.
//!
//! A droplet is ∩_u { x : ⟨x, u⟩ ≤ a_u } over the frame's primitive
//! directions u, with the radius a_u measured in units of ρ_u so that the
//! constraints have integer normals and the whole algebra stays exact over
//! rational scalars.

use crate::analysis::ccw_cmp;
use crate::direction::Direction;
use crate::engine::{closure, Configuration, Window};
use crate::lattice::LatticeVector;
use crate::rules::UpdateFamily;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DropletError {
    #[error("frame must contain a direction in every open semicircle")]
    UnboundedFrame,
    #[error("frame needs at least one direction")]
    EmptyFrame,
    #[error("radii length {got} does not match frame size {want}")]
    RadiiLength { got: usize, want: usize },
    #[error("half-plane intersection is empty")]
    EmptyIntersection,
    #[error("droplets have different frames")]
    FrameMismatch,
    #[error("containment fails in direction {0:?}")]
    NotContained(Direction),
    #[error("symmetric droplet requires a frame closed under negation")]
    AsymmetricFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    S,
    SAlpha,
}

impl Default for FrameTag {
    fn default() -> Self {
        FrameTag::SAlpha
    }
}

/// Counterclockwise-ordered set of rational directions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionFrame {
    dirs: Vec<Direction>,
    #[serde(default)]
    pub tag: FrameTag,
}

impl DirectionFrame {
    /// Sorts counterclockwise and deduplicates. The frame must hit every
    /// open semicircle, which makes every droplet on it bounded.
    pub fn new(dirs: Vec<Direction>, tag: FrameTag) -> Result<DirectionFrame, DropletError> {
        let mut dirs = dirs;
        dirs.sort_by(|a, b| ccw_cmp(a.vector(), b.vector()));
        dirs.dedup();
        if dirs.is_empty() {
            return Err(DropletError::EmptyFrame);
        }
        let n = dirs.len();
        let covered = n >= 3
            && (0..n).all(|i| dirs[i].vector().cross(dirs[(i + 1) % n].vector()) > 0);
        if !covered {
            return Err(DropletError::UnboundedFrame);
        }
        Ok(DirectionFrame { dirs, tag })
    }

    pub fn dirs(&self) -> &[Direction] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.dirs.iter().all(|u| self.dirs.contains(&u.negated()))
    }

    /// The axis frame {±e₁, ±e₂}.
    pub fn axes(tag: FrameTag) -> DirectionFrame {
        DirectionFrame::new(
            [(1, 0), (0, 1), (-1, 0), (0, -1)]
                .iter()
                .map(|&(a, b)| Direction::new(a, b).unwrap())
                .collect(),
            tag,
        )
        .expect("axis frame is valid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    fn dot_dir(&self, u: Direction) -> T {
        self.x.clone() * T::from_int(u.a) + self.y.clone() * T::from_int(u.b)
    }

    fn dot_vec(&self, w: LatticeVector) -> T {
        self.x.clone() * T::from_int(w.x) + self.y.clone() * T::from_int(w.y)
    }
}

/// Convex polygon ∩_u {⟨x,u⟩ ≤ a_u}, radii kept normalized (every constraint
/// is attained by the polygon).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Droplet<T> {
    frame: DirectionFrame,
    radii: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropletMetrics<T> {
    /// m_u = |E_u(D)|·ρ_u: lattice-step count along each edge.
    pub dimension: Vec<T>,
    /// Φ = Σ m_u.
    pub perimeter: T,
}

fn tol_for<T: Scalar>(a: &T) -> T {
    T::tight_tol() * (T::one() + a.abs())
}

/// Vertices of the half-plane intersection: pairwise constraint-line
/// intersections that satisfy every other constraint.
fn vertex_candidates<T: Scalar>(
    frame: &DirectionFrame,
    radii: &[T],
) -> Result<Vec<Point<T>>, DropletError> {
    let dirs = frame.dirs();
    let n = dirs.len();
    // opposite parallel constraints crossing over ⇒ empty
    for i in 0..n {
        for j in 0..n {
            if dirs[j] == dirs[i].negated()
                && radii[i].clone() + radii[j].clone() < T::zero()
            {
                return Err(DropletError::EmptyIntersection);
            }
        }
    }
    let mut verts: Vec<Point<T>> = Vec::new();
    for i in 0..n {
        'pairs: for j in (i + 1)..n {
            let det = dirs[i].vector().cross(dirs[j].vector());
            if det == 0 {
                continue;
            }
            let det = T::from_int(det);
            let (ai, aj) = (radii[i].clone(), radii[j].clone());
            let p = Point {
                x: (ai.clone() * T::from_int(dirs[j].b) - aj.clone() * T::from_int(dirs[i].b))
                    / det.clone(),
                y: (T::from_int(dirs[i].a) * aj - T::from_int(dirs[j].a) * ai) / det,
            };
            for k in 0..n {
                if p.dot_dir(dirs[k]) > radii[k].clone() + tol_for(&radii[k]) {
                    continue 'pairs;
                }
            }
            if !verts.iter().any(|q| {
                (q.x.clone() - p.x.clone()).abs() <= T::tight_tol()
                    && (q.y.clone() - p.y.clone()).abs() <= T::tight_tol()
            }) {
                verts.push(p);
            }
        }
    }
    if verts.is_empty() {
        return Err(DropletError::EmptyIntersection);
    }
    Ok(verts)
}

impl<T: Scalar> Droplet<T> {
    /// Builds and normalizes: each radius is recomputed as the supremum of
    /// ⟨·,u⟩ over the polygon, so all constraints are tight.
    pub fn new(frame: DirectionFrame, raw: Vec<T>) -> Result<Droplet<T>, DropletError> {
        if raw.len() != frame.len() {
            return Err(DropletError::RadiiLength {
                got: raw.len(),
                want: frame.len(),
            });
        }
        let verts = vertex_candidates(&frame, &raw)?;
        let radii = frame
            .dirs()
            .iter()
            .map(|&u| {
                verts
                    .iter()
                    .map(|p| p.dot_dir(u))
                    .reduce(|a, b| if b > a { b } else { a })
                    .expect("non-empty vertex set")
            })
            .collect();
        Ok(Droplet { frame, radii })
    }

    /// The covering droplet of a finite lattice set: radii are the support
    /// values of the points.
    pub fn covering(frame: DirectionFrame, sites: &[LatticeVector]) -> Result<Droplet<T>, DropletError> {
        let raw = frame
            .dirs()
            .iter()
            .map(|&u| {
                sites
                    .iter()
                    .map(|&s| T::from_int(u.line_value(s)))
                    .reduce(|a, b| if b > a { b } else { a })
                    .unwrap_or_else(T::zero)
            })
            .collect();
        Droplet::new(frame, raw)
    }

    pub fn frame(&self) -> &DirectionFrame {
        &self.frame
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    /// Polygon vertices in counterclockwise order.
    pub fn vertices(&self) -> Vec<Point<T>> {
        let mut verts = vertex_candidates(&self.frame, &self.radii).expect("normalized droplet");
        let nf = T::from_int(verts.len() as i64);
        let cx = verts
            .iter()
            .fold(T::zero(), |s, p| s + p.x.clone()) / nf.clone();
        let cy = verts.iter().fold(T::zero(), |s, p| s + p.y.clone()) / nf;
        let half = |x: &T, y: &T| u8::from(!(*y > T::zero() || (y.is_zero() && *x > T::zero())));
        verts.sort_by(|p, q| {
            let (px, py) = (p.x.clone() - cx.clone(), p.y.clone() - cy.clone());
            let (qx, qy) = (q.x.clone() - cx.clone(), q.y.clone() - cy.clone());
            half(&px, &py).cmp(&half(&qx, &qy)).then_with(|| {
                let cross = qx * py.clone() - qy * px.clone();
                if cross > T::zero() {
                    Ordering::Greater
                } else if cross < T::zero() {
                    Ordering::Less
                } else {
                    Ordering::Equal
                }
            })
        });
        verts
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        self.frame
            .dirs()
            .iter()
            .zip(&self.radii)
            .all(|(&u, a)| p.dot_dir(u) <= a.clone() + tol_for(a))
    }

    /// Radii comparison; sound and complete for normalized same-frame droplets.
    pub fn contains(&self, other: &Droplet<T>) -> Result<bool, DropletError> {
        if self.frame != other.frame {
            return Err(DropletError::FrameMismatch);
        }
        Ok(other
            .radii
            .iter()
            .zip(&self.radii)
            .all(|(b, a)| *b <= a.clone() + tol_for(a)))
    }

    /// Edge dimensions m_u and perimeter Φ.
    pub fn metrics(&self) -> DropletMetrics<T> {
        let verts = vertex_candidates(&self.frame, &self.radii).expect("normalized droplet");
        let dimension: Vec<T> = self
            .frame
            .dirs()
            .iter()
            .zip(&self.radii)
            .map(|(&u, a)| {
                // extent of the tight face, in lattice steps along u^⊥
                let mut lo: Option<T> = None;
                let mut hi: Option<T> = None;
                let nsq = T::from_int(u.vector().norm_sq());
                for p in &verts {
                    if a.clone() - p.dot_dir(u) <= tol_for(a) {
                        let t = p.dot_vec(u.perp()) / nsq.clone();
                        if lo.as_ref().map_or(true, |l| t < *l) {
                            lo = Some(t.clone());
                        }
                        if hi.as_ref().map_or(true, |h| t > *h) {
                            hi = Some(t);
                        }
                    }
                }
                match (lo, hi) {
                    (Some(l), Some(h)) => h - l,
                    _ => T::zero(),
                }
            })
            .collect();
        let perimeter = dimension.iter().fold(T::zero(), |s, m| s + m.clone());
        DropletMetrics {
            dimension,
            perimeter,
        }
    }

    /// Radii add: D[a] + D[b] = D[a + b].
    pub fn minkowski_sum(&self, other: &Droplet<T>) -> Result<Droplet<T>, DropletError> {
        if self.frame != other.frame {
            return Err(DropletError::FrameMismatch);
        }
        let radii = self
            .radii
            .iter()
            .zip(&other.radii)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        // support functions add under Minkowski sum, so the result is
        // already normalized
        Ok(Droplet {
            frame: self.frame.clone(),
            radii,
        })
    }

    /// Smallest droplet containing all arguments: componentwise max, then
    /// normalize.
    pub fn span(droplets: &[&Droplet<T>]) -> Result<Droplet<T>, DropletError> {
        let first = droplets.first().ok_or(DropletError::EmptyFrame)?;
        let mut raw = first.radii.clone();
        for d in &droplets[1..] {
            if d.frame != first.frame {
                return Err(DropletError::FrameMismatch);
            }
            for (r, b) in raw.iter_mut().zip(&d.radii) {
                if *b > *r {
                    *r = b.clone();
                }
            }
        }
        Droplet::new(first.frame.clone(), raw)
    }

    /// Location s = b − a and total location Ψ of self ⊆ outer.
    pub fn location(&self, outer: &Droplet<T>) -> Result<(Vec<T>, T), DropletError> {
        if self.frame != outer.frame {
            return Err(DropletError::FrameMismatch);
        }
        let mut s = Vec::with_capacity(self.radii.len());
        for ((a, b), &u) in self.radii.iter().zip(&outer.radii).zip(self.frame.dirs()) {
            let d = b.clone() - a.clone();
            if d < -tol_for(b) {
                return Err(DropletError::NotContained(u));
            }
            s.push(if d < T::zero() { T::zero() } else { d });
        }
        let psi = s.iter().fold(T::zero(), |acc, x| acc + x.clone());
        Ok((s, psi))
    }

    /// The symmetric droplet with dimension (k, …, k): vertex walk
    /// x₁ = 0, x_{i+1} = x_i − k·u_i^⊥, centered at the origin.
    pub fn symmetric(frame: &DirectionFrame, k: T) -> Result<Droplet<T>, DropletError> {
        if !frame.is_symmetric() {
            return Err(DropletError::AsymmetricFrame);
        }
        if k < T::zero() {
            return Err(DropletError::EmptyIntersection);
        }
        let mut verts: Vec<Point<T>> = Vec::with_capacity(frame.len());
        let mut x = Point {
            x: T::zero(),
            y: T::zero(),
        };
        for &u in frame.dirs() {
            verts.push(x.clone());
            let p = u.perp();
            x = Point {
                x: x.x - k.clone() * T::from_int(p.x),
                y: x.y - k.clone() * T::from_int(p.y),
            };
        }
        debug_assert!(x.x.is_zero() && x.y.is_zero(), "symmetric walk closes");
        let nf = T::from_int(verts.len() as i64);
        let cx = verts.iter().fold(T::zero(), |s, p| s + p.x.clone()) / nf.clone();
        let cy = verts.iter().fold(T::zero(), |s, p| s + p.y.clone()) / nf;
        let radii = frame
            .dirs()
            .iter()
            .map(|&u| {
                verts
                    .iter()
                    .map(|p| {
                        Point {
                            x: p.x.clone() - cx.clone(),
                            y: p.y.clone() - cy.clone(),
                        }
                        .dot_dir(u)
                    })
                    .reduce(|a, b| if b > a { b } else { a })
                    .expect("non-empty walk")
            })
            .collect();
        Ok(Droplet {
            frame: frame.clone(),
            radii,
        })
    }
}

// --- spanning diagnostics ---------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SpannedComponent<T> {
    pub sites: Vec<LatticeVector>,
    pub covering: Droplet<T>,
}

/// Closure of A, split into K_conn-connected components, each with its
/// smallest covering frame-droplet. A droplet is spanned iff some component's
/// covering droplet contains it.
pub fn spanned_diagnostics<T: Scalar>(
    f: &UpdateFamily,
    a: &[LatticeVector],
    frame: &DirectionFrame,
    k_conn: f64,
) -> Result<Vec<SpannedComponent<T>>, DropletError> {
    if a.is_empty() {
        return Ok(vec![]);
    }
    // closure window: inflate the bounding box until the closure stops
    // touching the margin ring (capped)
    let d = f.diameter().max(1);
    let (mut x0, mut x1) = (i64::MAX, i64::MIN);
    let (mut y0, mut y1) = (i64::MAX, i64::MIN);
    for s in a {
        x0 = x0.min(s.x);
        x1 = x1.max(s.x);
        y0 = y0.min(s.y);
        y1 = y1.max(s.y);
    }
    let mut margin = 2 * d;
    let sites = loop {
        let w = Window::boxed(x0 - margin, x1 + margin, y0 - margin, y1 + margin);
        let cl = closure(f, &Configuration::from_sites(w, a));
        let sites = cl.infected_sites();
        let touches = sites.iter().any(|s| {
            s.x - (x0 - margin) < d
                || (x1 + margin) - s.x < d
                || s.y - (y0 - margin) < d
                || (y1 + margin) - s.y < d
        });
        if !touches || margin > 2 * d + 256 {
            break sites;
        }
        margin *= 2;
    };

    // union components under L2 distance ≤ k_conn
    let k2 = k_conn * k_conn;
    let n = sites.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if ((sites[i] - sites[j]).norm_sq() as f64) <= k2 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<LatticeVector>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(sites[i]);
    }
    groups
        .into_values()
        .map(|sites| {
            let covering = Droplet::covering(frame.clone(), &sites)?;
            Ok(SpannedComponent { sites, covering })
        })
        .collect()
}

pub fn is_spanned<T: Scalar>(components: &[SpannedComponent<T>], d: &Droplet<T>) -> bool {
    components
        .iter()
        .any(|c| c.covering.contains(d).unwrap_or(false))
}
