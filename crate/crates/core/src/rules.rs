//! Update families: construction, validation, threshold rules, convex
//! symmetric neighbourhoods, and (de)serialization.

use crate::lattice::{v, LatticeVector, ORIGIN};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Hard cap on the number of rules we are willing to materialize.
pub const MAX_MATERIALIZED_RULES: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule contains the origin")]
    OriginInRule,
    #[error("empty rule")]
    EmptyRule,
    #[error("family has no rules")]
    EmptyFamily,
    #[error("threshold {theta} out of range 1..={max}")]
    InvalidThreshold { theta: usize, max: usize },
    #[error("threshold family would have {count} rules, exceeding the {limit} materialization limit")]
    TooManyRules { count: u128, limit: u128 },
    #[error("neighbourhood is not symmetric about the origin: {0:?} present but not its negation")]
    Asymmetric(LatticeVector),
    #[error("region descriptor is unbounded or degenerate")]
    BadRegion,
    #[error("parse error: {0}")]
    Parse(String),
}

/// A single update rule: a finite non-empty set of nonzero offsets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UpdateRule {
    sites: Vec<LatticeVector>,
}

impl UpdateRule {
    pub fn new(mut sites: Vec<LatticeVector>) -> Result<Self, RuleError> {
        sites.sort();
        sites.dedup();
        if sites.is_empty() {
            return Err(RuleError::EmptyRule);
        }
        if sites.contains(&ORIGIN) {
            return Err(RuleError::OriginInRule);
        }
        Ok(UpdateRule { sites })
    }

    pub fn sites(&self) -> &[LatticeVector] {
        &self.sites
    }

    pub fn negated(&self) -> UpdateRule {
        let mut sites: Vec<_> = self.sites.iter().map(|&s| -s).collect();
        sites.sort();
        UpdateRule { sites }
    }
}

/// Threshold description: a site becomes infected when at least `theta`
/// sites of its translated neighbourhood (origin excluded) are infected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Full neighbourhood K, origin included.
    pub neighbourhood: Vec<LatticeVector>,
    pub theta: usize,
}

impl ThresholdSpec {
    /// K ∖ {0}, canonically ordered.
    pub fn punctured(&self) -> Vec<LatticeVector> {
        let mut s: Vec<_> = self
            .neighbourhood
            .iter()
            .copied()
            .filter(|x| !x.is_origin())
            .collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn rule_count(&self) -> u128 {
        binomial(self.punctured().len() as u128, self.theta as u128)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// An update family. Threshold families above the materialization limit are
/// kept implicit: dynamics and direction analysis only ever need the
/// neighbourhood and the count test, never the θ-subset list itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateFamily {
    pub name: Option<String>,
    rules: Option<Vec<UpdateRule>>,
    threshold: Option<ThresholdSpec>,
}

impl UpdateFamily {
    pub fn from_rules(rules: Vec<UpdateRule>) -> Result<Self, RuleError> {
        if rules.is_empty() {
            return Err(RuleError::EmptyFamily);
        }
        let mut rules = rules;
        rules.sort();
        rules.dedup();
        Ok(UpdateFamily {
            name: None,
            rules: Some(rules),
            threshold: None,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Explicit rule list, when materialized.
    pub fn rules(&self) -> Option<&[UpdateRule]> {
        self.rules.as_deref()
    }

    pub fn threshold(&self) -> Option<&ThresholdSpec> {
        self.threshold.as_ref()
    }

    pub fn rule_count(&self) -> u128 {
        match (&self.rules, &self.threshold) {
            (Some(r), _) => r.len() as u128,
            (None, Some(t)) => t.rule_count(),
            (None, None) => 0,
        }
    }

    /// Union of all rule sites (K ∖ {0} for threshold families).
    pub fn rule_sites(&self) -> Vec<LatticeVector> {
        if let Some(t) = &self.threshold {
            return t.punctured();
        }
        let set: BTreeSet<LatticeVector> = self
            .rules
            .iter()
            .flatten()
            .flat_map(|r| r.sites.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Largest L∞ norm among rule sites.
    pub fn diameter(&self) -> i64 {
        self.rule_sites().iter().map(|s| s.linf()).max().unwrap_or(0)
    }

    /// Would a site with the given infected offsets become infected?
    pub fn activates(&self, infected: &dyn Fn(LatticeVector) -> bool) -> bool {
        if let Some(t) = &self.threshold {
            let mut hits = 0;
            for &s in &t.punctured() {
                if infected(s) {
                    hits += 1;
                    if hits >= t.theta {
                        return true;
                    }
                }
            }
            return false;
        }
        self.rules
            .iter()
            .flatten()
            .any(|r| r.sites.iter().all(|&s| infected(s)))
    }

    pub fn is_symmetric(&self) -> bool {
        if let Some(t) = &self.threshold {
            let k = t.punctured();
            let set: BTreeSet<_> = k.iter().copied().collect();
            return k.iter().all(|&s| set.contains(&(-s)));
        }
        let rules = self.rules.as_deref().unwrap_or(&[]);
        let set: BTreeSet<_> = rules.iter().cloned().collect();
        rules.iter().all(|r| set.contains(&r.negated()))
    }

    pub fn negated(&self) -> UpdateFamily {
        UpdateFamily {
            name: self.name.clone(),
            rules: self
                .rules
                .as_ref()
                .map(|rs| {
                    let mut out: Vec<_> = rs.iter().map(UpdateRule::negated).collect();
                    out.sort();
                    out
                }),
            threshold: self.threshold.as_ref().map(|t| {
                let mut nb: Vec<_> = t.neighbourhood.iter().map(|&s| -s).collect();
                nb.sort();
                ThresholdSpec {
                    neighbourhood: nb,
                    theta: t.theta,
                }
            }),
        }
    }
}

/// Descriptor of a bounded convex region symmetric about the origin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Region {
    Disc { radius: f64 },
    /// Rotated ellipse; angle in degrees, counterclockwise.
    Ellipse { a: f64, b: f64, angle_deg: f64 },
    /// Convex polygon given by rational vertices, closed under negation.
    Polygon { vertices: Vec<(Ratio<i64>, Ratio<i64>)> },
}

/// A convex symmetric neighbourhood: lattice points of a region, origin included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbourhood {
    pub sites: Vec<LatticeVector>,
}

const ELLIPSE_TOL: f64 = 1e-12;

pub fn make_convex_neighbourhood(region: &Region) -> Result<Neighbourhood, RuleError> {
    let bound = match region {
        Region::Disc { radius } => {
            if !radius.is_finite() || *radius <= 0.0 {
                return Err(RuleError::BadRegion);
            }
            radius.ceil() as i64
        }
        Region::Ellipse { a, b, .. } => {
            if !a.is_finite() || !b.is_finite() || *a <= 0.0 || *b <= 0.0 {
                return Err(RuleError::BadRegion);
            }
            a.max(*b).ceil() as i64
        }
        Region::Polygon { vertices } => {
            if vertices.len() < 3 {
                return Err(RuleError::BadRegion);
            }
            let neg_closed = vertices.iter().all(|(x, y)| {
                vertices.iter().any(|(x2, y2)| *x2 == -x && *y2 == -y)
            });
            if !neg_closed {
                return Err(RuleError::Asymmetric(ORIGIN));
            }
            vertices
                .iter()
                .map(|(x, y)| {
                    let cx = (x.numer().abs() + x.denom() - 1) / x.denom();
                    let cy = (y.numer().abs() + y.denom() - 1) / y.denom();
                    cx.max(cy)
                })
                .max()
                .unwrap()
        }
    };

    let mut sites = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            if region_contains(region, x, y) {
                sites.push(v(x, y));
            }
        }
    }
    sites.sort();

    // A symmetric descriptor must produce a symmetric point set.
    let set: BTreeSet<_> = sites.iter().copied().collect();
    for &s in &sites {
        if !set.contains(&(-s)) {
            return Err(RuleError::Asymmetric(s));
        }
    }
    if !set.contains(&ORIGIN) {
        return Err(RuleError::BadRegion);
    }
    Ok(Neighbourhood { sites })
}

fn region_contains(region: &Region, x: i64, y: i64) -> bool {
    let (xf, yf) = (x as f64, y as f64);
    match region {
        Region::Disc { radius } => xf * xf + yf * yf <= radius * radius + ELLIPSE_TOL,
        Region::Ellipse { a, b, angle_deg } => {
            let t = angle_deg.to_radians();
            let (c, s) = (t.cos(), t.sin());
            let u = (xf * c + yf * s) / a;
            let w = (-xf * s + yf * c) / b;
            u * u + w * w <= 1.0 + ELLIPSE_TOL
        }
        Region::Polygon { vertices } => {
            // Closed convex region: the point is on the inner side of every edge.
            let p = (Ratio::from_integer(x), Ratio::from_integer(y));
            let n = vertices.len();
            let mut sign = 0i32;
            for i in 0..n {
                let a = &vertices[i];
                let b = &vertices[(i + 1) % n];
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross != Ratio::from_integer(0) {
                    let s = if cross > Ratio::from_integer(0) { 1 } else { -1 };
                    if sign == 0 {
                        sign = s;
                    } else if sign != s {
                        return false;
                    }
                }
            }
            true
        }
    }
}

pub fn make_threshold_family(k: &Neighbourhood, theta: usize) -> Result<UpdateFamily, RuleError> {
    let punctured: Vec<_> = k.sites.iter().copied().filter(|s| !s.is_origin()).collect();
    if theta < 1 || theta > punctured.len() {
        return Err(RuleError::InvalidThreshold {
            theta,
            max: k.sites.len().saturating_sub(1),
        });
    }
    let spec = ThresholdSpec {
        neighbourhood: k.sites.clone(),
        theta,
    };
    let count = spec.rule_count();
    let rules = if count <= MAX_MATERIALIZED_RULES {
        Some(materialize_threshold(&punctured, theta))
    } else {
        // Kept implicit: the count-based activation test is used instead.
        None
    };
    Ok(UpdateFamily {
        name: None,
        rules,
        threshold: Some(spec),
    })
}

fn materialize_threshold(sites: &[LatticeVector], theta: usize) -> Vec<UpdateRule> {
    use itertools::Itertools;
    let mut rules: Vec<UpdateRule> = sites
        .iter()
        .copied()
        .combinations(theta)
        .map(|c| UpdateRule::new(c).expect("threshold subsets exclude the origin"))
        .collect();
    rules.sort();
    rules
}

/// Explicitly list the rules of a threshold family, failing above the limit.
pub fn materialize(f: &UpdateFamily) -> Result<Vec<UpdateRule>, RuleError> {
    if let Some(r) = &f.rules {
        return Ok(r.clone());
    }
    let t = f.threshold.as_ref().ok_or(RuleError::EmptyFamily)?;
    let count = t.rule_count();
    if count > MAX_MATERIALIZED_RULES {
        return Err(RuleError::TooManyRules {
            count,
            limit: MAX_MATERIALIZED_RULES,
        });
    }
    Ok(materialize_threshold(&t.punctured(), t.theta))
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FamilyFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    rules: Vec<Vec<[i64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<ThresholdFile>,
}

#[derive(Serialize, Deserialize)]
struct ThresholdFile {
    neighbourhood: Vec<[i64; 2]>,
    theta: usize,
}

pub fn parse_family(text: &str) -> Result<UpdateFamily, RuleError> {
    let file: FamilyFile = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?
    };
    family_from_file(file)
}

fn family_from_file(file: FamilyFile) -> Result<UpdateFamily, RuleError> {
    if let Some(t) = file.threshold {
        let sites: Vec<_> = t.neighbourhood.iter().map(|&[x, y]| v(x, y)).collect();
        let mut nb = sites.clone();
        if !nb.contains(&ORIGIN) {
            nb.push(ORIGIN);
        }
        nb.sort();
        nb.dedup();
        let k = Neighbourhood { sites: nb };
        let set: BTreeSet<_> = k.sites.iter().copied().collect();
        if let Some(&bad) = k.sites.iter().find(|&&s| !set.contains(&(-s))) {
            return Err(RuleError::Asymmetric(bad));
        }
        let mut fam = make_threshold_family(&k, t.theta)?;
        fam.name = file.name;
        return Ok(fam);
    }
    let rules: Result<Vec<UpdateRule>, RuleError> = file
        .rules
        .iter()
        .map(|r| UpdateRule::new(r.iter().map(|&[x, y]| v(x, y)).collect()))
        .collect();
    let mut fam = UpdateFamily::from_rules(rules?)?;
    fam.name = file.name;
    Ok(fam)
}

pub fn serialize_family(f: &UpdateFamily) -> String {
    let file = FamilyFile {
        name: f.name.clone(),
        rules: match (&f.threshold, &f.rules) {
            // Threshold families serialize via the spec alone; the rule list
            // is reconstructed on parse.
            (Some(_), _) => Vec::new(),
            (None, Some(rs)) => rs
                .iter()
                .map(|r| r.sites.iter().map(|s| [s.x, s.y]).collect())
                .collect(),
            (None, None) => Vec::new(),
        },
        threshold: f.threshold.as_ref().map(|t| ThresholdFile {
            neighbourhood: t.neighbourhood.iter().map(|s| [s.x, s.y]).collect(),
            theta: t.theta,
        }),
    };
    serde_json::to_string_pretty(&file).expect("family serialization cannot fail")
}

// --- stock families ----------------------------------------------------------

/// Classical 2-neighbour bootstrap percolation: K = unit disc, θ = 2.
pub fn two_neighbour() -> UpdateFamily {
    let k = make_convex_neighbourhood(&Region::Disc { radius: 1.0 }).unwrap();
    make_threshold_family(&k, 2).unwrap().named("two-neighbour")
}

/// The modified 2-neighbour model: one site from {±e1} and one from {±e2}.
pub fn modified_two_neighbour() -> UpdateFamily {
    let rules = [
        vec![v(-1, 0), v(0, -1)],
        vec![v(-1, 0), v(0, 1)],
        vec![v(1, 0), v(0, -1)],
        vec![v(1, 0), v(0, 1)],
    ]
    .into_iter()
    .map(|s| UpdateRule::new(s).unwrap())
    .collect();
    UpdateFamily::from_rules(rules)
        .unwrap()
        .named("modified-two-neighbour")
}
