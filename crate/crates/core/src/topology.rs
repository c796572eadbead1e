//! Semantic topology rules for autoencoders.
//!
//! Given `n` known classes and an input width `io`, three rules bound the
//! design space:
//!
//! 1. the middle layer has between `log2 n` and `n` neurons;
//! 2. the network has between `2·⌈log2 n⌉ + 1` and `2·⌈log2 n⌉ + 3` layers,
//!    input and output included;
//! 3. hidden widths shrink exponentially towards the middle. With
//!    `T(m) = m(m+1)/2`, `E = ⌈log2 io⌉` and `d = ⌊l/2⌋ − |k|` the distance of
//!    layer `k` from the outer layers, the width lies in
//!    `[2^(E − T(d)), 2^(E − T(d−1))]`.
//!
//! The third rule is a reconstruction that reproduces the known-good
//! 784-512-128-7-128-512-784 network; it is not the only possible reading.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{NetworkSpec, NnError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("need at least two known classes, got {0}")]
    TooFewClasses(usize),
    #[error("malformed topology: {0}")]
    Malformed(String),
    #[error("ordinal {k} outside a {l}-layer network")]
    OrdinalOutOfRange { k: isize, l: usize },
    #[error("the middle layer is bounded by the latent rule, not by ordinal width bounds")]
    MiddleOrdinal,
}

/// How the lower latent bound rounds `log2 n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentRounding {
    #[default]
    Ceil,
    Floor,
}

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

fn check_classes(n: usize) -> Result<(), TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewClasses(n));
    }
    Ok(())
}

/// Bounds on the middle-layer width.
pub fn latent_bounds(n: usize, rounding: LatentRounding) -> Result<(usize, usize), TopologyError> {
    check_classes(n)?;
    let lo = match rounding {
        LatentRounding::Ceil => ceil_log2(n),
        LatentRounding::Floor => floor_log2(n),
    };
    Ok((lo, n))
}

/// Bounds on the total layer count. Only odd counts in range are admissible.
pub fn layer_count_bounds(n: usize) -> Result<(usize, usize), TopologyError> {
    check_classes(n)?;
    let c = ceil_log2(n);
    Ok((2 * c + 1, 2 * c + 3))
}

fn triangular(m: usize) -> usize {
    m * (m + 1) / 2
}

/// `2^e`, with negative exponents rounded up to a width of one neuron.
fn pow2(e: isize) -> usize {
    if e <= 0 {
        1
    } else {
        1usize << e
    }
}

/// Width bounds for the layer at ordinal `k` of an `l`-layer autoencoder.
/// The outer layers (`k = ±⌊l/2⌋`) are exactly `io`.
pub fn width_bounds(k: isize, l: usize, io: usize) -> Result<(usize, usize), TopologyError> {
    if l.is_multiple_of(2) || l < 3 {
        return Err(TopologyError::Malformed(format!(
            "layer count {l} is not odd and at least 3"
        )));
    }
    let half = l / 2;
    let dist = k.unsigned_abs();
    if dist > half {
        return Err(TopologyError::OrdinalOutOfRange { k, l });
    }
    if dist == 0 {
        return Err(TopologyError::MiddleOrdinal);
    }
    if dist == half {
        return Ok((io, io));
    }
    let e = ceil_log2(io) as isize;
    let d = half - dist;
    Ok((pow2(e - triangular(d) as isize), pow2(e - triangular(d - 1) as isize)))
}

/// All rule bounds for a given class count and input width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBounds {
    pub n: usize,
    pub io: usize,
    pub f_lo: usize,
    pub f_hi: usize,
    pub l_lo: usize,
    pub l_hi: usize,
}

impl RuleBounds {
    pub fn new(n: usize, io: usize, rounding: LatentRounding) -> Result<Self, TopologyError> {
        if io == 0 {
            return Err(TopologyError::Malformed("input width 0".into()));
        }
        let (f_lo, f_hi) = latent_bounds(n, rounding)?;
        let (l_lo, l_hi) = layer_count_bounds(n)?;
        Ok(Self {
            n,
            io,
            f_lo,
            f_hi,
            l_lo,
            l_hi,
        })
    }

    /// Admissible layer counts, ascending.
    pub fn layer_counts(&self) -> impl Iterator<Item = usize> {
        (self.l_lo..=self.l_hi).filter(|l| l % 2 == 1)
    }

    /// Width bounds for ordinal `k`, including the middle layer.
    pub fn h(&self, k: isize, l: usize) -> Result<(usize, usize), TopologyError> {
        match width_bounds(k, l, self.io) {
            Err(TopologyError::MiddleOrdinal) => Ok((self.f_lo, self.f_hi)),
            other => other,
        }
    }
}

/// A symmetric autoencoder shape, written as dash-separated widths.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopologySpec {
    widths: Vec<usize>,
}

impl TopologySpec {
    /// Checks the structural invariants: at least three layers, an odd
    /// count, no zero widths and a palindromic shape.
    pub fn new(widths: Vec<usize>) -> Result<Self, TopologyError> {
        if widths.len() < 3 || widths.len().is_multiple_of(2) {
            return Err(TopologyError::Malformed(format!(
                "{} layers; need an odd count of at least 3",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(TopologyError::Malformed("zero-width layer".into()));
        }
        if widths.iter().ne(widths.iter().rev()) {
            return Err(TopologyError::Malformed("widths are not symmetric".into()));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn io(&self) -> usize {
        self.widths[0]
    }

    /// Middle-layer width.
    pub fn f(&self) -> usize {
        self.widths[self.widths.len() / 2]
    }

    /// Layer count, input and output included.
    pub fn l(&self) -> usize {
        self.widths.len()
    }

    /// `(k, width)` for every layer, from the input (`k = -⌊l/2⌋`) onwards.
    pub fn ordinals(&self) -> impl Iterator<Item = (isize, usize)> + '_ {
        let half = (self.l() / 2) as isize;
        self.widths
            .iter()
            .enumerate()
            .map(move |(i, &w)| (i as isize - half, w))
    }

    /// Dense sigmoid autoencoder with these widths.
    pub fn network_spec(&self) -> Result<NetworkSpec, NnError> {
        NetworkSpec::autoencoder(&self.widths)
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for TopologySpec {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let widths = s
            .trim()
            .split('-')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| TopologyError::Malformed(format!("bad width {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(widths)
    }
}

impl Serialize for TopologySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TopologySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub k: isize,
    pub width: usize,
    pub lo: usize,
    pub hi: usize,
    pub pass: bool,
}

/// Outcome of checking a topology against all three rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub topology: TopologySpec,
    pub bounds: RuleBounds,
    pub rule1: bool,
    pub rule2: bool,
    pub rule3: Vec<LayerCheck>,
}

impl TopologyReport {
    pub fn rule3_pass(&self) -> bool {
        self.rule3.iter().all(|c| c.pass)
    }

    pub fn passes(&self) -> bool {
        self.rule1 && self.rule2 && self.rule3_pass()
    }

    /// One human-readable line per violated rule or layer.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let b = &self.bounds;
        if !self.rule1 {
            out.push(format!(
                "rule 1: middle width {} outside [{}, {}]",
                self.topology.f(),
                b.f_lo,
                b.f_hi
            ));
        }
        if !self.rule2 {
            out.push(format!(
                "rule 2: {} layers outside odd range [{}, {}]",
                self.topology.l(),
                b.l_lo,
                b.l_hi
            ));
        }
        for c in self.rule3.iter().filter(|c| !c.pass) {
            out.push(format!(
                "rule 3: layer k={} width {} outside [{}, {}]",
                c.k, c.width, c.lo, c.hi
            ));
        }
        out
    }
}

/// Checks `t` against the rules for `n` classes and input width `io`.
pub fn validate_topology(
    t: &TopologySpec,
    n: usize,
    io: usize,
    rounding: LatentRounding,
) -> Result<TopologyReport, TopologyError> {
    let bounds = RuleBounds::new(n, io, rounding)?;
    let l = t.l();
    let rule1 = (bounds.f_lo..=bounds.f_hi).contains(&t.f());
    let rule2 = (bounds.l_lo..=bounds.l_hi).contains(&l) && l % 2 == 1;
    let rule3 = t
        .ordinals()
        .map(|(k, width)| {
            let (lo, hi) = bounds.h(k, l)?;
            Ok(LayerCheck {
                k,
                width,
                lo,
                hi,
                pass: (lo..=hi).contains(&width),
            })
        })
        .collect::<Result<_, TopologyError>>()?;
    Ok(TopologyReport {
        topology: t.clone(),
        bounds,
        rule1,
        rule2,
        rule3,
    })
}

fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    (0..usize::BITS)
        .map(|e| 1usize << e)
        .take_while(|&p| p <= hi)
        .filter(|&p| p >= lo)
        .collect()
}

/// Every rule-conforming topology whose hidden (non-middle) widths are powers
/// of two, sorted by layer count and then by widths.
pub fn enumerate_topologies(n: usize, io: usize, rounding: LatentRounding) -> Result<Vec<TopologySpec>, TopologyError> {
    let bounds = RuleBounds::new(n, io, rounding)?;
    let mut out = Vec::new();
    for l in bounds.layer_counts() {
        let half = l / 2;
        // encoder widths from the input inwards, excluding the middle
        let mut prefixes: Vec<Vec<usize>> = vec![vec![io]];
        for dist in (1..half).rev() {
            let (lo, hi) = bounds.h(dist as isize, l)?;
            let choices = powers_of_two(lo, hi);
            prefixes = prefixes
                .iter()
                .flat_map(|p| {
                    choices.iter().map(move |&w| {
                        let mut v = p.clone();
                        v.push(w);
                        v
                    })
                })
                .collect();
        }
        let mut level: Vec<TopologySpec> = prefixes
            .iter()
            .flat_map(|p| {
                (bounds.f_lo..=bounds.f_hi).map(move |f| {
                    let mut widths = p.clone();
                    widths.push(f);
                    widths.extend(p.iter().rev());
                    TopologySpec { widths }
                })
            })
            .collect();
        level.sort();
        out.extend(level);
    }
    Ok(out)
}
