//! Paths on the sheeted graph Γ.
//!
//! A path is a tree of loops. The root holds the base-sheet visits; every
//! visit may carry ascents, each an eigenvalue loop written in coordinates
//! relative to its anchor. Edge weights:
//!
//! * same-sheet jump into `n' ≠ 0`: `Φ^j_{n'n} / (V_0 − V_{n'})`
//! * closing jump into the origin of the base sheet: `Φ^j_{0n}`
//! * ascent from `n` to the first visit `c` above it: `Φ^j_{c0} / (V_0 − V_c)`
//! * descent from the last visit `c` above `n`: `−Φ^j_{0c} / (V_0 − V_n)`
//!
//! so an ascent of loop `L` at `n` contributes `−(V_0 − V_n)^{-1} Cont(L)`.

mod enumerate;
mod grammar;
mod weight;

pub use enumerate::{enumerate_paths, PathEnumerator};
pub use grammar::format_site;
pub use weight::{cont, cont_with, PathWeightContext};

use crate::error::{Error, Result};
use crate::lattice::Site;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Eigenvalue,
    Eigenvector,
}

/// A visit to `site` reached by a jump of order `order_in`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Visit {
    pub site: Site,
    pub order_in: u32,
    /// Eigenvalue loops ascended from this visit, in string order.
    pub attachments: Vec<Loop>,
}

/// Interior visits `start..=end` of a marked segment `m[…]m`; the visits
/// `start − 1` and `end + 1` both sit at `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mark {
    pub start: usize,
    pub end: usize,
}

/// One sheet's worth of a path.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loop {
    pub visits: Vec<Visit>,
    /// Order of the jump back to the sheet origin; 0 for an eigenvector root.
    pub closing_order: u32,
    pub marks: Vec<Mark>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathString {
    pub kind: PathKind,
    pub root: Loop,
    pub dim: usize,
}

impl Loop {
    /// Edges on this sheet only.
    pub fn own_length(&self) -> u32 {
        self.visits.iter().map(|v| v.order_in).sum::<u32>() + self.closing_order
    }

    /// Edges on this sheet and all sheets above it.
    pub fn length(&self) -> u32 {
        self.own_length()
            + self
                .visits
                .iter()
                .flat_map(|v| v.attachments.iter())
                .map(Loop::length)
                .sum::<u32>()
    }

    pub fn loop_count(&self) -> usize {
        1 + self
            .visits
            .iter()
            .flat_map(|v| v.attachments.iter())
            .map(Loop::loop_count)
            .sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.visits
            .iter()
            .flat_map(|v| v.attachments.iter())
            .map(|a| 1 + a.height())
            .max()
            .unwrap_or(0)
    }

    pub fn has_marks(&self) -> bool {
        !self.marks.is_empty()
            || self
                .visits
                .iter()
                .flat_map(|v| v.attachments.iter())
                .any(Loop::has_marks)
    }

    pub fn strip_marks(&mut self) {
        self.marks.clear();
        for v in &mut self.visits {
            for a in &mut v.attachments {
                a.strip_marks();
            }
        }
    }

    /// Same visits with every ascent removed.
    pub fn base(&self) -> Loop {
        Loop {
            visits: self
                .visits
                .iter()
                .map(|v| Visit {
                    site: v.site,
                    order_in: v.order_in,
                    attachments: vec![],
                })
                .collect(),
            closing_order: self.closing_order,
            marks: vec![],
        }
    }

    /// Single-sheet eigenvalue loop through `sites` with unit jumps.
    pub fn simple(sites: &[Site]) -> Loop {
        Loop {
            visits: sites
                .iter()
                .map(|s| Visit {
                    site: *s,
                    order_in: 1,
                    attachments: vec![],
                })
                .collect(),
            closing_order: 1,
            marks: vec![],
        }
    }
}

impl PathString {
    /// Parses an eigenvalue path.
    pub fn parse(text: &str) -> Result<Self> {
        grammar::parse(text, PathKind::Eigenvalue)
    }

    pub fn parse_as(text: &str, kind: PathKind) -> Result<Self> {
        grammar::parse(text, kind)
    }

    pub fn eigenvalue(root: Loop, dim: usize) -> Self {
        PathString {
            kind: PathKind::Eigenvalue,
            root,
            dim,
        }
    }

    /// Total edge-order-weighted length `|P|`.
    pub fn length(&self) -> u32 {
        self.root.length()
    }

    /// Final site of an eigenvector path, origin for eigenvalue paths.
    pub fn endpoint(&self) -> Site {
        match self.kind {
            PathKind::Eigenvalue => Site::zero(self.dim),
            PathKind::Eigenvector => self.root.visits.last().map(|v| v.site).unwrap_or(Site::zero(self.dim)),
        }
    }

    pub fn without_marks(&self) -> Self {
        let mut p = self.clone();
        p.root.strip_marks();
        p
    }

    /// The base loop with the ascents removed.
    pub fn base_loop(&self) -> PathString {
        PathString {
            kind: self.kind,
            root: self.root.base(),
            dim: self.dim,
        }
    }

    /// Ascents on the base sheet as `(visit index, loop)`, in string order.
    pub fn root_attachments(&self) -> Vec<(usize, PathString)> {
        self.root
            .visits
            .iter()
            .enumerate()
            .flat_map(|(i, v)| {
                v.attachments
                    .iter()
                    .map(move |a| (i, PathString::eigenvalue(a.clone(), self.dim)))
            })
            .collect()
    }
}

impl fmt::Display for PathString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        grammar::print_loop(&self.root, self.kind == PathKind::Eigenvalue, &mut s);
        f.write_str(&s)
    }
}

/// Ascends `lp` from the base visit with index `position`; it becomes the
/// last ascent at that visit.
pub fn attach(base: &PathString, lp: &PathString, position: usize) -> Result<PathString> {
    if lp.kind != PathKind::Eigenvalue {
        return Err(Error::Invalid("only eigenvalue loops can be attached".into()));
    }
    if lp.dim != base.dim {
        return Err(Error::Invalid("dimension mismatch".into()));
    }
    let mut out = base.clone();
    let v = out
        .root
        .visits
        .get_mut(position)
        .ok_or(Error::BadPosition(position))?;
    v.attachments.push(lp.root.clone());
    Ok(out)
}
