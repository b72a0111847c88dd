use super::{Loop, PathKind, PathString, Visit};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::model::{DistanceTable, HoppingKernel, OperatorInstance};

/// Exhaustive generator of paths on Γ up to a length cap.
///
/// Eigenvalue loops of every length are built bottom-up, since an ascent is
/// itself an eigenvalue loop in relative coordinates; longer paths reuse the
/// shorter tables for their ascent sequences.
pub struct PathEnumerator {
    dim: usize,
    moves: Vec<(u32, Site)>,
    dist: DistanceTable,
    max_len: u32,
    /// `eig[L]`: eigenvalue loops (with ascents) of length `L`.
    eig: Vec<Vec<Loop>>,
    /// `seqs[a]`: ordered ascent sequences of total length `a`.
    seqs: Vec<Vec<Vec<Loop>>>,
}

impl PathEnumerator {
    pub fn new(kernel: &HoppingKernel, max_len: u32) -> Self {
        let mut moves = kernel.moves();
        moves.sort();
        let reach = kernel.effective_range().max(1);
        let dist = kernel.distance_table(max_len as i32 * reach * 2 + 1);
        let mut e = PathEnumerator {
            dim: kernel.dim(),
            moves,
            dist,
            max_len,
            eig: vec![vec![]],
            seqs: vec![vec![vec![]]],
        };
        for len in 1..=max_len {
            let mut out = vec![];
            e.walk(&mut vec![], Site::zero(e.dim), len, None, &mut out);
            e.eig.push(out);
            let mut seq = vec![];
            for first in 1..=len as usize {
                for lp in &e.eig[first] {
                    for rest in &e.seqs[len as usize - first] {
                        let mut s = Vec::with_capacity(rest.len() + 1);
                        s.push(lp.clone());
                        s.extend(rest.iter().cloned());
                        seq.push(s);
                    }
                }
            }
            e.seqs.push(seq);
        }
        e
    }

    pub fn max_len(&self) -> u32 {
        self.max_len
    }

    /// Distance lower bound from `from` to `to` in the hopping graph.
    fn lower_bound(&self, from: &Site, to: &Site) -> Option<u32> {
        self.dist.get(&(*to - *from))
    }

    fn walk(
        &self,
        visits: &mut Vec<Visit>,
        cur: Site,
        budget: u32,
        endpoint: Option<Site>,
        out: &mut Vec<Loop>,
    ) {
        match endpoint {
            Some(k) => {
                if budget == 0 && !visits.is_empty() && cur == k {
                    out.push(Loop {
                        visits: visits.clone(),
                        closing_order: 0,
                        marks: vec![],
                    });
                }
            }
            None => {
                for &(j, d) in &self.moves {
                    if j == budget && (cur + d).is_zero() {
                        out.push(Loop {
                            visits: visits.clone(),
                            closing_order: j,
                            marks: vec![],
                        });
                    }
                }
            }
        }
        let target = endpoint.unwrap_or(Site::zero(self.dim));
        for &(j, d) in &self.moves {
            let next = cur + d;
            if next.is_zero() || j > budget {
                continue;
            }
            let rem = budget - j;
            let lb = match self.lower_bound(&next, &target) {
                Some(lb) => lb,
                None => continue,
            };
            if lb > rem {
                continue;
            }
            visits.push(Visit {
                site: next,
                order_in: j,
                attachments: vec![],
            });
            for a in 0..=(rem - lb) {
                for seq in &self.seqs[a as usize] {
                    visits.last_mut().unwrap().attachments = seq.clone();
                    self.walk(visits, next, rem - a, endpoint, out);
                }
            }
            visits.pop();
        }
    }

    /// Eigenvalue paths of length exactly `s`, sorted by printed string.
    pub fn eigenvalue(&self, s: u32) -> Result<Vec<PathString>> {
        if s > self.max_len {
            return Err(Error::Invalid(format!("length {s} exceeds the enumerator cap")));
        }
        Ok(sorted(
            self.eig[s as usize]
                .iter()
                .map(|lp| PathString::eigenvalue(lp.clone(), self.dim))
                .collect(),
        ))
    }

    /// Eigenvector paths of length exactly `s` ending at `k`, sorted.
    pub fn eigenvector(&self, s: u32, k: Site) -> Result<Vec<PathString>> {
        if s > self.max_len {
            return Err(Error::Invalid(format!("length {s} exceeds the enumerator cap")));
        }
        if k.is_zero() {
            return Err(Error::Invalid("eigenvector endpoint must be nonzero".into()));
        }
        let mut out = vec![];
        self.walk(&mut vec![], Site::zero(self.dim), s, Some(k), &mut out);
        Ok(sorted(
            out.into_iter()
                .map(|root| PathString {
                    kind: PathKind::Eigenvector,
                    root,
                    dim: self.dim,
                })
                .collect(),
        ))
    }
}

fn sorted(mut v: Vec<PathString>) -> Vec<PathString> {
    let mut keyed: Vec<(String, PathString)> = v.drain(..).map(|p| (p.to_string(), p)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// All paths of the given kind and length `s`, lexicographic on the
/// printed string.
pub fn enumerate_paths(
    instance: &OperatorInstance,
    kind: PathKind,
    s: u32,
    endpoint: Option<Site>,
) -> Result<Vec<PathString>> {
    if s == 0 {
        return Err(Error::Invalid("path length must be positive".into()));
    }
    let e = PathEnumerator::new(&instance.hopping, s);
    match (kind, endpoint) {
        (PathKind::Eigenvalue, _) => e.eigenvalue(s),
        (PathKind::Eigenvector, Some(k)) => e.eigenvector(s, k),
        (PathKind::Eigenvector, None) => Err(Error::Invalid("eigenvector paths need an endpoint".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{cont, PathWeightContext};
    use crate::series::compute_series_recursive;
    use std::collections::HashSet;

    #[test]
    fn shortest_eigenvalue_paths() {
        let e = PathEnumerator::new(&HoppingKernel::laplacian(1), 4);
        let two: Vec<String> = e.eigenvalue(2).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(two, vec!["(-1)", "(1)"]);
        assert!(e.eigenvalue(3).unwrap().is_empty());
        let four: Vec<String> = e.eigenvalue(4).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(
            four,
            vec!["(-1(-1)-1)", "(-1(1)-1)", "(-1-2-1)", "(1(-1)1)", "(1(1)1)", "(121)"]
        );
    }

    #[test]
    fn printed_paths_are_unique_and_reparse() {
        let e = PathEnumerator::new(&HoppingKernel::laplacian(1), 8);
        let all = e.eigenvalue(8).unwrap();
        let set: HashSet<String> = all.iter().map(|p| p.to_string()).collect();
        assert_eq!(set.len(), all.len());
        for p in &all {
            assert_eq!(&PathString::parse(&p.to_string()).unwrap(), p);
            assert_eq!(p.length(), 8);
        }
    }

    #[test]
    fn eigenvector_sum_rule() {
        let inst = OperatorInstance::maryland_golden(0.1, 0.0).unwrap();
        let r = compute_series_recursive(&inst, 6).unwrap();
        let e = PathEnumerator::new(&inst.hopping, 6);
        let ctx = PathWeightContext::new(&inst);
        for s in 1..=6u32 {
            for k in -(s as i32)..=(s as i32) {
                if k == 0 {
                    continue;
                }
                let sum: crate::C64 = e
                    .eigenvector(s, Site::d1(k))
                    .unwrap()
                    .iter()
                    .map(|p| cont(p, &ctx).unwrap())
                    .sum();
                let want = r.psis[s as usize].get(&Site::d1(k)).copied().unwrap_or_default();
                assert!(
                    (sum - want).norm() <= 1e-12 * want.norm().max(1e-300),
                    "s={s} k={k}: {sum} vs {want}"
                );
            }
        }
    }
}
