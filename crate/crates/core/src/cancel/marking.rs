use super::denominators::{DenominatorData, INFINITE_LEVEL};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::paths::{Loop, Mark, PathString, Visit};

/// A path carrying its canonical marks.
pub type MarkedPath = PathString;

/// Level-ascending marking of every loop. Each loop is marked on its own
/// sheet; ascents do not count towards segment lengths.
pub fn canonical_marking(path: &PathString, data: &DenominatorData) -> MarkedPath {
    let mut out = path.clone();
    mark_loop(&mut out.root, data);
    out
}

fn mark_loop(lp: &mut Loop, data: &DenominatorData) {
    lp.marks.clear();
    for v in &mut lp.visits {
        for a in &mut v.attachments {
            mark_loop(a, data);
        }
    }
    let levels: Vec<u32> = lp.visits.iter().map(|v| data.level_of(&v.site)).collect();
    let mut stages: Vec<u32> = levels
        .iter()
        .copied()
        .filter(|&l| l >= 1 && l != INFINITE_LEVEL && data.safedist(l) > 0)
        .collect();
    stages.sort_unstable();
    stages.dedup();

    let k = lp.visits.len();
    let mut hidden = vec![false; k];
    for level in stages {
        let sd = data.safedist(level);
        let visible: Vec<usize> = (0..k).filter(|&i| !hidden[i]).collect();
        let mut cands: Vec<(usize, usize)> = vec![];
        for (a, &i) in visible.iter().enumerate() {
            if levels[i] != level {
                continue;
            }
            let site = lp.visits[i].site;
            let mut len = 0u32;
            for &j in &visible[a + 1..] {
                len += lp.visits[j].order_in;
                if lp.visits[j].site == site {
                    if len < sd && j > i + 1 {
                        cands.push((i, j));
                    }
                    break;
                }
            }
        }
        cands.sort_unstable();
        let mut accepted: Vec<(usize, usize)> = vec![];
        for (i, j) in cands {
            let crosses = accepted
                .iter()
                .any(|&(p, q)| (p < i && i < q && q < j) || (i < p && p < j && j < q));
            if !crosses {
                accepted.push((i, j));
            }
        }
        for &(i, j) in &accepted {
            lp.marks.push(Mark { start: i + 1, end: j - 1 });
            for h in &mut hidden[i + 1..=j] {
                *h = true;
            }
        }
    }
    lp.marks.sort();
}

/// Canonical marking followed by turning every marked segment into an ascent
/// translated by minus its anchor.
pub fn canonical_translation(path: &PathString, data: &DenominatorData) -> Result<PathString> {
    let marked = canonical_marking(path, data);
    let mut out = marked.clone();
    out.root = translate_loop(&marked.root, data)?;
    Ok(out)
}

fn contains(outer: &Mark, inner: &Mark) -> bool {
    outer != inner && outer.start <= inner.start && inner.end <= outer.end
}

pub(crate) fn translate_loop(lp: &Loop, data: &DenominatorData) -> Result<Loop> {
    let mut visits: Vec<Visit> = lp
        .visits
        .iter()
        .map(|v| {
            Ok(Visit {
                site: v.site,
                order_in: v.order_in,
                attachments: v
                    .attachments
                    .iter()
                    .map(|a| translate_loop(a, data))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    let mut outer: Vec<Mark> = lp
        .marks
        .iter()
        .filter(|m| !lp.marks.iter().any(|o| contains(o, m)))
        .copied()
        .collect();
    outer.sort();
    outer.dedup();
    for mark in outer.iter().rev() {
        let open = mark.start - 1;
        let close = mark.end + 1;
        if close >= visits.len() || visits[close].site != visits[open].site {
            return Err(Error::Invalid("marked segment does not return to its anchor".into()));
        }
        let anchor = visits[open].site;
        let inner: Vec<Mark> = lp
            .marks
            .iter()
            .filter(|m| contains(mark, m))
            .map(|m| Mark {
                start: m.start - mark.start,
                end: m.end - mark.start,
            })
            .collect();
        let closing = visits.remove(close);
        let interior: Vec<Visit> = visits.drain(mark.start..=mark.end).collect();
        let mut child_visits = Vec::with_capacity(interior.len());
        for v in interior {
            let site = v.site - anchor;
            if site.is_zero() || data.level_of(&site) != data.level_of(&v.site) {
                return Err(Error::LevelShift(v.site));
            }
            child_visits.push(Visit { site, ..v });
        }
        let child = translate_loop(
            &Loop {
                visits: child_visits,
                closing_order: closing.order_in,
                marks: inner,
            },
            data,
        )?;
        let v = &mut visits[open];
        v.attachments.push(child);
        v.attachments.extend(closing.attachments);
    }
    Ok(Loop {
        visits,
        closing_order: lp.closing_order,
        marks: vec![],
    })
}

/// Whether an ascent attached at a visit of `anchor` is short.
pub fn is_short(lp: &Loop, anchor: &Site, data: &DenominatorData) -> bool {
    lp.own_length() < data.safedist_at(anchor)
}

/// Number of short loops on a translated path.
pub fn short_loop_count(lp: &Loop, data: &DenominatorData) -> usize {
    lp.visits
        .iter()
        .flat_map(|v| v.attachments.iter().map(move |a| (v.site, a)))
        .map(|(site, a)| usize::from(is_short(a, &site, data)) + short_loop_count(a, data))
        .sum()
}

/// Members of the translational class of `path`: every short loop of the
/// canonical translation is independently kept as an ascent or written
/// back as a marked segment shifted by its anchor. Sorted by printed string.
pub fn equivalence_class(path: &PathString, data: &DenominatorData) -> Result<Vec<PathString>> {
    let t = canonical_translation(path, data)?;
    let roots = loop_variants(&t.root, data)?;
    let mut out: Vec<(String, PathString)> = roots
        .into_iter()
        .map(|root| {
            let p = PathString {
                kind: t.kind,
                root,
                dim: t.dim,
            };
            (p.to_string(), p)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out.into_iter().map(|x| x.1).collect())
}

/// One choice per attachment: the variant of the attached loop and whether
/// it is written back onto the sheet below.
type Choice = (Loop, bool);

fn loop_variants(lp: &Loop, data: &DenominatorData) -> Result<Vec<Loop>> {
    // Per attachment (in visit order), the list of admissible choices.
    let mut slots: Vec<(usize, Vec<Choice>)> = vec![];
    for (i, v) in lp.visits.iter().enumerate() {
        for a in &v.attachments {
            let vars = loop_variants(a, data)?;
            let short = is_short(a, &v.site, data);
            let mut choices: Vec<Choice> = vars.iter().cloned().map(|x| (x, false)).collect();
            if short {
                choices.extend(vars.into_iter().map(|x| (x, true)));
            }
            slots.push((i, choices));
        }
    }
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for (_, choices) in &slots {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..choices.len()).map(move |k| {
                    let mut c = c.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|combo| {
            let mut per_visit: Vec<Vec<&Choice>> = vec![vec![]; lp.visits.len()];
            for ((i, choices), k) in slots.iter().zip(combo) {
                per_visit[*i].push(&choices[k]);
            }
            assemble(lp, &per_visit)
        })
        .collect()
}

fn assemble(lp: &Loop, per_visit: &[Vec<&Choice>]) -> Result<Loop> {
    let mut visits: Vec<Visit> = vec![];
    let mut marks: Vec<Mark> = vec![];
    for (v, choices) in lp.visits.iter().zip(per_visit) {
        visits.push(Visit {
            site: v.site,
            order_in: v.order_in,
            attachments: vec![],
        });
        for (a, down) in choices {
            if !down {
                visits.last_mut().unwrap().attachments.push(a.clone());
                continue;
            }
            let base = visits.len();
            for av in &a.visits {
                let site = av.site + v.site;
                if site.is_zero() {
                    return Err(Error::NotCanonical(format!(
                        "writing back a loop at {} reaches the origin",
                        v.site
                    )));
                }
                visits.push(Visit {
                    site,
                    order_in: av.order_in,
                    attachments: av.attachments.clone(),
                });
            }
            marks.extend(a.marks.iter().map(|m| Mark {
                start: m.start + base,
                end: m.end + base,
            }));
            marks.push(Mark {
                start: base,
                end: visits.len() - 1,
            });
            visits.push(Visit {
                site: v.site,
                order_in: a.closing_order,
                attachments: vec![],
            });
        }
    }
    marks.sort();
    Ok(Loop {
        visits,
        closing_order: lp.closing_order,
        marks,
    })
}
