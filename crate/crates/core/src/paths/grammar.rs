//! Printing and parsing of path strings.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! path   := '(' item* ')' order?
//! item   := coord order? ( '(' item* ')' order? coord )*  |  '[' | ']'
//! coord  := digit | '-' digit | '{' int (',' int)* '}'
//! order  := '^' digit | '^' '{' int '}'
//! ```
//!
//! In `d = 1` single-digit coordinates are written bare (`-1`, `5`); anything
//! else, and every coordinate in `d > 1`, is braced (`{13}`, `{1,-2}`). The
//! coordinate after a nested `(...)` is the return to the anchor and must
//! repeat it. `^j` records a jump of order `j ≠ 1`, braced when `j > 9`
//! (`^{12}`). After a coordinate it is the order of the jump into that
//! visit; after `)` it is the order of the closing jump.

use super::{Loop, Mark, PathKind, PathString, Visit};
use crate::error::{Error, Result};
use crate::lattice::Site;

pub fn format_site(n: &Site) -> String {
    if n.dim() == 1 && n.coords()[0].abs() <= 9 {
        n.coords()[0].to_string()
    } else {
        let parts: Vec<String> = n.coords().iter().map(|v| v.to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }
}

fn format_order(j: u32, out: &mut String) {
    if j == 1 {
        return;
    }
    out.push('^');
    if j <= 9 {
        out.push_str(&j.to_string());
    } else {
        out.push_str(&format!("{{{j}}}"));
    }
}

pub(super) fn print_loop(lp: &Loop, closes: bool, out: &mut String) {
    out.push('(');
    for (i, v) in lp.visits.iter().enumerate() {
        let opening = lp.marks.iter().filter(|m| m.start == i).count();
        for _ in 0..opening {
            out.push('[');
        }
        out.push_str(&format_site(&v.site));
        format_order(v.order_in, out);
        for a in &v.attachments {
            print_loop(a, true, out);
            out.push_str(&format_site(&v.site));
        }
        let closing = lp.marks.iter().filter(|m| m.end == i).count();
        for _ in 0..closing {
            out.push(']');
        }
    }
    out.push(')');
    if closes {
        format_order(lp.closing_order, out);
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    dim: Option<usize>,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.char_indices().filter(|(_, c)| !c.is_whitespace()).collect(),
            pos: 0,
            dim: None,
            _src: src,
        }
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or(usize::MAX)
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        let pos = self
            .chars
            .get(self.pos)
            .map(|c| c.0)
            .unwrap_or_else(|| self.chars.last().map(|c| c.0 + 1).unwrap_or(0));
        Err(Error::MalformedString {
            pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected '{c}'"))
        }
    }

    fn int(&mut self) -> Result<i64> {
        let neg = if self.peek() == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut v: i64 = 0;
        let mut any = false;
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add(c as i64 - '0' as i64))
                .ok_or(Error::MalformedString {
                    pos: self.offset(),
                    msg: "integer overflow".into(),
                })?;
            any = true;
            self.pos += 1;
        }
        if !any {
            return self.err("expected digits");
        }
        Ok(if neg { -v } else { v })
    }

    fn at_coord(&self) -> bool {
        matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '-' || c == '{')
    }

    fn coord(&mut self) -> Result<Site> {
        let start = self.pos;
        let coords: Vec<i32> = match self.peek() {
            Some('{') => {
                self.pos += 1;
                let mut v = vec![];
                loop {
                    let x = self.int()?;
                    v.push(i32::try_from(x).map_err(|_| Error::MalformedString {
                        pos: self.offset(),
                        msg: "coordinate out of range".into(),
                    })?);
                    match self.bump() {
                        Some(',') => continue,
                        Some('}') => break,
                        _ => {
                            self.pos -= 1;
                            return self.err("expected ',' or '}'");
                        }
                    }
                }
                v
            }
            Some('-') => {
                self.pos += 1;
                match self.bump() {
                    Some(c) if c.is_ascii_digit() => vec![-(c as i32 - '0' as i32)],
                    _ => {
                        self.pos -= 1;
                        return self.err("expected digit after '-'");
                    }
                }
            }
            Some(c) if c.is_ascii_digit() => {
                self.pos += 1;
                vec![c as i32 - '0' as i32]
            }
            _ => return self.err("expected coordinate"),
        };
        if coords.is_empty() || coords.len() > crate::lattice::MAX_DIM {
            self.pos = start;
            return self.err("bad coordinate dimension");
        }
        match self.dim {
            None => self.dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                self.pos = start;
                return self.err("mixed coordinate dimensions");
            }
            _ => {}
        }
        Ok(Site::new(&coords))
    }

    fn order(&mut self) -> Result<u32> {
        if self.peek() == Some('^') {
            self.pos += 1;
            let v = match self.peek() {
                Some('{') => {
                    self.pos += 1;
                    let v = self.int()?;
                    self.expect('}')?;
                    v
                }
                Some(c) if c.is_ascii_digit() => {
                    self.pos += 1;
                    c as i64 - '0' as i64
                }
                _ => return self.err("expected jump order"),
            };
            if v < 1 || v > u32::MAX as i64 {
                return self.err("jump order must be positive");
            }
            Ok(v as u32)
        } else {
            Ok(1)
        }
    }

    /// Parses a loop body after its opening parenthesis, through `)`.
    fn body(&mut self) -> Result<Loop> {
        let mut lp = Loop::default();
        let mut open_marks: Vec<usize> = vec![];
        loop {
            match self.peek() {
                None => return self.err("unbalanced parentheses"),
                Some(')') => {
                    if !open_marks.is_empty() {
                        return self.err("unclosed '['");
                    }
                    self.pos += 1;
                    break;
                }
                Some('[') => {
                    if lp.visits.is_empty() {
                        return self.err("a marked segment needs a preceding visit");
                    }
                    self.pos += 1;
                    open_marks.push(lp.visits.len());
                }
                Some(']') => {
                    let Some(start) = open_marks.pop() else {
                        return self.err("unmatched ']'");
                    };
                    if lp.visits.len() <= start {
                        return self.err("empty marked segment");
                    }
                    let end = lp.visits.len() - 1;
                    self.pos += 1;
                    let close_at = self.pos;
                    let m = self.coord()?;
                    if m != lp.visits[start - 1].site {
                        self.pos = close_at;
                        return self.err("a marked segment must return to its opening coordinate");
                    }
                    self.pos = close_at;
                    lp.marks.push(Mark { start, end });
                }
                Some('(') => {
                    let Some(last) = lp.visits.len().checked_sub(1) else {
                        return self.err("an ascent needs an anchor visit");
                    };
                    self.pos += 1;
                    let mut child = self.body()?;
                    child.closing_order = self.order()?;
                    let at = self.pos;
                    let back = self.coord()?;
                    if back != lp.visits[last].site {
                        self.pos = at;
                        return self.err("an ascent must return to its anchor coordinate");
                    }
                    lp.visits[last].attachments.push(child);
                }
                Some(_) if self.at_coord() => {
                    let at = self.pos;
                    let site = self.coord()?;
                    if site.is_zero() {
                        self.pos = at;
                        return self.err("paths may not revisit the origin");
                    }
                    let order_in = self.order()?;
                    lp.visits.push(Visit {
                        site,
                        order_in,
                        attachments: vec![],
                    });
                }
                Some(_) => return self.err("unexpected character"),
            }
        }
        lp.marks.sort();
        Ok(lp)
    }
}

pub fn parse(text: &str, kind: PathKind) -> Result<PathString> {
    let mut p = Parser::new(text);
    p.expect('(')?;
    let mut root = p.body()?;
    root.closing_order = p.order()?;
    if p.peek().is_some() {
        return p.err("trailing characters");
    }
    if kind == PathKind::Eigenvector {
        if root.closing_order != 1 {
            return p.err("eigenvector paths have no closing jump");
        }
        if root.visits.is_empty() {
            return p.err("eigenvector paths end at a nonzero site");
        }
        root.closing_order = 0;
    }
    let dim = p.dim.unwrap_or(1);
    Ok(PathString { kind, root, dim })
}
