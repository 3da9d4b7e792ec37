//! Plain-text dump of a conic problem, for debugging and for feeding other
//! solvers:
//!
//! ```text
//! conic rows 3 cols 2
//! cones zero:1 soc:2
//! c 1 0
//! b 1 0 0
//! A 0 0 1
//! A 1 1 -1
//! ```
//!
//! `A` lines are zero-based `row col value` triplets.

use super::{Cone, ConeSpec, ConicProblem, CscMatrix};
use crate::error::{Error, Result};

pub fn to_text(p: &ConicProblem) -> String {
    let mut out = format!("conic rows {} cols {}\ncones", p.num_rows(), p.num_vars());
    for c in &p.cones.blocks {
        let size = match *c {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::SecondOrder(d) | Cone::Psd(d) => d,
        };
        out.push_str(&format!(" {}:{}", c.name(), size));
    }
    out.push_str("\nc");
    for v in &p.c {
        out.push_str(&format!(" {v:?}"));
    }
    out.push_str("\nb");
    for v in &p.b {
        out.push_str(&format!(" {v:?}"));
    }
    out.push('\n');
    for (r, c, v) in p.a.triplets() {
        out.push_str(&format!("A {r} {c} {v:?}\n"));
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn floats<'a>(it: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    it.map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t}: {e}"))))
        .collect()
}

pub fn from_text(text: &str) -> Result<ConicProblem> {
    let mut dims = None;
    let mut cones = Vec::new();
    let (mut c, mut b) = (None, None);
    let mut trip = Vec::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("conic") => {
                let t: Vec<&str> = tok.collect();
                match t.as_slice() {
                    ["rows", m, "cols", n] => {
                        let m: usize = m.parse().map_err(|_| bad("bad row count"))?;
                        let n: usize = n.parse().map_err(|_| bad("bad column count"))?;
                        dims = Some((m, n));
                    }
                    _ => return Err(bad(format!("malformed header: {line}"))),
                }
            }
            Some("cones") => {
                for t in tok {
                    let (kind, size) = t
                        .split_once(':')
                        .ok_or_else(|| bad(format!("cone token {t}")))?;
                    let d: usize = size.parse().map_err(|_| bad(format!("cone size {size}")))?;
                    cones.push(match kind {
                        "zero" => Cone::Zero(d),
                        "nonneg" => Cone::NonNeg(d),
                        "soc" => Cone::SecondOrder(d),
                        "psd" => Cone::Psd(d),
                        _ => return Err(bad(format!("unknown cone {kind}"))),
                    });
                }
            }
            Some("c") => c = Some(floats(tok)?),
            Some("b") => b = Some(floats(tok)?),
            Some("A") => {
                let t: Vec<&str> = tok.collect();
                let [r, col, v] = t.as_slice() else {
                    return Err(bad(format!("malformed triplet: {line}")));
                };
                trip.push((
                    r.parse().map_err(|_| bad("triplet row"))?,
                    col.parse().map_err(|_| bad("triplet col"))?,
                    v.parse().map_err(|_| bad("triplet value"))?,
                ));
            }
            _ => return Err(bad(format!("unrecognized line: {line}"))),
        }
    }
    let (m, n) = dims.ok_or_else(|| bad("missing header"))?;
    let a = CscMatrix::from_triplets(m, n, &trip)?;
    ConicProblem::new(
        c.ok_or_else(|| bad("missing c"))?,
        a,
        b.ok_or_else(|| bad("missing b"))?,
        ConeSpec::new(cones),
    )
}
