//! Plain-text dump of a [`LinearProgram`] in a CPLEX-LP-like grammar.
//!
//! ```text
//! \ comment lines start with a backslash
//! Minimize
//!  obj: 50 x0 + 3000 x1
//! Subject To
//!  balance: x0 + x1 = 150
//!  capacity: x0 <= 100
//! Bounds
//!  0 <= x0 <= +inf
//!  -inf <= x2 <= 4
//! End
//! ```
//!
//! Variables are named `x<index>` unless they were added with a name.
//! Row labels are sanitised to `[A-Za-z0-9_.]`, with a `_<k>` suffix added
//! to duplicates so every row name is unique. Numbers use Rust's shortest
//! round-trip formatting.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;

use crate::problem::{LinearProgram, RowBlock};

fn sanitise(raw: &str) -> String {
    let s: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("r_{s}")
    } else {
        s
    }
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut first = true;
    for (j, a) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        if first {
            if a < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        let mag = a.abs();
        if mag == 1.0 {
            let _ = write!(out, " {}", names[j]);
        } else {
            let _ = write!(out, " {mag:?} {}", names[j]);
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

/// Renders `lp` as text.
pub fn to_lp_string(lp: &LinearProgram) -> String {
    let names: Vec<String> = (0..lp.n_vars())
        .map(|j| {
            let n = &lp.names[j];
            if n.is_empty() {
                format!("x{j}")
            } else {
                sanitise(n)
            }
        })
        .collect();
    let mut out = String::from("\\ epf-lp dump\nMinimize\n obj:");
    write_terms(&mut out, lp.cost.iter().copied().enumerate(), &names);
    out.push_str("\nSubject To\n");
    let mut seen = HashSet::new();
    let mut write_block = |out: &mut String, block: &RowBlock, op: &str| {
        for i in 0..block.len() {
            let mut label = sanitise(block.label(i));
            let mut k = 1;
            while !seen.insert(label.clone()) {
                label = format!("{}_{k}", sanitise(block.label(i)));
                k += 1;
            }
            let _ = write!(out, " {label}:");
            write_terms(out, block.row(i), &names);
            let _ = writeln!(out, " {op} {:?}", block.rhs(i));
        }
    };
    write_block(&mut out, &lp.eq, "=");
    write_block(&mut out, &lp.ub, "<=");
    out.push_str("Bounds\n");
    for j in 0..lp.n_vars() {
        let _ = writeln!(
            out,
            " {} <= {} <= {}",
            bound(lp.lower[j]),
            names[j],
            bound(lp.upper[j])
        );
    }
    out.push_str("End\n");
    out
}

pub fn write_lp<W: io::Write>(lp: &LinearProgram, mut w: W) -> io::Result<()> {
    w.write_all(to_lp_string(lp).as_bytes())
}
