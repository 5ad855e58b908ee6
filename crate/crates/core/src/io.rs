//! Plain-text serialization of Tucker factors.
//!
//! ```text
//! format=longnet-factors/1
//! dims=<n1> <n2> <n3>
//! ranks=<r1> <r2> <r3>
//! [U]            n1 rows of r1 values
//! [V]            n2 rows of r2 values
//! [W]            n3 rows of r3 values
//! [S]            mode-1 unfolding: r1 rows of r2*r3 values
//! ```
//!
//! `#` starts a comment. Values use the shortest representation that reads
//! back to the same `f64`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::events::{parse_f64, parse_usize, strip_comment};
use crate::tensor::{mode_fold, mode_unfold, Matrix, TuckerFactors};

pub const FACTORS_FORMAT: &str = "longnet-factors/1";

fn write_rows<W: Write>(sink: &mut W, m: &Matrix) -> Result<()> {
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        writeln!(sink, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_factors<W: Write>(f: &TuckerFactors, mut sink: W) -> Result<()> {
    let (n1, n2, n3) = f.dims();
    let (r1, r2, r3) = f.ranks();
    writeln!(sink, "format={FACTORS_FORMAT}")?;
    writeln!(sink, "dims={n1} {n2} {n3}")?;
    writeln!(sink, "ranks={r1} {r2} {r3}")?;
    for (name, m) in [("U", &f.u), ("V", &f.v), ("W", &f.w)] {
        writeln!(sink, "[{name}]")?;
        write_rows(&mut sink, m)?;
    }
    writeln!(sink, "[S]")?;
    write_rows(&mut sink, &mode_unfold(&f.core, 1)?)?;
    Ok(())
}

fn triple(value: &str, line: usize) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line,
            msg: format!("expected three integers, got `{value}`"),
        });
    }
    Ok((
        parse_usize(parts[0], line)?,
        parse_usize(parts[1], line)?,
        parse_usize(parts[2], line)?,
    ))
}

pub fn read_factors<R: BufRead>(source: R) -> Result<TuckerFactors> {
    let mut format = None;
    let mut dims = None;
    let mut ranks = None;
    let mut sections: Vec<(String, usize, Vec<Vec<f64>>)> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = strip_comment(&line);
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            sections.push((name.to_string(), lineno, Vec::new()));
        } else if let Some((section, _, rows)) = sections.last_mut() {
            let row = body
                .split_whitespace()
                .map(|v| parse_f64(v, lineno))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::Parse { line, msg } => Error::Parse {
                        line,
                        msg: format!("section [{section}]: {msg}"),
                    },
                    other => other,
                })?;
            rows.push(row);
        } else if let Some(v) = body.strip_prefix("format=") {
            format = Some(v.to_string());
        } else if let Some(v) = body.strip_prefix("dims=") {
            dims = Some(triple(v, lineno)?);
        } else if let Some(v) = body.strip_prefix("ranks=") {
            ranks = Some(triple(v, lineno)?);
        } else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unexpected `{body}`"),
            });
        }
    }
    match format.as_deref() {
        Some(FACTORS_FORMAT) => {}
        Some(other) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported format `{other}`, expected `{FACTORS_FORMAT}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                msg: "missing `format=` line".into(),
            })
        }
    }
    let missing = |what: &str| Error::Parse {
        line: 0,
        msg: format!("missing `{what}=` line"),
    };
    let (n1, n2, n3) = dims.ok_or_else(|| missing("dims"))?;
    let (r1, r2, r3) = ranks.ok_or_else(|| missing("ranks"))?;
    let mut take = |name: &str, rows: usize, cols: usize| -> Result<Matrix> {
        let pos = sections
            .iter()
            .position(|(s, _, _)| s == name)
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing section [{name}]"),
            })?;
        let (_, line, data) = sections.swap_remove(pos);
        if data.len() != rows || data.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse {
                line,
                msg: format!("section [{name}] must be {rows} x {cols}"),
            });
        }
        Matrix::from_rows(&data)
    };
    let u = take("U", n1, r1)?;
    let v = take("V", n2, r2)?;
    let w = take("W", n3, r3)?;
    let s = take("S", r1, r2 * r3)?;
    TuckerFactors::new(mode_fold(&s, 1, (r1, r2, r3))?, u, v, w)
}
