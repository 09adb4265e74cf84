//! Sparse SDPA (`.dat-s`) export of the assembled NPA SDP, for
//! cross-checking bounds against external SDP solvers.
//!
//! The file encodes the SDPA-standard problem
//!
//!   min c·x  s.t.  Σ_i x_i F_i − F_0 ⪰ 0
//!
//! with c = b, F_0 = C and F_i = A_i, which is exactly the dual
//! min b·y, Σ y_i A_i − C ⪰ 0. An external solver's reported optimum is
//! therefore the NPA upper bound itself, no sign flip involved.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use bellbound::sdp::StandardFormSdp;

/// Renders the SDP in sparse SDPA format. One block; 1-based upper-triangle
/// entries; matno 0 is the constant matrix.
pub fn render_sdpa(sdp: &StandardFormSdp) -> String {
    let n = sdp.n();
    let m = sdp.m();
    let mut out = String::new();
    out.push_str("* NPA moment-matrix relaxation, dual form: min b.y s.t. sum_i y_i A_i - C >= 0\n");
    out.push_str("* matno 0 holds C with its sign as assembled; the solver's optimal value\n");
    out.push_str("* equals the certified upper bound on the Bell functional.\n");
    let _ = writeln!(out, "{m}");
    out.push_str("1\n");
    let _ = writeln!(out, "{n}");
    let b: Vec<String> = sdp.rhs().iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    for i in 0..n {
        for j in i..n {
            let v = sdp.objective()[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "0 1 {} {} {v}", i + 1, j + 1);
            }
        }
    }
    for (k, a) in sdp.constraints().iter().enumerate() {
        for &(i, j, v) in a.entries() {
            if v != 0.0 {
                let _ = writeln!(out, "{} 1 {} {} {v}", k + 1, i + 1, j + 1);
            }
        }
    }
    out
}

/// Writes the SDPA rendering to a file.
pub fn export_sdpa(sdp: &StandardFormSdp, path: &Path) -> Result<()> {
    fs::write(path, render_sdpa(sdp))
        .with_context(|| format!("writing SDPA file {}", path.display()))
}

/// A parsed single-block SDPA problem (diagnostic reader used to verify that
/// exports round-trip; accepts only what [`render_sdpa`] produces).
#[derive(Debug, Clone)]
pub struct ParsedSdpa {
    pub n: usize,
    pub b: DVector<f64>,
    /// Dense constant matrix F_0 (our C).
    pub constant: DMatrix<f64>,
    /// Dense constraint matrices F_1..F_m (our A_i).
    pub constraints: Vec<DMatrix<f64>>,
}

pub fn parse_sdpa(text: &str) -> Result<ParsedSdpa> {
    let mut lines = text
        .lines()
        .filter(|l| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('*') && !t.starts_with('"')
        })
        .map(str::trim);
    let m: usize = lines.next().context("missing m line")?.parse()?;
    let nblocks: usize = lines.next().context("missing block count")?.parse()?;
    if nblocks != 1 {
        bail!("expected a single block, got {nblocks}");
    }
    let n: i64 = lines.next().context("missing block size")?.parse()?;
    let n = n.unsigned_abs() as usize;
    let b: Vec<f64> = lines
        .next()
        .context("missing b vector")?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(Into::into))
        .collect::<Result<_>>()?;
    if b.len() != m {
        bail!("b vector has {} entries, expected {m}", b.len());
    }
    let mut constant = DMatrix::<f64>::zeros(n, n);
    let mut constraints = vec![DMatrix::<f64>::zeros(n, n); m];
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            bail!("malformed entry line `{line}`");
        }
        let matno: usize = tok[0].parse()?;
        let block: usize = tok[1].parse()?;
        let i: usize = tok[2].parse()?;
        let j: usize = tok[3].parse()?;
        let v: f64 = tok[4].parse()?;
        if block != 1 || i == 0 || j == 0 || i > j || j > n {
            bail!("entry outside the upper triangle of block 1: `{line}`");
        }
        let target = if matno == 0 {
            &mut constant
        } else if matno <= m {
            &mut constraints[matno - 1]
        } else {
            bail!("matrix index {matno} out of range");
        };
        target[(i - 1, j - 1)] = v;
        if i != j {
            target[(j - 1, i - 1)] = v;
        }
    }
    Ok(ParsedSdpa {
        n,
        b: DVector::from_vec(b),
        constant,
        constraints,
    })
}
