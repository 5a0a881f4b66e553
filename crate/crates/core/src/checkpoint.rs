//! Text checkpoint of the optimizer state.
//!
//! ```text
//! CMAINJ1
//! n <usize>
//! t <u64>
//! seed <u64>
//! rng_position <u128>
//! sigma <f64>
//! mean <n values>
//! p_sigma <n values>
//! p_c <n values>
//! cov_lower <n(n+1)/2 values, row-major lower triangle>
//! best_f <f64>                 (optional, with best_x)
//! best_x <n values>            (optional)
//! length_history <values>      (optional, adaptive clipping only)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a parsed
//! checkpoint reproduces the state bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const MAGIC: &str = "CMAINJ1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub t: u64,
    pub seed: u64,
    pub rng_position: u128,
    pub sigma: f64,
    pub mean: Vec<f64>,
    pub p_sigma: Vec<f64>,
    pub p_c: Vec<f64>,
    pub cov_lower: Vec<f64>,
    pub best_ever: Option<(f64, Vec<f64>)>,
    pub length_history: Vec<f64>,
}

fn push_values(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "n {}", self.n).unwrap();
        writeln!(out, "t {}", self.t).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "rng_position {}", self.rng_position).unwrap();
        writeln!(out, "sigma {}", self.sigma).unwrap();
        push_values(&mut out, "mean", &self.mean);
        push_values(&mut out, "p_sigma", &self.p_sigma);
        push_values(&mut out, "p_c", &self.p_c);
        push_values(&mut out, "cov_lower", &self.cov_lower);
        if let Some((f, x)) = &self.best_ever {
            writeln!(out, "best_f {f}").unwrap();
            push_values(&mut out, "best_x", x);
        }
        if !self.length_history.is_empty() {
            push_values(&mut out, "length_history", &self.length_history);
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(bad(format!("missing `{MAGIC}` header")));
        }
        let mut fields = std::collections::HashMap::new();
        let mut ended = false;
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            if fields
                .insert(key.to_string(), rest.trim().to_string())
                .is_some()
            {
                return Err(bad(format!("duplicate key `{key}`")));
            }
        }
        if !ended {
            return Err(bad("truncated checkpoint (no `end`)"));
        }

        let scalar = |key: &str| -> Result<&str> {
            fields
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| bad(format!("missing `{key}`")))
        };
        let floats = |key: &str| -> Result<Vec<f64>> {
            let raw = fields.get(key).map(String::as_str).unwrap_or("");
            raw.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| bad(format!("bad number `{v}` in `{key}`")))
                })
                .collect()
        };
        let int_err = |key: &str| bad(format!("bad integer for `{key}`"));

        let n: usize = scalar("n")?.parse().map_err(|_| int_err("n"))?;
        let cp = Checkpoint {
            n,
            t: scalar("t")?.parse().map_err(|_| int_err("t"))?,
            seed: scalar("seed")?.parse().map_err(|_| int_err("seed"))?,
            rng_position: scalar("rng_position")?
                .parse()
                .map_err(|_| int_err("rng_position"))?,
            sigma: scalar("sigma")?.parse().map_err(|_| bad("bad sigma"))?,
            mean: floats("mean")?,
            p_sigma: floats("p_sigma")?,
            p_c: floats("p_c")?,
            cov_lower: floats("cov_lower")?,
            best_ever: match fields.get("best_f") {
                Some(f) => Some((f.parse().map_err(|_| bad("bad best_f"))?, floats("best_x")?)),
                None => None,
            },
            length_history: floats("length_history")?,
        };
        let sizes_ok = cp.mean.len() == n
            && cp.p_sigma.len() == n
            && cp.p_c.len() == n
            && cp.cov_lower.len() == n * (n + 1) / 2
            && cp.best_ever.as_ref().is_none_or(|(_, x)| x.len() == n);
        if n == 0 || !sizes_ok {
            return Err(bad("vector lengths do not match n"));
        }
        Ok(cp)
    }
}
