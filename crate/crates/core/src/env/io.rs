//! Plain-text bundle files.
//!
//! ```text
//! mlirl-bundle 1
//! name <label>
//! states <n>
//! actions <m>
//! features <k>
//! discount <γ>
//! costs_only <0|1>
//! absorbing <count> <state>...
//! weights <mode> <θ_1> ... <θ_k>
//! initial <p_0> ... <p_{n-1}>
//! transitions <nnz>
//! <x> <a> <y> <p>          (nnz lines)
//! phi <nnz>
//! <x> <a> <k> <value>      (nnz lines)
//! end
//! ```
//!
//! Tensors list their nonzero entries only. Reals use the shortest decimal
//! text that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::features::{ConstraintMode, FeatureMap, WeightVector};
use crate::mdp::TabularMdp;

pub const BUNDLE_MAGIC: &str = "mlirl-bundle 1";
/// Upper bound on dense tensor sizes accepted by the parser.
const MAX_DENSE_ENTRIES: usize = 1 << 26;

pub fn write_bundle(bundle: &EnvironmentBundle) -> String {
    let mdp = &bundle.mdp;
    let (n, m, k) = (mdp.n_states(), mdp.n_actions(), bundle.features.n_features());
    let mut s = String::new();
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    // writing to a String cannot fail
    let _ = writeln!(s, "{BUNDLE_MAGIC}");
    let _ = writeln!(s, "name {}", bundle.name);
    let _ = writeln!(s, "states {n}\nactions {m}\nfeatures {k}");
    let _ = writeln!(s, "discount {}", mdp.discount());
    let _ = writeln!(s, "costs_only {}", u8::from(bundle.costs_only));
    let _ = write!(s, "absorbing {}", bundle.absorbing.len());
    for x in &bundle.absorbing {
        let _ = write!(s, " {x}");
    }
    let _ = writeln!(
        s,
        "\nweights {} {}",
        bundle.true_weights.mode(),
        join(bundle.true_weights.theta())
    );
    let _ = writeln!(s, "initial {}", join(mdp.initial_dist()));

    let nnz: usize = (0..n).flat_map(|x| (0..m).map(move |a| (x, a))).map(|(x, a)| mdp.successors(x, a).len()).sum();
    let _ = writeln!(s, "transitions {nnz}");
    for x in 0..n {
        for a in 0..m {
            for &(y, p) in mdp.successors(x, a) {
                let _ = writeln!(s, "{x} {a} {y} {p}");
            }
        }
    }
    let phi = bundle.features.as_slice();
    let _ = writeln!(s, "phi {}", phi.iter().filter(|v| **v != 0.0).count());
    for (i, v) in phi.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        let _ = writeln!(s, "{} {} {} {v}", i / (m * k), (i / k) % m, i % k);
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.trim());
            }
        }
        Err(IrlError::parse(self.line + 1, "unexpected end of input"))
    }

    /// The remainder of a `key rest...` line.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_line()?;
        match l.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            _ if l == key => Ok(""),
            _ => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let rest = self.keyed(key)?;
        self.num(rest)
    }

    fn err(&self, msg: impl Into<String>) -> IrlError {
        IrlError::parse(self.line, msg)
    }

    fn num<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    fn real(&self, tok: &str) -> Result<f64> {
        let v: f64 = self.num(tok)?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value `{tok}`")));
        }
        Ok(v)
    }

    fn reals(&self, rest: &str, expect: usize) -> Result<Vec<f64>> {
        let v = rest
            .split_whitespace()
            .map(|t| self.real(t))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != expect {
            return Err(self.err(format!("expected {expect} values, found {}", v.len())));
        }
        Ok(v)
    }
}

pub fn parse_bundle(text: &str) -> Result<EnvironmentBundle> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next_line()? != BUNDLE_MAGIC {
        return Err(lines.err("missing bundle header"));
    }
    let name = lines.keyed("name")?.to_string();
    let n: usize = lines.keyed_num("states")?;
    let m: usize = lines.keyed_num("actions")?;
    let k: usize = lines.keyed_num("features")?;
    let dense = n.checked_mul(m).and_then(|v| v.checked_mul(n.max(k)));
    if dense.is_none_or(|v| v > MAX_DENSE_ENTRIES) {
        return Err(lines.err("dimensions too large"));
    }
    if n == 0 || m == 0 || k == 0 {
        return Err(lines.err("dimensions must be positive"));
    }
    let discount = lines.keyed("discount")?;
    let discount = lines.real(discount)?;
    let costs_only = match lines.keyed("costs_only")? {
        "0" => false,
        "1" => true,
        other => return Err(lines.err(format!("costs_only must be 0 or 1, got `{other}`"))),
    };

    let rest = lines.keyed("absorbing")?;
    let mut toks = rest.split_whitespace();
    let count: usize = lines.num(toks.next().unwrap_or(""))?;
    let absorbing = toks
        .map(|t| {
            let x: usize = lines.num(t)?;
            if x >= n {
                return Err(lines.err(format!("absorbing state {x} out of range")));
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    if absorbing.len() != count {
        return Err(lines.err("absorbing count mismatch"));
    }

    let rest = lines.keyed("weights")?;
    let (mode, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let mode: ConstraintMode = mode.parse().map_err(|_| lines.err("bad constraint mode"))?;
    let theta = lines.reals(rest, k)?;
    let initial = lines.keyed("initial")?;
    let initial = lines.reals(initial, n)?;

    let nnz: usize = lines.keyed_num("transitions")?;
    if nnz > n * m * n {
        return Err(lines.err("too many transition entries"));
    }
    let mut transition = vec![0.0; n * m * n];
    for _ in 0..nnz {
        let l = lines.next_line()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 {
            return Err(lines.err("transition entry needs `x a y p`"));
        }
        let (x, a, y): (usize, usize, usize) = (lines.num(t[0])?, lines.num(t[1])?, lines.num(t[2])?);
        if x >= n || a >= m || y >= n {
            return Err(lines.err("transition index out of range"));
        }
        let slot = &mut transition[(x * m + a) * n + y];
        if *slot != 0.0 {
            return Err(lines.err("duplicate transition entry"));
        }
        *slot = lines.real(t[3])?;
    }

    let nnz: usize = lines.keyed_num("phi")?;
    if nnz > n * m * k {
        return Err(lines.err("too many feature entries"));
    }
    let mut phi = vec![0.0; n * m * k];
    for _ in 0..nnz {
        let l = lines.next_line()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 {
            return Err(lines.err("feature entry needs `x a k value`"));
        }
        let (x, a, f): (usize, usize, usize) = (lines.num(t[0])?, lines.num(t[1])?, lines.num(t[2])?);
        if x >= n || a >= m || f >= k {
            return Err(lines.err("feature index out of range"));
        }
        let slot = &mut phi[(x * m + a) * k + f];
        if *slot != 0.0 {
            return Err(lines.err("duplicate feature entry"));
        }
        *slot = lines.real(t[3])?;
    }
    if lines.next_line()? != "end" {
        return Err(lines.err("expected `end`"));
    }

    let bundle = EnvironmentBundle {
        name,
        mdp: TabularMdp::new(n, m, transition, discount, initial)?,
        features: FeatureMap::new(n, m, k, phi)?,
        true_weights: WeightVector::new(theta, mode)?,
        costs_only,
        absorbing,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn read_bundle(path: &Path) -> Result<EnvironmentBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| IrlError::io(path, e))?;
    parse_bundle(&text)
}
