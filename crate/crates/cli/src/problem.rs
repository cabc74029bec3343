//! Problem files: a single JSON document with `system`, `cost`, optional
//! `forcing`, `x0` and optional `sim` blocks.
//!
//! ```json
//! {
//!   "system": { "A": [[-2]], "B1": [[-1]], "C": [[2]], "D1": [[1]] },
//!   "cost":   { "Q": [[2]], "S1": [[0]], "R11": [[-0.5]] },
//!   "x0": [1],
//!   "sim": { "dt": 0.001, "horizon": 40, "paths": 4000, "seed": 0 }
//! }
//! ```
//!
//! Player-2 blocks (`B2`, `D2`, `S2`, `R12`, `R22`) may be omitted for a
//! one-player problem. Forcing entries are lists of exponential terms
//! `{"coeff": [...], "power": k, "rate": α}`.

use std::fmt;

use serde::{Deserialize, Serialize};
use zslq::exppoly::{ExpPoly, ExpTerm};
use zslq::matcore::{Matrix, SymMatrix};
use zslq::riccati::{ForcingTerms, GameCost, GameSpec, GameSystem};
use zslq::SimConfig64;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B1")]
    pub b1: Rows,
    #[serde(rename = "B2", default, skip_serializing_if = "Vec::is_empty")]
    pub b2: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D1")]
    pub d1: Rows,
    #[serde(rename = "D2", default, skip_serializing_if = "Vec::is_empty")]
    pub d2: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "S1")]
    pub s1: Rows,
    #[serde(rename = "S2", default, skip_serializing_if = "Vec::is_empty")]
    pub s2: Rows,
    #[serde(rename = "R11")]
    pub r11: Rows,
    #[serde(rename = "R12", default, skip_serializing_if = "Vec::is_empty")]
    pub r12: Rows,
    #[serde(rename = "R22", default, skip_serializing_if = "Vec::is_empty")]
    pub r22: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: Vec<f64>,
    #[serde(default)]
    pub power: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingBlock {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho1: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho2: Vec<TermSpec>,
}

impl ForcingBlock {
    pub fn is_empty(&self) -> bool {
        self.b.is_empty() && self.sigma.is_empty() && self.q.is_empty() && self.rho1.is_empty() && self.rho2.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimBlock {
    fn default() -> Self {
        let d = SimConfig64::default();
        Self {
            dt: d.dt,
            horizon: d.horizon,
            paths: d.paths,
            seed: d.seed,
        }
    }
}

impl SimBlock {
    pub fn config(&self) -> SimConfig64 {
        SimConfig64 {
            dt: self.dt,
            horizon: self.horizon,
            paths: self.paths,
            seed: self.seed,
            ..SimConfig64::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub system: SystemBlock,
    pub cost: CostBlock,
    #[serde(default, skip_serializing_if = "ForcingBlock::is_empty")]
    pub forcing: ForcingBlock,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub sim: SimBlock,
}

/// A problem-file error with the 1-based position it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Position of the value of `path` (a chain of object keys), falling back
/// to the deepest key found.
fn locate(src: &str, path: &[&str]) -> (usize, usize) {
    let mut pos = 0;
    for key in path {
        let needle = format!("\"{key}\"");
        let mut from = pos;
        let found = loop {
            match src[from..].find(&needle) {
                Some(i) => {
                    let after = from + i + needle.len();
                    if src[after..].trim_start().starts_with(':') {
                        break Some(from + i);
                    }
                    from = after;
                }
                None => break None,
            }
        };
        match found {
            Some(i) => pos = i,
            None => break,
        }
    }
    line_col(src, pos)
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |i| offset - i - 1) + 1;
    (line, column)
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, path: &[&str], message: String) -> ParseError {
        let (line, column) = locate(self.src, path);
        ParseError { line, column, message }
    }

    fn matrix(&self, path: &[&str], rows: &Rows, r: usize, c: usize) -> Result<Matrix<f64>, ParseError> {
        let name = path.last().copied().unwrap_or("");
        // An omitted block stands for a matrix with a zero dimension.
        if rows.is_empty() && (r == 0 || c == 0) {
            return Ok(Matrix::zeros(r, c));
        }
        if rows.len() != r || rows.iter().any(|row| row.len() != c) {
            let got_c = rows.first().map_or(0, Vec::len);
            let ragged = rows.iter().any(|row| row.len() != got_c);
            let shape = if ragged {
                "ragged rows".to_string()
            } else {
                format!("{}x{got_c}", rows.len())
            };
            return Err(self.err(path, format!("{name} is {shape}, expected {r}x{c}")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(self.err(path, format!("{name} has non-finite entries")));
        }
        let data = rows.iter().flatten().copied().collect();
        Matrix::new(r, c, data).map_err(|e| self.err(path, e.to_string()))
    }

    fn sym(&self, path: &[&str], rows: &Rows, n: usize) -> Result<SymMatrix<f64>, ParseError> {
        let m = self.matrix(path, rows, n, n)?;
        SymMatrix::new(m).map_err(|e| self.err(path, format!("{}: {e}", path.last().unwrap())))
    }

    fn exppoly(&self, path: &[&str], terms: &[TermSpec], dim: usize) -> Result<ExpPoly<f64>, ParseError> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coeff.len() != dim {
                return Err(self.err(
                    path,
                    format!(
                        "{} term has {} components, expected {dim}",
                        path.last().unwrap(),
                        t.coeff.len()
                    ),
                ));
            }
            out.push(ExpTerm::new(t.coeff.clone(), t.power, t.rate).map_err(|e| self.err(path, e.to_string()))?);
        }
        ExpPoly::new(dim, out).map_err(|e| self.err(path, e.to_string()))
    }
}

/// Column count of a row list, `0` for an omitted block.
fn width(rows: &Rows) -> usize {
    rows.first().map_or(0, Vec::len)
}

impl ProblemFile {
    /// Parses and validates a problem document.
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let file: ProblemFile = serde_json::from_str(src).map_err(|e| ParseError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.to_spec_located(src)?;
        Ok(file)
    }

    pub fn to_spec(&self) -> Result<GameSpec<f64>, ParseError> {
        let src = serde_json::to_string_pretty(self).expect("problem serializes");
        self.to_spec_located(&src)
    }

    fn to_spec_located(&self, src: &str) -> Result<GameSpec<f64>, ParseError> {
        let cx = Ctx { src };
        let (sys, cost) = (&self.system, &self.cost);
        let n = sys.a.len();
        if n == 0 {
            return Err(cx.err(&["system", "A"], "A must be non-empty".into()));
        }
        let m1 = width(&sys.b1);
        let m2 = width(&sys.b2);
        if m1 == 0 {
            return Err(cx.err(&["system", "B1"], "B1 must have at least one column".into()));
        }
        let system = GameSystem {
            a: cx.matrix(&["system", "A"], &sys.a, n, n)?,
            c: cx.matrix(&["system", "C"], &sys.c, n, n)?,
            b1: cx.matrix(&["system", "B1"], &sys.b1, n, m1)?,
            b2: cx.matrix(&["system", "B2"], &sys.b2, n, m2)?,
            d1: cx.matrix(&["system", "D1"], &sys.d1, n, m1)?,
            d2: cx.matrix(&["system", "D2"], &sys.d2, n, m2)?,
        };
        let game_cost = GameCost {
            q: cx.sym(&["cost", "Q"], &cost.q, n)?,
            s1: cx.matrix(&["cost", "S1"], &cost.s1, m1, n)?,
            s2: cx.matrix(&["cost", "S2"], &cost.s2, m2, n)?,
            r11: cx.sym(&["cost", "R11"], &cost.r11, m1)?,
            r12: cx.matrix(&["cost", "R12"], &cost.r12, m1, m2)?,
            r22: cx.sym(&["cost", "R22"], &cost.r22, m2)?,
        };
        let f = &self.forcing;
        let forcing = ForcingTerms {
            b: cx.exppoly(&["forcing", "b"], &f.b, n)?,
            sigma: cx.exppoly(&["forcing", "sigma"], &f.sigma, n)?,
            q: cx.exppoly(&["forcing", "q"], &f.q, n)?,
            rho1: cx.exppoly(&["forcing", "rho1"], &f.rho1, m1)?,
            rho2: cx.exppoly(&["forcing", "rho2"], &f.rho2, m2)?,
        };
        if self.x0.len() != n {
            return Err(cx.err(&["x0"], format!("x0 has {} entries, expected {n}", self.x0.len())));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(cx.err(&["x0"], "x0 has non-finite entries".into()));
        }
        if let Err(e) = self.sim.config().validate() {
            return Err(cx.err(&["sim"], e.to_string()));
        }
        GameSpec::new(system, game_cost, forcing).map_err(|e| cx.err(&[], e.to_string()))
    }

    /// The problem file describing `spec`.
    pub fn from_spec(spec: &GameSpec<f64>, x0: &[f64], sim: SimBlock) -> Self {
        let rows = |m: &Matrix<f64>| -> Rows {
            if m.rows() == 0 || m.cols() == 0 {
                Vec::new()
            } else {
                m.to_rows()
            }
        };
        let terms = |p: &ExpPoly<f64>| -> Vec<TermSpec> {
            p.terms()
                .iter()
                .map(|t| TermSpec {
                    coeff: t.coeff.clone(),
                    power: t.power,
                    rate: t.rate,
                })
                .collect()
        };
        let (s, c, f) = (spec.system(), spec.cost(), spec.forcing());
        ProblemFile {
            system: SystemBlock {
                a: rows(&s.a),
                b1: rows(&s.b1),
                b2: rows(&s.b2),
                c: rows(&s.c),
                d1: rows(&s.d1),
                d2: rows(&s.d2),
            },
            cost: CostBlock {
                q: rows(c.q.as_matrix()),
                s1: rows(&c.s1),
                s2: rows(&c.s2),
                r11: rows(c.r11.as_matrix()),
                r12: rows(&c.r12),
                r22: rows(c.r22.as_matrix()),
            },
            forcing: ForcingBlock {
                b: terms(&f.b),
                sigma: terms(&f.sigma),
                q: terms(&f.q),
                rho1: terms(&f.rho1),
                rho2: terms(&f.rho2),
            },
            x0: x0.to_vec(),
            sim,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONSTAB: &str = r#"{
  "system": { "A": [[-2]], "B1": [[-1]], "C": [[2]], "D1": [[1]] },
  "cost": { "Q": [[2]], "S1": [[0]], "R11": [[-0.5]] },
  "x0": [1]
}"#;

    #[test]
    fn parses_one_player_file() {
        let p = ProblemFile::parse(NONSTAB).unwrap();
        let spec = p.to_spec().unwrap();
        assert_eq!((spec.state_dim(), spec.m1(), spec.m2()), (1, 1, 0));
        assert_eq!(spec.a()[(0, 0)], -2.0);
        assert_eq!(p.sim, SimBlock::default());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = ProblemFile::parse("{\n  \"system\": {\n    \"A\": [[1]\n  }\n}").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn dimension_errors_point_at_the_matrix() {
        let bad = NONSTAB.replace("\"D1\": [[1]]", "\"D1\": [[1, 2]]");
        let e = ProblemFile::parse(&bad).unwrap_err();
        assert_eq!(e.line, 2);
        let col = bad.lines().nth(1).unwrap().find("\"D1\"").unwrap() + 1;
        assert_eq!(e.column, col);
        assert!(e.message.contains("D1 is 1x2, expected 1x1"), "{}", e.message);
    }

    #[test]
    fn asymmetric_weights_rejected() {
        let src = r#"{
  "system": { "A": [[-1, 0], [0, -1]], "B1": [[1], [0]], "C": [[0, 0], [0, 0]], "D1": [[0], [0]] },
  "cost": { "Q": [[1, 2], [0, 1]], "S1": [[0, 0]], "R11": [[1]] },
  "x0": [1, 0]
}"#;
        let e = ProblemFile::parse(src).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("Q"), "{}", e.message);
    }

    #[test]
    fn wrong_x0_and_unknown_fields() {
        let e = ProblemFile::parse(&NONSTAB.replace("[1]\n}", "[1, 2]\n}")).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(ProblemFile::parse(&NONSTAB.replace("\"x0\"", "\"y\": 1, \"x0\"")).is_err());
    }

    #[test]
    fn round_trip_is_field_identical() {
        let p = ProblemFile::parse(NONSTAB).unwrap();
        let back = ProblemFile::from_spec(&p.to_spec().unwrap(), &p.x0, p.sim);
        assert_eq!(back, p);
        assert_eq!(ProblemFile::parse(&back.to_json()).unwrap(), p);
    }
}
