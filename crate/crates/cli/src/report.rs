//! The report document produced by every subcommand, and its text form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use zslq::exppoly::ExpPoly;
use zslq::matcore::Matrix;

use crate::problem::{ProblemFile, Rows, TermSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "zslq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Every tolerance, budget and simulation parameter actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub are_tol: f64,
    pub residual_tol: f64,
    pub range_tol: f64,
    pub sign_tol: f64,
    pub stab_budget: usize,
    pub search_seed: u64,
    pub random_seeds: usize,
    pub max_iter: usize,
    pub range_points: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub record_points: usize,
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncontrolledSection {
    pub stable: bool,
    #[serde(with = "num")]
    pub spectral_abscissa: f64,
    #[serde(with = "num")]
    pub lyapunov_residual: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySection {
    pub uncontrolled: UncontrolledSection,
    /// Stabilizing gains for scalar state and control; `null` endpoints are infinite.
    pub stabilizer_interval: Option<(Option<f64>, Option<f64>)>,
    pub theta: Option<Rows>,
    pub stabilizer: Option<bool>,
    pub closed_loop_abscissa: Option<f64>,
    pub synthesized: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreEntry {
    pub p: Rows,
    #[serde(with = "num")]
    pub residual_norm: f64,
    pub range_ok: bool,
    pub sign_ok: bool,
    pub stabilizing: bool,
    pub inconclusive: bool,
    pub projector_rank: usize,
    pub base_gain: Rows,
    pub gain: Option<Rows>,
    pub pi: Option<Rows>,
    #[serde(with = "num")]
    pub closed_loop_abscissa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSection {
    pub p: Rows,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub at_x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSection {
    pub p: Rows,
    pub theta1: Rows,
    pub theta2: Rows,
    pub pi: Rows,
    pub eta: Vec<TermSpec>,
    pub u_star: Vec<TermSpec>,
    pub value: ValueSection,
    #[serde(with = "num")]
    pub a_hat_abscissa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub label: String,
    #[serde(with = "num")]
    pub estimate: f64,
    #[serde(with = "num")]
    pub std_error: f64,
    pub paired_diff: Option<f64>,
    pub paired_se: Option<f64>,
    pub independent_se: Option<f64>,
    #[serde(with = "num")]
    pub tail_bound: f64,
    pub oracle: Option<f64>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSection {
    pub rows: Vec<VerifyRow>,
    pub value_confirmed: bool,
    pub saddle_holds: bool,
    /// `t,second_moment,std_error,moment_ode` under the saddle controls.
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSection {
    pub code: i32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub config: ResolvedConfig,
    pub problem: ProblemFile,
    pub stability: Option<StabilitySection>,
    pub are_solutions: Vec<AreEntry>,
    pub saddle: Option<SaddleSection>,
    pub verification: Option<VerificationSection>,
    pub diagnostics: Vec<String>,
    pub status: StatusSection,
}

/// Non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`; JSON has
/// no literal for them.
mod num {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        F(f64),
        S(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::F(x) => Ok(x),
            Repr::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("expected a number, got {s:?}"))),
            },
        }
    }
}

pub fn rows(m: &Matrix<f64>) -> Rows {
    if m.rows() == 0 || m.cols() == 0 {
        Vec::new()
    } else {
        m.to_rows()
    }
}

pub fn matrix(rows: &Rows, r: usize, c: usize) -> Matrix<f64> {
    if r == 0 || c == 0 {
        return Matrix::zeros(r, c);
    }
    Matrix::from_rows(rows)
}

pub fn terms(p: &ExpPoly<f64>) -> Vec<TermSpec> {
    p.terms()
        .iter()
        .map(|t| TermSpec {
            coeff: t.coeff.clone(),
            power: t.power,
            rate: t.rate,
        })
        .collect()
}

fn fmt_rows(r: &Rows) -> String {
    if r.is_empty() {
        return "[]".into();
    }
    serde_json::to_string(r).expect("rows serialize")
}

fn fmt_terms(ts: &[TermSpec]) -> String {
    if ts.is_empty() {
        return "0".into();
    }
    ts.iter()
        .map(|t| {
            let v = serde_json::to_string(&t.coeff).expect("coeffs serialize");
            match t.power {
                0 => format!("{v}·e^(-{}t)", t.rate),
                1 => format!("{v}·t·e^(-{}t)", t.rate),
                k => format!("{v}·t^{k}·e^(-{}t)", t.rate),
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.6}"))
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(src)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} ({})", self.tool.name, self.tool.version, self.command);
        if let Some(st) = &self.stability {
            let u = &st.uncontrolled;
            let _ = writeln!(s, "\n[stability]");
            let _ = writeln!(
                s,
                "uncontrolled [A, C]: {} (spectral abscissa {:.6e}{})",
                if u.stable { "L2-stable" } else { "not L2-stable" },
                u.spectral_abscissa,
                if u.boundary { ", on the boundary" } else { "" }
            );
            if let Some((lo, hi)) = st.stabilizer_interval {
                let end = |x: Option<f64>, inf: &str| x.map_or(inf.to_string(), |v| format!("{v}"));
                let _ = writeln!(s, "stabilizer interval: ({}, {})", end(lo, "-inf"), end(hi, "inf"));
            }
            if let (Some(th), Some(ok)) = (&st.theta, st.stabilizer) {
                let _ = writeln!(s, "theta = {}: stabilizer: {}", fmt_rows(th), if ok { "yes" } else { "no" });
            }
            if let Some(th) = &st.synthesized {
                let _ = writeln!(s, "synthesized stabilizer: {}", fmt_rows(th));
            }
        }
        if !self.are_solutions.is_empty() {
            let _ = writeln!(s, "\n[riccati]");
            for (i, e) in self.are_solutions.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "P{i} = {}  residual {:.3e}  range {}  sign {}  stabilizing {}{}",
                    fmt_rows(&e.p),
                    e.residual_norm,
                    e.range_ok,
                    e.sign_ok,
                    e.stabilizing,
                    if e.inconclusive { " (inconclusive)" } else { "" }
                );
                let _ = writeln!(
                    s,
                    "    gain -N^+L^T = {}  projector rank {}  closed-loop abscissa {:.6e}",
                    fmt_rows(&e.base_gain),
                    e.projector_rank,
                    e.closed_loop_abscissa
                );
            }
        }
        if let Some(sd) = &self.saddle {
            let _ = writeln!(s, "\n[saddle]");
            let _ = writeln!(s, "P = {}", fmt_rows(&sd.p));
            let _ = writeln!(s, "theta1* = {}", fmt_rows(&sd.theta1));
            if !sd.theta2.is_empty() {
                let _ = writeln!(s, "theta2* = {}", fmt_rows(&sd.theta2));
            }
            let _ = writeln!(s, "eta(t) = {}", fmt_terms(&sd.eta));
            let _ = writeln!(s, "u*(t) = {}", fmt_terms(&sd.u_star));
            let v = &sd.value;
            let _ = writeln!(
                s,
                "V(x) = <Px, x> + <{}, x> + {}   V(x0) = {}",
                serde_json::to_string(&v.linear).expect("vector serializes"),
                v.constant,
                v.at_x0
            );
        }
        if let Some(vr) = &self.verification {
            let _ = writeln!(s, "\n[verification]");
            let _ = writeln!(
                s,
                "{:<28} {:>12} {:>10} {:>12} {:>10} {:>10} {:>12}  verdict",
                "arm", "estimate", "se", "paired diff", "paired se", "tail", "oracle"
            );
            for r in &vr.rows {
                let _ = writeln!(
                    s,
                    "{:<28} {:>12.6} {:>10.2e} {:>12} {:>10} {:>10.2e} {:>12}  {}",
                    r.label,
                    r.estimate,
                    r.std_error,
                    opt(r.paired_diff),
                    r.paired_se.map_or("-".into(), |v| format!("{v:.2e}")),
                    r.tail_bound,
                    opt(r.oracle),
                    r.verdict
                );
            }
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "\nnote: {d}");
        }
        let _ = writeln!(s, "\nstatus: {} ({})", self.status.label, self.status.code);
        s
    }
}
