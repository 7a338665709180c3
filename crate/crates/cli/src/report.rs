//! Report data, its text rendering, and the TOML form written by `--output`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub problem: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boolify: Option<BoolifySection>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSection {
    pub valid: bool,
    pub issues: Vec<String>,
    /// Whether each vertex's feasible set was checked exhaustively.
    pub exhaustive: BTreeMap<String, bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constrained: Option<ModeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxed: Option<ModeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSection {
    pub objective: f64,
    /// `|objective − consistency radius recomputed from the assignment| ≤ 1e-9`
    pub objective_pass: bool,
    pub local_cr_n: Vec<f64>,
    /// Constrained mode: every `𝒩_n` copy carries a section.
    pub sections_pass: bool,
    pub exhaustive: bool,
    pub budget_exhausted: bool,
    pub evaluations: usize,
    pub best_start: usize,
    pub steps: Vec<StepLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLabel {
    pub step: usize,
    pub controls: BTreeMap<String, Vec<f64>>,
    pub states: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSection {
    pub c_constrained: f64,
    pub c_relaxed: f64,
    pub d_s: f64,
    pub relaxation_pass: bool,
    pub rows: Vec<GapRowOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRowOut {
    pub step: usize,
    pub c_n_relaxed: f64,
    pub d_n: f64,
    pub section_pass: bool,
    pub restriction_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoolifySection {
    pub evaluation: String,
    pub eps: f64,
    pub c: f64,
    pub k: f64,
    pub eps_recomputation_pass: bool,
    pub zero_error: bool,
    pub vertices: BTreeMap<String, VertexBudgetOut>,
    pub k_entries: Vec<KEntryOut>,
    pub morphisms: BTreeMap<String, f64>,
    pub triples: Vec<TripleOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexBudgetOut {
    pub omega1: f64,
    pub omega2: f64,
    pub norm_sigma: f64,
    pub norm_tau_f: f64,
    pub eps_v: f64,
    /// `‖f̃_v ∘ σ_v − τ_v ∘ f_v‖` over `F_v`
    pub lhs: f64,
    pub lhs_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KEntryOut {
    pub map: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleOut {
    pub pair: String,
    pub step: usize,
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Report {
    /// Every pass flag in the report, with a label for the failing ones.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(v) = &self.validation {
            if !v.valid {
                out.push("validation".into());
            }
        }
        if let Some(s) = &self.solve {
            for (name, m) in [("constrained", &s.constrained), ("relaxed", &s.relaxed)] {
                if let Some(m) = m {
                    if !m.objective_pass {
                        out.push(format!("{name} objective recomputation"));
                    }
                    if !m.sections_pass {
                        out.push(format!("{name} sections"));
                    }
                }
            }
            if let Some(g) = &s.gap {
                if !g.relaxation_pass {
                    out.push("relaxed objective exceeds constrained".into());
                }
                for r in &g.rows {
                    if !(r.section_pass && r.restriction_pass) {
                        out.push(format!("gap chain at step {}", r.step));
                    }
                }
            }
        }
        if let Some(b) = &self.boolify {
            if !b.eps_recomputation_pass {
                out.push("eps recomputation".into());
            }
            for (v, x) in &b.vertices {
                if !x.lhs_pass {
                    out.push(format!("thresholding error at {v}"));
                }
            }
            for t in &b.triples {
                if !t.pass {
                    out.push(format!("bound chain {} step {}", t.pair, t.step));
                }
            }
        }
        out
    }

    pub fn budget_exhausted(&self) -> bool {
        self.solve.as_ref().is_some_and(|s| {
            [&s.constrained, &s.relaxed]
                .iter()
                .any(|m| m.as_ref().is_some_and(|m| m.budget_exhausted))
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}  (seed {})", self.command, self.problem, self.seed);
        if let Some(v) = &self.validation {
            let _ = writeln!(s, "\nvalidation: {}", if v.valid { "ok" } else { "FAILED" });
            for issue in &v.issues {
                let _ = writeln!(s, "  - {issue}");
            }
            for (vertex, full) in &v.exhaustive {
                let how = if *full { "exhaustive" } else { "sampled" };
                let _ = writeln!(s, "  {vertex:<16} {how}");
            }
        }
        if let Some(sol) = &self.solve {
            for (name, m) in [("constrained", &sol.constrained), ("relaxed", &sol.relaxed)] {
                if let Some(m) = m {
                    render_mode(&mut s, name, m);
                }
            }
            if let Some(g) = &sol.gap {
                let _ = writeln!(s, "\nrelaxation gap");
                let _ = writeln!(
                    s,
                    "  c(constrained) {}  c(relaxed) {}  d_S {}  {}",
                    g.c_constrained,
                    g.c_relaxed,
                    g.d_s,
                    flag(g.relaxation_pass)
                );
                let _ = writeln!(s, "  {:>4}  {:>22}  {:>22}  {:>6}  {:>6}", "step", "c_N(b')", "d_N(a',b')", "c<=2d", "d<=dS");
                for r in &g.rows {
                    let _ = writeln!(
                        s,
                        "  {:>4}  {:>22}  {:>22}  {:>6}  {:>6}",
                        r.step,
                        r.c_n_relaxed,
                        r.d_n,
                        flag(r.section_pass),
                        flag(r.restriction_pass)
                    );
                }
            }
        }
        if let Some(b) = &self.boolify {
            let _ = writeln!(s, "\nboolean scheme ({})", b.evaluation);
            let _ = writeln!(s, "  eps {}  C {}  K {}  zero error: {}", b.eps, b.c, b.k, b.zero_error);
            let _ = writeln!(
                s,
                "  {:<12} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>6}",
                "vertex", "omega1", "omega2", "|sigma|", "|tau f|", "eps_v", "lhs", "ok"
            );
            for (v, x) in &b.vertices {
                let _ = writeln!(
                    s,
                    "  {:<12} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14} {:>6}",
                    v,
                    x.omega1,
                    x.omega2,
                    x.norm_sigma,
                    x.norm_tau_f,
                    x.eps_v,
                    x.lhs,
                    flag(x.lhs_pass)
                );
            }
            let _ = writeln!(s, "  K entries");
            for e in &b.k_entries {
                let _ = writeln!(s, "    {:<20} {:>22}  {}", e.map, e.value, e.provenance);
            }
            let _ = writeln!(s, "  morphism defects");
            for (name, d) in &b.morphisms {
                let _ = writeln!(s, "    {name:<20} {d}");
            }
            let _ = writeln!(s, "  bound chains");
            let _ = writeln!(s, "    {:<16} {:>4} {:>22} {:>22} {:>22} {:>6}", "pair", "step", "lhs", "mid", "rhs", "ok");
            for t in &b.triples {
                let _ = writeln!(
                    s,
                    "    {:<16} {:>4} {:>22} {:>22} {:>22} {:>6}",
                    t.pair,
                    t.step,
                    t.lhs,
                    t.mid,
                    t.rhs,
                    flag(t.pass)
                );
            }
        }
        s
    }
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn render_mode(s: &mut String, name: &str, m: &ModeSection) {
    let _ = writeln!(s, "\n{name}: objective {}", m.objective);
    let _ = writeln!(
        s,
        "  evaluations {}  exhaustive {}  budget exhausted {}  best start {}",
        m.evaluations, m.exhaustive, m.budget_exhausted, m.best_start
    );
    let _ = writeln!(
        s,
        "  objective recomputed: {}  sections: {}",
        flag(m.objective_pass),
        flag(m.sections_pass)
    );
    let cr: Vec<String> = m.local_cr_n.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "  local c_N per step: [{}]", cr.join(", "));
    for st in &m.steps {
        let _ = write!(s, "  t{}:", st.step);
        for (v, c) in &st.controls {
            let _ = write!(s, " {v}(c={}, s={})", join(c), join(&st.states[v]));
        }
        let _ = writeln!(s);
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
