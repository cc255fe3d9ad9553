//! Before/after results per (method, training attack, evaluation attack).
//!
//! A cell's error is the mean attack objective on the test scenes: ADE for
//! the ADE attack, the signed directional error (configured direction
//! positive) for lateral and longitudinal attacks. "Before" is the model
//! entering adversarial training, "after" the final one. Runs sharing a
//! (method, training attack) key are averaged.

use std::fmt::Write as _;

use crate::attack::{AttackConfig, AttackType};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_set, summarize};
use crate::harness::config::Method;
use crate::harness::run::RunDir;
use crate::predictor::PredictorModel;
use crate::scalar::Real;
use crate::scenario::Scene;

/// Benign and attacked summary of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEval {
    pub benign_ade: f64,
    pub benign_intent_error: Option<f64>,
    pub attacks: Vec<AttackEval>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackEval {
    pub kind: AttackType,
    pub error: f64,
    pub ade: f64,
    pub intent_error: Option<f64>,
}

impl ModelEval {
    pub fn attack(&self, kind: AttackType) -> Option<&AttackEval> {
        self.attacks.iter().find(|a| a.kind == kind)
    }
}

pub fn evaluate_model<T: Real>(
    model: &PredictorModel<T>,
    scenes: &[Scene<T>],
    attacks: &[AttackType],
    atk_cfg: &AttackConfig,
) -> Result<ModelEval> {
    let benign = summarize(&evaluate_set(model, scenes, None)?);
    let mut out = ModelEval {
        benign_ade: benign.benign_ade,
        benign_intent_error: benign.benign_intent_error,
        attacks: Vec::with_capacity(attacks.len()),
    };
    for &kind in attacks {
        let s = summarize(&evaluate_set(model, scenes, Some((kind, atk_cfg)))?);
        out.attacks.push(AttackEval {
            kind,
            error: s.attacked_objective.unwrap_or(f64::NAN),
            ade: s.attacked_ade.unwrap_or(f64::NAN),
            intent_error: s.attacked_intent_error,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEval {
    pub method: Method,
    pub train_attack: AttackType,
    pub before: ModelEval,
    pub after: ModelEval,
}

/// Evaluates both ends of a run. An unchanged model is evaluated once.
pub fn evaluate_run<T: Real>(
    run: &RunDir<T>,
    scenes: &[Scene<T>],
    attacks: &[AttackType],
    atk_cfg: &AttackConfig,
) -> Result<RunEval> {
    let before = evaluate_model(&run.initial, scenes, attacks, atk_cfg)?;
    let after = if run.model == run.initial {
        before.clone()
    } else {
        evaluate_model(&run.model, scenes, attacks, atk_cfg)?
    };
    Ok(RunEval {
        method: run.spec.method,
        train_attack: run.spec.train_attack,
        before,
        after,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixCell {
    pub method: Method,
    pub train_attack: AttackType,
    pub eval_attack: AttackType,
    /// Runs averaged into this cell; 0 marks an absent cell.
    pub runs: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub benign_ade_before: Option<f64>,
    pub benign_ade_after: Option<f64>,
    /// Intention error under this cell's attack.
    pub intent_before: Option<f64>,
    pub intent_after: Option<f64>,
}

impl MatrixCell {
    pub fn absent(method: Method, train_attack: AttackType, eval_attack: AttackType) -> Self {
        Self {
            method,
            train_attack,
            eval_attack,
            runs: 0,
            before: None,
            after: None,
            benign_ade_before: None,
            benign_ade_after: None,
            intent_before: None,
            intent_after: None,
        }
    }

    pub fn is_present(&self) -> bool {
        self.runs > 0
    }

    pub fn is_finite(&self) -> bool {
        [self.before, self.after, self.benign_ade_before, self.benign_ade_after]
            .iter()
            .all(|v| v.is_some_and(f64::is_finite))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsMatrix {
    pub cells: Vec<MatrixCell>,
}

fn mean_opt(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for x in v {
        sum += x?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub const MATRIX_HEADER: &str = "method,train_attack,eval_attack,runs,before,after,benign_ade_before,benign_ade_after,intention_error_before,intention_error_after";

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| x.to_string())
}

fn read_opt(field: &str) -> Result<Option<f64>> {
    if field == "absent" {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("bad matrix value `{field}`")))
}

impl ResultsMatrix {
    /// One cell per requested (method, training attack) pair and evaluation
    /// attack; pairs without any run give absent cells.
    pub fn build(
        requested: &[(Method, AttackType)],
        eval_attacks: &[AttackType],
        runs: &[RunEval],
    ) -> Self {
        let mut cells = Vec::new();
        let mut keys: Vec<(Method, AttackType)> = Vec::new();
        for k in requested {
            if !keys.contains(k) {
                keys.push(*k);
            }
        }
        for &(method, train_attack) in &keys {
            let group: Vec<&RunEval> = runs
                .iter()
                .filter(|r| r.method == method && r.train_attack == train_attack)
                .collect();
            for &eval in eval_attacks {
                if group.is_empty() {
                    cells.push(MatrixCell::absent(method, train_attack, eval));
                    continue;
                }
                let pick = |e: &ModelEval| e.attack(eval).map(|a| a.error);
                let intent = |e: &ModelEval| e.attack(eval).and_then(|a| a.intent_error);
                cells.push(MatrixCell {
                    method,
                    train_attack,
                    eval_attack: eval,
                    runs: group.len(),
                    before: mean_opt(group.iter().map(|r| pick(&r.before))),
                    after: mean_opt(group.iter().map(|r| pick(&r.after))),
                    benign_ade_before: mean_opt(group.iter().map(|r| Some(r.before.benign_ade))),
                    benign_ade_after: mean_opt(group.iter().map(|r| Some(r.after.benign_ade))),
                    intent_before: mean_opt(group.iter().map(|r| intent(&r.before))),
                    intent_after: mean_opt(group.iter().map(|r| intent(&r.after))),
                });
            }
        }
        Self { cells }
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.is_present() && c.is_finite())
    }

    pub fn cell(&self, method: Method, train_attack: AttackType, eval_attack: AttackType) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.train_attack == train_attack && c.eval_attack == eval_attack)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(MATRIX_HEADER);
        s.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.train_attack,
                c.eval_attack,
                c.runs,
                show(c.before),
                show(c.after),
                show(c.benign_ade_before),
                show(c.benign_ade_after),
                show(c.intent_before),
                show(c.intent_after)
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MATRIX_HEADER) {
            return Err(Error::Config("not a results matrix file".into()));
        }
        let mut cells = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 10 {
                return Err(Error::Config(format!("matrix row has {} fields", f.len())));
            }
            cells.push(MatrixCell {
                method: f[0].parse()?,
                train_attack: f[1].parse()?,
                eval_attack: f[2].parse()?,
                runs: f[3]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad run count `{}`", f[3])))?,
                before: read_opt(f[4])?,
                after: read_opt(f[5])?,
                benign_ade_before: read_opt(f[6])?,
                benign_ade_after: read_opt(f[7])?,
                intent_before: read_opt(f[8])?,
                intent_after: read_opt(f[9])?,
            });
        }
        Ok(Self { cells })
    }

    fn rows(&self) -> Vec<(Method, AttackType)> {
        let mut rows = Vec::new();
        for c in &self.cells {
            if !rows.contains(&(c.method, c.train_attack)) {
                rows.push((c.method, c.train_attack));
            }
        }
        rows
    }

    fn evals(&self) -> Vec<AttackType> {
        let mut evals = Vec::new();
        for c in &self.cells {
            if !evals.contains(&c.eval_attack) {
                evals.push(c.eval_attack);
            }
        }
        evals
    }

    /// Markdown tables: cross-attack before → after errors, the benign
    /// trade-off, and intention error under lateral attacks.
    pub fn render_markdown(&self) -> String {
        let rows = self.rows();
        let evals = self.evals();
        let arrow = |b: Option<f64>, a: Option<f64>| match (b, a) {
            (Some(b), Some(a)) => format!("{b:.2} → {a:.2}"),
            _ => "absent".to_string(),
        };
        let num = |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |x| format!("{x:.3}"));
        let mut s = String::new();

        s.push_str("## Prediction error under attack (before → after adversarial training)\n\n");
        s.push_str("| method | trained on |");
        for e in &evals {
            let _ = write!(s, " {e} |");
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|".repeat(evals.len()));
        s.push('\n');
        for &(m, t) in &rows {
            let _ = write!(s, "| {m} | {t} |");
            for &e in &evals {
                let cell = self.cell(m, t, e);
                let _ = write!(s, " {} |", cell.map_or("absent".into(), |c| arrow(c.before, c.after)));
            }
            s.push('\n');
        }

        s.push_str("\n## Benign accuracy trade-off\n\n");
        s.push_str("| method | trained on | benign ADE before | benign ADE after |\n|---|---|---|---|\n");
        for &(m, t) in &rows {
            let c = self.cells.iter().find(|c| c.method == m && c.train_attack == t);
            let _ = writeln!(
                s,
                "| {m} | {t} | {} | {} |",
                num(c.and_then(|c| c.benign_ade_before)),
                num(c.and_then(|c| c.benign_ade_after))
            );
        }

        let lateral: Vec<AttackType> = evals
            .iter()
            .copied()
            .filter(|e| matches!(e, AttackType::Lateral(_)))
            .collect();
        let intent_evals = if lateral.is_empty() { evals.clone() } else { lateral };
        s.push_str("\n## Intention error under attack (before → after)\n\n");
        s.push_str("| method | trained on |");
        for e in &intent_evals {
            let _ = write!(s, " {e} |");
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|".repeat(intent_evals.len()));
        s.push('\n');
        for &(m, t) in &rows {
            let _ = write!(s, "| {m} | {t} |");
            for &e in &intent_evals {
                let cell = self.cell(m, t, e);
                let _ = write!(
                    s,
                    " {} |",
                    cell.map_or("absent".into(), |c| arrow(c.intent_before, c.intent_after))
                );
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(scale: f64) -> ModelEval {
        ModelEval {
            benign_ade: scale,
            benign_intent_error: Some(0.0),
            attacks: AttackType::EVAL
                .iter()
                .enumerate()
                .map(|(i, &kind)| AttackEval {
                    kind,
                    error: scale * (i + 2) as f64,
                    ade: scale * 3.0,
                    intent_error: Some(0.1 * scale),
                })
                .collect(),
        }
    }

    fn run(method: Method, before: f64, after: f64) -> RunEval {
        RunEval {
            method,
            train_attack: AttackType::Ade,
            before: eval(before),
            after: eval(after),
        }
    }

    #[test]
    fn two_methods_three_attacks_give_six_cells() {
        let runs = [run(Method::Ssat, 1.0, 0.5), run(Method::AtBaseline, 1.0, 0.7)];
        let req = [(Method::Ssat, AttackType::Ade), (Method::AtBaseline, AttackType::Ade)];
        let m = ResultsMatrix::build(&req, &AttackType::EVAL, &runs);
        assert_eq!(m.cells.len(), 6);
        assert!(m.is_complete());
        let c = m.cell(Method::Ssat, AttackType::Ade, AttackType::EVAL[1]).unwrap();
        assert_eq!((c.before, c.after), (Some(3.0), Some(1.5)));
    }

    #[test]
    fn seeds_are_averaged_and_missing_runs_are_absent() {
        let runs = [run(Method::Ssat, 1.0, 0.4), run(Method::Ssat, 1.0, 0.6)];
        let req = [(Method::Ssat, AttackType::Ade), (Method::MixupSsat, AttackType::Ade)];
        let m = ResultsMatrix::build(&req, &[AttackType::Ade], &runs);
        assert_eq!(m.cells.len(), 2);
        let ssat = m.cell(Method::Ssat, AttackType::Ade, AttackType::Ade).unwrap();
        assert_eq!(ssat.runs, 2);
        assert!((ssat.after.unwrap() - 1.0).abs() < 1e-12);
        assert!(!m.cells[1].is_present());
        assert!(!m.is_complete());
    }

    #[test]
    fn csv_round_trips() {
        let runs = [run(Method::Benign, 0.3, 0.3)];
        let req = [(Method::Benign, AttackType::Ade), (Method::Ssat, AttackType::Ade)];
        let m = ResultsMatrix::build(&req, &AttackType::EVAL, &runs);
        let back = ResultsMatrix::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        let md = back.render_markdown();
        assert!(md.contains("| benign | ade | 0.60 → 0.60 |"));
        assert!(md.contains("absent"));
    }
}
