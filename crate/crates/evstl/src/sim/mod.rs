//! Scenario ingestion, the sampled execution loop, and run persistence.
//!
//! A scenario is one JSON document: robots, dynamics, predicate and event
//! declarations, the specification text, and an event source. Compiling it
//! yields the controlled propositions, the automaton, and the a-priori
//! feedback; running it executes plan/control/integrate per sample and
//! produces a replayable log.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abstraction::{abstract_spec, Abstraction, ControlledProp};
use crate::buchi::{translate, translate_with_cap, BuchiAutomaton, TranslateError};
use crate::controller::{Controller, Dynamics, RobotSpec};
use crate::feedback::{
    apriori_conflicts, apriori_inadmissible_env, report_infeasible, runtime_check,
    ConflictReport, FeedbackError, FeedbackEvent, FeedbackKind, Severity,
};
use crate::formula::{
    parse, Declarations, ParseError, Predicate, PredicateFunction, StlFormula, Trace,
};
use crate::planner::{PlanError, Planner};

/// Default cap on enumerated environment assignments per state.
pub const ENV_ENUM_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDecl {
    pub name: String,
    pub dims: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Where the event letter comes from: a scripted list of changepoints
/// (each replaces the whole set and latches until the next), or a live
/// client driving the loop through the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventSource {
    Scripted {
        changepoints: Vec<(f64, BTreeSet<String>)>,
    },
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub robots: Vec<RobotDecl>,
    pub initial_state: Vec<f64>,
    /// Constant drift; omitted means zero (holonomic integrators).
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    pub dt: f64,
    pub horizon: f64,
    pub predicates: BTreeMap<String, PredicateFunction>,
    #[serde(default)]
    pub events: BTreeSet<String>,
    pub formula: String,
    pub event_source: EventSource,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("scenario invalid: {0}")]
    Scenario(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("initial state and events violate the specification: {0}")]
    InitialState(String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CompileError> {
        serde_json::from_str(text).map_err(|e| CompileError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CompileError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn declarations(&self) -> Declarations {
        Declarations {
            predicates: self
                .predicates
                .iter()
                .map(|(name, func)| {
                    (
                        name.clone(),
                        Predicate {
                            name: name.clone(),
                            func: func.clone(),
                        },
                    )
                })
                .collect(),
            events: self.events.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.initial_state.len()
    }

    fn validate(&self) -> Result<(), CompileError> {
        let fail = |msg: String| Err(CompileError::Scenario(msg));
        if self.robots.is_empty() {
            return fail("no robots declared".into());
        }
        if !(self.dt > 0.0) {
            return fail("dt must be positive".into());
        }
        if self.horizon < 0.0 {
            return fail("horizon must be nonnegative".into());
        }
        let dim = self.dim();
        let mut owned = vec![false; dim];
        for r in &self.robots {
            if r.dims.len() != r.lower.len() || r.dims.len() != r.upper.len() {
                return fail(format!("robot {}: bounds do not match dims", r.name));
            }
            for (&d, (&lo, &hi)) in r.dims.iter().zip(r.lower.iter().zip(r.upper.iter())) {
                if d >= dim {
                    return fail(format!("robot {}: dim {d} outside the state", r.name));
                }
                if owned[d] {
                    return fail(format!("dim {d} assigned to two robots"));
                }
                owned[d] = true;
                if lo > 0.0 || hi < 0.0 {
                    return fail(format!("robot {}: zero control must be admissible", r.name));
                }
            }
        }
        if let Some(drift) = &self.drift {
            if drift.len() != dim {
                return fail("drift length does not match the state".into());
            }
        }
        for (name, func) in &self.predicates {
            for d in (Predicate {
                name: name.clone(),
                func: func.clone(),
            })
            .func
            .dims()
            {
                if d >= dim {
                    return fail(format!("predicate {name}: dim {d} outside the state"));
                }
            }
        }
        if let EventSource::Scripted { changepoints } = &self.event_source {
            for (t, set) in changepoints {
                if *t < 0.0 {
                    return fail("changepoint before t=0".into());
                }
                for e in set {
                    if !self.events.contains(e) {
                        return fail(format!("changepoint uses undeclared event {e}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Event letter at time t under a scripted source; empty set before the
    /// first changepoint and under an interactive source.
    pub fn scripted_events(&self, t: f64) -> BTreeSet<String> {
        match &self.event_source {
            EventSource::Scripted { changepoints } => {
                let mut current = BTreeSet::new();
                let mut best = f64::NEG_INFINITY;
                for (tc, set) in changepoints {
                    if *tc <= t + 1e-9 && *tc >= best {
                        best = *tc;
                        current = set.clone();
                    }
                }
                current
            }
            EventSource::Interactive => BTreeSet::new(),
        }
    }

    /// Per-state-dim maximum speed, for reachability budgets.
    pub fn u_max(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for r in &self.robots {
            for (k, &d) in r.dims.iter().enumerate() {
                out[d] = r.upper[k].max(-r.lower[k]);
            }
        }
        out
    }

    pub fn robot_specs(&self) -> Vec<RobotSpec> {
        self.robots
            .iter()
            .map(|r| RobotSpec {
                dims: r.dims.clone(),
                lower: r.lower.clone(),
                upper: r.upper.clone(),
            })
            .collect()
    }

    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            dim: self.dim(),
            drift: self
                .drift
                .clone()
                .unwrap_or_else(|| vec![0.0; self.dim()]),
        }
    }
}

/// Everything derivable from the scenario before execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSpec {
    pub formula: StlFormula,
    pub abstraction: Abstraction,
    pub automaton: BuchiAutomaton,
    pub conflicts: ConflictReport,
    pub inadmissible_env: Vec<FeedbackEvent>,
}

impl CompiledSpec {
    pub fn props_by_name(&self) -> BTreeMap<String, ControlledProp> {
        self.abstraction
            .props
            .iter()
            .map(|p| (p.name.clone(), p.clone()))
            .collect()
    }

    pub fn warnings(&self) -> Vec<FeedbackEvent> {
        let mut out = self.conflicts.conflicts.clone();
        out.extend(self.inadmissible_env.iter().cloned());
        out
    }
}

pub fn compile(scenario: &Scenario) -> Result<CompiledSpec, CompileError> {
    compile_with_cap(scenario, crate::buchi::DEFAULT_STATE_CAP)
}

pub fn compile_with_cap(
    scenario: &Scenario,
    state_cap: usize,
) -> Result<CompiledSpec, CompileError> {
    scenario.validate()?;
    let decls = scenario.declarations();
    let formula = parse(&scenario.formula, &decls)?;
    let abstraction = abstract_spec(&formula, &scenario.events);
    for prop in &abstraction.props {
        for bound in [Some(prop.interval.a), prop.interval.finite_b()] {
            let Some(v) = bound else { continue };
            let steps = v / scenario.dt;
            if (steps - steps.round()).abs() > 1e-6 {
                return Err(CompileError::Scenario(format!(
                    "interval bound {v} of {} is not a multiple of dt={}",
                    prop.name, scenario.dt
                )));
            }
        }
    }
    let automaton = if state_cap == crate::buchi::DEFAULT_STATE_CAP {
        translate(&abstraction.ltl)?
    } else {
        translate_with_cap(&abstraction.ltl, state_cap)?
    };
    let props = abstraction
        .props
        .iter()
        .map(|p| (p.name.clone(), p.clone()))
        .collect();
    let conflicts = apriori_conflicts(&automaton, &scenario.events, &props);
    let inadmissible_env = apriori_inadmissible_env(&automaton, &scenario.events, ENV_ENUM_CAP)?;
    // The paper assumes execution starts unviolated; surface a broken
    // start as a compile error rather than a mid-run surprise. Two checks:
    // the planner must find an admissible initial plan, and some outgoing
    // label of the initial state must already hold under (x0, sigma0), so
    // invariants the start position breaks are caught here.
    let sigma0 = scenario.scripted_events(0.0);
    Planner::new(
        automaton.clone(),
        scenario.events.clone(),
        abstraction.props.clone(),
        &sigma0,
    )
    .map_err(|e| CompileError::InitialState(e.to_string()))?;
    let truth = |name: &str| -> bool {
        if scenario.events.contains(name) {
            return sigma0.contains(name);
        }
        props
            .get(name)
            .map(|p: &ControlledProp| {
                crate::formula::eval_h(&p.literal, &scenario.initial_state) >= 0.0
            })
            .unwrap_or(false)
    };
    if !automaton.transitions[automaton.initial]
        .iter()
        .any(|(label, _)| label.eval(&truth))
    {
        return Err(CompileError::InitialState(
            "no transition of the initial automaton state holds at t=0".to_string(),
        ));
    }
    Ok(CompiledSpec {
        formula,
        abstraction,
        automaton,
        conflicts,
        inadmissible_env,
    })
}

/// One sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub sigma: Vec<String>,
    pub state: String,
    pub active_props: Vec<String>,
    /// Per-robot control actually applied over [t, t+dt).
    pub u: Vec<Vec<f64>>,
    /// Per-robot combined barrier value; null when unconstrained.
    pub cbf: Vec<Option<f64>>,
    pub feedback: Vec<FeedbackEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    HorizonReachedAccepting,
    HorizonReachedNonaccepting,
    StoppedFatal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub scenario: String,
    pub dt: f64,
    pub records: Vec<SampleRecord>,
    pub status: TerminalStatus,
}

impl RunLog {
    /// The sampled signal this run produced, for the monitor.
    pub fn trace(&self) -> Trace {
        Trace {
            dt: self.dt,
            states: self.records.iter().map(|r| r.x.clone()).collect(),
            events: self
                .records
                .iter()
                .map(|r| r.sigma.iter().cloned().collect())
                .collect(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out.push_str(
            &serde_json::to_string(&serde_json::json!({
                "scenario": self.scenario,
                "dt": self.dt,
                "terminal": self.status,
            }))
            .expect("trailer serializes"),
        );
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Trailer {
            scenario: String,
            dt: f64,
            terminal: TerminalStatus,
        }
        let mut records = Vec::new();
        let mut trailer: Option<Trailer> = None;
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            if line.contains("\"terminal\"") {
                trailer = Some(serde_json::from_str(line)?);
            } else {
                records.push(serde_json::from_str(line)?);
            }
        }
        let trailer = trailer.ok_or_else(|| {
            serde::de::Error::custom("run log has no terminal trailer line")
        })?;
        Ok(RunLog {
            scenario: trailer.scenario,
            dt: trailer.dt,
            records,
            status: trailer.terminal,
        })
    }

    /// Long-format trajectory table: `t,robot,dim,value`.
    pub fn to_csv(&self, scenario: &Scenario) -> String {
        let mut out = String::from("t,robot,dim,value\n");
        for rec in &self.records {
            for (ri, robot) in scenario.robots.iter().enumerate() {
                for &d in &robot.dims {
                    out.push_str(&format!("{},{ri},{d},{}\n", rec.t, rec.x[d]));
                }
            }
        }
        out
    }

    pub fn fatal_events(&self) -> Vec<&FeedbackEvent> {
        self.records
            .iter()
            .flat_map(|r| r.feedback.iter())
            .filter(|f| f.severity == Severity::Fatal)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("scenario declares an interactive event source; use the service")]
    InteractiveSource,
    #[error("planner rejected the initial configuration: {0}")]
    InitialState(#[from] PlanError),
}

pub fn run(compiled: &CompiledSpec, scenario: &Scenario) -> Result<RunLog, RunError> {
    if matches!(scenario.event_source, EventSource::Interactive) {
        return Err(RunError::InteractiveSource);
    }
    run_with_events(compiled, scenario, |t, _k| scenario.scripted_events(t))
}

/// The sampled main loop. `events_at(t, k)` supplies the environment
/// letter for sample k; the sim owns everything else. Fatal feedback stops
/// the run at the sample it occurred.
pub fn run_with_events(
    compiled: &CompiledSpec,
    scenario: &Scenario,
    mut events_at: impl FnMut(f64, usize) -> BTreeSet<String>,
) -> Result<RunLog, RunError> {
    let sigma0 = events_at(0.0, 0);
    let mut session = SimSession::new(compiled, scenario, &sigma0)?;
    while !session.finished() {
        let sigma = if session.sample() == 0 {
            sigma0.clone()
        } else {
            events_at(session.time(), session.sample())
        };
        session.step(&sigma);
    }
    Ok(session.into_log())
}

/// One execution, advanced a sample at a time. Per step: re-plan against
/// the current event letter, sync barriers, screen reachability, solve the
/// per-robot QPs, record, integrate. The scripted runner and the live
/// service both drive the loop through this, so they cannot diverge.
pub struct SimSession<'a> {
    compiled: &'a CompiledSpec,
    scenario: &'a Scenario,
    planner: Planner,
    controller: Controller,
    props: BTreeMap<String, ControlledProp>,
    u_max: Vec<f64>,
    steps: usize,
    k: usize,
    x: Vec<f64>,
    records: Vec<SampleRecord>,
    fatal: bool,
}

impl<'a> SimSession<'a> {
    pub fn new(
        compiled: &'a CompiledSpec,
        scenario: &'a Scenario,
        sigma0: &BTreeSet<String>,
    ) -> Result<Self, RunError> {
        let planner = Planner::new(
            compiled.automaton.clone(),
            scenario.events.clone(),
            compiled.abstraction.props.clone(),
            sigma0,
        )?;
        let controller = Controller::new(scenario.robot_specs(), scenario.dynamics(), 1.0);
        let steps = (scenario.horizon / scenario.dt).round() as usize;
        Ok(SimSession {
            compiled,
            scenario,
            planner,
            controller,
            props: compiled.props_by_name(),
            u_max: scenario.u_max(),
            steps,
            k: 0,
            x: scenario.initial_state.clone(),
            records: Vec::with_capacity(steps + 1),
            fatal: false,
        })
    }

    /// Index of the next sample to execute.
    pub fn sample(&self) -> usize {
        self.k
    }

    /// Simulation time of the next sample.
    pub fn time(&self) -> f64 {
        self.k as f64 * self.scenario.dt
    }

    pub fn finished(&self) -> bool {
        self.fatal || self.k > self.steps
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn last_record(&self) -> Option<&SampleRecord> {
        self.records.last()
    }

    /// Safe-set circles for the currently active goal barriers.
    pub fn safe_sets(&self) -> Vec<SafeSetCircle> {
        safe_sets(&self.controller, self.records.last().map_or(0.0, |r| r.t))
    }

    /// Executes one sample under the given event letter and returns its
    /// record. Must not be called after `finished()` turns true.
    pub fn step(&mut self, sigma: &BTreeSet<String>) -> &SampleRecord {
        assert!(!self.finished(), "step on a finished session");
        let t = self.time();
        let mut feedback: Vec<FeedbackEvent> = Vec::new();

        if let Err(e) = self.planner.step(&self.x, sigma) {
            feedback.push(FeedbackEvent {
                kind: FeedbackKind::InadmissibleEnv,
                location: format!("t={t:.3}"),
                detail: e.to_string(),
                severity: Severity::Fatal,
            });
        }
        let active: BTreeSet<String> = self.planner.active().active_props.clone();
        self.controller.sync(&active, &self.props, t, &self.x);
        feedback.extend(runtime_check(
            self.controller.registry().instances(),
            &self.x,
            t,
            &self.u_max,
        ));

        let mut u: Vec<Vec<f64>> = self
            .scenario
            .robots
            .iter()
            .map(|r| vec![0.0; r.dims.len()])
            .collect();
        if feedback.iter().all(|f| f.severity != Severity::Fatal) {
            match self.controller.control_all(t, &self.x) {
                Ok(controls) => u = controls,
                Err(e) => feedback.push(report_infeasible(&e)),
            }
        }
        self.fatal = feedback.iter().any(|f| f.severity == Severity::Fatal);

        self.records.push(SampleRecord {
            t,
            x: self.x.clone(),
            sigma: sigma.iter().cloned().collect(),
            state: self
                .compiled
                .automaton
                .state_name(self.planner.current_state()),
            active_props: active.iter().cloned().collect(),
            u: u.clone(),
            cbf: (0..self.scenario.robots.len())
                .map(|i| self.controller.combined_value(i, t, &self.x))
                .collect(),
            feedback,
        });
        if !self.fatal && self.k < self.steps {
            let drift = &self.controller.dynamics.drift;
            for (ri, robot) in self.scenario.robots.iter().enumerate() {
                for (j, &d) in robot.dims.iter().enumerate() {
                    self.x[d] += self.scenario.dt * (drift[d] + u[ri][j]);
                }
            }
        }
        self.k += 1;
        self.records.last().expect("record just pushed")
    }

    /// Terminal verdict as of now; meaningful once `finished()`.
    pub fn status(&self) -> TerminalStatus {
        if self.fatal {
            TerminalStatus::StoppedFatal
        } else if self
            .compiled
            .automaton
            .states_on_accepting_cycles()
            .contains(self.planner.current_state())
        {
            TerminalStatus::HorizonReachedAccepting
        } else {
            TerminalStatus::HorizonReachedNonaccepting
        }
    }

    pub fn into_log(self) -> RunLog {
        let status = self.status();
        RunLog {
            scenario: self.scenario.name.clone(),
            dt: self.scenario.dt,
            records: self.records,
            status,
        }
    }
}

/// A circular safe-set boundary for display: the ball the robot must be
/// inside right now to still meet a goal barrier on schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSetCircle {
    pub prop: String,
    pub dims: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Safe-set circles for the in-window goal barriers over ball predicates.
/// The template keeps `h >= h_int * (1 - tau)` with tau the window
/// fraction, so for `h = r - |x - c|` the admissible radius is
/// `r - h_int * (1 - tau)`: it starts at the activation distance and
/// shrinks linearly to r.
pub fn safe_sets(controller: &Controller, t: f64) -> Vec<SafeSetCircle> {
    let mut out = Vec::new();
    for inst in controller.registry().instances() {
        if !inst.is_goal() || !inst.in_window(t) || inst.literal.negated {
            continue;
        }
        let PredicateFunction::SphereInner {
            dims,
            center,
            radius,
        } = &inst.literal.pred.func
        else {
            continue;
        };
        let (a, b) = (inst.interval.a, inst.interval.b);
        let tau = if b > a {
            ((t - inst.t_int - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        out.push(SafeSetCircle {
            prop: inst.prop.clone(),
            dims: dims.clone(),
            center: center.clone(),
            radius: radius - inst.h_int * (1.0 - tau),
        });
    }
    out
}

/// Compiled artifact persisted beside the scenario, keyed by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub scenario_hash: String,
    pub compiled: CompiledSpec,
}

pub fn content_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn artifact_path(scenario_path: &Path) -> PathBuf {
    scenario_path.with_extension("artifact.json")
}

/// Loads the cached artifact when its hash matches the scenario text,
/// otherwise compiles and refreshes the cache. Cache write failures are
/// ignored: the artifact is an accelerator, not a dependency.
pub fn compile_cached(scenario_path: &Path) -> Result<(Scenario, CompiledSpec), CompileError> {
    let text = std::fs::read_to_string(scenario_path)
        .map_err(|e| CompileError::Scenario(format!("{}: {e}", scenario_path.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let hash = content_hash(&text);
    let cache = artifact_path(scenario_path);
    if let Ok(cached) = std::fs::read_to_string(&cache) {
        if let Ok(artifact) = serde_json::from_str::<Artifact>(&cached) {
            if artifact.scenario_hash == hash {
                return Ok((scenario, artifact.compiled));
            }
        }
    }
    let compiled = compile(&scenario)?;
    let artifact = Artifact {
        scenario_hash: hash,
        compiled: compiled.clone(),
    };
    if let Ok(json) = serde_json::to_string_pretty(&artifact) {
        let _ = std::fs::write(&cache, json);
    }
    Ok((scenario, compiled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{monitor, Verdict};

    fn single_robot_scenario() -> Scenario {
        Scenario {
            name: "single".to_string(),
            robots: vec![RobotDecl {
                name: "r1".to_string(),
                dims: vec![0, 1],
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
            }],
            initial_state: vec![0.0, 0.0],
            drift: None,
            dt: 0.1,
            horizon: 20.0,
            predicates: BTreeMap::from([(
                "near55".to_string(),
                PredicateFunction::SphereInner {
                    dims: vec![0, 1],
                    center: vec![5.0, 5.0],
                    radius: 1.0,
                },
            )]),
            events: BTreeSet::from(["alarm".to_string()]),
            formula: "G(alarm -> F[0,10](near55))".to_string(),
            event_source: EventSource::Scripted {
                changepoints: vec![(2.0, BTreeSet::from(["alarm".to_string()]))],
            },
        }
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let s = single_robot_scenario();
        let json = serde_json::to_string_pretty(&s).unwrap();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn compile_produces_one_template_and_feedback() {
        let s = single_robot_scenario();
        let compiled = compile(&s).unwrap();
        assert_eq!(compiled.abstraction.props.len(), 1);
        assert_eq!(compiled.abstraction.props[0].interval.a, 0.0);
        assert_eq!(compiled.abstraction.props[0].interval.b, 10.0);
        assert!(compiled.conflicts.conflicts.is_empty());
        assert!(compiled.inadmissible_env.is_empty());
    }

    #[test]
    fn alarm_run_reaches_the_ball_in_time() {
        let s = single_robot_scenario();
        let compiled = compile(&s).unwrap();
        let log = run(&compiled, &s).unwrap();
        assert_eq!(log.status, TerminalStatus::HorizonReachedAccepting);
        // h_near55 >= 0 at some sample within [2, 12].
        let hit = log.records.iter().any(|r| {
            r.t >= 2.0
                && r.t <= 12.0
                && (1.0 - ((r.x[0] - 5.0).powi(2) + (r.x[1] - 5.0).powi(2)).sqrt()) >= 0.0
        });
        assert!(hit, "goal ball never reached in the alarm window");
        // Forward invariance of the combined barrier while feasible.
        for rec in &log.records {
            if let Some(v) = rec.cbf[0] {
                assert!(v >= -1e-3, "barrier dipped to {v} at t={}", rec.t);
            }
        }
        // Monitor agreement on the completed run.
        let decls = s.declarations();
        let spec = parse(&s.formula, &decls).unwrap();
        assert_eq!(monitor(&log.trace(), &spec), Verdict::Satisfied);
    }

    #[test]
    fn quiet_run_never_moves_and_accepts() {
        let mut s = single_robot_scenario();
        s.event_source = EventSource::Scripted {
            changepoints: vec![],
        };
        let compiled = compile(&s).unwrap();
        let log = run(&compiled, &s).unwrap();
        assert_eq!(log.status, TerminalStatus::HorizonReachedAccepting);
        for rec in &log.records {
            assert_eq!(rec.x, vec![0.0, 0.0]);
            assert!(rec.active_props.is_empty());
        }
    }

    #[test]
    fn unreachable_goal_stops_fatally_and_monitor_rejects_extension() {
        let mut s = single_robot_scenario();
        s.name = "unreachable".to_string();
        s.horizon = 15.0;
        s.robots[0].lower = vec![-0.7, -0.7];
        s.robots[0].upper = vec![0.7, 0.7];
        s.predicates.insert(
            "far".to_string(),
            PredicateFunction::SphereInner {
                dims: vec![0, 1],
                center: vec![20.0, 20.0],
                radius: 1.0,
            },
        );
        s.formula = "F[0,10](far)".to_string();
        s.event_source = EventSource::Scripted {
            changepoints: vec![],
        };
        let compiled = compile(&s).unwrap();
        let log = run(&compiled, &s).unwrap();
        assert_eq!(log.status, TerminalStatus::StoppedFatal);
        let fatals = log.fatal_events();
        assert!(fatals
            .iter()
            .any(|f| f.kind == FeedbackKind::Unreachable));

        // Extend by zero control to the horizon: the spec is violated.
        let mut trace = log.trace();
        let steps = (s.horizon / s.dt).round() as usize;
        while trace.states.len() <= steps {
            trace.states.push(trace.states.last().unwrap().clone());
            trace.events.push(BTreeSet::new());
        }
        let decls = s.declarations();
        let spec = parse(&s.formula, &decls).unwrap();
        assert!(matches!(
            monitor(&trace, &spec),
            Verdict::Violated { .. }
        ));
    }

    #[test]
    fn run_log_round_trips_jsonl_and_csv_shape() {
        let s = single_robot_scenario();
        let compiled = compile(&s).unwrap();
        let log = run(&compiled, &s).unwrap();
        let jsonl = log.to_jsonl();
        let back = RunLog::from_jsonl(&jsonl).unwrap();
        assert_eq!(log, back);

        let csv = log.to_csv(&s);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,robot,dim,value"));
        // one row per robot dim per sample
        assert_eq!(csv.lines().count(), 1 + log.records.len() * 2);
        let first = lines.next().unwrap();
        assert_eq!(first, "0,0,0,0");
    }

    #[test]
    fn artifact_cache_hits_and_invalidates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("single.json");
        let s = single_robot_scenario();
        std::fs::write(&path, serde_json::to_string_pretty(&s).unwrap()).unwrap();

        let (_, first) = compile_cached(&path).unwrap();
        let cache = artifact_path(&path);
        assert!(cache.exists());
        // Poison the cached automaton; a hash hit must return it verbatim.
        let mut artifact: Artifact =
            serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
        artifact.compiled.automaton.aps.insert("poisoned".to_string());
        std::fs::write(&cache, serde_json::to_string(&artifact).unwrap()).unwrap();
        let (_, cached) = compile_cached(&path).unwrap();
        assert!(cached.automaton.aps.contains("poisoned"));

        // Touch the scenario: the stale cache is discarded and rebuilt.
        let mut s2 = s.clone();
        s2.horizon = 21.0;
        std::fs::write(&path, serde_json::to_string_pretty(&s2).unwrap()).unwrap();
        let (_, rebuilt) = compile_cached(&path).unwrap();
        assert_eq!(rebuilt, first);
        let refreshed: Artifact =
            serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
        assert!(!refreshed.compiled.automaton.aps.contains("poisoned"));
    }

    #[test]
    fn safe_set_circle_shrinks_to_the_predicate_ball() {
        let s = single_robot_scenario();
        let compiled = compile(&s).unwrap();
        let props = compiled.props_by_name();
        let mut controller = Controller::new(s.robot_specs(), s.dynamics(), 1.0);
        let active: BTreeSet<String> = props.keys().cloned().collect();
        let x = [2.0, 2.0];
        controller.sync(&active, &props, 2.0, &x);
        // At activation the circle passes through the robot.
        let circles = safe_sets(&controller, 2.0);
        assert_eq!(circles.len(), 1);
        let d0 = ((2.0f64 - 5.0).powi(2) + (2.0f64 - 5.0).powi(2)).sqrt();
        assert!((circles[0].radius - d0).abs() < 1e-9);
        // At the deadline it equals the predicate radius.
        let circles = safe_sets(&controller, 12.0);
        assert!((circles[0].radius - 1.0).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_broken_scenarios() {
        let mut s = single_robot_scenario();
        s.dt = 0.0;
        assert!(matches!(compile(&s), Err(CompileError::Scenario(_))));

        let mut s = single_robot_scenario();
        s.robots[0].dims = vec![0, 5];
        assert!(matches!(compile(&s), Err(CompileError::Scenario(_))));

        let mut s = single_robot_scenario();
        s.formula = "G(alarm -> F[0,10](nosuch))".to_string();
        assert!(matches!(compile(&s), Err(CompileError::Parse(_))));

        // Interval not a dt multiple.
        let mut s = single_robot_scenario();
        s.formula = "G(alarm -> F[0,10.05](near55))".to_string();
        assert!(matches!(compile(&s), Err(CompileError::Scenario(_))));

        // Initial state violating an invariant is rejected up front: the
        // robot starts inside the region it must stay out of.
        let mut s = single_robot_scenario();
        s.predicates.insert(
            "away".to_string(),
            PredicateFunction::SphereOuter {
                dims: vec![0, 1],
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
        );
        s.formula = "G[0,15](away)".to_string();
        s.event_source = EventSource::Scripted {
            changepoints: vec![],
        };
        assert!(matches!(compile(&s), Err(CompileError::InitialState(_))));
    }
}
