//! Jig finite-state machines: definitions, compiled runtimes, the
//! state-mismatch command law, and the text definition format.
//!
//! A jig is a lab fixture with a small set of named discrete states, driven
//! by named commands and optional return timers. Most jigs are plain
//! deterministic FSMs. The pipette plunger is special: its demonstrated
//! cycle visits `released` twice per loop with the same command, so the
//! runtime tracks an internal phase index along the declared command chain
//! while comparisons only ever see the visible state names.

mod dsl;

pub use dsl::{parse_jig_definition, parse_jig_definitions};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::model::JigStateVector;

/// Text with the builtin jig definitions; `builtin_jigs` parses this.
pub const BUILTIN_JIG_DSL: &str = include_str!("builtin.dsl");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JigError {
    #[error("jig definition parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid name {name:?}: names are non-empty [a-z0-9_]+")]
    InvalidName { name: String },
    #[error("jig {jig}: unknown state {state:?}")]
    UnknownState { jig: String, state: String },
    #[error("jig {jig}: unknown command {command:?}")]
    UnknownCommand { jig: String, command: String },
    #[error("jig {jig}: nondeterministic (state, command) pair ({state}, {command})")]
    Nondeterministic {
        jig: String,
        state: String,
        command: String,
    },
    #[error(
        "jig {jig}: duplicated (state, command) pairs must form one closed command \
         chain from the initial state, in declaration order"
    )]
    UnresolvableCycle { jig: String },
    #[error("jig {jig}: timer transitions are not supported in cycle-form definitions")]
    CycleWithTimer { jig: String },
    #[error("jig {jig}: state {state} declares more than one timer transition")]
    DuplicateTimer { jig: String, state: String },
    #[error("jig {jig}: timer delay {delay} must be a positive finite number of seconds")]
    NonPositiveTimer { jig: String, delay: f64 },
    #[error(
        "jig {jig}: target {target} is reachable from {from} by more than one \
         command ({commands:?}); the advancing command must be unique"
    )]
    AmbiguousTarget {
        jig: String,
        from: String,
        target: String,
        commands: Vec<String>,
    },
    #[error("jig {jig}: missing {section} section")]
    MissingSection { jig: String, section: String },
    #[error("duplicate jig id {id:?}")]
    DuplicateJig { id: String },
    #[error("unknown jig id {id:?}")]
    UnknownJig { id: String },
    #[error("jig id sets differ: demonstration has {demo:?}, current has {current:?}")]
    MismatchedJigSets {
        demo: Vec<String>,
        current: Vec<String>,
    },
}

/// What causes a transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    Command(String),
    /// Fires automatically this many seconds after the source state is
    /// entered.
    Timer(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRule {
    pub from: String,
    pub trigger: Trigger,
    pub to: String,
}

/// Declarative jig description, as parsed from the definition format.
#[derive(Debug, Clone, PartialEq)]
pub struct JigDefinition {
    pub id: String,
    pub states: Vec<String>,
    pub initial: String,
    pub commands: Vec<String>,
    pub transitions: Vec<TransitionRule>,
}

/// How a mismatched jig converges onto a demonstrated target state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Advance {
    /// States already equal.
    Match,
    /// A timer alone will get there; issue nothing.
    Wait,
    /// Issue this command (index into `command_names`).
    Command(usize),
    /// No command or timer path exists.
    Unreachable,
}

#[derive(Debug, Clone)]
struct Phase {
    visible: usize,
    on_command: BTreeMap<usize, usize>,
    timer: Option<(f64, usize)>,
}

/// Validated, executable form of a definition. Phases coincide with states
/// for plain FSMs; cycle-form definitions get one phase per chain link.
#[derive(Debug)]
pub(crate) struct PhaseGraph {
    jig_id: String,
    state_names: Vec<String>,
    command_names: Vec<String>,
    phases: Vec<Phase>,
    initial_phase: usize,
    /// `advance[current_visible][target_visible]`, resolved at compile time.
    advance: Vec<Vec<Advance>>,
}

impl PhaseGraph {
    fn state_index(&self, name: &str) -> Result<usize, JigError> {
        self.state_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| JigError::UnknownState {
                jig: self.jig_id.clone(),
                state: name.to_string(),
            })
    }

    fn command_index(&self, name: &str) -> Result<usize, JigError> {
        self.command_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| JigError::UnknownCommand {
                jig: self.jig_id.clone(),
                command: name.to_string(),
            })
    }
}

fn check_name(name: &str) -> Result<(), JigError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(JigError::InvalidName {
            name: name.to_string(),
        })
    }
}

/// Validates a definition and compiles its phase graph and advance table.
fn compile(def: &JigDefinition) -> Result<PhaseGraph, JigError> {
    let jig = def.id.clone();
    check_name(&def.id)?;
    if def.states.is_empty() {
        return Err(JigError::MissingSection {
            jig,
            section: "states".into(),
        });
    }
    for name in def.states.iter().chain(def.commands.iter()) {
        check_name(name)?;
    }
    let mut seen = BTreeSet::new();
    for s in &def.states {
        if !seen.insert(s) {
            return Err(JigError::Nondeterministic {
                jig,
                state: s.clone(),
                command: "<duplicate state>".into(),
            });
        }
    }
    let state_idx = |name: &str| -> Result<usize, JigError> {
        def.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| JigError::UnknownState {
                jig: def.id.clone(),
                state: name.to_string(),
            })
    };
    let command_idx = |name: &str| -> Result<usize, JigError> {
        def.commands
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| JigError::UnknownCommand {
                jig: def.id.clone(),
                command: name.to_string(),
            })
    };
    let initial = state_idx(&def.initial)?;

    // Split and resolve transition rules.
    let mut command_rules: Vec<(usize, usize, usize)> = Vec::new(); // (from, cmd, to)
    let mut timer_rules: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for rule in &def.transitions {
        let from = state_idx(&rule.from)?;
        let to = state_idx(&rule.to)?;
        match &rule.trigger {
            Trigger::Command(c) => command_rules.push((from, command_idx(c)?, to)),
            Trigger::Timer(delay) => {
                if !(delay.is_finite() && *delay > 0.0) {
                    return Err(JigError::NonPositiveTimer { jig, delay: *delay });
                }
                if timer_rules.insert(from, (*delay, to)).is_some() {
                    return Err(JigError::DuplicateTimer {
                        jig,
                        state: def.states[from].clone(),
                    });
                }
            }
        }
    }

    let mut pair_counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (from, cmd, _) in &command_rules {
        *pair_counts.entry((*from, *cmd)).or_insert(0) += 1;
    }
    let has_duplicates = pair_counts.values().any(|&c| c > 1);

    let phases = if !has_duplicates {
        // Plain deterministic FSM: one phase per state.
        (0..def.states.len())
            .map(|s| Phase {
                visible: s,
                on_command: command_rules
                    .iter()
                    .filter(|(from, _, _)| *from == s)
                    .map(|(_, cmd, to)| (*cmd, *to))
                    .collect(),
                timer: timer_rules.get(&s).copied(),
            })
            .collect::<Vec<_>>()
    } else {
        // Cycle form: the whole command list must chain through the initial
        // state, in declaration order, and close back on it.
        if !timer_rules.is_empty() {
            return Err(JigError::CycleWithTimer { jig });
        }
        if command_rules.is_empty() || command_rules[0].0 != initial {
            return Err(JigError::UnresolvableCycle { jig });
        }
        let n = command_rules.len();
        for k in 0..n {
            let (_, _, to) = command_rules[k];
            let next_from = if k + 1 < n {
                command_rules[k + 1].0
            } else {
                initial
            };
            if to != next_from {
                return Err(JigError::UnresolvableCycle { jig });
            }
        }
        (0..n)
            .map(|k| Phase {
                visible: command_rules[k].0,
                on_command: BTreeMap::from([(command_rules[k].1, (k + 1) % n)]),
                timer: None,
            })
            .collect()
    };

    let initial_phase = if has_duplicates {
        0 // cycle form starts at the head of the chain, which is `initial`
    } else {
        initial
    };

    let mut graph = PhaseGraph {
        jig_id: def.id.clone(),
        state_names: def.states.clone(),
        command_names: def.commands.clone(),
        phases,
        initial_phase,
        advance: Vec::new(),
    };
    graph.advance = build_advance_table(&graph, &def.id)?;
    Ok(graph)
}

/// Resolves, per (visible state, target state), what the mismatch law should
/// do. Ambiguity here is a definition error, so the runtime law is a lookup.
fn build_advance_table(graph: &PhaseGraph, jig: &str) -> Result<Vec<Vec<Advance>>, JigError> {
    let n_states = graph.state_names.len();
    let mut table = vec![vec![None::<Advance>; n_states]; n_states];

    for phase_idx in 0..graph.phases.len() {
        let visible = graph.phases[phase_idx].visible;
        let auto = timer_closure(graph, phase_idx);
        for target in 0..n_states {
            let action = if target == visible {
                Advance::Match
            } else if auto.contains(&target) {
                Advance::Wait
            } else {
                let mut candidates: Vec<usize> = Vec::new();
                for (&cmd, &next) in &graph.phases[phase_idx].on_command {
                    if full_closure(graph, next).contains(&target) {
                        candidates.push(cmd);
                    }
                }
                match candidates.len() {
                    0 => Advance::Unreachable,
                    1 => Advance::Command(candidates[0]),
                    _ => {
                        return Err(JigError::AmbiguousTarget {
                            jig: jig.to_string(),
                            from: graph.state_names[visible].clone(),
                            target: graph.state_names[target].clone(),
                            commands: candidates
                                .iter()
                                .map(|&c| graph.command_names[c].clone())
                                .collect(),
                        })
                    }
                }
            };
            // Phases sharing a visible state must agree, otherwise the law
            // (which only sees visible states) would be ambiguous.
            match &table[visible][target] {
                None => table[visible][target] = Some(action),
                Some(prev) if *prev == action => {}
                Some(_) => {
                    return Err(JigError::AmbiguousTarget {
                        jig: jig.to_string(),
                        from: graph.state_names[visible].clone(),
                        target: graph.state_names[target].clone(),
                        commands: vec!["<phase-dependent>".into()],
                    })
                }
            }
        }
    }

    Ok(table
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|a| a.unwrap_or(Advance::Unreachable))
                .collect()
        })
        .collect())
}

/// Visible states reachable from `phase` by timers alone (inclusive).
fn timer_closure(graph: &PhaseGraph, phase: usize) -> BTreeSet<usize> {
    let mut seen_phases = BTreeSet::new();
    let mut out = BTreeSet::new();
    let mut cur = phase;
    loop {
        if !seen_phases.insert(cur) {
            break;
        }
        out.insert(graph.phases[cur].visible);
        match graph.phases[cur].timer {
            Some((_, next)) => cur = next,
            None => break,
        }
    }
    out
}

/// Visible states reachable from `phase` by any edge sequence (inclusive).
fn full_closure(graph: &PhaseGraph, phase: usize) -> BTreeSet<usize> {
    let mut seen_phases = BTreeSet::new();
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::from([phase]);
    while let Some(p) = queue.pop_front() {
        if !seen_phases.insert(p) {
            continue;
        }
        out.insert(graph.phases[p].visible);
        for &next in graph.phases[p].on_command.values() {
            queue.push_back(next);
        }
        if let Some((_, next)) = graph.phases[p].timer {
            queue.push_back(next);
        }
    }
    out
}

/// Live state of one jig during synthesis or execution.
#[derive(Debug, Clone)]
pub struct JigRuntime {
    graph: Arc<PhaseGraph>,
    phase: usize,
    timer_deadline: Option<f64>,
}

impl JigRuntime {
    fn new(graph: Arc<PhaseGraph>, start_time: f64) -> Self {
        let mut rt = Self {
            phase: graph.initial_phase,
            timer_deadline: None,
            graph,
        };
        rt.arm_timer(start_time);
        rt
    }

    fn arm_timer(&mut self, now: f64) {
        self.timer_deadline = self.graph.phases[self.phase]
            .timer
            .map(|(delay, _)| now + delay);
    }

    pub fn jig_id(&self) -> &str {
        &self.graph.jig_id
    }

    pub fn visible_state(&self) -> &str {
        &self.graph.state_names[self.graph.phases[self.phase].visible]
    }

    pub fn timer_deadline(&self) -> Option<f64> {
        self.timer_deadline
    }

    /// Applies a declared command at time `now`. Commands with no transition
    /// from the current state are accepted as no-ops (physical buttons can
    /// always be pushed); returns whether a transition happened.
    pub fn step(&mut self, command: &str, now: f64) -> Result<bool, JigError> {
        let cmd = self.graph.command_index(command)?;
        match self.graph.phases[self.phase].on_command.get(&cmd) {
            Some(&next) => {
                self.phase = next;
                self.arm_timer(now);
                Ok(true)
            }
            None => {
                log::debug!(
                    "jig {}: command {:?} ignored in state {:?}",
                    self.graph.jig_id,
                    command,
                    self.visible_state()
                );
                Ok(false)
            }
        }
    }

    /// Fires the pending timer if its deadline has passed (closed comparison,
    /// `now >= deadline`). At most one timer fires per call.
    pub fn tick(&mut self, now: f64) -> bool {
        match self.timer_deadline {
            Some(deadline) if now >= deadline => {
                let (_, next) = self.graph.phases[self.phase]
                    .timer
                    .expect("deadline only set when the phase has a timer");
                self.phase = next;
                self.arm_timer(now);
                true
            }
            _ => false,
        }
    }
}

/// Command for one jig, as produced by [`diff`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JigCommand {
    pub jig_id: String,
    pub command: String,
}

/// Transition classification used by the sync metric.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionKind {
    Command(String),
    Timer,
}

/// Ordered collection of validated jig definitions with compiled graphs.
///
/// Registry order is load order; it defines the column order of state
/// vectors and serialized records.
#[derive(Debug, Clone)]
pub struct JigRegistry {
    defs: Vec<JigDefinition>,
    graphs: Vec<Arc<PhaseGraph>>,
}

impl JigRegistry {
    pub fn new(defs: Vec<JigDefinition>) -> Result<Self, JigError> {
        let mut seen = BTreeSet::new();
        let mut graphs = Vec::with_capacity(defs.len());
        for def in &defs {
            if !seen.insert(def.id.clone()) {
                return Err(JigError::DuplicateJig { id: def.id.clone() });
            }
            graphs.push(Arc::new(compile(def)?));
        }
        Ok(Self { defs, graphs })
    }

    pub fn definitions(&self) -> &[JigDefinition] {
        &self.defs
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.defs.iter().map(|d| d.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&JigDefinition> {
        self.defs.iter().find(|d| d.id == id)
    }

    fn graph(&self, id: &str) -> Result<&Arc<PhaseGraph>, JigError> {
        self.defs
            .iter()
            .position(|d| d.id == id)
            .map(|i| &self.graphs[i])
            .ok_or_else(|| JigError::UnknownJig { id: id.to_string() })
    }

    /// Fresh runtimes in registry order, timers armed at `start_time`.
    pub fn runtimes(&self, start_time: f64) -> Vec<JigRuntime> {
        self.graphs
            .iter()
            .map(|g| JigRuntime::new(Arc::clone(g), start_time))
            .collect()
    }

    pub fn runtime(&self, id: &str, start_time: f64) -> Result<JigRuntime, JigError> {
        Ok(JigRuntime::new(Arc::clone(self.graph(id)?), start_time))
    }

    /// State vector with every jig at its declared initial state.
    pub fn initial_states(&self) -> JigStateVector {
        JigStateVector::new(
            self.defs
                .iter()
                .map(|d| (d.id.clone(), d.initial.clone()))
                .collect(),
        )
        .expect("registry ids are unique")
    }

    pub fn validate_state(&self, id: &str, state: &str) -> Result<(), JigError> {
        self.graph(id)?.state_index(state).map(|_| ())
    }

    /// Explains an observed `from -> to` visible change against the
    /// definition. Prefers a command edge when both exist.
    pub fn classify_transition(
        &self,
        id: &str,
        from: &str,
        to: &str,
    ) -> Result<Option<TransitionKind>, JigError> {
        let def = self.get(id).ok_or_else(|| JigError::UnknownJig {
            id: id.to_string(),
        })?;
        let mut timer = false;
        for rule in &def.transitions {
            if rule.from == from && rule.to == to {
                match &rule.trigger {
                    Trigger::Command(c) => return Ok(Some(TransitionKind::Command(c.clone()))),
                    Trigger::Timer(_) => timer = true,
                }
            }
        }
        Ok(timer.then_some(TransitionKind::Timer))
    }

    /// Appends another registry's definitions; duplicate ids are an error.
    pub fn merged_with(mut self, other: JigRegistry) -> Result<Self, JigError> {
        self.defs.extend(other.defs);
        Self::new(self.defs)
    }
}

/// State-mismatch command law: for every jig whose current visible state
/// differs from the demonstrated one, the unique advancing command, resolved
/// against the compiled definition. Jigs that converge by timer alone, or
/// whose target is unreachable, contribute nothing (the caller's watchdog
/// owns the unreachable case).
pub fn diff(
    demo: &JigStateVector,
    current: &JigStateVector,
    registry: &JigRegistry,
) -> Result<Vec<JigCommand>, JigError> {
    let demo_ids: BTreeSet<&str> = demo.ids().collect();
    let current_ids: BTreeSet<&str> = current.ids().collect();
    if demo_ids != current_ids {
        return Err(JigError::MismatchedJigSets {
            demo: demo.ids().map(str::to_owned).collect(),
            current: current.ids().map(str::to_owned).collect(),
        });
    }
    let mut commands = Vec::new();
    for (id, target) in demo.iter() {
        let cur = current.get(id).expect("id sets verified equal");
        if cur == target {
            continue;
        }
        let graph = registry.graph(id)?;
        let cur_idx = graph.state_index(cur)?;
        let target_idx = graph.state_index(target)?;
        match graph.advance[cur_idx][target_idx] {
            Advance::Command(c) => commands.push(JigCommand {
                jig_id: id.to_string(),
                command: graph.command_names[c].clone(),
            }),
            Advance::Wait => {}
            Advance::Unreachable => {
                log::debug!(
                    "jig {id}: demonstrated state {target:?} unreachable from {cur:?}; waiting"
                );
            }
            Advance::Match => unreachable!("states compared unequal"),
        }
    }
    Ok(commands)
}

/// The four builtin lab jigs.
pub fn builtin_jigs() -> Vec<JigDefinition> {
    parse_jig_definitions(BUILTIN_JIG_DSL).expect("builtin definitions are valid")
}

pub fn builtin_registry() -> JigRegistry {
    JigRegistry::new(builtin_jigs()).expect("builtin definitions compile")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> JigRegistry {
        builtin_registry()
    }

    #[test]
    fn builtin_set_is_the_four_lab_jigs() {
        let jigs = builtin_jigs();
        assert_eq!(jigs.len(), 4);
        let ids: Vec<_> = jigs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(
            ids,
            vec!["pipette_plunger", "tip_ejector", "bottle_mounter", "flow_plumber"]
        );
    }

    #[test]
    fn plunger_parses_to_three_states_four_command_transitions() {
        let reg = registry();
        let def = reg.get("pipette_plunger").unwrap();
        assert_eq!(def.states.len(), 3);
        assert_eq!(def.commands, vec!["advance"]);
        assert_eq!(def.transitions.len(), 4);
        assert!(def
            .transitions
            .iter()
            .all(|t| matches!(t.trigger, Trigger::Command(_))));
    }

    #[test]
    fn plunger_four_advances_walk_the_demonstrated_loop() {
        let reg = registry();
        let mut rt = reg.runtime("pipette_plunger", 0.0).unwrap();
        assert_eq!(rt.visible_state(), "released");
        let mut seen = Vec::new();
        for k in 0..4 {
            assert!(rt.step("advance", k as f64).unwrap());
            seen.push(rt.visible_state().to_string());
        }
        assert_eq!(seen, vec!["pressed_1st", "released", "pressed_2nd", "released"]);
        assert_eq!(rt.phase, reg.graph("pipette_plunger").unwrap().initial_phase);
    }

    #[test]
    fn tip_ejector_auto_returns_after_three_seconds() {
        let reg = registry();
        let mut rt = reg.runtime("tip_ejector", 0.0).unwrap();
        assert!(rt.step("press", 5.0).unwrap());
        assert_eq!(rt.visible_state(), "button_pressed");
        assert_eq!(rt.timer_deadline(), Some(8.0));
        assert!(!rt.tick(7.999));
        assert_eq!(rt.visible_state(), "button_pressed");
        assert!(rt.tick(8.0));
        assert_eq!(rt.visible_state(), "button_released");
        assert_eq!(rt.timer_deadline(), None);
    }

    #[test]
    fn toggles_are_involutions() {
        let reg = registry();
        for id in ["bottle_mounter", "flow_plumber"] {
            let mut rt = reg.runtime(id, 0.0).unwrap();
            let start = rt.visible_state().to_string();
            rt.step("toggle", 0.0).unwrap();
            assert_ne!(rt.visible_state(), start);
            rt.step("toggle", 0.1).unwrap();
            assert_eq!(rt.visible_state(), start);
        }
    }

    #[test]
    fn ignored_command_is_a_silent_noop() {
        let reg = registry();
        let mut rt = reg.runtime("tip_ejector", 0.0).unwrap();
        rt.step("press", 0.0).unwrap();
        // Pressing an already-pressed button does nothing and keeps the timer.
        assert!(!rt.step("press", 1.0).unwrap());
        assert_eq!(rt.visible_state(), "button_pressed");
        assert_eq!(rt.timer_deadline(), Some(3.0));
    }

    #[test]
    fn undeclared_command_is_an_error() {
        let reg = registry();
        let mut rt = reg.runtime("bottle_mounter", 0.0).unwrap();
        assert!(matches!(
            rt.step("frobnicate", 0.0),
            Err(JigError::UnknownCommand { .. })
        ));
    }

    #[test]
    fn diff_emits_single_advancing_command_per_mismatched_jig() {
        let reg = registry();
        let demo = JigStateVector::new(vec![
            ("pipette_plunger".into(), "pressed_1st".into()),
            ("bottle_mounter".into(), "locked".into()),
        ])
        .unwrap();
        let current = JigStateVector::new(vec![
            ("pipette_plunger".into(), "released".into()),
            ("bottle_mounter".into(), "unlocked".into()),
        ])
        .unwrap();
        let cmds = diff(&demo, &current, &reg).unwrap();
        assert_eq!(
            cmds,
            vec![
                JigCommand {
                    jig_id: "pipette_plunger".into(),
                    command: "advance".into()
                },
                JigCommand {
                    jig_id: "bottle_mounter".into(),
                    command: "toggle".into()
                },
            ]
        );
    }

    #[test]
    fn diff_waits_on_timer_only_paths() {
        let reg = registry();
        let demo =
            JigStateVector::new(vec![("tip_ejector".into(), "button_released".into())]).unwrap();
        let current =
            JigStateVector::new(vec![("tip_ejector".into(), "button_pressed".into())]).unwrap();
        assert_eq!(diff(&demo, &current, &reg).unwrap(), vec![]);
    }

    #[test]
    fn diff_rejects_mismatched_id_sets() {
        let reg = registry();
        let demo = JigStateVector::new(vec![("bottle_mounter".into(), "locked".into())]).unwrap();
        let current = JigStateVector::new(vec![("flow_plumber".into(), "disposal".into())]).unwrap();
        assert!(matches!(
            diff(&demo, &current, &reg),
            Err(JigError::MismatchedJigSets { .. })
        ));
    }

    #[test]
    fn diff_converges_multi_step_on_the_plunger_cycle() {
        let reg = registry();
        let mut rt = reg.runtime("pipette_plunger", 0.0).unwrap();
        let demo =
            JigStateVector::new(vec![("pipette_plunger".into(), "pressed_2nd".into())]).unwrap();
        let mut issued = Vec::new();
        for step in 0..10 {
            let current = JigStateVector::new(vec![(
                "pipette_plunger".into(),
                rt.visible_state().to_string(),
            )])
            .unwrap();
            let cmds = diff(&demo, &current, &reg).unwrap();
            if cmds.is_empty() {
                break;
            }
            assert_eq!(cmds.len(), 1);
            issued.push(step);
            rt.step(&cmds[0].command, step as f64).unwrap();
        }
        assert_eq!(rt.visible_state(), "pressed_2nd");
        // released -> pressed_1st -> released -> pressed_2nd: three commands.
        assert_eq!(issued.len(), 3);
    }

    #[test]
    fn diff_then_step_converges_within_brute_force_bound_on_all_builtins() {
        // Brute force: shortest command count over the phase graph, allowing
        // free timer waits between commands.
        let reg = registry();
        for def in reg.definitions() {
            let graph = reg.graph(&def.id).unwrap();
            for start_phase in 0..graph.phases.len() {
                for target in 0..def.states.len() {
                    let bound = def.states.len() * graph.phases.len();
                    let target_name = &def.states[target];
                    // Skip unreachable targets.
                    if !full_closure(graph, start_phase).contains(&target) {
                        continue;
                    }
                    let mut rt = JigRuntime {
                        graph: Arc::clone(graph),
                        phase: start_phase,
                        timer_deadline: None,
                    };
                    rt.arm_timer(0.0);
                    let demo = JigStateVector::new(vec![(
                        def.id.clone(),
                        target_name.clone(),
                    )])
                    .unwrap();
                    let mut commands_used = 0;
                    let mut now = 0.0;
                    while rt.visible_state() != target_name {
                        let current = JigStateVector::new(vec![(
                            def.id.clone(),
                            rt.visible_state().to_string(),
                        )])
                        .unwrap();
                        let cmds = diff(&demo, &current, &reg).unwrap();
                        if cmds.is_empty() {
                            // Waiting on a timer.
                            now += 0.5;
                            rt.tick(now);
                        } else {
                            for cmd in cmds {
                                rt.step(&cmd.command, now).unwrap();
                                commands_used += 1;
                            }
                        }
                        assert!(
                            commands_used <= bound && now < 1e3,
                            "{}: {} -> {} did not converge",
                            def.id,
                            def.states[graph.phases[start_phase].visible],
                            target_name
                        );
                    }
                    assert!(commands_used <= bound);
                }
            }
        }
    }

    #[test]
    fn ambiguous_advancing_command_is_a_load_error() {
        // Two distinct commands from `a` both reach `c`.
        let def = JigDefinition {
            id: "amb".into(),
            states: vec!["a".into(), "b".into(), "c".into()],
            initial: "a".into(),
            commands: vec!["x".into(), "y".into()],
            transitions: vec![
                TransitionRule {
                    from: "a".into(),
                    trigger: Trigger::Command("x".into()),
                    to: "c".into(),
                },
                TransitionRule {
                    from: "a".into(),
                    trigger: Trigger::Command("y".into()),
                    to: "b".into(),
                },
                TransitionRule {
                    from: "b".into(),
                    trigger: Trigger::Command("y".into()),
                    to: "c".into(),
                },
            ],
        };
        assert!(matches!(
            JigRegistry::new(vec![def]),
            Err(JigError::AmbiguousTarget { .. })
        ));
    }

    #[test]
    fn nondeterministic_pair_outside_cycle_form_is_rejected() {
        let def = JigDefinition {
            id: "bad".into(),
            states: vec!["a".into(), "b".into()],
            initial: "a".into(),
            commands: vec!["x".into()],
            transitions: vec![
                TransitionRule {
                    from: "a".into(),
                    trigger: Trigger::Command("x".into()),
                    to: "b".into(),
                },
                TransitionRule {
                    from: "a".into(),
                    trigger: Trigger::Command("x".into()),
                    to: "a".into(),
                },
            ],
        };
        assert!(matches!(
            JigRegistry::new(vec![def]),
            Err(JigError::UnresolvableCycle { .. })
        ));
    }

    #[test]
    fn classify_transition_distinguishes_commands_and_timers() {
        let reg = registry();
        assert_eq!(
            reg.classify_transition("tip_ejector", "button_released", "button_pressed")
                .unwrap(),
            Some(TransitionKind::Command("press".into()))
        );
        assert_eq!(
            reg.classify_transition("tip_ejector", "button_pressed", "button_released")
                .unwrap(),
            Some(TransitionKind::Timer)
        );
        assert_eq!(
            reg.classify_transition("tip_ejector", "button_released", "button_released")
                .unwrap(),
            None
        );
    }

    #[test]
    fn initial_states_match_the_lab_defaults() {
        let v = registry().initial_states();
        assert_eq!(v.get("pipette_plunger"), Some("released"));
        assert_eq!(v.get("tip_ejector"), Some("button_released"));
        assert_eq!(v.get("bottle_mounter"), Some("unlocked"));
        assert_eq!(v.get("flow_plumber"), Some("disposal"));
    }
}
