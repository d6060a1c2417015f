//! Line-oriented text format for jig definitions.
//!
//! ```text
//! # comment
//! jig tip_ejector
//! states: button_released, button_pressed
//! initial: button_released
//! commands: press
//! on press: button_released -> button_pressed
//! after 3.0s: button_pressed -> button_released
//! ```
//!
//! A file may hold several `jig` blocks. Names are `[a-z0-9_]+`. Whitespace
//! around tokens is insignificant. Every block is validated (including
//! determinism and advance-command uniqueness) before it is returned.

use super::{compile, JigDefinition, JigError, TransitionRule, Trigger};

struct Block {
    start_line: usize,
    def: JigDefinition,
    has_states: bool,
    has_initial: bool,
}

/// Parses every definition in `text`, in order.
pub fn parse_jig_definitions(text: &str) -> Result<Vec<JigDefinition>, JigError> {
    let mut out: Vec<JigDefinition> = Vec::new();
    let mut block: Option<Block> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("jig ") {
            if let Some(b) = block.take() {
                out.push(finish_block(b)?);
            }
            block = Some(Block {
                start_line: line_no,
                def: JigDefinition {
                    id: rest.trim().to_string(),
                    states: Vec::new(),
                    initial: String::new(),
                    commands: Vec::new(),
                    transitions: Vec::new(),
                },
                has_states: false,
                has_initial: false,
            });
            continue;
        }

        let b = block.as_mut().ok_or_else(|| JigError::Parse {
            line: line_no,
            message: format!("expected a `jig <name>` header before {line:?}"),
        })?;

        let parse_err = |message: String| JigError::Parse {
            line: line_no,
            message,
        };

        if let Some(rest) = line.strip_prefix("states:") {
            b.def.states = split_names(rest);
            b.has_states = true;
        } else if let Some(rest) = line.strip_prefix("initial:") {
            b.def.initial = rest.trim().to_string();
            b.has_initial = true;
        } else if let Some(rest) = line.strip_prefix("commands:") {
            b.def.commands = split_names(rest);
        } else if let Some(rest) = line.strip_prefix("on ") {
            let (cmd, arrow) = rest.split_once(':').ok_or_else(|| {
                parse_err("expected `on <command>: <from> -> <to>`".into())
            })?;
            let (from, to) = parse_arrow(arrow)
                .ok_or_else(|| parse_err("expected `<from> -> <to>`".into()))?;
            b.def.transitions.push(TransitionRule {
                from,
                trigger: Trigger::Command(cmd.trim().to_string()),
                to,
            });
        } else if let Some(rest) = line.strip_prefix("after ") {
            let (delay, arrow) = rest.split_once(':').ok_or_else(|| {
                parse_err("expected `after <seconds>s: <from> -> <to>`".into())
            })?;
            let delay = delay.trim();
            let delay = delay
                .strip_suffix('s')
                .ok_or_else(|| parse_err(format!("timer delay {delay:?} must end in `s`")))?;
            let seconds: f64 = delay
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid timer delay {delay:?}")))?;
            let (from, to) = parse_arrow(arrow)
                .ok_or_else(|| parse_err("expected `<from> -> <to>`".into()))?;
            b.def.transitions.push(TransitionRule {
                from,
                trigger: Trigger::Timer(seconds),
                to,
            });
        } else {
            return Err(parse_err(format!("unrecognized directive {line:?}")));
        }
    }

    if let Some(b) = block.take() {
        out.push(finish_block(b)?);
    }
    if out.is_empty() {
        return Err(JigError::Parse {
            line: 1,
            message: "no jig definitions found".into(),
        });
    }
    Ok(out)
}

/// Parses a text expected to contain exactly one definition.
pub fn parse_jig_definition(text: &str) -> Result<JigDefinition, JigError> {
    let mut defs = parse_jig_definitions(text)?;
    if defs.len() != 1 {
        return Err(JigError::Parse {
            line: 1,
            message: format!("expected exactly one jig definition, found {}", defs.len()),
        });
    }
    Ok(defs.remove(0))
}

fn finish_block(b: Block) -> Result<JigDefinition, JigError> {
    let wrap = |e: JigError| match e {
        JigError::Parse { .. } => e,
        other => JigError::Parse {
            line: b.start_line,
            message: other.to_string(),
        },
    };
    if !b.has_states {
        return Err(wrap(JigError::MissingSection {
            jig: b.def.id.clone(),
            section: "states".into(),
        }));
    }
    if !b.has_initial {
        return Err(wrap(JigError::MissingSection {
            jig: b.def.id.clone(),
            section: "initial".into(),
        }));
    }
    compile(&b.def).map_err(wrap)?;
    Ok(b.def)
}

fn split_names(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

fn parse_arrow(s: &str) -> Option<(String, String)> {
    let (from, to) = s.split_once("->")?;
    let from = from.trim();
    let to = to.trim();
    if from.is_empty() || to.is_empty() {
        return None;
    }
    Some((from.to_string(), to.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_definition() {
        let def = parse_jig_definition(
            "jig lever\nstates: up, down\ninitial: up\ncommands: pull\non pull: up -> down\n",
        )
        .unwrap();
        assert_eq!(def.id, "lever");
        assert_eq!(def.states, vec!["up", "down"]);
        assert_eq!(def.initial, "up");
        assert_eq!(def.transitions.len(), 1);
    }

    #[test]
    fn whitespace_and_comments_are_insignificant() {
        let def = parse_jig_definition(
            "  jig lever   # a lever\n\n states:  up ,down \n initial:up\n commands: pull\n  on pull :  up ->down # go\n",
        )
        .unwrap();
        assert_eq!(def.states, vec!["up", "down"]);
        assert_eq!(def.transitions[0].to, "down");
    }

    #[test]
    fn timer_syntax() {
        let def = parse_jig_definition(
            "jig t\nstates: a, b\ninitial: a\ncommands: go\non go: a -> b\nafter 2.5s: b -> a\n",
        )
        .unwrap();
        assert_eq!(def.transitions[1].trigger, Trigger::Timer(2.5));
    }

    #[test]
    fn missing_sections_are_reported() {
        let err = parse_jig_definition("jig x\nstates: a\n").unwrap_err();
        assert!(err.to_string().contains("initial"), "{err}");
        let err = parse_jig_definition("jig x\ninitial: a\n").unwrap_err();
        assert!(err.to_string().contains("states"), "{err}");
    }

    #[test]
    fn unknown_state_in_transition_is_reported_with_line() {
        let err = parse_jig_definition(
            "jig x\nstates: a\ninitial: a\ncommands: go\non go: a -> zz\n",
        )
        .unwrap_err();
        match err {
            JigError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("zz"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_names_are_rejected() {
        let err = parse_jig_definition("jig Bad-Name\nstates: a\ninitial: a\n").unwrap_err();
        assert!(err.to_string().contains("Bad-Name"), "{err}");
    }

    #[test]
    fn multiple_definitions_parse_in_order() {
        let defs = parse_jig_definitions(
            "jig a\nstates: s\ninitial: s\n\njig b\nstates: t\ninitial: t\n",
        )
        .unwrap();
        assert_eq!(defs.len(), 2);
        assert_eq!(defs[0].id, "a");
        assert_eq!(defs[1].id, "b");
    }

    #[test]
    fn builtin_text_round_trips_through_the_parser() {
        let defs = parse_jig_definitions(super::super::BUILTIN_JIG_DSL).unwrap();
        assert_eq!(defs.len(), 4);
    }
}
