//! RunLog directory layout: states.csv, commands.jsonl, events.jsonl,
//! metrics.json and maps/.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{compute_metrics, CommandRecord, Event, Metrics, Outcome, RunLog, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::HeightGrid;
use crate::vslip::State;

pub const STATES_HEADER: &str = "t,qx,qy,qz,qphi,dqx,dqy,dqz,dqphi";

/// How the resolved config came about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: Option<String>,
    pub config_path: Option<String>,
    pub overrides: Vec<String>,
    pub config: ScenarioConfig,
}

impl Provenance {
    pub fn plain(config: &ScenarioConfig) -> Self {
        Self { scenario: Some(config.name.clone()), config_path: None, overrides: Vec::new(), config: config.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub metrics: Metrics,
    pub provenance: Provenance,
}

/// Shortest round-trip formatting, so equal runs give identical bytes.
pub fn states_csv(states: &[(f64, State)]) -> String {
    let mut out = String::with_capacity(states.len() * 160);
    out.push_str(STATES_HEADER);
    out.push('\n');
    for (t, s) in states {
        let _ = write!(out, "{t}");
        for v in s.to_array() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_states_csv(text: &str) -> Result<Vec<(f64, State)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == STATES_HEADER => {}
        _ => return Err(Error::Parse(format!("line 1: expected header `{STATES_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        if vals.len() != 9 {
            return Err(Error::Parse(format!("line {}: expected 9 fields, found {}", n + 1, vals.len())));
        }
        out.push((vals[0], State::from_array(std::array::from_fn(|k| vals[k + 1]))));
    }
    Ok(out)
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str, file: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("{file} line {}: {e}", n + 1))))
        .collect()
}

impl RunLog {
    pub fn write_dir(&self, dir: &Path, provenance: &Provenance) -> Result<()> {
        fs::create_dir_all(dir.join("maps"))?;
        fs::write(dir.join("states.csv"), states_csv(&self.states))?;
        fs::write(dir.join("commands.jsonl"), jsonl(&self.commands)?)?;
        fs::write(dir.join("events.jsonl"), jsonl(&self.events)?)?;
        let mf = MetricsFile { metrics: self.metrics.clone(), provenance: provenance.clone() };
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&mf)?)?;
        for (k, (_, m)) in self.maps.iter().enumerate() {
            fs::write(dir.join("maps").join(format!("map_{k:03}.json")), serde_json::to_string(m)?)?;
        }
        fs::write(dir.join("maps").join("final.json"), self.final_map.to_json()?)?;
        Ok(())
    }
}

/// Metrics recomputed from a RunLog directory next to the recorded ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub recorded: MetricsFile,
    pub recomputed: Metrics,
    pub states: usize,
    pub commands: usize,
    pub events: usize,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    fs::read_to_string(dir.join(name)).map_err(|e| Error::Parse(format!("{}: {e}", dir.join(name).display())))
}

pub fn replay_dir(dir: &Path) -> Result<Replay> {
    let recorded: MetricsFile =
        serde_json::from_str(&read(dir, "metrics.json")?).map_err(|e| Error::Parse(format!("metrics.json: {e}")))?;
    let states = parse_states_csv(&read(dir, "states.csv")?)?;
    let commands: Vec<CommandRecord> = parse_jsonl(&read(dir, "commands.jsonl")?, "commands.jsonl")?;
    let events: Vec<Event> = parse_jsonl(&read(dir, "events.jsonl")?, "events.jsonl")?;
    let map = match fs::read_to_string(dir.join("maps").join("final.json")) {
        Ok(text) => Some(HeightGrid::from_json(&text)?),
        Err(_) => None,
    };
    let outcome = terminal_outcome(&events);
    let recomputed = compute_metrics(&recorded.provenance.config, &states, &commands, &events, map.as_ref(), outcome);
    Ok(Replay { recorded, recomputed, states: states.len(), commands: commands.len(), events: events.len() })
}

/// Terminal outcome from the event stream; a run without a terminal event
/// counts as a timeout.
pub fn terminal_outcome(events: &[Event]) -> Outcome {
    events
        .iter()
        .rev()
        .find_map(|e| match e.kind.as_str() {
            "goal_reached" => Some(Outcome::GoalReached),
            "collision" => Some(Outcome::Collision),
            "timeout" => Some(Outcome::Timeout),
            _ => None,
        })
        .unwrap_or(Outcome::Timeout)
}
