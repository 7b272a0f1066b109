//! JSON scenario files: a system definition, named potentials and measures,
//! a seed, and an ordered task list with per-task parameters. Parsing keeps
//! names symbolic; building resolves them against the system with
//! diagnostics that name every unresolved reference.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::measure::MarkovMeasure;
use crate::sft::{Potential, Sft, Word};
use crate::{Error, Result};

fn default_grid() -> usize {
    2001
}

fn default_schedule() -> Vec<usize> {
    (8..=20).collect()
}

fn default_random_potentials() -> usize {
    100
}

fn default_eps() -> f64 {
    1e-3
}

/// Raw scenario document as written on disk.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub alphabet: usize,
    pub transitions: Vec<Vec<u8>>,
    #[serde(default)]
    pub potentials: BTreeMap<String, PotentialSpec>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub depth: usize,
    /// Word keys are digit strings ("01") or comma-separated symbol lists
    /// ("0,1"); every admissible word of the given depth must appear.
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default = "one")]
    pub depth: usize,
    pub transition: Vec<Vec<f64>>,
    /// Validated against the transition matrix when given; computed from it
    /// otherwise.
    #[serde(default)]
    pub stationary: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

/// An auxiliary system embedded in a task (the dichotomy runs two).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub alphabet: usize,
    pub transitions: Vec<Vec<u8>>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<Sft> {
        Sft::new(self.alphabet, self.transitions.clone())
            .map_err(|e| Error::Input(format!("bad system definition: {e}")))
    }
}

/// One task in the scenario's task list.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Direct pressure sums along a schedule against the spectral value.
    Pressure {
        potential: String,
        #[serde(default = "default_schedule")]
        n_schedule: Vec<usize>,
    },
    /// Equilibrium states of a potential with entropy and pressure checks.
    Equilibrium { potential: String },
    /// One-dimensional kink scan of the pressure along a direction.
    Kinkscan {
        #[serde(default)]
        base: Option<String>,
        direction: String,
        t_range: (f64, f64),
        #[serde(default = "default_grid")]
        grid: usize,
    },
    /// Dual-primal rate audit over a grid of constraint points.
    RateAudit {
        #[serde(default)]
        base: Option<String>,
        directions: Vec<String>,
        x_grid: Vec<Vec<f64>>,
    },
    /// Slope-fit audit of ball probabilities against the dual rate.
    LdpAudit {
        #[serde(default)]
        base: Option<String>,
        tilt: String,
        directions: Vec<String>,
        n_schedule: Vec<usize>,
        x_grid: Vec<Vec<f64>>,
        delta: f64,
    },
    /// Side-by-side differentiability signature of an irreducible and a
    /// reducible system.
    Dichotomy {
        irreducible: SystemSpec,
        reducible: SystemSpec,
        t_range: (f64, f64),
        #[serde(default = "default_grid")]
        grid: usize,
        x_grid: Vec<f64>,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// Cylinder-basis reconstruction, stability sums, and span checks.
    SchauderCheck {
        depth: usize,
        #[serde(default = "default_random_potentials")]
        random_potentials: usize,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Pressure { .. } => "pressure",
            TaskSpec::Equilibrium { .. } => "equilibrium",
            TaskSpec::Kinkscan { .. } => "kinkscan",
            TaskSpec::RateAudit { .. } => "rate-audit",
            TaskSpec::LdpAudit { .. } => "ldp-audit",
            TaskSpec::Dichotomy { .. } => "dichotomy",
            TaskSpec::SchauderCheck { .. } => "schauder-check",
        }
    }
}

/// A scenario with every name resolved and every parameter validated.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub sft: Sft,
    pub potentials: BTreeMap<String, Potential>,
    pub measures: BTreeMap<String, MarkovMeasure>,
    pub seed: u64,
    pub tasks: Vec<TaskSpec>,
}

impl ScenarioFile {
    /// Parses the JSON text, reporting the line and column on failure.
    pub fn parse(text: &str) -> Result<ScenarioFile> {
        serde_json::from_str(text).map_err(|e| {
            Error::Input(format!(
                "scenario parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Resolves the document into core types and validates the task list.
    pub fn build(&self) -> Result<Scenario> {
        let sft = Sft::new(self.alphabet, self.transitions.clone())
            .map_err(|e| Error::Input(format!("bad transition matrix: {e}")))?;
        let mut potentials = BTreeMap::new();
        for (name, spec) in &self.potentials {
            let mut table: BTreeMap<Word, f64> = BTreeMap::new();
            for (key, &value) in &spec.values {
                let word = parse_word(key, self.alphabet).map_err(|e| {
                    Error::Input(format!("potential \"{name}\": {e}"))
                })?;
                table.insert(word, value);
            }
            let p = Potential::new(&sft, spec.depth, table)
                .map_err(|e| Error::Input(format!("potential \"{name}\": {e}")))?;
            potentials.insert(name.clone(), p);
        }
        let mut measures = BTreeMap::new();
        for (name, spec) in &self.measures {
            let m = match &spec.stationary {
                Some(pi) => MarkovMeasure::new(
                    &sft,
                    spec.depth,
                    spec.transition.clone(),
                    pi.clone(),
                ),
                None => MarkovMeasure::from_transition(
                    &sft,
                    spec.depth,
                    spec.transition.clone(),
                ),
            }
            .map_err(|e| Error::Input(format!("measure \"{name}\": {e}")))?;
            measures.insert(name.clone(), m);
        }
        let scenario = Scenario {
            sft,
            potentials,
            measures,
            seed: self.seed,
            tasks: self.tasks.clone(),
        };
        for (i, task) in scenario.tasks.iter().enumerate() {
            scenario
                .validate_task(task)
                .map_err(|e| Error::Input(format!("task {i} ({}): {e}", task.kind())))?;
        }
        Ok(scenario)
    }
}

impl Scenario {
    pub fn potential(&self, name: &str) -> Result<&Potential> {
        self.potentials
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown potential \"{name}\"")))
    }

    /// Resolves an optional base-potential name, defaulting to zero.
    pub fn base_potential(&self, name: &Option<String>) -> Result<Potential> {
        match name {
            Some(n) => Ok(self.potential(n)?.clone()),
            None => Ok(Potential::zero(&self.sft)),
        }
    }

    pub fn measure(&self, name: &str) -> Result<&MarkovMeasure> {
        self.measures
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown measure \"{name}\"")))
    }

    fn validate_task(&self, task: &TaskSpec) -> Result<()> {
        match task {
            TaskSpec::Pressure { potential, n_schedule } => {
                self.potential(potential)?;
                if n_schedule.is_empty() {
                    return Err(Error::Input("empty length schedule".into()));
                }
                if n_schedule.iter().any(|&n| n == 0) {
                    return Err(Error::Input("schedule lengths must be positive".into()));
                }
            }
            TaskSpec::Equilibrium { potential } => {
                self.potential(potential)?;
            }
            TaskSpec::Kinkscan { base, direction, t_range, grid } => {
                if let Some(b) = base {
                    self.potential(b)?;
                }
                self.potential(direction)?;
                validate_range(*t_range)?;
                if *grid < 2 {
                    return Err(Error::Input("scan grid needs at least 2 nodes".into()));
                }
            }
            TaskSpec::RateAudit { base, directions, x_grid } => {
                if let Some(b) = base {
                    self.potential(b)?;
                }
                for d in directions {
                    self.potential(d)?;
                }
                if directions.is_empty() {
                    return Err(Error::Input("no constraint directions".into()));
                }
                if x_grid.is_empty() {
                    return Err(Error::Input("empty constraint grid".into()));
                }
                for x in x_grid {
                    if x.len() != directions.len() {
                        return Err(Error::Input(format!(
                            "grid point {x:?} has {} coordinates for {} directions",
                            x.len(),
                            directions.len()
                        )));
                    }
                }
            }
            TaskSpec::LdpAudit { base, tilt, directions, n_schedule, x_grid, delta } => {
                if let Some(b) = base {
                    self.potential(b)?;
                }
                self.potential(tilt)?;
                for d in directions {
                    self.potential(d)?;
                }
                if directions.is_empty() {
                    return Err(Error::Input("no pushforward directions".into()));
                }
                if n_schedule.len() < 3 {
                    return Err(Error::Input(
                        "the length schedule needs at least three entries".into(),
                    ));
                }
                if x_grid.is_empty() {
                    return Err(Error::Input("empty ball-center grid".into()));
                }
                for x in x_grid {
                    if x.len() != directions.len() {
                        return Err(Error::Input(format!(
                            "grid point {x:?} has {} coordinates for {} directions",
                            x.len(),
                            directions.len()
                        )));
                    }
                }
                if !(*delta > 0.0) {
                    return Err(Error::Input(format!(
                        "ball radius must be positive, got {delta}"
                    )));
                }
            }
            TaskSpec::Dichotomy { irreducible, reducible, t_range, grid, x_grid, eps } => {
                // Role mismatches (a reducible system in the irreducible
                // slot or vice versa) are not validation errors: the runner
                // reports them as a failed signature.
                irreducible.build()?;
                reducible.build()?;
                validate_range(*t_range)?;
                if *grid < 2 {
                    return Err(Error::Input("scan grid needs at least 2 nodes".into()));
                }
                if x_grid.is_empty() {
                    return Err(Error::Input("empty rate probe grid".into()));
                }
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::Input(format!(
                        "approximation weight must lie in (0,1), got {eps}"
                    )));
                }
            }
            TaskSpec::SchauderCheck { depth, random_potentials } => {
                if *depth == 0 {
                    return Err(Error::Input("truncation depth must be positive".into()));
                }
                if *random_potentials == 0 {
                    return Err(Error::Input(
                        "at least one random potential is required".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_range(r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 < r.1) {
        return Err(Error::Input(format!(
            "range ({}, {}) is not an increasing finite pair",
            r.0, r.1
        )));
    }
    Ok(())
}

/// Parses a word key: digit strings for alphabets up to 10, or
/// comma-separated symbol indices for any alphabet.
pub fn parse_word(key: &str, alphabet: usize) -> Result<Word> {
    if key.is_empty() {
        return Err(Error::Input("empty word key".into()));
    }
    let symbols: Vec<usize> = if key.contains(',') {
        key.split(',')
            .map(|part| {
                part.trim().parse::<usize>().map_err(|_| {
                    Error::Input(format!("word key \"{key}\": bad symbol \"{part}\""))
                })
            })
            .collect::<Result<_>>()?
    } else {
        if alphabet > 10 {
            return Err(Error::Input(format!(
                "word key \"{key}\": alphabets beyond 10 need comma-separated keys"
            )));
        }
        key.chars()
            .map(|c| {
                c.to_digit(10).map(|d| d as usize).ok_or_else(|| {
                    Error::Input(format!("word key \"{key}\": bad symbol '{c}'"))
                })
            })
            .collect::<Result<_>>()?
    };
    let mut word = Word::with_capacity(symbols.len());
    for s in symbols {
        if s >= alphabet {
            return Err(Error::Input(format!(
                "word key \"{key}\": symbol {s} outside the alphabet of size {alphabet}"
            )));
        }
        word.push(s as u8);
    }
    Ok(word)
}

/// Applies `--set path=value` overrides to a parsed JSON document. Path
/// segments are separated by dots; numeric segments index arrays. Values
/// parse as JSON when possible and as strings otherwise.
pub fn apply_override(doc: &mut serde_json::Value, path: &str, value: &str) -> Result<()> {
    let parsed: serde_json::Value = serde_json::from_str(value)
        .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut cursor = doc;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Input(format!("bad override path \"{path}\"")));
    }
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                Error::Input(format!("override \"{path}\": segment \"{seg}\" indexes a non-array"))
            })?;
            if idx >= arr.len() {
                return Err(Error::Input(format!(
                    "override \"{path}\": index {idx} out of bounds ({} elements)",
                    arr.len()
                )));
            }
            if last {
                arr[idx] = parsed;
                return Ok(());
            }
            cursor = &mut arr[idx];
        } else {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                Error::Input(format!("override \"{path}\": segment \"{seg}\" keys a non-object"))
            })?;
            if last {
                obj.insert((*seg).to_string(), parsed);
                return Ok(());
            }
            cursor = obj.get_mut(*seg).ok_or_else(|| {
                Error::Input(format!("override \"{path}\": missing field \"{seg}\""))
            })?;
        }
    }
    unreachable!("loop returns on the last segment")
}
