use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarnessError;
use crate::ptm::{all_inputs, dyck_program, random_program, run_quiet, Program, RandomProgramConfig};
use crate::tm::{builtin_machines, tm2_to_ptm, TuringMachine};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Dyck,
    /// A two-tape machine compiled to a 2-PTM.
    Tm { name: String },
    Random { seed: u64, index: usize },
    /// A `.ptm` file that is not the Dyck program.
    File { name: String },
}

#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub source: Source,
    pub program: Program,
    /// The source machine, for compiled cases.
    pub machine: Option<TuringMachine>,
    pub inputs: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusConfig {
    /// Inputs up to this length are run exhaustively, except on random programs.
    pub max_input_len: usize,
    pub random_programs: usize,
    /// Inputs sampled per random program, always including the empty input.
    pub random_inputs: usize,
    /// A random program is kept only if it halts within this many steps on
    /// every input up to `max_input_len`.
    pub random_step_limit: u64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { max_input_len: 8, random_programs: 50, random_inputs: 12, random_step_limit: 400, seed: 0 }
    }
}

/// The Dyck program, the built-in machines compiled, and seeded random
/// halting programs.
pub fn builtin_corpus(cfg: &CorpusConfig) -> Result<Vec<Case>, HarnessError> {
    let inputs = all_inputs(cfg.max_input_len);
    let mut cases = vec![Case {
        id: "dyck".into(),
        source: Source::Dyck,
        program: dyck_program(),
        machine: None,
        inputs: inputs.clone(),
    }];
    for (name, m) in builtin_machines() {
        cases.push(compiled_case(name, m, inputs.clone())?);
    }
    cases.extend(random_cases(cfg));
    Ok(cases)
}

fn compiled_case(name: &str, m: TuringMachine, inputs: Vec<Vec<bool>>) -> Result<Case, HarnessError> {
    Ok(Case {
        id: format!("tm:{name}"),
        source: Source::Tm { name: name.into() },
        program: tm2_to_ptm(&m)?,
        machine: Some(m),
        inputs,
    })
}

/// Reads every `.ptm` and `.tm` file in `dir` (sorted by name) and appends
/// the seeded random programs.
pub fn load_corpus(dir: &Path, cfg: &CorpusConfig) -> Result<Vec<Case>, HarnessError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ptm" | "tm")))
        .collect();
    paths.sort();
    let inputs = all_inputs(cfg.max_input_len);
    let mut cases = Vec::new();
    for path in paths {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = std::fs::read_to_string(&path)?;
        if path.extension().and_then(|e| e.to_str()) == Some("tm") {
            cases.push(compiled_case(&name, TuringMachine::parse(&text)?, inputs.clone())?);
        } else {
            let program = Program::parse(&text)?;
            let source = if program == dyck_program() { Source::Dyck } else { Source::File { name: name.clone() } };
            cases.push(Case { id: name, source, program, machine: None, inputs: inputs.clone() });
        }
    }
    cases.extend(random_cases(cfg));
    Ok(cases)
}

/// Random programs that halt on every input up to `max_input_len`, each
/// with a seeded sample of those inputs.
pub fn random_cases(cfg: &CorpusConfig) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all = all_inputs(cfg.max_input_len);
    let pcfg = RandomProgramConfig::default();
    let mut cases = Vec::new();
    while cases.len() < cfg.random_programs {
        let p = random_program(&mut rng, &pcfg);
        if !all.iter().all(|x| run_quiet(&p, x, cfg.random_step_limit).is_ok()) {
            continue;
        }
        let index = cases.len();
        let mut inputs = vec![Vec::new()];
        inputs.extend(all[1..].choose_multiple(&mut rng, cfg.random_inputs.saturating_sub(1)).cloned());
        cases.push(Case {
            id: format!("random:{}:{index}", cfg.seed),
            source: Source::Random { seed: cfg.seed, index },
            program: p,
            machine: None,
            inputs,
        });
    }
    cases
}
