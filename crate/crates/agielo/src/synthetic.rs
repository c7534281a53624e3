//! Ground-truth simulator for validating the rating pipeline.
//!
//! Samples true ratings for a synthetic population, generates match outcomes
//! through the probabilistic expected-score link, and measures how well a
//! finished run recovers the truth. Outcome generation draws each cell from
//! its own counter-derived random stream, so results are independent of
//! generation order.
//!
//! The simulator shares no state with the engine: it emits a regular
//! [`ScoreMatrix`] (and its CSV form), so end-to-end checks exercise the
//! real ingestion path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{Category, Player, ScoreMatrix};
use crate::error::{Error, Result};
use crate::rating::{INITIAL_MU, INITIAL_SIGMA};
use crate::util::round6;

/// How a match outcome is drawn from the win probability.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeMode {
    /// Bernoulli draw: `S` is 0 or 1 with mean equal to the win probability.
    Binary,
    /// Noise-free: `S` equals the win probability exactly.
    Continuous,
}

impl OutcomeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeMode::Binary => "binary",
            OutcomeMode::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for OutcomeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(OutcomeMode::Binary),
            "continuous" => Ok(OutcomeMode::Continuous),
            other => Err(Error::argument(format!(
                "unknown outcome mode '{other}' (expected 'binary' or 'continuous')"
            ))),
        }
    }
}

impl std::fmt::Display for OutcomeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters of a synthetic population.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PopulationSpec {
    pub n_agents: usize,
    pub n_cases: usize,
    pub prior_mu: f64,
    pub prior_sigma: f64,
    pub outcome_mode: OutcomeMode,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn new(n_agents: usize, n_cases: usize, outcome_mode: OutcomeMode, seed: u64) -> Self {
        PopulationSpec {
            n_agents,
            n_cases,
            prior_mu: INITIAL_MU,
            prior_sigma: INITIAL_SIGMA,
            outcome_mode,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::argument(format!(
                "population needs at least 2 agents, got {}",
                self.n_agents
            )));
        }
        if self.n_cases < 2 {
            return Err(Error::argument(format!(
                "population needs at least 2 cases, got {}",
                self.n_cases
            )));
        }
        if self.n_agents > u32::MAX as usize || self.n_cases > u32::MAX as usize {
            return Err(Error::argument(
                "population dimensions exceed the cell-stream space",
            ));
        }
        if !self.prior_mu.is_finite() {
            return Err(Error::domain(format!(
                "prior mu must be finite, got {}",
                self.prior_mu
            )));
        }
        if !(self.prior_sigma.is_finite() && self.prior_sigma >= 0.0) {
            return Err(Error::domain(format!(
                "prior sigma must be non-negative, got {}",
                self.prior_sigma
            )));
        }
        Ok(())
    }
}

/// One player's ground-truth rating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub id: String,
    pub category: Category,
    pub true_rating: f64,
}

/// Ground-truth ratings of a sampled population.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub agents: Vec<TruthEntry>,
    pub cases: Vec<TruthEntry>,
}

impl Population {
    /// Serializes all entries (agents first) as a truth JSON array.
    pub fn to_json_string(&self) -> Result<String> {
        let rounded: Vec<TruthEntry> = self
            .agents
            .iter()
            .chain(&self.cases)
            .map(|e| TruthEntry {
                id: e.id.clone(),
                category: e.category,
                true_rating: round6(e.true_rating),
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rounded)
            .map_err(|e| Error::format(format!("serializing truth: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let entries: Vec<TruthEntry> =
            serde_json::from_str(text).map_err(|e| Error::format(format!("parsing truth: {e}")))?;
        let (agents, cases) = entries
            .into_iter()
            .partition(|e| e.category == Category::Agent);
        Ok(Population { agents, cases })
    }
}

// Distinct ChaCha streams under one seed: population sampling uses the
// all-ones stream, cell (a, c) uses stream a << 32 | c.
const POPULATION_STREAM: u64 = u64::MAX;

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn zero_padded(prefix: &str, index: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("{prefix}_{:0width$}", index + 1)
}

/// Draws true ratings for every agent and case from the Gaussian prior.
/// Deterministic in the population seed.
pub fn sample_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, POPULATION_STREAM);
    let mut draw = |id: String, category: Category| -> TruthEntry {
        let standard: f64 = StandardNormal.sample(&mut rng);
        TruthEntry {
            id,
            category,
            true_rating: spec.prior_mu + spec.prior_sigma * standard,
        }
    };
    let agents = (0..spec.n_agents)
        .map(|i| draw(zero_padded("agent", i, spec.n_agents), Category::Agent))
        .collect();
    let cases = (0..spec.n_cases)
        .map(|i| draw(zero_padded("case", i, spec.n_cases), Category::TestCase))
        .collect();
    Ok(Population { agents, cases })
}

/// Win probability of the agent: `1 / (1 + 10^((r_case - r_agent)/400))`.
pub fn win_probability(r_agent_true: f64, r_case_true: f64) -> f64 {
    (1.0 + 10f64.powf((r_case_true - r_agent_true) / 400.0)).recip()
}

/// Draws one match score from the probabilistic link.
pub fn simulate_outcome(
    r_agent_true: f64,
    r_case_true: f64,
    mode: OutcomeMode,
    rng: &mut impl Rng,
) -> f64 {
    let p = win_probability(r_agent_true, r_case_true);
    match mode {
        OutcomeMode::Continuous => p,
        OutcomeMode::Binary => {
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Generates the full dense score matrix for a population. Each cell's
/// randomness comes from its own stream, so any generation order (or
/// parallel generation) yields the same matrix.
pub fn generate_matrix(
    population: &Population,
    mode: OutcomeMode,
    seed: u64,
) -> Result<ScoreMatrix> {
    let agent_ids: Vec<String> = population.agents.iter().map(|e| e.id.clone()).collect();
    let case_ids: Vec<String> = population.cases.iter().map(|e| e.id.clone()).collect();
    let mut cells = Vec::with_capacity(agent_ids.len() * case_ids.len());
    for (a, agent) in population.agents.iter().enumerate() {
        for (c, case) in population.cases.iter().enumerate() {
            let mut rng = stream_rng(seed, ((a as u64) << 32) | c as u64);
            let score = simulate_outcome(agent.true_rating, case.true_rating, mode, &mut rng);
            cells.push((a, c, score));
        }
    }
    ScoreMatrix::new(agent_ids, case_ids, cells)
}

/// How well estimated ratings recover the generating truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Spearman between true and estimated agent ratings.
    pub rho_agents: f64,
    /// Spearman between true and estimated case ratings.
    pub rho_cases: f64,
    /// Mean absolute rating error after median-centering both scales.
    pub mean_abs_mu_error: f64,
}

/// Compares estimated players against the generating population.
pub fn recovery_report(population: &Population, players: &[Player]) -> Result<RecoveryReport> {
    let mut estimated: std::collections::HashMap<(&str, Category), f64> =
        std::collections::HashMap::with_capacity(players.len());
    for p in players {
        estimated.insert((p.id.as_str(), p.category), p.rating.mu);
    }
    let collect = |entries: &[TruthEntry]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut truth = Vec::with_capacity(entries.len());
        let mut est = Vec::with_capacity(entries.len());
        for e in entries {
            let mu = estimated.get(&(e.id.as_str(), e.category)).ok_or_else(|| {
                Error::argument(format!("estimated players are missing '{}'", e.id))
            })?;
            truth.push(e.true_rating);
            est.push(*mu);
        }
        Ok((truth, est))
    };
    let (agent_truth, agent_est) = collect(&population.agents)?;
    let (case_truth, case_est) = collect(&population.cases)?;
    if players.len() != agent_truth.len() + case_truth.len() {
        return Err(Error::argument(format!(
            "population has {} players but the run produced {}",
            agent_truth.len() + case_truth.len(),
            players.len()
        )));
    }

    let rho_agents = crate::analysis::spearman(&agent_truth, &agent_est)?;
    let rho_cases = crate::analysis::spearman(&case_truth, &case_est)?;

    let all_truth: Vec<f64> = agent_truth.iter().chain(&case_truth).copied().collect();
    let all_est: Vec<f64> = agent_est.iter().chain(&case_est).copied().collect();
    let truth_center = median(&all_truth);
    let est_center = median(&all_est);
    let mean_abs_mu_error = all_truth
        .iter()
        .zip(&all_est)
        .map(|(t, e)| ((e - est_center) - (t - truth_center)).abs())
        .sum::<f64>()
        / all_truth.len() as f64;

    Ok(RecoveryReport {
        rho_agents,
        rho_cases,
        mean_abs_mu_error,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
