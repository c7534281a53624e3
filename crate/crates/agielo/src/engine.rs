//! Match scheduling and the sequential rating loop.
//!
//! A [`ScoreMatrix`] holds the raw benchmark results (agents x test cases,
//! possibly sparse). A run shuffles every present cell into a fully
//! randomized schedule, replays the matches through [`play_match`], and
//! captures rating snapshots at configurable match percentages.
//!
//! The loop is a deliberately sequential state machine: the match order
//! defines the result, so updates are never reordered. Everything is
//! deterministic given the seed; the shuffle generator identity is recorded
//! in the output metadata.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::{play_match, Rating, RatingConstants, Variant};
use crate::scoring::ScoringFunction;
use crate::util::round1;

/// Identity of the schedule shuffle: ChaCha12 stream driving the `rand`
/// crate's Fisher-Yates shuffle, seeded with the 64-bit run seed.
pub const GENERATOR_NAME: &str = "chacha12/rand-0.9-fisher-yates";

/// The two player categories; matches only ever cross categories.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Agent,
    TestCase,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Category::Agent => "agent",
            Category::TestCase => "test_case",
        })
    }
}

/// A rated participant: an agent or a test case.
#[derive(Clone, Debug, PartialEq)]
pub struct Player {
    pub id: String,
    pub category: Category,
    pub rating: Rating,
    pub matches_played: u64,
}

/// One agent-vs-case encounter with its raw metric and normalized score.
///
/// `agent` and `case` index into the owning matrix's id lists.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MatchRecord {
    pub agent: usize,
    pub case: usize,
    pub raw_metric: f64,
    pub score: f64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
struct RawCell {
    agent: u32,
    case: u32,
    raw: f64,
}

/// Agents x test cases grid of raw metric values; absent cells are allowed
/// and are never scheduled.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    agent_ids: Vec<String>,
    case_ids: Vec<String>,
    cells: Vec<RawCell>,
    scoring_fn_id: String,
}

impl ScoreMatrix {
    /// Builds a matrix from parallel id lists and `(agent_idx, case_idx, raw)`
    /// triples, validating uniqueness, bounds and finiteness.
    pub fn new(
        agent_ids: Vec<String>,
        case_ids: Vec<String>,
        cells: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        check_unique_ids(&agent_ids, "agent")?;
        check_unique_ids(&case_ids, "case")?;
        let mut seen = HashMap::with_capacity(cells.len());
        let mut raw_cells = Vec::with_capacity(cells.len());
        for (agent, case, raw) in cells {
            if agent >= agent_ids.len() || case >= case_ids.len() {
                return Err(Error::format(format!(
                    "cell index ({agent}, {case}) out of bounds"
                )));
            }
            if seen.insert((agent, case), ()).is_some() {
                return Err(Error::format(format!(
                    "duplicate cell for agent '{}', case '{}'",
                    agent_ids[agent], case_ids[case]
                )));
            }
            if !raw.is_finite() {
                return Err(Error::format(format!(
                    "non-finite value {raw} for case '{}', agent '{}'",
                    case_ids[case], agent_ids[agent]
                )));
            }
            raw_cells.push(RawCell {
                agent: agent as u32,
                case: case as u32,
                raw,
            });
        }
        if raw_cells.is_empty() {
            return Err(Error::format("empty matrix: no present cells"));
        }
        Ok(ScoreMatrix {
            agent_ids,
            case_ids,
            cells: raw_cells,
            scoring_fn_id: "identity".to_string(),
        })
    }

    /// Parses the CSV schema `case_id,<agent_1>,...,<agent_k>` with one row
    /// per test case; empty cells mark absent matches.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut rows = csv_reader.records();
        let header = match rows.next() {
            Some(record) => record.map_err(csv_error)?,
            None => return Err(Error::format("empty input: missing header row")),
        };
        let mut fields = header.iter();
        match fields.next() {
            Some("case_id") => {}
            Some(other) => {
                return Err(Error::format(format!(
                    "first header column must be 'case_id', got '{other}'"
                )))
            }
            None => return Err(Error::format("empty header row")),
        }
        let agent_ids: Vec<String> = fields.map(str::to_string).collect();
        if agent_ids.is_empty() {
            return Err(Error::format("header declares no agent columns"));
        }
        if agent_ids.iter().any(String::is_empty) {
            return Err(Error::format("empty agent id in header row"));
        }
        check_unique_ids(&agent_ids, "agent")?;

        let mut case_ids = Vec::new();
        let mut cells = Vec::new();
        for (row_idx, record) in rows.enumerate() {
            let record = record.map_err(csv_error)?;
            if record.len() != agent_ids.len() + 1 {
                return Err(Error::format(format!(
                    "row {} has {} fields, expected {}",
                    row_idx + 2,
                    record.len(),
                    agent_ids.len() + 1
                )));
            }
            let case_id = record.get(0).unwrap_or_default();
            if case_id.is_empty() {
                return Err(Error::format(format!(
                    "empty case_id at row {}",
                    row_idx + 2
                )));
            }
            let case_idx = case_ids.len();
            case_ids.push(case_id.to_string());
            for (agent_idx, field) in record.iter().skip(1).enumerate() {
                if field.is_empty() {
                    continue; // absent match
                }
                let raw: f64 = field.parse().map_err(|_| {
                    Error::format(format!(
                        "non-numeric value \"{field}\" for case '{case_id}', agent '{}'",
                        agent_ids[agent_idx]
                    ))
                })?;
                if !raw.is_finite() {
                    return Err(Error::format(format!(
                        "non-finite value \"{field}\" for case '{case_id}', agent '{}'",
                        agent_ids[agent_idx]
                    )));
                }
                cells.push((agent_idx, case_idx, raw));
            }
        }
        check_unique_ids(&case_ids, "case")?;

        log::debug!(
            "loaded matrix: {} agents, {} cases, {} cells",
            agent_ids.len(),
            case_ids.len(),
            cells.len()
        );
        ScoreMatrix::new(agent_ids, case_ids, cells)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::format(format!("cannot open '{}': {e}", path.as_ref().display()))
        })?;
        ScoreMatrix::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the matrix back out in the ingestion CSV schema.
    pub fn to_csv_writer(&self, writer: impl Write) -> Result<()> {
        let mut grid: HashMap<(u32, u32), f64> = HashMap::with_capacity(self.cells.len());
        for cell in &self.cells {
            grid.insert((cell.agent, cell.case), cell.raw);
        }
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["case_id".to_string()];
        header.extend(self.agent_ids.iter().cloned());
        out.write_record(&header).map_err(csv_error)?;
        for (case_idx, case_id) in self.case_ids.iter().enumerate() {
            let mut row = vec![case_id.clone()];
            for agent_idx in 0..self.agent_ids.len() {
                row.push(match grid.get(&(agent_idx as u32, case_idx as u32)) {
                    Some(raw) => format!("{raw}"),
                    None => String::new(),
                });
            }
            out.write_record(&row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }

    pub fn with_scoring_fn(mut self, id: impl Into<String>) -> Self {
        self.scoring_fn_id = id.into();
        self
    }

    pub fn scoring_fn_id(&self) -> &str {
        &self.scoring_fn_id
    }

    pub fn agent_ids(&self) -> &[String] {
        &self.agent_ids
    }

    pub fn case_ids(&self) -> &[String] {
        &self.case_ids
    }

    pub fn n_agents(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn n_cases(&self) -> usize {
        self.case_ids.len()
    }

    pub fn n_matches(&self) -> usize {
        self.cells.len()
    }

    /// Applies the matrix's scoring function to every cell, aborting on the
    /// first offending cell.
    pub fn scored_records(&self, scoring: &ScoringFunction) -> Result<Vec<MatchRecord>> {
        self.cells
            .iter()
            .map(|cell| {
                let score = scoring.apply(cell.raw).map_err(|e| {
                    Error::domain(format!(
                        "scoring failed for case '{}', agent '{}': {e}",
                        self.case_ids[cell.case as usize], self.agent_ids[cell.agent as usize]
                    ))
                })?;
                Ok(MatchRecord {
                    agent: cell.agent as usize,
                    case: cell.case as usize,
                    raw_metric: cell.raw,
                    score,
                })
            })
            .collect()
    }
}

fn check_unique_ids(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for id in ids {
        if let Some(()) = seen.insert(id.as_str(), ()) {
            return Err(Error::format(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

/// Everything that parameterizes one rating run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub passes: u32,
    /// Match percentages, strictly increasing, each in `(0, 100]`.
    pub checkpoints: Vec<f64>,
    pub constants: RatingConstants,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::argument("passes must be at least 1"));
        }
        for w in self.checkpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::argument("checkpoints must be strictly increasing"));
            }
        }
        if let (Some(first), Some(last)) = (self.checkpoints.first(), self.checkpoints.last()) {
            if *first <= 0.0 || *last > 100.0 {
                return Err(Error::argument("checkpoints must lie in (0, 100]"));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.constants.variant
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            passes: 1,
            checkpoints: default_checkpoints(),
            constants: RatingConstants::default(),
        }
    }
}

/// The 10%, 20%, ..., 100% grid.
pub fn default_checkpoints() -> Vec<f64> {
    (1..=10).map(|i| (i * 10) as f64).collect()
}

pub(crate) fn scheduled_cell_order(matrix: &ScoreMatrix, config: &RunConfig) -> Vec<u32> {
    let n = matrix.cells.len() as u32;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut order = Vec::with_capacity(n as usize * config.passes as usize);
    for _ in 0..config.passes {
        let mut pass: Vec<u32> = (0..n).collect();
        pass.shuffle(&mut rng);
        order.extend(pass);
    }
    order
}

/// Fully randomized match schedule: a uniform permutation of every present
/// cell, repeated `passes` times with independent shuffles. Deterministic
/// given the seed. Pairs are `(agent_idx, case_idx)` into the matrix ids.
pub fn build_schedule(matrix: &ScoreMatrix, config: &RunConfig) -> Result<Vec<(usize, usize)>> {
    config.validate()?;
    if matrix.cells.is_empty() {
        return Err(Error::argument("cannot schedule an empty matrix"));
    }
    Ok(scheduled_cell_order(matrix, config)
        .into_iter()
        .map(|i| {
            let cell = &matrix.cells[i as usize];
            (cell.agent as usize, cell.case as usize)
        })
        .collect())
}

/// Ratings of every player at one checkpoint, aligned with the run's
/// player order (agents first, then cases).
#[derive(Clone, Debug)]
pub struct RatingSnapshot {
    pub match_percentage: f64,
    /// Number of schedule entries applied when the snapshot was taken.
    pub matches_completed: usize,
    pub ratings: Vec<Rating>,
}

/// Final players plus the checkpoint snapshots of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub players: Vec<Player>,
    pub snapshots: Vec<RatingSnapshot>,
}

impl RunOutcome {
    pub fn agents(&self) -> impl Iterator<Item = &Player> {
        self.players
            .iter()
            .filter(|p| p.category == Category::Agent)
    }

    pub fn cases(&self) -> impl Iterator<Item = &Player> {
        self.players
            .iter()
            .filter(|p| p.category == Category::TestCase)
    }
}

fn checkpoint_cut(percentage: f64, total: usize) -> usize {
    if percentage >= 100.0 {
        return total;
    }
    let cut = (percentage / 100.0 * total as f64).ceil() as usize;
    cut.min(total)
}

fn take_due_snapshots(
    done: usize,
    players: &[Player],
    cut_iter: &mut std::iter::Peekable<std::slice::Iter<'_, (usize, f64)>>,
    snapshots: &mut Vec<RatingSnapshot>,
) {
    while let Some(&&(cut, pct)) = cut_iter.peek() {
        if cut != done {
            break;
        }
        snapshots.push(RatingSnapshot {
            match_percentage: pct,
            matches_completed: done,
            ratings: players.iter().map(|p| p.rating).collect(),
        });
        cut_iter.next();
    }
}

/// Replays every scheduled match through the rating update.
///
/// All players start from the `(initial_mu, initial_sigma)` prior of the
/// config's constants; each match updates both sides from their pre-match
/// beliefs; snapshots are captured at the configured percentages. The output
/// is deterministic given `(matrix, config)`.
pub fn run_ratings(matrix: &ScoreMatrix, config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    if matrix.cells.is_empty() {
        return Err(Error::argument("cannot rate an empty matrix"));
    }
    let scoring = ScoringFunction::from_id(matrix.scoring_fn_id())?;
    let records = matrix.scored_records(&scoring)?;
    let order = scheduled_cell_order(matrix, config);

    let initial = config.constants.initial_rating();
    let mut players: Vec<Player> = matrix
        .agent_ids
        .iter()
        .map(|id| (id, Category::Agent))
        .chain(matrix.case_ids.iter().map(|id| (id, Category::TestCase)))
        .map(|(id, category)| Player {
            id: id.clone(),
            category,
            rating: initial,
            matches_played: 0,
        })
        .collect();
    let case_offset = matrix.agent_ids.len();

    let cuts: Vec<(usize, f64)> = config
        .checkpoints
        .iter()
        .map(|&p| (checkpoint_cut(p, order.len()), p))
        .collect();
    let mut cut_iter = cuts.iter().peekable();
    let mut snapshots = Vec::with_capacity(cuts.len());

    take_due_snapshots(0, &players, &mut cut_iter, &mut snapshots);
    for (done, &cell_idx) in order.iter().enumerate() {
        let record = &records[cell_idx as usize];
        let agent_idx = record.agent;
        let case_idx = case_offset + record.case;
        let (agent_rating, case_rating) = (players[agent_idx].rating, players[case_idx].rating);
        let (new_agent, new_case) =
            play_match(agent_rating, case_rating, record.score, &config.constants)?;
        players[agent_idx].rating = new_agent;
        players[agent_idx].matches_played += 1;
        players[case_idx].rating = new_case;
        players[case_idx].matches_played += 1;
        take_due_snapshots(done + 1, &players, &mut cut_iter, &mut snapshots);
    }

    log::debug!(
        "run complete: {} players, {} matches, {} snapshots",
        players.len(),
        order.len(),
        snapshots.len()
    );
    Ok(RunOutcome { players, snapshots })
}

/// Run metadata serialized alongside the players.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunMetadata {
    pub seed: u64,
    pub passes: u32,
    pub variant: Variant,
    pub generator: String,
    pub scoring_fn: String,
    pub checkpoints: Vec<f64>,
    pub n_agents: usize,
    pub n_cases: usize,
    pub n_matches: usize,
    /// Source CSV path as given on the command line, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlayerRecord {
    pub id: String,
    pub category: Category,
    pub mu: f64,
    pub sigma: f64,
    pub matches_played: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SnapshotEntry {
    pub id: String,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SnapshotRecord {
    pub match_percentage: f64,
    pub matches_completed: usize,
    pub players: Vec<SnapshotEntry>,
}

/// The serialized form of a run: metadata, players with ratings at 1-decimal
/// precision, and the snapshot series.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunDocument {
    pub metadata: RunMetadata,
    pub players: Vec<PlayerRecord>,
    pub snapshots: Vec<SnapshotRecord>,
}

impl RunDocument {
    pub fn new(
        matrix: &ScoreMatrix,
        config: &RunConfig,
        outcome: &RunOutcome,
        input: Option<String>,
    ) -> Self {
        let players = outcome
            .players
            .iter()
            .map(|p| PlayerRecord {
                id: p.id.clone(),
                category: p.category,
                mu: round1(p.rating.mu),
                sigma: round1(p.rating.sigma),
                matches_played: p.matches_played,
            })
            .collect();
        let snapshots = outcome
            .snapshots
            .iter()
            .map(|snap| SnapshotRecord {
                match_percentage: snap.match_percentage,
                matches_completed: snap.matches_completed,
                players: outcome
                    .players
                    .iter()
                    .zip(&snap.ratings)
                    .map(|(p, r)| SnapshotEntry {
                        id: p.id.clone(),
                        mu: round1(r.mu),
                        sigma: round1(r.sigma),
                    })
                    .collect(),
            })
            .collect();
        RunDocument {
            metadata: RunMetadata {
                seed: config.seed,
                passes: config.passes,
                variant: config.constants.variant,
                generator: GENERATOR_NAME.to_string(),
                scoring_fn: matrix.scoring_fn_id().to_string(),
                checkpoints: config.checkpoints.clone(),
                n_agents: matrix.n_agents(),
                n_cases: matrix.n_cases(),
                n_matches: matrix.n_matches(),
                input,
            },
            players,
            snapshots,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("serializing run document: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(format!("parsing run document: {e}")))
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::format(format!("cannot read '{}': {e}", path.as_ref().display()))
        })?;
        RunDocument::from_json_str(&text)
    }

    /// Reconstructs the player list (ratings at serialized precision).
    pub fn players(&self) -> Vec<Player> {
        self.players
            .iter()
            .map(|p| Player {
                id: p.id.clone(),
                category: p.category,
                rating: Rating::new(p.mu, p.sigma),
                matches_played: p.matches_played,
            })
            .collect()
    }

    /// Reconstructs the full outcome (players plus snapshots) at serialized
    /// precision.
    pub fn outcome(&self) -> RunOutcome {
        RunOutcome {
            players: self.players(),
            snapshots: self
                .snapshots
                .iter()
                .map(|s| RatingSnapshot {
                    match_percentage: s.match_percentage,
                    matches_completed: s.matches_completed,
                    ratings: s
                        .players
                        .iter()
                        .map(|p| Rating::new(p.mu, p.sigma))
                        .collect(),
                })
                .collect(),
        }
    }
}
