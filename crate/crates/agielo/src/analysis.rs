//! Post-run analytics: per-case performance prediction, long-tail hard sets,
//! oracle ratings and competency gaps, percentile curves, and the
//! reliability suite (rank consistency plus binned prediction errors).
//!
//! Everything here is pure over immutable snapshots; the functions can be
//! evaluated concurrently and their results do not depend on call order.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::engine::{Category, MatchRecord, Player, RunConfig, RunOutcome, ScoreMatrix};
use crate::error::{Error, Result};
use crate::rating::elo_expected_score;
use crate::scoring::ScoringFunction;
use crate::util::{fmt_percent, round1, round6};

/// Default rating-bin width for the binned prediction errors.
pub const DEFAULT_BIN_WIDTH: f64 = 25.0;

/// Expected performance of an agent rated `r_a` on a case rated `r_t`,
/// projected back into metric space: `f^-1(1 / (1 + 10^((r_t - r_a)/400)))`.
pub fn predict_metric(r_a: f64, r_t: f64, scoring: &ScoringFunction) -> Result<f64> {
    let expected = elo_expected_score(r_a, r_t)?;
    scoring.invert(expected)
}

/// The set of case ids whose predicted metric for the agent falls strictly
/// below `m_theta`. Input order is preserved.
///
/// For identity scoring and `m_theta = 0.5` this is exactly the set of cases
/// rated above the agent.
pub fn hard_set(
    case_ratings: &[(&str, f64)],
    r_a: f64,
    m_theta: f64,
    scoring: &ScoringFunction,
) -> Result<Vec<String>> {
    let mut hard = Vec::new();
    for &(id, r_t) in case_ratings {
        if predict_metric(r_a, r_t, scoring)? < m_theta {
            hard.push(id.to_string());
        }
    }
    Ok(hard)
}

/// Rating an oracle needs to hold at least `s_theta` confidence against the
/// hardest case: `r_t_max - 400 * log10((1 - s_theta) / s_theta)`.
pub fn oracle_rating(r_t_max: f64, s_theta: f64) -> Result<f64> {
    if !r_t_max.is_finite() {
        return Err(Error::domain(format!(
            "r_t_max must be finite, got {r_t_max}"
        )));
    }
    if !(s_theta.is_finite() && 0.0 < s_theta && s_theta < 1.0) {
        return Err(Error::domain(format!(
            "oracle confidence must lie strictly inside (0, 1), got {s_theta}"
        )));
    }
    Ok(r_t_max - 400.0 * ((1.0 - s_theta) / s_theta).log10())
}

/// Rating points separating an agent from an oracle; negative when the agent
/// already exceeds it.
pub fn competency_gap(oracle_r: f64, r_a: f64) -> f64 {
    oracle_r - r_a
}

/// A confidence threshold with its equivalent metric-space threshold.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct OracleSpec {
    pub s_theta: f64,
    pub m_theta: f64,
}

impl OracleSpec {
    pub fn new(s_theta: f64, scoring: &ScoringFunction) -> Result<Self> {
        if !(s_theta.is_finite() && 0.0 < s_theta && s_theta < 1.0) {
            return Err(Error::domain(format!(
                "oracle confidence must lie strictly inside (0, 1), got {s_theta}"
            )));
        }
        Ok(OracleSpec {
            s_theta,
            m_theta: scoring.invert(s_theta)?,
        })
    }
}

/// Empirical cumulative distribution of case ratings.
#[derive(Clone, Debug)]
pub struct PercentileCurve {
    sorted: Vec<f64>,
}

/// Right-continuous step function `F(x) = |{t : r_t <= x}| / N`.
pub fn percentile_curve(case_ratings: &[f64]) -> Result<PercentileCurve> {
    if case_ratings.is_empty() {
        return Err(Error::argument(
            "percentile curve requires at least one rating",
        ));
    }
    for &r in case_ratings {
        if !r.is_finite() {
            return Err(Error::domain(format!("ratings must be finite, got {r}")));
        }
    }
    let mut sorted = case_ratings.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    Ok(PercentileCurve { sorted })
}

impl PercentileCurve {
    /// Cumulative fraction of cases rated at or below `x`.
    pub fn fraction_at(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&r| r <= x);
        below as f64 / self.sorted.len() as f64
    }

    /// The curve's jump points: one `(rating, cumulative_fraction)` pair per
    /// distinct rating, in increasing order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut points = Vec::new();
        for (i, &r) in self.sorted.iter().enumerate() {
            if i + 1 == self.sorted.len() || self.sorted[i + 1] > r {
                points.push((r, (i + 1) as f64 / n));
            }
        }
        points
    }

    /// Emits `rating,cumulative_fraction` rows.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "rating,cumulative_fraction")?;
        for (rating, fraction) in self.points() {
            writeln!(writer, "{},{}", round6(rating), round6(fraction))?;
        }
        Ok(())
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::argument(format!(
            "paired samples must have equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::argument(
            "rank correlation requires at least two pairs",
        ));
    }
    for &v in xs.iter().chain(ys) {
        if !v.is_finite() {
            return Err(Error::domain(format!("samples must be finite, got {v}")));
        }
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the average rank of their run
        let shared = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain(
            "rank correlation is undefined for a constant sample",
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Per-(agent, rating-bin) comparison cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedCell {
    pub agent: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    pub empirical_mean: f64,
    pub predicted: f64,
}

/// Binned prediction errors: MAE/MSE over all populated (agent, bin) pairs.
#[derive(Clone, Debug)]
pub struct BinnedErrors {
    pub mae: f64,
    pub mse: f64,
    pub bin_width: f64,
    pub cells: Vec<BinnedCell>,
}

/// Partitions cases into rating bins of `bin_width` points and compares, for
/// every populated (agent, bin) pair, the empirical mean metric against the
/// prediction at the bin center. Empty bins are skipped.
pub fn binned_errors(
    records: &[MatchRecord],
    agent_ratings: &[f64],
    case_ratings: &[f64],
    scoring: &ScoringFunction,
    bin_width: f64,
) -> Result<BinnedErrors> {
    if records.is_empty() {
        return Err(Error::argument("binned errors require at least one record"));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::domain(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }

    let mut sums: BTreeMap<(usize, i64), (f64, usize)> = BTreeMap::new();
    for record in records {
        if record.agent >= agent_ratings.len() || record.case >= case_ratings.len() {
            return Err(Error::argument(format!(
                "record indexes player ({}, {}) outside the rating tables",
                record.agent, record.case
            )));
        }
        let bin = (case_ratings[record.case] / bin_width).floor() as i64;
        let entry = sums.entry((record.agent, bin)).or_insert((0.0, 0));
        entry.0 += record.raw_metric;
        entry.1 += 1;
    }

    let mut cells = Vec::with_capacity(sums.len());
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for ((agent, bin), (sum, count)) in sums {
        let empirical = sum / count as f64;
        let center = (bin as f64 + 0.5) * bin_width;
        let predicted = predict_metric(agent_ratings[agent], center, scoring)?;
        let err = empirical - predicted;
        abs_sum += err.abs();
        sq_sum += err * err;
        cells.push(BinnedCell {
            agent,
            bin_lo: bin as f64 * bin_width,
            bin_hi: (bin + 1) as f64 * bin_width,
            count,
            empirical_mean: empirical,
            predicted,
        });
    }
    let n = cells.len() as f64;
    Ok(BinnedErrors {
        mae: abs_sum / n,
        mse: sq_sum / n,
        bin_width,
        cells,
    })
}

/// Reliability metrics at one checkpoint of the match schedule.
///
/// The rank correlations are `None` when the completed-match prefix leaves
/// fewer than two populated players on a side (or a constant sample).
#[derive(Clone, Debug, Serialize)]
pub struct CheckpointReliability {
    pub match_percentage: f64,
    pub rho_t: Option<f64>,
    pub rho_a: Option<f64>,
    pub mae: f64,
    pub mse: f64,
}

/// Rank consistency and binned prediction errors of a finished run.
#[derive(Clone, Debug)]
pub struct ReliabilityReport {
    /// Spearman between case ratings and mean per-case performance;
    /// negative by construction (harder cases score lower).
    pub rho_t: f64,
    /// Spearman between agent ratings and mean per-agent performance.
    pub rho_a: f64,
    pub mae: f64,
    pub mse: f64,
    pub bin_width: f64,
    pub checkpoints: Vec<CheckpointReliability>,
}

struct SubsetMetrics {
    rho_t: Option<f64>,
    rho_a: Option<f64>,
    mae: f64,
    mse: f64,
}

fn subset_metrics(
    records: &[MatchRecord],
    agent_mus: &[f64],
    case_mus: &[f64],
    scoring: &ScoringFunction,
    bin_width: f64,
) -> Result<SubsetMetrics> {
    let mut agent_sum = vec![(0.0, 0usize); agent_mus.len()];
    let mut case_sum = vec![(0.0, 0usize); case_mus.len()];
    for r in records {
        agent_sum[r.agent].0 += r.raw_metric;
        agent_sum[r.agent].1 += 1;
        case_sum[r.case].0 += r.raw_metric;
        case_sum[r.case].1 += 1;
    }
    let correlate = |mus: &[f64], sums: &[(f64, usize)]| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &(sum, count)) in sums.iter().enumerate() {
            if count > 0 {
                xs.push(mus[i]);
                ys.push(sum / count as f64);
            }
        }
        spearman(&xs, &ys).ok()
    };
    let rho_a = correlate(agent_mus, &agent_sum);
    let rho_t = correlate(case_mus, &case_sum);
    let errors = binned_errors(records, agent_mus, case_mus, scoring, bin_width)?;
    Ok(SubsetMetrics {
        rho_t,
        rho_a,
        mae: errors.mae,
        mse: errors.mse,
    })
}

fn player_ratings_for(matrix: &ScoreMatrix, players: &[Player]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut by_id: HashMap<(&str, Category), f64> = HashMap::with_capacity(players.len());
    for p in players {
        by_id.insert((p.id.as_str(), p.category), p.rating.mu);
    }
    let lookup = |id: &String, category: Category| -> Result<f64> {
        by_id.get(&(id.as_str(), category)).copied().ok_or_else(|| {
            Error::argument(format!("player '{id}' ({category}) missing from the run"))
        })
    };
    let agents = matrix
        .agent_ids()
        .iter()
        .map(|id| lookup(id, Category::Agent))
        .collect::<Result<Vec<_>>>()?;
    let cases = matrix
        .case_ids()
        .iter()
        .map(|id| lookup(id, Category::TestCase))
        .collect::<Result<Vec<_>>>()?;
    Ok((agents, cases))
}

/// Reliability report of a finished run against its source matrix: `rho_t`,
/// `rho_a`, and binned MAE/MSE over every populated (agent, bin) pair.
pub fn consistency_report(
    matrix: &ScoreMatrix,
    players: &[Player],
    scoring: &ScoringFunction,
    bin_width: f64,
) -> Result<ReliabilityReport> {
    if matrix.n_agents() < 2 || matrix.n_cases() < 2 {
        return Err(Error::argument(
            "consistency report requires at least two agents and two cases",
        ));
    }
    let (agent_mus, case_mus) = player_ratings_for(matrix, players)?;
    let records = matrix.scored_records(scoring)?;
    let metrics = subset_metrics(&records, &agent_mus, &case_mus, scoring, bin_width)?;
    let (rho_t, rho_a) = match (metrics.rho_t, metrics.rho_a) {
        (Some(t), Some(a)) => (t, a),
        _ => {
            return Err(Error::domain(
                "rank correlations are undefined for this run (degenerate sample)",
            ))
        }
    };
    Ok(ReliabilityReport {
        rho_t,
        rho_a,
        mae: metrics.mae,
        mse: metrics.mse,
        bin_width,
        checkpoints: Vec::new(),
    })
}

/// Full reliability report including the per-checkpoint series.
///
/// Each checkpoint is evaluated with the ratings of its snapshot against the
/// matches completed by that point in the schedule, mirroring how the system
/// converges as match data accumulates.
pub fn consistency_report_with_checkpoints(
    matrix: &ScoreMatrix,
    config: &RunConfig,
    outcome: &RunOutcome,
    scoring: &ScoringFunction,
    bin_width: f64,
) -> Result<ReliabilityReport> {
    let mut report = consistency_report(matrix, &outcome.players, scoring, bin_width)?;
    let n_agents = matrix.n_agents();
    // snapshot ratings are sliced positionally, so the player order must be
    // exactly the matrix's agents followed by its cases
    let aligned = outcome.players.len() == n_agents + matrix.n_cases()
        && matrix.agent_ids().iter().enumerate().all(|(i, id)| {
            outcome.players[i].id == *id && outcome.players[i].category == Category::Agent
        })
        && matrix.case_ids().iter().enumerate().all(|(i, id)| {
            let p = &outcome.players[n_agents + i];
            p.id == *id && p.category == Category::TestCase
        });
    if !aligned {
        return Err(Error::argument(
            "run players do not align with the matrix (ids or order differ)",
        ));
    }
    let records = matrix.scored_records(scoring)?;
    let order = crate::engine::scheduled_cell_order(matrix, config);

    let mut checkpoints = Vec::with_capacity(outcome.snapshots.len());
    for snapshot in &outcome.snapshots {
        let completed = snapshot.matches_completed.min(order.len());
        if completed == 0 {
            continue;
        }
        let subset: Vec<MatchRecord> = order[..completed]
            .iter()
            .map(|&i| records[i as usize])
            .collect();
        let agent_mus: Vec<f64> = snapshot.ratings[..n_agents].iter().map(|r| r.mu).collect();
        let case_mus: Vec<f64> = snapshot.ratings[n_agents..].iter().map(|r| r.mu).collect();
        let metrics = subset_metrics(&subset, &agent_mus, &case_mus, scoring, bin_width)?;
        checkpoints.push(CheckpointReliability {
            match_percentage: snapshot.match_percentage,
            rho_t: metrics.rho_t,
            rho_a: metrics.rho_a,
            mae: metrics.mae,
            mse: metrics.mse,
        });
    }
    report.checkpoints = checkpoints;
    Ok(report)
}

/// One oracle threshold of a gap report.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GapEntry {
    pub confidence: f64,
    pub oracle_rating: f64,
    pub gap: f64,
}

/// Competency gaps from the best agent to oracles at several confidences.
#[derive(Clone, Debug)]
pub struct GapReport {
    pub r_t_max: f64,
    pub r_a_max: f64,
    /// Expected metric of the best agent on the hardest case.
    pub expected_metric: f64,
    /// Sorted by confidence; gaps are strictly increasing.
    pub entries: Vec<GapEntry>,
}

impl GapReport {
    pub fn gap_at(&self, confidence: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.confidence == confidence)
            .map(|e| e.gap)
    }
}

/// Builds the gap report from the extreme ratings of the two categories.
pub fn gap_report(
    r_t_max: f64,
    r_a_max: f64,
    confidences: &[f64],
    scoring: &ScoringFunction,
) -> Result<GapReport> {
    if confidences.is_empty() {
        return Err(Error::argument(
            "gap report requires at least one confidence threshold",
        ));
    }
    let expected_metric = predict_metric(r_a_max, r_t_max, scoring)?;
    let mut sorted = confidences.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let mut entries = Vec::with_capacity(sorted.len());
    for s_theta in sorted {
        let oracle = oracle_rating(r_t_max, s_theta)?;
        entries.push(GapEntry {
            confidence: s_theta,
            oracle_rating: oracle,
            gap: competency_gap(oracle, r_a_max),
        });
    }
    Ok(GapReport {
        r_t_max,
        r_a_max,
        expected_metric,
        entries,
    })
}

/// Gap report over finished players: takes the maximum mean rating of each
/// category.
pub fn gap_report_for_players(
    players: &[Player],
    confidences: &[f64],
    scoring: &ScoringFunction,
) -> Result<GapReport> {
    let max_mu = |category: Category| -> Result<f64> {
        players
            .iter()
            .filter(|p| p.category == category)
            .map(|p| p.rating.mu)
            .max_by(f64::total_cmp)
            .ok_or_else(|| Error::argument(format!("run contains no {category} players")))
    };
    gap_report(
        max_mu(Category::TestCase)?,
        max_mu(Category::Agent)?,
        confidences,
        scoring,
    )
}

/// One row of the rating histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub case_count: usize,
    pub agent_ids: Vec<String>,
}

/// Case-count histogram over rating bins with agent ratings overlaid; bins
/// containing neither cases nor agents are skipped.
pub fn rating_histogram(players: &[Player], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if players.is_empty() {
        return Err(Error::argument("histogram requires at least one player"));
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::domain(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut bins: BTreeMap<i64, (usize, Vec<String>)> = BTreeMap::new();
    for p in players {
        let bin = (p.rating.mu / bin_width).floor() as i64;
        let entry = bins.entry(bin).or_default();
        match p.category {
            Category::TestCase => entry.0 += 1,
            Category::Agent => entry.1.push(p.id.clone()),
        }
    }
    Ok(bins
        .into_iter()
        .map(|(bin, (case_count, agent_ids))| HistogramBin {
            lo: bin as f64 * bin_width,
            hi: (bin + 1) as f64 * bin_width,
            case_count,
            agent_ids,
        })
        .collect())
}

/// Writes `bin_lo,bin_hi,case_count,agent_ids_in_bin` rows, agent ids joined
/// by `;`.
pub fn write_histogram_csv(bins: &[HistogramBin], mut writer: impl Write) -> Result<()> {
    writeln!(writer, "bin_lo,bin_hi,case_count,agent_ids_in_bin")?;
    for bin in bins {
        writeln!(
            writer,
            "{},{},{},{}",
            round1(bin.lo),
            round1(bin.hi),
            bin.case_count,
            bin.agent_ids.join(";")
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GapReportDoc {
    r_t_max: f64,
    r_a_max: f64,
    expected_metric: f64,
    gaps: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ReliabilityDoc {
    rho_t: f64,
    rho_a: f64,
    mae: f64,
    mse: f64,
    bin_width: f64,
    checkpoints: Vec<CheckpointDoc>,
}

#[derive(Serialize)]
struct CheckpointDoc {
    match_percentage: f64,
    rho_t: Option<f64>,
    rho_a: Option<f64>,
    mae: f64,
    mse: f64,
}

#[derive(Serialize)]
struct AnalysisDoc {
    gap_report: GapReportDoc,
    reliability: Option<ReliabilityDoc>,
}

/// The combined analysis report: the gap table plus, when match data is
/// available, the reliability metrics.
#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub gap: GapReport,
    pub reliability: Option<ReliabilityReport>,
}

impl AnalysisReport {
    /// Serializes with rating points at one decimal and other floats at six.
    pub fn to_json_string(&self) -> Result<String> {
        let gaps = self
            .gap
            .entries
            .iter()
            .map(|e| (fmt_percent(e.confidence), round1(e.gap)))
            .collect();
        let doc = AnalysisDoc {
            gap_report: GapReportDoc {
                r_t_max: round1(self.gap.r_t_max),
                r_a_max: round1(self.gap.r_a_max),
                expected_metric: round6(self.gap.expected_metric),
                gaps,
            },
            reliability: self.reliability.as_ref().map(|r| ReliabilityDoc {
                rho_t: round6(r.rho_t),
                rho_a: round6(r.rho_a),
                mae: round6(r.mae),
                mse: round6(r.mse),
                bin_width: r.bin_width,
                checkpoints: r
                    .checkpoints
                    .iter()
                    .map(|c| CheckpointDoc {
                        match_percentage: c.match_percentage,
                        rho_t: c.rho_t.map(round6),
                        rho_a: c.rho_a.map(round6),
                        mae: round6(c.mae),
                        mse: round6(c.mse),
                    })
                    .collect(),
            }),
        };
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::format(format!("serializing analysis report: {e}")))?;
        text.push('\n');
        Ok(text)
    }
}
