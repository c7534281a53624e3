//! End-to-end checks driving the simulator output through the real
//! ingestion, rating and analysis path.

use agielo::analysis::{consistency_report, spearman, DEFAULT_BIN_WIDTH};
use agielo::engine::{build_schedule, run_ratings, RunConfig, RunOutcome, ScoreMatrix};
use agielo::scoring::ScoringFunction;
use agielo::synthetic::{
    generate_matrix, recovery_report, sample_population, OutcomeMode, Population, PopulationSpec,
};

/// Simulate, write the matrix through CSV, reload it and run the engine —
/// the same path the CLI takes.
fn run_synthetic(
    n_agents: usize,
    n_cases: usize,
    mode: OutcomeMode,
    seed: u64,
) -> (Population, ScoreMatrix, RunOutcome) {
    let spec = PopulationSpec::new(n_agents, n_cases, mode, seed);
    let population = sample_population(&spec).unwrap();
    let generated = generate_matrix(&population, mode, seed).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("matrix.csv");
    generated.to_csv_path(&csv_path).unwrap();
    let matrix = ScoreMatrix::from_csv_path(&csv_path).unwrap();

    let config = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let outcome = run_ratings(&matrix, &config).unwrap();
    (population, matrix, outcome)
}

fn agent_mus(outcome: &RunOutcome) -> Vec<f64> {
    outcome.agents().map(|p| p.rating.mu).collect()
}

#[test]
fn continuous_run_is_noise_free_identifiable() {
    let (population, matrix, outcome) = run_synthetic(10, 800, OutcomeMode::Continuous, 42);
    let scoring = ScoringFunction::identity();
    let report =
        consistency_report(&matrix, &outcome.players, &scoring, DEFAULT_BIN_WIDTH).unwrap();
    assert!(report.rho_a >= 0.999, "rho_a = {}", report.rho_a);
    assert!(report.rho_t <= -0.999, "rho_t = {}", report.rho_t);

    let recovery = recovery_report(&population, &outcome.players).unwrap();
    assert!(
        recovery.rho_agents >= 0.999,
        "rho_agents = {}",
        recovery.rho_agents
    );
    assert!(
        recovery.rho_cases >= 0.999,
        "rho_cases = {}",
        recovery.rho_cases
    );
}

#[test]
fn binary_agent_ranks_match_row_means() {
    let (_, matrix, outcome) = run_synthetic(20, 5000, OutcomeMode::Binary, 7);
    let records = matrix.scored_records(&ScoringFunction::identity()).unwrap();
    let mut sums = vec![(0.0, 0usize); matrix.n_agents()];
    for r in &records {
        sums[r.agent].0 += r.score;
        sums[r.agent].1 += 1;
    }
    let row_means: Vec<f64> = sums.iter().map(|&(s, n)| s / n as f64).collect();
    let rho = spearman(&agent_mus(&outcome), &row_means).unwrap();
    assert!(rho >= 0.99, "rho = {rho}");
}

#[test]
fn identical_rows_end_close_together() {
    // duplicate one agent's scores under a second id; after a full dense
    // pass the two estimates may differ only through match order
    let spec = PopulationSpec::new(6, 500, OutcomeMode::Binary, 3);
    let population = sample_population(&spec).unwrap();
    let generated = generate_matrix(&population, OutcomeMode::Binary, 3).unwrap();

    let mut buf = Vec::new();
    generated.to_csv_writer(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("case_id,"));
    let mut out = format!("{header},twin\n");
    for line in lines {
        let first_score = line.split(',').nth(1).unwrap();
        out.push_str(&format!("{line},{first_score}\n"));
    }

    let matrix = ScoreMatrix::from_csv_reader(out.as_bytes()).unwrap();
    let outcome = run_ratings(
        &matrix,
        &RunConfig {
            seed: 3,
            ..RunConfig::default()
        },
    )
    .unwrap();
    let original = outcome.players[0].rating.mu;
    let twin = outcome.agents().find(|p| p.id == "twin").unwrap().rating.mu;
    assert!(
        (original - twin).abs() < 25.0,
        "duplicated rows diverged: {original} vs {twin}"
    );
}

#[test]
fn binary_recovery_improves_with_more_cases() {
    let seeds = [11, 12, 13, 14, 15];
    let mut rho_small = 0.0;
    let mut rho_large = 0.0;
    for &seed in &seeds {
        let (pop_s, _, out_s) = run_synthetic(20, 500, OutcomeMode::Binary, seed);
        rho_small += recovery_report(&pop_s, &out_s.players).unwrap().rho_agents;
        let (pop_l, _, out_l) = run_synthetic(20, 5000, OutcomeMode::Binary, seed);
        rho_large += recovery_report(&pop_l, &out_l.players).unwrap().rho_agents;
    }
    rho_small /= seeds.len() as f64;
    rho_large /= seeds.len() as f64;
    assert!(
        rho_large >= rho_small,
        "recovery got worse with more cases: {rho_small} -> {rho_large}"
    );
}

#[test]
fn continuous_run_orders_separated_agents() {
    let (population, _, outcome) = run_synthetic(20, 2000, OutcomeMode::Continuous, 9);
    let estimated: std::collections::HashMap<&str, f64> = outcome
        .agents()
        .map(|p| (p.id.as_str(), p.rating.mu))
        .collect();
    let mut checked = 0;
    let mut ordered = 0;
    for i in 0..population.agents.len() {
        for j in 0..population.agents.len() {
            let (a, b) = (&population.agents[i], &population.agents[j]);
            if a.true_rating - b.true_rating >= 50.0 {
                checked += 1;
                if estimated[a.id.as_str()] > estimated[b.id.as_str()] {
                    ordered += 1;
                }
            }
        }
    }
    assert!(checked > 0);
    let fraction = ordered as f64 / checked as f64;
    assert!(
        fraction >= 0.99,
        "only {fraction} of separated pairs ordered correctly"
    );
}

#[test]
fn different_seeds_agree_on_agent_ranks() {
    let spec = PopulationSpec::new(20, 1500, OutcomeMode::Binary, 31);
    let population = sample_population(&spec).unwrap();
    let matrix = generate_matrix(&population, OutcomeMode::Binary, 31).unwrap();

    let run = |seed: u64| -> Vec<f64> {
        let config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        agent_mus(&run_ratings(&matrix, &config).unwrap())
    };
    let rho = spearman(&run(100), &run(200)).unwrap();
    assert!(rho >= 0.99, "rho across seeds = {rho}");
}

#[test]
fn sparse_cells_are_never_scheduled() {
    let csv = "case_id,a1,a2\nc1,1.0,\nc2,,0.5\nc3,0.25,0.75\n";
    let matrix = ScoreMatrix::from_csv_reader(csv.as_bytes()).unwrap();
    let schedule = build_schedule(&matrix, &RunConfig::default()).unwrap();
    assert_eq!(schedule.len(), 4);
    assert!(
        !schedule.contains(&(1, 0)),
        "absent cell (a2, c1) was scheduled"
    );
    assert!(
        !schedule.contains(&(0, 1)),
        "absent cell (a1, c2) was scheduled"
    );

    let outcome = run_ratings(&matrix, &RunConfig::default()).unwrap();
    let by_id: std::collections::HashMap<&str, u64> = outcome
        .players
        .iter()
        .map(|p| (p.id.as_str(), p.matches_played))
        .collect();
    assert_eq!(by_id["c1"], 1);
    assert_eq!(by_id["c2"], 1);
    assert_eq!(by_id["c3"], 2);
}

#[test]
fn run_preserves_the_player_id_multiset() {
    let (population, _, outcome) = run_synthetic(4, 30, OutcomeMode::Binary, 77);
    let mut expected: Vec<&str> = population
        .agents
        .iter()
        .chain(&population.cases)
        .map(|e| e.id.as_str())
        .collect();
    let mut actual: Vec<&str> = outcome.players.iter().map(|p| p.id.as_str()).collect();
    expected.sort_unstable();
    actual.sort_unstable();
    assert_eq!(expected, actual);
}
