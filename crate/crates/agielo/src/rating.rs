//! Rating beliefs and the update mathematics.
//!
//! A player's strength is a Gaussian belief over rating points: a mean `mu`
//! and a rating deviation `sigma` that shrinks as evidence accumulates.
//! Two update rules are provided: the classic Elo point update (baseline)
//! and a Glicko-style update that weighs each opponent by the certainty of
//! that opponent's own rating.
//!
//! All math is plain `f64` on the chess-convention scale (400-point logistic,
//! base 10). Values are never rounded here; rounding happens at serialization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale constant `q = ln(10) / 400`.
pub const Q: f64 = std::f64::consts::LN_10 / 400.0;

/// Base of the expected-score logistic.
pub const BASE: f64 = 10.0;

/// Rating-point spread of one expected-score decade.
pub const SPREAD: f64 = 400.0;

/// Mean of the initial rating belief.
pub const INITIAL_MU: f64 = 1500.0;

/// Deviation of the initial rating belief.
pub const INITIAL_SIGMA: f64 = 350.0;

/// Default Elo sensitivity for the baseline update.
pub const DEFAULT_K: f64 = 32.0;

/// Gaussian rating belief: mean `mu` and deviation `sigma` in rating points.
///
/// `sigma` must stay strictly positive; every update with at least one
/// opponent can only shrink it.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

impl Rating {
    pub const fn new(mu: f64, sigma: f64) -> Self {
        Rating { mu, sigma }
    }

    /// The (1500, 350) prior every player starts from.
    pub const fn initial() -> Self {
        Rating::new(INITIAL_MU, INITIAL_SIGMA)
    }
}

impl Default for Rating {
    fn default() -> Self {
        Rating::initial()
    }
}

/// Which form of the precision sum the Glicko-style update uses.
///
/// `Standard` is the conventional Glicko system: the information gained per
/// match enters the precision as `q^2 * g^2 * E * (1 - E)`. `PaperLiteral`
/// drops the `q^2` factor, which makes the deviation collapse after a single
/// match and shrinks the mean step to hundredths of a point; it is retained
/// behind this switch for fidelity comparisons only.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Standard,
    PaperLiteral,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::PaperLiteral => "paper-literal",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "paper-literal" => Ok(Variant::PaperLiteral),
            other => Err(Error::argument(format!(
                "unknown variant '{other}' (expected 'standard' or 'paper-literal')"
            ))),
        }
    }
}

/// Constants of the rating scale plus the update variant.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingConstants {
    /// Scale constant, `ln(10)/400` by default.
    pub q: f64,
    /// Logistic base, 10 by default.
    pub base: f64,
    /// Rating points per decade of expected score, 400 by default.
    pub spread: f64,
    pub initial_mu: f64,
    pub initial_sigma: f64,
    /// Elo sensitivity, used only by the baseline update.
    pub k_factor: f64,
    pub variant: Variant,
}

impl RatingConstants {
    pub fn with_variant(variant: Variant) -> Self {
        RatingConstants {
            variant,
            ..RatingConstants::default()
        }
    }

    pub fn initial_rating(&self) -> Rating {
        Rating::new(self.initial_mu, self.initial_sigma)
    }
}

impl Default for RatingConstants {
    fn default() -> Self {
        RatingConstants {
            q: Q,
            base: BASE,
            spread: SPREAD,
            initial_mu: INITIAL_MU,
            initial_sigma: INITIAL_SIGMA,
            k_factor: DEFAULT_K,
            variant: Variant::Standard,
        }
    }
}

/// One observed encounter from the updating player's perspective.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct OpponentObservation {
    pub opponent_mu: f64,
    pub opponent_sigma: f64,
    /// Match score `S` in `[0, 1]`, 1 meaning the updating player fully won.
    pub score: f64,
}

impl OpponentObservation {
    pub fn new(opponent: Rating, score: f64) -> Self {
        OpponentObservation {
            opponent_mu: opponent.mu,
            opponent_sigma: opponent.sigma,
            score,
        }
    }
}

fn ensure_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite, got {value}")))
    }
}

fn ensure_score(value: f64, what: &str) -> Result<()> {
    ensure_finite(value, what)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} must lie in [0, 1], got {value}"
        )))
    }
}

/// Expected score of a player rated `r_a` against one rated `r_b`:
/// `1 / (1 + 10^((r_b - r_a)/400))`. Strictly inside `(0, 1)`.
pub fn elo_expected_score(r_a: f64, r_b: f64) -> Result<f64> {
    ensure_finite(r_a, "rating r_a")?;
    ensure_finite(r_b, "rating r_b")?;
    Ok((1.0 + BASE.powf((r_b - r_a) / SPREAD)).recip())
}

/// Baseline Elo point update: `r + k * (s - e)`.
pub fn elo_update(r: f64, s: f64, e: f64, k: f64) -> Result<f64> {
    ensure_finite(r, "rating r")?;
    ensure_score(s, "score s")?;
    ensure_score(e, "expected score e")?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain(format!(
            "sensitivity k must be positive, got {k}"
        )));
    }
    Ok(r + k * (s - e))
}

fn g_value(sigma: f64, q: f64) -> f64 {
    (1.0 + 3.0 * q * q * sigma * sigma / (std::f64::consts::PI * std::f64::consts::PI))
        .sqrt()
        .recip()
}

fn e_value(mu_i: f64, mu_j: f64, g_j: f64, base: f64, spread: f64) -> f64 {
    (1.0 + base.powf(-g_j * (mu_i - mu_j) / spread)).recip()
}

/// Impact factor `g(sigma) = 1 / sqrt(1 + 3 q^2 sigma^2 / pi^2)`.
///
/// Down-weights an opponent's influence by that opponent's uncertainty:
/// equals 1 at `sigma = 0` and decreases monotonically toward 0.
pub fn impact_factor(sigma: f64) -> Result<f64> {
    ensure_finite(sigma, "sigma")?;
    if sigma < 0.0 {
        return Err(Error::domain(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    Ok(g_value(sigma, Q))
}

/// Expected outcome of a player with mean `mu_i` against an opponent with
/// mean `mu_j` and deviation `sigma_j`:
/// `1 / (1 + 10^(-g(sigma_j) (mu_i - mu_j)/400))`.
///
/// With `sigma_j = 0` this reduces to [`elo_expected_score`].
pub fn expected_outcome(mu_i: f64, mu_j: f64, sigma_j: f64) -> Result<f64> {
    ensure_finite(mu_i, "mu_i")?;
    ensure_finite(mu_j, "mu_j")?;
    let g_j = impact_factor(sigma_j)?;
    Ok(e_value(mu_i, mu_j, g_j, BASE, SPREAD))
}

/// Glicko-style update of one player against a batch of observations.
///
/// The mean moves by `(q / precision) * sum_j g(sigma_j) (S_j - E_j)` and the
/// new deviation is `precision^(-1/2)`, where `precision` starts at
/// `1/sigma^2` and accumulates one non-negative information term per
/// opponent (see [`Variant`] for the two forms of that term). The deviation
/// therefore never grows, and the mean moves in the direction of
/// `sum_j g(sigma_j) (S_j - E_j)`.
pub fn glicko_update(
    player: Rating,
    observations: &[OpponentObservation],
    constants: &RatingConstants,
) -> Result<Rating> {
    if observations.is_empty() {
        return Err(Error::argument(
            "glicko update requires at least one observation",
        ));
    }
    ensure_finite(player.mu, "player mu")?;
    ensure_finite(player.sigma, "player sigma")?;
    if player.sigma <= 0.0 {
        return Err(Error::domain(format!(
            "player sigma must be strictly positive, got {}",
            player.sigma
        )));
    }

    let q = constants.q;
    let mut information = 0.0; // sum of g^2 E (1 - E)
    let mut surprise = 0.0; // sum of g (S - E)
    for obs in observations {
        ensure_finite(obs.opponent_mu, "opponent mu")?;
        ensure_finite(obs.opponent_sigma, "opponent sigma")?;
        if obs.opponent_sigma < 0.0 {
            return Err(Error::domain(format!(
                "opponent sigma must be non-negative, got {}",
                obs.opponent_sigma
            )));
        }
        ensure_score(obs.score, "match score")?;

        let g_j = g_value(obs.opponent_sigma, q);
        let e_ij = e_value(
            player.mu,
            obs.opponent_mu,
            g_j,
            constants.base,
            constants.spread,
        );
        information += g_j * g_j * e_ij * (1.0 - e_ij);
        surprise += g_j * (obs.score - e_ij);
    }

    let precision = match constants.variant {
        Variant::Standard => (player.sigma * player.sigma).recip() + q * q * information,
        Variant::PaperLiteral => (player.sigma * player.sigma).recip() + information,
    };

    Ok(Rating {
        mu: player.mu + (q / precision) * surprise,
        sigma: precision.sqrt().recip(),
    })
}

/// Plays one agent-vs-test-case match and returns `(agent', case')`.
///
/// Both sides are updated from each other's pre-match belief; the test case
/// receives the complementary score `1 - score`.
pub fn play_match(
    agent: Rating,
    case: Rating,
    score: f64,
    constants: &RatingConstants,
) -> Result<(Rating, Rating)> {
    ensure_score(score, "match score")?;
    let new_agent = glicko_update(agent, &[OpponentObservation::new(case, score)], constants)?;
    let new_case = glicko_update(
        case,
        &[OpponentObservation::new(agent, 1.0 - score)],
        constants,
    )?;
    Ok((new_agent, new_case))
}
