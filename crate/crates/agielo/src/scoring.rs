//! Conversion between task metrics and normalized match scores.
//!
//! A [`ScoringFunction`] is a monotone map `f` from a task metric `M` to a
//! match score `S` in `[0, 1]`, with an inverse used to project predicted
//! scores back into metric space. Functions are referenced by registry name
//! from configuration files:
//!
//! - `identity` — `S = M` for metrics already in `[0, 1]`
//! - `pass_all`, `mean`, `pdm` — labeled aliases of `identity` for metrics
//!   composed by the helpers in this module (all already in `[0, 1]`)
//! - `affine:<scale>:<offset>` — `S = (M - offset) / scale`, `scale > 0`
//! - `piecewise:x0,y0;x1,y1;...` — monotone piecewise-linear interpolation
//!   through strictly increasing breakpoints with `y` values in `[0, 1]`
//!
//! Metric inputs may overshoot the declared domain by at most
//! [`CLAMP_TOLERANCE`] (floating-point slack); larger violations are errors
//! rather than silent clamps.

use crate::error::{Error, Result};

/// Maximum tolerated overshoot of a metric outside its declared domain.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Identity,
    Affine { scale: f64, offset: f64 },
    Piecewise { points: Vec<(f64, f64)> },
}

/// A registered monotone metric-to-score map with its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoringFunction {
    id: String,
    metric_name: String,
    kind: Kind,
}

impl ScoringFunction {
    /// The plain identity map on `[0, 1]`.
    pub fn identity() -> Self {
        ScoringFunction {
            id: "identity".to_string(),
            metric_name: "S".to_string(),
            kind: Kind::Identity,
        }
    }

    /// `S = (M - offset) / scale` on the metric domain `[offset, offset + scale]`.
    pub fn affine(scale: f64, offset: f64) -> Result<Self> {
        if !(scale.is_finite() && offset.is_finite()) {
            return Err(Error::domain("affine scoring parameters must be finite"));
        }
        if scale <= 0.0 {
            return Err(Error::domain(format!(
                "affine scale must be positive for a monotone map, got {scale}"
            )));
        }
        Ok(ScoringFunction {
            id: format!("affine:{scale}:{offset}"),
            metric_name: "M".to_string(),
            kind: Kind::Affine { scale, offset },
        })
    }

    /// Monotone piecewise-linear map through `(metric, score)` breakpoints.
    ///
    /// Requires at least two points, strictly increasing in both coordinates,
    /// with scores spanning values inside `[0, 1]`.
    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::argument(
                "piecewise scoring needs at least two breakpoints",
            ));
        }
        for &(x, y) in &points {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::domain("piecewise breakpoints must be finite"));
            }
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::domain(format!(
                    "piecewise score breakpoint {y} outside [0, 1]"
                )));
            }
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(Error::domain(
                    "piecewise breakpoints must be strictly increasing in both coordinates",
                ));
            }
        }
        let id = format!(
            "piecewise:{}",
            points
                .iter()
                .map(|(x, y)| format!("{x},{y}"))
                .collect::<Vec<_>>()
                .join(";")
        );
        Ok(ScoringFunction {
            id,
            metric_name: "M".to_string(),
            kind: Kind::Piecewise { points },
        })
    }

    /// Resolves a registry name (see the module docs for the syntax).
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "identity" => return Ok(ScoringFunction::identity()),
            "pass_all" => {
                let mut f = ScoringFunction::identity();
                f.id = "pass_all".to_string();
                f.metric_name = "PassAll".to_string();
                return Ok(f);
            }
            "mean" => {
                let mut f = ScoringFunction::identity();
                f.id = "mean".to_string();
                f.metric_name = "mAP".to_string();
                return Ok(f);
            }
            "pdm" => {
                let mut f = ScoringFunction::identity();
                f.id = "pdm".to_string();
                f.metric_name = "PDM Score".to_string();
                return Ok(f);
            }
            _ => {}
        }
        if let Some(rest) = id.strip_prefix("affine:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(Error::argument(format!(
                    "affine scoring id must be 'affine:<scale>:<offset>', got '{id}'"
                )));
            }
            let scale = parse_num(parts[0], id)?;
            let offset = parse_num(parts[1], id)?;
            let mut f = ScoringFunction::affine(scale, offset)?;
            f.id = id.to_string();
            return Ok(f);
        }
        if let Some(rest) = id.strip_prefix("piecewise:") {
            let mut points = Vec::new();
            for pair in rest.split(';') {
                let (x, y) = pair.split_once(',').ok_or_else(|| {
                    Error::argument(format!(
                        "piecewise scoring id must be 'piecewise:x0,y0;x1,y1;...', got '{id}'"
                    ))
                })?;
                points.push((parse_num(x, id)?, parse_num(y, id)?));
            }
            let mut f = ScoringFunction::piecewise(points)?;
            f.id = id.to_string();
            return Ok(f);
        }
        Err(Error::argument(format!("unknown scoring function '{id}'")))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    /// The inclusive metric domain `[lo, hi]` this function accepts.
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Identity => (0.0, 1.0),
            Kind::Affine { scale, offset } => (*offset, offset + scale),
            Kind::Piecewise { points } => (points[0].0, points[points.len() - 1].0),
        }
    }

    /// Forward map `S = f(M)`, clamped to `[0, 1]`.
    pub fn apply(&self, m: f64) -> Result<f64> {
        if !m.is_finite() {
            return Err(Error::domain(format!(
                "metric value must be finite, got {m}"
            )));
        }
        let (lo, hi) = self.domain();
        if m < lo - CLAMP_TOLERANCE || m > hi + CLAMP_TOLERANCE {
            return Err(Error::domain(format!(
                "metric value {m} outside domain [{lo}, {hi}] of scoring function '{}'",
                self.id
            )));
        }
        let m = m.clamp(lo, hi);
        let s = match &self.kind {
            Kind::Identity => m,
            Kind::Affine { scale, offset } => (m - offset) / scale,
            Kind::Piecewise { points } => interpolate(points, m, |p| p.0, |p| p.1),
        };
        Ok(s.clamp(0.0, 1.0))
    }

    /// Inverse map `M = f^-1(S)` for `S` in `[0, 1]`.
    pub fn invert(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!(
                "match score must lie in [0, 1], got {s}"
            )));
        }
        Ok(match &self.kind {
            Kind::Identity => s,
            Kind::Affine { scale, offset } => scale * s + offset,
            Kind::Piecewise { points } => {
                let (y0, yn) = (points[0].1, points[points.len() - 1].1);
                let s = s.clamp(y0, yn);
                interpolate(points, s, |p| p.1, |p| p.0)
            }
        })
    }
}

fn parse_num(text: &str, id: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::argument(format!("bad number '{text}' in scoring id '{id}'")))
}

fn interpolate(
    points: &[(f64, f64)],
    v: f64,
    key: impl Fn(&(f64, f64)) -> f64,
    out: impl Fn(&(f64, f64)) -> f64,
) -> f64 {
    let last = points.len() - 1;
    if v <= key(&points[0]) {
        return out(&points[0]);
    }
    if v >= key(&points[last]) {
        return out(&points[last]);
    }
    let mut i = 0;
    while key(&points[i + 1]) < v {
        i += 1;
    }
    let (k0, k1) = (key(&points[i]), key(&points[i + 1]));
    let (o0, o1) = (out(&points[i]), out(&points[i + 1]));
    o0 + (v - k0) / (k1 - k0) * (o1 - o0)
}

/// Fraction of correct top-1 answers.
pub fn accuracy_at_1(correct_flags: &[bool]) -> Result<f64> {
    if correct_flags.is_empty() {
        return Err(Error::argument("accuracy requires at least one prediction"));
    }
    let hits = correct_flags.iter().filter(|&&c| c).count();
    Ok(hits as f64 / correct_flags.len() as f64)
}

/// Arithmetic mean of per-component metric values (AP over IoU thresholds,
/// AP over trajectory buckets, ...).
pub fn mean_of_components(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::argument("mean requires at least one component"));
    }
    for &v in values {
        if !v.is_finite() {
            return Err(Error::domain(format!(
                "component values must be finite, got {v}"
            )));
        }
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// 1 if every functional test passed, else 0.
pub fn pass_all(test_results: &[bool]) -> Result<f64> {
    if test_results.is_empty() {
        return Err(Error::argument(
            "pass_all requires at least one test result",
        ));
    }
    Ok(if test_results.iter().all(|&p| p) {
        1.0
    } else {
        0.0
    })
}

/// Sub-metrics of the closed-loop planning score, each in `[0, 1]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PdmComponents {
    /// No collision.
    pub nc: f64,
    /// Driving-area compliance.
    pub dac: f64,
    /// Ego progress.
    pub ep: f64,
    /// Time to collision.
    pub ttc: f64,
    /// Comfort.
    pub comfort: f64,
}

/// `PDMS = NC * DAC * (5 EP + 5 TTC + 2 C) / 12`.
pub fn pdm_score(components: &PdmComponents) -> Result<f64> {
    let named = [
        ("nc", components.nc),
        ("dac", components.dac),
        ("ep", components.ep),
        ("ttc", components.ttc),
        ("comfort", components.comfort),
    ];
    for (name, v) in named {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!(
                "PDM component {name} must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok(components.nc
        * components.dac
        * (5.0 * components.ep + 5.0 * components.ttc + 2.0 * components.comfort)
        / 12.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_passes_through() {
        let f = ScoringFunction::identity();
        assert_eq!(f.apply(0.73).unwrap(), 0.73);
        assert_eq!(f.apply(1.0).unwrap(), 1.0);
        assert_eq!(f.invert(0.115).unwrap(), 0.115);
        assert_eq!(f.invert(0.0).unwrap(), 0.0);
    }

    #[test]
    fn identity_clamps_small_overshoot() {
        let f = ScoringFunction::identity();
        assert_eq!(f.apply(1.0000004).unwrap(), 1.0);
        assert_eq!(f.apply(-0.0000004).unwrap(), 0.0);
    }

    #[test]
    fn identity_rejects_large_overshoot() {
        let f = ScoringFunction::identity();
        assert!(f.apply(1.01).is_err());
        assert!(f.apply(-0.5).is_err());
        assert!(f.apply(f64::NAN).is_err());
    }

    #[test]
    fn invert_rejects_out_of_range() {
        let f = ScoringFunction::identity();
        assert!(f.invert(1.5).is_err());
        assert!(f.invert(-0.1).is_err());
    }

    #[test]
    fn affine_percent_metric() {
        let f = ScoringFunction::from_id("affine:100:0").unwrap();
        assert_relative_eq!(f.apply(50.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.invert(0.5).unwrap(), 50.0, epsilon = 1e-12);
        assert_eq!(f.domain(), (0.0, 100.0));
    }

    #[test]
    fn affine_rejects_non_monotone() {
        assert!(ScoringFunction::affine(0.0, 0.0).is_err());
        assert!(ScoringFunction::affine(-3.0, 0.0).is_err());
    }

    #[test]
    fn registry_aliases_resolve() {
        for id in ["identity", "pass_all", "mean", "pdm"] {
            let f = ScoringFunction::from_id(id).unwrap();
            assert_eq!(f.id(), id);
            assert_eq!(f.apply(0.25).unwrap(), 0.25);
        }
        assert_eq!(
            ScoringFunction::from_id("pdm").unwrap().metric_name(),
            "PDM Score"
        );
        assert!(ScoringFunction::from_id("log").is_err());
        assert!(ScoringFunction::from_id("affine:1").is_err());
    }

    #[test]
    fn piecewise_interpolates_and_inverts() {
        let f = ScoringFunction::from_id("piecewise:0,0;10,0.5;100,1").unwrap();
        assert_relative_eq!(f.apply(5.0).unwrap(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(f.apply(55.0).unwrap(), 0.75, epsilon = 1e-12);
        assert_relative_eq!(f.invert(0.25).unwrap(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(f.invert(0.75).unwrap(), 55.0, epsilon = 1e-12);
    }

    #[test]
    fn piecewise_rejects_non_monotone() {
        assert!(ScoringFunction::piecewise(vec![(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(ScoringFunction::piecewise(vec![(0.0, 0.5), (0.0, 1.0)]).is_err());
        assert!(ScoringFunction::piecewise(vec![(0.0, 0.5)]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_at_1(&[true, true, true, true]).unwrap(), 1.0);
        assert_eq!(accuracy_at_1(&[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(
            accuracy_at_1(&[true, false, false, false, false]).unwrap(),
            0.2
        );
        assert!(accuracy_at_1(&[]).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_relative_eq!(
            mean_of_components(&[0.4; 10]).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mean_of_components(&[0.2, 0.4, 0.6]).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mean_of_components(&[1.0, 0.0]).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(mean_of_components(&[]).is_err());
        assert!(mean_of_components(&[0.5, f64::NAN]).is_err());
    }

    #[test]
    fn pass_all_examples() {
        assert_eq!(pass_all(&[true, true, true]).unwrap(), 1.0);
        assert_eq!(pass_all(&[true, false]).unwrap(), 0.0);
        assert_eq!(pass_all(&[false]).unwrap(), 0.0);
        assert!(pass_all(&[]).is_err());
    }

    #[test]
    fn pdm_examples() {
        let full = PdmComponents {
            nc: 1.0,
            dac: 1.0,
            ep: 1.0,
            ttc: 1.0,
            comfort: 1.0,
        };
        assert_relative_eq!(pdm_score(&full).unwrap(), 1.0, epsilon = 1e-12);

        let collided = PdmComponents { nc: 0.0, ..full };
        assert_eq!(pdm_score(&collided).unwrap(), 0.0);

        let slow = PdmComponents { ep: 0.5, ..full };
        assert_relative_eq!(pdm_score(&slow).unwrap(), 9.5 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(pdm_score(&slow).unwrap(), 0.791667, epsilon = 1e-6);
    }

    #[test]
    fn pdm_rejects_out_of_range() {
        let bad = PdmComponents {
            nc: 1.2,
            dac: 1.0,
            ep: 1.0,
            ttc: 1.0,
            comfort: 1.0,
        };
        assert!(pdm_score(&bad).is_err());
    }
}
