//! Small shared output-formatting helpers.

/// Rounds to one decimal place (rating points in serialized output).
pub(crate) fn round1(x: f64) -> f64 {
    normalize((x * 10.0).round() / 10.0)
}

/// Rounds to six decimal places (all other serialized floats).
pub(crate) fn round6(x: f64) -> f64 {
    normalize((x * 1e6).round() / 1e6)
}

fn normalize(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Formats a confidence in (0, 1) as a percentage key such as "50" or "97.5".
pub(crate) fn fmt_percent(confidence: f64) -> String {
    let percent = confidence * 100.0;
    if (percent - percent.round()).abs() < 1e-9 {
        format!("{:.0}", percent.round())
    } else {
        format!("{}", round6(percent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round1(1662.24999), 1662.2);
        assert_eq!(round1(-0.04), 0.0);
        assert_eq!(round6(0.1148818092), 0.114882);
    }

    #[test]
    fn percent_keys() {
        assert_eq!(fmt_percent(0.5), "50");
        assert_eq!(fmt_percent(0.99), "99");
        assert_eq!(fmt_percent(0.975), "97.5");
    }
}
