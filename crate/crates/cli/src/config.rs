//! The serializable description of one run, and the parsers for the
//! compact flag syntaxes (`1,2,3`, `3..6`, `1/4`).

use std::path::PathBuf;

use qdhj::extremal::ShapeFamily;
use qdhj::search::SearchMode;
use qdhj::{Rational, SetSource};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Subspace,
    Classify,
    RectPair,
    SquarePairs,
    Lines,
    Identities,
    Repcounts,
    Mdqhj,
    Extremal,
    Verify,
}

/// Everything a run depends on. Replaying a config reproduces the output
/// byte for byte (the thread count is not part of it: results do not
/// depend on it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SearchMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<ShapeFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm: Option<SetSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            action: None,
            n: None,
            k: None,
            m: None,
            delta: None,
            eps: None,
            gamma: None,
            gamma_size: None,
            p: None,
            seed: 0,
            mode: None,
            limit: None,
            budget: None,
            set: None,
            family: None,
            warm: None,
            time_limit: None,
            format: None,
            input: None,
            output: None,
        }
    }
}

/// `"1/4"`, `"0.25"` or `"3"` as an exact rational.
pub fn parse_ratio(text: &str) -> Result<Rational, String> {
    let t = text.trim();
    let bad = || format!("{text:?} is not a number (use 0.25 or 1/4)");
    if let Some((num, den)) = t.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| bad())?;
        let den: i128 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if frac.len() > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int_part: i128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let scale = 10i128.pow(frac.len() as u32);
    let frac_part: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let sign = if int.starts_with('-') { -1 } else { 1 };
    Ok(Rational::new(int_part * scale + sign * frac_part, scale))
}

/// `"3..6"` and `"3..=6"` are both the inclusive range 3 to 6; `"4"` is 4 to 4.
pub fn parse_size_range(text: &str) -> Result<[usize; 2], String> {
    let bad = || format!("{text:?} is not a size range (use 3..6)");
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
        None => (text, text),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok([lo, hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(parse_ratio("1/4").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_ratio("0.25").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_ratio(".1").unwrap(), Rational::new(1, 10));
        assert_eq!(parse_ratio("2").unwrap(), Rational::from_integer(2));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("abc").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_size_range("3..6").unwrap(), [3, 6]);
        assert_eq!(parse_size_range("3..=6").unwrap(), [3, 6]);
        assert_eq!(parse_size_range("4").unwrap(), [4, 4]);
        assert!(parse_size_range("6..3").is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::new(Command::RectPair);
        c.n = Some(4);
        c.set = Some(SetSource::Random { n: 4, size: 16384, seed: 9 });
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
