use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimators compared by the experiment scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ERM-wide")]
    ErmWide,
    #[serde(rename = "ERM-narrow")]
    ErmNarrow,
    #[serde(rename = "Grad-wide")]
    GradWide,
    #[serde(rename = "Grad-narrow")]
    GradNarrow,
    Mean,
    Trim,
    ClippedNorm,
    TrimmedLoss,
    GeoMedian,
    #[serde(rename = "DW")]
    Dw,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::ErmWide,
        Method::ErmNarrow,
        Method::GradWide,
        Method::GradNarrow,
        Method::Mean,
        Method::Trim,
        Method::ClippedNorm,
        Method::TrimmedLoss,
        Method::GeoMedian,
        Method::Dw,
    ];

    /// The six methods of the standard comparison.
    pub const SIX: [Method; 6] = [
        Method::ErmWide,
        Method::ErmNarrow,
        Method::GradWide,
        Method::GradNarrow,
        Method::Mean,
        Method::Trim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ErmWide => "ERM-wide",
            Method::ErmNarrow => "ERM-narrow",
            Method::GradWide => "Grad-wide",
            Method::GradNarrow => "Grad-narrow",
            Method::Mean => "Mean",
            Method::Trim => "Trim",
            Method::ClippedNorm => "ClippedNorm",
            Method::TrimmedLoss => "TrimmedLoss",
            Method::GeoMedian => "GeoMedian",
            Method::Dw => "DW",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn canonical(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for Method {
    type Err = Error;

    /// Case-insensitive; `-`, `_` and spaces are ignored, so `erm_narrow`,
    /// `ERM-narrow` and `ermnarrow` all parse.
    fn from_str(s: &str) -> Result<Self> {
        let key = canonical(s);
        Method::ALL
            .into_iter()
            .find(|m| canonical(m.name()) == key)
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidInput(format!("unknown method {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

/// Parses a comma-separated method list. `all` expands to every method and
/// `six` to the standard six-way comparison. Duplicates are rejected.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for item in list.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let expanded: Vec<Method> = match canonical(item).as_str() {
            "all" => Method::ALL.to_vec(),
            "six" => Method::SIX.to_vec(),
            _ => vec![item.parse()?],
        };
        for m in expanded {
            if out.contains(&m) {
                return Err(Error::InvalidInput(format!("method {m} listed twice")));
            }
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("method list is empty".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(m.name().to_uppercase().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn list_parsing() {
        assert_eq!(
            parse_methods(" erm_narrow, MEAN ,dw").unwrap(),
            vec![Method::ErmNarrow, Method::Mean, Method::Dw]
        );
        assert_eq!(parse_methods("six").unwrap(), Method::SIX.to_vec());
        assert_eq!(parse_methods("all").unwrap().len(), 10);
        assert!(parse_methods("").is_err());
        assert!(parse_methods(",,").is_err());
        assert!(parse_methods("mean,Mean").is_err());
        assert!(parse_methods("median").is_err());
    }
}
