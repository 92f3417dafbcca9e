//! Keyword-triggered assumption templates for the inversion strategy.

use alloc::string::String;
use alloc::vec::Vec;

use crate::idea::Idea;

pub struct AssumptionPattern {
    pub triggers: &'static [&'static str],
    pub assumption: &'static str,
    pub inversion: &'static str,
}

pub const PATTERNS: &[AssumptionPattern] = &[
    AssumptionPattern {
        triggers: &["single-use", "disposable", "compost", "biodegrad", "discard", "dissolv"],
        assumption: "The product is thrown away after one use",
        inversion: "The product is kept and used again indefinitely",
    },
    AssumptionPattern {
        triggers: &["consumer", "user", "customer", "manual", "hand"],
        assumption: "A person has to handle, open or remove it",
        inversion: "It opens, removes or disposes of itself without anyone touching it",
    },
    AssumptionPattern {
        triggers: &["sensor", "smart", "digital", "electronic", "battery", "app"],
        assumption: "It depends on powered electronics",
        inversion: "It works with no power source and no electronics at all",
    },
    AssumptionPattern {
        triggers: &["plastic", "paper", "fiber", "fibre", "film", "cardboard", "material"],
        assumption: "It is made from a conventional manufactured material",
        inversion: "It is made from something nobody would call a material",
    },
    AssumptionPattern {
        triggers: &["factory", "industrial", "mass", "scale", "production"],
        assumption: "It is produced centrally at industrial scale",
        inversion: "It is produced locally, on demand, by whoever needs it",
    },
    AssumptionPattern {
        triggers: &["protect", "shield", "barrier", "seal"],
        assumption: "Its job is to keep the contents isolated from the outside",
        inversion: "Its job is to let the contents interact with the outside",
    },
    AssumptionPattern {
        triggers: &["cheap", "cost", "price", "afford"],
        assumption: "It should be as cheap as possible",
        inversion: "It is valuable enough that people pay to keep it",
    },
];

/// Used when nothing in the recent ideas matches a trigger.
pub const FALLBACK: &[(&str, &str)] = &[
    (
        "It serves only its primary purpose",
        "It serves a second, unrelated purpose as well",
    ),
    (
        "It looks and behaves the same throughout its life",
        "It changes form or function over time",
    ),
];

/// Up to `max` (assumption, inversion) pairs triggered by `recent`, in
/// pattern order.
pub fn extract(recent: &[&Idea], max: usize) -> Vec<(String, String)> {
    let text: String = recent
        .iter()
        .map(|i| alloc::format!("{} {} ", i.name, i.description))
        .collect::<String>()
        .to_lowercase();
    let mut out: Vec<(String, String)> = PATTERNS
        .iter()
        .filter(|p| p.triggers.iter().any(|t| text.contains(t)))
        .take(max)
        .map(|p| (p.assumption.into(), p.inversion.into()))
        .collect();
    if out.is_empty() {
        out = FALLBACK
            .iter()
            .take(max)
            .map(|(a, i)| ((*a).into(), (*i).into()))
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triggers_and_fallback() {
        let i = Idea::new("Compostable film", "Single-use wrap", "films", 0.05, 1, 0).unwrap();
        let got = extract(&[&i], 3);
        assert_eq!(got[0].0, PATTERNS[0].assumption);
        assert!(got.iter().any(|(a, _)| a == PATTERNS[3].assumption));
        let j = Idea::new("Zzz", "qqq", "x", 0.05, 1, 0).unwrap();
        assert_eq!(extract(&[&j], 3).len(), FALLBACK.len());
        assert_eq!(extract(&[], 1).len(), 1);
    }
}
