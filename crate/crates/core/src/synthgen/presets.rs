//! Built-in domain specifications.
//!
//! The far source and the target share part of their lexicon, but words
//! that are frequent in the target are rare in the far source and mostly
//! appear there in non-symptom contexts. The near source covers most of the
//! target lexicon.

use std::collections::BTreeMap;

use super::DomainSpec;

/// Acute symptoms, frequent in the far source.
pub const ACUTE: [&str; 20] = [
    "fever", "cough", "chills", "congestion", "rhinorrhea", "sneezing", "diarrhea", "vomiting", "hypoxia", "sputum",
    "wheezing", "sweats", "malaise", "rigors", "tachypnea", "hemoptysis", "pharyngitis", "hoarseness",
    "conjunctivitis", "rash",
];

/// Chronic symptoms, frequent in the target.
pub const CHRONIC: [&str; 20] = [
    "fatigue", "dyspnea", "headache", "insomnia", "anxiety", "palpitations", "dizziness", "myalgia", "arthralgia",
    "anosmia", "ageusia", "depression", "tinnitus", "numbness", "tingling", "weakness", "confusion", "forgetfulness",
    "syncope", "tremor",
];

/// Symptoms common to every domain.
pub const SHARED: [&str; 10] = [
    "pain", "nausea", "swelling", "itching", "bleeding", "cramping", "stiffness", "bloating", "constipation", "edema",
];

/// Symptoms seen only in the near source.
pub const NEAR_ONLY: [&str; 10] = [
    "dysuria", "hematuria", "neuropathy", "mucositis", "alopecia", "anorexia", "ascites", "dysphagia", "lymphedema",
    "pruritus",
];

/// Symptoms absent from the far source.
pub const NOT_FAR: [&str; 10] = [
    "vertigo", "paresthesia", "presyncope", "hyperhidrosis", "dysautonomia", "irritability", "nightmares", "amnesia",
    "clumsiness", "lightheadedness",
];

fn words<'a>(groups: impl IntoIterator<Item = &'a [&'a str]>) -> Vec<String> {
    groups.into_iter().flatten().map(|w| w.to_string()).collect()
}

fn interleave(a: &[&str], b: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..a.len().max(b.len()) {
        out.extend(a.get(i).map(|w| w.to_string()));
        out.extend(b.get(i).map(|w| w.to_string()));
    }
    out
}

/// In-domain setting with little ambiguity.
pub fn separable() -> DomainSpec {
    DomainSpec {
        name: "clinic".into(),
        seed: 11,
        lexicon: words([&ACUTE[..], &SHARED[..]]),
        zipf_exponent: 0.8,
        neg_context_prob: 0.03,
        second_mention_prob: 0.1,
        ..DomainSpec::default()
    }
}

pub fn far_source() -> DomainSpec {
    let overrides: BTreeMap<String, f64> = CHRONIC.iter().map(|w| (w.to_string(), 0.75)).collect();
    DomainSpec {
        name: "far".into(),
        seed: 21,
        lexicon: words([&ACUTE[..], &SHARED[..], &CHRONIC[..]]),
        zipf_exponent: 1.0,
        neg_context_prob: 0.1,
        neg_context_overrides: overrides,
        ..DomainSpec::default()
    }
}

pub fn near_source() -> DomainSpec {
    let mut lexicon = interleave(&CHRONIC, &NOT_FAR);
    lexicon.extend(interleave(&SHARED, &NEAR_ONLY));
    DomainSpec {
        name: "near".into(),
        seed: 31,
        lexicon,
        zipf_exponent: 0.9,
        neg_context_prob: 0.1,
        ..DomainSpec::default()
    }
}

pub fn target() -> DomainSpec {
    let mut lexicon = interleave(&CHRONIC, &NOT_FAR);
    lexicon.extend(words([&SHARED[..], &ACUTE[..]]));
    DomainSpec {
        name: "target".into(),
        seed: 41,
        lexicon,
        zipf_exponent: 1.0,
        neg_context_prob: 0.05,
        ..DomainSpec::default()
    }
}

/// Looks a preset up by name.
pub fn by_name(name: &str) -> Option<DomainSpec> {
    match name {
        "separable" => Some(separable()),
        "far" | "far_source" => Some(far_source()),
        "near" | "near_source" => Some(near_source()),
        "target" => Some(target()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["separable", "far", "near", "target"];
