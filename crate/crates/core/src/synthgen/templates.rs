//! Fixed phrase inventory used to realize events. None of these words may
//! appear in a domain lexicon.

use crate::schema::{AssertionValue, ChangeValue, SeverityValue};

/// Cue templates per assertion value; `{}` marks the symptom phrase.
pub fn cues(a: Option<AssertionValue>) -> &'static [&'static str] {
    use AssertionValue::*;
    match a {
        Some(Present) => &["Patient reports {}", "Complains of {}", "Positive for {}", "Endorses {}", "{} noted on exam"],
        Some(Absent) => &["Denies {}", "No {}", "Negative for {}", "Without any {}", "{} is absent"],
        Some(Possible) => &["Possible {}", "Questionable {}", "Likely {}", "{} is suspected"],
        Some(Conditional) => &["{} with exertion", "{} when lying flat", "{} after meals", "{} only on stairs"],
        Some(Hypothetical) => &["Return if {} develops", "Call for any {}", "Monitor for {}", "Watch for new {}"],
        Some(NotPatient) => &["Mother has {}", "Family history of {}", "Brother had {}", "Spouse reports {}"],
        None => &["{} recorded", "Listed {}"],
    }
}

pub fn severity_words(s: SeverityValue) -> &'static [&'static str] {
    match s {
        SeverityValue::Mild => &["mild", "slight"],
        SeverityValue::Moderate => &["moderate"],
        SeverityValue::Severe => &["severe", "intense"],
    }
}

/// Change phrases: leading tokens, then the span tokens.
pub fn change_words(c: ChangeValue) -> &'static [(&'static [&'static str], &'static [&'static str])] {
    match c {
        ChangeValue::NoChange => &[(&[","], &["unchanged"]), (&[","], &["stable"])],
        ChangeValue::Worsened => &[(&[", now"], &["worsening"]), (&[","], &["getting", "worse"])],
        ChangeValue::Improved => &[(&[", now"], &["improving"]), (&[","], &["better"])],
        ChangeValue::Resolved => &[(&[", since"], &["resolved"]), (&[","], &["now", "gone"])],
    }
}

pub const CHARACTERISTICS: &[&[&str]] = &[&["sharp"], &["dull"], &["productive"], &["dry"], &["burning"], &["throbbing"]];

pub const ANATOMY: &[&[&str]] = &[
    &["chest"],
    &["left", "arm"],
    &["abdominal"],
    &["lower", "back"],
    &["right", "knee"],
    &["throat"],
    &["neck"],
];

/// Duration phrases: leading tokens, then the span tokens.
pub const DURATION: &[(&[&str], &[&str])] = &[
    (&["for"], &["three", "days"]),
    (&["for"], &["two", "weeks"]),
    (&["for"], &["one", "month"]),
    (&["since"], &["yesterday"]),
    (&["for"], &["several", "hours"]),
];

pub const FREQUENCY: &[&[&str]] = &[&["daily"], &["intermittently"], &["at", "night"], &["twice", "weekly"], &["constantly"]];

/// Contexts in which a lexicon word is not a symptom mention.
pub const NEGATIVE_CONTEXTS: &[&str] = &[
    "Referred to {} clinic",
    "{} protocol reviewed",
    "{} screening completed",
    "Discussed {} management plan",
    "Seen by {} team",
    "{} education provided",
    "Enrolled in {} registry",
];

pub const FILLER: &[&str] = &[
    "Vital signs stable",
    "Follow up in clinic",
    "Medications reconciled",
    "Labs were drawn today",
    "Plan discussed with patient",
    "Chart reviewed",
];

/// Every word the templates can emit, lowercased.
pub fn template_words() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: &str| {
        for w in s.split_whitespace() {
            if w != "{}" {
                out.push(w.to_lowercase());
            }
        }
    };
    let assertions = AssertionValue::ALL.iter().map(|a| Some(*a)).chain([None]);
    for a in assertions {
        cues(a).iter().for_each(|c| push(c));
    }
    for s in SeverityValue::ALL {
        severity_words(s).iter().for_each(|w| push(w));
    }
    for c in ChangeValue::ALL {
        for (lead, span) in change_words(c) {
            lead.iter().chain(span.iter()).for_each(|w| push(w));
        }
    }
    for group in [CHARACTERISTICS, ANATOMY, FREQUENCY] {
        group.iter().flat_map(|p| p.iter()).for_each(|w| push(w));
    }
    for (lead, span) in DURATION {
        lead.iter().chain(span.iter()).for_each(|w| push(w));
    }
    NEGATIVE_CONTEXTS.iter().chain(FILLER).for_each(|c| push(c));
    for w in ["and", ".", ","] {
        push(w);
    }
    out.sort();
    out.dedup();
    out
}
