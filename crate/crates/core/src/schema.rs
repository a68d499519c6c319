//! The symptom event type system.
//!
//! A symptom event is anchored by a trigger (`SSx`) and described by
//! arguments. Labeled arguments (`Assertion`, `Change`, `Severity`) carry a
//! subtype; span-only arguments (`Anatomy`, `Characteristics`, `Duration`,
//! `Frequency`) do not.
//!
//! For training, each trigger is merged with its `Assertion` argument into a
//! single entity on the trigger span that carries the assertion subtype
//! ([`merge_assertion`]). Predictions in that merged space are split back
//! into separate trigger and `Assertion` entities by [`unmerge_assertion`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "SSx")]
    Trigger,
    Assertion,
    Change,
    Severity,
    Anatomy,
    Characteristics,
    Duration,
    Frequency,
}

impl EntityType {
    pub const ALL: [EntityType; 8] = [
        EntityType::Trigger,
        EntityType::Assertion,
        EntityType::Change,
        EntityType::Severity,
        EntityType::Anatomy,
        EntityType::Characteristics,
        EntityType::Duration,
        EntityType::Frequency,
    ];

    pub fn is_trigger(self) -> bool {
        self == EntityType::Trigger
    }

    pub fn is_labeled_argument(self) -> bool {
        matches!(
            self,
            EntityType::Assertion | EntityType::Change | EntityType::Severity
        )
    }

    pub fn is_span_only_argument(self) -> bool {
        matches!(
            self,
            EntityType::Anatomy
                | EntityType::Characteristics
                | EntityType::Duration
                | EntityType::Frequency
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Trigger => "SSx",
            EntityType::Assertion => "Assertion",
            EntityType::Change => "Change",
            EntityType::Severity => "Severity",
            EntityType::Anatomy => "Anatomy",
            EntityType::Characteristics => "Characteristics",
            EntityType::Duration => "Duration",
            EntityType::Frequency => "Frequency",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssertionValue {
    Present,
    Absent,
    Possible,
    Conditional,
    Hypothetical,
    #[serde(rename = "not patient")]
    NotPatient,
}

impl AssertionValue {
    pub const ALL: [AssertionValue; 6] = [
        AssertionValue::Present,
        AssertionValue::Absent,
        AssertionValue::Possible,
        AssertionValue::Conditional,
        AssertionValue::Hypothetical,
        AssertionValue::NotPatient,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeValue {
    #[serde(rename = "no change")]
    NoChange,
    Worsened,
    Improved,
    Resolved,
}

impl ChangeValue {
    pub const ALL: [ChangeValue; 4] = [
        ChangeValue::NoChange,
        ChangeValue::Worsened,
        ChangeValue::Improved,
        ChangeValue::Resolved,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityValue {
    Mild,
    Moderate,
    Severe,
}

impl SeverityValue {
    pub const ALL: [SeverityValue; 3] = [
        SeverityValue::Mild,
        SeverityValue::Moderate,
        SeverityValue::Severe,
    ];
}

/// Subtype of a labeled argument. Serialized as its bare string value
/// ("absent", "no change", ...); the owning type disambiguates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Subtype {
    Assertion(AssertionValue),
    Change(ChangeValue),
    Severity(SeverityValue),
}

impl Subtype {
    pub fn owner(self) -> EntityType {
        match self {
            Subtype::Assertion(_) => EntityType::Assertion,
            Subtype::Change(_) => EntityType::Change,
            Subtype::Severity(_) => EntityType::Severity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subtype::Assertion(a) => match a {
                AssertionValue::Present => "present",
                AssertionValue::Absent => "absent",
                AssertionValue::Possible => "possible",
                AssertionValue::Conditional => "conditional",
                AssertionValue::Hypothetical => "hypothetical",
                AssertionValue::NotPatient => "not patient",
            },
            Subtype::Change(c) => match c {
                ChangeValue::NoChange => "no change",
                ChangeValue::Worsened => "worsened",
                ChangeValue::Improved => "improved",
                ChangeValue::Resolved => "resolved",
            },
            Subtype::Severity(s) => match s {
                SeverityValue::Mild => "mild",
                SeverityValue::Moderate => "moderate",
                SeverityValue::Severe => "severe",
            },
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Half-open token interval `[start, end)` within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn width(self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn overlaps(self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn overlap_len(self, other: Span) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: EntityType,
    pub subtype: Option<Subtype>,
    pub span: Span,
}

impl Entity {
    pub fn new(id: impl Into<String>, kind: EntityType, subtype: Option<Subtype>, span: Span) -> Self {
        Entity {
            id: id.into(),
            kind,
            subtype,
            span,
        }
    }

    /// Identity-free description used when comparing annotations.
    pub fn key(&self) -> EntityKey {
        (self.kind, self.subtype, self.span)
    }
}

pub type EntityKey = (EntityType, Option<Subtype>, Span);

/// A link from a trigger (head) to one of its arguments (tail).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub head: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub trigger: Entity,
    pub arguments: Vec<Entity>,
}

impl Event {
    pub fn assertion(&self) -> Option<&Entity> {
        self.arguments
            .iter()
            .find(|a| a.kind == EntityType::Assertion)
    }
}

/// Builds one event per trigger, attaching every entity linked to it.
///
/// Arguments may belong to several events. Entities without a link to a
/// trigger belong to none. Relations naming unknown ids or a non-trigger
/// head are skipped.
pub fn build_events(entities: &[Entity], relations: &[Relation]) -> Vec<Event> {
    let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    entities
        .iter()
        .filter(|e| e.kind.is_trigger())
        .map(|trigger| {
            let mut seen = HashSet::new();
            let arguments = relations
                .iter()
                .filter(|r| r.head == trigger.id)
                .filter_map(|r| by_id.get(r.tail.as_str()).copied())
                .filter(|a| !a.kind.is_trigger())
                .filter(|a| seen.insert(a.id.as_str()))
                .cloned()
                .collect();
            Event {
                trigger: trigger.clone(),
                arguments,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Merged label space
// ---------------------------------------------------------------------------

/// Class of a span in the merged training label space.
///
/// `Trigger(Some(a))` is a trigger merged with an `Assertion:a` argument;
/// `Trigger(None)` is a trigger without any `Assertion` argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Trigger(Option<AssertionValue>),
    Change(ChangeValue),
    Severity(SeverityValue),
    Anatomy,
    Characteristics,
    Duration,
    Frequency,
}

/// Number of classes of the entity classifier, including the negative class:
/// 6 merged assertion subtypes, 1 unasserted trigger, 4 `Change`,
/// 3 `Severity`, 4 span-only types, 1 negative.
pub const LABEL_SPACE_SIZE: usize = 6 + 1 + 4 + 3 + 4 + 1;

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Trigger(Some(a)) => 1 + a as usize,
            Label::Trigger(None) => 7,
            Label::Change(c) => 8 + c as usize,
            Label::Severity(s) => 12 + s as usize,
            Label::Anatomy => 15,
            Label::Characteristics => 16,
            Label::Duration => 17,
            Label::Frequency => 18,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Some(match i {
            0 => Label::Negative,
            1..=6 => Label::Trigger(Some(AssertionValue::ALL[i - 1])),
            7 => Label::Trigger(None),
            8..=11 => Label::Change(ChangeValue::ALL[i - 8]),
            12..=14 => Label::Severity(SeverityValue::ALL[i - 12]),
            15 => Label::Anatomy,
            16 => Label::Characteristics,
            17 => Label::Duration,
            18 => Label::Frequency,
            _ => return None,
        })
    }

    pub fn all() -> impl Iterator<Item = Label> {
        (0..LABEL_SPACE_SIZE).filter_map(Label::from_index)
    }

    pub fn is_trigger(self) -> bool {
        matches!(self, Label::Trigger(_))
    }

    /// Label of an unmerged, non-`Assertion` entity. `None` for `Assertion`,
    /// which has no standalone class.
    pub fn of_argument(kind: EntityType, subtype: Option<Subtype>) -> Option<Label> {
        Some(match (kind, subtype) {
            (EntityType::Trigger, _) => Label::Trigger(None),
            (EntityType::Change, Some(Subtype::Change(c))) => Label::Change(c),
            (EntityType::Severity, Some(Subtype::Severity(s))) => Label::Severity(s),
            (EntityType::Anatomy, _) => Label::Anatomy,
            (EntityType::Characteristics, _) => Label::Characteristics,
            (EntityType::Duration, _) => Label::Duration,
            (EntityType::Frequency, _) => Label::Frequency,
            _ => return None,
        })
    }

    /// Entity type and subtype this label stands for after unmerging
    /// (triggers map to `SSx`, the assertion is emitted separately).
    pub fn entity_type(self) -> Option<(EntityType, Option<Subtype>)> {
        Some(match self {
            Label::Negative => return None,
            Label::Trigger(_) => (EntityType::Trigger, None),
            Label::Change(c) => (EntityType::Change, Some(Subtype::Change(c))),
            Label::Severity(s) => (EntityType::Severity, Some(Subtype::Severity(s))),
            Label::Anatomy => (EntityType::Anatomy, None),
            Label::Characteristics => (EntityType::Characteristics, None),
            Label::Duration => (EntityType::Duration, None),
            Label::Frequency => (EntityType::Frequency, None),
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => f.write_str("O"),
            Label::Trigger(Some(a)) => write!(f, "Assertion:{}", Subtype::Assertion(*a)),
            Label::Trigger(None) => f.write_str("SSx:unasserted"),
            Label::Change(c) => write!(f, "Change:{}", Subtype::Change(*c)),
            Label::Severity(s) => write!(f, "Severity:{}", Subtype::Severity(*s)),
            Label::Anatomy => f.write_str("Anatomy"),
            Label::Characteristics => f.write_str("Characteristics"),
            Label::Duration => f.write_str("Duration"),
            Label::Frequency => f.write_str("Frequency"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MergedEntity {
    pub id: String,
    pub label: Label,
    pub span: Span,
}

/// Gold or predicted annotation of one sentence in the merged label space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergedAnnotation {
    pub entities: Vec<MergedEntity>,
    pub relations: Vec<Relation>,
}

/// Merges every trigger with its `Assertion` argument.
///
/// Each trigger becomes one entity on the trigger span labeled with the
/// assertion subtype (or [`Label::Trigger`]`(None)` without one). Other
/// arguments pass through once each, with their links to the trigger kept.
pub fn merge_assertion(events: &[Event]) -> Result<MergedAnnotation> {
    let mut out = MergedAnnotation::default();
    let mut emitted: HashSet<String> = HashSet::new();
    for event in events {
        let mut assertions = event
            .arguments
            .iter()
            .filter(|a| a.kind == EntityType::Assertion);
        let assertion = assertions.next();
        if assertions.next().is_some() {
            return Err(Error::Schema(format!(
                "trigger {} has more than one Assertion argument",
                event.trigger.id
            )));
        }
        let value = match assertion.map(|a| a.subtype) {
            None => None,
            Some(Some(Subtype::Assertion(v))) => Some(v),
            Some(other) => {
                return Err(Error::Schema(format!(
                    "Assertion argument of trigger {} has subtype {:?}",
                    event.trigger.id, other
                )))
            }
        };
        out.entities.push(MergedEntity {
            id: event.trigger.id.clone(),
            label: Label::Trigger(value),
            span: event.trigger.span,
        });
        for arg in event.arguments.iter().filter(|a| a.kind != EntityType::Assertion) {
            let label = Label::of_argument(arg.kind, arg.subtype).ok_or_else(|| {
                Error::Schema(format!("argument {} has an invalid subtype", arg.id))
            })?;
            if emitted.insert(arg.id.clone()) {
                out.entities.push(MergedEntity {
                    id: arg.id.clone(),
                    label,
                    span: arg.span,
                });
            }
            out.relations.push(Relation {
                head: event.trigger.id.clone(),
                tail: arg.id.clone(),
            });
        }
    }
    Ok(out)
}

/// Merges a whole sentence annotation. Arguments that are not linked to any
/// trigger (other than `Assertion`, which has no standalone class) are kept
/// as entities of their own.
pub fn merge_sentence(entities: &[Entity], relations: &[Relation]) -> Result<MergedAnnotation> {
    let events = build_events(entities, relations);
    let mut merged = merge_assertion(&events)?;
    let present: HashSet<String> = merged.entities.iter().map(|e| e.id.clone()).collect();
    for e in entities {
        if e.kind.is_trigger() || e.kind == EntityType::Assertion || present.contains(&e.id) {
            continue;
        }
        if let Some(label) = Label::of_argument(e.kind, e.subtype) {
            merged.entities.push(MergedEntity {
                id: e.id.clone(),
                label,
                span: e.span,
            });
        }
    }
    Ok(merged)
}

/// Suffix appended to a trigger id to name the `Assertion` entity split off
/// from it.
pub const ASSERTION_ID_SUFFIX: &str = "-A";

/// Splits merged triggers back into an `SSx` entity and an `Assertion`
/// entity over the identical span, linked by a relation.
pub fn unmerge_assertion(
    entities: &[MergedEntity],
    relations: &[Relation],
) -> (Vec<Entity>, Vec<Relation>) {
    let mut out_entities = Vec::with_capacity(entities.len());
    let mut out_relations = Vec::with_capacity(relations.len() + entities.len());
    for e in entities {
        let Some((kind, subtype)) = e.label.entity_type() else {
            continue;
        };
        out_entities.push(Entity::new(e.id.clone(), kind, subtype, e.span));
        if let Label::Trigger(Some(value)) = e.label {
            let aid = format!("{}{}", e.id, ASSERTION_ID_SUFFIX);
            out_entities.push(Entity::new(
                aid.clone(),
                EntityType::Assertion,
                Some(Subtype::Assertion(value)),
                e.span,
            ));
            out_relations.push(Relation {
                head: e.id.clone(),
                tail: aid,
            });
        }
    }
    out_relations.extend(relations.iter().cloned());
    (out_entities, out_relations)
}

/// Identity-free multiset view of an annotation: entity keys with counts and
/// relation endpoint-key pairs with counts.
pub type AnnotationMultiset = (
    BTreeMap<EntityKey, usize>,
    BTreeMap<(EntityKey, EntityKey), usize>,
);

pub fn annotation_multiset(entities: &[Entity], relations: &[Relation]) -> AnnotationMultiset {
    let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut ents = BTreeMap::new();
    for e in entities {
        *ents.entry(e.key()).or_insert(0) += 1;
    }
    let mut rels = BTreeMap::new();
    for r in relations {
        if let (Some(h), Some(t)) = (by_id.get(r.head.as_str()), by_id.get(r.tail.as_str())) {
            *rels.entry((h.key(), t.key())).or_insert(0) += 1;
        }
    }
    (ents, rels)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    /// Breaks an invariant; corpora containing these are rejected on load.
    Error,
    /// Suspicious but accepted (e.g. overlapping entities of one type).
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub document: String,
    pub sentence: usize,
    /// Entity id or `head->tail` for relations.
    pub item: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} in document {} sentence {} at {}: {}",
            self.severity, self.document, self.sentence, self.item, self.rule
        )
    }
}

/// Checks one sentence annotation; `n_tokens` is the sentence length.
pub fn validate_sentence(
    document: &str,
    sentence: usize,
    n_tokens: usize,
    entities: &[Entity],
    relations: &[Relation],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |severity, item: &str, rule: String| {
        out.push(Violation {
            severity,
            document: document.to_string(),
            sentence,
            item: item.to_string(),
            rule,
        })
    };

    let mut by_id: HashMap<&str, &Entity> = HashMap::new();
    for e in entities {
        if by_id.insert(e.id.as_str(), e).is_some() {
            report(Severity::Error, &e.id, "duplicate entity id".into());
        }
        if e.span.start >= e.span.end || e.span.end > n_tokens {
            report(
                Severity::Error,
                &e.id,
                format!("span {} outside sentence of {} tokens", e.span, n_tokens),
            );
        }
        match (e.kind.is_labeled_argument(), e.subtype) {
            (true, None) => report(Severity::Error, &e.id, format!("{} requires a subtype", e.kind)),
            (true, Some(s)) if s.owner() != e.kind => report(
                Severity::Error,
                &e.id,
                format!("{} cannot carry {} subtype '{}'", e.kind, s.owner(), s),
            ),
            (false, Some(s)) => report(
                Severity::Error,
                &e.id,
                format!("{} carries subtype '{}' but takes none", e.kind, s),
            ),
            _ => {}
        }
    }

    let mut assertion_count: HashMap<&str, usize> = HashMap::new();
    for r in relations {
        let item = format!("{}->{}", r.head, r.tail);
        let head = by_id.get(r.head.as_str());
        let tail = by_id.get(r.tail.as_str());
        match head {
            None => report(Severity::Error, &item, format!("unknown head id {}", r.head)),
            Some(h) if !h.kind.is_trigger() => report(
                Severity::Error,
                &item,
                format!("relation head is {} rather than SSx", h.kind),
            ),
            _ => {}
        }
        match tail {
            None => report(Severity::Error, &item, format!("unknown tail id {}", r.tail)),
            Some(t) if t.kind.is_trigger() => {
                report(Severity::Error, &item, "relation tail is SSx".into())
            }
            Some(t) if t.kind == EntityType::Assertion => {
                *assertion_count.entry(r.head.as_str()).or_insert(0) += 1;
            }
            _ => {}
        }
    }
    for (head, n) in assertion_count {
        if n > 1 {
            report(
                Severity::Error,
                head,
                format!("event has {n} Assertion arguments (at most one allowed)"),
            );
        }
    }

    for (i, a) in entities.iter().enumerate() {
        for b in &entities[i + 1..] {
            if a.kind == b.kind && a.span.overlaps(b.span) {
                report(
                    Severity::Warning,
                    &format!("{}/{}", a.id, b.id),
                    format!("overlapping {} entities {} and {}", a.kind, a.span, b.span),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ent(id: &str, kind: EntityType, subtype: Option<Subtype>, s: usize, e: usize) -> Entity {
        Entity::new(id, kind, subtype, Span::new(s, e))
    }

    fn absent() -> Option<Subtype> {
        Some(Subtype::Assertion(AssertionValue::Absent))
    }

    #[test]
    fn label_space_size_is_nineteen() {
        const _: () = assert!(LABEL_SPACE_SIZE == 19);
        let all: Vec<Label> = Label::all().collect();
        assert_eq!(all.len(), LABEL_SPACE_SIZE);
        for (i, l) in all.iter().enumerate() {
            assert_eq!(l.index(), i);
        }
        assert_eq!(Label::from_index(LABEL_SPACE_SIZE), None);
    }

    #[test]
    fn type_groups_partition_the_eight_kinds() {
        assert_eq!(EntityType::ALL.len(), 8);
        let triggers = EntityType::ALL.iter().filter(|t| t.is_trigger()).count();
        let labeled = EntityType::ALL.iter().filter(|t| t.is_labeled_argument()).count();
        let span_only = EntityType::ALL.iter().filter(|t| t.is_span_only_argument()).count();
        assert_eq!((triggers, labeled, span_only), (1, 3, 4));
    }

    #[test]
    fn merge_puts_assertion_subtype_on_trigger_span() {
        let event = Event {
            trigger: ent("T1", EntityType::Trigger, None, 3, 4),
            arguments: vec![ent("T2", EntityType::Assertion, absent(), 1, 2)],
        };
        let merged = merge_assertion(&[event]).unwrap();
        assert_eq!(
            merged.entities,
            vec![MergedEntity {
                id: "T1".into(),
                label: Label::Trigger(Some(AssertionValue::Absent)),
                span: Span::new(3, 4)
            }]
        );
        assert!(merged.relations.is_empty());
    }

    #[test]
    fn merge_without_assertion_yields_unasserted_trigger() {
        let event = Event {
            trigger: ent("T1", EntityType::Trigger, None, 0, 2),
            arguments: vec![ent("T2", EntityType::Anatomy, None, 4, 6)],
        };
        let merged = merge_assertion(&[event]).unwrap();
        assert_eq!(merged.entities.len(), 2);
        assert_eq!(merged.entities[0].label, Label::Trigger(None));
        assert_eq!(merged.entities[0].span, Span::new(0, 2));
        assert_eq!(merged.entities[1].label, Label::Anatomy);
        assert_eq!(merged.entities[1].span, Span::new(4, 6));
        assert_eq!(
            merged.relations,
            vec![Relation {
                head: "T1".into(),
                tail: "T2".into()
            }]
        );
    }

    #[test]
    fn merge_rejects_two_assertions() {
        let event = Event {
            trigger: ent("T1", EntityType::Trigger, None, 3, 4),
            arguments: vec![
                ent("A1", EntityType::Assertion, absent(), 3, 4),
                ent("A2", EntityType::Assertion, absent(), 3, 4),
            ],
        };
        assert!(matches!(merge_assertion(&[event]), Err(Error::Schema(_))));
    }

    #[test]
    fn unmerge_splits_trigger_and_assertion() {
        let merged = [MergedEntity {
            id: "T1".into(),
            label: Label::Trigger(Some(AssertionValue::Absent)),
            span: Span::new(3, 4),
        }];
        let (ents, rels) = unmerge_assertion(&merged, &[]);
        assert_eq!(ents.len(), 2);
        assert_eq!(ents[0].kind, EntityType::Trigger);
        assert_eq!(ents[0].subtype, None);
        assert_eq!(ents[1].kind, EntityType::Assertion);
        assert_eq!(ents[1].subtype, absent());
        assert_eq!(ents[0].span, ents[1].span);
        assert_eq!(rels, vec![Relation { head: "T1".into(), tail: "T1-A".into() }]);
    }

    #[test]
    fn unmerge_unasserted_trigger_is_single_entity() {
        let merged = [MergedEntity {
            id: "T1".into(),
            label: Label::Trigger(None),
            span: Span::new(0, 1),
        }];
        let (ents, rels) = unmerge_assertion(&merged, &[]);
        assert_eq!(ents, vec![ent("T1", EntityType::Trigger, None, 0, 1)]);
        assert!(rels.is_empty());
    }

    #[test]
    fn round_trip_three_event_sentence() {
        // "patient denies cough , reports mild chest pain and possible fever ."
        let ents = vec![
            ent("T1", EntityType::Trigger, None, 2, 3),
            ent("T2", EntityType::Assertion, absent(), 2, 3),
            ent("T3", EntityType::Trigger, None, 8, 9),
            ent("T4", EntityType::Assertion, Some(Subtype::Assertion(AssertionValue::Present)), 8, 9),
            ent("T5", EntityType::Severity, Some(Subtype::Severity(SeverityValue::Mild)), 6, 7),
            ent("T6", EntityType::Anatomy, None, 7, 8),
            ent("T7", EntityType::Trigger, None, 11, 12),
        ];
        let rels = vec![
            Relation { head: "T1".into(), tail: "T2".into() },
            Relation { head: "T3".into(), tail: "T4".into() },
            Relation { head: "T3".into(), tail: "T5".into() },
            Relation { head: "T3".into(), tail: "T6".into() },
        ];
        let merged = merge_sentence(&ents, &rels).unwrap();
        let (e2, r2) = unmerge_assertion(&merged.entities, &merged.relations);
        assert_eq!(annotation_multiset(&ents, &rels), annotation_multiset(&e2, &r2));
    }

    #[test]
    fn validate_flags_wrong_subtype_owner() {
        let ents = vec![ent(
            "T1",
            EntityType::Assertion,
            Some(Subtype::Severity(SeverityValue::Mild)),
            0,
            1,
        )];
        let v = validate_sentence("d", 0, 3, &ents, &[]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].item, "T1");
        assert_eq!(v[0].severity, Severity::Error);
    }

    #[test]
    fn validate_flags_non_trigger_head() {
        let ents = vec![
            ent("T1", EntityType::Anatomy, None, 0, 1),
            ent("T2", EntityType::Duration, None, 1, 2),
        ];
        let rels = vec![Relation { head: "T1".into(), tail: "T2".into() }];
        let v = validate_sentence("d", 0, 3, &ents, &rels);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].item, "T1->T2");
    }

    #[test]
    fn validate_accepts_well_formed_sentence() {
        let ents = vec![
            ent("T1", EntityType::Trigger, None, 1, 2),
            ent("T2", EntityType::Assertion, absent(), 1, 2),
        ];
        let rels = vec![Relation { head: "T1".into(), tail: "T2".into() }];
        assert!(validate_sentence("d", 0, 3, &ents, &rels).is_empty());
    }

    #[test]
    fn validate_warns_on_same_type_overlap() {
        let ents = vec![
            ent("T1", EntityType::Anatomy, None, 0, 2),
            ent("T2", EntityType::Anatomy, None, 1, 3),
        ];
        let v = validate_sentence("d", 0, 3, &ents, &[]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
    }

    fn arb_assertion() -> impl Strategy<Value = Option<AssertionValue>> {
        prop_oneof![Just(None), (0usize..6).prop_map(|i| Some(AssertionValue::ALL[i]))]
    }

    fn arb_argument() -> impl Strategy<Value = (EntityType, Option<Subtype>)> {
        prop_oneof![
            (0usize..4).prop_map(|i| (EntityType::Change, Some(Subtype::Change(ChangeValue::ALL[i])))),
            (0usize..3).prop_map(|i| (EntityType::Severity, Some(Subtype::Severity(SeverityValue::ALL[i])))),
            Just((EntityType::Anatomy, None)),
            Just((EntityType::Characteristics, None)),
            Just((EntityType::Duration, None)),
            Just((EntityType::Frequency, None)),
        ]
    }

    proptest! {
        #[test]
        fn merge_then_unmerge_is_identity(
            events in prop::collection::vec(
                (arb_assertion(), prop::collection::vec(arb_argument(), 0..4)),
                0..5,
            )
        ) {
            // Lay events out left to right so spans never collide.
            let mut ents = Vec::new();
            let mut rels = Vec::new();
            let mut pos = 0;
            let mut next = 0;
            let mut id = || { next += 1; format!("T{next}") };
            for (assertion, args) in events {
                let tid = id();
                let tspan = Span::new(pos, pos + 1);
                pos += 1;
                ents.push(Entity::new(tid.clone(), EntityType::Trigger, None, tspan));
                if let Some(a) = assertion {
                    let aid = id();
                    ents.push(Entity::new(aid.clone(), EntityType::Assertion, Some(Subtype::Assertion(a)), tspan));
                    rels.push(Relation { head: tid.clone(), tail: aid });
                }
                for (kind, subtype) in args {
                    let aid = id();
                    ents.push(Entity::new(aid.clone(), kind, subtype, Span::new(pos, pos + 2)));
                    pos += 2;
                    rels.push(Relation { head: tid.clone(), tail: aid });
                }
            }
            prop_assert!(validate_sentence("d", 0, pos, &ents, &rels).is_empty());
            let merged = merge_sentence(&ents, &rels).unwrap();
            let (e2, r2) = unmerge_assertion(&merged.entities, &merged.relations);
            prop_assert_eq!(annotation_multiset(&ents, &rels), annotation_multiset(&e2, &r2));
        }
    }
}
