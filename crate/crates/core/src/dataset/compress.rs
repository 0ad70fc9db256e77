use std::collections::BTreeMap;

use super::record::{Part, Record, Role, TurnValue};
use crate::error::{Error, Result};

/// Merge records that share an `image_id` and source tag into one multi-turn
/// record.
///
/// Output is sorted by `(image_id, source)`; within a group the query-answer
/// pairs keep input order and only the first image part survives.
pub fn compress_conversations(records: Vec<Record>) -> Result<Vec<Record>> {
    let mut groups: BTreeMap<(String, String), Vec<Record>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.image_id.clone(), r.source_tag().to_string()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((id, _), group) in groups {
        if group.len() == 1 {
            out.extend(group);
            continue;
        }
        out.push(merge(&id, group)?);
    }
    Ok(out)
}

fn merge(id: &str, group: Vec<Record>) -> Result<Record> {
    let first = &group[0];
    let system = first
        .system_text()
        .ok_or_else(|| Error::invalid(format!("record {id} has no system turn")))?
        .to_string();
    let image = first.image().map(|i| i.image.clone());
    for r in &group[1..] {
        if r.system_text() != Some(system.as_str()) {
            return Err(Error::ConflictingSystemPrompt(id.to_string()));
        }
        if r.image().map(|i| &i.image) != image.as_ref() {
            return Err(Error::invalid(format!(
                "records under image_id {id} reference different images"
            )));
        }
    }
    let mut merged = Record {
        conversations: vec![first.conversations[0].clone()],
        image_id: id.to_string(),
        source: first.source.clone(),
        provenance: None,
        meta: None,
    };
    let mut seen_image = false;
    for r in group {
        for mut t in r.conversations.into_iter().skip(1) {
            if t.from == Role::User {
                if let TurnValue::Parts(parts) = &mut t.value {
                    parts.retain(|p| match p {
                        Part::Image(_) if seen_image => false,
                        Part::Image(_) => {
                            seen_image = true;
                            true
                        }
                        Part::Text { .. } => true,
                    });
                }
            }
            merged.conversations.push(t);
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{GroundingAction, PrimitiveKind};
    use crate::dataset::{build_grounding_record, ImageInfo, SystemPrompt};
    use crate::geometry::Point;
    use proptest::prelude::*;

    fn rec(path: &str, x: f64) -> Record {
        let img = ImageInfo::new(path, 200, 100).unwrap();
        let a = GroundingAction {
            kind: PrimitiveKind::LeftClick,
            coordinate: Point::new(x, 10.0),
            end: None,
            text: None,
            instantiated_instruction: String::new(),
        };
        build_grounding_record(&img, &format!("click {x}"), &a, SystemPrompt::ComputerUse).unwrap()
    }

    #[test]
    fn merges_pairs_under_one_system_turn() {
        let out = compress_conversations(vec![rec("a.png", 1.0), rec("a.png", 2.0)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].turns(), 2);
        assert_eq!(out[0].conversations.len(), 5);
        out[0].validate().unwrap();
        let images = out[0]
            .conversations
            .iter()
            .filter(|t| matches!(&t.value, TurnValue::Parts(p) if p.iter().any(|x| matches!(x, Part::Image(_)))))
            .count();
        assert_eq!(images, 1);
    }

    #[test]
    fn distinct_images_are_untouched() {
        let out = compress_conversations(vec![rec("a.png", 1.0), rec("b.png", 2.0)]).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn conflicting_system_prompts_fail() {
        let a = rec("a.png", 1.0);
        let mut b = rec("a.png", 2.0);
        b.conversations[0].value = TurnValue::Text {
            text: "other".into(),
        };
        assert!(matches!(
            compress_conversations(vec![a, b]),
            Err(Error::ConflictingSystemPrompt(_))
        ));
    }

    proptest! {
        #[test]
        fn turns_are_conserved(picks in proptest::collection::vec((0usize..6, 0.0f64..199.0), 0..40)) {
            let records: Vec<Record> = picks.iter().map(|(i, x)| rec(&format!("{i}.png"), *x)).collect();
            let before: usize = records.iter().map(Record::turns).sum();
            let distinct: std::collections::BTreeSet<_> = records.iter().map(|r| r.image_id.clone()).collect();
            let out = compress_conversations(records).unwrap();
            prop_assert_eq!(out.iter().map(Record::turns).sum::<usize>(), before);
            prop_assert_eq!(out.len(), distinct.len());
            for r in &out {
                prop_assert!(r.validate().is_ok());
            }
        }
    }
}
