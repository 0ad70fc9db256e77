use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    replace_placeholders, ActionDetail, ActionProgram, ActionSpaceType, GroundingAction, ParamValue,
};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub type Bindings = BTreeMap<String, ParamValue>;

/// Up to two decimals, trailing zeros trimmed: `24.0 -> "24"`, `711.855 -> "711.86"`.
pub fn format_value(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn quantize(v: f64, lo: f64, hi: f64) -> f64 {
    ((v * 100.0).round() / 100.0).clamp(lo, hi)
}

fn draw_continuous(rng: &mut ChaCha8Rng, intervals: &[[f64; 2]]) -> f64 {
    let total: f64 = intervals.iter().map(|[lo, hi]| hi - lo).sum();
    if total <= 0.0 {
        let [lo, _] = intervals[rng.random_range(0..intervals.len() as u32) as usize];
        return lo;
    }
    let mut u = rng.random::<f64>() * total;
    for &[lo, hi] in intervals {
        let len = hi - lo;
        if u < len {
            return quantize(lo + u, lo, hi);
        }
        u -= len;
    }
    let [lo, hi] = *intervals.last().unwrap();
    quantize(hi, lo, hi)
}

/// Draw `n` parameter bindings from the detail's action space.
///
/// Continuous draws are uniform over the union of intervals (weighted by
/// length) and quantized to 0.01 so the rendered instruction and the
/// evaluated coordinate agree. `none`/`unique` spaces yield one empty binding.
pub fn sample_bindings(d: &ActionDetail, seed: u64, n: usize) -> Vec<Bindings> {
    match d.action_space_type {
        ActionSpaceType::None | ActionSpaceType::Unique => return vec![Bindings::new()],
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n.max(1))
        .map(|_| {
            d.action_params
                .iter()
                .map(|p| {
                    let v = match d.action_space_type {
                        ActionSpaceType::Discrete => {
                            let values = &d.action_discrete_values.as_ref().expect("validated")[p];
                            values[rng.random_range(0..values.len() as u32) as usize].clone()
                        }
                        _ => {
                            let iv = &d.action_continuous_interval.as_ref().expect("validated")[p];
                            ParamValue::Number(draw_continuous(&mut rng, iv))
                        }
                    };
                    (p.clone(), v)
                })
                .collect()
        })
        .collect()
}

/// Evaluate every step of `program` under `bindings`. The returned actions
/// carry the step's typed text but no instruction yet.
pub fn evaluate_program(
    program: &ActionProgram,
    bindings: &Bindings,
) -> Result<Vec<GroundingAction>> {
    if let Some(missing) = program.params.iter().find(|p| !bindings.contains_key(*p)) {
        return Err(Error::UnboundParameter(missing.clone()));
    }
    program
        .body
        .iter()
        .map(|step| {
            let pt = |e: &[super::Expr; 2]| -> Result<Point> {
                Ok(Point::new(
                    e[0].eval(&program.anchors, bindings)?,
                    e[1].eval(&program.anchors, bindings)?,
                ))
            };
            Ok(GroundingAction {
                kind: step.kind,
                coordinate: pt(&step.at)?,
                end: step.to.as_ref().map(pt).transpose()?,
                text: step
                    .text
                    .as_ref()
                    .map(|t| replace_placeholders(t, bindings)),
                instantiated_instruction: String::new(),
            })
        })
        .collect()
}

pub fn instantiate_desc(desc: &str, bindings: &Bindings) -> String {
    replace_placeholders(desc, bindings)
}

/// Ground a detail under explicit bindings.
pub fn ground_with_bindings(d: &ActionDetail, bindings: &Bindings) -> Result<Vec<GroundingAction>> {
    let instruction = instantiate_desc(&d.action_desc, bindings);
    if super::placeholders(&instruction).next().is_some() {
        return Err(Error::invalid(format!(
            "instruction `{instruction}` still has unbound placeholders"
        )));
    }
    let mut actions = evaluate_program(&d.program, bindings)?;
    for a in &mut actions {
        a.instantiated_instruction = instruction.clone();
    }
    Ok(actions)
}

/// Sample `n` bindings and ground each of them.
pub fn ground_action_detail(d: &ActionDetail, seed: u64, n: usize) -> Result<Vec<GroundingAction>> {
    let mut out = Vec::new();
    for b in sample_bindings(d, seed, n) {
        out.extend(ground_with_bindings(d, &b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{parse_action_detail, ActionProgram, Expr, PrimitiveKind, Step};
    use proptest::prelude::*;

    const SATURATION: &str = r#"{
        "action_space_type": "continuous",
        "action_desc": "Set saturation to <saturation>%",
        "action_params": ["saturation"],
        "action_continuous_interval": {"saturation": [[0.0, 100.0]]},
        "action_code": "def action(saturation):\n    x_0, y_0 = 600.5, 830\n    x_1, y_1 = 1064.5, 830\n    x = x_0 + (x_1 - x_0) * (saturation / 100)\n    pyautogui.click(x, y_0)"
    }"#;

    fn saturation() -> ActionDetail {
        parse_action_detail(SATURATION).unwrap()
    }

    fn discrete() -> ActionDetail {
        parse_action_detail(
            r#"{
            "action_space_type": "discrete",
            "action_desc": "Choose size <size>",
            "action_params": ["size"],
            "action_discrete_values": {"size": ["S", "M", "L"]},
            "program": {
                "params": ["size"],
                "anchors": {"S": {"x": 100, "y": 40}, "M": {"x": 140, "y": 40}, "L": {"x": 180, "y": 40}},
                "body": [{"kind": "click", "at": ["anchor(size).x", "anchor(size).y"]}]
            }}"#,
        )
        .unwrap()
    }

    fn bind(v: f64) -> Bindings {
        Bindings::from([("saturation".to_string(), ParamValue::Number(v))])
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(24.0), "24");
        assert_eq!(format_value(878.9), "878.9");
        assert_eq!(format_value(711.8600000001), "711.86");
        assert_eq!(format_value(-0.001), "0");
    }

    #[test]
    fn slider_reproduces_recorded_clicks() {
        let d = saturation();
        let a = ground_with_bindings(&d, &bind(24.0)).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0].coordinate.x - 711.86).abs() < 1e-6);
        assert_eq!(a[0].coordinate.y, 830.0);
        assert_eq!(a[0].instantiated_instruction, "Set saturation to 24%");
        let b = ground_with_bindings(&d, &bind(60.0)).unwrap();
        assert!((b[0].coordinate.x - 878.90).abs() < 1e-6);
        assert_eq!(b[0].instantiated_instruction, "Set saturation to 60%");
        let z = ground_with_bindings(&d, &bind(0.0)).unwrap();
        assert_eq!(z[0].coordinate, Point::new(600.5, 830.0));
    }

    #[test]
    fn slider_is_affine_in_its_parameter() {
        let d = saturation();
        let at = |v| ground_with_bindings(&d, &bind(v)).unwrap()[0].coordinate;
        let (a, m, b) = (at(0.0), at(50.0), at(100.0));
        let cross = (m.x - a.x) * (b.y - a.y) - (m.y - a.y) * (b.x - a.x);
        assert!(cross.abs() < 1e-9);
        assert!((m.x - (a.x + b.x) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn unique_space_yields_one_empty_binding() {
        let d = crate::action::validate_action_detail(ActionDetail {
            thought_process: String::new(),
            action_space_type: ActionSpaceType::Unique,
            action_desc: "click submit".into(),
            action_params: vec![],
            action_discrete_values: None,
            action_continuous_interval: None,
            action_code: None,
            program: ActionProgram {
                params: vec![],
                anchors: Default::default(),
                body: vec![Step {
                    kind: PrimitiveKind::Click,
                    at: [Expr::Num(50.0), Expr::Num(60.0)],
                    to: None,
                    text: None,
                }],
            },
        })
        .unwrap();
        for seed in [0, 1, 99] {
            assert_eq!(sample_bindings(&d, seed, 5), vec![Bindings::new()]);
        }
        let a = ground_action_detail(&d, 3, 4).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].coordinate, Point::new(50.0, 60.0));
        assert_eq!(a[0].instantiated_instruction, "click submit");
    }

    #[test]
    fn discrete_draws_are_members() {
        let d = discrete();
        let bs = sample_bindings(&d, 11, 3);
        assert_eq!(bs.len(), 3);
        for b in bs {
            assert!(
                matches!(&b["size"], ParamValue::Text(t) if ["S", "M", "L"].contains(&t.as_str()))
            );
        }
    }

    #[test]
    fn discrete_grounding_matches_enumeration() {
        let d = discrete();
        // enumerate-all oracle: evaluate every listed value independently
        let oracle: BTreeMap<String, Point> = d.action_discrete_values.as_ref().unwrap()["size"]
            .iter()
            .map(|v| {
                let name = v.to_string();
                (name.clone(), d.program.anchors[&name])
            })
            .collect();
        for seed in 0..20 {
            for a in ground_action_detail(&d, seed, 3).unwrap() {
                let value = a
                    .instantiated_instruction
                    .trim_start_matches("Choose size ");
                assert_eq!(a.coordinate, oracle[value]);
            }
        }
    }

    #[test]
    fn continuous_draws_statistics() {
        let d = saturation();
        let bs = sample_bindings(&d, 7, 100);
        let vals: Vec<f64> = bs
            .iter()
            .map(|b| match b["saturation"] {
                ParamValue::Number(v) => v,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(vals.len(), 100);
        assert!(vals.iter().all(|v| (0.0..=100.0).contains(v)));
        let mean = vals.iter().sum::<f64>() / 100.0;
        assert!((40.0..=60.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn multi_interval_union_is_length_weighted() {
        let mut d = saturation();
        d.action_continuous_interval = Some(BTreeMap::from([(
            "saturation".into(),
            vec![[0.0, 10.0], [50.0, 90.0]],
        )]));
        let bs = sample_bindings(&d, 3, 4000);
        let low = bs
            .iter()
            .filter(|b| matches!(b["saturation"], ParamValue::Number(v) if v <= 10.0))
            .count();
        // expected share 10 / 50 = 0.2; 4000 draws give sd ~ 25
        assert!((700..=900).contains(&low), "{low}");
        assert!(bs.iter().all(|b| matches!(b["saturation"],
            ParamValue::Number(v) if (0.0..=10.0).contains(&v) || (50.0..=90.0).contains(&v))));
    }

    #[test]
    fn unbound_parameter_is_an_error() {
        assert!(matches!(
            evaluate_program(&saturation().program, &Bindings::new()),
            Err(Error::UnboundParameter(_))
        ));
    }

    proptest! {
        #[test]
        fn grounding_is_deterministic_and_in_range(seed in any::<u64>(), n in 1usize..20,
                                                   lo in -500.0f64..500.0, len in 0.0f64..300.0) {
            let mut d = saturation();
            d.action_continuous_interval =
                Some(BTreeMap::from([("saturation".into(), vec![[lo, lo + len]])]));
            let a = ground_action_detail(&d, seed, n).unwrap();
            let b = ground_action_detail(&d, seed, n).unwrap();
            prop_assert_eq!(&a, &b);
            for b in sample_bindings(&d, seed, n) {
                let ParamValue::Number(v) = b["saturation"] else { unreachable!() };
                prop_assert!(v >= lo && v <= lo + len);
            }
            for act in a {
                prop_assert!(!act.instantiated_instruction.contains('<'));
                prop_assert!(act.coordinate.is_finite());
            }
        }
    }
}
