use chrono::NaiveDate;
use proptest::prelude::*;

use deckforge::deck::{parse_deck, serialize_deck, ChartKind, ChartSpec, DataSeries, Deck, DeckParameters, Slide, SlideObject, TableSpec};
use deckforge::render::{pie_wedge_angles, render_chart_svg, render_html, RenderOptions, Theme};
use deckforge::timeseries::Aggregation;

fn text() -> impl Strategy<Value = String> {
    // markup characters on purpose, to exercise escaping
    proptest::string::string_regex("[A-Za-z0-9<>&\"'%/][A-Za-z0-9 <>&\"'%/]{0,15}").unwrap()
}

fn chart() -> impl Strategy<Value = ChartSpec> {
    (0usize..4, 1usize..8, 1usize..4, text()).prop_flat_map(|(kind, n, series, title)| {
        let kind = [ChartKind::Piechart, ChartKind::Barchart, ChartKind::Linechart, ChartKind::Table][kind];
        let series = if kind == ChartKind::Piechart { 1 } else { series };
        let lo = if kind == ChartKind::Piechart { 0.0 } else { -1e6 };
        (
            proptest::collection::vec((text(), proptest::collection::vec(lo..1e6f64, n)), series),
            proptest::collection::vec(text(), n),
        )
            .prop_map(move |(series, x_labels)| ChartSpec {
                chart_kind: kind,
                title: title.clone(),
                series: series.into_iter().map(|(label, values)| DataSeries { label, values }).collect(),
                x_labels,
            })
    })
}

fn table() -> impl Strategy<Value = TableSpec> {
    (1usize..4).prop_flat_map(|w| {
        (proptest::collection::vec(text(), w), proptest::collection::vec(proptest::collection::vec(text(), w), 0..4))
            .prop_map(|(headers, rows)| TableSpec { headers, rows })
    })
}

fn object() -> impl Strategy<Value = SlideObject> {
    prop_oneof![
        chart().prop_map(SlideObject::Chart),
        proptest::collection::vec(text(), 0..4).prop_map(|lines| SlideObject::Insight { lines }),
        table().prop_map(SlideObject::Table),
    ]
}

fn deck() -> impl Strategy<Value = Deck> {
    let slide = (text(), 0i64..2000, proptest::collection::vec(object(), 1..4)).prop_map(|(title, day, objects)| Slide {
        title,
        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(day as u64),
        objects,
    });
    (text(), 1u32..36, any::<bool>(), proptest::collection::vec(slide, 0..5)).prop_map(|(name, horizon, median, slides)| Deck {
        name,
        parameters: DeckParameters {
            comparable_firms: vec!["F".into(), "GM".into()],
            horizon_months: horizon,
            aggregation_metric: if median { Aggregation::Median } else { Aggregation::Mean },
        },
        slides,
    })
}

const VOID: &[&str] = &["meta", "br", "hr", "img", "link", "input"];

/// Minimal tag-balance checker: every opened element is closed in order.
fn well_formed(html: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = html;
    while let Some(i) = rest.find('<') {
        rest = &rest[i..];
        if rest.starts_with("<!--") {
            let end = rest.find("-->").ok_or("unterminated comment")?;
            rest = &rest[end + 3..];
            continue;
        }
        if rest.starts_with("<!") {
            let end = rest.find('>').ok_or("unterminated doctype")?;
            rest = &rest[end + 1..];
            continue;
        }
        let end = rest.find('>').ok_or("unterminated tag")?;
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().ok_or(format!("stray </{name}>"))?;
            if open != name.trim() {
                return Err(format!("<{open}> closed by </{name}>"));
            }
            continue;
        }
        if tag.contains('<') || tag.contains('"') && tag.matches('"').count() % 2 == 1 {
            return Err(format!("malformed tag <{tag}>"));
        }
        let name: String = tag.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
        if name.is_empty() {
            return Err(format!("unescaped '<' before {:?}", &tag[..tag.len().min(10)]));
        }
        if tag.ends_with('/') || VOID.contains(&name.as_str()) {
            continue;
        }
        if name == "script" || name == "style" {
            let close = format!("</{name}>");
            let end = rest.find(&close).ok_or(format!("unterminated <{name}>"))?;
            rest = &rest[end + close.len()..];
            continue;
        }
        stack.push(name);
    }
    if stack.is_empty() { Ok(()) } else { Err(format!("unclosed {stack:?}")) }
}

#[test]
fn checker_rejects_broken_markup() {
    assert!(well_formed("<div><p>x</p></div>").is_ok());
    assert!(well_formed("<div><p>x</div>").is_err());
    assert!(well_formed("<div>a < b</div>").is_err());
    assert!(well_formed("<ul><li>x</li>").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn html_is_well_formed(d in deck(), dark in any::<bool>(), embed in any::<bool>()) {
        let opts = RenderOptions { theme: if dark { Theme::Dark } else { Theme::Light }, embed_data: embed, ..RenderOptions::default() };
        let html = render_html(&d, &opts).unwrap();
        prop_assert!(html.starts_with("<!DOCTYPE html>"));
        if let Err(e) = well_formed(&html) {
            prop_assert!(false, "{}", e);
        }
        // deterministic
        prop_assert_eq!(html, render_html(&d, &opts).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn deck_round_trip(d in deck()) {
        let json = serialize_deck(&d);
        let back = parse_deck(&json).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_deck(&back), json);
    }

    #[test]
    fn ragged_series_rejected_at_parse(d in deck().prop_filter("has a chart with data", |d| {
        d.slides.iter().flat_map(|s| s.charts()).any(|c| !c.x_labels.is_empty())
    })) {
        let mut d = d;
        let chart = d.slides.iter_mut().flat_map(|s| s.objects.iter_mut()).find_map(|o| match o {
            SlideObject::Chart(c) if !c.x_labels.is_empty() => Some(c),
            _ => None,
        }).unwrap();
        chart.x_labels.push("extra".into());
        prop_assert!(parse_deck(&serialize_deck(&d)).is_err());
    }

    #[test]
    fn wedge_angles_sum_to_full_turn(values in proptest::collection::vec(0.0..1e9f64, 1..20)) {
        prop_assume!(values.iter().any(|v| *v > 0.0));
        let angles = pie_wedge_angles(&values).unwrap();
        prop_assert!((angles.iter().sum::<f64>() - 360.0).abs() < 1e-6);
        let total: f64 = values.iter().sum();
        for (a, v) in angles.iter().zip(&values) {
            prop_assert!((a - 360.0 * v / total).abs() < 1e-6);
        }
    }

    #[test]
    fn pie_svg_wedges_match_angles(values in proptest::collection::vec(0.01..1e3f64, 1..8)) {
        let labels = (0..values.len()).map(|i| format!("s{i}")).collect();
        let c = ChartSpec::new(ChartKind::Piechart, "pie", vec![DataSeries { label: "v".into(), values: values.clone() }], labels).unwrap();
        let svg = render_chart_svg(&c, &RenderOptions::default()).unwrap();
        let drawn: f64 = svg
            .match_indices("data-angle=\"")
            .map(|(i, m)| {
                let s = &svg[i + m.len()..];
                s[..s.find('"').unwrap()].parse::<f64>().unwrap()
            })
            .sum();
        // each printed angle is rounded to 6 decimals
        prop_assert!((drawn - 360.0).abs() <= values.len() as f64 * 5e-7 + 1e-9, "{}", drawn);
    }
}
