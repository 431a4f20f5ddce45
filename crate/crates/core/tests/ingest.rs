use std::path::Path;

use brainpaint_core::atlas::atlas_definition;
use brainpaint_core::ingest::{check_range, parse_biomarker_csv, IngestError};
use brainpaint_core::{Atlas, Gradient};
use proptest::prelude::*;

const FIG1: &str = "Biomarkers,Hippocampus,Inferior temporal,Superior parietal\n\
                    Brain 1,0.6,2.3,1.3\n\
                    Brain 2,1.2,0.0,3.0\n";

fn dk() -> Atlas {
    atlas_definition("desikan_killiany", Path::new("/nonexistent")).unwrap()
}

#[test]
fn fig1_table() {
    let a = dk();
    let (t, warnings) = parse_biomarker_csv(FIG1, &a).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.value(1, "superior_parietal"), 3.0);
    assert_eq!(t.value(0, "amygdala"), 0.0);
    assert_eq!(warnings.len(), a.regions.len() - 3);
    assert!(warnings.iter().all(|w| w.code == "missing_region"));
    assert!(check_range(&t, &Gradient::default_gradient()).is_empty());
}

#[test]
fn errors_carry_positions() {
    let a = dk();
    let cases: [(&str, &str, Option<usize>, Option<usize>); 6] = [
        ("id,Hipocampus\nb,1\n", "unresolved_region", Some(1), Some(2)),
        ("id,hippocampus\nb,abc\n", "non_numeric", Some(2), Some(2)),
        ("id,hippocampus\nb,1\nc,NaN\n", "non_finite", Some(3), Some(2)),
        ("id,hippocampus\nb,1,2\n", "ragged_row", Some(2), None),
        ("id,hippocampus\nb,1\nb,2\n", "duplicate_image", Some(3), Some(1)),
        (
            "id,hippocampus,Hippocampus\nb,1,2\n",
            "duplicate_region",
            Some(1),
            Some(3),
        ),
    ];
    for (csv, code, row, column) in cases {
        let d = parse_biomarker_csv(csv, &a).unwrap_err().to_diagnostic();
        assert_eq!((d.code.as_str(), d.row, d.column), (code, row, column), "{csv:?}");
    }
    let e = parse_biomarker_csv("id,Hipocampus\nb,1\n", &a).unwrap_err();
    assert_eq!(e.suggestions().first().map(String::as_str), Some("hippocampus"));
    assert_eq!(parse_biomarker_csv("", &a).unwrap_err(), IngestError::Empty);
    assert_eq!(parse_biomarker_csv("id\nb\n", &a).unwrap_err(), IngestError::NoRegions);
}

#[test]
fn out_of_range_values_warn_once_each() {
    let a = dk();
    let (t, _) = parse_biomarker_csv("id,hippocampus,amygdala\nb,-1,4\nc,1,2\n", &a).unwrap();
    let w = check_range(&t, &Gradient::default_gradient());
    assert_eq!(w.len(), 2);
    assert!(w.iter().all(|d| d.code == "value_out_of_range"));
}

#[test]
fn bom_and_crlf_are_accepted() {
    let a = dk();
    let text = "\u{feff}id,hippocampus\r\nb,1.5\r\n";
    let (t, _) = parse_biomarker_csv(text, &a).unwrap();
    assert_eq!(t.value(0, "hippocampus"), 1.5);
}

proptest! {
    #[test]
    fn csv_round_trip(
        cols in prop::sample::subsequence((0..20usize).collect::<Vec<_>>(), 1..6),
        rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 6), 1..8),
    ) {
        let a = dk();
        let names: Vec<&str> = cols.iter().map(|&i| a.regions[i].canonical_name.as_str()).collect();
        let mut text = format!("id,{}\n", names.join(","));
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r.iter().take(names.len()).map(|v| v.to_string()).collect();
            text.push_str(&format!("img {i},{}\n", cells.join(",")));
        }
        let (t, _) = parse_biomarker_csv(&text, &a).unwrap();
        prop_assert_eq!(t.rows.len(), rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, n) in names.iter().enumerate() {
                prop_assert_eq!(t.value(i, n), r[j]);
            }
        }
        let (again, _) = parse_biomarker_csv(&t.to_csv(), &a).unwrap();
        prop_assert_eq!(again, t);
    }
}
