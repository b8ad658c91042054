use std::collections::BTreeSet;
use std::path::Path;

use wikiwealth::formats::corpus::{parse_corpus, write_corpus};
use wikiwealth::formats::image::{image_path, load_image, save_image};
use wikiwealth::formats::survey::{load_survey_points, read_education};
use wikiwealth_core::synth::{gen_corpus, gen_region, RegionSpec};

#[test]
fn thousand_article_corpus_round_trips() {
    let spec = RegionSpec { articles: 1000, ..RegionSpec::region_b() };
    let articles = gen_corpus(&spec).unwrap();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &articles).unwrap();
    let load = parse_corpus(&buf[..], None, Path::new("corpus.jsonl")).unwrap();
    assert_eq!(load.skipped, 0);
    assert_eq!(load.articles.len(), 1000);
    let ids: BTreeSet<&str> = load.articles.iter().map(|a| a.id.as_str()).collect();
    assert_eq!(ids.len(), 1000);
    assert_eq!(load.articles, articles);
}

#[test]
fn synthetic_images_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let region = gen_region(&RegionSpec { articles: 10, surveys: 20, ..RegionSpec::region_a() }).unwrap();
    for (p, g) in region.survey.points.iter().zip(&region.images) {
        let path = image_path(dir.path(), p);
        save_image(&path, g).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.pixels().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), g.pixels().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!((back.height(), back.width()), (g.height(), g.width()));
    }
}

#[test]
fn asset_files_are_pooled_before_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let header = "country,cluster_id,lat,lon,urban,asset_1,asset_2,asset_3\n";
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, format!("{header}A,1,0,30,1,1,1,1\nA,1,0,30,1,1,1,0\nA,2,1,31,0,0,0,0\n")).unwrap();
    std::fs::write(&b, format!("{header}B,1,-2,36,0,0,1,0\nB,1,-2,36,0,1,0,1\n")).unwrap();
    let load = load_survey_points(&[&a, &b]).unwrap();
    let by_key: Vec<(&str, &str, f64)> = load.points.iter().map(|p| (p.country.as_str(), p.cluster_id.as_str(), p.outcome)).collect();
    assert_eq!(by_key.len(), 3);
    assert_eq!(by_key[1], ("A", "2", -2.0));
    assert!(by_key.iter().all(|&(_, _, y)| (-2.0..=2.0).contains(&y)));
    assert!(by_key[0].2 > by_key[2].2);
}

#[test]
fn education_cap_applies_per_country() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edu.csv");
    let mut text = String::from("country,cluster_id,lat,lon,urban,outcome\n");
    for i in 0..350 {
        text.push_str(&format!("Ghana,{i},7.9,-1.0,0,{}\n", 1 + i % 4));
    }
    text.push_str("Ghana,bad,7.9,-1.0,0,7\nGhana,worse,x,-1.0,0,2\n");
    std::fs::write(&path, text).unwrap();
    let load = read_education(&path, Some(300)).unwrap();
    assert_eq!(load.points.len(), 300);
    assert_eq!(load.rejected, 2);
}
