mod common;

use std::io::BufReader;

use common::*;
use lhr_core::checkpoint::{self, FORMAT_VERSION};
use lhr_core::lss::{self, LssFormat};
use lhr_core::treebank::write_conll;
use lhr_core::{
    parse_all, read_conll, DecodeOptions, Error, Format, ReadOptions, TrainConfig, Trainer,
    Treebank,
};

fn trained() -> lhr_core::LhrModel {
    let train = toy_train();
    let mut model = model_for(&train, scaled_config(3));
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    Trainer::new(cfg)
        .unwrap()
        .train(&mut model, &train, &Treebank::default())
        .unwrap();
    model
}

#[test]
fn checkpoint_reload_parses_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = trained();
    checkpoint::save(&model, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();
    assert_eq!(
        checkpoint::to_json(&loaded).unwrap(),
        checkpoint::to_json(&model).unwrap()
    );

    let dev = toy_dev();
    let a = parse_all(&model, &dev.sentences, DecodeOptions::default()).unwrap();
    let b = parse_all(&loaded, &dev.sentences, DecodeOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_version_is_checked() {
    let json = checkpoint::to_json(&trained()).unwrap();
    let bumped = json.replacen(
        &format!("\"format_version\":{FORMAT_VERSION}"),
        &format!("\"format_version\":{}", FORMAT_VERSION + 1),
        1,
    );
    assert_ne!(json, bumped);
    assert!(matches!(
        checkpoint::from_json(&bumped),
        Err(Error::FormatVersion { found, expected }) if found == FORMAT_VERSION + 1 && expected == FORMAT_VERSION
    ));
}

#[test]
fn parsed_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained();
    let dev = toy_dev();
    let trees = parse_all(&model, &dev.sentences, DecodeOptions::default()).unwrap();
    let path = dir.path().join("parsed.conllu");
    write_conll(&dev, &trees, &path).unwrap();
    let back = read_conll(&path, &ReadOptions::with_format(Format::ConllU)).unwrap();
    assert_eq!(back.num_tokens(), dev.num_tokens());
    for (s, t) in back.sentences.iter().zip(&trees) {
        assert_eq!(s.gold_heads().unwrap(), t.heads);
        let labels: Vec<_> = s.tokens.iter().map(|tok| tok.gold_label.clone()).collect();
        assert_eq!(labels, t.labels);
    }
}

#[test]
fn lss_export_reloads_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained();
    let dev = toy_dev();
    let records = lss::export_records(&model, &dev.sentences).unwrap();
    assert_eq!(records.len(), dev.num_tokens());
    assert!(records
        .iter()
        .all(|r| r.values.len() == 2 * model.context_dim()));
    assert_eq!((records[0].sentence, records[0].token), (1, 1));

    let enc = model.encode_sentence(&dev.sentences[0]).unwrap();
    assert_eq!(
        &records[0].values[..model.context_dim()],
        enc.context_vectors[0].data()
    );
    assert_eq!(
        &records[0].values[model.context_dim()..],
        enc.latent_heads[0].data()
    );

    for format in [LssFormat::Text, LssFormat::Binary] {
        let path = dir.path().join(format!("lss.{format:?}"));
        lss::write(std::fs::File::create(&path).unwrap(), format, &records).unwrap();
        let back = lss::read(BufReader::new(std::fs::File::open(&path).unwrap()), format).unwrap();
        assert_eq!(back, records);
    }
}
