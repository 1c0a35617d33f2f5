use std::path::Path;

use forage::config::RunConfig;
use forage::vocabulary::{load_vocabulary, TextMode};

#[test]
fn shipped_animal_config_loads() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/animals");
    let cfg = RunConfig::load(&root.join("run.cfg")).unwrap();
    cfg.validate().unwrap();
    assert!(cfg.service.is_some());
    let vocab = load_vocabulary(&cfg.vocabulary).unwrap();
    assert_eq!(vocab.len(), 30);
    assert_eq!(vocab.compose_texts(TextMode::NamePlusDescription).unwrap().len(), 30);
    assert!(cfg.tsne.validate(vocab.len()).is_ok());
}
