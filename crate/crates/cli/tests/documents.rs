use std::path::Path;

use elicit_cli::{Model, ModelDocument};
use elicit_core::ceg::Ceg;

fn fixture(name: &str) -> ModelDocument {
    ModelDocument::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

fn round_trip(model: &Model, doc: &ModelDocument) {
    let written = ModelDocument::from_model(model, doc.metadata.clone());
    let reparsed = ModelDocument::parse(&written.to_json()).unwrap();
    assert_eq!(reparsed, written);
    let again = reparsed.load().unwrap();
    assert_eq!(again.kind(), model.kind());
    assert_eq!(again.hash(), model.hash());
    assert_eq!(ModelDocument::from_model(&again, reparsed.metadata.clone()).to_json(), written.to_json());
}

#[test]
fn every_kind_round_trips() {
    let mut kinds = Vec::new();
    for name in ["food_health.json", "breakfast.json", "snap.json", "summer_meals.json", "austin.json"] {
        let doc = fixture(name);
        let model = doc.load().unwrap();
        round_trip(&model, &doc);
        kinds.push(model.kind().to_string());

        if let Model::StagedTree(tree) = &model {
            let ceg = Ceg::from_staged_tree(tree).unwrap();
            let model = Model::Ceg { tree: tree.clone(), ceg };
            round_trip(&model, &doc);
            kinds.push(model.kind().to_string());
        }
    }
    kinds.sort();
    kinds.dedup();
    assert_eq!(kinds, ["ceg", "dag", "flow_graph", "mdm", "staged_tree"]);
}

#[test]
fn metadata_survives() {
    let doc = fixture("snap.json");
    let written = ModelDocument::from_model(&doc.load().unwrap(), doc.metadata.clone());
    assert_eq!(written.metadata, doc.metadata);
}
