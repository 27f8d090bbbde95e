use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;
use xppsim::layer_spec::{Int8Data, LayerFile, LayerSpecError};
use xppsim::orchestrator::Routing;
use xppsim::qtensor::{Dims3, KernelDims, Multiplier, Padding};

fn schema() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/layer-spec.schema.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn full_file() -> LayerFile {
    LayerFile {
        name: Some("l".into()),
        input: Dims3::new(2, 2, 1),
        kernel: KernelDims::new(1, 1, 1, 1),
        stride: 1,
        padding: Padding::Valid,
        z_in: 1,
        z_out: -1,
        multipliers: vec![Multiplier::new(1 << 30, 2)],
        bias: Some(vec![5]),
        weights: Some(Int8Data::Inline(vec![3])),
        activations: Some(Int8Data::encode(&[1, -2, 3, -4])),
        seed: 9,
        routing: Routing::ChainNext,
    }
}

#[test]
fn schema_properties_match_the_file_fields() {
    let s = schema();
    let written: Value = serde_json::from_str(&full_file().to_json()).unwrap();
    assert_eq!(keys(&s["properties"]), keys(&written));
    assert_eq!(keys(&s["properties"]["input"]["properties"]), keys(&written["input"]));
    assert_eq!(keys(&s["properties"]["kernel"]["properties"]), keys(&written["kernel"]));
    assert_eq!(keys(&s["$defs"]["multiplier"]["properties"]), keys(&written["multipliers"][0]));
    assert_eq!(s["required"], serde_json::json!(["input", "kernel"]));
    assert_eq!(s["properties"]["routing"]["enum"], serde_json::json!(["to_host", "chain_next"]));
}

#[test]
fn minimal_file_uses_documented_defaults() {
    let f = LayerFile::from_json(r#"{"input":{"h":3,"w":3,"c":2},"kernel":{"k":2,"r":3,"s":3,"c":2}}"#).unwrap();
    let s = schema();
    assert_eq!(f.stride as u64, s["properties"]["stride"]["default"].as_u64().unwrap());
    assert_eq!(serde_json::to_value(f.padding).unwrap(), s["properties"]["padding"]["default"]);
    assert_eq!(serde_json::to_value(f.routing).unwrap(), s["properties"]["routing"]["default"]);
    assert_eq!((f.z_in, f.z_out, f.seed), (0, 0, 0));
    let job = f.to_job().unwrap();
    assert_eq!(job.spec.requant.multipliers.len(), 2);
    assert!(job.spec.requant.multipliers.iter().all(|m| m.check().is_ok()));
}

#[test]
fn full_file_round_trips_and_builds() {
    let f = full_file();
    assert_eq!(LayerFile::from_json(&f.to_json()).unwrap(), f);
    let job = f.to_job().unwrap();
    assert_eq!(job.input.unwrap().data(), &[1, -2, 3, -4]);
    assert_eq!(job.weights.data(), &[3]);
    assert_eq!(job.routing, Routing::ChainNext);
}

#[test]
fn bad_files_are_reported() {
    assert!(matches!(LayerFile::from_json(r#"{"input":{"h":1,"w":1,"c":1}}"#), Err(LayerSpecError::Json(_))));
    assert!(matches!(
        LayerFile::from_json(r#"{"input":{"h":1,"w":1,"c":1},"kernel":{"k":1,"r":1,"s":1,"c":1},"extra":1}"#),
        Err(LayerSpecError::Json(_))
    ));
    let mut f = full_file();
    f.bias = Some(vec![1, 2]);
    assert!(matches!(f.to_job(), Err(LayerSpecError::Length { field: "bias", expected: 1, got: 2 })));
    let mut f = full_file();
    f.weights = Some(Int8Data::Base64("***".into()));
    assert!(matches!(f.to_job(), Err(LayerSpecError::Base64 { field: "weights", .. })));
    let mut f = full_file();
    f.kernel.c = 3;
    assert!(matches!(f.to_job(), Err(LayerSpecError::Length { .. } | LayerSpecError::Quant(_))));
}
