use promptvm::numerics::Rational;
use promptvm::transformer::{Op, Transformer, TransformerConfig, FORMAT, VERSION};

#[test]
fn serialization_is_stable() {
    let a = Transformer::new().config_json();
    let b = Transformer::new().config_json();
    assert_eq!(a, b);
    let parsed = TransformerConfig::from_json(&a).unwrap();
    assert_eq!(parsed.to_json(), a);
    assert_eq!(parsed.format, FORMAT);
    assert_eq!(parsed.version, VERSION);
}

#[test]
fn weights_are_in_the_fixed_domain() {
    let t = Transformer::new();
    let allowed = [Rational::ZERO, Rational::new(1, 2), Rational::ONE, Rational::from_int(2), Rational::from_int(3)];
    for w in t.config().weights() {
        assert!(allowed.contains(&w.abs()), "weight {w}");
    }
}

#[test]
fn shape_of_the_network() {
    let c = Transformer::new().config().clone();
    assert_eq!(c.layers.len(), 5);
    assert_eq!(c.tokens.len(), 23);
    assert_eq!(c.readout.candidates.len(), 17);
    let mins = c.layers.iter().flat_map(|l| &l.heads).filter(|h| !matches!(h.sim, promptvm::numerics::Sim::Identity)).count();
    assert_eq!(mins, 1);
}

#[test]
fn tampered_configs_are_rejected() {
    let base = Transformer::new().config().clone();

    let mut c = base.clone();
    if let Some(Op::Relu { relus, .. }) = c.layers[0].ops.iter_mut().find(|o| matches!(o, Op::Relu { relus, .. } if !relus.is_empty())) {
        relus[0].coef = Rational::new(5, 7);
    }
    assert!(c.validate().unwrap_err().contains("weight"));

    let mut c = base.clone();
    let out = c.layers[1].heads[0].out[0];
    c.layers[2].heads[0].out[0] = out;
    assert!(c.validate().unwrap_err().contains("written twice"));

    let mut c = base.clone();
    let late = c.layers[4].heads[0].out[0];
    c.layers[0].heads[0].value[0] = late;
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.version = VERSION + 1;
    assert!(Transformer::from_config(c).is_err());

    assert!(TransformerConfig::from_json("{}").is_err());
}
