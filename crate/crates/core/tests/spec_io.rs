use std::path::Path;

use lgm::data::{load_table, DataTable};
use lgm::design::{assemble, build_layout_and_design};
use lgm::gmrf::ModelKind;
use lgm::spec::{GraphSource, HyperSpec, MatrixSource, ModelSpec, RandomComponent};
use lgm::Error;
use proptest::prelude::*;

fn table(cols: &[(&str, Vec<f64>)]) -> DataTable {
    DataTable::from_columns(
        cols.iter()
            .map(|(n, v)| (n.to_string(), v.clone()))
            .collect(),
    )
    .unwrap()
}

#[test]
fn intercept_and_slope() {
    let s = ModelSpec::parse(r#"{"response":"y","fixed":["1","x"]}"#).unwrap();
    assert_eq!(s.fixed, vec!["1", "x"]);
    assert!(s.random.is_empty());
    assert!(s.safe);
    assert_eq!(s.control.fixed.prec, 0.001);
    assert_eq!(s.control.fixed.prec_intercept, 0.001);
}

#[test]
fn empty_fixed_block_is_valid() {
    let s = ModelSpec::parse(r#"{"response":"y","fixed":[]}"#).unwrap();
    let d = table(&[("y", vec![1.0, 2.0])]);
    let (layout, design) = build_layout_and_design(&s, &d).unwrap();
    assert_eq!(layout.n, 0);
    assert_eq!(design.a.nnz(), 0);
}

#[test]
fn iid_component_defaults() {
    let s =
        ModelSpec::parse(r#"{"response":"y","random":[{"id":"group","model":"iid"}]}"#).unwrap();
    let c = &s.random[0];
    assert_eq!(c.model, ModelKind::Iid);
    assert!(!c.constr && !c.scale_model && !c.cyclic);
    assert!(c.hyper.is_empty());
}

#[test]
fn errors_carry_the_key_path() {
    let cases = [
        (r#"{"response":"y","colour":1}"#, ""),
        (
            r#"{"response":"y","random":[{"id":"g","model":"besag3"}]}"#,
            "random[0].model",
        ),
        (
            r#"{"response":"y","random":[{"id":"g","model":"iid","hyper":{"prec":{"prior":"pc.foo","param":[1,0.01]}}}]}"#,
            "random[0].hyper.prec.prior",
        ),
        (
            r#"{"response":"y","random":[{"id":"g","model":"iid","hyper":{"rho":{"prior":"pc.prec","param":[1,0.01]}}}]}"#,
            "random[0].hyper.rho",
        ),
        (r#"{"response":"y","family":"weibull"}"#, "family"),
        (r#"{"response":"y","fixed":"1"}"#, "fixed"),
        (
            r#"{"response":"y","random":[{"id":"g","model":"iid","cyclic":true}]}"#,
            "random[0].cyclic",
        ),
        (
            r#"{"response":"y","random":[{"id":"g","model":"bym"}]}"#,
            "random[0].graph",
        ),
        (
            r#"{"response":"y","random":[{"id":"g","model":"generic0"}]}"#,
            "random[0].Q",
        ),
        (r#"{"response":"y","E":"e"}"#, "E"),
        (r#"{"response":"y","family":"binomial"}"#, "Ntrials"),
        (
            r#"{"response":"y","random":[{"id":"g","model":"iid"},{"id":"g","model":"rw1"}]}"#,
            "random[1].id",
        ),
        (
            r#"{"response":"y","control":{"fixed":{"prec":0}}}"#,
            "control.fixed.prec",
        ),
    ];
    for (text, path) in cases {
        match ModelSpec::parse(text) {
            Err(Error::Spec { path: p, .. }) => {
                assert!(p.starts_with(path), "{text}: path `{p}`, wanted `{path}`")
            }
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn dotted_and_underscore_keys() {
    let a = ModelSpec::parse(
        r#"{"response":"y","random":[{"id":"t","model":"rw2","scale.model":true}]}"#,
    )
    .unwrap();
    let b = ModelSpec::parse(
        r#"{"response":"y","random":[{"id":"t","model":"rw2","scale_model":true}]}"#,
    )
    .unwrap();
    assert_eq!(a, b);
    assert!(a.random[0].scale_model);
    assert!(a.to_json().contains("\"scale.model\""));
}

#[test]
fn load_table_and_missing_markers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "y,x\n1.5,2\nNA,3\n0.5,4\n").unwrap();
    let t = load_table(&p).unwrap();
    assert_eq!(t.n_rows(), 3);
    assert!(t.column("y").unwrap()[1].is_nan());

    std::fs::write(&p, "y,x\n1.5,NA\n2,3\n").unwrap();
    let t = load_table(&p).unwrap();
    let s = ModelSpec::parse(r#"{"response":"y","fixed":["1","x"]}"#).unwrap();
    assert!(matches!(assemble(&s, &t), Err(Error::Spec { .. })));
}

#[test]
fn written_tables_load_back() {
    let t = table(&[
        ("y", vec![1.0, f64::NAN, 0.25]),
        ("x", vec![1e-7, 2.0, -3.5]),
    ]);
    let mut buf = Vec::new();
    t.write_csv(&mut buf, 12).unwrap();
    let back = DataTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.names(), t.names());
    assert_eq!(back.column("x"), t.column("x"));
    assert!(back.column("y").unwrap()[1].is_nan());
}

#[test]
fn two_fixed_and_iid_over_five_groups() {
    let n = 10;
    let d = table(&[
        ("y", (0..n).map(|i| i as f64).collect()),
        ("x", (0..n).map(|i| 0.5 * i as f64 + 1.0).collect()),
        ("g", (0..n).map(|i| (i % 5 + 1) as f64).collect()),
    ]);
    let mut s = ModelSpec::new("y", &["1", "x"]);
    s.random.push(RandomComponent::new("g", ModelKind::Iid));
    let (layout, design) = build_layout_and_design(&s, &d).unwrap();
    assert_eq!(layout.n, 7);
    assert_eq!((design.a.nrows(), design.a.ncols()), (10, 7));
    for i in 0..n {
        let (cols, vals) = design.a.row(i);
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[2], 2 + i % 5);
        assert_eq!(vals[2], 1.0);
    }
    assert_eq!(layout.fixed_names, vec!["(Intercept)", "x"]);
    assert_eq!(layout.lookup("g:3"), Some(4..5));
    assert_eq!(layout.lookup("1"), Some(0..1));
}

#[test]
fn zero_and_out_of_range_indices_are_rejected() {
    let d = table(&[("y", vec![1.0, 2.0]), ("g", vec![0.0, 1.0])]);
    let mut s = ModelSpec::new("y", &[]);
    s.random.push(RandomComponent::new("g", ModelKind::Iid));
    assert!(assemble(&s, &d).is_err());
    let d = table(&[("y", vec![1.0, 2.0]), ("g", vec![3.0, 1.0])]);
    s.random[0].n = Some(2);
    assert!(assemble(&s, &d).is_err());
}

#[test]
fn bym_over_scotland_has_a_double_block() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let d = load_table(&root.join("data/scotland.csv")).unwrap();
    let mut s = ModelSpec::new("Y", &["1", "AFF"]);
    s.family = lgm::families::Family::Poisson;
    s.e = Some(lgm::spec::AuxSource::Column("E".into()));
    let mut c = RandomComponent::new("idarea", ModelKind::Bym);
    c.graph = Some(GraphSource::Path(root.join("data/scotland.graph")));
    c.scale_model = true;
    s.random.push(c);
    let a = assemble(&s, &d).unwrap();
    assert_eq!(a.layout.components[0].len, 112);
    assert_eq!(a.layout.n, 114);
    // observations load the combined effect b, the first half of the block
    for i in 0..56 {
        let (cols, _) = a.design.a.row(i);
        assert_eq!(cols[2], 2 + i);
    }
}

#[test]
fn a_local_is_embedded_directly() {
    let n_obs = 6;
    let m = 4;
    let d = table(&[("y", (0..n_obs).map(|i| i as f64).collect())]);
    let mut t = vec![];
    for i in 0..n_obs {
        t.push((i + 1, i % m + 1, 0.5));
        t.push((i + 1, (i + 1) % m + 1, 0.25));
    }
    let q: Vec<(usize, usize, f64)> = (1..=m).map(|i| (i, i, 2.0)).collect();
    let mut s = ModelSpec::new("y", &["1"]);
    let mut c = RandomComponent::new("field", ModelKind::Generic0);
    c.q = Some(MatrixSource::Triplets(q));
    c.a_local = Some(MatrixSource::Triplets(t.clone()));
    s.random.push(c);
    let (layout, design) = build_layout_and_design(&s, &d).unwrap();
    assert_eq!(layout.n, 1 + m);
    let dense = design.a.to_dense();
    for &(i, j, v) in &t {
        assert_eq!(dense[i - 1][j], v);
    }

    s.random[0].a_local = Some(MatrixSource::Triplets(vec![(7, 1, 1.0)]));
    assert!(assemble(&s, &d).is_err());
}

fn arb_hyper() -> impl Strategy<Value = HyperSpec> {
    (
        prop_oneof![Just("pc.prec"), Just("loggamma"), Just("gaussian")],
        0.05f64..0.95,
        0.05f64..0.95,
        proptest::option::of(-3.0f64..3.0),
        any::<bool>(),
    )
        .prop_map(|(p, a, b, init, fixed)| HyperSpec {
            prior: Some(p.into()),
            param: vec![a, b],
            initial: init.or(fixed.then_some(0.0)),
            fixed,
        })
}

fn arb_component(k: usize) -> impl Strategy<Value = RandomComponent> {
    (
        0usize..4,
        any::<bool>(),
        any::<bool>(),
        proptest::option::of(arb_hyper()),
        proptest::option::of(1usize..50),
    )
        .prop_map(move |(kind, constr, flag, hyper, n)| {
            let model = [
                ModelKind::Iid,
                ModelKind::Rw1,
                ModelKind::Rw2,
                ModelKind::Ar1,
            ][kind];
            let mut c = RandomComponent::new(&format!("c{k}"), model);
            c.constr = constr;
            c.scale_model = flag;
            c.cyclic = flag && matches!(model, ModelKind::Rw1 | ModelKind::Rw2);
            c.n = n;
            if let Some(h) = hyper {
                c.hyper.insert("prec".into(), h);
            }
            c
        })
}

proptest! {
    #[test]
    fn parse_serialize_parse_is_identity(
        fixed in proptest::collection::vec("[a-z]{1,6}", 0..4),
        comps in (0usize..4).prop_flat_map(|n| (0..n).map(arb_component).collect::<Vec<_>>()),
        dic in any::<bool>(), prec in 1e-4f64..10.0, dz in 0.1f64..1.5, safe in any::<bool>(),
    ) {
        let mut fixed: Vec<String> = fixed;
        fixed.sort();
        fixed.dedup();
        fixed.insert(0, "1".into());
        let mut s = ModelSpec::new("y", &[]);
        s.fixed = fixed;
        s.random = comps;
        s.control.compute.dic = dic;
        s.control.fixed.prec = prec;
        s.control.inla.dz = dz;
        s.safe = safe;
        s.validate().unwrap();
        let text = s.to_json();
        let back = ModelSpec::parse(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(ModelSpec::parse(&back.to_json()).unwrap(), back);
    }

    #[test]
    fn rows_have_one_entry_per_term(n in 1usize..40, groups in 1usize..6, with_x in any::<bool>(), seed in 0u64..1000) {
        let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 11) as f64 + 0.5).collect();
        let mut cols = vec![("y", vec![1.0; n]), ("g", (0..n).map(|i| (i % groups + 1) as f64).collect()), ("t", (0..n).map(|i| (i + 1) as f64).collect())];
        if with_x { cols.push(("x", x)); }
        let d = table(&cols);
        let fixed: &[&str] = if with_x { &["1", "x"] } else { &["1"] };
        let mut s = ModelSpec::new("y", fixed);
        s.random.push(RandomComponent::new("g", ModelKind::Iid));
        s.random.push(RandomComponent::new("t", ModelKind::Ar1));
        let a = assemble(&s, &d).unwrap();
        let p = fixed.len();
        for i in 0..n {
            prop_assert_eq!(a.design.a.row(i).0.len(), p + 2);
        }
        let total: usize = a.layout.fixed.len + a.layout.components.iter().map(|b| b.len).sum::<usize>();
        prop_assert_eq!(total, a.layout.n);
        let mut next = 0;
        for b in std::iter::once(&a.layout.fixed).chain(&a.layout.components) {
            prop_assert_eq!(b.offset, next);
            next += b.len;
        }
    }
}
