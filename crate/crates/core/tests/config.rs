use deepstruct::config::{parse, DataSection, GraphSpec, ModelSpecDoc, NetworkSpec, NodeDecl, PairDecl, Structure};
use deepstruct::data::{Background, DatasetSpec};
use deepstruct::learning::{Algorithm, Strategy as TrainStrategy, TrainConfig};
use deepstruct::region::CountingNumbers;
use deepstruct::{Error, PairwiseKind};
use proptest::prelude::*;

fn network() -> impl Strategy<Value = NetworkSpec> {
    prop_oneof![
        (1usize..2000, prop::collection::vec(1usize..300, 0..3))
            .prop_map(|(input, hidden)| NetworkSpec::Mlp { input, hidden }),
        (1usize..50, 1usize..30).prop_map(|(d, k)| NetworkSpec::Nodes {
            nodes: vec![
                NodeDecl::Input { name: "x".into(), dim: d },
                NodeDecl::Param { name: "W".into(), dims: vec![k, d] },
                NodeDecl::Param { name: "b".into(), dims: vec![k] },
                NodeDecl::Affine { name: "a".into(), x: "x".into(), w: "W".into(), b: "b".into() },
                NodeDecl::Sigmoid { name: "s".into(), x: "a".into() },
                NodeDecl::Concat { name: "c".into(), xs: vec!["s".into(), "a".into()] },
            ],
            output: "c".into(),
        }),
    ]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, Just(0.0), Just(1e-4), Just(0.1 + 0.2)]
}

fn graph() -> impl Strategy<Value = GraphSpec> {
    let structure = prop_oneof![
        (1usize..=2).prop_map(|order| Structure::Chain { order }),
        prop::collection::vec((0usize..6, 0usize..6, 0usize..3), 1..5).prop_map(|v| Structure::Pairs(
            v.into_iter().map(|(a, b, class)| PairDecl { a, b, class }).collect()
        )),
    ];
    let pairwise = prop_oneof![
        Just(PairwiseKind::Linear),
        (1usize..64).prop_map(|hidden| PairwiseKind::MlpTable { hidden })
    ];
    (1usize..10, 1usize..30, structure, finite(), finite(), pairwise).prop_map(|(variables, cardinality, structure, u, p, pairwise)| {
        GraphSpec {
            variables,
            cardinality,
            structure,
            counting: CountingNumbers { unary: u, pairwise: p },
            pairwise,
        }
    })
}

fn train() -> impl Strategy<Value = TrainConfig> {
    (
        (finite(), finite(), finite(), 0usize..500, 0usize..10_000, 0usize..50, finite()),
        (
            prop::sample::select(TrainStrategy::ALL.to_vec()),
            prop::bool::ANY,
            finite(),
            any::<u64>(),
            0usize..10_000,
            finite(),
            0usize..1000,
            0usize..50,
        ),
    )
        .prop_map(|((eps, step, mom, batch, iters, sweeps, decay), (strategy, dl, loss, seed, pre, pstep, val, ev))| TrainConfig {
            epsilon: eps,
            step_size: step,
            momentum: mom,
            batch_size: batch,
            max_iterations: iters,
            message_sweeps_per_update: sweeps,
            step_decay: decay,
            strategy,
            algorithm: if dl { Algorithm::DoubleLoop } else { Algorithm::Blended },
            loss_augment_weight: loss,
            seed,
            pretrain_iterations: pre,
            pretrained_step_size: pstep,
            validate_every: val,
            eval_sweeps: ev,
        })
}

fn data() -> impl Strategy<Value = DataSection> {
    (
        prop::option::of("[a-z0-9_/.]{1,12}"),
        prop::collection::vec("[a-z]{4}", 1..6),
        (0usize..2000, 0usize..500, 0usize..500),
        (finite(), finite(), finite(), finite(), finite()),
        prop::bool::ANY,
        any::<u64>(),
    )
        .prop_map(|(path, vocabulary, (train, validation, test), (r, s0, s1, t, n), blank, seed)| DataSection {
            path,
            spec: DatasetSpec {
                vocabulary,
                train,
                validation,
                test,
                rotation: r,
                scale_min: s0,
                scale_max: s1,
                translation: t,
                noise: n,
                background: if blank { Background::Blank } else { Background::Textured },
                seed,
            },
        })
}

fn doc() -> impl Strategy<Value = ModelSpecDoc> {
    (network(), graph(), train(), data()).prop_map(|(network, graph, train, data)| ModelSpecDoc {
        network,
        graph,
        train,
        data,
        spans: Default::default(),
    })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(d in doc()) {
        let text = d.serialize();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(back.serialize(), text);
        prop_assert_eq!(back.structure_hash(), d.structure_hash());
    }

    #[test]
    fn garbage_lines_report_their_line(pre in 0usize..5, junk in "[a-z]{1,8}") {
        let mut text = String::from("[graph]\nvariables = 5\ncardinality = 26\n");
        for _ in 0..pre {
            text.push_str("# filler\n");
        }
        text.push_str(&junk);
        text.push('\n');
        match parse(&text) {
            Err(Error::Config(e)) => prop_assert_eq!(e.line, 4 + pre),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

#[test]
fn annotated_example_config_instantiates() {
    let text = include_str!("../../../docs/example.ini");
    let inst = parse(text).unwrap().instantiate().unwrap();
    assert_eq!(inst.graph.space().num_variables(), 5);
    assert_eq!(inst.model.pairwise().len(), 1);
}
