use srrw::graph::generators;
use srrw::{Error, Graph};

const TRIANGLE_TAIL: &str = "# nodes: 5\n0 1\n1 2\n0 2\n2 3\n3 4\n";
const WEIGHTED: &str = "# nodes: 3\n0 1 2.5\n1 2 1\n";

#[test]
fn edge_list_is_byte_stable() {
    let g = Graph::from_edge_list(TRIANGLE_TAIL).unwrap();
    assert_eq!(g.to_edge_list(), TRIANGLE_TAIL);
    assert_eq!(g.to_json(), r#"{"nodes":5,"edges":[[0,1],[1,2],[0,2],[2,3],[3,4]]}"#);
    let w = Graph::from_edge_list(WEIGHTED).unwrap();
    assert_eq!(w.to_edge_list(), WEIGHTED);
    assert_eq!(w.to_json(), r#"{"nodes":3,"edges":[[0,1,2.5],[1,2,1.0]]}"#);
    assert_eq!(Graph::from_json(&w.to_json()).unwrap().to_edge_list(), WEIGHTED);
}

#[test]
fn comments_blank_lines_and_inferred_size() {
    let g = Graph::from_edge_list("# a path\n\n0 1\n  1 2  \n# trailing\n").unwrap();
    assert_eq!(g.node_count(), 3);
    assert_eq!(g.edge_count(), 2);
    assert_eq!(g.leaves(), vec![0, 2]);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let line = |text: &str| match Graph::from_edge_list(text) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    };
    assert_eq!(line("0 1\n1 x\n"), 2);
    assert_eq!(line("0 1\n1 2 3 4\n"), 2);
    assert_eq!(line("0 1 1.0\n1 2\n"), 2);
    assert_eq!(line("# nodes: many\n0 1\n"), 1);
    assert_eq!(line("# only a comment\n"), 0);
}

#[test]
fn structural_errors() {
    assert!(matches!(Graph::from_edge_list("0 0\n0 1\n"), Err(Error::Structure(_))));
    assert!(matches!(Graph::from_edge_list("0 1\n1 0\n"), Err(Error::Structure(_))));
    assert!(matches!(Graph::from_edge_list("0 1 -1\n"), Err(Error::InvalidWeights(_))));
    assert!(matches!(Graph::from_edge_list("0 1 0\n"), Err(Error::InvalidWeights(_))));
    match Graph::from_edge_list("# nodes: 4\n0 1\n") {
        Err(Error::Disconnected { components }) => assert_eq!(components, vec![vec![0, 1], vec![2], vec![3]]),
        other => panic!("{other:?}"),
    }
    assert!(Graph::from_json(r#"{"nodes":3,"edges":[[0,1],[1,2,1.0]]}"#).is_err());
}

#[test]
fn generators_are_reproducible() {
    let a = generators::erdos_renyi(30, 0.2, 7).unwrap().to_edge_list();
    let b = generators::erdos_renyi(30, 0.2, 7).unwrap().to_edge_list();
    assert_eq!(a, b);
    assert_ne!(a, generators::erdos_renyi(30, 0.3, 7).unwrap().to_edge_list());
    assert_eq!(generators::complete(5).unwrap().edge_count(), 10);
    assert_eq!(generators::star(6).unwrap().leaves().len(), 5);
    assert_eq!(generators::cycle(6).unwrap().edge_count(), 6);
}
