//! Edge lists and graph JSON, both directions.

use srrw::Graph;

fn main() -> srrw::Result<()> {
    let g = Graph::from_edge_list("# weighted triangle with a tail\n0 1 2.0\n1 2 1.0\n2 0 1.0\n2 3 0.5\n")?;
    print!("{}", g.to_edge_list());
    println!("{}", g.to_json());
    let back = Graph::from_json(&g.to_json())?;
    assert_eq!(back.to_edge_list(), g.to_edge_list());
    match Graph::from_edge_list("0 1\n2 3\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
