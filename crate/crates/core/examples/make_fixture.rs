//! Writes the planted-community fixture (two communities plus a gadget
//! whose 7-node view is disconnected) as CSV files.
//!
//!     cargo run -p graphxain --example make_fixture -- fixtures/planted

use graphxain::graph::write_csv;
use graphxain::synthetic::{disconnecting_gadget, PlantedCommunities};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures/planted".into());
    std::fs::create_dir_all(&dir)?;
    let planted = PlantedCommunities {
        nodes: 60,
        p_intra: 0.2,
        p_inter: 0.02,
        ..Default::default()
    }
    .build()?;
    let gadget = disconnecting_gadget(20, 4, 3, "g")?;
    let graph = planted.disjoint_union(&gadget)?;
    write_csv(&graph, format!("{dir}/nodes.csv"), format!("{dir}/edges.csv"))?;
    println!("{} nodes, {} edges -> {dir}", graph.num_nodes(), graph.num_edges());
    Ok(())
}
