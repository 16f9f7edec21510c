//! CSV ingestion.
//!
//! Nodes file: header `id,label,<feature_1>,...,<feature_d>`, one row per
//! node, `label` in {0, 1}, features numeric. Edges file: header `src,dst`
//! with ids from the nodes file. Edges are read as undirected.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, RawGraph};
use crate::error::{Error, Result};

pub fn ingest(nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<Graph> {
    let nodes_file = nodes_file.as_ref();
    let edges_file = edges_file.as_ref();
    let mut raw = read_nodes(nodes_file)?;
    raw.edges = read_edges(edges_file, &raw.node_ids)?;
    raw.preprocess()
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => parse_error(path, line, format!("{other:?}")),
    }
}

fn read_nodes(path: &Path) -> Result<RawGraph> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 || &header[0] != "id" || &header[1] != "label" {
        return Err(parse_error(path, 1, "header must start with `id,label`"));
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();

    let mut raw = RawGraph {
        feature_names,
        ..RawGraph::default()
    };
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty node id"));
        }
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::Validation(format!(
                "{}: line {line}: duplicate node id {id:?}",
                path.display()
            )));
        }
        let label: f64 = record[1]
            .parse()
            .map_err(|_| parse_error(path, line, format!("label {:?} is not a number", &record[1])))?;
        let label = match label {
            0.0 => 0,
            1.0 => 1,
            _ => {
                return Err(Error::Validation(format!(
                    "{}: line {line}: label {} is not binary",
                    path.display(),
                    &record[1]
                )))
            }
        };
        let row =
            record
                .iter()
                .skip(2)
                .map(|field| {
                    field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                        parse_error(path, line, format!("feature value {field:?} is not a finite number"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        raw.node_ids.push(id);
        raw.labels.push(label);
        raw.features.push(row);
    }
    Ok(raw)
}

fn read_edges(path: &Path, node_ids: &[String]) -> Result<Vec<(usize, usize)>> {
    let index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 2 || &header[0] != "src" || &header[1] != "dst" {
        return Err(parse_error(path, 1, "header must be `src,dst`"));
    }
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let lookup = |id: &str| {
            index.get(id).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "{}: line {line}: edge references unknown node id {id:?}",
                    path.display()
                ))
            })
        };
        edges.push((lookup(&record[0])?, lookup(&record[1])?));
    }
    Ok(edges)
}

/// Write `graph` back out in the ingestion format. Ingesting the result
/// reproduces `graph` exactly.
pub fn write_csv(graph: &Graph, nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<()> {
    let nodes_file = nodes_file.as_ref();
    let edges_file = edges_file.as_ref();

    let mut w = csv::Writer::from_path(nodes_file).map_err(|e| csv_error(nodes_file, e))?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(graph.feature_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(nodes_file, e))?;
    for (i, id) in graph.node_ids().iter().enumerate() {
        let mut row = vec![id.clone(), graph.labels()[i].to_string()];
        row.extend(graph.features().row(i).iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(|e| csv_error(nodes_file, e))?;
    }
    w.flush().map_err(|e| Error::io(nodes_file, e))?;

    let mut w = csv::Writer::from_path(edges_file).map_err(|e| csv_error(edges_file, e))?;
    w.write_record(["src", "dst"]).map_err(|e| csv_error(edges_file, e))?;
    for &(u, v) in graph.edges() {
        w.write_record([&graph.node_ids()[u], &graph.node_ids()[v]])
            .map_err(|e| csv_error(edges_file, e))?;
    }
    w.flush().map_err(|e| Error::io(edges_file, e))?;
    Ok(())
}

/// Dense index → external id map, persisted as a JSON sidecar next to
/// training artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdMap {
    pub ids: Vec<String>,
}

impl IdMap {
    pub fn from_graph(graph: &Graph) -> Self {
        Self {
            ids: graph.node_ids().to_vec(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("id map", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn files(nodes: &str, edges: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let n = dir.path().join("nodes.csv");
        let e = dir.path().join("edges.csv");
        File::create(&n).unwrap().write_all(nodes.as_bytes()).unwrap();
        File::create(&e).unwrap().write_all(edges.as_bytes()).unwrap();
        (dir, n, e)
    }

    #[test]
    fn three_node_example() {
        let (_d, n, e) = files(
            "id,label,height\na,0,1.5\nb,1,2.0\nc,0,0.5\n",
            "src,dst\na,b\nb,a\nb,b\n",
        );
        let g = ingest(&n, &e).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.feature_names(), &["height".to_string()]);
        assert_eq!(g.index_of("c"), None);
    }

    #[test]
    fn malformed_row_names_line() {
        let (_d, n, e) = files("id,label,x\na,0,1\nb,1,oops\n", "src,dst\na,b\n");
        match ingest(&n, &e) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let (_d, n, e) = files("id,label,x\na,0,1\nb,1\n", "src,dst\na,b\n");
        assert!(matches!(ingest(&n, &e), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn unknown_edge_id_is_validation_error() {
        let (_d, n, e) = files("id,label,x\na,0,1\nb,1,2\n", "src,dst\na,b\nb,zed\n");
        let err = ingest(&n, &e).unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("zed") && m.contains("line 3")),
            "{err}"
        );
    }

    #[test]
    fn non_binary_label_is_validation_error() {
        let (_d, n, e) = files("id,label,x\na,0,1\nb,2,2\n", "src,dst\na,b\n");
        assert!(matches!(ingest(&n, &e), Err(Error::Validation(_))));
    }

    #[test]
    fn all_isolated_is_empty_graph() {
        let (_d, n, e) = files("id,label,x\na,0,1\nb,1,2\n", "src,dst\na,a\n");
        assert!(matches!(ingest(&n, &e), Err(Error::EmptyGraph)));
    }

    #[test]
    fn missing_file_is_io_error_naming_path() {
        let err = ingest("/definitely/not/here.csv", "/nope.csv").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn id_map_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let map = IdMap {
            ids: vec!["LeBron James".into(), "b".into()],
        };
        let p = dir.path().join("ids.json");
        map.save(&p).unwrap();
        assert_eq!(IdMap::load(&p).unwrap(), map);
    }
}
