//! Edge-list text and packed-binary graph files.
//!
//! Edge lists hold one `u v` pair per line, whitespace separated. Lines
//! starting with `#` are comments, except for two directives written by
//! [`write_edge_list`]: `# nodes: N` declares the node count (so trailing
//! isolated nodes survive a round trip) and `# directed` marks a directed
//! file.
//!
//! The binary layout is little-endian: magic `GCNG`, version `u32`,
//! `num_nodes: u64`, `num_edge_endpoints: u64`, `directed: u8`, then
//! `num_nodes + 1` offsets as `u64` and the neighbor ids as `u32`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BuildStats, Graph, GraphError, NodeId};

pub(crate) const GRAPH_MAGIC: &[u8; 4] = b"GCNG";
pub(crate) const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    Binary,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge-list" | "edgelist" | "txt" => Ok(Self::EdgeList),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(format!("unknown graph format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeListOptions {
    /// Overrides the node count (otherwise `# nodes:` or max id + 1).
    pub num_nodes: Option<usize>,
    /// Treat the file as directed even without a `# directed` directive.
    pub directed: bool,
    /// Map arbitrary ids to dense ids in ascending order of original id.
    pub remap: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub stats: BuildStats,
    /// Original id of each dense node when ids were remapped.
    pub original_ids: Option<Vec<u64>>,
}

pub fn load_graph(path: &Path, format: GraphFormat) -> Result<(Graph, LoadReport), GraphError> {
    let file = BufReader::new(File::open(path)?);
    let (g, report) = match format {
        GraphFormat::EdgeList => read_edge_list(file, EdgeListOptions::default())?,
        GraphFormat::Binary => (read_binary(file)?, LoadReport::default()),
    };
    let s = report.stats;
    if s.self_loops_dropped + s.duplicates_dropped > 0 {
        log::warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            s.self_loops_dropped,
            s.duplicates_dropped
        );
    }
    Ok((g, report))
}

pub fn save_graph(g: &Graph, path: &Path, format: GraphFormat) -> Result<(), GraphError> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        GraphFormat::EdgeList => write_edge_list(g, &mut out)?,
        GraphFormat::Binary => write_binary(g, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn read_edge_list<R: BufRead>(
    reader: R,
    opts: EdgeListOptions,
) -> Result<(Graph, LoadReport), GraphError> {
    let mut declared = None;
    let mut directed = opts.directed;
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(n) = comment.strip_prefix("nodes:") {
                declared = Some(n.trim().parse::<usize>().map_err(|e| GraphError::Parse {
                    line: lineno,
                    msg: format!("bad node count: {e}"),
                })?);
            } else if comment == "directed" {
                directed = true;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let mut next_id = || -> Result<u64, GraphError> {
            let tok = parts.next().ok_or_else(|| GraphError::Parse {
                line: lineno,
                msg: "expected two node ids".into(),
            })?;
            tok.parse::<u64>().map_err(|e| GraphError::Parse {
                line: lineno,
                msg: format!("bad node id `{tok}`: {e}"),
            })
        };
        let u = next_id()?;
        let v = next_id()?;
        if parts.next().is_some() {
            return Err(GraphError::Parse {
                line: lineno,
                msg: "trailing tokens after edge".into(),
            });
        }
        raw.push((u, v));
    }

    let mut report = LoadReport::default();
    let (num_nodes, edges) = if opts.remap {
        let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() > u32::MAX as usize {
            return Err(GraphError::IdOverflow(ids.len() as u64));
        }
        let edges = raw
            .iter()
            .map(|&(u, v)| {
                let m = |x| ids.binary_search(&x).unwrap() as NodeId;
                (m(u), m(v))
            })
            .collect::<Vec<_>>();
        let n = opts.num_nodes.unwrap_or(ids.len()).max(ids.len());
        report.original_ids = Some(ids);
        (n, edges)
    } else {
        let mut max_id = None;
        let mut edges = Vec::with_capacity(raw.len());
        for &(u, v) in &raw {
            for id in [u, v] {
                if id >= u32::MAX as u64 {
                    return Err(GraphError::IdOverflow(id));
                }
                max_id = max_id.max(Some(id));
            }
            edges.push((u as NodeId, v as NodeId));
        }
        let inferred = max_id.map_or(0, |m| m as usize + 1);
        let n = opts.num_nodes.or(declared).unwrap_or(inferred);
        if n < inferred {
            return Err(GraphError::NodeOutOfRange {
                id: inferred as u64 - 1,
                num_nodes: n,
            });
        }
        (n, edges)
    };
    let (g, stats) = Graph::from_edges(num_nodes, &edges, directed)?;
    report.stats = stats;
    Ok((g, report))
}

pub fn write_edge_list<W: Write>(g: &Graph, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "# nodes: {}", g.num_nodes())?;
    if g.is_directed() {
        writeln!(out, "# directed")?;
    }
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(g: &Graph, out: &mut W) -> std::io::Result<()> {
    out.write_all(GRAPH_MAGIC)?;
    out.write_all(&GRAPH_VERSION.to_le_bytes())?;
    out.write_all(&(g.num_nodes() as u64).to_le_bytes())?;
    out.write_all(&(g.num_edge_endpoints() as u64).to_le_bytes())?;
    out.write_all(&[g.is_directed() as u8])?;
    for &o in g.offsets() {
        out.write_all(&(o as u64).to_le_bytes())?;
    }
    for &id in g.neighbor_ids() {
        out.write_all(&id.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), GraphError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => GraphError::Binary(format!("truncated while reading {what}")),
        _ => GraphError::Io(e),
    })
}

pub(crate) fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64, GraphError> {
    let mut b = [0u8; 8];
    read_exact_or(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, GraphError> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Graph, GraphError> {
    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, "magic")?;
    if &magic != GRAPH_MAGIC {
        return Err(GraphError::Binary("bad magic".into()));
    }
    let version = read_u32(&mut r, "version")?;
    if version != GRAPH_VERSION {
        return Err(GraphError::Binary(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut r, "node count")?;
    let m = read_u64(&mut r, "endpoint count")?;
    if n > u32::MAX as u64 {
        return Err(GraphError::IdOverflow(n));
    }
    let mut flag = [0u8; 1];
    read_exact_or(&mut r, &mut flag, "directed flag")?;
    let directed = match flag[0] {
        0 => false,
        1 => true,
        f => return Err(GraphError::Binary(format!("bad directed flag {f}"))),
    };
    let mut offsets = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        offsets.push(read_u64(&mut r, "offsets")? as usize);
    }
    if offsets.last().copied() != Some(m as usize) {
        return Err(GraphError::Binary("last offset disagrees with header".into()));
    }
    let mut neighbors = Vec::with_capacity(m as usize);
    for _ in 0..m {
        neighbors.push(read_u32(&mut r, "neighbor ids")?);
    }
    Graph::from_csr(offsets, neighbors, directed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_graph;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<(Graph, LoadReport), GraphError> {
        read_edge_list(text.as_bytes(), EdgeListOptions::default())
    }

    #[test]
    fn path_edge_list() {
        let (g, _) = parse("0 1\n1 2").unwrap();
        assert_eq!(g.to_adjacency(), vec![vec![1], vec![0, 2], vec![1]]);
        assert!(!g.is_directed());
    }

    #[test]
    fn declared_nodes_with_no_edges() {
        let (g, _) = parse("# nodes: 3\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.degrees(), vec![0, 0, 0]);
        let (g, _) = read_edge_list(
            "".as_bytes(),
            EdgeListOptions {
                num_nodes: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(g.num_nodes(), 3);
    }

    #[test]
    fn comments_self_loops_and_duplicates() {
        let (g, rep) = parse("# a comment\n0 1\n\n1 0\n2 2\n  1\t2  \n").unwrap();
        assert_eq!(g.num_edge_endpoints(), 4);
        assert_eq!(rep.stats.self_loops_dropped, 1);
        assert_eq!(rep.stats.duplicates_dropped, 1);
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(matches!(parse("0 1\n2\n"), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(parse("0 x\n"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(parse("0 1 2\n"), Err(GraphError::Parse { .. })));
        assert!(matches!(parse("0 4294967295\n"), Err(GraphError::IdOverflow(_))));
        assert!(parse("# nodes: 2\n0 5\n").is_err());
    }

    #[test]
    fn remap_sparse_ids() {
        let (g, rep) = read_edge_list(
            "100 7\n7 5000000000\n".as_bytes(),
            EdgeListOptions {
                remap: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(rep.original_ids.unwrap(), vec![7, 100, 5_000_000_000]);
        assert_eq!(g.to_adjacency(), vec![vec![1, 2], vec![0], vec![0]]);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        write_binary(&toy_graph(), &mut buf).unwrap();
        for cut in [0, 3, 10, buf.len() - 1] {
            assert!(matches!(
                read_binary(&buf[..cut]),
                Err(GraphError::Binary(_))
            ));
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_binary(&bad[..]).is_err());
    }

    #[test]
    fn binary_header_layout() {
        let g = toy_graph();
        let mut buf = Vec::new();
        write_binary(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GCNG");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 14);
        assert_eq!(buf[24], 0);
        assert_eq!(buf.len(), 25 + 8 * 6 + 4 * 14);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = toy_graph();
        for (name, fmt) in [("g.txt", GraphFormat::EdgeList), ("g.bin", GraphFormat::Binary)] {
            let p = dir.path().join(name);
            save_graph(&g, &p, fmt).unwrap();
            assert_eq!(load_graph(&p, fmt).unwrap().0, g);
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..40, any::<bool>()).prop_flat_map(|(n, directed)| {
            prop::collection::vec((0..n as u32, 0..n as u32), 0..120)
                .prop_map(move |e| Graph::from_edges(n, &e, directed).unwrap().0)
        })
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(g in arb_graph()) {
            let mut text = Vec::new();
            write_edge_list(&g, &mut text).unwrap();
            let (back, _) = read_edge_list(&text[..], EdgeListOptions::default()).unwrap();
            prop_assert_eq!(&back, &g);

            let mut bin = Vec::new();
            write_binary(&g, &mut bin).unwrap();
            prop_assert_eq!(read_binary(&bin[..]).unwrap(), g);
        }
    }
}
