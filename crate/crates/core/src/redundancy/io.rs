//! Packed-binary form of a reduced subgraph: the rewritten graph in the
//! ordinary graph format, then `original_count: u64`, `rounds: u64`, and for
//! each round `pairs: u64` followed by `(u: u32, v: u32)` per pair.
//!
//! Pair target sets are not stored; they are rebuilt from the graph on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::graph::io::{read_u32, read_u64};
use crate::graph::{read_binary, write_binary, GraphError, NodeId};

use super::{AggEdge, Matching, ReduceError, ReducedSubgraph, RoundMetrics};

pub fn write_reduced<W: Write>(rs: &ReducedSubgraph, out: &mut W) -> std::io::Result<()> {
    write_binary(rs.graph(), out)?;
    out.write_all(&(rs.original_count() as u64).to_le_bytes())?;
    out.write_all(&(rs.rounds().len() as u64).to_le_bytes())?;
    for m in rs.rounds() {
        out.write_all(&(m.len() as u64).to_le_bytes())?;
        for p in &m.pairs {
            out.write_all(&p.u.to_le_bytes())?;
            out.write_all(&p.v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_reduced<R: Read>(mut r: R) -> Result<ReducedSubgraph, ReduceError> {
    let graph = read_binary(&mut r)?;
    let original_count = read_u64(&mut r, "original count")? as usize;
    let num_rounds = read_u64(&mut r, "round count")? as usize;
    let total = graph.num_nodes();
    if original_count > total {
        return Err(GraphError::Binary("original count exceeds node count".into()).into());
    }
    let mut pair_rounds: Vec<Vec<[NodeId; 2]>> = Vec::new();
    let mut merged: Vec<[NodeId; 2]> = Vec::new();
    for _ in 0..num_rounds {
        let len = read_u64(&mut r, "round length")? as usize;
        if merged.len() + len > total - original_count {
            return Err(GraphError::Binary("more pairs than merged nodes".into()).into());
        }
        let mut pairs = Vec::with_capacity(len);
        for _ in 0..len {
            let u = read_u32(&mut r, "pair")?;
            let v = read_u32(&mut r, "pair")?;
            // Constituents must precede the node they form.
            let id = (original_count + merged.len()) as NodeId;
            if u >= v || v >= id {
                return Err(ReduceError::Inconsistent(format!(
                    "pair ({u}, {v}) is not a valid definition of node {id}"
                )));
            }
            pairs.push([u, v]);
            merged.push([u, v]);
        }
        pair_rounds.push(pairs);
    }
    if merged.len() != total - original_count {
        return Err(ReduceError::Inconsistent(format!(
            "{} merged nodes but {} pairs",
            total - original_count,
            merged.len()
        )));
    }

    // A pair's targets are the original nodes whose list reaches it, directly
    // or through a later merge that contains it.
    let mut targets: Vec<Vec<NodeId>> = vec![Vec::new(); merged.len()];
    let mut sizes = vec![1u32; original_count];
    for &[a, b] in &merged {
        sizes.push(sizes[a as usize] + sizes[b as usize]);
    }
    let mut degrees = vec![0u32; original_count];
    let mut stack = Vec::new();
    for w in 0..original_count as NodeId {
        for &x in graph.neighbors(w) {
            degrees[w as usize] += sizes[x as usize];
            stack.push(x);
            while let Some(k) = stack.pop() {
                if (k as usize) < original_count {
                    continue;
                }
                let idx = k as usize - original_count;
                targets[idx].push(w);
                stack.extend(merged[idx]);
            }
        }
    }

    let mut next = 0;
    let rounds = pair_rounds
        .into_iter()
        .map(|pairs| Matching {
            pairs: pairs
                .into_iter()
                .map(|[u, v]| {
                    let mut t = std::mem::take(&mut targets[next]);
                    next += 1;
                    t.sort_unstable();
                    t.dedup();
                    AggEdge { u, v, targets: t }
                })
                .collect(),
        })
        .collect();
    ReducedSubgraph::from_parts(graph, original_count, rounds, degrees)
}

pub fn save_reduced(rs: &ReducedSubgraph, path: &Path) -> Result<(), ReduceError> {
    let mut out = BufWriter::new(File::create(path).map_err(GraphError::Io)?);
    write_reduced(rs, &mut out).map_err(GraphError::Io)?;
    out.flush().map_err(GraphError::Io)?;
    Ok(())
}

pub fn load_reduced(path: &Path) -> Result<ReducedSubgraph, ReduceError> {
    let f = File::open(path).map_err(GraphError::Io)?;
    read_reduced(BufReader::new(f))
}

const ROUND_HEADER: &str = "round,matching_size,matching_total,overhead,gamma_add,gamma_read,num_add,num_read,bound_read,bound_add,saved_read,saved_add";

/// One CSV row per round, round 0 first.
pub fn write_round_metrics<W: Write>(rows: &[RoundMetrics], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{ROUND_HEADER}")?;
    for m in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            m.round,
            m.matching_size,
            m.matching_total,
            m.overhead,
            m.gamma_add,
            m.gamma_read,
            m.num_add,
            m.num_read,
            m.bound_read,
            m.bound_add,
            m.saved_read,
            m.saved_add
        )?;
    }
    Ok(())
}

pub fn read_round_metrics<R: BufRead>(r: R) -> Result<Vec<RoundMetrics>, ReduceError> {
    let bad = |line: usize, what: &str| ReduceError::Inconsistent(format!("round metrics line {line}: {what}"));
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == ROUND_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(GraphError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 12 {
            return Err(bad(i + 2, "expected 12 fields"));
        }
        let u = |k: usize| f[k].parse::<usize>().map_err(|_| bad(i + 2, f[k]));
        let r = |k: usize| f[k].parse::<f64>().map_err(|_| bad(i + 2, f[k]));
        let s = |k: usize| f[k].parse::<i64>().map_err(|_| bad(i + 2, f[k]));
        rows.push(RoundMetrics {
            round: u(0)?,
            matching_size: u(1)?,
            matching_total: u(2)?,
            overhead: r(3)?,
            gamma_add: r(4)?,
            gamma_read: r(5)?,
            num_add: u(6)?,
            num_read: u(7)?,
            bound_read: u(8)?,
            bound_add: u(9)?,
            saved_read: s(10)?,
            saved_add: s(11)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_subgraph;
    use crate::redundancy::{reduce, ReduceConfig};
    use crate::synth;

    fn cfg(theta: usize) -> ReduceConfig {
        ReduceConfig {
            theta,
            max_rounds: 5,
            budget: 2.0,
            degree_cap: None,
            ..Default::default()
        }
    }

    fn round_trip(rs: &ReducedSubgraph) -> ReducedSubgraph {
        let mut buf = Vec::new();
        write_reduced(rs, &mut buf).unwrap();
        read_reduced(buf.as_slice()).unwrap()
    }

    #[test]
    fn toy_round_trip_restores_targets() {
        let (rs, _) = reduce(&toy_subgraph().local, &cfg(1)).unwrap();
        assert_eq!(round_trip(&rs), rs);
    }

    #[test]
    fn multi_round_round_trip() {
        for seed in 0..5 {
            let g = synth::common_neighbor_family(&synth::CommonNeighborParams::default(), seed);
            let (rs, m) = reduce(&g, &cfg(2)).unwrap();
            assert!(m.rounds_run >= 2);
            assert_eq!(round_trip(&rs), rs);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let (rs, _) = reduce(&toy_subgraph().local, &cfg(1)).unwrap();
        let mut buf = Vec::new();
        write_reduced(&rs, &mut buf).unwrap();
        assert!(read_reduced(&buf[..buf.len() - 3]).is_err());
        // Swap the last pair's ids so that u > v.
        let n = buf.len();
        buf[n - 8..].copy_from_slice(&[3, 0, 0, 0, 1, 0, 0, 0]);
        assert!(read_reduced(buf.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.bin");
        let (rs, _) = reduce(&toy_subgraph().local, &cfg(1)).unwrap();
        save_reduced(&rs, &path).unwrap();
        assert_eq!(load_reduced(&path).unwrap(), rs);
    }

    #[test]
    fn round_metrics_round_trip() {
        let g = synth::common_neighbor_family(&synth::CommonNeighborParams::default(), 2);
        let (_, m) = reduce(&g, &cfg(2)).unwrap();
        let mut buf = Vec::new();
        write_round_metrics(&m.per_round, &mut buf).unwrap();
        assert_eq!(read_round_metrics(&buf[..]).unwrap(), m.per_round);
        assert!(read_round_metrics(&b"round\n1"[..]).is_err());
        let mut broken = buf.clone();
        broken.extend_from_slice(b"1,2,x\n");
        assert!(read_round_metrics(&broken[..]).is_err());
    }
}
