//! Dataset files, training logs and model files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::graph::NodeId;

use super::{DType, EngineError, GcnModel, LayerWeights, Matrix, Scalar};

pub const MATRIX_MAGIC: &[u8; 4] = b"GCNX";
const MODEL_MAGIC: &[u8; 4] = b"GCNW";
const MODEL_VERSION: u32 = 1;

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl Split {
    pub fn validate(&self, num_nodes: usize) -> Result<(), EngineError> {
        let mut seen = vec![false; num_nodes];
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &id in ids {
                let slot = seen.get_mut(id as usize).ok_or_else(|| {
                    EngineError::Data(format!("{name} id {id} outside graph of {num_nodes} nodes"))
                })?;
                if *slot {
                    return Err(EngineError::Data(format!("node {id} appears twice in the split")));
                }
                *slot = true;
            }
        }
        if self.train.is_empty() {
            return Err(EngineError::Data("training set is empty".into()));
        }
        Ok(())
    }
}

fn data_err(path: &Path, msg: impl std::fmt::Display) -> EngineError {
    EngineError::Data(format!("{}: {msg}", path.display()))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), EngineError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EngineError::Data(format!("truncated {what}")),
        _ => EngineError::Io(e),
    })
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, EngineError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Packed binary: magic, rows u64, cols u64, dtype u8, row-major payload.
pub fn write_matrix<T: Scalar, W: Write>(m: &Matrix<T>, out: &mut W) -> std::io::Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    out.write_all(&[T::DTYPE as u8])?;
    for &v in m.as_slice() {
        match T::DTYPE {
            DType::F32 => out.write_all(&(v.to_f64() as f32).to_le_bytes())?,
            _ => out.write_all(&v.to_f64().to_le_bytes())?,
        }
    }
    Ok(())
}

fn read_matrix_binary<T: Scalar>(mut r: impl Read) -> Result<Matrix<T>, EngineError> {
    let rows = read_u64(&mut r, "matrix header")? as usize;
    let cols = read_u64(&mut r, "matrix header")? as usize;
    let mut tag = [0u8; 1];
    read_exact(&mut r, &mut tag, "matrix header")?;
    let width = match tag[0] {
        1 | 3 => 4,
        2 => 8,
        t => return Err(EngineError::Data(format!("unknown dtype tag {t}"))),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| EngineError::Data("matrix size overflows".into()))?;
    let mut bytes = Vec::new();
    r.take((count * width) as u64).read_to_end(&mut bytes)?;
    if bytes.len() != count * width {
        return Err(EngineError::Data("truncated matrix payload".into()));
    }
    let data = bytes
        .chunks_exact(width)
        .map(|c| {
            T::from_f64(match tag[0] {
                1 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
                2 => f64::from_le_bytes(c.try_into().unwrap()),
                _ => u32::from_le_bytes(c.try_into().unwrap()) as f64,
            })
        })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn read_matrix_text<T: Scalar>(r: impl BufRead) -> Result<Matrix<T>, EngineError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if rows == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            // header row
            continue;
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(EngineError::Data(format!(
                    "line {}: {} fields, expected {c}",
                    i + 1,
                    fields.len()
                )))
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| EngineError::Data(format!("line {}: bad number {f:?}", i + 1)))?;
            data.push(T::from_f64(v));
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

/// Reads a packed-binary matrix, or CSV/whitespace text when the magic is absent.
pub fn read_matrix<T: Scalar>(path: &Path) -> Result<Matrix<T>, EngineError> {
    let mut f = BufReader::new(File::open(path).map_err(|e| data_err(path, e))?);
    let head = f.fill_buf()?;
    if head.starts_with(MATRIX_MAGIC) {
        f.consume(MATRIX_MAGIC.len());
        read_matrix_binary(f).map_err(|e| data_err(path, e))
    } else {
        read_matrix_text(f).map_err(|e| data_err(path, e))
    }
}

pub fn read_features<T: Scalar>(path: &Path, num_nodes: usize) -> Result<Matrix<T>, EngineError> {
    let x: Matrix<T> = read_matrix(path)?;
    if x.rows() != num_nodes {
        return Err(data_err(path, format!("{} feature rows for {num_nodes} nodes", x.rows())));
    }
    if !x.all_finite() {
        return Err(data_err(path, "non-finite feature values"));
    }
    Ok(x)
}

/// Class ids: a single column of integers, or a one-hot matrix.
pub fn read_labels(path: &Path, num_nodes: usize) -> Result<Vec<u32>, EngineError> {
    let m: Matrix<f64> = read_matrix(path)?;
    if m.rows() != num_nodes {
        return Err(data_err(path, format!("{} label rows for {num_nodes} nodes", m.rows())));
    }
    if m.cols() == 1 {
        m.as_slice()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as u32)
                } else {
                    Err(data_err(path, format!("label {v} is not a class id")))
                }
            })
            .collect()
    } else {
        Ok(m.argmax_rows().into_iter().map(|c| c as u32).collect())
    }
}

/// Three lines of whitespace-separated ids: train, val, test.
pub fn read_split(path: &Path) -> Result<Split, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with('#')).collect();
    if lines.len() < 3 {
        return Err(data_err(path, "expected three lines (train, val, test)"));
    }
    let parse = |l: &str| -> Result<Vec<NodeId>, EngineError> {
        l.split_whitespace()
            .map(|t| t.parse().map_err(|_| data_err(path, format!("bad id {t:?}"))))
            .collect()
    };
    Ok(Split {
        train: parse(lines[0])?,
        val: parse(lines[1])?,
        test: parse(lines[2])?,
    })
}

pub fn write_split<W: Write>(s: &Split, out: &mut W) -> std::io::Result<()> {
    for ids in [&s.train, &s.val, &s.test] {
        let line: Vec<String> = ids.iter().map(u32::to_string).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// One training-log line per minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub minibatch: usize,
    pub loss: f64,
    pub gamma_add: f64,
    pub gamma_read: f64,
    pub ms_sample: f64,
    pub ms_reduce: f64,
    pub ms_train: f64,
    /// Set on the last minibatch of an evaluated epoch.
    pub val_metric: Option<f64>,
}

/// Writes the log as CSV. Without `timings` the millisecond columns are
/// written as 0 so that identical runs produce identical files.
pub fn write_log<W: Write>(rows: &[LogRow], out: &mut W, timings: bool) -> std::io::Result<()> {
    writeln!(out, "epoch,minibatch,loss,gamma_add,gamma_read,ms_sample,ms_reduce,ms_train,val_metric")?;
    for r in rows {
        let t = |v: f64| if timings { format!("{v:.3}") } else { "0".into() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.minibatch,
            r.loss,
            r.gamma_add,
            r.gamma_read,
            t(r.ms_sample),
            t(r.ms_reduce),
            t(r.ms_train),
            r.val_metric.map_or(String::new(), |v| v.to_string())
        )?;
    }
    Ok(())
}

/// Per-minibatch workload statistics, consumed by the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub epoch: usize,
    pub minibatch: usize,
    pub nodes: usize,
    pub edge_endpoints: usize,
    pub d_bar: f64,
    pub gamma_add: f64,
    pub gamma_read: f64,
    pub matching_total: usize,
    pub ms_sample: f64,
    pub ms_reduce: f64,
}

const STATS_HEADER: &str =
    "epoch,minibatch,nodes,edge_endpoints,d_bar,gamma_add,gamma_read,matching_total,ms_sample,ms_reduce";

pub fn write_batch_stats<W: Write>(rows: &[BatchStats], out: &mut W, timings: bool) -> std::io::Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    for r in rows {
        let t = |v: f64| if timings { format!("{v:.3}") } else { "0".into() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.minibatch,
            r.nodes,
            r.edge_endpoints,
            r.d_bar,
            r.gamma_add,
            r.gamma_read,
            r.matching_total,
            t(r.ms_sample),
            t(r.ms_reduce)
        )?;
    }
    Ok(())
}

pub fn read_batch_stats<R: BufRead>(r: R) -> Result<Vec<BatchStats>, EngineError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != STATS_HEADER {
                return Err(EngineError::Data(format!("unexpected stats header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(EngineError::Data(format!("line {}: expected 10 fields", i + 1)));
        }
        let bad = |k: usize| EngineError::Data(format!("line {}: bad value {:?}", i + 1, f[k]));
        let u = |k: usize| f[k].trim().parse::<usize>().map_err(|_| bad(k));
        let x = |k: usize| f[k].trim().parse::<f64>().map_err(|_| bad(k));
        out.push(BatchStats {
            epoch: u(0)?,
            minibatch: u(1)?,
            nodes: u(2)?,
            edge_endpoints: u(3)?,
            d_bar: x(4)?,
            gamma_add: x(5)?,
            gamma_read: x(6)?,
            matching_total: u(7)?,
            ms_sample: x(8)?,
            ms_reduce: x(9)?,
        });
    }
    Ok(out)
}

/// Model file: magic, version, layer count, then each weight matrix as
/// `rows u64, cols u64, f64 payload` in parameter order.
pub fn write_model<T: Scalar, W: Write>(m: &GcnModel<T>, out: &mut W) -> std::io::Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(m.num_layers() as u64).to_le_bytes())?;
    for p in m.params() {
        out.write_all(&(p.rows() as u64).to_le_bytes())?;
        out.write_all(&(p.cols() as u64).to_le_bytes())?;
        for &v in p.as_slice() {
            out.write_all(&v.to_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model<T: Scalar, R: Read>(mut r: R) -> Result<GcnModel<T>, EngineError> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "model magic")?;
    if &magic != MODEL_MAGIC {
        return Err(EngineError::Data("not a model file".into()));
    }
    let mut ver = [0u8; 4];
    read_exact(&mut r, &mut ver, "model version")?;
    if u32::from_le_bytes(ver) != MODEL_VERSION {
        return Err(EngineError::Data("unsupported model version".into()));
    }
    let layers = read_u64(&mut r, "layer count")? as usize;
    let mut mats = Vec::with_capacity(2 * layers + 1);
    for _ in 0..2 * layers + 1 {
        let rows = read_u64(&mut r, "weight shape")? as usize;
        let cols = read_u64(&mut r, "weight shape")? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut b = [0u8; 8];
            read_exact(&mut r, &mut b, "weights")?;
            data.push(T::from_f64(f64::from_le_bytes(b)));
        }
        mats.push(Matrix::from_vec(rows, cols, data)?);
    }
    let mlp = mats.pop().unwrap();
    let mut it = mats.into_iter();
    let mut ls = Vec::with_capacity(layers);
    while let (Some(w_self), Some(w_neigh)) = (it.next(), it.next()) {
        ls.push(LayerWeights { w_self, w_neigh });
    }
    GcnModel::from_parts(ls, mlp)
}

pub fn save_model<T: Scalar>(m: &GcnModel<T>, path: &Path) -> Result<(), EngineError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(m, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<GcnModel<T>, EngineError> {
    read_model(BufReader::new(File::open(path).map_err(|e| data_err(path, e))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_binary_round_trip_both_precisions() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(3, 2, |r, c| r as f64 * 0.5 - c as f64);
        let p = dir.path().join("x.bin");
        write_matrix(&m, &mut File::create(&p).unwrap()).unwrap();
        assert_eq!(read_matrix::<f64>(&p).unwrap(), m);
        let m32: Matrix<f32> = m.cast();
        write_matrix(&m32, &mut File::create(&p).unwrap()).unwrap();
        assert_eq!(read_matrix::<f32>(&p).unwrap(), m32);
        assert_eq!(read_matrix::<f64>(&p).unwrap(), m);
    }

    #[test]
    fn csv_fallback_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n3.5,-4\n").unwrap();
        let m: Matrix<f64> = read_matrix(&p).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.5, -4.0]);
        std::fs::write(&p, "2\n0\n1\n").unwrap();
        assert_eq!(read_labels(&p, 3).unwrap(), vec![2, 0, 1]);
        assert!(read_labels(&p, 4).is_err());
        std::fs::write(&p, "0 1 0\n1 0 0\n").unwrap();
        assert_eq!(read_labels(&p, 2).unwrap(), vec![1, 0]);
        std::fs::write(&p, "1.5\n").unwrap();
        assert!(read_labels(&p, 1).is_err());
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix::<f64>(&p).is_err());
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let m = Matrix::from_fn(4, 4, |r, c| (r + c) as f64);
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.bin");
        std::fs::write(&p, &buf[..buf.len() - 5]).unwrap();
        assert!(read_matrix::<f64>(&p).is_err());
    }

    #[test]
    fn split_io_and_validation() {
        let s = Split {
            train: vec![0, 3],
            val: vec![1],
            test: vec![2],
        };
        let mut buf = Vec::new();
        write_split(&s, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.txt");
        std::fs::write(&p, &buf).unwrap();
        assert_eq!(read_split(&p).unwrap(), s);
        assert!(s.validate(4).is_ok());
        assert!(s.validate(3).is_err());
        let dup = Split {
            val: vec![0],
            ..s.clone()
        };
        assert!(dup.validate(4).is_err());
    }

    #[test]
    fn model_round_trip() {
        let m: GcnModel<f64> = GcnModel::new(&[5, 8, 4], 3, 1).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model::<f64, _>(buf.as_slice()).unwrap(), m);
        assert!(read_model::<f64, _>(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn stats_round_trip() {
        let s = BatchStats {
            epoch: 1,
            minibatch: 2,
            nodes: 100,
            edge_endpoints: 800,
            d_bar: 8.0,
            gamma_add: 0.5,
            gamma_read: 0.75,
            matching_total: 40,
            ms_sample: 1.25,
            ms_reduce: 2.5,
        };
        let mut buf = Vec::new();
        write_batch_stats(std::slice::from_ref(&s), &mut buf, true).unwrap();
        assert_eq!(read_batch_stats(buf.as_slice()).unwrap(), vec![s]);
        assert!(read_batch_stats("nope\n".as_bytes()).is_err());
    }
}
