//! One module per subcommand. Each writes its primary outputs into the
//! output directory; wall-clock data goes to `metadata.txt` only.

pub mod bench;
pub mod generate;
pub mod model;
pub mod reduce;
pub mod simulate;
pub mod train;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Extra `key = value` lines for `metadata.txt`.
pub type Metadata = Vec<(String, String)>;

pub fn run(
    name: &str,
    cfg: &ExperimentConfig,
    f: fn(&ExperimentConfig, &Path, &mut Metadata) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    std::fs::write(out.join("effective.toml"), cfg.to_toml())?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let t0 = Instant::now();
    let mut meta = Metadata::new();
    let result = f(cfg, &out, &mut meta);
    let mut lines = vec![
        format!("command = {name}"),
        format!("version = {}", env!("CARGO_PKG_VERSION")),
        format!("started_unix = {started}"),
        format!("elapsed_ms = {:.3}", t0.elapsed().as_secs_f64() * 1e3),
        format!("status = {}", if result.is_ok() { "ok" } else { "error" }),
    ];
    lines.extend(meta.into_iter().map(|(k, v)| format!("{k} = {v}")));
    std::fs::write(out.join("metadata.txt"), lines.join("\n") + "\n")?;
    result
}

/// Buffered file creation with the path in the error.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    fill(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
