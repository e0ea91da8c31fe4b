//! Runs the full method × classifier grid on synthetic 32×32 face-like data.
//!
//! ```text
//! cargo run --release --example synthetic_grid
//! ```

use std::time::Instant;

use tensor_spca::dataset::SynthSpec;
use tensor_spca::experiment::{run_experiment, table_grid, DataSource};

fn main() -> tensor_spca::Result<()> {
    env_logger::init();
    let spec = SynthSpec::default();
    let cfg = table_grid(DataSource::Synth(spec), &[200, 300, 400, 500, 600]);
    let start = Instant::now();
    let results = run_experiment(&cfg)?;
    print!("{}", results.to_tsv());
    eprintln!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
