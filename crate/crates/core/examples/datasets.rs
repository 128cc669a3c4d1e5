//! Generate each synthetic task, write it as CSV, read it back, and do the
//! same for a parameter checkpoint.
//!
//! $ cargo run --example datasets

use std::f64::consts::FRAC_PI_4;

use brnn::checkpoint;
use brnn::model::{Dims, Nonlinearity};
use brnn::tasks::{gen_task, read_csv_from, write_csv_to, TaskKind, TaskSpec};
use brnn::trainer::init_params;

fn main() -> brnn::Result<()> {
    let tasks = [
        TaskSpec::sine(12, 0.2),
        TaskSpec {
            kind: TaskKind::resonator(0.9, FRAC_PI_4),
            horizon: 12,
            m: 1,
            r: 1,
            noise: 3f64.sqrt(),
            seed: 7,
        },
        TaskSpec {
            kind: TaskKind::LagCopy { lag: 3 },
            horizon: 12,
            m: 2,
            r: 2,
            noise: 1.0,
            seed: 7,
        },
    ];
    for spec in &tasks {
        let seq = gen_task(spec)?;
        let mut csv = Vec::new();
        write_csv_to(&seq, &mut csv)?;
        let back = read_csv_from(csv.as_slice())?;
        println!("{} (round trip exact: {})", spec.kind.name(), back == seq);
        for line in String::from_utf8_lossy(&csv).lines().take(5) {
            println!("  {line}");
        }
    }

    let p = init_params(&Dims::new(2, 1, 1, 12)?, Nonlinearity::Tanh, 0.1, 0.5, 1);
    let text = checkpoint::to_string(&p);
    println!(
        "\ncheckpoint (round trip exact: {})",
        checkpoint::from_str(&text)? == p
    );
    print!("{text}");
    Ok(())
}
