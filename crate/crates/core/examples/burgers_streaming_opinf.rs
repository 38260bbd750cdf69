//! Parametric Burgers pipeline at reduced size: one pooled streaming basis,
//! per-viscosity operators from streaming and batch solves, interpolation
//! to held-out viscosities, Final RSE per method.
//!
//!     cargo run --release --example burgers_streaming_opinf [-- --full]
//!
//! `--full` runs the default configuration (100,010 snapshots, several
//! minutes).

use streaming_opinf::experiment::{run_burgers, ExperimentConfig, Reporter};

const SMALL: &str = "experiment = burgers
n = 64
mu = 0.1,0.4,0.7,1.0
trajectories = 3
t_final = 0.5
r = 2,4,6,8
test_count = 3
trace = false
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = std::env::args().any(|a| a == "--full");
    let cfg = if full {
        ExperimentConfig::burgers()
    } else {
        ExperimentConfig::parse(SMALL)?
    };
    let report = run_burgers(&cfg, None, &Reporter::new(!full))?;
    println!(
        "{} pooled snapshots; held-out mu = {:?}",
        report.snapshots, report.test_mu
    );

    let methods = [
        "intrusive",
        "batch-opinf",
        "isvd-ls",
        "isvd-rls-standard",
        "isvd-rls-iqr",
    ];
    for dataset in ["train", "test"] {
        println!("\nFinal RSE ({dataset})");
        print!("{:>3}", "r");
        for m in methods {
            print!(" {m:>18}");
        }
        println!();
        for &r in &cfg.r {
            print!("{r:>3}");
            for m in methods {
                match report.final_rse(dataset, m, r) {
                    Some(e) => print!(" {e:>18.4e}"),
                    None => print!(" {:>18}", "-"),
                }
            }
            println!();
        }
    }
    Ok(())
}
