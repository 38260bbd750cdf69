//! Writing trajectories to SROM files with metadata sidecars and streaming
//! a basis back from disk without loading the snapshot matrix.
//!
//!     cargo run --release --example snapshot_file_io

use streaming_opinf::io::{FileSource, Metadata, SromReader, SromWriter, TrajectoryFiles};
use streaming_opinf::models::{kse_initial_condition, kse_model, simulate_kse};
use streaming_opinf::opinf::{no_progress, stream_basis, SvdMethod};
use streaming_opinf::snapshots::SnapshotSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("srom-file-io-example");
    std::fs::create_dir_all(&dir)?;
    let (n, length) = (64, 22.0);
    let model = kse_model(n, length, 1.0)?;

    let mut files = Vec::new();
    for (j, a) in [0.3, 0.8].into_iter().enumerate() {
        let traj = simulate_kse(
            &model,
            &kse_initial_condition(n, length, a, 0.5),
            0.01,
            50.0,
            10,
        )?;
        let path = dir.join(format!("traj_{j:02}.srom"));
        let mut w = SromWriter::create(&path, n)?;
        for col in traj.states.column_iter() {
            w.push(col.as_slice())?;
        }
        let cols = w.finish()?;
        let mut meta = Metadata::default();
        meta.set("kind", "kse").set("ic_a", a).set("dt", 0.1);
        meta.write_for(&path)?;
        let r = SromReader::open(&path)?;
        assert_eq!(r.cols() as u64, cols);
        println!(
            "{}: {} x {}, {} bytes",
            path.display(),
            r.rows(),
            r.cols(),
            std::fs::metadata(&path)?.len()
        );
        files.push(TrajectoryFiles {
            states: path,
            inputs: None,
            derivatives: None,
            skip: 0,
        });
    }

    let mut src = FileSource::new(files)?;
    println!(
        "stream: {} snapshots in {} segments",
        src.len(),
        src.segments().len()
    );
    let pass = stream_basis(
        &mut src,
        SvdMethod::Baker,
        8,
        0,
        false,
        &[],
        &mut no_progress,
    )?;
    let s: Vec<String> = pass.svd.s.iter().map(|x| format!("{x:.3e}")).collect();
    println!("leading singular values: {}", s.join(" "));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
