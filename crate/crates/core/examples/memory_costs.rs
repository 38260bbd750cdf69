//! Float-count model for batch versus streaming storage at the sizes of
//! three reference problems.
//!
//!     cargo run --release --example memory_costs

use streaming_opinf::metrics::{memory_cost, MemoryBudget, SketchAccounting};
use streaming_opinf::opinf::{Paradigm, Quadratic, SvdMethod};
use streaming_opinf::stream_svd::sketch_sizes;

fn budget(
    paradigm: Paradigm,
    svd: SvdMethod,
    n: usize,
    k: usize,
    k_ls: usize,
    r: usize,
    m: usize,
) -> MemoryBudget {
    let (q, s, _) = sketch_sizes(r);
    MemoryBudget {
        paradigm,
        svd_method: svd,
        n,
        k_svd: k,
        k_ls,
        r,
        m,
        quadratic: Quadratic::Unique,
        constant: false,
        q,
        s,
        accounting: SketchAccounting::Leading,
    }
}

fn report(name: &str, b: &MemoryBudget) -> Result<(), Box<dyn std::error::Error>> {
    for acc in [SketchAccounting::Leading, SketchAccounting::Full] {
        let rep = memory_cost(&MemoryBudget {
            accounting: acc,
            ..b.clone()
        })?;
        println!(
            "{name:<22} {:<8} batch svd {:.3e}  ls {:.3e} | stream svd {:.3e}  ls {:.3e} | saved svd {:6.2}%  ls {:6.2}%  total {:6.2}%",
            format!("{acc:?}"),
            rep.batch.svd_floats,
            rep.batch.ls_floats,
            rep.streaming.svd_floats,
            rep.streaming.ls_floats,
            rep.svd_reduction_pct(),
            rep.ls_reduction_pct(),
            rep.total_reduction_pct(),
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    report(
        "burgers r=14",
        &budget(
            Paradigm::IsvdRls,
            SvdMethod::Sketchy,
            128,
            100_010,
            10_001,
            14,
            1,
        ),
    )?;
    report(
        "kse r=24",
        &budget(
            Paradigm::IsvdProjectRls,
            SvdMethod::Baker,
            512,
            27_000,
            3000,
            24,
            0,
        ),
    )?;

    // One of four velocity/pressure fields on a 2.36M-cell grid, 8000
    // snapshots, 300 operators with a constant term, solved once. The sketch
    // is sized explicitly rather than from the default rule.
    let channel = |svd_rank: usize, q: usize| MemoryBudget {
        constant: true,
        q,
        s: 2 * q + 1,
        ..budget(
            Paradigm::IsvdProjectLs,
            SvdMethod::Sketchy,
            2_359_296,
            8000,
            8000,
            svd_rank,
            0,
        )
    };
    report("channel q=1601", &channel(300, 1601))?;

    // A 500-mode sketch truncated to 300 operators: SVD terms from the
    // first budget, LS terms from the second.
    let svd = memory_cost(&channel(500, 2001))?;
    let ls = memory_cost(&channel(300, 2001))?;
    let batch = svd.batch.svd_floats + ls.batch.ls_floats;
    let stream = svd.streaming.svd_floats + ls.streaming.ls_floats;
    println!(
        "{:<22} {:<8} batch svd {:.3e}  ls {:.3e} | stream svd {:.3e}  ls {:.3e} | saved svd {:6.2}%  total {:6.2}%",
        "channel q=2001 (500)",
        "Leading",
        svd.batch.svd_floats,
        ls.batch.ls_floats,
        svd.streaming.svd_floats,
        ls.streaming.ls_floats,
        svd.svd_reduction_pct(),
        100.0 * (1.0 - stream / batch),
    );
    Ok(())
}
