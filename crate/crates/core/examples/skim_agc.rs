// SPDX-License-Identifier: Apache-2.0

//! Generates nine partitions of synthetic events and skims them with each
//! strategy: at least one lepton and four jets above 20, soft objects dropped.

use minituple::skim::{agc_rules, generate_inputs, run_skim, SkimConfig, Strategy, AGC_PARTITIONS};
use minituple::WriterOptions;

fn main() -> minituple::Result<()> {
    let dir = tempfile::tempdir()?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let inputs = generate_inputs(dir.path(), &AGC_PARTITIONS, 4, 20_000, 7, &WriterOptions::default())?;
    println!("{} input files, {threads} threads", inputs.len());

    for strategy in [Strategy::Parallel, Strategy::SeparateMerge, Strategy::Imt] {
        let config = SkimConfig {
            inputs: inputs.clone(),
            rules: agc_rules(),
            threads,
            writer: WriterOptions::default(),
            output_dir: dir.path().join(format!("{strategy:?}").to_lowercase()),
            strategy,
            keep_intermediate: false,
        };
        let report = run_skim(&config)?;
        let (entries_in, entries_out): (u64, u64) =
            report.partitions.iter().fold((0, 0), |(i, o), p| (i + p.entries_in, o + p.entries_out));
        println!(
            "{:<14} kept {entries_out}/{entries_in}  skim {:.2} s  merge {:.2} s  peak {:.1} MB  output {:.1} MB",
            serde_json::to_string(&strategy).unwrap_or_default().trim_matches('"'),
            report.skim_seconds,
            report.merge_seconds,
            report.peak_storage_bytes as f64 / 1e6,
            report.output_bytes as f64 / 1e6,
        );
    }
    Ok(())
}
