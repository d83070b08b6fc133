//! Generates a corpus in memory, runs the pipeline and prints the method
//! comparison.
//!
//! ```text
//! cargo run --release --example corpus_run -- [households] [seed]
//! ```

use hvac_disagg::config::PipelineConfig;
use hvac_disagg::pipeline::{corpus_inputs, evaluate_results, run_households};
use hvac_disagg::synth::{daily_energy, generate_corpus, intended_label, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let households = args.get(1).map_or(Ok(20), |s| s.parse())?;
    let seed = args.get(2).map_or(Ok(42), |s| s.parse())?;
    let mut cfg = PipelineConfig {
        seed,
        ..Default::default()
    };
    cfg.synth.households = households;
    let spec = CorpusSpec { seed, ..cfg.synth.clone() };
    let start = std::time::Instant::now();
    let corpus = generate_corpus(&spec)?;
    let (inputs, truth) = corpus_inputs(&corpus);
    let runs = run_households(&inputs, &cfg, 1)?;
    let results: Vec<_> = runs.iter().map(|r| r.estimates()).collect();
    let ev = evaluate_results(&results, &truth, &cfg)?;
    for r in &ev.reports {
        println!(
            "{:<11} nMAE {:7.2} ± {:6.2}   nEE {:6.2}",
            r.method, r.nmae_mean, r.nmae_std, r.nee_mean
        );
    }
    let (ica, ft) = (&ev.reports[1], &ev.reports[2]);
    let (mut better, mut total) = (0, 0);
    for (a, b) in ica.customers.iter().zip(&ft.customers) {
        for (x, y) in a.daily_nmae.iter().zip(&b.daily_nmae) {
            total += 1;
            if y < x {
                better += 1;
            }
        }
    }
    let feasible: usize = runs.iter().map(|r| r.completed().filter(|(_, d)| d.feasible).count()).sum();
    println!("improved days {better}/{total}, feasible {feasible}, {:.1?}", start.elapsed());
    let (mut agree, mut days) = (0, 0);
    for (run, h) in runs.iter().zip(&corpus.households) {
        let energy = daily_energy(h.loads.hvac.samples());
        for l in &run.analysis.labels {
            let j = h.loads.hvac.position(l.date).expect("generated date");
            days += 1;
            if intended_label(energy[j]) == l.label {
                agree += 1;
            }
        }
    }
    println!("labels consistent {agree}/{days}");
    for row in &ev.table2 {
        println!("{:<9} mu {:?}", row.source, row.stats.mu().as_slice());
    }
    Ok(())
}
