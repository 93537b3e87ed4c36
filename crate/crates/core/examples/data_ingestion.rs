//! Load trial-level data with custom column names and inspect the design.
//!
//! ```text
//! cargo run --example data_ingestion
//! ```

use lddmm::data::{read_dataset, ColumnSchema, DesignOverride};

const CSV: &str = "\
participant;session;item;tone;choice;latency
1;1;1;1;1;0.61
1;1;2;2;2;0.74
1;1;3;1;2;0.92
1;1;4;2;2;0.55
1;2;1;2;2;0.48
1;2;2;1;1;0.52
1;2;3;1;1;0.47
1;2;4;2;1;0.83
2;1;1;1;1;0.66
2;1;2;2;1;1.02
2;1;3;2;2;0.71
2;1;4;1;1;0.59
2;2;1;1;1;0.44
2;2;2;2;2;0.51
2;2;3;2;2;0.49
2;2;4;1;1;0.45
";

fn main() -> lddmm::Result<()> {
    let schema = ColumnSchema {
        subject: "participant".into(),
        block: "session".into(),
        trial: "item".into(),
        stimulus: "tone".into(),
        response: "choice".into(),
        rt: "latency".into(),
        delimiter: b';',
    };
    let ds = read_dataset(CSV.as_bytes(), &schema, DesignOverride::default())?;
    println!(
        "{} trials: {} subjects, {} blocks, {} trials per block, {} categories",
        ds.len(),
        ds.n_subjects(),
        ds.n_blocks(),
        ds.n_trials(),
        ds.n_categories()
    );
    for i in 0..ds.n_subjects() {
        for s in 0..ds.n_categories() {
            let idx = ds.trials_of_subject_stimulus(i, s);
            let correct = idx.iter().filter(|&&j| ds.records()[j].response == s).count();
            println!(
                "subject {} tone {}: {} trials, {} correct, fastest rt {:.2} s",
                i + 1,
                s + 1,
                idx.len(),
                correct,
                ds.min_rt(i, s)?
            );
        }
    }

    let broken = CSV.replace("0.92", "-0.92");
    match read_dataset(broken.as_bytes(), &schema, DesignOverride::default()) {
        Ok(_) => println!("unexpectedly accepted a negative response time"),
        Err(e) => println!("rejected malformed input: {e}"),
    }
    Ok(())
}
