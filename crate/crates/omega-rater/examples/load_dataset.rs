//! Load a deliberately dirty CSV and show the per-row skip reporting.
//!
//! ```bash
//! cargo run --example load_dataset
//! ```

use std::io::Write;

use omega_rater::ingest::{load_dataset, DatasetSpec, Format};

fn main() {
    let dir = std::env::temp_dir().join("omega-rater-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("dirty_reviews.csv");
    let mut f = std::fs::File::create(&path).expect("create csv");
    write!(
        f,
        "Review,Rating\n\
         Great hotel and friendly staff,5\n\
         ,4\n\
         Rooms were noisy at night,7\n\
         Decent breakfast,not-a-number\n\
         Would not stay again,1\n\
         Average experience,\n"
    )
    .expect("write csv");

    let spec = DatasetSpec {
        path: path.clone(),
        format: Format::Csv,
        text_column: Some("Review".into()),
        rating_column: Some("Rating".into()),
        sentiment_columns: None,
        rating_scale: 5,
    };
    let (records, summary) = load_dataset(&spec).expect("load");

    println!("read {} rows: {} loaded, {} skipped", summary.rows, summary.loaded, summary.skipped_count());
    for skip in &summary.skipped {
        println!("  row {}: {}", skip.row, skip.reason);
    }
    println!();
    for rec in &records {
        println!(
            "id {:>2}  rating {:<4}  {:?}",
            rec.id,
            rec.rating.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
            rec.text.as_deref().unwrap_or("")
        );
    }
}
