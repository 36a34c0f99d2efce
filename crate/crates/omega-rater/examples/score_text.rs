//! Score a few review texts into sentiment triples with a small lexicon.
//!
//! ```bash
//! cargo run --example score_text
//! ```

use omega_rater::sentiment::{score_text, Lexicon};

fn main() {
    let lexicon = Lexicon::from_entries([
        ("great", 3.1),
        ("good", 1.9),
        ("lovely", 2.8),
        ("clean", 1.2),
        ("bad", -2.5),
        ("dirty", -2.1),
        ("awful", -3.0),
        ("broken", -1.8),
    ])
    .expect("valid lexicon");

    let reviews = [
        "Great location, lovely staff, very clean rooms.",
        "The shower was broken and the carpet dirty. Bad experience.",
        "An average stay. Nothing to report.",
        "Good value, but the elevator was awful and the hallway dirty.",
        "",
    ];

    println!("{:<62} {:>7} {:>7} {:>7}", "text", "pos", "neu", "neg");
    for text in reviews {
        let t = score_text(text, &lexicon);
        let shown = if text.is_empty() { "(empty text)" } else { text };
        println!("{:<62} {:>7.4} {:>7.4} {:>7.4}", shown, t.pos(), t.neu(), t.neg());
    }
}
