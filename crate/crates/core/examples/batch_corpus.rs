use verbalarm::lexicon::Lexicon;
use verbalarm::server::run_batch_file;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/corpus.txt").into());
    let report = run_batch_file(&path, &Lexicon::shipped())?;
    print!("{report}");
    if !report.success() {
        std::process::exit(1);
    }
    Ok(())
}
