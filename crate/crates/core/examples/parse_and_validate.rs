//! Parses a JSONL corpus (or a built-in broken record) and prints structural violations.
//! Records are validated while parsing, so a malformed one is reported as a parse error.
//!
//! `cargo run --example parse_and_validate -- corpus.jsonl`

use obfugraph::cfg::{parse_record, read_corpus, validate_cfg};

const BROKEN: &str = r#"{"function_id":"demo/demo/f","project":"demo","binary":"demo","opt_level":"O0",
"obfuscation":{"label":"None","obfuscator":"none"},"entry":"A",
"blocks":[{"id":"A","insns":[{"m":"cmp","nops":2},{"m":"je","nops":1}]},{"id":"B","insns":[{"m":"ret","nops":0}]}],
"edges":[["A","B"],["A","C"]]}"#;

fn main() -> obfugraph::Result<()> {
    let corpus = match std::env::args().nth(1) {
        Some(path) => read_corpus(path)?,
        None => match parse_record(&BROKEN.replace('\n', ""), 1) {
            Ok(f) => vec![f],
            Err(e) => {
                println!("rejected: {e}");
                return Ok(());
            }
        },
    };
    let mut clean = 0;
    for f in &corpus {
        let violations = validate_cfg(&f.cfg);
        if violations.is_empty() {
            clean += 1;
        }
        for v in violations {
            println!("{}: {v}", f.function_id);
        }
    }
    println!("{clean}/{} functions valid", corpus.len());
    Ok(())
}
