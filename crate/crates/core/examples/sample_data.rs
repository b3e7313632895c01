//! Write a simulated dataset as CSV on stdout.
//!
//! Usage: `sample_data [main|binary] [rows] [seed]`.

use fairpath_core::sim::{dgp_binary, dgp_main};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind = args.first().map_or("main", String::as_str);
    let n = args
        .get(1)
        .map_or(Ok(1000), |s| s.parse())
        .expect("rows must be an integer");
    let seed = args
        .get(2)
        .map_or(Ok(1), |s| s.parse())
        .expect("seed must be an integer");
    let data = match kind {
        "main" => dgp_main(n, seed),
        "binary" => dgp_binary(n, seed),
        other => {
            eprintln!("unknown process `{other}`: expected main or binary");
            std::process::exit(2);
        }
    };
    data.write_csv(std::io::stdout().lock()).expect("write csv");
}
