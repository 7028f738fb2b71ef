//! Drive the command-line front end in-process: sample, validate the
//! samples, and run a small capacity sweep, writing into a temp directory.

use std::process::ExitCode;

fn main() -> ExitCode {
    let dir = std::env::temp_dir().join("fibercap-cli-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let runs: [Vec<String>; 3] = [
        ["sample", "--oracle", "exact-path", "--batch", "20000", "--steps", "100", "--out"].map(String::from).into_iter().chain([path("samples.csv")]).collect(),
        ["validate", "--samples"].map(String::from).into_iter().chain([path("samples.csv"), "--out".into(), path("report.json")]).collect(),
        ["capacity", "--grid", "24x24", "--sweep", "0:20:5", "--out"].map(String::from).into_iter().chain([path("capacity.csv")]).collect(),
    ];
    for args in runs {
        println!("$ fibercap {}", args.join(" "));
        let code = fibercap::cli::main_with(std::iter::once("fibercap".to_string()).chain(args));
        if code != ExitCode::SUCCESS {
            return code;
        }
    }
    println!("{}", std::fs::read_to_string(dir.join("capacity.csv")).expect("written"));
    ExitCode::SUCCESS
}
