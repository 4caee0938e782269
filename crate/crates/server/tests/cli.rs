//! The `rigor` binary driven stage by stage over a small corpus.

use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use rigor_server::cli::{Cli, Command as Verb};
use serde_json::Value;

fn rigor(state: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigor"))
        .arg("--out")
        .arg(state)
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_corpus(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let papers = [
        ("PMC1", "Registered as NCT04280705."),
        ("PMC2", "NCTC clone 929 cells were used."),
        ("PMC3", "Registered as ISRCTN17822126."),
        ("PMC4", "Nothing to see."),
        ("PMC5", "Nothing here either."),
    ];
    for (id, text) in papers {
        let xml = format!(
            "<article><front><article-meta><article-id pub-id-type=\"pmc\">{id}</article-id></article-meta></front>\
             <body><sec><title>Methods</title><p>{text}</p></sec></body></article>"
        );
        std::fs::write(dir.join(format!("{id}.xml")), xml).unwrap();
    }
    std::fs::write(dir.join("broken.xml"), "<article><body>").unwrap();
}

#[test]
fn stages_run_in_sequence() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    let state = root.path().join("state");
    write_corpus(&corpus);

    let v = ok_json(rigor(&state, &["ingest", "--corpus", corpus.to_str().unwrap()]));
    assert_eq!((v["documents"].as_u64(), v["excluded"].as_u64()), (Some(5), Some(1)));

    let v = ok_json(rigor(
        &state,
        &["detect", "--detector", "registry_scanner", "--detector", "nct_presence"],
    ));
    assert_eq!(v["registration"], 10);

    let v = ok_json(rigor(&state, &["queue", "--criterion", "registration", "--seed", "4"]));
    assert_eq!(v["items"], 2);
    let v = ok_json(rigor(&state, &["controls", "--criterion", "registration", "--size", "2"]));
    assert_eq!((v["positives"].as_u64(), v["negatives"].as_u64()), (Some(1), Some(1)));

    let pending = rigor(&state, &["report", "--criterion", "registration"]);
    assert!(!pending.status.success());
    assert!(String::from_utf8_lossy(&pending.stderr).contains("no report"));

    let run = rigor(&state, &["run"]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("curation incomplete"));

    let bad = rigor(&state, &["queue", "--criterion", "telepathy"]);
    assert!(!bad.status.success());
}

#[test]
fn port_comes_from_flag_or_environment() {
    let cli = Cli::try_parse_from(["rigor", "serve", "--port", "9100"]).unwrap();
    assert!(matches!(cli.command, Verb::Serve { port: Some(9100) }));
    std::env::set_var("RIGOR_PORT", "9200");
    let cli = Cli::try_parse_from(["rigor", "--out", "s", "serve"]).unwrap();
    std::env::remove_var("RIGOR_PORT");
    assert!(matches!(cli.command, Verb::Serve { port: Some(9200) }));
    assert_eq!(cli.out.as_deref(), Some(Path::new("s")));
}
