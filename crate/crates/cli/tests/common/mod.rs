#![allow(dead_code)]

use sketchkit::fixtures::{tracing, warped_drawing, SmoothWarp};
use sketchkit::{save_sketch, Group};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn sketchkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A dataset directory with one tracing and a warped novice and professional drawing of it.
pub fn two_drawing_dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    std::fs::create_dir_all(data.join("tracings")).unwrap();
    let t = tracing(3);
    save_sketch(
        &t,
        data.join("tracings").join(format!("{}.json", t.prompt_id)),
    )
    .unwrap();
    let novice = warped_drawing(&t, &SmoothWarp::random(1, 8.0), "u1", Group::Novice);
    let pro = warped_drawing(&t, &SmoothWarp::random(2, 4.0), "u2", Group::Professional);
    save_sketch(&novice, data.join("prompt-3-u1.json")).unwrap();
    save_sketch(&pro, data.join("prompt-3-u2.json")).unwrap();
    data
}

/// Every regular file under `dir` as `(relative path, bytes)`, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
