//! The acceptance gate: every criterion must pass, and the whole artifact
//! tree must be byte-identical between a 1-thread and an 8-thread run.

use std::path::Path;

use lineage_cli::acceptance::run_selftest;

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
}

#[test]
fn acceptance_suite_passes_on_one_and_eight_threads() {
    let dir_one = tempfile::tempdir().unwrap();
    let dir_eight = tempfile::tempdir().unwrap();

    let results_one = run_selftest(dir_one.path(), Some(1)).unwrap();
    let results_eight = run_selftest(dir_eight.path(), Some(8)).unwrap();

    for r in &results_one {
        println!(
            "{} {} - {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }

    // every criterion passes on both runs
    for (a, b) in results_one.iter().zip(&results_eight) {
        assert!(a.passed, "{} failed: {}", a.id, a.detail);
        assert!(b.passed, "{} failed on 8 threads: {}", b.id, b.detail);
        assert_eq!(
            a.detail, b.detail,
            "{} detail differs across thread counts",
            a.id
        );
    }

    // AC-8, strong form: the full artifact trees are byte-identical
    let mut files_one = Vec::new();
    let mut files_eight = Vec::new();
    collect_files(dir_one.path(), dir_one.path(), &mut files_one);
    collect_files(dir_eight.path(), dir_eight.path(), &mut files_eight);
    files_one.sort();
    files_eight.sort();
    assert_eq!(files_one, files_eight, "different artifact sets");
    assert!(!files_one.is_empty());
    for rel in &files_one {
        let a = std::fs::read(dir_one.path().join(rel)).unwrap();
        let b = std::fs::read(dir_eight.path().join(rel)).unwrap();
        assert_eq!(
            a,
            b,
            "artifact {} differs across thread counts",
            rel.display()
        );
    }
}
