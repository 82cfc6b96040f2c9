//! Acceptance gate for the command-line surface: incremental
//! (character-at-a-time) correction must produce byte-identical output
//! to batch correction across the whole toy suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn ctr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctr"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn correct(args: &[&std::ffi::OsStr], incremental: bool) -> (Vec<u8>, Option<i32>) {
    let mut cmd = ctr();
    cmd.arg("correct").args(args);
    if incremental {
        cmd.arg("--incremental");
    }
    let out = cmd.output().unwrap();
    (out.stdout, out.status.code())
}

#[test]
fn criterion_11_incremental_equals_batch_byte_for_byte() {
    let tmp = TempDir::new().unwrap();

    // System 1: baseline over a segmentation/run-on/split toy lexicon.
    let words = "show\nme\nall\ncars\nhe\ngave\nher\nroses\nhave\nhav\ne\n";
    let lexicon = write(tmp.path(), "words.txt", words);
    let archive = tmp.path().join("models");
    assert!(ctr()
        .args(["train-od", "--lexicon"])
        .arg(&lexicon)
        .arg("--out")
        .arg(&archive)
        .status()
        .unwrap()
        .success());

    // System 2: tag-bigram over a small tagged language.
    let vocab = write(tmp.path(), "vocab.txt", "the\ndog\ncat\nruns\nsees\n");
    let tags = write(
        tmp.path(),
        "tags.txt",
        "D\nN\nV\nthe\tD\ndog\tN\ncat\tN\nruns\tV\nsees\tV\n",
    );
    let tagged = write(
        tmp.path(),
        "tagged.txt",
        "the/D dog/N runs/V\nthe/D cat/N sees/V\nthe/D dog/N sees/V\n",
    );
    let bigram_archive = tmp.path().join("bigram-models");
    let bigram_lexicon = write(tmp.path(), "bigram-words.txt", "the\ndog\ncat\nruns\nsees\n");
    assert!(ctr()
        .args(["train-od", "--lexicon"])
        .arg(&bigram_lexicon)
        .arg("--out")
        .arg(&bigram_archive)
        .status()
        .unwrap()
        .success());
    let ld = tmp.path().join("ld.txt");
    assert!(ctr()
        .args(["train-ld", "--ld", "bigram", "--vocab"])
        .arg(&vocab)
        .arg("--tags")
        .arg(&tags)
        .arg("--tagged")
        .arg(&tagged)
        .arg("--out")
        .arg(&ld)
        .status()
        .unwrap()
        .success());

    // The toy suite: pristine lines, run-ons, splits, misspellings,
    // blank and whitespace-only lines, and garbled input.
    let suite1 = write(
        tmp.path(),
        "suite1.txt",
        concat!(
            "show me all cars\n",
            "he gaveher roses\n",
            "hav e\n",
            "shw me\n",
            "\n",
            "   \n",
            "showmeallcars\n",
            "xqzv\n",
            "roses roses\n",
        ),
    );
    let suite2 = write(
        tmp.path(),
        "suite2.txt",
        "the dog runs\nthedog sees\nthe cta runs\nthe dog\n",
    );

    let mut compared = 0;
    for (archive_dir, ld_file, input, tags_flag) in [
        (&archive, None, &suite1, false),
        (&bigram_archive, Some(&ld), &suite2, false),
        (&bigram_archive, Some(&ld), &suite2, true),
    ] {
        let mut args: Vec<&std::ffi::OsStr> = vec!["--od".as_ref(), archive_dir.as_ref()];
        if let Some(ld_path) = ld_file {
            args.push("--ld".as_ref());
            args.push(ld_path.as_ref());
        }
        args.push("--input".as_ref());
        args.push(input.as_ref());
        if tags_flag {
            args.push("--tags".as_ref());
        }
        let (batch, batch_code) = correct(&args, false);
        let (inc, inc_code) = correct(&args, true);
        assert_eq!(batch, inc, "batch and incremental output differ for {input:?}");
        assert_eq!(batch_code, inc_code, "exit codes differ for {input:?}");
        assert!(!batch.is_empty());
        compared += 1;
    }
    assert_eq!(compared, 3);
    println!("PASS: incremental and batch correction are byte-identical across the toy suite");
}
