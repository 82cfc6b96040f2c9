//! End-to-end tests of the `ctr` binary: training artifacts,
//! correction streams, evaluation reports and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ctr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctr"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn train_od(dir: &Path, words: &str, out: &str) -> PathBuf {
    let lexicon = write(dir, "words.txt", words);
    let archive = dir.join(out);
    let status = ctr()
        .args(["train-od", "--lexicon"])
        .arg(&lexicon)
        .arg("--out")
        .arg(&archive)
        .status()
        .unwrap();
    assert!(status.success());
    archive
}

#[test]
fn train_od_writes_archive_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let words = "show\nme\nall\ncars\nred\n";
    let first = train_od(tmp.path(), words, "first");
    let second = train_od(tmp.path(), words, "second");

    let mut names: Vec<String> = fs::read_dir(&first)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "manifest.txt",
            "model_0000.txt",
            "model_0001.txt",
            "model_0002.txt",
            "model_0003.txt",
            "model_0004.txt"
        ]
    );
    for name in &names {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn train_od_transpositions_flag_changes_the_models() {
    let tmp = TempDir::new().unwrap();
    let lexicon = write(tmp.path(), "words.txt", "show\nme\n");
    for (dir, extra) in [("plain", None), ("tra", Some("--with-transpositions"))] {
        let mut cmd = ctr();
        cmd.args(["train-od", "--lexicon"])
            .arg(&lexicon)
            .arg("--out")
            .arg(tmp.path().join(dir))
            .args(["--with-deletions", "--with-substitutions", "--with-space-insertions"]);
        if let Some(flag) = extra {
            cmd.arg(flag);
        }
        assert!(cmd.status().unwrap().success());
    }
    let plain = fs::read(tmp.path().join("plain/model_0000.txt")).unwrap();
    let tra = fs::read(tmp.path().join("tra/model_0000.txt")).unwrap();
    assert_ne!(plain, tra, "transposition corpora should change the trained model");
}

#[test]
fn train_od_unreadable_lexicon_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = ctr()
        .args(["train-od", "--lexicon"])
        .arg(tmp.path().join("missing.txt"))
        .arg("--out")
        .arg(tmp.path().join("models"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_ld_unigram_matches_hand_counts() {
    let tmp = TempDir::new().unwrap();
    let vocab = write(tmp.path(), "vocab.txt", "a\nb\nc\n");
    let corpus = write(tmp.path(), "corpus.txt", "a a b\n");
    let model = tmp.path().join("ld.txt");
    let status = ctr()
        .args(["train-ld", "--ld", "unigram", "--vocab"])
        .arg(&vocab)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&model)
        .status()
        .unwrap();
    assert!(status.success());

    let mut r = std::io::BufReader::new(fs::File::open(&model).unwrap());
    let ld = ctr_core::ld::read_ld(&mut r).unwrap();
    let hmm = ld.hmm().unwrap();
    // Counts a:2 b:1 c:0 with floor 1e-4 on the unseen word.
    let row = hmm.observation_row(1);
    let eps = 1e-4;
    assert!((row[0] - 2.0 / 3.0 * (1.0 - eps)).abs() < 1e-12);
    assert!((row[1] - 1.0 / 3.0 * (1.0 - eps)).abs() < 1e-12);
    assert!((row[2] - eps).abs() < 1e-15);
}

#[test]
fn train_ld_bigram_without_tags_exits_2() {
    let tmp = TempDir::new().unwrap();
    let vocab = write(tmp.path(), "vocab.txt", "a\nb\n");
    let corpus = write(tmp.path(), "corpus.txt", "a b\n");
    let out = ctr()
        .args(["train-ld", "--ld", "bigram", "--vocab"])
        .arg(&vocab)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(tmp.path().join("ld.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_ld_supervised_and_unsupervised_bigrams_differ() {
    let tmp = TempDir::new().unwrap();
    // "runs" is tag-ambiguous, so the supervised estimator (which sees
    // the disambiguated tags) and the unsupervised one (which must
    // spread mass over both readings) produce different models.
    let vocab = write(tmp.path(), "vocab.txt", "the\ndog\nruns\n");
    let tags = write(tmp.path(), "tags.txt", "D\nN\nV\nthe\tD\ndog\tN\nruns\tV,N\n");
    let tagged = write(tmp.path(), "tagged.txt", "the/D dog/N runs/V\nthe/D dog/N\n");
    let untagged = write(tmp.path(), "untagged.txt", "the dog runs\nthe dog\n");

    let sup = tmp.path().join("sup.txt");
    assert!(ctr()
        .args(["train-ld", "--ld", "bigram", "--vocab"])
        .arg(&vocab)
        .arg("--tags")
        .arg(&tags)
        .arg("--tagged")
        .arg(&tagged)
        .arg("--out")
        .arg(&sup)
        .status()
        .unwrap()
        .success());

    let unsup = tmp.path().join("unsup.txt");
    assert!(ctr()
        .args(["train-ld", "--ld", "bigram", "--vocab"])
        .arg(&vocab)
        .arg("--tags")
        .arg(&tags)
        .arg("--corpus")
        .arg(&untagged)
        .arg("--out")
        .arg(&unsup)
        .status()
        .unwrap()
        .success());

    assert_ne!(fs::read(&sup).unwrap(), fs::read(&unsup).unwrap());
}

#[test]
fn correct_repairs_and_tags() {
    let tmp = TempDir::new().unwrap();
    let archive = train_od(tmp.path(), "the\ndog\nruns\n", "models");
    let vocab = write(tmp.path(), "vocab.txt", "the\ndog\nruns\n");
    let tags = write(tmp.path(), "tags.txt", "D\nN\nV\nthe\tD\ndog\tN\nruns\tV\n");
    let tagged = write(tmp.path(), "tagged.txt", "the/D dog/N runs/V\n");
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

    let input = write(tmp.path(), "in.txt", "the dog runs\nthedog runs\n");
    let out = ctr()
        .args(["correct", "--od"])
        .arg(&archive)
        .arg("--ld")
        .arg(&ld)
        .arg("--input")
        .arg(&input)
        .arg("--tags")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "the/D dog/N runs/V\nthe/D dog/N runs/V\n");
}

#[test]
fn correct_no_hypothesis_echoes_and_exits_1() {
    let tmp = TempDir::new().unwrap();
    let archive = train_od(tmp.path(), "cars\n", "models");
    let input = write(tmp.path(), "in.txt", "c\ncars\n");
    let out = ctr()
        .args(["correct", "--od"])
        .arg(&archive)
        .arg("--input")
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out), "c\ncars\n");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no hypothesis"), "stderr: {err}");
}

#[test]
fn evaluate_worked_example_and_sums() {
    let tmp = TempDir::new().unwrap();
    let archive = train_od(tmp.path(), "show\nme\nall\ncars\nred\n", "models");
    let key = write(
        tmp.path(),
        "key.txt",
        "shw\tshow\nm e\tme\nallcars\tall cars\ncrs\tcars\nred\tred\n",
    );
    let outputs = write(tmp.path(), "out.txt", "show\nme\nall cars\ncrs\nrd\n");
    let out = ctr()
        .args(["evaluate", "--od"])
        .arg(&archive)
        .arg("--key")
        .arg(&key)
        .arg("--outputs")
        .arg(&outputs)
        .arg("--tsv")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("utterances\t4\t3\t5\t75.0\t60.0"), "{text}");

    // Category sums: misspelling+run-on+split = nonword+real-word = total.
    let mut table = std::collections::BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        table.insert(
            cols[0].to_string(),
            (cols[1].parse::<usize>().unwrap(), cols[2].parse::<usize>().unwrap(), cols[3].parse::<usize>().unwrap()),
        );
    }
    let total = table["total"];
    let sum3 = |a: (usize, usize, usize), b: (usize, usize, usize), c: (usize, usize, usize)| {
        (a.0 + b.0 + c.0, a.1 + b.1 + c.1, a.2 + b.2 + c.2)
    };
    assert_eq!(sum3(table["misspelling"], table["run-on"], table["split"]), total);
    let lexical = (
        table["nonword"].0 + table["real-word"].0,
        table["nonword"].1 + table["real-word"].1,
        table["nonword"].2 + table["real-word"].2,
    );
    assert_eq!(lexical, total);
}

#[test]
fn evaluate_line_count_mismatch_exits_2() {
    let tmp = TempDir::new().unwrap();
    let archive = train_od(tmp.path(), "show\n", "models");
    let key = write(tmp.path(), "key.txt", "shw\tshow\n");
    let outputs = write(tmp.path(), "out.txt", "show\nextra\n");
    let out = ctr()
        .args(["evaluate", "--od"])
        .arg(&archive)
        .arg("--key")
        .arg(&key)
        .arg("--outputs")
        .arg(&outputs)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_errors_lists_deletions() {
    let out = ctr()
        .args(["gen-errors", "--word", "show", "--with-deletions"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<String> =
        stdout(&out).lines().map(|l| l.split('\t').next().unwrap().to_string()).collect();
    assert_eq!(lines, vec!["how", "sow", "shw", "sho"]);
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = TempDir::new().unwrap();
    let vocab = write(tmp.path(), "vocab.txt", "a\nb\n");
    let corpus = write(tmp.path(), "corpus.txt", "a b\n");
    let config = write(tmp.path(), "ctr.conf", "ld_kind = unigram  # defaults\n");
    let model = tmp.path().join("ld.txt");
    assert!(ctr()
        .args(["train-ld", "--vocab"])
        .arg(&vocab)
        .arg("--corpus")
        .arg(&corpus)
        .arg("--out")
        .arg(&model)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("unigram"), "{text}");
}
