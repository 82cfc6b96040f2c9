//! `ctr` — train and run the connected text recognizer.
//!
//! Subcommands cover the whole pipeline: `train-od` builds and trains
//! the per-word channel models, `train-ld` estimates a language model,
//! `correct` repairs text line by line (batch or character-by-character
//! incremental), `evaluate` scores a run against a hand-made key, and
//! `gen-errors` prints the corruption corpus for a word.
//!
//! Exit codes: 0 on success, 1 if any line produced no hypothesis,
//! 2 on configuration or input errors.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Config;
use ctr_core::errgen::{ErrorCorpus, GenOptions, KeyboardLayout};
use ctr_core::eval::{self, KeySet};
use ctr_core::ld::{self, LdModel, TagSet, TaggedCorpus};
use ctr_core::od::{self, Lexicon, LexiconEntry, TrainConfig};
use ctr_core::recognizer::{RecognitionResult, RecognizerConfig, Session};
use ctr_core::{CtrError, Result};

#[derive(Parser)]
#[command(name = "ctr", version, about = "Lexical error recovery for connected text")]
struct Cli {
    /// Defaults file in `key = value` form (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for any randomized initialization.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

/// Which corruption-generating functions to apply.
#[derive(clap::Args, Clone, Default)]
struct RecipeFlags {
    /// Generate single-character deletions.
    #[arg(long)]
    with_deletions: bool,
    /// Generate keyboard-adjacent insertions.
    #[arg(long)]
    with_insertions: bool,
    /// Generate keyboard-adjacent substitutions.
    #[arg(long)]
    with_substitutions: bool,
    /// Generate adjacent-character transpositions.
    #[arg(long)]
    with_transpositions: bool,
    /// Generate white-space insertions.
    #[arg(long)]
    with_space_insertions: bool,
    /// Generate doubled-character insertions.
    #[arg(long)]
    with_double_strokes: bool,
}

impl RecipeFlags {
    /// Explicit flags select functions; with none set, the default
    /// recipe (deletions, substitutions, space insertions) applies.
    fn to_options(&self) -> GenOptions {
        let any = self.with_deletions
            || self.with_insertions
            || self.with_substitutions
            || self.with_transpositions
            || self.with_space_insertions
            || self.with_double_strokes;
        if !any {
            return GenOptions::default_recipe();
        }
        GenOptions {
            deletions: self.with_deletions,
            insertions: self.with_insertions,
            substitutions: self.with_substitutions,
            transpositions: self.with_transpositions,
            space_insertions: self.with_space_insertions,
            double_strokes: self.with_double_strokes,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum LdKindArg {
    Baseline,
    Unigram,
    Bigram,
}

impl std::str::FromStr for LdKindArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ValueEnum::from_str(s, true)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and train the per-word channel models.
    TrainOd {
        /// Word list: one word per line, optionally `word<TAB>special`.
        #[arg(long)]
        lexicon: PathBuf,
        /// Output directory for the model archive.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        recipe: RecipeFlags,
        /// Keep corruptions that collide with vocabulary words.
        #[arg(long)]
        keep_real_words: bool,
        /// Observation floor after training.
        #[arg(long)]
        eps_obs: Option<f64>,
        /// Skip bound of the word-model topology.
        #[arg(long)]
        delta: Option<usize>,
        /// Reestimation iteration cap.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Keyboard layout file (`char<TAB>neighbors` lines).
        #[arg(long)]
        keyboard: Option<PathBuf>,
        /// Model words without a leading-space state.
        #[arg(long)]
        no_space_state: bool,
    },
    /// Estimate a language model over the vocabulary.
    TrainLd {
        /// Language model kind.
        #[arg(long, value_enum)]
        ld: Option<LdKindArg>,
        /// Vocabulary: one word per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Untagged corpus (unigram, or unsupervised bigram).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Tagged corpus of `word/TAG` lines (supervised bigram).
        #[arg(long)]
        tagged: Option<PathBuf>,
        /// Tag-set file (required for bigram).
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Transition floor.
        #[arg(long)]
        eps_trans: Option<f64>,
        /// Observation floor.
        #[arg(long)]
        eps_obs: Option<f64>,
        /// Reestimation iteration cap (unsupervised bigram).
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct text, one utterance per line.
    Correct {
        /// Trained word-model archive directory.
        #[arg(long)]
        od: PathBuf,
        /// Language model file; defaults to the cost-free baseline.
        #[arg(long)]
        ld: Option<PathBuf>,
        /// Input file (default: stdin).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output file (default: stdout).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Feed characters one at a time, flushing at each newline.
        #[arg(long)]
        incremental: bool,
        /// Annotate output words as `word/TAG`.
        #[arg(long)]
        tags: bool,
        /// Beam width; omit to search without pruning.
        #[arg(long)]
        beam: Option<f64>,
        /// Tokens kept per state; defaults to the tag-ambiguity degree.
        #[arg(long)]
        n_best: Option<usize>,
    },
    /// Score a correction run against a key of hand-made pairs.
    Evaluate {
        /// Trained word-model archive (for real-word classification).
        #[arg(long)]
        od: PathBuf,
        /// Key file: `original<TAB>corrected` per line.
        #[arg(long)]
        key: PathBuf,
        /// System output, line-aligned with the key.
        #[arg(long)]
        outputs: PathBuf,
        /// Emit the machine-readable table instead of the pretty one.
        #[arg(long)]
        tsv: bool,
    },
    /// Print the corruption corpus for one word.
    GenErrors {
        /// The source word.
        #[arg(long)]
        word: String,
        #[command(flatten)]
        recipe: RecipeFlags,
        /// Keyboard layout file.
        #[arg(long)]
        keyboard: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    log::debug!("seed = {}", cli.seed);
    match cli.command {
        Command::TrainOd {
            lexicon,
            out,
            recipe,
            keep_real_words,
            eps_obs,
            delta,
            max_iters,
            keyboard,
            no_space_state,
        } => {
            let entries = read_word_list(&lexicon)?;
            let delta = cfg.resolve(&delta, "delta", od::DEFAULT_DELTA)?;
            let mut lex = Lexicon::build(&entries, !no_space_state, delta)?;
            let train = TrainConfig {
                recipe: recipe.to_options(),
                keyboard: load_keyboard(&cfg.resolve_path(&keyboard, "keyboard"))?,
                eps_obs: cfg.resolve(&eps_obs, "eps_obs", od::DEFAULT_EPS_OBS)?,
                filter_real_words: !keep_real_words,
                max_iters: cfg.resolve(&max_iters, "max_iters", od::DEFAULT_MAX_ITERS)?,
                conv_eps: od::DEFAULT_CONV_EPS,
            };
            od::train_lexicon(&mut lex, &train)?;
            std::fs::create_dir_all(&out)?;
            od::write_lexicon(&out, &lex)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainLd {
            ld,
            vocab,
            corpus,
            tagged,
            tags,
            eps_trans,
            eps_obs,
            max_iters,
            out,
        } => {
            let kind = cfg.resolve(&ld, "ld_kind", LdKindArg::Baseline)?;
            let vocab: Vec<String> =
                read_word_list(&vocab)?.into_iter().map(|e| e.word).collect();
            let eps_trans = cfg.resolve(&eps_trans, "eps_trans", ld::DEFAULT_EPS_TRANS)?;
            let model = match kind {
                LdKindArg::Baseline => ld::build_baseline(vocab),
                LdKindArg::Unigram => {
                    let path = corpus.ok_or_else(|| {
                        CtrError::Input("--corpus is required for a unigram model".into())
                    })?;
                    let text = std::fs::read_to_string(path)?;
                    let eps = cfg.resolve(&eps_obs, "eps_obs", ld::DEFAULT_EPS_OBS_UNIGRAM)?;
                    ld::build_unigram(&ld::parse_untagged(&text), &vocab, eps)?
                }
                LdKindArg::Bigram => {
                    let tags_path = tags.ok_or_else(|| {
                        CtrError::Input("--tags is required for a bigram model".into())
                    })?;
                    let tag_set = TagSet::parse(&std::fs::read_to_string(tags_path)?)?;
                    let eps = cfg.resolve(&eps_obs, "eps_obs", ld::DEFAULT_EPS_OBS_BIGRAM)?;
                    match (&tagged, &corpus) {
                        (Some(path), _) => {
                            let tc = TaggedCorpus::parse(&std::fs::read_to_string(path)?)?;
                            ld::build_bigram_supervised(&tc, &tag_set, &vocab, eps_trans, eps)?
                        }
                        (None, Some(path)) => {
                            let text = std::fs::read_to_string(path)?;
                            let iters =
                                cfg.resolve(&max_iters, "max_iters", od::DEFAULT_MAX_ITERS)?;
                            ld::build_bigram_unsupervised(
                                &ld::parse_untagged(&text),
                                &tag_set,
                                &vocab,
                                iters,
                                eps_trans,
                                eps,
                            )?
                        }
                        (None, None) => {
                            return Err(CtrError::Input(
                                "a bigram model needs --tagged or --corpus".into(),
                            ))
                        }
                    }
                }
            };
            let mut w = BufWriter::new(File::create(&out)?);
            ld::write_ld(&mut w, &model)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Correct { od, ld, input, output, incremental, tags, beam, n_best } => {
            let lexicon = od::read_lexicon(&od)?;
            let model = match cfg.resolve_path(&ld, "ld") {
                Some(path) => {
                    let mut r = BufReader::new(File::open(&path)?);
                    ld::read_ld(&mut r)?
                }
                None => ld::build_baseline(
                    (0..lexicon.len()).map(|i| lexicon.word(i).to_string()).collect(),
                ),
            };
            let rec_cfg = RecognizerConfig {
                beam_width: cfg.resolve(&beam, "beam_width", f64::INFINITY)?,
                n_best: cfg.resolve(&n_best, "n_best", model.max_ambiguity().max(1))?,
                emit_tags: tags,
            };
            let reader: Box<dyn BufRead> = match input {
                Some(path) => Box::new(BufReader::new(File::open(&path)?)),
                None => Box::new(BufReader::new(io::stdin())),
            };
            let mut writer: Box<dyn Write> = match output {
                Some(path) => Box::new(BufWriter::new(File::create(&path)?)),
                None => Box::new(BufWriter::new(io::stdout())),
            };
            let code = correct_stream(&model, &lexicon, rec_cfg, incremental, tags, reader, &mut writer)?;
            writer.flush()?;
            Ok(code)
        }
        Command::Evaluate { od, key, outputs, tsv } => {
            let lexicon = od::read_lexicon(&od)?;
            let key = KeySet::parse(&std::fs::read_to_string(&key)?)?;
            let out_text = std::fs::read_to_string(&outputs)?;
            let out_lines: Vec<&str> = out_text.lines().collect();
            if out_lines.len() != key.len() {
                return Err(CtrError::Input(format!(
                    "key has {} lines but the output has {}",
                    key.len(),
                    out_lines.len()
                )));
            }
            let run: Vec<(String, String)> = key
                .pairs()
                .iter()
                .zip(&out_lines)
                .map(|((orig, _), out)| (orig.clone(), out.to_string()))
                .collect();
            let report = eval::evaluate(&run, &key, &lexicon)?;
            if tsv {
                print!("{}", report.to_tsv());
            } else {
                print!("{report}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GenErrors { word, recipe, keyboard } => {
            let kb = load_keyboard(&cfg.resolve_path(&keyboard, "keyboard"))?;
            let corpus = ErrorCorpus::generate(&word, &recipe.to_options(), &kb);
            let mut stdout = BufWriter::new(io::stdout());
            for (corruption, op) in &corpus.corruptions {
                writeln!(stdout, "{corruption}\t{op}")?;
            }
            stdout.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads a word list: one word per line, optionally `word<TAB>special`;
/// `#` comment lines and blanks are skipped.
fn read_word_list(path: &PathBuf) -> Result<Vec<LexiconEntry>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry = match line.split_once('\t') {
            Some((word, "special")) => LexiconEntry::special(word),
            Some((_, other)) => {
                return Err(CtrError::Parse(format!(
                    "{}: unknown word marker {other:?}",
                    path.display()
                )))
            }
            None => LexiconEntry::new(line),
        };
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(CtrError::Input(format!("{}: empty word list", path.display())));
    }
    Ok(entries)
}

fn load_keyboard(path: &Option<PathBuf>) -> Result<KeyboardLayout> {
    match path {
        Some(p) => KeyboardLayout::parse(&std::fs::read_to_string(p)?),
        None => Ok(KeyboardLayout::qwerty()),
    }
}

fn format_result(res: &RecognitionResult, tags: bool) -> String {
    match (tags, &res.tags) {
        (true, Some(t)) => res
            .words
            .iter()
            .zip(t)
            .map(|(w, tag)| format!("{w}/{tag}"))
            .collect::<Vec<_>>()
            .join(" "),
        _ => res.text(),
    }
}

/// Corrects one utterance per line; returns exit code 1 if any line had
/// no hypothesis (the line is echoed unchanged with a warning).
fn correct_stream(
    model: &LdModel,
    lexicon: &Lexicon,
    rec_cfg: RecognizerConfig,
    incremental: bool,
    tags: bool,
    reader: Box<dyn BufRead>,
    writer: &mut dyn Write,
) -> Result<ExitCode> {
    let mut no_hypothesis = false;
    if incremental {
        // Character-at-a-time: feed the session as characters arrive
        // and flush the hypothesis at each newline.
        let mut session: Option<Session> = None;
        let mut line = String::new();
        let mut chars = CharReader { inner: reader };
        while let Some(c) = chars.next_char()? {
            if c == '\n' {
                let result = session.take().map(|mut s| s.finalize());
                emit_line(writer, &line, result, tags, &mut no_hypothesis)?;
                line.clear();
                continue;
            }
            line.push(c);
            // A session starts at the first non-blank character; any
            // buffered leading whitespace is replayed into it so the
            // hypothesis sees exactly the line's characters.
            match &mut session {
                Some(s) => s.feed(c)?,
                None if !line.trim().is_empty() => {
                    let mut s = Session::new(model, lexicon, rec_cfg.clone())?;
                    for buffered in line.chars() {
                        s.feed(buffered)?;
                    }
                    session = Some(s);
                }
                None => {}
            }
        }
        if !line.is_empty() {
            let result = session.take().map(|mut s| s.finalize());
            emit_line(writer, &line, result, tags, &mut no_hypothesis)?;
        }
    } else {
        for line in reader.lines() {
            let line = line?;
            let result = if line.trim().is_empty() {
                None
            } else {
                let mut s = Session::new(model, lexicon, rec_cfg.clone())?;
                for c in line.chars() {
                    s.feed(c)?;
                }
                Some(s.finalize())
            };
            emit_line(writer, &line, result, tags, &mut no_hypothesis)?;
        }
    }
    Ok(if no_hypothesis { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn emit_line(
    writer: &mut dyn Write,
    line: &str,
    result: Option<Result<RecognitionResult>>,
    tags: bool,
    no_hypothesis: &mut bool,
) -> Result<()> {
    match result {
        None => writeln!(writer, "{line}")?,
        Some(Ok(res)) => writeln!(writer, "{}", format_result(&res, tags))?,
        Some(Err(CtrError::NoHypothesis(_))) => {
            eprintln!("warning: no hypothesis for {line:?}; echoing unchanged");
            *no_hypothesis = true;
            writeln!(writer, "{line}")?;
        }
        Some(Err(e)) => return Err(e),
    }
    Ok(())
}

/// UTF-8 character reader over a byte stream, for incremental mode.
struct CharReader {
    inner: Box<dyn BufRead>,
}

impl CharReader {
    fn next_char(&mut self) -> Result<Option<char>> {
        let mut buf = [0u8; 4];
        let mut len = 0;
        loop {
            let mut byte = [0u8; 1];
            match self.inner.read(&mut byte)? {
                0 => {
                    if len == 0 {
                        return Ok(None);
                    }
                    return Err(CtrError::Input("truncated UTF-8 input".into()));
                }
                _ => {
                    buf[len] = byte[0];
                    len += 1;
                }
            }
            if let Ok(s) = std::str::from_utf8(&buf[..len]) {
                return Ok(s.chars().next());
            }
            if len == 4 {
                return Err(CtrError::Input("invalid UTF-8 input".into()));
            }
        }
    }
}
