//! Versioned text serialization for models.
//!
//! The format is line-oriented and self-describing: a `ctrhmm 1` header,
//! dimensions, a symbol table, then row-major probability tables printed
//! with 17 significant digits so round-trips are value-exact.

use std::io::{BufRead, Write};

use crate::error::{CtrError, Result};
use crate::hmm::Hmm;

const FORMAT_TAG: &str = "ctrhmm";
const FORMAT_VERSION: u32 = 1;

/// Escapes a symbol name for single-line storage.
pub fn escape_symbol(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            crate::alphabet::UNK_CHAR => out.push_str("\\u"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_symbol(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('u') => out.push(crate::alphabet::UNK_CHAR),
            other => {
                return Err(CtrError::Parse(format!("bad escape \\{:?} in symbol", other)));
            }
        }
    }
    Ok(out)
}

/// Writes a model and its symbol table.
pub fn write_hmm<W: Write>(w: &mut W, hmm: &Hmm, symbols: &[String]) -> Result<()> {
    if symbols.len() != hmm.alphabet_size() {
        return Err(CtrError::Input(format!(
            "symbol table has {} entries for alphabet of {}",
            symbols.len(),
            hmm.alphabet_size()
        )));
    }
    writeln!(w, "{FORMAT_TAG} {FORMAT_VERSION}")?;
    writeln!(w, "states {}", hmm.num_states())?;
    writeln!(w, "alphabet {}", hmm.alphabet_size())?;
    writeln!(w, "symbols")?;
    for s in symbols {
        writeln!(w, "{}", escape_symbol(s))?;
    }
    writeln!(w, "transitions")?;
    for i in 0..hmm.num_states() - 1 {
        write_row(w, hmm.transition_row(i))?;
    }
    writeln!(w, "observations")?;
    for j in 1..hmm.num_states() - 1 {
        write_row(w, hmm.observation_row(j))?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> Result<()> {
    let mut first = true;
    for &v in row {
        if !first {
            write!(w, " ")?;
        }
        write!(w, "{v:.17e}")?;
        first = false;
    }
    writeln!(w)?;
    Ok(())
}

/// Reads a model plus its symbol table.
pub fn read_hmm<R: BufRead>(r: &mut R) -> Result<(Hmm, Vec<String>)> {
    let mut lines = Lines::new(r);
    let header = lines.next_line()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(FORMAT_TAG) {
        return Err(CtrError::Parse(format!("not a {FORMAT_TAG} file: {header:?}")));
    }
    let version: u32 = parse_field(parts.next(), "format version")?;
    if version != FORMAT_VERSION {
        return Err(CtrError::Parse(format!("unsupported format version {version}")));
    }
    let n: usize = lines.keyword_value("states")?;
    let k: usize = lines.keyword_value("alphabet")?;
    lines.expect("symbols")?;
    let mut symbols = Vec::with_capacity(k);
    for _ in 0..k {
        symbols.push(unescape_symbol(&lines.next_line()?)?);
    }
    lines.expect("transitions")?;
    if n < 3 {
        return Err(CtrError::Parse(format!("state count {n} too small")));
    }
    let mut trans = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        trans.push(read_row(&lines.next_line()?, n - 1)?);
    }
    lines.expect("observations")?;
    let mut obs = Vec::with_capacity(n - 2);
    for _ in 0..n - 2 {
        obs.push(read_row(&lines.next_line()?, k)?);
    }
    let hmm = Hmm::new(n, k, trans, obs)?;
    Ok((hmm, symbols))
}

fn read_row(line: &str, len: usize) -> Result<Vec<f64>> {
    let row: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse::<f64>).collect();
    let row = row.map_err(|e| CtrError::Parse(format!("bad probability row {line:?}: {e}")))?;
    if row.len() != len {
        return Err(CtrError::Parse(format!(
            "probability row has {} entries, expected {len}",
            row.len()
        )));
    }
    Ok(row)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CtrError::Parse(format!("missing or malformed {what}")))
}

/// Line reader that skips blank lines and reports end-of-file uniformly.
pub struct Lines<'a, R: BufRead> {
    inner: &'a mut R,
}

impl<'a, R: BufRead> Lines<'a, R> {
    pub fn new(inner: &'a mut R) -> Self {
        Lines { inner }
    }

    pub fn next_line(&mut self) -> Result<String> {
        loop {
            let mut line = String::new();
            let read = self.inner.read_line(&mut line)?;
            if read == 0 {
                return Err(CtrError::Parse("unexpected end of file".into()));
            }
            let trimmed = line.trim_end_matches(['\n', '\r']);
            if !trimmed.is_empty() {
                return Ok(trimmed.to_string());
            }
        }
    }

    pub fn expect(&mut self, keyword: &str) -> Result<()> {
        let line = self.next_line()?;
        if line.trim() != keyword {
            return Err(CtrError::Parse(format!("expected {keyword:?}, found {line:?}")));
        }
        Ok(())
    }

    pub fn keyword_value<T: std::str::FromStr>(&mut self, keyword: &str) -> Result<T> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(CtrError::Parse(format!("expected {keyword:?} line, found {line:?}")));
        }
        parse_field(parts.next(), keyword)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_hmm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_value_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hmm = random_hmm(&mut rng, 5, 3);
        let symbols = vec![" ".to_string(), "a".to_string(), "\\".to_string()];
        let mut buf = Vec::new();
        write_hmm(&mut buf, &hmm, &symbols).unwrap();
        let (back, syms) = read_hmm(&mut buf.as_slice()).unwrap();
        assert_eq!(hmm, back);
        assert_eq!(symbols, syms);
    }

    #[test]
    fn rejects_wrong_header() {
        let data = b"nothmm 1\n";
        assert!(matches!(read_hmm(&mut &data[..]), Err(CtrError::Parse(_))));
    }

    #[test]
    fn symbol_escaping_round_trips() {
        for s in [" ", "a b", "\\s", "tab\there", "nl\nthere"] {
            assert_eq!(unescape_symbol(&escape_symbol(s)).unwrap(), s);
        }
    }
}
