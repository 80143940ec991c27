//! Plain-text formats for instances, equilibria and games.
//!
//! Files are line oriented. `#` starts a comment, blank lines are ignored and
//! every rational is written in lowest terms as `p/q` or an integer. Writers
//! emit fields in a fixed order so that reading and writing round-trips
//! byte for byte.
//!
//! ```text
//! manna instance
//! agents 2
//! items 2
//! setting exchange
//! utility
//! 0 0: 1
//! 0 1: -2
//! 1 0: 2 1/4, 1
//! 1 1: -3
//! endowment
//! 1/2 1/2
//! 1/2 1/2
//! ```
//!
//! A utility line lists `slope length` pairs separated by commas; the last
//! segment is unbounded and has only a slope. Fisher instances add a
//! `weights` line after `setting`.

use std::fmt::Write as _;
use std::str::FromStr;

use manna_core::instance::{Instance, InstanceError, Segment, Setting};
use manna_core::reduction::{BimatrixGame, ReductionError};
use manna_core::solution::Equilibrium;
use manna_core::Rational;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Tok<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.column, message: message.into() }
    }

    fn rational(&self) -> Result<Rational, ParseError> {
        parse_rational(self.text).ok_or_else(|| self.err(format!("`{}` is not a rational number", self.text)))
    }

    fn count(&self) -> Result<usize, ParseError> {
        self.text.parse().map_err(|_| self.err(format!("`{}` is not a count", self.text)))
    }
}

/// Parses `p/q` or an integer. Zero denominators are rejected.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (BigInt::from_str(n).ok()?, BigInt::from_str(d).ok()?),
        None => (BigInt::from_str(s).ok()?, BigInt::from(1)),
    };
    (!den.is_zero()).then(|| Rational::new(num, den))
}

/// Renders `r` with `digits` decimals, rounding half away from zero.
pub fn decimal(r: &Rational, digits: usize) -> String {
    let scale = BigInt::from(10).pow(digits as u32);
    let scaled = (r.abs() * Rational::from_integer(scale)).round().to_integer();
    let mut s = scaled.to_string();
    if s.len() <= digits {
        s = "0".repeat(digits + 1 - s.len()) + &s;
    }
    if digits > 0 {
        s.insert(s.len() - digits, '.');
    }
    if r.is_negative() && !scaled.is_zero() {
        s.insert(0, '-');
    }
    s
}

struct Line<'a> {
    number: usize,
    raw: &'a str,
    body: &'a str,
}

impl<'a> Line<'a> {
    fn tokens_of(&self, part: &'a str) -> Vec<Tok<'a>> {
        part.split_whitespace()
            .map(|t| Tok { text: t, line: self.number, column: t.as_ptr() as usize - self.raw.as_ptr() as usize + 1 })
            .collect()
    }

    fn tokens(&self) -> Vec<Tok<'a>> {
        self.tokens_of(self.body)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let column = self.body.as_ptr() as usize - self.raw.as_ptr() as usize + 1;
        ParseError { line: self.number, column, message: message.into() }
    }
}

struct Reader<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let last_line = text.lines().count().max(1);
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(k, raw)| {
                let body = raw.split('#').next().unwrap_or("").trim();
                (!body.is_empty()).then_some(Line { number: k + 1, raw, body })
            })
            .collect();
        Reader { lines, pos: 0, last_line }
    }

    fn next(&mut self, what: &str) -> Result<&Line<'a>, ParseError> {
        let line = self.lines.get(self.pos).ok_or_else(|| ParseError {
            line: self.last_line,
            column: 1,
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn peek_key(&self) -> Option<&str> {
        self.lines.get(self.pos).and_then(|l| l.body.split_whitespace().next())
    }

    /// Reads `key v1 v2 ...` and returns the value tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<Tok<'a>>, ParseError> {
        let line = self.next(&format!("`{key}`"))?;
        let toks = line.tokens();
        if toks[0].text != key {
            return Err(toks[0].err(format!("expected `{key}`, found `{}`", toks[0].text)));
        }
        Ok(toks[1..].to_vec())
    }

    fn single(&mut self, key: &str) -> Result<Tok<'a>, ParseError> {
        let line_err = |r: &Self| r.lines[r.pos - 1].err(format!("`{key}` takes exactly one value"));
        let vals = self.keyed(key)?;
        match vals[..] {
            [v] => Ok(v),
            _ => Err(line_err(self)),
        }
    }

    fn header(&mut self, kind: &str) -> Result<(), ParseError> {
        let line = self.next(&format!("`manna {kind}`"))?;
        if line.tokens().iter().map(|t| t.text).ne(["manna", kind]) {
            return Err(line.err(format!("expected the header `manna {kind}`")));
        }
        Ok(())
    }

    fn row(&mut self, width: usize, what: &str) -> Result<Vec<Rational>, ParseError> {
        let line = self.next(what)?;
        let toks = line.tokens();
        if toks.len() != width {
            return Err(line.err(format!("expected {width} entries in {what}, found {}", toks.len())));
        }
        toks.iter().map(Tok::rational).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Vec<Vec<Rational>>, ParseError> {
        (0..rows).map(|_| self.row(cols, what)).collect()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.lines.get(self.pos) {
            Some(line) => Err(line.err("unexpected trailing content")),
            None => Ok(()),
        }
    }
}

fn setting_name(s: Setting) -> &'static str {
    match s {
        Setting::Exchange => "exchange",
        Setting::Fisher => "fisher",
        Setting::Ceei => "ceei",
    }
}

fn join(values: &[Rational]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_instance(inst: &Instance) -> String {
    let (n, m) = (inst.num_agents(), inst.num_items());
    let mut out = String::new();
    writeln!(out, "manna instance\nagents {n}\nitems {m}\nsetting {}", setting_name(inst.setting())).unwrap();
    if let Some(w) = inst.weights() {
        writeln!(out, "weights {}", join(w)).unwrap();
    }
    out.push_str("utility\n");
    for i in 0..n {
        for j in 0..m {
            let segs: Vec<String> = inst
                .utility(i, j)
                .iter()
                .map(|s| match &s.length {
                    Some(l) => format!("{} {l}", s.slope),
                    None => s.slope.to_string(),
                })
                .collect();
            writeln!(out, "{i} {j}: {}", segs.join(", ")).unwrap();
        }
    }
    out.push_str("endowment\n");
    for row in inst.endowments().chunks(m) {
        writeln!(out, "{}", join(row)).unwrap();
    }
    out
}

pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut r = Reader::new(text);
    r.header("instance")?;
    let n = r.single("agents")?.count()?;
    let m = r.single("items")?.count()?;
    let set = r.single("setting")?;
    let setting = match set.text {
        "exchange" => Setting::Exchange,
        "fisher" => Setting::Fisher,
        "ceei" => Setting::Ceei,
        other => return Err(set.err(format!("unknown setting `{other}`"))),
    };
    let weights = if r.peek_key() == Some("weights") {
        let toks = r.keyed("weights")?;
        Some(toks.iter().map(Tok::rational).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    r.keyed("utility")?;
    let mut utility = vec![None; n * m];
    for _ in 0..n * m {
        let line = r.next("a utility line")?;
        let Some((head, tail)) = line.body.split_once(':') else {
            return Err(line.err("expected `agent item: segments`"));
        };
        let idx = line.tokens_of(head);
        let [a, b] = idx[..] else {
            return Err(line.err("expected an agent and an item before `:`"));
        };
        let (i, j) = (a.count()?, b.count()?);
        if i >= n || j >= m {
            return Err(a.err(format!("pair ({i}, {j}) is out of range")));
        }
        if utility[i * m + j].is_some() {
            return Err(a.err(format!("pair ({i}, {j}) is listed twice")));
        }
        let pieces: Vec<&str> = tail.split(',').collect();
        let mut f = Vec::with_capacity(pieces.len());
        for (k, piece) in pieces.iter().enumerate() {
            let toks = line.tokens_of(piece);
            let last = k + 1 == pieces.len();
            match (&toks[..], last) {
                ([s], true) => f.push(Segment::unbounded(s.rational()?)),
                ([s, l], false) => f.push(Segment::new(s.rational()?, l.rational()?)),
                _ if last => return Err(line.err("the last segment takes only a slope")),
                _ => return Err(line.err("bounded segments take a slope and a length")),
            }
        }
        utility[i * m + j] = Some(f);
    }
    r.keyed("endowment")?;
    let endowment = r.matrix(n, m, "an endowment row")?.concat();
    r.finish()?;
    let utility = utility.into_iter().map(Option::unwrap).collect();
    Instance::new(n, m, utility, endowment, weights, setting).map_err(|e: InstanceError| ParseError {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

pub fn write_equilibrium(eq: &Equilibrium) -> String {
    let mut out = String::new();
    let bundles = eq.bundles();
    writeln!(out, "manna equilibrium\nagents {}\nitems {}", bundles.len(), eq.prices.len()).unwrap();
    writeln!(out, "prices {}\nbudgets {}\nallocation", join(&eq.prices), join(&eq.budgets)).unwrap();
    for row in &bundles {
        writeln!(out, "{}", join(row)).unwrap();
    }
    out
}

/// Same layout with decimals, for reading by eye. Not parseable.
pub fn write_equilibrium_decimal(eq: &Equilibrium, digits: usize) -> String {
    let fmt = |v: &[Rational]| v.iter().map(|x| decimal(x, digits)).collect::<Vec<_>>().join(" ");
    let mut out = format!("prices {}\nbudgets {}\nallocation\n", fmt(&eq.prices), fmt(&eq.budgets));
    for row in eq.bundles() {
        writeln!(out, "{}", fmt(&row)).unwrap();
    }
    out
}

/// Reads an equilibrium of `inst`. Amounts are spread over segments in
/// order; a `budgets` line must agree with the prices.
pub fn parse_equilibrium(text: &str, inst: &Instance) -> Result<Equilibrium, ParseError> {
    let mut r = Reader::new(text);
    r.header("equilibrium")?;
    let a = r.single("agents")?;
    let b = r.single("items")?;
    let (n, m) = (a.count()?, b.count()?);
    if (n, m) != (inst.num_agents(), inst.num_items()) {
        return Err(a.err(format!(
            "equilibrium is {n} x {m} but the instance is {} x {}",
            inst.num_agents(),
            inst.num_items()
        )));
    }
    let price_toks = r.keyed("prices")?;
    if price_toks.len() != m {
        return Err(r.lines[r.pos - 1].err(format!("expected {m} prices")));
    }
    let prices: Vec<Rational> = price_toks.iter().map(Tok::rational).collect::<Result<_, _>>()?;
    let budgets = if r.peek_key() == Some("budgets") {
        let toks = r.keyed("budgets")?;
        let line = r.pos - 1;
        Some((line, toks.iter().map(Tok::rational).collect::<Result<Vec<_>, _>>()?))
    } else {
        None
    };
    r.keyed("allocation")?;
    let bundles = r.matrix(n, m, "an allocation row")?;
    r.finish()?;
    let eq = Equilibrium::from_bundles(inst, prices, &bundles);
    if let Some((line, b)) = budgets {
        if b != eq.budgets {
            return Err(r.lines[line].err("budgets do not match the prices and endowments"));
        }
    }
    Ok(eq)
}

pub fn write_game(game: &BimatrixGame) -> String {
    let mut out = format!("manna game\nn {}\nrow\n", game.n());
    for line in game.row_payoffs() {
        writeln!(out, "{}", join(line)).unwrap();
    }
    out.push_str("column\n");
    for line in game.col_payoffs() {
        writeln!(out, "{}", join(line)).unwrap();
    }
    out
}

pub fn parse_game(text: &str) -> Result<BimatrixGame, ParseError> {
    let mut r = Reader::new(text);
    r.header("game")?;
    let tok = r.single("n")?;
    let n = tok.count()?;
    r.keyed("row")?;
    let row = r.matrix(n, n, "a payoff row")?;
    r.keyed("column")?;
    let col = r.matrix(n, n, "a payoff row")?;
    r.finish()?;
    BimatrixGame::new(row, col).map_err(|e: ReductionError| tok.err(e.to_string()))
}

/// Prices from an equilibrium file, or from a file of bare rationals.
pub fn parse_prices(text: &str) -> Result<Vec<Rational>, ParseError> {
    let r = Reader::new(text);
    if let Some(line) = r.lines.iter().find(|l| l.body.split_whitespace().next() == Some("prices")) {
        return line.tokens()[1..].iter().map(Tok::rational).collect();
    }
    r.lines.iter().flat_map(Line::tokens).map(|t| t.rational()).collect()
}
