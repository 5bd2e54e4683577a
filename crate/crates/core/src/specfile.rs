//! Line-oriented text format for automata and signaling agents.
//!
//! ```text
//! kind: state            # or operator, agent
//! dim: 2                 # optional, defaults to 2
//! symbol 0 ket 1 0
//! symbol X matrix 0 1 ; 1 0
//! state A                # `signal` in agent specs; order defines indices
//! initial A 1            # agents: `initial <signal>`, weight 1
//! final B 1              # agents: `final <signal>`, repeatable
//! corner Interior        # agents only: bottom-right accepted signals
//! edge A B 1 1           # from to symbol weight
//! trans E E X BX BX 1    # up left symbol right down weight
//! ```
//!
//! Names must be declared before use. Diagnostics carry a 1-based line and
//! column.

use nalgebra::{DMatrix, DVector};

use crate::automaton::{SymbolKind, SymbolTable, WeightedAutomaton};
use crate::complex_fmt::{format_complex, parse_complex};
use crate::error::{Error, ParseErrorKind, Result};
use crate::grid2d::{SignalingAgent, Transition};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum Spec {
    Automaton(WeightedAutomaton),
    Agent(SignalingAgent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    State,
    Operator,
    Agent,
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

fn err(t: &Tok, kind: ParseErrorKind, message: impl Into<String>) -> Error {
    Error::Parse { line: t.line, column: t.col, kind, message: message.into() }
}

fn tokens(line: &str, lineno: usize) -> Vec<Tok<'_>> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (col, (byte, ch)) in body.char_indices().enumerate() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, col)),
            (true, Some((b, c))) => {
                out.push(Tok { text: &body[b..byte], line: lineno, col: c + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((b, c)) = start {
        out.push(Tok { text: &body[b..], line: lineno, col: c + 1 });
    }
    out
}

struct Parser {
    kind: Option<Kind>,
    dim: usize,
    dim_locked: bool,
    symbols: Option<SymbolTable>,
    names: Vec<String>,
    initial: Vec<(usize, C64)>,
    finals: Vec<(usize, C64)>,
    corner: Vec<usize>,
    edges: Vec<(usize, usize, usize, C64)>,
    trans: Vec<Transition>,
    last: Tok<'static>,
}

impl Parser {
    fn kind(&self, t: &Tok) -> Result<Kind> {
        self.kind.ok_or_else(|| err(t, ParseErrorKind::Syntax, "`kind:` must come first"))
    }

    fn table(&mut self) -> &mut SymbolTable {
        let kind = match self.kind {
            Some(Kind::State) => SymbolKind::State,
            _ => SymbolKind::Operator,
        };
        let dim = self.dim;
        self.dim_locked = true;
        self.symbols.get_or_insert_with(|| SymbolTable::new(kind, dim))
    }

    fn name(&self, t: &Tok) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == t.text)
            .ok_or_else(|| err(t, ParseErrorKind::UndefinedName, format!("`{}` is not declared", t.text)))
    }

    fn symbol(&self, t: &Tok) -> Result<usize> {
        let undefined = || err(t, ParseErrorKind::UndefinedName, format!("symbol `{}` is not defined", t.text));
        self.symbols.as_ref().ok_or_else(undefined)?.index_of(t.text).map_err(|_| undefined())
    }

    fn line(&mut self, toks: &[Tok]) -> Result<()> {
        let head = &toks[0];
        let args = &toks[1..];
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                let at = args.get(n).unwrap_or(head);
                return Err(err(at, ParseErrorKind::Syntax, format!("`{}` takes {n} arguments", head.text)));
            }
            Ok(())
        };
        let complex = |t: &Tok| {
            parse_complex(t.text)
                .ok_or_else(|| err(t, ParseErrorKind::Syntax, format!("`{}` is not a complex literal", t.text)))
        };
        match head.text {
            "kind:" => {
                arity(1)?;
                if self.kind.is_some() {
                    return Err(err(head, ParseErrorKind::DuplicateDefinition, "kind already given"));
                }
                self.kind = Some(match args[0].text {
                    "state" => Kind::State,
                    "operator" => Kind::Operator,
                    "agent" => Kind::Agent,
                    other => return Err(err(&args[0], ParseErrorKind::Syntax, format!("unknown kind `{other}`"))),
                });
            }
            "dim:" => {
                self.kind(head)?;
                arity(1)?;
                if self.dim_locked {
                    return Err(err(head, ParseErrorKind::Syntax, "`dim:` must precede symbol definitions"));
                }
                self.dim = args[0]
                    .text
                    .parse()
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| err(&args[0], ParseErrorKind::Syntax, "dimension must be a positive integer"))?;
                self.dim_locked = true;
            }
            "symbol" => {
                let kind = self.kind(head)?;
                if args.len() < 2 {
                    return Err(err(head, ParseErrorKind::Syntax, "`symbol <name> ket|matrix <values>`"));
                }
                let (name, form, values) = (&args[0], &args[1], &args[2..]);
                if self.symbols.as_ref().is_some_and(|s| s.index_of(name.text).is_ok()) {
                    return Err(err(name, ParseErrorKind::DuplicateDefinition, format!("symbol `{}`", name.text)));
                }
                let dim = self.dim;
                match (kind, form.text) {
                    (Kind::State, "ket") => {
                        if values.len() != dim {
                            let at = values.get(dim).unwrap_or(form);
                            return Err(err(at, ParseErrorKind::DimensionMismatch, format!("ket needs {dim} entries")));
                        }
                        let ket = values.iter().map(complex).collect::<Result<Vec<_>>>()?;
                        self.table().insert_ket(name.text, &ket).expect("checked");
                    }
                    (Kind::Operator | Kind::Agent, "matrix") => {
                        let rows: Vec<&[Tok]> = values.split(|t| t.text == ";").collect();
                        if rows.len() != dim {
                            return Err(err(form, ParseErrorKind::DimensionMismatch, format!("matrix needs {dim} rows")));
                        }
                        let mut m = DMatrix::zeros(dim, dim);
                        for (r, row) in rows.iter().enumerate() {
                            if row.len() != dim {
                                let at = row.get(dim).or(row.first()).unwrap_or(form);
                                return Err(err(at, ParseErrorKind::DimensionMismatch, format!("row {r} needs {dim} entries")));
                            }
                            for (c, t) in row.iter().enumerate() {
                                m[(r, c)] = complex(t)?;
                            }
                        }
                        self.table().insert_matrix(name.text, m).expect("checked");
                    }
                    _ => {
                        return Err(err(form, ParseErrorKind::Syntax, format!("`{}` symbols are not allowed here", form.text)));
                    }
                }
            }
            "state" | "signal" => {
                let kind = self.kind(head)?;
                arity(1)?;
                let want = if kind == Kind::Agent { "signal" } else { "state" };
                if head.text != want {
                    return Err(err(head, ParseErrorKind::Syntax, format!("use `{want}` in this kind of spec")));
                }
                if self.names.iter().any(|n| n == args[0].text) {
                    return Err(err(&args[0], ParseErrorKind::DuplicateDefinition, format!("`{}`", args[0].text)));
                }
                self.names.push(args[0].text.to_string());
            }
            "initial" | "final" | "corner" => {
                let kind = self.kind(head)?;
                if kind == Kind::Agent {
                    arity(1)?;
                    let s = self.name(&args[0])?;
                    match head.text {
                        "initial" if !self.initial.is_empty() => {
                            return Err(err(head, ParseErrorKind::DuplicateDefinition, "agents have one initial signal"));
                        }
                        "initial" => self.initial.push((s, C64::new(1.0, 0.0))),
                        "final" => self.finals.push((s, C64::new(1.0, 0.0))),
                        _ => self.corner.push(s),
                    }
                } else {
                    if head.text == "corner" {
                        return Err(err(head, ParseErrorKind::Syntax, "`corner` applies to agents only"));
                    }
                    arity(2)?;
                    let s = self.name(&args[0])?;
                    let w = complex(&args[1])?;
                    let list = if head.text == "initial" { &mut self.initial } else { &mut self.finals };
                    list.push((s, w));
                }
            }
            "edge" => {
                if self.kind(head)? == Kind::Agent {
                    return Err(err(head, ParseErrorKind::Syntax, "agents use `trans`"));
                }
                arity(4)?;
                let (from, to) = (self.name(&args[0])?, self.name(&args[1])?);
                let sym = self.symbol(&args[2])?;
                self.edges.push((from, to, sym, complex(&args[3])?));
            }
            "trans" => {
                if self.kind(head)? != Kind::Agent {
                    return Err(err(head, ParseErrorKind::Syntax, "automata use `edge`"));
                }
                arity(6)?;
                let (up, left) = (self.name(&args[0])?, self.name(&args[1])?);
                let symbol = self.symbol(&args[2])?;
                let (right, down) = (self.name(&args[3])?, self.name(&args[4])?);
                let weight = complex(&args[5])?;
                self.trans.push(Transition { up, left, symbol, right, down, weight });
            }
            other => return Err(err(head, ParseErrorKind::Syntax, format!("unknown directive `{other}`"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<Spec> {
        let at = self.last;
        let kind = self.kind(&at)?;
        let fail = |e: Error| err(&at, ParseErrorKind::Syntax, e.to_string());
        let symbols = self.symbols.unwrap_or_else(|| {
            SymbolTable::new(if kind == Kind::State { SymbolKind::State } else { SymbolKind::Operator }, self.dim)
        });
        if kind == Kind::Agent {
            let initial = self.initial.first().ok_or_else(|| err(&at, ParseErrorKind::Syntax, "no initial signal"))?.0;
            let finals = self.finals.iter().map(|f| f.0).collect();
            let corner = (!self.corner.is_empty()).then_some(self.corner);
            return SignalingAgent::new(self.names, self.trans, symbols, initial, finals, corner)
                .map(Spec::Agent)
                .map_err(fail);
        }
        let q = self.names.len();
        let mut weights = vec![DMatrix::<C64>::zeros(q, q); symbols.len()];
        for (from, to, sym, w) in self.edges {
            weights[sym][(from, to)] += w;
        }
        let mut alpha = DVector::zeros(q);
        for (s, w) in self.initial {
            alpha[s] += w;
        }
        let mut omega = DVector::zeros(q);
        for (s, w) in self.finals {
            omega[s] += w;
        }
        WeightedAutomaton::new(self.names, weights, alpha, omega, symbols).map(Spec::Automaton).map_err(fail)
    }
}

/// Parses an automaton or agent spec.
pub fn parse_spec(text: &str) -> Result<Spec> {
    let mut p = Parser {
        kind: None,
        dim: 2,
        dim_locked: false,
        symbols: None,
        names: Vec::new(),
        initial: Vec::new(),
        finals: Vec::new(),
        corner: Vec::new(),
        edges: Vec::new(),
        trans: Vec::new(),
        last: Tok { text: "", line: 1, col: 1 },
    };
    for (k, line) in text.lines().enumerate() {
        let toks = tokens(line, k + 1);
        if toks.is_empty() {
            continue;
        }
        p.line(&toks)?;
        p.last = Tok { text: "", line: k + 1, col: 1 };
    }
    p.finish()
}

fn symbol_lines(t: &SymbolTable, out: &mut String) {
    out.push_str(&format!("dim: {}\n", t.dim()));
    for (k, name) in t.names().iter().enumerate() {
        let m = t.value(k);
        let body = match t.kind() {
            SymbolKind::State => {
                format!("ket {}", m.column(0).iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(" "))
            }
            SymbolKind::Operator => {
                let rows: Vec<String> = m
                    .row_iter()
                    .map(|r| r.iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(" "))
                    .collect();
                format!("matrix {}", rows.join(" ; "))
            }
        };
        out.push_str(&format!("symbol {name} {body}\n"));
    }
}

/// Spec text that [`parse_spec`] reads back to an equal automaton.
pub fn automaton_to_spec(a: &WeightedAutomaton) -> String {
    let kind = match a.symbols().kind() {
        SymbolKind::State => "state",
        SymbolKind::Operator => "operator",
    };
    let mut out = format!("kind: {kind}\n");
    symbol_lines(a.symbols(), &mut out);
    let zero = C64::new(0.0, 0.0);
    for s in a.states() {
        out.push_str(&format!("state {s}\n"));
    }
    for (k, s) in a.states().iter().enumerate() {
        if a.initial()[k] != zero {
            out.push_str(&format!("initial {s} {}\n", format_complex(a.initial()[k])));
        }
    }
    for (k, s) in a.states().iter().enumerate() {
        if a.accept()[k] != zero {
            out.push_str(&format!("final {s} {}\n", format_complex(a.accept()[k])));
        }
    }
    let st = a.states();
    for (sym, name) in a.alphabet().iter().enumerate() {
        let w = a.weight(sym);
        for p in 0..st.len() {
            for q in 0..st.len() {
                if w[(p, q)] != zero {
                    out.push_str(&format!("edge {} {} {name} {}\n", st[p], st[q], format_complex(w[(p, q)])));
                }
            }
        }
    }
    out
}

/// Spec text that [`parse_spec`] reads back to an equal agent.
pub fn agent_to_spec(a: &SignalingAgent) -> String {
    let mut out = String::from("kind: agent\n");
    symbol_lines(a.symbols(), &mut out);
    let sig = a.signals();
    for s in sig {
        out.push_str(&format!("signal {s}\n"));
    }
    out.push_str(&format!("initial {}\n", sig[a.initial()]));
    for &f in a.finals() {
        out.push_str(&format!("final {}\n", sig[f]));
    }
    if a.corner() != a.finals() {
        for &c in a.corner() {
            out.push_str(&format!("corner {}\n", sig[c]));
        }
    }
    let names = a.symbols().names();
    for t in a.transitions() {
        out.push_str(&format!(
            "trans {} {} {} {} {} {}\n",
            sig[t.up],
            sig[t.left],
            names[t.symbol],
            sig[t.right],
            sig[t.down],
            format_complex(t.weight)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::grid2d::four_x_agent;
    use crate::oracle::enumerate_words;

    const W: &str = "\
kind: state
symbol 0 ket 1 0
symbol 1 ket 0 1
state A
state B
initial A 1
final B 1
edge A A 0 1
edge A B 1 1
edge B B 0 1
";

    fn parse_error(text: &str) -> (usize, usize, ParseErrorKind) {
        match parse_spec(text) {
            Err(Error::Parse { line, column, kind, .. }) => (line, column, kind),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn w_spec_evaluates() {
        let Spec::Automaton(a) = parse_spec(W).unwrap() else { panic!("agent") };
        assert_eq!(a.evaluate_str("0100").unwrap(), C64::new(1.0, 0.0));
        assert_eq!(a.evaluate_str("0110").unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn diagnostics_locate_the_problem() {
        let text = W.replace("symbol 1 ket 0 1\n", "");
        assert_eq!(parse_error(&text), (8, 10, ParseErrorKind::UndefinedName));
        assert_eq!(parse_error("kind: state\nstate A\nstate A\n"), (3, 7, ParseErrorKind::DuplicateDefinition));
        assert_eq!(parse_error("kind: state\nsymbol 0 ket 1 0 0\n"), (2, 18, ParseErrorKind::DimensionMismatch));
        assert_eq!(parse_error("state A\n"), (1, 1, ParseErrorKind::Syntax));
        assert_eq!(parse_error("kind: operator\nsymbol X matrix 0 1 ; 1\n"), (2, 23, ParseErrorKind::DimensionMismatch));
        assert_eq!(parse_error("kind: state\n  bogus\n"), (2, 3, ParseErrorKind::Syntax));
        assert_eq!(parse_error("kind: state\nstate A\ninitial A 1+\n"), (3, 11, ParseErrorKind::Syntax));
        assert_eq!(parse_error("kind: state\nstate A\nedge A B 0 1\n").2, ParseErrorKind::UndefinedName);
    }

    #[test]
    fn four_x_spec_matches_builtin() {
        let text = agent_to_spec(&four_x_agent());
        assert!(text.contains("corner Interior"));
        let Spec::Agent(a) = parse_spec(&text).unwrap() else { panic!("automaton") };
        assert_eq!(a, four_x_agent());
    }

    #[test]
    fn corpus_round_trips() {
        for (_, a) in corpus::standard() {
            let text = automaton_to_spec(&a);
            let Spec::Automaton(b) = parse_spec(&text).unwrap() else { panic!("agent") };
            for n in 1..=6 {
                assert_eq!(enumerate_words(&a, n).unwrap(), enumerate_words(&b, n).unwrap(), "{text}");
            }
        }
    }

    #[test]
    fn comments_and_dim() {
        let text = "# qutrit\nkind: state # trailing\ndim: 3\nsymbol a ket 1 0 0\nstate S\ninitial S 2-1i\nfinal S 1\nedge S S a 1\n";
        let Spec::Automaton(a) = parse_spec(text).unwrap() else { panic!("agent") };
        assert_eq!(a.symbols().dim(), 3);
        assert_eq!(a.evaluate_str("aa").unwrap(), C64::new(2.0, -1.0));
        assert_eq!(parse_error("kind: state\nsymbol a ket 1 0\ndim: 3\n").2, ParseErrorKind::Syntax);
    }
}
