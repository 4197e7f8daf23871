//! Line-oriented model language.
//!
//! ```text
//! model sat timeunit minutes
//! unit Regulator {
//!   state self modes(failed) prior 0.001 necessity 0.9
//!   in i
//!   out o
//!   link in=i out=o cause=self alpha(p=0.99,n=0.95) delay=[1,5]
//! }
//! instance reg : Regulator
//! connect ovt.elec -> reg.i
//! observe reg.o
//! ```
//!
//! Statements end at a newline or `;`; `#` starts a comment. A link without
//! `in=` is a fault source. `alpha(...)` defaults to a certain event and
//! delays default to `[0,0]`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::calculi::Belief;
use crate::model::{
    Behaviour, Connection, InstanceDef, Join2Spec, LinkSpec, ModelDef, Observable, PortDef, QualifiedName, StateVarDef,
    TemplateSpec, UnitDef, BINARY_DOMAIN,
};
use crate::temporal::Delay;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Sym(char),
    Arrow,
    Sep,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let src = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = src.chars().collect();
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k];
            if c.is_whitespace() {
                k += 1;
            } else if c.is_ascii_alphabetic() || c == '_' || (c == '+' && chars.get(k + 1) == Some(&'i')) {
                let start = k;
                k += 1;
                while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_' || chars[k] == '.') {
                    k += 1;
                }
                out.push((Tok::Word(chars[start..k].iter().collect()), line));
            } else if c.is_ascii_digit() || (c == '-' && chars.get(k + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) || c == '.' {
                let start = k;
                k += 1;
                while k < chars.len() && (chars[k].is_ascii_digit() || matches!(chars[k], '.' | 'e' | 'E') || (matches!(chars[k], '-' | '+') && matches!(chars[k - 1], 'e' | 'E'))) {
                    k += 1;
                }
                let s: String = chars[start..k].iter().collect();
                let v = s.parse().map_err(|_| ParseError { line, message: format!("bad number `{s}`") })?;
                out.push((Tok::Num(v), line));
            } else if c == '-' && chars.get(k + 1) == Some(&'>') {
                out.push((Tok::Arrow, line));
                k += 2;
            } else if c == ';' {
                out.push((Tok::Sep, line));
                k += 1;
            } else if "{}()[],=:".contains(c) {
                out.push((Tok::Sym(c), line));
                k += 1;
            } else {
                return Err(ParseError { line, message: format!("unexpected character `{c}`") });
            }
        }
        out.push((Tok::Sep, line));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn at_end_of_statement(&self) -> bool {
        matches!(self.peek(), None | Some(Tok::Sep) | Some(Tok::Sym('}')))
    }

    fn skip_seps(&mut self) {
        while self.peek() == Some(&Tok::Sep) {
            self.pos += 1;
        }
    }

    fn end_statement(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None | Some(Tok::Sym('}')) => Ok(()),
            Some(Tok::Sep) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let t = t.clone();
                self.err(format!("unexpected {} at end of statement", describe(&t)))
            }
        }
    }

    fn word(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Word(w)) => Ok(w),
            other => {
                self.pos -= 1;
                self.err(format!("expected {what}, found {}", other.as_ref().map_or("end of input".into(), describe)))
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let w = self.word(what)?;
        if w.contains('.') {
            self.pos -= 1;
            return self.err(format!("expected {what}, found qualified name `{w}`"));
        }
        Ok(w)
    }

    fn qualified(&mut self, what: &str) -> Result<QualifiedName, ParseError> {
        let w = self.word(what)?;
        w.parse().map_err(|_| ParseError { line: self.line(), message: format!("`{w}` is not of the form instance.port") })
    }

    fn sym(&mut self, c: char) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            other => {
                self.pos -= 1;
                self.err(format!("expected `{c}`, found {}", other.as_ref().map_or("end of input".into(), describe)))
            }
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(v),
            other => {
                self.pos -= 1;
                self.err(format!("expected {what}, found {}", other.as_ref().map_or("end of input".into(), describe)))
            }
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.sym('(')?;
        let mut out = vec![self.ident("name")?];
        while self.eat_sym(',') {
            out.push(self.ident("name")?);
        }
        self.sym(')')?;
        Ok(out)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let v = self.number("integer tick")?;
        if v.fract() != 0.0 || v.abs() > 1e15 {
            return self.err(format!("delay bound `{v}` is not an integer tick count"));
        }
        Ok(v as i64)
    }

    fn delay(&mut self) -> Result<Delay, ParseError> {
        self.sym('[')?;
        let min = self.integer()?;
        self.sym(',')?;
        let max = match self.peek() {
            Some(Tok::Word(w)) if w == "inf" || w == "+inf" => {
                self.pos += 1;
                None
            }
            _ => Some(self.integer()?),
        };
        self.sym(']')?;
        Delay::new(min, max).map_err(|e| ParseError { line: self.line(), message: e.to_string() })
    }

    fn belief(&mut self) -> Result<Belief, ParseError> {
        self.sym('(')?;
        let mut b = Belief::default();
        loop {
            let key = self.ident("belief key (p, n or pi)")?;
            self.sym('=')?;
            let v = self.number("degree")?;
            let slot = match key.as_str() {
                "p" => &mut b.probability,
                "n" => &mut b.necessity,
                "pi" => &mut b.possibility,
                other => return self.err(format!("unknown belief key `{other}`")),
            };
            if slot.replace(v).is_some() {
                return self.err(format!("belief key `{key}` given twice"));
            }
            if !self.eat_sym(',') {
                break;
            }
        }
        self.sym(')')?;
        Ok(b)
    }

    fn state(&mut self, line: usize) -> Result<StateVarDef, ParseError> {
        let name = self.ident("state name")?;
        let w = self.ident("`modes`")?;
        if w != "modes" {
            return self.err(format!("expected `modes(...)` after state name, found `{w}`"));
        }
        let fault_modes = self.ident_list()?;
        let mut belief = Belief::default();
        let mut environmental = false;
        while !self.at_end_of_statement() {
            let key = self.ident("state attribute")?;
            match key.as_str() {
                "prior" => belief.probability = Some(self.number("prior")?),
                "necessity" => belief.necessity = Some(self.number("necessity")?),
                "possibility" => belief.possibility = Some(self.number("possibility")?),
                "env" => environmental = true,
                other => return self.err(format!("unknown state attribute `{other}`")),
            }
        }
        Ok(StateVarDef { name, fault_modes, belief, environmental, line })
    }

    fn port(&mut self, line: usize) -> Result<PortDef, ParseError> {
        let name = self.ident("port name")?;
        let mut domain: Vec<String> = BINARY_DOMAIN.iter().map(|s| s.to_string()).collect();
        if !self.at_end_of_statement() {
            let w = self.ident("`domain`")?;
            if w != "domain" {
                return self.err(format!("unexpected `{w}` after port name"));
            }
            domain = self.ident_list()?;
        }
        Ok(PortDef { name, domain, line })
    }

    fn template(&mut self, join: bool) -> Result<TemplateSpec, ParseError> {
        let mut words: Vec<(String, String, usize)> = Vec::new();
        let mut delays: Vec<(String, Delay)> = Vec::new();
        let mut beliefs: Vec<(String, Belief)> = Vec::new();
        while !self.at_end_of_statement() {
            let key = self.ident("template field")?;
            let seen = words.iter().any(|w| w.0 == key) || delays.iter().any(|d| d.0 == key) || beliefs.iter().any(|b| b.0 == key);
            if seen {
                return self.err(format!("field `{key}` given twice"));
            }
            match key.as_str() {
                "alpha" | "beta" | "psi" | "sigma" => {
                    let b = self.belief()?;
                    beliefs.push((key, b));
                }
                "delay" | "fault_delay" | "delay1" | "delay2" | "delay_joint" => {
                    self.sym('=')?;
                    let d = self.delay()?;
                    delays.push((key, d));
                }
                "in" | "out" | "cause" | "in1" | "in2" => {
                    self.sym('=')?;
                    let line = self.line();
                    let v = self.ident("port or state name")?;
                    words.push((key, v, line));
                }
                other => return self.err(format!("unknown template field `{other}`")),
            }
        }
        let allowed: &[&str] = if join {
            &["in1", "in2", "out", "alpha", "beta", "psi", "sigma", "delay1", "delay2", "delay_joint"]
        } else {
            &["in", "out", "cause", "alpha", "delay", "fault_delay"]
        };
        let kind = if join { "join2" } else { "link" };
        for k in words.iter().map(|w| &w.0).chain(delays.iter().map(|d| &d.0)).chain(beliefs.iter().map(|b| &b.0)) {
            if !allowed.contains(&k.as_str()) {
                return self.err(format!("`{k}` is not a {kind} field"));
            }
        }
        let word = |k: &str| words.iter().find(|w| w.0 == k).map(|w| w.1.clone());
        let delay = |k: &str| delays.iter().find(|d| d.0 == k).map_or(Delay::ZERO, |d| d.1);
        let belief = |k: &str| beliefs.iter().find(|b| b.0 == k).map(|b| b.1);
        let required = |k: &str| word(k).ok_or_else(|| ParseError { line: self.line(), message: format!("{kind} needs `{k}=`") });
        Ok(if join {
            TemplateSpec::Join2(Join2Spec {
                in1: required("in1")?,
                in2: required("in2")?,
                output: required("out")?,
                alpha: belief("alpha").unwrap_or_else(Belief::certain),
                beta: belief("beta").unwrap_or_else(Belief::certain),
                psi: belief("psi"),
                sigma: belief("sigma"),
                delay1: delay("delay1"),
                delay2: delay("delay2"),
                delay_joint: delay("delay_joint"),
            })
        } else {
            TemplateSpec::Link(LinkSpec {
                input: word("in"),
                output: required("out")?,
                cause: required("cause")?,
                alpha: belief("alpha").unwrap_or_else(Belief::certain),
                delay: delay("delay"),
                fault_delay: delay("fault_delay"),
            })
        })
    }

    fn unit(&mut self, line: usize) -> Result<UnitDef, ParseError> {
        let name = self.ident("unit name")?;
        self.skip_seps();
        self.sym('{')?;
        let mut unit = UnitDef { name, line, ..Default::default() };
        loop {
            self.skip_seps();
            if self.eat_sym('}') {
                return Ok(unit);
            }
            if self.peek().is_none() {
                return Err(ParseError { line, message: format!("unit `{}` is not closed", unit.name) });
            }
            let line = self.line();
            let kw = self.ident("unit item")?;
            match kw.as_str() {
                "state" => unit.states.push(self.state(line)?),
                "in" => unit.in_ports.push(self.port(line)?),
                "out" => unit.out_ports.push(self.port(line)?),
                "link" => unit.behaviours.push(Behaviour { template: self.template(false)?, line }),
                "join2" => unit.behaviours.push(Behaviour { template: self.template(true)?, line }),
                other => return self.err(format!("unknown unit item `{other}`")),
            }
            self.end_statement()?;
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Num(v) => format!("`{v}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Arrow => "`->`".into(),
        Tok::Sep => "end of statement".into(),
    }
}

/// Parses a model. `default_time_unit` applies when the header omits
/// `timeunit`.
pub fn parse_model(text: &str, default_time_unit: Option<&str>) -> Result<ModelDef, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut def = ModelDef::default();
    let mut header = false;
    loop {
        p.skip_seps();
        let Some(tok) = p.peek().cloned() else { break };
        let line = p.line();
        let Tok::Word(kw) = tok else {
            return p.err(format!("expected a statement, found {}", describe(&tok)));
        };
        p.pos += 1;
        match kw.as_str() {
            "model" => {
                if header {
                    return p.err("duplicate `model` header");
                }
                header = true;
                def.name = p.ident("model name")?;
                if !p.at_end_of_statement() {
                    let w = p.ident("`timeunit`")?;
                    if w != "timeunit" {
                        return p.err(format!("expected `timeunit`, found `{w}`"));
                    }
                    def.time_unit = p.ident("time unit")?;
                }
            }
            "unit" => {
                let u = p.unit(line)?;
                def.units.push(u);
            }
            "instance" => {
                let name = p.ident("instance name")?;
                p.sym(':')?;
                let unit = p.ident("unit name")?;
                def.instances.push(InstanceDef { name, unit, line });
            }
            "connect" => {
                let from = p.qualified("source port")?;
                match p.next() {
                    Some(Tok::Arrow) => {}
                    _ => {
                        p.pos -= 1;
                        return p.err("expected `->`");
                    }
                }
                let to = p.qualified("destination port")?;
                def.connections.push(Connection { from, to, line });
            }
            "observe" => loop {
                let port = p.qualified("observable port")?;
                def.observables.push(Observable { port, line });
                if !p.eat_sym(',') {
                    break;
                }
            },
            other => return Err(ParseError { line, message: format!("unknown statement `{other}`") }),
        }
        p.end_statement()?;
    }
    if !header {
        return Err(ParseError { line: 1, message: "missing `model <name>` header".into() });
    }
    if def.time_unit.is_empty() {
        def.time_unit = default_time_unit.unwrap_or("tick").to_string();
    }
    Ok(def)
}

fn fmt_belief(b: &Belief) -> String {
    let mut parts = Vec::new();
    if let Some(p) = b.probability {
        parts.push(format!("p={p}"));
    }
    if let Some(n) = b.necessity {
        parts.push(format!("n={n}"));
    }
    if let Some(pi) = b.possibility {
        parts.push(format!("pi={pi}"));
    }
    format!("({})", parts.join(","))
}

fn fmt_delay(d: &Delay) -> String {
    match d.max {
        Some(m) => format!("[{},{m}]", d.min),
        None => format!("[{},inf]", d.min),
    }
}

fn fmt_port(kw: &str, p: &PortDef) -> String {
    if p.is_binary() && p.domain.len() == 2 && p.domain[0] == BINARY_DOMAIN[0] {
        format!("  {kw} {}", p.name)
    } else {
        format!("  {kw} {} domain({})", p.name, p.domain.join(","))
    }
}

/// Canonical text of a model; parsing it gives back the same definition
/// up to line numbers.
pub fn write_model(def: &ModelDef) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {} timeunit {}", def.name, def.time_unit);
    for u in &def.units {
        let _ = writeln!(s, "\nunit {} {{", u.name);
        for st in &u.states {
            let mut line = format!("  state {} modes({})", st.name, st.fault_modes.join(","));
            if let Some(p) = st.belief.probability {
                let _ = write!(line, " prior {p}");
            }
            if let Some(n) = st.belief.necessity {
                let _ = write!(line, " necessity {n}");
            }
            if let Some(pi) = st.belief.possibility {
                let _ = write!(line, " possibility {pi}");
            }
            if st.environmental {
                line.push_str(" env");
            }
            let _ = writeln!(s, "{line}");
        }
        for p in &u.in_ports {
            let _ = writeln!(s, "{}", fmt_port("in", p));
        }
        for p in &u.out_ports {
            let _ = writeln!(s, "{}", fmt_port("out", p));
        }
        for b in &u.behaviours {
            match &b.template {
                TemplateSpec::Link(l) => {
                    let mut line = String::from("  link");
                    if let Some(i) = &l.input {
                        let _ = write!(line, " in={i}");
                    }
                    let _ = write!(
                        line,
                        " out={} cause={} alpha{} delay={} fault_delay={}",
                        l.output,
                        l.cause,
                        fmt_belief(&l.alpha),
                        fmt_delay(&l.delay),
                        fmt_delay(&l.fault_delay)
                    );
                    let _ = writeln!(s, "{line}");
                }
                TemplateSpec::Join2(j) => {
                    let mut line = format!("  join2 in1={} in2={} out={} alpha{} beta{}", j.in1, j.in2, j.output, fmt_belief(&j.alpha), fmt_belief(&j.beta));
                    if let Some(b) = &j.psi {
                        let _ = write!(line, " psi{}", fmt_belief(b));
                    }
                    if let Some(b) = &j.sigma {
                        let _ = write!(line, " sigma{}", fmt_belief(b));
                    }
                    let _ = write!(line, " delay1={} delay2={} delay_joint={}", fmt_delay(&j.delay1), fmt_delay(&j.delay2), fmt_delay(&j.delay_joint));
                    let _ = writeln!(s, "{line}");
                }
            }
        }
        s.push_str("}\n");
    }
    if !def.instances.is_empty() {
        s.push('\n');
    }
    for i in &def.instances {
        let _ = writeln!(s, "instance {} : {}", i.name, i.unit);
    }
    if !def.connections.is_empty() {
        s.push('\n');
    }
    for c in &def.connections {
        let _ = writeln!(s, "connect {} -> {}", c.from, c.to);
    }
    if !def.observables.is_empty() {
        s.push('\n');
    }
    for o in &def.observables {
        let _ = writeln!(s, "observe {}", o.port);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
model m timeunit minutes   # header
unit Src {
  state self modes(failed) prior 0.01 necessity 0.5 env
  out o
  link out=o cause=self
}
unit L { state self modes(a, b) prior 0.001; in i; out o domain(normal,abnormal)
  link in=i out=o cause=self alpha(p=0.9,n=0.8,pi=1) delay=[2,inf] }
instance s : Src
instance l : L
connect s.o -> l.i
observe l.o, s.o
";

    #[test]
    fn parses_the_small_model() {
        let def = parse_model(SMALL, None).unwrap();
        assert_eq!(def.time_unit, "minutes");
        assert_eq!(def.units.len(), 2);
        assert_eq!(def.units[1].states[0].fault_modes, ["a", "b"]);
        assert!(def.units[0].states[0].environmental);
        let TemplateSpec::Link(l) = &def.units[1].behaviours[0].template else { panic!() };
        assert_eq!(l.delay, Delay::new(2, None).unwrap());
        assert_eq!(l.alpha.possibility, Some(1.0));
        assert_eq!(def.observables.len(), 2);
        assert_eq!(def.connections[0].line, 12);
    }

    #[test]
    fn writer_round_trips() {
        let def = parse_model(SMALL, None).unwrap();
        let text = write_model(&def);
        let again = parse_model(&text, None).unwrap();
        assert_eq!(write_model(&again), text);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse_model("model m\nunit U {\n  state s prior 0.1\n}\n", None).unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_model("model m\nconnect a.b c.d\n", None).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_model("unit U {}", None).is_err());
        let e = parse_model("model m\nunit U {\n link out=o cause=s bogus=[0,1]\n}", None).unwrap_err();
        assert!(e.message.contains("bogus"));
        assert_eq!(parse_model("model m", Some("hours")).unwrap().time_unit, "hours");
    }
}
