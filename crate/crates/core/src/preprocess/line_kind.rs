//! Error-checking / error-handling line classification.
//!
//! A single-branch `if` whose body ends in `return <non-zero>` or `goto`
//! marks its header lines as [`LineKind::ErrorChecking`] and its body lines
//! as [`LineKind::ErrorHandling`]. Statements following a label, up to the
//! first `return`/`goto` at the same level (or the end of the block), are
//! error handling when that final statement is such an exit. Everything else
//! is [`LineKind::Normal`]. Input is expected to be comment- and
//! string-stripped; unbalanced text (as found in diff hunks) degrades
//! gracefully.

use super::lexer::{lex, Token, TokenKind};
use crate::types::LineKind;

#[derive(Debug)]
enum Kind {
    Return { nonzero: bool },
    Goto,
    Label,
    Block(Vec<Stmt>),
    Other,
}

#[derive(Debug)]
struct Stmt {
    first_line: usize,
    last_line: usize,
    kind: Kind,
}

impl Stmt {
    fn ends_in_exit(&self) -> bool {
        match &self.kind {
            Kind::Return { nonzero } => *nonzero,
            Kind::Goto => true,
            Kind::Block(items) => items.last().is_some_and(Stmt::ends_in_exit),
            _ => false,
        }
    }

    fn is_exit_kind(&self) -> bool {
        matches!(self.kind, Kind::Return { .. } | Kind::Goto)
    }
}

struct Parser<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
    kinds: Vec<LineKind>,
}

fn rank(k: LineKind) -> u8 {
    match k {
        LineKind::Normal => 0,
        LineKind::ErrorHandling => 1,
        LineKind::ErrorChecking => 2,
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.toks.get(self.pos)
    }

    fn peek_text(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.text)
    }

    fn mark(&mut self, from: usize, to: usize, kind: LineKind) {
        for line in from..=to {
            if let Some(slot) = self.kinds.get_mut(line - 1) {
                if rank(kind) > rank(*slot) {
                    *slot = kind;
                }
            }
        }
    }

    fn last_line(&self) -> usize {
        self.toks[self.pos.saturating_sub(1).min(self.toks.len() - 1)].line
    }

    /// Skips a balanced group starting at an opening token; stops at EOF.
    fn skip_group(&mut self, open: &str, close: &str) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            let text = t.text;
            self.pos += 1;
            if text == open {
                depth += 1;
            } else if text == close {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return;
                }
            }
        }
    }

    /// Consumes tokens up to and including the next `;` outside brackets.
    fn skip_to_semicolon(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t.text {
                "(" | "[" => depth += 1,
                ")" | "]" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => {
                    self.pos += 1;
                    return;
                }
                "{" | "}" if depth == 0 => return,
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn block_items(&mut self) -> Vec<Stmt> {
        let mut items = Vec::new();
        while let Some(t) = self.peek() {
            if t.text == "}" {
                break;
            }
            items.push(self.statement(false));
        }
        self.apply_label_rule(&items);
        items
    }

    fn apply_label_rule(&mut self, items: &[Stmt]) {
        for (i, s) in items.iter().enumerate() {
            if !matches!(s.kind, Kind::Label) || i + 1 == items.len() {
                continue;
            }
            let end = items[i + 1..]
                .iter()
                .position(Stmt::is_exit_kind)
                .map_or(items.len() - 1, |p| i + 1 + p);
            if items[end].ends_in_exit() {
                self.mark(s.first_line, items[end].last_line, LineKind::ErrorHandling);
            }
        }
    }

    fn stmt(&self, first_line: usize, kind: Kind) -> Stmt {
        Stmt {
            first_line,
            last_line: self.last_line().max(first_line),
            kind,
        }
    }

    fn statement(&mut self, after_else: bool) -> Stmt {
        let tok = self.toks[self.pos].clone();
        let first = tok.line;
        match tok.text {
            "{" => {
                self.pos += 1;
                let items = self.block_items();
                if self.peek_text() == Some("}") {
                    self.pos += 1;
                }
                self.stmt(first, Kind::Block(items))
            }
            "}" => {
                // stray close brace from a partial hunk
                self.pos += 1;
                self.stmt(first, Kind::Other)
            }
            "#" => {
                let mut line = tok.line;
                while let Some(t) = self.peek().cloned() {
                    if t.line != line {
                        break;
                    }
                    self.pos += 1;
                    if t.text == "\\" {
                        line += 1;
                    }
                }
                self.stmt(first, Kind::Other)
            }
            "if" => self.if_statement(after_else),
            "else" => {
                self.pos += 1;
                if self.peek().is_some() {
                    self.statement(true);
                }
                self.stmt(first, Kind::Other)
            }
            "for" | "while" | "switch" => {
                self.pos += 1;
                if self.peek_text() == Some("(") {
                    self.skip_group("(", ")");
                }
                if self.peek().is_some_and(|t| t.text != "}") {
                    self.statement(false);
                }
                self.stmt(first, Kind::Other)
            }
            "do" => {
                self.pos += 1;
                if self.peek().is_some_and(|t| t.text != "}") {
                    self.statement(false);
                }
                if self.peek_text() == Some("while") {
                    self.skip_to_semicolon();
                }
                self.stmt(first, Kind::Other)
            }
            "return" => {
                self.pos += 1;
                let start = self.pos;
                self.skip_to_semicolon();
                let mut end = self.pos;
                if end > start && self.toks[end - 1].text == ";" {
                    end -= 1;
                }
                let nonzero = returns_nonzero(&self.toks[start..end]);
                self.stmt(first, Kind::Return { nonzero })
            }
            "goto" => {
                self.pos += 1;
                self.skip_to_semicolon();
                self.stmt(first, Kind::Goto)
            }
            "case" | "default" => {
                while let Some(t) = self.peek().cloned() {
                    self.pos += 1;
                    if t.text == ":" {
                        break;
                    }
                }
                self.stmt(first, Kind::Other)
            }
            _ if tok.kind == TokenKind::Ident
                && !super::lexer::is_keyword(tok.text)
                && self.toks.get(self.pos + 1).is_some_and(|t| t.text == ":")
                && self.toks.get(self.pos + 2).is_none_or(|t| t.text != ":") =>
            {
                self.pos += 2;
                self.stmt(first, Kind::Label)
            }
            _ => self.simple_statement(),
        }
    }

    fn if_statement(&mut self, after_else: bool) -> Stmt {
        let if_tok = self.toks[self.pos].clone();
        self.pos += 1;
        if self.peek_text() != Some("(") {
            return self.stmt(if_tok.line, Kind::Other);
        }
        self.skip_group("(", ")");
        let header_end = self.last_line();
        if self.peek().is_none_or(|t| t.text == "}") {
            return self.stmt(if_tok.line, Kind::Other);
        }
        let body = self.statement(false);
        let has_else = self.peek_text() == Some("else");
        if has_else {
            self.pos += 1;
            if self.peek().is_some() {
                self.statement(true);
            }
        }
        if !has_else && !after_else && body.ends_in_exit() {
            self.mark(body.first_line, body.last_line, LineKind::ErrorHandling);
            self.mark(if_tok.line, header_end, LineKind::ErrorChecking);
        }
        self.stmt(if_tok.line, Kind::Other)
    }

    fn simple_statement(&mut self) -> Stmt {
        let first = self.toks[self.pos].line;
        let start = self.pos;
        let mut depth = 0usize;
        let mut saw_assign = false;
        while let Some(t) = self.peek().cloned() {
            match t.text {
                "(" | "[" => depth += 1,
                ")" | "]" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => {
                    self.pos += 1;
                    break;
                }
                "}" if depth == 0 => break,
                "=" if depth == 0 => saw_assign = true,
                "{" if depth == 0 => {
                    let prev = self.pos.checked_sub(1).map(|p| self.toks[p].text);
                    if prev == Some(")") && !saw_assign {
                        // function body or statement-like macro loop
                        self.pos += 1;
                        self.block_items();
                        if self.peek_text() == Some("}") {
                            self.pos += 1;
                        }
                        break;
                    }
                    self.skip_group("{", "}");
                    continue;
                }
                "if" | "return" | "goto" | "for" | "while" | "switch" | "do" | "else"
                    if depth == 0 && self.pos > start =>
                {
                    // a macro invocation without a trailing semicolon
                    let prev = &self.toks[self.pos - 1];
                    if prev.line < t.line && prev.text == ")" {
                        break;
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        if self.pos == start {
            self.pos += 1;
        }
        self.stmt(first, Kind::Other)
    }
}

fn returns_nonzero(expr: &[Token<'_>]) -> bool {
    let mut e = expr;
    while e.len() >= 2 && e[0].text == "(" && e[e.len() - 1].text == ")" {
        e = &e[1..e.len() - 1];
    }
    match e {
        [] => false,
        [t] => t.text != "0",
        _ => true,
    }
}

/// Classifies every line of `file_text` (1-based line `i` at index `i - 1`).
pub fn classify_line_kinds(file_text: &str) -> Vec<LineKind> {
    let n_lines = file_text.split('\n').count();
    let toks = lex(file_text);
    let mut p = Parser {
        toks,
        pos: 0,
        kinds: vec![LineKind::Normal; n_lines],
    };
    let mut top = Vec::new();
    while p.pos < p.toks.len() {
        if p.toks[p.pos].text == "}" {
            p.apply_label_rule(&top);
            top.clear();
            p.pos += 1;
            continue;
        }
        let s = p.statement(false);
        top.push(s);
    }
    p.apply_label_rule(&top);
    p.kinds
}
