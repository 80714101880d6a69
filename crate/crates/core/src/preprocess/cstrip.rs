//! Removes comments and string/char literal contents from C source while
//! keeping every newline in place, so line numbers remain valid.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripWarning {
    /// A `/*` comment ran to end of input.
    UnterminatedComment { line: usize },
    /// A string or char literal reached an unescaped newline or end of input.
    UnterminatedLiteral { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    pub warnings: Vec<StripWarning>,
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Code,
    LineComment,
    BlockComment { start_line: usize },
    Literal { quote: char, start_line: usize },
}

pub fn strip_comments_strings(src: &str) -> Stripped {
    let mut out = String::with_capacity(src.len());
    let mut warnings = Vec::new();
    let mut state = State::Code;
    let mut line = 1;
    let mut chars = src.chars().peekable();

    while let Some(c) = chars.next() {
        match state {
            State::Code => match c {
                '/' if chars.peek() == Some(&'*') => {
                    chars.next();
                    out.push(' ');
                    state = State::BlockComment { start_line: line };
                }
                '/' if chars.peek() == Some(&'/') => {
                    chars.next();
                    out.push(' ');
                    state = State::LineComment;
                }
                '"' | '\'' => {
                    out.push(c);
                    state = State::Literal {
                        quote: c,
                        start_line: line,
                    };
                }
                _ => out.push(c),
            },
            State::LineComment => match c {
                '\n' => {
                    out.push('\n');
                    state = State::Code;
                }
                // a line-continuation keeps the comment going
                '\\' if chars.peek() == Some(&'\n') => {
                    chars.next();
                    out.push('\n');
                    line += 1;
                }
                _ => {}
            },
            State::BlockComment { .. } => {
                if c == '*' && chars.peek() == Some(&'/') {
                    chars.next();
                    state = State::Code;
                } else if c == '\n' {
                    out.push('\n');
                }
            }
            State::Literal { quote, start_line } => match c {
                '\\' => {
                    if let Some(next) = chars.next() {
                        if next == '\n' {
                            out.push('\n');
                            line += 1;
                        }
                    }
                }
                '\n' => {
                    warnings.push(StripWarning::UnterminatedLiteral { line: start_line });
                    out.push(quote);
                    out.push('\n');
                    state = State::Code;
                }
                _ if c == quote => {
                    out.push(quote);
                    state = State::Code;
                }
                _ => {}
            },
        }
        if c == '\n' {
            line += 1;
        }
    }
    match state {
        State::BlockComment { start_line } => {
            warnings.push(StripWarning::UnterminatedComment { line: start_line })
        }
        State::Literal { quote, start_line } => {
            out.push(quote);
            warnings.push(StripWarning::UnterminatedLiteral { line: start_line });
        }
        _ => {}
    }
    Stripped { text: out, warnings }
}
