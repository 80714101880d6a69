//! Slow, independent reference implementations used as oracles.

/// Line kinds (`N`, `C`, `H`) for canonically formatted C: one statement per
/// line or per `;`-terminated line run, K&R braces.
pub fn line_kinds(src: &str) -> Vec<char> {
    let lines: Vec<&str> = src.split('\n').collect();
    let n = lines.len();
    let t = |i: usize| lines[i].trim();
    let next_nonblank = |from: usize| (from..n).find(|&k| !t(k).is_empty());
    let prev_nonblank = |before: usize| (0..before).rev().find(|&k| !t(k).is_empty());
    let stmt_end = |from: usize| (from..n).find(|&k| t(k).ends_with(';')).unwrap_or(n - 1);
    let joined = |a: usize, b: usize| lines[a..=b].iter().map(|l| l.trim()).collect::<Vec<_>>().join(" ");
    let mut out = vec!['N'; n];

    for i in 0..n {
        let s = t(i);
        if !s.starts_with("if (") {
            continue;
        }
        if prev_nonblank(i).is_some_and(|p| t(p).ends_with("else")) {
            continue;
        }
        // header: up to the parenthesis closing the condition
        let (mut depth, mut j, mut rest) = (0i32, i, String::new());
        'scan: for (k, line) in lines.iter().enumerate().skip(i) {
            let start = if k == i { line.find("if").unwrap() } else { 0 };
            for (pos, ch) in line[start..].char_indices() {
                match ch {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            j = k;
                            rest = line[start + pos + 1..].trim().to_string();
                            break 'scan;
                        }
                    }
                    _ => {}
                }
            }
        }
        let (body_start, body_end, last, mut has_else);
        if rest.is_empty() {
            let Some(b) = next_nonblank(j + 1) else { continue };
            let first = t(b);
            if ["if", "for", "while", "switch", "do", "{"].iter().any(|k| first.starts_with(k)) {
                continue;
            }
            let e = stmt_end(b);
            (body_start, body_end, last, has_else) = (b, e, joined(b, e), false);
        } else if rest == "{" {
            let mut depth = 1i32;
            let mut close = n - 1;
            for k in j + 1..n {
                depth += t(k).matches('{').count() as i32 - t(k).matches('}').count() as i32;
                if depth <= 0 {
                    close = k;
                    break;
                }
            }
            let Some(last_line) = (j + 1..close).rev().find(|&k| t(k).ends_with(';')) else {
                continue;
            };
            let first_line = (j + 1..last_line)
                .rev()
                .find(|&k| {
                    let s = t(k);
                    s.ends_with(';') || s.ends_with('{') || s.ends_with('}')
                })
                .map_or(j + 1, |k| k + 1);
            has_else = t(close).starts_with("} else");
            (body_start, body_end, last) = (j, close, joined(first_line, last_line));
        } else {
            let inner = rest.trim_start_matches('{').trim_end_matches('}');
            let stmt = inner.split(';').map(str::trim).filter(|p| !p.is_empty()).last().unwrap_or("");
            (body_start, body_end, last, has_else) = (j, j, stmt.to_string(), false);
        }
        has_else |= next_nonblank(body_end + 1).is_some_and(|k| t(k).starts_with("else"));
        if !has_else && is_exit(&last) {
            for k in body_start..=body_end {
                out[k] = 'H';
            }
            for k in i..=j {
                out[k] = 'C';
            }
        }
    }

    for i in 0..n {
        if !is_label(t(i)) {
            continue;
        }
        let mut depth = 0i32;
        let mut pending_control = false;
        let mut k = i + 1;
        while k < n {
            let s = t(k);
            if depth == 0 && !pending_control && (s.starts_with("return") || s.starts_with("goto ")) {
                let e = stmt_end(k);
                if is_exit(&joined(k, e)) {
                    for m in i..=e {
                        if out[m] == 'N' {
                            out[m] = 'H';
                        }
                    }
                }
                break;
            }
            depth += s.matches('{').count() as i32 - s.matches('}').count() as i32;
            if depth < 0 {
                break;
            }
            let control = ["if (", "for (", "while ("].iter().any(|c| s.starts_with(c)) && s.ends_with(')')
                || s == "else";
            if control {
                pending_control = true;
            } else if pending_control && s.ends_with(';') {
                pending_control = false;
            }
            k += 1;
        }
    }
    out
}

fn is_label(s: &str) -> bool {
    let Some(name) = s.strip_suffix(':') else { return false };
    let mut chars = name.chars();
    name != "default"
        && chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_exit(stmt: &str) -> bool {
    let s = stmt.trim();
    if s.starts_with("goto ") {
        return true;
    }
    let Some(arg) = s.strip_prefix("return") else { return false };
    if arg.starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
        return false;
    }
    let mut arg = arg.trim().trim_end_matches(';').trim();
    while arg.starts_with('(') && arg.ends_with(')') {
        arg = arg[1..arg.len() - 1].trim();
    }
    !(arg.is_empty() || arg == "0")
}

/// Pairwise Mann-Whitney AUC over all positive/negative pairs.
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Triple loop: `m` is `n × d`, `w` is `F × k × d`.
pub fn conv_text_naive(m: &[f64], n: usize, d: usize, w: &[f64], f: usize, k: usize, b: &[f64]) -> Vec<f64> {
    let p = n - k + 1;
    let mut out = vec![0.0; f * p];
    for fi in 0..f {
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..k {
                for c in 0..d {
                    acc += m[(i + j) * d + c] * w[(fi * k + j) * d + c];
                }
            }
            let v = acc + b[fi];
            out[fi * p + i] = if v > 0.0 { v } else { 0.0 };
        }
    }
    out
}

/// Quadruple loop: `x` is `H × N × E`, `w` is `F × k × N × E`.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_naive(x: &[f64], h: usize, n: usize, e: usize, w: &[f64], f: usize, k: usize, b: &[f64]) -> Vec<f64> {
    let p = h - k + 1;
    let mut out = vec![0.0; f * p];
    for fi in 0..f {
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..k {
                for r in 0..n {
                    for c in 0..e {
                        acc += x[((i + j) * n + r) * e + c] * w[((fi * k + j) * n + r) * e + c];
                    }
                }
            }
            let v = acc + b[fi];
            out[fi * p + i] = if v > 0.0 { v } else { 0.0 };
        }
    }
    out
}
