//! Best-effort import of PyAutoGUI `def action(...)` snippets into an
//! [`ActionProgram`]. Only straight-line code built from numeric constants,
//! arithmetic and `pyautogui` calls is accepted.

use std::collections::BTreeMap;

use super::{ActionProgram, Expr, PrimitiveKind, Step, ValidationError};
use crate::geometry::Point;

fn unsupported(msg: impl Into<String>) -> ValidationError {
    ValidationError::UnsupportedCode(msg.into())
}

fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '#') => return &line[..i],
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            _ => {}
        }
    }
    line
}

/// Split at top-level commas, respecting parentheses, brackets and quotes.
fn split_top(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"') => quote = Some(c),
            (None, '(' | '[') => depth += 1,
            (None, ')' | ']') => depth -= 1,
            (None, ',') if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() {
        parts.push(last);
    }
    parts
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn python_string(s: &str) -> Option<String> {
    let s = s.trim();
    let q = s.chars().next()?;
    if (q == '\'' || q == '"') && s.len() >= 2 && s.ends_with(q) {
        Some(s[1..s.len() - 1].to_string())
    } else {
        None
    }
}

struct Importer {
    params: Vec<String>,
    symbols: BTreeMap<String, Expr>,
    anchors: BTreeMap<String, Point>,
    body: Vec<Step>,
    cursor: Option<[Expr; 2]>,
}

impl Importer {
    fn expr(&self, src: &str) -> Result<Expr, ValidationError> {
        let e = Expr::parse(src).map_err(|m| unsupported(format!("`{src}`: {m}")))?;
        let params = &self.params;
        let symbols = &self.symbols;
        e.substitute(&mut |name| {
            if let Some(e) = symbols.get(name) {
                Ok(e.clone())
            } else if params.iter().any(|p| p == name) {
                Ok(Expr::Param(name.to_string()))
            } else {
                Err(format!("undefined name `{name}`"))
            }
        })
        .map_err(unsupported)
    }

    fn point_args(&self, args: &[&str], call: &str) -> Result<[Expr; 2], ValidationError> {
        let positional: Vec<&str> = args.iter().copied().filter(|a| !a.contains('=')).collect();
        let keyword = |k: &str| {
            args.iter().find_map(|a| {
                a.split_once('=')
                    .filter(|(n, _)| n.trim() == k)
                    .map(|(_, v)| v.trim())
            })
        };
        let x = positional.first().copied().or_else(|| keyword("x"));
        let y = positional.get(1).copied().or_else(|| keyword("y"));
        match (x, y) {
            (Some(x), Some(y)) => Ok([self.expr(x)?, self.expr(y)?]),
            _ => Err(unsupported(format!("`{call}` needs x and y coordinates"))),
        }
    }

    fn assign(&mut self, lhs: &str, rhs: &str) -> Result<(), ValidationError> {
        let names = split_top(lhs);
        let values = split_top(rhs);
        if names.len() != values.len() || names.iter().any(|n| !is_ident(n)) {
            return Err(unsupported(format!(
                "unsupported assignment `{lhs} = {rhs}`"
            )));
        }
        if let ([a, b], [va, vb]) = (names.as_slice(), values.as_slice()) {
            if let (Ok(x), Ok(y)) = (va.parse::<f64>(), vb.parse::<f64>()) {
                if let Some(anchor) = anchor_name(a, b) {
                    self.anchors.insert(anchor.clone(), Point::new(x, y));
                    self.symbols
                        .insert(a.to_string(), Expr::Anchor(anchor.clone(), super::Axis::X));
                    self.symbols
                        .insert(b.to_string(), Expr::Anchor(anchor, super::Axis::Y));
                    return Ok(());
                }
            }
        }
        let exprs = values
            .iter()
            .map(|v| self.expr(v))
            .collect::<Result<Vec<_>, _>>()?;
        for (n, e) in names.iter().zip(exprs) {
            self.symbols.insert(n.to_string(), e);
        }
        Ok(())
    }

    fn call(&mut self, func: &str, args_src: &str) -> Result<(), ValidationError> {
        let args = split_top(args_src);
        match func {
            "click" | "leftClick" => {
                let at = self.point_args(&args, func)?;
                self.push(PrimitiveKind::Click, at, None, None);
            }
            "moveTo" => {
                let at = self.point_args(&args, func)?;
                self.push(PrimitiveKind::MouseMove, at, None, None);
            }
            "dragTo" => {
                let to = self.point_args(&args, func)?;
                let from = self
                    .cursor
                    .clone()
                    .ok_or_else(|| unsupported("dragTo without a preceding cursor position"))?;
                // a drag subsumes the positioning move that set it up
                if matches!(self.body.last(), Some(s) if s.kind == PrimitiveKind::MouseMove) {
                    self.body.pop();
                }
                self.push(PrimitiveKind::Drag, from, Some(to), None);
            }
            "write" | "typewrite" => {
                let text = args
                    .first()
                    .and_then(|a| python_string(a))
                    .ok_or_else(|| unsupported(format!("`{func}` needs a string literal")))?;
                let at = self
                    .cursor
                    .clone()
                    .ok_or_else(|| unsupported("typing without a preceding cursor position"))?;
                if matches!(self.body.last(), Some(s) if s.kind == PrimitiveKind::Click) {
                    self.body.pop();
                }
                self.push(PrimitiveKind::TypeText, at, None, Some(text));
            }
            other => {
                return Err(unsupported(format!(
                    "pyautogui.{other} is not a supported primitive"
                )))
            }
        }
        Ok(())
    }

    fn push(
        &mut self,
        kind: PrimitiveKind,
        at: [Expr; 2],
        to: Option<[Expr; 2]>,
        text: Option<String>,
    ) {
        self.cursor = Some(to.clone().unwrap_or_else(|| at.clone()));
        self.body.push(Step { kind, at, to, text });
    }
}

/// `x_0, y_0` names anchor `p0`; `x, y` names anchor `p`.
fn anchor_name(a: &str, b: &str) -> Option<String> {
    let (sa, sb) = (a.strip_prefix('x')?, b.strip_prefix('y')?);
    (sa == sb).then(|| format!("p{}", sa.trim_start_matches('_')))
}

pub fn import_action_code(code: &str) -> Result<ActionProgram, ValidationError> {
    let mut imp = Importer {
        params: Vec::new(),
        symbols: BTreeMap::new(),
        anchors: BTreeMap::new(),
        body: Vec::new(),
        cursor: None,
    };
    let mut seen_def = false;
    for raw in code.lines() {
        let line = strip_comment(raw).trim();
        if line.is_empty() || line.starts_with("import ") || line.starts_with("from ") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("def ") {
            if seen_def {
                return Err(unsupported("more than one function definition"));
            }
            let open = rest.find('(').ok_or_else(|| unsupported("malformed def"))?;
            let close = rest
                .rfind(')')
                .ok_or_else(|| unsupported("malformed def"))?;
            for p in split_top(&rest[open + 1..close]) {
                let name = p.split(['=', ':']).next().unwrap_or("").trim();
                if !is_ident(name) {
                    return Err(unsupported(format!("unsupported parameter `{p}`")));
                }
                imp.params.push(name.to_string());
            }
            seen_def = true;
            continue;
        }
        if let Some(call) = line.strip_prefix("pyautogui.") {
            let open = call
                .find('(')
                .ok_or_else(|| unsupported(format!("malformed call `{line}`")))?;
            if !call.ends_with(')') {
                return Err(unsupported(format!("malformed call `{line}`")));
            }
            imp.call(&call[..open], &call[open + 1..call.len() - 1])?;
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once('=') {
            if !lhs.ends_with(['<', '>', '!', '=']) && !rhs.starts_with('=') {
                imp.assign(lhs.trim(), rhs.trim())?;
                continue;
            }
        }
        return Err(unsupported(format!(
            "statement outside the supported grammar: `{line}`"
        )));
    }
    if imp.body.is_empty() {
        return Err(ValidationError::EmptyBody);
    }
    Ok(ActionProgram {
        params: imp.params,
        anchors: imp.anchors,
        body: imp.body,
    })
}
