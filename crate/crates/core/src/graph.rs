//! DOT export of the directed dependency structure of a model, plus a
//! minimal reader for the same subset so exports can be checked mechanically.
//!
//! Edge convention: i -> j is emitted when some coefficient matrix has
//! A_k(i, j) != 0, self-loops included; constrained fits carry exact zeros,
//! so the test is exact. Node labels default to Y1..YK when no names are
//! given. All node and edge lists are sorted by series index, making the
//! output byte-stable.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::varmodel::VarModel;

/// Directed edge of a parsed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DotEdge {
    pub from: String,
    pub to: String,
    pub weight: Option<f64>,
}

/// Parsed form of the DOT subset this module emits.
#[derive(Debug, Clone, PartialEq)]
pub struct DotGraph {
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<DotEdge>,
}

fn default_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("Y{i}")).collect()
}

fn quote(label: &str) -> String {
    let mut out = String::with_capacity(label.len() + 2);
    out.push('"');
    for c in label.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn resolve_labels(k: usize, names: Option<&[String]>) -> Result<Vec<String>> {
    match names {
        Some(n) if n.len() != k => Err(Error::DimensionMismatch(format!(
            "{} labels for {k} series",
            n.len()
        ))),
        Some(n) => Ok(n.to_vec()),
        None => Ok(default_labels(k)),
    }
}

/// DOT text with an edge i -> j wherever some |A_k(i, j)| > 0.
pub fn export_digraph(model: &VarModel, names: Option<&[String]>) -> Result<String> {
    let k = model.dim();
    let labels = resolve_labels(k, names)?;
    let mut out = String::from("digraph dependencies {\n");
    for label in &labels {
        out.push_str(&format!("  {};\n", quote(label)));
    }
    for i in 0..k {
        for j in 0..k {
            if (0..model.p()).any(|lag| model.coeffs()[lag][[i, j]] != 0.0) {
                out.push_str(&format!("  {} -> {};\n", quote(&labels[i]), quote(&labels[j])));
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// DOT text from an ensemble detection-fraction matrix: an edge i -> j is
/// emitted when its fraction exceeds `threshold`, carrying the fraction as
/// a `weight` attribute.
pub fn export_weighted_digraph(
    detection: &Array2<f64>,
    names: Option<&[String]>,
    threshold: f64,
) -> Result<String> {
    let k = detection.nrows();
    if detection.ncols() != k {
        return Err(Error::DimensionMismatch(
            "detection matrix must be square".into(),
        ));
    }
    let labels = resolve_labels(k, names)?;
    let mut out = String::from("digraph dependencies {\n");
    for label in &labels {
        out.push_str(&format!("  {};\n", quote(label)));
    }
    for i in 0..k {
        for j in 0..k {
            let w = detection[[i, j]];
            if w > threshold {
                out.push_str(&format!(
                    "  {} -> {} [weight={w}];\n",
                    quote(&labels[i]),
                    quote(&labels[j])
                ));
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Arrow,
    Eq,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                chars.next();
            }
            '{' => {
                chars.next();
                tokens.push(Token::LBrace);
            }
            '}' => {
                chars.next();
                tokens.push(Token::RBrace);
            }
            '[' => {
                chars.next();
                tokens.push(Token::LBracket);
            }
            ']' => {
                chars.next();
                tokens.push(Token::RBracket);
            }
            ';' => {
                chars.next();
                tokens.push(Token::Semi);
            }
            '=' => {
                chars.next();
                tokens.push(Token::Eq);
            }
            '-' => {
                chars.next();
                match chars.next() {
                    Some('>') => tokens.push(Token::Arrow),
                    // A leading minus can only start a number (weights may
                    // be negative in hand-written files).
                    Some(d) if d.is_ascii_digit() || d == '.' => {
                        let mut word = String::from('-');
                        word.push(d);
                        while let Some(&n) = chars.peek() {
                            if n.is_ascii_alphanumeric() || n == '.' || n == '_' {
                                word.push(n);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                        tokens.push(Token::Ident(word));
                    }
                    other => {
                        return Err(Error::InvalidParam(format!(
                            "dot parse: '-' followed by {other:?}"
                        )))
                    }
                }
            }
            '"' => {
                chars.next();
                let mut word = String::new();
                loop {
                    match chars.next() {
                        Some('\\') => match chars.next() {
                            Some(e) => word.push(e),
                            None => {
                                return Err(Error::InvalidParam(
                                    "dot parse: dangling escape".into(),
                                ))
                            }
                        },
                        Some('"') => break,
                        Some(ch) => word.push(ch),
                        None => {
                            return Err(Error::InvalidParam(
                                "dot parse: unterminated string".into(),
                            ))
                        }
                    }
                }
                tokens.push(Token::Ident(word));
            }
            _ if c.is_ascii_alphanumeric() || c == '_' || c == '.' => {
                let mut word = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' || n == '.' {
                        word.push(n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Ident(word));
            }
            other => {
                return Err(Error::InvalidParam(format!(
                    "dot parse: unexpected character {other:?}"
                )))
            }
        }
    }
    Ok(tokens)
}

/// Parses the emitted DOT subset: `digraph name? { statements }` where each
/// statement is `node;` or `from -> to [weight=value]?;`.
pub fn parse_digraph(text: &str) -> Result<DotGraph> {
    let tokens = lex(text)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize| -> Option<Token> {
        let t = tokens.get(*pos).cloned();
        if t.is_some() {
            *pos += 1;
        }
        t
    };

    match take(&mut pos) {
        Some(Token::Ident(kw)) if kw == "digraph" => {}
        _ => {
            return Err(Error::InvalidParam(
                "dot parse: expected 'digraph'".into(),
            ))
        }
    }
    let name = match tokens.get(pos) {
        Some(Token::Ident(n)) => {
            pos += 1;
            n.clone()
        }
        _ => String::new(),
    };
    match take(&mut pos) {
        Some(Token::LBrace) => {}
        _ => return Err(Error::InvalidParam("dot parse: expected '{'".into())),
    }

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    loop {
        match take(&mut pos) {
            Some(Token::RBrace) => break,
            Some(Token::Ident(first)) => {
                match tokens.get(pos) {
                    Some(Token::Semi) => {
                        pos += 1;
                        if !nodes.contains(&first) {
                            nodes.push(first);
                        }
                    }
                    Some(Token::Arrow) => {
                        pos += 1;
                        let to = match take(&mut pos) {
                            Some(Token::Ident(t)) => t,
                            _ => {
                                return Err(Error::InvalidParam(
                                    "dot parse: expected target node".into(),
                                ))
                            }
                        };
                        let mut weight = None;
                        if let Some(Token::LBracket) = tokens.get(pos) {
                            pos += 1;
                            match (take(&mut pos), take(&mut pos), take(&mut pos), take(&mut pos))
                            {
                                (
                                    Some(Token::Ident(attr)),
                                    Some(Token::Eq),
                                    Some(Token::Ident(value)),
                                    Some(Token::RBracket),
                                ) if attr == "weight" => {
                                    let w = value.parse::<f64>().map_err(|_| {
                                        Error::InvalidParam(format!(
                                            "dot parse: bad weight {value:?}"
                                        ))
                                    })?;
                                    weight = Some(w);
                                }
                                _ => {
                                    return Err(Error::InvalidParam(
                                        "dot parse: expected [weight=value]".into(),
                                    ))
                                }
                            }
                        }
                        match take(&mut pos) {
                            Some(Token::Semi) => {}
                            _ => {
                                return Err(Error::InvalidParam(
                                    "dot parse: expected ';' after edge".into(),
                                ))
                            }
                        }
                        for endpoint in [&first, &to] {
                            if !nodes.contains(endpoint) {
                                nodes.push(endpoint.clone());
                            }
                        }
                        edges.push(DotEdge {
                            from: first,
                            to,
                            weight,
                        });
                    }
                    _ => {
                        return Err(Error::InvalidParam(
                            "dot parse: expected ';' or '->'".into(),
                        ))
                    }
                }
            }
            _ => return Err(Error::InvalidParam("dot parse: unexpected end".into())),
        }
    }
    if tokens.len() != pos {
        return Err(Error::InvalidParam(
            "dot parse: trailing tokens after '}'".into(),
        ))
    }
    Ok(DotGraph { name, nodes, edges })
}
