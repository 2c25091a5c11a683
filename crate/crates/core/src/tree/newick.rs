use super::PhyloTree;
use crate::error::{Error, Result};

const SPECIAL: &[char] = &['(', ')', '[', ']', '\'', ':', ';', ','];

fn quote_label(label: &str) -> String {
    if !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || SPECIAL.contains(&c))
    {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Newick text with branch lengths, rooted at the tree's anchor node so the
/// top level is a trifurcation.
pub fn to_newick(tree: &PhyloTree) -> String {
    fn write(tree: &PhyloTree, node: usize, parent: Option<usize>, out: &mut String) {
        let children: Vec<(usize, f64)> = tree
            .neighbors(node)
            .into_iter()
            .filter(|&(v, _)| Some(v) != parent)
            .collect();
        if !children.is_empty() {
            out.push('(');
            for (k, (child, len)) in children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write(tree, *child, Some(node), out);
                out.push_str(&format!(":{len}"));
            }
            out.push(')');
        }
        if let Some(l) = &tree.nodes[node].label {
            out.push_str(&quote_label(l));
        }
    }
    let mut out = String::new();
    match tree.anchor() {
        Some(root) => write(tree, root, None, &mut out),
        None => {
            if let Some(n) = tree.nodes.first().and_then(|n| n.label.as_ref()) {
                out.push_str(&quote_label(n));
            }
        }
    }
    out.push(';');
    out
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::input(format!(
            "newick: {msg} at character {} of {:?}",
            self.pos, self.src
        ))
    }

    fn skip_ws(&mut self) {
        loop {
            while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
                self.pos += 1;
            }
            if self.peek() == Some('[') {
                while self.pos < self.chars.len() && self.chars[self.pos] != ']' {
                    self.pos += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut s = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted label")),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        s.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(Some(s));
                    }
                    Some(c) => {
                        s.push(c);
                        self.pos += 1;
                    }
                }
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || SPECIAL.contains(&c) {
                break;
            }
            self.pos += 1;
        }
        Ok((self.pos > start).then(|| self.chars[start..self.pos].iter().collect()))
    }

    fn length(&mut self) -> Result<f64> {
        self.skip_ws();
        if self.peek() != Some(':') {
            return Ok(0.0);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err("bad branch length"))
    }

    fn subtree(&mut self, tree: &mut PhyloTree) -> Result<usize> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            let node = tree.add_node(None);
            loop {
                let child = self.subtree(tree)?;
                let len = self.length()?;
                tree.add_edge(node, child, len);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
            tree.nodes[node].label = self.label()?;
            Ok(node)
        } else {
            let label = self.label()?.ok_or_else(|| self.err("expected a label"))?;
            Ok(tree.add_node(Some(label)))
        }
    }
}

/// Parses Newick text into an unrooted tree; a bifurcating root is dissolved.
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        src: text,
    };
    let mut tree = PhyloTree::default();
    p.subtree(&mut tree)?;
    p.length()?;
    p.skip_ws();
    if p.peek() == Some(';') {
        p.pos += 1;
    }
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.err("trailing characters"));
    }
    tree.suppress_degree_two();
    tree.validate()?;
    Ok(tree)
}
