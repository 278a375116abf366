//! Prompt template packs: per-task description, query and answer strings with
//! `{name}` placeholders. `{{` and `}}` produce literal braces.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::TextError;

const BUILTIN: &str = include_str!("../../templates/builtin.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub description: String,
    pub query: String,
    pub answer: String,
    /// Alternative answer texts selected by the `outcome` binding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub answer_variants: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePack {
    pub version: String,
    pub tasks: BTreeMap<String, PromptTemplate>,
}

impl TemplatePack {
    pub fn builtin() -> &'static TemplatePack {
        static PACK: OnceLock<TemplatePack> = OnceLock::new();
        PACK.get_or_init(|| serde_json::from_str(BUILTIN).expect("built-in template pack parses"))
    }

    /// Loads a user pack. Tasks it does not define fall back to the built-in pack.
    pub fn load(path: impl AsRef<Path>) -> Result<TemplatePack, TextError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TextError::Template(format!(
            "cannot read template pack {}: {e}",
            path.display()
        )))?;
        let user: TemplatePack = serde_json::from_str(&text)
            .map_err(|e| TextError::Template(format!("{}: {e}", path.display())))?;
        let mut merged = TemplatePack::builtin().clone();
        merged.version = user.version;
        merged.tasks.extend(user.tasks);
        for (key, t) in &merged.tasks {
            for s in [&t.description, &t.query, &t.answer].into_iter().chain(t.answer_variants.values()) {
                placeholders(s).map_err(|e| TextError::Template(format!("{key}: {e}")))?;
            }
        }
        Ok(merged)
    }

    /// Looks up `key`, falling back from `semantic/<level>/<type>` to `semantic/<type>`.
    pub fn get(&self, key: &str) -> Result<&PromptTemplate, TextError> {
        if let Some(t) = self.tasks.get(key) {
            return Ok(t);
        }
        if let Some(rest) = key.strip_prefix("semantic/") {
            if let Some((_, ty)) = rest.split_once('/') {
                if let Some(t) = self.tasks.get(&format!("semantic/{ty}")) {
                    return Ok(t);
                }
            }
        }
        Err(TextError::MissingTemplate(key.to_string()))
    }

    pub fn render_description(&self, key: &str, b: &BTreeMap<String, String>) -> Result<String, TextError> {
        fill(&self.get(key)?.description, b)
    }

    pub fn render_query(&self, key: &str, b: &BTreeMap<String, String>) -> Result<String, TextError> {
        fill(&self.get(key)?.query, b)
    }

    pub fn render_answer(&self, key: &str, b: &BTreeMap<String, String>) -> Result<String, TextError> {
        let t = self.get(key)?;
        let template = b
            .get("outcome")
            .and_then(|o| t.answer_variants.get(o))
            .unwrap_or(&t.answer);
        fill(template, b)
    }
}

enum Piece<'a> {
    Lit(&'a str),
    Brace(char),
    Hole(&'a str),
}

fn pieces(template: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find(['{', '}']) {
        out.push(Piece::Lit(&rest[..i]));
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push(Piece::Brace(tail.as_bytes()[0] as char));
            rest = &tail[2..];
        } else if tail.starts_with('}') {
            return Err(format!("unmatched '}}' in template {template:?}"));
        } else {
            let end = tail
                .find('}')
                .ok_or_else(|| format!("unterminated placeholder in template {template:?}"))?;
            let name = &tail[1..end];
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("invalid placeholder {{{name}}} in template {template:?}"));
            }
            out.push(Piece::Hole(name));
            rest = &tail[end + 1..];
        }
    }
    out.push(Piece::Lit(rest));
    Ok(out)
}

/// Placeholder names used by a template.
pub fn placeholders(template: &str) -> Result<Vec<String>, String> {
    Ok(pieces(template)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Hole(n) => Some(n.to_string()),
            _ => None,
        })
        .collect())
}

/// Substitutes every placeholder; an unbound one is an error.
pub fn fill(template: &str, bindings: &BTreeMap<String, String>) -> Result<String, TextError> {
    let mut s = String::with_capacity(template.len());
    for p in pieces(template).map_err(TextError::Template)? {
        match p {
            Piece::Lit(t) => s.push_str(t),
            Piece::Brace(c) => s.push(c),
            Piece::Hole(name) => match bindings.get(name) {
                Some(v) => s.push_str(v),
                None => {
                    return Err(TextError::Template(format!(
                        "placeholder {{{name}}} is not bound"
                    )))
                }
            },
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn fills_and_escapes() {
        assert_eq!(fill("node {node} {{x}}", &b(&[("node", "2")])).unwrap(), "node 2 {x}");
        assert!(fill("node {node}", &b(&[])).is_err());
        assert!(fill("node {node", &b(&[("node", "1")])).is_err());
        assert!(fill("a } b", &b(&[])).is_err());
    }

    #[test]
    fn builtin_covers_structure_tasks() {
        let pack = TemplatePack::builtin();
        for kind in crate::task::TaskKind::ALL {
            pack.get(kind.name()).unwrap();
        }
        pack.get("semantic/node/multiclass").unwrap();
        pack.get("semantic/graph/regression").unwrap();
        assert!(pack.get("nope").is_err());
    }

    #[test]
    fn variant_selected_by_outcome() {
        let pack = TemplatePack::builtin();
        let bind = b(&[("outcome", "no"), ("path", ""), ("answer", "No")]);
        let text = pack.render_answer("HamiltonPath", &bind).unwrap();
        assert!(text.starts_with("No ordering"));
    }
}
