//! Node-link JSON: `{"directed", "graph", "nodes": [{"id", ...}], "links": [{"source", "target", ...}]}`.
//!
//! Node and link attributes sit beside the structural keys. Integers and reals
//! stay distinct because reals are always written with a fraction or exponent.

use serde_json::{Map, Value};

use super::{assemble, check_reserved, FormatKind, FormatSpec, TextError};
use crate::graph::{AttrMap, AttrValue, AttributedGraph};

const FMT: FormatKind = FormatKind::Json;

fn object(spec: &FormatSpec, head: Vec<(&str, Value)>, attrs: &AttrMap) -> Value {
    let mut m = Map::new();
    for (k, v) in head {
        m.insert(k.to_string(), v);
    }
    for (k, v) in spec.ordered(attrs) {
        m.insert(k.clone(), v.to_json());
    }
    Value::Object(m)
}

pub fn render(g: &AttributedGraph, spec: &FormatSpec) -> Result<String, TextError> {
    let nodes = g
        .nodes()
        .iter()
        .map(|n| {
            check_reserved(FMT, &n.attrs, &["id"], "node")?;
            Ok(object(spec, vec![("id", n.id.into())], &n.attrs))
        })
        .collect::<Result<Vec<_>, TextError>>()?;
    let links = g
        .edges()
        .iter()
        .map(|e| {
            check_reserved(FMT, &e.attrs, &["source", "target"], "link")?;
            Ok(object(
                spec,
                vec![("source", e.src.into()), ("target", e.dst.into())],
                &e.attrs,
            ))
        })
        .collect::<Result<Vec<_>, TextError>>()?;
    let mut top = Map::new();
    top.insert("directed".into(), g.directed().into());
    top.insert("graph".into(), object(spec, vec![], g.graph_attrs()));
    top.insert("nodes".into(), Value::Array(nodes));
    top.insert("links".into(), Value::Array(links));
    let top = Value::Object(top);
    let mut s = if spec.compact {
        serde_json::to_string(&top)
    } else {
        serde_json::to_string_pretty(&top)
    }
    .expect("JSON values serialize");
    s.push('\n');
    Ok(s)
}

fn invalid(message: impl Into<String>) -> TextError {
    TextError::Validation {
        format: FMT,
        message: message.into(),
    }
}

fn attrs_from(obj: &Map<String, Value>, skip: &[&str], owner: &str) -> Result<AttrMap, TextError> {
    obj.iter()
        .filter(|(k, _)| !skip.contains(&k.as_str()))
        .map(|(k, v)| {
            let value = AttrValue::from_json(v).ok_or_else(|| TextError::Unsupported {
                format: FMT,
                message: format!("{owner} attribute {k:?} holds a non-scalar value"),
            })?;
            value
                .validate(k)
                .map_err(|e| invalid(format!("{owner}: {e}")))?;
            Ok((k.clone(), value))
        })
        .collect()
}

fn int_field(obj: &Map<String, Value>, key: &str, owner: &str) -> Result<i64, TextError> {
    obj.get(key)
        .ok_or_else(|| invalid(format!("{owner} lacks {key:?}")))?
        .as_i64()
        .ok_or_else(|| invalid(format!("{owner} {key:?} must be an integer")))
}

pub fn parse(text: &str) -> Result<AttributedGraph, TextError> {
    let top: Value = serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        TextError::Parse {
            format: FMT,
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let top = top.as_object().ok_or_else(|| invalid("top level must be an object"))?;
    for k in top.keys() {
        if !["directed", "multigraph", "graph", "nodes", "links"].contains(&k.as_str()) {
            return Err(TextError::Unsupported {
                format: FMT,
                message: format!("top-level key {k:?}"),
            });
        }
    }
    let directed = match top.get("directed") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| invalid("\"directed\" must be a boolean"))?,
    };
    let graph_attrs = match top.get("graph") {
        None => AttrMap::new(),
        Some(Value::Object(m)) => attrs_from(m, &[], "graph")?,
        Some(_) => return Err(invalid("\"graph\" must be an object")),
    };
    let array = |key: &str| -> Result<Vec<Value>, TextError> {
        match top.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(a)) => Ok(a.clone()),
            Some(_) => Err(invalid(format!("{key:?} must be an array"))),
        }
    };
    let nodes = array("nodes")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let owner = format!("node entry {i}");
            let obj = v.as_object().ok_or_else(|| invalid(format!("{owner} must be an object")))?;
            Ok((int_field(obj, "id", &owner)?, attrs_from(obj, &["id"], &owner)?))
        })
        .collect::<Result<Vec<_>, TextError>>()?;
    let edges = array("links")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let owner = format!("link {i}");
            let obj = v.as_object().ok_or_else(|| invalid(format!("{owner} must be an object")))?;
            Ok((
                int_field(obj, "source", &owner)?,
                int_field(obj, "target", &owner)?,
                attrs_from(obj, &["source", "target"], &owner)?,
            ))
        })
        .collect::<Result<Vec<_>, TextError>>()?;
    assemble(FMT, directed, graph_attrs, nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attrs, GraphBuilder};

    #[test]
    fn layout_and_roundtrip() {
        let mut b = GraphBuilder::new(true).graph_attr("domain", "web");
        b.add_node(attrs([("score", AttrValue::Real(2.0))]));
        b.add_node(attrs([("score", AttrValue::Int(2))]));
        b.add_edge(0, 1, attrs([("weight", 4i64)]));
        let g = b.build().unwrap();
        let s = render(&g, &FormatSpec::compact(FMT)).unwrap();
        assert_eq!(
            s,
            "{\"directed\":true,\"graph\":{\"domain\":\"web\"},\"nodes\":[{\"id\":0,\"score\":2.0},{\"id\":1,\"score\":2}],\"links\":[{\"source\":0,\"target\":1,\"weight\":4}]}\n"
        );
        assert_eq!(parse(&s).unwrap(), g);
        let pretty = render(&g, &FormatSpec::new(FMT)).unwrap();
        assert_eq!(parse(&pretty).unwrap(), g);
    }

    #[test]
    fn duplicate_node_id_is_rejected() {
        let s = r#"{"directed":false,"nodes":[{"id":0},{"id":0}],"links":[]}"#;
        assert!(matches!(parse(s), Err(TextError::Validation { .. })));
    }

    #[test]
    fn syntax_error_has_location() {
        match parse("{\n  \"directed\": trux\n}") {
            Err(TextError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
