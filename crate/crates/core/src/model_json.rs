//! JSON encoding of explicit models.
//!
//! Expressions are nested arrays: `["op", child, ...]` with leaves
//! `["var", name]`, `["num", "p/q"]` and `["bool", b]`. Object keys come
//! out sorted, so the same model always gives the same bytes.

use num::{BigInt, BigRational};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::explicit::{Event, ExplicitModel};
use crate::lang::{Builtin, Constant, Expr, Variable};

pub const VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model version {0}")]
    Version(Json),
    #[error("malformed model at {path}: {detail}")]
    Shape { path: String, detail: String },
}

fn shape(path: &str, detail: impl Into<String>) -> ModelFormatError {
    ModelFormatError::Shape { path: path.to_string(), detail: detail.into() }
}

fn rational_text(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn expr_to_json(e: &Expr) -> Json {
    match e {
        Expr::Const(Constant::Bool(b)) => json!(["bool", b]),
        Expr::Const(k) => json!(["num", rational_text(&k.as_rational().expect("numeric"))]),
        Expr::Var(x) => json!(["var", x.to_string()]),
        Expr::Apply(f, args) => {
            let mut items = vec![Json::from(f.symbol())];
            items.extend(args.iter().map(expr_to_json));
            Json::Array(items)
        }
        Expr::Vector(items) => {
            let mut out = vec![Json::from("vec")];
            out.extend(items.iter().map(expr_to_json));
            Json::Array(out)
        }
        Expr::Index(t, i) => json!(["index", expr_to_json(t), expr_to_json(i)]),
        Expr::TimeDer(e) => json!(["der", expr_to_json(e)]),
        Expr::PartialDer(a, b) => json!(["pder", expr_to_json(a), expr_to_json(b)]),
    }
}

fn var_entry(x: &Variable, e: &Expr) -> Json {
    json!({"var": x.to_string(), "expr": expr_to_json(e)})
}

pub fn model_to_json(m: &ExplicitModel) -> Json {
    let params: Map<String, Json> = m.params.iter().map(|(x, q)| (x.to_string(), Json::from(rational_text(q)))).collect();
    let events: Vec<Json> = m
        .events
        .iter()
        .map(|ev| {
            let resets: Vec<Json> = ev.resets.iter().map(|(x, e)| var_entry(x, e)).collect();
            json!({"guard": expr_to_json(&ev.guard), "resets": resets})
        })
        .collect();
    json!({
        "version": VERSION,
        "params": params,
        "aux": m.aux.iter().map(|(x, e)| var_entry(x, e)).collect::<Vec<_>>(),
        "odes": m.odes.iter().map(|(x, e)| var_entry(x, e)).collect::<Vec<_>>(),
        "events": events,
        "states": m.states.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
    })
}

/// Pretty-printed document with a trailing newline.
pub fn emit_model(m: &ExplicitModel) -> String {
    let mut s = serde_json::to_string_pretty(&model_to_json(m)).expect("serializable");
    s.push('\n');
    s
}

fn parse_variable(s: &str, path: &str) -> Result<Variable, ModelFormatError> {
    Variable::parse(s).ok_or_else(|| shape(path, format!("`{s}` is not a variable name")))
}

fn parse_rational(s: &str, path: &str) -> Result<BigRational, ModelFormatError> {
    let bad = || shape(path, format!("`{s}` is not a rational `p/q`"));
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

pub fn expr_from_json(j: &Json, path: &str) -> Result<Expr, ModelFormatError> {
    let items = j.as_array().ok_or_else(|| shape(path, "expected an array"))?;
    let (head, rest) = items.split_first().ok_or_else(|| shape(path, "empty array"))?;
    let head = head.as_str().ok_or_else(|| shape(path, "operator must be a string"))?;
    let text = |k: usize| rest.get(k).and_then(Json::as_str).ok_or_else(|| shape(path, format!("`{head}` needs a string")));
    let children =
        || rest.iter().enumerate().map(|(k, c)| expr_from_json(c, &format!("{path}/{}", k + 1))).collect::<Result<Vec<_>, _>>();
    Ok(match head {
        "var" => Expr::Var(parse_variable(text(0)?, path)?),
        "num" => Expr::rational(parse_rational(text(0)?, path)?),
        "bool" => Expr::boolean(rest.first().and_then(Json::as_bool).ok_or_else(|| shape(path, "`bool` needs a boolean"))?),
        "vec" => Expr::Vector(children()?),
        "index" | "der" | "pder" => {
            let mut cs = children()?.into_iter();
            let mut next = || cs.next().ok_or_else(|| shape(path, format!("too few arguments to `{head}`")));
            match head {
                "index" => Expr::index(next()?, next()?),
                "der" => Expr::time_der(next()?),
                _ => Expr::partial_der(next()?, next()?),
            }
        }
        op => {
            let f = Builtin::from_symbol(op).ok_or_else(|| shape(path, format!("unknown operator `{op}`")))?;
            let args = children()?;
            if args.len() != f.arity() {
                return Err(shape(path, format!("`{op}` takes {} arguments, got {}", f.arity(), args.len())));
            }
            Expr::apply(f, args)
        }
    })
}

fn field<'a>(j: &'a Json, key: &str, path: &str) -> Result<&'a Json, ModelFormatError> {
    j.get(key).ok_or_else(|| shape(path, format!("missing `{key}`")))
}

fn array<'a>(j: &'a Json, key: &str, path: &str) -> Result<&'a Vec<Json>, ModelFormatError> {
    field(j, key, path)?.as_array().ok_or_else(|| shape(&format!("{path}/{key}"), "expected an array"))
}

fn entries(j: &Json, key: &str, path: &str) -> Result<Vec<(Variable, Expr)>, ModelFormatError> {
    array(j, key, path)?
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let p = format!("{path}/{key}/{k}");
            let name = field(item, "var", &p)?.as_str().ok_or_else(|| shape(&p, "`var` must be a string"))?;
            Ok((parse_variable(name, &p)?, expr_from_json(field(item, "expr", &p)?, &format!("{p}/expr"))?))
        })
        .collect()
}

pub fn model_from_json(j: &Json) -> Result<ExplicitModel, ModelFormatError> {
    let version = field(j, "version", "")?;
    if version.as_u64() != Some(VERSION) {
        return Err(ModelFormatError::Version(version.clone()));
    }
    let params = field(j, "params", "")?
        .as_object()
        .ok_or_else(|| shape("/params", "expected an object"))?
        .iter()
        .map(|(name, q)| {
            let p = format!("/params/{name}");
            let q = q.as_str().ok_or_else(|| shape(&p, "expected a string"))?;
            Ok((parse_variable(name, &p)?, parse_rational(q, &p)?))
        })
        .collect::<Result<_, ModelFormatError>>()?;
    let events = array(j, "events", "")?
        .iter()
        .enumerate()
        .map(|(k, ev)| {
            let p = format!("/events/{k}");
            Ok(Event {
                guard: expr_from_json(field(ev, "guard", &p)?, &format!("{p}/guard"))?,
                resets: entries(ev, "resets", &p)?,
            })
        })
        .collect::<Result<_, ModelFormatError>>()?;
    let states = array(j, "states", "")?
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let p = format!("/states/{k}");
            parse_variable(s.as_str().ok_or_else(|| shape(&p, "expected a string"))?, &p)
        })
        .collect::<Result<_, _>>()?;
    Ok(ExplicitModel { params, aux: entries(j, "aux", "")?, odes: entries(j, "odes", "")?, events, states })
}

pub fn load_model(text: &str) -> Result<ExplicitModel, ModelFormatError> {
    model_from_json(&serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explicit::{build_explicit_model, RangeBox};
    use crate::{bta, corpus, parse, specialize};

    fn compile(src: &str) -> ExplicitModel {
        let p = parse(src).unwrap().equations;
        let w = specialize::specialize_program(&bta::analyze(&p).unwrap().annotated).unwrap();
        build_explicit_model(&w, &RangeBox::new()).unwrap()
    }

    #[test]
    fn constant_rate_model() {
        let j = model_to_json(&compile("x' = 1"));
        assert_eq!(j["odes"], json!([{"var": "x'", "expr": ["num", "1/1"]}]));
        assert_eq!(j["states"], json!(["x"]));
        assert_eq!(j["version"], json!(1));
    }

    #[test]
    fn corpus_shapes() {
        let pendulum = model_to_json(&compile(corpus::PENDULUM));
        assert_eq!(pendulum["odes"].as_array().unwrap().len(), 2);
        let aux: Vec<&str> = pendulum["aux"].as_array().unwrap().iter().map(|a| a["var"].as_str().unwrap()).collect();
        assert_eq!(&aux[..2], ["A", "B"]);
        let biped = model_to_json(&compile(corpus::BIPED));
        let events = biped["events"].as_array().unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0]["resets"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn round_trip_is_byte_stable() {
        for (_, src) in corpus::ALL {
            let text = emit_model(&compile(src));
            let back = load_model(&text).unwrap();
            assert_eq!(emit_model(&back), text);
        }
    }

    #[test]
    fn keys_are_sorted() {
        let text = emit_model(&compile("x' = 1"));
        let keys: Vec<usize> = ["aux", "events", "odes", "params", "states", "version"]
            .iter()
            .map(|k| text.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(load_model("{"), Err(ModelFormatError::Json(_))));
        assert!(matches!(load_model(r#"{"version": 2}"#), Err(ModelFormatError::Version(_))));
        let bad_op = r#"{"version":1,"params":{},"aux":[],"odes":[{"var":"x'","expr":["frob",["num","1/1"]]}],"events":[],"states":["x"]}"#;
        let err = load_model(bad_op).unwrap_err().to_string();
        assert!(err.contains("frob") && err.contains("/odes/0/expr"), "{err}");
        let arity = r#"{"version":1,"params":{},"aux":[],"odes":[{"var":"x'","expr":["sin"]}],"events":[],"states":["x"]}"#;
        assert!(load_model(arity).is_err());
        let zero = r#"{"version":1,"params":{"a":"1/0"},"aux":[],"odes":[],"events":[],"states":[]}"#;
        assert!(load_model(zero).is_err());
    }
}
