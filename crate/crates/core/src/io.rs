//! File formats: schema JSON, relation CSV, history and modification files,
//! and the on-disk data directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dsl::{parse_history, parse_statement, print_history};
use crate::error::{Error, Result};
use crate::relation::{tuple, Database, Relation};
use crate::statement::{Modification, Statement};
use crate::store::VersionedStore;
use crate::value::{Schema, Value};

/// One schema object or an array of them.
pub fn parse_schemas(text: &str) -> Result<Vec<Schema>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let schemas: Vec<Schema> = match v {
        serde_json::Value::Array(_) => serde_json::from_value(v)?,
        _ => vec![serde_json::from_value(v)?],
    };
    for s in &schemas {
        s.validate()?;
    }
    Ok(schemas)
}

/// Reads CSV with a header naming exactly the schema's attributes in order.
/// Empty fields are Null; duplicate rows collapse (set semantics).
pub fn read_relation(schema: Arc<Schema>, text: &str) -> Result<Relation> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != schema.names() {
        return Err(Error::Data(format!(
            "header [{}] does not match the attributes of `{}` [{}]",
            header.join(","),
            schema.name,
            schema.names().join(",")
        )));
    }
    let mut rel = Relation::empty(schema.clone());
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("row {line}: {e}")))?;
        if rec.len() != schema.arity() {
            return Err(Error::Data(format!(
                "row {line}: {} fields, expected {}",
                rec.len(),
                schema.arity()
            )));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (field, a) in rec.iter().zip(&schema.attributes) {
            let v = Value::parse_typed(field, a.ty)
                .map_err(|e| Error::Data(format!("row {line}, column `{}`: {e}", a.name)))?;
            vals.push(v);
        }
        if !rel.insert(tuple(vals)) {
            tracing::warn!(relation = %schema.name, line, "duplicate row ignored");
        }
    }
    Ok(rel)
}

/// CSV with a header; rows in stored order.
pub fn write_relation(r: &Relation) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(vec![]);
    w.write_record(r.schema.names())?;
    for t in r.iter() {
        w.write_record(t.iter().zip(&r.schema.attributes).map(|(v, a)| v.render(a.ty)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// JSON array of `{op, pos, statement?}`; a statement is an AST object or
/// a DSL string.
pub fn parse_modifications(text: &str) -> Result<Vec<Modification>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    modifications_from_json(v)
}

pub fn modifications_from_json(mut v: serde_json::Value) -> Result<Vec<Modification>> {
    let items = v
        .as_array_mut()
        .ok_or_else(|| Error::Modification("modifications must be a JSON array".into()))?;
    for (k, m) in items.iter_mut().enumerate() {
        if let Some(s) = m.get("statement").and_then(|s| s.as_str()) {
            let u = parse_statement(s).map_err(|e| Error::Modification(format!("modification {}: {e}", k + 1)))?;
            m["statement"] = serde_json::to_value(u)?;
        }
    }
    serde_json::from_value(v).map_err(|e| Error::Modification(e.to_string()))
}

/// Data directory layout:
///
/// ```text
/// catalog.json          array of schemas
/// base/<R>.csv          initial state
/// history.txt           statement log (DSL, one per line)
/// snapshots/v<i>/<R>.csv  checkpointed versions
/// ```
#[derive(Clone, Debug)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> DataDir {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.json")
    }

    fn base_path(&self, rel: &str) -> PathBuf {
        self.root.join("base").join(format!("{rel}.csv"))
    }

    pub fn history_path(&self) -> PathBuf {
        self.root.join("history.txt")
    }

    pub fn schemas(&self) -> Result<Vec<Schema>> {
        match fs::read_to_string(self.catalog_path()) {
            Ok(text) => parse_schemas(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(vec![]),
            Err(e) => Err(e.into()),
        }
    }

    /// Adds or replaces relation `schema` with the rows of `csv_text`.
    /// Returns the number of stored rows.
    pub fn load_relation(&self, schema: Schema, csv_text: &str) -> Result<usize> {
        let rel = read_relation(Arc::new(schema.clone()), csv_text)?;
        fs::create_dir_all(self.root.join("base"))?;
        let mut schemas = self.schemas()?;
        schemas.retain(|s| s.name != schema.name);
        schemas.push(schema);
        schemas.sort_by(|a, b| a.name.cmp(&b.name));
        fs::write(self.catalog_path(), serde_json::to_string_pretty(&schemas)? + "\n")?;
        fs::write(self.base_path(&rel.schema.name), write_relation(&rel)?)?;
        Ok(rel.len())
    }

    pub fn base(&self) -> Result<Database> {
        let mut db = Database::new();
        for s in self.schemas()? {
            let text = fs::read_to_string(self.base_path(&s.name))?;
            db.add(read_relation(Arc::new(s), &text)?);
        }
        Ok(db)
    }

    /// Stored history; empty when none was saved.
    pub fn history(&self) -> Result<Vec<Statement>> {
        match fs::read_to_string(self.history_path()) {
            Ok(text) => parse_history(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(vec![]),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save_history(&self, h: &[Statement]) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        fs::write(self.history_path(), print_history(h))?;
        Ok(())
    }

    /// Opens the store over the base state and `h` (the saved history when
    /// `None`).
    pub fn open(&self, h: Option<Vec<Statement>>) -> Result<VersionedStore> {
        let h = match h {
            Some(h) => h,
            None => self.history()?,
        };
        VersionedStore::from_history(self.base()?, &h)
    }

    /// Writes every checkpointed version as CSV files.
    pub fn save_snapshots(&self, store: &VersionedStore) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for v in store.checkpoint_versions() {
            let dir = self.root.join("snapshots").join(format!("v{v}"));
            fs::create_dir_all(&dir)?;
            for r in store.reconstruct(v)?.relations() {
                fs::write(dir.join(format!("{}.csv", r.schema.name)), write_relation(r)?)?;
            }
            out.push(v);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{order_schema, ORDER_CSV, ORDER_SCHEMA_JSON};

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let r = read_relation(order_schema(), ORDER_CSV).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(write_relation(&r).unwrap(), ORDER_CSV);
        assert_eq!(parse_schemas(ORDER_SCHEMA_JSON).unwrap()[0], *order_schema());
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = "ID,Customer,Country,Price,ShippingFee\n11,Susan,UK,20,5\n12,Alex,UK,abc,5\n";
        let err = read_relation(order_schema(), text).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("Price"), "{err}");
        let err = read_relation(order_schema(), "ID,Name\n").unwrap_err().to_string();
        assert!(err.contains("header"), "{err}");
    }

    #[test]
    fn modification_statements_may_be_dsl() {
        let mods = parse_modifications(
            r#"[{"op": "replace", "pos": 1, "statement": "UPDATE Order SET ShippingFee = 0 WHERE Price >= 60"},
                {"op": "delete", "pos": 3}]"#,
        )
        .unwrap();
        assert_eq!(mods.len(), 2);
        assert_eq!(mods[1], Modification::Delete { pos: 3 });
        assert!(parse_modifications(r#"{"op": "delete"}"#).is_err());
    }
}
