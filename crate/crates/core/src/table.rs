//! Corpus tables and their four matching elements: topic, headings,
//! core-column entities and data.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kb::{EntityRetriever, KnowledgeBase};
use crate::text::tokenize;

/// Number of entities retrieved for the table topic.
pub const TOPIC_ENTITIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cell {
    pub text: String,
    /// Canonical KB id when the cell links to a known entity.
    pub entity: Option<String>,
}

impl Cell {
    pub fn text(text: impl Into<String>) -> Self {
        Cell {
            text: text.into(),
            entity: None,
        }
    }

    pub fn entity(text: impl Into<String>, id: impl Into<String>) -> Self {
        Cell {
            text: text.into(),
            entity: Some(id.into()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_none() && self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageStats {
    pub in_links: u64,
    pub out_links: u64,
    pub page_views: u64,
    pub tables_on_page: u64,
    pub table_chars: u64,
    pub page_chars: u64,
}

impl Default for PageStats {
    fn default() -> Self {
        PageStats {
            in_links: 0,
            out_links: 0,
            page_views: 0,
            tables_on_page: 1,
            table_chars: 0,
            page_chars: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub table_id: String,
    pub page_title: String,
    pub caption: String,
    /// One heading per column; a heading may itself carry an entity link.
    pub headings: Vec<Cell>,
    /// Row-major, every row exactly `headings.len()` wide.
    pub rows: Vec<Vec<Cell>>,
    pub page_stats: PageStats,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.headings.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[j])
    }

    pub fn heading_texts(&self) -> impl Iterator<Item = &str> + '_ {
        self.headings.iter().map(|h| h.text.as_str())
    }

    /// Serialize back to one corpus-format JSON line. Links are written as
    /// canonical entity ids, so re-parsing against the same KB is lossless.
    pub fn to_record(&self) -> String {
        let cell = |c: &Cell| {
            let mut m = Map::new();
            m.insert("text".into(), Value::String(c.text.clone()));
            if let Some(e) = &c.entity {
                m.insert("link".into(), Value::String(e.clone()));
            }
            Value::Object(m)
        };
        let s = &self.page_stats;
        json!({
            "id": self.table_id,
            "pgTitle": self.page_title,
            "caption": self.caption,
            "headers": self.headings.iter().map(cell).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| r.iter().map(cell).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "inLinks": s.in_links,
            "outLinks": s.out_links,
            "pageViews": s.page_views,
            "tablesOnPage": s.tables_on_page,
            "tableChars": s.table_chars,
            "pageChars": s.page_chars,
        })
        .to_string()
    }
}

fn str_field<'a>(obj: &'a Map<String, Value>, key: &str, required: bool) -> Result<&'a str> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(Value::Null) | None if !required => Ok(""),
        None => Err(Error::field(key, "missing")),
        Some(other) => Err(Error::field(key, format!("expected string, got {other}"))),
    }
}

fn count_field(obj: &Map<String, Value>, key: &str, default: u64) -> Result<u64> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .or_else(|| v.as_f64().filter(|f| *f >= 0.0 && f.fract() == 0.0).map(|f| f as u64))
            .ok_or_else(|| Error::field(key, format!("expected non-negative integer, got {v}"))),
    }
}

/// Parse one cell; a link is kept as an entity only when the KB knows it.
fn parse_cell(v: &Value, kb: &KnowledgeBase, field: &str) -> Result<(Cell, usize)> {
    match v {
        Value::String(s) => Ok((Cell::text(s.clone()), 1)),
        Value::Null => Ok((Cell::default(), 1)),
        Value::Object(o) => {
            let text = str_field(o, "text", false).map_err(|_| Error::field(format!("{field}.text"), "expected string"))?;
            let link = str_field(o, "link", false).map_err(|_| Error::field(format!("{field}.link"), "expected string"))?;
            let span = count_field(o, "colspan", 1)
                .map_err(|_| Error::field(format!("{field}.colspan"), "expected integer"))?
                .max(1) as usize;
            let entity = if link.is_empty() {
                None
            } else {
                kb.resolve(link).map(str::to_owned)
            };
            Ok((
                Cell {
                    text: text.to_owned(),
                    entity,
                },
                span,
            ))
        }
        other => Err(Error::field(field, format!("expected cell object, got {other}"))),
    }
}

/// Parse one corpus JSON line into a table, resolving cell links against `kb`.
pub fn parse_table(record: &str, kb: &KnowledgeBase) -> Result<RawTable> {
    let value: Value =
        serde_json::from_str(record).map_err(|e| Error::field("<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::field("<record>", "expected a JSON object"))?;

    let table_id = str_field(obj, "id", true)?;
    if table_id.trim().is_empty() {
        return Err(Error::field("id", "empty table id"));
    }
    let page_title = str_field(obj, "pgTitle", false)?;
    let caption = str_field(obj, "caption", false)?;

    let mut headings = Vec::new();
    match obj.get("headers") {
        None | Some(Value::Null) => {}
        Some(Value::Array(hs)) => {
            for (j, h) in hs.iter().enumerate() {
                let (cell, span) = parse_cell(h, kb, &format!("headers[{j}]"))?;
                // spanning headings repeat over every covered column
                headings.extend(std::iter::repeat_n(cell, span));
            }
        }
        Some(other) => return Err(Error::field("headers", format!("expected array, got {other}"))),
    }

    let mut rows = Vec::new();
    match obj.get("rows") {
        None | Some(Value::Null) => {}
        Some(Value::Array(rs)) => {
            for (i, r) in rs.iter().enumerate() {
                let cells = r
                    .as_array()
                    .ok_or_else(|| Error::field(format!("rows[{i}]"), "expected array of cells"))?;
                let mut row = Vec::with_capacity(cells.len());
                for (j, c) in cells.iter().enumerate() {
                    let (cell, span) = parse_cell(c, kb, &format!("rows[{i}][{j}]"))?;
                    row.extend(std::iter::repeat_n(cell, span));
                }
                rows.push(row);
            }
        }
        Some(other) => return Err(Error::field("rows", format!("expected array, got {other}"))),
    }

    let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(headings.len());
    headings.resize(width, Cell::default());
    for row in &mut rows {
        row.resize(width, Cell::default());
    }

    let page_stats = PageStats {
        in_links: count_field(obj, "inLinks", 0)?,
        out_links: count_field(obj, "outLinks", 0)?,
        page_views: count_field(obj, "pageViews", 0)?,
        tables_on_page: count_field(obj, "tablesOnPage", 1)?,
        table_chars: count_field(obj, "tableChars", 0)?,
        page_chars: count_field(obj, "pageChars", 1)?,
    };
    if page_stats.tables_on_page == 0 {
        return Err(Error::field("tablesOnPage", "must be at least 1"));
    }
    if page_stats.page_chars == 0 {
        return Err(Error::field("pageChars", "must be positive"));
    }
    if page_stats.table_chars > page_stats.page_chars {
        return Err(Error::field("tableChars", "exceeds pageChars"));
    }

    Ok(RawTable {
        table_id: table_id.to_owned(),
        page_title: page_title.to_owned(),
        caption: caption.to_owned(),
        headings,
        rows,
        page_stats,
    })
}

/// Column with the highest fraction of entity-linked cells; leftmost on ties,
/// `None` when no column links anything.
pub fn detect_core_column(t: &RawTable) -> Result<Option<usize>> {
    if t.n_rows() == 0 || t.n_cols() == 0 {
        return Err(Error::EmptyTable(t.table_id.clone()));
    }
    let mut best: Option<(usize, usize)> = None;
    for j in 0..t.n_cols() {
        let linked = t.column(j).filter(|c| c.entity.is_some()).count();
        // every column has the same row count, so comparing counts compares rates
        if linked > 0 && best.is_none_or(|(_, b)| linked > b) {
            best = Some((j, linked));
        }
    }
    Ok(best.map(|(j, _)| j))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableElements {
    pub table_id: String,
    pub topic_words: Vec<String>,
    pub topic_entities: Vec<String>,
    pub heading_words: Vec<String>,
    pub core_column: Option<usize>,
    /// Entities of the core column, in row order.
    pub entities: Vec<String>,
    pub data_words: Vec<String>,
    pub data_entities: Vec<String>,
}

/// Extract the four elements. `_kb` is part of the contract for callers that
/// resolve entities lazily; links are already canonical after parsing.
pub fn extract_elements(
    t: &RawTable,
    _kb: &KnowledgeBase,
    retriever: &dyn EntityRetriever,
) -> TableElements {
    let mut topic_words = tokenize(&t.caption);
    topic_words.extend(tokenize(&t.page_title));
    let topic_text = format!("{} {}", t.caption, t.page_title);
    let topic_entities = retriever.retrieve(&topic_text, TOPIC_ENTITIES);

    let mut heading_words = Vec::new();
    let mut data_entities = Vec::new();
    for h in &t.headings {
        heading_words.extend(tokenize(&h.text));
        if let Some(e) = &h.entity {
            data_entities.push(e.clone());
        }
    }

    let core_column = detect_core_column(t).ok().flatten();
    let entities = core_column
        .map(|j| t.column(j).filter_map(|c| c.entity.clone()).collect())
        .unwrap_or_default();

    let mut data_words = Vec::new();
    for row in &t.rows {
        for c in row {
            data_words.extend(tokenize(&c.text));
            if let Some(e) = &c.entity {
                data_entities.push(e.clone());
            }
        }
    }

    TableElements {
        table_id: t.table_id.clone(),
        topic_words,
        topic_entities,
        heading_words,
        core_column,
        entities,
        data_words,
        data_entities,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitAxis {
    Rows,
    Columns,
}

impl std::str::FromStr for SplitAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" | "horizontal" => Ok(SplitAxis::Rows),
            "columns" | "cols" | "vertical" => Ok(SplitAxis::Columns),
            other => Err(Error::Invalid(format!("unknown split axis `{other}`"))),
        }
    }
}

impl std::fmt::Display for SplitAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitAxis::Rows => "rows",
            SplitAxis::Columns => "columns",
        })
    }
}

pub const SPLIT_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Keep the leading `ceil(fraction · n)` rows or columns.
pub fn split_table(t: &RawTable, axis: SplitAxis, fraction: f64) -> Result<RawTable> {
    if !SPLIT_FRACTIONS.contains(&fraction) {
        return Err(Error::SplitFraction(fraction));
    }
    let keep = |n: usize| (fraction * n as f64).ceil() as usize;
    let mut out = t.clone();
    match axis {
        SplitAxis::Rows => out.rows.truncate(keep(t.n_rows())),
        SplitAxis::Columns => {
            let k = keep(t.n_cols());
            out.headings.truncate(k);
            for r in &mut out.rows {
                r.truncate(k);
            }
        }
    }
    if out.n_rows() == 0 || out.n_cols() == 0 {
        return Err(Error::EmptyTable(t.table_id.clone()));
    }
    Ok(out)
}
