//! Minimal element tree on top of `quick-xml`, plus a deterministic writer.
//!
//! All document formats in this crate are attribute-only, so text content is
//! ignored on read and never produced on write.

use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub line: usize,
    pub column: usize,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn required_attr(&self, name: &str, path: &str) -> Result<&str> {
        self.attr(name).ok_or_else(|| {
            Error::format(
                path,
                format!(
                    "{}:{}: <{}> is missing attribute {name:?}",
                    self.line, self.column, self.name
                ),
            )
        })
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Fails if the element has a child not in `allowed`.
    pub fn expect_children(&self, allowed: &[&str], path: &str) -> Result<()> {
        match self.children.iter().find(|c| !allowed.contains(&c.name.as_str())) {
            Some(c) => Err(Error::format(
                path,
                format!(
                    "{}:{}: unexpected <{}> inside <{}>",
                    c.line, c.column, c.name, self.name
                ),
            )),
            None => Ok(()),
        }
    }

    pub fn expect_name(&self, name: &str, path: &str) -> Result<()> {
        if self.name == name {
            Ok(())
        } else {
            Err(Error::format(
                path,
                format!(
                    "{}:{}: expected <{name}>, found <{}>",
                    self.line, self.column, self.name
                ),
            ))
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
    (line, column)
}

/// Line/column lookup for offsets that mostly increase.
struct Lines<'t> {
    text: &'t str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'t> Lines<'t> {
    fn new(text: &'t str) -> Self {
        Lines {
            text,
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn at(&mut self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        if offset < self.pos {
            return line_column(self.text, offset);
        }
        let bytes = &self.text.as_bytes()[self.pos..offset];
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                self.line += 1;
                self.line_start = self.pos + i + 1;
            }
        }
        self.pos = offset;
        let column = String::from_utf8_lossy(&self.text.as_bytes()[self.line_start..offset])
            .chars()
            .count()
            + 1;
        (self.line, column)
    }
}

/// Parses a whole document into its root element. `path` only labels errors.
pub fn parse_document(text: &str, path: &str) -> Result<Element> {
    let mut reader = Reader::from_str(text);
    let config = reader.config_mut();
    config.expand_empty_elements = true;
    config.trim_text(true);

    let xml_error = |offset: u64, message: String| {
        let (line, column) = line_column(text, offset as usize);
        Error::Xml {
            path: path.to_string(),
            line,
            column,
            message,
        }
    };

    let mut lines = Lines::new(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let start = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_error(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(e) => {
                if root.is_some() {
                    return Err(xml_error(start, "content after the root element".into()));
                }
                // Whitespace skipped before the tag is included in `start`.
                let end = reader.buffer_position() as usize;
                let open = text[..end].rfind('<').unwrap_or(start as usize);
                let (line, column) = lines.at(open);
                let name = e.name().as_ref().to_string();
                let mut attrs = Vec::new();
                for attr in e.attributes() {
                    let attr = attr.map_err(|err| xml_error(start, err.to_string()))?;
                    let key = attr.key.as_ref().to_string();
                    let value = attr
                        .normalized_value(XmlVersion::Implicit1_0)
                        .map_err(|err| xml_error(start, err.to_string()))?
                        .into_owned();
                    attrs.push((key, value));
                }
                stack.push(Element {
                    name,
                    attrs,
                    children: Vec::new(),
                    line,
                    column,
                });
            }
            Event::End(_) => {
                let done = stack
                    .pop()
                    .ok_or_else(|| xml_error(start, "unbalanced end tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            Event::Text(t) => {
                if stack.is_empty() && !t.trim().is_empty() {
                    return Err(xml_error(start, "text outside the root element".into()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(xml_error(text.len() as u64, "unexpected end of document".into()));
    }
    root.ok_or_else(|| xml_error(0, "document has no root element".into()))
}

/// Two-space indented writer with a fixed attribute order, so the same
/// input always serializes to the same bytes.
pub struct XmlWriter {
    out: String,
    depth: usize,
}

impl Default for XmlWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl XmlWriter {
    pub fn new() -> Self {
        XmlWriter {
            out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
            depth: 0,
        }
    }

    /// A writer without the XML declaration, for embedding fragments.
    pub fn bare() -> Self {
        XmlWriter {
            out: String::new(),
            depth: 0,
        }
    }

    fn tag(&mut self, name: &str, attrs: &[(&str, &str)], close: bool) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            self.out.push(' ');
            self.out.push_str(k);
            self.out.push_str("=\"");
            self.out.push_str(&quick_xml::escape::escape(*v));
            self.out.push('"');
        }
        self.out.push_str(if close { "/>\n" } else { ">\n" });
    }

    pub fn open(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.tag(name, attrs, false);
        self.depth += 1;
    }

    pub fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    pub fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.tag(name, attrs, true);
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_elements_and_attributes() {
        let doc = "<?xml version=\"1.0\"?>\n<a x=\"1\">\n  <b y=\"&lt;2&gt;\"/>\n  <b/>\n</a>\n";
        let root = parse_document(doc, "t.xml").unwrap();
        assert_eq!(root.name, "a");
        assert_eq!(root.attr("x"), Some("1"));
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[0].attr("y"), Some("<2>"));
        assert_eq!(root.children[0].line, 3);
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = parse_document("<a>\n  <b>\n</a>", "bad.xml").unwrap_err();
        match err {
            Error::Xml { line, path, .. } => {
                assert_eq!(path, "bad.xml");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn truncated_document_is_an_error() {
        assert!(matches!(
            parse_document("<a><b/>", "t.xml"),
            Err(Error::Xml { .. })
        ));
    }

    #[test]
    fn writer_escapes_and_indents() {
        let mut w = XmlWriter::bare();
        w.open("a", &[("k", "x\"<y")]);
        w.empty("b", &[]);
        w.close("a");
        let text = w.finish();
        assert_eq!(text, "<a k=\"x&quot;&lt;y\">\n  <b/>\n</a>\n");
        let root = parse_document(&text, "t").unwrap();
        assert_eq!(root.attr("k"), Some("x\"<y"));
    }
}
