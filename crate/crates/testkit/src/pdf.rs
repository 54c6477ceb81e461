//! Reads rendered PDFs back with an independent parser.

use lopdf::content::Content;
use lopdf::{Document, Object};
use recuerdame_core::report::fonts::decode_byte;

pub struct PdfSummary {
    /// Text of each page. Strings shown inside one text object are
    /// concatenated; text objects are separated by newlines.
    pub pages: Vec<String>,
    /// Pixel size of every image XObject in the file.
    pub images: Vec<(i64, i64)>,
    /// Width and height every image was painted at, in points.
    pub placements: Vec<(f32, f32)>,
    /// `/Count` of the page tree root.
    pub declared_page_count: i64,
}

impl PdfSummary {
    pub fn text(&self) -> String {
        self.pages.join("\n")
    }

    /// All text with runs of whitespace collapsed to single spaces, so
    /// strings that were wrapped across lines still match verbatim.
    pub fn flat_text(&self) -> String {
        normalize_ws(&self.text())
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.flat_text().contains(&normalize_ws(needle))
    }
}

pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| decode_byte(*b)).collect()
}

fn number(o: &Object) -> f32 {
    match o {
        Object::Integer(i) => *i as f32,
        Object::Real(r) => *r,
        _ => f32::NAN,
    }
}

pub fn read(bytes: &[u8]) -> Result<PdfSummary, lopdf::Error> {
    let doc = Document::load_mem(bytes)?;
    let mut pages = Vec::new();
    let mut placements = Vec::new();
    for (_, page_id) in doc.get_pages() {
        let content = Content::decode(&doc.get_page_content(page_id))?;
        let mut blocks: Vec<String> = Vec::new();
        let mut current = String::new();
        let mut last_cm = (0.0, 0.0);
        for op in &content.operations {
            match op.operator.as_str() {
                "BT" => current.clear(),
                "ET" => blocks.push(std::mem::take(&mut current)),
                "Tj" | "'" => {
                    if let Some(Object::String(s, _)) = op.operands.last() {
                        current.push_str(&decode(s));
                    }
                }
                "TJ" => {
                    if let Some(Object::Array(items)) = op.operands.first() {
                        for item in items {
                            if let Object::String(s, _) = item {
                                current.push_str(&decode(s));
                            }
                        }
                    }
                }
                "cm" if op.operands.len() == 6 => {
                    last_cm = (number(&op.operands[0]), number(&op.operands[3]));
                }
                "Do" => placements.push(last_cm),
                _ => {}
            }
        }
        pages.push(blocks.join("\n"));
    }

    let mut images = Vec::new();
    for obj in doc.objects.values() {
        if let Object::Stream(s) = obj {
            let is_image = s
                .dict
                .get(b"Subtype")
                .and_then(Object::as_name)
                .is_ok_and(|n| n == b"Image");
            if is_image {
                let w = s.dict.get(b"Width").and_then(Object::as_i64)?;
                let h = s.dict.get(b"Height").and_then(Object::as_i64)?;
                images.push((w, h));
            }
        }
    }

    let root = doc.catalog()?.get(b"Pages")?.as_reference()?;
    let declared_page_count = doc.get_dictionary(root)?.get(b"Count")?.as_i64()?;
    Ok(PdfSummary {
        pages,
        images,
        placements,
        declared_page_count,
    })
}
