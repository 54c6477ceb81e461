//! A small top-to-bottom flow layout over A4 pages.
//!
//! The layout produces positioned drawing operations only; turning them into
//! PDF objects happens in `pdf.rs`. Keeping the two apart lets the
//! structural digest be computed from placements rather than from bytes.

use std::collections::HashMap;
use std::fmt::Write as _;

use image::{DynamicImage, GenericImageView};
use sha2::{Digest, Sha256};

use super::fonts::{encode, Font};

pub const PAGE_WIDTH: f32 = 595.276;
pub const PAGE_HEIGHT: f32 = 841.89;
/// 20 mm.
pub const MARGIN: f32 = 56.693;
pub const CONTENT_WIDTH: f32 = PAGE_WIDTH - 2.0 * MARGIN;
const LEADING_FACTOR: f32 = 1.3;
const DESCENT_FACTOR: f32 = 0.25;
/// Images with a longer side than this are downsampled before embedding.
const MAX_IMAGE_PIXELS: u32 = 2048;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Op {
    /// One text block. Lines after the first advance by `leading`.
    Text {
        x: f32,
        y: f32,
        font: Font,
        size: f32,
        leading: f32,
        lines: Vec<Vec<u8>>,
        /// Excluded from the structural digest (e.g. generation time).
        volatile: bool,
    },
    Image {
        x: f32,
        y: f32,
        w: f32,
        h: f32,
        index: usize,
    },
    Line {
        x1: f32,
        y1: f32,
        x2: f32,
        y2: f32,
        width: f32,
        gray: f32,
    },
    Rect {
        x: f32,
        y: f32,
        w: f32,
        h: f32,
        stroke: Option<f32>,
        fill: Option<f32>,
    },
    Polygon {
        points: Vec<(f32, f32)>,
        fill: f32,
    },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Page {
    pub ops: Vec<Op>,
}

/// Decoded RGB pixels ready for embedding.
#[derive(Debug, Clone)]
pub(crate) struct EmbeddedImage {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

#[derive(Debug, Clone)]
pub(crate) struct Document {
    pub pages: Vec<Page>,
    pub images: Vec<EmbeddedImage>,
}

impl Document {
    /// SHA-256 over a canonical serialization of every placement. Volatile
    /// text contributes its position and style but not its content.
    pub fn structural_digest(&self) -> String {
        let mut s = String::new();
        for (i, page) in self.pages.iter().enumerate() {
            let _ = writeln!(s, "page {i}");
            for op in &page.ops {
                match op {
                    Op::Text {
                        x,
                        y,
                        font,
                        size,
                        leading,
                        lines,
                        volatile,
                    } => {
                        let _ = write!(s, "T {:?} {size:.2} {leading:.2} {x:.2} {y:.2} {}", font, lines.len());
                        if *volatile {
                            s.push_str(" <masked>");
                        } else {
                            for l in lines {
                                let _ = write!(s, " {}", hex::encode(l));
                            }
                        }
                        s.push('\n');
                    }
                    Op::Image { x, y, w, h, index } => {
                        let img = &self.images[*index];
                        let px = hex::encode(Sha256::digest(&img.rgb));
                        let _ = writeln!(s, "I {x:.2} {y:.2} {w:.2} {h:.2} {}x{} {px}", img.width, img.height);
                    }
                    Op::Line {
                        x1,
                        y1,
                        x2,
                        y2,
                        width,
                        gray,
                    } => {
                        let _ = writeln!(s, "L {x1:.2} {y1:.2} {x2:.2} {y2:.2} {width:.2} {gray:.2}");
                    }
                    Op::Rect {
                        x,
                        y,
                        w,
                        h,
                        stroke,
                        fill,
                    } => {
                        let _ = writeln!(s, "R {x:.2} {y:.2} {w:.2} {h:.2} {stroke:?} {fill:?}");
                    }
                    Op::Polygon { points, fill } => {
                        let _ = write!(s, "P {fill:.2}");
                        for (px, py) in points {
                            let _ = write!(s, " {px:.2},{py:.2}");
                        }
                        s.push('\n');
                    }
                }
            }
        }
        hex::encode(Sha256::digest(s.as_bytes()))
    }
}

/// Greedy word wrap of one hard line. Each wrapped line keeps the spaces
/// that followed its last word, so concatenating the lines gives back the
/// input. Words wider than `width` are split between characters.
pub(crate) fn wrap(text: &str, font: Font, size: f32, width: f32) -> Vec<Vec<u8>> {
    let bytes = encode(text);
    let mut tokens: Vec<&[u8]> = Vec::new();
    let mut start = 0;
    for i in 1..=bytes.len() {
        let boundary = i == bytes.len() || (bytes[i - 1] == b' ' && bytes[i] != b' ');
        if boundary {
            tokens.push(&bytes[start..i]);
            start = i;
        }
    }
    let visible = |b: &[u8]| {
        let end = b.iter().rposition(|&c| c != b' ').map_or(0, |p| p + 1);
        font.measure(&b[..end], size)
    };

    let mut lines = Vec::new();
    let mut cur: Vec<u8> = Vec::new();
    for tok in tokens {
        let mut candidate = cur.clone();
        candidate.extend_from_slice(tok);
        if visible(&candidate) <= width {
            cur = candidate;
            continue;
        }
        if !cur.is_empty() {
            lines.push(std::mem::take(&mut cur));
        }
        if visible(tok) <= width {
            cur = tok.to_vec();
            continue;
        }
        for &b in tok {
            cur.push(b);
            if cur.len() > 1 && visible(&cur) > width {
                cur.pop();
                lines.push(std::mem::replace(&mut cur, vec![b]));
            }
        }
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

pub(crate) struct Layout {
    pages: Vec<Page>,
    images: Vec<EmbeddedImage>,
    image_keys: HashMap<String, usize>,
    /// Top of the free area on the current page.
    y: f32,
}

pub(crate) struct Column<'a> {
    pub header: &'a str,
    /// Share of the content width.
    pub fraction: f32,
}

impl Layout {
    pub fn new() -> Self {
        Self {
            pages: vec![Page::default()],
            images: Vec::new(),
            image_keys: HashMap::new(),
            y: PAGE_HEIGHT - MARGIN,
        }
    }

    pub fn finish(self) -> Document {
        Document {
            pages: self.pages,
            images: self.images,
        }
    }

    pub fn cursor(&self) -> f32 {
        self.y
    }

    pub fn remaining(&self) -> f32 {
        self.y - MARGIN
    }

    fn page(&mut self) -> &mut Page {
        self.pages.last_mut().expect("at least one page")
    }

    pub fn push(&mut self, op: Op) {
        self.page().ops.push(op);
    }

    pub fn new_page(&mut self) {
        self.pages.push(Page::default());
        self.y = PAGE_HEIGHT - MARGIN;
    }

    /// Starts a new page unless the current one is still blank.
    pub fn fresh_page(&mut self) {
        if !self.page().ops.is_empty() {
            self.new_page();
        }
    }

    /// Makes sure `height` points are free, breaking the page if needed.
    pub fn ensure(&mut self, height: f32) {
        if self.remaining() < height && !self.page().ops.is_empty() {
            self.new_page();
        }
    }

    pub fn space(&mut self, height: f32) {
        if self.remaining() <= height {
            self.new_page();
        } else {
            self.y -= height;
        }
    }

    pub fn advance_to(&mut self, y: f32) {
        self.y = y;
    }

    /// How many lines of the given size fit below `top`.
    fn lines_fitting(top: f32, size: f32, leading: f32) -> usize {
        let first_baseline = top - size;
        let floor = MARGIN + DESCENT_FACTOR * size;
        if first_baseline < floor {
            0
        } else {
            ((first_baseline - floor) / leading).floor() as usize + 1
        }
    }

    /// Places pre-wrapped lines at `x`, continuing on new pages as needed.
    fn place_lines(&mut self, x: f32, font: Font, size: f32, mut lines: &[Vec<u8>], volatile: bool) {
        let leading = size * LEADING_FACTOR;
        while !lines.is_empty() {
            let fit = Self::lines_fitting(self.y, size, leading);
            if fit == 0 {
                self.new_page();
                continue;
            }
            let take = fit.min(lines.len());
            let y = self.y - size;
            self.push(Op::Text {
                x,
                y,
                font,
                size,
                leading,
                lines: lines[..take].to_vec(),
                volatile,
            });
            self.y -= take as f32 * leading;
            lines = &lines[take..];
        }
    }

    /// Flows `text` across the content width. Each hard line break starts a
    /// separate text block; blank lines become vertical space.
    pub fn text(&mut self, text: &str, font: Font, size: f32) {
        self.text_at(text, font, size, 0.0, CONTENT_WIDTH, false);
    }

    pub fn volatile_text(&mut self, text: &str, font: Font, size: f32) {
        self.text_at(text, font, size, 0.0, CONTENT_WIDTH, true);
    }

    pub fn text_at(&mut self, text: &str, font: Font, size: f32, indent: f32, width: f32, volatile: bool) {
        let normalized = text.replace("\r\n", "\n").replace(['\r', '\t'], " ");
        for hard in normalized.split('\n') {
            let lines = wrap(hard, font, size, width);
            if lines.is_empty() {
                self.space(size * LEADING_FACTOR);
            } else {
                self.place_lines(MARGIN + indent, font, size, &lines, volatile);
            }
        }
    }

    pub fn heading(&mut self, text: &str, size: f32) {
        self.ensure(size * 4.0);
        self.space(size * 0.6);
        self.text(text, Font::Bold, size);
        self.space(size * 0.3);
    }

    /// Bold label line followed by the value; omitted when the value is
    /// absent or blank.
    pub fn field(&mut self, label: &str, value: Option<&str>) {
        let Some(v) = value.filter(|v| !v.trim().is_empty()) else {
            return;
        };
        self.ensure(40.0);
        self.text(label, Font::Bold, 10.0);
        self.text(v, Font::Regular, 11.0);
        self.space(6.0);
    }

    pub fn rule(&mut self) {
        self.space(4.0);
        let y = self.y;
        self.push(Op::Line {
            x1: MARGIN,
            y1: y,
            x2: PAGE_WIDTH - MARGIN,
            y2: y,
            width: 0.5,
            gray: 0.6,
        });
        self.space(6.0);
    }

    fn table_header(&mut self, columns: &[Column<'_>], size: f32) {
        let cells: Vec<String> = columns.iter().map(|c| c.header.to_string()).collect();
        self.table_row(columns, &cells, Font::Bold, size, None);
    }

    /// Draws one row. Cells too tall for the page continue on the next one,
    /// where `header` (if any) is repeated first.
    fn table_row(
        &mut self,
        columns: &[Column<'_>],
        cells: &[String],
        font: Font,
        size: f32,
        header: Option<&[Column<'_>]>,
    ) {
        const PAD: f32 = 3.0;
        let leading = size * LEADING_FACTOR;
        let widths: Vec<f32> = columns.iter().map(|c| c.fraction * CONTENT_WIDTH).collect();
        let wrapped: Vec<Vec<Vec<u8>>> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| {
                c.replace(['\r', '\t'], " ")
                    .split('\n')
                    .flat_map(|hard| {
                        let l = wrap(hard, font, size, w - 2.0 * PAD);
                        if l.is_empty() {
                            vec![Vec::new()]
                        } else {
                            l
                        }
                    })
                    .collect()
            })
            .collect();
        let mut offsets = vec![0usize; cells.len()];
        loop {
            let fit = Self::lines_fitting(self.y - PAD, size, leading);
            if fit == 0 {
                self.new_page();
                if let Some(h) = header {
                    self.table_header(h, size);
                }
                continue;
            }
            let top = self.y - PAD;
            let mut used = 0;
            let mut x = MARGIN;
            for (i, lines) in wrapped.iter().enumerate() {
                let rest = &lines[offsets[i]..];
                let take = fit.min(rest.len());
                let chunk: Vec<Vec<u8>> = rest[..take].iter().filter(|l| !l.is_empty()).cloned().collect();
                if !chunk.is_empty() {
                    self.push(Op::Text {
                        x: x + PAD,
                        y: top - size,
                        font,
                        size,
                        leading,
                        lines: rest[..take].to_vec(),
                        volatile: false,
                    });
                }
                offsets[i] += take;
                used = used.max(take);
                x += widths[i];
            }
            self.y = top - used as f32 * leading - PAD;
            let done = offsets.iter().zip(&wrapped).all(|(o, l)| *o >= l.len());
            if done {
                let y = self.y;
                self.push(Op::Line {
                    x1: MARGIN,
                    y1: y,
                    x2: PAGE_WIDTH - MARGIN,
                    y2: y,
                    width: 0.5,
                    gray: 0.7,
                });
                return;
            }
            self.new_page();
            if let Some(h) = header {
                self.table_header(h, size);
            }
        }
    }

    pub fn table(&mut self, columns: &[Column<'_>], rows: &[Vec<String>]) {
        let size = 10.0;
        self.ensure(size * 5.0);
        self.table_header(columns, size);
        for row in rows {
            self.table_row(columns, row, Font::Regular, size, Some(columns));
        }
        self.space(8.0);
    }

    /// Outlined box with a caption, used for media that cannot be drawn.
    pub fn placeholder(&mut self, caption: &str) {
        const PAD: f32 = 8.0;
        let size = 10.0;
        let lines = wrap(caption, Font::Regular, size, CONTENT_WIDTH - 2.0 * PAD);
        let lines = if lines.is_empty() { vec![Vec::new()] } else { lines };
        let leading = size * LEADING_FACTOR;
        let height = (lines.len() as f32 * leading + 2.0 * PAD).min(PAGE_HEIGHT - 2.0 * MARGIN);
        self.ensure(height + 4.0);
        let top = self.y;
        self.push(Op::Rect {
            x: MARGIN,
            y: top - height,
            w: CONTENT_WIDTH,
            h: height,
            stroke: Some(0.5),
            fill: Some(0.95),
        });
        self.y = top - PAD;
        self.place_lines(MARGIN + PAD, Font::Regular, size, &lines, false);
        self.y = self.y.min(top - height) - 6.0;
    }

    /// Embeds an image scaled to fit the content width and `max_height`,
    /// keeping its aspect ratio. Returns false when the bytes cannot be
    /// decoded so the caller can draw a placeholder instead.
    pub fn image(&mut self, key: &str, bytes: &[u8], max_height: f32) -> bool {
        let index = match self.image_keys.get(key) {
            Some(i) => *i,
            None => {
                let Ok(decoded) = image::load_from_memory(bytes) else {
                    return false;
                };
                let embedded = flatten(decoded);
                self.images.push(embedded);
                self.image_keys.insert(key.to_string(), self.images.len() - 1);
                self.images.len() - 1
            }
        };
        let (pw, ph) = {
            let img = &self.images[index];
            (img.width as f32, img.height as f32)
        };
        let max_h = max_height.min(PAGE_HEIGHT - 2.0 * MARGIN);
        let scale = (CONTENT_WIDTH / pw).min(max_h / ph).min(2.0);
        let (w, h) = (pw * scale, ph * scale);
        self.ensure(h + 4.0);
        let y = self.y - h;
        self.push(Op::Image {
            x: MARGIN + (CONTENT_WIDTH - w) / 2.0,
            y,
            w,
            h,
            index,
        });
        self.y = y - 6.0;
        true
    }
}

/// Converts to 8-bit RGB composited over white, downsampling very large
/// images.
fn flatten(img: DynamicImage) -> EmbeddedImage {
    let (w, h) = img.dimensions();
    let img = if w.max(h) > MAX_IMAGE_PIXELS {
        img.resize(
            MAX_IMAGE_PIXELS,
            MAX_IMAGE_PIXELS,
            image::imageops::FilterType::Triangle,
        )
    } else {
        img
    };
    let rgba = img.to_rgba8();
    let (width, height) = rgba.dimensions();
    let mut rgb = Vec::with_capacity(width as usize * height as usize * 3);
    for px in rgba.pixels() {
        let [r, g, b, a] = px.0;
        let a = u16::from(a);
        for c in [r, g, b] {
            rgb.push(((u16::from(c) * a + 255 * (255 - a)) / 255) as u8);
        }
    }
    EmbeddedImage { width, height, rgb }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_round_trips_text() {
        let text = "The summer we spent at the lake house was the happiest of my childhood years";
        let lines = wrap(text, Font::Regular, 11.0, 120.0);
        assert!(lines.len() > 1);
        assert_eq!(lines.concat(), encode(text));
        for l in &lines {
            let end = l.iter().rposition(|&c| c != b' ').unwrap() + 1;
            assert!(Font::Regular.measure(&l[..end], 11.0) <= 120.0);
        }
    }

    #[test]
    fn long_words_are_split() {
        let word = "x".repeat(300);
        let lines = wrap(&word, Font::Bold, 12.0, 100.0);
        assert!(lines.len() > 1);
        assert_eq!(lines.concat(), word.as_bytes());
    }

    #[test]
    fn long_text_flows_onto_more_pages() {
        let mut short = Layout::new();
        short.text("one line", Font::Regular, 11.0);
        let mut long = Layout::new();
        long.text(&"lorem ipsum dolor sit amet ".repeat(800), Font::Regular, 11.0);
        assert_eq!(short.finish().pages.len(), 1);
        assert!(long.finish().pages.len() > 2);
    }

    #[test]
    fn volatile_text_does_not_affect_digest() {
        let doc = |stamp: &str| {
            let mut l = Layout::new();
            l.text("Title", Font::Bold, 18.0);
            l.volatile_text(stamp, Font::Regular, 10.0);
            l.finish().structural_digest()
        };
        assert_eq!(doc("2024-01-01"), doc("2025-12-31"));
        let mut other = Layout::new();
        other.text("Other", Font::Bold, 18.0);
        assert_ne!(doc("x"), other.finish().structural_digest());
    }
}
