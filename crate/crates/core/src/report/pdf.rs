use pdf_writer::{Content, Filter, Finish, Name, Pdf, Rect, Ref, Str};

use super::fonts::Font;
use super::layout::{Document, Op, PAGE_HEIGHT, PAGE_WIDTH};

fn deflate(data: &[u8]) -> Vec<u8> {
    miniz_oxide::deflate::compress_to_vec_zlib(data, 6)
}

/// Serializes a laid-out document as PDF 1.7. Output depends only on the
/// document, so identical layouts give identical bytes.
pub(crate) fn write_pdf(doc: &Document, file_id: &[u8]) -> Vec<u8> {
    let mut next = 1;
    let mut alloc = || {
        let r = Ref::new(next);
        next += 1;
        r
    };
    let catalog_id = alloc();
    let tree_id = alloc();
    let font_ids = [(Font::Regular, alloc()), (Font::Bold, alloc())];
    let image_ids: Vec<Ref> = doc.images.iter().map(|_| alloc()).collect();
    let page_ids: Vec<(Ref, Ref)> = doc.pages.iter().map(|_| (alloc(), alloc())).collect();
    let image_names: Vec<String> = (0..doc.images.len()).map(|i| format!("Im{}", i + 1)).collect();

    let mut pdf = Pdf::new();
    pdf.set_version(1, 7);
    pdf.set_file_id((file_id.to_vec(), file_id.to_vec()));
    pdf.catalog(catalog_id).pages(tree_id);
    pdf.pages(tree_id)
        .kids(page_ids.iter().map(|(p, _)| *p))
        .count(page_ids.len() as i32);

    for (font, id) in font_ids {
        pdf.type1_font(id)
            .base_font(Name(font.base_name()))
            .encoding_predefined(Name(b"WinAnsiEncoding"));
    }

    for (img, id) in doc.images.iter().zip(&image_ids) {
        let data = deflate(&img.rgb);
        let mut x = pdf.image_xobject(*id, &data);
        x.filter(Filter::FlateDecode);
        x.width(img.width as i32);
        x.height(img.height as i32);
        x.color_space().device_rgb();
        x.bits_per_component(8);
        x.finish();
    }

    for (page, (page_id, content_id)) in doc.pages.iter().zip(&page_ids) {
        let mut used_images: Vec<usize> = page
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Image { index, .. } => Some(*index),
                _ => None,
            })
            .collect();
        used_images.sort_unstable();
        used_images.dedup();

        let mut p = pdf.page(*page_id);
        p.media_box(Rect::new(0.0, 0.0, PAGE_WIDTH, PAGE_HEIGHT));
        p.parent(tree_id);
        p.contents(*content_id);
        let mut res = p.resources();
        {
            let mut fonts = res.fonts();
            for (font, id) in font_ids {
                fonts.pair(Name(font.resource_name()), id);
            }
        }
        if !used_images.is_empty() {
            let mut xobjects = res.x_objects();
            for i in &used_images {
                xobjects.pair(Name(image_names[*i].as_bytes()), image_ids[*i]);
            }
        }
        res.finish();
        p.finish();

        let content = deflate(&page_content(&page.ops, &image_names));
        pdf.stream(*content_id, &content).filter(Filter::FlateDecode);
    }

    pdf.finish()
}

fn page_content(ops: &[Op], image_names: &[String]) -> Vec<u8> {
    let mut c = Content::new();
    for op in ops {
        match op {
            Op::Text {
                x,
                y,
                font,
                size,
                leading,
                lines,
                ..
            } => {
                c.begin_text();
                c.set_font(Name(font.resource_name()), *size);
                c.set_leading(*leading);
                c.next_line(*x, *y);
                for (i, line) in lines.iter().enumerate() {
                    if i > 0 {
                        c.next_line_using_leading();
                    }
                    c.show(Str(line));
                }
                c.end_text();
            }
            Op::Image { x, y, w, h, index } => {
                c.save_state();
                c.transform([*w, 0.0, 0.0, *h, *x, *y]);
                c.x_object(Name(image_names[*index].as_bytes()));
                c.restore_state();
            }
            Op::Line {
                x1,
                y1,
                x2,
                y2,
                width,
                gray,
            } => {
                c.save_state();
                c.set_line_width(*width);
                c.set_stroke_gray(*gray);
                c.move_to(*x1, *y1);
                c.line_to(*x2, *y2);
                c.stroke();
                c.restore_state();
            }
            Op::Rect {
                x,
                y,
                w,
                h,
                stroke,
                fill,
            } => {
                c.save_state();
                if let Some(g) = fill {
                    c.set_fill_gray(*g);
                    c.rect(*x, *y, *w, *h);
                    c.fill_nonzero();
                }
                if let Some(g) = stroke {
                    c.set_stroke_gray(*g);
                    c.set_line_width(0.75);
                    c.rect(*x, *y, *w, *h);
                    c.stroke();
                }
                c.restore_state();
            }
            Op::Polygon { points, fill } => {
                let Some(((x0, y0), rest)) = points.split_first() else {
                    continue;
                };
                c.save_state();
                c.set_fill_gray(*fill);
                c.move_to(*x0, *y0);
                for (x, y) in rest {
                    c.line_to(*x, *y);
                }
                c.close_path();
                c.fill_nonzero();
                c.restore_state();
            }
        }
    }
    c.finish().into_vec()
}
