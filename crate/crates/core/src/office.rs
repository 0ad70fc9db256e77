//! Rule-based targets in office software: spreadsheet cells, gaps between
//! characters in a document, and handles of slide shapes.
//!
//! All geometry is in the native screenshot frame.

use serde::{Deserialize, Serialize};

use crate::action::{GroundingAction, PrimitiveKind};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageDims, Point};

/// Default drag offset for moving a slide shape.
pub const DEFAULT_DRAG_OFFSET: [f64; 2] = [40.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetGrid {
    /// Column boundaries; the first is the left edge of column A.
    pub col_edges: Vec<f64>,
    pub row_edges: Vec<f64>,
    pub col_header_band: BoundingBox,
    pub row_header_band: BoundingBox,
    pub image: ImageDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheetTarget {
    CellCenter,
    CornerTl,
    CornerTr,
    CornerBl,
    CornerBr,
    ColHeader,
    RowHeader,
    EdgeLeft,
    EdgeRight,
    EdgeTop,
    EdgeBottom,
}

fn check_edges(name: &str, edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::invalid(format!("{name} needs at least two edges")));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

impl SheetGrid {
    pub fn validate(&self) -> Result<()> {
        self.image.validate()?;
        check_edges("col_edges", &self.col_edges)?;
        check_edges("row_edges", &self.row_edges)
    }

    /// Rectangle of a zero-based (column, row) cell.
    pub fn cell_rect(&self, col: usize, row: usize) -> Option<BoundingBox> {
        let (x0, x1) = (*self.col_edges.get(col)?, *self.col_edges.get(col + 1)?);
        let (y0, y1) = (*self.row_edges.get(row)?, *self.row_edges.get(row + 1)?);
        BoundingBox::new(x0, y0, x1 - x0, y1 - y0).ok()
    }
}

/// Parse "C19" into zero-based (column, row). Columns are base-26 letters.
pub fn parse_cell_ref(cell: &str) -> Result<(usize, usize)> {
    let bad = || Error::MalformedCell(cell.to_string());
    let split = cell
        .find(|c: char| !c.is_ascii_alphabetic())
        .ok_or_else(bad)?;
    let (letters, digits) = cell.split_at(split);
    if letters.is_empty()
        || letters.len() > 3
        || digits.is_empty()
        || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let mut col = 0usize;
    for b in letters.to_ascii_uppercase().bytes() {
        col = col * 26 + (b - b'A' + 1) as usize;
    }
    let row: usize = digits.parse().map_err(|_| bad())?;
    if row == 0 {
        return Err(bad());
    }
    Ok((col - 1, row - 1))
}

pub fn column_name(mut col: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (col % 26) as u8);
        if col < 26 {
            break;
        }
        col = col / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn sheet_target(g: &SheetGrid, cell: &str, kind: SheetTarget) -> Result<Point> {
    g.validate()?;
    let (c, r) = parse_cell_ref(cell)?;
    let rect = g
        .cell_rect(c, r)
        .ok_or_else(|| Error::CellOutOfRange(cell.to_string()))?;
    let (l, t, rt, b) = (rect.x, rect.y, rect.right(), rect.bottom());
    let mid_x = (l + rt) / 2.0;
    let mid_y = (t + b) / 2.0;
    Ok(match kind {
        SheetTarget::CellCenter => Point::new(mid_x, mid_y),
        SheetTarget::CornerTl => Point::new(l, t),
        SheetTarget::CornerTr => Point::new(rt, t),
        SheetTarget::CornerBl => Point::new(l, b),
        SheetTarget::CornerBr => Point::new(rt, b),
        SheetTarget::ColHeader => Point::new(mid_x, g.col_header_band.center().y),
        SheetTarget::RowHeader => Point::new(g.row_header_band.center().x, mid_y),
        SheetTarget::EdgeLeft => Point::new(l, mid_y),
        SheetTarget::EdgeRight => Point::new(rt, mid_y),
        SheetTarget::EdgeTop => Point::new(mid_x, t),
        SheetTarget::EdgeBottom => Point::new(mid_x, b),
    })
}

/// A run of text with one box per character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRun {
    pub text: String,
    pub char_boxes: Vec<BoundingBox>,
}

impl TextRun {
    pub fn validate(&self) -> Result<()> {
        let n = self.text.chars().count();
        if n != self.char_boxes.len() {
            return Err(Error::invalid(format!(
                "text run has {n} characters but {} boxes",
                self.char_boxes.len()
            )));
        }
        Ok(())
    }
}

fn flatten(runs: &[TextRun]) -> Result<(Vec<char>, Vec<BoundingBox>)> {
    let mut chars = Vec::new();
    let mut boxes = Vec::new();
    for r in runs {
        r.validate()?;
        chars.extend(r.text.chars());
        boxes.extend(r.char_boxes.iter().copied());
    }
    Ok((chars, boxes))
}

fn find_seq(hay: &[char], needle: &[char]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

fn gap_point(a: &BoundingBox, b: &BoundingBox) -> Point {
    let u = a.union(b);
    Point::new((a.right() + b.x) / 2.0, u.y + u.h / 2.0)
}

/// Index (into the flattened text) of the left character of the first
/// `(left, right)` pair inside the first occurrence of `query`.
fn locate_pair(chars: &[char], query: &str, left: char, right: char) -> Result<usize> {
    let q: Vec<char> = query.chars().collect();
    let start = find_seq(chars, &q).ok_or_else(|| Error::QueryAbsent(query.to_string()))?;
    (start..start + q.len() - 1)
        .find(|&i| chars[i] == left && chars[i + 1] == right)
        .ok_or(Error::PairAbsent(left, right))
}

/// Point midway between two adjacent characters inside a located query.
pub fn doc_gap_target(
    runs: &[TextRun],
    query: &str,
    left_char: char,
    right_char: char,
) -> Result<Point> {
    let (chars, boxes) = flatten(runs)?;
    let i = locate_pair(&chars, query, left_char, right_char)?;
    Ok(gap_point(&boxes[i], &boxes[i + 1]))
}

/// Selection drag between two character gaps inside the same query span.
pub fn doc_select_drag(
    runs: &[TextRun],
    query: &str,
    start: (char, char),
    end: (char, char),
) -> Result<(Point, Point)> {
    let (chars, boxes) = flatten(runs)?;
    let a = locate_pair(&chars, query, start.0, start.1)?;
    let b = locate_pair(&chars, query, end.0, end.1)?;
    Ok((
        gap_point(&boxes[a], &boxes[a + 1]),
        gap_point(&boxes[b], &boxes[b + 1]),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideShape {
    pub bbox: BoundingBox,
    #[serde(default)]
    pub kind: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub thumbnail: Option<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Handle {
    Tl,
    Tc,
    Tr,
    Ml,
    Mr,
    Bl,
    Bc,
    Br,
    ThumbnailCenter,
}

pub fn slide_handle_target(s: &SlideShape, handle: Handle) -> Result<Point> {
    let b = &s.bbox;
    let (l, cx, r) = (b.x, b.x + b.w / 2.0, b.right());
    let (t, cy, btm) = (b.y, b.y + b.h / 2.0, b.bottom());
    Ok(match handle {
        Handle::Tl => Point::new(l, t),
        Handle::Tc => Point::new(cx, t),
        Handle::Tr => Point::new(r, t),
        Handle::Ml => Point::new(l, cy),
        Handle::Mr => Point::new(r, cy),
        Handle::Bl => Point::new(l, btm),
        Handle::Bc => Point::new(cx, btm),
        Handle::Br => Point::new(r, btm),
        Handle::ThumbnailCenter => s.thumbnail.ok_or(Error::MissingThumbnail)?.center(),
    })
}

/// Move a shape: from its center to its center plus `offset`.
pub fn slide_drag(s: &SlideShape, offset: [f64; 2]) -> (Point, Point) {
    let c = s.bbox.center();
    (c, Point::new(c.x + offset[0], c.y + offset[1]))
}

/// Geometry and target of one office task, tagged by `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum OfficeTarget {
    Sheet {
        grid: SheetGrid,
        cell: String,
        kind: SheetTarget,
    },
    DocGap {
        runs: Vec<TextRun>,
        query: String,
        left_char: char,
        right_char: char,
    },
    DocSelect {
        runs: Vec<TextRun>,
        query: String,
        start: (char, char),
        end: (char, char),
    },
    SlideHandle {
        shape: SlideShape,
        handle: Handle,
    },
    SlideDrag {
        shape: SlideShape,
        #[serde(default)]
        offset: Option<[f64; 2]>,
    },
}

impl OfficeTarget {
    /// Source tag of the application family.
    pub fn source(&self) -> &'static str {
        match self {
            OfficeTarget::Sheet { .. } => "sheet",
            OfficeTarget::DocGap { .. } | OfficeTarget::DocSelect { .. } => "doc",
            OfficeTarget::SlideHandle { .. } | OfficeTarget::SlideDrag { .. } => "slide",
        }
    }
}

/// Screenshot reference inside a task fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskImage {
    pub path: String,
    pub width: u32,
    pub height: u32,
}

/// One office grounding task as stored in fixture files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfficeTask {
    pub id: String,
    pub image: TaskImage,
    #[serde(default)]
    pub image_id: Option<String>,
    pub instruction: String,
    /// Action for single-point targets; drags ignore it.
    #[serde(default = "default_kind")]
    pub action: PrimitiveKind,
    #[serde(flatten)]
    pub target: OfficeTarget,
}

fn default_kind() -> PrimitiveKind {
    PrimitiveKind::LeftClick
}

impl OfficeTask {
    /// Native-frame grounding action for this task.
    pub fn ground(&self, drag_offset: [f64; 2]) -> Result<GroundingAction> {
        let (kind, coordinate, end) = match &self.target {
            OfficeTarget::Sheet { grid, cell, kind } => {
                (self.action, sheet_target(grid, cell, *kind)?, None)
            }
            OfficeTarget::DocGap {
                runs,
                query,
                left_char,
                right_char,
            } => (
                self.action,
                doc_gap_target(runs, query, *left_char, *right_char)?,
                None,
            ),
            OfficeTarget::DocSelect {
                runs,
                query,
                start,
                end,
            } => {
                let (a, b) = doc_select_drag(runs, query, *start, *end)?;
                (PrimitiveKind::Drag, a, Some(b))
            }
            OfficeTarget::SlideHandle { shape, handle } => {
                (self.action, slide_handle_target(shape, *handle)?, None)
            }
            OfficeTarget::SlideDrag { shape, offset } => {
                let (a, b) = slide_drag(shape, offset.unwrap_or(drag_offset));
                (PrimitiveKind::Drag, a, Some(b))
            }
        };
        let dims = ImageDims::new(self.image.width, self.image.height);
        for p in std::iter::once(coordinate).chain(end) {
            if !dims.contains(p) {
                return Err(Error::OutOfFrame {
                    x: p.x,
                    y: p.y,
                    width: dims.width,
                    height: dims.height,
                });
            }
        }
        Ok(GroundingAction {
            kind,
            coordinate,
            end,
            text: None,
            instantiated_instruction: self.instruction.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn uniform() -> SheetGrid {
        SheetGrid {
            col_edges: vec![0.0, 100.0, 200.0, 300.0],
            row_edges: vec![0.0, 20.0, 40.0],
            col_header_band: bb(0.0, 0.0, 300.0, 20.0),
            row_header_band: bb(0.0, 0.0, 30.0, 40.0),
            image: ImageDims::new(400, 100),
        }
    }

    #[test]
    fn uniform_grid_targets() {
        let g = uniform();
        assert_eq!(
            sheet_target(&g, "B2", SheetTarget::CellCenter).unwrap(),
            Point::new(150.0, 30.0)
        );
        assert_eq!(
            sheet_target(&g, "C1", SheetTarget::CornerTl).unwrap(),
            Point::new(200.0, 0.0)
        );
        assert_eq!(
            sheet_target(&g, "A2", SheetTarget::EdgeBottom).unwrap(),
            Point::new(50.0, 40.0)
        );
        assert_eq!(
            sheet_target(&g, "B1", SheetTarget::ColHeader).unwrap(),
            Point::new(150.0, 10.0)
        );
        assert!(matches!(
            sheet_target(&g, "D1", SheetTarget::CellCenter),
            Err(Error::CellOutOfRange(_))
        ));
        assert!(matches!(
            sheet_target(&g, "1B", SheetTarget::CellCenter),
            Err(Error::MalformedCell(_))
        ));
        assert!(matches!(
            sheet_target(&g, "B0", SheetTarget::CellCenter),
            Err(Error::MalformedCell(_))
        ));
    }

    #[test]
    fn column_letters_are_bijective_base26() {
        for (name, idx) in [
            ("A", 0),
            ("Z", 25),
            ("AA", 26),
            ("AZ", 51),
            ("BA", 52),
            ("ZZ", 701),
            ("AAA", 702),
        ] {
            assert_eq!(parse_cell_ref(&format!("{name}1")).unwrap().0, idx);
            assert_eq!(column_name(idx), name);
        }
    }

    fn mono(text: &str, x0: f64, adv: f64, glyph: f64) -> TextRun {
        TextRun {
            text: text.into(),
            char_boxes: (0..text.chars().count())
                .map(|i| bb(x0 + i as f64 * adv, 100.0, glyph, 16.0))
                .collect(),
        }
    }

    #[test]
    fn gap_between_abutting_glyphs() {
        let runs = [mono("for", 0.0, 10.0, 10.0)];
        assert_eq!(
            doc_gap_target(&runs, "for", 'f', 'o').unwrap(),
            Point::new(10.0, 108.0)
        );
        assert!(matches!(
            doc_gap_target(&runs, "for", 'z', 'q'),
            Err(Error::PairAbsent('z', 'q'))
        ));
        assert!(matches!(
            doc_gap_target(&runs, "bar", 'b', 'a'),
            Err(Error::QueryAbsent(_))
        ));
    }

    #[test]
    fn pair_must_sit_inside_the_query() {
        // "ti" occurs before the query; the match must come from inside it
        let runs = [mono("tip. Vestibulum a end", 0.0, 9.0, 7.0)];
        let p = doc_gap_target(&runs, ". Vestibulum a ", 't', 'i').unwrap();
        let t = runs[0].text.find(". Vest").unwrap() + 5;
        assert!(p.x > runs[0].char_boxes[t].right() && p.x < runs[0].char_boxes[t + 1].x);
    }

    #[test]
    fn handles() {
        let s = SlideShape {
            bbox: bb(100.0, 200.0, 300.0, 100.0),
            kind: "text".into(),
            text: None,
            thumbnail: None,
        };
        assert_eq!(
            slide_handle_target(&s, Handle::Tc).unwrap(),
            Point::new(250.0, 200.0)
        );
        assert_eq!(
            slide_handle_target(&s, Handle::Br).unwrap(),
            Point::new(400.0, 300.0)
        );
        assert!(matches!(
            slide_handle_target(&s, Handle::ThumbnailCenter),
            Err(Error::MissingThumbnail)
        ));
        assert_eq!(
            slide_drag(&s, DEFAULT_DRAG_OFFSET).1,
            Point::new(290.0, 250.0)
        );
    }

    proptest! {
        #[test]
        fn center_is_mean_of_corners(
            widths in proptest::collection::vec(1u32..200, 1..8),
            heights in proptest::collection::vec(1u32..60, 1..8),
            x0 in 0u32..100, y0 in 0u32..100, pick in any::<(usize, usize)>()
        ) {
            let mut cols = vec![x0 as f64];
            for w in &widths { cols.push(cols.last().unwrap() + *w as f64); }
            let mut rows = vec![y0 as f64];
            for h in &heights { rows.push(rows.last().unwrap() + *h as f64); }
            let g = SheetGrid {
                col_edges: cols, row_edges: rows,
                col_header_band: bb(0.0, 0.0, 10.0, 10.0), row_header_band: bb(0.0, 0.0, 10.0, 10.0),
                image: ImageDims::new(4000, 4000),
            };
            let cell = format!("{}{}", column_name(pick.0 % widths.len()), pick.1 % heights.len() + 1);
            let c = sheet_target(&g, &cell, SheetTarget::CellCenter).unwrap();
            let corners = [SheetTarget::CornerTl, SheetTarget::CornerTr, SheetTarget::CornerBl, SheetTarget::CornerBr]
                .map(|k| sheet_target(&g, &cell, k).unwrap());
            // all inputs are integers, so the means are exact in binary
            prop_assert_eq!(c.x, corners.iter().map(|p| p.x).sum::<f64>() / 4.0);
            prop_assert_eq!(c.y, corners.iter().map(|p| p.y).sum::<f64>() / 4.0);
        }

        #[test]
        fn handles_commute_with_translation(
            x in 0.0f64..500.0, y in 0.0f64..500.0, w in 1.0f64..300.0, h in 1.0f64..300.0,
            dx in -100.0f64..100.0, dy in -100.0f64..100.0, hi in 0usize..8
        ) {
            let handles = [Handle::Tl, Handle::Tc, Handle::Tr, Handle::Ml, Handle::Mr, Handle::Bl, Handle::Bc, Handle::Br];
            let s = SlideShape { bbox: bb(x, y, w, h), kind: String::new(), text: None, thumbnail: None };
            let moved = SlideShape { bbox: s.bbox.translate(dx, dy), ..s.clone() };
            let a = slide_handle_target(&s, handles[hi]).unwrap();
            let b = slide_handle_target(&moved, handles[hi]).unwrap();
            prop_assert!((b.x - dx - a.x).abs() < 1e-9 && (b.y - dy - a.y).abs() < 1e-9);
        }
    }
}
