//! Deterministic SVG annotation of a document and its reactions.

use std::fmt::Write as _;

use crate::geometry::{Point, Region};
use crate::perception::{EntityKind, PerceptionError, ReactionDocument};
use crate::reaction::Reaction;

fn kind_color(k: EntityKind) -> &'static str {
    match k {
        EntityKind::Molecule => "#1f77b4",
        EntityKind::Arrow => "#d62728",
        EntityKind::Text => "#2ca02c",
        EntityKind::Identifier => "#9467bd",
    }
}

/// Shortest decimal with at most two fractional digits.
fn num(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        let s = format!("{r:.2}");
        s.trim_end_matches('0').to_string()
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn hue(k: usize) -> String {
    format!("hsl({},70%,40%)", (k * 137) % 360)
}

fn shape(out: &mut String, region: &Region, attrs: &str) {
    match region {
        Region::Axis(b) => {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" {attrs}/>"#,
                num(b.x_min()),
                num(b.y_min()),
                num(b.width()),
                num(b.height())
            );
        }
        Region::Oriented(q) => {
            let pts: Vec<String> = q
                .vertices()
                .iter()
                .map(|p| format!("{},{}", num(p.x), num(p.y)))
                .collect();
            let _ = writeln!(out, r#"<polygon points="{}" {attrs}/>"#, pts.join(" "));
        }
    }
}

/// Two short strokes at the head, opening back toward the tail.
fn chevron(out: &mut String, tail: Point, head: Point, color: &str) {
    let (dx, dy) = (head.x - tail.x, head.y - tail.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return;
    }
    let (ux, uy) = (dx / len, dy / len);
    let size = (len * 0.15).clamp(4.0, 14.0);
    let (c, s) = (0.5f64.cos(), 0.5f64.sin());
    let wing = |sign: f64| {
        let rx = ux * c - sign * uy * s;
        let ry = sign * ux * s + uy * c;
        Point::new(head.x - rx * size, head.y - ry * size)
    };
    let (a, b) = (wing(1.0), wing(-1.0));
    let _ = writeln!(
        out,
        r#"<polyline class="chevron" points="{},{} {},{} {},{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        num(a.x),
        num(a.y),
        num(head.x),
        num(head.y),
        num(b.x),
        num(b.y)
    );
}

/// Entity boxes colored by kind, then one `<g class="reaction">` per reaction with role labels.
pub fn render_svg(
    doc: &ReactionDocument,
    reactions: &[Reaction],
) -> Result<String, PerceptionError> {
    for r in reactions {
        if let Some(id) = r.entity_ids().find(|id| doc.entity(id).is_none()) {
            return Err(PerceptionError::Reference { id: id.clone() });
        }
    }
    let b = &doc.diagram_bounds;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="{} {} {w} {h}">"#,
        num(b.x_min()),
        num(b.y_min()),
        w = num(b.width()),
        h = num(b.height()),
    );
    let _ = writeln!(
        out,
        r#"<rect class="background" x="{}" y="{}" width="{}" height="{}" fill="white"/>"#,
        num(b.x_min()),
        num(b.y_min()),
        num(b.width()),
        num(b.height())
    );
    out.push_str("<g class=\"entities\">\n");
    for e in &doc.entities {
        let color = kind_color(e.kind);
        let attrs = format!(
            r#"class="entity {}" data-id="{}" fill="none" stroke="{color}" stroke-width="1""#,
            e.kind.as_str(),
            escape(&e.id)
        );
        shape(&mut out, &e.region, &attrs);
        if let Some((tail, head)) = e.arrow_axis() {
            chevron(&mut out, tail, head, color);
        }
    }
    out.push_str("</g>\n");
    for (k, r) in reactions.iter().enumerate() {
        let color = hue(k);
        let _ = writeln!(
            out,
            r#"<g class="reaction" data-index="{k}" stroke="{color}">"#
        );
        let roles = [
            ("R", &r.reactants),
            ("C", &r.conditions),
            ("P", &r.products),
            ("A", &r.arrows),
        ];
        for (tag, ids) in roles {
            for id in ids {
                let e = doc.entity(id).expect("ids checked above");
                let attrs = format!(
                    r#"class="member" data-id="{}" data-role="{tag}" fill="none" stroke-width="3" stroke-dasharray="6 3""#,
                    escape(id)
                );
                shape(&mut out, &e.region, &attrs);
                let bb = e.region.bounding_box();
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" fill="{color}" stroke="none" font-size="14">{tag}{}</text>"#,
                    num(bb.x_min() + 2.0),
                    num(bb.y_min() + 14.0),
                    k + 1
                );
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{load_document, resolve_reactions, Lexicon, RESOLVE_IOU};
    use crate::reaction::WireReaction;

    fn fig() -> (ReactionDocument, Vec<Reaction>) {
        let doc = load_document(
            include_bytes!("../../tests/data/fig_document.json"),
            &Lexicon::builtin(),
        )
        .unwrap()
        .document;
        let wire: Vec<WireReaction> =
            serde_json::from_str(include_str!("../../tests/data/fig_reactions.json")).unwrap();
        let rx = resolve_reactions(&wire, &doc, RESOLVE_IOU).unwrap();
        (doc, rx)
    }

    #[test]
    fn number_format() {
        assert_eq!(num(3.0), "3");
        assert_eq!(num(2.5), "2.5");
        assert_eq!(num(1.0 / 3.0), "0.33");
        assert_eq!(num(-0.0), "0");
    }

    #[test]
    fn empty_reactions_draw_only_entities() {
        let (doc, _) = fig();
        let svg = render_svg(&doc, &[]).unwrap();
        assert_eq!(svg.matches("class=\"entity ").count(), doc.entities.len());
        assert!(!svg.contains("class=\"reaction\""));
    }

    #[test]
    fn two_reaction_groups_and_stable_bytes() {
        let (doc, rx) = fig();
        let a = render_svg(&doc, &rx).unwrap();
        assert_eq!(a.matches("<g class=\"reaction\"").count(), 2);
        assert_eq!(a, render_svg(&doc, &rx).unwrap());
        assert!(a.contains("<polygon points=\"513,155 880,153 880,130 513,132\""));
    }

    #[test]
    fn dangling_id_is_reference_error() {
        let (doc, mut rx) = fig();
        rx[0].products.push("ghost".into());
        assert_eq!(
            render_svg(&doc, &rx),
            Err(PerceptionError::Reference { id: "ghost".into() })
        );
    }
}
