//! Boxes, oriented quadrilaterals and IoU.
//!
//! Molecules, text and identifiers carry axis-aligned boxes `[x_min, y_min, x_max, y_max]`;
//! arrows carry oriented quads `[x1, y1, x2, y2, x3, y3, x4, y4]`. Both serialize as flat
//! JSON number arrays, integral values without a fractional part.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("box has inverted extents: {0:?}")]
    InvertedBox([f64; 4]),
    #[error("quad has zero area after convexification")]
    DegenerateQuad,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("bbox must have 4 or 8 numbers, got {0}")]
    Arity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl AxisBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let v = [x_min, y_min, x_max, y_max];
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::InvertedBox(v));
        }
        Ok(AxisBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x_min, self.y_min),
            Point::new(self.x_max, self.y_min),
            Point::new(self.x_max, self.y_max),
            Point::new(self.x_min, self.y_max),
        ]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn intersection_area(&self, o: &AxisBox) -> f64 {
        let w = self.x_max.min(o.x_max) - self.x_min.max(o.x_min);
        let h = self.y_max.min(o.y_max) - self.y_min.max(o.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    fn clamp_point(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }

    fn is_point(&self) -> bool {
        self.x_min == self.x_max && self.y_min == self.y_max
    }
}

/// Four-vertex region for arrows. The original vertex order is kept for output;
/// geometry works on the counter-clockwise convex hull.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedQuad {
    vertices: [Point; 4],
    hull: Vec<Point>,
}

impl OrientedQuad {
    pub fn new(vertices: [Point; 4]) -> Result<Self, GeometryError> {
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        let hull = convex_hull(&vertices);
        if hull.len() < 3 || polygon_area(&hull) <= 0.0 {
            return Err(GeometryError::DegenerateQuad);
        }
        Ok(OrientedQuad { vertices, hull })
    }

    pub fn from_flat(v: [f64; 8]) -> Result<Self, GeometryError> {
        OrientedQuad::new([
            Point::new(v[0], v[1]),
            Point::new(v[2], v[3]),
            Point::new(v[4], v[5]),
            Point::new(v[6], v[7]),
        ])
    }

    pub fn from_box(b: &AxisBox) -> Result<Self, GeometryError> {
        OrientedQuad::new(b.corners())
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    /// Counter-clockwise convex hull (3 or 4 points).
    pub fn hull(&self) -> &[Point] {
        &self.hull
    }

    pub fn to_array(&self) -> [f64; 8] {
        let v = &self.vertices;
        [
            v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y,
        ]
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.hull)
    }

    pub fn center(&self) -> Point {
        let sx: f64 = self.vertices.iter().map(|p| p.x).sum();
        let sy: f64 = self.vertices.iter().map(|p| p.y).sum();
        Point::new(sx / 4.0, sy / 4.0)
    }

    pub fn bounding_box(&self) -> AxisBox {
        let xs = self.vertices.iter().map(|p| p.x);
        let ys = self.vertices.iter().map(|p| p.y);
        AxisBox {
            x_min: xs.clone().fold(f64::INFINITY, f64::min),
            x_max: xs.fold(f64::NEG_INFINITY, f64::max),
            y_min: ys.clone().fold(f64::INFINITY, f64::min),
            y_max: ys.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Midpoints of the (v4, v1) and (v2, v3) edges: the short ends of a detector OBB
    /// listed starting from the tail side.
    pub fn end_midpoints(&self) -> (Point, Point) {
        let v = &self.vertices;
        let mid = |a: Point, b: Point| Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        (mid(v[3], v[0]), mid(v[1], v[2]))
    }
}

/// Spatial region of an entity.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Axis(AxisBox),
    Oriented(OrientedQuad),
}

/// How a quad is compared against other regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouMode {
    /// Convex polygon intersection.
    #[default]
    Polygon,
    /// Axis-aligned bounding box of each region.
    AxisHull,
}

impl Region {
    pub fn from_slice(v: &[f64]) -> Result<Region, GeometryError> {
        match v.len() {
            4 => Ok(Region::Axis(AxisBox::new(v[0], v[1], v[2], v[3])?)),
            8 => Ok(Region::Oriented(OrientedQuad::from_flat(
                v.try_into().unwrap(),
            )?)),
            n => Err(GeometryError::Arity(n)),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Region::Axis(b) => b.to_array().to_vec(),
            Region::Oriented(q) => q.to_array().to_vec(),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Region::Axis(b) => b.center(),
            Region::Oriented(q) => q.center(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Axis(b) => b.area(),
            Region::Oriented(q) => q.area(),
        }
    }

    pub fn bounding_box(&self) -> AxisBox {
        match self {
            Region::Axis(b) => *b,
            Region::Oriented(q) => q.bounding_box(),
        }
    }

    pub fn is_oriented(&self) -> bool {
        matches!(self, Region::Oriented(_))
    }

    /// Clamps every coordinate into `bounds`. Returns the region and whether anything moved.
    /// A quad that collapses to zero area is replaced by its clamped bounding box corners
    /// only if those still span an area; otherwise it is returned unchanged.
    pub fn clamp_to(&self, bounds: &AxisBox) -> (Region, bool) {
        match self {
            Region::Axis(b) => {
                let lo = bounds.clamp_point(Point::new(b.x_min, b.y_min));
                let hi = bounds.clamp_point(Point::new(b.x_max, b.y_max));
                let nb = AxisBox {
                    x_min: lo.x,
                    y_min: lo.y,
                    x_max: hi.x,
                    y_max: hi.y,
                };
                (Region::Axis(nb), nb != *b)
            }
            Region::Oriented(q) => {
                let clamped = q.vertices.map(|p| bounds.clamp_point(p));
                if clamped == q.vertices {
                    return (self.clone(), false);
                }
                match OrientedQuad::new(clamped) {
                    Ok(nq) => (Region::Oriented(nq), true),
                    Err(_) => (self.clone(), false),
                }
            }
        }
    }

    fn polygon(&self) -> Vec<Point> {
        match self {
            Region::Axis(b) => b.corners().to_vec(),
            Region::Oriented(q) => q.hull.clone(),
        }
    }
}

pub fn iou_axis(a: &AxisBox, b: &AxisBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a.is_point() && a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn iou_oriented(a: &OrientedQuad, b: &OrientedQuad) -> f64 {
    iou_polygons(&a.hull, &b.hull)
}

/// IoU of two regions. Two axis boxes always use the exact box formula; any quad
/// involvement follows `mode`.
pub fn iou_region(a: &Region, b: &Region, mode: IouMode) -> f64 {
    match (a, b, mode) {
        (Region::Axis(x), Region::Axis(y), _) => iou_axis(x, y),
        (_, _, IouMode::AxisHull) => iou_axis(&a.bounding_box(), &b.bounding_box()),
        (_, _, IouMode::Polygon) => {
            if a.area() <= 0.0 || b.area() <= 0.0 {
                return iou_axis(&a.bounding_box(), &b.bounding_box());
            }
            iou_polygons(&a.polygon(), &b.polygon())
        }
    }
}

/// Centroid distance divided by the diagram diagonal. `diagram` must have a positive diagonal.
pub fn center_distance_normalized(a: &Region, b: &Region, diagram: &AxisBox) -> f64 {
    let diag = diagram.diagonal();
    debug_assert!(diag > 0.0, "diagram must have a positive diagonal");
    a.center().dist(b.center()) / diag
}

fn iou_polygons(a: &[Point], b: &[Point]) -> f64 {
    let area_a = polygon_area(a);
    let area_b = polygon_area(b);
    let inter = polygon_area(&clip_convex(a, b));
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Absolute shoelace area.
pub(crate) fn polygon_area(p: &[Point]) -> f64 {
    if p.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..p.len() {
        let j = (i + 1) % p.len();
        s += p[i].x * p[j].y - p[j].x * p[i].y;
    }
    s.abs() / 2.0
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && lower[lower.len() - 1]
                .sub(lower[lower.len() - 2])
                .cross(p.sub(lower[lower.len() - 2]))
                <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && upper[upper.len() - 1]
                .sub(upper[upper.len() - 2])
                .cross(p.sub(upper[upper.len() - 2]))
                <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn ensure_ccw(p: &[Point]) -> Vec<Point> {
    let mut s = 0.0;
    for i in 0..p.len() {
        let j = (i + 1) % p.len();
        s += p[i].x * p[j].y - p[j].x * p[i].y;
    }
    let mut v = p.to_vec();
    if s < 0.0 {
        v.reverse();
    }
    v
}

/// Sutherland–Hodgman clipping of convex `subject` by convex `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let clip = ensure_ccw(clip);
    let mut output = ensure_ccw(subject);
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b.sub(a);
        let inside = |p: Point| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci {
                if !pi {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if pi {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p1: Point, p2: Point, a: Point, b: Point) -> Point {
    let d1 = p2.sub(p1);
    let d2 = b.sub(a);
    let denom = d1.cross(d2);
    if denom == 0.0 {
        return p2;
    }
    let t = a.sub(p1).cross(d2) / denom;
    Point::new(p1.x + t * d1.x, p1.y + t * d1.y)
}

#[derive(Clone, Copy)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Num::Int(i) => s.serialize_i64(i),
            Num::Float(f) => s.serialize_f64(f),
        }
    }
}

fn to_num(v: f64) -> Num {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Num::Int(v as i64)
    } else {
        Num::Float(v)
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.to_vec().into_iter().map(to_num))
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        Region::from_slice(&v).map_err(D::Error::custom)
    }
}

impl Serialize for AxisBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.to_array().into_iter().map(to_num))
    }
}

impl<'de> Deserialize<'de> for AxisBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        if v.len() != 4 {
            return Err(D::Error::custom(GeometryError::Arity(v.len())));
        }
        AxisBox::new(v[0], v[1], v[2], v[3]).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> AxisBox {
        AxisBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn axis_iou_basics() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou_axis(&a, &a), 1.0);
        assert_eq!(iou_axis(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert!((iou_axis(&a, &bx(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        // touching edges do not overlap
        assert_eq!(iou_axis(&a, &bx(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn degenerate_regions() {
        let p = bx(3.0, 3.0, 3.0, 3.0);
        assert_eq!(iou_axis(&p, &p), 1.0);
        let line = bx(0.0, 0.0, 5.0, 0.0);
        assert_eq!(iou_axis(&line, &line), 0.0);
        assert_eq!(iou_axis(&p, &bx(0.0, 0.0, 10.0, 10.0)), 0.0);
        assert!(OrientedQuad::from_flat([0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).is_err());
        assert!(AxisBox::new(5.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rotated_square() {
        let s = 0.5;
        let sq = OrientedQuad::from_flat([-s, -s, s, -s, s, s, -s, s]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let rot = OrientedQuad::from_flat([0.0, -r, r, 0.0, 0.0, r, -r, 0.0]).unwrap();
        let expected = 2.0 * (2f64.sqrt() - 1.0) / (2.0 - 2.0 * (2f64.sqrt() - 1.0));
        assert!((iou_oriented(&sq, &rot) - expected).abs() < 1e-12);
        assert!((expected - r).abs() < 1e-12);
    }

    #[test]
    fn crossed_vertex_order_is_convexified() {
        // bow-tie order of a unit square
        let q = OrientedQuad::from_flat([0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((q.area() - 1.0).abs() < 1e-12);
        assert_eq!(q.to_array(), [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn oriented_matches_axis_for_rectangles() {
        let a = bx(0.0, 0.0, 4.0, 3.0);
        let b = bx(1.0, -1.0, 6.0, 2.0);
        let qa = OrientedQuad::from_box(&a).unwrap();
        let qb = OrientedQuad::from_box(&b).unwrap();
        assert!((iou_oriented(&qa, &qb) - iou_axis(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn region_modes() {
        let arrow = Region::Oriented(
            OrientedQuad::from_flat([0.0, 1.0, 1.0, 0.0, 2.0, 1.0, 1.0, 2.0]).unwrap(),
        );
        let square = Region::Axis(bx(0.0, 0.0, 2.0, 2.0));
        let poly = iou_region(&arrow, &square, IouMode::Polygon);
        let hull = iou_region(&arrow, &square, IouMode::AxisHull);
        assert!((poly - 0.5).abs() < 1e-12);
        assert!((hull - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_distance() {
        let diagram = bx(0.0, 0.0, 100.0, 100.0);
        let a = Region::Axis(bx(-1.0, -1.0, 1.0, 1.0));
        let b = Region::Axis(bx(2.0, 3.0, 4.0, 5.0));
        let d = center_distance_normalized(&a, &b, &diagram);
        assert!((d - 5.0 / 20000f64.sqrt()).abs() < 1e-15);
        assert_eq!(center_distance_normalized(&a, &a, &diagram), 0.0);
        let c0 = Region::Axis(bx(0.0, 0.0, 0.0, 0.0));
        let c1 = Region::Axis(bx(100.0, 100.0, 100.0, 100.0));
        assert_eq!(center_distance_normalized(&c0, &c1, &diagram), 1.0);
    }

    #[test]
    fn serialization_is_bit_exact() {
        let r: Region = serde_json::from_str("[513, 155, 880, 153, 880, 130, 513, 132]").unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            "[513,155,880,153,880,130,513,132]"
        );
        let b: Region = serde_json::from_str("[38, 2, 434, 234]").unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[38,2,434,234]");
        let f: Region = serde_json::from_str("[0.5, 2, 3.25, 4]").unwrap();
        assert_eq!(serde_json::to_string(&f).unwrap(), "[0.5,2,3.25,4]");
        assert!(serde_json::from_str::<Region>("[1,2,3]").is_err());
    }

    #[test]
    fn clamping() {
        let bounds = bx(0.0, 0.0, 10.0, 10.0);
        let (r, moved) = Region::Axis(bx(-2.0, 1.0, 12.0, 5.0)).clamp_to(&bounds);
        assert!(moved);
        assert_eq!(r.to_vec(), vec![0.0, 1.0, 10.0, 5.0]);
        let (_, moved) = Region::Axis(bx(1.0, 1.0, 2.0, 2.0)).clamp_to(&bounds);
        assert!(!moved);
    }
}
