//! Entities and detection-file loading.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::text::{normalize_text, Lexicon, Token};
use super::PerceptionError;
use crate::chem::{parse_smiles, Molecule};
use crate::geometry::{AxisBox, Point, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Molecule,
    Arrow,
    Text,
    Identifier,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Molecule,
        EntityKind::Arrow,
        EntityKind::Text,
        EntityKind::Identifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Molecule => "molecule",
            EntityKind::Arrow => "arrow",
            EntityKind::Text => "text",
            EntityKind::Identifier => "identifier",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<EntityKind> {
        EntityKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for EntityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrowDirection {
    Forward,
    Reversible,
    Resonance,
}

impl ArrowDirection {
    pub const ALL: [ArrowDirection; 3] = [
        ArrowDirection::Forward,
        ArrowDirection::Reversible,
        ArrowDirection::Resonance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArrowDirection::Forward => "forward",
            ArrowDirection::Reversible => "reversible",
            ArrowDirection::Resonance => "resonance",
        }
    }

    pub fn parse(s: &str) -> Option<ArrowDirection> {
        ArrowDirection::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutClass {
    SingleLine,
    MultipleLine,
    Tree,
    Graph,
}

impl LayoutClass {
    pub const ALL: [LayoutClass; 4] = [
        LayoutClass::SingleLine,
        LayoutClass::MultipleLine,
        LayoutClass::Tree,
        LayoutClass::Graph,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutClass::SingleLine => "single_line",
            LayoutClass::MultipleLine => "multiple_line",
            LayoutClass::Tree => "tree",
            LayoutClass::Graph => "graph",
        }
    }

    pub fn parse(s: &str) -> Option<LayoutClass> {
        LayoutClass::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for LayoutClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Molecule {
        smiles: Option<String>,
        /// `None` when `smiles` is absent or failed to parse.
        molecule: Option<Molecule>,
        parse_error: Option<String>,
    },
    Arrow {
        direction: Option<ArrowDirection>,
        tail: Point,
        head: Point,
    },
    Text {
        raw: String,
        tokens: Vec<Token>,
    },
    Identifier {
        label: String,
        molecule_ref: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub region: Region,
    pub payload: Payload,
}

impl Entity {
    pub fn molecule(&self) -> Option<&Molecule> {
        match &self.payload {
            Payload::Molecule { molecule, .. } => molecule.as_ref(),
            _ => None,
        }
    }

    pub fn smiles(&self) -> Option<&str> {
        match &self.payload {
            Payload::Molecule { smiles, .. } => smiles.as_deref(),
            _ => None,
        }
    }

    /// Tail and head anchors for arrows.
    pub fn arrow_axis(&self) -> Option<(Point, Point)> {
        match &self.payload {
            Payload::Arrow { tail, head, .. } => Some((*tail, *head)),
            _ => None,
        }
    }

    pub fn direction(&self) -> Option<ArrowDirection> {
        match &self.payload {
            Payload::Arrow { direction, .. } => *direction,
            _ => None,
        }
    }

    pub fn molecule_ref(&self) -> Option<&str> {
        match &self.payload {
            Payload::Identifier { molecule_ref, .. } => molecule_ref.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDocument {
    pub id: Option<String>,
    pub image_ref: Option<String>,
    pub diagram_bounds: AxisBox,
    pub entities: Vec<Entity>,
    pub layout_class: Option<LayoutClass>,
}

impl ReactionDocument {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.entities.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadWarning {
    /// SMILES kept on the entity but not parsed.
    UnparsedSmiles {
        id: String,
        error: String,
    },
    Clamped {
        id: String,
    },
    UnknownKey {
        pointer: String,
    },
    DanglingMoleculeRef {
        id: String,
        target: String,
    },
}

impl std::fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadWarning::UnparsedSmiles { id, error } => write!(f, "entity {id}: {error}"),
            LoadWarning::Clamped { id } => write!(f, "entity {id}: region clamped to diagram"),
            LoadWarning::UnknownKey { pointer } => write!(f, "ignored key {pointer}"),
            LoadWarning::DanglingMoleculeRef { id, target } => {
                write!(f, "entity {id}: molecule_ref {target} not found, dropped")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDocument {
    pub document: ReactionDocument,
    pub warnings: Vec<LoadWarning>,
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> PerceptionError {
    PerceptionError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn get_str<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<Option<&'a str>, PerceptionError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(schema(format!("{at}/{key}"), "expected a string")),
    }
}

fn get_number(obj: &Map<String, Value>, key: &str, at: &str) -> Result<f64, PerceptionError> {
    match obj.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| schema(format!("{at}/{key}"), "expected a finite number")),
        None => Err(schema(format!("{at}/{key}"), "missing required key")),
        Some(_) => Err(schema(format!("{at}/{key}"), "expected a number")),
    }
}

fn get_point(
    obj: &Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<Option<Point>, PerceptionError> {
    let Some(v) = obj.get(key) else {
        return Ok(None);
    };
    let ptr = format!("{at}/{key}");
    let arr = v
        .as_array()
        .ok_or_else(|| schema(&ptr, "expected [x, y]"))?;
    let nums: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
    match nums.as_deref() {
        Some([x, y]) if x.is_finite() && y.is_finite() => Ok(Some(Point::new(*x, *y))),
        _ => Err(schema(ptr, "expected [x, y]")),
    }
}

const TOP_KEYS: [&str; 6] = ["id", "image", "width", "height", "layout", "entities"];
const ENTITY_KEYS: [&str; 9] = [
    "id",
    "label",
    "bbox",
    "smiles",
    "text",
    "direction",
    "molecule_ref",
    "head",
    "tail",
];

/// Parses a detection file. Entities come back sorted by centroid (y, x), then id.
pub fn load_document(source: &[u8], lexicon: &Lexicon) -> Result<LoadedDocument, PerceptionError> {
    let root: Value =
        serde_json::from_slice(source).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| schema("", "expected a JSON object"))?;
    let mut warnings = Vec::new();
    for k in obj.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            warnings.push(LoadWarning::UnknownKey {
                pointer: format!("/{k}"),
            });
        }
    }

    let id = get_str(obj, "id", "")?.map(str::to_string);
    let image_ref = get_str(obj, "image", "")?.map(str::to_string);
    let width = get_number(obj, "width", "")?;
    let height = get_number(obj, "height", "")?;
    if width <= 0.0 {
        return Err(schema("/width", "must be positive"));
    }
    if height <= 0.0 {
        return Err(schema("/height", "must be positive"));
    }
    let bounds = AxisBox::new(0.0, 0.0, width, height).expect("positive extents");
    let layout_class = match get_str(obj, "layout", "")? {
        None => None,
        Some(s) => Some(
            LayoutClass::parse(s)
                .ok_or_else(|| schema("/layout", format!("unknown layout '{s}'")))?,
        ),
    };

    let list = match obj.get("entities") {
        Some(Value::Array(a)) => a,
        None => return Err(schema("/entities", "missing required key")),
        Some(_) => return Err(schema("/entities", "expected an array")),
    };

    let mut entities = Vec::with_capacity(list.len());
    let mut seen = std::collections::HashSet::new();
    for (i, item) in list.iter().enumerate() {
        let at = format!("/entities/{i}");
        let e = item
            .as_object()
            .ok_or_else(|| schema(&at, "expected an object"))?;
        for k in e.keys() {
            if !ENTITY_KEYS.contains(&k.as_str()) {
                warnings.push(LoadWarning::UnknownKey {
                    pointer: format!("{at}/{k}"),
                });
            }
        }
        let eid = get_str(e, "id", &at)?
            .ok_or_else(|| schema(format!("{at}/id"), "missing required key"))?
            .to_string();
        if eid.is_empty() {
            return Err(schema(format!("{at}/id"), "empty id"));
        }
        if !seen.insert(eid.clone()) {
            return Err(schema(
                format!("{at}/id"),
                format!("duplicate entity id '{eid}'"),
            ));
        }
        let label = get_str(e, "label", &at)?
            .ok_or_else(|| schema(format!("{at}/label"), "missing required key"))?;
        let kind = EntityKind::parse(label)
            .ok_or_else(|| schema(format!("{at}/label"), format!("unknown label '{label}'")))?;

        let bbox_ptr = format!("{at}/bbox");
        let bbox = e
            .get("bbox")
            .and_then(Value::as_array)
            .ok_or_else(|| schema(&bbox_ptr, "expected an array of numbers"))?;
        let nums: Vec<f64> = bbox
            .iter()
            .map(|v| v.as_f64())
            .collect::<Option<_>>()
            .ok_or_else(|| schema(&bbox_ptr, "expected an array of numbers"))?;
        match (kind, nums.len()) {
            (EntityKind::Arrow, 8) => {}
            (EntityKind::Arrow, n) => {
                return Err(schema(
                    &bbox_ptr,
                    format!("arrow bbox needs 8 numbers, got {n}"),
                ))
            }
            (_, 4) => {}
            (_, n) => {
                return Err(schema(
                    &bbox_ptr,
                    format!("{kind} bbox needs 4 numbers, got {n}"),
                ))
            }
        }
        let region = Region::from_slice(&nums).map_err(|err| schema(&bbox_ptr, err.to_string()))?;
        let (region, moved) = region.clamp_to(&bounds);
        if moved {
            log::warn!("entity {eid}: region clamped to diagram bounds");
            warnings.push(LoadWarning::Clamped { id: eid.clone() });
        }

        let allowed: &[&str] = match kind {
            EntityKind::Molecule => &["smiles"],
            EntityKind::Arrow => &["direction", "head", "tail"],
            EntityKind::Text => &["text"],
            EntityKind::Identifier => &["text", "molecule_ref"],
        };
        for k in [
            "smiles",
            "text",
            "direction",
            "molecule_ref",
            "head",
            "tail",
        ] {
            if e.contains_key(k) && !allowed.contains(&k) {
                return Err(schema(
                    format!("{at}/{k}"),
                    format!("not allowed on {kind}"),
                ));
            }
        }

        let payload = match kind {
            EntityKind::Molecule => {
                let smiles = get_str(e, "smiles", &at)?.map(str::to_string);
                let (molecule, parse_error) = match smiles.as_deref() {
                    None => (None, None),
                    Some(s) => match parse_smiles(s) {
                        Ok(m) => (Some(m), None),
                        Err(err) => {
                            let msg = PerceptionError::Payload {
                                id: eid.clone(),
                                message: err.to_string(),
                            }
                            .to_string();
                            log::warn!("{msg}");
                            warnings.push(LoadWarning::UnparsedSmiles {
                                id: eid.clone(),
                                error: msg.clone(),
                            });
                            (None, Some(err.to_string()))
                        }
                    },
                };
                Payload::Molecule {
                    smiles,
                    molecule,
                    parse_error,
                }
            }
            EntityKind::Arrow => {
                let direction = match get_str(e, "direction", &at)? {
                    None => None,
                    Some(s) => Some(ArrowDirection::parse(s).ok_or_else(|| {
                        schema(
                            format!("{at}/direction"),
                            format!("unknown direction '{s}'"),
                        )
                    })?),
                };
                let Region::Oriented(q) = &region else {
                    unreachable!("arrow arity checked above")
                };
                let (t0, h0) = q.end_midpoints();
                let tail = get_point(e, "tail", &at)?.unwrap_or(t0);
                let head = get_point(e, "head", &at)?.unwrap_or(h0);
                Payload::Arrow {
                    direction,
                    tail,
                    head,
                }
            }
            EntityKind::Text => {
                let raw = get_str(e, "text", &at)?.unwrap_or("").to_string();
                let tokens = normalize_text(&raw, lexicon);
                Payload::Text { raw, tokens }
            }
            EntityKind::Identifier => Payload::Identifier {
                label: get_str(e, "text", &at)?.unwrap_or("").to_string(),
                molecule_ref: get_str(e, "molecule_ref", &at)?.map(str::to_string),
            },
        };
        entities.push(Entity {
            id: eid,
            kind,
            region,
            payload,
        });
    }

    // identifier references must point at molecules of this document
    let molecule_ids: std::collections::HashSet<String> = entities
        .iter()
        .filter(|e| e.kind == EntityKind::Molecule)
        .map(|e| e.id.clone())
        .collect();
    for ent in &mut entities {
        if let Payload::Identifier { molecule_ref, .. } = &mut ent.payload {
            if let Some(target) = molecule_ref.as_ref() {
                if !molecule_ids.contains(target) {
                    warnings.push(LoadWarning::DanglingMoleculeRef {
                        id: ent.id.clone(),
                        target: target.clone(),
                    });
                    *molecule_ref = None;
                }
            }
        }
    }

    sort_entities(&mut entities);
    Ok(LoadedDocument {
        document: ReactionDocument {
            id,
            image_ref,
            diagram_bounds: bounds,
            entities,
            layout_class,
        },
        warnings,
    })
}

pub(crate) fn sort_entities(entities: &mut [Entity]) {
    entities.sort_by(|a, b| {
        let (ca, cb) = (a.region.center(), b.region.center());
        ca.y.total_cmp(&cb.y)
            .then(ca.x.total_cmp(&cb.x))
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Inverse of [`load_document`]: emits the detection-file form.
pub fn document_to_json(doc: &ReactionDocument) -> Value {
    let mut root = Map::new();
    if let Some(id) = &doc.id {
        root.insert("id".into(), Value::String(id.clone()));
    }
    if let Some(img) = &doc.image_ref {
        root.insert("image".into(), Value::String(img.clone()));
    }
    root.insert("width".into(), json_num(doc.diagram_bounds.x_max()));
    root.insert("height".into(), json_num(doc.diagram_bounds.y_max()));
    if let Some(l) = doc.layout_class {
        root.insert("layout".into(), Value::String(l.as_str().into()));
    }
    let ents: Vec<Value> = doc
        .entities
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("id".into(), Value::String(e.id.clone()));
            m.insert("label".into(), Value::String(e.kind.as_str().into()));
            m.insert(
                "bbox".into(),
                serde_json::to_value(&e.region).expect("region serializes"),
            );
            match &e.payload {
                Payload::Molecule { smiles, .. } => {
                    if let Some(s) = smiles {
                        m.insert("smiles".into(), Value::String(s.clone()));
                    }
                }
                Payload::Arrow {
                    direction,
                    tail,
                    head,
                } => {
                    if let Some(d) = direction {
                        m.insert("direction".into(), Value::String(d.as_str().into()));
                    }
                    m.insert(
                        "tail".into(),
                        Value::Array(vec![json_num(tail.x), json_num(tail.y)]),
                    );
                    m.insert(
                        "head".into(),
                        Value::Array(vec![json_num(head.x), json_num(head.y)]),
                    );
                }
                Payload::Text { raw, .. } => {
                    m.insert("text".into(), Value::String(raw.clone()));
                }
                Payload::Identifier {
                    label,
                    molecule_ref,
                } => {
                    m.insert("text".into(), Value::String(label.clone()));
                    if let Some(r) = molecule_ref {
                        m.insert("molecule_ref".into(), Value::String(r.clone()));
                    }
                }
            }
            Value::Object(m)
        })
        .collect();
    root.insert("entities".into(), Value::Array(ents));
    Value::Object(root)
}

fn json_num(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<LoadedDocument, PerceptionError> {
        load_document(s.as_bytes(), &Lexicon::builtin())
    }

    #[test]
    fn molecule_and_arrow() {
        let d = load(
            r#"{"width": 1400, "height": 300, "entities": [
                {"id": "a", "label": "arrow", "bbox": [513,155,880,153,880,130,513,132]},
                {"id": "m", "label": "molecule", "bbox": [38,2,434,234], "smiles": "CCO"}
            ]}"#,
        )
        .unwrap();
        let doc = d.document;
        assert_eq!(doc.entities.len(), 2);
        let m = doc.entity("m").unwrap();
        assert_eq!(m.kind, EntityKind::Molecule);
        assert!(m.molecule().is_some());
        let a = doc.entity("a").unwrap();
        assert!(a.region.is_oriented());
        let (tail, head) = a.arrow_axis().unwrap();
        assert_eq!(tail, Point::new(513.0, 143.5));
        assert_eq!(head, Point::new(880.0, 141.5));
        // centroid y: arrow 142.5, molecule 118
        assert_eq!(doc.entities[0].id, "m");
    }

    #[test]
    fn empty_and_duplicates() {
        let d = load(r#"{"width": 10, "height": 10, "entities": []}"#).unwrap();
        assert!(d.document.entities.is_empty());
        let err = load(
            r#"{"width": 10, "height": 10, "entities": [
                {"id": "x", "label": "text", "bbox": [0,0,1,1]},
                {"id": "x", "label": "text", "bbox": [0,0,1,1]}]}"#,
        )
        .unwrap_err();
        match err {
            PerceptionError::Schema { pointer, message } => {
                assert_eq!(pointer, "/entities/1/id");
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_pointers() {
        let cases = [
            (r#"[]"#, ""),
            (r#"{"height": 1, "entities": []}"#, "/width"),
            (r#"{"width": 1, "height": 0, "entities": []}"#, "/height"),
            (r#"{"width": 1, "height": 1}"#, "/entities"),
            (
                r#"{"width": 1, "height": 1, "layout": "spiral", "entities": []}"#,
                "/layout",
            ),
            (
                r#"{"width": 1, "height": 1, "entities": [{"id": "a", "label": "blob", "bbox": [0,0,1,1]}]}"#,
                "/entities/0/label",
            ),
            (
                r#"{"width": 1, "height": 1, "entities": [{"id": "a", "label": "arrow", "bbox": [0,0,1,1]}]}"#,
                "/entities/0/bbox",
            ),
            (
                r#"{"width": 1, "height": 1, "entities": [{"id": "a", "label": "text", "bbox": [1,0,0,1]}]}"#,
                "/entities/0/bbox",
            ),
            (
                r#"{"width": 1, "height": 1, "entities": [{"id": "a", "label": "text", "bbox": [0,0,1,1], "smiles": "C"}]}"#,
                "/entities/0/smiles",
            ),
            (
                r#"{"width": 1, "height": 1, "entities": [{"label": "text", "bbox": [0,0,1,1]}]}"#,
                "/entities/0/id",
            ),
        ];
        for (src, ptr) in cases {
            match load(src) {
                Err(PerceptionError::Schema { pointer, .. }) => assert_eq!(pointer, ptr, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn unparsed_smiles_retained() {
        let d = load(
            r#"{"width": 100, "height": 100, "entities": [
                {"id": "m", "label": "molecule", "bbox": [0,0,10,10], "smiles": "C1CC"}]}"#,
        )
        .unwrap();
        let m = d.document.entity("m").unwrap();
        assert_eq!(m.smiles(), Some("C1CC"));
        assert!(m.molecule().is_none());
        assert!(matches!(d.warnings[0], LoadWarning::UnparsedSmiles { .. }));
    }

    #[test]
    fn clamps_out_of_bounds() {
        let d = load(
            r#"{"width": 100, "height": 100, "entities": [
                {"id": "t", "label": "text", "bbox": [-5,10,120,20], "text": "heat"}]}"#,
        )
        .unwrap();
        assert_eq!(
            d.document.entities[0].region.to_vec(),
            vec![0.0, 10.0, 100.0, 20.0]
        );
        assert_eq!(d.warnings, vec![LoadWarning::Clamped { id: "t".into() }]);
    }

    #[test]
    fn text_is_normalized_and_refs_checked() {
        let d = load(
            r#"{"width": 100, "height": 100, "layout": "tree", "entities": [
                {"id": "t", "label": "text", "bbox": [0,0,10,10], "text": "ferric chloride"},
                {"id": "i", "label": "identifier", "bbox": [20,0,30,10], "text": "2a", "molecule_ref": "zz"}]}"#,
        )
        .unwrap();
        let doc = &d.document;
        assert_eq!(doc.layout_class, Some(LayoutClass::Tree));
        match &doc.entity("t").unwrap().payload {
            Payload::Text { tokens, .. } => assert_eq!(tokens[0].text, "FeCl3"),
            other => panic!("{other:?}"),
        }
        assert_eq!(doc.entity("i").unwrap().molecule_ref(), None);
        assert!(d
            .warnings
            .iter()
            .any(|w| matches!(w, LoadWarning::DanglingMoleculeRef { .. })));
    }

    #[test]
    fn serialize_then_load_is_stable() {
        let src = r#"{"id": "d1", "image": "x.png", "width": 640.5, "height": 480, "layout": "graph", "entities": [
            {"id": "a", "label": "arrow", "bbox": [10,50,100,50,100,40,10,40], "direction": "reversible"},
            {"id": "m", "label": "molecule", "bbox": [0,0,9,9], "smiles": "c1ccccc1"},
            {"id": "q", "label": "molecule", "bbox": [0,60,9,69], "smiles": "C(("},
            {"id": "i", "label": "identifier", "bbox": [0,10,5,15], "text": "1", "molecule_ref": "m"},
            {"id": "t", "label": "text", "bbox": [20,20,60,30], "text": "THF, 0 °C"}]}"#;
        let first = load(src).unwrap().document;
        let again = load(&document_to_json(&first).to_string())
            .unwrap()
            .document;
        assert_eq!(first, again);
    }
}
