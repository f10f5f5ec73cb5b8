//! Text formats: series CSV, field documents, lens specs, basis export and
//! coefficient lists. Floats are written in shortest round-trip form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{load_series, DomainGraph, FieldError, ScalarField};
use crate::lens::{
    assemble_lens, build_branch_lens, threshold_region, validate_lens, Direction, Fragment, Lens, LensError,
    Region, ThresholdCut,
};
use crate::mlf::{Criticality, MiddlePoint, MiddleSpace, MonotoneFactor};
use crate::transform::VariletBasis;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{0}")]
    Other(String),
}

/// Reads a one-column series. A first line that is not a number is taken as
/// a header; blank lines are skipped.
pub fn parse_series(text: &str) -> Result<Vec<f64>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ParseError::Csv {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 1 {
            return Err(ParseError::Csv {
                line,
                message: format!("expected one value, found {} columns", record.len()),
            });
        }
        let cell = &record[0];
        match cell.parse::<f64>() {
            Ok(x) if x.is_finite() => values.push(x),
            Ok(_) => {
                return Err(ParseError::Csv {
                    line,
                    message: format!("`{cell}` is not finite"),
                })
            }
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(ParseError::Csv {
                    line,
                    message: format!("`{cell}` is not a number"),
                })
            }
        }
    }
    Ok(values)
}

pub fn write_series(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 8);
    for x in values {
        out.push_str(&format!("{}\n", x + 0.0));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: String,
    pub endpoints: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl FieldDoc {
    pub fn from_field(field: &ScalarField) -> Self {
        let g = field.graph();
        Self {
            vertices: (0..g.vertex_count())
                .map(|v| VertexDoc {
                    id: g.vertex_id(v).to_string(),
                    value: field.value(v),
                })
                .collect(),
            edges: graph_edges(g),
        }
    }

    pub fn to_field(&self) -> Result<ScalarField, FieldError> {
        let ids = self.vertices.iter().map(|v| v.id.clone()).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| (e.id.clone(), e.endpoints[0].clone(), e.endpoints[1].clone()))
            .collect();
        let graph = DomainGraph::from_ids(ids, edges)?;
        for v in &self.vertices {
            if !v.value.is_finite() {
                return Err(FieldError::NonFinite(v.id.clone()));
            }
        }
        ScalarField::new(Arc::new(graph), self.vertices.iter().map(|v| v.value).collect())
    }
}

fn graph_edges(g: &DomainGraph) -> Vec<EdgeDoc> {
    (0..g.edge_count())
        .map(|e| {
            let [a, b] = g.endpoints(e);
            EdgeDoc {
                id: g.edge_id(e).to_string(),
                endpoints: [g.vertex_id(a).to_string(), g.vertex_id(b).to_string()],
            }
        })
        .collect()
}

pub fn field_to_json(field: &ScalarField) -> String {
    let mut s = serde_json::to_string_pretty(&FieldDoc::from_field(field)).expect("field serializes");
    s.push('\n');
    s
}

pub fn field_from_json(text: &str) -> Result<ScalarField, ParseError> {
    let doc: FieldDoc = serde_json::from_str(text)?;
    Ok(doc.to_field()?)
}

/// How a field was read, so it can be written back the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Series,
    Document,
}

/// A field document when the text starts with `{`, a series otherwise.
pub fn parse_field(text: &str) -> Result<(ScalarField, FieldFormat), ParseError> {
    if text.trim_start().starts_with('{') {
        Ok((field_from_json(text)?, FieldFormat::Document))
    } else {
        let values = parse_series(text)?;
        Ok((load_series(&values)?, FieldFormat::Series))
    }
}

/// Whether `graph` is the chain a series of its length loads into.
pub fn is_series_domain(graph: &DomainGraph) -> bool {
    DomainGraph::chain(graph.vertex_count()).is_ok_and(|chain| chain == *graph)
}

/// Writes a series when asked and the domain is a path, in walk order from
/// its lower-indexed end; a document otherwise. Vertices inserted into a
/// series domain become samples of their own.
pub fn write_field(field: &ScalarField, format: FieldFormat) -> String {
    if format == FieldFormat::Series {
        if let Some(order) = field.graph().chain_order() {
            let values: Vec<f64> = order.iter().map(|&v| field.value(v)).collect();
            return write_series(&values);
        }
    }
    field_to_json(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiddleVertexDoc {
    pub index: usize,
    pub level: f64,
    pub kind: Criticality,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiddleEdgeDoc {
    pub index: usize,
    pub lower: usize,
    pub upper: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiddleSpaceDoc {
    pub vertices: Vec<MiddleVertexDoc>,
    pub edges: Vec<MiddleEdgeDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_components: Vec<f64>,
    pub ttv: f64,
}

impl MiddleSpaceDoc {
    pub fn new(ms: &MiddleSpace) -> Self {
        Self {
            vertices: ms
                .vertices()
                .iter()
                .enumerate()
                .map(|(index, v)| MiddleVertexDoc {
                    index,
                    level: v.level,
                    kind: v.kind,
                    component: v.component,
                })
                .collect(),
            edges: (0..ms.edge_count())
                .map(|e| {
                    let me = ms.edge(e);
                    MiddleEdgeDoc {
                        index: e,
                        lower: me.lower,
                        upper: me.upper,
                        length: ms.edge_length(e),
                    }
                })
                .collect(),
            constant_components: ms.degenerate_components().iter().map(|d| d.level).collect(),
            ttv: crate::ttv::ttv(ms),
        }
    }
}

/// Seed of a threshold region: a middle-space point, or a domain vertex
/// mapped through the monotone factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    DomainVertex { domain_vertex: String },
    Middle(MiddlePoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSpec {
    pub level: f64,
    pub direction: Direction,
    pub seed: SeedSpec,
}

/// A lens, either listed region by region or described by a builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LensSpec {
    Trivial,
    Branch {
        min_amplitude: f64,
    },
    Threshold {
        cuts: Vec<CutSpec>,
    },
    /// Every region in lens order, roots included.
    Regions {
        regions: Vec<Vec<Fragment>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        middle_space: Option<MiddleSpaceDoc>,
    },
}

impl LensSpec {
    pub fn explicit(ms: &MiddleSpace, lens: &Lens) -> Self {
        LensSpec::Regions {
            regions: lens.regions().iter().map(|r| r.fragments().to_vec()).collect(),
            middle_space: Some(MiddleSpaceDoc::new(ms)),
        }
    }

    pub fn resolve(&self, ms: &MiddleSpace, mf: &MonotoneFactor) -> Result<Lens, LensError> {
        match self {
            LensSpec::Trivial => Ok(Lens::trivial(ms)),
            LensSpec::Branch { min_amplitude } => {
                if !min_amplitude.is_finite() {
                    return Err(LensError::BadLevel(*min_amplitude));
                }
                Ok(build_branch_lens(ms, *min_amplitude))
            }
            LensSpec::Threshold { cuts } => {
                let regions = cuts
                    .iter()
                    .map(|c| {
                        let seed = match &c.seed {
                            SeedSpec::Middle(p) => *p,
                            SeedSpec::DomainVertex { domain_vertex } => mf
                                .graph()
                                .vertex_index(domain_vertex)
                                .and_then(|v| mf.location(v))
                                .ok_or_else(|| LensError::UnknownSeedVertex(domain_vertex.clone()))?,
                        };
                        let cut = ThresholdCut {
                            level: c.level,
                            direction: c.direction,
                            seed,
                        };
                        threshold_region(ms, &cut)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                assemble_lens(ms, regions)
            }
            LensSpec::Regions { regions, .. } => {
                let lens = Lens::new(regions.iter().map(|r| Region::new(r.clone())).collect());
                let report = validate_lens(ms, &lens);
                if report.is_valid() {
                    Ok(lens)
                } else {
                    Err(LensError::Invalid(report))
                }
            }
        }
    }
}

pub fn parse_lens_spec(text: &str) -> Result<LensSpec, ParseError> {
    Ok(serde_json::from_str(text)?)
}

pub fn lens_spec_to_json(spec: &LensSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("lens serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointDoc {
    pub point: MiddlePoint,
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariletDoc {
    pub index: usize,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predecessor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_level: Option<f64>,
    pub gamma: Vec<BreakpointDoc>,
    /// Values on the vertices of `refined_domain`, in its order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedDomainDoc {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDoc>,
}

/// Everything needed to filter later: the input field and lens, plus the
/// basis itself for inspection. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDoc {
    pub field: FieldDoc,
    pub lens: LensSpec,
    pub ttv: f64,
    pub refined_domain: RefinedDomainDoc,
    pub varilets: Vec<VariletDoc>,
}

impl BasisDoc {
    pub fn new(basis: &VariletBasis) -> Self {
        let lens = basis.lens();
        let sub = basis.subdivision();
        let refined = basis.domain().graph();
        let varilets = (0..basis.len())
            .map(|i| {
                let gamma = basis.gamma(i);
                VariletDoc {
                    index: i + 1,
                    amplitude: basis.amplitudes()[i],
                    predecessor: lens.predecessor(i).map(|k| k + 1),
                    boundary_level: lens.boundary_level(i),
                    gamma: (0..sub.vertex_count())
                        .map(|v| BreakpointDoc {
                            point: sub.origin(v),
                            level: sub.level(v),
                            value: gamma.value(v) + 0.0,
                        })
                        .collect(),
                    values: basis.varilet(i).values().iter().map(|x| x + 0.0).collect(),
                }
            })
            .collect();
        Self {
            field: FieldDoc::from_field(basis.field()),
            lens: LensSpec::explicit(basis.middle_space(), lens.lens()),
            ttv: crate::ttv::ttv(basis.middle_space()),
            refined_domain: RefinedDomainDoc {
                vertices: refined.vertex_ids().to_vec(),
                edges: graph_edges(refined),
            },
            varilets,
        }
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.varilets.iter().map(|v| v.amplitude).collect()
    }

    /// Compact JSON on one line; basis documents are mostly long value arrays.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("basis serializes");
        s.push('\n');
        s
    }
}

pub fn parse_basis(text: &str) -> Result<BasisDoc, ParseError> {
    Ok(serde_json::from_str(text)?)
}

/// Coefficients as `index,value` rows (1-based, any order, each index once;
/// an optional header) or as a bare list separated by commas or whitespace.
pub fn parse_coefficients(text: &str) -> Result<Vec<f64>, ParseError> {
    let rows: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let indexed = rows.len() > 1 && rows.iter().all(|(_, l)| l.split(',').count() == 2);
    if !indexed {
        let mut out = Vec::new();
        for (line, l) in rows {
            for cell in l
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
            {
                out.push(parse_number(cell, line)?);
            }
        }
        return Ok(out);
    }
    let mut slots: Vec<Option<f64>> = Vec::new();
    for (k, (line, l)) in rows.iter().enumerate() {
        let (i, v) = l.split_once(',').expect("two cells");
        let (i, v) = (i.trim(), v.trim());
        let Ok(index) = i.parse::<usize>() else {
            if k == 0 {
                continue;
            }
            return Err(ParseError::Csv {
                line: *line,
                message: format!("`{i}` is not an index"),
            });
        };
        if index == 0 {
            return Err(ParseError::Csv {
                line: *line,
                message: "indices start at 1".into(),
            });
        }
        if slots.len() < index {
            slots.resize(index, None);
        }
        if slots[index - 1].replace(parse_number(v, *line)?).is_some() {
            return Err(ParseError::Csv {
                line: *line,
                message: format!("index {index} given twice"),
            });
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or_else(|| ParseError::Other(format!("coefficient {} is missing", k + 1))))
        .collect()
}

fn parse_number(cell: &str, line: usize) -> Result<f64, ParseError> {
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(ParseError::Csv {
            line,
            message: format!("`{cell}` is not a finite number"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::factorize;
    use crate::transform::varilet_transform;

    #[test]
    fn series_with_and_without_header() {
        assert_eq!(parse_series("0\n2\n1\n").unwrap(), vec![0.0, 2.0, 1.0]);
        assert_eq!(parse_series("value\n0\n\n2.5\n").unwrap(), vec![0.0, 2.5]);
        let err = parse_series("0\nx\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        assert!(parse_series("0,1\n").is_err());
        assert!(parse_series("0\ninf\n").is_err());
    }

    #[test]
    fn field_document_round_trips_bits() {
        let values = [0.1 + 0.2, -0.0, 1e-300, 12345.678901234567, 1.0 / 3.0];
        let f = load_series(&values).unwrap();
        let text = field_to_json(&f);
        let g = field_from_json(&text).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(field_to_json(&g), text);
    }

    #[test]
    fn field_format_is_sniffed() {
        let (f, fmt) = parse_field("0\n2\n1\n3\n0\n").unwrap();
        assert_eq!(fmt, FieldFormat::Series);
        assert_eq!(write_field(&f, fmt), "0\n2\n1\n3\n0\n");
        let json = field_to_json(&f);
        assert_eq!(parse_field(&json).unwrap().1, FieldFormat::Document);
    }

    #[test]
    fn cycle_document() {
        let text = r#"{"vertices":[{"id":"a","value":0},{"id":"b","value":1},{"id":"c","value":2}],
            "edges":[{"id":"ab","endpoints":["a","b"]},{"id":"bc","endpoints":["b","c"]},{"id":"ca","endpoints":["c","a"]}]}"#;
        let f = field_from_json(text).unwrap();
        assert_eq!(f.graph().edge_count(), 3);
        let bad = text.replace(r#"["c","a"]"#, r#"["c","z"]"#);
        assert!(field_from_json(&bad).is_err());
    }

    #[test]
    fn lens_specs_resolve_to_the_worked_lens() {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        let (ms, mf) = factorize(&f);
        let spec = parse_lens_spec(
            r#"{"kind":"threshold","cuts":[{"level":1,"direction":"up","seed":{"domain_vertex":"3"}}]}"#,
        )
        .unwrap();
        let lens = spec.resolve(&ms, &mf).unwrap();
        assert_eq!(lens.len(), 2);
        assert_eq!(lens.regions()[1].length(), 6.0);

        let explicit = LensSpec::explicit(&ms, &lens);
        let again = parse_lens_spec(&lens_spec_to_json(&explicit)).unwrap();
        assert_eq!(again.resolve(&ms, &mf).unwrap(), lens);

        let missing = parse_lens_spec(
            r#"{"kind":"threshold","cuts":[{"level":1,"direction":"up","seed":{"domain_vertex":"9"}}]}"#,
        )
        .unwrap();
        assert!(matches!(
            missing.resolve(&ms, &mf),
            Err(LensError::UnknownSeedVertex(_))
        ));
        assert_eq!(LensSpec::Trivial.resolve(&ms, &mf).unwrap().len(), 1);
    }

    #[test]
    fn basis_document() {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        let basis = varilet_transform(&f, &Lens::trivial(&factorize(&f).0)).unwrap();
        let doc = BasisDoc::new(&basis);
        assert_eq!(doc.amplitudes(), vec![8.0]);
        let back = parse_basis(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.field.to_field().unwrap(), f);
    }

    #[test]
    fn coefficient_forms() {
        assert_eq!(parse_coefficients("2,0").unwrap(), vec![2.0, 0.0]);
        assert_eq!(parse_coefficients("2 -1.5\n0").unwrap(), vec![2.0, -1.5, 0.0]);
        assert_eq!(
            parse_coefficients("index,value\n2,6\n1,-2\n").unwrap(),
            vec![-2.0, 6.0]
        );
        assert!(parse_coefficients("1,2\n3,4\n").is_err());
        assert!(parse_coefficients("1,2\n1,4\n").is_err());
        assert!(parse_coefficients("1,x\n2,4\n").is_err());
    }
}
