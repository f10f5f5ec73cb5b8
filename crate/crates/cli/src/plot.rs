//! Deterministic SVG output. Geometry is written in data coordinates under a
//! per-panel transform, so the numbers in the file are the plotted values.

use std::fmt::Write as _;

use varilet::io::is_series_domain;
use varilet::mlf::{MiddlePoint, MiddleSpace};
use varilet::{ScalarField, VariletBasis};

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 30.0;

/// A drawable: polyline or graph with vertex positions.
pub enum Shape {
    Line(Vec<(f64, f64)>),
    Graph {
        points: Vec<(f64, f64)>,
        edges: Vec<(usize, usize)>,
    },
}

impl Shape {
    fn points(&self) -> &[(f64, f64)] {
        match self {
            Shape::Line(p) => p,
            Shape::Graph { points, .. } => points,
        }
    }
}

pub struct Panel {
    pub title: String,
    pub shape: Shape,
}

fn num(x: f64) -> String {
    format!("{}", x + 0.0)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn render(panels: &[Panel]) -> String {
    let height = PANEL * panels.len().max(1) as f64;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(WIDTH),
        h = num(height)
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, panel) in panels.iter().enumerate() {
        let pts = panel.shape.points();
        let (x0, x1) = extent(pts.iter().map(|p| p.0));
        let (y0, y1) = extent(pts.iter().map(|p| p.1));
        let sx = (WIDTH - 2.0 * MARGIN) / (x1 - x0);
        let sy = (PANEL - 2.0 * MARGIN) / (y1 - y0);
        let top = k as f64 * PANEL;
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            num(MARGIN),
            num(top + 18.0),
            escape(&panel.title)
        )
        .unwrap();
        writeln!(
            s,
            r#"<g transform="translate({} {}) scale({} {}) translate({} {})">"#,
            num(MARGIN),
            num(top + PANEL - MARGIN),
            num(sx),
            num(-sy),
            num(-x0),
            num(-y0)
        )
        .unwrap();
        match &panel.shape {
            Shape::Line(points) => {
                let list: Vec<String> = points
                    .iter()
                    .map(|&(x, y)| format!("{},{}", num(x), num(y)))
                    .collect();
                writeln!(
                    s,
                    r#"<polyline fill="none" stroke="black" stroke-width="1.5" vector-effect="non-scaling-stroke" points="{}"/>"#,
                    list.join(" ")
                )
                .unwrap();
            }
            Shape::Graph { points, edges } => {
                for &(a, b) in edges {
                    let (p, q) = (points[a], points[b]);
                    writeln!(
                        s,
                        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
                        num(p.0),
                        num(p.1),
                        num(q.0),
                        num(q.1)
                    )
                    .unwrap();
                }
                for &(x, y) in points {
                    writeln!(
                        s,
                        r#"<circle cx="{}" cy="{}" r="0" stroke="steelblue" stroke-width="6" stroke-linecap="round" vector-effect="non-scaling-stroke"/>"#,
                        num(x),
                        num(y)
                    )
                    .unwrap();
                }
            }
        }
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Horizontal positions for middle-space vertices: each distinct level is a
/// layer, spread evenly in (component, index) order.
fn layered_x(ms: &MiddleSpace) -> Vec<f64> {
    let mut order: Vec<usize> = (0..ms.vertex_count()).collect();
    order.sort_by(|&a, &b| {
        ms.level(a)
            .total_cmp(&ms.level(b))
            .then(ms.vertex(a).component.cmp(&ms.vertex(b).component))
            .then(a.cmp(&b))
    });
    let mut x = vec![0.0; ms.vertex_count()];
    let mut start = 0;
    while start < order.len() {
        let level = ms.level(order[start]);
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&v| ms.level(v) == level)
                .count();
        let count = end - start;
        for (j, &v) in order[start..end].iter().enumerate() {
            x[v] = (j + 1) as f64 / (count + 1) as f64;
        }
        start = end;
    }
    x
}

pub fn series_panel(title: &str, values: &[f64]) -> Panel {
    Panel {
        title: title.to_string(),
        shape: Shape::Line(values.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect()),
    }
}

pub fn middle_space_panel(title: &str, ms: &MiddleSpace) -> Panel {
    let x = layered_x(ms);
    Panel {
        title: title.to_string(),
        shape: Shape::Graph {
            points: (0..ms.vertex_count()).map(|v| (x[v], ms.level(v))).collect(),
            edges: ms.edges().iter().map(|e| (e.lower, e.upper)).collect(),
        },
    }
}

/// A signal plot for fields on the chain a series loads into, a middle-space
/// drawing otherwise.
pub fn field_panels(field: &ScalarField, ms: &MiddleSpace) -> Vec<Panel> {
    if is_series_domain(field.graph()) {
        vec![series_panel("signal", field.values())]
    } else {
        vec![middle_space_panel("middle space", ms)]
    }
}

/// One panel per varilet. On a chain the varilet is drawn along the domain;
/// elsewhere its gamma is drawn over the middle-space layout.
pub fn basis_panels(basis: &VariletBasis) -> Vec<Panel> {
    let base = basis.field().graph();
    let on_chain = is_series_domain(base);
    let domain = basis.domain();
    let refined = domain.graph();
    let sub = basis.subdivision();
    let ms = basis.middle_space();
    let mx = layered_x(ms);
    (0..basis.len())
        .map(|i| {
            let title = format!("varilet {} (amplitude {})", i + 1, num(basis.amplitudes()[i]));
            let shape = if on_chain {
                let g = basis.varilet(i);
                let mut points: Vec<(f64, f64)> = (0..refined.vertex_count())
                    .map(|v| {
                        let x = match domain.position(v) {
                            None => v as f64,
                            Some((e, t)) => {
                                let [a, b] = base.endpoints(e);
                                a as f64 + t * (b as f64 - a as f64)
                            }
                        };
                        (x, g.value(v))
                    })
                    .collect();
                points.sort_by(|p, q| p.0.total_cmp(&q.0));
                Shape::Line(points)
            } else {
                let gamma = basis.gamma(i);
                let points = (0..sub.vertex_count())
                    .map(|v| {
                        let x = match sub.origin(v) {
                            MiddlePoint::Vertex { vertex } => mx[vertex],
                            MiddlePoint::Edge { edge, level } => {
                                let me = ms.edge(edge);
                                let (lo, hi) = ms.edge_levels(edge);
                                let t = (level - lo) / (hi - lo);
                                mx[me.lower] + t * (mx[me.upper] - mx[me.lower])
                            }
                        };
                        (x, gamma.value(v))
                    })
                    .collect();
                let edges = (0..sub.edge_count())
                    .map(|e| {
                        let [a, b] = sub.endpoints(e);
                        (a, b)
                    })
                    .collect();
                Shape::Graph { points, edges }
            };
            Panel { title, shape }
        })
        .collect()
}
