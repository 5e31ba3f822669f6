//! Sampled ortho-graphs.
//!
//! * `mutual`: vertices are projective classes, with an undirected edge when
//!   both `x ⊥ˢ y` and `y ⊥ˢ x` hold.
//! * `directed`: the same vertices, with `x → y` when `x ⊥ˢ y`.
//! * `reduced`: classes of equal `(M_{|x*|}, ker x*)`, which are exactly the
//!   classes of equal `(R_x, L_x)`, with inherited directed edges. The zero
//!   class is kept and carries the only loop.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    decompose, frame_leq, haar_unitary_with, rng_from_seed, BlockStructure, Element, Fnv, Frame,
    SpectralData, Tolerance,
};
use crate::error::{Error, Result};
use crate::orthogonality::strong_bj_spectral;
use crate::preservers::CandidateMap;
use crate::sampling;
use crate::structure::{is_right_symmetric_spectral, mutual_edge_witness};

/// Coordinates closer than this (max-abs, after normalization) are one
/// projective point.
const SAME_POINT: f64 = 1e-9;
const KEY_QUANTUM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    Mutual,
    Directed,
    Reduced,
}

impl GraphMode {
    pub fn name(self) -> &'static str {
        match self {
            GraphMode::Mutual => "mutual",
            GraphMode::Directed => "directed",
            GraphMode::Reduced => "reduced",
        }
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mutual" => Ok(GraphMode::Mutual),
            "directed" => Ok(GraphMode::Directed),
            "reduced" => Ok(GraphMode::Reduced),
            other => Err(Error::Parse(format!("unknown graph mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Vertex {
    /// Norm one, first nonzero coordinate real-positive; zero for the zero class.
    pub rep: Element,
    pub injected: bool,
    pub rank: usize,
    pub norm_achieving_blocks: Vec<usize>,
    /// Hash of the point (projective modes) or of the frame pair (reduced mode).
    pub key: u64,
    /// Number of inputs merged into this vertex.
    pub members: usize,
}

impl Vertex {
    pub fn is_zero(&self) -> bool {
        self.rep.is_zero()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub structure: BlockStructure,
    pub seed: Option<u64>,
    pub tolerance: Tolerance,
    pub inputs: usize,
    pub injected: usize,
    pub note: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrthoGraph {
    pub mode: GraphMode,
    pub vertices: Vec<Vertex>,
    /// Sorted; `(i, j)` with `i < j` in mutual mode.
    pub edges: Vec<(usize, usize)>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Add `mutual_edge_witness` partners of every non-right-symmetric
    /// vertex (mutual mode only).
    pub inject_witnesses: bool,
    /// Recorded in the provenance.
    pub seed: Option<u64>,
}

struct Candidate {
    rep: Element,
    spectral: SpectralData,
    injected: bool,
    members: usize,
}

fn same_frames(a: &SpectralData, b: &SpectralData, tol: &Tolerance) -> bool {
    let eq = |f: &Frame, g: &Frame| matches!((frame_leq(f, g, tol), frame_leq(g, f, tol)), (Ok(true), Ok(true)));
    eq(&a.m_left, &b.m_left) && eq(&a.ker_left, &b.ker_left)
}

fn coordinate_order(a: &Element, b: &Element) -> Ordering {
    let q = |x: f64| (x / SAME_POINT).round() as i64;
    a.coordinates()
        .iter()
        .zip(b.coordinates().iter())
        .map(|(x, y)| (q(x.re), q(x.im)).cmp(&(q(y.re), q(y.im))))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn frame_key(d: &SpectralData) -> u64 {
    let mut h = Fnv::new();
    for f in [&d.m_left, &d.ker_left] {
        h.write_u64(f.dim() as u64);
        for z in f.projector().iter() {
            h.write_u64(((z.re / KEY_QUANTUM).round() as i64) as u64);
            h.write_u64(((z.im / KEY_QUANTUM).round() as i64) as u64);
        }
    }
    h.finish()
}

impl OrthoGraph {
    /// Builds the graph without witness injection.
    pub fn build(elements: &[Element], mode: GraphMode, tol: &Tolerance) -> Result<Self> {
        Self::build_with(elements, mode, tol, BuildOptions::default())
    }

    pub fn build_with(
        elements: &[Element],
        mode: GraphMode,
        tol: &Tolerance,
        options: BuildOptions,
    ) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidStructure("graph needs at least one element".into()));
        };
        let structure = first.structure().clone();
        if elements.iter().any(|e| e.structure() != &structure) {
            return Err(Error::StructureMismatch);
        }
        let mut candidates = Vec::new();
        for e in elements {
            add_candidate(&mut candidates, e, mode, false, tol);
        }
        let mut injected = 0;
        if options.inject_witnesses && mode == GraphMode::Mutual {
            let partners: Vec<Element> = candidates
                .iter()
                .filter(|c| !c.spectral.is_zero() && !is_right_symmetric_spectral(&c.spectral, tol))
                .map(|c| mutual_edge_witness(&c.rep, tol))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            for p in partners {
                if add_candidate(&mut candidates, &p, mode, true, tol) {
                    injected += 1;
                }
            }
        }

        // canonical vertex order: zero class first, then rank, then coordinates
        candidates.sort_by(|a, b| {
            (!a.spectral.is_zero())
                .cmp(&!b.spectral.is_zero())
                .then(a.spectral.rank.cmp(&b.spectral.rank))
                .then_with(|| coordinate_order(&a.rep, &b.rep))
        });

        let n = candidates.len();
        let pairs: Vec<(usize, usize)> = match mode {
            GraphMode::Mutual => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            GraphMode::Directed => (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect(),
            GraphMode::Reduced => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
        };
        let orth = |i: usize, j: usize| strong_bj_spectral(&candidates[i].spectral, &candidates[j].spectral, tol).value;
        let edges: Vec<(usize, usize)> = pairs
            .into_par_iter()
            .filter(|&(i, j)| match mode {
                GraphMode::Mutual => orth(i, j) && orth(j, i),
                _ => orth(i, j),
            })
            .collect();

        let vertices = candidates
            .into_iter()
            .map(|c| Vertex {
                rank: c.spectral.rank,
                norm_achieving_blocks: if c.spectral.is_zero() { Vec::new() } else { c.spectral.norm_achieving_blocks() },
                key: match mode {
                    GraphMode::Reduced => frame_key(&c.spectral),
                    _ => c.rep.fingerprint(KEY_QUANTUM),
                },
                injected: c.injected,
                members: c.members,
                rep: c.rep,
            })
            .collect();
        Ok(Self {
            mode,
            vertices,
            edges,
            provenance: Provenance {
                structure,
                seed: options.seed,
                tolerance: *tol,
                inputs: elements.len(),
                injected,
                note: match mode {
                    GraphMode::Reduced => "sampled classes; classes that differ only on unsampled directions may be merged",
                    _ => "sampled vertices only",
                },
            },
        })
    }

    pub fn vertex_name(&self, i: usize) -> String {
        if self.vertices[i].is_zero() {
            "0".to_string()
        } else {
            format!("v{i}")
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }
}

/// Adds `e` as a new vertex unless it matches an existing one. Returns
/// whether a vertex was added.
fn add_candidate(
    candidates: &mut Vec<Candidate>,
    e: &Element,
    mode: GraphMode,
    injected: bool,
    tol: &Tolerance,
) -> bool {
    let rep = match e.projective_normal_form() {
        Some(r) => r,
        None if mode == GraphMode::Reduced => e.clone(),
        None => return false,
    };
    let spectral = decompose(&rep, tol);
    let existing = candidates.iter_mut().find(|c| match mode {
        GraphMode::Reduced => c.spectral.rank == spectral.rank && same_frames(&c.spectral, &spectral, tol),
        _ => c.rep.distance_max(&rep).is_ok_and(|d| d <= SAME_POINT),
    });
    if let Some(c) = existing {
        c.members += 1;
        // keep the canonically smallest representative
        if mode == GraphMode::Reduced && coordinate_order(&rep, &c.rep).is_lt() {
            c.rep = rep;
            c.spectral = spectral;
        }
        return false;
    }
    candidates.push(Candidate {
        rep,
        spectral,
        injected,
        members: 1,
    });
    true
}

/// Vertices without incident edges.
pub fn isolated_vertices(g: &OrthoGraph) -> Result<Vec<usize>> {
    if g.mode != GraphMode::Mutual {
        return Err(Error::WrongMode {
            expected: "mutual",
            actual: g.mode.name(),
        });
    }
    Ok((0..g.vertices.len()).filter(|&i| g.degree(i) == 0).collect())
}

/// Vertices where isolation and right symmetry disagree. Empty whenever
/// witnesses were injected.
pub fn isolation_mismatches(g: &OrthoGraph, tol: &Tolerance) -> Result<Vec<usize>> {
    let isolated = isolated_vertices(g)?;
    Ok((0..g.vertices.len())
        .filter(|i| {
            let rs = is_right_symmetric_spectral(&decompose(&g.vertices[*i].rep, tol), tol);
            rs != isolated.contains(i)
        })
        .collect())
}

fn label(g: &OrthoGraph, i: usize) -> String {
    let v = &g.vertices[i];
    let blocks: Vec<String> = v.norm_achieving_blocks.iter().map(usize::to_string).collect();
    let mut s = format!("rank={} blocks={{{}}} key={:016x}", v.rank, blocks.join(","), v.key);
    if v.injected {
        s.push_str(" injected");
    }
    s
}

/// Graphviz text; `graph` with `--` in mutual mode, `digraph` with `->`
/// otherwise.
pub fn export_dot(g: &OrthoGraph) -> String {
    let (kind, arrow) = match g.mode {
        GraphMode::Mutual => ("graph", "--"),
        _ => ("digraph", "->"),
    };
    let mut out = format!("{kind} orthograph {{\n");
    for i in 0..g.vertices.len() {
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", g.vertex_name(i), label(g, i));
    }
    for &(a, b) in &g.edges {
        let _ = writeln!(out, "  \"{}\" {arrow} \"{}\";", g.vertex_name(a), g.vertex_name(b));
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize)]
struct JsonVertex<'a> {
    name: String,
    label: String,
    #[serde(flatten)]
    vertex: &'a Vertex,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    mode: GraphMode,
    vertices: Vec<JsonVertex<'a>>,
    edges: Vec<(String, String)>,
    provenance: &'a Provenance,
}

/// The DOT content plus representatives and provenance.
pub fn export_json(g: &OrthoGraph) -> String {
    let doc = JsonGraph {
        mode: g.mode,
        vertices: (0..g.vertices.len())
            .map(|i| JsonVertex {
                name: g.vertex_name(i),
                label: label(g, i),
                vertex: &g.vertices[i],
            })
            .collect(),
        edges: g.edges.iter().map(|&(a, b)| (g.vertex_name(a), g.vertex_name(b))).collect(),
        provenance: &g.provenance,
    };
    serde_json::to_string_pretty(&doc).expect("graph serialization")
}

/// Elements sharing one Haar eigenbasis, so that the sampled graph has
/// plenty of edges.
pub fn engineered_sample(s: &BlockStructure, count: usize, seed: u64) -> Vec<Element> {
    let mut rng = rng_from_seed(seed);
    let basis = haar_unitary_with(s, &mut rng);
    (0..count)
        .map(|_| {
            if rng.random_bool(0.8) {
                sampling::from_basis(s, &basis, &mut rng)
            } else {
                sampling::mixed(s, &mut rng)
            }
        })
        .collect()
}

/// Checks that `a ↦ Φ(a)` maps the vertices of `g` bijectively onto the
/// vertices of the graph built from the images, and edges onto edges.
pub fn invariant_under(g: &OrthoGraph, map: &dyn CandidateMap, tol: &Tolerance) -> Result<bool> {
    let images: Vec<Element> = g
        .vertices
        .iter()
        .map(|v| map.apply(&v.rep, tol))
        .collect::<Result<_>>()?;
    let h = OrthoGraph::build(&images, g.mode, tol)?;
    if h.vertices.len() != g.vertices.len() {
        return Ok(false);
    }
    let mut index = Vec::with_capacity(images.len());
    for img in &images {
        let found = match g.mode {
            GraphMode::Reduced => {
                let d = decompose(img, tol);
                h.vertices
                    .iter()
                    .position(|v| same_frames(&decompose(&v.rep, tol), &d, tol))
            }
            _ => {
                let Some(rep) = img.projective_normal_form() else {
                    return Ok(false);
                };
                h.vertices
                    .iter()
                    .position(|v| v.rep.distance_max(&rep).is_ok_and(|d| d <= SAME_POINT))
            }
        };
        match found {
            Some(j) if !index.contains(&j) => index.push(j),
            _ => return Ok(false),
        }
    }
    let mut mapped: Vec<(usize, usize)> = g
        .edges
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (index[a], index[b]);
            if g.mode == GraphMode::Mutual && x > y {
                (y, x)
            } else {
                (x, y)
            }
        })
        .collect();
    mapped.sort_unstable();
    Ok(mapped == h.edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::C64;
    use crate::orthogonality::strong_bj_norm_formula;
    use crate::preservers::PreserverSpec;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn m2_fixture() -> (BlockStructure, Vec<Element>) {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e11 = Element::matrix_unit(&s, 0, 0, 0);
        let e22 = Element::matrix_unit(&s, 0, 1, 1);
        (s.clone(), vec![e11, e22, Element::identity(&s)])
    }

    #[test]
    fn scalars_collapse_to_one_vertex() {
        let s = BlockStructure::new(vec![1]).unwrap();
        let xs: Vec<Element> = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 1.0)]
            .iter()
            .map(|&c| Element::identity(&s).scale(c))
            .collect();
        let g = OrthoGraph::build(&xs, GraphMode::Mutual, &tol()).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(isolated_vertices(&g).unwrap(), vec![0]);
    }

    #[test]
    fn m2_mutual_and_directed() {
        let (_, xs) = m2_fixture();
        let g = OrthoGraph::build(&xs, GraphMode::Mutual, &tol()).unwrap();
        assert_eq!(g.vertices.len(), 3);
        assert_eq!(g.edges.len(), 1);
        let (a, b) = g.edges[0];
        assert_eq!((g.vertices[a].rank, g.vertices[b].rank), (1, 1));
        let dot = export_dot(&g);
        assert!(dot.starts_with("graph "));
        assert_eq!(dot.matches(" -- ").count(), 1);

        let d = OrthoGraph::build(&xs, GraphMode::Directed, &tol()).unwrap();
        assert_eq!(d.edges.len(), 4);
        let id = d.vertices.iter().position(|v| v.rank == 2).unwrap();
        assert_eq!(d.edges.iter().filter(|e| e.0 == id).count(), 2);
        assert_eq!(d.edges.iter().filter(|e| e.1 == id).count(), 0);
    }

    #[test]
    fn injection_makes_isolation_two_sided() {
        let (_, xs) = m2_fixture();
        let opts = BuildOptions {
            inject_witnesses: true,
            seed: None,
        };
        let g = OrthoGraph::build_with(&xs, GraphMode::Mutual, &tol(), opts).unwrap();
        let iso = isolated_vertices(&g).unwrap();
        assert_eq!(iso.len(), 1);
        assert_eq!(g.vertices[iso[0]].rank, 2);
        assert!(isolation_mismatches(&g, &tol()).unwrap().is_empty());
    }

    #[test]
    fn wrong_mode_is_reported() {
        let (_, xs) = m2_fixture();
        let g = OrthoGraph::build(&xs, GraphMode::Directed, &tol()).unwrap();
        assert!(matches!(isolated_vertices(&g), Err(Error::WrongMode { .. })));
    }

    #[test]
    fn reduced_mode_has_one_loop_at_zero() {
        let (s, mut xs) = m2_fixture();
        xs.push(Element::zeros(&s));
        xs.push(Element::matrix_unit(&s, 0, 0, 0).scale_real(3.0));
        xs.push(Element::matrix_unit(&s, 0, 0, 1));
        let g = OrthoGraph::build(&xs, GraphMode::Reduced, &tol()).unwrap();
        // E11, 3E11 and E12 share (m_left, ker_left)
        assert_eq!(g.vertices.len(), 4);
        let loops: Vec<_> = g.edges.iter().filter(|e| e.0 == e.1).collect();
        assert_eq!(loops.len(), 1);
        assert!(g.vertices[loops[0].0].is_zero());
        let dot = export_dot(&g);
        assert_eq!(dot.matches("\"0\" -> \"0\"").count(), 1);
    }

    #[test]
    fn empty_edge_set_exports_header_only_body() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let g = OrthoGraph::build(&[Element::identity(&s)], GraphMode::Mutual, &tol()).unwrap();
        let dot = export_dot(&g);
        assert!(!dot.contains("--"));
        let json: serde_json::Value = serde_json::from_str(&export_json(&g)).unwrap();
        assert_eq!(json["mode"], "mutual");
    }

    #[test]
    fn mutual_edges_recheck_with_the_norm_formula() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let xs = engineered_sample(&s, 20, 4);
        let g = OrthoGraph::build(&xs, GraphMode::Mutual, &tol()).unwrap();
        assert!(!g.edges.is_empty());
        for &(a, b) in &g.edges {
            let (x, y) = (&g.vertices[a].rep, &g.vertices[b].rep);
            assert!(strong_bj_norm_formula(x, y, &tol()).unwrap());
            assert!(strong_bj_norm_formula(y, x, &tol()).unwrap());
        }
    }

    #[test]
    fn sandwich_preserves_the_graph() {
        let s = BlockStructure::new(vec![2, 2]).unwrap();
        let xs = engineered_sample(&s, 16, 8);
        let mut rng = rng_from_seed(1);
        for mode in [GraphMode::Mutual, GraphMode::Directed, GraphMode::Reduced] {
            let g = OrthoGraph::build(&xs, mode, &tol()).unwrap();
            let spec = PreserverSpec::random_sandwich(&s, &mut rng);
            assert!(invariant_under(&g, &spec, &tol()).unwrap(), "{mode:?}");
        }
    }
}
