//! Classification steps for promised preservers: which block goes where,
//! and for linear maps the unitaries `U`, `V` and scalar `α` with
//! `Φ(X) = α U π(X) V*`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateMap, PreserverSpec};
use crate::algebra::{
    decompose, linalg, random_block_vector, random_element_with, rng_from_seed, spectral_norm,
    BlockStructure, CMat, CVec, Element, Tolerance, C64,
};
use crate::error::{Error, Result};
use crate::structure::gauge;

const KAPPA_SAMPLES: usize = 20;
const RESIDUAL_SAMPLES: usize = 50;
const MAX_RESIDUAL: f64 = 1e-6;
const RANK_ONES_PER_BLOCK: usize = 3;

/// A complex-linear map given by its matrix on the row-major block
/// coordinates of the algebra.
#[derive(Clone, Debug)]
pub struct LinearMap {
    structure: BlockStructure,
    matrix: CMat,
}

#[derive(Serialize, Deserialize)]
struct LinearMapFile {
    dims: Vec<usize>,
    /// Rows of `[re, im]` pairs.
    matrix: Vec<Vec<[f64; 2]>>,
}

impl LinearMap {
    pub fn new(structure: &BlockStructure, matrix: CMat) -> Result<Self> {
        let d = structure.coordinate_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "linear map on {structure} needs a {d}×{d} matrix, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Parse("non-finite entry in linear map".into()));
        }
        Ok(Self {
            structure: structure.clone(),
            matrix,
        })
    }

    /// Tabulates `f` on the coordinate basis. Only meaningful for linear `f`.
    pub fn from_map(structure: &BlockStructure, f: impl Fn(&Element) -> Result<Element>) -> Result<Self> {
        let d = structure.coordinate_dim();
        let mut matrix = CMat::zeros(d, d);
        for j in 0..d {
            let mut e = CVec::zeros(d);
            e[j] = C64::new(1.0, 0.0);
            let image = f(&Element::from_coordinates(structure, &e)?)?;
            if image.structure() != structure {
                return Err(Error::StructureMismatch);
            }
            matrix.set_column(j, &image.coordinates());
        }
        Self::new(structure, matrix)
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn eval(&self, a: &Element) -> Result<Element> {
        if a.structure() != &self.structure {
            return Err(Error::StructureMismatch);
        }
        Element::from_coordinates(&self.structure, &(&self.matrix * a.coordinates()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LinearMapFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let structure = BlockStructure::new(file.dims)?;
        let d = structure.coordinate_dim();
        if file.matrix.len() != d || file.matrix.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch(format!("linear map on {structure} needs {d}×{d} entries")));
        }
        let matrix = CMat::from_fn(d, d, |i, j| {
            let [re, im] = file.matrix[i][j];
            C64::new(re, im)
        });
        Self::new(&structure, matrix)
    }

    pub fn to_json(&self) -> String {
        let file = LinearMapFile {
            dims: self.structure.dims().to_vec(),
            matrix: self
                .matrix
                .row_iter()
                .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("linear map serialization")
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl CandidateMap for LinearMap {
    fn apply(&self, a: &Element, _tol: &Tolerance) -> Result<Element> {
        self.eval(a)
    }
}

/// Reads off `π` from the supports of images of rank-one projections.
///
/// Each block is probed with three random `ξ ⊗ ξ`; every image must live in
/// one block, the same one for all three, and distinct blocks must land in
/// distinct blocks of the same dimension.
pub fn extract_block_permutation(
    map: &dyn CandidateMap,
    s: &BlockStructure,
    seed: u64,
    tol: &Tolerance,
) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let m = s.num_blocks();
    let mut pi = Vec::with_capacity(m);
    for lambda in 0..m {
        let mut target = None;
        for _ in 0..RANK_ONES_PER_BLOCK {
            let xi = random_block_vector(s.dim(lambda), &mut rng);
            let image = map.apply(&Element::rank_one(s, lambda, &xi, &xi), tol)?;
            if image.structure() != s {
                return Err(Error::StructureMismatch);
            }
            let support = decompose(&image, tol).support;
            let [mu] = support[..] else {
                return Err(Error::NotSingletonSupport { block: lambda, support });
            };
            match target {
                None => target = Some(mu),
                Some(prev) if prev != mu => {
                    return Err(Error::NotSingletonSupport {
                        block: lambda,
                        support: vec![prev, mu],
                    })
                }
                Some(_) => {}
            }
        }
        let mu = target.expect("at least one probe per block");
        if let Some(other) = pi.iter().position(|&p| p == mu) {
            return Err(Error::NotInjective(other, lambda));
        }
        if s.dim(lambda) != s.dim(mu) {
            return Err(Error::DimensionMismatch {
                from: lambda,
                to: mu,
                from_dim: s.dim(lambda),
                to_dim: s.dim(mu),
            });
        }
        pi.push(mu);
    }
    Ok(pi)
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichRecovery {
    pub alpha: C64,
    /// `‖Φ(E)‖` on norm-one rank-ones.
    pub kappa: f64,
    /// `(max − min)/max` of those norms.
    pub kappa_spread: f64,
    pub pi: Vec<usize>,
    pub u: Element,
    pub v: Element,
    /// Worst `‖Φ(X) − αU π(X) V*‖ / ‖X‖` over the check sample.
    pub residual: f64,
}

impl SandwichRecovery {
    /// The recovered map as a spec: permute, then sandwich.
    pub fn to_spec(&self) -> PreserverSpec {
        PreserverSpec::Composite {
            parts: vec![
                PreserverSpec::BlockPermutation { pi: self.pi.clone() },
                PreserverSpec::Sandwich {
                    u: self.u.clone(),
                    v: self.v.clone(),
                    alpha: self.alpha,
                },
            ],
        }
    }
}

fn block_of(a: &Element, mu: usize) -> CMat {
    a.block(mu).clone()
}

/// Recovers `Φ(X) = α U π(X) V*` from a linear map.
///
/// Refuses with `KappaNotConstant` when rank-one images have different
/// norms, and with `RecoveryInconsistent` when the recovered sandwich does
/// not reproduce the map.
pub fn recover_sandwich(map: &LinearMap, tol: &Tolerance, seed: u64) -> Result<SandwichRecovery> {
    let s = map.structure().clone();
    let mut rng = rng_from_seed(seed);

    let norms: Vec<f64> = (0..KAPPA_SAMPLES)
        .map(|_| {
            let lambda = rng.random_range(0..s.num_blocks());
            let n = s.dim(lambda);
            let e = Element::rank_one(&s, lambda, &random_block_vector(n, &mut rng), &random_block_vector(n, &mut rng));
            map.eval(&e).map(|i| i.norm())
        })
        .collect::<Result<_>>()?;
    let max = norms.iter().copied().fold(0.0, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Err(Error::KappaNotConstant { spread: f64::INFINITY });
    }
    let spread = (max - min) / max;
    if spread > tol.eps_norm {
        return Err(Error::KappaNotConstant { spread });
    }
    let kappa = norms.iter().sum::<f64>() / norms.len() as f64;

    let pi = extract_block_permutation(map, &s, rng.random(), tol)?;

    let mut u_blocks: Vec<CMat> = s.dims().iter().map(|&n| CMat::zeros(n, n)).collect();
    let mut v_blocks = u_blocks.clone();
    let mut alpha: Option<C64> = None;
    for (lambda, &mu) in pi.iter().enumerate() {
        let n = s.dim(lambda);
        let image = |i, j| map.eval(&Element::matrix_unit(&s, lambda, i, j)).map(|a| block_of(&a, mu));
        let m11 = image(0, 0)?;
        let svd = linalg::svd(&m11);
        let u1 = gauge(svd.u.column(0).into_owned());
        let v1 = gauge(svd.v.column(0).into_owned());
        let a_lambda = u1.dotc(&(&m11 * &v1));
        if a_lambda.norm() == 0.0 {
            return Err(Error::RecoveryInconsistent { residual: f64::INFINITY });
        }
        let mut u = CMat::zeros(n, n);
        let mut v = CMat::zeros(n, n);
        for i in 0..n {
            u.set_column(i, &(image(i, 0)? * &v1 / a_lambda));
            v.set_column(i, &(image(0, i)?.adjoint() * &u1 / a_lambda.conj()));
        }
        // one global α; per-block phases go into U
        let global = *alpha.get_or_insert(a_lambda);
        u_blocks[mu] = u * (a_lambda / global);
        v_blocks[mu] = v;
    }
    let recovery = SandwichRecovery {
        alpha: alpha.expect("at least one block"),
        kappa,
        kappa_spread: spread,
        pi,
        u: Element::validate(&s, u_blocks)?,
        v: Element::validate(&s, v_blocks)?,
        residual: 0.0,
    };
    let model = recovery.to_spec();
    let mut residual: f64 = 0.0;
    for _ in 0..RESIDUAL_SAMPLES {
        let x = random_element_with(&s, None, &mut rng)?;
        let diff = map.eval(&x)?.sub(&model.apply(&x, tol)?)?;
        residual = residual.max(diff.norm() / x.norm());
    }
    for w in [&recovery.u, &recovery.v] {
        for b in w.blocks() {
            let id = CMat::identity(b.nrows(), b.ncols());
            residual = residual.max(spectral_norm(&(b * b.adjoint() - id)));
        }
    }
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(residual <= MAX_RESIDUAL) {
        return Err(Error::RecoveryInconsistent { residual });
    }
    Ok(SandwichRecovery { residual, ..recovery })
}
