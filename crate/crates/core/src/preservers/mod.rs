//! Strong BJ isomorphisms: the known families, a sampling verifier for
//! arbitrary candidate maps, and the classification steps that recover a
//! block permutation and a unitary sandwich from a linear preserver.

mod dim2;
mod recover;
mod verify;
mod wild;

pub use dim2::{random_line_table, LinePair};
pub use recover::{extract_block_permutation, recover_sandwich, LinearMap, SandwichRecovery};
pub use verify::{
    property_p_check, property_p_holds, verify, Counterexample, Coverage, MethodVerdicts, PropertyPReport,
    VerifyReport, VerifyVerdict,
};
pub use wild::{wild, TauPolicy};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    haar_unitary_with, spectral_norm, BlockStructure, CMat, Element, Tolerance, C64, ONE,
};
use crate::error::{Error, Result};

const UNITARY_RESIDUAL: f64 = 1e-10;

/// A closed-form candidate preserver, serialized with a `kind` tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreserverSpec {
    /// `X ↦ α U X V*`.
    Sandwich { u: Element, v: Element, alpha: C64 },
    /// Output block `pi[λ]` receives input block `λ`.
    BlockPermutation { pi: Vec<usize> },
    /// Entrywise complex conjugation in the standard basis.
    Conjugation,
    /// `A ↦ γ_A U_A P_A A V_A*`, drawn per element from `seed`.
    Wild {
        seed: u64,
        #[serde(default)]
        tau_policy: TauPolicy,
    },
    /// Map induced on the 2×2 block `block` by a table of projective lines.
    Dim2Induced { block: usize, phi: Vec<LinePair> },
    /// A finite partial map.
    Table { pairs: Vec<(Element, Element)> },
    /// Left-to-right composition.
    Composite { parts: Vec<PreserverSpec> },
}

/// Anything `verify` can test: closed-form specs, tables, linear maps, or
/// wrapped closures.
pub trait CandidateMap: Sync {
    fn apply(&self, a: &Element, tol: &Tolerance) -> Result<Element>;

    /// An inverse known by construction, used for the backward check.
    fn inverse(&self) -> Option<Box<dyn CandidateMap>> {
        None
    }

    /// Finite domain, for partial maps.
    fn domain(&self) -> Option<Vec<Element>> {
        None
    }

    /// Whether block ideals are sent into block ideals.
    fn block_respecting(&self) -> bool {
        false
    }

    /// An element the map treats non-trivially, if plain samples would miss it.
    fn plant(&self, _s: &BlockStructure, _rng: &mut ChaCha8Rng) -> Option<Element> {
        None
    }
}

/// Wraps a closure as a candidate map.
pub struct FnMap<F> {
    f: F,
    block_respecting: bool,
}

impl<F: Fn(&Element) -> Element + Sync> FnMap<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            block_respecting: false,
        }
    }

    pub fn block_respecting(f: F) -> Self {
        Self {
            f,
            block_respecting: true,
        }
    }
}

impl<F: Fn(&Element) -> Element + Sync> CandidateMap for FnMap<F> {
    fn apply(&self, a: &Element, _tol: &Tolerance) -> Result<Element> {
        Ok((self.f)(a))
    }

    fn block_respecting(&self) -> bool {
        self.block_respecting
    }
}

pub fn transpose_map() -> FnMap<fn(&Element) -> Element> {
    FnMap::block_respecting(Element::transpose)
}

pub fn adjoint_map() -> FnMap<fn(&Element) -> Element> {
    FnMap::block_respecting(Element::adjoint)
}

fn unitarity_residual(u: &Element) -> f64 {
    u.blocks()
        .iter()
        .map(|b| spectral_norm(&(b * b.adjoint() - CMat::identity(b.nrows(), b.ncols()))))
        .fold(0.0, f64::max)
}

fn check_permutation(pi: &[usize], s: &BlockStructure) -> Result<()> {
    if pi.len() != s.num_blocks() {
        return Err(Error::StructureMismatch);
    }
    let mut seen = vec![false; pi.len()];
    for (lambda, &mu) in pi.iter().enumerate() {
        if mu >= pi.len() || seen[mu] {
            return Err(Error::InvalidSpec(format!("{pi:?} is not a permutation")));
        }
        seen[mu] = true;
        if s.dim(lambda) != s.dim(mu) {
            return Err(Error::DimensionMismatch {
                from: lambda,
                to: mu,
                from_dim: s.dim(lambda),
                to_dim: s.dim(mu),
            });
        }
    }
    Ok(())
}

fn same_element(a: &Element, b: &Element) -> bool {
    a.structure() == b.structure()
        && a.distance_max(b).is_ok_and(|d| d <= 1e-12 * (1.0 + a.max_abs()))
}

impl PreserverSpec {
    pub fn identity(s: &BlockStructure) -> Self {
        let id = Element::identity(s);
        PreserverSpec::Sandwich {
            u: id.clone(),
            v: id,
            alpha: ONE,
        }
    }

    /// Haar `U`, `V` and `α` with modulus in `[0.5, 2]`.
    pub fn random_sandwich<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Self {
        let u = haar_unitary_with(s, rng);
        let v = haar_unitary_with(s, rng);
        let alpha = C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU));
        PreserverSpec::Sandwich { u, v, alpha }
    }

    /// Uniform permutation among blocks of equal dimension.
    pub fn random_block_permutation<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut pi: Vec<usize> = (0..s.num_blocks()).collect();
        let mut dims: Vec<usize> = s.dims().to_vec();
        dims.sort_unstable();
        dims.dedup();
        for d in dims {
            let group: Vec<usize> = (0..s.num_blocks()).filter(|&l| s.dim(l) == d).collect();
            let mut targets = group.clone();
            targets.shuffle(rng);
            for (&l, &t) in group.iter().zip(&targets) {
                pi[l] = t;
            }
        }
        PreserverSpec::BlockPermutation { pi }
    }

    /// Table of `f` over the given inputs.
    pub fn table_from(inputs: &[Element], f: impl Fn(&Element) -> Element) -> Self {
        PreserverSpec::Table {
            pairs: inputs.iter().map(|a| (a.clone(), f(a))).collect(),
        }
    }

    pub fn validate(&self, s: &BlockStructure) -> Result<()> {
        match self {
            PreserverSpec::Sandwich { u, v, alpha } => {
                if u.structure() != s || v.structure() != s {
                    return Err(Error::StructureMismatch);
                }
                if !(alpha.norm() > 0.0 && alpha.norm().is_finite()) {
                    return Err(Error::InvalidSpec("alpha must be a nonzero number".into()));
                }
                for (name, w) in [("U", u), ("V", v)] {
                    let r = unitarity_residual(w);
                    if r > UNITARY_RESIDUAL {
                        return Err(Error::InvalidSpec(format!(
                            "{name} is not unitary (residual {r:.3e})"
                        )));
                    }
                }
                Ok(())
            }
            PreserverSpec::BlockPermutation { pi } => check_permutation(pi, s),
            PreserverSpec::Conjugation => Ok(()),
            PreserverSpec::Wild { tau_policy, .. } => tau_policy.validate(),
            PreserverSpec::Dim2Induced { block, phi } => dim2::LineTable::build(s, *block, phi).map(|_| ()),
            PreserverSpec::Table { pairs } => {
                if pairs.iter().any(|(a, b)| a.structure() != s || b.structure() != s) {
                    return Err(Error::StructureMismatch);
                }
                Ok(())
            }
            PreserverSpec::Composite { parts } => parts.iter().try_for_each(|p| p.validate(s)),
        }
    }

    pub fn apply(&self, a: &Element, tol: &Tolerance) -> Result<Element> {
        match self {
            PreserverSpec::Sandwich { u, v, alpha } => {
                if u.structure() != a.structure() || v.structure() != a.structure() {
                    return Err(Error::StructureMismatch);
                }
                Ok(u.mul(a)?.mul(&v.adjoint())?.scale(*alpha))
            }
            PreserverSpec::BlockPermutation { pi } => {
                let s = a.structure();
                check_permutation(pi, s)?;
                let mut blocks: Vec<CMat> = s.dims().iter().map(|&n| CMat::zeros(n, n)).collect();
                for (lambda, &mu) in pi.iter().enumerate() {
                    blocks[mu] = a.block(lambda).clone();
                }
                Element::validate(s, blocks)
            }
            PreserverSpec::Conjugation => Ok(a.conjugate()),
            PreserverSpec::Wild { seed, tau_policy } => wild(a, *seed, tau_policy, tol),
            PreserverSpec::Dim2Induced { block, phi } => {
                dim2::LineTable::build(a.structure(), *block, phi)?.apply(a)
            }
            PreserverSpec::Table { pairs } => pairs
                .iter()
                .find(|(input, _)| same_element(input, a))
                .map(|(_, output)| output.clone())
                .ok_or(Error::DomainMiss),
            PreserverSpec::Composite { parts } => {
                parts.iter().try_fold(a.clone(), |acc, p| p.apply(&acc, tol))
            }
        }
    }

    /// The inverse spec, when it is known in closed form.
    pub fn inverse_spec(&self) -> Option<PreserverSpec> {
        match self {
            PreserverSpec::Sandwich { u, v, alpha } => Some(PreserverSpec::Sandwich {
                u: u.adjoint(),
                v: v.adjoint(),
                alpha: alpha.inv(),
            }),
            PreserverSpec::BlockPermutation { pi } => {
                let mut inv = vec![0; pi.len()];
                for (lambda, &mu) in pi.iter().enumerate() {
                    *inv.get_mut(mu)? = lambda;
                }
                Some(PreserverSpec::BlockPermutation { pi: inv })
            }
            PreserverSpec::Conjugation => Some(PreserverSpec::Conjugation),
            PreserverSpec::Wild { .. } => None,
            PreserverSpec::Dim2Induced { block, phi } => Some(PreserverSpec::Dim2Induced {
                block: *block,
                phi: phi.iter().map(LinePair::swapped).collect(),
            }),
            PreserverSpec::Table { pairs } => Some(PreserverSpec::Table {
                pairs: pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            }),
            PreserverSpec::Composite { parts } => parts
                .iter()
                .rev()
                .map(PreserverSpec::inverse_spec)
                .collect::<Option<Vec<_>>>()
                .map(|parts| PreserverSpec::Composite { parts }),
        }
    }

    pub fn is_block_respecting(&self) -> bool {
        match self {
            PreserverSpec::Table { .. } => false,
            PreserverSpec::Composite { parts } => parts.iter().all(Self::is_block_respecting),
            _ => true,
        }
    }
}

impl CandidateMap for PreserverSpec {
    fn apply(&self, a: &Element, tol: &Tolerance) -> Result<Element> {
        PreserverSpec::apply(self, a, tol)
    }

    fn inverse(&self) -> Option<Box<dyn CandidateMap>> {
        self.inverse_spec().map(|s| Box::new(s) as Box<dyn CandidateMap>)
    }

    fn domain(&self) -> Option<Vec<Element>> {
        match self {
            PreserverSpec::Table { pairs } => Some(pairs.iter().map(|(a, _)| a.clone()).collect()),
            PreserverSpec::Composite { parts } => parts.first().and_then(CandidateMap::domain),
            _ => None,
        }
    }

    fn block_respecting(&self) -> bool {
        self.is_block_respecting()
    }

    fn plant(&self, s: &BlockStructure, rng: &mut ChaCha8Rng) -> Option<Element> {
        match self {
            PreserverSpec::Dim2Induced { block, phi } => {
                dim2::LineTable::build(s, *block, phi).ok()?.plant(rng)
            }
            PreserverSpec::Composite { parts } => parts.iter().find_map(|p| p.plant(s, rng)),
            _ => None,
        }
    }
}
