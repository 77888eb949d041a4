use crate::boxes::{chsh_symmetry_violation, DenseBox, Interface, Layout};
use crate::definetti::certify_first_definetti_dense;
use crate::error::{Error, Result};
use crate::numerics::Field;

use super::channel::{distinguishability, Channel};

/// Non-signaling extension of `τ_AB` built from an extension `P_ABE` of a box
/// that the first de Finetti bound dominates.
#[derive(Debug, Clone, PartialEq)]
pub struct DominatedExtension<F> {
    /// Eve's alphabet gains one output `e*`, the last index.
    pub extension: DenseBox<F>,
    /// `R` with `τ = P/(n+1)² + (1 − (n+1)^{−2}) R`.
    pub remainder: DenseBox<F>,
    /// `(n+1)^{−2}`.
    pub weight: F,
    pub e_star: usize,
}

/// Mixes `P_ABE` (weight `(n+1)^{−2}`) with the remainder `R` tagged by a fresh
/// Eve outcome.
///
/// Checks the premises (AB-marginal CHSH symmetric, de Finetti certificate,
/// `R ≥ 0`) and the postconditions (AB-marginal equals `τ` for every Eve
/// input, non-signaling).
pub fn build_dominated_extension<F: Field>(
    p_abe: &DenseBox<F>,
    tau: &DenseBox<F>,
) -> Result<DominatedExtension<F>> {
    let n = p_abe.n();
    let eve = p_abe
        .alphabets()
        .eve()
        .ok_or_else(|| Error::Shape("the box to dominate needs an Eve interface".into()))?;
    if tau.n() != n || tau.alphabets() != &p_abe.alphabets().without_eve() {
        return Err(Error::Shape(
            "de Finetti box and extension act on different interfaces".into(),
        ));
    }
    if let Err(w) = p_abe.nonsignaling() {
        return Err(Error::Precondition(format!(
            "box to dominate is signaling: {w:?}"
        )));
    }
    let p_ab = p_abe.eve_marginal(0)?;
    if let Some((first, second)) = chsh_symmetry_violation(&p_ab)? {
        return Err(Error::NotChshSymmetric { first, second });
    }
    let cert = certify_first_definetti_dense(&p_ab)?;
    if !cert.pass {
        return Err(Error::Precondition(format!(
            "first de Finetti bound fails (worst ratio {} at {})",
            cert.worst_ratio, cert.witness
        )));
    }
    let weight = F::one() / &F::from_int(((n + 1) * (n + 1)) as i64);
    let rest = F::one() - &weight;
    let r_entries: Vec<F> = tau
        .entries()
        .iter()
        .zip(p_ab.entries())
        .map(|(t, p)| (t.clone() - &(p.clone() * &weight)) / &rest)
        .collect();
    if let Some(index) = r_entries.iter().position(Field::is_neg) {
        return Err(Error::Precondition(format!(
            "remainder entry {index} is negative ({})",
            r_entries[index]
        )));
    }
    let remainder = DenseBox::new(n, tau.alphabets().clone(), r_entries)?;

    let e_star = eve.outputs;
    let alph = tau
        .alphabets()
        .with_eve(Interface::new(eve.inputs, eve.outputs + 1))?;
    let layout = Layout::new(&alph, n)?;
    let (pl, tl) = (p_abe.layout(), tau.layout());
    let extension = DenseBox::from_fn(n, alph, |x, a| {
        let (xs, z) = (layout.round_inputs(x), layout.eve_input(x));
        let (as_, e) = (layout.round_outputs(a), layout.eve_output(a));
        if e == e_star {
            remainder
                .entry(tl.encode_inputs(&xs, 0), tl.encode_outputs(&as_, 0))
                .clone()
                * &rest
        } else {
            p_abe
                .entry(pl.encode_inputs(&xs, z), pl.encode_outputs(&as_, e))
                .clone()
                * &weight
        }
    })?;

    for z in 0..eve.inputs {
        if extension.eve_marginal(z)? != *tau {
            return Err(Error::Internal(format!(
                "extension marginal differs from tau at Eve input {z}"
            )));
        }
    }
    if let Err(w) = extension.nonsignaling() {
        return Err(Error::Internal(format!("extension is signaling: {w:?}")));
    }
    Ok(DominatedExtension {
        extension,
        remainder,
        weight,
        e_star,
    })
}

/// `‖(E−F)⊗id(P)‖ ≤ (n+1)²·‖(E−F)⊗id(τ_ext)‖`, both sides exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport<F> {
    pub lhs: F,
    pub extension_value: F,
    pub rhs: F,
    pub holds: bool,
}

pub fn dominated_chain<F: Field>(
    e: &Channel<F>,
    f: &Channel<F>,
    p_abe: &DenseBox<F>,
    ext: &DominatedExtension<F>,
) -> Result<ChainReport<F>> {
    let lhs = distinguishability(e, f, p_abe)?.value;
    let extension_value = distinguishability(e, f, &ext.extension)?.value;
    let rhs = extension_value.clone() / &ext.weight;
    let holds = lhs <= rhs;
    Ok(ChainReport {
        lhs,
        extension_value,
        rhs,
        holds,
    })
}
