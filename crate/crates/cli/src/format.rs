//! JSON file formats.
//!
//! Scalars are never floats: a rational is the string `"num/den"` (a bare
//! integer string is accepted on input) and an element `a + b√2` of ℚ(√2) is
//! the pair `["a", "b"]`.
//!
//! Dense entries are listed input-major, outputs fastest: entry `x·|A| + a`
//! is `P(a|x)`. Within an input (or output) index the sites are mixed-radix
//! digits, most significant first, in the order party 0 rounds 1..n, party 1
//! rounds 1..n, …, then Eve.

use std::path::Path;

use boxlab::boxes::{Alphabets, DenseBox, InputDist, Interface, Predicate, SymBox};
use boxlab::channels::Channel;
use boxlab::definetti::ConvexFamily;
use boxlab::numerics::{fraction_string, parse_fraction, Field, QSqrt2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const BOX_FORMAT: &str = "boxlab/box-v1";
pub const SYMBOX_FORMAT: &str = "boxlab/symbox-v1";
pub const CHANNELS_FORMAT: &str = "boxlab/channels-v1";
pub const FAMILY_FORMAT: &str = "boxlab/family-v1";
pub const PREDICATE_FORMAT: &str = "boxlab/predicate-v1";
pub const INPUT_DIST_FORMAT: &str = "boxlab/input-dist-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Rational,
    Qsqrt2,
}

impl ScalarKind {
    /// The narrowest kind holding every value.
    pub fn of<'a>(values: impl IntoIterator<Item = &'a QSqrt2>) -> Self {
        if values.into_iter().all(|v| v.as_rational().is_some()) {
            Self::Rational
        } else {
            Self::Qsqrt2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    #[serde(rename = "in")]
    pub inputs: usize,
    #[serde(rename = "out")]
    pub outputs: usize,
}

impl From<Interface> for InterfaceSpec {
    fn from(i: Interface) -> Self {
        Self {
            inputs: i.inputs,
            outputs: i.outputs,
        }
    }
}

impl From<InterfaceSpec> for Interface {
    fn from(i: InterfaceSpec) -> Self {
        Interface::new(i.inputs, i.outputs)
    }
}

/// `{"format": "boxlab/box-v1", ...}`; with `"eve": true` the last interface is Eve's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDoc {
    pub format: String,
    pub n: usize,
    pub interfaces: Vec<InterfaceSpec>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub eve: bool,
    pub scalar: ScalarKind,
    pub entries: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymBoxDoc {
    pub format: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<ScalarKind>,
    pub p: Vec<Value>,
}

/// A channel pair on the same parties; `PX` is either the single-round input
/// law (applied iid) or the full table over n-round inputs. Kernels are listed
/// with the result fastest, then the output, then the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsDoc {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub interfaces: Vec<InterfaceSpec>,
    pub results: usize,
    #[serde(rename = "PX")]
    pub px: Vec<Value>,
    #[serde(rename = "PE_R|AX")]
    pub pe: Vec<Value>,
    #[serde(rename = "PF_R|AX")]
    pub pf: Vec<Value>,
}

/// Single-round boxes `offset + Σ φ_i·directions[i]` for `φ` in the hull of `vertices`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub format: String,
    pub interfaces: Vec<InterfaceSpec>,
    pub vertices: Vec<Vec<Value>>,
    pub offset: Vec<Value>,
    pub directions: Vec<Vec<Value>>,
}

/// `table[x][a]` is the class of `(a, x)`, labelled `1..=d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDoc {
    pub format: String,
    pub d: usize,
    pub table: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDistDoc {
    pub format: String,
    pub p: Vec<Value>,
}

/// A box file after loading; values are held in ℚ(√2).
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedBox {
    Sym(SymBox<QSqrt2>),
    Dense(DenseBox<QSqrt2>),
}

impl LoadedBox {
    pub fn n(&self) -> usize {
        match self {
            Self::Sym(s) => s.n(),
            Self::Dense(d) => d.n(),
        }
    }

    /// The CHSH-symmetric form; dense boxes are checked and compressed.
    pub fn to_symbox(&self) -> CliResult<SymBox<QSqrt2>> {
        match self {
            Self::Sym(s) => Ok(s.clone()),
            Self::Dense(d) => {
                if !d.alphabets().is_chsh() {
                    return Err(CliError::Format("expected a two-party CHSH box".into()));
                }
                Ok(boxlab::boxes::sym_from_dense(d)?)
            }
        }
    }

    pub fn to_dense(&self) -> CliResult<DenseBox<QSqrt2>> {
        match self {
            Self::Sym(s) => Ok(boxlab::boxes::dense_from_sym(s)?),
            Self::Dense(d) => Ok(d.clone()),
        }
    }
}

pub fn scalar_to_json(v: &QSqrt2, kind: ScalarKind) -> Value {
    match kind {
        ScalarKind::Rational => Value::String(fraction_string(v.rational_part())),
        ScalarKind::Qsqrt2 => Value::Array(vec![
            Value::String(fraction_string(v.rational_part())),
            Value::String(fraction_string(v.sqrt2_part())),
        ]),
    }
}

fn parse_rational_str(v: &Value, what: &str) -> CliResult<boxlab::numerics::Rational> {
    let s = v.as_str().ok_or_else(|| {
        CliError::Format(format!("{what}: expected a \"num/den\" string, got {v}"))
    })?;
    parse_fraction(s)
        .ok_or_else(|| CliError::Format(format!("{what}: cannot parse {s:?} as a fraction")))
}

/// Parses a scalar; `kind` restricts the accepted shape when given.
pub fn scalar_from_json(v: &Value, kind: Option<ScalarKind>, what: &str) -> CliResult<QSqrt2> {
    match (v, kind) {
        (Value::String(_), None | Some(ScalarKind::Rational)) => {
            Ok(QSqrt2::from(parse_rational_str(v, what)?))
        }
        (Value::Array(pair), None | Some(ScalarKind::Qsqrt2)) if pair.len() == 2 => {
            Ok(QSqrt2::new(
                parse_rational_str(&pair[0], what)?,
                parse_rational_str(&pair[1], what)?,
            ))
        }
        _ => Err(CliError::Format(format!("{what}: malformed scalar {v}"))),
    }
}

fn scalars(values: &[Value], kind: Option<ScalarKind>, what: &str) -> CliResult<Vec<QSqrt2>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| scalar_from_json(v, kind, &format!("{what}[{i}]")))
        .collect()
}

fn check_format(found: &str, expected: &str) -> CliResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(CliError::Format(format!(
            "expected format {expected:?}, found {found:?}"
        )))
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn parse_doc<T: serde::de::DeserializeOwned>(path: &Path, v: Value) -> CliResult<T> {
    serde_json::from_value(v).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("documents serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn alphabets(interfaces: &[InterfaceSpec], eve: bool) -> CliResult<Alphabets> {
    let mut parties: Vec<Interface> = interfaces.iter().map(|&i| i.into()).collect();
    let eve = if eve {
        Some(
            parties
                .pop()
                .ok_or_else(|| CliError::Format("\"eve\" needs at least one interface".into()))?,
        )
    } else {
        None
    };
    Ok(Alphabets::new(parties, eve)?)
}

fn interface_specs(alph: &Alphabets) -> Vec<InterfaceSpec> {
    alph.parties()
        .iter()
        .copied()
        .chain(alph.eve())
        .map(Into::into)
        .collect()
}

pub fn box_doc<F: Field>(b: &DenseBox<F>) -> BoxDoc {
    let entries: Vec<QSqrt2> = b.entries().iter().map(Field::to_qsqrt2).collect();
    let scalar = ScalarKind::of(&entries);
    BoxDoc {
        format: BOX_FORMAT.into(),
        n: b.n(),
        interfaces: interface_specs(b.alphabets()),
        eve: b.alphabets().eve().is_some(),
        scalar,
        entries: entries.iter().map(|v| scalar_to_json(v, scalar)).collect(),
    }
}

pub fn symbox_doc<F: Field>(s: &SymBox<F>) -> SymBoxDoc {
    let p: Vec<QSqrt2> = s.p().iter().map(Field::to_qsqrt2).collect();
    let scalar = ScalarKind::of(&p);
    SymBoxDoc {
        format: SYMBOX_FORMAT.into(),
        n: s.n(),
        scalar: (scalar == ScalarKind::Qsqrt2).then_some(scalar),
        p: p.iter().map(|v| scalar_to_json(v, scalar)).collect(),
    }
}

pub fn box_from_doc(doc: &BoxDoc) -> CliResult<DenseBox<QSqrt2>> {
    check_format(&doc.format, BOX_FORMAT)?;
    let alph = alphabets(&doc.interfaces, doc.eve)?;
    let entries = scalars(&doc.entries, Some(doc.scalar), "entries")?;
    Ok(DenseBox::new(doc.n, alph, entries)?)
}

pub fn symbox_from_doc(doc: &SymBoxDoc) -> CliResult<SymBox<QSqrt2>> {
    check_format(&doc.format, SYMBOX_FORMAT)?;
    if doc.p.len() != doc.n + 1 {
        return Err(CliError::Format(format!(
            "symbox with n = {} needs {} values of p",
            doc.n,
            doc.n + 1
        )));
    }
    Ok(SymBox::new(scalars(&doc.p, doc.scalar, "p")?)?)
}

/// Loads either box format, chosen by the `format` field.
pub fn load_box(path: &Path) -> CliResult<LoadedBox> {
    let v = read_json(path)?;
    match v.get("format").and_then(Value::as_str) {
        Some(BOX_FORMAT) => Ok(LoadedBox::Dense(box_from_doc(&parse_doc(path, v)?)?)),
        Some(SYMBOX_FORMAT) => Ok(LoadedBox::Sym(symbox_from_doc(&parse_doc(path, v)?)?)),
        other => Err(CliError::Format(format!(
            "{}: unknown box format {other:?}",
            path.display()
        ))),
    }
}

/// Both channels, with the kind of scalar their data needs.
pub struct ChannelPair {
    pub e: Channel<QSqrt2>,
    pub f: Channel<QSqrt2>,
    pub scalar: ScalarKind,
}

pub fn channels_from_doc(doc: &ChannelsDoc, n: usize) -> CliResult<ChannelPair> {
    check_format(&doc.format, CHANNELS_FORMAT)?;
    if let Some(file_n) = doc.n {
        if file_n != n {
            return Err(CliError::Usage(format!(
                "channel file is for n = {file_n}, not {n}"
            )));
        }
    }
    let alph = alphabets(&doc.interfaces, false)?;
    let px = scalars(&doc.px, None, "PX")?;
    let pe = scalars(&doc.pe, None, "PE_R|AX")?;
    let pf = scalars(&doc.pf, None, "PF_R|AX")?;
    let scalar = ScalarKind::of(px.iter().chain(&pe).chain(&pf));
    let px = if px.len() == alph.round_inputs() && n > 1 {
        Channel::iid_inputs(n, &alph, &px)?
    } else {
        px
    };
    Ok(ChannelPair {
        e: Channel::new(n, alph.clone(), px.clone(), doc.results, pe)?,
        f: Channel::new(n, alph, px, doc.results, pf)?,
        scalar,
    })
}

pub fn channels_doc<F: Field>(e: &Channel<F>, f: &Channel<F>) -> ChannelsDoc {
    let q = |vs: &[F]| -> Vec<QSqrt2> { vs.iter().map(Field::to_qsqrt2).collect() };
    let (px, pe, pf) = (q(e.px()), q(e.kernel()), q(f.kernel()));
    let kind = ScalarKind::of(px.iter().chain(&pe).chain(&pf));
    let json =
        |vs: &[QSqrt2]| -> Vec<Value> { vs.iter().map(|v| scalar_to_json(v, kind)).collect() };
    ChannelsDoc {
        format: CHANNELS_FORMAT.into(),
        n: Some(e.n()),
        interfaces: interface_specs(e.alphabets()),
        results: e.results(),
        px: json(&px),
        pe: json(&pe),
        pf: json(&pf),
    }
}

pub fn load_channels(path: &Path, n: usize) -> CliResult<ChannelPair> {
    let v = read_json(path)?;
    channels_from_doc(&parse_doc(path, v)?, n)
}

pub fn family_from_doc(doc: &FamilyDoc) -> CliResult<ConvexFamily<QSqrt2>> {
    check_format(&doc.format, FAMILY_FORMAT)?;
    let alph = alphabets(&doc.interfaces, false)?;
    let vertices = doc
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| scalars(v, None, &format!("vertices[{i}]")))
        .collect::<CliResult<_>>()?;
    let directions = doc
        .directions
        .iter()
        .enumerate()
        .map(|(i, v)| scalars(v, None, &format!("directions[{i}]")))
        .collect::<CliResult<_>>()?;
    Ok(ConvexFamily::new(
        alph,
        vertices,
        scalars(&doc.offset, None, "offset")?,
        directions,
    )?)
}

pub fn load_family(path: &Path) -> CliResult<ConvexFamily<QSqrt2>> {
    let v = read_json(path)?;
    family_from_doc(&parse_doc(path, v)?)
}

pub fn predicate_from_doc(doc: &PredicateDoc) -> CliResult<Predicate> {
    check_format(&doc.format, PREDICATE_FORMAT)?;
    let outputs = doc.table.first().map_or(0, Vec::len);
    if outputs == 0 || doc.table.iter().any(|row| row.len() != outputs) {
        return Err(CliError::Format(
            "predicate table must be a non-empty rectangle".into(),
        ));
    }
    let mut table = Vec::with_capacity(doc.table.len() * outputs);
    for (x, row) in doc.table.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if c == 0 || c > doc.d {
                return Err(CliError::Format(format!(
                    "predicate class at input {x}, output {a} is {c}; labels run from 1 to {}",
                    doc.d
                )));
            }
            table.push(c - 1);
        }
    }
    Ok(Predicate::new(doc.d, doc.table.len(), outputs, table)?)
}

pub fn predicate_doc(pred: &Predicate) -> PredicateDoc {
    PredicateDoc {
        format: PREDICATE_FORMAT.into(),
        d: pred.d(),
        table: pred
            .table()
            .chunks(pred.round_outputs())
            .map(|row| row.iter().map(|c| c + 1).collect())
            .collect(),
    }
}

pub fn load_predicate(path: &Path) -> CliResult<Predicate> {
    let v = read_json(path)?;
    predicate_from_doc(&parse_doc(path, v)?)
}

pub fn load_input_dist(path: &Path) -> CliResult<InputDist<QSqrt2>> {
    let v = read_json(path)?;
    let doc: InputDistDoc = parse_doc(path, v)?;
    check_format(&doc.format, INPUT_DIST_FORMAT)?;
    Ok(InputDist::new(scalars(&doc.p, None, "p")?)?)
}

pub fn family_doc(family: &ConvexFamily<QSqrt2>) -> FamilyDoc {
    let json = |vs: &[QSqrt2]| -> Vec<Value> {
        let kind = ScalarKind::of(vs);
        vs.iter().map(|v| scalar_to_json(v, kind)).collect()
    };
    FamilyDoc {
        format: FAMILY_FORMAT.into(),
        interfaces: interface_specs(family.alphabets()),
        vertices: family.vertices().iter().map(|v| json(v)).collect(),
        offset: json(family.offset()),
        directions: family.directions().iter().map(|v| json(v)).collect(),
    }
}

pub fn input_dist_doc(mu: &InputDist<QSqrt2>) -> InputDistDoc {
    let kind = ScalarKind::of(mu.per_round());
    InputDistDoc {
        format: INPUT_DIST_FORMAT.into(),
        p: mu
            .per_round()
            .iter()
            .map(|v| scalar_to_json(v, kind))
            .collect(),
    }
}
