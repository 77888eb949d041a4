use std::io::Write;
use std::path::Path;
use std::time::Instant;

use boxlab::boxes::{dense_from_sym, DenseBox, Interface, Predicate, SymBox, SymmetricProfile};
use boxlab::channels::{
    counterexample_channels, diamond_over_polytope, verify_counterexample_with, Channel,
    DistinguishReport,
};
use boxlab::corpus::quantum_mixtures;
use boxlab::definetti::{
    c_prime_diagnostic, certify_second_definetti, diaconis_freedman_check, second_definetti_rhs,
    tau_chsh, FirstDeFinetti, GeneralDeFinetti,
};
use boxlab::linprog::{extension_polytope, ns_polytope, round_ns_polytope, Polytope};
use boxlab::numerics::{
    fraction_string, parse_fraction, Config, Field, FrequencyVector, QSqrt2, Rational,
};
use boxlab::threshold::check_chsh_threshold;
use serde_json::{json, Value};

use crate::error::{exit, CliError, CliResult};
use crate::format::{self, ChannelPair, LoadedBox, ScalarKind};
use crate::report::{self, decimal, BoundRow};
use crate::{Cli, Command};

pub const PATTERN_CAP_ENV: &str = "BOXLAB_PATTERN_CAP";

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<i32> {
    let tol = cli.tol;
    match &cli.command {
        Command::Tau { n, dense, output } => tau(*n as usize, *dense, output.as_deref(), out),
        Command::Cert1 { input, report } => cert1(input, report.as_deref(), out),
        Command::Cert2 { input, k, report } => cert2(input, *k, tol, report.as_deref(), out),
        Command::Threshold { input, report } => threshold(input, report.as_deref(), out),
        Command::Dfcheck { input, k, report } => dfcheck(input, *k, report.as_deref(), out),
        Command::Diamond {
            channels,
            polytope,
            n,
            eve_in,
            eve_out,
            witness,
        } => diamond(
            channels,
            polytope,
            *n,
            (*eve_in, *eve_out),
            witness.as_deref(),
            out,
        ),
        Command::Counterexample {
            n,
            m,
            full,
            channels_out,
        } => counterexample(*n, *m, *full, channels_out.as_deref(), out),
        Command::General {
            family,
            pred,
            mu,
            input,
            c,
            grid,
            report,
        } => general(
            &GeneralArgs {
                family,
                pred,
                mu,
                input,
                c,
                grid: *grid,
                tol,
            },
            report.as_deref(),
            out,
        ),
        Command::ErrorCurve {
            k,
            min_exp,
            max_exp,
            output,
        } => error_curve(*k, *min_exp, *max_exp, output.as_deref(), out),
        Command::Corpus { seed, count, max_n } => corpus(*seed, *count, *max_n, tol, out),
    }
}

fn emit(out: &mut dyn Write, v: &Value) -> CliResult<()> {
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    )
    .map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn verdict(pass: bool) -> i32 {
    if pass {
        exit::PASS
    } else {
        exit::VIOLATION
    }
}

fn exact(v: &QSqrt2) -> Value {
    json!({ "exact": v.to_exact_string(), "decimal": decimal(v.as_f64()) })
}

fn write_rows(path: Option<&Path>, rows: &[BoundRow]) -> CliResult<()> {
    match path {
        Some(p) => report::write_bound_rows(report::create(p)?, rows),
        None => Ok(()),
    }
}

/// The diamond pattern cap, from the environment when set.
pub fn pattern_cap() -> CliResult<u64> {
    match std::env::var(PATTERN_CAP_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{PATTERN_CAP_ENV} must be a positive integer, got {s:?}"
            ))
        }),
        Err(_) => Ok(Config::default().pattern_cap),
    }
}

fn tau(n: usize, dense: bool, output: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let t = tau_chsh(n)?;
    let doc = if dense {
        serde_json::to_value(format::box_doc(&dense_from_sym(&t)?))
    } else {
        serde_json::to_value(format::symbox_doc(&t))
    }
    .expect("documents serialize");
    match output {
        Some(p) => format::write_json(p, &doc)?,
        None => emit(out, &doc)?,
    }
    Ok(exit::PASS)
}

fn load_symbox(input: &Path) -> CliResult<SymBox<QSqrt2>> {
    format::load_box(input)?.to_symbox()
}

fn cert1(input: &Path, report: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let p = load_symbox(input)?;
    let certifier = FirstDeFinetti::new(p.n())?;
    let cert = certifier.certify(&p)?;
    let rows: Vec<BoundRow> = p
        .p()
        .iter()
        .zip(certifier.tau().p())
        .enumerate()
        .map(|(k, (pk, tk))| BoundRow::new(k, pk.clone(), cert.prefactor.clone() * tk))
        .collect();
    write_rows(report, &rows)?;
    emit(
        out,
        &json!({
            "command": "cert1",
            "n": p.n(),
            "pass": cert.pass,
            "prefactor": exact(&cert.prefactor),
            "worst_ratio": exact(&cert.worst_ratio),
            "worst_k": cert.witness,
        }),
    )?;
    Ok(verdict(cert.pass))
}

fn cert2(
    input: &Path,
    k: usize,
    tol: f64,
    report: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let p = load_symbox(input)?;
    let r = certify_second_definetti(&p, k, tol)?;
    write_rows(report, &[BoundRow::new(k, r.lhs.clone(), r.rhs)])?;
    emit(
        out,
        &json!({
            "command": "cert2",
            "n": p.n(),
            "k": k,
            "pass": r.pass,
            "lhs": exact(&r.lhs),
            "rhs": decimal(r.rhs),
            "tol": tol,
        }),
    )?;
    Ok(verdict(r.pass))
}

fn threshold(input: &Path, report: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let p = load_symbox(input)?;
    let r = check_chsh_threshold(&p)?;
    let rows: Vec<BoundRow> = r
        .rows
        .iter()
        .map(|row| BoundRow::new(row.k, row.observed.clone(), row.bound.clone()))
        .collect();
    write_rows(report, &rows)?;
    let failure = r
        .first_failure()
        .map(|row| json!({ "k": row.k, "kind": row.kind.to_string() }));
    emit(
        out,
        &json!({
            "command": "threshold",
            "n": p.n(),
            "pass": r.pass,
            "first_failure": failure,
        }),
    )?;
    Ok(verdict(r.pass))
}

fn dfcheck(input: &Path, k: usize, report: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let p = load_symbox(input)?;
    let r = diaconis_freedman_check(&p, k)?;
    let rhs = QSqrt2::from(r.rhs.clone());
    write_rows(report, &[BoundRow::new(k, r.lhs.clone(), rhs.clone())])?;
    emit(
        out,
        &json!({
            "command": "dfcheck",
            "n": p.n(),
            "k": k,
            "pass": r.pass,
            "lhs": exact(&r.lhs),
            "rhs": exact(&rhs),
        }),
    )?;
    Ok(verdict(r.pass))
}

enum PolytopeKind {
    Ns,
    RoundNs,
    Extension(DenseBox<QSqrt2>),
}

fn parse_polytope(kind: &str) -> CliResult<PolytopeKind> {
    match kind {
        "ns" => Ok(PolytopeKind::Ns),
        "roundns" => Ok(PolytopeKind::RoundNs),
        _ => match kind.strip_prefix("ext:") {
            Some(path) => Ok(PolytopeKind::Extension(
                format::load_box(Path::new(path))?.to_dense()?,
            )),
            None => Err(CliError::Usage(format!(
                "--polytope must be ns, roundns or ext:FILE, got {kind:?}"
            ))),
        },
    }
}

fn narrow_channel(ch: &Channel<QSqrt2>) -> CliResult<Channel<Rational>> {
    let narrow = |vs: &[QSqrt2]| -> CliResult<Vec<Rational>> {
        vs.iter()
            .map(|v| {
                v.as_rational()
                    .ok_or_else(|| CliError::Format("channel value outside the rationals".into()))
            })
            .collect()
    };
    Ok(Channel::new(
        ch.n(),
        ch.alphabets().clone(),
        narrow(ch.px())?,
        ch.results(),
        narrow(ch.kernel())?,
    )?)
}

fn diamond_in<F: Field>(
    e: &Channel<F>,
    f: &Channel<F>,
    kind: &PolytopeKind,
    eve: Option<Interface>,
    cap: u64,
) -> CliResult<(DistinguishReport<F>, Polytope<F>)> {
    let alph = match eve {
        Some(i) => e.alphabets().with_eve(i)?,
        None => e.alphabets().clone(),
    };
    let polytope = match kind {
        PolytopeKind::Ns => ns_polytope(e.n(), &alph)?,
        PolytopeKind::RoundNs => round_ns_polytope(e.n(), &alph)?,
        PolytopeKind::Extension(tau) => {
            let eve = eve.expect("extension polytopes always carry Eve");
            let entries = tau
                .entries()
                .iter()
                .map(|v| {
                    F::from_qsqrt2(v)
                        .ok_or_else(|| CliError::Format("τ entry outside the scalar field".into()))
                })
                .collect::<CliResult<Vec<F>>>()?;
            let tau = DenseBox::new(tau.n(), tau.alphabets().clone(), entries)?;
            extension_polytope(&tau, eve.outputs, eve.inputs)?
        }
    };
    let report = diamond_over_polytope(e, f, &polytope, eve, cap)?;
    Ok((report, polytope))
}

fn diamond_summary<F: Field>(
    r: &DistinguishReport<F>,
    polytope: &Polytope<F>,
    witness: Option<&Path>,
) -> CliResult<Value> {
    let verified = match &r.witness {
        Some(w) => {
            if let Some(p) = witness {
                format::write_json(p, &format::box_doc(w))?;
            }
            polytope.contains(w.entries())
        }
        None => false,
    };
    Ok(json!({
        "command": "diamond",
        "value": exact(&r.value.to_qsqrt2()),
        "patterns": r.patterns.to_string(),
        "z_per_r": r.z_per_r,
        "signs": r.signs,
        "witness_feasible": verified,
    }))
}

fn diamond(
    channels: &Path,
    polytope: &str,
    n: usize,
    eve: (Option<usize>, Option<usize>),
    witness: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let ChannelPair { e, f, scalar } = format::load_channels(channels, n)?;
    let kind = parse_polytope(polytope)?;
    let eve = match (&kind, eve) {
        (PolytopeKind::Extension(_), (zi, eo)) => {
            Some(Interface::new(zi.unwrap_or(1), eo.unwrap_or(1)))
        }
        (_, (None, None)) => None,
        (_, (zi, eo)) => Some(Interface::new(zi.unwrap_or(1), eo.unwrap_or(1))),
    };
    if let PolytopeKind::Extension(tau) = &kind {
        if tau.n() != n || tau.alphabets() != e.alphabets() {
            return Err(CliError::Usage(
                "τ does not match the channels' rounds and interfaces".into(),
            ));
        }
    }
    let cap = pattern_cap()?;
    let rational = scalar == ScalarKind::Rational
        && match &kind {
            PolytopeKind::Extension(tau) => ScalarKind::of(tau.entries()) == ScalarKind::Rational,
            _ => true,
        };
    let summary = if rational {
        let (e, f) = (narrow_channel(&e)?, narrow_channel(&f)?);
        let (r, p) = diamond_in(&e, &f, &kind, eve, cap)?;
        diamond_summary(&r, &p, witness)?
    } else {
        let (r, p) = diamond_in(&e, &f, &kind, eve, cap)?;
        diamond_summary(&r, &p, witness)?
    };
    let ok = summary["witness_feasible"].as_bool() == Some(true);
    emit(out, &summary)?;
    Ok(if ok { exit::PASS } else { exit::INTERNAL })
}

fn counterexample(
    n: usize,
    m: usize,
    full: bool,
    channels_out: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let start = Instant::now();
    let ce = counterexample_channels(n, m)?;
    if let Some(p) = channels_out {
        format::write_json(p, &format::channels_doc(&ce.e, &ce.f))?;
    }
    let r = verify_counterexample_with(&ce, None, pattern_cap()?)?;
    let runtime = start.elapsed().as_secs_f64();
    let zero = Rational::from_integer(0.into());
    let holds = r.roundns_value == zero && r.q_value > zero && r.twirled_value > zero;
    let mut v = json!({
        "command": "counterexample",
        "n": r.n,
        "m": r.m,
        "roundns_value": fraction_string(&r.roundns_value),
        "roundns_patterns": r.roundns_patterns.to_string(),
        "q_value": fraction_string(&r.q_value),
        "pr_estar": fraction_string(&r.pr_estar),
        "estar_term": fraction_string(&r.estar_term),
        "twirled_value": fraction_string(&r.twirled_value),
        "holds": holds,
        "runtime": runtime,
    });
    if full {
        v["delta"] = r.delta.iter().map(fraction_string).collect();
    }
    emit(out, &v)?;
    Ok(verdict(holds))
}

struct GeneralArgs<'a> {
    family: &'a Path,
    pred: &'a Path,
    mu: &'a Path,
    input: &'a Path,
    c: &'a str,
    grid: usize,
    tol: f64,
}

fn freq_label(f: &FrequencyVector) -> String {
    f.counts()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn general(args: &GeneralArgs, report: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let family = format::load_family(args.family)?;
    let pred = format::load_predicate(args.pred)?;
    let mu = format::load_input_dist(args.mu)?;
    let b = format::load_box(args.input)?;
    let c = parse_fraction(args.c)
        .ok_or_else(|| CliError::Usage(format!("--C must be a fraction, got {:?}", args.c)))?;
    let certifier = GeneralDeFinetti::new(&family, &pred, &mu, b.n(), c, args.grid, args.tol)?;
    let (cert, law) = match &b {
        LoadedBox::Sym(s) => {
            if pred != Predicate::chsh() || mu.round_inputs() != 4 {
                return Err(CliError::Usage(
                    "win-count boxes need the CHSH predicate".into(),
                ));
            }
            let profile = SymmetricProfile::from_chsh(s);
            (
                certifier.certify(&profile)?,
                profile.freq_law(certifier.masses())?,
            )
        }
        LoadedBox::Dense(d) => (
            certifier.certify_dense(d, &pred, &mu)?,
            pred.freq_distribution(d, &mu)?,
        ),
    };
    let rows: Vec<BoundRow> = certifier
        .tau_law()
        .iter()
        .map(|(f, t)| {
            let pr = law
                .iter()
                .find(|(g, _)| g == f)
                .map_or(QSqrt2::from_int(0), |(_, v)| v.clone());
            BoundRow::new(freq_label(f), pr, certifier.prefactor().clone() * t)
        })
        .collect();
    write_rows(report, &rows)?;
    let tau = certifier.tau();
    let entry = cert
        .entry
        .as_ref()
        .map(|e| json!({ "pass": e.pass, "worst_ratio": exact(&e.worst_ratio) }));
    let pass = cert.frequency.pass && cert.entry.as_ref().is_none_or(|e| e.pass);
    emit(
        out,
        &json!({
            "command": "general",
            "n": b.n(),
            "pass": pass,
            "prefactor": exact(certifier.prefactor()),
            "frequency": { "pass": cert.frequency.pass, "worst_ratio": exact(&cert.frequency.worst_ratio) },
            "witness": cert.witness.counts(),
            "entry": entry,
            "grid_resolution": tau.resolution,
            "grid_points": tau.points,
            "grid_error": tau.grid_error,
            "robust": cert.robust,
            "dominance_ratio": tau.dominance_ratio,
        }),
    )?;
    Ok(verdict(pass))
}

/// `(n, rhs)` of the finite-k error bound for `n = 2^min_exp..=2^max_exp`.
pub fn error_curve_points(k: usize, min_exp: u32, max_exp: u32) -> CliResult<Vec<(usize, f64)>> {
    if min_exp > max_exp || max_exp > 40 {
        return Err(CliError::Usage("need min-exp <= max-exp <= 40".into()));
    }
    let points: Vec<(usize, f64)> = (min_exp..=max_exp)
        .map(|e| 1usize << e)
        .map(|n| (n, second_definetti_rhs(n, k)))
        .collect();
    if k == 0 || points.first().is_some_and(|&(n, _)| k > n) {
        return Err(CliError::Usage(format!(
            "need 1 <= k <= 2^min-exp, got k = {k}"
        )));
    }
    Ok(points)
}

fn error_curve(
    k: usize,
    min_exp: u32,
    max_exp: u32,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let rows: Vec<Vec<String>> = error_curve_points(k, min_exp, max_exp)?
        .into_iter()
        .map(|(n, rhs)| {
            let (beta, optimized) = c_prime_diagnostic((n as f64 / k as f64).ln());
            vec![
                n.to_string(),
                k.to_string(),
                decimal(rhs),
                decimal(beta),
                decimal(optimized),
            ]
        })
        .collect();
    let header = ["n", "k", "rhs", "beta_star", "c_prime"];
    match output {
        Some(p) => report::write_table(report::create(p)?, &header, &rows)?,
        None => report::write_table(out, &header, &rows)?,
    }
    Ok(exit::PASS)
}

fn corpus(seed: u64, count: usize, max_n: usize, tol: f64, out: &mut dyn Write) -> CliResult<i32> {
    let boxes = quantum_mixtures(seed, count, max_n)?;
    let mut certifiers: Vec<Option<FirstDeFinetti>> = (0..=max_n).map(|_| None).collect();
    let (mut checks, mut violations) = (0usize, Vec::new());
    for (i, b) in boxes.iter().enumerate() {
        let n = b.n();
        if certifiers[n].is_none() {
            certifiers[n] = Some(FirstDeFinetti::new(n)?);
        }
        let cert = certifiers[n].as_ref().expect("filled above").certify(b)?;
        let mut results = vec![("cert1", 0, cert.pass)];
        for k in 1..=n.min(4) {
            results.push(("cert2", k, certify_second_definetti(b, k, tol)?.pass));
            results.push(("dfcheck", k, diaconis_freedman_check(b, k)?.pass));
        }
        checks += results.len();
        violations.extend(
            results
                .into_iter()
                .filter(|r| !r.2)
                .map(|(name, k, _)| json!({ "box": i, "n": n, "check": name, "k": k })),
        );
    }
    let pass = violations.is_empty();
    emit(
        out,
        &json!({
            "command": "corpus",
            "seed": seed,
            "boxes": boxes.len(),
            "checks": checks,
            "pass": pass,
            "violations": violations,
        }),
    )?;
    Ok(verdict(pass))
}
