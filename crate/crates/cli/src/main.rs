//! `powerq`: largeness certificates, Magnus images, verbal series and the
//! periodic construction from the command line. Every document is JSON.

mod config;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_bigint::BigUint;
use powerq_core::arith::FactoredInt;
use powerq_core::largeness::{
    certify_power_quotient, lemma_fi_bound, verify_certificate, FiBound, Target, VerifyReport,
};
use powerq_core::magnus::embed_capped;
use powerq_core::periodic::{run_construction, ConstructionState};
use powerq_core::verbal::{levi_bound, VerbalLevel};
use powerq_core::{
    Domain, Error as CoreError, FactoredOrder, LargenessCertificate, PrimeSeq, QuotientSpec,
    VerbalSeries, Verdict, Word,
};
use serde::{Deserialize, Serialize};

use crate::config::Config;

#[derive(Parser, Debug)]
#[command(name = "powerq", version, about = "Power quotients of free groups: largeness certificates and verbal series")]
struct Cli {
    /// Write the document here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Seed for sampling; recorded in every document.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value config file.
    #[arg(long, global = true, env = "POWERQ_CONFIG")]
    config: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(long, global = true, value_name = "N")]
    enumeration_cap: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    term_cap: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    depth_cap: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    coset_cap: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify that F/<<g_1^q, ..., g_k^q>> is large.
    CertifyLarge {
        #[arg(short, long)]
        rank: usize,
        /// Comma-separated words.
        #[arg(short, long)]
        g: String,
        #[arg(short, long)]
        q: u64,
        /// Quotient spec (or a certificate) whose kernel is used as N.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// The threshold M past which a Magnus quotient separates the powers.
    LemmaFi {
        #[arg(short, long)]
        g: String,
        #[arg(short, long)]
        m: u32,
        /// Defaults to the highest generator mentioned, and at least 2.
        #[arg(short, long)]
        rank: Option<usize>,
    },
    /// Magnus image of a word in A/X^l over F_p, or over Z with `-p Z`.
    Magnus {
        #[arg(short, long)]
        w: String,
        #[arg(short, long)]
        p: String,
        #[arg(short, long)]
        l: usize,
        #[arg(short, long)]
        rank: Option<usize>,
    },
    /// Orders and membership in the verbal series of F.
    Gamma {
        #[arg(long)]
        primes: String,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, conflicts_with = "order")]
        member: Option<String>,
        #[arg(long)]
        order: Option<String>,
    },
    /// Least d with no word of the set in gamma_d.
    Levi {
        #[arg(long)]
        set: String,
        #[arg(long)]
        primes: String,
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Runs the periodic construction; one JSON line per step.
    ConstructPeriodic {
        #[arg(long)]
        primes: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        rank: usize,
    },
    /// Re-checks a certificate from its target and witness.
    Verify { cert: PathBuf },
}

/// A document with the seed in front.
#[derive(Serialize, Deserialize)]
struct Doc<T> {
    seed: u64,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct Refusal {
    target: Target,
    verdict: Verdict,
    reason: String,
}

#[derive(Serialize, Deserialize)]
struct MagnusDoc {
    word: String,
    rank: usize,
    domain: String,
    l: usize,
    series: String,
    terms: usize,
    trivial: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    unit_order: Option<FactoredInt>,
}

#[derive(Serialize, Deserialize)]
struct MemberQuery {
    word: String,
    member: bool,
}

#[derive(Serialize, Deserialize)]
struct OrderQuery {
    word: String,
    order: FactoredInt,
}

#[derive(Serialize, Deserialize)]
struct GammaDoc {
    primes: PrimeSeq,
    rank: usize,
    depth: usize,
    order: FactoredOrder,
    levels: Vec<VerbalLevel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    member: Option<MemberQuery>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    element_order: Option<OrderQuery>,
}

#[derive(Serialize, Deserialize)]
struct LeviDoc {
    primes: PrimeSeq,
    rank: usize,
    set: Vec<String>,
    depth: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TraceLine {
    State(Box<ConstructionState>),
    Halted { halted: String },
}

/// Exit status for a run that produced its documents.
enum Outcome {
    Success,
    NotCertified,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotCertified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_cap(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::EnumerationCapExceeded { .. }
            | CoreError::TermCapExceeded { .. }
            | CoreError::DepthCapReached { .. }
            | CoreError::LevelNotMaterialized { .. }
            | CoreError::OrderUnrepresentable { .. }
    )
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let core = e.chain().find_map(|c| c.downcast_ref::<CoreError>());
    match core {
        Some(c) if is_cap(c) => 2,
        Some(CoreError::InternalCheck(_)) => 2,
        _ => 1,
    }
}

fn settings(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    let caps = &mut cfg.caps;
    caps.enumeration = cli.enumeration_cap.unwrap_or(caps.enumeration);
    caps.terms = cli.term_cap.unwrap_or(caps.terms);
    caps.depth = cli.depth_cap.unwrap_or(caps.depth);
    caps.cosets = cli.coset_cap.unwrap_or(caps.cosets);
    caps.validate()?;
    Ok(cfg)
}

fn emit(cfg: &Config, text: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_doc<T: Serialize>(cfg: &Config, body: T) -> Result<()> {
    let doc = Doc { seed: cfg.seed, body };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    emit(cfg, &text)
}

fn infer_rank(text: &str, given: Option<usize>) -> usize {
    given.unwrap_or_else(|| Word::max_generator_in(text).max(2))
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = settings(&cli)?;
    let started = Instant::now();
    let outcome = match cli.command {
        Command::CertifyLarge { rank, g, q, witness } => certify(&cfg, rank, &g, q, witness)?,
        Command::LemmaFi { g, m, rank } => {
            let words = Word::parse_list(&g, infer_rank(&g, rank))?;
            let bound: FiBound = lemma_fi_bound(&words, m, &cfg.caps)?;
            emit_doc(&cfg, bound)?;
            Outcome::Success
        }
        Command::Magnus { w, p, l, rank } => {
            magnus(&cfg, &w, &p, l, infer_rank(&w, rank))?;
            Outcome::Success
        }
        Command::Gamma { primes, rank, depth, member, order } => {
            gamma(&cfg, &primes, rank, depth, member, order)?;
            Outcome::Success
        }
        Command::Levi { set, primes, rank } => {
            let rank = infer_rank(&set, rank);
            let words = Word::parse_list(&set, rank)?;
            let pi = PrimeSeq::parse(&primes)?;
            let depth = levi_bound(&words, &pi, cfg.caps.depth, &cfg.caps)?;
            emit_doc(
                &cfg,
                LeviDoc {
                    primes: pi,
                    rank,
                    set: words.iter().map(|w| w.to_string()).collect(),
                    depth,
                },
            )?;
            Outcome::Success
        }
        Command::ConstructPeriodic { primes, steps, rank } => {
            let pi = PrimeSeq::parse(&primes)?;
            let trace = run_construction(&pi, rank, steps, &cfg.caps)?;
            let mut lines: Vec<TraceLine> = trace
                .states
                .into_iter()
                .map(|s| TraceLine::State(Box::new(s)))
                .collect();
            let halted = trace.halted.is_some();
            if let Some(reason) = trace.halted {
                lines.push(TraceLine::Halted { halted: reason });
            }
            let mut text = String::new();
            for line in lines {
                text.push_str(&serde_json::to_string(&Doc { seed: cfg.seed, body: line })?);
                text.push('\n');
            }
            emit(&cfg, &text)?;
            if halted {
                Outcome::NotCertified
            } else {
                Outcome::Success
            }
        }
        Command::Verify { cert } => {
            let text = std::fs::read_to_string(&cert).with_context(|| format!("reading {}", cert.display()))?;
            let cert: LargenessCertificate =
                serde_json::from_str(&text).with_context(|| "not a certificate document")?;
            let report: VerifyReport = verify_certificate(&cert, &cfg.caps)?;
            let ok = report.ok;
            emit_doc(&cfg, report)?;
            if ok {
                Outcome::Success
            } else {
                Outcome::NotCertified
            }
        }
    };
    if cfg.verbosity > 0 {
        eprintln!("done in {:.3}s", started.elapsed().as_secs_f64());
    }
    Ok(outcome)
}

fn read_witness(path: &PathBuf) -> Result<QuotientSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(w) = value.get_mut("witness") {
        value = w.take();
    }
    serde_json::from_value(value).with_context(|| format!("{} is not a quotient spec", path.display()))
}

fn certify(cfg: &Config, rank: usize, g: &str, q: u64, witness: Option<PathBuf>) -> Result<Outcome> {
    let words = Word::parse_list(g, rank)?;
    if words.is_empty() {
        bail!("-g needs at least one word");
    }
    let witness = witness.as_ref().map(read_witness).transpose()?;
    match certify_power_quotient(&words, q, witness, &cfg.caps) {
        Ok(c) => {
            let verdict = c.certificate.verdict;
            emit_doc(cfg, &c.certificate)?;
            Ok(match verdict {
                Verdict::CertifiedLarge => Outcome::Success,
                Verdict::NotCertified => Outcome::NotCertified,
            })
        }
        Err(e) if is_cap(&e) || matches!(e, CoreError::Precondition(_) | CoreError::BelowBound { .. }) => {
            emit_doc(
                cfg,
                Refusal {
                    target: Target {
                        rank,
                        words: words.iter().map(|w| w.to_string()).collect(),
                        exponent: q,
                    },
                    verdict: Verdict::NotCertified,
                    reason: e.to_string(),
                },
            )?;
            Ok(Outcome::NotCertified)
        }
        Err(e) => Err(e.into()),
    }
}

fn magnus(cfg: &Config, w: &str, p: &str, l: usize, rank: usize) -> Result<()> {
    let word = Word::parse(w, rank)?;
    let domain = match p {
        "Z" | "0" => Domain::Integers,
        _ => Domain::Prime(p.parse::<BigUint>().with_context(|| format!("-p {p:?}: expected a prime or Z"))?),
    };
    let series = embed_capped(&word, &domain, l, cfg.caps.terms)?;
    let unit_order = match domain.modulus() {
        Some(modulus) => {
            let order = series.unit_order()?;
            let mut k = 0u32;
            let mut rest = order;
            while rest > BigUint::from(1u8) {
                rest /= modulus;
                k += 1;
            }
            let mut f = BTreeMap::new();
            if k > 0 {
                f.insert(modulus.clone(), k);
            }
            Some(FactoredInt::from_factors(&f))
        }
        None => None,
    };
    emit_doc(
        cfg,
        MagnusDoc {
            word: word.to_string(),
            rank,
            domain: domain.to_string(),
            l,
            series: series.to_string(),
            terms: series.len(),
            trivial: series.is_one(),
            unit_order,
        },
    )
}

fn gamma(
    cfg: &Config,
    primes: &str,
    rank: usize,
    depth: usize,
    member: Option<String>,
    order: Option<String>,
) -> Result<()> {
    let pi = PrimeSeq::parse(primes)?;
    let series = VerbalSeries::build(&pi, rank, depth, &cfg.caps)?;
    let member = match member {
        Some(text) => {
            let w = Word::parse(&text, rank)?;
            Some(MemberQuery {
                word: w.to_string(),
                member: series.member(depth, &w)?,
            })
        }
        None => None,
    };
    let element_order = match order {
        Some(text) => {
            let w = Word::parse(&text, rank)?;
            Some(OrderQuery {
                word: w.to_string(),
                order: FactoredInt::from_value(&series.order_mod(depth, &w)?),
            })
        }
        None => None,
    };
    emit_doc(
        cfg,
        GammaDoc {
            order: series.order(depth)?,
            levels: series.levels().to_vec(),
            primes: pi,
            rank,
            depth,
            member,
            element_order,
        },
    )
}
