//! Command-line driver: expression and config parsing, built-in
//! algebras, and report emission for every check suite.

pub mod builtins;
pub mod config;
pub mod parse;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebras::{affine_vk_hbar, lie_sl, AlgebraError};
use crate::brst::{chain_map_to_krw, chain_map_to_m_complex, BrstError, TruncationWindow};
use crate::charts::{build_slodowy_atlas, quiver_verify, ChartError};
use crate::poisson::{jet_pva, pva_axiom_suite, PoissonError};
use crate::scalar::ScalarError;
use crate::state::State;
use crate::vertex::{VertexAlgebra, VertexError};
use crate::w23::{
    centrality_check, slice_suite, verify_classical_limit, verify_critical_match, verify_singularity_relation, w23_presentation, w23_realization, W23Error,
};

pub use builtins::{builtin_algebra, builtin_complex, Level, BUILTIN_ALGEBRAS, BUILTIN_COMPLEXES};
pub use config::{Config, ConfigError, Format};
pub use parse::{parse_expression, parse_rat, render_expr, ParseError};
pub use report::{CheckResult, Outcome, Report, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown algebra `{0}`")]
    UnknownAlgebra(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Brst(#[from] BrstError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    W23(#[from] W23Error),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Parser, Debug)]
#[command(name = "chiral", about = "Exact checks for vertex algebras, chiral reduction and the W3(2) realization")]
pub struct Cli {
    /// Level: a rational number or `symbolic`.
    #[arg(long, global = true, default_value = "symbolic", allow_hyphen_values = true)]
    pub k: String,
    /// Largest cell weight K/2 + depth in BRST windows.
    #[arg(long, global = true)]
    pub max_kazhdan: Option<i64>,
    /// Largest standard conformal weight in BRST windows.
    #[arg(long, global = true)]
    pub max_depth: Option<i64>,
    /// Drop hb-powers above this exponent in rendered results.
    #[arg(long, global = true)]
    pub truncate_hbar: Option<i32>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file with extra algebras and defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum W23Check {
    Ope,
    Critical,
    Relation,
    Classical,
    Slice,
    Center,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// a_(n) b in an algebra.
    Nprod {
        #[arg(long)]
        algebra: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, allow_negative_numbers = true)]
        n: i64,
    },
    /// Singular part of a(z) b(w).
    Ope {
        #[arg(long)]
        algebra: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Borcherds identity on all generator triples for (m, n, k) in -r..r.
    CheckBorcherds {
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 1)]
        range: i64,
    },
    /// d^2 = 0 on every basis element of a window.
    BrstD2 {
        #[arg(long, default_value = "sl2")]
        complex: String,
        #[arg(long, default_value_t = -3, allow_negative_numbers = true)]
        ghost_min: i32,
        #[arg(long, default_value_t = 3, allow_negative_numbers = true)]
        ghost_max: i32,
    },
    /// Truncated cohomology per (weight, ghost number).
    BrstCohomology {
        #[arg(long, default_value = "sl2")]
        complex: String,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        ghost_min: i32,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        ghost_max: i32,
    },
    /// Chain maps out of the sl3 intermediate complex.
    BrstChainmap,
    /// Transitions, round trips, transports and quiver coordinates.
    ChartsVerify,
    /// W3(2) suites; no value for --check runs none.
    W23Verify {
        #[arg(long, value_enum, num_args = 0.., value_delimiter = ',')]
        check: Option<Vec<W23Check>>,
    },
    /// Quasiclassical limits of the realization and of V^k(sl2)_hb.
    ClassicalLimit,
    /// Sampled vertex Poisson axioms on Kostant-Kirillov jet algebras.
    JetPoisson {
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// sl3 slice brackets, elimination and cocycle checks.
    SliceSuite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Nprod { .. } => "nprod",
            Command::Ope { .. } => "ope",
            Command::CheckBorcherds { .. } => "check-borcherds",
            Command::BrstD2 { .. } => "brst-d2",
            Command::BrstCohomology { .. } => "brst-cohomology",
            Command::BrstChainmap => "brst-chainmap",
            Command::ChartsVerify => "charts-verify",
            Command::W23Verify { .. } => "w23-verify",
            Command::ClassicalLimit => "classical-limit",
            Command::JetPoisson { .. } => "jet-poisson",
            Command::SliceSuite => "slice-suite",
        }
    }
}

/// Resolved options shared by all subcommands.
pub struct Context {
    pub level: Level,
    pub config: Config,
    pub max_kazhdan: Option<i64>,
    pub max_depth: Option<i64>,
    pub truncate_hbar: Option<i32>,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let level = match cli.k.as_str() {
            "symbolic" | "k" => Level::Symbolic,
            s => Level::Value(parse_rat(s)?),
        };
        let config = match &cli.config {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io { path: p.display().to_string(), message: e.to_string() })?;
                Config::parse(&text)?
            }
        };
        for a in &config.algebras {
            if BUILTIN_ALGEBRAS.contains(&a.name.as_str()) {
                return Err(ConfigError::Invalid { location: format!("algebra `{}`", a.name), message: "name of a built-in algebra".into() }.into());
            }
        }
        let w = config.window.clone().unwrap_or_default();
        Ok(Context {
            level,
            max_kazhdan: cli.max_kazhdan.or(w.max_kazhdan),
            max_depth: cli.max_depth.or(w.max_depth),
            truncate_hbar: cli.truncate_hbar,
            config,
        })
    }

    pub fn algebra(&self, name: &str) -> Result<VertexAlgebra, CliError> {
        match self.config.algebras.iter().position(|a| a.name == name) {
            Some(i) => Ok(self.config.algebras[i].build(i)?),
            None => builtin_algebra(name, &self.level),
        }
    }

    fn window(&self, default_kazhdan: i64, default_depth: i64, ghost_min: i32, ghost_max: i32) -> TruncationWindow {
        let w = self.config.window.clone().unwrap_or_default();
        TruncationWindow::new(
            self.max_kazhdan.unwrap_or(default_kazhdan),
            self.max_depth.unwrap_or(default_depth),
            w.ghost_min.unwrap_or(ghost_min),
            w.ghost_max.unwrap_or(ghost_max),
        )
    }

    /// Specializes `k` and drops hb-powers above the truncation order.
    fn present(&self, s: &State) -> Result<State, CliError> {
        let mut out = s.clone();
        if let Some(k0) = self.level.value() {
            out = out.map_coeffs(|c| c.specialize_k(k0))?;
        }
        if let Some(n) = self.truncate_hbar {
            out = out.map_coeffs(|c| Ok::<_, CliError>(c.project_range(i32::MIN / 2, 2 * n)))?;
        }
        Ok(out)
    }
}

fn state_in(va: &VertexAlgebra, text: &str) -> Result<State, CliError> {
    Ok(va.normal_form(&parse_expression(text)?)?)
}

fn generator_states(va: &VertexAlgebra) -> Vec<(String, State)> {
    va.table().generators().iter().enumerate().map(|(i, g)| (g.name.clone(), va.generator_state(i as crate::state::GenId))).collect()
}

/// Runs a subcommand and returns its report.
pub fn run(cmd: &Command, ctx: &Context) -> Result<Report, CliError> {
    let mut rep = Report::new(cmd.name());
    match cmd {
        Command::Nprod { algebra, a, b, n } => {
            let va = ctx.algebra(algebra)?;
            rep.run("nprod", || -> Result<Outcome, CliError> {
                let r = va.nprod(&state_in(&va, a)?, *n, &state_in(&va, b)?)?;
                Ok(Outcome::pass(va.render(&ctx.present(&r)?)))
            });
        }
        Command::Ope { algebra, a, b } => {
            let va = ctx.algebra(algebra)?;
            rep.run("ope", || -> Result<Outcome, CliError> {
                let ope = va.ope(&state_in(&va, a)?, &state_in(&va, b)?)?;
                let shown = ope.iter().map(|(n, s)| Ok((*n, ctx.present(s)?))).filter(|r: &Result<(u32, State), CliError>| r.as_ref().map_or(true, |(_, s)| !s.is_zero())).collect::<Result<Vec<_>, CliError>>()?;
                Ok(Outcome::pass(va.render_ope(&shown)))
            });
        }
        Command::CheckBorcherds { algebra, range } => {
            let va = ctx.algebra(algebra)?;
            let gens = generator_states(&va);
            for (na, a) in &gens {
                for (nb, b) in &gens {
                    for (nc, c) in &gens {
                        rep.run(&format!("borcherds/{},{},{}", na, nb, nc), || -> Result<Outcome, CliError> {
                            let mut detail = Vec::new();
                            for m in -range..=*range {
                                for n in -range..=*range {
                                    for k in -range..=*range {
                                        let (ok, r) = va.check_borcherds(a, b, c, m, n, k)?;
                                        if !ok {
                                            detail.push(format!("({}, {}, {}): {}", m, n, k, va.render(&r)));
                                        }
                                    }
                                }
                            }
                            Ok(Outcome::from_detail(None, detail))
                        });
                    }
                }
            }
        }
        Command::BrstD2 { complex, ghost_min, ghost_max } => {
            let c = builtin_complex(complex, &ctx.level)?;
            let w = ctx.window(4, 6, *ghost_min, *ghost_max);
            rep.window = Some(w.clone());
            rep.run(&format!("d2/{}", complex), || -> Result<Outcome, CliError> {
                let r = c.check_d_squared(&w)?;
                let mut detail = r.failures.clone();
                detail.extend(r.inhomogeneous.iter().map(|m| format!("inhomogeneous: {}", m)));
                if !r.square_acts_trivially {
                    detail.push("(d_(0))^2 does not vanish on generators".into());
                }
                let value = format!("{} elements, d = {}, d_(0) d {}", r.checked, c.render(c.d()), if r.square_vanishes { "= 0" } else { "!= 0, acts trivially" });
                Ok(Outcome::from_detail(value, detail))
            });
        }
        Command::BrstCohomology { complex, ghost_min, ghost_max } => {
            let c = builtin_complex(complex, &ctx.level)?;
            let w = ctx.window(3, 4, *ghost_min, *ghost_max);
            rep.window = Some(w.clone());
            match c.cohomology(&w) {
                Ok(h) => {
                    for cell in h.cells {
                        let id = format!("H/{}/w={}/ghost={:+}", complex, cell.kazhdan, cell.ghost);
                        rep.run(&id, || -> Result<Outcome, CliError> {
                            let mut detail = Vec::new();
                            for s in &cell.states {
                                if !c.apply_d(s)?.is_zero() {
                                    detail.push(format!("not a cycle: {}", c.render(s)));
                                }
                            }
                            let mut value = format!("dim {}", cell.dim);
                            for r in &cell.representatives {
                                value.push_str(&format!("; {}", r));
                            }
                            Ok(Outcome::from_detail(value, detail))
                        });
                    }
                }
                Err(e) => rep.run(&format!("H/{}", complex), || -> Result<Outcome, CliError> { Err(e.into()) }),
            }
        }
        Command::BrstChainmap => {
            let lie = lie_sl(3)?;
            let k = ctx.level.scalar();
            rep.run("chainmap/intermediate->m-complex", || -> Result<Outcome, CliError> {
                let r = chain_map_to_m_complex(&lie, &["E13"], &k)?;
                Ok(Outcome::from_detail(format!("{} checks", r.checked), r.failures))
            });
            rep.run("chainmap/intermediate->krw", || -> Result<Outcome, CliError> {
                let r = chain_map_to_krw(&lie, &k)?;
                Ok(Outcome::from_detail(format!("{} checks", r.checked), r.failures))
            });
        }
        Command::ChartsVerify => charts_verify(&mut rep)?,
        Command::W23Verify { check } => {
            let all = [W23Check::Ope, W23Check::Critical, W23Check::Relation, W23Check::Classical, W23Check::Slice, W23Check::Center];
            let selected: Vec<W23Check> = check.clone().unwrap_or_else(|| all.to_vec());
            for c in selected {
                w23_check(&mut rep, c, ctx)?;
            }
        }
        Command::ClassicalLimit => {
            w23_check(&mut rep, W23Check::Classical, ctx)?;
            rep.run("classical/affine-sl2-hb", || -> Result<Outcome, CliError> {
                let lie = lie_sl(2)?;
                let lim = affine_vk_hbar(&lie, &ctx.level.scalar())?.quasiclassical_limit()?;
                let jet = jet_pva(&lie.kostant_kirillov()?);
                let mut detail = Vec::new();
                for a in lie.names() {
                    for b in lie.names() {
                        let (xa, xb) = (lim.gen(a)?, lim.gen(b)?);
                        let (ya, yb) = (jet.gen(a)?, jet.gen(b)?);
                        for n in 0..3 {
                            let (l, r) = (lim.nprod(&xa, n, &xb), jet.nprod(&ya, n, &yb));
                            if l != r {
                                detail.push(format!("{}_({}){}: {} vs {}", a, n, b, lim.render(&l), jet.render(&r)));
                            }
                        }
                    }
                }
                Ok(Outcome::from_detail(None, detail))
            });
        }
        Command::JetPoisson { samples, seed } => {
            for n in [2usize, 3] {
                rep.run(&format!("jet-kk/sl{}", n), || -> Result<Outcome, CliError> {
                    let jet = jet_pva(&lie_sl(n)?.kostant_kirillov()?);
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    let r = pva_axiom_suite(&jet, &mut rng, *samples);
                    Ok(Outcome::from_detail(format!("{} samples", r.samples), r.failures))
                });
            }
        }
        Command::SliceSuite => w23_check(&mut rep, W23Check::Slice, ctx)?,
    }
    Ok(rep.finish())
}

fn charts_verify(rep: &mut Report) -> Result<(), CliError> {
    let atlas = build_slodowy_atlas()?;
    for r in atlas.verify_transitions()? {
        let mut detail = r.residuals.clone();
        detail.extend(r.classical_residuals.iter().map(|s| format!("classical: {}", s)));
        detail.extend(r.symbol_mismatches.iter().map(|s| format!("symbol: {}", s)));
        rep.run(&format!("transition/{}", r.name), || -> Result<Outcome, CliError> { Ok(Outcome::from_detail(None, detail)) });
    }
    for (a, b) in [("U1->U2", "U2->U1"), ("U2->U1", "U1->U2"), ("U2->U3", "U3->U2"), ("U3->U2", "U2->U3")] {
        rep.run(&format!("round-trip/{};{}", a, b), || -> Result<Outcome, CliError> { Ok(Outcome::from_detail(None, atlas.round_trip_failures(a, b)?)) });
    }
    let r = w23_realization()?;
    for t in r.transport_checks()? {
        let detail = if t.pass { vec![] } else { vec![format!("expected {}", t.expected.clone().unwrap_or_else(|| "a regular image".into()))] };
        rep.run(&format!("transport/{}/{}", t.field, t.transition), || -> Result<Outcome, CliError> { Ok(Outcome::from_detail(t.image.clone(), detail)) });
    }
    for (name, ok) in quiver_verify().checks {
        rep.run(&format!("quiver/{}", name), || -> Result<Outcome, CliError> {
            Ok(Outcome { pass: ok, value: None, detail: vec![] })
        });
    }
    Ok(())
}

fn w23_check(rep: &mut Report, check: W23Check, ctx: &Context) -> Result<(), CliError> {
    match check {
        W23Check::Ope => {
            let p = w23_presentation(ctx.level.value())?;
            let va = p.algebra();
            let names = ["J", "G+", "G-", "S"];
            for (i, a) in names.iter().enumerate() {
                for b in &names[i..] {
                    rep.run(&format!("ope/{} {}", a, b), || -> Result<Outcome, CliError> {
                        let ope = va.ope(&va.gen(a)?, &va.gen(b)?)?;
                        Ok(Outcome::pass(va.render_ope(&ope)))
                    });
                }
            }
            rep.run("ope/borcherds", || -> Result<Outcome, CliError> {
                let f = p.borcherds_failures(-2..=2)?;
                Ok(Outcome::from_detail(None, f.iter().map(|x| format!("{:?}", x)).collect()))
            });
        }
        W23Check::Critical => {
            let r = w23_realization()?;
            rep.run("critical/realized-table", || -> Result<Outcome, CliError> {
                let detail = r.ope_checks()?.into_iter().filter(|c| !c.pass).map(|c| format!("{}_({}){}: {} vs {}", c.a, c.n, c.b, c.computed, c.expected)).collect();
                Ok(Outcome::from_detail(None, detail))
            });
            rep.run("critical/presentation-at-k=-3", || -> Result<Outcome, CliError> {
                let m = verify_critical_match(&r)?;
                let detail = m.mismatches().iter().map(|c| format!("{}_({}){}: {} vs {}", c.a, c.n, c.b, c.computed, c.expected)).collect();
                Ok(Outcome::from_detail(None, detail))
            });
            rep.run("critical/kazhdan-weights", || -> Result<Outcome, CliError> {
                let detail = r.kazhdan_weights().into_iter().filter(|(_, w)| w.as_ref().is_none_or(|w| !num_traits::Zero::is_zero(w))).map(|(n, w)| format!("{}: {:?}", n, w)).collect();
                Ok(Outcome::from_detail(None, detail))
            });
        }
        W23Check::Relation => {
            let r = w23_realization()?;
            let rel = verify_singularity_relation(&r)?;
            rep.run("relation/as-displayed", || -> Result<Outcome, CliError> {
                let detail = if rel.residual_zero { vec![] } else { vec![format!("residual {}", rel.residual)] };
                Ok(Outcome::from_detail(None, detail))
            });
            rep.run("relation/with-D2J", || -> Result<Outcome, CliError> {
                let detail = if rel.second_derivative_holds { vec![] } else { vec![format!("residual {}", rel.second_derivative_residual)] };
                Ok(Outcome::from_detail(None, detail))
            });
            rep.run("relation/symbol", || -> Result<Outcome, CliError> {
                let ok = rel.symbol_matches && rel.classical_relation_holds && rel.corrections_vanish_classically;
                Ok(Outcome { pass: ok, value: None, detail: vec![] })
            });
        }
        W23Check::Classical => {
            let r = w23_realization()?;
            rep.run("classical/realization", || -> Result<Outcome, CliError> {
                let c = verify_classical_limit(&r)?;
                let detail = c.checks.iter().filter(|c| !c.pass).map(|c| format!("{}_({}){}: {} / {} vs {}", c.a, c.n, c.b, c.from_quantum, c.from_classical, c.expected)).collect();
                Ok(Outcome::from_detail(format!("{} brackets", c.checks.len()), detail))
            });
        }
        W23Check::Slice => {
            let s = slice_suite()?;
            for b in &s.brackets {
                let detail = if b.pass { vec![] } else { vec![format!("expected {}", b.expected)] };
                rep.run(&format!("slice/bracket {}", b.pair), || -> Result<Outcome, CliError> { Ok(Outcome::from_detail(b.restricted.clone(), detail)) });
            }
            rep.run("slice/elimination", || -> Result<Outcome, CliError> {
                let detail = if s.elimination_multiple.is_some() { vec![] } else { vec!["Tr X^3 is not a multiple of 8 delta^3 - beta gamma".into()] };
                Ok(Outcome::from_detail(format!("Tr X^3 = {}", s.elimination), detail))
            });
            for c in &s.cocycles {
                let mut detail = Vec::new();
                if !c.routes_agree {
                    detail.push("bracket and differential routes disagree".into());
                }
                if c.cofactors.is_empty() {
                    detail.push("not in the ideal at degree 4".into());
                }
                rep.run(&format!("slice/cocycle {} with {}", c.invariant, c.generator), || -> Result<Outcome, CliError> {
                    Ok(Outcome { pass: c.pass, value: Some(format!("{} = [{}]", c.bracket, c.cofactors.join(", "))), detail })
                });
            }
        }
        W23Check::Center => {
            rep.run("center/s3", || -> Result<Outcome, CliError> {
                let c = centrality_check(3)?;
                Ok(Outcome::from_detail(format!("{} states", c.tested_states), c.residuals))
            });
        }
    }
    Ok(())
}

/// Parses arguments, runs, prints the report; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let ctx = match Context::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e);
            return 2;
        }
    };
    let format = cli.format.or(ctx.config.output.as_ref().and_then(|o| o.format)).unwrap_or_default();
    match run(&cli.command, &ctx) {
        Ok(rep) => {
            match format {
                Format::Human => print!("{}", rep.to_human()),
                Format::Machine => println!("{}", rep.to_json()),
            }
            if rep.pass() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {}", e);
            2
        }
    }
}
