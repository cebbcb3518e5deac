use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use harmlat::chain::chain_hitting;
use harmlat::constructions::{
    hairs_chain, klein_bottle, spiral_set, tetration_set, tree_tunnel_chain, tube_set, KleinBottleSpec,
};
use harmlat::experiments::{
    exp_cross_validation, exp_gamma, exp_klein_ratio, exp_klein_table, exp_lemma_battery, exp_mn_bruteforce,
    exp_rate_fits, exp_rho_ensemble, BatteryParams, Cell, CrossParams, ExperimentReport, Format, GammaParams,
    KleinParams, MnParams, RateParams, RhoEnsembleParams,
};
use harmlat::geometry::select_removal_vertex;
use harmlat::lattice::LatticePath;
use harmlat::montecarlo::{mc_escape, mc_hitting_far, mc_path_traversal};
use harmlat::solver::{harmonic_measure, min_removal_price, removal_price_with, Route, REFINE_MARGIN};
use harmlat::{HarmlatError, LatticePoint, Result, SiteSet};

#[derive(Parser)]
#[command(name = "harmlat", version, about = "Harmonic measure and vertex-removal experiments on Z^d")]
struct Cli {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Auto,
    Wired,
    Dense,
    Escape,
}

#[derive(Args)]
struct SetArg {
    /// Site set as JSON, a path to a JSON file, or `x,y;x,y;...`.
    #[arg(long)]
    set: String,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic measure from infinity.
    Measure {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
    },
    /// Price of removing `z` (or the cheapest vertex) seen from `y`.
    Rho {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value = "0,0")]
        y: String,
        #[arg(long)]
        z: Option<String>,
    },
    /// Planar removal decision.
    Strategy {
        #[command(flatten)]
        set: SetArg,
    },
    /// Example sets and chains.
    Gallery {
        #[arg(value_enum)]
        name: GalleryName,
        /// Size parameter (m, n, k or n depending on the example).
        #[arg(long, default_value_t = 6)]
        n: i64,
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Hairs truncation radius.
        #[arg(long, default_value_t = 200)]
        r: i64,
        /// Also solve for the harmonic measure.
        #[arg(long)]
        solve: bool,
    },
    /// Monte Carlo estimators.
    Mc {
        #[command(subcommand)]
        what: McCommand,
    },
    /// Named experiments.
    Exp {
        #[arg(value_enum)]
        id: ExpId,
        /// Smaller ensembles for a quick look.
        #[arg(long)]
        quick: bool,
        /// Klein sizes (comma separated).
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<i64>>,
        /// Allow Klein sizes above 8.
        #[arg(long)]
        allow_large: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GalleryName {
    Tube,
    Spiral,
    Tetration,
    Klein,
    Hairs,
    Tree,
}

#[derive(Subcommand)]
enum McCommand {
    /// First-hit law from far away.
    Hitting {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        start_radius: Option<i64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Escape probability with a kill radius (d >= 3).
    Escape {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 32)]
        kill_radius: i64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Traversal of a straight path.
    Path {
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExpId {
    RhoEnsemble,
    Klein,
    KleinTable,
    Mn,
    Rates,
    Battery,
    Cross,
    Gamma,
    All,
}

fn read_set(s: &str) -> Result<SiteSet> {
    let t = s.trim();
    if t.starts_with('{') {
        return SiteSet::from_json(t);
    }
    let path = std::path::Path::new(t);
    if path.exists() {
        return SiteSet::from_json(&std::fs::read_to_string(path)?);
    }
    let pts = t.split(';').filter(|p| !p.trim().is_empty()).map(LatticePoint::parse).collect::<Result<Vec<_>>>()?;
    let d = pts.first().map(|p| p.d()).ok_or_else(|| HarmlatError::InvalidInput("empty set".into()))?;
    SiteSet::new(d, pts)
}

fn set_rows(rep: &mut ExperimentReport, set: &SiteSet) {
    for p in set.iter() {
        rep.push(vec![p.to_string().into()]);
    }
}

enum Output {
    Report(ExperimentReport),
    Json(serde_json::Value),
}

fn run(cli: &Cli) -> Result<(Vec<Output>, bool)> {
    let (seed, tol) = (cli.seed, cli.tol);
    let one = |rep: ExperimentReport| {
        let ok = rep.passed();
        Ok((vec![Output::Report(rep)], ok))
    };
    match &cli.cmd {
        Command::Measure { set, route } => {
            let set = read_set(&set.set)?;
            let route = match route {
                RouteArg::Auto => {
                    if set.d() == 2 {
                        Route::Dense
                    } else {
                        Route::Escape
                    }
                }
                RouteArg::Wired => Route::Wired,
                RouteArg::Dense => Route::Dense,
                RouteArg::Escape => Route::Escape,
            };
            let m = harmonic_measure(&set, route, tol)?;
            let mut rep = ExperimentReport::new(
                "measure",
                serde_json::json!({ "route": route, "method": m.method, "error_estimate": m.error_estimate }),
                &["site", "weight"],
                seed,
                tol,
            );
            for (p, w) in set.iter().zip(&m.weights) {
                rep.push(vec![p.to_string().into(), (*w).into()]);
            }
            one(rep)
        }
        Command::Rho { set, y, z } => {
            let set = read_set(&set.set)?;
            let y = LatticePoint::parse(y)?;
            let route = if set.d() == 2 { Route::Dense } else { Route::Escape };
            let mut rep = ExperimentReport::new(
                "rho",
                serde_json::json!({ "y": y.to_string() }),
                &["z", "rho", "error"],
                seed,
                tol,
            );
            match z {
                Some(z) => {
                    let z = LatticePoint::parse(z)?;
                    let p = removal_price_with(&set, &y, &z, route, tol)?;
                    rep.push(vec![z.to_string().into(), p.rho.into(), p.error.into()]);
                }
                None => {
                    let m = min_removal_price(&set, &y, tol)?;
                    rep.push(vec![m.z_star.to_string().into(), m.rho_min.into(), m.error.into()]);
                }
            }
            one(rep)
        }
        Command::Strategy { set } => {
            let set = read_set(&set.set)?;
            let dec = select_removal_vertex(&set)?;
            match cli.format {
                OutFormat::Json => Ok((vec![Output::Json(serde_json::to_value(&dec)?)], true)),
                OutFormat::Csv => {
                    let mut rep = ExperimentReport::new(
                        "strategy",
                        serde_json::Value::Null,
                        &["z_dagger", "case", "type", "cluster_id"],
                        seed,
                        tol,
                    );
                    rep.push(vec![
                        dec.z_dagger.to_string().into(),
                        dec.case_label.to_string().into(),
                        dec.type_tag.to_string().into(),
                        dec.cluster_id.map(Cell::from).unwrap_or_else(|| "".into()),
                    ]);
                    one(rep)
                }
            }
        }
        Command::Gallery { name, n, d, r, solve } => gallery(*name, *n, *d, *r, *solve, cli.format, seed, tol),
        Command::Mc { what } => {
            let est = match what {
                McCommand::Hitting { set, start_radius, samples } => {
                    let set = read_set(&set.set)?;
                    let r0 = start_radius.unwrap_or(2 * set.radius_inf() + 4);
                    mc_hitting_far(&set, r0, *samples, seed)?
                }
                McCommand::Escape { set, x, kill_radius, samples } => {
                    let set = read_set(&set.set)?;
                    mc_escape(&set, &LatticePoint::parse(x)?, *kill_radius, *samples, seed)?
                }
                McCommand::Path { length, d, samples } => {
                    mc_path_traversal(&LatticePath::straight(*d, *length), *samples, seed)?
                }
            };
            let mut rep = ExperimentReport::new(
                "mc",
                serde_json::json!({ "samples": est.samples, "accepted": est.accepted, "restarts": est.restarts,
                    "kill_radius": est.kill_radius, "bracket": est.bracket }),
                &["site", "value", "stderr"],
                seed,
                tol,
            );
            for i in 0..est.values.len() {
                let site = est.support.as_ref().map(|s| s.points()[i].to_string()).unwrap_or_default();
                rep.push(vec![site.into(), est.values[i].into(), est.stderr[i].into()]);
            }
            one(rep)
        }
        Command::Exp { id, quick, n_list, allow_large } => {
            experiments(*id, *quick, n_list.clone(), *allow_large, seed, tol)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gallery(
    name: GalleryName,
    n: i64,
    d: usize,
    r: i64,
    solve: bool,
    format: OutFormat,
    seed: u64,
    tol: f64,
) -> Result<(Vec<Output>, bool)> {
    let set = match name {
        GalleryName::Tube => tube_set(n)?.set,
        GalleryName::Spiral => spiral_set(usize::try_from(n).unwrap_or(0))?,
        GalleryName::Tetration => {
            let n = usize::try_from(n).unwrap_or(0);
            tetration_set(n, n.saturating_sub(2))?
        }
        GalleryName::Klein => klein_bottle(&KleinBottleSpec::new(n, d)?)?,
        GalleryName::Hairs | GalleryName::Tree => {
            let g =
                if matches!(name, GalleryName::Hairs) { hairs_chain(n, r)? } else { tree_tunnel_chain(n as usize)? };
            let mut rep = ExperimentReport::new(
                &g.name,
                serde_json::json!({ "states": g.chain.len(), "root": g.root }),
                &["target", "probability"],
                seed,
                tol,
            );
            let start = g.chain.state(&g.root).expect("root state");
            let m = chain_hitting(&g.chain, start)?;
            for t in &g.targets {
                rep.push(vec![t.as_str().into(), m.at_label(t).unwrap_or(0.0).into()]);
            }
            return Ok((vec![Output::Report(rep)], true));
        }
    };
    if !solve {
        if matches!(format, OutFormat::Json) {
            return Ok((vec![Output::Json(serde_json::to_value(&set)?)], true));
        }
        let mut rep = ExperimentReport::new("gallery", serde_json::json!({ "size": set.len() }), &["site"], seed, tol);
        set_rows(&mut rep, &set);
        return Ok((vec![Output::Report(rep)], true));
    }
    let route = if set.d() == 2 { Route::Dense } else { Route::Escape };
    let m = harmonic_measure(&set, route, tol)?;
    let mut rep =
        ExperimentReport::new("gallery", serde_json::json!({ "size": set.len() }), &["site", "weight"], seed, tol);
    for (p, w) in set.iter().zip(&m.weights) {
        rep.push(vec![p.to_string().into(), (*w).into()]);
    }
    Ok((vec![Output::Report(rep)], true))
}

fn experiments(
    id: ExpId,
    quick: bool,
    n_list: Option<Vec<i64>>,
    allow_large: bool,
    seed: u64,
    tol: f64,
) -> Result<(Vec<Output>, bool)> {
    let ids = if id == ExpId::All {
        vec![ExpId::Gamma, ExpId::Battery, ExpId::RhoEnsemble, ExpId::Klein, ExpId::Mn, ExpId::Rates, ExpId::Cross]
    } else {
        vec![id]
    };
    let mut out = Vec::new();
    let mut ok = true;
    for id in ids {
        let rep = match id {
            ExpId::RhoEnsemble => {
                let mut p = RhoEnsembleParams::default();
                if quick {
                    p.count = 30;
                }
                exp_rho_ensemble(&p, seed, tol)?
            }
            ExpId::Klein | ExpId::KleinTable => {
                let mut p = KleinParams::default();
                if let Some(v) = n_list.clone() {
                    p.n_list = v;
                } else if quick {
                    p.n_list = vec![4, 6];
                }
                if !allow_large && p.n_list.iter().any(|&n| n > 8) {
                    return Err(HarmlatError::InvalidInput("Klein sizes above 8 need --allow-large".into()));
                }
                if id == ExpId::KleinTable {
                    exp_klein_table(p.n_list.first().copied().unwrap_or(6), p.d, REFINE_MARGIN)?
                } else {
                    exp_klein_ratio(&p)?
                }
            }
            ExpId::Mn => {
                let mut p = MnParams::default();
                if quick {
                    p.n_max = 4;
                }
                exp_mn_bruteforce(&p)?
            }
            ExpId::Rates => exp_rate_fits(&RateParams::default())?,
            ExpId::Battery => {
                let mut p = BatteryParams::default();
                if quick {
                    p = BatteryParams {
                        monotone_count: 20,
                        green_count: 10,
                        capacity_pairs: 10,
                        capacity_wired: 3,
                        combinatorial_count: 50,
                        diagnostic_count: 5,
                    };
                }
                exp_lemma_battery(&p, seed)?
            }
            ExpId::Cross => {
                let mut p = CrossParams { tol, ..CrossParams::default() };
                if quick {
                    p.random_sets = 4;
                }
                exp_cross_validation(&p, seed)?
            }
            ExpId::Gamma => {
                let mut p = GammaParams::default();
                if quick {
                    p.samples = 100_000;
                }
                exp_gamma(&p, seed)?
            }
            ExpId::All => unreachable!(),
        };
        for line in rep.verdict_lines() {
            eprintln!("{line}");
        }
        ok &= rep.passed();
        out.push(Output::Report(rep));
    }
    Ok((out, ok))
}

fn emit(outputs: &[Output], format: OutFormat, sink: &mut dyn Write) -> Result<()> {
    let format = match format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    for o in outputs {
        match o {
            Output::Report(r) => r.write(format, &mut *sink)?,
            Output::Json(v) => writeln!(sink, "{}", serde_json::to_string(v)?)?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (outputs, ok) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => File::create(path).map_err(HarmlatError::from).and_then(|f| {
            let mut w = BufWriter::new(f);
            emit(&outputs, cli.format, &mut w)?;
            Ok(w.flush()?)
        }),
        None => emit(&outputs, cli.format, &mut io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
