use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{mpsc, Arc};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use verbalarm::config::Config;
use verbalarm::controller::{translate, KinematicChain};
use verbalarm::deptree::parse_command;
use verbalarm::grasp::{menu, plan_grasps, PointCloud};
use verbalarm::lexicon::{Category, Lexicon};
use verbalarm::sdc::{extract, Extracted};
use verbalarm::server::protocol::{GraspMenu, LexiconUpdate, PlanSummary, SdcResult, StopAck};
use verbalarm::server::{run_batch_file, serve, Envelope, Hub, Kind, Outbox, StageError};
use verbalarm::sim::{synth_cloud, ExecutionTick, World};

/// Typed spoken-style commands for a simulated seven-joint arm.
///
/// Settings come from the JSON file named by VERBALARM_CONFIG when set;
/// command-line paths take precedence over it.
#[derive(Parser)]
#[command(name = "verbalarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Sources {
    /// World description (JSON).
    #[arg(long)]
    world: Option<PathBuf>,
    /// Lexicon file (JSON); learned words are saved back to it.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Kinematic chain (JSON).
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the line-delimited JSON protocol over TCP.
    Serve {
        #[command(flatten)]
        sources: Sources,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Interactive session on stdin. `:select N`, `:stop`, `:state` and
    /// `:quit` are available besides plain commands.
    Repl {
        #[command(flatten)]
        sources: Sources,
    },
    /// Extract SDCs for every line of a corpus and check `# expected:`
    /// annotations. Exits nonzero on any failure.
    Batch {
        corpus: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Dependency tree (CoNLL-U) and SDCs for one sentence.
    Parse {
        text: String,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Joint trajectory CSV for one command from the home pose.
    Trajectory {
        text: String,
        #[command(flatten)]
        sources: Sources,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grasp planning on point clouds
    #[command(subcommand)]
    Grasp(GraspCommand),
    /// Inspect and edit the synonym lexicon
    #[command(subcommand)]
    Lexicon(LexiconCommand),
}

#[derive(Subcommand)]
enum GraspCommand {
    /// Segment a cloud, refine grasps on one cluster and print the
    /// ε-diverse menu as JSON.
    Plan {
        /// Point cloud (.ply or .csv), world frame.
        cloud: PathBuf,
        /// Minimum grasp distance between menu entries.
        #[arg(long)]
        eps: Option<f64>,
        /// Menu size.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pick the cluster nearest this table point, `x,y`.
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        target: Option<[f64; 2]>,
    },
    /// Render the world's camera view to a cloud file.
    Synth {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (.ply or .csv).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LexiconCommand {
    /// List entries, optionally for one category.
    Show {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        category: Option<String>,
    },
    /// Add NEW_WORD as a synonym of whatever TARGET resolves to and save.
    Learn {
        new_word: String,
        target: String,
        /// File to update; the shipped lexicon goes to stdout when absent.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Import `category<TAB>high_level<TAB>syn1,syn2` lines and save.
    Import {
        file: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Synonyms in B but not A (+) and in A but not B (-).
    Diff { a: PathBuf, b: PathBuf },
}

/// `print!` that reports a closed stdout instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        write!(std::io::stdout().lock(), $($t)*)
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($t)*)
    }};
}

fn parse_xy(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(x)?, p(y)?])
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn config() -> Result<Config> {
    Config::from_env().context("loading VERBALARM_CONFIG")
}

fn load_lexicon(flag: Option<&Path>, cfg: &Config) -> Result<Lexicon> {
    match flag.or(cfg.lexicon.as_deref()) {
        Some(p) => Lexicon::load(p).with_context(|| format!("loading lexicon {}", p.display())),
        None => Ok(Lexicon::shipped()),
    }
}

fn load_world(s: &Sources, cfg: &Config) -> Result<World> {
    let chain = match s.chain.as_deref().or(cfg.chain.as_deref()) {
        Some(p) => KinematicChain::load(p).with_context(|| format!("loading chain {}", p.display()))?,
        None => KinematicChain::shipped(),
    };
    match s.world.as_deref().or(cfg.world.as_deref()) {
        Some(p) => World::load(p, chain).with_context(|| format!("loading world {}", p.display())),
        None => Ok(World::new(World::shipped().spec(), chain)?),
    }
}

fn hub(s: &Sources, cfg: Config) -> Result<Arc<Hub>> {
    let world = load_world(s, &cfg)?;
    let lexicon = load_lexicon(s.lexicon.as_deref(), &cfg)?;
    let path = s.lexicon.clone().or(cfg.lexicon.clone());
    Ok(Hub::new(world, lexicon, path, cfg))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { sources, port, host } => {
            let hub = hub(&sources, config()?)?;
            let server = serve(hub, (host.as_str(), port))?;
            outln!("listening on {}", server.addr())?;
            server.wait();
        }
        Command::Repl { sources } => repl(hub(&sources, config()?)?)?,
        Command::Batch { corpus, lexicon, json } => {
            let cfg = config()?;
            let lex = load_lexicon(lexicon.as_deref(), &cfg)?;
            let report = run_batch_file(&corpus, &lex).with_context(|| format!("reading {}", corpus.display()))?;
            if json {
                outln!("{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                out!("{report}")?;
            }
            if !report.success() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Parse { text, lexicon } => {
            let lex = load_lexicon(lexicon.as_deref(), &config()?)?;
            let tree = parse_command(&text, &lex)?;
            out!("{}", tree.to_conllu())?;
            for item in extract(&tree, &lex)? {
                match &item {
                    Extracted::Sdc(s) => outln!("{s}")?,
                    Extracted::Trigger(t) => outln!("{t:?}")?,
                }
                outln!("{}", serde_json::to_string(&item)?)?;
            }
        }
        Command::Trajectory { text, sources, out } => {
            let cfg = config()?;
            let mut world = load_world(&sources, &cfg)?;
            if let Some(d) = cfg.defaults {
                world.chain.defaults = d;
            }
            let lex = load_lexicon(sources.lexicon.as_deref(), &cfg)?;
            let tree = parse_command(&text, &lex)?;
            let mut csv = String::new();
            let mut robot = world.robot.clone();
            for sdc in extract(&tree, &lex)?.iter().filter_map(Extracted::as_sdc) {
                let traj = translate(&world.chain, &robot, sdc, &world.view([]))?;
                if let Some(q) = traj.final_q() {
                    robot.joints = q;
                }
                let body = traj.to_csv();
                csv.push_str(if csv.is_empty() {
                    &body
                } else {
                    body.split_once('\n').map_or("", |x| x.1)
                });
            }
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => out!("{csv}")?,
            }
        }
        Command::Grasp(GraspCommand::Plan {
            cloud,
            eps,
            k,
            seed,
            target,
        }) => {
            let cfg = config()?;
            let mut g = cfg.grasp;
            g.eps = eps.unwrap_or(g.eps);
            g.k = k.unwrap_or(g.k);
            let cloud = PointCloud::load(&cloud)?;
            let plan = plan_grasps(&cloud, target, &g, seed.unwrap_or(cfg.seed))?;
            outln!("{}", serde_json::to_string_pretty(&menu(&plan.menu))?)?;
        }
        Command::Grasp(GraspCommand::Synth { sources, seed, out }) => {
            let cfg = config()?;
            let world = load_world(&sources, &cfg)?;
            let camera = cfg.camera.unwrap_or(world.camera);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.seed));
            let cloud = synth_cloud(&world, &camera, &mut rng)?;
            cloud.save(&out)?;
            eprintln!("{} points written to {}", cloud.len(), out.display());
        }
        Command::Lexicon(cmd) => lexicon(cmd)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn lexicon(cmd: LexiconCommand) -> Result<()> {
    let cfg = config()?;
    match cmd {
        LexiconCommand::Show { lexicon, category } => {
            let lex = load_lexicon(lexicon.as_deref(), &cfg)?;
            let cats: Vec<Category> = match category {
                Some(c) => vec![c.parse()?],
                None => Category::ALL.to_vec(),
            };
            for c in cats {
                outln!("{c}")?;
                for (name, e) in lex.entries(c) {
                    let ext = if e.extension { " (extension)" } else { "" };
                    outln!("  {name}{ext}: {}", e.synonyms.join(", "))?;
                }
            }
        }
        LexiconCommand::Learn {
            new_word,
            target,
            lexicon,
        } => {
            let mut lex = load_lexicon(lexicon.as_deref(), &cfg)?;
            let d = lex.learn(&new_word, &target)?;
            eprintln!("{} -> {}/{}", d.synonym, d.category, d.high_level);
            save_or_print(&lex, lexicon.as_deref())?;
        }
        LexiconCommand::Import { file, lexicon } => {
            let mut lex = load_lexicon(lexicon.as_deref(), &cfg)?;
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let n = lex.import_synonyms(&text)?;
            eprintln!("{n} synonyms added");
            save_or_print(&lex, lexicon.as_deref())?;
        }
        LexiconCommand::Diff { a, b } => {
            let (a, b) = (Lexicon::load(&a)?, Lexicon::load(&b)?);
            for line in a.diff(&b) {
                outln!("{line}")?;
            }
        }
    }
    Ok(())
}

fn save_or_print(lex: &Lexicon, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => lex.save(p)?,
        None => outln!("{}", lex.to_json())?,
    }
    Ok(())
}

fn describe(env: &Envelope) -> Option<String> {
    Some(match env.kind {
        Kind::Welcome => format!("session {}", env.session.as_deref().unwrap_or("?")),
        Kind::SdcResult => {
            let r: SdcResult = env.payload_as().ok()?;
            let items: Vec<String> = r
                .extracted
                .iter()
                .map(|x| serde_json::to_string(x).unwrap_or_default())
                .collect();
            format!("sdc    {}", items.join("  "))
        }
        Kind::Plan => {
            let p: PlanSummary = env.payload_as().ok()?;
            format!("plan   {} ({} samples, {:.2} s)", p.detail, p.samples, p.duration)
        }
        Kind::Tick => {
            let t: ExecutionTick = env.payload_as().ok()?;
            if t.events.is_empty() {
                return None;
            }
            let p = t.ee_pose.position;
            format!("t={:6.2}  ee=({:.3}, {:.3}, {:.3})  {:?}", t.t, p.x, p.y, p.z, t.events)
        }
        Kind::GraspMenu => {
            let m: GraspMenu = env.payload_as().ok()?;
            let mut s = format!("grasps for {}:", m.object);
            for c in &m.candidates {
                s.push_str(&format!(
                    "\n  {}. q={:.3}  at ({:.3}, {:.3})  angle {:.0}°  width {:.3} m",
                    c.index,
                    c.q,
                    c.center[0],
                    c.center[1],
                    c.angle.to_degrees(),
                    c.width
                ));
            }
            s
        }
        Kind::Error => env.payload_as::<StageError>().ok()?.to_string(),
        Kind::LexiconUpdate => {
            let u: LexiconUpdate = env.payload_as().ok()?;
            format!("learned {} -> {}/{}", u.new_word, u.category, u.target)
        }
        Kind::Stop => format!(
            "stop ({})",
            if env.payload_as::<StopAck>().ok()?.interrupted {
                "interrupted"
            } else {
                "idle"
            }
        ),
        _ => return None,
    })
}

fn repl(hub: Arc<Hub>) -> Result<()> {
    let outbox = Outbox::new(|env| {
        if let Some(line) = describe(env) {
            println!("{line}");
        }
    });
    let session = hub.open(outbox);
    session.welcome();
    let control = session.control();
    let (tx, rx) = mpsc::channel::<Envelope>();
    let worker = std::thread::spawn(move || {
        let mut session = session;
        for env in rx {
            if env.kind == Kind::Command && env.payload["text"] == ":state" {
                let w = session.world();
                let p = w.ee_pose().position;
                println!("ee=({:.3}, {:.3}, {:.3})  gripper {:?}", p.x, p.y, p.z, w.robot.gripper);
                for o in &w.objects {
                    let q = o.position();
                    println!("  {} ({}) at ({:.3}, {:.3}, {:.3})", o.id, o.name, q.x, q.y, q.z);
                }
                continue;
            }
            session.handle(&env);
        }
    });
    let mut seq = 0;
    let stdin = io::stdin();
    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        seq += 1;
        let env = match line.split_once(' ').unwrap_or((line, "")) {
            (":quit", _) => break,
            (":stop", _) => Envelope::new(Kind::Stop, ()),
            (":select", n) => match n.trim().parse::<usize>() {
                Ok(index) => Envelope::new(Kind::SelectGrasp, serde_json::json!({ "index": index })),
                Err(_) => {
                    outln!("usage: :select N")?;
                    continue;
                }
            },
            _ => Envelope::new(Kind::Command, serde_json::json!({ "text": line })),
        }
        .with_session(control.id(), seq);
        if control.intercept(&env) {
            continue;
        }
        if tx.send(env).is_err() {
            bail!("session ended");
        }
        io::stdout().flush()?;
    }
    drop(tx);
    let _ = worker.join();
    Ok(())
}
