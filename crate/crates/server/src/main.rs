use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use deckforge::kb::Variant;
use deckforge::parser::corpus::synthetic_corpus;
use deckforge::parser::{evaluate_tagger, parse_corpus, train_with_report, write_corpus, TrainConfig};
use deckforge::render::{RenderOptions, Theme};
use deckforge::sim::{run_experiment, ExperimentConfig};
use deckforge::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "deckforge", version, about = "Conversational slide-deck builder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KbVariant {
    Nkb,
    Rkb,
}

impl From<KbVariant> for Variant {
    fn from(v: KbVariant) -> Self {
        match v {
            KbVariant::Nkb => Variant::Nkb,
            KbVariant::Rkb => Variant::Rkb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ThemeArg {
    Light,
    Dark,
}

#[derive(Debug, clap::Args)]
struct WorkspaceArgs {
    /// Workspace directory; created and seeded with demo data if missing.
    #[arg(long, env = "DECKFORGE_WORKSPACE")]
    workspace: PathBuf,
    /// Knowledge-base variant for a new workspace (an existing kb.json wins).
    #[arg(long, value_enum, default_value = "rkb")]
    variant: KbVariant,
}

impl WorkspaceArgs {
    fn open(&self) -> Result<Workspace> {
        Workspace::open(&self.workspace, self.variant.into())
            .with_context(|| format!("opening workspace {}", self.workspace.display()))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Chat with the workspace in the terminal.
    Repl {
        #[command(flatten)]
        ws: WorkspaceArgs,
    },
    /// Create a workspace with demo datasets, default KB and parser model.
    Init {
        #[command(flatten)]
        ws: WorkspaceArgs,
    },
    /// Train the command tagger on an annotated corpus.
    TrainParser {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Held-out corpus to report precision/recall/F1 on.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        l2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the synthetic annotated train/test corpus.
    GenCorpus {
        #[arg(long, default_value_t = 50)]
        train: usize,
        #[arg(long, default_value_t = 25)]
        test: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the knowledge-base simulation grid.
    Simulate {
        /// ExperimentConfig JSON; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a stored deck to HTML.
    Render {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long)]
        deck: String,
        #[arg(long)]
        html: PathBuf,
        #[arg(long, value_enum, default_value = "light")]
        theme: ThemeArg,
        #[arg(long)]
        embed_data: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn repl(mut ws: Workspace) -> Result<()> {
    let session = ws.create_session();
    println!("deckforge ready. Try 'create a briefing deck about Tesla Motor'. Ctrl-D to quit.");
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    loop {
        print!("> ");
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let turn = ws.handle_message(&session, &line)?;
        println!("{}", turn.reply_text);
        if let Some(c) = &turn.clarification {
            if !c.candidates.is_empty() {
                println!("  options: {}", c.candidates.join(", "));
            }
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { ws, port, host } => {
            let workspace = ws.open()?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid host/port")?;
            let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
            log::info!("serving {} on http://{}", ws.workspace.display(), listener.local_addr()?);
            axum::serve(listener, deckforge_server::app(workspace))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::Repl { ws } => repl(ws.open()?)?,
        Command::Init { ws } => {
            let w = ws.open()?;
            println!("workspace ready at {} ({} KB)", ws.workspace.display(), w.kb().variant().as_str());
        }
        Command::TrainParser { corpus, out, test, epochs, l2, seed } => {
            let train = parse_corpus(&read(&corpus)?)?;
            let cfg = TrainConfig { epochs, l2_lambda: l2, seed, ..TrainConfig::default() };
            let report = train_with_report(&train, &cfg)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            std::fs::write(&out, report.model.to_json()).with_context(|| format!("writing {}", out.display()))?;
            let nll = &report.nll_trajectory;
            println!("trained on {} commands; NLL {:.3} -> {:.3}", train.len(), nll[0], nll[nll.len() - 1]);
            if let Some(test) = test {
                let ev = evaluate_tagger(&report.model, &parse_corpus(&read(&test)?)?)?;
                println!("held-out: F1 {:.3}  precision {:.3}  recall {:.3}", ev.macro_f1, ev.precision, ev.recall);
            }
        }
        Command::GenCorpus { train, test, seed, out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let (tr, te) = synthetic_corpus(train, test, seed);
            std::fs::write(out_dir.join("train.txt"), write_corpus(&tr))?;
            std::fs::write(out_dir.join("test.txt"), write_corpus(&te))?;
            println!("wrote {} train and {} test commands to {}", tr.len(), te.len(), out_dir.display());
        }
        Command::Simulate { config, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::from_json(&read(&p)?)?,
                None => ExperimentConfig::default(),
            };
            let result = tokio::task::spawn_blocking(move || run_experiment(&cfg)).await??;
            result.write_outputs(&out)?;
            print!("{}", result.grid_csv());
        }
        Command::Render { ws, deck, html, theme, embed_data } => {
            let w = ws.open()?;
            if w.deck(&deck).is_none() {
                let known: Vec<&str> = w.deck_names().collect();
                bail!("no deck named '{deck}' (known: {})", known.join(", "));
            }
            let theme = match theme {
                ThemeArg::Light => Theme::Light,
                ThemeArg::Dark => Theme::Dark,
            };
            let opts = RenderOptions { theme, embed_data, ..RenderOptions::default() };
            std::fs::write(&html, w.deck_html(&deck, &opts)?)?;
            println!("wrote {}", html.display());
        }
    }
    Ok(())
}
