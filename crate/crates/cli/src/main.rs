//! Command-line front end: identification, elimination, and oracle checks
//! over graph and parameter files.
//!
//! Exit codes: 0 success, 1 not identifiable (witness printed), 2
//! usage/parse errors, 3 numerical or structural violations.

use causalq::eid::{
    choose_order, conditional_query_table, eid, query_table, EidOutcome, OrderStrategy,
};
use causalq::graph::{Cadmg, LabelTable};
use causalq::ident::{id, id_conditional, ConditionalOutcome, HedgeWitness, IdOutcome};
use causalq::intrinsic::all_intrinsic_sets;
use causalq::moebius::{
    fmt_assignment, parse_params, q_count, table_from_params, write_params, Assignment, ProbTable,
};
use causalq::oracle::random_model;
use causalq::parse::parse_graph;
use causalq::set::VSet;
use causalq::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "causalq", version, about = "Interventional inference in binary mixed-graph causal models")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    output: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    JsonLines,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Order {
    Greedy,
    Exhaustive,
}

impl From<Order> for OrderStrategy {
    fn from(o: Order) -> Self {
        match o {
            Order::Greedy => OrderStrategy::Greedy,
            Order::Exhaustive => OrderStrategy::Exhaustive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Symbolic identification of P(on | given, do(do)) in an ADMG.
    Identify {
        #[arg(long)]
        graph: String,
        /// Intervened vertices (comma separated).
        #[arg(long, value_delimiter = ',')]
        r#do: Vec<String>,
        /// Outcome vertices.
        #[arg(long, value_delimiter = ',', required = true)]
        on: Vec<String>,
        /// Conditioning vertices.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Evaluate P(on | given, do(do)) by parameter restriction and variable
    /// elimination.
    Eid {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        params: String,
        /// Intervention assignments, e.g. x3=0.
        #[arg(long, value_delimiter = ',')]
        r#do: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        on: Vec<String>,
        /// Conditioning assignments, e.g. z=1.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        #[arg(long, value_enum, default_value_t = Order::Greedy)]
        order: Order,
        /// Print per-step elimination diagnostics.
        #[arg(long)]
        trace: bool,
        /// Also print the output distribution as a table.
        #[arg(long)]
        table: bool,
    },
    /// List every intrinsic set as `C | head | tail`.
    Intrinsic {
        #[arg(long)]
        graph: String,
    },
    /// Binary widths for an elimination set.
    Width {
        #[arg(long)]
        graph: String,
        #[arg(long, value_delimiter = ',', required = true)]
        eliminate: Vec<String>,
        #[arg(long, value_enum, default_value_t = Order::Greedy)]
        order: Order,
    },
    /// Generate a random latent-DAG model and check the pipeline against it.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        observed: usize,
        #[arg(long, default_value_t = 2)]
        latent: usize,
        #[arg(long, default_value_t = 0.4)]
        density: f64,
        /// States per latent variable (2..=4).
        #[arg(long, default_value_t = 2)]
        latent_card: u32,
        /// Which checks to run.
        #[arg(long, default_value = "eid")]
        check: String,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Latent projection of a latent DAG onto observed vertices.
    Project {
        #[arg(long)]
        graph: String,
        /// Target vertices (defaults to every observed vertex).
        #[arg(long, value_delimiter = ',')]
        onto: Vec<String>,
    },
    /// Full joint table of a parameterized model.
    Table {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        params: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::UnknownVertex(_)
        | Error::DuplicateVertex(_)
        | Error::InvalidLabel(_)
        | Error::LatentNotObserved(_)
        | Error::NotDisjoint(_) => 2,
        _ => 3,
    }
}

fn read(path: &str) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("{path}: {e}"),
    })
}

fn load_admg(path: &str) -> Result<Cadmg, Error> {
    Ok(parse_graph(&read(path)?)?.as_admg()?.clone())
}

fn names(labels: &LabelTable, s: VSet) -> Vec<String> {
    s.iter().map(|v| labels.label(v).to_string()).collect()
}

fn vertex_set(g: &Cadmg, items: &[String]) -> Result<VSet, Error> {
    g.labels().set_from_labels(items)
}

fn assignment(g: &Cadmg, items: &[String]) -> Result<Assignment, Error> {
    let mut a = Assignment::EMPTY;
    for item in items {
        let (name, value) = item.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("expected name=0|1, got `{item}`"),
        })?;
        let v = g.labels().index_of(name.trim())?;
        let bit = match value.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("value of `{name}` must be 0 or 1, got `{other}`"),
                })
            }
        };
        a = a.with(v, bit);
    }
    Ok(a)
}

fn print_hedge(g: &Cadmg, h: &HedgeWitness, format: Format) {
    let labels = g.labels();
    match format {
        Format::Human => {
            println!("NOT IDENTIFIABLE");
            println!("hedge for (do {}, on {}):", labels.fmt_set(h.blocked_x), labels.fmt_set(h.blocked_y));
            println!("  F  = {}", labels.fmt_set(h.f));
            println!("  F' = {}", labels.fmt_set(h.f_prime));
            println!("  R  = {}", labels.fmt_set(h.root_set));
        }
        Format::JsonLines => {
            println!(
                "{}",
                json!({
                    "identifiable": false,
                    "hedge": {
                        "f": names(labels, h.f),
                        "f_prime": names(labels, h.f_prime),
                        "root_set": names(labels, h.root_set),
                        "do": names(labels, h.blocked_x),
                        "on": names(labels, h.blocked_y),
                    }
                })
            );
        }
    }
}

fn table_rows(t: &ProbTable<f64>, format: Format) {
    for (nu, p) in t.assignments() {
        match format {
            Format::Human => println!("P({}) = {}", fmt_assignment(t.labels(), &nu), p),
            Format::JsonLines => {
                let mut vals = serde_json::Map::new();
                for v in nu.domain().iter() {
                    vals.insert(
                        t.labels().label(v).to_string(),
                        json!(u8::from(nu.get(v).unwrap())),
                    );
                }
                println!("{}", json!({"assignment": vals, "p": p}));
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let format = cli.output;
    match &cli.command {
        Command::Identify { graph, r#do, on, given } => {
            let g = load_admg(graph)?;
            let x = vertex_set(&g, r#do)?;
            let y = vertex_set(&g, on)?;
            let z = vertex_set(&g, given)?;
            if z.is_empty() {
                match id(y, x, &g)? {
                    IdOutcome::Identified(expr) => match format {
                        Format::Human => println!("P({} | do({})) = {}", on.join(","), r#do.join(","), expr),
                        Format::JsonLines => println!(
                            "{}",
                            json!({"identifiable": true, "expression": expr.to_string()})
                        ),
                    },
                    IdOutcome::Hedge(h) => {
                        print_hedge(&g, &h, format);
                        return Ok(ExitCode::from(1));
                    }
                }
            } else {
                match id_conditional(y, z, x, &g)? {
                    ConditionalOutcome::Identified(c) => match format {
                        Format::Human => {
                            println!(
                                "P({} | {}, do({})) = [ {} ] / [ {} ]",
                                on.join(","),
                                given.join(","),
                                r#do.join(","),
                                c.numerator,
                                c.denominator
                            );
                        }
                        Format::JsonLines => println!(
                            "{}",
                            json!({
                                "identifiable": true,
                                "numerator": c.numerator.to_string(),
                                "denominator": c.denominator.to_string(),
                            })
                        ),
                    },
                    ConditionalOutcome::Hedge(h) => {
                        print_hedge(&g, &h, format);
                        return Ok(ExitCode::from(1));
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Eid { graph, params, r#do, on, given, order, trace, table } => {
            let g = load_admg(graph)?;
            let omega = parse_params::<f64>(&read(params)?, &g)?;
            let x = assignment(&g, r#do)?;
            let y = vertex_set(&g, on)?;
            let z = assignment(&g, given)?;
            let strategy: OrderStrategy = (*order).into();

            let outcome = eid(y.union(z.domain()), &x, &omega, &g, strategy)?;
            let result = match outcome {
                EidOutcome::Fail(_) => {
                    if let Some(h) = causalq::ident::find_hedge(&g, x.domain(), y.union(z.domain()))? {
                        print_hedge(&g, &h, format);
                    }
                    return Ok(ExitCode::from(1));
                }
                EidOutcome::Identified(r) => r,
            };
            if *trace {
                match format {
                    Format::Human => {
                        for step in &result.trace.steps {
                            println!(
                                "# eliminated {} at width {}",
                                g.labels().label(step.vertex),
                                step.width.map_or("none".into(), |w| format!("{w}")),
                            );
                        }
                        println!(
                            "# transform memo: {} distinct inputs, {} hits",
                            result.trace.fgmt_distinct, result.trace.fgmt_hits
                        );
                        println!("# wall time: {:?}", result.trace.wall);
                    }
                    Format::JsonLines => {
                        // Deterministic fields only, so reruns are byte-identical.
                        let steps: Vec<_> = result
                            .trace
                            .steps
                            .iter()
                            .map(|s| {
                                json!({
                                    "eliminated": g.labels().label(s.vertex),
                                    "width": s.width,
                                })
                            })
                            .collect();
                        println!(
                            "{}",
                            json!({
                                "trace": steps,
                                "memo_distinct": result.trace.fgmt_distinct,
                                "memo_hits": result.trace.fgmt_hits,
                            })
                        );
                    }
                }
            }
            if z.domain().is_empty() {
                match format {
                    Format::Human => {
                        println!("# result graph over {}", g.labels().fmt_set(result.graph.random()));
                        for line in result.graph.to_text().lines() {
                            println!("# {line}");
                        }
                        print!("{}", write_params(&result.params));
                    }
                    Format::JsonLines => {
                        for (head, entry) in result.params.entries() {
                            for (idx, value) in entry.present() {
                                let t = Assignment::from_index(entry.tail, idx);
                                println!(
                                    "{}",
                                    json!({
                                        "head": names(g.labels(), *head),
                                        "tail": fmt_assignment(g.labels(), &t),
                                        "value": value,
                                    })
                                );
                            }
                        }
                    }
                }
                if *table {
                    let t = table_from_params(&result.graph, &result.params)?;
                    table_rows(&t, format);
                }
            } else {
                // Conditional query: report the conditioned table.
                let t = conditional_query_table(y, &z, &x, &omega, &g, strategy)?
                    .expect("joint already identified");
                table_rows(&t, format);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Intrinsic { graph } => {
            let g = load_admg(graph)?;
            let table = all_intrinsic_sets(&g)?;
            for info in table.sets() {
                match format {
                    Format::Human => println!(
                        "{} | {} | {}",
                        g.labels().fmt_set(info.members),
                        g.labels().fmt_set(info.head),
                        g.labels().fmt_set(info.tail)
                    ),
                    Format::JsonLines => println!(
                        "{}",
                        json!({
                            "set": names(g.labels(), info.members),
                            "head": names(g.labels(), info.head),
                            "tail": names(g.labels(), info.tail),
                        })
                    ),
                }
            }
            if format == Format::Human {
                println!("# {} intrinsic sets, {} parameters", table.sets().len(), q_count(&g)?);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Width { graph, eliminate, order } => {
            let g = load_admg(graph)?;
            let z = vertex_set(&g, eliminate)?;
            let chosen = choose_order(&g, z, (*order).into())?;
            for step in &chosen.steps {
                match format {
                    Format::Human => println!(
                        "eliminate {}: width {}",
                        g.labels().label(step.vertex),
                        step.width.map_or("none".into(), |w| format!("{w}")),
                    ),
                    Format::JsonLines => println!(
                        "{}",
                        json!({"eliminate": g.labels().label(step.vertex), "width": step.width})
                    ),
                }
            }
            let overall = chosen.max_width();
            match format {
                Format::Human => println!(
                    "overall width: {}",
                    overall.map_or("none".into(), |w| format!("{w}"))
                ),
                Format::JsonLines => println!("{}", json!({"overall_width": overall})),
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Oracle { seed, observed, latent, density, latent_card, check, tolerance } => {
            oracle_check(*seed, *observed, *latent, *density, *latent_card, check, *tolerance, format)
        }

        Command::Project { graph, onto } => {
            let parsed = parse_graph(&read(graph)?)?;
            let d = parsed.as_latent()?;
            let target = if onto.is_empty() {
                d.observed()
            } else {
                d.labels().set_from_labels(onto)?
            };
            let p = d.latent_projection(target)?;
            match format {
                Format::Human => print!("{}", p.to_text()),
                Format::JsonLines => {
                    let dirs: Vec<_> = p
                        .directed_edges()
                        .iter()
                        .map(|&(a, b)| json!([p.labels().label(a), p.labels().label(b)]))
                        .collect();
                    let bis: Vec<_> = p
                        .bidirected_edges()
                        .iter()
                        .map(|&(a, b)| json!([p.labels().label(a), p.labels().label(b)]))
                        .collect();
                    println!(
                        "{}",
                        json!({
                            "nodes": names(p.labels(), p.vertices()),
                            "directed": dirs,
                            "bidirected": bis,
                        })
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Table { graph, params } => {
            let g = load_admg(graph)?;
            let omega = parse_params::<f64>(&read(params)?, &g)?;
            let t = table_from_params(&g, &omega)?;
            table_rows(&t, format);
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn oracle_check(
    seed: u64,
    observed: usize,
    latent: usize,
    density: f64,
    latent_card: u32,
    check: &str,
    tolerance: f64,
    format: Format,
) -> Result<ExitCode, Error> {
    let m = random_model::<f64>(seed, observed, latent, density, latent_card)?;
    let g = m.projection()?;
    let omega = m.q_params(&g)?;
    let mut violations = 0u64;

    if check == "gmt" || check == "both" {
        let joint = m.joint()?;
        let table = table_from_params(&g, &omega)?;
        let mut worst = 0.0f64;
        for (a, b) in table.values().iter().zip(joint.values()) {
            worst = worst.max((a - b).abs());
        }
        let ok = worst < tolerance;
        if !ok {
            violations += 1;
        }
        match format {
            Format::Human => println!(
                "gmt joint reproduction: max residual {worst:.3e} {}",
                if ok { "(ok)" } else { "(VIOLATION)" }
            ),
            Format::JsonLines => println!(
                "{}",
                json!({"check": "gmt", "max_residual": worst, "ok": ok})
            ),
        }
    }

    if check == "eid" || check == "both" {
        for xv in g.random().iter() {
            for yv in g.random().iter() {
                if xv == yv {
                    continue;
                }
                let y = VSet::singleton(yv);
                let hedge = causalq::ident::find_hedge(&g, VSet::singleton(xv), y)?;
                for xval in [false, true] {
                    let x = Assignment::EMPTY.with(xv, xval);
                    let query = format!(
                        "P({} | do({}={}))",
                        g.labels().label(yv),
                        g.labels().label(xv),
                        u8::from(xval)
                    );
                    match query_table(y, &x, &omega, &g, OrderStrategy::Greedy)? {
                        Some(table) => {
                            let want = m.truncated(&x)?.marginalize(y);
                            let mut residual = 0.0f64;
                            for (a, b) in table.values().iter().zip(want.values()) {
                                residual = residual.max((a - b).abs());
                            }
                            let ok = hedge.is_none() && residual < tolerance;
                            if !ok {
                                violations += 1;
                            }
                            match format {
                                Format::Human => println!(
                                    "{query}: residual {residual:.3e} {}",
                                    if ok { "(ok)" } else { "(VIOLATION)" }
                                ),
                                Format::JsonLines => println!(
                                    "{}",
                                    json!({"query": query, "status": "identified", "residual": residual, "ok": ok})
                                ),
                            }
                        }
                        None => {
                            let ok = hedge.is_some();
                            if !ok {
                                violations += 1;
                            }
                            match format {
                                Format::Human => println!(
                                    "{query}: not identifiable {}",
                                    if ok { "(hedge confirmed)" } else { "(VIOLATION: no hedge)" }
                                ),
                                Format::JsonLines => println!(
                                    "{}",
                                    json!({"query": query, "status": "blocked", "hedge_confirmed": ok, "ok": ok})
                                ),
                            }
                        }
                    }
                }
            }
        }
    }

    if violations > 0 {
        eprintln!("{violations} violations");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
