use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use herdnet::graph::{input_connected, InputMode};
use herdnet::layered::{
    build_layered_depth, detect_layer_dilations, signed_dilation_sets, to_dot, to_dot_with, DilationReport,
};
use herdnet::lugh::DEFAULT_MAX_N;
use herdnet::numeric::{
    certify, controllability_matrix_depth, herdable_numeric, oracle_ss_herdable, realize, CertifiedRealization,
    Scheme,
};
use herdnet::sign::{sscm_depth, SignMatrix};
use herdnet::{decide, parse_system, SearchOptions, StructuredSystem, Verdict};
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

const EXIT_HERDABLE: u8 = 0;
const EXIT_NOT_HERDABLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DISCREPANCY: u8 = 3;

#[derive(Parser)]
#[command(name = "herdnet", version, about = "Structural sign herdability of signed networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full structural report.
    Analyze(AnalyzeArgs),
    /// Certificate, realization and preimage for a herdable system.
    Certify(CertifyArgs),
    /// Compare the structural verdict with the numeric oracle.
    Verify(VerifyArgs),
    /// Write layered-graph DOT and sign-matrix JSON.
    Export(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// Edge-list file.
    path: PathBuf,
    /// Number of layers and matrix blocks; defaults to n.
    #[arg(long = "depth-override")]
    depth: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    json: bool,
    /// Report every certificate with a minimal weighted-edge set.
    #[arg(long = "all-certs")]
    all_certs: bool,
    /// Add the numeric cross-check section.
    #[arg(long)]
    verify: bool,
    /// Include wall-clock timings in JSON output.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    /// Magnitudes `d,hi,lo` with `0 < lo < d < hi`.
    #[arg(long, value_parser = parse_scheme, default_value = "1,10,0.1")]
    scheme: Scheme,
    /// Recorded in the bundle; the construction itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    /// Layered graph as DOT; `-` for standard output.
    #[arg(long = "gs-dot")]
    gs_dot: Option<PathBuf>,
    /// Layered graph with certificate edges drawn bold.
    #[arg(long = "lugh-dot")]
    lugh_dot: Option<PathBuf>,
    /// Sign matrix as a JSON grid of glyphs.
    #[arg(long)]
    sscm: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [d, hi, lo] = v[..] else { return Err("expected d,hi,lo".into()) };
    let sc = Scheme { d, hi, lo };
    sc.check().map_err(|e| e.to_string())?;
    Ok(sc)
}

/// Failure that ends the run with a message on standard error.
struct Fail(u8, String);

fn load(path: &Path) -> Result<StructuredSystem, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    parse_system(&text).map_err(|e| Fail(EXIT_INPUT, format!("{}:{e}", path.display())))
}

fn max_n() -> Result<usize, Fail> {
    match std::env::var("HERDNET_MAX_N") {
        Ok(v) => v.trim().parse().map_err(|_| Fail(EXIT_INPUT, format!("HERDNET_MAX_N: not a count: {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_N),
    }
}

fn options(common: &Common, all_certs: bool) -> Result<SearchOptions, Fail> {
    if common.depth == Some(0) {
        return Err(Fail(EXIT_INPUT, "--depth-override must be positive".into()));
    }
    Ok(SearchOptions { all_certs, depth: common.depth, max_n: max_n()?, ..SearchOptions::default() })
}

fn search(sys: &StructuredSystem, opts: &SearchOptions) -> Result<Verdict, Fail> {
    decide(sys, opts).map_err(|e| Fail(EXIT_INPUT, e.to_string()))
}

fn verdict_code(v: &Verdict) -> u8 {
    if v.is_herdable() {
        EXIT_HERDABLE
    } else {
        EXIT_NOT_HERDABLE
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Writes to standard output, ignoring a closed pipe.
fn out(s: &str) {
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn emit(v: &Value) {
    out(&(serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"));
}

fn system_summary(sys: &StructuredSystem) -> Value {
    json!({
        "n": sys.n,
        "edges": sys.edges.len(),
        "mode": match sys.mode { InputMode::SingleInput => "SingleInput", InputMode::MultiDriver => "MultiDriver" },
        "inputs": sys.inputs.iter().map(|i| json!({"node": i.node, "sign": i.sign.glyph()})).collect::<Vec<_>>(),
    })
}

fn cross_check(sys: &StructuredSystem, v: &Verdict, depth: usize) -> Result<Value, Fail> {
    if v.is_herdable() {
        let b = certify(sys, v.certificates(), Scheme::default()).map_err(|e| Fail(EXIT_DISCREPANCY, e.to_string()))?;
        Ok(bundle_json(&b))
    } else {
        let r = realize(sys, None, Scheme::default()).map_err(|e| Fail(EXIT_INPUT, e.to_string()))?;
        let c = controllability_matrix_depth(&r, depth);
        let feas = herdable_numeric(&c).map_err(|e| Fail(EXIT_DISCREPANCY, e.to_string()))?;
        Ok(json!({ "scheme": "unit", "realization": to_json(&r), "feasibility": to_json(&feas) }))
    }
}

fn bundle_json(b: &CertifiedRealization) -> Value {
    json!({
        "scheme": to_json(&b.scheme),
        "realization": to_json(&b.realization),
        "delta": to_json(&b.delta),
        "feasibility": to_json(&b.feasibility),
    })
}

fn analyze(a: &AnalyzeArgs) -> Result<u8, Fail> {
    let t0 = Instant::now();
    let sys = load(&a.common.path)?;
    let opts = options(&a.common, a.all_certs)?;
    let depth = a.common.depth.unwrap_or(sys.n);
    let parsed = t0.elapsed();

    let (connected, inaccessible) = input_connected(&sys);
    let mut dil = signed_dilation_sets(&sys);
    let gs = build_layered_depth(&sys, depth);
    dil.layer_dilations = detect_layer_dilations(&gs);
    let s = sscm_depth(&sys, depth);
    let t1 = Instant::now();
    let v = search(&sys, &opts)?;
    let searched = t1.elapsed();
    let t2 = Instant::now();
    let numeric = if a.verify { Some(cross_check(&sys, &v, depth)?) } else { None };
    let checked = t2.elapsed();

    if a.json {
        let mut report = json!({
            "schema": SCHEMA,
            "system": system_summary(&sys),
            "depth": depth,
            "input_connected": { "connected": connected, "inaccessible": inaccessible },
            "dilations": to_json(&dil),
            "sscm": to_json(&s),
            "verdict": to_json(&v),
        });
        if let Some(nv) = &numeric {
            report["numeric"] = nv.clone();
        }
        if a.timings {
            report["timings_ms"] = json!({
                "parse": parsed.as_secs_f64() * 1e3,
                "search": searched.as_secs_f64() * 1e3,
                "numeric": checked.as_secs_f64() * 1e3,
            });
        }
        emit(&report);
    } else {
        let mut o = text_report(&sys, depth, connected, &inaccessible, &dil, &s, &v);
        if let Some(nv) = &numeric {
            let _ = writeln!(o, "numeric cross-check:");
            let _ = writeln!(o, "  feasibility: {}", nv["feasibility"]["outcome"].as_str().unwrap_or("?"));
            if let Some(img) = nv["delta"]["image"].as_array() {
                let min = img.iter().filter_map(Value::as_f64).fold(f64::INFINITY, f64::min);
                let _ = writeln!(o, "  min (C delta): {min}");
            }
        }
        let _ = writeln!(
            o,
            "timings: parse {:.3} ms, search {:.3} ms, numeric {:.3} ms",
            parsed.as_secs_f64() * 1e3,
            searched.as_secs_f64() * 1e3,
            checked.as_secs_f64() * 1e3
        );
        out(&o);
    }
    Ok(verdict_code(&v))
}

fn set_str<'a>(it: impl IntoIterator<Item = &'a usize>) -> String {
    let v: Vec<String> = it.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn text_report(
    sys: &StructuredSystem,
    depth: usize,
    connected: bool,
    inaccessible: &[usize],
    dil: &DilationReport,
    s: &SignMatrix,
    v: &Verdict,
) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "system: n = {}, {} edges, {} input(s), depth {depth}", sys.n, sys.edges.len(), sys.inputs.len());
    if connected {
        let _ = writeln!(o, "input-connected: yes");
    } else {
        let _ = writeln!(o, "input-connected: no, inaccessible {}", set_str(inaccessible));
    }
    let _ = writeln!(o, "signed dilation nodes: {}", set_str(&dil.signed_dilation_nodes));
    for i in &dil.signed_dilation_nodes {
        let d = &dil.delta_sets[i];
        let _ = writeln!(o, "  Δ{i} = {}  Δ{i}^P = {}  Δ{i}^N = {}", set_str(&d.all), set_str(&d.plus), set_str(&d.minus));
    }
    let _ = writeln!(o, "layer dilations: {}", set_str(&dil.layer_dilations));
    if let Some(c) = &dil.classic_dilation {
        let _ = writeln!(o, "classic dilation: {}", set_str(c));
    }
    let _ = writeln!(o, "sign matrix:");
    o.push_str(&s.render());
    match v {
        Verdict::Herdable { certificates, alternatives } => {
            let _ = writeln!(o, "verdict: SSHerdable");
            for c in certificates {
                let sigma: Vec<&str> = c.sigma.0.iter().map(|g| g.glyph()).collect();
                let _ = writeln!(o, "  LUG^H for driver {}: σ = ({})", c.driver, sigma.join(", "));
                for (node, layer) in &c.matched_at {
                    let _ = writeln!(o, "    node {node} sign-matched at L{layer} ({})", c.matched_sign(*layer).glyph());
                }
                if !c.weighted_edges.is_empty() {
                    let w: Vec<String> = c.weighted_edges.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                    let _ = writeln!(o, "    weighted edges: {}", w.join(", "));
                }
            }
            if !alternatives.is_empty() {
                let _ = writeln!(o, "  {} further certificate set(s)", alternatives.len());
            }
        }
        Verdict::NotHerdable(w) => {
            let _ = writeln!(o, "verdict: NotSSHerdable");
            let _ = writeln!(o, "  unmatched: {}", set_str(&w.unmatched));
            let reasons: Vec<String> = w.reasons.iter().map(|r| format!("{r:?}")).collect();
            let _ = writeln!(o, "  reasons: {}", reasons.join(", "));
        }
    }
    o
}

fn cmd_certify(a: &CertifyArgs) -> Result<u8, Fail> {
    let sys = load(&a.common.path)?;
    let opts = options(&a.common, false)?;
    let v = search(&sys, &opts)?;
    let Verdict::Herdable { certificates, .. } = &v else {
        emit(&json!({ "schema": SCHEMA, "seed": a.seed, "verdict": to_json(&v) }));
        return Ok(EXIT_NOT_HERDABLE);
    };
    let b = certify(&sys, certificates, a.scheme).map_err(|e| Fail(EXIT_DISCREPANCY, e.to_string()))?;
    let mut out = bundle_json(&b);
    out["schema"] = json!(SCHEMA);
    out["seed"] = json!(a.seed);
    out["certificate"] = to_json(certificates);
    emit(&out);
    Ok(EXIT_HERDABLE)
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8, Fail> {
    let sys = load(&a.common.path)?;
    let opts = options(&a.common, false)?;
    let v = search(&sys, &opts)?;
    let (consistent, evidence) = if v.is_herdable() {
        match certify(&sys, v.certificates(), Scheme::default()) {
            Ok(b) => (true, json!({ "certified": bundle_json(&b) })),
            Err(e) => (false, json!({ "certify_error": e.to_string() })),
        }
    } else {
        let o = oracle_ss_herdable(&sys, a.samples, a.seed);
        (!o.is_herdable(), json!({ "oracle": to_json(&o) }))
    };
    emit(&json!({
        "schema": SCHEMA,
        "seed": a.seed,
        "samples": a.samples,
        "verdict": if v.is_herdable() { "SSHerdable" } else { "NotSSHerdable" },
        "consistent": consistent,
        "evidence": evidence,
    }));
    Ok(if consistent { EXIT_HERDABLE } else { EXIT_DISCREPANCY })
}

fn write_out(path: &Path, body: &str) -> Result<(), Fail> {
    if path.as_os_str() == "-" {
        out(body);
        Ok(())
    } else {
        std::fs::write(path, body).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display())))
    }
}

fn cmd_export(a: &ExportArgs) -> Result<u8, Fail> {
    let sys = load(&a.common.path)?;
    let depth = a.common.depth.unwrap_or(sys.n);
    let gs = build_layered_depth(&sys, depth);
    if let Some(p) = &a.gs_dot {
        write_out(p, &to_dot(&gs))?;
    }
    if let Some(p) = &a.sscm {
        let grid = serde_json::to_string_pretty(&sscm_depth(&sys, depth)).expect("glyph grid serializes");
        write_out(p, &(grid + "\n"))?;
    }
    if let Some(p) = &a.lugh_dot {
        let v = search(&sys, &options(&a.common, false)?)?;
        let kept: BTreeSet<(usize, usize, usize, usize)> = v
            .certificates()
            .iter()
            .flat_map(|c| c.kept_edges.iter().map(move |e| (c.driver, e.src, e.dst, e.layer)))
            .collect();
        write_out(p, &to_dot_with(&gs, &kept))?;
    }
    Ok(EXIT_HERDABLE)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Cmd::Analyze(a) => analyze(a),
        Cmd::Certify(a) => cmd_certify(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Export(a) => cmd_export(a),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("herdnet: {msg}");
            ExitCode::from(code)
        }
    }
}
