//! Command-line driver: validate, print, simulate, translate, statespace, certify and export-dot over
//! `.dbn`/`.cpn` model files or built-in models (`builtin:<name>`).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dbnet::corpus::{self, CartParams};
use dbnet::dbnet::DbNet;
use dbnet::dot::{cpn_to_dot, dbnet_to_dot, lts_to_dot};
use dbnet::dsl::{parse_model, print_cpn, Model};
use dbnet::equivalence::{certify_with, render_witness, Certification, Verdict};
use dbnet::fresh::{FreshMode, FreshPolicy};
use dbnet::lts::Limits;
use dbnet::nucpn::NuCpn;
use dbnet::simulate::{simulate_cpn, simulate_dbnet};
use dbnet::translate::{check_order, translate, Mutation};

/// Exit status for a failed check (invalid model, truncation, not bisimilar).
pub const EXIT_CHECK: i32 = 1;
/// Exit status for unusable input (bad flags, unreadable or unparsable model).
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "dbnet", version, about = "DB-net validation, simulation, translation to ν-CPNs and certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check well-formedness of a model and its initial state.
    Validate(Common),
    /// Print a model in canonical DSL form.
    Print(Common),
    /// Batch run of random firings; prints the trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Compile a DB-net into a ν-CPN; with -o also writes `.dot` and `.provenance.jsonl` siblings.
    Translate(Common),
    /// Explore the reachable state space and print it in canonical LTS form.
    Statespace {
        #[command(flatten)]
        common: Common,
        /// Explore the translated ν-CPN instead of the DB-net.
        #[arg(long)]
        translated: bool,
    },
    /// Check weak bisimilarity between a DB-net and its translation.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Apply a deliberate translation defect (drop-revert-component, swap-add-priorities,
        /// skip-constraint-stage:<i>, skip-last-constraint-stage, forget-cancel-lock-return,
        /// consume-on-read-arc, reorder-del-add).
        #[arg(long)]
        mutate: Option<String>,
    },
    /// Graphviz output for the net, its translation, or a state space.
    ExportDot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        translated: bool,
        /// Export the reachable state space instead of the net structure.
        #[arg(long)]
        lts: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Path to a `.dbn`/`.cpn` file, or `builtin:<name>`.
    pub model: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// unbounded | bounded:<k> | recycling; overrides the model's policy.
    #[arg(long)]
    pub fresh: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub max_states: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Built-in shopping cart only.
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub products: Option<usize>,
    #[arg(long)]
    pub sessions: Option<usize>,
}

impl Common {
    fn limits(&self) -> Limits {
        Limits { max_states: self.max_states, max_depth: self.max_depth.unwrap_or(usize::MAX), jobs: self.jobs }
    }

    fn scaled(&self) -> bool {
        self.users.is_some() || self.products.is_some() || self.sessions.is_some()
    }

    fn params(&self) -> CartParams {
        let d = CartParams::default();
        CartParams {
            users: self.users.unwrap_or(d.users),
            products: self.products.unwrap_or(d.products),
            sessions: self.sessions.unwrap_or(d.sessions),
        }
    }

    fn policy(&self, model: &FreshPolicy) -> Result<FreshPolicy> {
        let mut fp = model.clone();
        if let Some(f) = &self.fresh {
            fp.mode = FreshMode::from_str(f).map_err(|e| anyhow!(e))?;
        }
        Ok(fp)
    }
}

/// Distinguishes failed checks from unusable input when mapping to exit codes.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn check_failed<T>(msg: impl Into<String>) -> Result<T> {
    Err(CheckFailed(msg.into()).into())
}

/// Resolves `builtin:<name>`, a readable path, or a missing path whose stem names a built-in.
pub fn load_model(c: &Common) -> Result<Model> {
    let builtin = c.model.strip_prefix("builtin:").map(str::to_string).or_else(|| {
        let p = Path::new(&c.model);
        let stem = p.file_stem()?.to_str()?;
        (!p.exists() && corpus::BUILTIN.contains(&stem)).then(|| stem.to_string())
    });
    if let Some(name) = builtin {
        let net = corpus::builtin(&name, c.params())
            .ok_or_else(|| anyhow!("unknown builtin `{name}`; available: {}", corpus::BUILTIN.join(", ")))?;
        if c.scaled() && name != "shopping-cart" {
            bail!("--users/--products/--sessions only apply to builtin:shopping-cart");
        }
        return Ok(Model::DbNet(net));
    }
    if c.scaled() {
        bail!("--users/--products/--sessions only apply to built-in models");
    }
    let text = fs::read_to_string(&c.model).with_context(|| format!("cannot read `{}`", c.model))?;
    parse_model(&text).map_err(|d| anyhow!("{}:{d}", c.model))
}

fn load_dbnet(c: &Common) -> Result<DbNet> {
    match load_model(c)? {
        Model::DbNet(n) => Ok(n),
        Model::Cpn(_) => bail!("`{}` is a cpn model; this command needs a dbnet model", c.model),
    }
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    }
    fs::write(p, text).with_context(|| format!("cannot write `{}`", p.display()))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).map_err(Into::into),
    }
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn validate(c: &Common, out: &mut dyn Write) -> Result<()> {
    let (violations, summary) = match load_model(c)? {
        Model::DbNet(n) => (n.validate(), format!("dbnet {}: {} places, {} transitions", n.name, n.places.len(), n.transitions.len())),
        Model::Cpn(n) => (n.validate(), format!("cpn {}: {} places, {} transitions", n.name, n.places.len(), n.transitions.len())),
    };
    for v in &violations {
        writeln!(out, "{v}")?;
    }
    if violations.is_empty() {
        writeln!(out, "valid {summary}")?;
        Ok(())
    } else {
        check_failed(format!("{} violation(s)", violations.len()))
    }
}

fn require_valid_dbnet(n: &DbNet) -> Result<()> {
    let v = n.validate();
    if v.is_empty() {
        return Ok(());
    }
    let list = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n");
    check_failed(format!("model is not valid:\n{list}"))
}

fn simulate(c: &Common, steps: usize, out: &mut dyn Write) -> Result<()> {
    let text = match load_model(c)? {
        Model::DbNet(n) => {
            require_valid_dbnet(&n)?;
            simulate_dbnet(&n, &n.initial, &c.policy(&n.fresh)?, steps, c.seed).render()
        }
        Model::Cpn(n) => simulate_cpn(&n, &c.policy(&n.fresh)?, steps, c.seed).render(),
    };
    emit(out, c.output.as_deref(), &text)
}

fn translate_cmd(c: &Common, out: &mut dyn Write) -> Result<()> {
    let n = load_dbnet(c)?;
    let t = translate(&n, &n.initial).map_err(|e| CheckFailed(e.to_string()))?;
    let dsl = print_cpn(&t.net);
    match &c.output {
        Some(p) => {
            emit(out, Some(p), &dsl)?;
            emit(out, Some(&sibling(p, "dot")), &cpn_to_dot(&t.net, Some(&t)))?;
            emit(out, Some(&sibling(p, "provenance.jsonl")), &t.provenance_jsonl())?;
            writeln!(out, "wrote {} ({} places, {} transitions)", p.display(), t.net.places.len(), t.net.transitions.len())?;
        }
        None => emit(out, None, &dsl)?,
    }
    Ok(())
}

fn cpn_of(c: &Common, translated: bool) -> Result<Option<(NuCpn, FreshPolicy)>> {
    match load_model(c)? {
        Model::Cpn(n) => {
            let fp = c.policy(&n.fresh)?;
            Ok(Some((n, fp)))
        }
        Model::DbNet(n) if translated => {
            let fp = c.policy(&n.fresh)?;
            let t = translate(&n, &n.initial).map_err(|e| CheckFailed(e.to_string()))?;
            Ok(Some((t.net, fp)))
        }
        Model::DbNet(_) => Ok(None),
    }
}

fn statespace(c: &Common, translated: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (text, states, edges, truncated) = match cpn_of(c, translated)? {
        Some((net, fp)) => {
            let e = net.cpn_build_lts(&fp, &c.limits());
            (e.lts.to_canonical_text(), e.lts.num_states(), e.lts.num_edges(), e.lts.truncated)
        }
        None => {
            let n = load_dbnet(c)?;
            require_valid_dbnet(&n)?;
            let l = n.build_lts(&n.initial, &c.policy(&n.fresh)?, &c.limits());
            (l.to_canonical_text(), l.num_states(), l.num_edges(), l.truncated)
        }
    };
    emit(out, c.output.as_deref(), &text)?;
    writeln!(err, "states: {states}\nedges: {edges}\ntruncated: {truncated}")?;
    if truncated {
        return check_failed(format!("state space truncated at {states} states; raise --max-states or --max-depth"));
    }
    Ok(())
}

/// Mutation names as printed by `Mutation`'s `Display`, plus `skip-last-constraint-stage`.
pub fn parse_mutation(s: &str, check_stages: usize) -> Result<Mutation> {
    if s == "skip-last-constraint-stage" {
        return Ok(Mutation::SkipConstraintStage(check_stages.saturating_sub(1)));
    }
    Mutation::from_str(s).map_err(|e| anyhow!(e))
}

/// Deterministic summary of a certification run; no timings.
pub fn result_text(c: &Certification) -> String {
    let mut s = String::new();
    let r = &c.result;
    writeln!(s, "verdict {}", r.verdict).unwrap();
    writeln!(s, "dbnet_states {}\ndbnet_edges {}", c.db_lts.num_states(), c.db_lts.num_edges()).unwrap();
    writeln!(s, "cpn_states {}\ncpn_edges {}", c.cpn_lts.num_states(), c.cpn_lts.num_edges()).unwrap();
    writeln!(s, "blocks {}\nrefinement_rounds {}", r.num_blocks, r.iterations).unwrap();
    writeln!(s, "priority_violations {}", c.audit.violations).unwrap();
    if c.refuted_on_prefix {
        writeln!(s, "refuted_on_prefix true").unwrap();
    }
    match &c.verified {
        Some(Ok(())) => writeln!(s, "verified transfer-conditions").unwrap(),
        Some(Err(e)) => writeln!(s, "verification-failed {e}").unwrap(),
        None => {}
    }
    if let Some(w) = &r.witness {
        writeln!(s, "witness {}", w.reason).unwrap();
    }
    s
}

fn certify(c: &Common, mutate: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let n = load_dbnet(c)?;
    require_valid_dbnet(&n)?;
    let fp = c.policy(&n.fresh)?;
    let mutation = mutate.map(|m| parse_mutation(m, check_order(&n.schema.constraints).len())).transpose()?;
    let started = std::time::Instant::now();
    let cert = certify_with(&n, &n.initial, &fp, &c.limits(), mutation).map_err(|e| CheckFailed(e.to_string()))?;
    log::info!("certification took {:?}", started.elapsed());
    let summary = result_text(&cert);
    out.write_all(summary.as_bytes())?;
    if let Some(p) = &c.output {
        write_file(&sibling(p, "result"), &summary)?;
        write_file(&sibling(p, "dbnet.lts"), &cert.db_lts.to_canonical_text())?;
        write_file(&sibling(p, "cpn.lts"), &cert.cpn_lts.to_canonical_text())?;
    }
    if let Some(w) = &cert.result.witness {
        let trace = render_witness(w, &cert.db_flat, &cert.cpn_flat);
        if let Some(p) = &c.output {
            write_file(&sibling(p, "trace"), &trace)?;
        } else {
            out.write_all(trace.as_bytes())?;
        }
    }
    match (cert.result.verdict, &cert.verified) {
        (Verdict::Bisimilar, Some(Ok(()))) => Ok(()),
        (Verdict::Bisimilar, _) => check_failed("relation failed the transfer-condition check"),
        (Verdict::NotBisimilar, _) => check_failed("not bisimilar"),
    }
}

fn export_dot(c: &Common, translated: bool, lts: bool, out: &mut dyn Write) -> Result<()> {
    let text = match (load_model(c)?, translated, lts) {
        (Model::DbNet(n), false, false) => dbnet_to_dot(&n),
        (Model::DbNet(n), true, false) => {
            let t = translate(&n, &n.initial).map_err(|e| CheckFailed(e.to_string()))?;
            cpn_to_dot(&t.net, Some(&t))
        }
        (Model::Cpn(n), _, false) => cpn_to_dot(&n, None),
        (Model::DbNet(n), false, true) => lts_to_dot(&n.build_lts(&n.initial, &c.policy(&n.fresh)?, &c.limits())),
        (_, _, true) => {
            let (net, fp) = cpn_of(c, true)?.expect("translated or cpn");
            lts_to_dot(&net.cpn_build_lts(&fp, &c.limits()).lts)
        }
    };
    emit(out, c.output.as_deref(), &text)
}

/// Runs one command; returns the process exit code. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let res = match &cli.command {
        Command::Validate(c) => validate(c, out),
        Command::Print(c) => load_model(c).and_then(|m| emit(out, c.output.as_deref(), &m.print())),
        Command::Simulate { common, steps } => simulate(common, *steps, out),
        Command::Translate(c) => translate_cmd(c, out),
        Command::Statespace { common, translated } => statespace(common, *translated, out, err),
        Command::Certify { common, mutate } => certify(common, mutate.as_deref(), out),
        Command::ExportDot { common, translated, lts } => export_dot(common, *translated, *lts, out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<CheckFailed>().is_some() {
                EXIT_CHECK
            } else {
                EXIT_USAGE
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_aliases() {
        assert_eq!(parse_mutation("skip-last-constraint-stage", 4).unwrap(), Mutation::SkipConstraintStage(3));
        assert_eq!(parse_mutation("skip-constraint-stage:1", 4).unwrap(), Mutation::SkipConstraintStage(1));
        assert!(parse_mutation("skip", 4).is_err());
    }

    #[test]
    fn fresh_flag_overrides_mode_only() {
        let c = Common::try_parse_from_args(&["m", "--fresh", "bounded:2"]);
        let model = FreshPolicy::default();
        let fp = c.policy(&model).unwrap();
        assert_eq!(fp.mode, FreshMode::Bounded(2));
        assert_eq!(FreshPolicy { mode: model.mode, ..fp }, model);
        assert!(Common::try_parse_from_args(&["m", "--fresh", "lots"]).policy(&model).is_err());
    }

    #[test]
    fn scale_flags_only_for_the_cart() {
        assert!(load_model(&Common::try_parse_from_args(&["builtin:shopping-cart", "--users", "2"])).is_ok());
        assert!(load_model(&Common::try_parse_from_args(&["builtin:bonus-desk", "--users", "2"])).is_err());
        assert!(load_model(&Common::try_parse_from_args(&["bonus-desk.dbn"])).is_ok());
    }

    impl Common {
        fn try_parse_from_args(args: &[&str]) -> Common {
            let argv = ["dbnet", "validate"].into_iter().chain(args.iter().copied());
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Validate(c) => c,
                _ => unreachable!(),
            }
        }
    }
}
