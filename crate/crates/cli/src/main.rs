use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use formprime::arith::{self, PrimeTable};
use formprime::compose::{self, Composer, DEFAULT_COMPOSER};
use formprime::equiv::{Classifier, EquivClass};
use formprime::oracle::Oracle;
use formprime::qform::{self, Form};
use formprime::report::{self, TableRun};
use formprime::search::{self, SearchConfig, DEFAULT_BOUND, DEFAULT_F_MAX};
use formprime::{genus, ClassGroup, Error};

const EXIT_DOMAIN: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Positive definite binary quadratic forms that represent almost the same primes.
#[derive(Parser, Debug)]
#[command(name = "formprime", version)]
struct Cli {
    /// Worker threads for the search and the sieves (0 = all cores).
    #[arg(long, global = true, env = "FORMPRIME_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Composition algorithm.
    #[arg(long, global = true, default_value = DEFAULT_COMPOSER)]
    composer: String,

    /// Render tables as aligned text instead of TSV.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Reduce a form and print its discriminant decomposition D = d·f².
    Reduce {
        #[arg(value_name = "A,B,C", allow_hyphen_values = true)]
        form: Form,
        /// GL₂ reduction (0 ≤ b) instead of SL₂.
        #[arg(long)]
        gl2: bool,
    },
    /// Class group of a discriminant, listing each reduced form with its order.
    Classgroup {
        #[arg(allow_negative_numbers = true)]
        disc: i64,
    },
    /// Genus field generators, and optionally the signature of a form.
    Genus {
        #[arg(allow_negative_numbers = true)]
        disc: i64,
        #[arg(long, value_name = "A,B,C")]
        form: Option<Form>,
    },
    /// r-lifts of a form to discriminant r²D.
    Lift {
        #[arg(value_name = "A,B,C")]
        form: Form,
        #[arg(long, default_value_t = 2)]
        r: u64,
    },
    /// Discriminants whose class group has type dividing (2,…,2,4).
    Search {
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write search.tsv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equivalence classes among the forms of the given discriminants.
    Pairs {
        #[arg(required = true, allow_negative_numbers = true)]
        discs: Vec<i64>,
    },
    /// Classify the search hits and write table01.tsv … table16.tsv.
    Tables {
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value = "tables")]
        out: PathBuf,
    },
    /// Sieve the members of a class and compare their represented primes.
    Verify {
        /// `T.n` for class n of table T, or a file with one form per line.
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 1_000_000)]
        limit: u64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// The first primes represented by exactly one of two forms.
    Falsify {
        #[arg(value_name = "A,B,C")]
        first: Form,
        #[arg(value_name = "A,B,C")]
        second: Form,
        #[arg(long, default_value_t = 1_000_000)]
        limit: u64,
    },
    /// Observed share of primes represented by a form against its density.
    Density {
        #[arg(value_name = "A,B,C")]
        form: Form,
        #[arg(long, default_value_t = 1_000_000)]
        limit: u64,
    },
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Largest |d| to scan.
    #[arg(long, default_value_t = DEFAULT_BOUND)]
    bound: u64,
    /// Largest conductor tried for each fundamental hit.
    #[arg(long, default_value_t = DEFAULT_F_MAX)]
    f_max: u64,
    /// Scan up to B = 80604484, ignoring --bound.
    #[arg(long = "full-B")]
    full_b: bool,
}

impl SearchArgs {
    fn config(&self, jobs: usize, checkpoint: Option<PathBuf>) -> SearchConfig {
        SearchConfig {
            bound_d: self.bound,
            f_max: self.f_max,
            full_b: self.full_b,
            workers: jobs,
            checkpoint,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.jobs > 0 {
        // The search builds its own pool from --jobs; this one covers the sieves.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::from(EXIT_RESOURCE);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("formprime: {e}");
            ExitCode::from(match e {
                Error::Resource(_) | Error::Io(_) => EXIT_RESOURCE,
                _ => EXIT_DOMAIN,
            })
        }
    }
}

/// Accepts D or |D|; the tables print |D|.
fn negative(disc: i64) -> i64 {
    -disc.abs()
}

fn tsv(out: String, pretty: bool) -> String {
    if pretty {
        report::pretty(&out)
    } else {
        out
    }
}

fn run(cli: &Cli) -> formprime::Result<String> {
    let composer: Arc<dyn Composer> = compose::composer(&cli.composer)?;
    let mut s = String::new();
    match &cli.cmd {
        Cmd::Reduce { form, gl2 } => {
            let r = if *gl2 {
                qform::reduce_gl2(form)?
            } else {
                qform::reduce_sl2(form)?
            };
            let disc = r.discriminant();
            let (d, f) = arith::fundamental_decomposition(disc)?;
            writeln!(s, "{}\tD={disc}\td={d}\tf={f}", r.form()).unwrap();
        }
        Cmd::Classgroup { disc } => {
            let g = ClassGroup::with_composer(negative(*disc), composer)?;
            writeln!(s, "D={}\th={}\ttype={}", g.disc(), g.h(), g.group_type()?).unwrap();
            for q in g.forms() {
                writeln!(s, "{q}\t{}", g.order_of(q)?).unwrap();
            }
        }
        Cmd::Genus { disc, form } => {
            let basis = genus::genus_basis_of(negative(*disc))?;
            writeln!(
                s,
                "D={}\td={}\tf={}\t{}",
                basis.disc, basis.d, basis.f, basis.span
            )
            .unwrap();
            if let Some(q) = form {
                let primes = PrimeTable::new(100_000)?;
                let sig = genus::signature(q, &basis, &primes)?;
                let vals: Vec<String> = sig.values.iter().map(i8::to_string).collect();
                writeln!(
                    s,
                    "{q}\tp={}\tsignature=({})\tfixed={}",
                    sig.witness_prime,
                    vals.join(","),
                    sig.fixed_span(&basis)
                )
                .unwrap();
            }
        }
        Cmd::Lift { form, r } => {
            let cl = classifier(composer)?;
            let lifts = if *r == 2 {
                cl.two_lift(form)?.into_iter().collect()
            } else {
                cl.lifts(form, *r)?
            };
            if lifts.is_empty() {
                writeln!(s, "no {r}-lift of {form}").unwrap();
            }
            for q in lifts {
                writeln!(s, "{q}\tD={}", q.discriminant()).unwrap();
            }
        }
        Cmd::Search {
            search,
            checkpoint,
            out,
        } => {
            let cfg = search.config(cli.jobs, checkpoint.clone());
            let res = search::run(&cfg)?;
            eprintln!(
                "{} fundamental, {} nonmaximal; conductors beyond {} are impossible{}",
                res.fundamental.len(),
                res.orders.len(),
                res.conductor_cap,
                if res.complete_in_f(cfg.f_max) {
                    String::new()
                } else {
                    format!(
                        " (f_max {} is below that: order list may be incomplete)",
                        cfg.f_max
                    )
                }
            );
            let mut body = String::from("d\tf\tD\ttype\n");
            for h in res.all() {
                body.push_str(&h.to_tsv());
                body.push('\n');
            }
            let body = tsv(body, cli.pretty);
            match out {
                Some(dir) => write_file(&dir.join("search.tsv"), &body)?,
                None => s = body,
            }
        }
        Cmd::Pairs { discs } => {
            let discs: Vec<i64> = discs.iter().map(|&d| negative(d)).collect();
            let classes = classifier(composer)?.build_classes(&discs)?;
            for c in &classes {
                writeln!(s, "{c}\tE={}", report::prime_set(&c.exceptional())).unwrap();
            }
        }
        Cmd::Tables { search, out } => {
            let run = TableRun::new(&search.config(cli.jobs, None), composer)?;
            fs::create_dir_all(out)?;
            for (name, body) in run.files() {
                write_file(&out.join(&name), &tsv(body, cli.pretty))?;
            }
            writeln!(s, "{}", run.summary()).unwrap();
        }
        Cmd::Verify {
            class,
            limit,
            search,
        } => {
            let oracle = Oracle::new(*limit)?;
            let c = resolve_class(class, search, cli.jobs, composer)?;
            let rep = oracle.verify_class(&c)?;
            writeln!(s, "{c}").unwrap();
            writeln!(s, "{rep}").unwrap();
            if !rep.pass() {
                return Err(Error::Domain(format!("class {class} failed verification")));
            }
        }
        Cmd::Falsify {
            first,
            second,
            limit,
        } => {
            let ps = Oracle::new(*limit)?.falsify_pair(first, second)?;
            if ps.is_empty() {
                writeln!(s, "no distinguishing prime up to {limit}").unwrap();
            }
            for p in ps {
                writeln!(s, "{p}").unwrap();
            }
        }
        Cmd::Density { form, limit } => {
            let (obs, exp) = Oracle::new(*limit)?.density_check(form)?;
            writeln!(
                s,
                "observed={obs:.6}\texpected={exp:.6}\tratio={:.4}",
                obs / exp
            )
            .unwrap();
        }
    }
    Ok(s)
}

fn classifier(composer: Arc<dyn Composer>) -> formprime::Result<Classifier> {
    Ok(Classifier::new(
        Arc::new(PrimeTable::new(100_000)?),
        composer,
    ))
}

fn resolve_class(
    id: &str,
    search: &SearchArgs,
    jobs: usize,
    composer: Arc<dyn Composer>,
) -> formprime::Result<EquivClass> {
    if let Some((t, n)) = id.split_once('.') {
        if let (Ok(t), Ok(n)) = (t.parse::<u8>(), n.parse::<usize>()) {
            let run = TableRun::new(&search.config(jobs, None), composer)?;
            return run
                .class(t, n)
                .cloned()
                .ok_or_else(|| Error::Domain(format!("no class {n} in table {t}")));
        }
    }
    let text = fs::read_to_string(id)?;
    let forms = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse::<Form>)
        .collect::<formprime::Result<Vec<_>>>()?;
    classifier(composer)?.make_class(&forms)
}

fn write_file(path: &Path, body: &str) -> formprime::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body)?;
    Ok(())
}
