mod plot;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use varilet::io::{
    is_series_domain, lens_spec_to_json, parse_basis, parse_coefficients, parse_field, parse_lens_spec,
    write_field, BasisDoc, CutSpec, FieldFormat, LensSpec, SeedSpec,
};
use varilet::lens::Direction;
use varilet::transform::transform_factored;
use varilet::ttv::accurate_sum;
use varilet::verify::{check_lemmas_on, check_theorem1_on, check_with_fault, fuzz, Fault};
use varilet::{factorize, filter, ttv, FilterCoefficients, ScalarField, TransformError, VariletBasis};

#[derive(Parser, Debug)]
#[command(
    name = "varilet",
    version,
    about = "Varilet transforms of scalar fields on graphs"
)]
struct Cli {
    /// Print stage timings to stderr.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the topological total variation of a field.
    Ttv {
        /// Series (CSV) or field document (JSON).
        #[arg(long)]
        input: PathBuf,
    },
    /// Compute a varilet basis and write it as a basis document.
    Transform {
        /// Series (CSV) or field document (JSON).
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        lens: LensArgs,
        /// Basis document path; an amplitude table is printed either way.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write an SVG of the basis next to the output.
        #[arg(long, requires = "output")]
        plot: bool,
    },
    /// Filter a basis document with coefficients and write the result.
    Filter {
        /// Basis document written by `transform`.
        #[arg(long)]
        input: PathBuf,
        /// A file of `index,value` rows or a list, or an inline list such as `2,0`.
        #[arg(long, allow_hyphen_values = true)]
        coeffs: String,
        /// Field path (`.csv` writes a series); stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip the comparison of the two evaluation paths.
        #[arg(long)]
        no_self_check: bool,
        /// Also write an SVG of the filtered field next to the output.
        #[arg(long, requires = "output")]
        plot: bool,
    },
    /// Check the transform of a field, or of a generated corpus with `--fuzz`.
    Verify {
        /// Series (CSV) or field document (JSON).
        #[arg(long, required_unless_present = "fuzz")]
        input: Option<PathBuf>,
        #[command(flatten)]
        lens: LensArgs,
        /// Random coefficient vectors per basis.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Seed for coefficient draws and generated corpora.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the basis before checking (for example `leak-gamma`).
        #[arg(long, value_parser = parse_fault, conflicts_with = "fuzz")]
        fault: Option<Fault>,
        /// Number of random fields to generate instead of reading `--input`.
        #[arg(long, conflicts_with = "input")]
        fuzz: Option<usize>,
        /// Lenses per generated field.
        #[arg(long, default_value_t = 3)]
        lenses: usize,
        /// Largest generated domain.
        #[arg(long, default_value_t = 200)]
        max_vertices: usize,
        /// Write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Resolve a lens spec or builder into an explicit lens document.
    LensBuild {
        /// Series (CSV) or field document (JSON).
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        lens: LensArgs,
        /// Lens document path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw a field or a basis document as SVG.
    Plot {
        /// Field, series, or basis document.
        #[arg(long)]
        input: PathBuf,
        /// SVG path.
        #[arg(long)]
        output: PathBuf,
    },
}

/// Lens source. Without any of these the trivial lens is used.
#[derive(Args, Debug, Clone)]
struct LensArgs {
    /// Lens document.
    #[arg(long, conflicts_with_all = ["branch", "cut"])]
    lens: Option<PathBuf>,
    /// Branch lens keeping extrema of at least this persistence.
    #[arg(long, conflicts_with = "cut")]
    branch: Option<f64>,
    /// Threshold cut `LEVEL:up|down:VERTEX`, seeded at a domain vertex. Repeatable.
    #[arg(long, value_parser = parse_cut, allow_hyphen_values = true)]
    cut: Vec<CutSpec>,
}

fn parse_cut(text: &str) -> Result<CutSpec, String> {
    let parts: Vec<&str> = text.splitn(3, ':').collect();
    let [level, direction, vertex] = parts.as_slice() else {
        return Err("expected LEVEL:up|down:VERTEX".into());
    };
    let level: f64 = level.parse().map_err(|_| format!("`{level}` is not a number"))?;
    let direction = match *direction {
        "up" => Direction::Up,
        "down" => Direction::Down,
        other => return Err(format!("direction `{other}` is not `up` or `down`")),
    };
    Ok(CutSpec {
        level,
        direction,
        seed: SeedSpec::DomainVertex {
            domain_vertex: vertex.to_string(),
        },
    })
}

fn parse_fault(text: &str) -> Result<Fault, String> {
    Fault::from_name(text).ok_or_else(|| {
        let names: Vec<&str> = Fault::ALL.iter().map(|f| f.name()).collect();
        format!("unknown fault; one of {}", names.join(", "))
    })
}

const VERIFICATION: u8 = 1;
const PARSE: u8 = 2;
const LENS: u8 = 3;
const COEFFICIENTS: u8 = 4;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn transform_failure(err: TransformError) -> Failure {
    let code = match &err {
        TransformError::Lens(_) => LENS,
        TransformError::CoefficientCount { .. } | TransformError::NonFiniteCoefficient(_) => COEFFICIENTS,
        TransformError::PathDisagreement { .. } => VERIFICATION,
        _ => PARSE,
    };
    Failure::new(code, err.to_string())
}

struct Clock {
    on: bool,
    last: Instant,
}

impl Clock {
    fn new(on: bool) -> Self {
        Self {
            on,
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        if self.on {
            eprintln!("{stage}: {:.3} s", self.last.elapsed().as_secs_f64());
        }
        self.last = Instant::now();
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(PARSE, format!("{}: {e}", path.display())))
}

fn check_output(path: &Path) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(Failure::new(
            PARSE,
            format!("{}: directory does not exist", parent.display()),
        ));
    }
    if path.is_dir() {
        return Err(Failure::new(PARSE, format!("{}: is a directory", path.display())));
    }
    Ok(())
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::new(PARSE, format!("{}: {e}", path.display()));
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn load_field(path: &Path) -> Result<(ScalarField, FieldFormat), Failure> {
    let text = read(path)?;
    parse_field(&text).map_err(|e| Failure::new(PARSE, format!("{}: {e}", path.display())))
}

impl LensArgs {
    fn spec(&self) -> Result<LensSpec, Failure> {
        if let Some(path) = &self.lens {
            let text = read(path)?;
            return parse_lens_spec(&text)
                .map_err(|e| Failure::new(PARSE, format!("{}: {e}", path.display())));
        }
        if let Some(min_amplitude) = self.branch {
            return Ok(LensSpec::Branch { min_amplitude });
        }
        if !self.cut.is_empty() {
            return Ok(LensSpec::Threshold {
                cuts: self.cut.clone(),
            });
        }
        Ok(LensSpec::Trivial)
    }
}

fn build_basis(field: &ScalarField, spec: &LensSpec, clock: &mut Clock) -> Result<VariletBasis, Failure> {
    let (ms, mf) = factorize(field);
    clock.lap("factorize");
    let lens = spec
        .resolve(&ms, &mf)
        .map_err(|e| Failure::new(LENS, e.to_string()))?;
    clock.lap("lens");
    let basis = transform_factored(field, Arc::new(ms), Arc::new(mf), &lens).map_err(transform_failure)?;
    clock.lap("transform");
    Ok(basis)
}

/// `x` rounded to 12 significant digits, printed without trailing zeros.
fn significant(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{}", rounded + 0.0)
    }
}

fn cmd_ttv(input: &Path, clock: &mut Clock) -> Result<(), Failure> {
    let (field, _) = load_field(input)?;
    clock.lap("read");
    let (ms, _) = factorize(&field);
    clock.lap("factorize");
    println!("{}", significant(ttv(&ms)));
    Ok(())
}

fn print_amplitudes(basis: &VariletBasis) {
    let lens = basis.lens();
    println!("{:>5}  {:>22}  {:>22}", "index", "amplitude", "boundary level");
    for (i, a) in basis.amplitudes().iter().enumerate() {
        let b = lens.boundary_level(i).map_or("-".to_string(), |b| format!("{b}"));
        println!("{:>5}  {:>22}  {:>22}", i + 1, format!("{a}"), b);
    }
}

fn cmd_transform(
    input: &Path,
    lens: &LensArgs,
    output: Option<&Path>,
    with_plot: bool,
    clock: &mut Clock,
) -> Result<(), Failure> {
    if let Some(out) = output {
        check_output(out)?;
    }
    let spec = lens.spec()?;
    let (field, _) = load_field(input)?;
    clock.lap("read");
    let basis = build_basis(&field, &spec, clock)?;
    print_amplitudes(&basis);
    let total = ttv(basis.middle_space());
    let sum = accurate_sum(basis.amplitudes().iter().copied());
    println!(
        "sum of amplitudes {}  ttv {}",
        significant(sum),
        significant(total)
    );
    if (sum - total).abs() > 1e-12 * total.abs().max(f64::MIN_POSITIVE) {
        return Err(Failure::new(
            VERIFICATION,
            format!("amplitudes sum to {sum}, but ttv is {total}"),
        ));
    }
    if let Some(out) = output {
        write_atomic(out, &BasisDoc::new(&basis).to_json())?;
        if with_plot {
            write_atomic(
                &out.with_extension("svg"),
                &plot::render(&plot::basis_panels(&basis)),
            )?;
        }
        clock.lap("write");
    }
    Ok(())
}

/// A coefficient file if `source` names one, an inline list otherwise.
fn load_coefficients(source: &str) -> Result<Vec<f64>, Failure> {
    let path = Path::new(source);
    let text = if path.is_file() {
        read(path)?
    } else {
        source.to_string()
    };
    parse_coefficients(&text).map_err(|e| Failure::new(COEFFICIENTS, format!("coefficients: {e}")))
}

/// Rebuilds the basis a document describes and checks that it matches.
fn basis_from_document(path: &Path, clock: &mut Clock) -> Result<VariletBasis, Failure> {
    let text = read(path)?;
    let doc = parse_basis(&text).map_err(|e| Failure::new(PARSE, format!("{}: {e}", path.display())))?;
    let field = doc
        .field
        .to_field()
        .map_err(|e| Failure::new(PARSE, format!("{}: {e}", path.display())))?;
    clock.lap("read");
    let basis = build_basis(&field, &doc.lens, clock)?;
    if basis.amplitudes() != doc.amplitudes().as_slice() {
        return Err(Failure::new(
            PARSE,
            format!(
                "{}: amplitudes do not match the field and lens it records",
                path.display()
            ),
        ));
    }
    Ok(basis)
}

fn cmd_filter(
    input: &Path,
    coeffs: &str,
    output: Option<&Path>,
    self_check: bool,
    with_plot: bool,
    clock: &mut Clock,
) -> Result<(), Failure> {
    if let Some(out) = output {
        check_output(out)?;
    }
    let values = load_coefficients(coeffs)?;
    let basis = basis_from_document(input, clock)?;
    let coeffs = FilterCoefficients::new(values, basis.len()).map_err(transform_failure)?;
    let filtered = filter(&basis, &coeffs, self_check).map_err(transform_failure)?;
    clock.lap("filter");
    let field = filtered
        .canonical(&basis)
        .map_err(|e| Failure::new(VERIFICATION, e.to_string()))?;
    let series_out = match output {
        Some(out) => out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
        None => is_series_domain(field.graph()),
    };
    let format = if series_out {
        FieldFormat::Series
    } else {
        FieldFormat::Document
    };
    let text = write_field(&field, format);
    let inserted = field.graph().vertex_count() - basis.field().graph().vertex_count();
    if series_out && inserted > 0 && field.graph().chain_order().is_some() {
        eprintln!("note: the series includes {inserted} inserted breakpoints as extra samples");
    }
    match output {
        Some(out) => {
            write_atomic(out, &text)?;
            if with_plot {
                let ms = factorize(&field).0;
                write_atomic(
                    &out.with_extension("svg"),
                    &plot::render(&plot::field_panels(&field, &ms)),
                )?;
            }
            let total: f64 = coeffs.values().iter().map(|a| a.abs()).sum();
            println!(
                "wrote {} ({} vertices), ttv {}",
                out.display(),
                field.graph().vertex_count(),
                significant(total)
            );
            if let Some(d) = filtered.path_deviation {
                println!("evaluation paths agree within {d:e}");
            }
        }
        None => print!("{text}"),
    }
    clock.lap("write");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    input: Option<&Path>,
    lens: &LensArgs,
    trials: usize,
    seed: u64,
    fault: Option<Fault>,
    fuzz_fields: Option<usize>,
    lenses: usize,
    max_vertices: usize,
    output: Option<&Path>,
    clock: &mut Clock,
) -> Result<(), Failure> {
    if let Some(out) = output {
        check_output(out)?;
    }
    let report = if let Some(n) = fuzz_fields {
        fuzz(seed, n, lenses, max_vertices, trials)
    } else {
        let input = input.expect("clap requires --input without --fuzz");
        let spec = lens.spec()?;
        let (field, _) = load_field(input)?;
        clock.lap("read");
        match fault {
            Some(fault) => {
                let (ms, mf) = factorize(&field);
                let resolved = spec
                    .resolve(&ms, &mf)
                    .map_err(|e| Failure::new(LENS, e.to_string()))?;
                check_with_fault(&field, &resolved, fault, trials, seed)
                    .map_err(|e| Failure::new(PARSE, format!("cannot inject {}: {e}", fault.name())))?
                    .aggregate()
            }
            None => {
                let basis = build_basis(&field, &spec, clock)?;
                let mut report = check_lemmas_on(&basis, seed);
                report.extend(check_theorem1_on(&basis, trials, seed));
                report.cases = 1;
                report.aggregate()
            }
        }
    };
    clock.lap("verify");
    print!("{report}");
    if let Some(out) = output {
        write_atomic(out, &format!("{}\n", report.to_json()))?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::new(
            VERIFICATION,
            format!("failed: {}", failed.join(", ")),
        ))
    }
}

fn cmd_lens_build(
    input: &Path,
    lens: &LensArgs,
    output: Option<&Path>,
    clock: &mut Clock,
) -> Result<(), Failure> {
    if let Some(out) = output {
        check_output(out)?;
    }
    let spec = lens.spec()?;
    let (field, _) = load_field(input)?;
    clock.lap("read");
    let (ms, mf) = factorize(&field);
    clock.lap("factorize");
    let resolved = spec
        .resolve(&ms, &mf)
        .map_err(|e| Failure::new(LENS, e.to_string()))?;
    clock.lap("lens");
    let text = lens_spec_to_json(&LensSpec::explicit(&ms, &resolved));
    match output {
        Some(out) => {
            write_atomic(out, &text)?;
            println!("wrote {} ({} regions)", out.display(), resolved.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_plot(input: &Path, output: &Path, clock: &mut Clock) -> Result<(), Failure> {
    check_output(output)?;
    let text = read(input)?;
    let is_basis = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .is_some_and(|v| v.get("varilets").is_some());
    let panels = if is_basis {
        plot::basis_panels(&basis_from_document(input, clock)?)
    } else {
        let (field, _) =
            parse_field(&text).map_err(|e| Failure::new(PARSE, format!("{}: {e}", input.display())))?;
        let ms = factorize(&field).0;
        plot::field_panels(&field, &ms)
    };
    write_atomic(output, &plot::render(&panels))?;
    clock.lap("plot");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut clock = Clock::new(cli.timings);
    match cli.command {
        Command::Ttv { input } => cmd_ttv(&input, &mut clock),
        Command::Transform {
            input,
            lens,
            output,
            plot,
        } => cmd_transform(&input, &lens, output.as_deref(), plot, &mut clock),
        Command::Filter {
            input,
            coeffs,
            output,
            no_self_check,
            plot,
        } => cmd_filter(
            &input,
            &coeffs,
            output.as_deref(),
            !no_self_check,
            plot,
            &mut clock,
        ),
        Command::Verify {
            input,
            lens,
            trials,
            seed,
            fault,
            fuzz,
            lenses,
            max_vertices,
            output,
        } => cmd_verify(
            input.as_deref(),
            &lens,
            trials,
            seed,
            fault,
            fuzz,
            lenses,
            max_vertices,
            output.as_deref(),
            &mut clock,
        ),
        Command::LensBuild { input, lens, output } => {
            cmd_lens_build(&input, &lens, output.as_deref(), &mut clock)
        }
        Command::Plot { input, output } => cmd_plot(&input, &output, &mut clock),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
