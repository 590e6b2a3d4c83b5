mod table;
mod units;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use hgspdc::entanglement::{csb_entanglement_witness, parity_block_check, purity, reduce};
use hgspdc::gaussian_modes::{hg_field, BeamGeometry};
use hgspdc::oracle::{coeff_quadrature_2d, coeff_quadrature_4d, QuadratureSpec};
use hgspdc::spdc_coeffs::{
    build_state, coeff_exact, coeff_thin, conservation_allowed, cumulative_probabilities, CALIBRATION,
};
use hgspdc::state_engineering::{bell_recipe, nonmax_pipeline, BellSource, BellState, FirstOrderState, Pipeline};
use hgspdc::{CoeffKey, CrystalConfig, Method, ModeIndex, PumpSpec};

use table::{sci, Table};
use units::{parse_angle, parse_length, Angle, Length};

#[derive(Debug, Parser)]
#[command(name = "hgspdc", version, about = "Hermite-Gauss mode content of SPDC photon pairs")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Single pump mode `n m`.
    #[arg(long, global = true, num_args = 2, value_names = ["N", "M"], conflicts_with = "pump_superpose")]
    pump: Option<Vec<u32>>,
    /// Pump superposition `n,m,re,im;...`; weights are normalized.
    #[arg(long, global = true)]
    pump_superpose: Option<String>,
    #[arg(long, global = true, value_parser = parse_length, default_value = "351nm")]
    lambda_p: Length,
    #[arg(long, global = true, value_parser = parse_length, default_value = "0.1mm")]
    w0p: Length,
    #[arg(long, global = true, value_parser = parse_length, default_value = "1mm")]
    length: Length,
    #[arg(long, global = true)]
    max_order: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// `text` writes a JSON document.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    include_zeros: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Thin,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Thin => Method::Thin,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BellArg {
    #[value(name = "phi+")]
    PhiPlus,
    #[value(name = "phi-")]
    PhiMinus,
    #[value(name = "psi+")]
    PsiPlus,
    #[value(name = "psi-")]
    PsiMinus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    Hg00,
    Hg11,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gh,
    Cartesian,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allowed coefficients up to the truncation order.
    Coeffs,
    /// Cumulative generation probability by order for several pump waists.
    Figure2 {
        #[arg(long, value_parser = parse_length, value_delimiter = ',', default_value = "1mm,0.1mm,0.05mm")]
        widths: Vec<Length>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,thin")]
        methods: Vec<MethodArg>,
    },
    /// Exact and thin-crystal amplitudes for HG02 and HG20 pumps.
    Table1,
    /// Signal reduced density matrix of the normalized truncated state.
    Density,
    /// Purity, parity blocks and Cauchy-Schwarz witness.
    EntangleCheck,
    /// First-order Bell state from a Gaussian or HG11 pump.
    Bell {
        #[arg(value_enum)]
        target: BellArg,
        #[arg(value_enum, default_value_t = SourceArg::Hg00)]
        source: SourceArg,
    },
    /// Tunable entangled state from an HG02/HG20 pump superposition.
    Nonmax {
        #[arg(long, value_parser = parse_angle)]
        theta: Angle,
        #[arg(long, value_parser = parse_angle, default_value = "0rad")]
        phi: Angle,
    },
    /// Closed form against direct quadrature, key by key.
    OracleCompare {
        #[arg(long, value_enum, default_value_t = SchemeArg::Gh)]
        scheme: SchemeArg,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        target_rel_error: Option<f64>,
        /// Integrate the reduced 2D form instead of the full 4D overlap.
        #[arg(long)]
        reduced: bool,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Field of one HG mode on a square grid.
    ModeGrid {
        #[arg(long, num_args = 2, value_names = ["N", "M"], default_values_t = [0, 0])]
        mode: Vec<u32>,
        #[arg(long, value_parser = parse_length, default_value = "0m")]
        z: Length,
        /// Half-width of the grid; defaults to three waists.
        #[arg(long, value_parser = parse_length)]
        extent: Option<Length>,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Library(hgspdc::Error),
    SelfCheck(String),
    Io(std::io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Library(hgspdc::Error::Range(_)) => 3,
            Failure::Library(hgspdc::Error::InvalidInput(_) | hgspdc::Error::Domain(_)) => 2,
            Failure::Library(_) | Failure::Io(_) => 1,
            Failure::SelfCheck(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Library(e) => write!(f, "{e}"),
            Failure::SelfCheck(m) => write!(f, "self-check failed: {m}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<hgspdc::Error> for Failure {
    fn from(e: hgspdc::Error) -> Self {
        Failure::Library(e)
    }
}

type Outcome<T> = Result<T, Failure>;

struct Context {
    config: CrystalConfig,
    pump: PumpSpec,
    method: Method,
    max_order: Option<u32>,
    include_zeros: bool,
}

impl Context {
    fn from_args(args: &RunArgs) -> Outcome<Self> {
        let config = CrystalConfig::new(args.length.0, args.lambda_p.0, args.w0p.0).map_err(|e| Failure::Config(e.to_string()))?;
        let pump = match (&args.pump, &args.pump_superpose) {
            (_, Some(text)) => parse_superposition(text)?,
            (Some(nm), None) => PumpSpec::single(ModeIndex::new(nm[0], nm[1])),
            (None, None) => PumpSpec::single(ModeIndex::new(0, 0)),
        };
        Ok(Self { config, pump, method: args.method.into(), max_order: args.max_order, include_zeros: args.include_zeros })
    }

    fn max_order(&self, default: u32) -> u32 {
        self.max_order.unwrap_or(default)
    }

    /// Header metadata shared by every command.
    fn header(&self, command: &str, table: &mut Table) {
        table.meta("command", command);
        table.meta("pump", self.pump.to_string());
        table.meta("lambda_p_m", sci(self.config.pump_wavelength()));
        table.meta("w0p_m", sci(self.config.pump_waist()));
        table.meta("length_m", sci(self.config.length()));
        table.meta("focusing_a", sci(self.config.param_a()));
        table.meta("method", self.method.to_string());
        table.meta("calibration", sci(CALIBRATION));
    }
}

fn parse_superposition(text: &str) -> Outcome<PumpSpec> {
    let components = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let f: Vec<&str> = item.split(',').map(str::trim).collect();
            let bad = || Failure::Config(format!("pump component `{item}` must be `n,m,re,im`"));
            if f.len() != 4 {
                return Err(bad());
            }
            let n = f[0].parse().map_err(|_| bad())?;
            let m = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            Ok((ModeIndex::new(n, m), Complex64::new(re, im)))
        })
        .collect::<Outcome<Vec<_>>>()?;
    PumpSpec::normalized(components).map_err(|e| Failure::Config(e.to_string()))
}

fn single_pump(ctx: &Context) -> Outcome<ModeIndex> {
    ctx.pump
        .single_mode()
        .ok_or_else(|| Failure::Config("this command needs a single pump mode (`--pump n m`)".into()))
}

fn coeffs(ctx: &Context) -> Outcome<Table> {
    let max_order = ctx.max_order(hgspdc::spdc_coeffs::DEFAULT_MAX_ORDER);
    let state = build_state(&ctx.config, &ctx.pump, max_order, ctx.method)?;
    let mut t = Table::new(&["j", "k", "u", "t", "amplitude_re", "amplitude_im", "probability"]);
    ctx.header("coeffs", &mut t);
    t.meta("max_order", max_order.to_string());
    let keys: Vec<CoeffKey> = if ctx.include_zeros {
        CoeffKey::up_to_order(max_order).collect()
    } else {
        state.amplitudes().keys().copied().collect()
    };
    for key in keys {
        let a = state.amplitude(key);
        t.push(vec![key.j.into(), key.k.into(), key.u.into(), key.t.into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
    }
    Ok(t)
}

fn figure2(ctx: &Context, widths: &[Length], methods: &[MethodArg]) -> Outcome<Table> {
    let max_order = ctx.max_order(20);
    let mut t = Table::new(&["w0p", "order", "cumulative_probability", "method"]);
    ctx.header("figure2", &mut t);
    let methods: Vec<Method> = methods.iter().map(|&m| m.into()).collect();
    t.meta("method", methods.iter().map(Method::to_string).collect::<Vec<_>>().join(", "));
    t.meta("w0p_m", widths.iter().map(|w| sci(w.0)).collect::<Vec<_>>().join(" "));
    let focusing = widths
        .iter()
        .map(|w| CrystalConfig::new(ctx.config.length(), ctx.config.pump_wavelength(), w.0).map(|c| sci(c.param_a())))
        .collect::<hgspdc::Result<Vec<_>>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    t.meta("focusing_a", focusing.join(" "));
    t.meta("max_order", max_order.to_string());
    for w in widths {
        let config = CrystalConfig::new(ctx.config.length(), ctx.config.pump_wavelength(), w.0)
            .map_err(|e| Failure::Config(e.to_string()))?;
        for &method in &methods {
            let state = build_state(&config, &ctx.pump, max_order, method)?;
            for (order, p) in cumulative_probabilities(&state).into_iter().enumerate() {
                t.push(vec![w.0.into(), (order as u32).into(), p.into(), method.to_string().into()]);
            }
        }
    }
    Ok(t)
}

fn table1(ctx: &Context) -> Outcome<Table> {
    let mut t = Table::new(&["pump_n", "pump_m", "j", "k", "u", "t", "exact", "thin", "exact_probability", "thin_probability"]);
    ctx.header("table1", &mut t);
    t.meta("pump", "HG02; HG20");
    t.meta("method", "exact, thin");
    let rows = [
        (ModeIndex::new(0, 2), [CoeffKey::new(0, 0, 0, 2), CoeffKey::new(0, 1, 0, 1), CoeffKey::new(0, 2, 0, 0)]),
        (ModeIndex::new(2, 0), [CoeffKey::new(0, 0, 2, 0), CoeffKey::new(1, 0, 1, 0), CoeffKey::new(2, 0, 0, 0)]),
    ];
    for (pump, keys) in rows {
        for key in keys {
            let exact = coeff_exact(&ctx.config, pump, key)?;
            let thin = coeff_thin(&ctx.config, pump, key)?;
            t.push(vec![
                pump.n.into(),
                pump.m.into(),
                key.j.into(),
                key.k.into(),
                key.u.into(),
                key.t.into(),
                exact.into(),
                thin.into(),
                (exact * exact).into(),
                (thin * thin).into(),
            ]);
        }
    }
    Ok(t)
}

fn reduced(ctx: &Context) -> Outcome<hgspdc::entanglement::ReducedDensity> {
    let max_order = ctx.max_order(hgspdc::spdc_coeffs::DEFAULT_MAX_ORDER);
    let state = build_state(&ctx.config, &ctx.pump, max_order, ctx.method)?.normalized()?;
    Ok(reduce(&state)?)
}

fn witness_text(w: Option<(ModeIndex, ModeIndex)>) -> String {
    w.map_or_else(|| "none".to_owned(), |(a, b)| format!("{a} {b}"))
}

fn density(ctx: &Context) -> Outcome<Table> {
    let rho = reduced(ctx)?;
    let verdict = csb_entanglement_witness(&rho);
    let mut t = Table::new(&["row", "col", "value", "value_im"]);
    ctx.header("density", &mut t);
    t.meta("max_order", ctx.max_order(hgspdc::spdc_coeffs::DEFAULT_MAX_ORDER).to_string());
    t.meta("trace", sci(rho.trace()));
    t.meta("purity", sci(verdict.purity));
    t.meta("entangled", verdict.entangled.to_string());
    t.meta("witness", witness_text(verdict.witness));
    for (a, ma) in rho.basis().iter().enumerate() {
        for (b, mb) in rho.basis().iter().enumerate() {
            let v = rho.matrix()[(a, b)];
            if ctx.include_zeros || v.norm() > 0.0 {
                t.push(vec![ma.to_string().into(), mb.to_string().into(), v.re.into(), v.im.into()]);
            }
        }
    }
    Ok(t)
}

fn entangle_check(ctx: &Context) -> Outcome<Table> {
    let rho = reduced(ctx)?;
    let verdict = csb_entanglement_witness(&rho);
    let blocks = parity_block_check(&rho);
    let mut t = Table::new(&["trace", "purity", "entangled", "parity_blocks", "witness_a", "witness_b"]);
    ctx.header("entangle-check", &mut t);
    t.meta("max_order", ctx.max_order(hgspdc::spdc_coeffs::DEFAULT_MAX_ORDER).to_string());
    let (wa, wb) = verdict
        .witness
        .map_or(("none".to_owned(), "none".to_owned()), |(a, b)| (a.to_string(), b.to_string()));
    t.push(vec![rho.trace().into(), purity(&rho).into(), verdict.entangled.into(), blocks.into(), wa.into(), wb.into()]);
    Ok(t)
}

fn pipeline_text(p: &Pipeline) -> String {
    if p.is_empty() {
        return "none".to_owned();
    }
    p.iter().map(|(e, arm)| format!("{e} on {arm}")).collect::<Vec<_>>().join(", ")
}

fn state_table(ctx: &Context, command: &str, state: &FirstOrderState) -> Table {
    let mut t = Table::new(&["signal", "idler", "re", "im"]);
    ctx.header(command, &mut t);
    for (s, i, a) in state.entries() {
        t.push(vec![s.to_string().into(), i.to_string().into(), a.re.into(), a.im.into()]);
    }
    t
}

fn bell(ctx: &Context, target: BellArg, source: SourceArg) -> Outcome<Table> {
    let target = match target {
        BellArg::PhiPlus => BellState::PhiPlus,
        BellArg::PhiMinus => BellState::PhiMinus,
        BellArg::PsiPlus => BellState::PsiPlus,
        BellArg::PsiMinus => BellState::PsiMinus,
    };
    let source = match source {
        SourceArg::Hg00 => BellSource::Hg00,
        SourceArg::Hg11 => BellSource::Hg11,
    };
    let recipe = bell_recipe(target, source, &ctx.config)?;
    let mut t = state_table(ctx, "bell", &recipe.state);
    t.meta("source", format!("{}", source.pump_mode()));
    t.meta("target", target.to_string());
    t.meta("pipeline", pipeline_text(&recipe.pipeline));
    let fidelity = recipe.state.fidelity(&FirstOrderState::bell(target));
    t.meta("fidelity", sci(fidelity));
    if fidelity < 1.0 - 1e-10 {
        t.check_failed = Some(format!("{target} fidelity {fidelity}"));
    }
    Ok(t)
}

fn nonmax(ctx: &Context, theta: Angle, phi: Angle) -> Outcome<Table> {
    let state = nonmax_pipeline(theta.0, phi.0, &ctx.config)?;
    let mut t = state_table(ctx, "nonmax", &state);
    t.meta("theta_rad", sci(theta.0));
    t.meta("phi_rad", sci(phi.0));
    t.meta("pipeline", "pump cos(theta) HG02 + exp(i phi) sin(theta) HG20, first-order post-selection");
    let [a, b] = state.schmidt_weights();
    t.meta("schmidt_weights", format!("{} {}", sci(a), sci(b)));
    Ok(t)
}

fn oracle_compare(
    ctx: &Context,
    scheme: SchemeArg,
    points: Option<usize>,
    target: Option<f64>,
    reduced_form: bool,
    tolerance: f64,
) -> Outcome<Table> {
    let pump = single_pump(ctx)?;
    let max_order = ctx.max_order(2);
    let mut spec = match scheme {
        SchemeArg::Gh => QuadratureSpec::default(),
        SchemeArg::Cartesian => QuadratureSpec::cartesian(),
    };
    if let Some(p) = points {
        spec.points_per_axis = p;
    }
    if let Some(r) = target {
        spec.target_rel_error = r;
    }
    let mut t = Table::new(&["j", "k", "u", "t", "closed_form", "quadrature", "est_error", "rel_diff"]);
    ctx.header("oracle-compare", &mut t);
    t.meta("max_order", max_order.to_string());
    t.meta("scheme", format!("{:?}", spec.scheme));
    t.meta("points_per_axis", spec.points_per_axis.to_string());
    t.meta("integral", if reduced_form { "2d" } else { "4d" });
    let mut worst: Option<(CoeffKey, f64)> = None;
    for key in CoeffKey::up_to_order(max_order) {
        let allowed = conservation_allowed(pump, key);
        if !allowed && !ctx.include_zeros {
            continue;
        }
        let closed = coeff_exact(&ctx.config, pump, key)?;
        let q = if reduced_form {
            coeff_quadrature_2d(&ctx.config, pump, key, &spec)?
        } else {
            coeff_quadrature_4d(&ctx.config, pump, key, &spec)?
        };
        // Forbidden keys have no scale of their own: report the absolute value.
        let diff = if closed != 0.0 { ((q.value - closed) / closed).abs() } else { q.value.abs() };
        let limit = if closed != 0.0 { tolerance } else { 1e-8 };
        if diff > limit && worst.is_none_or(|(_, d)| diff > d) {
            worst = Some((key, diff));
        }
        t.push(vec![key.j.into(), key.k.into(), key.u.into(), key.t.into(), closed.into(), q.value.into(), q.est_error.into(), diff.into()]);
    }
    t.check_failed = worst.map(|(key, d)| format!("{key} differs by {d:e}"));
    Ok(t)
}

fn mode_grid(ctx: &Context, mode: &[u32], z: Length, extent: Option<Length>, points: usize) -> Outcome<Table> {
    if points < 2 {
        return Err(Failure::Config("--points must be at least 2".into()));
    }
    let geom = BeamGeometry::new(ctx.config.pump_wavelength(), ctx.config.pump_waist())?;
    let mode = ModeIndex::new(mode[0], mode[1]);
    let half = extent.map_or(3.0 * geom.waist(), |e| e.0);
    let mut t = Table::new(&["x", "y", "re", "im"]);
    ctx.header("mode-grid", &mut t);
    t.meta("mode", mode.to_string());
    t.meta("z_m", sci(z.0));
    let step = 2.0 * half / (points - 1) as f64;
    for i in 0..points {
        let y = -half + i as f64 * step;
        for j in 0..points {
            let x = -half + j as f64 * step;
            let v = hg_field(mode, &geom, x, y, z.0)?;
            t.push(vec![x.into(), y.into(), v.re.into(), v.im.into()]);
        }
    }
    Ok(t)
}

fn configure_threads() -> Outcome<()> {
    if let Ok(v) = std::env::var("HGSPDC_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Config(format!("HGSPDC_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    configure_threads()?;
    let ctx = Context::from_args(&cli.run)?;
    let table = match &cli.command {
        Command::Coeffs => coeffs(&ctx),
        Command::Figure2 { widths, methods } => figure2(&ctx, widths, methods),
        Command::Table1 => table1(&ctx),
        Command::Density => density(&ctx),
        Command::EntangleCheck => entangle_check(&ctx),
        Command::Bell { target, source } => bell(&ctx, *target, *source),
        Command::Nonmax { theta, phi } => nonmax(&ctx, *theta, *phi),
        Command::OracleCompare { scheme, points, target_rel_error, reduced, tolerance } => {
            oracle_compare(&ctx, *scheme, *points, *target_rel_error, *reduced, *tolerance)
        }
        Command::ModeGrid { mode, z, extent, points } => mode_grid(&ctx, mode, *z, *extent, *points),
    };
    let table = table?;
    let text = match cli.run.format {
        Format::Csv => table.to_csv(),
        Format::Text => table.to_json(),
    };
    match &cli.run.out {
        Some(path) => fs::write(path, text).map_err(Failure::Io)?,
        None => print!("{text}"),
    }
    // The table is written even when its self-check fails, for inspection.
    match table.check_failed {
        Some(msg) => Err(Failure::SelfCheck(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hgspdc: {f}");
            ExitCode::from(f.code())
        }
    }
}
