use clap::{Args, Parser, Subcommand, ValueEnum};

const ABOUT: &str = "Locally D-optimal designs for 2^k factorial experiments with binary response";

const LONG_ABOUT: &str = "\
Locally D-optimal designs for 2^k factorial experiments with binary response.

Weights are w = (dmu/deta)^2 / (mu (1 - mu)) at the linear predictor eta = x'beta:
  logit    mu = 1 / (1 + exp(-eta))
  probit   mu = Phi(eta)
  loglog   mu = exp(-exp(-eta))
  cloglog  mu = 1 - exp(-exp(eta))

Design points follow the binary expansion of the point index, most significant
bit for factor 1, digit 0 = level +1 and digit 1 = level -1. For k = 2 the order
is (+,+), (+,-), (-,+), (-,-). All vectors (w, v, p) use this order.

Output is JSON unless --format csv is given or DOPT2K_FORMAT is set. Exit status
is 0 on success, 2 for invalid input and 3 when a numerical result fails
certification. Errors are written to stderr as a JSON object.";

#[derive(Debug, Parser)]
#[command(name = "dopt2k", version, about = ABOUT, long_about = LONG_ABOUT)]
pub struct Cli {
    /// Output format.
    #[arg(
        long,
        global = true,
        value_enum,
        env = "DOPT2K_FORMAT",
        default_value = "json"
    )]
    pub format: Format,

    /// File of key=value lines supplying flags; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Link {
    Logit,
    Probit,
    Loglog,
    Cloglog,
}

impl From<Link> for dopt2k::LinkKind {
    fn from(l: Link) -> Self {
        match l {
            Link::Logit => dopt2k::LinkKind::Logit,
            Link::Probit => dopt2k::LinkKind::Probit,
            Link::Loglog => dopt2k::LinkKind::Loglog,
            Link::Cloglog => dopt2k::LinkKind::Cloglog,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Saturated,
    Unsaturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    SaturationRate,
    ApproxLoss,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// GLM weights at every design point for a link and coefficient vector.
    #[command(
        long_about = "GLM weights w_i = (dmu/deta)^2 / (mu(1-mu)) at every design point \
        of the chosen model. Values below 1e-300 for mu(1-mu) give w = 0."
    )]
    Weights(WeightsArgs),

    /// D-optimal allocation for the 2x2 main-effects model.
    #[command(
        long_about = "D-optimal allocation p for the 2x2 main-effects model, maximizing \
        |X'WX| = 16 w1 w2 w3 w4 L(p) with L(p) = v4 p1p2p3 + v3 p1p2p4 + v2 p1p3p4 + v1 p2p3p4 \
        and v_i = 1/w_i. Uses the closed forms (uniform, saturated, tie patterns) where they \
        apply and a certified Newton solver otherwise. With --validate, reads a previous JSON \
        result from stdin and recomputes L at its design."
    )]
    Solve(SolveArgs),

    /// Whether the optimal 2x2 design is saturated (three support points).
    #[command(
        long_about = "Saturation condition 2 max v_i >= sum v_i. With --link logit and \
        --beta, also evaluates the equivalent coefficient-space thresholds on |beta1| and |beta2|."
    )]
    Saturation(InputArgs),

    /// Lower boundary |beta2|(|beta1|) of the logit saturated region.
    #[command(
        long_about = "Lower boundary of the saturated region in (|beta1|, |beta2|) for fixed \
        beta0 > 0 under the logit link. Grid points at or below the |beta1| threshold are \
        reported as infeasible."
    )]
    Boundary(BoundaryArgs),

    /// Efficiency loss of the uniform design.
    #[command(
        long_about = "Relative loss R_u = 1 - (|X'W X| at uniform / max |X'W X|)^(1/q) of \
        the uniform design. With --regime, --a and --b: the worst case over a <= v_i <= b for \
        the 2x2 model, 1 - 3/4 (1 + 3a/b)^(1/3) when saturated and 1 - 3/4 2^(1/3) otherwise. \
        With --w: the exact loss (2x2) or the general bounds."
    )]
    Robustness(RobustnessArgs),

    /// Maximin lower bound on |X'WX| and the uniform-design efficiency bound.
    #[command(
        long_about = "Lower bound 2^(k 2^k) prod(w) prod(p) / w_max^(2^k - q) on |X'WX|, \
        maximized by the uniform design, together with the determinant itself and the \
        efficiency bound 1 - w_min/w_max."
    )]
    Maximin(MaximinArgs),

    /// Monte Carlo experiments over random weights.
    #[command(
        long_about = "Monte Carlo experiments. saturation-rate: fraction of weight vectors \
        (iid uniform on (w-low, w-high), default (0, 0.25)) whose optimal design is saturated. \
        approx-loss: relative loss (D_o^(1/3) - D_*^(1/3)) / D_o^(1/3) of the analytic design \
        against a certified numeric optimum, default w in [0.05, 0.25]. Each draw uses its own \
        ChaCha8 stream derived from (seed, draw), so output is reproducible. With --format csv \
        the per-draw records are printed."
    )]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long, value_enum)]
    pub link: Link,
    /// Coefficients in model-effect order, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub beta: Vec<f64>,
    /// Number of factors for the main-effects model.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Model: main:K, full:K or K:I,1,2,1:2 (overrides --k).
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Four weights, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["v", "link"])]
    pub w: Option<Vec<f64>>,
    /// Four variances v_i = 1/w_i, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "link")]
    pub v: Option<Vec<f64>>,
    #[arg(long, value_enum, requires = "beta")]
    pub link: Option<Link>,
    /// Coefficients (beta0, beta1, beta2), used with --link.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        requires = "link"
    )]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also scan a simplex grid with this spacing and report the gap.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Relative KKT tolerance for certification.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Read a solve result (JSON) from stdin and check its L value.
    #[arg(long, conflicts_with_all = ["w", "v", "link"])]
    pub validate: bool,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: f64,
    /// |beta1| grid values, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "beta1_range")]
    pub beta1: Option<Vec<f64>>,
    /// Evenly spaced |beta1| grid START:STOP:N.
    #[arg(long)]
    pub beta1_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[arg(long, value_enum, requires_all = ["a", "b"], conflicts_with = "w")]
    pub regime: Option<RegimeArg>,
    /// Smallest variance.
    #[arg(long)]
    pub a: Option<f64>,
    /// Largest variance.
    #[arg(long)]
    pub b: Option<f64>,
    /// Weights (2^k values).
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    /// Model for --w with more than four points (default main effects).
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct MaximinArgs {
    /// Weights (2^k values).
    #[arg(long, value_delimiter = ',', required = true)]
    pub w: Vec<f64>,
    /// Design (2^k proportions); uniform by default.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Model: main:K, full:K or K:I,1,2,1:2 (default main effects).
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: ExperimentArg,
    /// Number of draws (default 100000 for saturation-rate, 1000 for approx-loss).
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub w_low: Option<f64>,
    #[arg(long)]
    pub w_high: Option<f64>,
    /// Draw beta uniformly from [-beta-range, beta-range]^3 and map through this link.
    #[arg(long, value_enum)]
    pub link: Option<Link>,
    #[arg(long, default_value_t = 3.0)]
    pub beta_range: f64,
    /// Include per-draw records in the JSON summary.
    #[arg(long)]
    pub records: bool,
}
