use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::prior::{parse_pair, PriorSpec};

#[derive(Debug, Parser)]
#[command(name = "usm", version, about = "Sparse coding and modeling with universal priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Laplacian, MOE, JOE and CMOE models to a coefficient matrix and report KLDs
    Fit(FitArgs),
    /// Sparse-code every column of a data matrix
    Code(CodeArgs),
    /// Learn an incoherent dictionary
    Learn(LearnArgs),
    /// Denoise a PGM image by coding overlapping patches
    Denoise(DenoiseArgs),
    /// Synthetic support-recovery experiment
    Recover(RecoverArgs),
    /// MAP classification with one dictionary per class
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write intermediate artifacts to the output directory
    #[arg(long)]
    pub save_artifacts: bool,
    /// Directory for outputs without an explicit path and for artifacts
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads [default: all cores]
    #[arg(long, env = "USM_THREADS", hide_env_values = true)]
    pub threads: Option<usize>,
    /// File of `key = value` lines using the long flag names; explicit flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Coefficient matrix (USM or CSV), one row per atom
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Report CSV [default: <out-dir>/fit_report.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Count zero coefficients in the histograms (fits always skip them)
    #[arg(long)]
    pub include_zeros: bool,
    /// Quantization step
    #[arg(long, default_value_t = usm::empirics::DEFAULT_DELTA)]
    pub delta: f64,
    /// Rows with fewer nonzeros fall back to the global fit
    #[arg(long, default_value_t = usm::empirics::MIN_ROW_NONZEROS)]
    pub min_row_nonzeros: usize,
    /// Samples consumed by the CMOE fit
    #[arg(long, default_value_t = 2)]
    pub cmoe_n0: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["lambda", "epsilon", "sigma", "sigma255"])))]
pub struct CodeArgs {
    /// Data matrix (USM or CSV), one sample per column
    #[arg(long)]
    pub data: PathBuf,
    /// Dictionary matrix (USM or CSV), one atom per column
    #[arg(long)]
    pub dict: PathBuf,
    /// laplacian:THETA | moe:KAPPA,BETA | joe:THETA1,THETA2 | cmoe:N0 (cmoe builds an MOE per sample from its first N0 nonzero magnitudes)
    #[arg(long, default_value = "laplacian:1")]
    pub prior: PriorSpec,
    /// Lagrangian weight
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Squared-error budget per sample
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Noise level in [0,1] units; sets epsilon = C*M*sigma^2
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise level in 0-255 units (divided by 255)
    #[arg(long)]
    pub sigma255: Option<f64>,
    /// Factor C in epsilon = C*M*sigma^2 (the standard denoising value)
    #[arg(long = "C", default_value_t = usm::experiments::DEFAULT_C)]
    pub c: f64,
    /// Local linear approximation rounds
    #[arg(long, default_value_t = 5)]
    pub lla_iters: usize,
    /// Coefficient matrix [default: <out-dir>/coeffs.usm]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Training matrix (USM or CSV), one sample per column
    #[arg(long)]
    pub data: PathBuf,
    /// Number of atoms
    #[arg(long = "K", default_value_t = 256)]
    pub k: usize,
    /// laplacian:THETA | moe:KAPPA,BETA | joe:THETA1,THETA2 | cmoe:N0 (cmoe reads the first N0 nonzero magnitudes of the data)
    #[arg(long, default_value = "laplacian:1")]
    pub prior: PriorSpec,
    /// Coding weight
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Incoherence weight; its pull against the data term grows as the data energy shrinks
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Outer iterations
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    /// Local linear approximation rounds
    #[arg(long, default_value_t = 5)]
    pub lla_iters: usize,
    /// Learned dictionary with atoms rescaled to unit norm [default: <out-dir>/dictionary.usm]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("noise").required(true).args(["sigma", "sigma255"])))]
pub struct DenoiseArgs {
    /// Input PGM image (noisy, or clean with --add-noise)
    #[arg(long)]
    pub image: PathBuf,
    /// Noise level in [0,1] pixel units
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise level in 0-255 units (divided by 255)
    #[arg(long)]
    pub sigma255: Option<f64>,
    /// Treat --image as clean, add seeded Gaussian noise and score against it
    #[arg(long, conflicts_with = "reference")]
    pub add_noise: bool,
    /// Clean PGM image to score against
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Initial dictionary (USM or CSV) [default: overcomplete DCT]
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Atoms per axis of the default DCT dictionary
    #[arg(long, default_value_t = 16)]
    pub dct_per_axis: usize,
    /// laplacian:THETA | moe:KAPPA,BETA | joe:THETA1,THETA2 | cmoe:N0 (cmoe reads the first N0 nonzero magnitudes of the patches)
    #[arg(long, default_value = "moe:2.8,0.07")]
    pub prior: PriorSpec,
    /// Factor C in epsilon = C*M*sigma^2 (the standard denoising value)
    #[arg(long = "C", default_value_t = usm::experiments::DEFAULT_C)]
    pub c: f64,
    /// Rounds of dictionary adaptation on the noisy patches
    #[arg(long, default_value_t = 5)]
    pub adapt_iters: usize,
    /// Incoherence weight during adaptation, for pixels in [0,1]
    #[arg(long, default_value_t = 1e-4)]
    pub mu: f64,
    /// Patch side
    #[arg(long, default_value_t = 8)]
    pub side: usize,
    /// Denoised PGM [default: <out-dir>/denoised.pgm]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Signal dimension
    #[arg(long = "M", default_value_t = 64)]
    pub m: usize,
    /// Number of atoms
    #[arg(long = "K", default_value_t = 256)]
    pub k: usize,
    /// Number of instances
    #[arg(long = "N", default_value_t = 500)]
    pub n: usize,
    /// Planted sparsity
    #[arg(long = "L", default_value_t = 5)]
    pub l: usize,
    /// Largest support error counted as a success
    #[arg(long = "T", default_value_t = 2)]
    pub t: usize,
    /// Comma-separated noise levels
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    pub sigmas: Vec<f64>,
    /// Comma-separated methods from l1, moe, joe, l0
    #[arg(long, value_delimiter = ',', default_value = "l1,moe")]
    pub methods: Vec<String>,
    /// MOE parameters KAPPA,BETA for the moe method
    #[arg(long, value_parser = parse_pair, default_value = "2.8,0.07")]
    pub moe: (f64, f64),
    /// JOE parameters THETA1,THETA2 for the joe method
    #[arg(long, value_parser = parse_pair, default_value = "20,100")]
    pub joe: (f64, f64),
    /// Factor C in epsilon = C*M*sigma^2 (the standard denoising value)
    #[arg(long = "C", default_value_t = usm::experiments::DEFAULT_C)]
    pub c: f64,
    /// Standard deviation of the Gaussian targets the planted codes are fitted to
    #[arg(long, default_value_t = 0.125)]
    pub target_std: f64,
    /// Report CSV [default: <out-dir>/recovery.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Samples to classify (USM or CSV), one per column [default: planted synthetic classes]
    #[arg(long, requires = "dicts")]
    pub data: Option<PathBuf>,
    /// Comma-separated class dictionaries, in class order
    #[arg(long, value_delimiter = ',', requires = "data")]
    pub dicts: Vec<PathBuf>,
    /// True labels, one integer per line
    #[arg(long, requires = "data")]
    pub labels: Option<PathBuf>,
    /// laplacian:THETA | moe:KAPPA,BETA | joe:THETA1,THETA2 | cmoe:N0 (cmoe reads the first N0 nonzero magnitudes of the data)
    #[arg(long, default_value = "moe:2.8,0.07")]
    pub prior: PriorSpec,
    /// Coding weight (0.1 for laplacian:1 corresponds to 0.1*BETA for MOE)
    #[arg(long, default_value_t = 0.007)]
    pub lambda: f64,
    /// Planted classes
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Planted signal dimension
    #[arg(long = "M", default_value_t = 16)]
    pub m: usize,
    /// Planted atoms per class
    #[arg(long = "K", default_value_t = 40)]
    pub k: usize,
    /// Planted samples per class
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Planted nonzeros per sample
    #[arg(long, default_value_t = 4)]
    pub sparsity: usize,
    /// Planted noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Predictions CSV [default: <out-dir>/classes.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}
