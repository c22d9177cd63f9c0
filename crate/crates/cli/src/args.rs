use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use valconf_core::agreement::ContextKind;
use valconf_core::inference::Tail;
use valconf_core::similarity::{Metric, TauVariant};

#[derive(Debug, Parser)]
#[command(
    name = "valconf",
    version,
    about = "Value profiles from discussion text, value-conflict metrics and Bayes factor tests",
    args_override_self = true,
    propagate_version = true
)]
pub struct Cli {
    /// TOML file with per-subcommand defaults (a `[bftest]` table, etc.). Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the circumplex kernel as a 10x10 CSV.
    Kernel(KernelArgs),
    /// Apply the forum filtering rules to a comment corpus.
    Filter(FilterArgs),
    /// Label comments with relevant values, by lexicon or from classifier predictions.
    Extract(ExtractArgs),
    /// Aggregate value labels into per-user profiles.
    Profile(ProfileArgs),
    /// Score PVQ-21 survey responses and report Cronbach's alpha.
    Pvq(PvqArgs),
    /// Score user pairs with one similarity metric.
    Similarity(SimilarityArgs),
    /// Run the Bayes factor grid over forums, metrics and thresholds.
    Bftest(BftestArgs),
    /// Value covariance across users and its 2-D MDS embedding.
    Mds(MdsArgs),
    /// Build agreement feature bundles with a user-context stack.
    AgreeFeatures(AgreeFeaturesArgs),
    /// Train and evaluate agreement classifiers on feature bundles.
    AgreeTrain(AgreeTrainArgs),
    /// Render an SVG plot from a previously written result file.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Filter(_) => "filter",
            Command::Extract(_) => "extract",
            Command::Profile(_) => "profile",
            Command::Pvq(_) => "pvq",
            Command::Similarity(_) => "similarity",
            Command::Bftest(_) => "bftest",
            Command::Mds(_) => "mds",
            Command::AgreeFeatures(_) => "agree-features",
            Command::AgreeTrain(_) => "agree-train",
            Command::Report(_) => "report",
        }
    }
}

pub const SUBCOMMANDS: [&str; 11] = [
    "kernel",
    "filter",
    "extract",
    "profile",
    "pvq",
    "similarity",
    "bftest",
    "mds",
    "agree-features",
    "agree-train",
    "report",
];

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    /// Comment corpus (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Forums to drop, one per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub min_forum_posts: usize,
    /// Drop comments whose language tag is present and not "en".
    #[arg(long)]
    pub english_only: bool,
    #[arg(long, default_value = "u_")]
    pub user_forum_prefix: String,
    #[arg(long)]
    pub allow_empty_text: bool,
    /// Rejected input lines (JSONL); defaults to `<out>.rejects.jsonl`.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Per-rule removal counts (JSON); defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Value lexicon (JSON or `value,term` CSV).
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    pub lexicon: Option<PathBuf>,
    /// Comment corpus (JSONL), required with --lexicon.
    #[arg(long = "in", value_name = "FILE", requires = "lexicon")]
    pub input: Option<PathBuf>,
    /// External classifier output to normalize instead of running the lexicon.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Labels (JSONL, one `{"comment_id", "values"}` row per comment).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    /// Value labels (JSONL) from `extract` or a classifier.
    #[arg(long)]
    pub labels: PathBuf,
    /// The comment corpus the labels refer to, for authorship.
    #[arg(long)]
    pub comments: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Weight each value by 1/(its lexicon term count) and normalize.
    #[arg(long, requires = "lexicon")]
    pub weighted: bool,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PvqArgs {
    /// Survey responses (CSV with 21 items and two attention checks).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cronbach's alpha per value (CSV).
    #[arg(long)]
    pub alpha: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub metric: Metric,
    #[arg(long)]
    pub profiles: PathBuf,
    /// CSV with `user_a,user_b`.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum total mentions for estimated profiles.
    #[arg(long, default_value_t = 1)]
    pub threshold: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value = "discordant")]
    pub tau_variant: TauVariant,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailArg {
    /// Lower for similarities, higher for Manhattan distance.
    Auto,
    Lower,
    Higher,
    TwoSided,
}

impl TailArg {
    pub fn fixed(self) -> Option<Tail> {
        match self {
            TailArg::Auto => None,
            TailArg::Lower => Some(Tail::Lower),
            TailArg::Higher => Some(Tail::Higher),
            TailArg::TwoSided => Some(Tail::TwoSided),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BftestArgs {
    /// Labeled reply pairs (CSV or JSONL).
    #[arg(long)]
    pub agreement: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "tau,md,co,wc")]
    pub metrics: Vec<Metric>,
    #[arg(long, value_delimiter = ',', default_value = "1,10,50,200,500")]
    pub thresholds: Vec<u64>,
    /// Restrict to these forums; default is every forum in the agreement file.
    #[arg(long, value_delimiter = ',')]
    pub forums: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub tail: TailArg,
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    pub prior_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value = "discordant")]
    pub tau_variant: TauVariant,
    #[arg(long)]
    pub allow_self_reply: bool,
    /// Full grid (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Tested cells ranked by BF10 (CSV).
    #[arg(long)]
    pub ranked: Option<PathBuf>,
    /// Per-forum top values and mean tau (CSV), at the smallest threshold.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Histogram of BF10 values (SVG).
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MdsArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threshold: u64,
    /// Coordinates (CSV `value,x,y`).
    #[arg(long)]
    pub out: PathBuf,
    /// Covariance matrix (CSV).
    #[arg(long)]
    pub covariance: Option<PathBuf>,
    /// Labeled scatter plot (SVG).
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    /// Text features only.
    None,
    Noise,
    Centroid,
    UserFeatures,
    ValueProfile,
}

impl KindArg {
    pub fn context(self) -> Option<ContextKind> {
        match self {
            KindArg::None => None,
            KindArg::Noise => Some(ContextKind::Noise),
            KindArg::Centroid => Some(ContextKind::Centroid),
            KindArg::UserFeatures => Some(ContextKind::UserFeatures),
            KindArg::ValueProfile => Some(ContextKind::ValueProfile),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AgreeFeaturesArgs {
    #[arg(long)]
    pub agreement: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Needed for --kind value-profile.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Needed for --kind user-features.
    #[arg(long)]
    pub user_features: Option<PathBuf>,
    /// Background comments (JSONL), needed for --kind centroid.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Needed for --kind centroid.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 768)]
    pub vocab: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub allow_self_reply: bool,
    /// Feature bundles (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Val,
    Test,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreeTrainArgs {
    /// Bundle files, one model each. A text-only file (kind none) is the
    /// reference for the F1 change column.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub bundles: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "test")]
    pub eval_split: EvalSplit,
    /// Results table (CSV `model,P,R,F1,Acc,dF1,symbol`).
    #[arg(long)]
    pub out: PathBuf,
    /// F1 bar chart (SVG).
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// From a bftest grid CSV.
    BfHist,
    /// From an mds coordinates CSV.
    MdsScatter,
    /// From an agree-train results CSV.
    F1Bars,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
