//! Run configuration: defaults, a flat `key = value` file, and command-line
//! flags, merged in that order of increasing precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hpv_core::{HermiteOrder, Hurst};

/// Failure to run a command, mapped to an exit code by [`CliError::exit_code`].
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hpv_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl From<hpv_core::Error> for CliError {
    fn from(e: hpv_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Unset flags fall back to the config file,
/// then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Hermite order q (2..=16)
    #[arg(long)]
    pub q: Option<u32>,
    /// Hurst index in (0, 1), or "critical" for 1 - 1/(2q)
    #[arg(long)]
    pub hurst: Option<String>,
    /// Resolutions: comma list (64,128) or dyadic range a^b..c (2^6..12)
    #[arg(long)]
    pub n: Option<String>,
    /// Monte Carlo batch size
    #[arg(long)]
    pub batch: Option<usize>,
    /// Master seed; all randomness is derived from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (directory for `sample`); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Largest lag for `bracket-table`
    #[arg(long)]
    pub max_lag: Option<u64>,
    /// Fine resolution N of the Hermite proxy S_N (`rate`, supercritical)
    #[arg(long)]
    pub big_n: Option<usize>,
}

/// Hurst index as given: a number or the critical value for the chosen `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HurstArg {
    Value(f64),
    Critical,
}

impl HurstArg {
    pub fn parse(s: &str) -> CliResult<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("critical") {
            return Ok(HurstArg::Critical);
        }
        match t.parse::<f64>() {
            Ok(v) => Ok(HurstArg::Value(v)),
            Err(_) => usage(format!("--hurst must be a number in (0, 1) or \"critical\", got {t:?}")),
        }
    }

    pub fn resolve(self, q: HermiteOrder) -> CliResult<Hurst> {
        let v = match self {
            HurstArg::Value(v) => v,
            HurstArg::Critical => 1.0 - 1.0 / (2.0 * q.as_f64()),
        };
        Ok(Hurst::new(v)?)
    }
}

/// Parses `64,128,256` or the dyadic range `2^6..12`.
pub fn parse_n_list(s: &str) -> CliResult<Vec<usize>> {
    let t = s.trim();
    if t.is_empty() {
        return usage("--n is empty; give a comma list (64,128) or a range (2^6..12)");
    }
    let list: Vec<usize> = if let Some((base, range)) = t.split_once('^') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| CliError::Usage(format!("range {t:?} must look like a^b..c")))?;
        let parse = |x: &str| -> CliResult<u32> {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad integer {x:?} in range {t:?}")))
        };
        let (a, b, c) = (parse(base)?, parse(lo)?, parse(hi)?);
        if a < 2 || b > c {
            return usage(format!("range {t:?} needs base >= 2 and b <= c"));
        }
        (b..=c)
            .map(|e| {
                (a as usize)
                    .checked_pow(e)
                    .ok_or_else(|| CliError::Usage(format!("{a}^{e} overflows")))
            })
            .collect::<CliResult<_>>()?
    } else {
        t.split(',')
            .map(|x| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("bad resolution {x:?} in --n")))
            })
            .collect::<CliResult<_>>()?
    };
    if list.contains(&0) {
        return usage("resolutions must be positive");
    }
    if list.windows(2).any(|w| w[1] <= w[0]) {
        return usage(format!("--n must be strictly increasing, got {list:?}"));
    }
    Ok(list)
}

const KEYS: [&str; 9] = ["q", "hurst", "n", "batch", "seed", "format", "out", "max_lag", "big_n"];

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return usage(format!("config line {}: unknown key {key:?}", lineno + 1));
        }
        let value = v.trim().trim_matches('"').to_string();
        if map.insert(key.clone(), value).is_some() {
            return usage(format!("config line {}: duplicate key {key:?}", lineno + 1));
        }
    }
    Ok(map)
}

fn read_config(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}")))
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub q: HermiteOrder,
    pub hurst: Option<HurstArg>,
    pub n_list: Option<Vec<usize>>,
    pub batch: usize,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub max_lag: u64,
    pub big_n: usize,
}

pub const DEFAULT_Q: u32 = 2;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_MAX_LAG: u64 = 64;
pub const DEFAULT_BIG_N: usize = 4096;

impl RunConfig {
    /// Merge `args` over the config file over defaults; `default_batch` is per command.
    pub fn resolve(args: &CommonArgs, default_batch: usize) -> CliResult<Self> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).map(String::as_str);

        let q_raw = match args.q {
            Some(q) => q,
            None => get("q").map(|v| parse_value("q", v)).transpose()?.unwrap_or(DEFAULT_Q),
        };
        let q = HermiteOrder::new(q_raw)?;
        let hurst = match args.hurst.as_deref().or(get("hurst")) {
            Some(s) => Some(HurstArg::parse(s)?),
            None => None,
        };
        let n_list = match args.n.as_deref().or(get("n")) {
            Some(s) => Some(parse_n_list(s)?),
            None => None,
        };
        let batch = match args.batch {
            Some(b) => b,
            None => get("batch").map(|v| parse_value("batch", v)).transpose()?.unwrap_or(default_batch),
        };
        let seed = match args.seed {
            Some(s) => s,
            None => get("seed").map(|v| parse_value("seed", v)).transpose()?.unwrap_or(DEFAULT_SEED),
        };
        let format = match args.format {
            Some(f) => f,
            None => match get("format") {
                Some(v) => Format::from_str(v, true)
                    .map_err(|_| CliError::Usage(format!("config key format: expected csv or json, got {v:?}")))?,
                None => Format::Csv,
            },
        };
        let out = args.out.clone().or_else(|| get("out").map(PathBuf::from));
        let max_lag = match args.max_lag {
            Some(m) => m,
            None => get("max_lag").map(|v| parse_value("max_lag", v)).transpose()?.unwrap_or(DEFAULT_MAX_LAG),
        };
        let big_n = match args.big_n {
            Some(m) => m,
            None => get("big_n").map(|v| parse_value("big_n", v)).transpose()?.unwrap_or(DEFAULT_BIG_N),
        };
        if batch == 0 {
            return usage("--batch must be positive");
        }
        Ok(RunConfig {
            q,
            hurst,
            n_list,
            batch,
            seed,
            format,
            out,
            max_lag,
            big_n,
        })
    }

    pub fn hurst(&self) -> CliResult<Hurst> {
        match self.hurst {
            Some(h) => h.resolve(self.q),
            None => usage("--hurst is required (a number in (0, 1) or \"critical\")"),
        }
    }

    pub fn n_list(&self) -> CliResult<&[usize]> {
        match &self.n_list {
            Some(v) => Ok(v),
            None => usage("--n is required (comma list or a^b..c range)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_list_forms() {
        assert_eq!(parse_n_list("64,128, 256").unwrap(), vec![64, 128, 256]);
        assert_eq!(parse_n_list("2^6..9").unwrap(), vec![64, 128, 256, 512]);
        assert_eq!(parse_n_list("3^1..2").unwrap(), vec![3, 9]);
        assert!(parse_n_list("").is_err());
        assert!(parse_n_list("128,64").is_err());
        assert!(parse_n_list("64,64").is_err());
        assert!(parse_n_list("2^9..6").is_err());
        assert!(parse_n_list("0,4").is_err());
        assert!(parse_n_list("a,b").is_err());
    }

    #[test]
    fn hurst_forms() {
        let q = HermiteOrder::new(2).unwrap();
        assert_eq!(HurstArg::parse("critical").unwrap().resolve(q).unwrap().value(), 0.75);
        assert_eq!(HurstArg::parse("0.9").unwrap().resolve(q).unwrap().value(), 0.9);
        let err = HurstArg::parse("1.2").unwrap().resolve(q).unwrap_err();
        assert!(err.to_string().contains("0 < H < 1"));
        assert_eq!(err.exit_code(), 2);
        assert!(HurstArg::parse("high").is_err());
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# run\nq = 3\nhurst = critical  # threshold\nmax-lag = 10\n\n").unwrap();
        assert_eq!(m["q"], "3");
        assert_eq!(m["hurst"], "critical");
        assert_eq!(m["max_lag"], "10");
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("q = 2\nq = 3").is_err());
        assert!(parse_config_text("q 2").is_err());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "q = 3\nseed = 17\nbatch = 50\nformat = json\n").unwrap();
        let args = CommonArgs {
            seed: Some(5),
            config: Some(path),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args, 1000).unwrap();
        assert_eq!(cfg.q.get(), 3);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.batch, 50);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.max_lag, DEFAULT_MAX_LAG);

        let bare = RunConfig::resolve(&CommonArgs::default(), 7).unwrap();
        assert_eq!((bare.q.get(), bare.batch, bare.seed), (2, 7, 0));
        assert!(bare.hurst().is_err());
        assert!(bare.n_list().is_err());
    }

    #[test]
    fn numerical_errors_map_to_exit_3() {
        let e = CliError::Core(hpv_core::Error::Factorization {
            n: 4,
            reason: "x".into(),
        });
        assert_eq!(e.exit_code(), 3);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
    }
}
