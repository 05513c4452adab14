//! Batch front end: one subcommand per computation, JSON config in, CSV or
//! JSON out.
//!
//! Every CSV starts with a `# config: {...}` line and every JSON output has
//! a top-level `"config"` key holding the fully resolved config, so any
//! output file can be passed back as `--config` to reproduce it.
//!
//! Exit codes: 0 on success, 2 for config errors, 3 for numerical failures.
//! Errors are printed to stderr as one JSON object.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::furstenberg::{energy_sweep_rank, zero_energy_reducibility_certificate};
use crate::localization::{decay_bins, ensemble_correlator, fit_decay, wegner_probe, BOUNDARY_BAND};
use crate::lyapunov::{
    critical_alpha_scan, lyapunov_spectra, lyapunov_spectrum, thouless_check, zero_energy_prediction,
    LyapunovOptions,
};
use crate::model::{
    assemble_block_jacobi, assemble_hat_form, disorder_rng, sample_disorder, BlockEnsemble, BlockJacobiMatrix, ModelParams,
    RandomBlockEnsemble, SingleSiteDistribution, XyEnsemble,
};
use crate::spectral::{
    almost_sure_spectrum_approx, dos_histogram, eigensolve, periodic_spectrum, DosBins, IntervalUnion,
};
use crate::transfer::{charpoly_identity_check, fundamental_solutions, green_relative_error, wronskian_variation};
use crate::xy_oracle::{
    build_hamiltonian, build_jordan_wigner, free_fermion_spectrum, lr_commutator_stats, verify_heisenberg_identity,
    verify_quadratic_form, Convention, Pauli,
};

pub const THREADS_ENV: &str = "RANDBLOCK_THREADS";

/// Number of hopping matrices drawn for general (`ell != 2`) ensembles.
pub const GENERAL_HOPPING_CHOICES: usize = 3;

#[derive(Debug, Parser)]
#[command(name = "randblock", version, about = "Random block Jacobi operators of the anisotropic XY chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config, or any output file of a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to RANDBLOCK_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Eigenvalues per realization.
    Spectrum,
    /// Ensemble density of states histogram.
    Dos,
    /// Floquet band spectrum of a periodic potential.
    Periodic,
    /// Almost-sure spectrum from periodic approximants.
    Asspec,
    /// Green-function formula and Wronskian constancy.
    GreenCheck,
    /// Characteristic polynomial via transfer matrices.
    CharpolyCheck,
    /// Lyapunov spectra at the configured energies.
    Lyapunov,
    /// Generalized Thouless formula residuals.
    Thouless,
    /// Zero-energy exponents against the closed form.
    ZeroEnergy,
    /// Disorder-strength scan for the vanishing second exponent.
    AlphaScan,
    /// Lie algebra rank sweep and zero-energy certificate.
    Zariski,
    /// Eigenfunction correlator and decay fit.
    Correlator,
    /// Empirical Wegner probability.
    WegnerProbe,
    /// Many-body Jordan-Wigner checks.
    XyVerify,
    /// Lieb-Robinson commutator statistics.
    LrStats,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Dos => "dos",
            Command::Periodic => "periodic",
            Command::Asspec => "asspec",
            Command::GreenCheck => "green-check",
            Command::CharpolyCheck => "charpoly-check",
            Command::Lyapunov => "lyapunov",
            Command::Thouless => "thouless",
            Command::ZeroEnergy => "zero-energy",
            Command::AlphaScan => "alpha-scan",
            Command::Zariski => "zariski",
            Command::Correlator => "correlator",
            Command::WegnerProbe => "wegner-probe",
            Command::XyVerify => "xy-verify",
            Command::LrStats => "lr-stats",
        }
    }

    fn stochastic(self) -> bool {
        !matches!(self, Command::Periodic | Command::Asspec)
    }

    fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

/// `"const:1.0"` or an explicit list of couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Text(String),
    List(Vec<f64>),
}

impl Default for MuSpec {
    fn default() -> Self {
        MuSpec::Text("const:1.0".into())
    }
}

impl MuSpec {
    pub fn resolve(&self, bonds: usize) -> Result<Vec<f64>> {
        match self {
            MuSpec::Text(s) => {
                let v = s
                    .strip_prefix("const:")
                    .and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("mu must be \"const:<value>\" or a list, got {s:?}")))?;
                Ok(vec![v; bonds])
            }
            MuSpec::List(v) => {
                if v.len() < bonds {
                    return Err(Error::Config(format!("mu list has {} entries, need {bonds}", v.len())));
                }
                Ok(v.clone())
            }
        }
    }

    fn is_unit(&self, bonds: usize) -> bool {
        self.resolve(bonds).is_ok_and(|v| v[..bonds].iter().all(|&x| x == 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsspecConfig {
    pub max_period: usize,
    pub samples_per_period: usize,
}

impl Default for AsspecConfig {
    fn default() -> Self {
        AsspecConfig { max_period: 4, samples_per_period: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThoulessConfig {
    pub dos_n: usize,
    pub dos_realizations: usize,
}

impl Default for ThoulessConfig {
    fn default() -> Self {
        ThoulessConfig { dos_n: 1000, dos_realizations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig { lo: 0.1, hi: 3.0, points: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WegnerConfig {
    pub energy: f64,
    #[serde(rename = "L")]
    pub l_list: Vec<usize>,
    pub beta: f64,
    pub sigma: f64,
    pub samples: usize,
}

impl Default for WegnerConfig {
    fn default() -> Self {
        WegnerConfig { energy: 1.0, l_list: vec![20, 40, 80], beta: 0.5, sigma: 1.0, samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub j: usize,
    /// Empty means `j+1..=n`.
    pub ks: Vec<usize>,
    pub a: Pauli,
    pub b: Pauli,
    pub t_max: f64,
    pub t_points: usize,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig { j: 1, ks: Vec::new(), a: Pauli::X, b: Pauli::X, t_max: 10.0, t_points: 400 }
    }
}

fn default_ell() -> usize {
    2
}

fn default_realizations() -> usize {
    1
}

fn default_energies() -> Vec<[f64; 2]> {
    vec![[1.0, 0.5]]
}

fn default_e_grid() -> Vec<f64> {
    (0..20).map(|i| -3.0 + 6.0 * i as f64 / 19.0).collect()
}

fn default_window() -> (Option<f64>, Option<f64>) {
    (Some(0.5), Some(1.5))
}

fn default_bins() -> usize {
    100
}

fn default_potential() -> Vec<f64> {
    vec![1.0]
}

fn default_depth() -> usize {
    3
}

fn default_nu_samples() -> usize {
    100
}

fn default_zeta() -> f64 {
    0.9
}

fn default_t_list() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Filled in from the subcommand when outputs are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default = "default_ell")]
    pub ell: usize,
    pub n: usize,
    pub gamma: f64,
    #[serde(default)]
    pub mu: MuSpec,
    pub rho: SingleSiteDistribution,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Complex energies as `[re, im]`.
    #[serde(default = "default_energies")]
    pub energies: Vec<[f64; 2]>,
    #[serde(default = "default_e_grid")]
    pub e_grid: Vec<f64>,
    /// `null` for an unbounded side.
    #[serde(default = "default_window")]
    pub window: (Option<f64>, Option<f64>),
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_potential")]
    pub potential: Vec<f64>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_nu_samples")]
    pub nu_samples: usize,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub lyapunov: LyapunovOptions,
    #[serde(default)]
    pub asspec: AsspecConfig,
    #[serde(default)]
    pub thouless: ThoulessConfig,
    #[serde(default)]
    pub alpha: AlphaConfig,
    #[serde(default)]
    pub wegner: WegnerConfig,
    #[serde(default)]
    pub lr: LrConfig,
}

impl RunConfig {
    /// Minimal XY config with all task fields at their defaults.
    pub fn xy(n: usize, gamma: f64, rho: SingleSiteDistribution, seed: u64) -> Self {
        let mut cfg: RunConfig = serde_json::from_value(json!({
            "n": n, "gamma": gamma, "rho": rho, "seed": seed
        }))
        .expect("minimal config parses");
        cfg.seed = Some(seed);
        cfg
    }

    /// Parses a JSON config, a CSV output (`# config:` line) or a JSON
    /// output (`"config"` key).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let value: Value = if let Some(rest) = trimmed.strip_prefix("# config:") {
            serde_json::from_str(rest.lines().next().unwrap_or("").trim())
                .map_err(|e| Error::Config(format!("bad embedded config: {e}")))?
        } else {
            let v: Value = serde_json::from_str(trimmed).map_err(|e| Error::Config(format!("bad JSON config: {e}")))?;
            match v.get("config") {
                Some(c) if v.get("result").is_some() => c.clone(),
                _ => v,
            }
        };
        serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn is_xy(&self) -> bool {
        self.ell == 2
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let bonds = self.n.saturating_sub(1);
        let p = ModelParams {
            ell: 2,
            n: self.n,
            mu: self.mu.resolve(bonds)?,
            gamma: vec![self.gamma; bonds],
            rho: self.rho.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.ell == 0 {
            return Err(Error::Config("ell must be positive".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::Config("gamma must be finite".into()));
        }
        self.rho.validate()?;
        self.mu.resolve(self.n.saturating_sub(1))?;
        if command.stochastic() && self.seed.is_none() {
            return Err(Error::Config(format!("{} needs a seed (config \"seed\" or --seed)", command.name())));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be positive".into()));
        }
        if let (Some(lo), Some(hi)) = self.window {
            if !(lo <= hi) {
                return Err(Error::Config(format!("window [{lo}, {hi}] is empty")));
            }
        }
        let needs_xy = matches!(
            command,
            Command::Periodic
                | Command::Asspec
                | Command::ZeroEnergy
                | Command::AlphaScan
                | Command::Zariski
                | Command::XyVerify
                | Command::LrStats
        );
        if needs_xy && !self.is_xy() {
            return Err(Error::Config(format!("{} is defined for the XY model (ell = 2)", command.name())));
        }
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn energies(&self) -> Vec<Complex64> {
        self.energies.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
    }

    fn window(&self) -> (f64, f64) {
        (self.window.0.unwrap_or(f64::NEG_INFINITY), self.window.1.unwrap_or(f64::INFINITY))
    }
}

enum Ensemble {
    Xy(XyEnsemble),
    General(RandomBlockEnsemble),
}

impl Ensemble {
    fn get(&self) -> &dyn BlockEnsemble {
        match self {
            Ensemble::Xy(e) => e,
            Ensemble::General(e) => e,
        }
    }
}

/// The i.i.d. site ensemble behind a config: the XY chain for `ell = 2`
/// (which needs `mu = const:1`), otherwise a general block ensemble.
fn ensemble(cfg: &RunConfig) -> Result<Ensemble> {
    if cfg.is_xy() {
        if !cfg.mu.is_unit(cfg.n.saturating_sub(1)) {
            return Err(Error::Config("cocycle and ensemble subcommands need mu = \"const:1.0\"".into()));
        }
        Ok(Ensemble::Xy(XyEnsemble::new(cfg.gamma, cfg.rho.clone())?))
    } else {
        Ok(Ensemble::General(RandomBlockEnsemble::random(cfg.ell, cfg.rho.clone(), GENERAL_HOPPING_CHOICES, cfg.seed())?))
    }
}

/// Finite operator for realization `index`, honoring a non-constant `mu`.
fn realize(cfg: &RunConfig, n: usize, index: u64) -> Result<BlockJacobiMatrix> {
    if cfg.is_xy() {
        let mut c = cfg.clone();
        c.n = n;
        let p = c.model_params()?;
        let real = sample_disorder(&p, cfg.seed(), index)?;
        assemble_block_jacobi(&p, &real)
    } else {
        ensemble(cfg)?.get().realize(n, cfg.seed(), index)
    }
}

fn fmt_c(z: Complex64) -> Value {
    json!([z.re, z.im])
}

struct Outputs {
    dir: PathBuf,
    config_line: String,
    config: Value,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# config: {}", self.config_line);
        let _ = writeln!(s, "{header}");
        for r in rows {
            let _ = writeln!(s, "{r}");
        }
        self.write(name, s)
    }

    fn json(&mut self, name: &str, result: Value) -> Result<()> {
        let doc = json!({ "config": self.config, "result": result });
        let s = serde_json::to_string_pretty(&doc)? + "\n";
        self.write(name, s)
    }

    fn write(&mut self, name: &str, s: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, s)?;
        self.written.push(path);
        Ok(())
    }
}

fn intervals_rows(u: &IntervalUnion) -> Vec<String> {
    u.intervals().iter().map(|(a, b)| format!("{a},{b}")).collect()
}

/// Runs one subcommand and returns the files written.
pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path, verbose: bool) -> Result<Vec<PathBuf>> {
    cfg.validate(command)?;
    let mut resolved = cfg.clone();
    resolved.command = Some(command.name().to_string());
    fs::create_dir_all(out_dir)?;
    let config = serde_json::to_value(&resolved)?;
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        config_line: serde_json::to_string(&config)?,
        config,
        written: Vec::new(),
    };
    let log = |msg: &str| {
        if verbose {
            eprintln!("[randblock {}] {msg}", command.name());
        }
    };
    let seed = cfg.seed();
    let stem = command.stem();
    match command {
        Command::Spectrum => {
            let mut rows = Vec::new();
            for r in 0..cfg.realizations {
                let s = eigensolve(&realize(cfg, cfg.n, r as u64)?, false)?;
                rows.extend(s.eigenvalues.iter().enumerate().map(|(i, l)| format!("{r},{i},{l}")));
            }
            log(&format!("{} eigenvalues", rows.len()));
            out.csv(&format!("{stem}.csv"), "realization,index,lambda", &rows)?;
        }
        Command::Dos => {
            let spectra = (0..cfg.realizations)
                .map(|r| eigensolve(&realize(cfg, cfg.n, r as u64)?, false))
                .collect::<Result<Vec<_>>>()?;
            let dos = dos_histogram(&spectra, DosBins::Count(cfg.bins))?;
            let rows: Vec<String> = dos
                .bin_edges
                .windows(2)
                .zip(&dos.mass)
                .map(|(w, m)| format!("{},{},{m}", w[0], w[1]))
                .collect();
            out.csv(&format!("{stem}.csv"), "bin_lo,bin_hi,mass", &rows)?;
        }
        Command::Periodic => {
            let u = periodic_spectrum(&cfg.potential, cfg.gamma)?;
            out.csv(&format!("{stem}.csv"), "lo,hi", &intervals_rows(&u))?;
        }
        Command::Asspec => {
            let u = almost_sure_spectrum_approx(
                &cfg.rho,
                cfg.gamma,
                cfg.asspec.max_period,
                cfg.asspec.samples_per_period,
            )?;
            log(&format!("{} intervals", u.intervals().len()));
            out.csv(&format!("{stem}.csv"), "lo,hi", &intervals_rows(&u))?;
        }
        Command::GreenCheck => {
            let mut items = Vec::new();
            let (mut worst_green, mut worst_wronskian) = (0.0_f64, 0.0_f64);
            for r in 0..cfg.realizations {
                let m = realize(cfg, cfg.n, r as u64)?;
                for z in cfg.energies() {
                    let g = green_relative_error(&m, z)?;
                    let (u, v) = fundamental_solutions(&m, z)?;
                    let w = wronskian_variation(&m, &u, &v);
                    worst_green = worst_green.max(g);
                    worst_wronskian = worst_wronskian.max(w);
                    items.push(json!({ "realization": r, "z": fmt_c(z), "green_rel_error": g, "wronskian_variation": w }));
                }
            }
            out.json(
                &format!("{stem}.json"),
                json!({ "max_green_rel_error": worst_green, "max_wronskian_variation": worst_wronskian, "checks": items }),
            )?;
        }
        Command::CharpolyCheck => {
            let mut items = Vec::new();
            let mut worst = 0.0_f64;
            for r in 0..cfg.realizations {
                let m = realize(cfg, cfg.n, r as u64)?;
                for z in cfg.energies() {
                    let rep = charpoly_identity_check(&m, z)?;
                    worst = worst.max(rep.residual).max(rep.exterior_residual);
                    items.push(json!({ "realization": r, "z": fmt_c(z), "report": rep }));
                }
            }
            out.json(&format!("{stem}.json"), json!({ "max_residual": worst, "checks": items }))?;
        }
        Command::Lyapunov => {
            let ens = ensemble(cfg)?;
            let spectra = lyapunov_spectra(ens.get(), &cfg.energies(), &cfg.lyapunov, seed)?;
            let two_l = 2 * ens.get().ell();
            let header = format!(
                "E_re,E_im,{},{},steps,seed",
                (1..=two_l).map(|p| format!("gamma_{p}")).collect::<Vec<_>>().join(","),
                (1..=two_l).map(|p| format!("se_{p}")).collect::<Vec<_>>().join(",")
            );
            let rows: Vec<String> = spectra
                .iter()
                .map(|s| {
                    let vals: Vec<String> = s.exponents.iter().chain(&s.std_errors).map(f64::to_string).collect();
                    format!("{},{},{},{},{}", s.energy_re, s.energy_im, vals.join(","), s.steps, s.seed)
                })
                .collect();
            out.csv(&format!("{stem}.csv"), &header, &rows)?;
        }
        Command::Thouless => {
            let ens = ensemble(cfg)?;
            let spectra = (0..cfg.thouless.dos_realizations)
                .map(|r| eigensolve(&realize(cfg, cfg.thouless.dos_n, r as u64)?, false))
                .collect::<Result<Vec<_>>>()?;
            let dos = dos_histogram(&spectra, DosBins::Count(cfg.bins))?;
            log("density of states done");
            let lyap_seed = seed.wrapping_add(1);
            let reports = cfg
                .energies()
                .into_iter()
                .map(|e| thouless_check(ens.get(), e, &dos, &cfg.lyapunov, lyap_seed))
                .collect::<Result<Vec<_>>>()?;
            out.json(&format!("{stem}.json"), json!({ "lyapunov_seed": lyap_seed, "reports": reports }))?;
        }
        Command::ZeroEnergy => {
            let ens = XyEnsemble::new(cfg.gamma, cfg.rho.clone())?;
            let direct = lyapunov_spectrum(&ens, Complex64::new(0.0, 0.0), &cfg.lyapunov, seed)?;
            let pred = zero_energy_prediction(cfg.gamma, &cfg.rho, &cfg.lyapunov, seed.wrapping_add(1))?;
            let z: Vec<f64> = (0..4)
                .map(|p| {
                    let se = (direct.std_errors[p].powi(2) + pred.predicted_se[p].powi(2)).sqrt();
                    (direct.exponents[p] - pred.predicted[p]).abs() / se
                })
                .collect();
            out.json(
                &format!("{stem}.json"),
                json!({
                    "direct": direct.exponents,
                    "direct_se": direct.std_errors,
                    "prediction": pred,
                    "combined_sigma": z,
                }),
            )?;
        }
        Command::AlphaScan => {
            let scan =
                critical_alpha_scan(cfg.gamma, &cfg.rho, cfg.alpha.lo, cfg.alpha.hi, cfg.alpha.points, &cfg.lyapunov, seed)?;
            let rows: Vec<String> = scan.samples.iter().map(|s| format!("{},{},{}", s.alpha, s.f, s.se)).collect();
            out.csv(&format!("{stem}.csv"), "alpha,f_alpha,se", &rows)?;
            out.json(&format!("{stem}.json"), serde_json::to_value(&scan)?)?;
        }
        Command::Zariski => {
            let rows = energy_sweep_rank(cfg.gamma, &cfg.e_grid, cfg.depth)?;
            let lines: Vec<String> = rows.iter().map(|r| format!("{},{},{}", r.energy, r.rank, r.marginal as u8)).collect();
            out.csv(&format!("{stem}.csv"), "E,rank,marginal_flag", &lines)?;
            let mut rng = disorder_rng(seed, 0);
            let nus: Vec<f64> = (0..cfg.nu_samples).map(|_| cfg.rho.sample(&mut rng)).collect();
            let cert = zero_energy_reducibility_certificate(cfg.gamma, &nus)?;
            out.json(&format!("{stem}_certificate.json"), serde_json::to_value(cert)?)?;
        }
        Command::Correlator => {
            let ens = ensemble(cfg)?;
            let field = ensemble_correlator(ens.get(), cfg.n, cfg.window(), cfg.realizations, seed)?;
            let bins = decay_bins(&field, BOUNDARY_BAND);
            let rows: Vec<String> =
                bins.iter().map(|b| format!("{},{},{},{}", b.dist, b.mean_log_q, b.se, b.count)).collect();
            let fit = fit_decay(&field, cfg.zeta)?;
            out.csv(&format!("{stem}.csv"), "dist,mean_logQ,se,count", &rows)?;
            out.json(
                &format!("{stem}_fit.json"),
                json!({
                    "zeta": fit.zeta,
                    "eta": fit.eta,
                    "eta_ci": [fit.eta_ci.0, fit.eta_ci.1],
                    "C": fit.c,
                    "r_squared": fit.r_squared,
                    "curvature_t": fit.curvature_t,
                    "curved": fit.curved,
                    "bins_used": fit.bins.len(),
                    "empty_realizations": field.empty_realizations,
                }),
            )?;
        }
        Command::WegnerProbe => {
            let ens = ensemble(cfg)?;
            let w = &cfg.wegner;
            let rows = wegner_probe(ens.get(), w.energy, &w.l_list, w.beta, w.sigma, w.samples, seed)?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{},{},{},{},{}", r.l, r.epsilon, r.probability, r.se, r.samples))
                .collect();
            out.csv(&format!("{stem}.csv"), "L,epsilon,probability,se,samples", &lines)?;
        }
        Command::XyVerify => {
            let p = cfg.model_params()?;
            let car = build_jordan_wigner(cfg.n)?.car_report();
            let mut conv0: Option<Convention> = None;
            let (mut qf, mut ff, mut heis) = (0.0_f64, 0.0_f64, None::<f64>);
            for r in 0..cfg.realizations {
                let real = sample_disorder(&p, seed, r as u64)?;
                let h = build_hamiltonian(&p, &real)?;
                let hat = assemble_hat_form(&p, &real)?;
                let conv = verify_quadratic_form(&h, &hat)?;
                if let Some(c0) = conv0 {
                    if c0.scale != conv.scale || (c0.shift_per_site - conv.shift_per_site).abs() > 1e-10 {
                        return Err(Error::ConventionMismatch {
                            residual: conv.residual,
                            scale: conv.scale,
                            shift: conv.shift,
                        });
                    }
                } else {
                    conv0 = Some(conv);
                }
                qf = qf.max(conv.residual);
                let mut ev: Vec<f64> =
                    nalgebra::SymmetricEigen::new(h.real()).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                let spec = free_fermion_spectrum(&hat, &conv);
                ff = ff.max(ev.iter().zip(&spec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
                if cfg.n <= 8 {
                    let hr = verify_heisenberg_identity(&p, &real, &conv, &cfg.t_list)?;
                    heis = Some(heis.unwrap_or(0.0).max(hr));
                }
            }
            let conv = conv0.expect("at least one realization");
            out.json(
                &format!("{stem}.json"),
                json!({
                    "convention": { "scale": conv.scale, "shift_per_site": conv.shift_per_site },
                    "car": car,
                    "max_quadratic_form_residual": qf,
                    "max_free_fermion_spectrum_error": ff,
                    "max_heisenberg_residual": heis,
                }),
            )?;
        }
        Command::LrStats => {
            let p = cfg.model_params()?;
            let lr = &cfg.lr;
            let ks: Vec<usize> = if lr.ks.is_empty() { (lr.j + 1..=cfg.n).collect() } else { lr.ks.clone() };
            if lr.t_points == 0 || !(lr.t_max >= 0.0) {
                return Err(Error::Config("lr.t_points must be positive and lr.t_max nonnegative".into()));
            }
            let grid: Vec<f64> = if lr.t_points == 1 {
                vec![0.0]
            } else {
                (0..lr.t_points).map(|i| lr.t_max * i as f64 / (lr.t_points - 1) as f64).collect()
            };
            let rows = lr_commutator_stats(&p, lr.j, &ks, lr.a, lr.b, &grid, cfg.realizations, seed)?;
            let lines: Vec<String> =
                rows.iter().map(|r| format!("{},{},{}", r.separation, r.mean_sup_comm, r.se)).collect();
            out.csv(&format!("{stem}.csv"), "separation,mean_sup_comm,se", &lines)?;
        }
    }
    for p in &out.written {
        log(&format!("wrote {}", p.display()));
    }
    Ok(out.written)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={s:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(cli.command, &cfg, &cli.out, cli.verbose))
}

pub fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
