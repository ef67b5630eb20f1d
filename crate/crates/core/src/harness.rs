//! Experiment configuration, scenario runners and report output.
//!
//! A run reads a JSON config, executes one scenario, and produces a table
//! (written as CSV) plus named metrics with standard errors. Floats are
//! written with 17 significant digits and nothing time-dependent goes into
//! the output, so a fixed seed gives byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{self, AllocationParams};
use crate::channel::{make_channel, ChannelModel, TransmittanceSpec};
use crate::decoding;
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::partial_csi::{self, rayleigh_sampler};
use crate::permutation_code::{self, Layout, PairPolicy, PermutationKind};
use crate::precoding::{self, EquivalenceConstellation};
use crate::rng;
use crate::singular_layer::{self, FactorError};
use crate::stats::{mean_se, par_trials, Estimate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    EigenCapacity,
    AllocationSweep,
    PartialCsi,
    PrecodingCompare,
    DecoderMmse,
    PermutationCode,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::EigenCapacity => "eigen_capacity",
            Scenario::AllocationSweep => "allocation_sweep",
            Scenario::PartialCsi => "partial_csi",
            Scenario::PrecodingCompare => "precoding_compare",
            Scenario::DecoderMmse => "decoder_mmse",
            Scenario::PermutationCode => "permutation_code",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scenario '{s}'")))
    }

    pub const ALL: [Scenario; 6] = [
        Scenario::EigenCapacity,
        Scenario::AllocationSweep,
        Scenario::PartialCsi,
        Scenario::PrecodingCompare,
        Scenario::DecoderMmse,
        Scenario::PermutationCode,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransmittanceField {
    List(Vec<[f64; 2]>),
    Draw { draw: String, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub n: usize,
    pub transmittances: TransmittanceField,
    #[serde(rename = "sigma_N_sq")]
    pub sigma_n_sq: f64,
    pub nu_eve: f64,
}

impl ChannelSpec {
    pub fn build(&self) -> Result<ChannelModel> {
        let spec = match &self.transmittances {
            TransmittanceField::List(v) => {
                TransmittanceSpec::Explicit(v.iter().map(|p| C64::new(p[0], p[1])).collect())
            }
            TransmittanceField::Draw { draw, seed } => {
                if draw != "uniform" {
                    return Err(Error::Config(format!("unknown transmittance draw '{draw}'")));
                }
                TransmittanceSpec::Uniform { seed: *seed }
            }
        };
        make_channel(self.n, &spec, self.sigma_n_sq, self.nu_eve)
    }
}

/// Scenario parameters. Every key is always present so sweeps can address it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Allocation constant in `σ''² = (1+c) σ_ω²`.
    pub c: f64,
    pub nu_kappa: f64,
    /// Per-stream SNR `σ'²/σ_N²`.
    pub snr: f64,
    pub snr_grid: Option<Vec<f64>>,
    pub nu_eve_grid: Option<Vec<f64>>,
    /// `diagonal` (from the channel), `identity` or `rayleigh`.
    pub transfer: String,
    pub k_in: usize,
    pub k_out: usize,
    /// Frobenius norm of the factor perturbation seen by encoder/decoder.
    pub perturbation_norm: f64,
    /// Noise variance per quadrature when no channel is configured.
    pub sigma_n_sq: f64,
    pub sigma_omega: f64,
    /// Interference scale; defaults to ten lattice periods.
    pub sigma_gamma: Option<f64>,
    pub sigma_gamma_grid: Option<Vec<f64>>,
    /// Residual eigenchannel interference added to the decoder noise.
    pub sigma_gamma_sq: f64,
    pub users: usize,
    pub bits: u32,
    pub l: usize,
    /// `designed`, `random` or `identity`.
    pub permutation: String,
    pub spacing: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            c: 1.0,
            nu_kappa: 0.0,
            snr: 1.0,
            snr_grid: None,
            nu_eve_grid: None,
            transfer: "diagonal".into(),
            k_in: 2,
            k_out: 2,
            perturbation_norm: 0.0,
            sigma_n_sq: 1.0,
            sigma_omega: 1.0,
            sigma_gamma: None,
            sigma_gamma_grid: None,
            sigma_gamma_sq: 0.0,
            users: 2,
            bits: 4,
            l: 2,
            permutation: "designed".into(),
            spacing: 2.0,
        }
    }
}

fn default_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            channel: None,
            params: Params::default(),
            trials: default_trials(),
            seed: 0,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        let p = &self.params;
        if !["diagonal", "identity", "rayleigh"].contains(&p.transfer.as_str()) {
            return Err(Error::Config(format!("unknown transfer '{}'", p.transfer)));
        }
        if !["designed", "random", "identity"].contains(&p.permutation.as_str()) {
            return Err(Error::Config(format!("unknown permutation '{}'", p.permutation)));
        }
        if p.k_in == 0 || p.k_out == 0 || p.users == 0 || p.l == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        let needs_channel = self.scenario == Scenario::AllocationSweep
            || (self.scenario == Scenario::EigenCapacity && p.transfer == "diagonal");
        if needs_channel && self.channel.is_none() {
            return Err(Error::Config(format!(
                "scenario {} needs a channel section",
                self.scenario.name()
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output path.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&Self {
            out: None,
            ..self.clone()
        })
        .expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn noise_variance(&self) -> f64 {
        self.channel
            .as_ref()
            .map_or(self.params.sigma_n_sq, |c| c.sigma_n_sq)
    }

    /// Copy with `name` set to `value`, looked up in params, then channel,
    /// then the top level (`trials`, `seed`).
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let slot = {
            let obj = v.as_object_mut().expect("object");
            if obj["params"].as_object().is_some_and(|m| m.contains_key(name)) {
                obj.get_mut("params").and_then(|p| p.get_mut(name))
            } else if obj
                .get("channel")
                .and_then(|c| c.as_object())
                .is_some_and(|m| m.contains_key(name) && name != "transmittances")
            {
                obj.get_mut("channel").and_then(|p| p.get_mut(name))
            } else if name == "trials" || name == "seed" {
                obj.get_mut(name)
            } else {
                None
            }
        };
        let slot = slot.ok_or_else(|| Error::Config(format!("unknown sweep parameter '{name}'")))?;
        let integral = matches!(slot, serde_json::Value::Number(n) if n.is_u64())
            || name == "trials"
            || name == "seed";
        *slot = if integral {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("parameter '{name}' needs a whole number")));
            }
            serde_json::Value::from(value as u64)
        } else {
            serde_json::Value::from(value)
        };
        let cfg: Self = serde_json::from_value(v)
            .map_err(|e| Error::Config(format!("parameter '{name}' = {value}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub trials: usize,
}

impl Metric {
    fn exact(name: &str, v: f64) -> Self {
        Self {
            name: name.into(),
            estimate: v,
            se: 0.0,
            trials: 1,
        }
    }

    fn mc(name: &str, e: Estimate) -> Self {
        Self {
            name: name.into(),
            estimate: e.mean,
            se: e.se,
            trials: e.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: Scenario,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub metrics: Vec<Metric>,
    pub config_hash: String,
    pub version: String,
}

/// 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario.name());
        let _ = writeln!(s, "version: {}", self.version);
        let _ = writeln!(s, "config_sha256: {}", self.config_hash);
        let _ = writeln!(s, "rows: {}", self.rows.len());
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "{:<28} {:>24}  se {:>24}  n {}",
                m.name,
                fmt_f(m.estimate),
                fmt_f(m.se),
                m.trials
            );
        }
        s
    }
}

fn table(header: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    (header.iter().map(|s| s.to_string()).collect(), Vec::new())
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (header, rows, metrics) = match cfg.scenario {
        Scenario::EigenCapacity => eigen_capacity(cfg)?,
        Scenario::AllocationSweep => allocation_sweep(cfg)?,
        Scenario::PartialCsi => partial_csi_run(cfg)?,
        Scenario::PrecodingCompare => precoding_compare(cfg)?,
        Scenario::DecoderMmse => decoder_mmse(cfg)?,
        Scenario::PermutationCode => permutation_run(cfg)?,
    };
    Ok(RunReport {
        scenario: cfg.scenario,
        header,
        rows,
        metrics,
        config_hash: cfg.hash(),
        version: VERSION.into(),
    })
}

type Output = (Vec<String>, Vec<Vec<String>>, Vec<Metric>);

fn transfer_matrix(cfg: &ExperimentConfig) -> Result<CMatrix> {
    let p = &cfg.params;
    match p.transfer.as_str() {
        "diagonal" => {
            let ch = cfg.channel.as_ref().expect("validated").build()?;
            if ch.l() == 0 {
                return Err(Error::InfeasibleAllocation {
                    nu_eve: ch.nu_eve(),
                    nu_prime_min: f64::INFINITY,
                });
            }
            Ok(ch.transfer_matrix())
        }
        "identity" => Ok(CMatrix::identity(p.k_in)),
        _ => {
            let mut r = rng::stream(cfg.seed, u64::MAX);
            Ok(rng::complex_gaussian_matrix(&mut r, p.k_out, p.k_in, 1.0))
        }
    }
}

fn eigen_capacity(cfg: &ExperimentConfig) -> Result<Output> {
    let ft = transfer_matrix(cfg)?;
    let layer = singular_layer::svd_of_channel(&ft)?;
    let sigma_n_sq = cfg.noise_variance();
    let n_min = layer.n_min;
    let sp = cfg.params.snr * sigma_n_sq;
    let sigma_omega_sq = sp * n_min as f64;
    let err = if cfg.params.perturbation_norm > 0.0 {
        FactorError::Perturbed {
            norm: cfg.params.perturbation_norm,
            seed: cfg.seed,
        }
    } else {
        FactorError::None
    };
    let (interf, _) =
        singular_layer::measure_interference(&ft, err, sp, sigma_n_sq, cfg.trials, cfg.seed)?;
    let (header, mut rows) = table(&["eigen_index", "lambda", "sigma_prime_sq", "capacity_bits"]);
    for (i, &l) in layer.gamma.iter().enumerate() {
        rows.push(vec![
            i.to_string(),
            fmt_f(l),
            fmt_f(sp),
            fmt_f(allocation::eigen_capacity(&[l], sp, sigma_n_sq, 0.0)),
        ]);
    }
    let c = allocation::eigen_capacity(&layer.gamma, sigma_omega_sq, sigma_n_sq, 0.0);
    let k_s = layer.input_covariance(&vec![sp; n_min]);
    let c_det = allocation::log_det_capacity(&ft, &k_s, sigma_n_sq)?;
    let c_int = allocation::eigen_capacity(&layer.gamma, sigma_omega_sq, sigma_n_sq, interf.average);
    Ok((
        header,
        rows,
        vec![
            Metric::exact("C_eigen_bits", c),
            Metric::exact("C_logdet_bits", c_det),
            Metric {
                name: "sigma_gamma_sq".into(),
                estimate: interf.average,
                se: 0.0,
                trials: cfg.trials,
            },
            Metric::exact("C_eigen_interference_bits", c_int),
        ],
    ))
}

fn allocation_sweep(cfg: &ExperimentConfig) -> Result<Output> {
    let base = cfg.channel.as_ref().expect("validated").build()?;
    let grid = cfg
        .params
        .nu_eve_grid
        .clone()
        .unwrap_or_else(|| vec![base.nu_eve()]);
    let params = AllocationParams {
        c: cfg.params.c,
        nu_kappa: cfg.params.nu_kappa,
    };
    let (header, mut rows) = table(&[
        "run_id",
        "n_min",
        "l",
        "nu_eve",
        "sigma_N_sq",
        "c",
        "mu",
        "nu_min",
        "nu_prime_min",
        "pi",
        "sigma_dprime",
        "C_eigen_bits",
        "C_sub_bits",
    ]);
    let mut metrics = Vec::new();
    for (k, &nu) in grid.iter().enumerate() {
        let ch = base.with_nu_eve(nu)?;
        if ch.l() == 0 {
            return Err(Error::InfeasibleAllocation {
                nu_eve: nu,
                nu_prime_min: f64::INFINITY,
            });
        }
        let layer = singular_layer::svd_of_channel(&ch.transfer_matrix())?;
        let plan = allocation::allocate(&layer, &ch, params)?;
        let ce = allocation::capacity_eigen(&plan, &layer, 0.0);
        let cs = allocation::capacity_subchannels(&plan, &ch);
        rows.push(vec![
            k.to_string(),
            plan.n_min.to_string(),
            plan.l.to_string(),
            fmt_f(nu),
            fmt_f(plan.sigma_n_sq),
            fmt_f(plan.c),
            fmt_f(plan.mu),
            fmt_f(plan.nu_min),
            fmt_f(plan.nu_prime_min),
            fmt_f(plan.pi_term),
            fmt_f(plan.sigma_dprime_sq),
            fmt_f(ce),
            fmt_f(cs),
        ]);
        if k == 0 {
            metrics = vec![
                Metric::exact("good_set_size", ch.l() as f64),
                Metric::exact("pi", plan.pi_term),
                Metric::exact("sigma_dprime_sq", plan.sigma_dprime_sq),
                Metric::exact("C_eigen_bits", ce),
                Metric::exact("C_sub_bits", cs),
            ];
        }
    }
    Ok((header, rows, metrics))
}

fn partial_csi_run(cfg: &ExperimentConfig) -> Result<Output> {
    let p = &cfg.params;
    let (k_in, k_out) = (p.k_in, p.k_out);
    if k_in > k_out {
        return Err(invalid("partial_csi needs k_in <= k_out"));
    }
    let n_min = k_in;
    let sigma_n_sq = cfg.noise_variance();
    let grid = p.snr_grid.clone().unwrap_or_else(|| vec![p.snr]);
    let (header, mut rows) = table(&[
        "snr",
        "lhs_jensen",
        "rhs_jensen",
        "cap_mc",
        "cap_closed",
        "se",
        "rel_error",
    ]);
    let mut metrics = Vec::new();
    for (k, &snr) in grid.iter().enumerate() {
        let sp = snr * sigma_n_sq;
        let sampler = rayleigh_sampler(k_out, k_in);
        let jg = partial_csi::jensen_gap(&sampler, sp, sigma_n_sq, k_in, n_min, cfg.trials, cfg.seed)?;
        let closed = partial_csi::low_snr_partial_capacity(k_in, k_out, sp, sigma_n_sq, k_out as f64);
        // The ensemble mean of Tr F F† is known, so its linear term serves as
        // a control variate for the log-det average.
        let a = sp / (k_in as f64 * sigma_n_sq);
        let k_s = CMatrix::from_real_diag(&vec![sp / k_in as f64; k_in]);
        let diffs: Vec<Result<f64>> = par_trials(cfg.trials, cfg.seed, |r, _| {
            let f = sampler(r);
            let ld = allocation::log_det_capacity(&f, &k_s, sigma_n_sq)?;
            let tr = f.matmul(&f.adjoint()).trace().re;
            Ok(ld - a * tr * std::f64::consts::LOG2_E)
        });
        let diffs: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
        let d = mean_se(&diffs);
        let cap = closed.trace_form + d.mean;
        let rel = (cap - closed.closed_form).abs() / closed.closed_form;
        rows.push(vec![
            fmt_f(snr),
            fmt_f(jg.lhs.mean),
            fmt_f(jg.rhs.mean),
            fmt_f(cap),
            fmt_f(closed.closed_form),
            fmt_f(d.se),
            fmt_f(rel),
        ]);
        if k == 0 {
            metrics = vec![
                Metric::mc("lhs_jensen", jg.lhs),
                Metric::mc("rhs_jensen", jg.rhs),
                Metric {
                    name: "cap_mc".into(),
                    estimate: cap,
                    se: d.se,
                    trials: d.n,
                },
                Metric::exact("cap_closed", closed.closed_form),
                Metric::exact("rel_error", rel),
            ];
        }
    }
    Ok((header, rows, metrics))
}

fn precoding_compare(cfg: &ExperimentConfig) -> Result<Output> {
    let p = &cfg.params;
    let lambda = 4.0 * p.sigma_omega;
    let grid = p
        .sigma_gamma_grid
        .clone()
        .unwrap_or_else(|| vec![p.sigma_gamma.unwrap_or(10.0 * lambda)]);
    let (header, mut rows) = table(&[
        "sigma_gamma",
        "lambda",
        "naive_mean_energy",
        "naive_se",
        "sia_mean_energy",
        "sia_se",
        "sia_max_energy",
        "decode_error_rate",
    ]);
    let mut metrics = Vec::new();
    for (k, &sg) in grid.iter().enumerate() {
        let ec = EquivalenceConstellation::standard(p.sigma_omega, sg)?;
        let cmp = precoding::compare_precoders(&ec, sg, cfg.trials, cfg.seed)?;
        rows.push(vec![
            fmt_f(sg),
            fmt_f(lambda),
            fmt_f(cmp.naive_energy.mean),
            fmt_f(cmp.naive_energy.se),
            fmt_f(cmp.sia_energy.mean),
            fmt_f(cmp.sia_energy.se),
            fmt_f(cmp.sia_max_energy),
            fmt_f(cmp.decode_error_rate),
        ]);
        if k == 0 {
            metrics = vec![
                Metric::mc("naive_energy", cmp.naive_energy),
                Metric::mc("sia_energy", cmp.sia_energy),
                Metric::exact("sia_max_energy", cmp.sia_max_energy),
                Metric::exact("energy_bound", 2.0 * (lambda / 2.0).powi(2)),
                Metric::exact("decode_error_rate", cmp.decode_error_rate),
            ];
        }
    }
    Ok((header, rows, metrics))
}

fn decoder_mmse(cfg: &ExperimentConfig) -> Result<Output> {
    let p = &cfg.params;
    let mut r = rng::stream(cfg.seed, u64::MAX);
    let h: Vec<Vec<C64>> = (0..p.users)
        .map(|_| rng::complex_gaussian_vec(&mut r, 0.5 / p.k_out as f64, p.k_out))
        .collect();
    // Total complex noise variance 2(σ_N² + σ_γ²).
    let noise = 2.0 * (cfg.noise_variance() + p.sigma_gamma_sq);
    let powers = vec![p.snr * noise; p.users];
    let order: Vec<usize> = (0..p.users).collect();
    let chain = decoding::chain_rule_rate(&h, &powers, noise, &order)?;
    let (header, mut rows) = table(&["user", "snir_db", "mse", "rate_bits", "order_index"]);
    for u in &chain.users {
        rows.push(vec![
            u.user.to_string(),
            fmt_f(10.0 * u.snir.log10()),
            fmt_f(u.mse),
            fmt_f(u.rate_bits),
            u.order_index.to_string(),
        ]);
    }
    let dec = decoding::build_decoder(&h, &powers, noise, 0)?;
    let mc = decoding::monte_carlo_mse(&dec, &h, &powers, noise, cfg.trials, cfg.seed);
    Ok((
        header,
        rows,
        vec![
            Metric::mc("mse_user0_mc", mc.mse),
            Metric::exact("mse_user0_theory", mc.theory),
            Metric::exact("snir_user0", dec.snir()),
            Metric::exact("sum_rate_bits", chain.sum_rate),
            Metric::exact("joint_logdet_bits", chain.joint),
        ],
    ))
}

fn permutation_kind(cfg: &ExperimentConfig) -> PermutationKind {
    match cfg.params.permutation.as_str() {
        "identity" => PermutationKind::Identity,
        "random" => PermutationKind::Random { seed: cfg.seed },
        _ => PermutationKind::Designed,
    }
}

fn permutation_run(cfg: &ExperimentConfig) -> Result<Output> {
    let p = &cfg.params;
    let pc = permutation_code::build_constellation(
        p.l,
        p.bits,
        &Layout::SquareGrid { spacing: p.spacing },
        permutation_kind(cfg),
    )?;
    let (header, mut rows) = table(&["subchannel", "symbol_index", "x", "p"]);
    for (i, m, x, y) in pc.export_rows() {
        rows.push(vec![i.to_string(), m.to_string(), fmt_f(x), fmt_f(y)]);
    }
    let pair = pc.reference_pair(PairPolicy::MinimalDistance)?;
    let gains = vec![1.0; pc.l()];
    let mc = permutation_code::monte_carlo_pep(&pair, &gains, cfg.trials, cfg.seed);
    let (o, _) = pc.worst_pair_optimality(p.bits as f64);
    let mut metrics = vec![
        Metric::exact("worst_pair_optimality", o),
        Metric::exact("worst_pair_error", pc.worst_pair_error()),
        Metric::exact("empirical_c", pc.empirical_c()),
        Metric::exact(
            "pep_min_pair_formula",
            permutation_code::pairwise_error_prob(&pair, &gains, pc.snr_scale),
        ),
        Metric::mc("pep_min_pair_mc", mc),
    ];
    if pc.l() > 1 {
        metrics.insert(0, Metric::exact("achieved_u", pc.achieved_u(1)));
    }
    Ok((header, rows, metrics))
}

/// Long-format sweep: one row group per grid value, in grid order.
pub fn sweep(cfg: &ExperimentConfig, parameter: &str, grid: &[f64]) -> Result<RunReport> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let (header, mut rows) = table(&[
        "grid_index",
        "parameter",
        "value",
        "metric",
        "estimate",
        "se",
        "trials",
    ]);
    let mut metrics = Vec::new();
    for (k, &v) in grid.iter().enumerate() {
        let c = cfg.with_parameter(parameter, v)?;
        let rep = run(&c)?;
        for m in rep.metrics {
            rows.push(vec![
                k.to_string(),
                parameter.to_string(),
                fmt_f(v),
                m.name.clone(),
                fmt_f(m.estimate),
                fmt_f(m.se),
                m.trials.to_string(),
            ]);
            metrics.push(Metric {
                name: format!("{}[{k}]", m.name),
                ..m
            });
        }
    }
    Ok(RunReport {
        scenario: cfg.scenario,
        header,
        rows,
        metrics,
        config_hash: cfg.hash(),
        version: VERSION.into(),
    })
}

/// Lattice-replicated SIA constellation as `(class_kx, class_kp, base_index, x, p)`.
pub fn sia_constellation_report(cfg: &ExperimentConfig) -> Result<RunReport> {
    let p = &cfg.params;
    let lambda = 4.0 * p.sigma_omega;
    let ec = EquivalenceConstellation::standard(p.sigma_omega, p.sigma_gamma.unwrap_or(lambda))?;
    let (header, mut rows) = table(&["class_kx", "class_kp", "base_index", "x", "p"]);
    for (kx, kp, b, z) in ec.replicas_in_domain() {
        rows.push(vec![
            kx.to_string(),
            kp.to_string(),
            b.to_string(),
            fmt_f(z.re),
            fmt_f(z.im),
        ]);
    }
    Ok(RunReport {
        scenario: cfg.scenario,
        header,
        rows,
        metrics: vec![
            Metric::exact("lattice_period", ec.lattice_period),
            Metric::exact("min_distance", ec.min_distance()),
        ],
        config_hash: cfg.hash(),
        version: VERSION.into(),
    })
}

/// Constellation export for `export-constellation`: permutation layout for
/// the `permutation_code` scenario, SIA lattice otherwise.
pub fn constellation_report(cfg: &ExperimentConfig) -> Result<RunReport> {
    if cfg.scenario == Scenario::PermutationCode {
        let mut rep = run(cfg)?;
        rep.metrics.retain(|m| m.name == "achieved_u" || m.name == "empirical_c");
        Ok(rep)
    } else {
        sia_constellation_report(cfg)
    }
}

/// Writes `path` and `path.summary.txt`.
pub fn write_report(rep: &RunReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    rep.write_csv(path)?;
    let mut s = path.as_os_str().to_owned();
    s.push(".summary.txt");
    fs::write(PathBuf::from(s), rep.summary())?;
    Ok(())
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::InfeasibleAllocation { .. } => 3,
        Error::RankDeficient(_) => 4,
        Error::Io(_) | Error::Csv(_) => 5,
        Error::InvalidArgument(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::parse(s.name()).unwrap(), s);
        }
        assert!(Scenario::parse("nope").is_err());
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let e = ExperimentConfig::from_json(r#"{"scenario":"partial_csi","bogus":1}"#);
        assert!(matches!(e, Err(Error::Config(_))));
        let e = ExperimentConfig::from_json(r#"{"scenario":"partial_csi","params":{"snrr":1}}"#);
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn sweep_parameter_lookup() {
        let cfg = ExperimentConfig::new(Scenario::PartialCsi);
        assert_eq!(cfg.with_parameter("snr", 0.5).unwrap().params.snr, 0.5);
        assert_eq!(cfg.with_parameter("k_in", 1.0).unwrap().params.k_in, 1);
        assert!(cfg.with_parameter("k_in", 1.5).is_err());
        assert!(cfg.with_parameter("missing", 1.0).is_err());
        assert_eq!(cfg.with_parameter("trials", 7.0).unwrap().trials, 7);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(Scenario::PartialCsi);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn fmt_has_seventeen_digits() {
        assert_eq!(fmt_f(0.1), "1.0000000000000001e-1");
    }
}
