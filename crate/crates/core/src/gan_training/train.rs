use std::io::Write as _;
use std::path::{Path, PathBuf};

use flowsynth_tensor::{Adam, AdamConfig, Graph, Mat};
use rand::seq::index;
use rand::Rng as _;

use super::config::TrainingConfig;
use super::losses::{
    adversarial_loss_graph, critic_loss_graph, generator_loss_graph, interpolate, reconstruction_loss_graph,
    Mixing,
};
use super::swd::sliced_wasserstein_with;
use crate::error::{Error, Result};
use crate::models::{sample_latent, sample_noise, Checkpoint, Mode, Networks, OutputLayout, ParamSet, GMAC_MAGIC};
use crate::rng::{self, Rng};

const MONITOR_GUMBEL: &str = "monitor.gumbel";

/// One row of the training log, averaged over the epoch's steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub l_c: f64,
    pub l_d: f64,
    pub l_r_ae: f64,
    pub l_g_ae: f64,
    pub alpha: f64,
    pub beta: f64,
    pub entropy: f64,
    pub l_g_f: f64,
    pub grad_norm: f64,
    pub swd: Option<f64>,
}

impl LossRecord {
    pub const HEADER: &'static str = "epoch,l_c,l_d,l_r_ae,l_g_ae,alpha,beta,entropy,l_g_f,grad_norm,swd";

    pub fn is_finite(&self) -> bool {
        [
            self.l_c,
            self.l_d,
            self.l_r_ae,
            self.l_g_ae,
            self.alpha,
            self.beta,
            self.entropy,
            self.l_g_f,
            self.grad_norm,
        ]
        .iter()
        .all(|x| x.is_finite())
            && self.swd.is_none_or(f64::is_finite)
    }

    pub fn csv_row(&self) -> String {
        let swd = self.swd.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.l_c,
            self.l_d,
            self.l_r_ae,
            self.l_g_ae,
            self.alpha,
            self.beta,
            self.entropy,
            self.l_g_f,
            self.grad_norm,
            swd
        )
    }
}

pub fn write_loss_log(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut out = String::from(LossRecord::HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounters {
    pub critic: u64,
    pub generator: u64,
    pub ae: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticStats {
    pub loss: f64,
    pub gap: f64,
    pub gp: f64,
    pub mean_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorStats {
    pub l_d: f64,
    pub l_g_ae: f64,
    pub alpha: f64,
    pub beta: f64,
    pub entropy: f64,
    pub l_g_f: f64,
}

#[derive(Clone, Debug)]
struct Streams {
    latent: Rng,
    gumbel: Rng,
    interp: Rng,
    shuffle: Rng,
    monitor: Rng,
    monitor_gumbel: Rng,
}

const STREAM_NAMES: [&str; 6] = [rng::LATENT, rng::GUMBEL, rng::INTERP, rng::SHUFFLE, rng::MONITOR, MONITOR_GUMBEL];

impl Streams {
    fn new(seed: u64, pos: impl Fn(&str) -> u128) -> Self {
        let s = |name: &str| rng::substream_at(seed, name, pos(name));
        Streams {
            latent: s(rng::LATENT),
            gumbel: s(rng::GUMBEL),
            interp: s(rng::INTERP),
            shuffle: s(rng::SHUFFLE),
            monitor: s(rng::MONITOR),
            monitor_gumbel: s(MONITOR_GUMBEL),
        }
    }

    fn positions(&self) -> Vec<(String, u128)> {
        let all = [
            &self.latent,
            &self.gumbel,
            &self.interp,
            &self.shuffle,
            &self.monitor,
            &self.monitor_gumbel,
        ];
        STREAM_NAMES
            .iter()
            .zip(all)
            .map(|(n, r)| (n.to_string(), r.get_word_pos()))
            .collect()
    }
}

/// Everything one training run owns: weights, optimizer moments, counters
/// and random streams.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: TrainingConfig,
    pub nets: Networks,
    pub opt_critic: Adam,
    pub opt_generator: Adam,
    pub opt_gate: Adam,
    pub opt_ae: Adam,
    /// Completed epochs.
    pub epoch: usize,
    pub counters: UpdateCounters,
    streams: Streams,
}

fn gp_adam(lr: f64, p: &ParamSet) -> Adam {
    Adam::new(AdamConfig::new(lr, 0.0, 0.9), p.shapes())
}

fn check_finite(what: &str, value: f64, grads: &[Mat]) -> Result<()> {
    if !value.is_finite() || grads.iter().any(|g| !g.all_finite()) {
        return Err(Error::Numeric(format!("non-finite {what}")));
    }
    Ok(())
}

impl TrainState {
    pub fn new(config: TrainingConfig, layout: OutputLayout) -> Result<Self> {
        config.validate()?;
        let nets = Networks::init(config.seed, &config.model_config(), layout)?;
        Ok(TrainState {
            opt_critic: gp_adam(config.lr_critic, &nets.critic.params),
            opt_generator: gp_adam(config.lr_generator, &nets.generator.params),
            opt_gate: gp_adam(config.lr_generator, &nets.gate.params),
            opt_ae: Adam::new(AdamConfig::new(config.lr_ae, 0.9, 0.999), nets.ae.params.shapes()),
            streams: Streams::new(config.seed, |_| 0),
            epoch: 0,
            counters: UpdateCounters::default(),
            config,
            nets,
        })
    }

    pub fn layout(&self) -> &OutputLayout {
        &self.nets.generator.layout
    }

    /// Random rows (without replacement) of `data`, `min(B, n)` of them.
    pub fn sample_batch(&mut self, data: &Mat) -> Mat {
        let n = data.rows();
        let b = self.config.batch_size.min(n);
        let idx = index::sample(&mut self.streams.shuffle, n, b);
        let f = data.cols();
        let mut out = Vec::with_capacity(b * f);
        for r in idx.iter() {
            out.extend_from_slice(data.row(r));
        }
        Mat::from_vec(b, f, out)
    }

    fn latent_batch(&mut self, b: usize) -> (Mat, Vec<Mat>) {
        let z = sample_latent(&mut self.streams.latent, b, self.config.z_dim);
        let noise = sample_noise(&mut self.streams.gumbel, b, &self.nets.generator.layout);
        (z, noise)
    }

    /// Hard-mode fakes from the current (frozen) generator.
    fn fake_values(&self, z: Mat, noise: &[Mat], tau: f64) -> Result<Mat> {
        let gen = &self.nets.generator;
        let mut g = Graph::new();
        let vars = gen.params.bind(&mut g, false);
        let zv = g.constant(z);
        let out = gen.forward(&mut g, &vars, zv, noise, tau, Mode::Hard)?;
        Ok(g.value(out.x).clone())
    }

    /// One critic update on `real`; the generator is evaluated as constants.
    pub fn critic_step(&mut self, real: &Mat, tau: f64) -> Result<CriticStats> {
        let b = real.rows();
        let (z, noise) = self.latent_batch(b);
        let fake = self.fake_values(z, &noise, tau)?;
        let eps: Vec<f64> = (0..b).map(|_| self.streams.interp.random::<f64>()).collect();
        let x_hat = interpolate(real, &fake, &eps)?;
        let critic = &self.nets.critic;
        let mut g = Graph::new();
        let vars = critic.params.bind(&mut g, true);
        let cl = critic_loss_graph(&mut g, critic, &vars, real, &fake, &x_hat, self.config.lambda_gp);
        let grads: Vec<Mat> = g.grad(cl.loss, &vars).into_iter().map(|v| g.value(v).clone()).collect();
        let stats = CriticStats {
            loss: g.value(cl.loss).get(0, 0),
            gap: g.value(cl.gap).get(0, 0),
            gp: g.value(cl.gp).get(0, 0),
            mean_norm: g.value(cl.norms).mean(),
        };
        check_finite("critic loss", stats.loss, &grads)?;
        self.opt_critic.update(self.nets.critic.params.values_mut(), &grads);
        self.counters.critic += 1;
        Ok(stats)
    }

    /// One autoencoder update on real rows; returns `L_r^AE` before the update.
    pub fn ae_real_step(&mut self, real: &Mat) -> Result<f64> {
        let ae = &self.nets.ae;
        let mut g = Graph::new();
        let vars = ae.params.bind(&mut g, true);
        let x = g.constant(real.clone());
        let loss = reconstruction_loss_graph(&mut g, ae, &vars, x);
        let grads: Vec<Mat> = g.grad(loss, &vars).into_iter().map(|v| g.value(v).clone()).collect();
        let l = g.value(loss).get(0, 0);
        check_finite("autoencoder loss", l, &grads)?;
        self.opt_ae.update(self.nets.ae.params.values_mut(), &grads);
        self.counters.ae += 1;
        Ok(l)
    }

    /// One joint generator (and gate) update on `b` fresh latent draws.
    /// Critic and autoencoder enter as constants.
    pub fn generator_step(&mut self, b: usize, tau: f64) -> Result<GeneratorStats> {
        let (z, noise) = self.latent_batch(b);
        let cfg = &self.config;
        let nets = &self.nets;
        let mut g = Graph::new();
        let gen_vars = nets.generator.params.bind(&mut g, true);
        let critic_vars = nets.critic.params.bind(&mut g, false);
        let zv = g.constant(z);
        let out = nets.generator.forward(&mut g, &gen_vars, zv, &noise, tau, Mode::Hard)?;
        let l_d = adversarial_loss_graph(&mut g, &nets.critic, &critic_vars, out.x);
        let l_ae = if cfg.use_ae_constraint {
            let ae_vars = nets.ae.params.bind(&mut g, false);
            Some(reconstruction_loss_graph(&mut g, &nets.ae, &ae_vars, out.x))
        } else {
            None
        };
        let gated = cfg.use_gate && cfg.use_ae_constraint;
        let gate_vars = if gated {
            nets.gate.params.bind(&mut g, true)
        } else {
            Vec::new()
        };
        let mixing = if gated {
            Mixing::Gated {
                gate: &nets.gate,
                vars: &gate_vars,
                gamma: cfg.gamma,
                a: cfg.gate_min,
                b: cfg.gate_max,
            }
        } else {
            Mixing::Equal
        };
        let gl = generator_loss_graph(&mut g, l_ae, l_d, mixing);
        let mut wrt = gen_vars.clone();
        wrt.extend(&gate_vars);
        let mut grads: Vec<Mat> = g.grad(gl.loss, &wrt).into_iter().map(|v| g.value(v).clone()).collect();
        let stats = GeneratorStats {
            l_d: g.value(l_d).get(0, 0),
            l_g_ae: l_ae.map_or(0.0, |v| g.value(v).get(0, 0)),
            alpha: gl.alpha,
            beta: gl.beta,
            entropy: gl.entropy,
            l_g_f: g.value(gl.loss).get(0, 0),
        };
        check_finite("generator loss", stats.l_g_f, &grads)?;
        let gate_grads = grads.split_off(gen_vars.len());
        self.opt_generator.update(self.nets.generator.params.values_mut(), &grads);
        if gated {
            self.opt_gate.update(self.nets.gate.params.values_mut(), &gate_grads);
        }
        self.counters.generator += 1;
        Ok(stats)
    }

    /// One pass of `ceil(n / B)` iterations, each `n_c` critic updates, one
    /// autoencoder update on the last critic batch, one generator update.
    pub fn run_epoch(&mut self, data: &Mat) -> Result<LossRecord> {
        let n = data.rows();
        let iters = n.div_ceil(self.config.batch_size);
        let tau = self.config.tau_at(self.epoch);
        let mut acc = LossRecord {
            epoch: self.epoch + 1,
            l_c: 0.0,
            l_d: 0.0,
            l_r_ae: 0.0,
            l_g_ae: 0.0,
            alpha: 0.0,
            beta: 0.0,
            entropy: 0.0,
            l_g_f: 0.0,
            grad_norm: 0.0,
            swd: None,
        };
        let steps = (iters * self.config.n_critic) as f64;
        for _ in 0..iters {
            let mut last = None;
            for _ in 0..self.config.n_critic {
                let batch = self.sample_batch(data);
                let s = self.critic_step(&batch, tau)?;
                acc.l_c += s.loss / steps;
                acc.grad_norm += s.mean_norm / steps;
                last = Some(batch);
            }
            if self.config.use_ae_constraint {
                let batch = last.expect("n_critic >= 1");
                acc.l_r_ae += self.ae_real_step(&batch)? / iters as f64;
            }
            let s = self.generator_step(self.config.batch_size.min(n), tau)?;
            let k = iters as f64;
            acc.l_d += s.l_d / k;
            acc.l_g_ae += s.l_g_ae / k;
            acc.alpha += s.alpha / k;
            acc.beta += s.beta / k;
            acc.entropy += s.entropy / k;
            acc.l_g_f += s.l_g_f / k;
        }
        self.epoch += 1;
        let every = self.config.swd_every;
        if every > 0 && (self.epoch % every == 0 || self.epoch == self.config.epochs) {
            acc.swd = Some(self.monitor_swd(data, tau)?);
        }
        Ok(acc)
    }

    fn monitor_swd(&mut self, data: &Mat, tau: f64) -> Result<f64> {
        let m = self.config.swd_sample.min(data.rows()).max(1);
        let idx = index::sample(&mut self.streams.monitor, data.rows(), m);
        let real = Mat::from_fn(m, data.cols(), |r, c| data.get(idx.index(r), c));
        let fake = self.nets.generator.sample(
            m,
            &mut self.streams.monitor,
            &mut self.streams.monitor_gumbel,
            tau,
            1024,
        )?;
        sliced_wasserstein_with(&real, &fake, self.config.swd_projections, &mut self.streams.monitor)
    }

    /// Temperature the generator should sample at after the epochs run so far.
    pub fn sampling_tau(&self) -> f64 {
        self.config.tau_at(self.epoch.max(1) - 1)
    }

    pub fn to_checkpoint(&self, codec_json: &str, class_name: &str) -> Checkpoint {
        let mut c = Checkpoint::new(GMAC_MAGIC);
        c.config = self.config.to_json();
        c.codec = codec_json.to_string();
        c.meta.push(("class".into(), class_name.to_string()));
        c.meta.push((
            "layout".into(),
            serde_json::to_string(self.layout()).expect("layout serializes"),
        ));
        c.epoch = self.epoch as u64;
        c.tau = self.sampling_tau();
        let sets = [
            &self.nets.generator.params,
            &self.nets.critic.params,
            &self.nets.ae.params,
            &self.nets.gate.params,
        ];
        for set in sets {
            for (n, m) in set.names().iter().zip(set.values()) {
                c.arrays.push((n.clone(), m.clone()));
            }
        }
        let opts = [
            ("critic", &self.opt_critic),
            ("generator", &self.opt_generator),
            ("gate", &self.opt_gate),
            ("ae", &self.opt_ae),
        ];
        for (name, opt) in opts {
            for (i, m) in opt.m.iter().enumerate() {
                c.arrays.push((format!("opt.{name}.m.{i}"), m.clone()));
            }
            for (i, v) in opt.v.iter().enumerate() {
                c.arrays.push((format!("opt.{name}.v.{i}"), v.clone()));
            }
            c.counters.push((format!("opt.{name}.step"), opt.step));
        }
        c.counters.push(("updates.critic".into(), self.counters.critic));
        c.counters.push(("updates.generator".into(), self.counters.generator));
        c.counters.push(("updates.ae".into(), self.counters.ae));
        c.rng_positions = self.streams.positions();
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let config = TrainingConfig::from_json(&c.config)?;
        let layout = checkpoint_layout(c)?;
        let mut s = TrainState::new(config, layout)?;
        let bad = |m: String| Error::format("GMAC checkpoint", m);
        for set in [
            &mut s.nets.generator.params,
            &mut s.nets.critic.params,
            &mut s.nets.ae.params,
            &mut s.nets.gate.params,
        ] {
            let values = set
                .names()
                .iter()
                .map(|n| c.require_array(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            set.set_values(values).map_err(bad)?;
        }
        for (name, opt) in [
            ("critic", &mut s.opt_critic),
            ("generator", &mut s.opt_generator),
            ("gate", &mut s.opt_gate),
            ("ae", &mut s.opt_ae),
        ] {
            for i in 0..opt.m.len() {
                let m = c.require_array(&format!("opt.{name}.m.{i}"))?;
                let v = c.require_array(&format!("opt.{name}.v.{i}"))?;
                if m.shape() != opt.m[i].shape() || v.shape() != opt.v[i].shape() {
                    return Err(bad(format!("optimizer state {name}.{i} has the wrong shape")));
                }
                opt.m[i] = m.clone();
                opt.v[i] = v.clone();
            }
            opt.step = c
                .counter(&format!("opt.{name}.step"))
                .ok_or_else(|| bad(format!("missing optimizer step for {name}")))?;
        }
        let counter = |n: &str| c.counter(n).ok_or_else(|| bad(format!("missing counter {n}")));
        s.counters = UpdateCounters {
            critic: counter("updates.critic")?,
            generator: counter("updates.generator")?,
            ae: counter("updates.ae")?,
        };
        for name in STREAM_NAMES {
            if c.rng_position(name).is_none() {
                return Err(bad(format!("missing stream position {name}")));
            }
        }
        s.streams = Streams::new(s.config.seed, |n| c.rng_position(n).unwrap_or(0));
        s.epoch = c.epoch as usize;
        Ok(s)
    }
}

pub fn checkpoint_layout(c: &Checkpoint) -> Result<OutputLayout> {
    let text = c
        .meta("layout")
        .ok_or_else(|| Error::format("GMAC checkpoint", "missing output layout"))?;
    serde_json::from_str(text).map_err(|e| Error::format("GMAC checkpoint", format!("bad layout: {e}")))
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Written at every checkpoint interval and after the final epoch.
    pub checkpoint_path: Option<PathBuf>,
    pub loss_log_path: Option<PathBuf>,
    pub codec_json: String,
    pub class_name: String,
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub history: Vec<LossRecord>,
}

fn check_data(data: &Mat, layout: &OutputLayout) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if data.cols() != layout.width() {
        return Err(Error::Shape(format!(
            "training rows have {} features, the generator {}",
            data.cols(),
            layout.width()
        )));
    }
    if !data.all_finite() {
        return Err(Error::Data("training rows contain non-finite values".into()));
    }
    Ok(())
}

/// Trains one generator on `data` (all rows of one class).
pub fn train(data: &Mat, layout: OutputLayout, config: &TrainingConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    check_data(data, &layout)?;
    let state = TrainState::new(config.clone(), layout)?;
    continue_training(state, data, opts, Vec::new())
}

/// Runs the remaining epochs of `state`. On a non-finite loss the offending
/// record is appended to the log, the last good checkpoint is left in place,
/// and a numeric error is returned.
pub fn continue_training(
    mut state: TrainState,
    data: &Mat,
    opts: &TrainOptions,
    mut history: Vec<LossRecord>,
) -> Result<TrainOutcome> {
    check_data(data, state.layout())?;
    let save = |s: &TrainState| -> Result<()> {
        if let Some(p) = &opts.checkpoint_path {
            s.to_checkpoint(&opts.codec_json, &opts.class_name).save(p)?;
        }
        Ok(())
    };
    while state.epoch < state.config.epochs {
        let epoch = state.epoch + 1;
        let failure = match state.run_epoch(data) {
            Ok(r) if r.is_finite() => {
                log::debug!("epoch {epoch}: {}", r.csv_row());
                history.push(r);
                None
            }
            Ok(r) => {
                let msg = format!("epoch {epoch}: non-finite loss record {}", r.csv_row());
                history.push(r);
                Some(Error::Numeric(msg))
            }
            Err(Error::Numeric(m)) => Some(Error::Numeric(format!("epoch {epoch}: {m}"))),
            Err(other) => Some(other),
        };
        if let Some(e) = failure {
            if let Some(p) = &opts.loss_log_path {
                write_loss_log(p, &history)?;
            }
            return Err(e);
        }
        let every = state.config.checkpoint_every;
        if every > 0 && state.epoch % every == 0 && state.epoch < state.config.epochs {
            save(&state)?;
        }
    }
    save(&state)?;
    if let Some(p) = &opts.loss_log_path {
        write_loss_log(p, &history)?;
    }
    Ok(TrainOutcome { state, history })
}
