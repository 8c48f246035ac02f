//! Fixtures and checks shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

pub mod nslkdd;
pub mod oracles;

use flowsynth::gan_training::losses::{
    adversarial_loss_graph, critic_loss_graph, generator_loss_graph, gradient_penalty_graph,
    reconstruction_loss_graph, Mixing,
};
use flowsynth::gan_training::{interpolate, TrainState, TrainingConfig};
use flowsynth::models::{
    argmax, gumbel_softmax, sample_latent, sample_noise, Critic, GumbelDraw, Mode, ModelConfig, Networks,
    OutputField, OutputLayout, ParamSet,
};
use flowsynth::rng::{self, Rng};
use flowsynth_tensor::{Adam, AdamConfig, Graph, Mat, Var};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// `F = 3`: two continuous features around one binary discrete field.
pub fn toy_layout() -> OutputLayout {
    OutputLayout {
        fields: vec![
            OutputField::Continuous { name: "bytes".into() },
            OutputField::Discrete {
                name: "proto".into(),
                codes: vec![-1.0, 1.0],
            },
            OutputField::Continuous { name: "duration".into() },
        ],
    }
}

/// Two discrete fields of different cardinality plus continuous columns.
pub fn mixed_layout() -> OutputLayout {
    OutputLayout {
        fields: vec![
            OutputField::Discrete {
                name: "service".into(),
                codes: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            },
            OutputField::Continuous { name: "a".into() },
            OutputField::Discrete {
                name: "flag".into(),
                codes: vec![-1.0, 0.0, 1.0],
            },
            OutputField::Continuous { name: "b".into() },
            OutputField::Continuous { name: "c".into() },
        ],
    }
}

pub fn tiny_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        z_dim: 4,
        d_m: 4,
        d_k: 4,
        gen_hidden: vec![8, 8],
        critic_hidden: vec![8, 8],
        ae_hidden: 6,
        gate_hidden: 4,
        batch_size: 16,
        epochs: 3,
        swd_projections: 8,
        swd_sample: 64,
        seed,
        ..TrainingConfig::default()
    }
}

/// Rows valid under `layout`: codes for discrete columns, `[-1, 1]` otherwise.
pub fn layout_rows(layout: &OutputLayout, n: usize, rng: &mut Rng) -> Mat {
    let f = layout.width();
    Mat::from_fn(n, f, |_, c| match &layout.fields[c] {
        OutputField::Discrete { codes, .. } => codes[rng.random_range(0..codes.len())],
        OutputField::Continuous { .. } => rng.random_range(-0.9..0.9),
    })
}

/// Two Gaussian clusters at `±(0.5, 0.5)`, clipped to the unit square.
pub fn two_cluster(n: usize, seed: u64) -> Mat {
    let mut r = rng::substream(seed, "fixture.two_cluster");
    Mat::from_fn(n, 2, |row, _| {
        let centre = if row % 2 == 0 { -0.5 } else { 0.5 };
        let z: f64 = StandardNormal.sample(&mut r);
        (centre + 0.1 * z).clamp(-1.0, 1.0)
    })
}

pub fn uniform_noise(n: usize, f: usize, seed: u64) -> Mat {
    let mut r = rng::substream(seed, "fixture.uniform");
    Mat::from_fn(n, f, |_, _| r.random_range(-1.0..=1.0))
}

/// Cells violating `layout`: discrete values off the codebook, continuous
/// values outside `[-1, 1]`, or non-finite values.
pub fn illegal_cells(x: &Mat, layout: &OutputLayout) -> usize {
    let mut bad = 0;
    for r in 0..x.rows() {
        for (c, field) in layout.fields.iter().enumerate() {
            let v = x.get(r, c);
            let ok = match field {
                OutputField::Discrete { codes, .. } => codes.contains(&v),
                OutputField::Continuous { .. } => v.is_finite() && (-1.0..=1.0).contains(&v),
            };
            bad += usize::from(!ok);
        }
    }
    bad
}

// ---------------------------------------------------------------- gradients

pub struct GradCheck {
    pub name: &'static str,
    /// Max over parameter tensors of `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)`.
    pub rel_err: f64,
}

const FD_STEP: f64 = 1e-6;

fn finite_difference(
    name: &'static str,
    params: &ParamSet,
    eval: &dyn Fn(&[Mat]) -> (f64, Vec<Mat>),
) -> GradCheck {
    let base = params.values().to_vec();
    let (_, analytic) = eval(&base);
    let mut worst: f64 = 0.0;
    for (t, a) in analytic.iter().enumerate() {
        let mut num = 0.0;
        let mut den_a = 0.0;
        let mut den_f = 0.0;
        for e in 0..a.len() {
            let mut plus = base.clone();
            plus[t].as_mut_slice()[e] += FD_STEP;
            let mut minus = base.clone();
            minus[t].as_mut_slice()[e] -= FD_STEP;
            let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * FD_STEP);
            let an = a.as_slice()[e];
            num += (an - fd).powi(2);
            den_a += an * an;
            den_f += fd * fd;
        }
        let den = den_a.sqrt().max(den_f.sqrt());
        if den > 1e-300 {
            worst = worst.max(num.sqrt() / den);
        }
    }
    GradCheck { name, rel_err: worst }
}

fn values_of(g: &Graph, vs: &[Var]) -> Vec<Mat> {
    vs.iter().map(|&v| g.value(v).clone()).collect()
}

fn with_values(set: &ParamSet, vals: &[Mat]) -> ParamSet {
    let mut s = set.clone();
    s.set_values(vals.to_vec()).unwrap();
    s
}

/// Analytic gradients of every training objective against central
/// differences, with the generator in soft (fully differentiable) mode.
pub fn gradient_suite(seed: u64) -> Vec<GradCheck> {
    let cfg = tiny_config(seed);
    let layout = toy_layout();
    let nets = Networks::init(seed, &cfg.model_config(), layout.clone()).unwrap();
    let b = 6;
    let mut r = rng::substream(seed, "fixture.grad");
    let real = layout_rows(&layout, b, &mut r);
    let z = sample_latent(&mut r, b, cfg.z_dim);
    let noise = sample_noise(&mut r, b, &layout);
    let tau = 0.7;
    let lambda = cfg.lambda_gp;
    let gen = &nets.generator;

    let soft_fake = |gp: &ParamSet| -> Mat {
        let mut g = Graph::new();
        let vars = gp.bind(&mut g, false);
        let zv = g.constant(z.clone());
        let o = gen.forward(&mut g, &vars, zv, &noise, tau, Mode::Soft).unwrap();
        g.value(o.x).clone()
    };
    let fake = soft_fake(&gen.params);
    let eps: Vec<f64> = (0..b).map(|_| r.random::<f64>()).collect();
    let x_hat = interpolate(&real, &fake, &eps).unwrap();

    let mut out = Vec::new();

    let critic = &nets.critic;
    out.push(finite_difference("L_C (with gradient penalty)", &critic.params, &|vals| {
        let c = Critic {
            params: with_values(&critic.params, vals),
            ..critic.clone()
        };
        let mut g = Graph::new();
        let vars = c.params.bind(&mut g, true);
        let cl = critic_loss_graph(&mut g, &c, &vars, &real, &fake, &x_hat, lambda);
        let gr = g.grad(cl.loss, &vars);
        (g.value(cl.loss).get(0, 0), values_of(&g, &gr))
    }));

    out.push(finite_difference("gradient penalty", &critic.params, &|vals| {
        let c = Critic {
            params: with_values(&critic.params, vals),
            ..critic.clone()
        };
        let mut g = Graph::new();
        let vars = c.params.bind(&mut g, true);
        let xh = g.param(x_hat.clone());
        let p = gradient_penalty_graph(&mut g, &c, &vars, xh, lambda);
        let gr = g.grad(p.gp, &vars);
        (g.value(p.gp).get(0, 0), values_of(&g, &gr))
    }));

    // generator objectives: critic, autoencoder fixed
    let gen_objective = |vals: &[Mat], which: u8| -> (f64, Vec<Mat>) {
        let mut g = Graph::new();
        let gp = with_values(&gen.params, vals);
        let gv = gp.bind(&mut g, true);
        let cv = nets.critic.params.bind(&mut g, false);
        let av = nets.ae.params.bind(&mut g, false);
        let zv = g.constant(z.clone());
        let o = gen.forward(&mut g, &gv, zv, &noise, tau, Mode::Soft).unwrap();
        let loss = match which {
            0 => adversarial_loss_graph(&mut g, &nets.critic, &cv, o.x),
            1 => reconstruction_loss_graph(&mut g, &nets.ae, &av, o.x),
            _ => {
                let l_d = adversarial_loss_graph(&mut g, &nets.critic, &cv, o.x);
                let l_ae = reconstruction_loss_graph(&mut g, &nets.ae, &av, o.x);
                generator_loss_graph(&mut g, Some(l_ae), l_d, Mixing::Equal).loss
            }
        };
        let gr = g.grad(loss, &gv);
        (g.value(loss).get(0, 0), values_of(&g, &gr))
    };
    out.push(finite_difference("L_d", &gen.params, &|v| gen_objective(v, 0)));
    out.push(finite_difference("L_g^AE", &gen.params, &|v| gen_objective(v, 1)));
    out.push(finite_difference("L_G^f (equal mixing), generator", &gen.params, &|v| gen_objective(v, 2)));

    let ae = &nets.ae;
    out.push(finite_difference("L_r^AE", &ae.params, &|vals| {
        let a = flowsynth::models::Autoencoder {
            params: with_values(&ae.params, vals),
            ..ae.clone()
        };
        let mut g = Graph::new();
        let vars = a.params.bind(&mut g, true);
        let x = g.constant(real.clone());
        let l = reconstruction_loss_graph(&mut g, &a, &vars, x);
        let gr = g.grad(l, &vars);
        (g.value(l).get(0, 0), values_of(&g, &gr))
    }));

    // gated objective: fixed generator, gate weights vary
    let fixed_losses = {
        let mut g = Graph::new();
        let gv = gen.params.bind(&mut g, false);
        let cv = nets.critic.params.bind(&mut g, false);
        let av = nets.ae.params.bind(&mut g, false);
        let zv = g.constant(z.clone());
        let o = gen.forward(&mut g, &gv, zv, &noise, tau, Mode::Soft).unwrap();
        let l_d = adversarial_loss_graph(&mut g, &nets.critic, &cv, o.x);
        let l_ae = reconstruction_loss_graph(&mut g, &nets.ae, &av, o.x);
        (g.value(l_ae).get(0, 0), g.value(l_d).get(0, 0))
    };
    let gate = &nets.gate;
    out.push(finite_difference("L_G^f (gated), gate", &gate.params, &|vals| {
        let gt = flowsynth::models::Gate {
            params: with_values(&gate.params, vals),
            ..gate.clone()
        };
        let mut g = Graph::new();
        let vars = gt.params.bind(&mut g, true);
        let l_ae = g.scalar(fixed_losses.0);
        let l_d = g.scalar(fixed_losses.1);
        let mixing = Mixing::Gated {
            gate: &gt,
            vars: &vars,
            gamma: cfg.gamma,
            a: cfg.gate_min,
            b: cfg.gate_max,
        };
        let gl = generator_loss_graph(&mut g, Some(l_ae), l_d, mixing);
        let gr = g.grad(gl.loss, &vars);
        (g.value(gl.loss).get(0, 0), values_of(&g, &gr))
    }));

    // gated objective through the generator; the gate's loss inputs are held
    // at their base values, as in training
    out.push(finite_difference("L_G^f (gated), generator", &gen.params, &|vals| {
        let mut g = Graph::new();
        let gp = with_values(&gen.params, vals);
        let gv = gp.bind(&mut g, true);
        let cv = nets.critic.params.bind(&mut g, false);
        let av = nets.ae.params.bind(&mut g, false);
        let tv = gate.params.bind(&mut g, false);
        let zv = g.constant(z.clone());
        let o = gen.forward(&mut g, &gv, zv, &noise, tau, Mode::Soft).unwrap();
        let l_d = adversarial_loss_graph(&mut g, &nets.critic, &cv, o.x);
        let l_ae = reconstruction_loss_graph(&mut g, &nets.ae, &av, o.x);
        let w = gate.forward(&mut g, &tv, fixed_losses.0, fixed_losses.1, cfg.gate_min, cfg.gate_max);
        let alpha = g.slice_cols(w, 0, 1);
        let beta = g.slice_cols(w, 1, 1);
        let t1 = g.mul(alpha, l_ae);
        let t2 = g.mul(beta, l_d);
        let loss = g.add(t1, t2);
        let gr = g.grad(loss, &gv);
        (g.value(loss).get(0, 0), values_of(&g, &gr))
    }));
    out
}

/// Largest penalty over `trials` random batches for a linear critic with a
/// unit-norm weight vector.
pub fn unit_linear_critic_gp(trials: usize, seed: u64) -> f64 {
    let mut r = rng::substream(seed, "fixture.gp");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let f = 2 + t % 6;
        let cfg = ModelConfig {
            critic_hidden: vec![],
            ..ModelConfig::default()
        };
        let mut critic = Critic::init(&cfg, f, &mut r);
        let w: Vec<f64> = (0..f).map(|_| StandardNormal.sample(&mut r)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bias = r.random_range(-1.0..1.0);
        critic
            .params
            .set_values(vec![
                Mat::from_vec(f, 1, w.iter().map(|x| x / norm).collect()),
                Mat::scalar(bias),
            ])
            .unwrap();
        let b = 32;
        let real = Mat::from_fn(b, f, |_, _| r.random_range(-1.0..1.0));
        let fake = Mat::from_fn(b, f, |_, _| r.random_range(-1.0..1.0));
        let eps: Vec<f64> = (0..b).map(|_| r.random::<f64>()).collect();
        let x_hat = interpolate(&real, &fake, &eps).unwrap();
        let gp = flowsynth::gan_training::gradient_penalty(&critic, &x_hat, 10.0).unwrap();
        worst = worst.max(gp);
    }
    worst
}

/// Max `|freq − softmax(ℓ)|` over categories of `n_vectors` random logit
/// vectors, `draws` Gumbel argmax samples each.
pub fn gumbel_argmax_deviation(n_vectors: usize, draws: usize, seed: u64) -> f64 {
    let mut r = rng::substream(seed, "fixture.gumbel");
    let mut worst: f64 = 0.0;
    for v in 0..n_vectors {
        let k = 2 + v % 5;
        let logits: Vec<f64> = (0..k).map(|_| 1.5 * { let x: f64 = StandardNormal.sample(&mut r); x }).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut counts = vec![0usize; k];
        let tau = 0.3 + 0.2 * (v % 4) as f64;
        for _ in 0..draws {
            let draw = GumbelDraw::sample(&mut r, k, tau);
            counts[argmax(&gumbel_softmax(&logits, &draw).unwrap())] += 1;
        }
        for i in 0..k {
            worst = worst.max((counts[i] as f64 / draws as f64 - e[i] / z).abs());
        }
    }
    worst
}

// ----------------------------------------------------------- reference path

/// Plain WGAN-GP written directly against the primitives: critic and
/// generator Adam updates, no autoencoder, gate or attention.
pub fn reference_wgan_gp(cfg: &TrainingConfig, layout: &OutputLayout, data: &Mat, epochs: usize) -> (ParamSet, ParamSet) {
    assert!(!cfg.use_ae_constraint && !cfg.use_gate && !cfg.use_attention);
    let mut nets = Networks::init(cfg.seed, &cfg.model_config(), layout.clone()).unwrap();
    let mut latent = rng::substream(cfg.seed, rng::LATENT);
    let mut gumbel = rng::substream(cfg.seed, rng::GUMBEL);
    let mut interp = rng::substream(cfg.seed, rng::INTERP);
    let mut shuffle = rng::substream(cfg.seed, rng::SHUFFLE);
    let mut opt_c = Adam::new(AdamConfig::new(cfg.lr_critic, 0.0, 0.9), nets.critic.params.shapes());
    let mut opt_g = Adam::new(AdamConfig::new(cfg.lr_generator, 0.0, 0.9), nets.generator.params.shapes());
    let n = data.rows();
    let b = cfg.batch_size.min(n);
    let f = data.cols();
    for epoch in 0..epochs {
        let tau = cfg.tau_at(epoch);
        for _ in 0..n.div_ceil(cfg.batch_size) {
            for _ in 0..cfg.n_critic {
                let idx = index::sample(&mut shuffle, n, b);
                let mut rows = Vec::with_capacity(b * f);
                for i in idx.iter() {
                    rows.extend_from_slice(data.row(i));
                }
                let real = Mat::from_vec(b, f, rows);
                let zs = sample_latent(&mut latent, b, cfg.z_dim);
                let noise = sample_noise(&mut gumbel, b, layout);
                let fake = {
                    let mut g = Graph::new();
                    let gv = nets.generator.params.bind(&mut g, false);
                    let zv = g.constant(zs);
                    let o = nets.generator.forward(&mut g, &gv, zv, &noise, tau, Mode::Hard).unwrap();
                    g.value(o.x).clone()
                };
                let eps: Vec<f64> = (0..b).map(|_| interp.random::<f64>()).collect();
                let x_hat = Mat::from_fn(b, f, |r, c| eps[r] * real.get(r, c) + (1.0 - eps[r]) * fake.get(r, c));

                let critic = &nets.critic;
                let mut g = Graph::new();
                let cv = critic.params.bind(&mut g, true);
                let xr = g.constant(real);
                let xf = g.constant(fake);
                let xh = g.param(x_hat);
                let sr = critic.forward(&mut g, &cv, xr);
                let sf = critic.forward(&mut g, &cv, xf);
                let mr = g.mean_all(sr);
                let mf = g.mean_all(sf);
                let gap = g.sub(mf, mr);
                let sh = critic.forward(&mut g, &cv, xh);
                let total = g.sum_all(sh);
                let gx = g.grad(total, &[xh])[0];
                let sq = g.square(gx);
                let ss = g.sum_cols(sq);
                let ss = g.add_scalar(ss, 1e-12);
                let norms = g.sqrt(ss);
                let dev = g.add_scalar(norms, -1.0);
                let dev2 = g.square(dev);
                let m = g.mean_all(dev2);
                let gp = g.scale(m, cfg.lambda_gp);
                let loss = g.add(gap, gp);
                let gv_ = g.grad(loss, &cv);
                let grads = values_of(&g, &gv_);
                opt_c.update(nets.critic.params.values_mut(), &grads);
            }
            let zs = sample_latent(&mut latent, b, cfg.z_dim);
            let noise = sample_noise(&mut gumbel, b, layout);
            let mut g = Graph::new();
            let gv = nets.generator.params.bind(&mut g, true);
            let cv = nets.critic.params.bind(&mut g, false);
            let zv = g.constant(zs);
            let o = nets.generator.forward(&mut g, &gv, zv, &noise, tau, Mode::Hard).unwrap();
            let s = nets.critic.forward(&mut g, &cv, o.x);
            let ms = g.mean_all(s);
            let l_d = g.scale(ms, -1.0);
            let gv_ = g.grad(l_d, &gv);
            let grads = values_of(&g, &gv_);
            opt_g.update(nets.generator.params.values_mut(), &grads);
        }
    }
    (nets.generator.params, nets.critic.params)
}

// --------------------------------------------------------- freeze schedule

fn digests(s: &TrainState) -> [String; 4] {
    [
        s.nets.generator.params.digest(),
        s.nets.critic.params.digest(),
        s.nets.ae.params.digest(),
        s.nets.gate.params.digest(),
    ]
}

/// Steps through `epochs` epochs one update at a time, checking after each
/// update that exactly the intended networks changed, then checks the
/// update counters. Returns the first violation.
pub fn freeze_schedule(cfg: &TrainingConfig, layout: &OutputLayout, data: &Mat, epochs: usize) -> Result<(), String> {
    let mut s = TrainState::new(cfg.clone(), layout.clone()).map_err(|e| e.to_string())?;
    let n = data.rows();
    let iters = n.div_ceil(cfg.batch_size);
    let gated = cfg.use_gate && cfg.use_ae_constraint;
    const NAMES: [&str; 4] = ["generator", "critic", "autoencoder", "gate"];
    let expect = |before: &[String; 4], after: &[String; 4], changed: [bool; 4], step: &str| -> Result<(), String> {
        for i in 0..4 {
            if (before[i] != after[i]) != changed[i] {
                return Err(format!(
                    "{step}: {} {}",
                    NAMES[i],
                    if changed[i] { "did not change" } else { "changed while frozen" }
                ));
            }
        }
        Ok(())
    };
    for epoch in 0..epochs {
        let tau = cfg.tau_at(epoch);
        for _ in 0..iters {
            let mut last = None;
            for _ in 0..cfg.n_critic {
                let batch = s.sample_batch(data);
                let before = digests(&s);
                s.critic_step(&batch, tau).map_err(|e| e.to_string())?;
                expect(&before, &digests(&s), [false, true, false, false], "critic step")?;
                last = Some(batch);
            }
            if cfg.use_ae_constraint {
                let before = digests(&s);
                s.ae_real_step(&last.unwrap()).map_err(|e| e.to_string())?;
                expect(&before, &digests(&s), [false, false, true, false], "autoencoder step")?;
            }
            let before = digests(&s);
            s.generator_step(cfg.batch_size.min(n), tau).map_err(|e| e.to_string())?;
            expect(&before, &digests(&s), [true, false, false, gated], "generator step")?;
        }
        s.epoch += 1;
    }
    let g = (epochs * iters) as u64;
    let want = (cfg.n_critic as u64 * g, g, if cfg.use_ae_constraint { g } else { 0 });
    let got = (s.counters.critic, s.counters.generator, s.counters.ae);
    if got != want {
        return Err(format!("update counters {got:?}, expected {want:?}"));
    }
    // the packaged epoch loop must follow the same schedule
    let mut t = TrainState::new(cfg.clone(), layout.clone()).map_err(|e| e.to_string())?;
    for _ in 0..epochs {
        t.run_epoch(data).map_err(|e| e.to_string())?;
    }
    let got = (t.counters.critic, t.counters.generator, t.counters.ae);
    if got != want {
        return Err(format!("run_epoch counters {got:?}, expected {want:?}"));
    }
    if digests(&t) != digests(&s) {
        return Err("run_epoch diverged from the step-by-step schedule".into());
    }
    Ok(())
}
