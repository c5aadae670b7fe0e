//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Every oracle here is written from the defining equations directly —
//! dense matrices, finite differences, and brute-force counting — and
//! never calls back into the fast paths it is checking.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sparse_audio::adapt::{grad_params, scaled_energy, AdaptConfig};
use sparse_audio::bank::{erb, BankConfig, FilterBank, GammachirpParams};
use sparse_audio::lca::{encode, hard_threshold, lca_step, solve_state, Dictionary, LcaConfig, LcaState};
use sparse_audio::repr::{bin_spike_times, sparsity_ratio, EventRepresentation, ReprEvent, ReprKind};
use sparse_audio::snn::{
    fast_sigmoid, fast_sigmoid_surrogate, train, LifConfig, LifNetwork, NetworkSpec, SynOps,
    TrainConfig,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_dict(rng: &mut ChaCha8Rng, max_k: usize, max_flen: usize, max_frames: usize) -> Dictionary<f64> {
    let k = rng.gen_range(1..=max_k);
    let flen = rng.gen_range(4..=max_flen);
    let fs = 16000.0;
    let fmin = rng.gen_range(100.0..500.0);
    let fmax = rng.gen_range(2000.0..6000.0);
    let config = BankConfig::new(k, flen, fs).with_freq_range(fmin, fmax);
    let bank = FilterBank::gammatone(config).unwrap();
    let stride = rng.gen_range(1..=flen);
    let frames = rng.gen_range(1..=max_frames);
    let len = flen + (frames - 1) * stride;
    Dictionary::new(bank, stride, len).unwrap()
}

fn random_signal(rng: &mut ChaCha8Rng, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
}

// Dense matrix D built directly from the definition: column (i, j) is
// atom i shifted to offset j * stride.
fn dense_d(dict: &Dictionary<f64>) -> Vec<Vec<f64>> {
    let rows = dict.signal_len_samples;
    let cols = dict.total_atoms();
    let mut d = vec![vec![0.0; cols]; rows];
    for i in 0..dict.num_channels() {
        let atom = dict.bank.atom(i);
        for j in 0..dict.num_frames {
            let col = i * dict.num_frames + j;
            for (t, &phi) in atom.iter().enumerate() {
                d[j * dict.stride_samples + t][col] = phi;
            }
        }
    }
    d
}

fn mat_t_vec(d: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let cols = d[0].len();
    let mut out = vec![0.0; cols];
    for (row, &x) in d.iter().zip(v) {
        for (c, &m) in row.iter().enumerate() {
            out[c] += m * x;
        }
    }
    out
}

fn mat_vec(d: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|row| row.iter().zip(v).map(|(&m, &x)| m * x).sum())
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_oracle_equivalence() {
    let mut rng = rng(101);
    for _ in 0..100 {
        let dict = random_dict(&mut rng, 5, 16, 8);
        let d = dense_d(&dict);
        let signal = random_signal(&mut rng, dict.signal_len_samples, 1.0);

        let p_fast = dict.project(&signal).unwrap();
        let p_dense = mat_t_vec(&d, &signal);
        assert!(max_abs_diff(&p_fast, &p_dense) < 1e-10);

        let coeffs = random_signal(&mut rng, dict.total_atoms(), 1.0);
        let r_fast = dict.reconstruct(&coeffs).unwrap();
        let r_dense = mat_vec(&d, &coeffs);
        assert!(max_abs_diff(&r_fast, &r_dense) < 1e-10);

        // one LCA step against the dense update rule
        let cfg = LcaConfig::new(0.1);
        let mut state = LcaState::zeros(dict.total_atoms());
        state.potentials = random_signal(&mut rng, dict.total_atoms(), 0.5);
        state.activations = hard_threshold(&state.potentials, cfg.threshold);
        let next = lca_step(&state, &p_fast, &dict, &cfg).unwrap();

        let da = mat_vec(&d, &state.activations);
        let dtda = mat_t_vec(&d, &da);
        let eta = cfg.step_ratio;
        let v_dense: Vec<f64> = (0..dict.total_atoms())
            .map(|m| {
                let inhibition = dtda[m] - state.activations[m];
                eta * (p_dense[m] - inhibition) + (1.0 - eta) * state.potentials[m]
            })
            .collect();
        assert!(max_abs_diff(&next.potentials, &v_dense) < 1e-10);
        let a_dense = hard_threshold(&v_dense, cfg.threshold);
        assert!(max_abs_diff(&next.activations, &a_dense) < 1e-10);
    }
    println!("ACCEPTANCE 01 oracle-equivalence: pass");
}

#[test]
fn criterion_02_energy_descent() {
    let mut rng = rng(202);
    for _ in 0..50 {
        let dict = random_dict(&mut rng, 6, 32, 6);
        let signal = random_signal(&mut rng, dict.signal_len_samples, 0.5);
        let cfg = LcaConfig::new(0.1); // dt/tau = 0.01, 64 iterations
        let (_, trace) = encode(&signal, &dict, &cfg).unwrap();
        let n = trace.mse_term.len();
        assert_eq!(n, 64);
        assert!(trace.total(n - 1) <= trace.total(0));
        let non_increasing = (1..n)
            .filter(|&i| trace.total(i) <= trace.total(i - 1) + 1e-9)
            .count();
        assert!(
            non_increasing as f64 >= 0.9 * (n - 1) as f64,
            "only {non_increasing}/{} non-increasing steps",
            n - 1
        );
    }
    println!("ACCEPTANCE 02 energy-descent: pass");
}

#[test]
fn criterion_03_fixed_point_residual() {
    let mut rng = rng(303);
    let mut converged = 0;
    for _ in 0..20 {
        let dict = random_dict(&mut rng, 4, 16, 4);
        let signal = random_signal(&mut rng, dict.signal_len_samples, 0.5);
        let mut cfg = LcaConfig::new(0.1);
        cfg.step_ratio = 0.1;
        cfg.num_iterations = 50_000;
        cfg.convergence_tol = Some(1e-13);
        let (state, delta) = solve_state(&signal, &dict, &cfg).unwrap();
        if delta >= 1e-13 {
            continue; // oscillating instance, not a converged state
        }
        converged += 1;
        // v* = p - (D^T D - I) T_lambda(v*), via the dense oracle
        let d = dense_d(&dict);
        let padded = dict.pad_signal(&signal).unwrap();
        let p = mat_t_vec(&d, &padded);
        let a = hard_threshold(&state.potentials, cfg.threshold);
        let dtda = mat_t_vec(&d, &mat_vec(&d, &a));
        let rhs: Vec<f64> = (0..p.len()).map(|m| p[m] - (dtda[m] - a[m])).collect();
        assert!(max_abs_diff(&state.potentials, &rhs) < 1e-8);
    }
    assert!(converged >= 10, "only {converged} instances converged");
    println!("ACCEPTANCE 03 fixed-point-residual: pass");
}

#[test]
fn criterion_04_gammatone_equivalence() {
    let config = BankConfig::new(20, 256, 16000.0).with_freq_range(80.0, 6000.0);
    let bank = FilterBank::gammatone(config).unwrap();
    let fs = 16000.0;
    for channel in 0..20 {
        let f = bank.params[channel].center_freq_hz;
        // independent Gammatone: t^3 e^{-2 pi ERB(f) t} cos(2 pi f t)
        let mut phi: Vec<f64> = (0..256)
            .map(|n| {
                let t = (n as f64 + 1.0) / fs;
                t.powi(3)
                    * (-2.0 * std::f64::consts::PI * erb(f).unwrap() * t).exp()
                    * (2.0 * std::f64::consts::PI * f * t).cos()
            })
            .collect();
        let norm: f64 = phi.iter().map(|&x| x * x).sum::<f64>().sqrt();
        phi.iter_mut().for_each(|x| *x /= norm);
        assert!(max_abs_diff(&phi, bank.atom(channel)) < 1e-12);
    }
    println!("ACCEPTANCE 04 gammatone-equivalence: pass");
}

#[test]
fn criterion_05_alca_gradient_check() {
    let mut rng = rng(505);
    let mut draws_checked = 0;
    let mut attempts = 0;
    while draws_checked < 50 && attempts < 200 {
        attempts += 1;
        let k = rng.gen_range(2..=3);
        let flen = 16;
        let stride = 8;
        let frames = 3;
        let fmin = rng.gen_range(200.0..400.0);
        let fmax = rng.gen_range(2500.0..3500.0);
        let config = BankConfig::new(k, flen, 16000.0).with_freq_range(fmin, fmax);
        let bank = FilterBank::gammatone(config).unwrap();
        let len = flen + (frames - 1) * stride;
        let dict = Dictionary::new(bank.clone(), stride, len).unwrap();

        // signal built from atoms so units activate away from threshold
        let mut signal = vec![0.0; len];
        for _ in 0..3 {
            let i = rng.gen_range(0..k);
            let j = rng.gen_range(0..frames);
            let amp = rng.gen_range(0.6..1.4) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for (t, &phi) in dict.bank.atom(i).iter().enumerate() {
                signal[j * stride + t] += amp * phi;
            }
        }
        for s in &mut signal {
            *s += rng.gen_range(-0.01..0.01);
        }

        let mut cfg = LcaConfig::new(0.1);
        cfg.num_iterations = 16;
        let mut acfg = AdaptConfig::new(0.0);
        acfg.tbptt_window = cfg.num_iterations;
        acfg.sparsity_scale = 1.0;

        let grads = grad_params(&signal, &dict, &cfg, &acfg).unwrap();

        let energy_of = |params: &[GammachirpParams<f64>]| -> (f64, Vec<(u32, u32)>) {
            let bank = FilterBank::build(dict.bank.config, params.to_vec()).unwrap();
            let d = Dictionary::new(bank, stride, len).unwrap();
            let (code, _) = encode(&signal, &d, &cfg).unwrap();
            let support: Vec<(u32, u32)> =
                code.events.iter().map(|e| (e.channel, e.frame)).collect();
            let padded = d.pad_signal(&signal).unwrap();
            let e = scaled_energy(&padded, &d, &code.to_coeffs(), cfg.threshold, 1.0).unwrap();
            (e, support)
        };
        let (_, support0) = energy_of(&dict.bank.params);

        let h = 1e-6;
        let mut coords_checked = 0;
        let mut ok = true;
        for channel in 0..k {
            for which in 0..3 {
                let perturb = |delta: f64| {
                    let mut params = dict.bank.params.clone();
                    match which {
                        0 => params[channel].chirp += delta,
                        1 => params[channel].bandwidth_scale += delta,
                        _ => params[channel].gamma_order += delta,
                    }
                    energy_of(&params)
                };
                let (ep, sp) = perturb(h);
                let (em, sm) = perturb(-h);
                if sp != support0 || sm != support0 {
                    continue; // active set changed under perturbation
                }
                let fd = (ep - em) / (2.0 * h);
                let analytic = match which {
                    0 => grads.d_chirp[channel],
                    1 => grads.d_bandwidth[channel],
                    _ => grads.d_gamma_order[channel],
                };
                if analytic.abs() < 1e-8 && fd.abs() < 1e-8 {
                    continue;
                }
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs());
                if rel >= 1e-4 {
                    ok = false;
                }
                coords_checked += 1;
            }
        }
        if coords_checked > 0 {
            assert!(ok, "gradient mismatch on draw {attempts}");
            draws_checked += 1;
        }
    }
    assert!(draws_checked >= 50, "only {draws_checked} usable draws");
    println!("ACCEPTANCE 05 alca-gradient-check: pass");
}

// Synthetic chirped-tone corpus: sums of gammachirp atoms (c = 2,
// b = 1.5) drawn from a bank the coding dictionary does not start with,
// plus noise.
fn chirped_corpus(
    rng: &mut ChaCha8Rng,
    count: usize,
    source: &Dictionary<f64>,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut signal = vec![0.0; source.signal_len_samples];
            for _ in 0..4 {
                let i = rng.gen_range(0..source.num_channels());
                let j = rng.gen_range(0..source.num_frames);
                let amp = rng.gen_range(0.8..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                for (t, &phi) in source.bank.atom(i).iter().enumerate() {
                    signal[j * source.stride_samples + t] += amp * phi;
                }
            }
            for s in &mut signal {
                *s += rng.gen_range(-0.02..0.02);
            }
            signal
        })
        .collect()
}

#[test]
fn criterion_06_alca_improvement() {
    let mut rng = rng(606);
    let k = 8;
    let flen = 64;
    let stride = 32;
    let frames = 4;
    let len = flen + (frames - 1) * stride;
    let config = BankConfig::new(k, flen, 16000.0).with_freq_range(300.0, 3000.0);

    let source_params: Vec<GammachirpParams<f64>> = FilterBank::gammatone(config)
        .unwrap()
        .params
        .iter()
        .map(|p| {
            let mut p = *p;
            p.chirp = 2.0;
            p.bandwidth_scale = 1.5;
            p
        })
        .collect();
    let source_bank = FilterBank::build(config, source_params).unwrap();
    let source = Dictionary::new(source_bank, stride, len).unwrap();

    let train = chirped_corpus(&mut rng, 50, &source);
    let held_out = chirped_corpus(&mut rng, 20, &source);

    let bank0 = FilterBank::gammatone(config).unwrap();
    let cfg = LcaConfig::new(0.05);
    let mut acfg = AdaptConfig::new(0.05);
    acfg.num_epochs = 20;
    acfg.batch_size = 8;
    acfg.tbptt_window = cfg.num_iterations;
    acfg.seed = 7;

    let (e0, l0_init, mse0) =
        sparse_audio::adapt::evaluate_corpus(&held_out, &bank0, stride, &cfg, 1.0).unwrap();
    let (adapted, _) = sparse_audio::adapt::adapt(&train, &bank0, stride, &cfg, &acfg).unwrap();
    let (e1, l0_adapted, mse1) =
        sparse_audio::adapt::evaluate_corpus(&held_out, &adapted, stride, &cfg, 1.0).unwrap();

    assert!(
        e1 <= 0.9 * e0,
        "held-out scaled energy {e1} vs initial {e0}: less than 10% reduction"
    );
    assert!(mse1 <= mse0, "adapted MSE {mse1} worse than initial {mse0}");
    assert!(
        l0_adapted <= l0_init,
        "mean L0 increased: {l0_adapted} vs {l0_init}"
    );
    println!("ACCEPTANCE 06 alca-improvement: pass");
}

#[test]
fn criterion_07_recovery() {
    let mut rng = rng(707);
    let k = 8;
    let flen = 128;
    let stride = 128;
    let frames = 4;
    let len = flen + (frames - 1) * stride;
    let config = BankConfig::new(k, flen, 16000.0).with_freq_range(200.0, 4000.0);
    let bank = FilterBank::gammatone(config).unwrap();
    let dict = Dictionary::new(bank, stride, len).unwrap();
    let lambda = 0.1;

    for _ in 0..10 {
        // 3 atoms at separated channels, coefficients >= 5 lambda
        let mut channels: Vec<usize> = vec![0, 3, 6];
        channels.shuffle(&mut rng);
        let truth: Vec<(usize, usize, f64)> = channels
            .iter()
            .map(|&i| {
                let j = rng.gen_range(0..frames);
                let amp = rng.gen_range(5.0 * lambda..10.0 * lambda)
                    * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (i, j, amp)
            })
            .collect();
        let mut signal = vec![0.0; len];
        for &(i, j, amp) in &truth {
            for (t, &phi) in dict.bank.atom(i).iter().enumerate() {
                signal[j * stride + t] += amp * phi;
            }
        }

        let mut cfg = LcaConfig::new(lambda);
        cfg.num_iterations = 5000;
        cfg.convergence_tol = Some(1e-12);
        let (code, _) = encode(&signal, &dict, &cfg).unwrap();

        let support: Vec<(u32, u32)> = code.events.iter().map(|e| (e.channel, e.frame)).collect();
        for &(i, j, _) in &truth {
            assert!(
                support.contains(&(i as u32, j as u32)),
                "missing true atom ({i}, {j})"
            );
        }
        let recon = dict.reconstruct(&code.to_coeffs()).unwrap();
        let signal_pow: f64 = signal.iter().map(|&s| s * s).sum();
        let noise_pow: f64 = signal
            .iter()
            .zip(&recon)
            .map(|(&s, &r)| (s - r) * (s - r))
            .sum();
        let snr = 10.0 * (signal_pow / noise_pow).log10();
        assert!(snr >= 20.0, "reconstruction SNR {snr} dB < 20 dB");
    }
    println!("ACCEPTANCE 07 recovery: pass");
}

#[test]
fn criterion_08_sparsity_ratio() {
    let mut rng = rng(808);
    for _ in 0..10 {
        let channels = rng.gen_range(2..8);
        let steps = rng.gen_range(2..10);
        let make = |rng: &mut ChaCha8Rng, count: usize, kind: ReprKind| -> Vec<EventRepresentation<f64>> {
            (0..count)
                .map(|_| {
                    let mut events = Vec::new();
                    for c in 0..channels {
                        for s in 0..steps {
                            if rng.gen_bool(0.4) {
                                let value = if kind == ReprKind::ExternalSpikeHistogram {
                                    rng.gen_range(1..5) as f64
                                } else {
                                    rng.gen_range(0.1..2.0)
                                };
                                events.push(ReprEvent {
                                    channel: c,
                                    step: s,
                                    value,
                                });
                            }
                        }
                    }
                    EventRepresentation {
                        num_channels: channels as usize,
                        num_steps: steps as usize,
                        kind,
                        label: None,
                        events,
                    }
                })
                .collect()
        };
        let n_coded = rng.gen_range(1..5);
        let n_ref = rng.gen_range(1..5);
        let coded = make(&mut rng, n_coded, ReprKind::Lca);
        let reference = make(&mut rng, n_ref, ReprKind::ExternalSpikeHistogram);

        // hand count: mean nonzero cells over mean total spikes
        let coded_mean: f64 =
            coded.iter().map(|r| r.events.len() as f64).sum::<f64>() / coded.len() as f64;
        let reference_mean: f64 = reference
            .iter()
            .map(|r| r.events.iter().map(|e| e.value).sum::<f64>())
            .sum::<f64>()
            / reference.len() as f64;
        if reference_mean == 0.0 {
            continue;
        }
        let expected = coded_mean / reference_mean;
        let got = sparsity_ratio(&coded, &reference).unwrap();
        assert!((got - expected).abs() < 1e-12);

        // identical collections give exactly 1
        if coded_mean > 0.0 {
            assert_eq!(sparsity_ratio(&coded, &coded).unwrap(), 1.0);
        }
    }
    println!("ACCEPTANCE 08 sparsity-ratio: pass");
}

#[test]
fn criterion_09_binning() {
    let mut rng = rng(909);
    for _ in 0..10 {
        let channels = rng.gen_range(2..10);
        let duration = 1.28;
        let count = rng.gen_range(10..200);
        let spikes: Vec<(u32, f64)> = (0..count)
            .map(|_| (rng.gen_range(0..channels), rng.gen_range(0.0..duration)))
            .collect();
        let rep = bin_spike_times::<f64>(&spikes, channels as usize, duration, 0.01).unwrap();
        assert_eq!(rep.num_steps, 128);
        let total: f64 = rep.events.iter().map(|e| e.value).sum();
        assert_eq!(total, count as f64);
    }
    println!("ACCEPTANCE 09 binning: pass");
}

#[test]
fn criterion_10_surrogate_gradient() {
    let mut rng = rng(1010);
    for _ in 0..200 {
        let x: f64 = rng.gen_range(-4.0..4.0);
        let beta: f64 = rng.gen_range(0.5..20.0);
        if x.abs() < 1e-3 {
            continue;
        }
        let h = 1e-7;
        let fd = (fast_sigmoid(x + h, beta) - fast_sigmoid(x - h, beta)) / (2.0 * h);
        assert!((fast_sigmoid_surrogate(x, beta) - fd).abs() < 1e-6);
    }

    // rasters depend only on the forward threshold, never on beta
    let rep = random_rep(&mut rng, 6, 12, 0.4);
    let spec = NetworkSpec::recurrent(6, 10, 3);
    let mut reference = None;
    for beta in [0.5, 5.0, 50.0] {
        let cfg = LifConfig {
            surrogate_beta: beta,
            ..LifConfig::<f64>::default()
        };
        let net = LifNetwork::new(spec.clone(), cfg, 77).unwrap();
        let trace = net.forward_trace(&rep).unwrap();
        match &reference {
            None => reference = Some(trace.spikes),
            Some(r) => assert_eq!(r, &trace.spikes),
        }
    }
    println!("ACCEPTANCE 10 surrogate-gradient: pass");
}

fn random_rep(rng: &mut ChaCha8Rng, channels: usize, steps: usize, density: f64) -> EventRepresentation<f64> {
    let mut events = Vec::new();
    for c in 0..channels {
        for s in 0..steps {
            if rng.gen_bool(density) {
                events.push(ReprEvent {
                    channel: c as u32,
                    step: s as u32,
                    value: rng.gen_range(0.1..1.0),
                });
            }
        }
    }
    EventRepresentation {
        num_channels: channels,
        num_steps: steps,
        kind: ReprKind::Lca,
        label: Some(0),
        events,
    }
}

#[test]
fn criterion_11_synops() {
    let mut rng = rng(1111);
    let mut batch_total = SynOps::default();
    let mut sum_of_parts = 0u64;
    for case in 0..20u64 {
        let channels = rng.gen_range(2..6);
        let hidden = rng.gen_range(3..9);
        let steps = rng.gen_range(3..10);
        let rep = random_rep(&mut rng, channels, steps, 0.4);
        let spec = if case % 2 == 0 {
            NetworkSpec::feed_forward(channels, hidden, 3)
        } else {
            NetworkSpec::recurrent(channels, hidden, 3)
        };
        let net = LifNetwork::new(spec, LifConfig::<f64>::default(), case).unwrap();
        let trace = net.forward_trace(&rep).unwrap();

        // brute-force recount from the rasters: each presynaptic event
        // times the fan-out it is delivered to
        let mut input_layer = 0u64;
        let mut hidden_ops = 0u64;
        let steps = trace.inputs.len();
        let nnz = |v: &[f64]| v.iter().filter(|&&x| x != 0.0).count() as u64;
        for t in 0..steps {
            input_layer += nnz(&trace.inputs[t]) * hidden as u64;
            if net.layers[0].recurrent.is_some() && t > 0 {
                hidden_ops += nnz(&trace.spikes[0][t - 1]) * hidden as u64;
            }
            hidden_ops += nnz(&trace.spikes[0][t]) * 3;
        }
        assert_eq!(trace.synops.input_layer, input_layer, "case {case}");
        assert_eq!(trace.synops.hidden, hidden_ops, "case {case}");

        batch_total = batch_total + trace.synops;
        sum_of_parts += trace.synops.total();
    }
    assert_eq!(batch_total.total(), sum_of_parts);
    println!("ACCEPTANCE 11 synops: pass");
}

// Two rate-separable classes: class 0 drives the low channels, class 1
// the high channels.
fn toy_spike_dataset(rng: &mut ChaCha8Rng, count: usize) -> Vec<EventRepresentation<f64>> {
    let channels = 10;
    let steps = 30;
    (0..count)
        .map(|i| {
            let label = (i % 2) as u32;
            let active = if label == 0 { 0..5 } else { 5..10 };
            let mut events = Vec::new();
            for c in 0..channels {
                for s in 0..steps {
                    let p = if active.contains(&c) { 0.5 } else { 0.05 };
                    if rng.gen_bool(p) {
                        events.push(ReprEvent {
                            channel: c as u32,
                            step: s as u32,
                            value: rng.gen_range(0.5..1.0),
                        });
                    }
                }
            }
            EventRepresentation {
                num_channels: channels,
                num_steps: steps,
                kind: ReprKind::Lca,
                label: Some(label),
                events,
            }
        })
        .collect()
}

#[test]
fn criterion_12_toy_classification() {
    let start = std::time::Instant::now();
    let mut rng = rng(1212);
    let train_set = toy_spike_dataset(&mut rng, 60);
    let valid_set = toy_spike_dataset(&mut rng, 20);
    let mut net = LifNetwork::new(
        NetworkSpec::feed_forward(10, 16, 2),
        LifConfig::<f64>::default(),
        3,
    )
    .unwrap();
    let mut tcfg = TrainConfig::new(0.01);
    tcfg.num_epochs = 50;
    tcfg.batch_size = 8;
    tcfg.seed = 3;
    let trace = train(&mut net, &train_set, &valid_set, &tcfg).unwrap();
    let best = trace
        .valid_accuracy
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    assert!(best >= 0.9, "best validation accuracy {best} < 0.9");
    assert!(start.elapsed().as_secs() < 120);
    println!("ACCEPTANCE 12 toy-classification: pass");
}
