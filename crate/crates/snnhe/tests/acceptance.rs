//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! values and wall time, then a summary line. With `ACCEPTANCE_STRICT=1`
//! the process exits non-zero when any criterion fails; by default it exits
//! zero so a workspace test run still reaches the test targets after it.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use snnhe::commands::{self, BackendChoice, RunConfig};
use snnhe::fixtures;
use snnhe::io::{self, idx, spkf, Sample};
use snnhe_core::approx::{dead_zone, eval_series_encrypted, fit_step};
use snnhe_core::backend::{CkksBackend, Cv, HeBackend, SimBackend, SimConfig};
use snnhe_core::ckks::{keygen, normalize_rotation, CkksContext, CkksParams};
use snnhe_core::layers::{
    avgpool_enc, avgpool_plain, conv2d_enc, conv2d_plain, fc_enc, fc_plain, ConvSpec, ConvWeights, FcSpec, FcWeights,
    Layout, PackedTensor, PoolSpec, Tensor,
};
use snnhe_core::lif::{lif_approx_step, lif_plain_step, lif_switch_step, LifConfig, LifMode};
use snnhe_core::network::{Layer, NetworkSpec};
use snnhe_core::planner::{harvest_rotations, simulate_levels, LevelBudget};
use snnhe_core::ring::{Domain, RingPoly};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn below(r: &mut ChaCha20Rng, n: usize) -> usize {
    (r.next_u64() % n as u64) as usize
}

fn range(r: &mut ChaCha20Rng, lo: usize, hi: usize) -> usize {
    lo + below(r, hi - lo + 1)
}

fn values(r: &mut ChaCha20Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(r, lo, hi)).collect()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ckks_backend(params: &CkksParams, rotations: &[i64], seed: u64) -> Result<CkksBackend, String> {
    let keys = keygen(params, rotations, &mut rng(seed)).map_err(|e| e.to_string())?;
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    Ok(CkksBackend::with_keys(CkksContext::new(params.clone()), keys, s))
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn test_params() -> Result<CkksParams, String> {
    CkksParams::test().map_err(e)
}

// 1

fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let mut acc = vec![0i128; n];
    for i in 0..n {
        for j in 0..n {
            let p = (a[i] as u128 * b[j] as u128 % q as u128) as i128;
            if i + j < n {
                acc[i + j] += p;
            } else {
                acc[i + j - n] -= p;
            }
        }
    }
    acc.iter().map(|&v| v.rem_euclid(q as i128) as u64).collect()
}

fn ckks_correctness() -> Outcome {
    let params = test_params()?;
    let mut r = rng(1);

    let basis = params.q_basis().prefix(2).map_err(e)?;
    let n = params.n();
    let random_poly = |r: &mut ChaCha20Rng| {
        let limbs = (0..basis.len())
            .map(|i| {
                let q = basis.modulus(i).value();
                (0..n).map(|_| r.next_u64() % q).collect()
            })
            .collect();
        RingPoly::from_limbs(&basis, limbs, Domain::Coefficient)
    };
    let mut ntt_exact = true;
    for _ in 0..3 {
        let a = random_poly(&mut r).map_err(e)?;
        let b = random_poly(&mut r).map_err(e)?;
        ntt_exact &= a.ntt_forward().map_err(e)?.ntt_inverse().map_err(e)? == a;
        let prod = a.mul(&b).map_err(e)?;
        for i in 0..basis.len() {
            ntt_exact &= prod.limb(i) == schoolbook(a.limb(i), b.limb(i), basis.modulus(i).value()).as_slice();
        }
    }

    let slots = params.slots();
    let rotations: Vec<i64> = vec![1, -1, 2, 5, 64, -300, 1000];
    let be = ckks_backend(&params, &rotations, 2)?;
    let top = params.depth();
    let (mut add, mut mul, mut rot, mut rt) = (0f64, 0f64, 0f64, 0f64);
    for trial in 0..100 {
        let x = values(&mut r, slots, -1.0, 1.0);
        let y = values(&mut r, slots, -1.0, 1.0);
        let cx = be.encrypt(&x, top).map_err(e)?;
        let cy = be.encrypt(&y, top).map_err(e)?;
        rt = rt.max(max_err(&be.decrypt(&cx).map_err(e)?, &x));
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        add = add.max(max_err(&be.decrypt(&be.add(&cx, &cy).map_err(e)?).map_err(e)?, &sum));
        let prod: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        mul = mul.max(max_err(&be.decrypt(&be.mul(&cx, &cy).map_err(e)?).map_err(e)?, &prod));
        let k = rotations[trial % rotations.len()];
        let shifted: Vec<f64> = (0..slots).map(|j| x[(j as i64 + k).rem_euclid(slots as i64) as usize]).collect();
        rot = rot.max(max_err(&be.decrypt(&be.rotate(&cx, k).map_err(e)?).map_err(e)?, &shifted));
    }
    let pass = ntt_exact && add < 1e-3 && mul < 1e-3 && rot < 1e-3 && rt < 1e-3;
    Ok((
        pass,
        format!("N={n}, 100 trials: roundtrip {rt:.2e}, add {add:.2e}, mul {mul:.2e}, rotate {rot:.2e}; NTT and schoolbook oracles exact: {ntt_exact}"),
    ))
}

// 2

fn conv_expected(input: &Layout, spec: &ConvSpec, out_pad: usize) -> Result<(usize, usize), String> {
    let (ho, wo) = spec.output_hw(input.height, input.width).map_err(e)?;
    let out = Layout::new(spec.c_out, ho, wo, out_pad, input.slots).map_err(e)?;
    let k2 = spec.kernel * spec.kernel;
    let inp: usize = (0..input.n_cts).map(|u| input.channels_in(u).count() * k2 - 1).sum();
    let wp = input.frame_width();
    let offset = input.pad - spec.padding;
    let mut pairs = BTreeSet::new();
    for co in 0..spec.c_out {
        for oi in 0..ho {
            for oj in 0..wo {
                let src = (oi * spec.stride + offset) * wp + oj * spec.stride + offset;
                let dst = out.pos(co, oi as isize, oj as isize);
                pairs.insert((out.ct_of(co), normalize_rotation(src as i64 - dst as i64, input.slots)));
            }
        }
    }
    Ok((inp, pairs.iter().filter(|p| p.1 != 0).count()))
}

fn pool_expected(input: &Layout, spec: &PoolSpec, out_pad: usize) -> Result<(usize, usize), String> {
    let (ho, wo) = spec.output_hw(input.height, input.width).map_err(e)?;
    let out = Layout::new(input.channels, ho, wo, out_pad, input.slots).map_err(e)?;
    let wp = input.frame_width();
    let mut a_pairs = BTreeSet::new();
    let mut b_pairs = BTreeSet::new();
    for c in 0..input.channels {
        let shift = (input.frame_of(c) * input.block()) as i64 - (out.frame_of(c) * out.block()) as i64;
        for di in 0..spec.kernel {
            for dj in 0..spec.kernel {
                let a = normalize_rotation(shift + (di * wp + dj) as i64, input.slots);
                a_pairs.insert((input.ct_of(c), a));
            }
        }
        for oi in 0..ho {
            for oj in 0..wo {
                let src = (oi * spec.stride + input.pad) * wp + oj * spec.stride + input.pad;
                let dst = out.pos(c, oi as isize, oj as isize) - out.frame_of(c) * out.block();
                b_pairs.insert((out.ct_of(c), normalize_rotation(src as i64 - dst as i64, input.slots)));
            }
        }
    }
    let nz = |s: &BTreeSet<(usize, i64)>| s.iter().filter(|p| p.1 != 0).count();
    Ok((nz(&a_pairs), nz(&b_pairs)))
}

fn fc_expected(input: &Layout, n_out: usize) -> usize {
    let span = (0..input.n_cts).map(|u| input.span(u)).max().unwrap_or(1);
    let tree = (usize::BITS - (span.max(1) - 1).leading_zeros()) as usize;
    n_out * tree + n_out - 1
}

fn tensor(r: &mut ChaCha20Rng, c: usize, h: usize, w: usize) -> Result<Tensor, String> {
    Tensor::from_vec(c, h, w, values(r, c * h * w, -1.0, 1.0)).map_err(e)
}

fn layer_equivalence() -> Outcome {
    let params = test_params()?;
    let slots = params.slots();
    let top = params.depth();
    let mut r = rng(3);
    let (mut worst, mut counted, mut failures) = (0f64, 0usize, Vec::new());
    for case in 0..50 {
        let kind = case % 3;
        let out_pad = below(&mut r, 2);
        let (h, w) = (range(&mut r, 4, 12), range(&mut r, 4, 12));
        let (got, want, expected, stats, measured) = match kind {
            0 => {
                let kernel = range(&mut r, 1, 4.min(h).min(w));
                let spec = ConvSpec {
                    c_in: range(&mut r, 1, 3),
                    c_out: range(&mut r, 1, 4),
                    kernel,
                    stride: range(&mut r, 1, 2),
                    padding: below(&mut r, kernel / 2 + 1),
                };
                let n_k = spec.c_out * spec.c_in * kernel * kernel;
                let wts = ConvWeights {
                    kernel: values(&mut r, n_k, -0.5, 0.5),
                    bias: values(&mut r, spec.c_out, -0.5, 0.5),
                };
                let x = tensor(&mut r, spec.c_in, h, w)?;
                let layout = Layout::new(spec.c_in, h, w, spec.padding, slots).map_err(e)?;
                let (sets, _) = snnhe_core::layers::conv_rotations(&layout, &spec, out_pad).map_err(e)?;
                let be = ckks_backend(&params, &sets.all().into_iter().collect::<Vec<_>>(), case as u64)?;
                let px = PackedTensor::encrypt(&be, &x, layout, top).map_err(e)?;
                let before = be.meter().snapshot().rotate;
                let (y, stats) = conv2d_enc(&be, &px, &spec, &wts, out_pad).map_err(e)?;
                let measured = be.meter().snapshot().rotate - before;
                let want = conv2d_plain(&x, &spec, &wts).map_err(e)?;
                (y.decrypt(&be).map_err(e)?, want, conv_expected(&layout, &spec, out_pad)?, stats, measured)
            }
            1 => {
                let kernel = range(&mut r, 1, 3);
                let spec = PoolSpec { kernel, stride: range(&mut r, 1, kernel) };
                let c = range(&mut r, 1, 6);
                let x = tensor(&mut r, c, h, w)?;
                let layout = Layout::new(c, h, w, below(&mut r, 2), slots).map_err(e)?;
                let (sets, _) = snnhe_core::layers::pool_rotations(&layout, &spec, out_pad).map_err(e)?;
                let be = ckks_backend(&params, &sets.all().into_iter().collect::<Vec<_>>(), case as u64)?;
                let px = PackedTensor::encrypt(&be, &x, layout, top).map_err(e)?;
                let before = be.meter().snapshot().rotate;
                let (y, stats) = avgpool_enc(&be, &px, &spec, out_pad).map_err(e)?;
                let measured = be.meter().snapshot().rotate - before;
                let want = avgpool_plain(&x, &spec).map_err(e)?;
                (y.decrypt(&be).map_err(e)?, want, pool_expected(&layout, &spec, out_pad)?, stats, measured)
            }
            _ => {
                let (c, h, w) = (range(&mut r, 1, 4), range(&mut r, 1, 6), range(&mut r, 1, 6));
                let spec = FcSpec { n_in: c * h * w, n_out: range(&mut r, 1, 12) };
                let wts = FcWeights {
                    weight: values(&mut r, spec.n_in * spec.n_out, -0.5, 0.5),
                    bias: values(&mut r, spec.n_out, -0.5, 0.5),
                };
                let x = tensor(&mut r, c, h, w)?;
                let layout = Layout::new(c, h, w, below(&mut r, 2), slots).map_err(e)?;
                let (sets, _) = snnhe_core::layers::fc_rotations(&layout, &spec).map_err(e)?;
                let be = ckks_backend(&params, &sets.all().into_iter().collect::<Vec<_>>(), case as u64)?;
                let px = PackedTensor::encrypt(&be, &x, layout, top).map_err(e)?;
                let before = be.meter().snapshot().rotate;
                let (y, stats) = fc_enc(&be, &px, &spec, &wts).map_err(e)?;
                let measured = be.meter().snapshot().rotate - before;
                let want = fc_plain(&x, &spec, &wts).map_err(e)?;
                (y.decrypt(&be).map_err(e)?, want, (0, fc_expected(&layout, spec.n_out)), stats, measured)
            }
        };
        let err = max_err(&got.data, &want.data);
        worst = worst.max(err);
        counted += measured as usize;
        let counts_ok = (stats.input_rotations, stats.output_rotations) == expected
            && measured as usize == expected.0 + expected.1;
        if err >= 1e-3 || !counts_ok || got.shape() != want.shape() {
            failures.push(format!(
                "case {case} ({}): err {err:.2e}, rotations {measured} vs closed form {expected:?}",
                ["conv", "pool", "fc"][kind]
            ));
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "50 specs: max slot error {worst:.2e}, {counted} counted rotations all equal the closed form{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    ))
}

// 3

fn chebyshev_budget() -> Outcome {
    let params = test_params()?;
    let be = ckks_backend(&params, &[], 4)?;
    let mut r = rng(5);
    let th = 0.125;
    let series = fit_step(th, 50).map_err(e)?;
    let delta = dead_zone(&series).half_width;
    let x = values(&mut r, params.slots(), -1.0, 1.0);
    let cx = be.encrypt(&x, params.depth()).map_err(e)?;
    let y = eval_series_encrypted(&be, &cx, &series, None).map_err(e)?;
    let used = cx.level() - y.level();
    let got = be.decrypt(&y).map_err(e)?;
    let (mut off, mut all) = (0f64, 0f64);
    for (xi, gi) in x.iter().zip(&got) {
        let d = (gi - series.eval(*xi)).abs();
        all = all.max(d);
        if (xi - th).abs() > delta {
            off = off.max(d);
        }
    }
    Ok((
        used == 7 && off < 1e-2,
        format!("degree 50: {used} levels consumed; max deviation from Clenshaw {off:.2e} off the dead zone (half-width {delta:.4}), {all:.2e} overall"),
    ))
}

// 4

fn switch_trace<B: HeBackend>(b: &B, inputs: &[Vec<f64>], cfg: &LifConfig) -> Result<Vec<Vec<f64>>, String> {
    let n = inputs[0].len();
    let th = b.encrypt(&vec![cfg.threshold; n], b.depth()).map_err(e)?;
    let mut v: Option<Cv<B>> = None;
    let mut out = Vec::new();
    for (t, x) in inputs.iter().enumerate() {
        let cx = b.encrypt(x, b.depth()).map_err(e)?;
        let (s, next) = lif_switch_step(b, v.as_ref(), &cx, &th, t + 1, cfg).map_err(e)?;
        out.push(b.decrypt(&s).map_err(e)?[..n].to_vec());
        v = Some(next);
    }
    Ok(out)
}

fn switch_exactness() -> Outcome {
    let params = test_params()?;
    let (traces, steps) = (1000, 5);
    let cfg = LifConfig::new(LifMode::Switch, 1.0);
    let mut r = rng(6);
    let inputs: Vec<Vec<f64>> = (0..steps).map(|_| values(&mut r, traces, -0.5, 1.0)).collect();
    let mut plain = Vec::new();
    let mut v = vec![0.0; traces];
    for (t, x) in inputs.iter().enumerate() {
        let (s, next) = lif_plain_step(&v, x, t + 1, &cfg);
        plain.push(s);
        v = next;
    }
    let fired: usize = plain.iter().flatten().filter(|&&s| s == 1.0).count();

    let sim = SimBackend::new(SimConfig::new(params.slots(), params.depth())).map_err(e)?;
    let sim_exact = switch_trace(&sim, &inputs, &cfg)? == plain;

    let be = ckks_backend(&params, &[], 7)?;
    let ckks: Vec<Vec<f64>> = switch_trace(&be, &inputs, &cfg)?
        .into_iter()
        .map(|s| s.into_iter().map(f64::round).collect())
        .collect();
    let ckks_exact = ckks == plain;
    Ok((
        sim_exact && ckks_exact,
        format!("{traces} traces x {steps} steps ({fired} spikes): sim bit-exact {sim_exact}, CKKS exact after rounding {ckks_exact}"),
    ))
}

// 5

fn approx_fidelity() -> Outcome {
    let params = test_params()?;
    let be = ckks_backend(&params, &[], 8)?;
    let cfg = LifConfig::new(LifMode::Approx, 2.0);
    let series = cfg.series().map_err(e)?;
    let delta = dead_zone(&series).half_width;
    let th = cfg.scaled_threshold();
    let n = params.slots();
    let steps = 3;
    let mut r = rng(9);

    let mut v_plain = vec![0.0; n];
    let mut v_enc: Option<Cv<CkksBackend>> = None;
    // slots whose plaintext membrane has stayed off the dead zone so far
    let mut clean = vec![true; n];
    let (mut agree, mut total) = (0usize, 0usize);
    for t in 1..=steps {
        let x = values(&mut r, n, -0.9, 1.4);
        let u: Vec<f64> = (0..n).map(|k| if t == 1 { x[k] } else { cfg.tau * v_plain[k] + x[k] }).collect();
        let (s_plain, next) = lif_plain_step(&v_plain, &x, t, &cfg);
        v_plain = next;

        let cx = be.encrypt(&x, params.depth()).map_err(e)?;
        let v_in = v_enc.as_ref().map(|v| be.refresh(v)).transpose().map_err(e)?;
        let (s, next) = lif_approx_step(&be, v_in.as_ref(), &cx, t, &cfg, &series, None).map_err(e)?;
        v_enc = Some(next);
        let s_enc = be.decrypt(&s).map_err(e)?;
        for k in 0..n {
            clean[k] &= (u[k] / cfg.scale_value - th).abs() > delta;
            if clean[k] {
                total += 1;
                agree += usize::from(s_enc[k].round() == s_plain[k]);
            }
        }
    }
    let rate = agree as f64 / total.max(1) as f64;
    Ok((
        rate >= 0.99 && delta <= 0.06,
        format!(
            "dead-zone half-width {delta:.4} around scaled threshold {th}; {agree}/{total} slot spikes agree ({:.2}%) over {steps} steps",
            100.0 * rate
        ),
    ))
}

// 6

fn end_to_end() -> Outcome {
    let net = io::shipped_network("lenet-tiny").ok_or("lenet-tiny is not shipped")?;
    let fx = fixtures::build(&net, 42, 100).map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let keys = dir.path().join("keys");
    commands::keygen("lenet-tiny", "test", 42, &keys).map_err(e)?;
    let mut rates = Vec::new();
    let mut detail = Vec::new();
    for mode in [LifMode::Switch, LifMode::Approx] {
        let t0 = Instant::now();
        let cfg = RunConfig {
            mode,
            backend: BackendChoice::Ckks,
            keys: Some(keys.clone()),
            profile: "test".into(),
            compare_plaintext: true,
            command: "evaluate".into(),
        };
        let report = commands::run(&fx.net, &fx.weights, &fx.samples, &cfg).map_err(e)?;
        let rate = report.agreement.and_then(|a| a.agreement).unwrap_or(0.0);
        detail.push(format!("{} {:.0}% in {:.0} s", mode.name(), 100.0 * rate, t0.elapsed().as_secs_f64()));
        rates.push(rate);
    }
    Ok((
        rates[0] == 1.0 && rates[1] >= 0.95,
        format!("lenet-tiny, T={}, {} inputs: argmax agreement {}", fx.net.timesteps, fx.samples.len(), detail.join(", ")),
    ))
}

// 7

fn profile_of(name: &str) -> Result<CkksParams, String> {
    if name.starts_with("lenet5") {
        CkksParams::lenet5()
    } else if name.starts_with("resnet19") {
        CkksParams::resnet19()
    } else {
        CkksParams::test()
    }
    .map_err(e)
}

fn planner_invariants() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, _) in io::SHIPPED_NETWORKS {
        let net = io::shipped_network(name).ok_or("missing network")?;
        let params = profile_of(name)?;
        let plans = [1, 2, 5, 10]
            .iter()
            .map(|&t| harvest_rotations(&net.with_timesteps(t), params.slots()).map(|p| p.indices))
            .collect::<Result<Vec<_>, _>>()
            .map_err(e)?;
        let invariant = plans.windows(2).all(|w| w[0] == w[1]);
        let budget = LevelBudget { depth: params.depth(), slots: params.slots(), ring_n: params.n() };
        let switch = simulate_levels(&net, &budget, LifMode::Switch);
        let approx = simulate_levels(&net, &budget, LifMode::Approx);
        let (rs, ra) = match (&switch, &approx) {
            (Ok(s), Ok(a)) => (s.schedule().len(), a.schedule().len()),
            _ => {
                ok = false;
                detail.push(format!("{name}: level underflow"));
                continue;
            }
        };
        ok &= invariant && rs < ra;
        detail.push(format!("{name}: {} keys, invariant {invariant}, refreshes {rs} < {ra}", plans[0].len()));
    }
    Ok((ok, detail.join("; ")))
}

// 8

fn profile_fidelity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (p, n, slots) in [(CkksParams::lenet5().map_err(e)?, 16384, 8192), (CkksParams::resnet19().map_err(e)?, 32768, 16384)] {
        let hit = p.n() == n && p.slots() == slots && p.depth() == 12 && p.scale_bits() == 56;
        ok &= hit;
        detail.push(format!("{}: N={} slots={} depth={} scale={}", p.name(), p.n(), p.slots(), p.depth(), p.scale_bits()));
    }

    // (kind, in, out, kernel, stride, padding) per row of the layer table
    let lenet = |c_in: usize, fc1: usize| {
        vec![
            ("conv", c_in, 6, 5, 1, 0),
            ("avgpool", 6, 6, 2, 2, 0),
            ("conv", 6, 16, 5, 1, 0),
            ("avgpool", 16, 16, 2, 2, 0),
            ("fc", fc1, 120, 0, 0, 0),
            ("fc", 120, 84, 0, 0, 0),
            ("fc", 84, 10, 0, 0, 0),
        ]
    };
    let resnet = |c_in: usize| {
        let mut rows = vec![("conv", c_in, 16, 3, 1, 1)];
        rows.extend([1, 1, 1].map(|s| ("residual-block", 16, 16, 3, s, 1)));
        rows.extend([(16, 2), (32, 1), (32, 1)].map(|(i, s)| ("residual-block", i, 32, 3, s, 1)));
        rows.extend([(32, 2), (64, 1)].map(|(i, s)| ("residual-block", i, 64, 3, s, 1)));
        rows.push(("avgpool", 64, 64, 8, 1, 0));
        rows.push(("fc", 64, 10, 0, 0, 0));
        rows
    };
    let table = [
        ("lenet5-mnist", lenet(1, 256)),
        ("lenet5-nmnist", lenet(2, 576)),
        ("resnet19-cifar10", resnet(3)),
        ("resnet19-cifar10dvs", resnet(2)),
    ];
    let row = |l: &Layer| match *l {
        Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. } => ("conv", in_ch, out_ch, kernel, stride, padding),
        Layer::Avgpool { in_ch, out_ch, kernel, stride } => {
            ("avgpool", in_ch.unwrap_or(0), out_ch.unwrap_or(0), kernel, stride, 0)
        }
        Layer::Fc { in_ch, out_ch, .. } => ("fc", in_ch, out_ch, 0, 0, 0),
        Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
            ("residual-block", in_ch, out_ch, kernel, stride, padding)
        }
        Layer::Lif { .. } => ("lif", 0, 0, 0, 0, 0),
    };
    for (name, want) in table {
        let net: NetworkSpec = io::shipped_network(name).ok_or("missing network")?;
        let got: Vec<_> = net.layers.iter().map(row).collect();
        let hit = got == want && net.shapes().is_ok();
        ok &= hit;
        detail.push(format!("{name}: {} rows match {hit}", want.len()));
    }
    Ok((ok, detail.join("; ")))
}

// 9

fn idx_bytes(magic: u32, dims: &[u32], body: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend(body);
    out
}

fn off_by_one(text: &str) -> Vec<String> {
    let rows: Vec<&str> = text.lines().collect();
    let first = rows[0];
    let drop_value = |r: &str| r.rsplit_once(',').map_or(String::new(), |(head, _)| head.to_string());
    let mut out = vec![
        rows[..rows.len() - 1].join("\n"),
        format!("{}\n{first}", rows.join("\n")),
        format!("{},0.5\n{}", first, rows[1..].join("\n")),
    ];
    if first.contains(',') {
        out.push(format!("{}\n{}", drop_value(first), rows[1..].join("\n")));
    }
    out.into_iter().map(|s| s.trim_matches('\n').to_string() + "\n").collect()
}

fn format_conformance() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();

    let two = idx_bytes(idx::IMAGES_MAGIC, &[2, 2, 3], &[0, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6]);
    let images = idx::parse_images(&two).map_err(e)?;
    let images_ok = images.len() == 2
        && images[0].shape() == (1, 2, 3)
        && images[0].data == [0.0, 1.0, 0.2, 0.4, 0.6, 0.8]
        && images[1].data[5] == 6.0 / 255.0;
    let labels_ok = idx::parse_labels(&idx_bytes(idx::LABELS_MAGIC, &[3], &[7, 0, 9])).map_err(e)? == [7, 0, 9];
    let bad = idx::parse_images(&idx_bytes(0x0000_0802, &[2, 2, 3], &[0; 12]));
    let magic_rejected = bad.as_ref().is_err_and(|err| err.to_string().contains("magic"));
    ok &= images_ok && labels_ok && magic_rejected;
    detail.push(format!("IDX images {images_ok}, labels {labels_ok}, bad magic rejected {magic_rejected}"));

    let mut r = rng(10);
    let samples: Vec<Sample> = (0..4)
        .map(|i| Sample {
            frames: (0..3).map(|_| tensor(&mut r, 2, 3, 4)).collect::<Result<Vec<_>, _>>().unwrap(),
            label: Some(i),
        })
        .collect();
    let file = spkf::Spkf::from_samples(&samples).map_err(e)?;
    let bytes = file.to_bytes();
    let back = spkf::parse(&bytes).map_err(e)?;
    let spkf_ok = back == file && back.to_bytes() == bytes;
    ok &= spkf_ok;
    detail.push(format!("SPKF bit-exact roundtrip {spkf_ok}"));

    let net = io::shipped_network("lenet-tiny").ok_or("missing network")?;
    let fx = fixtures::build(&net, 11, 1).map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    io::save_weights_csv(dir.path(), &net, &fx.weights).map_err(e)?;
    let loads = io::load_weights_csv(dir.path(), &net).is_ok();
    let (mut caught, mut total) = (0, 0);
    let mut files: Vec<_> = std::fs::read_dir(dir.path()).map_err(e)?.map(|f| f.unwrap().path()).collect();
    files.sort();
    for f in &files {
        let original = std::fs::read_to_string(f).map_err(e)?;
        for variant in off_by_one(&original) {
            std::fs::write(f, variant).map_err(e)?;
            total += 1;
            caught += usize::from(io::load_weights_csv(dir.path(), &net).is_err());
        }
        std::fs::write(f, original).map_err(e)?;
    }
    let csv_ok = loads && caught == total && total > 0;
    ok &= csv_ok;
    detail.push(format!("weight CSV off-by-one fixtures rejected {caught}/{total} across {} files", files.len()));
    Ok((ok, detail.join("; ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ckks correctness", ckks_correctness),
        ("layer equivalence", layer_equivalence),
        ("chebyshev budget", chebyshev_budget),
        ("lif switch exactness", switch_exactness),
        ("lif approx fidelity", approx_fidelity),
        ("end-to-end differential", end_to_end),
        ("planner invariants", planner_invariants),
        ("profile fidelity", profile_fidelity),
        ("format conformance", format_conformance),
    ];
    // wall-clock limits per criterion, in seconds
    let limits = [Some(60.0), Some(600.0), None, None, None, Some(1800.0), None, None, None];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, ((name, f), limit)) in criteria.iter().zip(limits).enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => match limit {
                Some(l) if secs > l => (false, format!("{detail}; over the {l:.0} s limit")),
                _ => (pass, detail),
            },
            Err(err) => (false, format!("error: {err}")),
        };
        failed += usize::from(!pass);
        println!("criterion {id} {}: {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {failed} failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
