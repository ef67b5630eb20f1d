//! Statistical and oracle checks of the per-module examples.

use std::f64::consts::{FRAC_1_SQRT_2, LOG2_E};

use cvqkd_svd::allocation::{self, allocate_from, AllocationParams};
use cvqkd_svd::channel::{make_channel, TransmittanceSpec};
use cvqkd_svd::decoding::{self, build_decoder};
use cvqkd_svd::partial_csi::{self, build_statistical_model, perturbed_sampler, rayleigh_sampler};
use cvqkd_svd::permutation_code::{
    self, build_constellation, delta_optimization, designed_16_point_pair, Layout, PairPolicy,
    PermutationKind,
};
use cvqkd_svd::phase_space::{sample_gaussian_cv, sample_with_covariance, squared_magnitude_tau};
use cvqkd_svd::precoding::{self, EquivalenceConstellation, Projector};
use cvqkd_svd::singular_layer::{
    interference_variance, measure_interference, svd_of_channel, used_layer, FactorError,
};
use cvqkd_svd::stats::{mean_se, Estimate};
use cvqkd_svd::{rng, CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn within(e: Estimate, target: f64, k: f64) -> bool {
    (e.mean - target).abs() <= k * e.se
}

// Two-sided KS statistic against a continuous CDF.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// Asymptotic KS critical value at significance 0.01.
fn ks_critical(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[test]
fn sample_power_matches_variance() {
    let v = sample_gaussian_cv(1.0, 100_000, 1).unwrap();
    assert!((v.norm_sqr() / 1e5 - 2.0).abs() < 0.05);
    let v = sample_gaussian_cv(0.5, 100_000, 2).unwrap();
    let ours = v.norm_sqr() / 1e5;
    // Reference batch from two independent N(0, 0.5) components.
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let oracle: f64 = (0..100_000)
        .map(|_| normal.sample(&mut r).powi(2) + normal.sample(&mut r).powi(2))
        .sum::<f64>()
        / 1e5;
    assert!((ours - 1.0).abs() < 0.03);
    assert!((oracle - 1.0).abs() < 0.03);
    assert!(sample_gaussian_cv(0.0, 4, 0).is_err());
    assert!(sample_gaussian_cv(1.0, 0, 0).is_err());
}


#[test]
fn quadratures_independent_with_given_variance() {
    let s2 = 0.7;
    let v = sample_gaussian_cv(s2, 100_000, 3).unwrap();
    let x = v.x();
    let p = v.p();
    let vx = mean_se(&x.iter().map(|a| a * a).collect::<Vec<_>>());
    let vp = mean_se(&p.iter().map(|a| a * a).collect::<Vec<_>>());
    let xp = mean_se(&x.iter().zip(&p).map(|(a, b)| a * b).collect::<Vec<_>>());
    assert!(within(vx, s2, 5.0) && within(vp, s2, 5.0));
    assert!(within(xp, 0.0, 5.0));
    assert!(within(mean_se(&x), 0.0, 5.0) && within(mean_se(&p), 0.0, 5.0));
}

#[test]
fn magnitude_is_rayleigh_and_power_exponential() {
    let s2 = 1.3;
    let n = 100_000;
    let v = sample_gaussian_cv(s2, n, 4).unwrap();
    let mags: Vec<f64> = v.values.iter().map(|z| z.norm()).collect();
    let pows: Vec<f64> = v.values.iter().map(|z| z.norm_sqr()).collect();
    let d1 = ks_statistic(mags, |r| 1.0 - (-r * r / (2.0 * s2)).exp());
    let d2 = ks_statistic(pows, |t| 1.0 - (-t / (2.0 * s2)).exp());
    assert!(d1 < ks_critical(n), "Rayleigh KS {d1}");
    assert!(d2 < ks_critical(n), "exponential KS {d2}");
}

#[test]
fn circular_symmetry_of_correlated_vectors() {
    let k = CMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.5, 0.5)], vec![c(0.5, -0.5), c(1.0, 0.0)]]).unwrap();
    let n = 50_000;
    let mut pseudo = Vec::with_capacity(n);
    let mut cov01 = Vec::with_capacity(n);
    let mut rot01 = Vec::with_capacity(n);
    let rot = C64::from_polar(1.0, 0.7);
    for t in 0..n {
        let z = sample_with_covariance(&k, t as u64).unwrap().values;
        pseudo.push((z[0] * z[1]).re);
        cov01.push((z[0] * z[1].conj()).re);
        let w: Vec<C64> = z.iter().map(|a| a * rot).collect();
        rot01.push((w[0] * w[1].conj()).re);
    }
    assert!(within(mean_se(&pseudo), 0.0, 5.0));
    assert!(within(mean_se(&cov01), 0.5, 5.0));
    assert!(within(mean_se(&rot01), 0.5, 5.0));
}

#[test]
fn tau_mean_bounded_by_block_power() {
    let taus: Vec<f64> = (0..10_000)
        .map(|j| squared_magnitude_tau(&sample_gaussian_cv(1.0, 8, 1000 + j).unwrap().values).unwrap())
        .collect();
    let e = mean_se(&taus);
    assert!(e.mean <= 16.0 + 3.0 * e.se);
    assert_eq!(squared_magnitude_tau(&[c(0.0, 0.0); 4]).unwrap(), 0.0);
    assert!((squared_magnitude_tau(&[c(1.0, 1.0)]).unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn subchannel_snr_matches_definition() {
    let t: Vec<C64> = [0.9, 0.4, 0.7, 0.2]
        .iter()
        .map(|a| c(a * FRAC_1_SQRT_2, a * FRAC_1_SQRT_2))
        .collect();
    let (sw, sn) = (1.0, 0.2);
    let ch = make_channel(4, &TransmittanceSpec::Explicit(t), sn, 1e9).unwrap();
    let l = ch.l();
    let blocks = 40_000;
    let mut sig = vec![Vec::with_capacity(blocks); l];
    let mut out = vec![Vec::with_capacity(blocks); l];
    for j in 0..blocks {
        let d = sample_gaussian_cv(sw, l, 10 * j as u64).unwrap().values;
        let b = ch.transmit_block(j, &d, 10 * j as u64 + 1).unwrap();
        for i in 0..l {
            let s = b.output[i] - b.noise_realization[i];
            sig[i].push(s.norm_sqr());
            out[i].push(b.output[i].norm_sqr());
        }
    }
    for (i, &g) in ch.good_set().iter().enumerate() {
        let gain = ch.ft()[g].norm_sqr();
        let snr = mean_se(&sig[i]).mean / (2.0 * sn);
        let expect = sw * gain / sn;
        assert!((snr / expect - 1.0).abs() < 0.03, "sub-channel {g}: {snr} vs {expect}");
        let total = mean_se(&out[i]);
        assert!(within(total, gain * 2.0 * sw + 2.0 * sn, 5.0));
    }
}

#[test]
fn zero_input_leaves_only_noise() {
    let ch = make_channel(4, &TransmittanceSpec::Uniform { seed: 5 }, 0.3, 1e9).unwrap();
    let zero = vec![c(0.0, 0.0); ch.l()];
    let mut q = Vec::new();
    for j in 0..20_000 {
        let b = ch.transmit_block(j, &zero, j as u64).unwrap();
        assert_eq!(b.output, b.noise_realization);
        q.extend(b.output.iter().map(|z| z.re * z.re));
        q.extend(b.output.iter().map(|z| z.im * z.im));
    }
    assert!(within(mean_se(&q), 0.3, 5.0));
}

#[test]
fn interference_grows_with_factor_error() {
    let mut r = rng::seeded(21);
    let f = rng::complex_gaussian_matrix(&mut r, 4, 4, 1.0);
    let (none, _) = measure_interference(&f, FactorError::None, 1.0, 0.1, 2000, 1).unwrap();
    assert!(none.average < 1e-20);
    let layer = svd_of_channel(&f).unwrap();
    let ks = CMatrix::identity(4);
    let mut last = 0.0;
    for norm in [0.05, 0.1, 0.2, 0.4] {
        let err = FactorError::Perturbed { norm, seed: 9 };
        let exact = interference_variance(&layer, &used_layer(&f, err).unwrap(), &ks).unwrap();
        let (mc, per) = measure_interference(&f, err, 1.0, 0.1, 20_000, 2).unwrap();
        assert!(exact.average > last);
        last = exact.average;
        for (e, x) in per.iter().zip(&exact.per_stream) {
            assert!(within(*e, *x, 5.0));
        }
        assert!(mc.average > 0.0);
    }
}

#[test]
fn mean_model_error_shrinks_like_inverse_root_n() {
    let mut r = rng::seeded(31);
    let f0 = rng::complex_gaussian_matrix(&mut r, 3, 2, 1.0);
    let sampler = perturbed_sampler(f0.clone(), 0.3);
    let err = |n: usize, rep: u64| {
        let mut rr = rng::stream(77, rep);
        let draws: Vec<CMatrix> = (0..n).map(|_| sampler(&mut rr)).collect();
        build_statistical_model(&draws).unwrap().mean.sub(&f0).frobenius_norm()
    };
    let small: f64 = (0..50).map(|k| err(100, k)).sum::<f64>() / 50.0;
    let large: f64 = (0..50).map(|k| err(10_000, 100 + k)).sum::<f64>() / 50.0;
    let ratio = small / large;
    assert!((ratio - 10.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn deterministic_channel_capacity_matches_eigen_form() {
    let mut r = rng::seeded(32);
    let f = rng::complex_gaussian_matrix(&mut r, 3, 3, 1.0);
    let layer = svd_of_channel(&f).unwrap();
    let sw = 0.8;
    let ks = layer.input_covariance(&[sw / 3.0; 3]);
    let fixed = f.clone();
    let mc = partial_csi::capacity_partial_csi(&ks, move |_| fixed.clone(), 0.5, 10, 1).unwrap();
    let eig = allocation::eigen_capacity(&layer.gamma, sw, 0.5, 0.0);
    assert!((mc.mean - eig).abs() < 1e-9 * eig);
}

#[test]
fn partial_csi_estimate_agrees_with_brute_force() {
    let ks = CMatrix::from_real_diag(&[0.5, 0.5]);
    let est = partial_csi::capacity_partial_csi(&ks, rayleigh_sampler(2, 2), 1.0, 20_000, 5).unwrap();
    // Reference: closed-form 2x2 determinant over a long independent run.
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
    let mut acc = 0.0;
    let n = 1_000_000;
    for _ in 0..n {
        let mut g = [c(0.0, 0.0); 4];
        for z in &mut g {
            *z = c(normal.sample(&mut r), normal.sample(&mut r)) * FRAC_1_SQRT_2;
        }
        // E|F_ij|² = 1/K_in = 1/2.
        let [a, b, cc, d] = g;
        // det(I + 0.5 F F†) for F = [[a, b], [cc, d]].
        let p = 0.5;
        let m00 = 1.0 + p * (a.norm_sqr() + b.norm_sqr());
        let m11 = 1.0 + p * (cc.norm_sqr() + d.norm_sqr());
        let m01 = (a * cc.conj() + b * d.conj()) * p;
        acc += (m00 * m11 - m01.norm_sqr()).log2();
    }
    let oracle = acc / n as f64;
    assert!((est.mean - oracle).abs() <= 3.0 * est.se, "{} vs {oracle}", est.mean);
}

#[test]
fn jensen_examples() {
    // Scaled unitary: every draw has equal singular values.
    let q = svd_of_channel(&rng::complex_gaussian_matrix(&mut rng::seeded(3), 3, 3, 1.0))
        .unwrap()
        .u2;
    let eq = partial_csi::jensen_gap(move |_| q.scale_real(0.7), 2.0, 1.0, 3, 3, 50, 1).unwrap();
    assert!((eq.lhs.mean - eq.rhs.mean).abs() < 1e-12);
    let g = partial_csi::jensen_gap(rayleigh_sampler(3, 2), 1.0, 1.0, 2, 2, 10_000, 2).unwrap();
    assert!(g.lhs.mean <= g.rhs.mean + 3.0 * g.rhs.se);
    let mut last = f64::INFINITY;
    for snr in [1.0, 0.1, 0.01, 0.001] {
        let g = partial_csi::jensen_gap(rayleigh_sampler(2, 2), snr, 1.0, 2, 2, 5000, 3).unwrap();
        let rel = g.gap.mean / g.rhs.mean;
        assert!(rel < last);
        last = rel;
    }
    assert!(last < 1e-3);
}

#[test]
fn low_snr_closed_form_matches_monte_carlo() {
    let sp = 1e-3;
    let ks = CMatrix::from_real_diag(&[sp / 2.0, sp / 2.0]);
    let mc = partial_csi::capacity_partial_csi(&ks, rayleigh_sampler(2, 2), 1.0, 20_000, 8).unwrap();
    let cf = partial_csi::low_snr_partial_capacity(2, 2, sp, 1.0, 2.0);
    assert!((mc.mean - cf.closed_form).abs() / cf.closed_form < 0.02);
    let ex = partial_csi::low_snr_partial_capacity(2, 2, 0.01, 1.0, 2.0);
    assert!((ex.closed_form - 0.014_426_950_408_889_634).abs() < 1e-15);
}

#[test]
fn projector_for_mixed_pair_matches_null_space() {
    let s = FRAC_1_SQRT_2;
    // 45° mixing of two streams in three receive dimensions.
    let dirs = vec![vec![c(s, 0.0), c(s, 0.0), c(0.0, 0.0)], vec![c(-s, 0.0), c(s, 0.0), c(0.0, 0.0)]];
    let p = Projector::from_directions(&dirs, 0).unwrap();
    // Null space of the interferer by hand: span{(1,1,0)/√2, (0,0,1)}.
    let oracle = CMatrix::from_rows(&[
        vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
    ])
    .unwrap();
    assert!(p.projection().max_abs_diff(&oracle) < 1e-10);
    let interference: Vec<C64> = dirs[1].iter().map(|z| z * c(2.3, -1.1)).collect();
    let res: f64 = p.apply(&interference).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(res < 1e-10);
}

#[test]
fn postcode_snr_and_rate_bound() {
    let mut r = rng::seeded(41);
    let f = rng::complex_gaussian_matrix(&mut r, 4, 3, 1.0);
    let layer = svd_of_channel(&f).unwrap();
    // Decoder knows a slightly different (mean) model; interference directions
    // are what it cancels.
    let dirs: Vec<Vec<C64>> = (0..3)
        .map(|j| {
            let mut d = layer.eigen_direction(j);
            d[0] += c(0.3 * j as f64, 0.1);
            d
        })
        .collect();
    let (sw, sn) = (1.5, 0.4);
    for i in 0..3 {
        let p = Projector::from_directions(&dirs, i).unwrap();
        let theory = precoding::postcode_snr(&p, &dirs[i], sw, 2.0 * sn);
        let mc = precoding::empirical_postcode_snr(&p, &dirs, sw, sn, 100_000, 10 + i as u64);
        assert!(within(mc, theory, 3.0), "stream {i}: {} ± {} vs {theory}", mc.mean, mc.se);
        let noiseless = precoding::postcode_cancel(&p, &dirs[i], &dirs[i]);
        assert!((noiseless.gain - theory * 2.0 * sn / sw).abs() < 1e-12);
    }
    let bound = precoding::stream_rate_bound(&layer.gamma, sw, sn);
    for i in 0..3 {
        let p = precoding::build_projector(&layer, i).unwrap();
        let rate = (1.0 + precoding::postcode_snr(&p, &layer.eigen_direction(i), sw, sn)).log2();
        assert!(rate <= bound);
    }
}

#[test]
fn naive_energy_grows_linearly_while_sia_stays_in_cell() {
    let ec = EquivalenceConstellation::standard(1.0, 40.0).unwrap();
    let lam = ec.lattice_period;
    let mut naive = Vec::new();
    for k in 1..=4 {
        let sg = 10.0 * k as f64;
        let cmp = precoding::compare_precoders(&ec, sg, 50_000, k).unwrap();
        naive.push((sg * sg, cmp.naive_energy));
        assert!(cmp.sia_energy.mean <= lam * lam / 2.0);
        assert!(cmp.sia_energy.mean < cmp.naive_energy.mean);
        assert_eq!(cmp.decode_error_rate, 0.0);
    }
    // E|φ − γ|² = |φ|² + σ_γ²; fit slope and check it is 1.
    for (s2, e) in &naive {
        assert!(within(*e, 2.0 + s2, 4.0), "{} vs {}", e.mean, 2.0 + s2);
    }
}

#[test]
fn alpha_decoder_geometry() {
    let (sw, sn, d) = (2.0, 0.5, 4);
    let e = precoding::alpha_residual(sw, sn, d, 200_000, 3);
    let expect = d as f64 * sw * sn / (sw + sn);
    assert!(within(e, expect, 3.0));
    let sp = precoding::sphere_packing_capacity(sw, sn, d).unwrap();
    assert!((sp.residual_variance - sw * sn / (sw + sn)).abs() < 1e-15);
    assert!((sp.rate_bits - 2.0 * (1.0 + sw / sn).log2()).abs() < 1e-12);
}

#[test]
fn vector_mmse_matches_closed_form() {
    let h = vec![vec![c(0.8, 0.3), c(-0.2, 0.6)], vec![c(0.1, -0.5), c(0.9, 0.2)]];
    let powers = [1.5, 0.7];
    let noise = 0.4;
    let dec = build_decoder(&h, &powers, noise, 0).unwrap();
    let m = decoding::monte_carlo_mse(&dec, &h, &powers, noise, 100_000, 6);
    assert!(within(m.mse, m.theory, 3.0), "{} ± {} vs {}", m.mse.mean, m.mse.se, m.theory);
    assert!(within(m.orth_re, 0.0, 3.0) && within(m.orth_im, 0.0, 3.0));
    // E = P/(1 + SNIR).
    assert!((m.theory - 1.5 / (1.0 + dec.snir())).abs() < 1e-14);
}

#[test]
fn two_user_filter_matches_explicit_inverse() {
    let h = vec![vec![c(1.0, 0.0), c(0.5, 0.5)], vec![c(0.0, 1.0), c(1.0, 0.0)]];
    let dec = build_decoder(&h, &[1.0, 2.0], 0.5, 0).unwrap();
    // K = 0.5 I + 2 h1 h1†, h1 = (i, 1).
    let k = [[c(2.5, 0.0), c(0.0, 2.0)], [c(0.0, -2.0), c(2.5, 0.0)]];
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    let inv = [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]];
    let expect = [
        inv[0][0] * h[0][0] + inv[0][1] * h[0][1],
        inv[1][0] * h[0][0] + inv[1][1] * h[0][1],
    ];
    for (a, b) in dec.filter.iter().zip(&expect) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn weak_interferer_recovers_plain_snr() {
    let h = vec![vec![c(0.6, 0.8)], vec![c(1.0, 0.0)]];
    let dec = build_decoder(&h, &[2.0, 1e-12], 0.5, 0).unwrap();
    assert!((dec.snir() - 2.0 / 0.5).abs() < 1e-9);
}

#[test]
fn matched_filter_beats_random_filters() {
    let mut r = rng::seeded(51);
    let h: Vec<Vec<C64>> = (0..3).map(|_| rng::complex_gaussian_vec(&mut r, 0.5, 3)).collect();
    let dec = build_decoder(&h, &[1.0, 2.0, 0.5], 0.3, 0).unwrap();
    let best = dec.filter_snir(&dec.filter);
    assert!((best - dec.snir()).abs() < 1e-10 * best);
    for _ in 0..100 {
        let w = rng::complex_gaussian_vec(&mut r, 0.5, 3);
        assert!(dec.filter_snir(&w) <= best * (1.0 + 1e-12));
    }
}

#[test]
fn projection_is_a_sufficient_statistic() {
    let h = vec![vec![c(0.7, -0.2), c(0.3, 0.9)]];
    let dec = build_decoder(&h, &[1.2], 0.8, 0).unwrap();
    let rep = decoding::sufficient_statistic_check(&dec, None).unwrap();
    // Oracle: log2 det(I + P h h†/σ²) = log2(1 + P‖h‖²/σ²).
    let oracle = (1.0 + 1.2 * decoding::channel_gain(&h[0]) / 0.8).log2();
    assert!((rep.full - oracle).abs() < 1e-9);
    assert!((rep.projected - oracle).abs() < 1e-9);
    let bad = [c(1.0, 0.0), c(0.0, 0.0)];
    let rep = decoding::sufficient_statistic_check(&dec, Some(&bad)).unwrap();
    assert!(rep.projected < rep.full - 1e-6);
    let scalar = build_decoder(&[vec![c(1.0, 0.0)]], &[3.0], 1.0, 0).unwrap();
    let s = decoding::sufficient_statistic_check(&scalar, None).unwrap();
    assert!((s.full - 2.0).abs() < 1e-12 && (s.projected - 2.0).abs() < 1e-12);
}

#[test]
fn empirical_whitening_gives_identity() {
    let h = vec![vec![c(0.8, 0.3), c(-0.2, 0.6)], vec![c(0.1, -0.5), c(0.9, 0.2)]];
    let dec = build_decoder(&h, &[1.0, 3.0], 0.2, 0).unwrap();
    let exact = dec.whitener.matmul(&dec.k_chi).matmul(&dec.whitener.adjoint());
    assert!(exact.max_abs_diff(&CMatrix::identity(2)) < 1e-9);
    let emp = decoding::whitened_covariance(&dec, 200_000, 4).unwrap();
    assert!(emp.max_abs_diff(&CMatrix::identity(2)) < 0.02);
}

#[test]
fn single_and_symmetric_user_rates() {
    let h = vec![vec![c(0.5, 0.5), c(0.2, 0.0)]];
    let one = decoding::chain_rule_rate(&h, &[2.0], 0.5, &[0]).unwrap();
    let oracle = (1.0 + 2.0 * decoding::channel_gain(&h[0]) / 0.5).log2();
    assert!((one.sum_rate - oracle).abs() < 1e-12);
    let h2 = vec![vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(1.0, 0.0)]];
    let two = decoding::chain_rule_rate(&h2, &[1.0, 1.0], 1.0, &[1, 0]).unwrap();
    assert!((two.sum_rate - two.joint).abs() < 1e-9);
}

#[test]
fn pep_formula_matches_ml_detection() {
    let pc = build_constellation(
        1,
        1,
        &Layout::Supplied(vec![c(1.0, 0.0), c(-1.0, 0.0)]),
        PermutationKind::Identity,
    )
    .unwrap();
    let pair = pc.pair(0, 1);
    let f = permutation_code::pairwise_error_prob(&pair, &[0.5], 1.0);
    let mc = permutation_code::monte_carlo_pep(&pair, &[0.5], 1_000_000, 7);
    assert!(within(mc, f, 3.0), "{} ± {} vs {f}", mc.mean, mc.se);
}

#[test]
fn optimality_cases() {
    // Independent identical constellations where the pair collides on
    // every sub-channel.
    let same = build_constellation(3, 2, &Layout::SquareGrid { spacing: 1.0 }, PermutationKind::Identity).unwrap();
    let d: Vec<C64> = vec![c(0.0, 0.0); 3];
    assert_eq!(permutation_code::optimality_of(&d, 0.0), 0.0);
    let o = same.optimality(1.0, PairPolicy::MinimalDistance).unwrap();
    assert!(o.abs() < 1e-12);
    let preset = designed_16_point_pair();
    let (o, _) = preset.worst_pair_optimality(4.0);
    assert!(o > 0.0);
    // Exhaustive scan oracle for the worst pair.
    let mut worst = f64::INFINITY;
    for a in 0..16 {
        for b in a + 1..16 {
            let dd = preset.pair(a, b).deltas;
            let nu = permutation_code::nu_eve_for_rate(&dd, 4.0);
            worst = worst.min(permutation_code::optimality_of(&dd, nu));
        }
    }
    assert!((o - worst).abs() < 1e-12 * worst);
}

#[test]
fn larger_optimality_means_smaller_worst_error() {
    let rep = build_constellation(2, 4, &Layout::SquareGrid { spacing: 1.0 }, PermutationKind::Identity).unwrap();
    let des = designed_16_point_pair();
    let (o_rep, _) = rep.worst_pair_optimality(4.0);
    let (o_des, _) = des.worst_pair_optimality(4.0);
    assert!(o_des > o_rep);
    assert!(des.worst_pair_error() < rep.worst_pair_error());
}

#[test]
fn product_distance_bounds_and_enumeration() {
    let base: Vec<C64> = vec![c(-1.0, -1.0), c(1.0, -1.0), c(-1.0, 1.0), c(1.0, 1.0)];
    let stats = permutation_code::product_distance_stats(&base, 2, 2, 1.0, 500, 3).unwrap();
    // Exact expectation over all 4! second-sub-channel permutations.
    let mut exact = 0.0;
    let mut count = 0;
    let mut perm = [0usize, 1, 2, 3];
    permute(&mut perm, 0, &mut |p| {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let d1 = (base[a] - base[b]).norm_sqr();
                    let d2 = (base[p[a]] - base[p[b]]).norm_sqr();
                    acc += 1.0 / (d1 * d2);
                }
            }
        }
        exact += acc / 12.0;
        count += 1;
    });
    exact /= count as f64;
    assert_eq!(count, 24);
    assert!(within(stats.mean_inverse, exact, 3.0));
    assert!(exact <= stats.bound);
    assert!(stats.per_symbol <= stats.per_symbol_bound);
    let one = permutation_code::product_distance_stats(&base[..2], 1, 1, 1.0, 5, 1).unwrap();
    assert!(one.mean_inverse.mean <= one.bound);
}

fn permute(p: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn permuted_design_beats_repetition_on_worst_pair() {
    let rep = build_constellation(2, 4, &Layout::SquareGrid { spacing: 1.0 }, PermutationKind::Identity).unwrap();
    let des = designed_16_point_pair();
    let worst = |pc: &permutation_code::PermutationConstellation| {
        pc.all_pairs()
            .map(|(a, b)| permutation_code::product_distance_sq(&pc.pair(a, b).deltas))
            .fold(f64::INFINITY, f64::min)
    };
    assert!(worst(&des) >= worst(&rep));
}

#[test]
fn product_distance_condition_with_empirical_c() {
    let des = designed_16_point_pair().with_snr_scale(0.5);
    let c_emp = des.empirical_c();
    let l = des.l() as f64;
    let rhs = c_emp.powf(l) / l.powf(2.0 * 4.0 * l);
    for (a, b) in des.all_pairs() {
        let pair = des.pair(a, b);
        let arg = (des.snr_scale / 2.0 * pair.deltas.iter().map(|d| d.norm_sqr()).sum::<f64>()).sqrt();
        if arg < 1.0 {
            assert!(permutation_code::product_distance_sq(&pair.deltas) >= rhs * (1.0 - 1e-12));
        }
    }
}

#[test]
fn delta_optimization_examples() {
    let eq = delta_optimization(&[0.7, 0.7, 0.7], 2.0).unwrap();
    assert_eq!(eq.best_j, 3);
    assert!((eq.value - 3.0 * 3.0 * 0.49).abs() < 1e-12);
    let r = delta_optimization(&[1.0, 2.0], 1.0).unwrap();
    // Brute force: minimize ν1 + ν2 − Σ|δ|² with ν_i ≥ |δ_i|², ν1 ν2 = 2^{Rl} Π|δ|².
    let target = 4.0 * 1.0 * 4.0;
    let mut best = f64::INFINITY;
    for k in 0..=200_000 {
        let v1 = 1.0 + k as f64 * 1e-4;
        let v2 = target / v1;
        if v2 >= 4.0 {
            best = best.min(v1 + v2 - 5.0);
        }
    }
    assert!((r.value - best).abs() < 1e-6, "{} vs {best}", r.value);
}

#[test]
fn allocation_examples() {
    let p = allocate_from(1.0, 1.0, 3, 3, 0.2, 2.0, AllocationParams::default()).unwrap();
    assert!((p.nu_min - 0.2).abs() < 1e-15 && (p.nu_prime_min - 0.2).abs() < 1e-15);
    assert_eq!(p.pi_term, 0.0);
    assert!((p.sigma_dprime_sq - 1.8).abs() < 1e-15);
    assert!(allocate_from(0.5, 0.5, 1, 1, 0.1, 0.2, AllocationParams::default()).is_err());
    // σ''² from the hand example with |F(T)|² = 0.5, σ_N² = 0.1.
    let v = (1.0f64 + 0.875 * 0.5 / 0.1).log2();
    assert!((v - 2.426).abs() < 1e-3);
    // Eigen-sum vs log-det at n_min = 2, λ = (1, 1), σ_ω² = 2, σ_N² = 1.
    let f = CMatrix::identity(2);
    let layer = svd_of_channel(&f).unwrap();
    let eig = allocation::eigen_capacity(&layer.gamma, 2.0, 1.0, 0.0);
    let det = allocation::log_det_capacity(&f, &layer.input_covariance(&[1.0, 1.0]), 1.0).unwrap();
    assert!((eig - det).abs() < 1e-12);
    assert!((eig - 2.0).abs() < 1e-12);
}

#[test]
fn subchannel_capacity_examples() {
    let t = vec![c(0.5, 0.5)];
    let ch = make_channel(1, &TransmittanceSpec::Explicit(t), 0.1, 10.0).unwrap();
    let g = ch.ft()[0].norm_sqr();
    let s2 = 3.0 * 0.1 / g;
    assert!((allocation::subchannel_capacity(&ch, s2, 0.0) - 2.0).abs() < 1e-12);
    let layer = svd_of_channel(&ch.transfer_matrix()).unwrap();
    let plan = allocation::allocate(&layer, &ch, AllocationParams { c: 0.5, nu_kappa: 0.0 }).unwrap();
    let with_dp = allocation::capacity_subchannels(&plan, &ch);
    let with_omega = allocation::subchannel_capacity(&ch, plan.sigma_omega_sq, 0.0);
    assert!(with_dp > with_omega);
    assert!(allocation::capacity_subchannels_with_interference(&plan, &ch, 0.3) < with_dp);
}

#[test]
fn low_snr_rates() {
    let f = CMatrix::identity(1);
    let layer = svd_of_channel(&f).unwrap();
    let r = allocation::low_snr_rate_at(&layer, &[1.0], 0.01);
    assert!((r.eigen - 0.01 * LOG2_E).abs() < 1e-15);
    assert_eq!(allocation::low_snr_rate_at(&layer, &[1.0], 0.0).eigen, 0.0);
    let mut found = false;
    for seed in 0..20 {
        let ch = make_channel(6, &TransmittanceSpec::Uniform { seed }, 0.05, 1e9).unwrap();
        let layer = svd_of_channel(&ch.transfer_matrix()).unwrap();
        let plan = allocation::allocate(&layer, &ch, AllocationParams::default()).unwrap();
        let r = allocation::low_snr_rate(&layer, &ch, &plan);
        found |= r.eigen > r.amqd;
    }
    assert!(found);
}

#[test]
fn max_probability_examples() {
    let ch = make_channel(4, &TransmittanceSpec::Uniform { seed: 3 }, 0.1, 1e9).unwrap();
    let g = allocation::subchannel_gain(&ch);
    let det = allocation::max_probability_rate(|_| (g, g), 0.2, 100, 1).unwrap();
    assert_eq!(det.p, 1.0);
    assert!((det.rate - (1.0 + 0.2 * g).log2()).abs() < 1e-15);
    // Two-point support {1, 2} with mass 0.3 on the maximum.
    let two = allocation::max_probability_rate(
        |r| {
            let v = if r.random::<f64>() < 0.3 { 2.0 } else { 1.0 };
            (v, v)
        },
        0.2,
        50_000,
        2,
    )
    .unwrap();
    assert!((two.p - 0.3).abs() <= 3.0 * two.p_se);
    let layer = svd_of_channel(&ch.transfer_matrix()).unwrap();
    let (s, cand) = allocation::eigen_gain(&layer);
    assert!(cand >= s);
}
