use fjd::embedders::{n_hot, one_hot, pca_fit};
use fjd::frechet::merge_accumulators;
use fjd::io::{decode_embeddings, encode_embeddings};
use fjd::joint::sweep_alpha;
use fjd::{
    calibrate_alpha, compute_fid, compute_fjd, estimate_gaussian, frechet_distance, EmbeddingSet, GaussianStats,
    JointConfig, MomentAccumulator, PairedEmbeddings, SquareMatrix,
};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random PSD matrix `X Xᵀ` from a `dim x rank` factor.
fn psd(dim: usize) -> impl Strategy<Value = SquareMatrix> {
    (1..=dim + 2).prop_flat_map(move |rank| {
        prop::collection::vec(-2.0..2.0f64, dim * rank).prop_map(move |x| {
            let mut data = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    data[i * dim + j] = (0..rank).map(|k| x[i * rank + k] * x[j * rank + k]).sum();
                }
            }
            SquareMatrix::new(dim, data).unwrap()
        })
    })
}

fn gaussian(dim: usize) -> impl Strategy<Value = GaussianStats> {
    (prop::collection::vec(-3.0..3.0f64, dim), psd(dim))
        .prop_map(|(mean, cov)| GaussianStats::analytic(mean, cov).unwrap())
}

fn gaussian_pair() -> impl Strategy<Value = (GaussianStats, GaussianStats)> {
    (1usize..7).prop_flat_map(|d| (gaussian(d), gaussian(d)))
}

fn rows(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = EmbeddingSet> {
    n.prop_flat_map(move |n| {
        prop::collection::vec(-5.0..5.0f64, n * d).prop_map(move |v| EmbeddingSet::new(n, d, v).unwrap())
    })
}

fn paired(n: usize, df: usize, dh: usize, shift: f64) -> impl Strategy<Value = PairedEmbeddings> {
    (
        prop::collection::vec(-3.0..3.0f64, n * df),
        prop::collection::vec(-3.0..3.0f64, n * dh),
    )
        .prop_map(move |(f, h)| {
            let f = f.into_iter().map(|v| v + shift).collect();
            PairedEmbeddings::new(
                EmbeddingSet::new(n, df, f).unwrap(),
                EmbeddingSet::new(n, dh, h).unwrap(),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_symmetric_and_non_negative((a, b) in gaussian_pair()) {
        let ab = frechet_distance(&a, &b).unwrap().value;
        let ba = frechet_distance(&b, &a).unwrap().value;
        prop_assert!(ab >= 0.0);
        prop_assert!(rel_close(ab, ba, 1e-10), "{ab} vs {ba}");
    }

    #[test]
    fn self_distance_is_zero(a in (1usize..7).prop_flat_map(gaussian)) {
        prop_assert_eq!(frechet_distance(&a, &a).unwrap().value, 0.0);
    }

    #[test]
    fn commuting_covariances_match_closed_form(
        da in prop::collection::vec(0.0..10.0f64, 1..8),
        shift in -3.0..3.0f64,
        scale in prop::collection::vec(0.0..4.0f64, 8),
    ) {
        // Diagonal covariances: d² = Σ Δμ² + Σ (√a - √b)².
        let d = da.len();
        let db: Vec<f64> = da.iter().zip(&scale).map(|(a, s)| a * s).collect();
        let a = GaussianStats::analytic(vec![0.0; d], SquareMatrix::diagonal(&da)).unwrap();
        let b = GaussianStats::analytic(vec![shift; d], SquareMatrix::diagonal(&db)).unwrap();
        let expected = d as f64 * shift * shift
            + da.iter().zip(&db).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
        let got = frechet_distance(&a, &b).unwrap().value;
        prop_assert!(rel_close(got, expected, 1e-10), "{got} vs {expected}");
    }

    #[test]
    fn common_translation_leaves_distance_unchanged((a, b) in gaussian_pair(), t in -10.0..10.0f64) {
        let shift = |g: &GaussianStats| GaussianStats::analytic(
            g.mean.iter().map(|m| m + t).collect(), g.cov.clone()).unwrap();
        let before = frechet_distance(&a, &b).unwrap().value;
        let after = frechet_distance(&shift(&a), &shift(&b)).unwrap().value;
        prop_assert!(rel_close(before, after, 1e-9), "{before} vs {after}");
    }

    #[test]
    fn reported_terms_reconstruct_value((a, b) in gaussian_pair()) {
        let r = frechet_distance(&a, &b).unwrap();
        prop_assert!(rel_close(r.value, r.reconstruct().max(0.0), 1e-12));
        prop_assert!(rel_close(r.trace_a, a.cov.trace(), 1e-12));
        prop_assert!(rel_close(r.trace_b, b.cov.trace(), 1e-12));
    }

    #[test]
    fn split_and_merge_matches_single_pass(set in rows(2..60, 4), cut in 0.0..1.0f64) {
        let k = (cut * set.rows() as f64) as usize;
        let d = set.cols();
        let head = MomentAccumulator::from_rows(set.row_range(0, k), k, d).unwrap();
        let tail = MomentAccumulator::from_rows(set.row_range(k, set.rows()), set.rows() - k, d).unwrap();
        let merged = merge_accumulators(&head, &tail).unwrap().finalize().unwrap();
        let whole = estimate_gaussian(&set).unwrap();
        for (x, y) in merged.mean.iter().zip(&whole.mean) {
            prop_assert!(rel_close(*x, *y, 1e-12));
        }
        prop_assert!(merged.cov.max_abs_diff(&whole.cov) <= 1e-10 * whole.cov.frobenius_norm().max(1.0));
        prop_assert_eq!(merged.count, whole.count);
    }

    #[test]
    fn streaming_pushes_match_batch(set in rows(2..40, 3)) {
        let mut acc = MomentAccumulator::new(set.cols());
        for r in set.iter_rows() {
            acc.push(r).unwrap();
        }
        let streamed = acc.finalize().unwrap();
        let batch = estimate_gaussian(&set).unwrap();
        prop_assert!(streamed.cov.max_abs_diff(&batch.cov) <= 1e-10 * batch.cov.frobenius_norm().max(1.0));
    }

    #[test]
    fn estimate_ignores_row_order(set in rows(2..40, 3), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..set.rows()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = estimate_gaussian(&set).unwrap();
        let b = estimate_gaussian(&set.select_rows(&order)).unwrap();
        prop_assert!(a.cov.max_abs_diff(&b.cov) <= 1e-10 * a.cov.frobenius_norm().max(1.0));
    }

    #[test]
    fn joint_distance_dominates_and_grows_with_alpha(
        r in paired(30, 3, 2, 0.0),
        g in paired(30, 3, 2, 0.5),
    ) {
        let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
        let values = sweep_alpha(&r, &g, &grid).unwrap();
        let fid = compute_fid(r.image(), g.image()).unwrap().value;
        prop_assert!(rel_close(values[0].1, fid, 1e-9), "{} vs {fid}", values[0].1);
        for w in values.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9 * w[0].1.max(1.0), "{:?}", values);
        }
        for (_, v) in &values {
            prop_assert!(*v >= fid - 1e-9 * fid.max(1.0));
        }
    }

    #[test]
    fn sweep_agrees_with_direct_evaluation(
        r in paired(25, 2, 2, 0.0),
        g in paired(25, 2, 2, 1.0),
        alpha in 0.0..5.0f64,
    ) {
        let swept = sweep_alpha(&r, &g, &[alpha]).unwrap()[0].1;
        let cfg = JointConfig::fixed(alpha, "f", "h", "r").unwrap();
        let direct = compute_fjd(&r, &g, &cfg).unwrap().value();
        prop_assert!(rel_close(swept, direct, 1e-8), "{swept} vs {direct}");
    }

    #[test]
    fn auto_alpha_absorbs_conditioning_scale(
        r in paired(25, 3, 2, 0.0),
        g in paired(25, 3, 2, 0.7),
        c in 0.1..10.0f64,
    ) {
        let scaled = |p: &PairedEmbeddings| {
            let h: Vec<f64> = p.cond().as_slice().iter().map(|v| v * c).collect();
            PairedEmbeddings::new(p.image().clone(), EmbeddingSet::new(p.rows(), p.cond_dim(), h).unwrap()).unwrap()
        };
        let (rs, gs) = (scaled(&r), scaled(&g));
        let a1 = calibrate_alpha(&r).unwrap();
        let a2 = calibrate_alpha(&rs).unwrap();
        prop_assert!(rel_close(a1, a2 * c, 1e-12));
        let cfg = JointConfig::auto("f", "h", "r");
        let v1 = compute_fjd(&r, &g, &cfg).unwrap().value();
        let v2 = compute_fjd(&rs, &gs, &cfg).unwrap().value();
        prop_assert!(rel_close(v1, v2, 1e-8), "{v1} vs {v2}");
    }

    #[test]
    fn one_hot_and_n_hot_norms(k in 1usize..20, labels in prop::collection::vec(0usize..20, 0..10)) {
        let v = one_hot(k - 1, k).unwrap();
        prop_assert_eq!(v.iter().map(|x| x * x).sum::<f64>(), 1.0);
        let labels: Vec<usize> = labels.into_iter().filter(|l| *l < k).collect();
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let h = n_hot(&labels, k).unwrap();
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - (distinct.len() as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pca_projection_never_expands_distances(set in rows(6..30, 5), latent in 1usize..5, i in 0usize..6, j in 0usize..6) {
        let model = pca_fit(&set, latent).unwrap();
        let (x, y) = (set.row(i), set.row(j));
        let zx = model.encode(x).unwrap();
        let zy = model.encode(y).unwrap();
        let dz: f64 = zx.iter().zip(&zy).map(|(a, b)| (a - b).powi(2)).sum();
        let dx: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(dz <= dx * (1.0 + 1e-10) + 1e-12, "{dz} > {dx}");
    }

    #[test]
    fn fjde_round_trip_preserves_f32_values(v in prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), 0..64), cols in 1usize..5) {
        let n = v.len() / cols;
        let data: Vec<f64> = v[..n * cols].iter().map(|&x| x as f64).collect();
        let set = EmbeddingSet::new(n, cols, data).unwrap();
        let back = decode_embeddings(&encode_embeddings(&set)).unwrap();
        prop_assert_eq!(back.rows(), n);
        prop_assert_eq!(back.cols(), cols);
        prop_assert_eq!(back.as_slice(), set.as_slice());
    }
}
