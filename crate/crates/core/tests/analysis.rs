use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchkit::analysis::*;
use sketchkit::raster::{rasterize, RasterImage};
use sketchkit::simfit::{fit_levels, SimilarityTransform};
use sketchkit::{Group, Sketch, Stroke, StrokeKind, Vec2};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn line(a: (f64, f64), b: (f64, f64)) -> Stroke {
    Stroke::from_xy(&[a, b])
}

fn small(strokes: Vec<Stroke>) -> Sketch {
    let mut s = Sketch::new(strokes);
    s.canvas = (64, 64);
    s
}

fn random_small_sketch(rng: &mut ChaCha8Rng) -> Sketch {
    let n = rng.random_range(1..4);
    small(
        (0..n)
            .map(|_| {
                let mut p = || (rng.random_range(0.0..63.0), rng.random_range(0.0..63.0));
                line(p(), p())
            })
            .collect(),
    )
}

#[test]
fn closest_distance_of_identical_drawings_is_zero() {
    let d = Sketch::new(vec![line((100.0, 100.0), (300.0, 220.0))]);
    let h = closest_distance_histogram(&[d.clone()], &[d], 1.0, 50.0).unwrap();
    assert_eq!(h.counts[0], h.total());
    assert!(h.total() > 0);
}

#[test]
fn closest_distance_of_parallel_lines() {
    let from = Sketch::new(vec![line((100.0, 100.0), (300.0, 100.0))]);
    let to = Sketch::new(vec![line((100.0, 105.0), (300.0, 105.0))]);
    let h = closest_distance_histogram(&[from], &[to], 1.0, 50.0).unwrap();
    assert_eq!(h.mode_bin(), 5);
    assert_eq!(h.counts[5], h.total());
}

#[test]
fn closest_distance_matches_all_pairs_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let from: Vec<Sketch> = (0..2).map(|_| random_small_sketch(&mut rng)).collect();
        let to: Vec<Sketch> = (0..2).map(|_| random_small_sketch(&mut rng)).collect();
        let got = closest_distances(&from, &to).unwrap();
        let targets: Vec<(u32, u32)> = to
            .iter()
            .flat_map(|d| rasterize(d, 1, true).foreground_pixels())
            .collect();
        let expected: Vec<f64> = from
            .iter()
            .flat_map(|d| rasterize(d, 1, true).foreground_pixels())
            .map(|(x, y)| {
                targets
                    .iter()
                    .map(|&(tx, ty)| {
                        ((x as f64 - tx as f64).powi(2) + (y as f64 - ty as f64).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
    }
}

#[test]
fn closest_distance_rejects_empty_groups() {
    let d = Sketch::new(vec![line((100.0, 100.0), (300.0, 100.0))]);
    assert!(closest_distance_histogram(&[], &[d.clone()], 1.0, 50.0).is_err());
    assert!(closest_distance_histogram(&[d], &[], 1.0, 50.0).is_err());
}

#[test]
fn cdr_cases() {
    let a = Sketch::new(vec![line((100.0, 100.0), (300.0, 100.0))]);
    let cdr = compute_cdr(&[a.clone(), a.clone(), a.clone()], 3.0).unwrap();
    assert_eq!(cdr, rasterize(&a, 1, true));

    let far = Sketch::new(vec![line((100.0, 400.0), (300.0, 400.0))]);
    assert!(compute_cdr(&[a.clone(), far], 3.0).unwrap().is_blank());

    let near = Sketch::new(vec![line((100.0, 102.0), (300.0, 102.0))]);
    let cdr = compute_cdr(&[a.clone(), near.clone()], 3.0).unwrap();
    let union = rasterize(&a, 1, true)
        .union(&rasterize(&near, 1, true))
        .unwrap();
    assert_eq!(cdr, union);

    assert!(compute_cdr(&[a], 3.0).is_err());
}

/// Per-pixel evaluation of the region rule against brute-force distances.
fn cdr_oracle(rasters: &[RasterImage], rho: f64) -> Vec<bool> {
    let (w, h) = rasters[0].dims();
    let fgs: Vec<Vec<(u32, u32)>> = rasters.iter().map(|r| r.foreground_pixels()).collect();
    let mut out = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let on_any = rasters.iter().any(|r| r.is_foreground(x, y));
            let near_all = fgs.iter().all(|fg| {
                fg.iter().any(|&(fx, fy)| {
                    ((fx as f64 - x as f64).powi(2) + (fy as f64 - y as f64).powi(2)).sqrt() <= rho
                })
            });
            out[(y * w + x) as usize] = on_any && near_all;
        }
    }
    out
}

#[test]
fn cdr_matches_per_pixel_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let drawings: Vec<Sketch> = (0..3).map(|_| random_small_sketch(&mut rng)).collect();
        let rasters: Vec<RasterImage> = drawings.iter().map(|d| rasterize(d, 1, true)).collect();
        for rho in [0.0, 1.5, 3.0, 6.0] {
            assert_eq!(
                compute_cdr(&drawings, rho).unwrap().mask(),
                cdr_oracle(&rasters, rho)
            );
        }
    }
}

fn five_stroke_tracing() -> Sketch {
    Sketch::new(
        (0..5)
            .map(|k| {
                let y = 100.0 + 120.0 * k as f64;
                line((100.0, y), (600.0, y))
            })
            .collect(),
    )
    .with_meta("p", "tracer", Group::Tracing)
}

#[test]
fn perfect_drawing_has_no_error() {
    let tracing = five_stroke_tracing();
    let levels = fit_levels(&tracing, &tracing, true).unwrap();
    let e = scaffold_errors(&levels, &tracing, 2.1, &AnalysisConfig::default()).unwrap();
    assert_eq!(e.values(), [0.0; 7]);
    assert!(e.valid);
}

#[test]
fn global_scale_error() {
    let tracing = five_stroke_tracing();
    let center = object_center(&tracing).unwrap();
    let g = SimilarityTransform::about(center, 0.0, 1.0 / 1.14, Vec2::new(0.0, 0.0));
    let drawing = tracing.map_positions(|p| g.apply(p));
    let levels = fit_levels(&drawing, &tracing, true).unwrap();
    let e = scaffold_errors(&levels, &tracing, 2.0, &AnalysisConfig::default()).unwrap();
    assert!((e.e_gs - 0.14).abs() < 1e-9, "{}", e.e_gs);
    assert!(e.e_gr.abs() < 1e-9 && e.e_gt < 1e-6);
    assert!(e.e_lr < 1e-9 && e.e_lt < 1e-6 && e.e_ls < 1e-9);
}

#[test]
fn two_of_five_strokes_off_the_tracing() {
    let tracing = five_stroke_tracing();
    let mut drawing = tracing.clone();
    for k in [1, 3] {
        drawing.strokes[k] = drawing.strokes[k].map_positions(|p| p + Vec2::new(0.0, 40.0));
    }
    let levels = fit_levels(&drawing, &drawing, true).unwrap();
    let config = AnalysisConfig::default();
    let e = scaffold_errors(&levels, &tracing, 1.5, &config).unwrap();
    assert!((e.e_p - 0.4).abs() < 1e-12);

    // set semantics: stroke order does not matter
    let mut shuffled = drawing.clone();
    shuffled.strokes.reverse();
    let p = pixel_inaccuracy(&shuffled, &tracing, 0.5, 1).unwrap();
    assert_eq!(p, e.e_p);

    // each further incorrect stroke adds exactly 1/K
    let mut worse = drawing.clone();
    worse.strokes[0] = worse.strokes[0].map_positions(|p| p + Vec2::new(0.0, 40.0));
    let q = pixel_inaccuracy(&worse, &tracing, 0.5, 1).unwrap();
    assert!((q - e.e_p - 0.2).abs() < 1e-12);
}

#[test]
fn scaffold_strokes_do_not_count_toward_pixel_error() {
    let tracing = five_stroke_tracing();
    let mut drawing = tracing.clone();
    let mut scaffold = line((50.0, 700.0), (700.0, 50.0));
    scaffold.kind = StrokeKind::Scaffold;
    drawing.strokes.push(scaffold);
    assert_eq!(pixel_inaccuracy(&drawing, &tracing, 0.5, 1).unwrap(), 0.0);
}

#[test]
fn stroke_overlap_threshold() {
    // an L-shaped 100-pixel stroke whose horizontal leg of `on` pixels lies on the tracing
    let tracing = Sketch::new(vec![line((100.0, 100.0), (300.0, 100.0))]);
    let rates: Vec<f64> = [79.0, 81.0]
        .iter()
        .map(|&on| {
            let corner = 100.0 + on - 1.0;
            let s = Sketch::new(vec![Stroke::from_xy(&[
                (100.0, 100.0),
                (corner, 100.0),
                (corner, 200.0 - on),
            ])]);
            overlap_rates(&s, &tracing, 0).unwrap()[0]
        })
        .collect();
    let flags: Vec<bool> = rates.iter().map(|&r| r > STROKE_VALID_THRESHOLD).collect();
    assert_eq!(rates, vec![0.79, 0.81]);
    assert_eq!(flags, vec![false, true]);
}

/// Ranks by counting: 1 + number smaller + half the number of other equal values, doubled.
fn oracle_doubled_ranks(v: &[i64]) -> Vec<i128> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as i128;
            let equal = v.iter().filter(|&&b| b == a).count() as i128;
            2 * less + equal + 1
        })
        .collect()
}

fn oracle_spearman(x: &[i64], y: &[i64]) -> Option<f64> {
    let (rx, ry) = (oracle_doubled_ranks(x), oracle_doubled_ranks(y));
    let n = x.len() as i128;
    let dot = |a: &[i128], b: &[i128]| a.iter().zip(b).map(|(p, q)| p * q).sum::<i128>();
    let (sx, sy) = (rx.iter().sum::<i128>(), ry.iter().sum::<i128>());
    let cov = n * dot(&rx, &ry) - sx * sy;
    let vx = n * dot(&rx, &rx) - sx * sx;
    let vy = n * dot(&ry, &ry) - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some(cov as f64 / ((vx as f64) * (vy as f64)).sqrt())
}

fn oracle_u(a: &[i64], b: &[i64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

#[test]
fn rank_statistics_match_exhaustive_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let n = rng.random_range(5..=8);
        let x: Vec<i64> = (0..n).map(|_| rng.random_range(-5..6)).collect();
        let y: Vec<i64> = (0..n).map(|_| rng.random_range(-5..6)).collect();
        let (xf, yf): (Vec<f64>, Vec<f64>) = (
            x.iter().map(|&v| v as f64).collect(),
            y.iter().map(|&v| v as f64).collect(),
        );
        match (spearman(&xf, &yf), oracle_spearman(&x, &y)) {
            (Ok((rho, p)), Some(expected)) => {
                assert_eq!(rho, expected);
                let df = (n - 2) as f64;
                let expected_p = if expected.abs() >= 1.0 {
                    0.0
                } else {
                    let t = expected * (df / (1.0 - expected * expected)).sqrt();
                    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
                };
                assert!((p - expected_p).abs() < 1e-6);
            }
            (Err(_), None) => {}
            (got, expected) => panic!("spearman {got:?} vs oracle {expected:?}"),
        }

        let m = rng.random_range(3..=8);
        let a: Vec<i64> = (0..n.min(8)).map(|_| rng.random_range(0..6)).collect();
        let b: Vec<i64> = (0..m).map(|_| rng.random_range(0..6)).collect();
        let (af, bf): (Vec<f64>, Vec<f64>) = (
            a.iter().map(|&v| v as f64).collect(),
            b.iter().map(|&v| v as f64).collect(),
        );
        match mann_whitney_u(&af, &bf) {
            Ok((u, p)) => {
                assert_eq!(u, oracle_u(&a, &b));
                assert!((0.0..=1.0).contains(&p));
            }
            Err(_) => assert!(a.iter().chain(&b).all(|&v| v == a[0])),
        }
    }
}

#[test]
fn line_image_comparison() {
    let sketch = Sketch::new(vec![line((100.0, 100.0), (300.0, 100.0))]);
    let raster = rasterize(&sketch, 1, true);
    assert_eq!(compare_line_image(&raster, &sketch, 1).unwrap(), (1.0, 1.0));

    // clutter far away with as many pixels as the sketch
    let mut image = raster.clone();
    for (x, _) in raster.foreground_pixels() {
        image.set_foreground(x, 500);
    }
    assert_eq!(compare_line_image(&image, &sketch, 1).unwrap(), (0.5, 1.0));
    assert!(compare_line_image(&RasterImage::blank(800, 800), &sketch, 1).is_err());
    assert!(compare_line_image(&RasterImage::blank(10, 10), &sketch, 1).is_err());
}

#[test]
fn line_image_matches_brute_force_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let sketch = random_small_sketch(&mut rng);
        let mut image = RasterImage::blank(64, 64);
        for _ in 0..rng.random_range(1..200) {
            image.set_foreground(rng.random_range(0..64), rng.random_range(0..64));
        }
        let reference = rasterize(&sketch, 1, true);
        let near = |img: &RasterImage, x: u32, y: u32| {
            img.foreground_pixels()
                .iter()
                .any(|&(a, b)| (a as i64 - x as i64).abs() <= 1 && (b as i64 - y as i64).abs() <= 1)
        };
        let img_fg = image.foreground_pixels();
        let ref_fg = reference.foreground_pixels();
        let p = img_fg
            .iter()
            .filter(|&&(x, y)| near(&reference, x, y))
            .count() as f64
            / img_fg.len() as f64;
        let r = ref_fg.iter().filter(|&&(x, y)| near(&image, x, y)).count() as f64
            / ref_fg.len() as f64;
        assert_eq!(compare_line_image(&image, &sketch, 1).unwrap(), (p, r));
    }
}

fn arb_series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-1000i32..1000, 5..40)
        .prop_map(|s| s.into_iter().map(f64::from).collect())
}

fn arb_sketch() -> impl Strategy<Value = Sketch> {
    prop::collection::vec(
        prop::collection::vec((0.0f64..63.0, 0.0f64..63.0), 2..5),
        1..4,
    )
    .prop_map(|strokes| small(strokes.iter().map(|pts| Stroke::from_xy(pts)).collect()))
}

proptest! {
    #[test]
    fn spearman_of_affine_series(x in arb_series(), a in -50.0f64..50.0, b in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0])) {
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let (rho, _) = spearman(&x, &y).unwrap();
        prop_assert_eq!(rho, b.signum());
    }

    #[test]
    fn cdr_grows_with_radius(drawings in prop::collection::vec(arb_sketch(), 2..4), rho in 0.0f64..5.0, extra in 0.0f64..5.0) {
        let small_region = compute_cdr(&drawings, rho).unwrap().mask();
        let large_region = compute_cdr(&drawings, rho + extra).unwrap().mask();
        prop_assert!(small_region.iter().zip(&large_region).all(|(&a, &b)| !a || b));
    }

    #[test]
    fn line_comparison_swaps_roles(a in arb_sketch(), b in arb_sketch()) {
        let (ra, rb) = (rasterize(&a, 1, true), rasterize(&b, 1, true));
        let (p, r) = compare_line_image(&ra, &b, 0).unwrap();
        let (p2, r2) = compare_line_image(&rb, &a, 0).unwrap();
        prop_assert_eq!((p, r), (r2, p2));
    }

    #[test]
    fn histogram_total_counts_every_value(values in prop::collection::vec(-10.0f64..80.0, 0..200)) {
        let mut h = Histogram::uniform(0.0, 50.0, 1.0);
        h.extend(values.iter().copied());
        prop_assert_eq!(h.total(), values.len() as u64);
        prop_assert_eq!(h.counts.len() + 1, h.bin_edges.len());
        prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ordering_costs_are_normalized_and_simplicity_reverses(
        strokes in prop::collection::vec(prop::collection::vec((0.0f64..800.0, 0.0f64..800.0), 3..7), 2..8)
    ) {
        let forward = Sketch::new(strokes.iter().map(|p| Stroke::from_xy(p)).collect());
        let mut backward = forward.clone();
        backward.strokes.reverse();
        let (f, b) = (ordering_costs(&forward, &OrderingParams::default()), ordering_costs(&backward, &OrderingParams::default()));
        for v in f.values().iter().chain(b.values().iter()) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        prop_assert!((f.simplicity + b.simplicity - 1.0).abs() < 1e-12);
    }
}
