//! Acceptance suite: one PASS/FAIL line per criterion. Every check compares
//! the library against an independent oracle written here from first
//! principles. Exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use deadwood::dataset::{generate_dataset, SyntheticSpec, DEFAULT_COUNTS};
use deadwood::evalkit::{kfold_split, ConfusionMatrix};
use deadwood::features::glcm::{haralick, DIRECTIONS};
use deadwood::features::{glcm, hu_invariants, GrayImage};
use deadwood::forest::{balanced_class_weights, fit_forest, write_model, Matrix, RfConfig};
use deadwood::model::{read_las, write_las, MultispectralPoint};
use deadwood::projection::{project_views, render_view, rotate_z, CanvasSpec};
use deadwood::terrain::{delaunay_triangulate, filter_ground, PtdParams};
use deadwood::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(n: usize, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), l.as_secs_f64())),
        (o, _) => o,
    };
    let secs = elapsed.as_secs_f64();
    match &outcome {
        Ok(detail) => println!("criterion {n:>2}: PASS  {name} [{detail}; {secs:.2} s]"),
        Err(why) => println!("criterion {n:>2}: FAIL  {name} [{why}; {secs:.2} s]"),
    }
    outcome.is_ok()
}

// 1 ---------------------------------------------------------------------------

fn metric_oracles() -> Check {
    let close = |name: &str, got: f64, want: f64| ensure((got - want).abs() <= 1e-9, || format!("{name} = {got}, expected {want}"));

    // κ = (p_o − p_e) / (1 − p_e) evaluated directly on the 2×2 table
    let t = [[45.0, 5.0], [5.0, 45.0]];
    let n: f64 = t.iter().flatten().sum();
    let po = (t[0][0] + t[1][1]) / n;
    let pe = (0..2).map(|c| (t[c][0] + t[c][1]) * (t[0][c] + t[1][c])).sum::<f64>() / (n * n);
    let kappa_oracle = (po - pe) / (1.0 - pe);
    let m = ConfusionMatrix::from_counts(2, vec![45, 5, 5, 45]);
    let kappa = m.cohens_kappa().map_err(|e| e.to_string())?;
    close("kappa oracle", kappa, kappa_oracle)?;
    close("kappa", kappa, 0.8)?;
    let oa = m.overall_accuracy().map_err(|e| e.to_string())?;
    close("OA oracle", oa, po)?;
    close("OA", oa, 0.9)?;

    // class 0: TP = 8, FN = 4 (truth 0, predicted 1), FP = 2 (truth 1, predicted 0)
    let m = ConfusionMatrix::from_counts(2, vec![8, 4, 2, 30]);
    let (tp, fp, fn_) = (8.0, 2.0, 4.0);
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    let f1_oracle = 2.0 * precision * recall / (precision + recall);
    let f1 = m.f1_per_class()[0];
    close("F1 oracle", f1, f1_oracle)?;
    close("F1", f1, 0.72727272727)?;
    Ok(format!("kappa {kappa}, OA {oa}, F1 {f1:.5}"))
}

// 2 ---------------------------------------------------------------------------

fn binary_image(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> GrayImage<f64> {
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            data.push(if f(c, r) { 1.0 } else { 0.0 });
        }
    }
    GrayImage::new(w, h, data)
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn hu_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rigid, mut worst_scale) = (0.0f64, 0.0f64);
    for i in 0..200 {
        // random binary content in a sub-window, so it can be shifted around
        let (bw, bh) = (rng.random_range(8..40), rng.random_range(8..40));
        let fill = rng.random_range(0.2..0.8);
        let mut block: Vec<bool> = (0..bw * bh).map(|_| rng.random_bool(fill)).collect();
        block[0] = true;
        let (x0, y0) = (rng.random_range(0..64 - bw), rng.random_range(0..64 - bh));
        let (x1, y1) = (rng.random_range(0..64 - bw), rng.random_range(0..64 - bh));
        let block = &block;
        let at = |x: usize, y: usize| move |c: usize, r: usize| c >= x && r >= y && c - x < bw && r - y < bh && block[(r - y) * bw + c - x];
        let base = binary_image(64, 64, at(x0, y0));
        let shifted = binary_image(64, 64, at(x1, y1));
        // quarter turn: new(c, r) = old(63 − r, c)
        let turned = binary_image(64, 64, |c, r| base.get(63 - r, c) > 0.0);
        let doubled = binary_image(128, 128, |c, r| base.get(c / 2, r / 2) > 0.0);

        let phi = hu_invariants(&base).map_err(|e| e.to_string())?;
        for (what, other) in [("translation", &shifted), ("rotation", &turned)] {
            let psi = hu_invariants(other).map_err(|e| e.to_string())?;
            for k in 0..7 {
                let e = rel(phi[k], psi[k]);
                worst_rigid = worst_rigid.max(e);
                ensure(e < 1e-9, || format!("image {i}: {what} changes phi{} by {e:e} relative", k + 1))?;
            }
        }
        let psi = hu_invariants(&doubled).map_err(|e| e.to_string())?;
        for k in 0..4 {
            let e = rel(phi[k], psi[k]);
            worst_scale = worst_scale.max(e);
            ensure(e < 0.05, || format!("image {i}: 2x upscale changes phi{} by {:.2}%", k + 1, 100.0 * e))?;
        }
    }
    Ok(format!("worst rigid {worst_rigid:.1e}, worst 2x-scale {:.3}%", 100.0 * worst_scale))
}

// 3 ---------------------------------------------------------------------------

fn glcm_oracle() -> Check {
    let hand = GrayImage::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
    let f = haralick(&glcm(&hand, 2, (1, 0)).map_err(|e| e.to_string())?);
    ensure(f[0] == 0.5 && f[1] == 0.0 && f[8] == 1.0, || format!("hand case ASM {}, contrast {}, entropy {}", f[0], f[1], f[8]))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let levels = 16;
    let mut entries = 0usize;
    for i in 0..50 {
        let (w, h) = (rng.random_range(2..20), rng.random_range(2..20));
        let q: Vec<usize> = (0..w * h).map(|_| rng.random_range(0..levels)).collect();
        // gray values at level centers, so quantization is unambiguous
        let img = GrayImage::new(w, h, q.iter().map(|&l| (l as f64 + 0.5) / levels as f64).collect());
        for offset in DIRECTIONS {
            let (dx, dy) = offset;
            if dx.unsigned_abs() >= w || dy.unsigned_abs() >= h {
                continue;
            }
            // every ordered pixel pair whose displacement is ±offset
            let mut counts = vec![0u64; levels * levels];
            for a in 0..w * h {
                for b in 0..w * h {
                    let (ax, ay) = ((a % w) as isize, (a / w) as isize);
                    let (bx, by) = ((b % w) as isize, (b / w) as isize);
                    let d = (bx - ax, by - ay);
                    if d == offset || d == (-dx, -dy) {
                        counts[q[a] * levels + q[b]] += 1;
                    }
                }
            }
            let total: u64 = counts.iter().sum();
            let m = glcm(&img, levels, offset).map_err(|e| e.to_string())?;
            for (k, (&c, &p)) in counts.iter().zip(&m.p).enumerate() {
                let want = c as f64 / total as f64;
                ensure(p == want, || format!("image {i} offset {offset:?} entry ({}, {}): {p} vs {want}", k / levels, k % levels))?;
                entries += 1;
            }
        }
    }
    Ok(format!("hand case exact; {entries} GLCM entries match"))
}

// 4 ---------------------------------------------------------------------------

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counts strict hull vertices.
fn hull_vertices(points: &[[f64; 2]]) -> usize {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.len()
}

fn delaunay_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut triangles = 0;
    for set in 0..30 {
        let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]).collect();
        let tin = delaunay_triangulate(&pts).map_err(|e| e.to_string())?;
        ensure(tin.vertex_count() == 50, || format!("set {set}: {} vertices", tin.vertex_count()))?;
        let xy = |v: usize| [tin.vertices()[v].x, tin.vertices()[v].y];
        let tris = tin.triangles();
        for t in &tris {
            let [a, b, c] = t.map(xy);
            ensure(cross(a, b, c) > 0.0, || format!("set {set}: triangle {t:?} not counterclockwise"))?;
            // circumcenter by the perpendicular-bisector formula
            let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
            let sq = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1];
            let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
            let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
            let r2 = (a[0] - ux).powi(2) + (a[1] - uy).powi(2);
            for (v, p) in pts.iter().enumerate() {
                if t.contains(&v) {
                    continue;
                }
                let d2 = (p[0] - ux).powi(2) + (p[1] - uy).powi(2);
                ensure(d2 >= r2 * (1.0 - 1e-9), || format!("set {set}: point {v} inside circumcircle of {t:?}"))?;
            }
        }
        let h = hull_vertices(&pts);
        ensure(tris.len() == 2 * 50 - 2 - h, || format!("set {set}: {} triangles, Euler expects {}", tris.len(), 98 - h))?;
        triangles += tris.len();
    }
    Ok(format!("{triangles} triangles empty-circumcircle, Euler count holds"))
}

// 5 ---------------------------------------------------------------------------

fn cloud(points: impl IntoIterator<Item = (f64, f64, f64)>) -> PointCloud {
    points.into_iter().map(|(x, y, z)| MultispectralPoint::new(x, y, z, 0.0)).collect()
}

fn ground_filter() -> Check {
    let params = PtdParams::default();
    let count = |mask: &[bool]| mask.iter().filter(|&&g| g).count();

    let flat = cloud((0..100).map(|i| ((i % 10) as f64 * 2.0, (i / 10) as f64 * 2.0, 0.0)));
    let mask = filter_ground(&flat, &params).map_err(|e| e.to_string())?;
    ensure(count(&mask) == 100, || format!("flat plane: {} of 100 ground", count(&mask)))?;

    // 1 m grid over 20 m plus one point 10 m up inside a 5 m seed cell
    let mut pts: Vec<(f64, f64, f64)> = (0..=20).flat_map(|i| (0..=20).map(move |j| (i as f64, j as f64, 0.0))).collect();
    pts.push((7.5, 7.5, 10.0));
    let mask = filter_ground(&cloud(pts), &params).map_err(|e| e.to_string())?;
    let n = mask.len();
    ensure(!mask[n - 1], || "outlier at z = 10 classified as ground".into())?;
    ensure(count(&mask) == n - 1, || format!("plane + outlier: {} of {} plane points ground", count(&mask), n - 1))?;

    let tilted = cloud((0..=50).flat_map(|i| (0..=10).map(move |j| (i as f64 * 2.0, j as f64 * 2.0, 0.05 * i as f64 * 2.0))));
    let mask = filter_ground(&tilted, &params).map_err(|e| e.to_string())?;
    ensure(count(&mask) == mask.len(), || format!("tilted plane: {} of {} ground", count(&mask), mask.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let loosened = [
        PtdParams { max_dist: 2.5, ..params },
        PtdParams { max_angle: 10.0, ..params },
        PtdParams { max_dist: 3.0, max_angle: 15.0, ..params },
    ];
    for c in 0..20 {
        let slope = rng.random_range(-0.1..0.1);
        let pts: Vec<(f64, f64, f64)> = (0..600)
            .map(|_| {
                let (x, y) = (rng.random_range(0.0..40.0), rng.random_range(0.0..40.0));
                let lift = if rng.random_bool(0.4) { rng.random_range(0.0..15.0) } else { rng.random_range(0.0..0.3) };
                (x, y, slope * x + lift)
            })
            .collect();
        let pc = cloud(pts);
        let base = filter_ground(&pc, &params).map_err(|e| e.to_string())?;
        for loose in &loosened {
            let wider = filter_ground(&pc, loose).map_err(|e| e.to_string())?;
            let lost = base.iter().zip(&wider).filter(|(&b, &w)| b && !w).count();
            ensure(lost == 0, || format!("cloud {c}: loosening to {loose:?} dropped {lost} ground points"))?;
        }
    }
    Ok("flat, outlier and tilted fixtures exact; superset holds on 20 clouds".into())
}

// 6 ---------------------------------------------------------------------------

fn projection_oracle() -> Check {
    let spec = CanvasSpec::default();
    let (w, h) = ((spec.world_width * spec.px_per_m).round() as usize, (spec.world_height * spec.px_per_m).round() as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lit = 0;
    for c in 0..100 {
        let n = rng.random_range(1..=1000);
        let tree: PointCloud = (0..n)
            .map(|_| {
                MultispectralPoint::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(0.0..30.0), 0.0)
                    .with_color(rng.random(), rng.random(), rng.random())
            })
            .collect();
        let img = render_view(&tree, &spec, 0).map_err(|e| e.to_string())?;
        ensure(img.width == w && img.height == h, || format!("cloud {c}: canvas {}x{}", img.width, img.height))?;

        // argmin-depth oracle: nearest (smallest y) point per pixel
        let cx = tree.points().iter().map(|p| p.x).sum::<f64>() / n as f64;
        let mut best: Vec<Option<usize>> = vec![None; w * h];
        for (i, p) in tree.points().iter().enumerate() {
            let col = ((p.x - cx + spec.world_width / 2.0) * spec.px_per_m).floor();
            let up = (p.z * spec.px_per_m).floor();
            if col < 0.0 || up < 0.0 || col as usize >= w || up as usize >= h {
                continue;
            }
            let k = (h - 1 - up as usize) * w + col as usize;
            if best[k].is_none_or(|j| p.y < tree.points()[j].y) {
                best[k] = Some(i);
            }
        }
        for (k, b) in best.iter().enumerate() {
            let want = b.map_or([0.0; 3], |i| {
                let p = tree.points()[i];
                [p.nir, p.r, p.g]
            });
            ensure(img.pixels[k] == want, || format!("cloud {c}: pixel {k} is {:?}, oracle {want:?}", img.pixels[k]))?;
        }
        lit += best.iter().filter(|b| b.is_some()).count();

        let a = render_view(&rotate_z(&tree, 90.0), &spec, 0).map_err(|e| e.to_string())?;
        let b = render_view(&tree, &spec, 90).map_err(|e| e.to_string())?;
        ensure(a.pixels == b.pixels, || format!("cloud {c}: render(rotate(t, 90), 0) differs from render(t, 90)"))?;

        for v in project_views(&tree, &spec).map_err(|e| e.to_string())? {
            ensure(v.width == 129 && v.height == 132 && v.pixels.len() == 129 * 132, || format!("cloud {c}: view {}x{}", v.width, v.height))?;
            ensure(v.pixels.iter().flatten().all(|x| (0.0..=1.0).contains(x)), || format!("cloud {c}: value outside [0, 1]"))?;
        }
    }
    Ok(format!("{lit} lit pixels match the oracle; view identity and 129x132x3 shape hold"))
}

// 7 ---------------------------------------------------------------------------

fn forest_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, d) = (300, 20);
    let data: Vec<f64> = (0..n * d).map(|_| rng.random()).collect();
    let labels: Vec<u32> = (0..n).map(|i| (i % 3) as u32 + 1).collect();
    let x = Matrix::new(n, d, data);
    let config = RfConfig { n_estimators: 50, ..RfConfig::default() };
    let fit = |threads: usize, cfg: &RfConfig| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| fit_forest(&x, &labels, cfg)).map(|m| write_model(&m))
    };
    let a = fit(1, &config).map_err(|e| e.to_string())?;
    let b = fit(3, &config).map_err(|e| e.to_string())?;
    ensure(a == b, || "same seed produced different model files".into())?;
    let c = fit(1, &RfConfig { random_state: 43, ..config }).map_err(|e| e.to_string())?;
    ensure(a != c, || "a different seed produced the same model".into())?;

    // two Gaussian blobs six standard deviations apart
    let blob = |rng: &mut ChaCha8Rng, k: usize| -> (Vec<f64>, Vec<u32>) {
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let mut v = Vec::new();
        let mut y = Vec::new();
        for i in 0..k {
            let class = (i % 2) as u32;
            for _ in 0..5 {
                v.push(rng.sample(normal) + 6.0 * class as f64);
            }
            y.push(class);
        }
        (v, y)
    };
    let (train, ytrain) = blob(&mut rng, 400);
    let (test, ytest) = blob(&mut rng, 400);
    let model = fit_forest(&Matrix::new(400, 5, train), &ytrain, &RfConfig { n_estimators: 100, ..RfConfig::default() })
        .map_err(|e| e.to_string())?;
    let pred = model.predict_all(&Matrix::new(400, 5, test)).map_err(|e| e.to_string())?;
    let acc = pred.iter().zip(&ytest).filter(|(p, t)| p == t).count() as f64 / 400.0;
    ensure(acc >= 0.99, || format!("held-out accuracy {acc}"))?;

    let w = balanced_class_weights(&DEFAULT_COUNTS).map_err(|e| e.to_string())?;
    let oracle = 1030.0 / (5.0 * 155.0);
    ensure((w[4] - oracle).abs() <= 1e-6, || format!("w5 = {}, formula gives {oracle}", w[4]))?;
    ensure(format!("{:.4}", w[4]) == "1.3290", || format!("w5 = {} does not round to 1.3290", w[4]))?;
    Ok(format!("model bytes identical across thread counts; blob accuracy {acc}; w5 = {:.6}", w[4]))
}

// 8 ---------------------------------------------------------------------------

fn deadwood(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_deadwood"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
}

/// (mean OA, mean kappa) from the `average` row of a metrics file.
fn averages(metrics: &Path) -> Result<(f64, f64), String> {
    let text = std::fs::read_to_string(metrics).map_err(|e| e.to_string())?;
    let row = text.lines().find(|l| l.starts_with("average,")).ok_or("no average row")?;
    let v: Vec<f64> = row.split(',').skip(1).map(|s| s.parse().unwrap_or(f64::NAN)).collect();
    Ok((v[0], v[1]))
}

fn end_to_end(dir: &Path) -> Check {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (data, pipe, cv, control) = (dir.join("data"), dir.join("pipe"), dir.join("cv"), dir.join("control"));
    let start = Instant::now();
    deadwood(&["synth", "--out", &s(&data)])?;
    let manifest = data.join("manifest.csv");
    let trees = std::fs::read_to_string(&manifest).map_err(|e| e.to_string())?.lines().count() - 1;
    ensure(trees == 1030, || format!("synth wrote {trees} trees"))?;
    deadwood(&["pipeline", "--dataset", &s(&manifest), "--out", &s(&pipe), "--no-images"])?;
    deadwood(&["crossval", "--input", &s(&manifest), "--out", &s(&cv)])?;
    let elapsed = start.elapsed();
    let (oa, kappa) = averages(&cv.join("metrics.csv"))?;

    deadwood(&["crossval", "--input", &s(&pipe.join("features.csv")), "--out", &s(&control), "--shuffle-labels"])?;
    let (_, null_kappa) = averages(&control.join("metrics.csv"))?;

    ensure(elapsed < Duration::from_secs(600), || format!("synth → pipeline → crossval took {:.0} s", elapsed.as_secs_f64()))?;
    ensure(oa >= 0.90 && kappa >= 0.85, || format!("mean OA {oa}, mean kappa {kappa}"))?;
    ensure(null_kappa.abs() < 0.15, || format!("shuffled-label kappa {null_kappa}"))?;
    Ok(format!(
        "OA {oa:.4}, kappa {kappa:.4} in {:.0} s; shuffled-label kappa {null_kappa:.4}",
        elapsed.as_secs_f64()
    ))
}

// 9 ---------------------------------------------------------------------------

fn fold_hygiene() -> Check {
    let spec = SyntheticSpec::default();
    let samples = generate_dataset::<f64>(&spec, &DEFAULT_COUNTS).map_err(|e| e.to_string())?;
    // one row per view, four views per tree
    let labels: Vec<u32> = samples.iter().flat_map(|s| [s.label.get() as u32; 4]).collect();
    let groups: Vec<usize> = samples.iter().flat_map(|s| [s.group; 4]).collect();
    let k = 5;
    let folds = kfold_split(&labels, &groups, k, spec.seed).map_err(|e| e.to_string())?;
    ensure(folds.len() == k, || format!("{} folds", folds.len()))?;

    let mut seen = vec![usize::MAX; labels.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            ensure(seen[i] == usize::MAX, || format!("row {i} in folds {} and {f}", seen[i]))?;
            seen[i] = f;
        }
    }
    ensure(seen.iter().all(|&f| f != usize::MAX), || "some row is in no fold".into())?;

    let mut fold_of_group = std::collections::HashMap::new();
    for (i, &g) in groups.iter().enumerate() {
        let f = *fold_of_group.entry(g).or_insert(seen[i]);
        ensure(f == seen[i], || format!("tree {g} split across folds {f} and {}", seen[i]))?;
    }

    for level in 1..=5u32 {
        let mut per_fold = vec![std::collections::BTreeSet::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            if l == level {
                per_fold[seen[i]].insert(groups[i]);
            }
        }
        let sizes: Vec<usize> = per_fold.iter().map(|s| s.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        ensure(hi - lo <= 1, || format!("level {level}: trees per fold {sizes:?}"))?;
    }
    Ok(format!("{} rows, {} trees in {k} folds", labels.len(), samples.len()))
}

// 10 --------------------------------------------------------------------------

fn las_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cloud: PointCloud = (0..100_000)
        .map(|_| {
            MultispectralPoint::new(
                rng.random_range(500_000.0..501_000.0),
                rng.random_range(5_400_000.0..5_401_000.0),
                rng.random_range(300.0..350.0),
                rng.random_range(0..=u16::MAX) as f64,
            )
        })
        .collect();
    let start = Instant::now();
    let bytes = write_las(&cloud).map_err(|e| e.to_string())?;
    let back: PointCloud = read_las(&bytes).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(back.len() == cloud.len(), || format!("{} points read back", back.len()))?;
    let mut worst = 0.0f64;
    for (i, (a, b)) in cloud.points().iter().zip(back.points()).enumerate() {
        ensure(a.intensity == b.intensity, || format!("point {i}: intensity {} -> {}", a.intensity, b.intensity))?;
        for (u, v) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
            worst = worst.max((u - v).abs());
        }
    }
    ensure(worst <= 0.001, || format!("coordinate error {worst}"))?;
    ensure(took < Duration::from_secs(2), || format!("write + read took {:.2} s", took.as_secs_f64()))?;
    Ok(format!("max coordinate error {worst:.2e} m, write + read {:.3} s", took.as_secs_f64()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let results = [
        run(1, "metric oracles", Some(Duration::from_secs(1)), metric_oracles),
        run(2, "Hu invariance", Some(Duration::from_secs(30)), hu_invariance),
        run(3, "GLCM / Haralick oracle", None, glcm_oracle),
        run(4, "Delaunay empty circumcircle and Euler count", None, delaunay_oracle),
        run(5, "ground filter fixtures and monotonicity", None, ground_filter),
        run(6, "projection z-buffer, view identity and shape", None, projection_oracle),
        run(7, "random forest determinism and sanity", None, forest_sanity),
        run(8, "end-to-end synthetic experiment", None, || end_to_end(tmp.path())),
        run(9, "fold hygiene on the default dataset", None, fold_hygiene),
        run(10, "LAS round trip", None, las_round_trip),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
