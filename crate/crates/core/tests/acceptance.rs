//! One PASS/FAIL line per acceptance criterion, each with its time budget.
//! Runs without the libtest harness so the lines always reach stdout.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::blend::{oracle, random_case};
use common::distance::shifted_cube_reference;
use common::grad::{away_from_zero, central_difference, check_layer, random_tensor, relative_error, MAX_REL};
use common::{max_deviation, mirror_symmetric_blob, random_blob, rng};
use meshrecon::ffd::{FfdRig, ReducedDisplacements, DEFAULT_DIMS, DEFAULT_MARGIN};
use meshrecon::graph::{linear_combine, EmbeddingGraph, ShapeParams, DEFAULT_ZERO_TOL};
use meshrecon::mesh::{load_obj, Mesh, Vec3};
use meshrecon::metrics::{classification_metrics, params_mse, surface_distance, voxel_iou, DEFAULT_SURFACE_SAMPLES};
use meshrecon::nn::{
    build_cae, build_regressor, encode, mse_loss, multilabel_soft_margin_loss, LayerSpec, Tensor, LATENT_LEN,
};
use meshrecon::pipeline::{
    build_dataset, build_graph, evaluate, reconstruct_from_params, tags, train_pipeline, Evaluation, PipelineConfig,
    TrainedBundle,
};
use meshrecon::synth::{prepare_input, DatasetManifest, INPUT_SIZE};
use rand::Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. CAE, classifier and regressor shapes.

fn shape_flow() -> Check {
    let cae = build_cae(0);
    let spatial: Vec<usize> = cae.shape_trace().map_err(|e| e.to_string())?.iter().map(|s| s[1]).collect();
    let mut flow = spatial.clone();
    flow.dedup();
    ensure(flow == [220, 72, 24, 8, 24, 72, 220], || format!("spatial flow {flow:?}"))?;
    let mut r = rng(1);
    let x = Tensor::from_fn(&[1, 1, INPUT_SIZE, INPUT_SIZE], |_| r.random_range(-1.0..1.0));
    let z = encode(&cae, &x).map_err(|e| e.to_string())?;
    ensure(z.shape == [1, LATENT_LEN] && LATENT_LEN == 2048, || format!("latent {:?}", z.shape))?;
    let y = cae.predict(&x).map_err(|e| e.to_string())?;
    ensure(y.shape == [1, 1, 220, 220], || format!("reconstruction {:?}", y.shape))?;
    let kappa_len = ShapeParams::identity(0, 30, 32).kappa().len();
    let reg = build_regressor(kappa_len, 0).map_err(|e| e.to_string())?;
    let out = reg.predict(&z).map_err(|e| e.to_string())?;
    ensure(out.shape == [1, 126], || format!("regressor output {:?} for 30 nodes", out.shape))?;
    Ok(format!("flow {flow:?}, latent {}, regressor {}", z.shape[1], out.shape[1]))
}

// 2. Lattice deformation.

fn bernstein3(t: f64, i: usize) -> f64 {
    let c = [1.0, 3.0, 3.0, 1.0][i];
    c * t.powi(i as i32) * (1.0 - t).powi(3 - i as i32)
}

fn ffd_suite() -> Check {
    const CASES: u64 = 100;
    let mut worst = [0.0f64; 6];
    for seed in 0..CASES {
        let mesh = random_blob(seed);
        let rig = FfdRig::with_defaults(&mesh).map_err(|e| e.to_string())?;
        let mut r = rng(1000 + seed);

        let same = rig.deform(&mesh, &ReducedDisplacements::zeros(32)).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(max_deviation(&same.vertices, &mesh.vertices));

        // Weights against the tensor-product Bernstein basis on the
        // margin-inflated bounding box.
        let b = mesh.bounds().unwrap();
        let lo = b.min - b.extent() * DEFAULT_MARGIN;
        let size = b.extent() * (1.0 + 2.0 * DEFAULT_MARGIN);
        for (v, p) in mesh.vertices.iter().enumerate() {
            let t = (p - lo).component_div(&size);
            let row = rig.matrix.row(v);
            let mut sum = 0.0;
            for k in 0..4 {
                for j in 0..4 {
                    for i in 0..4 {
                        let w = bernstein3(t.x, i) * bernstein3(t.y, j) * bernstein3(t.z, k);
                        worst[1] = worst[1].max((row[i + 4 * (j + 4 * k)] - w).abs());
                        sum += row[i + 4 * (j + 4 * k)];
                    }
                }
            }
            worst[2] = worst[2].max((sum - 1.0).abs());
        }

        let (ty, tz) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let moved = rig
            .deform(&mesh, &ReducedDisplacements { values: vec![[0.0, ty, tz]; 32] })
            .map_err(|e| e.to_string())?;
        let shift = Vec3::new(0.0, ty * size.y, tz * size.z);
        let expected: Vec<Vec3> = mesh.vertices.iter().map(|v| v + shift).collect();
        worst[3] = worst[3].max(max_deviation(&moved.vertices, &expected));

        let flat = |r: &mut rand_chacha::ChaCha8Rng| (0..96).map(|_| r.random_range(-0.5..0.5)).collect::<Vec<f64>>();
        let (a, bb, s) = (flat(&mut r), flat(&mut r), r.random_range(-2.0..2.0));
        let sum: Vec<f64> = a.iter().zip(&bb).map(|(x, y)| s * x + y).collect();
        let deform = |d: &[f64]| rig.deform(&mesh, &ReducedDisplacements::from_flat(d).unwrap()).unwrap().vertices;
        let (da, db, ds) = (deform(&a), deform(&bb), deform(&sum));
        let lin: Vec<Vec3> = (0..mesh.vertices.len())
            .map(|i| mesh.vertices[i] + (da[i] - mesh.vertices[i]) * s + (db[i] - mesh.vertices[i]))
            .collect();
        worst[4] = worst[4].max(max_deviation(&ds, &lin));

        let (sym, pairs) = mirror_symmetric_blob(seed);
        let srig = FfdRig::new(&sym, DEFAULT_DIMS, DEFAULT_MARGIN, 0).map_err(|e| e.to_string())?;
        let out = srig.deform(&sym, &ReducedDisplacements::from_flat(&flat(&mut r)).unwrap()).unwrap();
        let (point, normal) = srig.grid.mid_plane(0);
        for (i, &j) in pairs.iter().enumerate() {
            let v = out.vertices[i];
            let mirrored = v - normal * (2.0 * (v - point).dot(&normal));
            worst[5] = worst[5].max((mirrored - out.vertices[j]).norm());
        }
    }
    let limits = [1e-9, 1e-9, 1e-9, 1e-9, 1e-9, 1e-6];
    let names = ["identity", "basis", "partition", "translation", "linearity", "symmetry"];
    for k in 0..6 {
        ensure(worst[k] <= limits[k], || format!("{} error {:e} > {:e}", names[k], worst[k], limits[k]))?;
    }
    Ok(format!(
        "{CASES} meshes; worst identity {:.1e}, basis {:.1e}, translation {:.1e}, linearity {:.1e}, symmetry {:.1e}",
        worst[0], worst[1], worst[3], worst[4], worst[5]
    ))
}

// 3. Weighted neighborhood blend.

fn blend_suite() -> Check {
    const CASES: u64 = 100;
    let mut worst = 0.0f64;
    for seed in 0..CASES {
        let mut case = random_case(seed);
        let base = &case.graph.nodes[case.c].mesh;
        let out = linear_combine(&case.graph, case.c, base, &case.alpha, DEFAULT_ZERO_TOL).map_err(|e| e.to_string())?;
        worst = worst.max(max_deviation(&out.vertices, &oracle(&case, &base.vertices)));
        ensure(out.faces == base.faces, || format!("graph {seed}: faces differ from node {}", case.c))?;

        if case.alpha[case.c].abs() <= DEFAULT_ZERO_TOL {
            case.alpha[case.c] = 0.5;
        }
        let mut r = rng(seed + 7);
        let dp: Vec<f64> = (0..96).map(|_| r.random_range(-0.2..0.2)).collect();
        let params = ShapeParams { index: case.c, dp: ReducedDisplacements::from_flat(&dp).unwrap(), alpha: case.alpha.clone() };
        let full = reconstruct_from_params(&case.graph, &params).map_err(|e| e.to_string())?;
        let deformed = case.graph.rig(case.c).unwrap().deform(&case.graph.nodes[case.c].mesh, &params.dp).unwrap();
        worst = worst.max(max_deviation(&full.vertices, &oracle(&case, &deformed.vertices)));

        for c in 0..case.graph.len() {
            let id = reconstruct_from_params(&case.graph, &ShapeParams::identity(c, case.graph.len(), 32)).unwrap();
            worst = worst.max(max_deviation(&id.vertices, &case.graph.nodes[c].mesh.vertices));
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("{CASES} random graphs of 3-10 nodes; max deviation {worst:.1e}"))
}

// 4. Metrics.

fn metrics_suite() -> Check {
    let shift = Vec3::new(0.1, 0.0, 0.0);
    let cube = Mesh::unit_cube();
    let analytic = shifted_cube_reference(shift);
    let got = surface_distance(&cube.translated(shift), &cube, DEFAULT_SURFACE_SAMPLES, 3).map_err(|e| e.to_string())?;
    let rel = (got - analytic).abs() / analytic;
    ensure(rel <= 0.02, || format!("shifted cube: {got} vs analytic {analytic}"))?;

    let blob = random_blob(2);
    let own = surface_distance(&blob, &blob, DEFAULT_SURFACE_SAMPLES, 4).map_err(|e| e.to_string())?;
    ensure(own <= 1e-6, || format!("dist3d(M, M) = {own}"))?;
    let other = blob.translated(Vec3::new(0.05, -0.1, 0.02));
    let ab = surface_distance(&blob, &other, DEFAULT_SURFACE_SAMPLES, 5).unwrap();
    let ba = surface_distance(&other, &blob, DEFAULT_SURFACE_SAMPLES, 5).unwrap();
    ensure((ab - ba).abs() <= 1e-3, || format!("asymmetric: {ab} vs {ba}"))?;

    let same = voxel_iou(&blob, &blob, 32).unwrap();
    let apart = voxel_iou(&cube, &cube.translated(Vec3::new(3.0, 0.0, 0.0)), 32).unwrap();
    let half = voxel_iou(&cube, &cube.translated(Vec3::new(0.5, 0.0, 0.0)), 32).unwrap();
    let shell = (11.0 / 31.0 - 1.0 / 3.0f64).max(1.0 / 3.0 - 9.0 / 29.0) + 1e-12;
    ensure(same == 1.0 && apart == 0.0, || format!("IoU identical {same}, disjoint {apart}"))?;
    ensure((half - 1.0 / 3.0).abs() <= shell, || format!("half-shift IoU {half}"))?;

    let m = classification_metrics(&[0, 1, 1, 1, 0], &[0, 0, 1, 1, 2], 4).unwrap();
    let expect = [60.0, 100.0 * (0.5 + 2.0 / 3.0) / 3.0, 50.0];
    let got_cls = [m.accuracy, m.precision, m.recall];
    ensure(got_cls.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-9), || format!("classification {got_cls:?}"))?;
    let mse = params_mse(&[1.0, 2.0, 3.0], &[1.0, 0.0, 6.0]).unwrap();
    ensure((mse - 13.0 / 3.0).abs() < 1e-12, || format!("params MSE {mse}"))?;
    Ok(format!(
        "cube dist3d {got:.5} vs {analytic:.5} ({:.2}%), self {own:.1e}, IoU half-shift {half:.4}",
        100.0 * rel
    ))
}

// 5. Gradients.

fn check_loss(name: &str, pred: &Tensor, loss: impl Fn(&Tensor) -> (f64, Tensor)) -> std::result::Result<f64, String> {
    let (_, g) = loss(pred);
    let mut values = pred.data.clone();
    let numeric = central_difference(&mut values, |d| loss(&Tensor::new(pred.shape.clone(), d.to_vec()).unwrap()).0);
    let err = relative_error(&g.data, &numeric);
    ensure(err < MAX_REL, || format!("{name} loss: relative error {err:e}"))?;
    Ok(err)
}

fn gradient_suite() -> Check {
    let cases: Vec<(LayerSpec, Tensor)> = vec![
        (LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3, stride: 2, padding: 1 }, random_tensor(&[2, 2, 7, 7], 1)),
        (LayerSpec::Conv2d { in_channels: 1, out_channels: 2, kernel: 5, stride: 3, padding: 0 }, random_tensor(&[1, 1, 11, 11], 2)),
        (
            LayerSpec::ConvTranspose2d { in_channels: 2, out_channels: 3, kernel: 3, stride: 2, padding: 1, output_padding: 1 },
            random_tensor(&[2, 2, 4, 4], 3),
        ),
        (
            LayerSpec::ConvTranspose2d { in_channels: 3, out_channels: 1, kernel: 5, stride: 3, padding: 0, output_padding: 2 },
            random_tensor(&[1, 3, 3, 3], 4),
        ),
        (LayerSpec::Linear { in_features: 5, out_features: 4 }, random_tensor(&[3, 5], 5)),
        (LayerSpec::Relu, away_from_zero(&[2, 3, 4, 4], 6)),
        (LayerSpec::Tanh, random_tensor(&[2, 7], 7)),
        (LayerSpec::Flatten, random_tensor(&[2, 3, 2, 2], 8)),
    ];
    let mut worst = 0.0f64;
    for (i, (spec, x)) in cases.iter().enumerate() {
        let err = check_layer(spec, x, 100 + i as u64);
        ensure(err < MAX_REL, || format!("{spec:?}: relative error {err:e}"))?;
        worst = worst.max(err);
    }
    let pred = random_tensor(&[4, 6], 9);
    let target = random_tensor(&[4, 6], 10);
    let mut r = rng(11);
    let labels = Tensor::from_fn(&[4, 6], |_| if r.random_bool(0.3) { 1.0 } else { 0.0 });
    worst = worst.max(check_loss("mse", &pred, |p| mse_loss(p, &target).unwrap())?);
    worst = worst.max(check_loss("soft margin", &pred, |p| multilabel_soft_margin_loss(p, &labels).unwrap())?);
    Ok(format!("8 layer configurations and 2 losses; worst relative error {worst:.1e}"))
}

// 6-8. Desk-scale pipeline.

struct DeskRun {
    dir: PathBuf,
    graph: EmbeddingGraph,
    data: DatasetManifest,
    bundle: TrainedBundle,
    eval: Evaluation,
    elapsed: Duration,
}

fn desk_config(dir: &Path) -> PipelineConfig {
    let mut config = PipelineConfig { output_dir: dir.to_path_buf(), ..PipelineConfig::default() };
    config.dataset.count = 429;
    config.cae.epochs = 10;
    config.heads.epochs = 100;
    config
}

fn desk_run(dir: &Path) -> std::result::Result<DeskRun, String> {
    let start = Instant::now();
    let config = desk_config(dir);
    let (graph, _) = build_graph(&config).map_err(|e| e.to_string())?;
    let data = build_dataset(&config, &graph).map_err(|e| e.to_string())?;
    let bundle = train_pipeline(&config, &graph, &data).map_err(|e| e.to_string())?;
    bundle.save(config.bundle_dir()).map_err(|e| e.to_string())?;
    let eval = evaluate(&bundle, &data, &graph).map_err(|e| e.to_string())?;
    eval.save(config.eval_dir()).map_err(|e| e.to_string())?;
    Ok(DeskRun { dir: dir.to_path_buf(), graph, data, bundle, eval, elapsed: start.elapsed() })
}

/// Mean shape-code MSE on the test split of the regressor in its initial,
/// untrained state.
fn untrained_kappa_mse(run: &DeskRun) -> std::result::Result<f64, String> {
    let b = &run.bundle;
    let len = b.kappa_len().map_err(|e| e.to_string())?;
    let fresh = build_regressor(len, b.config.seed_for(tags::REGRESSOR_INIT)).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for rec in run.data.test() {
        let img = run.data.load_image(rec).map_err(|e| e.to_string())?;
        let x = Tensor::new(vec![1, 1, INPUT_SIZE, INPUT_SIZE], prepare_input(&img)).unwrap();
        let z = b.features(&x).map_err(|e| e.to_string())?;
        let k = fresh.predict(&z).map_err(|e| e.to_string())?;
        total += params_mse(&k.data, &rec.kappa()).map_err(|e| e.to_string())?;
    }
    Ok(total / run.data.test().len() as f64)
}

fn desk_learning(run: &DeskRun) -> Check {
    let (train, test) = (run.data.train().len(), run.data.test().len());
    ensure(run.graph.len() == 5 && train == 300 && test >= 100, || format!("{} nodes, {train}/{test} split", run.graph.len()))?;
    let acc = run.eval.classification.accuracy;
    let trained = run.eval.mean_params_mse();
    let untrained = untrained_kappa_mse(run)?;
    let (dist, baseline) = (run.eval.mean_dist3d(), run.eval.mean_baseline_dist3d());
    let detail = format!(
        "{train}/{test} split; (a) accuracy {acc:.1}% (b) kappa MSE {trained:.5} vs untrained {untrained:.5} (ratio {:.3}) (c) dist3d {dist:.4} vs selection {baseline:.4}; {:.0} s",
        trained / untrained,
        run.elapsed.as_secs_f64()
    );
    let pass = acc >= 60.0 && trained <= 0.5 * untrained && dist <= baseline;
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(first: &DeskRun) -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = desk_run(tmp.path())?;
    let files = files_under(&first.dir);
    let other = files_under(&second.dir);
    ensure(files == other, || "the two runs wrote different file sets".into())?;
    let mut compared = 0;
    for f in &files {
        let (a, b) = (fs::read(first.dir.join(f)).unwrap(), fs::read(second.dir.join(f)).unwrap());
        ensure(a == b, || format!("{} differs", f.display()))?;
        compared += 1;
    }
    let kinds = ["data/dataset.txt", "bundle/cae_loss.txt", "bundle/regressor_loss.txt", "eval/report.toml"];
    ensure(kinds.iter().all(|k| files.iter().any(|f| f == Path::new(k))), || "expected outputs missing".into())?;
    Ok(format!("{compared} files byte-identical across two runs (manifests, images, checkpoints, loss curves, reports)"))
}

fn stored_records(run: &DeskRun) -> Check {
    let mut worst = 0.0f64;
    let mut exact = 0;
    for rec in &run.data.records {
        let params = ShapeParams::from_kappa(rec.label, &rec.kappa(), run.graph.len()).map_err(|e| e.to_string())?;
        let mesh = reconstruct_from_params(&run.graph, &params).map_err(|e| e.to_string())?;
        let stored = load_obj(run.data.resolve(&rec.mesh_path)).map_err(|e| e.to_string())?;
        let err = max_deviation(&mesh.vertices, &stored.vertices);
        worst = worst.max(err);
        if err <= 1e-6 && mesh.faces == stored.faces {
            exact += 1;
        }
    }
    let n = run.data.records.len();
    ensure(exact == n, || format!("{exact}/{n} records reproduced within 1e-6 (worst {worst:e})"))?;
    Ok(format!("{n}/{n} records reproduced; worst deviation {worst:.1e}"))
}

// Driver.

fn timed(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let elapsed = start.elapsed();
    let result = result.and_then(|d| {
        if elapsed <= budget {
            Ok(d)
        } else {
            Err(format!("{d}; took {:.1} s, budget {:.0} s", elapsed.as_secs_f64(), budget.as_secs_f64()))
        }
    });
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {id} ({name}, {:.2} s): {detail}", elapsed.as_secs_f64());
    result.is_ok()
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= timed(1, "shape flow", secs(1), shape_flow);
    ok &= timed(2, "lattice deformation", secs(10), ffd_suite);
    ok &= timed(3, "neighborhood blend", secs(5), blend_suite);
    ok &= timed(4, "metrics", secs(60), metrics_suite);
    ok &= timed(5, "gradients", secs(60), gradient_suite);

    let tmp = tempfile::tempdir().expect("temp dir");
    let run = desk_run(tmp.path());
    match &run {
        Ok(run) => {
            ok &= timed(6, "desk learning", secs(30 * 60).saturating_sub(run.elapsed), || desk_learning(run));
            ok &= timed(7, "determinism", secs(30 * 60), || determinism(run));
            ok &= timed(8, "stored records", secs(60), || stored_records(run));
        }
        Err(e) => {
            for (id, name) in [(6, "desk learning"), (7, "determinism"), (8, "stored records")] {
                println!("FAIL criterion {id} ({name}): desk run failed: {e}");
            }
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
