use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liref_core::io::{load_lightfield, save_view_png, BitDepth, DatasetLayout, MANIFEST_NAME};
use liref_core::lightfield::angular_indices;
use liref_core::losses::{crie, evaluate, ucrie, vwe};
use liref_core::metrics::{csv_string, default_sweep, quality_report, Aggregate, QualityReport};
use liref_core::refocus::shift_and_add;
use liref_core::spectral::{crie2_spectral, ucrie2_spectral, vwe2_spectral};
use liref_core::synth::{
    occlusion_scene, run_experiment, scene_rng, AdamParams, ExperimentSetup, PipelineParams,
    SceneParams,
};
use liref_core::verify::{gradient_check, random_lightfield, relative_error};
use liref_core::{Error, LightField, LossSpec, Manifest, Norm, RefocusSpec, ShiftEngine};

use crate::{CliError, EvalArgs, RefocusArgs, TrainArgs, VerifyArgs};

fn core_error(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } => CliError::usage(e),
        _ => CliError::io(e),
    }
}

fn load(dir: &Path) -> Result<LightField, CliError> {
    let layout = DatasetLayout::discover(dir)
        .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    load_lightfield(&layout).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

fn describe(lf: &LightField) -> String {
    let (h, w, c) = lf.view_dims();
    format!("{s}x{s} views of {h}x{w}x{c}", s = lf.side())
}

pub fn cmd_refocus(args: &RefocusArgs) -> Result<(), CliError> {
    let engine = ShiftEngine::parse(&args.engine).map_err(CliError::usage)?;
    let depth = match args.bits {
        8 => BitDepth::Eight,
        16 => BitDepth::Sixteen,
        b => return Err(CliError::Usage(format!("--bits must be 8 or 16, got {b}"))),
    };
    let spec = RefocusSpec::new(args.r, engine).map_err(CliError::usage)?;
    let lf = load(&args.input)?;
    let image = shift_and_add(&lf, &spec);
    let clamped = save_view_png(&image, &args.out, depth).map_err(CliError::io)?;
    println!(
        "r={} engine={} clamped={}/{} out={}",
        args.r,
        engine,
        clamped,
        image.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let rie = args.rie.rie_params()?;
    let spec = args.rie.loss_spec(&args.loss)?;
    let pred = load(&args.pred)?;
    let gt = load(&args.gt)?;
    if !pred.same_shape(&gt) {
        return Err(CliError::Io(format!(
            "shape mismatch: pred has {}, gt has {}",
            describe(&pred),
            describe(&gt)
        )));
    }
    let mut indices: Vec<_> = angular_indices(gt.radius()).collect();
    if args.exclude_inputs && gt.radius() > 0 {
        let inputs = gt.sample_inputs().map_err(core_error)?.indices();
        indices.retain(|u| !inputs.contains(u));
    }
    let sweep = default_sweep(&rie).map_err(CliError::usage)?;
    let report = quality_report(&pred, &gt, &indices, &rie, &sweep)
        .map_err(core_error)?
        .labeled(args.label.clone());
    let csv = csv_string(&[report]);
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(CliError::io)?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(CliError::io)?,
    }
    let value = evaluate(&pred, &gt, &spec).map_err(core_error)?;
    eprintln!(
        "{}: total={} vwe={} refocus={}",
        spec.label(),
        value.total,
        value.vwe_term,
        value.refocus_term
    );
    Ok(())
}

fn parse_size(size: &str) -> Result<(usize, usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--size must look like 3x3x8x8, got `{size}`"));
    let parts: Vec<usize> = size
        .split('x')
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, h, w] if a == b && a % 2 == 1 && *h > 0 && *w > 0 => Ok((a / 2, *h, *w)),
        _ => Err(bad()),
    }
}

/// Named relative errors of every self-check, in a fixed order.
pub fn verify_errors(args: &VerifyArgs) -> Result<Vec<(String, f64)>, CliError> {
    let (radius, h, w) = parse_size(&args.size)?;
    if !(args.channels == 1 || args.channels == 3) {
        return Err(CliError::Usage(format!(
            "--channels must be 1 or 3, got {}",
            args.channels
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let l = random_lightfield(&mut rng, radius, h, w, args.channels).map_err(core_error)?;
    let lhat = random_lightfield(&mut rng, radius, h, w, args.channels).map_err(core_error)?;
    let d = args.rie_d;
    let spectral = ShiftEngine::spectral();
    let mut out = Vec::new();

    let id = ucrie2_spectral(&lhat, &l, d).map_err(core_error)?;
    let quad = ucrie(&lhat, &l, Norm::L2, d, args.q, spectral).map_err(core_error)?;
    out.push((
        "ucrie2 canonical vs quadrature".to_string(),
        relative_error(id.canonical, quad),
    ));

    let id = crie2_spectral(&lhat, &l, d).map_err(core_error)?;
    let quad = crie(&lhat, &l, Norm::L2, d, 6.0, args.q, spectral).map_err(core_error)?;
    out.push((
        "crie2 canonical vs quadrature".to_string(),
        relative_error(id.canonical, quad),
    ));

    let v = vwe(&lhat, &l, Norm::L2).map_err(core_error)?;
    out.push((
        "vwe2 plancherel".to_string(),
        relative_error(vwe2_spectral(&lhat, &l).map_err(core_error)?, v),
    ));
    let views = l.view_count() as f64;
    out.push((
        "ucrie2 diagonal vs vwe2/V^2".to_string(),
        relative_error(
            ucrie2_spectral(&lhat, &l, d).map_err(core_error)?.diagonal,
            v / (views * views),
        ),
    ));

    for engine in [
        ShiftEngine::spectral(),
        ShiftEngine::bilinear(liref_core::Boundary::Clamp),
    ] {
        for label in ["vwe1", "vwe1+rie1", "vwe2", "vwe2+rie2"] {
            let mut spec = LossSpec::from_label(label).map_err(CliError::usage)?;
            spec.rie.d = d;
            spec.rie.engine = engine;
            let check = gradient_check(&lhat, &l, &spec, args.h).map_err(core_error)?;
            out.push((format!("gradient {label} ({engine})"), check.max_rel_err));
        }
    }
    Ok(out)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    if !(args.tol >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tol must be >= 0, got {}",
            args.tol
        )));
    }
    let errors = verify_errors(args)?;
    let mut failed = Vec::new();
    for (name, err) in &errors {
        let ok = *err <= args.tol;
        println!(
            "{:<36} rel_err={:.3e} {}",
            name,
            err,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!(
            "{} check(s) above tol {}: {}",
            failed.len(),
            args.tol,
            failed.join(", ")
        )))
    }
}

fn is_lightfield_dir(dir: &Path) -> bool {
    dir.join(MANIFEST_NAME).is_file() || dir.join("view_0_0.png").is_file()
}

/// Loads scenes from `dir`: the directory itself, or each sub-directory in
/// name order. Unloadable scenes are reported and skipped.
fn load_scenes(dir: &Path) -> Result<(Vec<String>, Vec<LightField>), CliError> {
    if is_lightfield_dir(dir) {
        return Ok((vec![dir.display().to_string()], vec![load(dir)?]));
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut names = Vec::new();
    let mut scenes = Vec::new();
    for sub in subdirs {
        match load(&sub) {
            Ok(lf) => {
                names.push(sub.display().to_string());
                scenes.push(lf);
            }
            Err(e) => eprintln!("skipping scene: {e}"),
        }
    }
    if scenes.is_empty() {
        return Err(CliError::Io(format!(
            "no loadable light fields under {}",
            dir.display()
        )));
    }
    Ok((names, scenes))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let configs: Vec<LossSpec> = args
        .configs
        .iter()
        .map(|c| args.rie.loss_spec(c.trim()))
        .collect::<Result<_, _>>()?;
    if configs.is_empty() {
        return Err(CliError::Usage("--configs is empty".into()));
    }
    let report_rie = args.rie.rie_params()?;
    let adam = AdamParams {
        epochs: args.epochs,
        lr: args.lr,
        ..AdamParams::default()
    };
    adam.validate().map_err(CliError::usage)?;

    let (names, scenes) = match &args.data {
        Some(dir) => load_scenes(dir)?,
        None => {
            if args.scenes == 0 {
                return Err(CliError::Usage("--scenes must be at least 1".into()));
            }
            let params = SceneParams {
                size: args.scene_size,
                ..SceneParams::default()
            };
            let scenes = (0..args.scenes)
                .map(|i| occlusion_scene(&mut scene_rng(args.seed, i), &params))
                .collect::<Result<Vec<_>, _>>()
                .map_err(core_error)?;
            (
                (0..args.scenes).map(|i| format!("synthetic-{i}")).collect(),
                scenes,
            )
        }
    };

    let setup = ExperimentSetup {
        configs: configs.clone(),
        r_sweep: default_sweep(&report_rie).map_err(CliError::usage)?,
        report_rie,
        kfold: args.kfold,
        pipeline: PipelineParams {
            adam,
            ..PipelineParams::default()
        },
    };
    let result = run_experiment(&scenes, &setup).map_err(core_error)?;
    for (scene, msg) in &result.failures {
        eprintln!("scene {} ({}) failed: {msg}", scene, names[*scene]);
    }
    if result.outcomes.is_empty() {
        return Err(CliError::Io("every scene failed".into()));
    }

    let out = &args.out;
    fs::create_dir_all(out.join("history"))
        .map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;

    let mut manifest = Manifest::new();
    manifest
        .push("tool", concat!("liref ", env!("CARGO_PKG_VERSION")))
        .push("seed", args.seed)
        .push(
            "dataset",
            match &args.data {
                Some(d) => d.display().to_string(),
                None => format!("synthetic scenes={} size={}", args.scenes, args.scene_size),
            },
        )
        .push("scenes_loaded", scenes.len())
        .push("scenes_failed", result.failures.len())
        .push("engine", report_rie.engine)
        .push("convention", report_rie.convention.name())
        .push("rie_D", report_rie.d)
        .push("rie_step", report_rie.step)
        .push("lambda", args.rie.lambda)
        .push("epochs", adam.epochs)
        .push("lr", adam.lr)
        .push("beta1", adam.beta1)
        .push("beta2", adam.beta2)
        .push("eps", adam.eps)
        .push("window", setup.pipeline.window)
        .push("output_radius", setup.pipeline.output_radius)
        .push("sweep_d_min", setup.pipeline.sweep.d_min)
        .push("sweep_d_max", setup.pipeline.sweep.d_max)
        .push("sweep_d_step", setup.pipeline.sweep.d_step)
        .push("sweep_window", setup.pipeline.sweep.window)
        .push(
            "kfold",
            args.kfold
                .map_or_else(|| "none".to_string(), |k| k.to_string()),
        );
    for (i, c) in configs.iter().enumerate() {
        manifest
            .push_block(&format!("config{i}"), &c.to_kv())
            .map_err(core_error)?;
    }
    for (i, name) in names.iter().enumerate() {
        manifest.push(format!("scene{i}"), name);
    }
    write_file(&out.join("manifest.txt"), &manifest.to_text())?;

    let summary = result
        .summary(&configs, Aggregate::SceneMean)
        .map_err(core_error)?;
    write_file(&out.join("report.csv"), &csv_string(&summary))?;
    let pooled = result
        .summary(&configs, Aggregate::Pooled)
        .map_err(core_error)?;
    write_file(&out.join("report_pooled.csv"), &csv_string(&pooled))?;

    let per_scene: Vec<QualityReport> = result
        .outcomes
        .iter()
        .map(|o| {
            o.report
                .clone()
                .labeled(format!("{}@scene{}", o.config, o.scene))
        })
        .collect();
    write_file(&out.join("scenes.csv"), &csv_string(&per_scene))?;

    for fold in &result.folds {
        write_file(
            &out.join(format!("fold{}.csv", fold.fold)),
            &csv_string(&fold.reports),
        )?;
    }

    for o in &result.outcomes {
        for (j, history) in o.histories.iter().enumerate() {
            let mut text = String::from("epoch,loss,vwe_term,rie_term\n");
            for r in history {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.epoch, r.loss, r.vwe_term, r.rie_term
                ));
            }
            let name = format!("scene{:03}_{}_sub{:02}.csv", o.scene, o.config, j);
            write_file(&out.join("history").join(name), &text)?;
        }
    }

    println!(
        "{:<12} {:>12} {:>12} {:>12}",
        "config", "view_psnr", "r0_psnr", "r0_gmsd"
    );
    for report in &summary {
        let r0 = report.refocus_at(0.0);
        println!(
            "{:<12} {:>12.4} {:>12.4} {:>12.6}",
            report.config,
            report.view.psnr,
            r0.map_or(f64::NAN, |r| r.psnr),
            r0.and_then(|r| r.gmsd).unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
