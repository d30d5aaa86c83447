use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use graspkit::analytics::report;
use graspkit::graspeval::{evaluate_batch, load_records, save_records, select_balanced, EvalConfig, InstanceGrasps, TrialRecord};
use graspkit::graspgen::{
    filter_gripper_collisions, load_grasp_set, sample_antipodal_grasps, save_grasp_set, ParallelJawGripper,
    SamplingParams,
};
use graspkit::objectlib::{ingest_object, load_library, save_library, ObjectLibrary, ObjectSpec};
use graspkit::printout::{compose_printout, MarkerBoardSpec, PrintoutOptions};
use graspkit::render::{parse_camera_yaml, render_scene, sample_camera_poses, PinholeCamera};
use graspkit::scene::{
    ground_preset, load_scene, random_scene, save_scene, validate_scene, RandomSceneParams, Scene,
};

use crate::config::{ServiceConfig, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "graspkit", version, about = "Tabletop grasping scenes, grasps, printouts and renders")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add a mesh to an object library, computing stable poses and derived files.
    Ingest(IngestArgs),
    /// Inspect an object library
    #[command(subcommand)]
    Library(LibraryCmd),
    /// Create, validate and inspect scenes
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Sample, filter, evaluate and select grasps
    #[command(subcommand)]
    Grasps(GraspsCmd),
    /// Write the placement printout (PDF and page PNGs) for a scene.
    Printout(PrintoutArgs),
    /// Render depth, segmentation and color images of a scene.
    Render(RenderArgs),
    /// Simulation vs. real-world statistics from trial records.
    Report(ReportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub library: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub mesh: PathBuf,
    /// kg
    #[arg(long)]
    pub mass: f64,
    #[arg(long)]
    pub friction: Option<f64>,
    /// Factor applied to mesh coordinates to get metres.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Replace an existing object with the same id.
    #[arg(long)]
    pub replace: bool,
}

#[derive(Debug, Subcommand)]
pub enum LibraryCmd {
    /// List objects and their stable poses.
    Show { library: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SceneCmd {
    /// Empty scene.
    New {
        #[arg(long)]
        library: PathBuf,
        /// Preset (A2, A3, A4) or WIDTHxDEPTH in metres.
        #[arg(long, default_value = "A3", value_parser = parse_area)]
        area: [f64; 2],
        /// Add a marker board with default settings.
        #[arg(long)]
        board: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-instance status: Ok, Collision or OutOfBounds.
    Validate {
        scene: PathBuf,
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Random collision-free arrangement.
    Random {
        #[arg(long)]
        library: PathBuf,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "A3", value_parser = parse_area)]
        area: [f64; 2],
        #[arg(long)]
        board: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground area, board and instances of a scene.
    Show { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum GraspsCmd {
    /// Antipodal grasps on one library object (object frame).
    Sample {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        object: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        rays: usize,
        #[arg(long, default_value_t = 8)]
        angles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gripper YAML; defaults to the built-in hand.
        #[arg(long)]
        gripper: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop grasps whose hand hits the ground or other objects in a scene.
    Filter {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        instance: usize,
        #[arg(long)]
        grasps: PathBuf,
        #[arg(long)]
        gripper: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulated trials, one record per grasp.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        library: Option<PathBuf>,
        /// Defaults to the scene file stem.
        #[arg(long)]
        scene_id: Option<String>,
        /// INSTANCE=GRASPS.yaml, repeatable.
        #[arg(long = "grasps", value_parser = parse_instance_file, required = true)]
        grasps: Vec<(usize, PathBuf)>,
        #[arg(long)]
        gripper: Option<PathBuf>,
        /// Evaluator settings YAML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `.csv` or `.yaml`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Balanced success/failure subset per scene and object.
    Select {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PrintoutArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Preset (A2, A3, A4) or WIDTHxHEIGHT in millimetres.
    #[arg(long, default_value = "A4", value_parser = parse_page)]
    pub page: [f64; 2],
    #[arg(long, default_value_t = graspkit::printout::DEFAULT_DPI)]
    pub dpi: f64,
    #[arg(long, default_value_t = graspkit::printout::DEFAULT_OVERLAP_MM)]
    pub overlap: f64,
    /// Directory searched for custom marker dictionaries; defaults to the scene's directory.
    #[arg(long)]
    pub dictionaries: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Render one view from this camera file instead of sampling views.
    #[arg(long, conflicts_with_all = ["views", "seed"])]
    pub camera: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub views: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    /// Horizontal field of view, degrees.
    #[arg(long, default_value_t = 60.0)]
    pub fov: f64,
    /// MIN,MAX metres from the area centre.
    #[arg(long, default_value = "0.5,0.9", value_parser = parse_pair)]
    pub radius: [f64; 2],
    /// MIN,MAX degrees above the ground.
    #[arg(long, default_value = "35,80", value_parser = parse_pair)]
    pub elevation: [f64; 2],
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trial record files (CSV or YAML), repeatable.
    #[arg(long, required = true)]
    pub records: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config YAML; the GRASPKIT_CONFIG environment variable overrides it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
}

fn parse_area(s: &str) -> Result<[f64; 2], String> {
    if let Some(a) = ground_preset(s) {
        return Ok(a);
    }
    parse_dims(s, 'x')
}

fn parse_page(s: &str) -> Result<[f64; 2], String> {
    if let Some(a) = ground_preset(s) {
        // presets are landscape ground areas; pages default to portrait
        return Ok([a[1] * 1e3, a[0] * 1e3]);
    }
    parse_dims(s, 'x')
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_dims(s, ',')
}

fn parse_dims(s: &str, sep: char) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(sep).collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected two numbers separated by `{sep}`"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([num(a)?, num(b)?])
}

fn parse_instance_file(s: &str) -> Result<(usize, PathBuf), String> {
    let (i, p) = s.split_once('=').ok_or("expected INSTANCE=PATH")?;
    let i = i.trim().parse().map_err(|e| format!("instance `{i}`: {e}"))?;
    Ok((i, PathBuf::from(p)))
}

fn read_yaml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(graspkit::textfmt::from_yaml(&text).with_context(|| format!("in {}", path.display()))?)
}

fn gripper_from(path: &Option<PathBuf>) -> anyhow::Result<ParallelJawGripper> {
    let g = match path {
        Some(p) => read_yaml(p)?,
        None => ParallelJawGripper::default(),
    };
    g.validate()?;
    Ok(g)
}

fn scene_and_library(scene: &Path, library: &Option<PathBuf>) -> anyhow::Result<(Scene, ObjectLibrary)> {
    let scene = load_scene(scene).with_context(|| format!("loading scene {}", scene.display()))?;
    let lib_path = library.clone().unwrap_or_else(|| scene.library_ref.clone());
    let lib = load_library(&lib_path).with_context(|| format!("loading library {}", lib_path.display()))?;
    Ok((scene, lib))
}

fn emit(json_mode: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
    } else {
        print!("{}", text());
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let j = cli.json;
    match cli.command {
        Command::Ingest(a) => ingest(j, a),
        Command::Library(LibraryCmd::Show { library }) => library_show(j, &library),
        Command::Scene(cmd) => scene(j, cmd),
        Command::Grasps(cmd) => grasps(j, cmd),
        Command::Printout(a) => printout(j, a),
        Command::Render(a) => render(j, a),
        Command::Report(a) => report_cmd(j, a),
        Command::Serve(a) => serve(a),
    }
}

fn ingest(j: bool, a: IngestArgs) -> anyhow::Result<()> {
    let mut lib = if a.library.exists() {
        load_library(&a.library)?
    } else {
        let name = a.library.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        ObjectLibrary::new(name)
    };
    let spec = ObjectSpec { friction: a.friction, scale: a.scale, ..ObjectSpec::new(&a.id, &a.mesh, a.mass) };
    let (object, files) = ingest_object(&spec)?;
    if a.replace {
        lib.objects.remove(&a.id);
    }
    let poses: Vec<f64> = object.stable_poses.iter().map(|p| p.probability).collect();
    lib.insert(object)?;
    save_library(&lib, &a.library)?;
    emit(
        j,
        json!({ "id": a.id, "stable_poses": poses, "urdf": files.urdf, "hull": files.hull }),
        || {
            let probs: Vec<String> = poses.iter().map(|p| format!("{p:.4}")).collect();
            format!(
                "{}: {} stable poses [{}]\nwrote {}, {}\n",
                a.id,
                poses.len(),
                probs.join(", "),
                files.urdf.display(),
                files.hull.display()
            )
        },
    );
    Ok(())
}

fn library_show(j: bool, path: &Path) -> anyhow::Result<()> {
    let lib = load_library(path)?;
    let rows: Vec<_> = lib
        .objects
        .values()
        .map(|o| {
            json!({
                "id": o.identifier,
                "mass": o.mass,
                "friction": o.friction,
                "stable_poses": o.stable_poses.iter().map(|p| json!({"probability": p.probability, "validated": p.validated})).collect::<Vec<_>>(),
            })
        })
        .collect();
    emit(j, json!({ "name": lib.name, "objects": rows }), || {
        let mut s = format!("{} ({} objects)\n", lib.name, lib.len());
        for o in lib.objects.values() {
            let probs: Vec<String> = o.stable_poses.iter().map(|p| format!("{:.3}", p.probability)).collect();
            s += &format!(
                "  {:<16} mass {:.3} kg  mu {:.2}  poses {} [{}]\n",
                o.identifier,
                o.mass,
                o.friction,
                o.stable_poses.len(),
                probs.join(" ")
            );
        }
        s
    });
    Ok(())
}

fn scene(j: bool, cmd: SceneCmd) -> anyhow::Result<()> {
    match cmd {
        SceneCmd::New { library, area, board, out } => {
            let mut scene = Scene::new(area, library)?;
            scene.board = board.then(MarkerBoardSpec::default);
            save_scene(&scene, &out)?;
            emit(j, json!({ "out": out }), || format!("wrote {}\n", out.display()));
        }
        SceneCmd::Validate { scene, library } => {
            let (s, lib) = scene_and_library(&scene, &library)?;
            let statuses = validate_scene(&s, &lib)?;
            emit(j, json!(statuses), || {
                statuses
                    .iter()
                    .enumerate()
                    .map(|(i, st)| format!("{i} {} {st:?}\n", s.instances[i].object_id))
                    .collect()
            });
        }
        SceneCmd::Random { library, n, k, seed, area, board, out } => {
            let lib = load_library(&library)?;
            let mut s = random_scene(&lib, &RandomSceneParams { n, k, seed }, area, &library)?;
            s.board = board.then(MarkerBoardSpec::default);
            save_scene(&s, &out)?;
            emit(j, json!({ "placed": s.instances.len(), "requested": n, "out": out }), || {
                format!("placed {} of {n} objects; wrote {}\n", s.instances.len(), out.display())
            });
        }
        SceneCmd::Show { scene } => {
            let s = load_scene(&scene)?;
            let doc = graspkit::scene::SceneDocument::from_scene(&s, None);
            emit(j, serde_json::to_value(&doc)?, || {
                let mut t = format!(
                    "ground {} x {} m, library {}, board {}\n",
                    s.ground_area[0],
                    s.ground_area[1],
                    s.library_ref.display(),
                    if s.board.is_some() { "yes" } else { "no" }
                );
                for (i, inst) in s.instances.iter().enumerate() {
                    let p = inst.pose.translation();
                    t += &format!(
                        "  {i} {:<16} at ({:.4}, {:.4}, {:.4}) yaw {:.1} deg\n",
                        inst.object_id,
                        p.x,
                        p.y,
                        p.z,
                        inst.pose.yaw_angle().to_degrees()
                    );
                }
                t
            });
        }
    }
    Ok(())
}

fn grasps(j: bool, cmd: GraspsCmd) -> anyhow::Result<()> {
    match cmd {
        GraspsCmd::Sample { library, object, samples, rays, angles, seed, gripper, out } => {
            let lib = load_library(&library)?;
            let g = gripper_from(&gripper)?;
            let params = SamplingParams { n_surface_samples: samples, rays_per_cone: rays, n_approach_angles: angles, seed };
            let set = sample_antipodal_grasps(lib.get(&object)?, &g, &params)?;
            save_grasp_set(&set, &out)?;
            emit(j, json!({ "object": object, "grasps": set.len(), "out": out }), || {
                format!("{object}: {} grasps; wrote {}\n", set.len(), out.display())
            });
        }
        GraspsCmd::Filter { scene, library, instance, grasps, gripper, out } => {
            let (s, lib) = scene_and_library(&scene, &library)?;
            let g = gripper_from(&gripper)?;
            let set = load_grasp_set(&grasps)?;
            let inst = s.instance(instance)?;
            if inst.object_id != set.object_id {
                bail!("instance {instance} is a `{}`, the grasps are for `{}`", inst.object_id, set.object_id);
            }
            let kept = filter_gripper_collisions(&set, &s, &lib, instance, &g)?;
            save_grasp_set(&kept, &out)?;
            emit(j, json!({ "input": set.len(), "kept": kept.len(), "out": out }), || {
                format!("kept {} of {} grasps; wrote {}\n", kept.len(), set.len(), out.display())
            });
        }
        GraspsCmd::Eval { scene, library, scene_id, grasps, gripper, config, out } => {
            let (s, lib) = scene_and_library(&scene, &library)?;
            let g = gripper_from(&gripper)?;
            let cfg: EvalConfig = match &config {
                Some(p) => read_yaml(p)?,
                None => EvalConfig::default(),
            };
            let mut batches = Vec::new();
            for (instance, path) in &grasps {
                let set = load_grasp_set(path)?;
                let inst = s.instance(*instance)?;
                if inst.object_id != set.object_id {
                    bail!("instance {instance} is a `{}`, {} holds grasps for `{}`", inst.object_id, path.display(), set.object_id);
                }
                batches.push(InstanceGrasps { instance: *instance, set });
            }
            let id = scene_id.unwrap_or_else(|| scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            let records = evaluate_batch(&id, &s, &lib, &batches, &g, &cfg)?;
            save_records(&records, &out)?;
            let tally = tally(&records);
            emit(j, json!({ "records": records.len(), "outcomes": tally, "out": out }), || {
                let parts: Vec<String> = tally.iter().map(|(k, v)| format!("{k} {v}")).collect();
                format!("{} trials: {}; wrote {}\n", records.len(), parts.join(", "), out.display())
            });
        }
        GraspsCmd::Select { records, count, seed, out } => {
            let all = load_records(&records)?;
            let picked = select_balanced(&all, count, seed)?;
            save_records(&picked, &out)?;
            let succ = picked.iter().filter(|r| r.sim_label).count();
            emit(j, json!({ "selected": picked.len(), "success": succ, "out": out }), || {
                format!("selected {} records ({succ} successes); wrote {}\n", picked.len(), out.display())
            });
        }
    }
    Ok(())
}

fn tally(records: &[TrialRecord]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        let key = r.fail_reason.map_or("success".to_string(), |f| f.to_string());
        *m.entry(key).or_default() += 1;
    }
    m
}

fn printout(j: bool, a: PrintoutArgs) -> anyhow::Result<()> {
    let (s, lib) = scene_and_library(&a.scene, &a.library)?;
    let options = PrintoutOptions { page_mm: a.page, dpi: a.dpi, overlap_mm: a.overlap };
    let dict_dir = a
        .dictionaries
        .clone()
        .unwrap_or_else(|| a.scene.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf());
    let doc = compose_printout(&s, &lib, &options, &dict_dir)?;
    for w in &doc.warnings {
        log::warn!("{w}");
        if !j {
            eprintln!("warning: {w}");
        }
    }
    let files = doc.write_to(&a.out)?;
    emit(
        j,
        json!({
            "pages": doc.pages.len(),
            "grid": doc.plan.grid,
            "page_mm": doc.plan.page_mm,
            "overlap_mm": doc.plan.overlap_mm,
            "warnings": doc.warnings,
            "files": files,
        }),
        || {
            format!(
                "{} pages ({} x {}) of {} x {} mm; wrote {}\n",
                doc.pages.len(),
                doc.plan.grid[0],
                doc.plan.grid[1],
                doc.plan.page_mm[0],
                doc.plan.page_mm[1],
                a.out.display()
            )
        },
    );
    Ok(())
}

fn render(j: bool, a: RenderArgs) -> anyhow::Result<()> {
    let (s, lib) = scene_and_library(&a.scene, &a.library)?;
    let cameras: Vec<PinholeCamera> = match &a.camera {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            vec![parse_camera_yaml(&text)?]
        }
        None => sample_camera_poses(&s, a.views, a.radius, a.elevation, a.seed)?
            .into_iter()
            .map(|pose| PinholeCamera::centred(a.width, a.height, a.fov, pose))
            .collect(),
    };
    let mut dirs = Vec::new();
    for (i, cam) in cameras.iter().enumerate() {
        let out = render_scene(&s, &lib, cam)?;
        let dir = a.out.join(format!("view_{i:03}"));
        out.write_view(cam, &dir)?;
        dirs.push(dir);
    }
    emit(j, json!({ "views": dirs }), || format!("rendered {} views into {}\n", dirs.len(), a.out.display()));
    Ok(())
}

fn report_cmd(j: bool, a: ReportArgs) -> anyhow::Result<()> {
    let mut records = Vec::new();
    for p in &a.records {
        records.extend(load_records(p).with_context(|| format!("loading {}", p.display()))?);
    }
    let r = report(&records);
    let format = if j { ReportFormat::Json } else { a.format };
    match format {
        ReportFormat::Text => print!("{}", r.to_text()),
        ReportFormat::Json => print!("{}", r.to_json()),
        ReportFormat::Csv => print!("{}", r.to_csv()),
    }
    Ok(())
}

/// Config source: environment variable, then `--config`, then flags.
pub fn service_config(a: &ServeArgs, env: Option<PathBuf>) -> anyhow::Result<ServiceConfig> {
    let mut cfg = match env.or_else(|| a.config.clone()) {
        Some(path) => ServiceConfig::load(&path)?,
        None => {
            let Some(lib) = &a.library else {
                bail!("give --config, --library or set {CONFIG_ENV}");
            };
            ServiceConfig::new(lib, a.data_dir.clone().unwrap_or_else(|| PathBuf::from(".")))
        }
    };
    if let Some(l) = &a.listen {
        cfg.listen = l.clone();
    }
    Ok(cfg)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let cfg = service_config(&a, env)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::service::serve(cfg))
}
