//! Acceptance suite: one PASS/FAIL line per criterion with its runtime.
//! Run with `cargo test -p graspkit --test acceptance --release`.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::{FRAC_PI_8, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;

use graspkit::analytics::report;
use graspkit::geom::{Bvh, Pose, TriMesh};
use graspkit::graspeval::{
    force_closure_epsilon, evaluate_batch, records_to_csv, select_balanced, ContactPoint, EvalConfig, GraspLabel,
    InstanceGrasps, SceneContext, TrialRecord,
};
use graspkit::graspgen::{filter_posed, sample_antipodal_grasps, GraspSet, ParallelJawGripper, SamplingParams};
use graspkit::objectlib::{validate_stable_pose, ObjectLibrary, ObjectSpec, ObjectType};
use graspkit::printout::{compose_printout, compose_sheet, gray_level, render_heightmap, MarkerBoardSpec, PrintoutOptions};
use graspkit::render::{look_at, render_scene, PinholeCamera};
use graspkit::rng::{derive_seed, seeded};
use graspkit::scene::{validate_scene, InstanceStatus, ObjectInstance, Scene};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let (pass, detail) = match result {
        Ok(d) if in_time => (true, d),
        Ok(d) => (false, format!("{d}; over budget")),
        Err(e) => (false, e),
    };
    println!(
        "{} {name:<24} {:>8.3} s (budget {} s)  {detail}",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn object(id: &str, mesh: TriMesh, mass: f64, mu: Option<f64>) -> ObjectType {
    let mut spec = ObjectSpec::new(id, format!("{id}.obj"), mass);
    spec.friction = mu;
    ObjectType::from_mesh(&spec, mesh).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn cube(side: f64) -> TriMesh {
    TriMesh::cuboid(Point3::origin(), Vector3::repeat(side))
}

fn library(objects: Vec<ObjectType>) -> ObjectLibrary {
    let mut lib = ObjectLibrary::new("acceptance");
    for o in objects {
        lib.insert(o).unwrap();
    }
    lib
}

/// Rotation by pi about x: grasp or camera z points straight down.
fn downward() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI)
}

/// Independent Moller-Trumbore, double sided, edges inclusive.
fn ray_triangle(o: &Point3<f64>, d: &Vector3<f64>, t: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let s = o - t[0];
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if u < 0.0 || u > 1.0 || v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) / det)
}

// ---------------------------------------------------------------- metrics

fn records_for(scene: &str, tn: usize, fn_: usize, fp: usize, tp: usize) -> Vec<TrialRecord> {
    let cells = [(false, false, tn), (false, true, fn_), (true, false, fp), (true, true, tp)];
    let mut out = Vec::new();
    for (sim, real, n) in cells {
        for _ in 0..n {
            out.push(TrialRecord {
                scene_id: scene.into(),
                object_id: format!("obj{}", out.len() % 6),
                grasp_id: out.len(),
                sim_label: sim,
                real_label: Some(real),
                fail_reason: (!sim).then_some(GraspLabel::FailCannotHold),
                epsilon: 0.0,
                evaluator: String::new(),
            });
        }
    }
    out
}

fn published_metrics() -> Check {
    let mut records = records_for("a", 20, 10, 9, 21);
    records.extend(records_for("b", 25, 12, 13, 10));
    ensure(records.len() == 120, || format!("{} records", records.len()))?;
    let rep = report(&records);
    let got: Vec<(String, String)> = rep
        .scenes
        .iter()
        .map(|s| (s.section.precision.unwrap().to_string(), s.section.recall.unwrap().to_string()))
        .collect();
    let want = [("70.00%", "67.74%"), ("43.48%", "45.45%")];
    for ((p, r), (wp, wr)) in got.iter().zip(want) {
        ensure(p == wp && r == wr, || format!("got {p}/{r}, want {wp}/{wr}"))?;
    }
    let text = rep.to_text();
    ensure(text.contains("Precision: 70.00% Recall: 67.74%"), || "text report lacks scene a line".into())?;
    Ok(format!("a {}/{}, b {}/{}", got[0].0, got[0].1, got[1].0, got[1].1))
}

// ---------------------------------------------------------------- stable poses

fn stable_poses() -> Check {
    let obj = object("unit", cube(1.0), 1.0, None);
    ensure(obj.stable_poses.len() == 6, || format!("{} poses", obj.stable_poses.len()))?;
    for (i, p) in obj.stable_poses.iter().enumerate() {
        ensure((p.probability - 1.0 / 6.0).abs() <= 1e-6, || format!("pose {i} p = {}", p.probability))?;
        ensure(validate_stable_pose(&obj, &p.pose), || format!("pose {i} fails validation"))?;
        let placed = obj.mesh.transformed(&p.pose);
        let on_ground = placed.vertices().iter().filter(|v| v.z.abs() <= 1e-9).count();
        ensure(on_ground == 4, || format!("pose {i} rests on {on_ground} vertices"))?;
    }
    let tilted = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 30f64.to_radians()));
    let lowest = obj.mesh.transformed(&tilted).vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    let grounded = Pose::from_translation(Vector3::new(0.0, 0.0, -lowest)).compose(&tilted);
    ensure(!validate_stable_pose(&obj, &grounded), || "30 degree tilt passes validation".into())?;
    Ok("6 poses at 1/6, tilt rejected".into())
}

// ---------------------------------------------------------------- sampling

fn sampling() -> Check {
    let gripper = ParallelJawGripper::default();
    let params = SamplingParams::default();
    let obj = object("cube4", cube(0.04), 0.1, Some(0.24));
    let set = sample_antipodal_grasps(&obj, &gripper, &params).map_err(|e| e.to_string())?;
    ensure(!set.is_empty(), || "empty set on the 4 cm cube".into())?;
    let half = 0.24f64.atan() + 1e-12;
    let angle = |a: Vector3<f64>, b: Vector3<f64>| a.cross(&b).norm().atan2(a.dot(&b));
    for (i, g) in set.grasps.iter().enumerate() {
        let [c1, c2] = g.contacts;
        let line = c2.point - c1.point;
        ensure(angle(c1.normal, line) <= half && angle(c2.normal, -line) <= half, || format!("grasp {i} not antipodal"))?;
        ensure(g.width <= 0.08 && (g.width - line.norm()).abs() <= 1e-12, || format!("grasp {i} width {}", g.width))?;
        for c in [c1, c2] {
            let face = c.point.coords.abs().max();
            ensure((face - 0.02).abs() <= 1e-6, || format!("grasp {i} contact off surface by {}", face - 0.02))?;
        }
    }
    let big = object("cube12", cube(0.12), 0.5, Some(0.24));
    let none = sample_antipodal_grasps(&big, &gripper, &params).map_err(|e| e.to_string())?;
    ensure(none.is_empty(), || format!("12 cm cube gave {} grasps", none.len()))?;
    Ok(format!("{} grasps checked, 12 cm cube empty", set.len()))
}

// ---------------------------------------------------------------- force closure

/// Cone edges rebuilt from the tangent rule: first tangent is the contact
/// offset from the origin projected into the contact plane, else towards the
/// farthest other contact, else any perpendicular.
fn oracle_wrenches(contacts: &[ContactPoint], origin: &Point3<f64>, edges: usize) -> Vec<[f64; 6]> {
    let rho = contacts.iter().map(|c| (c.position - origin).norm()).fold(0.0, f64::max);
    let rho = if rho > 1e-9 { rho } else { 1.0 };
    let mut out = Vec::new();
    for c in contacts {
        let n = c.normal;
        let flat = |v: Vector3<f64>| v - n * n.dot(&v);
        let mut t1 = flat(c.position - origin);
        if t1.norm() <= 1e-9 {
            t1 = contacts
                .iter()
                .map(|o| flat(o.position - c.position))
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
        }
        if t1.norm() <= 1e-9 {
            t1 = graspkit::geom::any_perpendicular(&n);
        }
        let t1 = t1.normalize();
        let t2 = n.cross(&t1);
        for k in 0..edges {
            let a = 2.0 * PI * k as f64 / edges as f64;
            let f = (n + c.friction * (t1 * a.cos() + t2 * a.sin())).normalize();
            let tau = (c.position - origin).cross(&f) / rho;
            out.push([f.x, f.y, f.z, tau.x, tau.y, tau.z]);
        }
    }
    out
}

/// Force closure as positive spanning: each of the twelve signed unit
/// wrenches is a non-negative combination of the primitives.
fn lp_closure(wrenches: &[[f64; 6]]) -> bool {
    (0..12).all(|k| {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = wrenches.iter().map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
        for axis in 0..6 {
            let row: Vec<_> = vars.iter().zip(wrenches).map(|(v, w)| (*v, w[axis])).collect();
            let rhs = if axis == k % 6 { if k < 6 { 1.0 } else { -1.0 } } else { 0.0 };
            p.add_constraint(row.as_slice(), ComparisonOp::Eq, rhs);
        }
        p.solve().is_ok()
    })
}

fn unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

fn force_closure() -> Check {
    let config = EvalConfig { cone_edges: 8, ..EvalConfig::default() };
    let mut rng = seeded(2024);
    let (mut closed, mut open) = (0, 0);
    for case in 0..50 {
        let n = rng.random_range(2..=6);
        let contacts: Vec<ContactPoint> = (0..n)
            .map(|i| {
                let p = unit(&mut rng) * 0.03;
                // mostly inward normals, some arbitrary
                let normal = if rng.random_bool(0.75) { (-p.normalize() + unit(&mut rng) * 0.3).normalize() } else { unit(&mut rng) };
                ContactPoint::new(Point3::from(p), normal, rng.random_range(0.2..0.9), (i % 2) as u8)
            })
            .collect();
        let origin = Point3::from(contacts.iter().map(|c| c.position.coords).sum::<Vector3<f64>>() / n as f64);
        let eps = force_closure_epsilon(&contacts, &origin, &config);
        let lp = lp_closure(&oracle_wrenches(&contacts, &origin, 8));
        ensure((eps > 0.0) == lp, || format!("case {case} ({n} contacts): epsilon {eps} but LP says {lp}"))?;
        if lp {
            closed += 1;
        } else {
            open += 1;
        }
    }
    for case in 0..20 {
        let axis = unit(&mut rng);
        let centre = Point3::from(unit(&mut rng) * 0.01);
        let w = rng.random_range(0.01..0.08);
        let mu = rng.random_range(0.1..1.5);
        let pair = [
            ContactPoint::new(centre - axis * w / 2.0, axis, mu, 0),
            ContactPoint::new(centre + axis * w / 2.0, -axis, mu, 1),
        ];
        let origin = Point3::from(centre.coords + unit(&mut rng).cross(&axis) * rng.random_range(0.0..0.01));
        let eps = force_closure_epsilon(&pair, &origin, &config);
        ensure(eps == 0.0, || format!("collinear pair {case} gives epsilon {eps}"))?;
    }
    ensure(closed > 0 && open > 0, || format!("degenerate sample: {closed} closed, {open} open"))?;
    Ok(format!("50 sets agree ({closed} in closure, {open} not), 20 collinear pairs at 0"))
}

// ---------------------------------------------------------------- lift

fn side_grasp_label(mass: f64, config: &EvalConfig) -> Result<GraspLabel, String> {
    let lib = library(vec![object("cube", cube(0.04), mass, Some(0.24))]);
    let mut scene = Scene::new([0.297, 0.21], "lib.yaml").unwrap();
    let centre = Vector3::new(0.1, 0.1, 0.02);
    scene.instances.push(ObjectInstance::new("cube", Pose::from_translation(centre)));
    let ctx = SceneContext::new(&scene, &lib).map_err(|e| e.to_string())?;
    // pads on the +-x faces, approaching from above
    let grasp = Pose::new(downward(), centre);
    let out = ctx.evaluate(0, &grasp, &ParallelJawGripper::default(), config).map_err(|e| e.to_string())?;
    if out.label == GraspLabel::Success || out.label == GraspLabel::FailCannotHold {
        let fingers: HashSet<u8> = out.contacts.iter().map(|c| c.finger).collect();
        ensure(fingers.len() == 2, || format!("{mass} kg: contacts on {} finger(s)", fingers.len()))?;
    }
    Ok(out.label)
}

fn lift_surrogate() -> Check {
    let config = EvalConfig::default();
    let mu = 0.24;
    let required = |m: f64| m * config.gravity * config.lift_wrench_scale;
    // friction per unit normal force along the vertical lies between the
    // inscribed and the true cone
    let oracle = |m: f64| -> Option<bool> {
        if required(m) / (mu * FRAC_PI_8.cos()) <= config.max_grip_force {
            Some(true)
        } else if required(m) / mu > config.max_grip_force {
            Some(false)
        } else {
            None
        }
    };
    let mut checked = Vec::new();
    for m in [0.1, 1000.0, 0.25, 0.5, 0.7, 0.9, 2.0, 10.0] {
        let label = side_grasp_label(m, &config)?;
        let Some(holds) = oracle(m) else { continue };
        let want = if holds { GraspLabel::Success } else { GraspLabel::FailCannotHold };
        ensure(label == want, || format!("{m} kg: {label}, oracle wants {want}"))?;
        checked.push(m);
    }
    ensure(checked.starts_with(&[0.1, 1000.0]), || "reference masses fell in the undecided band".into())?;
    Ok(format!("0.1 kg success, 1000 kg fail_cannot_hold, {} masses match the bound", checked.len()))
}

// ---------------------------------------------------------------- pipeline

fn desk_library() -> ObjectLibrary {
    library(vec![
        object("cube_small", cube(0.04), 0.08, None),
        object("cube_large", cube(0.055), 0.2, None),
        object("box_tall", TriMesh::cuboid(Point3::origin(), Vector3::new(0.03, 0.05, 0.07)), 0.12, None),
        object("box_flat", TriMesh::cuboid(Point3::origin(), Vector3::new(0.07, 0.045, 0.025)), 0.1, None),
        object("cyl_thin", TriMesh::cylinder(0.02, 0.07, 16), 0.09, None),
        object("cyl_wide", TriMesh::cylinder(0.03, 0.045, 16), 0.12, None),
    ])
}

/// Six objects on a 3 x 2 grid with `spacing` metres between centres.
fn grid_scene(lib: &ObjectLibrary, spacing: f64, pose_pick: usize, yaw_seed: u64) -> Result<Scene, String> {
    let mut scene = Scene::new([0.42, 0.297], "lib.yaml").map_err(|e| e.to_string())?;
    let mut rng = seeded(yaw_seed);
    let centre = [0.21, 0.1485];
    for (k, id) in lib.ids().enumerate() {
        let obj = lib.get(id).unwrap();
        let stable = &obj.stable_poses[pose_pick.min(obj.stable_poses.len() - 1)];
        let (col, row) = ((k % 3) as f64 - 1.0, (k / 3) as f64 - 0.5);
        let com = stable.pose.transform_point(&obj.com());
        let yaw = Pose::yaw(rng.random_range(0.0..2.0 * PI));
        let centred = Pose::from_translation(Vector3::new(-com.x, -com.y, 0.0)).compose(&stable.pose);
        let at = Vector3::new(centre[0] + col * spacing, centre[1] + row * spacing, 0.0);
        let pose = Pose::from_translation(at).compose(&yaw.compose(&centred));
        scene.instances.push(ObjectInstance::new(id, pose));
    }
    let statuses = validate_scene(&scene, lib).map_err(|e| e.to_string())?;
    ensure(statuses.iter().all(|s| *s == InstanceStatus::Ok), || format!("grid scene statuses {statuses:?}"))?;
    Ok(scene)
}

struct PipelineRun {
    records: BTreeMap<String, Vec<TrialRecord>>,
    selected: BTreeMap<String, Vec<TrialRecord>>,
    batch_time: Duration,
}

fn pipeline(lib: &ObjectLibrary, scenes: &[(&str, Scene)]) -> Result<PipelineRun, String> {
    let gripper = ParallelJawGripper::default();
    let config = EvalConfig::default();
    let mut sets: BTreeMap<&str, GraspSet> = BTreeMap::new();
    for (k, id) in lib.ids().enumerate() {
        let params = SamplingParams { seed: derive_seed(7, k as u64), ..SamplingParams::default() };
        let full = sample_antipodal_grasps(lib.get(id).unwrap(), &gripper, &params).map_err(|e| e.to_string())?;
        ensure(full.len() >= 1000, || format!("{id}: only {} candidates", full.len()))?;
        sets.insert(id, full.subsample(1000, params.seed));
    }
    let mut run = PipelineRun { records: BTreeMap::new(), selected: BTreeMap::new(), batch_time: Duration::ZERO };
    for (scene_id, scene) in scenes {
        let posed = scene.posed_meshes(lib).map_err(|e| e.to_string())?;
        let batches: Vec<InstanceGrasps> = scene
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| InstanceGrasps {
                instance: i,
                set: filter_posed(&sets[inst.object_id.as_str()], &posed, i, &inst.pose, &gripper),
            })
            .collect();
        let start = Instant::now();
        let records = evaluate_batch(scene_id, scene, lib, &batches, &gripper, &config).map_err(|e| e.to_string())?;
        run.batch_time += start.elapsed();
        let selected = select_balanced(&records, 10, 11).map_err(|e| e.to_string())?;
        run.records.insert(scene_id.to_string(), records);
        run.selected.insert(scene_id.to_string(), selected);
    }
    Ok(run)
}

fn check_records(scene_id: &str, records: &[TrialRecord], selected: &[TrialRecord]) -> Result<(), String> {
    let mut supply: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for r in records {
        ensure(r.scene_id == scene_id, || format!("record in {} under {scene_id}", r.scene_id))?;
        ensure(r.sim_label == r.fail_reason.is_none(), || format!("{r:?}: label and reason disagree"))?;
        ensure(!r.sim_label || r.epsilon > 0.0, || format!("{r:?}: success without closure"))?;
        ensure(seen.insert((r.object_id.clone(), r.grasp_id)), || format!("duplicate {}/{}", r.object_id, r.grasp_id))?;
        let e = supply.entry(r.object_id.as_str()).or_default();
        if r.sim_label {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    ensure(supply.len() == 6, || format!("{scene_id}: {} objects with records", supply.len()))?;
    for (obj, (n_s, n_f)) in &supply {
        let picked: Vec<&TrialRecord> = selected.iter().filter(|r| r.object_id == *obj).collect();
        let s = picked.iter().filter(|r| r.sim_label).count();
        let f = picked.len() - s;
        let want_s = 5.min(*n_s).max(10usize.saturating_sub(*n_f).min(*n_s));
        let want_f = (10 - want_s).min(*n_f);
        ensure((s, f) == (want_s, want_f), || {
            format!("{scene_id}/{obj}: picked {s}+{f} from {n_s}+{n_f}, want {want_s}+{want_f}")
        })?;
        for r in picked {
            ensure(records.contains(r), || format!("{scene_id}/{obj}: selected record not in batch"))?;
        }
    }
    ensure(selected.len() == 60, || format!("{scene_id}: {} selected records", selected.len()))?;
    Ok(())
}

fn end_to_end() -> Check {
    let lib = desk_library();
    let scenes = [("apart", grid_scene(&lib, 0.13, 0, 1)?), ("close", grid_scene(&lib, 0.085, 1, 2)?)];
    let first = pipeline(&lib, &scenes)?;
    let second = pipeline(&lib, &scenes)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut total = 0;
    let mut success = 0;
    for (scene_id, _) in &scenes {
        let records = &first.records[*scene_id];
        let selected = &first.selected[*scene_id];
        check_records(scene_id, records, selected)?;
        total += records.len();
        success += records.iter().filter(|r| r.sim_label).count();
        for (tag, a, b) in [("all", records, &second.records[*scene_id]), ("sel", selected, &second.selected[*scene_id])] {
            let pa = dir.path().join(format!("{scene_id}_{tag}_1.csv"));
            let pb = dir.path().join(format!("{scene_id}_{tag}_2.csv"));
            std::fs::write(&pa, records_to_csv(a)).map_err(|e| e.to_string())?;
            std::fs::write(&pb, records_to_csv(b)).map_err(|e| e.to_string())?;
            let same = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();
            ensure(same, || format!("{scene_id} {tag} records differ between runs"))?;
        }
    }
    Ok(format!(
        "{total} trials ({success} sim successes), 2 x 60 selected, reruns byte-identical, batch {:.1} s per run",
        first.batch_time.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- printout

fn printout() -> Check {
    let dpi = 300.0;
    let mpp = 25.4 / dpi;
    let lib = library(vec![object("cube5", cube(0.05), 0.1, None), object("cube3", cube(0.03), 0.05, None)]);

    // footprint of a single 5 cm cube
    let mut single = Scene::new([0.297, 0.21], "lib.yaml").unwrap();
    single.instances.push(ObjectInstance::new("cube5", Pose::from_translation(Vector3::new(0.15, 0.1, 0.025))));
    let hm = render_heightmap(&single, &lib, dpi).map_err(|e| e.to_string())?;
    let img = &hm.image;
    let row = img.height - (100.0 / mpp) as usize;
    let col = (150.0 / mpp) as usize;
    let across = (0..img.width).filter(|&c| img.get(c, row) < 255).count() as f64 * mpp;
    let down = (0..img.height).filter(|&r| img.get(col, r) < 255).count() as f64 * mpp;
    for (axis, len) in [("x", across), ("y", down)] {
        ensure((len - 50.0).abs() <= mpp, || format!("footprint {axis} measures {len:.4} mm"))?;
    }

    // stacked cubes: an overhanging 3 cm cube keeps its own bottom-face gray
    let mut stack = Scene::new([0.297, 0.21], "lib.yaml").unwrap();
    stack.instances.push(ObjectInstance::new("cube5", Pose::from_translation(Vector3::new(0.15, 0.1, 0.025))));
    stack.instances.push(ObjectInstance::new("cube3", Pose::from_translation(Vector3::new(0.18, 0.1, 0.065))));
    let img = render_heightmap(&stack, &lib, dpi).map_err(|e| e.to_string())?.image;
    let px = |x_mm: f64, y_mm: f64| img.get((x_mm / mpp) as usize, img.height - 1 - (y_mm / mpp) as usize);
    let overhang = (255.0 * 0.05 / 0.08f64).round() as u8;
    ensure(px(150.0, 100.0) == 0, || format!("under the lower cube: {}", px(150.0, 100.0)))?;
    ensure(px(170.0, 100.0) == 0, || "upper cube shows over the lower one".into())?;
    ensure(px(190.0, 100.0).abs_diff(overhang) <= 1, || format!("overhang gray {} want {overhang}", px(190.0, 100.0)))?;
    ensure(gray_level(0.05, 0.08).abs_diff(overhang) <= 1, || "gray_level disagrees".into())?;

    // A2 board on A4 pages
    let mut a2 = Scene::new([0.594, 0.42], "lib.yaml").unwrap();
    a2.board = Some(MarkerBoardSpec::default());
    let centres = [(150.0, 120.0), (297.0, 210.0), (450.0, 300.0)];
    for (x, y) in centres {
        a2.instances.push(ObjectInstance::new("cube5", Pose::from_translation(Vector3::new(x / 1e3, y / 1e3, 0.025))));
    }
    let options = PrintoutOptions { page_mm: [210.0, 297.0], dpi, ..PrintoutOptions::default() };
    let doc = compose_printout(&a2, &lib, &options, Path::new(".")).map_err(|e| e.to_string())?;
    ensure(doc.pages.len() == 4, || format!("{} pages", doc.pages.len()))?;

    // every page pixel matches the sheet pixel at its reconstructed position
    let sheet = compose_sheet(&a2, &lib, dpi, Path::new(".")).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut dark: Vec<Vec<[f64; 2]>> = vec![Vec::new(); centres.len()];
    let mut seen = HashSet::new();
    for page in &doc.pages {
        for r in 0..page.image.height {
            for c in 0..page.image.width {
                let [x, y] = page.pixel_to_scene_mm(c, r, dpi);
                if x < 0.0 || y < 0.0 || x > 594.0 || y > 420.0 {
                    continue;
                }
                let sc = (x / mpp - 0.5).round();
                let sr = sheet.image.height as f64 - 0.5 - y / mpp;
                let (sc_i, sr_i) = (sc as usize, sr.round() as usize);
                worst = worst.max(((sc_i as f64 + 0.5) * mpp - x).abs()).max(((sheet.image.height - sr_i) as f64 - 0.5) * mpp - y);
                let v = page.image.get(c, r);
                ensure(v == sheet.image.get(sc_i, sr_i), || format!("page {} pixel ({c}, {r}) differs from sheet", page.number))?;
                if v < 128 && seen.insert((sc_i, sr_i)) {
                    for (k, (cx, cy)) in centres.iter().enumerate() {
                        if (x - cx).abs() < 35.0 && (y - cy).abs() < 35.0 {
                            dark[k].push([x, y]);
                        }
                    }
                }
            }
        }
    }
    for (k, (cx, cy)) in centres.iter().enumerate() {
        let pts = &dark[k];
        ensure(!pts.is_empty(), || format!("cube {k} not found on the pages"))?;
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        ensure((mx - cx).abs() <= 0.1 && (my - cy).abs() <= 0.1, || {
            format!("cube {k} reconstructed at ({mx:.3}, {my:.3}) mm, placed at ({cx}, {cy})")
        })?;
        let span = pts.iter().map(|p| p[0]).fold(f64::MIN, f64::max) - pts.iter().map(|p| p[0]).fold(f64::MAX, f64::min);
        ensure((span + mpp - 50.0).abs() <= mpp, || format!("cube {k} spans {:.3} mm", span + mpp))?;
    }

    // the PDF places each image at its physical size
    let pdf = String::from_utf8_lossy(&doc.pdf);
    let page = &doc.pages[0];
    let w_pt = page.image.width as f64 * mpp * 72.0 / 25.4;
    let h_pt = page.image.height as f64 * mpp * 72.0 / 25.4;
    let cm = format!("q {w_pt:.4} 0 0 {h_pt:.4} 0 0 cm");
    ensure(pdf.contains(&cm), || format!("PDF lacks `{cm}`"))?;
    ensure(worst <= 1e-6, || format!("pixel centre mapping off by {worst} mm"))?;
    Ok(format!(
        "footprint {across:.3} x {down:.3} mm, {} pages, cube centres within 0.1 mm, overhang gray {overhang}",
        doc.pages.len()
    ))
}

// ---------------------------------------------------------------- rendering

fn rendering() -> Check {
    let lib = library(vec![
        object("cube", cube(0.05), 0.1, None),
        object("box", TriMesh::cuboid(Point3::origin(), Vector3::new(0.08, 0.03, 0.04)), 0.1, None),
        object("cyl", TriMesh::cylinder(0.025, 0.06, 24), 0.1, None),
    ]);
    let empty = Scene::new([0.42, 0.297], "lib.yaml").unwrap();
    let down = Pose::new(downward(), Vector3::new(0.21, 0.15, 1.0));
    let cam = PinholeCamera::centred(64, 48, 60.0, down);
    let out = render_scene(&empty, &lib, &cam).map_err(|e| e.to_string())?;
    let worst = out.depth.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-12, || format!("empty ground depth off by {worst}"))?;
    ensure(out.segmentation.iter().all(|&s| s == out.ground_index), || "empty ground segmentation".into())?;

    let mut scene = Scene::new([0.42, 0.297], "lib.yaml").unwrap();
    scene.instances.push(ObjectInstance::new("cube", Pose::from_translation(Vector3::new(0.17, 0.14, 0.025))));
    scene.instances.push(ObjectInstance::new(
        "box",
        Pose::from_translation(Vector3::new(0.24, 0.17, 0.02)).compose(&Pose::yaw(0.6)),
    ));
    scene.instances.push(ObjectInstance::new("cyl", Pose::from_translation(Vector3::new(0.21, 0.09, 0.0))));
    let eye = Point3::new(0.05, -0.1, 0.35);
    let cam = PinholeCamera::centred(64, 64, 70.0, look_at(eye, Point3::new(0.21, 0.15, 0.02)).map_err(|e| e.to_string())?);
    let out = render_scene(&scene, &lib, &cam).map_err(|e| e.to_string())?;

    let meshes: Vec<TriMesh> = scene
        .instances
        .iter()
        .map(|i| lib.get(&i.object_id).unwrap().mesh.transformed(&i.pose))
        .collect();
    let rot = cam.pose.rotation_matrix();
    let origin = Point3::from(cam.pose.translation());
    let mut mismatches = 0;
    let mut counts = [0usize; 5];
    for v in 0..64u32 {
        for u in 0..64u32 {
            let d = rot * Vector3::new((u as f64 + 0.5 - cam.cx) / cam.fx, (v as f64 + 0.5 - cam.cy) / cam.fy, 1.0);
            let mut best: Option<(f64, i32)> = None;
            for (k, m) in meshes.iter().enumerate() {
                for t in 0..m.triangles().len() {
                    if let Some(t) = ray_triangle(&origin, &d, &m.triangle(t)) {
                        if t >= 0.0 && best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, k as i32));
                        }
                    }
                }
            }
            let ground = -origin.z / d.z;
            if d.z != 0.0 && ground > 0.0 && best.is_none_or(|(bt, _)| ground < bt) {
                best = Some((ground, meshes.len() as i32));
            }
            let (depth, seg) = best.filter(|(t, _)| *t > 0.0).unwrap_or((0.0, -1));
            let got_seg = out.segment_at(u, v);
            if got_seg != seg || (out.depth_at(u, v) - depth).abs() > 1e-9 {
                mismatches += 1;
            }
            counts[(seg + 1) as usize] += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} pixels differ from the exhaustive oracle"))?;
    ensure(counts[1..4].iter().all(|&c| c > 0), || format!("an object is not visible: {counts:?}"))?;
    ensure(out.is_consistent(), || "depth and segmentation disagree".into())?;
    Ok(format!("flat depth 1.0, 64x64 segmentation exact (per-object pixels {:?})", &counts[1..4]))
}

// ---------------------------------------------------------------- ray cast

/// Lumpy UV sphere with exactly 10 000 triangles.
fn lumpy_sphere() -> TriMesh {
    let (stacks, slices) = (51usize, 100usize);
    let mut vertices = vec![Point3::new(0.0, 0.0, 0.1)];
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = 2.0 * PI * j as f64 / slices as f64;
            let r = 0.1 * (1.0 + 0.08 * (3.0 * phi).sin() * (5.0 * theta).cos());
            vertices.push(Point3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -0.1));
    let south = (vertices.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut tris = Vec::new();
    for j in 0..slices {
        tris.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            tris.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            tris.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..slices {
        tris.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    TriMesh::new(vertices, tris).unwrap()
}

fn ray_cast() -> Check {
    let mesh = lumpy_sphere();
    let n_tris = mesh.triangles().len();
    ensure(n_tris == 10_000, || format!("{n_tris} triangles"))?;
    let bvh = Bvh::new(&mesh);
    let tris: Vec<[Point3<f64>; 3]> = (0..n_tris).map(|i| mesh.triangle(i)).collect();
    let mut rng = seeded(99);
    let mut hits = 0;
    for ray in 0..10_000 {
        let o = Point3::from(Vector3::new(
            rng.random_range(-0.25..0.25),
            rng.random_range(-0.25..0.25),
            rng.random_range(-0.25..0.25),
        ));
        // half the rays aim near the surface, half anywhere
        let d = if ray % 2 == 0 {
            (unit(&mut rng) * 0.09 - o.coords).normalize()
        } else {
            unit(&mut rng)
        };
        let mut best: Option<(f64, usize)> = None;
        for (i, t) in tris.iter().enumerate() {
            if let Some(t) = ray_triangle(&o, &d, t) {
                if t >= 0.0 && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        let got = bvh.raycast(&o, &d, 0.0, f64::INFINITY).map(|h| (h.distance, h.triangle));
        match (best, got) {
            (None, None) => {}
            (Some((t, i)), Some((gt, gi))) if i == gi && (t - gt).abs() <= 1e-9 => hits += 1,
            _ => return Err(format!("ray {ray}: exhaustive {best:?}, bvh {got:?}")),
        }
    }
    ensure(hits > 3000, || format!("only {hits} rays hit"))?;
    Ok(format!("10000 rays agree, {hits} hits"))
}

fn main() -> ExitCode {
    // keep `cargo test` filters and flags from confusing a harness-less binary
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let results = [
        run("published_metrics", secs(1), published_metrics),
        run("stable_poses", secs(5), stable_poses),
        run("grasp_sampling", secs(30), sampling),
        run("force_closure_oracle", secs(60), force_closure),
        run("lift_surrogate", secs(5), lift_surrogate),
        run("end_to_end_pipeline", secs(300), end_to_end),
        run("printout_exactness", secs(30), printout),
        run("rendering", secs(30), rendering),
        run("ray_cast_oracle", secs(60), ray_cast),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
