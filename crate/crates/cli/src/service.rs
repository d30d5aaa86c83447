//! HTTP/JSON service backing the scene composer.
//!
//! Sessions hold a working scene in memory. Writes to a session are
//! exclusive: a write that finds another one in progress, or whose
//! `If-Match` revision is stale, gets 409.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use graspkit::geom::write_stl_binary;
use graspkit::graspeval::{evaluate_batch, records_to_csv, EvalConfig, InstanceGrasps};
use graspkit::graspgen::{sample_antipodal_grasps, GraspSetDocument, ParallelJawGripper, SamplingParams};
use graspkit::objectlib::{LibraryDocument, ObjectLibrary, PoseEntry};
use graspkit::printout::{compose_printout, PrintoutOptions};
use graspkit::scene::{
    ground_preset, random_scene, snap_to_stable, validate_scene, InstanceStatus, RandomSceneParams, Scene,
    SceneDocument,
};
use graspkit::textfmt::{from_json, pose_to_floats, sig9};

use crate::config::ServiceConfig;

pub struct AppState {
    library: ObjectLibrary,
    library_path: PathBuf,
    data_dir: PathBuf,
    sessions: RwLock<HashMap<u64, Arc<Session>>>,
    jobs: RwLock<HashMap<u64, Job>>,
    next_id: AtomicU64,
}

struct Session {
    data: Mutex<SessionData>,
}

struct SessionData {
    scene: Scene,
    revision: u64,
    last_validation: Option<Vec<InstanceStatus>>,
}

#[derive(Clone)]
enum Job {
    Running,
    Done(Value),
    Failed(String),
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> anyhow::Result<Arc<AppState>> {
        config.validate()?;
        let library = graspkit::objectlib::load_library(&config.library)?;
        Ok(Arc::new(AppState {
            library,
            library_path: config.library.clone(),
            data_dir: config.data_dir.clone(),
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    fn session(&self, id: u64) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }

    fn scene_document(&self, scene: &Scene) -> SceneDocument {
        SceneDocument::from_scene(scene, Some(&self.data_dir))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into(), field: None }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }
}

impl From<graspkit::Error> for ApiError {
    fn from(e: graspkit::Error) -> Self {
        use graspkit::Error as E;
        let status = match &e {
            E::UnknownObjectId(_) | E::UnknownInstance(_) | E::IndexOutOfRange { .. } | E::UnknownMarkerId(_) => {
                StatusCode::NOT_FOUND
            }
            E::Io { .. } | E::Png(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let field = match &e {
            E::SchemaViolation { path, .. } => Some(path.clone()),
            E::InvalidParameter { name, .. } => Some(name.to_string()),
            _ => None,
        };
        ApiError { status, message: e.to_string(), field }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body with field-path errors; an empty body is `T::default()`.
fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    required_body(bytes)
}

fn required_body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let text = std::str::from_utf8(bytes).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "body is not UTF-8"))?;
    Ok(from_json(text)?)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn with_revision(doc: SceneDocument, revision: u64) -> Response {
    let mut r = Json(doc).into_response();
    r.headers_mut().insert(header::ETAG, HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii"));
    r
}

fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let s = v.to_str().unwrap_or("").trim().trim_matches('"');
    s.parse()
        .map(Some)
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("If-Match must be a revision number, got `{s}`")))
}

/// Runs `edit` on the session's scene under the writer lock and bumps the revision.
async fn write_scene(
    state: Arc<AppState>,
    id: u64,
    headers: &HeaderMap,
    edit: impl FnOnce(&AppState, &Scene) -> ApiResult<Scene> + Send + 'static,
) -> ApiResult<Response> {
    let session = state.session(id)?;
    let expected = if_match(headers)?;
    let mut data = session.data.try_lock().map_err(|_| ApiError::conflict("another write to this session is in progress"))?;
    if let Some(rev) = expected {
        if rev != data.revision {
            return Err(ApiError::conflict(format!("scene revision is {}, not {rev}", data.revision)));
        }
    }
    let current = data.scene.clone();
    let st = state.clone();
    let scene = blocking(move || edit(&st, &current)).await?;
    data.scene = scene;
    data.revision += 1;
    data.last_validation = None;
    Ok(with_revision(state.scene_document(&data.scene), data.revision))
}

pub fn router(state: Arc<AppState>, cors_allow: &[String]) -> Router {
    let router = Router::new()
        .route("/api/library", get(library))
        .route("/api/objects/{id}/mesh", get(object_mesh))
        .route("/api/objects/{id}/stable_poses", get(stable_poses))
        .route("/api/sessions", post(new_session))
        .route("/api/sessions/{id}/scene", get(get_scene).put(put_scene))
        .route("/api/sessions/{id}/validate", post(validate))
        .route("/api/sessions/{id}/random", post(random))
        .route("/api/sessions/{id}/snap", post(snap))
        .route("/api/sessions/{id}/printout", post(printout))
        .route("/api/sessions/{id}/save", post(save))
        .route("/api/grasps/sample", post(sample_grasps))
        .route("/api/grasps/evaluate", post(evaluate))
        .route("/api/jobs/{id}", get(job))
        .with_state(state);
    if cors_allow.is_empty() {
        return router;
    }
    let origins: Vec<HeaderValue> = cors_allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    router.layer(
        CorsLayer::new()
            .allow_origin(AllowOrigin::list(origins))
            .allow_methods(Any)
            .allow_headers(Any)
            .expose_headers([header::ETAG]),
    )
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::new(&config)?;
    let app = router(state, &config.cors_allow);
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn library(State(state): State<Arc<AppState>>) -> ApiResult<Json<LibraryDocument>> {
    let dir = state.library_path.parent().unwrap_or(std::path::Path::new(".")).to_path_buf();
    Ok(Json(LibraryDocument::from_library(&state.library, &dir)?))
}

async fn object_mesh(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let object = state.library.get(&id)?;
    let bytes = write_stl_binary(&object.mesh);
    Ok(([(header::CONTENT_TYPE, "model/stl")], bytes).into_response())
}

async fn stable_poses(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<PoseEntry>>> {
    let object = state.library.get(&id)?;
    Ok(Json(
        object
            .stable_poses
            .iter()
            .map(|p| PoseEntry { probability: sig9(p.probability), pose: pose_to_floats(&p.pose) })
            .collect(),
    ))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    /// Preset name such as `A3`.
    preset: Option<String>,
    ground_area: Option<[f64; 2]>,
    scene: Option<SceneDocument>,
}

fn area_of(preset: Option<&str>, area: Option<[f64; 2]>) -> ApiResult<Option<[f64; 2]>> {
    match (preset, area) {
        (Some(_), Some(_)) => Err(ApiError::new(StatusCode::BAD_REQUEST, "give either preset or ground_area")),
        (Some(p), None) => ground_preset(p)
            .map(Some)
            .ok_or_else(|| ApiError { field: Some("preset".into()), ..ApiError::new(StatusCode::BAD_REQUEST, format!("unknown preset `{p}`")) }),
        (None, a) => Ok(a),
    }
}

fn adopt(state: &AppState, doc: SceneDocument) -> ApiResult<Scene> {
    let mut scene = doc.into_scene(None)?;
    scene.library_ref = state.library_path.clone();
    for inst in &scene.instances {
        state.library.get(&inst.object_id)?;
    }
    Ok(scene)
}

async fn new_session(State(state): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<Response> {
    let req: NewSession = body(&bytes)?;
    let scene = match req.scene {
        Some(doc) => {
            if req.preset.is_some() || req.ground_area.is_some() {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "give either scene or a ground area"));
            }
            adopt(&state, doc)?
        }
        None => {
            let area = area_of(req.preset.as_deref(), req.ground_area)?.unwrap_or([0.594, 0.42]);
            Scene::new(area, state.library_path.clone())?
        }
    };
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let doc = state.scene_document(&scene);
    let session = Session { data: Mutex::new(SessionData { scene, revision: 0, last_validation: None }) };
    state.sessions.write().expect("session table lock").insert(id, Arc::new(session));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "revision": 0, "scene": doc }))).into_response())
}

async fn get_scene(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Response> {
    let session = state.session(id)?;
    let data = session.data.lock().await;
    Ok(with_revision(state.scene_document(&data.scene), data.revision))
}

async fn put_scene(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let doc: SceneDocument = required_body(&bytes)?;
    write_scene(state, id, &headers, move |st, _| adopt(st, doc)).await
}

async fn validate(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Vec<InstanceStatus>>> {
    let session = state.session(id)?;
    let mut data = session.data.lock().await;
    let scene = data.scene.clone();
    let st = state.clone();
    let statuses = blocking(move || Ok(validate_scene(&scene, &st.library)?)).await?;
    data.last_validation = Some(statuses.clone());
    Ok(Json(statuses))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomRequest {
    n: Option<usize>,
    k: Option<usize>,
    seed: Option<u64>,
    preset: Option<String>,
    ground_area: Option<[f64; 2]>,
}

async fn random(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: RandomRequest = body(&bytes)?;
    let area = area_of(req.preset.as_deref(), req.ground_area)?;
    let d = RandomSceneParams::default();
    let params = RandomSceneParams { n: req.n.unwrap_or(d.n), k: req.k.unwrap_or(d.k), seed: req.seed.unwrap_or(d.seed) };
    write_scene(state, id, &headers, move |st, current| {
        let mut scene = random_scene(&st.library, &params, area.unwrap_or(current.ground_area), st.library_path.clone())?;
        scene.board = current.board.clone();
        Ok(scene)
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapRequest {
    instance: usize,
    pose_index: usize,
}

async fn snap(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: SnapRequest = required_body(&bytes)?;
    write_scene(state, id, &headers, move |st, current| Ok(snap_to_stable(current, req.instance, &st.library, req.pose_index)?))
        .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrintoutRequest {
    page: Option<String>,
    page_mm: Option<[f64; 2]>,
    dpi: Option<f64>,
    overlap_mm: Option<f64>,
}

async fn printout(State(state): State<Arc<AppState>>, Path(id): Path<u64>, bytes: Bytes) -> ApiResult<Response> {
    let req: PrintoutRequest = body(&bytes)?;
    let mut options = PrintoutOptions::default();
    if let Some(a) = area_of(req.page.as_deref(), req.page_mm.map(|p| p.map(|v| v / 1e3)))? {
        options.page_mm = a.map(|v| v * 1e3);
    }
    options.dpi = req.dpi.unwrap_or(options.dpi);
    options.overlap_mm = req.overlap_mm.unwrap_or(options.overlap_mm);
    let scene = state.session(id)?.data.lock().await.scene.clone();
    let st = state.clone();
    let doc = blocking(move || Ok(compose_printout(&scene, &st.library, &options, &st.data_dir)?)).await?;
    let mut r = ([(header::CONTENT_TYPE, "application/pdf")], doc.pdf).into_response();
    if !doc.warnings.is_empty() {
        if let Ok(v) = HeaderValue::from_str(&doc.warnings.join("; ")) {
            r.headers_mut().insert("x-printout-warnings", v);
        }
    }
    Ok(r)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveRequest {
    name: String,
}

async fn save(State(state): State<Arc<AppState>>, Path(id): Path<u64>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: SaveRequest = required_body(&bytes)?;
    let ok = !req.name.is_empty() && req.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if !ok || req.name.starts_with('.') {
        return Err(ApiError { field: Some("name".into()), ..ApiError::new(StatusCode::BAD_REQUEST, "name may hold letters, digits, '-', '_' and '.'") });
    }
    let scene = state.session(id)?.data.lock().await.scene.clone();
    let path = state.data_dir.join(format!("{}.yaml", req.name));
    graspkit::scene::save_scene(&scene, &path)?;
    Ok(Json(json!({ "path": path })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRequest {
    object_id: String,
    #[serde(default)]
    params: SamplingParams,
    #[serde(default)]
    gripper: ParallelJawGripper,
}

async fn sample_grasps(State(state): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<Json<GraspSetDocument>> {
    let req: SampleRequest = required_body(&bytes)?;
    let st = state.clone();
    let set = blocking(move || {
        let object = st.library.get(&req.object_id)?;
        Ok(sample_antipodal_grasps(object, &req.gripper, &req.params)?)
    })
    .await?;
    Ok(Json(GraspSetDocument::from_set(&set)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceGraspsEntry {
    instance: usize,
    set: GraspSetDocument,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    session: u64,
    #[serde(default)]
    scene_id: Option<String>,
    grasps: Vec<InstanceGraspsEntry>,
    #[serde(default)]
    gripper: ParallelJawGripper,
    #[serde(default)]
    config: EvalConfig,
}

async fn evaluate(State(state): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<Response> {
    let req: EvaluateRequest = required_body(&bytes)?;
    let scene = state.session(req.session)?.data.lock().await.scene.clone();
    let batches = req
        .grasps
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let set = e.set.into_set().map_err(|err| match err {
                graspkit::Error::SchemaViolation { path, message } => {
                    graspkit::Error::SchemaViolation { path: format!("grasps[{i}].set.{path}"), message }
                }
                other => other,
            })?;
            scene.instance(e.instance)?;
            Ok(InstanceGrasps { instance: e.instance, set })
        })
        .collect::<Result<Vec<_>, graspkit::Error>>()?;
    req.config.validate()?;
    req.gripper.validate()?;
    let job = state.next_id.fetch_add(1, Ordering::Relaxed);
    state.jobs.write().expect("job table lock").insert(job, Job::Running);
    let scene_id = req.scene_id.unwrap_or_else(|| format!("session-{}", req.session));
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let result = evaluate_batch(&scene_id, &scene, &st.library, &batches, &req.gripper, &req.config);
        let entry = match result {
            Ok(records) => Job::Done(json!({ "records": records, "csv": records_to_csv(&records) })),
            Err(e) => Job::Failed(e.to_string()),
        };
        st.jobs.write().expect("job table lock").insert(job, entry);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job": job }))).into_response())
}

#[derive(Serialize)]
struct JobView {
    job: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

async fn job(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<JobView>> {
    let job = state
        .jobs
        .read()
        .expect("job table lock")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job {id}")))?;
    Ok(Json(match job {
        Job::Running => JobView { job: id, status: "running", result: None, error: None },
        Job::Done(v) => JobView { job: id, status: "done", result: Some(v), error: None },
        Job::Failed(e) => JobView { job: id, status: "failed", result: None, error: Some(e) },
    }))
}
