use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use al_core::corpus::{Dataset, FeatureSet, LabelSet};
use al_core::learner::{write_atomic, ActiveLearner, LoopConfig};
use al_core::Error;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::api::{BatchDoc, BatchView, StatusView, StoppingView};

const SESSION_FILE: &str = "session.json";

/// Persisted bookkeeping next to the learner snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    /// Sequence number of the most recent batch; 0 before the first query.
    pub seq: u64,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    /// Directory (relative to the session directory) holding the learner.
    pub snapshot: String,
    pub snapshot_counter: u64,
}

pub struct SessionInner {
    pub learner: ActiveLearner,
    pub meta: SessionMeta,
}

/// What readers see without taking the mutation lock.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub status: StatusView,
    /// Pending batch with its sequence number, if any.
    pub pending: Option<BatchView>,
    pub labels: Arc<BTreeMap<usize, LabelSet>>,
}

pub struct Session {
    pub id: String,
    pub dir: PathBuf,
    pub inner: Arc<Mutex<SessionInner>>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl Session {
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn publish(&self, inner: &SessionInner) {
        let snap = Arc::new(build_snapshot(inner));
        *self.snapshot.write().expect("snapshot lock poisoned") = snap;
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

static ID_COUNTER: AtomicU64 = AtomicU64::new(0);

fn new_session_id(fingerprint: &str) -> String {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let n = ID_COUNTER.fetch_add(1, Ordering::Relaxed);
    al_core::sha256_hex(format!("{fingerprint}:{nanos}:{n}").as_bytes())[..16].to_string()
}

fn stopping_view(learner: &ActiveLearner) -> StoppingView {
    let d = learner.should_stop();
    StoppingView {
        name: d.criterion,
        value: d.value,
        should_stop: d.should_stop,
    }
}

pub fn batch_docs(dataset: &Dataset, ids: &[usize]) -> Vec<BatchDoc> {
    ids.iter()
        .map(|&doc_id| BatchDoc {
            doc_id,
            text: dataset.text(doc_id).to_string(),
        })
        .collect()
}

fn build_snapshot(inner: &SessionInner) -> Snapshot {
    let l = &inner.learner;
    let last = l.history().last();
    let space = l.dataset().label_space();
    let pending = (!l.pending().is_empty()).then(|| BatchView {
        batch: batch_docs(l.dataset(), l.pending()),
        seq: inner.meta.seq,
        done: false,
    });
    let status = StatusView {
        session_id: inner.meta.id.clone(),
        classes: space.class_names.clone(),
        mode: space.mode,
        strategy: l.config().strategy.to_string(),
        classifier: l.config().classifier.to_string(),
        round: l.round(),
        labeled: l.pools().labeled().len(),
        unlabeled: l.pools().unlabeled().len(),
        pending: l.pending().len(),
        seq: inner.meta.seq,
        done: l.pending().is_empty() && l.pools().unlabeled().is_empty(),
        stopping: stopping_view(l),
        kappa: last.and_then(|r| r.kappa),
        change_rate: last.and_then(|r| r.change_rate),
        created_at_ms: inner.meta.created_at_ms,
        updated_at_ms: inner.meta.updated_at_ms,
    };
    Snapshot {
        status,
        pending,
        labels: Arc::new(l.labels().clone()),
    }
}

pub fn current_stopping(learner: &ActiveLearner) -> StoppingView {
    stopping_view(learner)
}

/// Writes a fresh learner snapshot, points `session.json` at it and removes
/// the previous one. A crash at any step leaves `session.json` referring to a
/// complete snapshot.
pub fn persist(dir: &Path, inner: &mut SessionInner) -> al_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    let previous = inner.meta.snapshot.clone();
    let counter = inner.meta.snapshot_counter + 1;
    let name = format!("snap-{counter:06}");
    let target = dir.join(&name);
    if target.exists() {
        std::fs::remove_dir_all(&target)?;
    }
    inner.learner.save(&target)?;
    let mut meta = inner.meta.clone();
    meta.snapshot = name;
    meta.snapshot_counter = counter;
    meta.updated_at_ms = now_ms();
    write_atomic(&dir.join(SESSION_FILE), &serde_json::to_vec_pretty(&meta)?)?;
    inner.meta = meta;
    if !previous.is_empty() && previous != inner.meta.snapshot {
        let _ = std::fs::remove_dir_all(dir.join(previous));
    }
    Ok(())
}

fn load_session(dir: &Path, dataset: &Arc<Dataset>, features: &Arc<FeatureSet>) -> al_core::Result<SessionInner> {
    let bytes = std::fs::read(dir.join(SESSION_FILE))?;
    let meta: SessionMeta = serde_json::from_slice(&bytes).map_err(|e| Error::CorruptSession {
        field: SESSION_FILE.into(),
        message: e.to_string(),
    })?;
    let learner = ActiveLearner::load(&dir.join(&meta.snapshot), dataset.clone(), features.clone())?;
    // Leftovers from a crash between writing a snapshot and switching to it.
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with("snap-") && name != meta.snapshot {
                let _ = std::fs::remove_dir_all(entry.path());
            }
        }
    }
    Ok(SessionInner { learner, meta })
}

/// Shared service state: the corpus, the loop settings for new sessions and
/// the live sessions.
pub struct AppState {
    pub dataset: Arc<Dataset>,
    pub features: Arc<FeatureSet>,
    pub loop_config: LoopConfig,
    pub session_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    create_lock: Mutex<()>,
}

impl AppState {
    /// Builds the state and reopens every session found under `session_dir`.
    pub fn open(
        dataset: Arc<Dataset>,
        features: Arc<FeatureSet>,
        loop_config: LoopConfig,
        session_dir: PathBuf,
        ui_dir: Option<PathBuf>,
    ) -> al_core::Result<Self> {
        loop_config.validate(&dataset)?;
        std::fs::create_dir_all(&session_dir)?;
        let mut sessions = HashMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(&session_dir)?.flatten().collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let dir = entry.path();
            if !dir.join(SESSION_FILE).exists() {
                continue;
            }
            let inner = load_session(&dir, &dataset, &features)?;
            let session = make_session(dir, inner);
            sessions.insert(session.id.clone(), session);
        }
        if sessions.is_empty() && dataset.labels().iter().all(Option::is_none) {
            return Err(Error::EmptySeedSet);
        }
        Ok(Self {
            dataset,
            features,
            loop_config,
            session_dir,
            ui_dir,
            sessions: RwLock::new(sessions),
            create_lock: Mutex::new(()),
        })
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("sessions lock poisoned").get(id).cloned()
    }

    fn first_session(&self) -> Option<Arc<Session>> {
        let sessions = self.sessions.read().expect("sessions lock poisoned");
        sessions.values().min_by_key(|s| s.snapshot().status.created_at_ms).cloned()
    }

    /// Returns the live session, creating it from the corpus' labeled rows
    /// when there is none yet.
    pub async fn get_or_create(self: &Arc<Self>) -> Result<Arc<Session>, Error> {
        let _guard = self.create_lock.lock().await;
        if let Some(s) = self.first_session() {
            return Ok(s);
        }
        let state = self.clone();
        let session = tokio::task::spawn_blocking(move || state.create_session())
            .await
            .map_err(|e| Error::InvalidParameter(format!("session creation panicked: {e}")))??;
        self.sessions
            .write()
            .expect("sessions lock poisoned")
            .insert(session.id.clone(), session.clone());
        Ok(session)
    }

    fn create_session(&self) -> Result<Arc<Session>, Error> {
        let (seeds, labels): (Vec<usize>, Vec<LabelSet>) = self
            .dataset
            .labels()
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.clone().map(|l| (i, l)))
            .unzip();
        let learner = ActiveLearner::initialize(
            self.dataset.clone(),
            self.features.clone(),
            None,
            &seeds,
            &labels,
            self.loop_config.clone(),
        )?;
        let id = new_session_id(&self.dataset.fingerprint());
        let now = now_ms();
        let mut inner = SessionInner {
            learner,
            meta: SessionMeta {
                id: id.clone(),
                seq: 0,
                created_at_ms: now,
                updated_at_ms: now,
                snapshot: String::new(),
                snapshot_counter: 0,
            },
        };
        let dir = self.session_dir.join(&id);
        persist(&dir, &mut inner)?;
        Ok(make_session(dir, inner))
    }
}

fn make_session(dir: PathBuf, inner: SessionInner) -> Arc<Session> {
    let snapshot = RwLock::new(Arc::new(build_snapshot(&inner)));
    Arc::new(Session {
        id: inner.meta.id.clone(),
        dir,
        inner: Arc::new(Mutex::new(inner)),
        snapshot,
    })
}
