use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use hrir_tcn_core::eval::{build_session, score_session, SessionResult, TrialPlan, TrialResponse};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::StimulusStore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub trials_per_condition: usize,
    /// Per-session response logs and results go below this directory.
    pub results_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            trials_per_condition: hrir_tcn_core::eval::TRIALS_PER_CONDITION,
            results_dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub subject_id: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub n_trials: usize,
    /// `None` once every trial is answered.
    pub next_trial_index: Option<usize>,
    pub done: bool,
    /// True when an unfinished session of the same subject was returned.
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInfo {
    pub trial_index: usize,
    pub audio_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseAck {
    pub accepted: bool,
    pub next_trial_index: Option<usize>,
    pub done: bool,
}

struct Session {
    id: String,
    plan: TrialPlan,
    tokens: Vec<String>,
    responses: Vec<Option<TrialResponse>>,
    result: Option<Arc<SessionResult>>,
    dir: Option<PathBuf>,
}

impl Session {
    fn next_trial(&self) -> Option<usize> {
        self.responses.iter().position(Option::is_none)
    }

    fn info(&self, resumed: bool) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            n_trials: self.plan.len(),
            next_trial_index: self.next_trial(),
            done: self.result.is_some(),
            resumed,
        }
    }
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, Arc<Mutex<Session>>>,
    /// Subject id to its unfinished session.
    active: HashMap<String, String>,
    /// Audio token to stimulus index.
    audio: HashMap<String, usize>,
}

/// All listening-test sessions of one service instance.
pub struct Sessions {
    store: Arc<StimulusStore>,
    config: ServiceConfig,
    registry: Mutex<Registry>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // state stays consistent across a panicking handler, so poison is ignored
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn opaque_token() -> String {
    format!("{:032x}", rand::thread_rng().gen::<u128>())
}

fn valid_subject_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Sessions {
    pub fn new(store: Arc<StimulusStore>, config: ServiceConfig) -> Result<Self> {
        if config.trials_per_condition == 0 {
            return Err(ServiceError::BadRequest("trials per condition must be at least 1".into()));
        }
        Ok(Self {
            store,
            config,
            registry: Mutex::new(Registry::default()),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        lock(&self.registry)
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))
    }

    /// Starts a session, or returns the subject's unfinished one.
    pub fn create(&self, req: &NewSession) -> Result<SessionInfo> {
        if !valid_subject_id(&req.subject_id) {
            return Err(ServiceError::BadRequest(
                "subject_id must be 1-64 characters of letters, digits, '-' or '_'".into(),
            ));
        }
        let mut reg = lock(&self.registry);
        if let Some(existing) = reg.active.get(&req.subject_id) {
            let s = reg.sessions[existing].clone();
            // responders lock a session before the registry, never after
            drop(reg);
            let info = lock(&s).info(true);
            return Ok(info);
        }
        let seed = req.seed.unwrap_or_else(|| rand::thread_rng().gen());
        let plan = build_session(
            &req.subject_id,
            self.store.stimuli(),
            self.config.trials_per_condition,
            seed,
        )?;
        let id = opaque_token();
        let tokens: Vec<String> = plan.trials.iter().map(|_| opaque_token()).collect();
        for (t, token) in plan.trials.iter().zip(&tokens) {
            let index = self.store.index_of(&t.stimulus_id).expect("plan built from the store");
            reg.audio.insert(token.clone(), index);
        }
        let dir = match &self.config.results_dir {
            Some(root) => {
                let dir = root.join(&req.subject_id).join(&id);
                fs::create_dir_all(&dir).map_err(|e| hrir_tcn_core::Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                let plan_path = dir.join("plan.json");
                fs::write(&plan_path, serde_json::to_vec_pretty(&plan).map_err(hrir_tcn_core::Error::from)?)
                    .map_err(|e| hrir_tcn_core::Error::Io {
                        path: plan_path,
                        source: e,
                    })?;
                Some(dir)
            }
            None => None,
        };
        let session = Session {
            id: id.clone(),
            responses: vec![None; plan.len()],
            plan,
            tokens,
            result: None,
            dir,
        };
        let info = session.info(false);
        log::info!("session {id} started for subject {}", req.subject_id);
        reg.sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        reg.active.insert(req.subject_id.clone(), id);
        Ok(info)
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo> {
        let s = self.session(id)?;
        let info = lock(&s).info(false);
        Ok(info)
    }

    pub fn trial(&self, id: &str, k: usize) -> Result<TrialInfo> {
        let s = self.session(id)?;
        let s = lock(&s);
        let token = s
            .tokens
            .get(k)
            .ok_or_else(|| ServiceError::NotFound(format!("session has {} trials, no trial {k}", s.plan.len())))?;
        Ok(TrialInfo {
            trial_index: k,
            audio_url: format!("/api/audio/{token}"),
        })
    }

    pub fn audio(&self, token: &str) -> Result<Bytes> {
        let index = lock(&self.registry).audio.get(token).copied();
        index
            .and_then(|i| self.store.wav(i))
            .ok_or_else(|| ServiceError::NotFound("unknown audio token".into()))
    }

    /// Records one response. The final response scores the session and
    /// releases the subject.
    pub fn respond(&self, id: &str, response: &TrialResponse) -> Result<ResponseAck> {
        response
            .validate()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let s = self.session(id)?;
        let mut s = lock(&s);
        if s.result.is_some() {
            return Err(ServiceError::Conflict("session is complete".into()));
        }
        let k = response.trial_index;
        match s.responses.get(k) {
            None => {
                return Err(ServiceError::Conflict(format!(
                    "session has {} trials, no trial {k}",
                    s.plan.len()
                )))
            }
            Some(Some(_)) => return Err(ServiceError::Conflict(format!("trial {k} is already answered"))),
            Some(None) => {}
        }
        if let Some(dir) = &s.dir {
            let path = dir.join("responses.jsonl");
            let line = serde_json::to_string(response).map_err(hrir_tcn_core::Error::from)? + "\n";
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .and_then(|mut f| f.write_all(line.as_bytes()).and_then(|_| f.sync_data()))
                .map_err(|e| hrir_tcn_core::Error::Io { path, source: e })?;
        }
        s.responses[k] = Some(*response);

        let next = s.next_trial();
        if next.is_none() {
            let responses: Vec<TrialResponse> = s.responses.iter().flatten().copied().collect();
            let result = score_session(&s.plan, &responses)?;
            if let Some(dir) = &s.dir {
                result.write_trials_csv(&dir.join("trials.csv"))?;
                result.write_json(&dir.join("summary.json"))?;
            }
            s.result = Some(Arc::new(result));
            lock(&self.registry).active.remove(&s.plan.subject_id);
            log::info!("session {id} complete");
        }
        Ok(ResponseAck {
            accepted: true,
            next_trial_index: next,
            done: next.is_none(),
        })
    }

    pub fn result(&self, id: &str) -> Result<Arc<SessionResult>> {
        let s = self.session(id)?;
        let result = lock(&s).result.clone();
        result.ok_or_else(|| ServiceError::Conflict("session is not complete".into()))
    }
}
