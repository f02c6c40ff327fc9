//! Shared server state: one command queue and one event channel per project.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tae_core::agents::{self, Agents, Suggestion, SuggestionStatus};
use tae_core::chat::{self, ChatSession};
use tae_core::llm::{Gateway, HttpBackend, LlmConfig, MockProvider, ProviderResponse};
use tae_core::meta::MetaRegistry;
use tae_core::persist::ProjectStore;
use tae_core::script::project_script;
use tae_core::{catalog, Error, ObjectId, Project, Result};
use tokio::sync::{broadcast, Mutex as AsyncMutex};

/// Events buffered per subscriber before the oldest are dropped.
pub const EVENT_BUFFER: usize = 1000;
pub const SUGGEST_DEBOUNCE: Duration = Duration::from_millis(500);

const OFFLINE_REPLY: &str =
    "No language model is configured, so I cannot plan edits. Set TAE_LLM_BASE_URL and restart the server.";

/// One entry of a project's event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: String,
    pub revision: u64,
    pub payload: Value,
}

/// Events produced by one queued command, sent once it finishes.
#[derive(Debug, Default)]
pub struct Outbox(Vec<(String, Value)>);

impl Outbox {
    pub fn push(&mut self, kind: &str, payload: Value) {
        self.0.push((kind.to_string(), payload));
    }

    fn suggestion(&mut self, s: &Suggestion, revision: u64) {
        self.push("suggestion", json!({ "suggestion": s, "project_revision": revision }));
    }
}

struct Slot {
    project: AsyncMutex<Project>,
    tx: broadcast::Sender<Event>,
    next_seq: AtomicU64,
    /// Latest scheduled suggestion run per clip, for debouncing.
    lint_gen: Mutex<HashMap<ObjectId, u64>>,
}

impl Slot {
    fn new(p: Project) -> Arc<Self> {
        let (tx, _) = broadcast::channel(EVENT_BUFFER);
        Arc::new(Self {
            project: AsyncMutex::new(p),
            tx,
            next_seq: AtomicU64::new(1),
            lint_gen: Mutex::default(),
        })
    }
}

pub struct Shared {
    pub store: ProjectStore,
    pub reg: MetaRegistry,
    /// Inline agents (suggestions, placement).
    pub agents: Agents,
    /// Planner behind chat sessions.
    pub chat: Gateway,
    pub debounce: Duration,
    slots: Mutex<HashMap<ObjectId, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl std::ops::Deref for AppState {
    type Target = Shared;

    fn deref(&self) -> &Shared {
        &self.0
    }
}

fn join_error(e: tokio::task::JoinError) -> Error {
    Error::Io(format!("background task failed: {e}"))
}

impl AppState {
    pub fn new(store: ProjectStore, agents: Agents, chat: Gateway) -> Self {
        Self(Arc::new(Shared {
            store,
            reg: catalog::builtin_registry(),
            agents,
            chat,
            debounce: SUGGEST_DEBOUNCE,
            slots: Mutex::default(),
        }))
    }

    pub fn with_debounce(mut self, d: Duration) -> Self {
        Arc::get_mut(&mut self.0).expect("configure state before sharing it").debounce = d;
        self
    }

    /// Offline (or unconfigured) servers run rule-mode agents and a chat
    /// planner that only explains it is not available.
    pub fn from_config(data_dir: &Path, cfg: &LlmConfig) -> Result<Self> {
        let store = ProjectStore::open(data_dir)?;
        match HttpBackend::from_config(cfg).filter(|_| cfg.online()) {
            Some(http) => {
                let gw = Gateway::new(Arc::new(http));
                Ok(Self::new(store, Agents::llm(gw.clone()), gw))
            }
            None => {
                let mock = MockProvider::default()
                    .with_fallback(ProviderResponse::AssistantText { text: OFFLINE_REPLY.into() });
                Ok(Self::new(store, Agents::rule(), Gateway::new(Arc::new(mock))))
            }
        }
    }

    fn slot(&self, pid: &str) -> Result<Arc<Slot>> {
        let id: ObjectId = pid.parse().map_err(|_| Error::UnknownProject(pid.to_string()))?;
        let mut slots = self.slots.lock().expect("slot map");
        if let Some(s) = slots.get(&id) {
            return Ok(s.clone());
        }
        let p = self.store.load(&id)?;
        let s = Slot::new(p);
        slots.insert(id, s.clone());
        Ok(s)
    }

    pub fn create(&self, p: Project) -> Result<()> {
        self.store.save(&p)?;
        self.slots.lock().expect("slot map").insert(p.id.clone(), Slot::new(p));
        Ok(())
    }

    pub fn exists(&self, id: &ObjectId) -> bool {
        self.slots.lock().expect("slot map").contains_key(id) || self.store.path(id).exists()
    }

    /// Drop a project; open event streams end.
    pub async fn delete(&self, pid: &str) -> Result<()> {
        let slot = self.slot(pid)?;
        let p = slot.project.lock().await;
        self.store.delete(&p.id)?;
        self.slots.lock().expect("slot map").remove(&p.id);
        Ok(())
    }

    pub fn subscribe(&self, pid: &str) -> Result<broadcast::Receiver<Event>> {
        Ok(self.slot(pid)?.tx.subscribe())
    }

    pub async fn read<T>(&self, pid: &str, f: impl FnOnce(&Project) -> Result<T>) -> Result<T> {
        let slot = self.slot(pid)?;
        let p = slot.project.lock().await;
        f(&p)
    }

    /// Run one command on the project's queue, then invalidate suggestions,
    /// persist and publish. The project is saved even when `f` fails, since a
    /// failed tool call still leaves an operation-log entry.
    pub async fn write<T>(&self, pid: &str, f: impl FnOnce(&mut Project, &mut Outbox) -> Result<T>) -> Result<T> {
        let slot = self.slot(pid)?;
        let mut p = slot.project.lock().await;
        let before = p.revision;
        let mut out = Outbox::default();
        let result = f(&mut p, &mut out);
        for id in agents::mark_stale(&mut p) {
            out.suggestion(&p.suggestions[&id], p.revision);
        }
        if p.revision != before {
            let script = project_script(&p, &p.script_selection()).ok();
            out.push("revision", json!({ "revision": p.revision, "script": script }));
        }
        self.store.save(&p)?;
        for (kind, payload) in out.0 {
            let seq = slot.next_seq.fetch_add(1, Ordering::SeqCst);
            // no subscribers is fine
            let _ = slot.tx.send(Event { seq, kind, revision: p.revision, payload });
        }
        result
    }

    /// A write on behalf of a chat session; publishes the session's new
    /// events in order.
    pub async fn chat_op<T>(&self, pid: &str, sid: &ObjectId, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
        self.write(pid, |p, out| {
            let last = chat::session(p, sid)?.events.last().map_or(0, |e| e.seq);
            let r = f(p);
            if let Ok(s) = chat::session(p, sid) {
                for e in s.events_since(last) {
                    out.push("chat", json!({ "session_id": sid, "event": e }));
                }
            }
            r
        })
        .await
    }

    /// Plan until the session needs the user or stops. The project queue is
    /// released while the model is thinking.
    pub async fn run_chat(&self, pid: &str, sid: &ObjectId) -> Result<ChatSession> {
        loop {
            let Some(req) = self.read(pid, |p| chat::prepare_plan(&self.reg, p, sid)).await? else {
                break;
            };
            let st = self.clone();
            let resp = tokio::task::spawn_blocking(move || st.chat.complete(&st.reg, &req))
                .await
                .map_err(join_error)?;
            self.chat_op(pid, sid, |p| chat::apply_plan(&self.reg, p, sid, resp)).await?;
        }
        self.read(pid, |p| chat::session(p, sid).cloned()).await
    }

    /// Recompute suggestions for `clip` on a snapshot, then publish them if
    /// the clip has not changed meanwhile.
    pub async fn refresh_suggestions(&self, pid: &str, clip: &ObjectId) -> Result<Vec<Suggestion>> {
        let snap = self
            .read(pid, |p| {
                p.clip(clip)?;
                Ok(p.clone())
            })
            .await?;
        let st = self.clone();
        let c = clip.clone();
        let computed = tokio::task::spawn_blocking(move || -> Result<Project> {
            let mut snap = snap;
            let text = agents::suggest_text_revisions(&st.agents, &st.reg, &mut snap, &c);
            let anim = agents::recommend_animation(&st.agents, &st.reg, &mut snap, &c);
            match (text, anim) {
                (Err(e), Err(_)) => Err(e),
                _ => Ok(snap),
            }
        })
        .await
        .map_err(join_error)??;
        self.write(pid, |p, out| {
            if p.clips.get(clip) != computed.clips.get(clip) {
                return Ok(Vec::new());
            }
            let fresh: Vec<Suggestion> = computed
                .suggestions
                .values()
                .filter(|s| &s.target.clip_id == clip && s.status == SuggestionStatus::Pending)
                .filter(|s| !p.suggestions.contains_key(&s.id))
                .cloned()
                .collect();
            let replaced: Vec<ObjectId> = p
                .suggestions
                .values()
                .filter(|s| &s.target.clip_id == clip && s.status == SuggestionStatus::Pending)
                .filter(|s| !computed.suggestions.contains_key(&s.id))
                .map(|s| s.id.clone())
                .collect();
            for id in &replaced {
                p.suggestions.remove(id);
                out.push("suggestion_removed", json!({ "id": id, "clip_id": clip }));
            }
            for s in &fresh {
                p.suggestions.insert(s.id.clone(), s.clone());
                out.suggestion(s, p.revision);
            }
            Ok(fresh)
        })
        .await
    }

    /// Recompute suggestions for `clips` once they have been quiet for the
    /// debounce interval.
    pub fn schedule_suggestions(&self, pid: &str, clips: Vec<ObjectId>) {
        let Ok(slot) = self.slot(pid) else { return };
        for clip in clips {
            let gen = {
                let mut gens = slot.lint_gen.lock().expect("lint map");
                let g = gens.entry(clip.clone()).or_insert(0);
                *g += 1;
                *g
            };
            let st = self.clone();
            let slot = slot.clone();
            let pid = pid.to_string();
            tokio::spawn(async move {
                tokio::time::sleep(st.debounce).await;
                if slot.lint_gen.lock().expect("lint map").get(&clip) != Some(&gen) {
                    return;
                }
                match st.refresh_suggestions(&pid, &clip).await {
                    Ok(_) | Err(Error::UnknownClip(_)) | Err(Error::NotTextClip(_)) | Err(Error::UnknownProject(_)) => {}
                    Err(e) => tracing::warn!(clip = %clip, error = %e, "suggestion refresh failed"),
                }
            });
        }
    }
}
