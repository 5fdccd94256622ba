use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::protocol::{
    CommandPayload, Done, Envelope, GraspMenu, Kind, LexiconUpdate, Outcome, PlanSummary, SdcResult, SelectPayload,
    Stage, StageError, StopAck,
};
use crate::config::Config;
use crate::controller::{classify, plan, ActionKind, CommandLevel, JointTrajectory, KinematicChain, TaskTarget};
use crate::deptree::{parse_command, DependencyTree};
use crate::grasp::{menu, plan_grasps, MenuEntry};
use crate::lexicon::{Lexicon, LexiconDelta, LexiconError};
use crate::sdc::{extract, Extracted, ExtractedWire, Sdc, TriggerAction};
use crate::sim::{self, synth_cloud, ExecutionTick, SimError, StopHandle, World};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("no grasp menu is pending")]
    NoPendingMenu,
    #[error("menu has {len} entries; {index} is out of range")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("empty command")]
    EmptyCommand,
    #[error("seq {seq} does not follow {last}")]
    SeqNotIncreasing { seq: u64, last: u64 },
    #[error("unexpected message kind {0}")]
    UnexpectedKind(String),
}

/// Server-wide state: the shared lexicon and the template every new
/// session's world is cloned from.
pub struct Hub {
    lexicon: RwLock<Lexicon>,
    lexicon_path: Option<PathBuf>,
    world: World,
    config: Config,
    live: Mutex<HashSet<String>>,
}

impl Hub {
    /// Applies the config's default-path override to the world's chain.
    pub fn new(mut world: World, lexicon: Lexicon, lexicon_path: Option<PathBuf>, config: Config) -> Arc<Self> {
        if let Some(d) = config.defaults {
            world.chain.defaults = d;
        }
        Arc::new(Self {
            lexicon: RwLock::new(lexicon),
            lexicon_path,
            world,
            config,
            live: Mutex::new(HashSet::new()),
        })
    }

    /// Shipped world and lexicon with default settings.
    pub fn shipped() -> Arc<Self> {
        Self::new(World::shipped(), Lexicon::shipped(), None, Config::default())
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.world.chain
    }

    pub fn lexicon(&self) -> RwLockReadGuard<'_, Lexicon> {
        self.lexicon.read().unwrap_or_else(|p| p.into_inner())
    }

    /// Adds a synonym under the write lock, saving the file when one is set.
    pub fn learn(&self, new_word: &str, target: &str) -> Result<(LexiconDelta, bool), LexiconError> {
        let mut lex = self.lexicon.write().unwrap_or_else(|p| p.into_inner());
        let delta = lex.learn(new_word, target)?;
        let saved = match &self.lexicon_path {
            Some(p) => {
                lex.save(p)?;
                true
            }
            None => false,
        };
        Ok((delta, saved))
    }

    /// Parse and extraction only; touches no session state.
    pub fn analyze(&self, text: &str) -> Result<(DependencyTree, Vec<Extracted>), StageError> {
        let lex = self.lexicon();
        let tree = parse_command(text, &lex).map_err(|e| StageError::new(Stage::Parse, &e))?;
        let extracted = extract(&tree, &lex).map_err(|e| StageError::new(Stage::Extract, &e))?;
        Ok((tree, extracted))
    }

    /// Whether `text` carries a Stop trigger.
    pub fn is_stop(&self, text: &str) -> bool {
        matches!(self.analyze(text), Ok((_, ex)) if ex.contains(&Extracted::Trigger(TriggerAction::Stop)))
    }

    pub fn open(self: &Arc<Self>, outbox: Arc<Outbox>) -> Session {
        let id = {
            let mut live = self.live.lock().unwrap_or_else(|p| p.into_inner());
            loop {
                let id = format!("{:016x}", rand::random::<u64>());
                if live.insert(id.clone()) {
                    break id;
                }
            }
        };
        outbox.bind(&id);
        Session {
            control: Control {
                id,
                stop: StopHandle::new(),
                outbox,
                hub: Arc::clone(self),
                last_in: Arc::new(Mutex::new(None)),
            },
            world: self.world.clone(),
            menu: None,
            continuation: None,
            history: Vec::new(),
            plans: 0,
        }
    }

    pub fn live_sessions(&self) -> usize {
        self.live.lock().map(|l| l.len()).unwrap_or(0)
    }

    fn close(&self, id: &str) {
        if let Ok(mut live) = self.live.lock() {
            live.remove(id);
        }
    }
}

type Sink = Box<dyn FnMut(&Envelope) + Send>;

/// Numbers and delivers one session's outgoing messages.
pub struct Outbox {
    inner: Mutex<(Option<String>, u64, Sink)>,
}

impl Outbox {
    pub fn new(sink: impl FnMut(&Envelope) + Send + 'static) -> Arc<Self> {
        Arc::new(Self {
            inner: Mutex::new((None, 0, Box::new(sink))),
        })
    }

    /// Collects messages into a shared vector.
    pub fn collecting() -> (Arc<Self>, Arc<Mutex<Vec<Envelope>>>) {
        let store = Arc::new(Mutex::new(Vec::new()));
        let s = Arc::clone(&store);
        (Self::new(move |e| s.lock().expect("store").push(e.clone())), store)
    }

    fn bind(&self, id: &str) {
        self.inner.lock().unwrap_or_else(|p| p.into_inner()).0 = Some(id.to_string());
    }

    pub fn send(&self, kind: Kind, payload: impl Serialize) {
        let mut g = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        g.1 += 1;
        let mut env = Envelope::new(kind, payload);
        env.session = g.0.clone();
        env.seq = g.1;
        (g.2)(&env);
    }

    pub fn error(&self, e: &StageError) {
        self.send(Kind::Error, e);
    }
}

/// The parts of a session a transport's reader thread may touch while the
/// session itself is busy.
#[derive(Clone)]
pub struct Control {
    id: String,
    stop: StopHandle,
    outbox: Arc<Outbox>,
    hub: Arc<Hub>,
    last_in: Arc<Mutex<Option<u64>>>,
}

impl Control {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Checks the envelope's session and sequence number.
    pub fn admit(&self, env: &Envelope) -> Result<(), StageError> {
        if let Some(s) = &env.session {
            if *s != self.id {
                return Err(StageError::new(
                    Stage::Session,
                    &SessionError::UnknownSession(s.clone()),
                ));
            }
        }
        let mut last = self.last_in.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(l) = *last {
            if env.seq <= l {
                return Err(StageError::new(
                    Stage::Protocol,
                    &SessionError::SeqNotIncreasing { seq: env.seq, last: l },
                ));
            }
        }
        *last = Some(env.seq);
        Ok(())
    }

    /// Handles what must not wait behind queued commands. Returns `true`
    /// when the message is fully consumed.
    pub fn intercept(&self, env: &Envelope) -> bool {
        match env.kind {
            Kind::Stop => {
                let interrupted = self.stop.stop();
                self.outbox.send(Kind::Stop, StopAck { interrupted });
                true
            }
            Kind::Command => {
                if let Ok(c) = env.payload_as::<CommandPayload>() {
                    if self.hub.is_stop(&c.text) {
                        self.stop.stop();
                    }
                }
                false
            }
            _ => false,
        }
    }

    pub fn stop_handle(&self) -> &StopHandle {
        &self.stop
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub text: String,
    pub extracted: Vec<ExtractedWire>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingMenu {
    pub object: String,
    pub entries: Vec<MenuEntry>,
}

/// Work left over when a pick-and-place was interrupted during the pick.
#[derive(Debug, Clone, PartialEq)]
struct PlaceAfter {
    object: String,
    bin: String,
}

/// One client's world, menu and history.
pub struct Session {
    control: Control,
    world: World,
    menu: Option<PendingMenu>,
    continuation: Option<PlaceAfter>,
    history: Vec<HistoryEntry>,
    plans: u64,
}

impl Drop for Session {
    fn drop(&mut self) {
        self.control.hub.close(&self.control.id);
    }
}

type Step<T> = Result<T, StageError>;

fn sim_stage(e: SimError) -> StageError {
    match e {
        SimError::Controller(c) => StageError::new(Stage::Plan, &c),
        other => StageError::new(Stage::Execute, &other),
    }
}

fn outcome_of(r: Result<Vec<ExecutionTick>, SimError>) -> Step<Outcome> {
    match r {
        Ok(_) => Ok(Outcome::Completed),
        Err(SimError::Interrupted) => Ok(Outcome::Interrupted),
        Err(e) => Err(sim_stage(e)),
    }
}

impl Session {
    pub fn id(&self) -> &str {
        &self.control.id
    }

    pub fn control(&self) -> Control {
        self.control.clone()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn pending_menu(&self) -> Option<&PendingMenu> {
        self.menu.as_ref()
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Sends the welcome message.
    pub fn welcome(&self) {
        self.control.outbox.send(
            Kind::Welcome,
            super::protocol::WelcomePayload {
                session: self.control.id.clone(),
            },
        );
    }

    /// Processes one admitted envelope and finishes with a `done` message.
    pub fn handle(&mut self, env: &Envelope) -> Outcome {
        let result = match env.kind {
            Kind::Command => env.payload_as::<CommandPayload>().and_then(|c| self.command(&c.text)),
            Kind::SelectGrasp => env.payload_as::<SelectPayload>().and_then(|s| self.select(s.index)),
            Kind::Stop => Ok(Outcome::Completed),
            other => Err(StageError::new(
                Stage::Protocol,
                &SessionError::UnexpectedKind(format!("{other:?}")),
            )),
        };
        let outcome = result.unwrap_or_else(|e| {
            self.control.outbox.error(&e);
            Outcome::Failed
        });
        self.control.outbox.send(
            Kind::Done,
            Done {
                reply_to: env.seq,
                outcome,
            },
        );
        outcome
    }

    /// Runs a text command through the whole pipeline.
    pub fn command(&mut self, text: &str) -> Step<Outcome> {
        let text = text.trim();
        if text.is_empty() {
            return Err(StageError::new(Stage::Session, &SessionError::EmptyCommand));
        }
        let hub = Arc::clone(&self.control.hub);
        let (tree, extracted) = match hub.analyze(text) {
            Ok(v) => v,
            Err(e) => {
                self.record(text, vec![], Outcome::Failed);
                return Err(e);
            }
        };
        let wires: Vec<ExtractedWire> = extracted.iter().map(ExtractedWire::from).collect();
        let defaults = self.world.chain.defaults;
        let levels = extracted
            .iter()
            .map(|e| e.as_sdc().and_then(|s| classify(s, &defaults).ok()).map(|l| l.kind()))
            .collect();
        self.control.outbox.send(
            Kind::SdcResult,
            SdcResult {
                text: text.to_string(),
                tree,
                extracted: wires.clone(),
                levels,
            },
        );
        let outcome = self.run_extracted(&hub, &extracted);
        self.record(text, wires, *outcome.as_ref().unwrap_or(&Outcome::Failed));
        outcome
    }

    fn record(&mut self, text: &str, extracted: Vec<ExtractedWire>, outcome: Outcome) {
        self.history.push(HistoryEntry {
            text: text.to_string(),
            extracted,
            outcome,
        });
    }

    fn run_extracted(&mut self, hub: &Hub, extracted: &[Extracted]) -> Step<Outcome> {
        let mut outcome = Outcome::Completed;
        for item in extracted {
            outcome = match item {
                Extracted::Trigger(TriggerAction::Stop) => {
                    // a running execution was already halted on arrival
                    self.control.stop.stop();
                    Outcome::Completed
                }
                Extracted::Trigger(TriggerAction::Split) => Outcome::Completed,
                Extracted::Trigger(TriggerAction::Learn { new_word, target }) => {
                    let (delta, saved) = hub
                        .learn(new_word, target)
                        .map_err(|e| StageError::new(Stage::Lexicon, &e))?;
                    self.control.outbox.send(
                        Kind::LexiconUpdate,
                        LexiconUpdate {
                            new_word: delta.synonym,
                            target: delta.high_level,
                            category: delta.category,
                            saved,
                        },
                    );
                    Outcome::Completed
                }
                Extracted::Sdc(sdc) => self.run_sdc(sdc)?,
            };
            if outcome != Outcome::Completed {
                break;
            }
        }
        Ok(outcome)
    }

    fn run_sdc(&mut self, sdc: &Sdc) -> Step<Outcome> {
        let level = classify(sdc, &self.world.chain.defaults).map_err(|e| StageError::new(Stage::Classify, &e))?;
        if !matches!(level, CommandLevel::Action(ActionKind::Start)) {
            self.continuation = None;
        }
        match &level {
            CommandLevel::Action(ActionKind::Stop) => {
                self.control.stop.stop();
                Ok(Outcome::Completed)
            }
            CommandLevel::Action(ActionKind::Recover) => {
                self.world.recover();
                Ok(Outcome::Completed)
            }
            CommandLevel::Action(ActionKind::Start) => self.resume(),
            CommandLevel::Task(TaskTarget::Object(name)) => self.present_menu(name),
            CommandLevel::Task(TaskTarget::GraspIndex(n)) => self.select(*n as usize),
            CommandLevel::Task(TaskTarget::PutIn(bin)) => {
                let bin = self.world.bin(bin).map_err(sim_stage)?.id.clone();
                self.place(&bin)
            }
            _ => {
                let view = self.world.view([]);
                let mut traj = plan(&self.world.chain, &self.world.robot, &level, &view)
                    .map_err(|e| StageError::new(Stage::Plan, &e))?;
                traj.origin = Some(sdc.clone());
                self.execute(&level, traj)
            }
        }
    }

    fn rate(&self) -> f64 {
        self.control.hub.config.tick_rate_hz
    }

    /// Streams each tick, sleeping to honour the playback speed.
    fn pacer(&self) -> impl FnMut(&ExecutionTick) + use<> {
        let outbox = Arc::clone(&self.control.outbox);
        let cfg = &self.control.hub.config;
        let pause =
            (cfg.playback_speed > 0.0).then(|| Duration::from_secs_f64(1.0 / (cfg.tick_rate_hz * cfg.playback_speed)));
        move |tick| {
            outbox.send(Kind::Tick, tick);
            if let Some(p) = pause {
                std::thread::sleep(p);
            }
        }
    }

    fn summarize(&self, level: &CommandLevel, traj: &JointTrajectory) {
        self.control.outbox.send(
            Kind::Plan,
            PlanSummary {
                level: level.kind(),
                detail: level.to_string(),
                samples: traj.len(),
                duration: traj.duration(),
                final_pose: traj.final_pose(&self.world.chain),
            },
        );
    }

    fn execute(&mut self, level: &CommandLevel, traj: JointTrajectory) -> Step<Outcome> {
        self.summarize(level, &traj);
        let rate = self.rate();
        let (stop, pace) = (self.control.stop.clone(), self.pacer());
        outcome_of(sim::run(&mut self.world, traj, rate, &stop, pace))
    }

    /// Plans grasps on the named object from the configured camera and
    /// presents them as the pending menu.
    fn present_menu(&mut self, name: &str) -> Step<Outcome> {
        let cfg = &self.control.hub.config;
        let obj = self
            .world
            .find_object(name)
            .ok_or_else(|| StageError::new(Stage::Grasp, &SimError::ObjectUnknown(name.to_string())))?;
        let (id, at) = (obj.id.clone(), obj.position());
        let seed = cfg.seed.wrapping_add(self.plans);
        self.plans += 1;
        let camera = cfg.camera.unwrap_or(self.world.camera);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = synth_cloud(&self.world, &camera, &mut rng).map_err(|e| StageError::new(Stage::Grasp, &e))?;
        let plan =
            plan_grasps(&cloud, Some([at.x, at.y]), &cfg.grasp, seed).map_err(|e| StageError::new(Stage::Grasp, &e))?;
        let entries = menu(&plan.menu);
        self.control.outbox.send(
            Kind::GraspMenu,
            GraspMenu {
                object: id.clone(),
                candidates: entries.clone(),
            },
        );
        self.menu = Some(PendingMenu { object: id, entries });
        Ok(Outcome::Menu)
    }

    /// Executes the `index`-th (1-based) entry of the pending menu: pick,
    /// then place into the first bin.
    pub fn select(&mut self, index: usize) -> Step<Outcome> {
        let pending = self
            .menu
            .as_ref()
            .ok_or_else(|| StageError::new(Stage::Select, &SessionError::NoPendingMenu))?;
        let len = pending.entries.len();
        if index == 0 || index > len {
            return Err(StageError::new(
                Stage::Select,
                &SessionError::IndexOutOfRange { index, len },
            ));
        }
        self.continuation = None;
        let pending = self.menu.take().expect("checked above");
        let grasp = pending.entries[index - 1].candidate();
        let object = pending.object;
        let name = self.world.object(&object).map_err(sim_stage)?.name.clone();
        let view = self.world.view([(name.clone(), grasp.pose())]);
        let traj = plan(
            &self.world.chain,
            &self.world.robot,
            &CommandLevel::Task(TaskTarget::Object(name)),
            &view,
        )
        .map_err(|e| StageError::new(Stage::Plan, &e))?;
        let bin = self.world.bins.first().map(|b| b.id.clone());
        let level = CommandLevel::Task(TaskTarget::GraspIndex(index as u32));
        match self.execute(&level, traj)? {
            Outcome::Completed => {}
            Outcome::Interrupted => {
                self.continuation = bin.map(|bin| PlaceAfter { object, bin });
                return Ok(Outcome::Interrupted);
            }
            other => return Ok(other),
        }
        sim::check_held(&self.world, &object).map_err(sim_stage)?;
        match bin {
            Some(bin) => self.place(&bin),
            None => Ok(Outcome::Completed),
        }
    }

    fn place(&mut self, bin: &str) -> Step<Outcome> {
        let name = self.world.bin(bin).map_err(sim_stage)?.name.clone();
        let level = CommandLevel::Task(TaskTarget::PutIn(name));
        let traj = plan(&self.world.chain, &self.world.robot, &level, &self.world.view([]))
            .map_err(|e| StageError::new(Stage::Plan, &e))?;
        self.execute(&level, traj)
    }

    /// Finishes an interrupted execution, then any place step it cut off.
    fn resume(&mut self) -> Step<Outcome> {
        let Some(rest) = self.world.take_resume() else {
            return Ok(Outcome::Completed);
        };
        let level = CommandLevel::Action(ActionKind::Start);
        let outcome = self.execute(&level, rest)?;
        if outcome != Outcome::Completed {
            return Ok(outcome);
        }
        match self.continuation.take() {
            Some(PlaceAfter { object, bin }) => {
                sim::check_held(&self.world, &object).map_err(sim_stage)?;
                self.place(&bin)
            }
            None => Ok(Outcome::Completed),
        }
    }
}
