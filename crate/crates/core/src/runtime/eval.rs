//! The dataflow machine: cells, a FIFO worklist of bindings, per-call
//! controllers, timers for mock backends and an inbox for HTTP replies.

use std::any::Any;
use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::rc::Rc;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::lower::{CAtom, CBind, CProgram, Slot, Target};
use super::value::{Closure, Memory, Value};
use super::{Mode, RunOptions, RunOutcome, RunStats, Timing};
use crate::control::{Annotation, AnnotationPolicy, AnnotationTable, Controller, Gate, Phase, SeqToken, SignalArena};
use crate::error::RuntimeError;
use crate::library::{self, BackendSpec, RuntimeConfig};
use crate::trace::{EventPhase, Trace};

enum CellState {
    Pending(Vec<Waiter>),
    Ready(Value),
}

struct CellData(RefCell<CellState>);

type Cell = Rc<CellData>;

enum Waiter {
    Task(usize),
    Call(usize),
    Fold(usize),
    Forward(Cell),
}

fn ready(v: Value) -> Cell {
    Rc::new(CellData(RefCell::new(CellState::Ready(v))))
}

fn pending() -> Cell {
    Rc::new(CellData(RefCell::new(CellState::Pending(Vec::new()))))
}

fn value_of(c: &Cell) -> Option<Value> {
    match &*c.0.borrow() {
        CellState::Ready(v) => Some(v.clone()),
        CellState::Pending(_) => None,
    }
}

fn add_waiter(c: &Cell, w: Waiter) -> Result<(), Waiter> {
    match &mut *c.0.borrow_mut() {
        CellState::Pending(ws) => {
            ws.push(w);
            Ok(())
        }
        CellState::Ready(_) => Err(w),
    }
}

struct Frame {
    def: usize,
    slots: Vec<Cell>,
}

struct Task {
    frame: Rc<Frame>,
    bind: usize,
}

/// Interpreter payload of a function value.
struct FnBody {
    def: usize,
    env: Vec<Cell>,
}

enum Stage {
    WaitArgs,
    WaitGate,
    Held,
    InFlight,
    Done,
}

struct Call {
    id: u64,
    name: Rc<str>,
    policy: AnnotationPolicy,
    args: Vec<Cell>,
    result: Cell,
    ctrl: Controller,
    stage: Stage,
    backend: BackendSpec,
    queued_event: usize,
    values: Vec<Value>,
    rendered: Vec<String>,
    reply: Option<Result<Value, String>>,
}

/// A fold whose remaining iterations wait for the window to advance.
struct FoldRest {
    def: usize,
    env: Vec<Cell>,
    items: VecDeque<Value>,
    acc: Vec<Cell>,
    /// Results of the iterations instantiated but not yet known to be complete, oldest first.
    open: VecDeque<Vec<Cell>>,
    frame: Rc<Frame>,
    outs: Vec<Slot>,
}

enum Step {
    Done,
    Wait(Cell),
}

pub(crate) struct Machine<'a> {
    prog: &'a CProgram,
    table: AnnotationTable,
    config: &'a RuntimeConfig,
    opts: &'a RunOptions,
    sigs: SignalArena,
    tasks: Vec<Option<Task>>,
    free_tasks: Vec<usize>,
    live_tasks: usize,
    work: VecDeque<usize>,
    call_work: VecDeque<usize>,
    folds: Vec<Option<FoldRest>>,
    fold_work: VecDeque<usize>,
    calls: Vec<Call>,
    timers: BinaryHeap<Reverse<(Instant, usize)>>,
    held: VecDeque<usize>,
    in_flight: usize,
    http_in_flight: usize,
    tx: mpsc::Sender<(usize, Result<serde_json::Value, String>)>,
    rx: mpsc::Receiver<(usize, Result<serde_json::Value, String>)>,
    trace: Trace,
    output: Vec<String>,
    start: Instant,
    wait: Duration,
    next_frame: u64,
    frames: u64,
    loop_iterations: u64,
    fault: Option<RuntimeError>,
}

impl<'a> Machine<'a> {
    pub fn new(prog: &'a CProgram, table: AnnotationTable, config: &'a RuntimeConfig, opts: &'a RunOptions) -> Self {
        let (tx, rx) = mpsc::channel();
        Machine {
            prog,
            table,
            config,
            opts,
            sigs: SignalArena::default(),
            tasks: Vec::new(),
            free_tasks: Vec::new(),
            live_tasks: 0,
            work: VecDeque::new(),
            call_work: VecDeque::new(),
            folds: Vec::new(),
            fold_work: VecDeque::new(),
            calls: Vec::new(),
            timers: BinaryHeap::new(),
            held: VecDeque::new(),
            in_flight: 0,
            http_in_flight: 0,
            tx,
            rx,
            trace: Trace::default(),
            output: Vec::new(),
            start: Instant::now(),
            wait: Duration::ZERO,
            next_frame: 1,
            frames: 0,
            loop_iterations: 0,
            fault: None,
        }
    }

    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1000.0
    }

    pub fn run(mut self, entry: usize, args: Vec<Value>) -> RunOutcome {
        self.start = Instant::now();
        let result = self.run_entry(entry, args);
        let wall = self.start.elapsed();
        let value = match (result, self.fault.take()) {
            (_, Some(f)) => {
                self.release_all();
                Err(f)
            }
            (r, None) => r,
        };
        let wall_ms = wall.as_secs_f64() * 1000.0;
        let wait_ms = self.wait.as_secs_f64() * 1000.0;
        let stats = RunStats {
            queued: self.trace.count(EventPhase::Queued),
            dispatched: self.trace.count(EventPhase::Dispatched),
            resolved: self.trace.count(EventPhase::Resolved),
            signals_created: self.sigs.created(),
            signals_fulfilled: self.sigs.fulfilled(),
            double_fulfills: self.sigs.double_fulfills(),
            frames: self.frames,
        };
        RunOutcome {
            value,
            trace: std::mem::take(&mut self.trace),
            output: std::mem::take(&mut self.output),
            timing: Timing { wall_ms, interpreter_ms: (wall_ms - wait_ms).max(0.0), wait_ms },
            stats,
        }
    }

    fn run_entry(&mut self, entry: usize, args: Vec<Value>) -> Result<Value, RuntimeError> {
        let d = &self.prog.defs[entry];
        let threaded = d.threads_m as usize + d.threads_s as usize;
        if d.params.len() != threaded + args.len() {
            return Err(RuntimeError::fault(
                d.name.as_ref(),
                format!("TypeError: {}() takes {} positional arguments but {} were given", d.name, d.params.len() - threaded, args.len()),
            ));
        }
        let mut params = Vec::new();
        if d.threads_m {
            params.push(ready(Value::Memory(Memory::new())));
        }
        if d.threads_s {
            let s0 = SeqToken { index: 0, fr: self.sigs.create_fulfilled(), fw: self.sigs.create_fulfilled() };
            params.push(ready(Value::Seq(s0)));
        }
        params.extend(args.into_iter().map(ready));
        let frame = self.instantiate(entry, params, Vec::new())?;
        let rets = self.ret_cells(&frame);
        let result = rets.last().cloned().ok_or_else(|| RuntimeError::Deadlock("entry returns nothing".into()))?;

        loop {
            while self.fault.is_none() {
                if let Some(t) = self.work.pop_front() {
                    self.step(t);
                } else if let Some(c) = self.call_work.pop_front() {
                    self.advance(c);
                } else if let Some(f) = self.fold_work.pop_front() {
                    if let Err(e) = self.advance_fold(f) {
                        self.fault = Some(e);
                    }
                } else {
                    break;
                }
            }
            if self.fault.is_some() || self.in_flight == 0 {
                break;
            }
            self.await_event();
        }
        if let Some(f) = self.fault.take() {
            return Err(f);
        }
        let open_calls = self.calls.iter().filter(|c| !matches!(c.stage, Stage::Done)).count();
        let open_folds = self.folds.iter().filter(|f| f.is_some()).count();
        match value_of(&result) {
            Some(v) if open_calls == 0 && self.live_tasks == 0 && open_folds == 0 => Ok(v),
            _ => Err(RuntimeError::Deadlock(format!(
                "{} bindings blocked, {} folds stalled, {} external calls unresolved, nothing outstanding",
                self.live_tasks, open_folds, open_calls
            ))),
        }
    }

    fn release_all(&mut self) {
        for c in self.calls.iter_mut() {
            if !matches!(c.stage, Stage::Done) {
                c.ctrl.release(&mut self.sigs);
            }
        }
        self.sigs.drain_woken();
    }

    // ---- cells ----

    fn fulfill(&mut self, cell: &Cell, v: Value) {
        let mut stack = vec![(cell.clone(), v)];
        while let Some((c, v)) = stack.pop() {
            let prev = std::mem::replace(&mut *c.0.borrow_mut(), CellState::Ready(v.clone()));
            let waiters = match prev {
                CellState::Pending(ws) => ws,
                CellState::Ready(_) => {
                    self.fault = Some(RuntimeError::Deadlock("register assigned twice".into()));
                    return;
                }
            };
            for w in waiters {
                match w {
                    Waiter::Task(t) => self.work.push_back(t),
                    Waiter::Call(ci) => self.call_work.push_back(ci),
                    Waiter::Fold(fi) => self.fold_work.push_back(fi),
                    Waiter::Forward(next) => stack.push((next, v.clone())),
                }
            }
        }
    }

    fn link(&mut self, src: &Cell, dst: &Cell) {
        if let Err(Waiter::Forward(dst)) = add_waiter(src, Waiter::Forward(dst.clone())) {
            let v = value_of(src).expect("ready cell");
            self.fulfill(&dst, v);
        }
    }

    fn atom_cell(frame: &Frame, a: &CAtom) -> Cell {
        match a {
            CAtom::Slot(s) => frame.slots[*s].clone(),
            CAtom::Lit(v) => ready(v.clone()),
        }
    }

    // ---- frames ----

    fn instantiate(&mut self, def: usize, params: Vec<Cell>, env: Vec<Cell>) -> Result<Rc<Frame>, RuntimeError> {
        let d = &self.prog.defs[def];
        if d.is_loop {
            self.loop_iterations += 1;
            if self.loop_iterations > self.opts.max_loop_iterations {
                return Err(RuntimeError::fault(
                    "while",
                    format!("RecursionError: loop iteration limit of {} exceeded", self.opts.max_loop_iterations),
                ));
            }
        }
        if params.len() != d.params.len() || env.len() != d.captures.len() {
            return Err(RuntimeError::Deadlock(format!("arity mismatch instantiating `{}`", d.name)));
        }
        let mut slots: Vec<Cell> = (0..d.nslots).map(|_| pending()).collect();
        for (s, c) in d.params.iter().zip(params) {
            slots[*s] = c;
        }
        for (s, c) in d.captures.iter().zip(env) {
            slots[*s] = c;
        }
        let frame = Rc::new(Frame { def, slots });
        self.frames += 1;
        for i in 0..d.body.len() {
            let task = Task { frame: frame.clone(), bind: i };
            let tid = match self.free_tasks.pop() {
                Some(t) => {
                    self.tasks[t] = Some(task);
                    t
                }
                None => {
                    self.tasks.push(Some(task));
                    self.tasks.len() - 1
                }
            };
            self.live_tasks += 1;
            self.work.push_back(tid);
        }
        Ok(frame)
    }

    fn ret_cells(&self, frame: &Frame) -> Vec<Cell> {
        self.prog.defs[frame.def].ret.iter().map(|a| Self::atom_cell(frame, a)).collect()
    }

    fn enter(&mut self, target: &Target, frame: &Frame, params: Vec<Cell>, outs: &[Slot]) -> Result<(), RuntimeError> {
        let env = target.env.iter().map(|s| frame.slots[*s].clone()).collect();
        let callee = self.instantiate(target.def, params, env)?;
        let rets = self.ret_cells(&callee);
        self.link_outs(&rets, frame, outs)
    }

    fn link_outs(&mut self, rets: &[Cell], frame: &Frame, outs: &[Slot]) -> Result<(), RuntimeError> {
        if rets.len() != outs.len() {
            return Err(RuntimeError::Deadlock(format!("{} results bound to {} registers", rets.len(), outs.len())));
        }
        for (r, o) in rets.iter().zip(outs) {
            self.link(r, &frame.slots[*o]);
        }
        Ok(())
    }

    fn make_fn(&self, def: usize, env: Vec<Cell>) -> Value {
        let name = self.prog.defs[def].name.to_string();
        let body: Rc<dyn Any> = Rc::new(FnBody { def, env });
        Value::Closure(Rc::new(Closure { name, body }))
    }

    // ---- bindings ----

    fn step(&mut self, tid: usize) {
        let (frame, bind) = {
            let t = self.tasks[tid].as_ref().expect("live task");
            (t.frame.clone(), t.bind)
        };
        let prog = self.prog;
        let b = &prog.defs[frame.def].body[bind];
        match self.exec(&frame, b) {
            Ok(Step::Done) => {
                self.tasks[tid] = None;
                self.free_tasks.push(tid);
                self.live_tasks -= 1;
            }
            Ok(Step::Wait(cell)) => {
                if add_waiter(&cell, Waiter::Task(tid)).is_err() {
                    self.work.push_back(tid);
                }
            }
            Err(e) => {
                if self.fault.is_none() {
                    self.fault = Some(e);
                }
            }
        }
    }

    fn exec(&mut self, frame: &Rc<Frame>, b: &CBind) -> Result<Step, RuntimeError> {
        macro_rules! need {
            ($slot:expr) => {{
                let c = &frame.slots[$slot];
                match value_of(c) {
                    Some(v) => v,
                    None => return Ok(Step::Wait(c.clone())),
                }
            }};
        }
        match b {
            CBind::Const { dest, value } => self.fulfill(&frame.slots[*dest], value.clone()),
            CBind::Func { dest, def } => {
                let v = self.make_fn(*def, Vec::new());
                self.fulfill(&frame.slots[*dest], v);
            }
            CBind::Closure { dest, target } => {
                let env = target.env.iter().map(|s| frame.slots[*s].clone()).collect();
                let v = self.make_fn(target.def, env);
                self.fulfill(&frame.slots[*dest], v);
            }
            CBind::Frame { dest } => {
                let id = self.next_frame;
                self.next_frame += 1;
                self.fulfill(&frame.slots[*dest], Value::Frame(id));
            }
            CBind::Load { dest, mem, name, frame: fr } => {
                let m = need!(*mem);
                let fid = match fr {
                    Some(s) => frame_id(&need!(*s))?,
                    None => 0,
                };
                let Value::Memory(m) = m else { return Err(RuntimeError::Deadlock("load from a non-memory value".into())) };
                match m.get(&(name.clone(), fid)) {
                    Some(v) if !matches!(v, Value::Unbound) => {
                        let v = v.clone();
                        self.fulfill(&frame.slots[*dest], v);
                    }
                    _ => return Err(name_error(name)),
                }
            }
            CBind::Store { dest, mem, name, frame: fr, value } => {
                let m = need!(*mem);
                let fid = match fr {
                    Some(s) => frame_id(&need!(*s))?,
                    None => 0,
                };
                let v = match value {
                    CAtom::Slot(s) => need!(*s),
                    CAtom::Lit(v) => v.clone(),
                };
                let Value::Memory(m) = m else { return Err(RuntimeError::Deadlock("store to a non-memory value".into())) };
                self.fulfill(&frame.slots[*dest], Value::Memory(m.update((name.clone(), fid), v)));
            }
            CBind::CheckBound { dest, src, name } => {
                let v = need!(*src);
                if matches!(v, Value::Unbound) {
                    return Err(name_error(name));
                }
                self.fulfill(&frame.slots[*dest], v);
            }
            CBind::Ext { s_out, dest, name, s_in, args } => {
                let token = seq_token(&need!(*s_in))?;
                let args = args.iter().map(|a| Self::atom_cell(frame, a)).collect();
                self.queue_call(name.clone(), token, args, &frame.slots[*s_out], &frame.slots[*dest])?;
            }
            CBind::Apply { m_out, s_out, dest, callee, m_in, s_in, args } => {
                let f = need!(*callee);
                let arg_cells: Vec<Cell> = args.iter().map(|a| Self::atom_cell(frame, a)).collect();
                match &f {
                    Value::Closure(c) => {
                        let body = c.body.downcast_ref::<FnBody>().ok_or_else(|| RuntimeError::Deadlock("foreign closure".into()))?;
                        let d = &self.prog.defs[body.def];
                        let threaded = d.threads_m as usize + d.threads_s as usize;
                        if d.params.len() != threaded + arg_cells.len() {
                            return Err(RuntimeError::fault(
                                d.name.as_ref(),
                                format!(
                                    "TypeError: {}() takes {} positional arguments but {} were given",
                                    d.name,
                                    d.params.len() - threaded,
                                    arg_cells.len()
                                ),
                            ));
                        }
                        let (tm, ts) = (d.threads_m, d.threads_s);
                        let mut params = Vec::new();
                        if tm {
                            params.push(frame.slots[*m_in].clone());
                        }
                        if ts {
                            params.push(frame.slots[*s_in].clone());
                        }
                        params.extend(arg_cells);
                        let callee = self.instantiate(body.def, params, body.env.clone())?;
                        let rets = self.ret_cells(&callee);
                        let mut i = 0;
                        let m_src = if tm {
                            i += 1;
                            rets[0].clone()
                        } else {
                            frame.slots[*m_in].clone()
                        };
                        let s_src = if ts {
                            i += 1;
                            rets[i - 1].clone()
                        } else {
                            frame.slots[*s_in].clone()
                        };
                        self.link(&m_src, &frame.slots[*m_out]);
                        self.link(&s_src, &frame.slots[*s_out]);
                        self.link(&rets[i], &frame.slots[*dest]);
                    }
                    Value::Ext(e) => {
                        let token = seq_token(&need!(*s_in))?;
                        let mut all = Vec::new();
                        if let Some(b) = &e.bound {
                            all.push(ready(b.clone()));
                        }
                        all.extend(arg_cells);
                        self.link(&frame.slots[*m_in].clone(), &frame.slots[*m_out]);
                        self.queue_call(e.name.as_str().into(), token, all, &frame.slots[*s_out], &frame.slots[*dest])?;
                    }
                    other => {
                        return Err(RuntimeError::fault("apply", format!("TypeError: '{}' object is not callable", other.type_name())))
                    }
                }
            }
            CBind::Invoke { outs, target, args } => {
                let params = args.iter().map(|a| Self::atom_cell(frame, a)).collect();
                self.enter(target, frame, params, outs)?;
            }
            CBind::Ite { outs, cond, then, orelse } => {
                let c = need!(*cond);
                let t = if c.truthy() { then } else { orelse };
                self.enter(t, frame, Vec::new(), outs)?;
            }
            CBind::Fold { outs, list, init, body } => {
                let l = need!(*list);
                let items = library::iter_items(&l).map_err(|m| RuntimeError::fault("fold", m))?;
                let mut acc: Vec<Cell> = init.iter().map(|a| Self::atom_cell(frame, a)).collect();
                let env: Vec<Cell> = body.env.iter().map(|s| frame.slots[*s].clone()).collect();
                if self.opts.fold_window.is_some() {
                    self.folds.push(Some(FoldRest {
                        def: body.def,
                        env,
                        items: items.into(),
                        acc,
                        open: VecDeque::new(),
                        frame: frame.clone(),
                        outs: outs.clone(),
                    }));
                    self.advance_fold(self.folds.len() - 1)?;
                    return Ok(Step::Done);
                }
                for item in items {
                    let mut params = vec![ready(item)];
                    params.extend(acc);
                    let f = self.instantiate(body.def, params, env.clone())?;
                    acc = self.ret_cells(&f);
                }
                self.link_outs(&acc, frame, outs)?;
            }
        }
        Ok(Step::Done)
    }

    /// Instantiates iterations while fewer than the window are open; an
    /// iteration closes once all of its results are ready.
    fn advance_fold(&mut self, fi: usize) -> Result<(), RuntimeError> {
        let window = self.opts.fold_window.unwrap_or(usize::MAX).max(1);
        let mut f = self.folds[fi].take().expect("live fold");
        loop {
            if f.items.is_empty() {
                return self.link_outs(&f.acc, &f.frame, &f.outs);
            }
            if f.open.len() >= window {
                let blocked = f.open[0].iter().find(|c| value_of(c).is_none()).cloned();
                match blocked {
                    Some(c) => {
                        if add_waiter(&c, Waiter::Fold(fi)).is_ok() {
                            self.folds[fi] = Some(f);
                            return Ok(());
                        }
                    }
                    None => {
                        f.open.pop_front();
                    }
                }
                continue;
            }
            let item = f.items.pop_front().expect("non-empty");
            let mut params = vec![ready(item)];
            params.extend(std::mem::take(&mut f.acc));
            let frame = self.instantiate(f.def, params, f.env.clone())?;
            f.acc = self.ret_cells(&frame);
            f.open.push_back(f.acc.clone());
        }
    }

    // ---- external calls ----

    fn protocol(&self, a: Annotation) -> Annotation {
        match self.opts.mode {
            Mode::Oracle => Annotation::Sequential,
            Mode::Opportunistic => a,
        }
    }

    fn queue_call(&mut self, name: Rc<str>, s_in: SeqToken, args: Vec<Cell>, s_out_cell: &Cell, result: &Cell) -> Result<(), RuntimeError> {
        let backend = self.config.backend_for(&name).ok_or_else(|| RuntimeError::UnknownExternal(name.to_string()))?;
        let id = s_in.index + 1;
        let s_out = SeqToken { index: id, fr: self.sigs.create(), fw: self.sigs.create() };
        self.fulfill(s_out_cell, Value::Seq(s_out));
        let policy = self.table.policy(&name);
        let t = self.now_ms();
        let queued_event = self.trace.push(id, EventPhase::Queued, &name, None, Vec::new(), t);
        let mut ctrl = Controller::new(id, s_in, s_out);
        if let Some(a) = policy.is_static() {
            ctrl.set_annotation(a, self.protocol(a), &mut self.sigs);
            self.trace.events[queued_event].annotation = Some(a);
            self.wake_signals();
        }
        let ci = self.calls.len();
        self.calls.push(Call {
            id,
            name,
            policy,
            args,
            result: result.clone(),
            ctrl,
            stage: Stage::WaitArgs,
            backend,
            queued_event,
            values: Vec::new(),
            rendered: Vec::new(),
            reply: None,
        });
        self.advance(ci);
        Ok(())
    }

    fn wake_signals(&mut self) {
        for ci in self.sigs.drain_woken() {
            self.call_work.push_back(ci as usize);
        }
    }

    fn advance(&mut self, ci: usize) {
        if matches!(self.calls[ci].stage, Stage::WaitArgs) {
            for i in 0..self.calls[ci].args.len() {
                let cell = self.calls[ci].args[i].clone();
                if add_waiter(&cell, Waiter::Call(ci)).is_ok() {
                    return;
                }
            }
            let values: Vec<Value> = self.calls[ci].args.iter().map(|c| value_of(c).expect("ready")).collect();
            if self.calls[ci].ctrl.protocol.is_none() {
                let a = crate::control::apply_policy(self.calls[ci].policy, &values);
                let p = self.protocol(a);
                self.calls[ci].ctrl.set_annotation(a, p, &mut self.sigs);
                let ev = self.calls[ci].queued_event;
                self.trace.events[ev].annotation = Some(a);
                self.wake_signals();
            }
            let call = &mut self.calls[ci];
            call.rendered = values.iter().map(library::canonical_render).collect();
            call.values = values;
            call.args.clear();
            call.stage = Stage::WaitGate;
        }
        if matches!(self.calls[ci].stage, Stage::WaitGate) {
            match self.calls[ci].ctrl.dispatch_gate(&self.sigs) {
                Gate::Wait(sig) => {
                    self.sigs.wait(sig, ci as u64);
                    self.wake_signals();
                }
                Gate::Ready => self.dispatch(ci),
            }
        }
    }

    fn dispatch(&mut self, ci: usize) {
        let is_async = matches!(self.calls[ci].backend, BackendSpec::Mock { .. } | BackendSpec::Http { .. });
        if is_async && self.in_flight >= self.config.max_in_flight {
            if !matches!(self.calls[ci].stage, Stage::Held) {
                self.calls[ci].stage = Stage::Held;
                self.held.push_back(ci);
            }
            return;
        }
        let t = self.now_ms();
        let (id, name, ann, rendered, ev) = {
            let c = &mut self.calls[ci];
            c.ctrl.phase = Phase::Dispatched;
            c.stage = Stage::InFlight;
            (c.id, c.name.clone(), c.ctrl.annotation, c.rendered.clone(), c.queued_event)
        };
        self.trace.events[ev].args = rendered.clone();
        self.trace.push(id, EventPhase::Dispatched, &name, ann, rendered.clone(), t);
        let backend = self.calls[ci].backend.clone();
        match backend {
            BackendSpec::Builtin { op } => {
                let op = op.unwrap_or_else(|| name.to_string());
                let r = library::call_builtin(&op, &self.calls[ci].values, id);
                self.resolve(ci, r);
            }
            BackendSpec::Stdout => {
                let line = library::stdout_line(&self.calls[ci].values);
                if self.opts.echo_stdout {
                    library::write_stdout(&line);
                }
                self.output.push(line);
                self.resolve(ci, Ok(Value::None));
            }
            BackendSpec::File { mode, root } => {
                let r = library::file_call(mode, root.as_deref(), &self.calls[ci].values);
                self.resolve(ci, r);
            }
            BackendSpec::Mock { latency_ms, jitter, reply } => {
                let d = library::mock_latency(latency_ms, jitter, self.opts.seed, id);
                let r = library::mock_reply(&reply, &self.calls[ci].values, id);
                self.calls[ci].reply = Some(r);
                self.in_flight += 1;
                self.timers.push(Reverse((Instant::now() + d, ci)));
            }
            BackendSpec::Http { url, method, timeout_ms } => {
                self.in_flight += 1;
                self.http_in_flight += 1;
                let tx = self.tx.clone();
                std::thread::spawn(move || {
                    let r = library::http_call(&url, &method, timeout_ms, rendered);
                    let _ = tx.send((ci, r));
                });
            }
        }
    }

    fn resolve(&mut self, ci: usize, r: Result<Value, String>) {
        let v = match r {
            Ok(v) => v,
            Err(message) => {
                self.calls[ci].stage = Stage::Done;
                self.calls[ci].ctrl.release(&mut self.sigs);
                if self.fault.is_none() {
                    self.fault = Some(RuntimeError::Fault { name: self.calls[ci].name.to_string(), message });
                }
                return;
            }
        };
        let t = self.now_ms();
        let (id, name, ann, rendered) = {
            let c = &self.calls[ci];
            (c.id, c.name.clone(), c.ctrl.annotation, c.rendered.clone())
        };
        self.trace.push(id, EventPhase::Resolved, &name, ann, rendered, t);
        let c = &mut self.calls[ci];
        c.stage = Stage::Done;
        c.values.clear();
        c.ctrl.on_resolve(&mut self.sigs);
        let result = c.result.clone();
        self.wake_signals();
        self.fulfill(&result, v);
    }

    fn finish_async(&mut self, ci: usize, r: Result<Value, String>) {
        self.in_flight -= 1;
        self.resolve(ci, r);
        while self.in_flight < self.config.max_in_flight {
            match self.held.pop_front() {
                Some(h) => self.dispatch(h),
                None => break,
            }
        }
    }

    fn await_event(&mut self) {
        let t0 = Instant::now();
        let next_timer = self.timers.peek().map(|Reverse((at, _))| *at);
        if self.http_in_flight > 0 {
            let timeout = next_timer.map(|at| at.saturating_duration_since(t0)).unwrap_or(Duration::from_secs(3600));
            if let Ok(msg) = self.rx.recv_timeout(timeout) {
                self.wait += t0.elapsed();
                self.http_done(msg);
                return self.fire_timers();
            }
        } else if let Some(at) = next_timer {
            let d = at.saturating_duration_since(t0);
            if !d.is_zero() {
                std::thread::sleep(d);
            }
        }
        self.wait += t0.elapsed();
        self.fire_timers();
    }

    fn http_done(&mut self, (ci, r): (usize, Result<serde_json::Value, String>)) {
        self.http_in_flight -= 1;
        let id = self.calls[ci].id;
        let v = r.and_then(|j| library::value_from_json(&j, id));
        self.finish_async(ci, v);
        while let Ok(msg) = self.rx.try_recv() {
            self.http_in_flight -= 1;
            let (ci, r) = msg;
            let id = self.calls[ci].id;
            let v = r.and_then(|j| library::value_from_json(&j, id));
            self.finish_async(ci, v);
        }
    }

    fn fire_timers(&mut self) {
        let now = Instant::now();
        while let Some(Reverse((at, ci))) = self.timers.peek().copied() {
            if at > now {
                break;
            }
            self.timers.pop();
            let r = self.calls[ci].reply.take().unwrap_or(Ok(Value::None));
            self.finish_async(ci, r);
        }
    }
}

fn frame_id(v: &Value) -> Result<u64, RuntimeError> {
    match v {
        Value::Frame(id) => Ok(*id),
        _ => Err(RuntimeError::Deadlock("memory key without a frame".into())),
    }
}

fn seq_token(v: &Value) -> Result<SeqToken, RuntimeError> {
    match v {
        Value::Seq(t) => Ok(*t),
        _ => Err(RuntimeError::Deadlock("sequence register holds a non-token value".into())),
    }
}

fn name_error(name: &str) -> RuntimeError {
    RuntimeError::fault(name, format!("NameError: name '{name}' is not defined"))
}
