//! Built-in adversary strategies.
//!
//! All strategies share one engine. Whenever the honest outbox contains a
//! gradecast phase of an `(instance, iteration)` for the first time, the
//! engine emits the corrupted nodes' messages for that same phase in the
//! same tick, which is as late as a rushing adversary can act. Plans for
//! the corrupted leaders are fixed when phase 1 is first seen; messages
//! about honest leaders follow a per-helper policy and are resolved from
//! the values the honest leaders actually sent.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{MultiSet, NodeId, SystemParams, Value, ValueKind};
use crate::simnet::{Adversary, AdversaryView, Envelope, Phase};

/// How a corrupted helper treats the gradecast of an honest leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HelperPolicy {
    Mimic,
    Silent,
    Contrarian,
}

type RecipientMap = BTreeMap<NodeId, Value>;

/// Messages of the corrupted nodes for one `(instance, iteration)`.
#[derive(Debug, Clone, Default)]
pub struct IterationPlan {
    /// Corrupted leader -> recipient -> value.
    pub send: BTreeMap<NodeId, RecipientMap>,
    /// (helper, corrupted leader) -> recipient -> echoed value.
    pub echo: BTreeMap<(NodeId, NodeId), RecipientMap>,
    /// (helper, corrupted leader) -> recipient -> supported value.
    pub support: BTreeMap<(NodeId, NodeId), RecipientMap>,
    /// Behaviour towards honest leaders; missing helpers mimic.
    pub honest_policy: BTreeMap<NodeId, HelperPolicy>,
}

impl IterationPlan {
    /// Corrupted leader `z` gradecasts `v` like an honest node would, with
    /// every helper in `helpers` echoing and supporting it.
    pub fn honest_like(&mut self, z: NodeId, v: &Value, helpers: &[NodeId], honest: &[NodeId]) {
        let all: RecipientMap = honest.iter().map(|&r| (r, v.clone())).collect();
        self.send.insert(z, all.clone());
        for &g in helpers {
            self.echo.insert((g, z), all.clone());
            self.support.insert((g, z), all.clone());
        }
    }

    /// Corrupted leader `z` gradecasts `x` so that exactly the honest nodes
    /// in `upper` grade it with confidence 1 and the rest with confidence
    /// 0. `clean` are the corrupted nodes no honest node ignores (must
    /// contain `z`).
    pub fn one_zero(
        &mut self,
        params: &SystemParams,
        z: NodeId,
        x: &Value,
        clean: &[NodeId],
        honest: &[NodeId],
        upper: &BTreeSet<NodeId>,
    ) {
        let c = clean.len();
        let u = (params.t + 1).saturating_sub(c);
        self.split(params, z, x, clean, honest, upper, u);
    }

    /// Like [`IterationPlan::one_zero`] but `upper` gets confidence 2 and
    /// everyone else confidence 1.
    #[allow(clippy::too_many_arguments)]
    pub fn two_one(
        &mut self,
        params: &SystemParams,
        z: NodeId,
        x: &Value,
        clean: &[NodeId],
        honest: &[NodeId],
        upper: &BTreeSet<NodeId>,
    ) {
        let c = clean.len();
        let u = (params.t + 1).max(params.quorum().saturating_sub(c));
        self.split(params, z, x, clean, honest, upper, u);
    }

    #[allow(clippy::too_many_arguments)]
    fn split(
        &mut self,
        params: &SystemParams,
        z: NodeId,
        x: &Value,
        clean: &[NodeId],
        honest: &[NodeId],
        upper: &BTreeSet<NodeId>,
        u: usize,
    ) {
        let c = clean.len();
        let s = params.quorum().saturating_sub(c).min(honest.len());
        let u = u.min(honest.len());
        let to = |set: &[NodeId]| -> RecipientMap { set.iter().map(|&r| (r, x.clone())).collect() };
        self.send.insert(z, to(&honest[..s]));
        let upper_list: Vec<NodeId> = honest.iter().copied().filter(|r| upper.contains(r)).collect();
        for &g in clean {
            self.echo.insert((g, z), to(&honest[..u]));
            self.support.insert((g, z), to(&upper_list));
        }
    }
}

/// Read-only helpers over the adversary's view for one iteration.
pub struct Ctx<'a, 'b> {
    pub view: &'a AdversaryView<'b>,
    pub instance: u32,
    pub iteration: u32,
    pub leader_values: &'a BTreeMap<(u32, u32, NodeId), Value>,
}

impl Ctx<'_, '_> {
    pub fn params(&self) -> SystemParams {
        self.view.params
    }

    pub fn honest(&self) -> Vec<NodeId> {
        self.view.honest().collect()
    }

    pub fn corrupted(&self) -> Vec<NodeId> {
        self.view.corrupted.iter().copied().collect()
    }

    /// Corrupted nodes that no honest node in this instance ignores.
    pub fn clean(&self) -> Vec<NodeId> {
        let mut ignored = BTreeSet::new();
        for s in self.view.snapshots {
            if s.instance == self.instance || s.instance == 0 {
                ignored.extend(s.bad.iter().copied());
            }
        }
        self.corrupted()
            .into_iter()
            .filter(|z| !ignored.contains(z))
            .collect()
    }

    /// Value each honest node gradecasts in this iteration, as far as it
    /// is known.
    pub fn honest_values(&self) -> BTreeMap<NodeId, Value> {
        let mut out = BTreeMap::new();
        for p in self.honest() {
            if let Some(v) = self.leader_values.get(&(self.instance, self.iteration, p)) {
                out.insert(p, v.clone());
            } else if let Some(s) = self
                .view
                .snapshots
                .iter()
                .find(|s| s.node == p && s.instance == self.instance && !s.terminated)
            {
                if let Some(v) = &s.value {
                    out.insert(p, v.clone());
                }
            }
        }
        out
    }

    pub fn kind(&self) -> ValueKind {
        self.honest_values()
            .values()
            .find_map(Value::kind)
            .unwrap_or(ValueKind::Discrete)
    }

    /// The value of the lowest-numbered honest node.
    pub fn mimic_value(&self) -> Option<Value> {
        self.honest_values().into_values().next()
    }
}

/// The part that differs between strategies.
pub trait Strategy {
    fn name(&self) -> String;
    fn seed(&self) -> Option<u64> {
        None
    }
    /// Plan for one iteration, built when its phase 1 is first seen.
    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan;
    /// Last chance to drop or alter the outgoing messages of a phase.
    /// `round` counts distinct phases seen so far, starting at 1.
    fn filter(&mut self, _round: u64, out: Vec<Envelope>, _params: &SystemParams) -> Vec<Envelope> {
        out
    }
    /// Extra messages sent every tick regardless of phase.
    fn on_tick(&mut self, _view: &AdversaryView<'_>) -> Vec<Envelope> {
        Vec::new()
    }
}

pub struct ScriptedAdversary<S: Strategy> {
    pub strategy: S,
    seen: BTreeSet<(u32, u32, Phase)>,
    plans: BTreeMap<(u32, u32), IterationPlan>,
    leader_values: BTreeMap<(u32, u32, NodeId), Value>,
    rounds: u64,
}

impl<S: Strategy> ScriptedAdversary<S> {
    pub fn new(strategy: S) -> Self {
        ScriptedAdversary {
            strategy,
            seen: BTreeSet::new(),
            plans: BTreeMap::new(),
            leader_values: BTreeMap::new(),
            rounds: 0,
        }
    }

    fn emit(&self, view: &AdversaryView<'_>, instance: u32, iteration: u32, phase: Phase) -> Vec<Envelope> {
        let Some(plan) = self.plans.get(&(instance, iteration)) else {
            return Vec::new();
        };
        let honest: Vec<NodeId> = view.honest().collect();
        let mut out = Vec::new();
        let mut push = |sender: NodeId, leader: NodeId, recipient: NodeId, v: &Value| {
            out.push(Envelope::gradecast(instance, iteration, leader, phase, sender, recipient, v.clone()));
        };
        match phase {
            Phase::Send => {
                for (&z, targets) in &plan.send {
                    for (&r, v) in targets {
                        push(z, z, r, v);
                    }
                }
            }
            Phase::Echo | Phase::Support => {
                let corrupt_msgs = if phase == Phase::Echo { &plan.echo } else { &plan.support };
                for (&(g, z), targets) in corrupt_msgs {
                    for (&r, v) in targets {
                        push(g, z, r, v);
                    }
                }
                for &g in view.corrupted {
                    let policy = plan.honest_policy.get(&g).copied().unwrap_or(HelperPolicy::Mimic);
                    for &leader in &honest {
                        let Some(v) = self.leader_values.get(&(instance, iteration, leader)) else {
                            continue;
                        };
                        let v = match policy {
                            HelperPolicy::Mimic => v.clone(),
                            HelperPolicy::Silent => continue,
                            HelperPolicy::Contrarian => contrary(v),
                        };
                        for &r in &honest {
                            push(g, leader, r, &v);
                        }
                    }
                }
            }
            Phase::Done => {}
        }
        out
    }
}

/// A value different from `v` of the same kind.
pub fn contrary(v: &Value) -> Value {
    match v {
        Value::Discrete(d) => Value::Discrete(if *d == 0 { 1 } else { d - 1 }),
        Value::Rational(q) => Value::Rational(q + BigRational::from_integer(1.into())),
        Value::Bottom => Value::Discrete(0),
    }
}

impl<S: Strategy> Adversary for ScriptedAdversary<S> {
    fn name(&self) -> String {
        self.strategy.name()
    }

    fn seed(&self) -> Option<u64> {
        self.strategy.seed()
    }

    fn act(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope> {
        let mut tags = BTreeSet::new();
        for e in view.honest_outbox {
            if e.phase == Phase::Send {
                if let Some(v) = &e.payload {
                    self.leader_values
                        .entry((e.instance, e.iteration, e.leader))
                        .or_insert_with(|| v.clone());
                }
            }
            if e.phase != Phase::Done && !self.seen.contains(&(e.instance, e.iteration, e.phase)) {
                tags.insert((e.instance, e.iteration, e.phase));
            }
        }
        let mut out = Vec::new();
        for (instance, iteration, phase) in tags {
            self.seen.insert((instance, iteration, phase));
            self.rounds += 1;
            if phase == Phase::Send {
                let ctx = Ctx {
                    view,
                    instance,
                    iteration,
                    leader_values: &self.leader_values,
                };
                let plan = self.strategy.plan(&ctx);
                self.plans.insert((instance, iteration), plan);
            }
            let msgs = self.emit(view, instance, iteration, phase);
            out.extend(self.strategy.filter(self.rounds, msgs, &view.params));
        }
        out.extend(self.strategy.on_tick(view));
        out
    }
}

fn honest_like_plan(ctx: &Ctx<'_, '_>) -> IterationPlan {
    let mut plan = IterationPlan::default();
    let Some(v) = ctx.mimic_value() else {
        return plan;
    };
    let corrupted = ctx.corrupted();
    let honest = ctx.honest();
    for &z in &corrupted {
        plan.honest_like(z, &v, &corrupted, &honest);
    }
    plan
}

/// Corrupted nodes behave honestly, gradecasting the value of the
/// lowest-numbered honest node.
#[derive(Debug, Clone, Default)]
pub struct Mimic;

impl Strategy for Mimic {
    fn name(&self) -> String {
        "mimic".into()
    }

    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan {
        honest_like_plan(ctx)
    }
}

/// Behaves honestly until protocol round `round`; in that round messages
/// reach only the nodes with index below `n / 2`; afterwards silent.
#[derive(Debug, Clone)]
pub struct CrashAt {
    pub round: u64,
}

impl Strategy for CrashAt {
    fn name(&self) -> String {
        format!("crash-at({})", self.round)
    }

    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan {
        honest_like_plan(ctx)
    }

    fn filter(&mut self, round: u64, out: Vec<Envelope>, params: &SystemParams) -> Vec<Envelope> {
        use std::cmp::Ordering::*;
        match round.cmp(&self.round) {
            Less => out,
            Equal => out.into_iter().filter(|e| e.recipient.0 < params.n / 2).collect(),
            Greater => Vec::new(),
        }
    }
}

/// In the first iteration of each instance every corrupted leader sends
/// one value to `targets` and another to everyone else, and the helpers
/// echo and support whatever each recipient was sent. Honest afterwards.
#[derive(Debug, Clone, Default)]
pub struct EquivocateOnce {
    pub targets: Option<BTreeSet<NodeId>>,
}

impl Strategy for EquivocateOnce {
    fn name(&self) -> String {
        "equivocate-once".into()
    }

    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan {
        if ctx.iteration != 1 {
            return honest_like_plan(ctx);
        }
        let honest = ctx.honest();
        let targets: BTreeSet<NodeId> = match &self.targets {
            Some(t) => t.clone(),
            None => honest.iter().copied().take(honest.len() / 2).collect(),
        };
        let values: Vec<Value> = ctx.honest_values().into_values().collect();
        let (Some(lo), Some(hi)) = (values.iter().min().cloned(), values.iter().max().cloned()) else {
            return IterationPlan::default();
        };
        let (a, b) = match (&lo, &hi) {
            (Value::Discrete(l), Value::Discrete(h)) if l == h => (lo.clone(), Value::Discrete(l + 1)),
            (Value::Rational(l), Value::Rational(h)) => {
                let one = BigRational::from_integer(1.into());
                let span = h - l;
                (Value::Rational(l - &span - &one), Value::Rational(h + &span + &one))
            }
            _ => (lo.clone(), hi.clone()),
        };
        let corrupted = ctx.corrupted();
        let mut plan = IterationPlan::default();
        let per_recipient: RecipientMap = honest
            .iter()
            .map(|r| (*r, if targets.contains(r) { a.clone() } else { b.clone() }))
            .collect();
        for &z in &corrupted {
            plan.send.insert(z, per_recipient.clone());
            for &g in &corrupted {
                plan.echo.insert((g, z), per_recipient.clone());
                plan.support.insert((g, z), per_recipient.clone());
            }
        }
        plan
    }
}

/// Spends the corrupted nodes' ability to lie one at a time: in each
/// iteration `per_iteration` clean nodes make their gradecast look valid
/// to about half of the honest nodes and invalid to the rest, while the
/// other clean nodes vote so that the lie tips the outcome.
#[derive(Debug, Clone)]
pub struct LieRationing {
    pub per_iteration: usize,
}

impl Default for LieRationing {
    fn default() -> Self {
        LieRationing { per_iteration: 1 }
    }
}

impl LieRationing {
    fn consensus_plan(&self, ctx: &Ctx<'_, '_>, clean: &[NodeId]) -> IterationPlan {
        let params = ctx.params();
        let honest = ctx.honest();
        let hv = ctx.honest_values();
        let counts: MultiSet = hv.values().cloned().collect();
        let mut ranked: Vec<(Value, usize)> = counts.entries().map(|(v, c)| (v.clone(), c)).collect();
        ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let mut plan = IterationPlan::default();
        if ranked.len() < 2 {
            // Nothing to split; stay clean for later.
            return honest_like_plan(ctx);
        }
        let (mut lo, mut hi) = (ranked[0].clone(), ranked[1].clone());
        if hi.0 < lo.0 {
            std::mem::swap(&mut lo, &mut hi);
        }
        let liars: Vec<NodeId> = clean.iter().copied().take(self.per_iteration.max(1)).collect();
        let helpers: Vec<NodeId> = clean.iter().copied().skip(liars.len()).collect();
        // Balance lo and hi among confidence-2 votes so that ties go to lo
        // and one extra hi vote tips the majority.
        let mut h_lo = 0usize;
        let mut h_hi = 0usize;
        let mut rest = helpers.clone();
        let mut assigned: Vec<(NodeId, Value)> = Vec::new();
        while let Some(g) = rest.first().copied() {
            let lo_total = lo.1 + h_lo;
            let hi_total = hi.1 + h_hi;
            if lo_total > hi_total {
                h_hi += 1;
                assigned.push((g, hi.0.clone()));
            } else if hi_total > lo_total {
                h_lo += 1;
                assigned.push((g, lo.0.clone()));
            } else if rest.len() >= 2 {
                h_lo += 1;
                h_hi += 1;
                assigned.push((g, lo.0.clone()));
                assigned.push((rest[1], hi.0.clone()));
                rest.remove(0);
            } else {
                break;
            }
            rest.remove(0);
        }
        for (g, v) in &assigned {
            plan.honest_like(*g, v, clean, &honest);
        }
        // Upper half: honest nodes already at hi first, then the rest.
        let mut order: Vec<NodeId> = honest.iter().copied().filter(|p| hv.get(p) == Some(&hi.0)).collect();
        order.extend(honest.iter().copied().filter(|p| hv.get(p) != Some(&hi.0)));
        let upper: BTreeSet<NodeId> = order.into_iter().take(honest.len().div_ceil(2)).collect();
        for &z in liars.iter().chain(rest.iter()) {
            plan.one_zero(&params, z, &hi.0, clean, &honest, &upper);
        }
        plan
    }

    fn approx_plan(&self, ctx: &Ctx<'_, '_>, clean: &[NodeId]) -> IterationPlan {
        let params = ctx.params();
        let honest = ctx.honest();
        let hv = ctx.honest_values();
        let (Some(lo), Some(hi)) = (hv.values().min().cloned(), hv.values().max().cloned()) else {
            return IterationPlan::default();
        };
        let mut plan = IterationPlan::default();
        let liars: Vec<NodeId> = clean.iter().copied().take(self.per_iteration.max(1)).collect();
        for (i, g) in clean.iter().skip(liars.len()).enumerate() {
            let v = if i % 2 == 0 { &lo } else { &hi };
            plan.honest_like(*g, v, clean, &honest);
        }
        if lo == hi {
            for &z in &liars {
                plan.honest_like(z, &lo, clean, &honest);
            }
            return plan;
        }
        let mut by_value: Vec<NodeId> = honest.clone();
        by_value.sort_by(|a, b| hv.get(b).cmp(&hv.get(a)).then(a.cmp(b)));
        let upper: BTreeSet<NodeId> = by_value.into_iter().take(honest.len().div_ceil(2)).collect();
        for &z in &liars {
            plan.one_zero(&params, z, &hi, clean, &honest, &upper);
        }
        plan
    }
}

impl Strategy for LieRationing {
    fn name(&self) -> String {
        "lie-rationing".into()
    }

    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan {
        let clean = ctx.clean();
        if clean.is_empty() {
            return IterationPlan::default();
        }
        match ctx.kind() {
            ValueKind::Discrete => self.consensus_plan(ctx, &clean),
            ValueKind::Rational => self.approx_plan(ctx, &clean),
        }
    }
}

/// Random per-recipient behaviour drawn from a seeded generator, mixed
/// with the structured splits and some malformed traffic.
#[derive(Debug, Clone)]
pub struct RandomSeeded {
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSeeded {
    pub fn new(seed: u64) -> Self {
        RandomSeeded {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn palette(&self, ctx: &Ctx<'_, '_>) -> Vec<Value> {
        let values: BTreeSet<Value> = ctx.honest_values().into_values().collect();
        let mut out: Vec<Value> = values.iter().cloned().collect();
        match ctx.kind() {
            ValueKind::Discrete => {
                for v in [0, 1] {
                    if !values.contains(&Value::Discrete(v)) {
                        out.push(Value::Discrete(v));
                    }
                }
            }
            ValueKind::Rational => {
                if let (Some(lo), Some(hi)) = (
                    values.iter().next().and_then(|v| v.as_rational().cloned()),
                    values.iter().next_back().and_then(|v| v.as_rational().cloned()),
                ) {
                    let one = BigRational::from_integer(1.into());
                    let two = BigRational::from_integer(2.into());
                    out.push(Value::Rational(&lo - &one));
                    out.push(Value::Rational(&hi + &one));
                    out.push(Value::Rational((&lo + &hi) / &two));
                }
            }
        }
        out
    }

    fn random_map(&mut self, honest: &[NodeId], palette: &[Value], silence: f64) -> RecipientMap {
        let mut m = RecipientMap::new();
        if palette.is_empty() {
            return m;
        }
        // Either one value for everyone or independent choices.
        let uniform = self.rng.gen_bool(0.5);
        let shared = palette.choose(&mut self.rng).cloned();
        for &r in honest {
            if self.rng.gen_bool(silence) {
                continue;
            }
            let v = if uniform {
                shared.clone()
            } else {
                palette.choose(&mut self.rng).cloned()
            };
            if let Some(v) = v {
                m.insert(r, v);
            }
        }
        m
    }
}

impl Strategy for RandomSeeded {
    fn name(&self) -> String {
        format!("random-seeded({})", self.seed)
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn plan(&mut self, ctx: &Ctx<'_, '_>) -> IterationPlan {
        let params = ctx.params();
        let honest = ctx.honest();
        let corrupted = ctx.corrupted();
        let clean = ctx.clean();
        let palette = self.palette(ctx);
        let mut plan = IterationPlan::default();
        for &g in &corrupted {
            let policy = match self.rng.gen_range(0..3) {
                0 => HelperPolicy::Mimic,
                1 => HelperPolicy::Silent,
                _ => HelperPolicy::Contrarian,
            };
            plan.honest_policy.insert(g, policy);
        }
        for &z in &corrupted {
            let choice = self.rng.gen_range(0..6);
            let x = palette.choose(&mut self.rng).cloned();
            let mut upper: Vec<NodeId> = honest.clone();
            upper.shuffle(&mut self.rng);
            let k = self.rng.gen_range(0..=honest.len());
            let upper: BTreeSet<NodeId> = upper.into_iter().take(k).collect();
            match (choice, x) {
                (0, Some(x)) if clean.contains(&z) => plan.one_zero(&params, z, &x, &clean, &honest, &upper),
                (1, Some(x)) if clean.contains(&z) => plan.two_one(&params, z, &x, &clean, &honest, &upper),
                (2, Some(x)) => plan.honest_like(z, &x, &corrupted, &honest),
                _ => {
                    let silence = self.rng.gen_range(0.0..0.6);
                    plan.send.insert(z, self.random_map(&honest, &palette, silence));
                    for &g in &corrupted {
                        let e = self.random_map(&honest, &palette, silence);
                        let s = self.random_map(&honest, &palette, silence);
                        plan.echo.insert((g, z), e);
                        plan.support.insert((g, z), s);
                    }
                }
            }
        }
        plan
    }

    fn on_tick(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope> {
        let mut out = Vec::new();
        if view.corrupted.is_empty() || !self.rng.gen_bool(0.3) {
            return out;
        }
        let corrupted: Vec<NodeId> = view.corrupted.iter().copied().collect();
        let honest: Vec<NodeId> = view.honest().collect();
        let Some(sample) = view.honest_outbox.choose(&mut self.rng).cloned() else {
            return out;
        };
        let sender = *corrupted.choose(&mut self.rng).expect("non-empty");
        let recipient = *honest.choose(&mut self.rng).expect("some honest node");
        let mut junk = Envelope {
            sender,
            recipient,
            ..sample.clone()
        };
        match self.rng.gen_range(0..6) {
            0 => junk.payload = Some(Value::Bottom),
            1 => {
                junk.payload = Some(match sample.payload {
                    Some(Value::Rational(_)) => Value::Discrete(1),
                    _ => Value::rational(1, 2),
                })
            }
            2 => junk.iteration += 1,
            3 => junk.iteration = junk.iteration.saturating_sub(1),
            4 => {
                junk = Envelope::done(sample.instance, sender, recipient);
            }
            _ => {
                junk.phase = Phase::Send;
                junk.payload = sample.payload.as_ref().map(contrary);
            }
        }
        out.push(junk);
        out
    }
}

/// Configuration-level identifier of a built-in strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AdversarySpec {
    Silent,
    Mimic,
    CrashAt { round: u64 },
    EquivocateOnce { targets: Option<Vec<NodeId>> },
    LieRationing { per_iteration: usize },
    RandomSeeded { seed: u64 },
}

impl AdversarySpec {
    /// Parses `name` with optional parameters and seed as found in a
    /// scenario file.
    pub fn from_parts(
        name: &str,
        params: &serde_json::Value,
        seed: Option<u64>,
    ) -> Result<AdversarySpec, String> {
        let get_u64 = |key: &str| params.get(key).and_then(serde_json::Value::as_u64);
        let spec = match name {
            "silent" | "Silent" => AdversarySpec::Silent,
            "mimic" | "Mimic" => AdversarySpec::Mimic,
            "crash-at" | "crash_at" | "CrashAt" => AdversarySpec::CrashAt {
                round: get_u64("round").unwrap_or(1),
            },
            "equivocate-once" | "equivocate_once" | "EquivocateOnce" => {
                let targets = match params.get("targets") {
                    None | Some(serde_json::Value::Null) => None,
                    Some(v) => Some(
                        serde_json::from_value::<Vec<NodeId>>(v.clone())
                            .map_err(|e| format!("bad targets: {e}"))?,
                    ),
                };
                AdversarySpec::EquivocateOnce { targets }
            }
            "lie-rationing" | "lie_rationing" | "LieRationing" => AdversarySpec::LieRationing {
                per_iteration: get_u64("per_iteration").unwrap_or(1) as usize,
            },
            "random-seeded" | "random_seeded" | "RandomSeeded" | "random" => AdversarySpec::RandomSeeded {
                seed: get_u64("seed").or(seed).unwrap_or(0),
            },
            other => return Err(format!("unknown adversary {other:?}")),
        };
        Ok(spec)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), String> {
        match self {
            AdversarySpec::CrashAt { round } if *round < 1 => Err("crash round must be >= 1".into()),
            AdversarySpec::EquivocateOnce { targets: Some(t) } if t.iter().any(|p| p.0 >= params.n) => {
                Err("equivocation target out of range".into())
            }
            AdversarySpec::LieRationing { per_iteration: 0 } => Err("per_iteration must be >= 1".into()),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AdversarySpec::Silent => "silent".into(),
            AdversarySpec::Mimic => "mimic".into(),
            AdversarySpec::CrashAt { round } => format!("crash-at({round})"),
            AdversarySpec::EquivocateOnce { .. } => "equivocate-once".into(),
            AdversarySpec::LieRationing { per_iteration } => format!("lie-rationing({per_iteration})"),
            AdversarySpec::RandomSeeded { seed } => format!("random-seeded({seed})"),
        }
    }

    pub fn build(&self) -> Box<dyn Adversary + Send> {
        match self {
            AdversarySpec::Silent => Box::new(crate::simnet::SilentAdversary),
            AdversarySpec::Mimic => Box::new(ScriptedAdversary::new(Mimic)),
            AdversarySpec::CrashAt { round } => Box::new(ScriptedAdversary::new(CrashAt { round: *round })),
            AdversarySpec::EquivocateOnce { targets } => Box::new(ScriptedAdversary::new(EquivocateOnce {
                targets: targets.as_ref().map(|t| t.iter().copied().collect()),
            })),
            AdversarySpec::LieRationing { per_iteration } => Box::new(ScriptedAdversary::new(LieRationing {
                per_iteration: *per_iteration,
            })),
            AdversarySpec::RandomSeeded { seed } => Box::new(ScriptedAdversary::new(RandomSeeded::new(*seed))),
        }
    }

    /// The four structured strategies plus one random one.
    pub fn builtins(seed: u64) -> Vec<AdversarySpec> {
        vec![
            AdversarySpec::Silent,
            AdversarySpec::CrashAt { round: 1 },
            AdversarySpec::EquivocateOnce { targets: None },
            AdversarySpec::LieRationing { per_iteration: 1 },
            AdversarySpec::RandomSeeded { seed },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradecast::GradecastNode;
    use crate::model::Confidence;
    use crate::simnet::{run_simulation, SimConfig};

    /// Runs a single gradecast led by corrupted node `z` with the given plan
    /// and returns each honest node's confidence.
    fn confidences(n: usize, t: usize, corrupted: &[usize], plan: IterationPlan) -> BTreeMap<NodeId, Confidence> {
        struct Fixed(IterationPlan);
        impl Adversary for Fixed {
            fn name(&self) -> String {
                "fixed".into()
            }
            fn act(&mut self, view: &AdversaryView<'_>) -> Vec<Envelope> {
                let phase = match view.tick {
                    0 => Phase::Send,
                    1 => Phase::Echo,
                    2 => Phase::Support,
                    _ => return Vec::new(),
                };
                let mut engine = ScriptedAdversary::new(Mimic);
                engine.plans.insert((1, 1), self.0.clone());
                engine.emit(view, 1, 1, phase)
            }
        }
        let params = SystemParams::new(n, t, corrupted.len()).unwrap();
        let corrupted: BTreeSet<NodeId> = corrupted.iter().map(|&i| NodeId(i)).collect();
        let leader = *corrupted.iter().next().unwrap();
        let cfg = SimConfig::new(params, corrupted.clone());
        let trace = run_simulation(
            &cfg,
            |p| GradecastNode::new(p, leader, n, t, BTreeSet::new(), None),
            &mut Fixed(plan),
        )
        .unwrap();
        let mut out = BTreeMap::new();
        for e in &trace.events {
            if let crate::simnet::NodeEvent::Graded { confidence, .. } = e.event {
                out.insert(e.node, Confidence::try_from(confidence).unwrap());
            }
        }
        out
    }

    #[test]
    fn one_zero_split_lands_as_designed() {
        for (n, t, f) in [(4, 1, 1), (7, 2, 1), (7, 2, 2), (13, 4, 3)] {
            let params = SystemParams::new(n, t, f).unwrap();
            let corrupted: Vec<usize> = (n - f..n).collect();
            let clean: Vec<NodeId> = corrupted.iter().map(|&i| NodeId(i)).collect();
            let honest: Vec<NodeId> = (0..n - f).map(NodeId).collect();
            let upper: BTreeSet<NodeId> = honest.iter().copied().take(honest.len() / 2).collect();
            let mut plan = IterationPlan::default();
            plan.one_zero(&params, clean[0], &Value::Discrete(1), &clean, &honest, &upper);
            let c = confidences(n, t, &corrupted, plan);
            for p in &honest {
                let want = if upper.contains(p) { Confidence::One } else { Confidence::Zero };
                assert_eq!(c[p], want, "n={n} t={t} f={f} node {p}");
            }

            let mut plan = IterationPlan::default();
            plan.two_one(&params, clean[0], &Value::Discrete(1), &clean, &honest, &upper);
            let c = confidences(n, t, &corrupted, plan);
            for p in &honest {
                let want = if upper.contains(p) { Confidence::Two } else { Confidence::One };
                assert_eq!(c[p], want, "two-one n={n} t={t} f={f} node {p}");
            }
        }
    }

    #[test]
    fn specs_parse_and_validate() {
        let p = SystemParams::new(7, 2, 2).unwrap();
        let s = AdversarySpec::from_parts("crash-at", &serde_json::json!({"round": 3}), None).unwrap();
        assert_eq!(s, AdversarySpec::CrashAt { round: 3 });
        let s = AdversarySpec::from_parts("random-seeded", &serde_json::json!({}), Some(9)).unwrap();
        assert_eq!(s, AdversarySpec::RandomSeeded { seed: 9 });
        assert!(AdversarySpec::from_parts("nope", &serde_json::json!({}), None).is_err());
        assert!(AdversarySpec::CrashAt { round: 0 }.validate(&p).is_err());
        assert!(AdversarySpec::EquivocateOnce {
            targets: Some(vec![NodeId(9)])
        }
        .validate(&p)
        .is_err());
    }
}
