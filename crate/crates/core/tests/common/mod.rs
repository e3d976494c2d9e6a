//! Independent oracles shared by the property suites and the acceptance gate.
//! Each `check_*` function runs one randomized case against the simulator
//! and a naive model, and reports the first disagreement.
#![allow(dead_code, clippy::result_large_err)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use reguard_core::engine::{
    execute_transaction, CallKind, Calldata, Contract, Env, Revert, RevertCause, TopLevelCall, DEFAULT_TX_GAS_LIMIT,
};
use reguard_core::guards::{probe_address, GuardBinding, GuardKey, Guarded, Keying, MutexWord, ProbeConfig};
use reguard_core::types::mapping_slot;
use reguard_core::world::AccessKind;
use reguard_core::{Address, BlockContext, ChainProfile, GasSchedule, TraceEvent, Word, World};

type Body = dyn Fn(&mut Env<'_>, &Calldata) -> Result<Vec<Word>, Revert> + Send + Sync;

/// Contract whose behavior is a closure; entering it is free.
pub struct FnContract(Box<Body>);

impl FnContract {
    pub fn new(
        body: impl Fn(&mut Env<'_>, &Calldata) -> Result<Vec<Word>, Revert> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(FnContract(Box::new(body)))
    }
}

impl Contract for FnContract {
    fn kind(&self) -> &str {
        "fn"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        0
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        (self.0)(env, input)
    }
}

pub fn eth_world() -> World {
    World::new(ChainProfile::ethereum(), BlockContext::default())
}

fn label(prefix: &str, i: u8) -> Address {
    Address::from_label(&format!("{prefix}{i}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

// ---- snapshots vs. deep copies ---------------------------------------------

const ACCOUNTS: u8 = 4;
const SLOTS: u8 = 4;

#[derive(Debug, Clone)]
pub enum StateOp {
    Store { acct: u8, slot: u8, value: u16 },
    Mint { acct: u8, amount: u16 },
    Transfer { from: u8, to: u8, amount: u16 },
    Touch { acct: u8 },
    TouchSlot { acct: u8, slot: u8 },
    Snapshot,
    Revert { pick: u8 },
    Commit { pick: u8 },
}

pub fn state_op() -> impl Strategy<Value = StateOp> {
    prop_oneof![
        3 => (0..ACCOUNTS, 0..SLOTS, any::<u16>()).prop_map(|(acct, slot, value)| StateOp::Store { acct, slot, value }),
        2 => (0..ACCOUNTS, any::<u16>()).prop_map(|(acct, amount)| StateOp::Mint { acct, amount }),
        2 => (0..ACCOUNTS, 0..ACCOUNTS, any::<u16>()).prop_map(|(from, to, amount)| StateOp::Transfer { from, to, amount }),
        2 => (0..ACCOUNTS).prop_map(|acct| StateOp::Touch { acct }),
        1 => (0..ACCOUNTS, 0..SLOTS).prop_map(|(acct, slot)| StateOp::TouchSlot { acct, slot }),
        2 => Just(StateOp::Snapshot),
        2 => any::<u8>().prop_map(|pick| StateOp::Revert { pick }),
        1 => any::<u8>().prop_map(|pick| StateOp::Commit { pick }),
    ]
}

pub fn state_ops() -> impl Strategy<Value = Vec<StateOp>> {
    prop::collection::vec(state_op(), 1..60)
}

/// Plain-map model of the observable state.
#[derive(Debug, Clone, Default, PartialEq)]
struct StateModel {
    balances: BTreeMap<u8, u64>,
    storage: BTreeMap<(u8, u8), u16>,
    warm: BTreeSet<u8>,
    warm_slots: BTreeSet<(u8, u8)>,
}

fn slot_word(s: u8) -> Word {
    Word::from(s as u64 + 1)
}

fn compare_model(w: &World, m: &StateModel) -> Result<(), TestCaseError> {
    for a in 0..ACCOUNTS {
        let addr = label("acct", a);
        let want = m.balances.get(&a).copied().unwrap_or(0);
        ensure(w.balance(addr) == Word::from(want), || format!("balance of {a}: {} vs {want}", w.balance(addr)))?;
        ensure(w.is_warm(addr) == m.warm.contains(&a), || format!("warmth of {a}"))?;
        for s in 0..SLOTS {
            let want = m.storage.get(&(a, s)).copied().unwrap_or(0);
            ensure(w.storage(addr, slot_word(s)) == Word::from(want), || format!("slot {a}/{s}"))?;
        }
    }
    Ok(())
}

/// Applies `ops` inside one transaction. After every revert the world's
/// canonical serialization must equal a deep copy taken at snapshot time, and
/// every read must match the naive model.
pub fn check_snapshots(ops: &[StateOp]) -> Result<(), TestCaseError> {
    let mut w = eth_world();
    let origin = Address::from_label("origin");
    w.begin_transaction(origin, DEFAULT_TX_GAS_LIMIT).unwrap();
    let mut m = StateModel::default();
    let mut live: Vec<(reguard_core::world::Snapshot, World, StateModel)> = Vec::new();
    let total = |w: &World| -> u64 { (0..ACCOUNTS).map(|a| w.balance(label("acct", a)).to::<u64>()).sum() };

    for op in ops {
        match *op {
            StateOp::Store { acct, slot, value } => {
                w.set_storage(label("acct", acct), slot_word(slot), Word::from(value));
                if value == 0 {
                    m.storage.remove(&(acct, slot));
                } else {
                    m.storage.insert((acct, slot), value);
                }
            }
            StateOp::Mint { acct, amount } => {
                w.mint_native(label("acct", acct), Word::from(amount));
                *m.balances.entry(acct).or_default() += amount as u64;
            }
            StateOp::Transfer { from, to, amount } => {
                let before = total(&w);
                let have = m.balances.get(&from).copied().unwrap_or(0);
                let r = w.transfer_native(label("acct", from), label("acct", to), Word::from(amount));
                ensure(r.is_ok() == (have >= amount as u64), || format!("transfer outcome {r:?} with {have}"))?;
                if r.is_ok() {
                    *m.balances.entry(from).or_default() -= amount as u64;
                    *m.balances.entry(to).or_default() += amount as u64;
                }
                ensure(total(&w) == before, || "transfer changed total balance".into())?;
            }
            StateOp::Touch { acct } => {
                let kind = w.touch_account(label("acct", acct)).unwrap();
                let fresh = m.warm.insert(acct);
                ensure((kind == AccessKind::Cold) == fresh, || format!("touch {acct} gave {kind:?}"))?;
            }
            StateOp::TouchSlot { acct, slot } => {
                let kind = w.touch_slot(label("acct", acct), slot_word(slot)).unwrap();
                let fresh = m.warm_slots.insert((acct, slot));
                ensure((kind == AccessKind::Cold) == fresh, || format!("touch slot gave {kind:?}"))?;
            }
            StateOp::Snapshot => {
                let s = w.snapshot();
                live.push((s, w.clone(), m.clone()));
            }
            StateOp::Revert { pick } => {
                if live.is_empty() {
                    continue;
                }
                let i = pick as usize % live.len();
                let (s, copy, model) = live[i].clone();
                w.revert_to(s).map_err(|e| TestCaseError::fail(e.to_string()))?;
                ensure(w.state_bytes() == copy.state_bytes(), || "state differs from the deep copy".into())?;
                m = model;
                live.truncate(i);
                ensure(w.revert_to(s).is_err(), || "reverted snapshot still valid".into())?;
            }
            StateOp::Commit { pick } => {
                if live.is_empty() {
                    continue;
                }
                let i = pick as usize % live.len();
                w.commit(live[i].0).map_err(|e| TestCaseError::fail(e.to_string()))?;
                live.truncate(i);
            }
        }
        compare_model(&w, &m)?;
    }
    if let Some((s, copy, _)) = live.first().cloned() {
        w.revert_to(s).unwrap();
        ensure(w.state_bytes() == copy.state_bytes(), || "outermost revert differs from deep copy".into())?;
    }
    Ok(())
}

// ---- probe guard vs. explicit counter ----------------------------------------

#[derive(Debug, Clone)]
pub struct ProbeCall {
    pub function: u8,
    pub via_relay: bool,
    pub fail_after: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeTx {
    pub new_block: bool,
    pub sender: u8,
    pub calls: Vec<ProbeCall>,
}

#[derive(Debug, Clone)]
pub struct ProbeTrace {
    pub max_calls: u32,
    pub per_actor: bool,
    /// Both functions share one probe name instead of having their own.
    pub shared_probe: bool,
    pub txs: Vec<ProbeTx>,
}

pub fn probe_trace() -> impl Strategy<Value = ProbeTrace> {
    let call = (0..2u8, any::<bool>(), prop::bool::weighted(0.2))
        .prop_map(|(function, via_relay, fail_after)| ProbeCall { function, via_relay, fail_after });
    let tx = (prop::bool::weighted(0.3), 0..2u8, prop::collection::vec(call, 0..6))
        .prop_map(|(new_block, sender, calls)| ProbeTx { new_block, sender, calls });
    (1..4u32, any::<bool>(), any::<bool>(), prop::collection::vec(tx, 1..6))
        .prop_map(|(max_calls, per_actor, shared_probe, txs)| ProbeTrace { max_calls, per_actor, shared_probe, txs })
}

const FUNCTIONS: [&str; 2] = ["f", "g"];

fn probe_name(t: &ProbeTrace, function: &str) -> String {
    if t.shared_probe {
        "probe".into()
    } else {
        format!("probe-{function}")
    }
}

fn inner_body() -> Arc<FnContract> {
    FnContract::new(|env, input| {
        if input.arg(0).is_some_and(|w| !w.is_zero()) {
            Err(env.fail("inner failure"))
        } else {
            Ok(vec![])
        }
    })
}

/// Reference guard: a per-transaction call counter kept in storage.
struct CounterGuarded {
    trace: ProbeTrace,
    inner: Arc<FnContract>,
}

impl Contract for CounterGuarded {
    fn kind(&self) -> &str {
        "counter"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        0
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        let name = probe_name(&self.trace, &input.function);
        let actor = if self.trace.per_actor { env.caller().0.to_vec() } else { Vec::new() };
        let key = [name.as_bytes(), &actor, &env.tx_serial().to_be_bytes()].concat();
        let slot = mapping_slot("counter", &key);
        let n = env.sload(slot)?;
        if n >= Word::from(self.trace.max_calls) {
            return Err(env.fail("counter: too many calls"));
        }
        env.sstore(slot, n + Word::from(1))?;
        self.inner.execute(env, input)
    }
}

fn probe_world(t: &ProbeTrace, with_probe: bool) -> (World, Address, Address) {
    let mut w = eth_world();
    let target = Address::from_label("target");
    let relay = Address::from_label("relay");
    if with_probe {
        let mut bindings = BTreeMap::new();
        for f in FUNCTIONS {
            let cfg = ProbeConfig {
                probe: probe_name(t, f),
                per_actor: t.per_actor.then_some(Keying::Sender),
                max_calls_per_tx: t.max_calls,
            };
            bindings.insert(f.to_string(), vec![GuardBinding::OncePerTx(cfg)]);
        }
        w.deploy(target, Arc::new(Guarded::new(inner_body(), bindings)));
    } else {
        w.deploy(target, Arc::new(CounterGuarded { trace: t.clone(), inner: inner_body() }));
    }
    // relay.<fn>(fail) forwards to target.<fn>(fail).
    w.deploy(relay, FnContract::new(move |env, input| env.call_checked(target, &input.function, input.args.clone())));
    (w, target, relay)
}

/// Outcome of each call: `Ok(())`, a guard rejection, or another failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallVerdict {
    Passed,
    Rejected,
    InnerFailure,
}

fn run_probe_trace(t: &ProbeTrace, with_probe: bool) -> Vec<CallVerdict> {
    let (mut w, target, relay) = probe_world(t, with_probe);
    let mut out = Vec::new();
    for tx in &t.txs {
        if tx.new_block {
            w.advance_blocks(1).unwrap();
        }
        let program: Vec<TopLevelCall> = tx
            .calls
            .iter()
            .map(|c| TopLevelCall {
                to: if c.via_relay { relay } else { target },
                value: Word::ZERO,
                gas: None,
                input: Calldata::new(FUNCTIONS[c.function as usize], vec![Word::from(c.fail_after as u8)]),
            })
            .collect();
        let receipt = execute_transaction(&mut w, label("sender", tx.sender), DEFAULT_TX_GAS_LIMIT, &program).unwrap();
        out.extend(receipt.results.iter().map(|r| match &r.revert {
            None => CallVerdict::Passed,
            Some(rev) if rev.reason == "inner failure" => CallVerdict::InnerFailure,
            Some(_) => CallVerdict::Rejected,
        }));
    }
    out
}

/// The gas-probe guard and an explicit per-transaction counter reach the same
/// verdict on every call.
pub fn check_probe_matches_counter(t: &ProbeTrace) -> Result<(), TestCaseError> {
    let probe = run_probe_trace(t, true);
    let counter = run_probe_trace(t, false);
    ensure(probe == counter, || format!("probe {probe:?} vs counter {counter:?}"))
}

/// Probe addresses for distinct slots, actors and blocks never coincide.
pub fn check_probe_addresses_distinct(block: u64, k: u32) -> Result<(), TestCaseError> {
    let w = eth_world();
    let h = w.blockhash(block);
    let a = probe_address(&h, "p", None, k);
    ensure(a != probe_address(&h, "p", None, k + 1), || "k collision".into())?;
    ensure(a != probe_address(&w.blockhash(block + 1), "p", None, k), || "block collision".into())?;
    ensure(a != probe_address(&h, "p", Some(Address::from_label("x")), k), || "actor collision".into())
}

// ---- mutex safety over random nesting ----------------------------------------

/// Key assignment: 0 unguarded, 1 contract key "a", 2 contract key "b", 3 shared system key.
#[derive(Debug, Clone)]
pub struct MutexCase {
    /// keys[contract][function]
    pub keys: [[u8; 2]; 3],
    pub root: CallTree,
}

#[derive(Debug, Clone)]
pub struct CallTree {
    pub contract: u8,
    pub function: u8,
    pub children: Vec<CallTree>,
}

pub fn call_tree(depth: u32) -> impl Strategy<Value = CallTree> {
    let leaf = (0..3u8, 0..2u8).prop_map(|(contract, function)| CallTree { contract, function, children: vec![] });
    leaf.prop_recursive(depth, 24, 3, |inner| {
        (0..3u8, 0..2u8, prop::collection::vec(inner, 0..3)).prop_map(|(contract, function, children)| CallTree {
            contract,
            function,
            children,
        })
    })
}

pub fn mutex_case() -> impl Strategy<Value = MutexCase> {
    (prop::array::uniform3(prop::array::uniform2(0..4u8)), call_tree(5))
        .prop_map(|(keys, root)| MutexCase { keys, root })
}

fn flatten(tree: &CallTree, out: &mut Vec<(u8, u8, Vec<usize>)>) -> usize {
    let id = out.len();
    out.push((tree.contract, tree.function, Vec::new()));
    let kids: Vec<usize> = tree.children.iter().map(|c| flatten(c, out)).collect();
    out[id].2 = kids;
    id
}

fn key_identity(case: &MutexCase, contract: u8, function: u8) -> Option<String> {
    match case.keys[contract as usize][function as usize] {
        0 => None,
        1 => Some(format!("c{contract}/a")),
        2 => Some(format!("c{contract}/b")),
        _ => Some("system".into()),
    }
}

#[derive(Default)]
struct Live {
    held: Vec<String>,
    executed: Vec<usize>,
    violations: usize,
}

/// Runs the call tree against guarded contracts. No two live frames may ever
/// hold the same key, the executed set must match a stack model, and every
/// word must be released afterwards.
pub fn check_mutex_safety(case: &MutexCase) -> Result<(), TestCaseError> {
    let mut nodes = Vec::new();
    flatten(&case.root, &mut nodes);
    let nodes = Arc::new(nodes);
    let live = Arc::new(Mutex::new(Live::default()));
    let contracts: Vec<Address> = (0..3).map(|i| label("guarded", i)).collect();
    let mut w = eth_world();
    w.register_system_scope("shared", contracts.clone());

    let mut words = Vec::new();
    for (ci, &addr) in contracts.iter().enumerate() {
        let (nodes, live, case_c, all) = (nodes.clone(), live.clone(), case.clone(), contracts.clone());
        let inner = FnContract::new(move |env, input| {
            let id: usize = input.arg(0).unwrap_or_default().to();
            let (c, f, kids) = nodes[id].clone();
            let key = key_identity(&case_c, c, f);
            {
                let mut l = live.lock().unwrap();
                if let Some(k) = &key {
                    if l.held.contains(k) {
                        l.violations += 1;
                    }
                    l.held.push(k.clone());
                }
                l.executed.push(id);
            }
            for kid in kids {
                let (kc, kf, _) = nodes[kid];
                let input = Calldata::new(FUNCTIONS[kf as usize], vec![Word::from(kid)]);
                env.call(all[kc as usize], CallKind::Call, Word::ZERO, None, input)?;
            }
            if key.is_some() {
                live.lock().unwrap().held.pop();
            }
            Ok(vec![])
        });
        let mut bindings = BTreeMap::new();
        for (fi, f) in FUNCTIONS.iter().enumerate() {
            let key = match case.keys[ci][fi] {
                0 => continue,
                1 => GuardKey::contract("a", addr),
                2 => GuardKey::contract("b", addr),
                _ => GuardKey::system("system", "shared"),
            };
            let owner = if case.keys[ci][fi] == 3 { w.system_scope("shared").unwrap().address } else { addr };
            words.push((owner, key.slot));
            bindings.insert(f.to_string(), vec![GuardBinding::Mutex(key)]);
        }
        w.deploy(addr, Arc::new(Guarded::new(inner, bindings)));
    }

    let (c, f, _) = nodes[0];
    let call = TopLevelCall {
        to: contracts[c as usize],
        value: Word::ZERO,
        gas: None,
        input: Calldata::new(FUNCTIONS[f as usize], vec![Word::ZERO]),
    };
    execute_transaction(&mut w, Address::from_label("eoa"), DEFAULT_TX_GAS_LIMIT, &[call]).unwrap();

    // Stack model: a node runs iff its key is not held by a running ancestor.
    fn model(
        case: &MutexCase,
        nodes: &[(u8, u8, Vec<usize>)],
        id: usize,
        held: &mut Vec<String>,
        out: &mut Vec<usize>,
    ) {
        let (c, f, kids) = &nodes[id];
        let key = key_identity(case, *c, *f);
        if key.as_ref().is_some_and(|k| held.contains(k)) {
            return;
        }
        out.push(id);
        if let Some(k) = &key {
            held.push(k.clone());
        }
        for &kid in kids {
            model(case, nodes, kid, held, out);
        }
        if key.is_some() {
            held.pop();
        }
    }
    let mut expected = Vec::new();
    model(case, &nodes, 0, &mut Vec::new(), &mut expected);

    let l = live.lock().unwrap();
    ensure(l.violations == 0, || format!("{} frames shared a held key", l.violations))?;
    ensure(l.executed == expected, || format!("executed {:?}, model {:?}", l.executed, expected))?;
    for (owner, slot) in words {
        ensure(MutexWord::from_word(w.storage(owner, slot)) == MutexWord::NotEntered, || "mutex left entered".into())?;
    }
    Ok(())
}

// ---- revert atomicity and gas conservation ------------------------------------

#[derive(Debug, Clone)]
pub struct GasTree {
    pub contract: u8,
    pub charge: u16,
    pub write: u16,
    pub pay: u8,
    pub fail: bool,
    /// A failing child makes this frame fail too.
    pub propagate: bool,
    pub children: Vec<GasTree>,
}

pub fn gas_tree() -> impl Strategy<Value = GasTree> {
    let node = (0..3u8, 0..5000u16, any::<u16>(), 0..4u8, prop::bool::weighted(0.25), any::<bool>());
    let leaf = node.clone().prop_map(|(contract, charge, write, pay, fail, propagate)| GasTree {
        contract,
        charge,
        write,
        pay,
        fail,
        propagate,
        children: vec![],
    });
    leaf.prop_recursive(4, 32, 4, move |inner| {
        (node.clone(), prop::collection::vec(inner, 0..4)).prop_map(
            |((contract, charge, write, pay, fail, propagate), children)| GasTree {
                contract,
                charge,
                write,
                pay,
                fail,
                propagate,
                children,
            },
        )
    })
}

type FlatGas = (u8, u16, u16, u8, bool, bool, Vec<usize>);

fn flatten_gas(t: &GasTree, out: &mut Vec<FlatGas>) -> usize {
    let id = out.len();
    out.push((t.contract, t.charge, t.write, t.pay, t.fail, t.propagate, Vec::new()));
    let kids: Vec<usize> = t.children.iter().map(|c| flatten_gas(c, out)).collect();
    out[id].6 = kids;
    id
}

#[derive(Debug, Clone, Default, PartialEq)]
struct GasModel {
    storage: BTreeMap<usize, u16>,
    balances: BTreeMap<Address, u64>,
    warm: BTreeSet<Address>,
}

const FUNDING: u64 = 1000;

/// Returns (success, gas_used) for node `id` and updates `m` like the engine would.
fn gas_model(
    nodes: &[FlatGas],
    contracts: &[Address],
    sink: Address,
    s: GasSchedule,
    id: usize,
    m: &mut GasModel,
    per_node: &mut BTreeMap<usize, u64>,
) -> (bool, u64) {
    let entry = m.clone();
    let (c, charge, write, pay, fail, propagate, kids) = nodes[id].clone();
    let me = contracts[c as usize];
    let access =
        |m: &mut GasModel, a: Address| if m.warm.insert(a) { s.cold_account_access } else { s.warm_account_access };
    let mut gas = charge as u64 + s.base_op;
    m.storage.insert(id, write);
    let mut ok = true;
    if pay > 0 {
        gas += s.base_op + access(m, sink);
        let have = m.balances.get(&me).copied().unwrap_or(0);
        if have >= pay as u64 {
            *m.balances.get_mut(&me).unwrap() -= pay as u64;
            *m.balances.entry(sink).or_default() += pay as u64;
        }
    }
    for kid in kids {
        let target = contracts[nodes[kid].0 as usize];
        gas += s.base_op + access(m, target);
        let (kid_ok, kid_gas) = gas_model(nodes, contracts, sink, s, kid, m, per_node);
        gas += kid_gas;
        if !kid_ok && propagate {
            ok = false;
            break;
        }
    }
    if fail {
        ok = false;
    }
    if !ok {
        *m = entry;
    }
    per_node.insert(id, gas);
    (ok, gas)
}

/// Every frame's gas equals its own charges plus its children's usage, and a
/// failed subtree leaves exactly the state a deep-copy model predicts.
pub fn check_atomicity_and_gas(tree: &GasTree) -> Result<(), TestCaseError> {
    let mut nodes = Vec::new();
    flatten_gas(tree, &mut nodes);
    let nodes = Arc::new(nodes);
    let contracts: Vec<Address> = (0..3).map(|i| label("node", i)).collect();
    let sink = Address::from_label("sink");
    let origin = Address::from_label("eoa");
    let mut w = eth_world();
    let schedule = w.profile().gas_schedule;
    for &addr in &contracts {
        let (nodes, all) = (nodes.clone(), contracts.clone());
        w.deploy(
            addr,
            FnContract::new(move |env, input| {
                let id: usize = input.arg(0).unwrap_or_default().to();
                let (_, charge, write, pay, fail, propagate, kids) = nodes[id].clone();
                env.charge(charge as u64)?;
                env.sstore(Word::from(id), Word::from(write))?;
                if pay > 0 {
                    // Sending from an empty account fails in the child and is ignored.
                    env.call(sink, CallKind::Call, Word::from(pay), None, Calldata::fallback())?;
                }
                for kid in kids {
                    let target = all[nodes[kid].0 as usize];
                    let r =
                        env.call(target, CallKind::Call, Word::ZERO, None, Calldata::new("n", vec![Word::from(kid)]))?;
                    if !r.is_success() && propagate {
                        return Err(r.revert.unwrap());
                    }
                }
                if fail {
                    return Err(env.fail("node failed"));
                }
                Ok(vec![])
            }),
        );
        w.mint_native(addr, Word::from(FUNDING));
    }

    let mut m = GasModel::default();
    for &a in &contracts {
        m.balances.insert(a, FUNDING);
    }
    let root = contracts[nodes[0].0 as usize];
    m.warm.insert(origin);
    m.warm.insert(root);
    let mut per_node = BTreeMap::new();
    let (ok, gas) = gas_model(&nodes, &contracts, sink, schedule, 0, &mut m, &mut per_node);

    let call = TopLevelCall { to: root, value: Word::ZERO, gas: None, input: Calldata::new("n", vec![Word::ZERO]) };
    let receipt = execute_transaction(&mut w, origin, DEFAULT_TX_GAS_LIMIT, &[call]).unwrap();
    let r = &receipt.results[0];
    ensure(r.is_success() == ok, || format!("root success {} vs model {ok}", r.is_success()))?;
    ensure(r.gas_used == gas, || format!("root gas {} vs model {gas}", r.gas_used))?;
    ensure(receipt.gas_used == gas, || "receipt gas differs from the root frame".into())?;

    // Per-frame gas from the trace, in call order, against the model.
    let mut stack: Vec<Option<usize>> = Vec::new();
    let mut frame_ids = Vec::new();
    let mut next = 0usize;
    for e in w.trace() {
        match e {
            TraceEvent::Call { callee, .. } => {
                if contracts.contains(callee) {
                    stack.push(Some(next));
                    next += 1;
                } else {
                    stack.push(None);
                }
            }
            TraceEvent::Return { gas_used, .. } => {
                if let Some(Some(id)) = stack.pop() {
                    frame_ids.push((id, *gas_used));
                }
            }
            _ => {}
        }
    }
    // Nodes run in pre-order, so the n-th contract frame is node n of the
    // executed subsequence; pair them by walking the model's order.
    let executed: Vec<usize> = executed_order(&nodes, 0);
    for (seq, gas_used) in frame_ids {
        let id = executed[seq];
        let want = per_node[&id];
        ensure(gas_used == want, || format!("node {id} used {gas_used}, model {want}"))?;
    }

    for (id, _) in nodes.iter().enumerate() {
        let (c, ..) = nodes[id];
        let got = w.storage(contracts[c as usize], Word::from(id));
        let want = m.storage.get(&id).copied().unwrap_or(0);
        ensure(got == Word::from(want), || format!("slot of node {id}: {got} vs {want}"))?;
    }
    for a in contracts.iter().chain([&sink]) {
        let want = m.balances.get(a).copied().unwrap_or(0);
        ensure(w.balance(*a) == Word::from(want), || format!("balance of {a}"))?;
    }
    Ok(())
}

/// Nodes in the order the engine enters them: pre-order, stopping a parent's
/// remaining children once a propagating child fails.
fn executed_order(nodes: &[FlatGas], root: usize) -> Vec<usize> {
    fn outcome(nodes: &[FlatGas], id: usize, out: &mut Vec<usize>) -> bool {
        out.push(id);
        let (_, _, _, _, fail, propagate, kids) = &nodes[id];
        for &kid in kids {
            if !outcome(nodes, kid, out) && *propagate {
                return false;
            }
        }
        !*fail
    }
    let mut out = Vec::new();
    outcome(nodes, root, &mut out);
    out
}

/// Whether a revert was caused by a guard.
pub fn is_guard(cause: &RevertCause) -> bool {
    matches!(cause, RevertCause::Guard(_))
}
