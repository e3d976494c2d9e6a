//! Message-call execution: call frames, value transfer, gas metering and
//! snapshot-based revert propagation.
//!
//! Contracts are native [`Contract`] handlers. A handler receives an [`Env`]
//! bound to its own frame and reaches storage, balances, the clock and other
//! contracts only through it, so every service is metered and every write
//! respects static-call rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gas::GasSchedule;
use crate::guards::GuardHit;
use crate::trace::TraceEvent;
use crate::types::{Address, Amount, Word};
use crate::world::{AccessKind, World, WorldError};

pub const MAX_CALL_DEPTH: u32 = 1024;

/// Thread stack size that comfortably holds `MAX_CALL_DEPTH` nested frames.
pub const CALL_STACK_BYTES: usize = 256 << 20;

/// Default gas limit for a scenario transaction.
pub const DEFAULT_TX_GAS_LIMIT: u64 = 30_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    #[default]
    Call,
    StaticCall,
    /// `transfer()`: stipend only, failure reverts the sender.
    Transfer,
    /// `send()`: stipend only, failure is reported to the sender.
    Send,
}

impl CallKind {
    pub fn uses_stipend(self) -> bool {
        matches!(self, CallKind::Transfer | CallKind::Send)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Success,
    Reverted,
    SendFailed,
}

/// Structured message payload. An empty function name is a plain value
/// transfer and dispatches to the callee's fallback.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Calldata {
    pub function: String,
    pub args: Vec<Word>,
}

impl Calldata {
    pub fn new(function: impl Into<String>, args: Vec<Word>) -> Self {
        Calldata { function: function.into(), args }
    }

    pub fn fallback() -> Self {
        Calldata::default()
    }

    pub fn is_fallback(&self) -> bool {
        self.function.is_empty()
    }

    pub fn arg(&self, i: usize) -> Option<Word> {
        self.args.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RevertCause {
    Guard(GuardHit),
    OutOfGas {
        stipend: bool,
    },
    StaticViolation,
    InsufficientBalance,
    DepthExceeded,
    /// A `require` in fixture logic.
    Fixture,
}

/// Why a frame reverted. Propagating a child's failure keeps the innermost
/// origin, so the top-level result names the proximate cause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revert {
    pub cause: RevertCause,
    pub reason: String,
    pub contract: Address,
    pub function: String,
}

impl fmt::Display for Revert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let func = if self.function.is_empty() { "fallback" } else { &self.function };
        write!(f, "{} in {}.{}", self.reason, self.contract, func)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallFrame {
    pub caller: Address,
    pub callee: Address,
    pub value: Word,
    pub gas_remaining: u64,
    pub depth: u32,
    pub kind: CallKind,
    /// True under a StaticCall anywhere up the stack.
    pub is_static: bool,
}

impl CallFrame {
    /// Top-level frame sent by an externally owned account.
    pub fn external(origin: Address, to: Address, value: Word, gas: u64) -> Self {
        CallFrame {
            caller: origin,
            callee: to,
            value,
            gas_remaining: gas,
            depth: 0,
            kind: CallKind::Call,
            is_static: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallResult {
    pub status: CallStatus,
    pub gas_used: u64,
    pub return_data: Vec<Word>,
    pub revert: Option<Revert>,
}

impl CallResult {
    pub fn is_success(&self) -> bool {
        self.status == CallStatus::Success
    }

    /// Return data, or the child's revert for propagation with `?`.
    pub fn into_result(self) -> Result<Vec<Word>, Revert> {
        match self.status {
            CallStatus::Success => Ok(self.return_data),
            _ => Err(self.revert.expect("failed call carries a revert")),
        }
    }

    pub fn first_word(&self) -> Word {
        self.return_data.first().copied().unwrap_or_default()
    }
}

/// Native contract behavior registered at an account.
pub trait Contract: Send + Sync {
    fn kind(&self) -> &str;

    /// Gas charged when a frame enters this contract, before dispatch.
    fn entry_cost(&self, input: &Calldata) -> u64;

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert>;

    /// Whether `function` is read-only.
    fn is_view(&self, _function: &str) -> bool {
        false
    }

    /// Whether hook-enabled tokens should notify this contract on receipt.
    fn accepts_token_hook(&self) -> bool {
        false
    }
}

/// Execution environment of one frame.
pub struct Env<'w> {
    world: &'w mut World,
    frame: CallFrame,
    function: String,
    schedule: GasSchedule,
}

impl<'w> Env<'w> {
    pub fn this(&self) -> Address {
        self.frame.callee
    }

    pub fn caller(&self) -> Address {
        self.frame.caller
    }

    pub fn value(&self) -> Word {
        self.frame.value
    }

    pub fn depth(&self) -> u32 {
        self.frame.depth
    }

    pub fn kind(&self) -> CallKind {
        self.frame.kind
    }

    pub fn is_static(&self) -> bool {
        self.frame.is_static
    }

    pub fn function(&self) -> &str {
        &self.function
    }

    pub fn origin(&self) -> Address {
        self.world.tx().map(|t| t.origin).unwrap_or_default()
    }

    pub fn gas_schedule(&self) -> GasSchedule {
        self.schedule
    }

    pub fn gas_remaining(&self) -> u64 {
        self.frame.gas_remaining
    }

    /// World-unique serial of the running transaction.
    pub fn tx_serial(&self) -> u64 {
        self.world.tx_serial()
    }

    pub fn block_number(&self) -> u64 {
        self.world.observe().0
    }

    pub fn timestamp(&self) -> u64 {
        self.world.observe().1
    }

    pub fn blockhash(&self, number: u64) -> [u8; 32] {
        self.world.blockhash(number)
    }

    pub(crate) fn world(&self) -> &World {
        self.world
    }

    pub fn has_code(&self, address: Address) -> bool {
        self.world.has_code(address)
    }

    pub fn accepts_token_hook(&self, address: Address) -> bool {
        self.world.code_of(address).is_some_and(|c| c.accepts_token_hook())
    }

    /// A revert raised by this frame's own logic.
    pub fn fail(&self, reason: impl Into<String>) -> Revert {
        self.revert_with(RevertCause::Fixture, reason)
    }

    pub fn revert_with(&self, cause: RevertCause, reason: impl Into<String>) -> Revert {
        Revert { cause, reason: reason.into(), contract: self.this(), function: self.function.clone() }
    }

    pub fn require(&self, condition: bool, reason: &str) -> Result<(), Revert> {
        if condition {
            Ok(())
        } else {
            Err(self.fail(reason))
        }
    }

    pub fn charge(&mut self, gas: u64) -> Result<(), Revert> {
        if self.frame.gas_remaining < gas {
            self.frame.gas_remaining = 0;
            let stipend = self.frame.kind.uses_stipend();
            return Err(self.revert_with(RevertCause::OutOfGas { stipend }, "out of gas"));
        }
        self.frame.gas_remaining -= gas;
        Ok(())
    }

    /// `gasleft()`: charges one base op, then reports what remains.
    pub fn gasleft(&mut self) -> Result<u64, Revert> {
        self.charge(self.schedule.base_op)?;
        Ok(self.frame.gas_remaining)
    }

    /// `address.balance`, priced cold or warm.
    pub fn balance_of(&mut self, address: Address) -> Result<Word, Revert> {
        let access = self.world.touch_account(address).map_err(|e| self.fail(e.to_string()))?;
        let cost = match access {
            AccessKind::Cold => self.schedule.cold_account_access,
            AccessKind::Warm => self.schedule.warm_account_access,
        };
        self.charge(cost)?;
        Ok(self.world.balance(address))
    }

    /// `address(this).balance`; no account access pricing.
    pub fn self_balance(&mut self) -> Result<Word, Revert> {
        self.charge(self.schedule.base_op)?;
        Ok(self.world.balance(self.this()))
    }

    pub fn sload(&mut self, slot: Word) -> Result<Word, Revert> {
        let this = self.this();
        self.sload_at(this, slot)
    }

    pub fn sstore(&mut self, slot: Word, value: Word) -> Result<(), Revert> {
        let this = self.this();
        self.sstore_at(this, slot, value)
    }

    pub(crate) fn sload_at(&mut self, account: Address, slot: Word) -> Result<Word, Revert> {
        self.charge(self.schedule.base_op)?;
        let _ = self.world.touch_slot(account, slot);
        Ok(self.world.storage(account, slot))
    }

    pub(crate) fn sstore_at(&mut self, account: Address, slot: Word, value: Word) -> Result<(), Revert> {
        if self.frame.is_static {
            return Err(self.revert_with(RevertCause::StaticViolation, "state write in static call"));
        }
        self.charge(self.schedule.base_op)?;
        let _ = self.world.touch_slot(account, slot);
        self.world.set_storage(account, slot, value);
        Ok(())
    }

    pub fn emit(&mut self, event: TraceEvent) {
        self.world.push_trace(event);
    }

    /// Calls `target` from this frame.
    ///
    /// `gas` caps what a `Call`/`StaticCall` forwards (default: everything
    /// left); `Transfer`/`Send` always forward exactly the stipend. An `Err`
    /// means this frame itself must revert: it ran out of gas paying for the
    /// call, tried to move value under a static call, or a `Transfer` failed.
    pub fn call(
        &mut self,
        target: Address,
        kind: CallKind,
        value: Word,
        gas: Option<u64>,
        input: Calldata,
    ) -> Result<CallResult, Revert> {
        if self.frame.is_static && !value.is_zero() {
            return Err(self.revert_with(RevertCause::StaticViolation, "value transfer in static call"));
        }
        self.charge(self.schedule.base_op)?;
        let access = self.world.touch_account(target).map_err(|e| self.fail(e.to_string()))?;
        self.charge(match access {
            AccessKind::Cold => self.schedule.cold_account_access,
            AccessKind::Warm => self.schedule.warm_account_access,
        })?;
        let forward = if kind.uses_stipend() {
            self.schedule.stipend
        } else {
            gas.unwrap_or(u64::MAX).min(self.frame.gas_remaining)
        };
        self.charge(forward)?;
        let child = CallFrame {
            caller: self.this(),
            callee: target,
            value,
            gas_remaining: forward,
            depth: self.frame.depth + 1,
            kind,
            is_static: self.frame.is_static || kind == CallKind::StaticCall,
        };
        let result = call(self.world, child, &input);
        self.frame.gas_remaining += forward - result.gas_used;
        if kind == CallKind::Transfer && !result.is_success() {
            return Err(result.revert.expect("failed call carries a revert"));
        }
        Ok(result)
    }

    /// `call()` that must succeed; the child's revert propagates.
    pub fn call_checked(&mut self, target: Address, function: &str, args: Vec<Word>) -> Result<Vec<Word>, Revert> {
        self.call(target, CallKind::Call, Word::ZERO, None, Calldata::new(function, args))?.into_result()
    }

    /// Read-only call that must succeed.
    pub fn static_call(&mut self, target: Address, function: &str, args: Vec<Word>) -> Result<Vec<Word>, Revert> {
        self.call(target, CallKind::StaticCall, Word::ZERO, None, Calldata::new(function, args))?.into_result()
    }
}

/// Executes `frame` against the world: moves value, runs the callee's
/// handler, and rolls back every state change (including warm-set
/// additions) if the frame fails.
pub fn call(world: &mut World, frame: CallFrame, input: &Calldata) -> CallResult {
    let gas_given = frame.gas_remaining;
    let depth = frame.depth;
    let callee = frame.callee;
    let kind = frame.kind;
    let failed_status = if kind == CallKind::Send { CallStatus::SendFailed } else { CallStatus::Reverted };

    world.push_trace(TraceEvent::Call {
        depth,
        caller: frame.caller,
        callee,
        function: input.function.clone(),
        value: Amount(frame.value),
        kind,
        gas: gas_given,
    });

    let early = |cause: RevertCause, reason: &str| Revert {
        cause,
        reason: reason.to_string(),
        contract: callee,
        function: input.function.clone(),
    };

    let mut failure = None;
    if depth > MAX_CALL_DEPTH {
        failure = Some(early(RevertCause::DepthExceeded, "call depth exceeded"));
    } else if kind == CallKind::StaticCall && !frame.value.is_zero() {
        failure = Some(early(RevertCause::StaticViolation, "value transfer in static call"));
    }
    if let Some(revert) = failure {
        return finish(world, depth, callee, failed_status, 0, Vec::new(), Some(revert));
    }

    let snap = world.snapshot();
    if let Err(WorldError::InsufficientBalance { .. }) = world.transfer_native(frame.caller, callee, frame.value) {
        world.commit(snap).expect("fresh snapshot");
        let revert = early(RevertCause::InsufficientBalance, "insufficient balance for call value");
        return finish(world, depth, callee, failed_status, 0, Vec::new(), Some(revert));
    }

    let code = world.code_of(callee);
    let schedule = world.profile().gas_schedule;
    let mut env = Env { world, frame, function: input.function.clone(), schedule };
    let outcome = match code {
        None => Ok(Vec::new()),
        Some(code) => env.charge(code.entry_cost(input)).and_then(|_| code.execute(&mut env, input)),
    };
    let gas_used = gas_given - env.frame.gas_remaining;
    let world = env.world;
    match outcome {
        Ok(data) => {
            world.commit(snap).expect("frame snapshot is live");
            finish(world, depth, callee, CallStatus::Success, gas_used, data, None)
        }
        Err(revert) => {
            world.revert_to(snap).expect("frame snapshot is live");
            finish(world, depth, callee, failed_status, gas_used, Vec::new(), Some(revert))
        }
    }
}

fn finish(
    world: &mut World,
    depth: u32,
    callee: Address,
    status: CallStatus,
    gas_used: u64,
    return_data: Vec<Word>,
    revert: Option<Revert>,
) -> CallResult {
    world.push_trace(TraceEvent::Return {
        depth,
        callee,
        status,
        gas_used,
        cause: revert.as_ref().map(|r| r.cause.clone()),
        reason: revert.as_ref().map(|r| r.reason.clone()),
    });
    CallResult { status, gas_used, return_data, revert }
}

/// One top-level call of a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopLevelCall {
    pub to: Address,
    pub value: Word,
    pub gas: Option<u64>,
    pub input: Calldata,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub results: Vec<CallResult>,
    pub gas_used: u64,
}

/// Runs `program` as one transaction from `origin`. Each top-level call gets
/// the gas the transaction has left (or its own cap) and a reverted call
/// rolls back only its own effects.
pub fn execute_transaction(
    world: &mut World,
    origin: Address,
    gas_limit: u64,
    program: &[TopLevelCall],
) -> Result<Receipt, WorldError> {
    world.begin_transaction(origin, gas_limit)?;
    let mut results = Vec::with_capacity(program.len());
    for call_spec in program {
        world.touch_account(call_spec.to)?;
        let gas = call_spec.gas.unwrap_or(u64::MAX).min(world.tx_gas_left());
        let frame = CallFrame::external(origin, call_spec.to, call_spec.value, gas);
        let result = call(world, frame, &call_spec.input);
        world.add_tx_gas(result.gas_used)?;
        results.push(result);
    }
    let tx = world.end_transaction()?;
    Ok(Receipt { results, gas_used: tx.gas_used })
}

/// Read-only query outside any transaction (an `eth_call`). Leaves state,
/// block context and transaction counters untouched.
pub fn query(world: &mut World, from: Address, to: Address, input: Calldata) -> Result<CallResult, WorldError> {
    world.begin_query(from)?;
    let frame = CallFrame {
        caller: from,
        callee: to,
        value: Word::ZERO,
        gas_remaining: DEFAULT_TX_GAS_LIMIT,
        depth: 0,
        kind: CallKind::StaticCall,
        is_static: true,
    };
    let result = call(world, frame, &input);
    world.end_query();
    Ok(result)
}


#[cfg(test)]
mod tests {
    use super::testing::{top, world, FnContract};
    use super::*;

    const GAS: u64 = 100_000;

    fn eoa() -> Address {
        Address::from_label("eoa")
    }

    fn run_one(w: &mut World, to: Address, function: &str) -> CallResult {
        let mut r = execute_transaction(w, eoa(), DEFAULT_TX_GAS_LIMIT, &[top(to, function)]).unwrap();
        r.results.remove(0)
    }

    #[test]
    fn gasleft_charges_one_base_op() {
        let mut w = world();
        let a = Address::from_label("a");
        w.deploy(a, FnContract::new(|env, _| Ok(vec![Word::from(env.gasleft()?)])));
        w.begin_transaction(eoa(), GAS).unwrap();
        let r = call(&mut w, CallFrame::external(eoa(), a, Word::ZERO, GAS), &Calldata::new("f", vec![]));
        assert_eq!(r.first_word(), Word::from(GAS - 3));
    }

    #[test]
    fn cold_then_warm_account_access() {
        let mut w = world();
        let a = Address::from_label("a");
        let target = Address::from_label("target");
        w.deploy(
            a,
            FnContract::new(move |env, _| {
                let g0 = env.gasleft()?;
                env.balance_of(target)?;
                let g1 = env.gasleft()?;
                env.balance_of(target)?;
                let g2 = env.gasleft()?;
                Ok(vec![Word::from(g0 - g1), Word::from(g1 - g2)])
            }),
        );
        let r = run_one(&mut w, a, "f");
        // Each delta includes the closing gasleft's base op.
        assert_eq!(r.return_data, vec![Word::from(2600 + 3), Word::from(100 + 3)]);
    }

    #[test]
    fn parent_gas_is_own_charges_plus_child_usage() {
        let mut w = world();
        let parent = Address::from_label("parent");
        let child = Address::from_label("child");
        w.deploy(child, FnContract::new(|env, _| env.charge(1234).map(|_| vec![])));
        w.deploy(
            parent,
            FnContract::new(move |env, _| {
                env.charge(500)?;
                env.call_checked(child, "g", vec![])
            }),
        );
        let r = run_one(&mut w, parent, "f");
        assert!(r.is_success());
        // own: 500 + base_op + cold access of child
        assert_eq!(r.gas_used, 500 + 3 + 2600 + 1234);
    }

    #[test]
    fn forwarded_gas_is_capped_by_remaining() {
        let mut w = world();
        let parent = Address::from_label("parent");
        let child = Address::from_label("child");
        w.deploy(child, FnContract::new(|env, _| Ok(vec![Word::from(env.gas_remaining())])));
        w.deploy(
            parent,
            FnContract::new(move |env, _| {
                let r = env.call(child, CallKind::Call, Word::ZERO, Some(u64::MAX), Calldata::new("g", vec![]))?;
                Ok(vec![r.first_word(), Word::from(env.gas_remaining())])
            }),
        );
        w.begin_transaction(eoa(), GAS).unwrap();
        let r = call(&mut w, CallFrame::external(eoa(), parent, Word::ZERO, GAS), &Calldata::new("f", vec![]));
        assert_eq!(r.return_data[0], Word::from(GAS - 3 - 2600));
        assert_eq!(r.return_data[1], Word::from(GAS - 3 - 2600));
    }

    #[test]
    fn transfer_gets_exactly_the_stipend_and_oog_reverts_the_sender() {
        let mut w = world();
        let sender = Address::from_label("sender");
        let hungry = Address::from_label("hungry");
        let seen = Address::from_label("seen");
        w.deploy(hungry, FnContract::new(|env, _| env.charge(5000).map(|_| vec![])));
        w.deploy(seen, FnContract::new(|env, _| Ok(vec![Word::from(env.gas_remaining())])));
        w.deploy(
            sender,
            FnContract::new(move |env, input| {
                let to = if input.function == "hungry" { hungry } else { seen };
                let r = env.call(to, CallKind::Transfer, Word::ZERO, Some(1_000_000), Calldata::fallback())?;
                Ok(r.return_data)
            }),
        );
        let ok = run_one(&mut w, sender, "seen");
        assert_eq!(ok.return_data, vec![Word::from(2300)]);
        let bad = run_one(&mut w, sender, "hungry");
        assert_eq!(bad.status, CallStatus::Reverted);
        assert_eq!(bad.revert.unwrap().cause, RevertCause::OutOfGas { stipend: true });
    }

    #[test]
    fn send_failure_is_reported_not_propagated() {
        let mut w = world();
        let sender = Address::from_label("sender");
        let hungry = Address::from_label("hungry");
        w.deploy(hungry, FnContract::new(|env, _| env.charge(5000).map(|_| vec![])));
        w.deploy(
            sender,
            FnContract::new(move |env, _| {
                let r = env.call(hungry, CallKind::Send, Word::ZERO, None, Calldata::fallback())?;
                Ok(vec![Word::from(r.status == CallStatus::SendFailed)])
            }),
        );
        let r = run_one(&mut w, sender, "f");
        assert!(r.is_success());
        assert_eq!(r.first_word(), Word::from(1));
    }

    #[test]
    fn static_call_rejects_writes() {
        let mut w = world();
        let reader = Address::from_label("reader");
        let writer = Address::from_label("writer");
        w.deploy(writer, FnContract::new(|env, _| env.sstore(Word::from(1), Word::from(7)).map(|_| vec![])));
        w.deploy(
            reader,
            FnContract::new(move |env, _| {
                let r = env.call(writer, CallKind::StaticCall, Word::ZERO, None, Calldata::new("w", vec![]))?;
                Ok(vec![Word::from(r.is_success())])
            }),
        );
        let r = run_one(&mut w, reader, "f");
        assert_eq!(r.first_word(), Word::ZERO);
        assert_eq!(w.storage(writer, Word::from(1)), Word::ZERO);
        let cause = w.trace().iter().find_map(|e| match e {
            TraceEvent::Return { callee, cause: Some(c), .. } if *callee == writer => Some(c.clone()),
            _ => None,
        });
        assert_eq!(cause, Some(RevertCause::StaticViolation));
    }

    #[test]
    fn reverted_child_leaves_no_state() {
        let mut w = world();
        let parent = Address::from_label("parent");
        let child = Address::from_label("child");
        w.deploy(
            child,
            FnContract::new(|env, _| {
                env.sstore(Word::from(1), Word::from(9))?;
                Err(env.fail("nope"))
            }),
        );
        w.deploy(
            parent,
            FnContract::new(move |env, _| {
                env.sstore(Word::from(2), Word::from(5))?;
                let r = env.call(child, CallKind::Call, Word::ZERO, None, Calldata::new("g", vec![]))?;
                Ok(vec![Word::from(r.is_success())])
            }),
        );
        w.mint_native(eoa(), Word::from(10));
        let r = run_one(&mut w, parent, "f");
        assert!(r.is_success());
        assert_eq!(w.storage(child, Word::from(1)), Word::ZERO);
        assert_eq!(w.storage(parent, Word::from(2)), Word::from(5));
    }

    #[test]
    fn reverted_top_level_call_rolls_back_only_itself() {
        let mut w = world();
        let a = Address::from_label("a");
        w.deploy(
            a,
            FnContract::new(|env, input| {
                env.sstore(Word::from(input.function.len()), Word::from(1))?;
                if input.function == "bad" {
                    return Err(env.fail("bad"));
                }
                Ok(vec![])
            }),
        );
        let r = execute_transaction(&mut w, eoa(), DEFAULT_TX_GAS_LIMIT, &[top(a, "bad"), top(a, "good")]).unwrap();
        assert_eq!(r.results[0].status, CallStatus::Reverted);
        assert!(r.results[1].is_success());
        assert_eq!(w.storage(a, Word::from(3)), Word::ZERO);
        assert_eq!(w.storage(a, Word::from(4)), Word::from(1));
        assert_eq!(r.gas_used, r.results.iter().map(|c| c.gas_used).sum::<u64>());
    }

    #[test]
    fn empty_program_has_no_results() {
        let mut w = world();
        let r = execute_transaction(&mut w, eoa(), DEFAULT_TX_GAS_LIMIT, &[]).unwrap();
        assert!(r.results.is_empty());
        assert_eq!(r.gas_used, 0);
    }

    #[test]
    fn value_transfer_without_funds_reverts() {
        let mut w = world();
        let a = Address::from_label("a");
        let call_spec = TopLevelCall { to: a, value: Word::from(1), gas: None, input: Calldata::fallback() };
        let r = execute_transaction(&mut w, eoa(), DEFAULT_TX_GAS_LIMIT, &[call_spec]).unwrap();
        assert_eq!(r.results[0].revert.as_ref().unwrap().cause, RevertCause::InsufficientBalance);
    }

    #[test]
    fn recursion_stops_at_max_depth() {
        let mut w = world();
        let a = Address::from_label("a");
        w.deploy(
            a,
            FnContract::new(move |env, _| {
                let me = env.this();
                let r = env.call(me, CallKind::Call, Word::ZERO, None, Calldata::new("f", vec![]))?;
                Ok(vec![Word::from(env.depth()), Word::from(r.is_success())])
            }),
        );
        // 1025 nested native frames need more than the default test-thread stack.
        let (r, w) = std::thread::Builder::new()
            .stack_size(CALL_STACK_BYTES)
            .spawn(move || (run_one(&mut w, a, "f"), w))
            .unwrap()
            .join()
            .unwrap();
        assert!(r.is_success());
        let deepest = w.trace().iter().filter_map(|e| match e {
            TraceEvent::Call { depth, .. } => Some(*depth),
            _ => None,
        });
        assert_eq!(deepest.max(), Some(MAX_CALL_DEPTH + 1));
    }

    #[test]
    fn query_leaves_state_untouched() {
        let mut w = world();
        let a = Address::from_label("a");
        w.deploy(a, FnContract::new(|env, _| Ok(vec![Word::from(env.is_static())])));
        let before = w.state_bytes();
        let r = query(&mut w, eoa(), a, Calldata::new("f", vec![])).unwrap();
        assert_eq!(r.first_word(), Word::from(1));
        assert_eq!(w.state_bytes(), before);
        assert!(w.trace().is_empty());
    }
}
