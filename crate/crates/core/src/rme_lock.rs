//! Recoverable mutual exclusion from reads and writes only.
//!
//! The construction is Lamport's bakery algorithm with every shared variable
//! kept non-volatile, plus a per-process status word recording which section
//! of the protocol the process last entered. The status word is what makes
//! recovery possible:
//!
//! * `InCs`: the process crashed while holding the lock. Its ticket is still
//!   published, so nobody else can have entered; recovery re-enters at once
//!   (critical section re-entry).
//! * `Trying`: the process crashed in the entry section. Recovery withdraws
//!   the ticket and contends again from scratch.
//! * `Exiting`: the process crashed while releasing. Recovery finishes the
//!   release before contending again.
//!
//! The holder predicate is `status == InCs`; it is derived, never stored
//! separately.
//!
//! Every shared access is one step of [`LockMachine::step`]. Waiting is
//! modelled as a spin step that re-reads the awaited variable.

use serde::{Deserialize, Serialize};

use crate::error::Fault;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LockStatus {
    Idle,
    Trying,
    InCs,
    Exiting,
}

/// Non-volatile lock metadata for processes `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LockState {
    status: Vec<LockStatus>,
    choosing: Vec<bool>,
    number: Vec<u64>,
}

impl LockState {
    pub fn new(n: usize) -> Self {
        Self {
            status: vec![LockStatus::Idle; n + 1],
            choosing: vec![false; n + 1],
            number: vec![0; n + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.status.len() - 1
    }

    pub fn status(&self, pid: usize) -> LockStatus {
        self.status[pid]
    }

    pub fn is_holder(&self, pid: usize) -> bool {
        self.status[pid] == LockStatus::InCs
    }

    pub fn holders(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&p| self.is_holder(p)).collect()
    }

    pub fn ticket(&self, pid: usize) -> u64 {
        self.number[pid]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Pc {
    ReadStatus,
    WithdrawTicket,
    ClearChoosingAfterCrash,
    FinishExitTicket,
    FinishExitStatus,
    SetTrying,
    SetChoosing,
    ReadNumber(usize),
    WriteNumber,
    ClearChoosing,
    WaitChoosing(usize),
    WaitNumber(usize),
    Enter,
    SetExiting,
    ClearTicket,
    SetIdle,
}

/// What a lock step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LockStep {
    Continue,
    /// Re-read an awaited variable without progress.
    Spin,
    /// The requested operation completed with this step.
    Done,
}

/// What [`LockMachine::recover`] found once its dispatch finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recovery {
    /// Crashed inside the critical section; the caller holds the lock again.
    Holding,
    /// Any entry or exit section was cleaned up; the caller does not hold it.
    Clean,
}

/// Volatile per-process state of one lock operation in flight.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LockMachine {
    pid: usize,
    pc: Pc,
    /// Stop after the recovery dispatch instead of going on to acquire.
    recover_only: bool,
    max_seen: u64,
    ticket: u64,
    recovered: Option<Recovery>,
}

impl LockMachine {
    fn with(pid: usize, pc: Pc, recover_only: bool) -> Self {
        Self {
            pid,
            pc,
            recover_only,
            max_seen: 0,
            ticket: 0,
            recovered: None,
        }
    }

    /// Acquire the lock. Starts with the recovery dispatch, so calling this
    /// after a crash anywhere in the protocol is always safe; a process that
    /// crashed inside the critical section re-enters immediately.
    pub fn lock(pid: usize) -> Self {
        Self::with(pid, Pc::ReadStatus, false)
    }

    /// Only the recovery dispatch: restores a state from which the process
    /// either holds the lock (crashed in the CS) or can contend cleanly.
    pub fn recover(pid: usize) -> Self {
        Self::with(pid, Pc::ReadStatus, true)
    }

    pub fn unlock(pid: usize) -> Self {
        Self::with(pid, Pc::SetExiting, false)
    }

    /// Result of the recovery dispatch, once it has run.
    pub fn recovered(&self) -> Option<Recovery> {
        self.recovered
    }

    pub fn label(&self) -> &'static str {
        match self.pc {
            Pc::ReadStatus => "LOCK_STATUS",
            Pc::WithdrawTicket | Pc::ClearChoosingAfterCrash => "LOCK_WITHDRAW",
            Pc::FinishExitTicket | Pc::FinishExitStatus => "LOCK_FINISH_EXIT",
            Pc::SetTrying => "LOCK_TRYING",
            Pc::SetChoosing => "LOCK_CHOOSING",
            Pc::ReadNumber(_) => "LOCK_READ_TICKET",
            Pc::WriteNumber => "LOCK_TAKE_TICKET",
            Pc::ClearChoosing => "LOCK_CHOSEN",
            Pc::WaitChoosing(_) => "LOCK_WAIT_CHOOSING",
            Pc::WaitNumber(_) => "LOCK_WAIT_TICKET",
            Pc::Enter => "LOCK_ENTER",
            Pc::SetExiting => "UNLOCK_EXITING",
            Pc::ClearTicket => "UNLOCK_TICKET",
            Pc::SetIdle => "UNLOCK_IDLE",
        }
    }

    fn finish_recovery(&mut self, r: Recovery) -> LockStep {
        self.recovered = Some(r);
        if self.recover_only || r == Recovery::Holding {
            LockStep::Done
        } else {
            self.pc = Pc::SetTrying;
            LockStep::Continue
        }
    }

    fn next_waited(&self, from: usize, n: usize) -> Option<usize> {
        (from..=n).find(|&j| j != self.pid)
    }

    /// Executes exactly one shared-memory access.
    pub fn step(&mut self, state: &mut LockState) -> Result<LockStep, Fault> {
        let me = self.pid;
        let n = state.n();
        let out = match self.pc {
            Pc::ReadStatus => match state.status[me] {
                LockStatus::InCs => self.finish_recovery(Recovery::Holding),
                LockStatus::Idle => self.finish_recovery(Recovery::Clean),
                LockStatus::Trying => {
                    self.pc = Pc::WithdrawTicket;
                    LockStep::Continue
                }
                LockStatus::Exiting => {
                    self.pc = Pc::FinishExitTicket;
                    LockStep::Continue
                }
            },
            Pc::WithdrawTicket => {
                state.number[me] = 0;
                self.pc = Pc::ClearChoosingAfterCrash;
                LockStep::Continue
            }
            Pc::ClearChoosingAfterCrash => {
                state.choosing[me] = false;
                self.finish_recovery(Recovery::Clean)
            }
            Pc::FinishExitTicket => {
                state.number[me] = 0;
                self.pc = Pc::FinishExitStatus;
                LockStep::Continue
            }
            Pc::FinishExitStatus => {
                state.status[me] = LockStatus::Idle;
                self.finish_recovery(Recovery::Clean)
            }
            Pc::SetTrying => {
                state.status[me] = LockStatus::Trying;
                self.pc = Pc::SetChoosing;
                LockStep::Continue
            }
            Pc::SetChoosing => {
                state.choosing[me] = true;
                self.max_seen = 0;
                self.pc = Pc::ReadNumber(1);
                LockStep::Continue
            }
            Pc::ReadNumber(j) => {
                self.max_seen = self.max_seen.max(state.number[j]);
                self.pc = if j == n { Pc::WriteNumber } else { Pc::ReadNumber(j + 1) };
                LockStep::Continue
            }
            Pc::WriteNumber => {
                self.ticket = self.max_seen + 1;
                state.number[me] = self.ticket;
                self.pc = Pc::ClearChoosing;
                LockStep::Continue
            }
            Pc::ClearChoosing => {
                state.choosing[me] = false;
                self.pc = match self.next_waited(1, n) {
                    Some(j) => Pc::WaitChoosing(j),
                    None => Pc::Enter,
                };
                LockStep::Continue
            }
            Pc::WaitChoosing(j) => {
                if state.choosing[j] {
                    LockStep::Spin
                } else {
                    self.pc = Pc::WaitNumber(j);
                    LockStep::Continue
                }
            }
            Pc::WaitNumber(j) => {
                let other = state.number[j];
                if other != 0 && (other, j) < (self.ticket, me) {
                    LockStep::Spin
                } else {
                    self.pc = match self.next_waited(j + 1, n) {
                        Some(k) => Pc::WaitChoosing(k),
                        None => Pc::Enter,
                    };
                    LockStep::Continue
                }
            }
            Pc::Enter => {
                state.status[me] = LockStatus::InCs;
                LockStep::Done
            }
            Pc::SetExiting => {
                if state.status[me] != LockStatus::InCs {
                    return Err(Fault::UnlockByNonHolder { pid: me });
                }
                state.status[me] = LockStatus::Exiting;
                self.pc = Pc::ClearTicket;
                LockStep::Continue
            }
            Pc::ClearTicket => {
                state.number[me] = 0;
                self.pc = Pc::SetIdle;
                LockStep::Continue
            }
            Pc::SetIdle => {
                state.status[me] = LockStatus::Idle;
                LockStep::Done
            }
        };
        Ok(out)
    }
}
