//! One-shot signals: single fulfiller, many awaiters.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waiter {
    /// Re-examine this call's controller.
    Call(u64),
    /// Fulfill this signal too.
    Forward(SignalId),
}

#[derive(Debug, Default)]
struct Slot {
    fulfilled: bool,
    waiters: Vec<Waiter>,
}

#[derive(Debug, Default)]
pub struct SignalArena {
    slots: Vec<Slot>,
    fulfilled: usize,
    double_fulfills: usize,
    woken: Vec<u64>,
}

impl SignalArena {
    pub fn create(&mut self) -> SignalId {
        self.slots.push(Slot::default());
        SignalId(self.slots.len() as u32 - 1)
    }

    pub fn create_fulfilled(&mut self) -> SignalId {
        let id = self.create();
        self.fulfill(id);
        id
    }

    pub fn is_fulfilled(&self, id: SignalId) -> bool {
        self.slots[id.0 as usize].fulfilled
    }

    pub fn fulfill(&mut self, id: SignalId) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let slot = &mut self.slots[id.0 as usize];
            if slot.fulfilled {
                self.double_fulfills += 1;
                continue;
            }
            slot.fulfilled = true;
            self.fulfilled += 1;
            for w in std::mem::take(&mut slot.waiters) {
                match w {
                    Waiter::Call(c) => self.woken.push(c),
                    Waiter::Forward(s) => stack.push(s),
                }
            }
        }
    }

    pub fn fulfill_if_pending(&mut self, id: SignalId) {
        if !self.is_fulfilled(id) {
            self.fulfill(id);
        }
    }

    /// `out` is fulfilled as soon as `input` is.
    pub fn link(&mut self, out: SignalId, input: SignalId) {
        if self.is_fulfilled(input) {
            self.fulfill(out);
        } else {
            self.slots[input.0 as usize].waiters.push(Waiter::Forward(out));
        }
    }

    pub fn wait(&mut self, id: SignalId, call: u64) {
        if self.is_fulfilled(id) {
            self.woken.push(call);
        } else {
            self.slots[id.0 as usize].waiters.push(Waiter::Call(call));
        }
    }

    /// Calls woken since the last drain, in wake order.
    pub fn drain_woken(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.woken)
    }

    pub fn created(&self) -> usize {
        self.slots.len()
    }

    pub fn fulfilled(&self) -> usize {
        self.fulfilled
    }

    /// Fulfill attempts on an already-fulfilled signal. Zero in a correct run.
    pub fn double_fulfills(&self) -> usize {
        self.double_fulfills
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forwarding_chain() {
        let mut a = SignalArena::default();
        let s: Vec<SignalId> = (0..1000).map(|_| a.create()).collect();
        for w in s.windows(2) {
            a.link(w[1], w[0]);
        }
        a.wait(s[999], 7);
        a.fulfill(s[0]);
        assert!(a.is_fulfilled(s[999]));
        assert_eq!(a.drain_woken(), vec![7]);
        assert_eq!(a.fulfilled(), 1000);
        assert_eq!(a.double_fulfills(), 0);
    }
}
