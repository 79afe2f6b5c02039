//! Event fan-out with one bounded mailbox per consumer.
//!
//! The hub stamps sequence numbers, so every consumer sees strictly
//! increasing `seq` values. A full mailbox drops its oldest transform event
//! (or its oldest event when it holds no transforms), so a slow consumer
//! sees gaps but never stalls the pipeline.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use seethrough_core::pipeline::PipelineConfig;
use tokio::sync::Notify;

use crate::protocol::{BinaryFrame, ServerMessage, Slot, StatusLevel, TransformMessage};

pub const DEFAULT_MAILBOX_CAPACITY: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    Transform {
        message: TransformMessage,
        original_png: Arc<Vec<u8>>,
        generated_png: Arc<Vec<u8>>,
    },
    Status {
        level: StatusLevel,
        message: String,
    },
    ConfigChange {
        config: PipelineConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvent {
    pub seq: u64,
    pub body: EventBody,
}

impl SessionEvent {
    pub fn is_transform(&self) -> bool {
        matches!(self.body, EventBody::Transform { .. })
    }

    /// The JSON message and the binary frames that follow it.
    pub fn to_wire(&self) -> (ServerMessage, Vec<BinaryFrame>) {
        match &self.body {
            EventBody::Transform { message, original_png, generated_png } => {
                let mut m = message.clone();
                m.seq = self.seq;
                (
                    ServerMessage::Transform(m),
                    vec![
                        BinaryFrame::png(self.seq, Slot::Original, original_png.to_vec()),
                        BinaryFrame::png(self.seq, Slot::Generated, generated_png.to_vec()),
                    ],
                )
            }
            EventBody::Status { level, message } => (
                ServerMessage::Status { seq: self.seq, level: *level, message: message.clone() },
                Vec::new(),
            ),
            EventBody::ConfigChange { config } => (ServerMessage::ConfigChange { seq: self.seq, config: config.clone() }, Vec::new()),
        }
    }
}

#[derive(Default)]
struct MailboxState {
    events: VecDeque<Arc<SessionEvent>>,
    dropped: u64,
    closed: bool,
}

pub struct Mailbox {
    state: Mutex<MailboxState>,
    capacity: usize,
    notify: Notify,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Mailbox {
    fn new(capacity: usize) -> Self {
        Mailbox { state: Mutex::new(MailboxState::default()), capacity: capacity.max(1), notify: Notify::new() }
    }

    fn push(&self, event: Arc<SessionEvent>) {
        let mut s = lock(&self.state);
        if s.closed {
            return;
        }
        if s.events.len() >= self.capacity {
            let victim = s.events.iter().position(|e| e.is_transform()).unwrap_or(0);
            s.events.remove(victim);
            s.dropped += 1;
        }
        s.events.push_back(event);
        drop(s);
        self.notify.notify_one();
    }

    fn close(&self) {
        lock(&self.state).closed = true;
        self.notify.notify_one();
    }

    pub fn try_recv(&self) -> Option<Arc<SessionEvent>> {
        lock(&self.state).events.pop_front()
    }

    /// Next event; `None` once the hub has closed and the mailbox is drained.
    pub async fn recv(&self) -> Option<Arc<SessionEvent>> {
        loop {
            let notified = self.notify.notified();
            {
                let mut s = lock(&self.state);
                if let Some(e) = s.events.pop_front() {
                    return Some(e);
                }
                if s.closed {
                    return None;
                }
            }
            notified.await;
        }
    }

    /// Events discarded by the drop-oldest policy so far.
    pub fn dropped(&self) -> u64 {
        lock(&self.state).dropped
    }
}

struct HubState {
    next_seq: u64,
    next_id: u64,
    subscribers: Vec<(u64, Arc<Mailbox>)>,
    closed: bool,
}

pub struct Hub {
    state: Mutex<HubState>,
    arrivals: Condvar,
    capacity: usize,
}

pub struct Subscription {
    hub: Arc<Hub>,
    id: u64,
    mailbox: Arc<Mailbox>,
}

impl Subscription {
    pub fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }
}

impl std::ops::Deref for Subscription {
    type Target = Mailbox;
    fn deref(&self) -> &Mailbox {
        &self.mailbox
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        lock(&self.hub.state).subscribers.retain(|(id, _)| *id != self.id);
    }
}

impl Hub {
    pub fn new(mailbox_capacity: usize) -> Arc<Self> {
        Arc::new(Hub {
            state: Mutex::new(HubState { next_seq: 0, next_id: 0, subscribers: Vec::new(), closed: false }),
            arrivals: Condvar::new(),
            capacity: mailbox_capacity,
        })
    }

    pub fn subscribe(self: &Arc<Self>) -> Subscription {
        let mailbox = Arc::new(Mailbox::new(self.capacity));
        let mut s = lock(&self.state);
        if s.closed {
            mailbox.close();
        }
        let id = s.next_id;
        s.next_id += 1;
        s.subscribers.push((id, mailbox.clone()));
        drop(s);
        self.arrivals.notify_all();
        Subscription { hub: self.clone(), id, mailbox }
    }

    pub fn subscriber_count(&self) -> usize {
        lock(&self.state).subscribers.len()
    }

    /// Blocks until at least `n` consumers are subscribed or `timeout`
    /// passes. Returns whether the count was reached.
    pub fn wait_for_subscribers(&self, n: usize, timeout: Option<Duration>) -> bool {
        let mut s = lock(&self.state);
        let deadline = timeout.map(|t| std::time::Instant::now() + t);
        while s.subscribers.len() < n {
            match deadline {
                None => s = self.arrivals.wait(s).unwrap_or_else(|p| p.into_inner()),
                Some(d) => {
                    let now = std::time::Instant::now();
                    if now >= d {
                        return false;
                    }
                    s = self.arrivals.wait_timeout(s, d - now).unwrap_or_else(|p| p.into_inner()).0;
                }
            }
        }
        true
    }

    /// The number the next `publish` will stamp. Only meaningful when a
    /// single thread publishes.
    pub fn peek_next_seq(&self) -> u64 {
        lock(&self.state).next_seq
    }

    /// Stamps the next sequence number and delivers to every mailbox.
    pub fn publish(&self, body: EventBody) -> u64 {
        let mut s = lock(&self.state);
        let seq = s.next_seq;
        s.next_seq += 1;
        let event = Arc::new(SessionEvent { seq, body });
        for (_, m) in &s.subscribers {
            m.push(event.clone());
        }
        seq
    }

    /// Delivers an event that already carries its sequence number (replay).
    /// Later `publish` calls continue after it.
    pub fn republish(&self, event: SessionEvent) {
        let mut s = lock(&self.state);
        s.next_seq = s.next_seq.max(event.seq + 1);
        let event = Arc::new(event);
        for (_, m) in &s.subscribers {
            m.push(event.clone());
        }
    }

    pub fn status(&self, level: StatusLevel, message: impl Into<String>) -> u64 {
        self.publish(EventBody::Status { level, message: message.into() })
    }

    /// No further events; consumers drain what they hold and finish.
    pub fn close(&self) {
        let mut s = lock(&self.state);
        s.closed = true;
        for (_, m) in &s.subscribers {
            m.close();
        }
    }

    pub fn is_closed(&self) -> bool {
        lock(&self.state).closed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transform() -> EventBody {
        EventBody::Transform {
            message: TransformMessage {
                seq: 0,
                frame_id: 0,
                caption: String::new(),
                word_count: 0,
                latencies: seethrough_core::pipeline::session_log::Latencies { capture: 0.0, caption: 0.0, generation: 0.0, total: 0.0 },
                augmenters: Vec::new(),
                inference_steps: 4,
                seed: 0,
            },
            original_png: Arc::new(Vec::new()),
            generated_png: Arc::new(Vec::new()),
        }
    }

    #[test]
    fn drop_oldest_transform_first() {
        let hub = Hub::new(3);
        let sub = hub.subscribe();
        hub.status(StatusLevel::Info, "hello"); // 0
        hub.publish(transform()); // 1
        hub.publish(transform()); // 2
        hub.publish(transform()); // 3 evicts 1
        hub.publish(transform()); // 4 evicts 2
        let seqs: Vec<u64> = std::iter::from_fn(|| sub.try_recv()).map(|e| e.seq).collect();
        assert_eq!(seqs, vec![0, 3, 4]);
        assert_eq!(sub.dropped(), 2);
    }

    #[test]
    fn unsubscribe_on_drop() {
        let hub = Hub::new(2);
        let a = hub.subscribe();
        assert_eq!(hub.subscriber_count(), 1);
        drop(a);
        assert_eq!(hub.subscriber_count(), 0);
    }

    #[tokio::test]
    async fn closed_hub_ends_streams() {
        let hub = Hub::new(4);
        let sub = hub.subscribe();
        hub.status(StatusLevel::Info, "x");
        hub.close();
        assert_eq!(sub.recv().await.unwrap().seq, 0);
        assert!(sub.recv().await.is_none());
    }
}
