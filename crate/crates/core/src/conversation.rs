//! The conversation record: the unit of persistence and replay.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::outcome::FeedbackLevel;
use crate::verdict::ToolVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessagePhase {
    Design,
    Testbench,
    ToolFeedback,
    HumanFeedback,
    Continuation,
}

impl MessagePhase {
    pub fn carries_level(self) -> bool {
        matches!(self, MessagePhase::ToolFeedback | MessagePhase::HumanFeedback)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    pub phase: MessagePhase,
    /// Milliseconds; wall clock for live sessions, a logical clock for replays.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_level: Option<FeedbackLevel>,
    /// Set on an assistant attempt replaced by a regeneration. It stays in the
    /// record but is not sent back to the model.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub superseded: bool,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>, phase: MessagePhase, feedback_level: Option<FeedbackLevel>) -> Self {
        ChatMessage { role: Role::User, content: content.into(), phase, timestamp: 0, feedback_level, superseded: false }
    }

    pub fn assistant(content: impl Into<String>, phase: MessagePhase, feedback_level: Option<FeedbackLevel>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into(), phase, timestamp: 0, feedback_level, superseded: false }
    }

    pub fn is_well_formed(&self) -> bool {
        self.phase.carries_level() == self.feedback_level.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub benchmark_id: String,
    pub trial_label: String,
    pub messages: Vec<ChatMessage>,
    /// Tool verdicts keyed by the index of the message they follow.
    #[serde(default)]
    pub attachments: BTreeMap<usize, Vec<ToolVerdict>>,
}

impl Conversation {
    pub fn new(id: impl Into<String>, benchmark_id: impl Into<String>, trial_label: impl Into<String>) -> Self {
        Conversation {
            id: id.into(),
            benchmark_id: benchmark_id.into(),
            trial_label: trial_label.into(),
            messages: Vec::new(),
            attachments: BTreeMap::new(),
        }
    }

    /// Messages that form the context sent to the model.
    pub fn live_messages(&self) -> impl Iterator<Item = &ChatMessage> {
        self.messages.iter().filter(|m| !m.superseded)
    }

    pub fn last_live(&self) -> Option<&ChatMessage> {
        self.live_messages().last()
    }

    pub fn attach(&mut self, index: usize, verdict: ToolVerdict) {
        self.attachments.entry(index).or_default().push(verdict);
    }

    /// Live messages alternate user/assistant starting with a user message,
    /// and every message satisfies the level/phase pairing.
    pub fn is_well_formed(&self) -> bool {
        let mut expect = Role::User;
        for m in self.live_messages() {
            if m.role != expect || !m.is_well_formed() {
                return false;
            }
            expect = match expect {
                Role::User => Role::Assistant,
                Role::Assistant => Role::User,
            };
        }
        self.messages.iter().all(|m| !m.superseded || m.role == Role::Assistant)
    }
}

/// Number of user-role messages.
pub fn count_user_messages(conversation: &Conversation) -> usize {
    conversation.messages.iter().filter(|m| m.role == Role::User).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_and_shape() {
        let mut c = Conversation::new("c1", "bin2bcd", "T2");
        assert_eq!(count_user_messages(&c), 0);
        assert!(c.is_well_formed());
        c.messages.push(ChatMessage::user("design please", MessagePhase::Design, None));
        let mut first = ChatMessage::assistant("bad", MessagePhase::Design, None);
        first.superseded = true;
        c.messages.push(first);
        c.messages.push(ChatMessage::assistant("good", MessagePhase::Design, None));
        c.messages.push(ChatMessage::user("tb please", MessagePhase::Testbench, None));
        c.messages.push(ChatMessage::assistant("tb", MessagePhase::Testbench, None));
        assert_eq!(count_user_messages(&c), 2);
        assert!(c.is_well_formed());
        assert_eq!(c.last_live().unwrap().content, "tb");
        c.messages.push(ChatMessage::user("fix", MessagePhase::ToolFeedback, None));
        assert!(!c.is_well_formed());
    }
}
