//! Bounded re-prompting until a reply satisfies its output contract.

use crate::backend::{Backend, BackendError, ChatRequest, Message};

#[derive(Debug)]
pub(crate) struct Repaired<T> {
    pub value: T,
    pub repair_count: u32,
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum RepairError {
    #[error("{attempts} replies violated the output contract; last: {}", .violations.join("; "))]
    Exhausted { attempts: u32, violations: Vec<String> },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub(crate) fn repair_prompt(violations: &[String]) -> String {
    let mut s = String::from("Your previous reply did not satisfy the output contract:\n");
    for v in violations {
        s.push_str("- ");
        s.push_str(v);
        s.push('\n');
    }
    s.push_str("Reply again with only the fenced block described above.");
    s
}

/// Issue `request`; on a contract violation append the reply and a repair
/// message and ask again. At most `attempts` replies are requested in total.
pub(crate) fn complete_with_repair<T>(
    backend: &dyn Backend,
    mut request: ChatRequest,
    attempts: u32,
    parse: impl Fn(&str) -> Result<T, Vec<String>>,
) -> Result<Repaired<T>, RepairError> {
    let attempts = attempts.max(1);
    let mut violations = Vec::new();
    for n in 0..attempts {
        let reply = backend.complete(&request)?;
        match parse(&reply) {
            Ok(value) => return Ok(Repaired { value, repair_count: n }),
            Err(v) => {
                log::debug!("reply {} violated contract: {v:?}", n + 1);
                request.messages.push(Message::assistant(reply));
                request.messages.push(Message::user(repair_prompt(&v)));
                violations = v;
            }
        }
    }
    Err(RepairError::Exhausted { attempts, violations })
}
