// Copyright 2026 The altgrasp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Live teleoperation host.
//!
//! A [`session::Session`] advances the shared-control loop one tick at a
//! time and is fully deterministic given the messages applied at each tick.
//! [`server::serve`] wraps it in a WebSocket endpoint that broadcasts a
//! snapshot to every client on each tick.
//!
//! Wire format: JSON text frames shaped `{"type", "seq", "payload"}`. See
//! [`protocol`] for message types.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Envelope, StateSnapshot};
pub use server::serve;
pub use session::{Session, SessionConfig, SessionError};
