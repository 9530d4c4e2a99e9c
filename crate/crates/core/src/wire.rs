// Copyright 2026 The ACP+ Authors.
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

//! Update and ACK frames.
//!
//! Every frame starts with the same 16-byte header:
//!
//! ```text
//!  0      1      2        3       4           8                        16
//! +------+------+--------+-------+-----------+------------------------+
//! | 0xAC | 0x50 | version| kind  | seq (BE)  | timestamp µs (BE)      |
//! +------+------+--------+-------+-----------+------------------------+
//! ```
//!
//! `kind` is 0 for updates and 1 for ACKs. Updates carry an opaque payload
//! after the header; its length is implied by the datagram length. ACKs
//! are exactly 16 bytes and echo both the sequence number and the
//! generation timestamp of the update they acknowledge.

use thiserror::Error;

pub const MAGIC: [u8; 2] = [0xAC, 0x50];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const MAX_PAYLOAD: usize = 65_000;
pub const DEFAULT_PAYLOAD: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    Update = 0,
    Ack = 1,
}

impl FrameKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(FrameKind::Update),
            1 => Some(FrameKind::Ack),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdatePacket {
    pub version: u8,
    pub seq: u32,
    /// Generation timestamp on the source clock, microseconds.
    pub gen_ts_us: u64,
    pub payload: Vec<u8>,
}

impl UpdatePacket {
    pub fn new(seq: u32, gen_ts_us: u64, payload: Vec<u8>) -> Self {
        UpdatePacket {
            version: VERSION,
            seq,
            gen_ts_us,
            payload,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckPacket {
    pub version: u8,
    pub seq: u32,
    pub echo_ts_us: u64,
}

impl AckPacket {
    pub fn new(seq: u32, echo_ts_us: u64) -> Self {
        AckPacket {
            version: VERSION,
            seq,
            echo_ts_us,
        }
    }

    /// The ACK a monitor returns for `update`.
    pub fn for_update(update: &UpdatePacket) -> Self {
        AckPacket::new(update.seq, update.gen_ts_us)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("payload of {len} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLarge { len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("buffer of {len} bytes is shorter than the {HEADER_LEN}-byte header")]
    ShortBuffer { len: usize },
    #[error("bad magic {0:#04x}{1:02x}")]
    BadMagic(u8, u8),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown frame kind {0}")]
    BadKind(u8),
    #[error("expected {expected:?} frame, found {found:?}")]
    KindMismatch {
        expected: FrameKind,
        found: FrameKind,
    },
    #[error("frame length {len} does not match the layout")]
    LengthMismatch { len: usize },
}

/// Either frame, as read off a socket that carries both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Update(UpdatePacket),
    Ack(AckPacket),
}

fn write_header(out: &mut Vec<u8>, version: u8, kind: FrameKind, seq: u32, ts: u64) {
    out.extend_from_slice(&MAGIC);
    out.push(version);
    out.push(kind as u8);
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend_from_slice(&ts.to_be_bytes());
}

struct Header {
    version: u8,
    kind: FrameKind,
    seq: u32,
    ts: u64,
}

fn read_header(b: &[u8]) -> Result<Header, DecodeError> {
    if b.len() < HEADER_LEN {
        return Err(DecodeError::ShortBuffer { len: b.len() });
    }
    if b[0..2] != MAGIC {
        return Err(DecodeError::BadMagic(b[0], b[1]));
    }
    if b[2] != VERSION {
        return Err(DecodeError::BadVersion(b[2]));
    }
    let kind = FrameKind::from_byte(b[3]).ok_or(DecodeError::BadKind(b[3]))?;
    let seq = u32::from_be_bytes([b[4], b[5], b[6], b[7]]);
    let mut ts = [0u8; 8];
    ts.copy_from_slice(&b[8..16]);
    Ok(Header {
        version: b[2],
        kind,
        seq,
        ts: u64::from_be_bytes(ts),
    })
}

pub fn encode_update(p: &UpdatePacket) -> Result<Vec<u8>, EncodeError> {
    if p.payload.len() > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLarge {
            len: p.payload.len(),
        });
    }
    let mut out = Vec::with_capacity(p.encoded_len());
    write_header(&mut out, p.version, FrameKind::Update, p.seq, p.gen_ts_us);
    out.extend_from_slice(&p.payload);
    Ok(out)
}

pub fn decode_update(b: &[u8]) -> Result<UpdatePacket, DecodeError> {
    let h = read_header(b)?;
    if h.kind != FrameKind::Update {
        return Err(DecodeError::KindMismatch {
            expected: FrameKind::Update,
            found: h.kind,
        });
    }
    if b.len() - HEADER_LEN > MAX_PAYLOAD {
        return Err(DecodeError::LengthMismatch { len: b.len() });
    }
    Ok(UpdatePacket {
        version: h.version,
        seq: h.seq,
        gen_ts_us: h.ts,
        payload: b[HEADER_LEN..].to_vec(),
    })
}

pub fn encode_ack(a: &AckPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    write_header(&mut out, a.version, FrameKind::Ack, a.seq, a.echo_ts_us);
    out
}

pub fn decode_ack(b: &[u8]) -> Result<AckPacket, DecodeError> {
    let h = read_header(b)?;
    if h.kind != FrameKind::Ack {
        return Err(DecodeError::KindMismatch {
            expected: FrameKind::Ack,
            found: h.kind,
        });
    }
    if b.len() != HEADER_LEN {
        return Err(DecodeError::LengthMismatch { len: b.len() });
    }
    Ok(AckPacket {
        version: h.version,
        seq: h.seq,
        echo_ts_us: h.ts,
    })
}

/// Decodes whichever frame kind the header announces.
pub fn decode_frame(b: &[u8]) -> Result<Frame, DecodeError> {
    let h = read_header(b)?;
    match h.kind {
        FrameKind::Update => decode_update(b).map(Frame::Update),
        FrameKind::Ack => decode_ack(b).map(Frame::Ack),
    }
}

/// Seconds on a local monotonic clock to wire microseconds.
pub fn secs_to_us(t: f64) -> u64 {
    if t <= 0.0 {
        0
    } else {
        (t * 1e6).round() as u64
    }
}

pub fn us_to_secs(us: u64) -> f64 {
    us as f64 * 1e-6
}
