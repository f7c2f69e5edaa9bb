//! In-network aggregation.
//!
//! Users send a [`LocalMessage`] `(n_k, w_k)` to their edge node. The edge
//! node averages its members into one [`EdgeMessage`] weighted by sample
//! count and forwards only that to the cloud, which combines edge messages
//! the same way. The final model equals the star-topology weighted mean.
//!
//! Messages have a fixed little-endian wire layout:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 1    | version (`1`)                  |
//! | 1      | 1    | kind (`0` local, `1` edge)     |
//! | 2      | 4    | dimension `d`, `u32`           |
//! | 6      | 8    | sample count, `u64`            |
//! | 14     | 8·d  | parameters, IEEE-754 `f64`     |

use crate::error::{Error, Result};
use crate::fl::{weighted_mean, ModelParams};

pub const WIRE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;

const KIND_LOCAL: u8 = 0;
const KIND_EDGE: u8 = 1;

/// What a user uploads: its sample count and locally updated model.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMessage {
    count: u64,
    params: ModelParams,
}

impl LocalMessage {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

/// What an edge node forwards: total member count and the members' weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMessage {
    count: u64,
    params: ModelParams,
}

impl EdgeMessage {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Local(LocalMessage),
    Edge(EdgeMessage),
}

impl Message {
    pub fn count(&self) -> u64 {
        match self {
            Message::Local(m) => m.count,
            Message::Edge(m) => m.count,
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            Message::Local(m) => &m.params,
            Message::Edge(m) => &m.params,
        }
    }
}

impl From<LocalMessage> for Message {
    fn from(m: LocalMessage) -> Self {
        Message::Local(m)
    }
}

impl From<EdgeMessage> for Message {
    fn from(m: EdgeMessage) -> Self {
        Message::Edge(m)
    }
}

pub fn make_local_message(dataset_count: u64, w: ModelParams) -> Result<LocalMessage> {
    if dataset_count == 0 {
        return Err(Error::InvalidInput("local message needs a positive sample count".into()));
    }
    Ok(LocalMessage { count: dataset_count, params: w })
}

/// Weighted mean of the members of one edge node.
///
/// An edge with no members sends nothing, so an empty slice is an error
/// rather than a zero-count message.
pub fn edge_aggregate(members: &[LocalMessage]) -> Result<EdgeMessage> {
    if members.is_empty() {
        return Err(Error::InvalidInput("edge node has no member messages".into()));
    }
    let params = weighted_mean(members.iter().map(|m| (m.count, m.params.as_slice())))?;
    let count = members
        .iter()
        .try_fold(0u64, |acc, m| acc.checked_add(m.count))
        .ok_or_else(|| Error::InvalidInput("sample count overflow".into()))?;
    Ok(EdgeMessage { count, params })
}

/// Global model from the nonempty edges' messages.
pub fn cloud_aggregate(edges: &[EdgeMessage]) -> Result<ModelParams> {
    if edges.is_empty() {
        return Err(Error::InvalidInput("cloud received no edge messages".into()));
    }
    weighted_mean(edges.iter().map(|m| (m.count, m.params.as_slice())))
}

/// Runs edge aggregation on every nonempty group, then the cloud combine.
/// Returns the global model and the number of messages the cloud received.
pub fn aggregate_groups(groups: &[Vec<LocalMessage>]) -> Result<(ModelParams, usize)> {
    let edges = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| edge_aggregate(g))
        .collect::<Result<Vec<_>>>()?;
    let n = edges.len();
    Ok((cloud_aggregate(&edges)?, n))
}

pub fn encoded_len(dim: usize) -> usize {
    HEADER_LEN + 8 * dim
}

pub fn encode_message(m: &Message) -> Result<Vec<u8>> {
    let (kind, count, params) = match m {
        Message::Local(l) => (KIND_LOCAL, l.count, &l.params),
        Message::Edge(e) => (KIND_EDGE, e.count, &e.params),
    };
    let dim = u32::try_from(params.dim())
        .map_err(|_| Error::InvalidInput(format!("dimension {} exceeds u32", params.dim())))?;
    let mut out = Vec::with_capacity(encoded_len(params.dim()));
    out.push(WIRE_VERSION);
    out.push(kind);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_message(bytes: &[u8]) -> Result<Message> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedMessage(format!(
            "buffer of {} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0] != WIRE_VERSION {
        return Err(Error::MalformedMessage(format!("unsupported version {}", bytes[0])));
    }
    let kind = bytes[1];
    let dim = u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != 8 * dim as u64 {
        return Err(Error::MalformedMessage(format!(
            "payload is {} bytes, expected {} for dimension {dim}",
            payload.len(),
            8 * dim as u64
        )));
    }
    if count == 0 {
        return Err(Error::MalformedMessage("zero sample count".into()));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params =
        ModelParams::new(values).map_err(|e| Error::MalformedMessage(e.to_string()))?;
    match kind {
        KIND_LOCAL => Ok(Message::Local(LocalMessage { count, params })),
        KIND_EDGE => Ok(Message::Edge(EdgeMessage { count, params })),
        k => Err(Error::MalformedMessage(format!("unknown message kind {k}"))),
    }
}
