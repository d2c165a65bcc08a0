//! Wire format: each message is a 4-byte big-endian length followed by that
//! many bytes of UTF-8 JSON. Every message carries `proto_version`.
//!
//! Binary payloads are row-major little-endian f32, base64-encoded.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use lab_core::schema::SchemaError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

pub const PROTO_VERSION: u32 = 1;

/// Largest accepted message body.
pub const MAX_MESSAGE_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    TrajectoryBatch,
    FieldSnapshot,
    EscapeTile,
    SeriesAppend,
}

/// Packed numeric block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    /// Always `"f32le"`: little-endian IEEE single precision.
    pub packing: String,
    /// Row-major dimensions; their product is the sample count.
    pub shape: Vec<usize>,
    pub data: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub meta: Value,
}

impl Payload {
    pub fn pack(shape: Vec<usize>, values: impl IntoIterator<Item = f64>, meta: Value) -> Payload {
        let mut bytes = Vec::with_capacity(4 * shape.iter().product::<usize>());
        for v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        debug_assert_eq!(bytes.len(), 4 * shape.iter().product::<usize>());
        Payload {
            packing: "f32le".into(),
            shape,
            data: B64.encode(bytes),
            meta,
        }
    }

    pub fn unpack(&self) -> Result<Vec<f32>, String> {
        if self.packing != "f32le" {
            return Err(format!("unknown packing `{}`", self.packing));
        }
        let bytes = B64.decode(&self.data).map_err(|e| e.to_string())?;
        if bytes.len() != 4 * self.shape.iter().product::<usize>() {
            return Err(format!("{} bytes do not fill shape {:?}", bytes.len(), self.shape));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub session_id: String,
    pub step: u64,
    pub kind: FrameKind,
    pub param_epoch: u64,
    /// Full-state snapshot sent when a resume point fell out of the replay
    /// buffer.
    #[serde(default)]
    pub keyframe: bool,
    pub payload: Payload,
}

/// Emission cadence: a frame after `steps` steps or `ms` milliseconds,
/// whichever comes first. `ms == 0` disables the time trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cadence {
    pub steps: u64,
    pub ms: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Create {
        experiment: String,
        #[serde(default)]
        params: Map<String, Value>,
        #[serde(default)]
        seed: u64,
    },
    Patch {
        session: String,
        patch: Map<String, Value>,
    },
    Run {
        session: String,
        #[serde(default)]
        cadence: Option<Cadence>,
    },
    Pause {
        session: String,
    },
    Step {
        session: String,
        n: u64,
        #[serde(default)]
        cadence: Option<Cadence>,
    },
    /// Streams frames on this connection. With `after_step`, frames newer
    /// than that step are replayed first if still buffered.
    Subscribe {
        session: String,
        #[serde(default)]
        after_step: Option<u64>,
    },
    Unsubscribe {
        session: String,
    },
    Status {
        session: String,
    },
    Close {
        session: String,
    },
    Health,
    /// Parameter schema for one experiment, or all of them.
    Schema {
        #[serde(default)]
        experiment: Option<String>,
    },
}

/// Error reported to the client; `code` is stable, `message` is for people.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(flatten)]
    pub detail: Map<String, Value>,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.into(),
            message: message.into(),
            detail: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.detail
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }
}

impl From<SchemaError> for ErrorBody {
    fn from(e: SchemaError) -> Self {
        let mut detail = match serde_json::to_value(&e) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        let code = detail
            .remove("error")
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "invalid_params".into());
        ErrorBody {
            code,
            message: e.to_string(),
            detail,
        }
    }
}

/// Server-to-client message.
#[derive(Debug, Clone)]
pub enum Outgoing {
    Response { id: Option<u64>, result: Value },
    Error { id: Option<u64>, error: ErrorBody },
    Frame(Arc<Frame>),
}

impl Outgoing {
    pub fn to_json(&self) -> Value {
        match self {
            Outgoing::Response { id, result } => json!({
                "proto_version": PROTO_VERSION,
                "type": "response",
                "id": id,
                "result": result,
            }),
            Outgoing::Error { id, error } => json!({
                "proto_version": PROTO_VERSION,
                "type": "error",
                "id": id,
                "error": error,
            }),
            Outgoing::Frame(frame) => json!({
                "proto_version": PROTO_VERSION,
                "type": "frame",
                "frame": &**frame,
            }),
        }
    }
}

/// Splits an incoming message into request id and request, checking the
/// protocol version.
pub fn parse_request(msg: &Value) -> (Option<u64>, Result<Request, ErrorBody>) {
    let id = msg.get("id").and_then(Value::as_u64);
    let parsed = match msg.get("proto_version").and_then(Value::as_u64) {
        None => Err(ErrorBody::new("bad_request", "missing proto_version")),
        Some(v) if v != PROTO_VERSION as u64 => Err(ErrorBody::new(
            "unsupported_proto_version",
            format!("server speaks proto_version {PROTO_VERSION}, got {v}"),
        )
        .with("supported", [PROTO_VERSION])),
        Some(_) => Request::deserialize(msg).map_err(|e| ErrorBody::new("bad_request", e.to_string())),
    };
    (id, parsed)
}

/// Length-prefixed encoding of one JSON value.
pub fn encode(msg: &Value) -> Vec<u8> {
    let body = serde_json::to_vec(msg).expect("JSON values always serialize");
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

#[derive(Debug, thiserror::Error)]
pub enum FramingError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("message of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Reads one message; `Ok(None)` on a clean end of stream.
pub async fn read_message<R: AsyncRead + Unpin>(reader: &mut R) -> Result<Option<Value>, FramingError> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_BYTES {
        return Err(FramingError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).await?;
    Ok(Some(serde_json::from_slice(&body)?))
}

pub async fn write_message<W: AsyncWrite + Unpin>(writer: &mut W, msg: &Value) -> std::io::Result<()> {
    writer.write_all(&encode(msg)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_round_trip() {
        let p = Payload::pack(vec![2, 2], [1.0, -2.5, 0.0, 3.25], Value::Null);
        assert_eq!(p.unpack().unwrap(), vec![1.0, -2.5, 0.0, 3.25]);
        let raw = B64.decode(&p.data).unwrap();
        assert_eq!(&raw[..4], &1.0f32.to_le_bytes());
    }

    #[test]
    fn frame_kind_names() {
        assert_eq!(serde_json::to_value(FrameKind::EscapeTile).unwrap(), "escape-tile");
        assert_eq!(serde_json::to_value(FrameKind::TrajectoryBatch).unwrap(), "trajectory-batch");
    }

    #[test]
    fn version_is_checked() {
        let (id, r) = parse_request(&json!({"proto_version": 9, "id": 4, "op": "health"}));
        assert_eq!(id, Some(4));
        assert_eq!(r.unwrap_err().code, "unsupported_proto_version");
        let (_, r) = parse_request(&json!({"proto_version": 1, "op": "health"}));
        assert_eq!(r.unwrap(), Request::Health);
        let (_, r) = parse_request(&json!({"op": "health"}));
        assert_eq!(r.unwrap_err().code, "bad_request");
    }

    #[test]
    fn length_prefix_is_big_endian() {
        let bytes = encode(&json!({}));
        assert_eq!(bytes, [0, 0, 0, 2, b'{', b'}']);
    }

    #[test]
    fn schema_errors_keep_their_field() {
        let e: ErrorBody = SchemaError::RestartRequired {
            experiment: "turing".into(),
            field: "nx".into(),
        }
        .into();
        assert_eq!(e.code, "restart_required");
        assert_eq!(e.detail["field"], "nx");
    }
}
