//! One JSON object per log line on stderr.

use std::io::Write;

use serde_json::{Map, Value};

/// Level comes from `MASKALIGN_LOG` (default `info`).
pub fn init() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MASKALIGN_LOG", "info"))
        .format(|buf, record| {
            let text = record.args().to_string();
            let mut fields = match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                _ => {
                    let mut m = Map::new();
                    m.insert("message".into(), Value::String(text));
                    m
                }
            };
            fields.insert(
                "level".into(),
                Value::String(record.level().as_str().to_ascii_lowercase()),
            );
            writeln!(buf, "{}", Value::Object(fields))
        })
        .init();
}

/// Logs `fields` plus `"event": name`. `fields` must be a JSON object.
pub fn event(level: log::Level, name: &str, fields: Value) {
    let mut map = match fields {
        Value::Object(m) => m,
        Value::Null => Map::new(),
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("event".into(), Value::String(name.into()));
    log::log!(level, "{}", Value::Object(map));
}
