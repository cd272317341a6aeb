//! Non-builtin backends: mock model replies, stdout, files, and HTTP.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{value_from_json, FileMode, ReplyRule};
use super::render::canonical_render;
use crate::runtime::value::Value;

fn digest(parts: &[String], salt: Option<usize>) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    if let Some(s) = salt {
        h.update(s.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Deterministic reply for a mock call.
pub fn mock_reply(rule: &ReplyRule, args: &[Value], serial: u64) -> Result<Value, String> {
    let rendered: Vec<String> = args.iter().map(canonical_render).collect();
    Ok(match rule {
        ReplyRule::HashMod { modulus, prefix } => {
            let v = digest(&rendered, None) % modulus;
            match prefix {
                Some(p) => Value::text(format!("{p}{v}")),
                None => Value::Int(v as i64),
            }
        }
        ReplyRule::Echo => match args {
            [one] => one.clone(),
            _ => Value::tuple(args.to_vec()),
        },
        ReplyRule::Constant { value } => value_from_json(value, serial)?,
        ReplyRule::Expand { n, sep } => {
            let items: Vec<String> = (0..*n).map(|i| format!("{:06x}", digest(&rendered, Some(i)) & 0xff_ffff)).collect();
            Value::text(items.join(sep))
        }
    })
}

/// Latency of one mock call. Unseeded runs use the nominal latency.
pub fn mock_latency(latency_ms: f64, jitter: f64, seed: Option<u64>, call_id: u64) -> Duration {
    let ms = match seed {
        None => latency_ms,
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ call_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let f: f64 = rng.gen_range(-1.0..=1.0);
            latency_ms * (1.0 + jitter * f)
        }
    };
    Duration::from_secs_f64(ms.max(0.0) / 1000.0)
}

/// The line `print(*args)` writes.
pub fn stdout_line(args: &[Value]) -> String {
    args.iter().map(Value::py_str).collect::<Vec<_>>().join(" ")
}

pub(crate) fn write_stdout(line: &str) {
    let out = std::io::stdout();
    let mut lock = out.lock();
    let _ = writeln!(lock, "{line}");
}

/// `read(path)`, `write(path, text)` or `append(path, text)`.
pub fn file_call(mode: FileMode, root: Option<&str>, args: &[Value]) -> Result<Value, String> {
    let path = match args.first() {
        Some(Value::Text(p)) => p.to_string(),
        _ => return Err("file backend expects a path string as first argument".into()),
    };
    let full = match root {
        Some(r) => PathBuf::from(r).join(path),
        None => PathBuf::from(path),
    };
    let content = || match args.get(1) {
        Some(v) if args.len() == 2 => Ok(v.py_str()),
        _ => Err("file write expects (path, content)".to_string()),
    };
    match mode {
        FileMode::Read => std::fs::read_to_string(&full).map(Value::text).map_err(|e| format!("{}: {e}", full.display())),
        FileMode::Write => {
            std::fs::write(&full, content()?).map_err(|e| format!("{}: {e}", full.display()))?;
            Ok(Value::None)
        }
        FileMode::Append => {
            let mut f =
                std::fs::OpenOptions::new().create(true).append(true).open(&full).map_err(|e| format!("{}: {e}", full.display()))?;
            f.write_all(content()?.as_bytes()).map_err(|e| format!("{}: {e}", full.display()))?;
            Ok(Value::None)
        }
    }
}

/// Blocking HTTP request. Body `{"args": [...]}`; the reply's `value` field is returned.
pub fn http_call(url: &str, method: &str, timeout_ms: u64, rendered: Vec<String>) -> Result<serde_json::Value, String> {
    let client = reqwest::blocking::Client::builder().timeout(Duration::from_millis(timeout_ms)).build().map_err(|e| e.to_string())?;
    let m = reqwest::Method::from_bytes(method.as_bytes()).map_err(|e| e.to_string())?;
    let body = serde_json::json!({ "args": rendered });
    let resp =
        client.request(m, url).header("content-type", "application/json").body(body.to_string()).send().map_err(|e| e.to_string())?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    let text = resp.text().map_err(|e| e.to_string())?;
    let mut j: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("bad reply JSON: {e}"))?;
    j.get_mut("value").map(serde_json::Value::take).ok_or_else(|| "reply lacks a `value` field".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_reply_is_deterministic() {
        let rule = ReplyRule::HashMod { modulus: 10, prefix: Some("value:".into()) };
        let a = mock_reply(&rule, &[Value::text("prompt")], 0).unwrap();
        let b = mock_reply(&rule, &[Value::text("prompt")], 5).unwrap();
        assert_eq!(a.py_str(), b.py_str());
        assert!(a.py_str().starts_with("value:"));
    }

    #[test]
    fn expand_yields_n_items() {
        let r = mock_reply(&ReplyRule::Expand { n: 3, sep: "|".into() }, &[Value::text("p")], 0).unwrap();
        assert_eq!(r.py_str().split('|').count(), 3);
    }

    #[test]
    fn seeded_latency_in_range() {
        for id in 0..100 {
            let d = mock_latency(100.0, 1.0, Some(7), id).as_secs_f64() * 1000.0;
            assert!((0.0..=200.0).contains(&d));
        }
        assert_eq!(mock_latency(100.0, 1.0, None, 3), Duration::from_millis(100));
        assert_eq!(mock_latency(100.0, 1.0, Some(1), 3), mock_latency(100.0, 1.0, Some(1), 3));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_str().unwrap();
        file_call(FileMode::Write, Some(root), &[Value::text("a.txt"), Value::text("x")]).unwrap();
        file_call(FileMode::Append, Some(root), &[Value::text("a.txt"), Value::text("y")]).unwrap();
        let v = file_call(FileMode::Read, Some(root), &[Value::text("a.txt")]).unwrap();
        assert_eq!(v.py_str(), "xy");
        assert!(file_call(FileMode::Read, Some(root), &[Value::text("missing")]).is_err());
    }
}
