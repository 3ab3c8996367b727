//! Locating JSON objects embedded in free-form model output.

use serde_json::{Map, Value};

/// The last JSON object in `text` (by start position) for which `accept`
/// returns true. Nested objects are candidates too. `//` line comments
/// outside string literals are ignored.
pub fn last_object_where(
    text: &str,
    accept: impl Fn(&Map<String, Value>) -> bool,
) -> Option<Map<String, Value>> {
    let text = strip_line_comments(text);
    let mut found = None;
    for (pos, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if accept(&map) {
                found = Some(map);
            }
        }
    }
    found
}

/// Removes `//` comments that sit outside JSON string literals.
fn strip_line_comments(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '/' if chars.peek() == Some(&'/') => {
                for skipped in chars.by_ref() {
                    if skipped == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}
