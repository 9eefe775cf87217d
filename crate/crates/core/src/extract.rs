//! Lenient extraction of the first JSON object from model output.

use serde_json::{Map, Value};

/// Returns the first complete JSON object in `text`, skipping surrounding
/// prose and markdown fences. Later objects are ignored.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    let mut offset = 0;
    while let Some(pos) = text[offset..].find('{') {
        let start = offset + pos;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
        offset = start + 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block() {
        let text = "Here is the gist:\n```json\n{\"a\": 1, \"b\": {\"c\": [1,2]}}\n```\nDone.";
        let obj = first_json_object(text).unwrap();
        assert_eq!(obj["a"], 1);
    }

    #[test]
    fn first_of_two() {
        let obj = first_json_object(r#"{"n":1} and {"n":2}"#).unwrap();
        assert_eq!(obj["n"], 1);
    }

    #[test]
    fn skips_broken_prefix() {
        let obj = first_json_object(r#"use {braces} like {"n":3}"#).unwrap();
        assert_eq!(obj["n"], 3);
        assert!(first_json_object("no json here").is_none());
        assert!(first_json_object("[1,2]").is_none());
        assert!(first_json_object("{\"open\": ").is_none());
    }

    proptest::proptest! {
        #[test]
        fn never_panics(s in ".{0,200}") {
            let _ = first_json_object(&s);
        }
    }
}
