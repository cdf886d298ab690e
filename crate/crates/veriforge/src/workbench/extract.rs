//! Pulls Verilog out of free-form model responses.

use thiserror::Error;

/// No code could be extracted. The full response rides along so the
/// audit log can show what the model actually said.
#[derive(Debug, Error)]
#[error("no extractable Verilog in response ({} bytes)", response.len())]
pub struct ExtractError {
    pub response: String,
}

#[derive(Debug)]
struct FencedBlock<'a> {
    tag: String,
    body: &'a str,
}

/// Extracts the Verilog payload from a chat response.
///
/// Selection order: the first fenced code block tagged as Verilog, then
/// the first untagged fenced block, and only when the response has no
/// fences at all, the span from the first line starting with `module`
/// through the last `endmodule` line.
pub fn extract_verilog(response_text: &str) -> Result<String, ExtractError> {
    let blocks = fenced_blocks(response_text);
    if !blocks.is_empty() {
        if let Some(block) = blocks.iter().find(|b| is_verilog_tag(&b.tag)) {
            return Ok(block.body.to_string());
        }
        if let Some(block) = blocks.iter().find(|b| b.tag.is_empty()) {
            return Ok(block.body.to_string());
        }
        return Err(ExtractError {
            response: response_text.to_string(),
        });
    }
    bare_module_span(response_text).ok_or_else(|| ExtractError {
        response: response_text.to_string(),
    })
}

fn is_verilog_tag(tag: &str) -> bool {
    matches!(tag, "verilog" | "systemverilog" | "sv" | "v")
}

/// Scans for ``` fences, returning each block's tag and exact interior
/// bytes. An unterminated final fence extends to the end of the text,
/// which tolerates truncated responses.
fn fenced_blocks(text: &str) -> Vec<FencedBlock<'_>> {
    let mut blocks = Vec::new();
    let mut open: Option<(String, usize)> = None; // (tag, body start offset)
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']).trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match open.take() {
                None => {
                    let tag = rest
                        .trim_start_matches('`')
                        .split_whitespace()
                        .next()
                        .unwrap_or("")
                        .to_ascii_lowercase();
                    open = Some((tag, offset + line.len()));
                }
                Some((tag, start)) => {
                    blocks.push(FencedBlock {
                        tag,
                        body: &text[start..offset],
                    });
                }
            }
        }
        offset += line.len();
    }
    if let Some((tag, start)) = open {
        blocks.push(FencedBlock {
            tag,
            body: &text[start..],
        });
    }
    blocks
}

fn bare_module_span(text: &str) -> Option<String> {
    let mut start = None;
    let mut offset = 0;
    let mut end = None;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if start.is_none() && is_keyword_at_start(trimmed, "module") {
            start = Some(offset);
        }
        if start.is_some() && trimmed.contains("endmodule") {
            end = Some(offset + line.trim_end_matches(['\n', '\r']).len());
        }
        offset += line.len();
    }
    match (start, end) {
        (Some(s), Some(e)) if e > s => Some(text[s..e].to_string()),
        _ => None,
    }
}

fn is_keyword_at_start(line: &str, keyword: &str) -> bool {
    line.strip_prefix(keyword)
        .map(|rest| rest.is_empty() || !rest.starts_with(|c: char| c.is_alphanumeric() || c == '_'))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_fence_returns_exact_interior() {
        let response = "Here you go:\n```verilog\nmodule m;\nendmodule\n```\nHope it helps!";
        assert_eq!(extract_verilog(response).unwrap(), "module m;\nendmodule\n");
    }

    #[test]
    fn first_verilog_fence_wins_over_earlier_other_tags() {
        let response = "```python\nprint(1)\n```\n```verilog\nmodule a; endmodule\n```\n```verilog\nmodule b; endmodule\n```";
        assert_eq!(extract_verilog(response).unwrap(), "module a; endmodule\n");
    }

    #[test]
    fn untagged_fence_used_when_none_tagged_verilog() {
        let response = "explanation\n```\nmodule u; endmodule\n```";
        assert_eq!(extract_verilog(response).unwrap(), "module u; endmodule\n");
    }

    #[test]
    fn foreign_tagged_fences_only_is_an_error() {
        let response = "```python\nprint('not hardware')\n```";
        let err = extract_verilog(response).unwrap_err();
        assert!(err.response.contains("not hardware"));
    }

    #[test]
    fn bare_module_span_fallback() {
        let response = "Sure! The design is:\nmodule adder(input a, output b);\n  assign b = a;\nendmodule\nLet me know.";
        let got = extract_verilog(response).unwrap();
        assert!(got.starts_with("module adder"));
        assert!(got.ends_with("endmodule"));
        assert!(!got.contains("Let me know"));
    }

    #[test]
    fn bare_span_runs_through_last_endmodule() {
        let response = "module a;\nendmodule\nmodule b;\nendmodule\n";
        let got = extract_verilog(response).unwrap();
        assert!(got.contains("module b;"));
        assert!(got.ends_with("endmodule"));
    }

    #[test]
    fn refusal_text_is_an_extraction_error() {
        let err = extract_verilog("Sorry, I cannot help with that.").unwrap_err();
        assert_eq!(err.response, "Sorry, I cannot help with that.");
    }

    #[test]
    fn modules_word_prefix_does_not_trigger_fallback() {
        assert!(extract_verilog("modules are great\nendmodule style").is_err());
    }

    #[test]
    fn unterminated_fence_extends_to_end() {
        let response = "```verilog\nmodule m;\nendmodule\n";
        assert_eq!(extract_verilog(response).unwrap(), "module m;\nendmodule\n");
    }

    #[test]
    fn empty_response_is_an_error() {
        assert!(extract_verilog("").is_err());
    }
}
