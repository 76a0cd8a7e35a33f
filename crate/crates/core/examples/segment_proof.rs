//! Splits a model response into independently applicable tactic blocks.

use feas::suggest::{join_blocks, parse_response, AgentMode, SuggestionResponse};

const RESPONSE: &str = r#"Substitute 1/x into the first equation and combine it with the second.

```lean
begin
  intro x,
  intro hx,
  have h_2 : f (1 / x + 1) = f (1 / x) + 1 := h_0 (1 / x),
  have h_3 : f (1 / x) = f x / x ^ 2 := h_1 x hx,
  rw h_3 at h_2,
  rw add_comm at h_2,
  nlinarith,
end
```"#;

fn main() {
    let resp = SuggestionResponse::from_raw(RESPONSE);
    println!("strategy: {}\n", resp.strategy_text);
    for mode in [AgentMode::Feas, AgentMode::Copra, AgentMode::FewShot] {
        let blocks = parse_response(&resp, mode);
        println!("{mode:?}: {} block(s)", blocks.len());
        for b in &blocks {
            let span = b.span().map(|s| format!("lines {}-{}", s.start_line, s.end_line)).unwrap_or_default();
            println!("  [{span}] {}", b.text().replace('\n', " ⏎ "));
        }
    }
    let blocks = parse_response(&resp, AgentMode::Feas);
    println!("\nrejoined:\n{}", join_blocks(&blocks));
}
