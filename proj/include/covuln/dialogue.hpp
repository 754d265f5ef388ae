#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "covuln/backends.hpp"
#include "covuln/corpus.hpp"

namespace covuln {

/// Prompt wording. The defaults are the built-in "v1" templates; the same
/// text ships as templates/prompts.v1.json and may be overridden by file.
///
/// Placeholders: {clause} and {answer} in `phase2`; {n}, {code} and {answer}
/// in `fewshot_example`.
struct PromptTemplates {
  std::string version = "v1";
  std::string intro;
  std::string answer_instruction;
  std::string cot_instruction;
  std::string code_prefix;
  std::string phase2;
  std::string clause_clean;
  std::string clause_vulnerable;
  std::string fewshot_header;
  std::string fewshot_example;
  std::string answer_yes;
  std::string answer_no;

  static PromptTemplates defaults();
  static PromptTemplates load(const std::filesystem::path& path);
  static PromptTemplates from_json(const nlohmann::json& j);
  [[nodiscard]] nlohmann::json to_json() const;
};

enum class PromptingVariant { Plain, Cot, FewShot };

std::string_view to_string(PromptingVariant v) noexcept;
PromptingVariant parse_prompting_variant(std::string_view text);

struct FewShotCounts {
  std::size_t vulnerable = 2;
  std::size_t clean = 1;
};

/// Phase I: one user message holding the preamble, "Code: " and the code
/// verbatim. `cot` inserts the reasoning instruction before the Yes/No
/// instruction.
Transcript build_phase1_prompt(const CodeSample& sample,
                               const PromptTemplates& templates = PromptTemplates::defaults(),
                               bool cot = false);

/// Phase II: the Phase I exchange followed by the recheck request. The
/// clause reads "does not have vulnerabilities" iff `hint` is Clean.
Transcript build_phase2_prompt(const Transcript& phase1, const std::string& phase1_reply,
                               Verdict hint,
                               const PromptTemplates& templates = PromptTemplates::defaults());

/// Seeded exemplar choice from a (training-split) pool: per class, the pool
/// sorted by id is shuffled with `seed` and the first `counts` samples whose
/// id differs from `query_id` are taken, Vulnerable first. Throws
/// ContractError when the pool cannot supply the counts.
std::vector<CodeSample> select_exemplars(std::span<const CodeSample> pool, SampleId query_id,
                                         FewShotCounts counts, std::uint64_t seed);

/// Few-shot Phase I: worked examples (with their own label words) precede
/// the usual Phase I text in a single user message.
Transcript build_fewshot_prompt(const CodeSample& sample, std::span<const CodeSample> pool,
                                std::uint64_t seed, FewShotCounts counts = {},
                                const PromptTemplates& templates = PromptTemplates::defaults(),
                                bool cot = false);

/// LLM verdict c and description n. No verdict means Unknown.
struct ParsedReply {
  std::optional<Verdict> verdict;
  std::optional<std::string> description;

  [[nodiscard]] bool unknown() const noexcept { return !verdict.has_value(); }
  friend bool operator==(const ParsedReply&, const ParsedReply&) = default;
};

/// Total parser for "[Yes][description]" / "No" style replies.
ParsedReply parse_reply(std::string_view text);

/// Tokens that would reveal a ground-truth label if they appeared in a
/// prompt (matched case-insensitively).
std::span<const std::string_view> label_leak_tokens() noexcept;

/// The first label token found in `text`, if any.
std::optional<std::string> find_label_leak(std::string_view text);

}  // namespace covuln
