#include "covuln/types.hpp"

namespace covuln {

std::optional<Verdict> from_canonical(std::int64_t raw) noexcept {
  if (raw == 1) return Verdict::Vulnerable;
  if (raw == 0) return Verdict::Clean;
  return std::nullopt;
}

std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::Vulnerable ? "vulnerable" : "clean";
}

std::optional<Verdict> parse_verdict_word(std::string_view word) noexcept {
  if (word == "vulnerable") return Verdict::Vulnerable;
  if (word == "clean") return Verdict::Clean;
  return std::nullopt;
}

}  // namespace covuln
