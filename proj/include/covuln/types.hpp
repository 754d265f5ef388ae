#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace covuln {

using SampleId = std::int64_t;

/// Binary vulnerability verdict. Every label and model decision in the
/// pipeline is expressed with this enum; integer encodings only exist at
/// file boundaries.
enum class Verdict : std::uint8_t { Vulnerable, Clean };

constexpr Verdict flip(Verdict v) noexcept {
  return v == Verdict::Vulnerable ? Verdict::Clean : Verdict::Vulnerable;
}

/// Canonical serialized encoding: 1 = Vulnerable, 0 = Clean.
constexpr int to_canonical(Verdict v) noexcept { return v == Verdict::Vulnerable ? 1 : 0; }

std::optional<Verdict> from_canonical(std::int64_t raw) noexcept;

/// "vulnerable" / "clean" (wire vocabulary of the detector contract).
std::string_view to_string(Verdict v) noexcept;
std::optional<Verdict> parse_verdict_word(std::string_view word) noexcept;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (dataset records, manifests, store files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace covuln
