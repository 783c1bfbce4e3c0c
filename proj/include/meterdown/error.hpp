#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace meterdown {

/// Pipeline error with a stable machine-readable code and a JSON context
/// object (line numbers, offending ids, ...). The CLI prints `to_json()` on
/// stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message,
        nlohmann::json context = nlohmann::json::object());

  const std::string& code() const noexcept { return code_; }
  const nlohmann::json& context() const noexcept { return context_; }

  nlohmann::json to_json() const;

 private:
  std::string code_;
  nlohmann::json context_;
};

/// Deterministically derives an independent stream seed from a base seed and
/// a stream index (meter index, fold number, epoch, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace meterdown
