#include "meterdown/error.hpp"

#include <random>

namespace meterdown {

Error::Error(std::string code, const std::string& message, nlohmann::json context)
    : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

nlohmann::json Error::to_json() const {
  return {{"error", {{"code", code_}, {"message", what()}, {"context", context_}}}};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace meterdown
