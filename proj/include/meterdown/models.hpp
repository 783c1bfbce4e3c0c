#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "meterdown/features.hpp"
#include "meterdown/label.hpp"
#include "meterdown/neuralcore.hpp"

namespace meterdown {

/// dnn1: GRU -> dense 32 -> dense 128 -> sigmoid output.
/// dnn2: [GRU -> dense 32] || [one-hot -> dense 128 -> dense 96], concatenated
///       (32 + 96 = 128) -> dense 128 -> sigmoid output.
enum class Arch { dnn1, dnn2 };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view text);

inline constexpr std::size_t kSequenceDenseUnits = 32;
inline constexpr std::size_t kWideUnits = 128;
inline constexpr std::size_t kCategoricalNarrowUnits = 96;

struct ModelDims {
  std::size_t input_dim = kContinuousFeatures;
  std::size_t hidden = 32;
  std::size_t categorical = 0;  ///< one-hot width, dnn2 only

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Every weight block of either architecture. Blocks an architecture does
/// not use stay empty. The same type holds gradients.
struct ModelParameters {
  GruParams gru;
  DenseLayer sequence_dense;      // H -> 32
  DenseLayer sequence_wide;       // dnn1: 32 -> 128
  DenseLayer categorical_wide;    // dnn2: C -> 128
  DenseLayer categorical_narrow;  // dnn2: 128 -> 96
  DenseLayer merged;              // dnn2: 128 -> 128
  DenseLayer output;              // 128 -> 1, produces the logit
};

using NamedBlock = std::pair<std::string, Matrix*>;

/// Named parameter blocks in a fixed order; empty blocks of the other
/// architecture are skipped.
std::vector<NamedBlock> parameter_blocks(ModelParameters& params, Arch arch);

/// Per-example activations kept for the backward pass. Reusable across calls.
struct ForwardCache {
  GruCache gru;
  DenseCache sequence_dense;
  DenseCache sequence_wide;
  DenseCache categorical_wide;
  DenseCache categorical_narrow;
  std::vector<double> merged_input;
  DenseCache merged;
  DenseCache output;
  double probability = 0.0;
};

class Model {
 public:
  /// Seeded Glorot-uniform weights, zero biases. dnn2 requires categorical > 0.
  static Model init(Arch arch, const ModelDims& dims, std::uint64_t seed);
  /// All-zero parameters with the architecture's shapes.
  static Model zeros(Arch arch, const ModelDims& dims);

  Arch arch() const noexcept { return arch_; }
  const ModelDims& dims() const noexcept { return dims_; }
  ModelParameters& parameters() noexcept { return params_; }
  const ModelParameters& parameters() const noexcept { return params_; }

  std::vector<NamedBlock> blocks() { return parameter_blocks(params_, arch_); }
  std::size_t parameter_count() const;

  /// Zero-filled gradient accumulator matching this model.
  ModelParameters zero_gradients() const;

  /// Defect probability in (0, 1).
  double forward(const Matrix& sequence, std::span<const double> categorical) const;
  double forward(const EncodedExample& example) const;
  double forward(const Matrix& sequence, std::span<const double> categorical, ForwardCache& cache) const;

  /// Runs forward + backward for one example, adds parameter gradients of
  /// the binary cross-entropy into `grads` and returns the loss.
  double accumulate_gradients(const EncodedExample& example, ModelParameters& grads, ForwardCache& cache) const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  Model(Arch arch, const ModelDims& dims);

  Arch arch_ = Arch::dnn1;
  ModelDims dims_;
  ModelParameters params_;
};

/// Parameter count from the layer widths alone.
std::size_t expected_parameter_count(Arch arch, const ModelDims& dims);

struct TrainConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t hidden = 32;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Mini-batch Adam for exactly `config.epochs` epochs. The example order of
/// each epoch is a permutation of positions drawn from (seed, epoch) only.
/// Returns the mean training loss of every epoch.
std::vector<double> train(Model& model, std::span<const EncodedExample> examples, const TrainConfig& config);

std::vector<double> predict(const Model& model, std::span<const EncodedExample> examples);

/// Model plus the encoders and scheme it was trained with.
struct ModelBundle {
  Model model = Model::zeros(Arch::dnn1, {});
  FeatureEncoders encoders;
  Scheme scheme;
  TrainConfig config;
};

inline constexpr int kBundleVersion = 1;
inline constexpr std::string_view kBundleFormat = "meterdown-model-bundle";

/// Floats are stored as hexadecimal text, so a reload is bit-exact.
nlohmann::json bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& j);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace meterdown
