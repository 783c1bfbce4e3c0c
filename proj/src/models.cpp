#include "meterdown/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "meterdown/error.hpp"

namespace meterdown {

std::string_view arch_name(Arch arch) { return arch == Arch::dnn1 ? "dnn1" : "dnn2"; }

Arch parse_arch(std::string_view text) {
  if (text == "dnn1") return Arch::dnn1;
  if (text == "dnn2") return Arch::dnn2;
  throw Error("models.arch", "unknown architecture '" + std::string(text) + "', expected dnn1 or dnn2",
              {{"arch", text}});
}

namespace {

void add_dense(std::vector<NamedBlock>& out, const std::string& name, DenseLayer& layer) {
  out.emplace_back(name + ".weight", &layer.weight);
  out.emplace_back(name + ".bias", &layer.bias);
}

void add_gate(std::vector<NamedBlock>& out, const std::string& name, GruGate& gate) {
  out.emplace_back(name + ".input_weight", &gate.input_weight);
  out.emplace_back(name + ".recurrent_weight", &gate.recurrent_weight);
  out.emplace_back(name + ".bias", &gate.bias);
}

ModelParameters shaped_zeros(Arch arch, const ModelDims& d) {
  ModelParameters p;
  p.gru = GruParams::zeros(d.input_dim, d.hidden);
  p.sequence_dense = DenseLayer::zeros(d.hidden, kSequenceDenseUnits, Activation::relu);
  if (arch == Arch::dnn1) {
    p.sequence_wide = DenseLayer::zeros(kSequenceDenseUnits, kWideUnits, Activation::relu);
  } else {
    p.categorical_wide = DenseLayer::zeros(d.categorical, kWideUnits, Activation::relu);
    p.categorical_narrow = DenseLayer::zeros(kWideUnits, kCategoricalNarrowUnits, Activation::relu);
    p.merged = DenseLayer::zeros(kSequenceDenseUnits + kCategoricalNarrowUnits, kWideUnits, Activation::relu);
  }
  p.output = DenseLayer::zeros(kWideUnits, 1, Activation::identity);
  return p;
}

void check_dims(Arch arch, const ModelDims& dims) {
  if (dims.input_dim == 0 || dims.hidden == 0) {
    throw Error("models.dims", "input_dim and hidden must be positive",
                {{"input_dim", dims.input_dim}, {"hidden", dims.hidden}});
  }
  if (arch == Arch::dnn2 && dims.categorical == 0) {
    throw Error("models.dims", "dnn2 needs a non-empty categorical input (C = 0)", {{"categorical", 0}});
  }
}

}  // namespace

std::vector<NamedBlock> parameter_blocks(ModelParameters& p, Arch arch) {
  std::vector<NamedBlock> out;
  add_gate(out, "gru.update", p.gru.update);
  add_gate(out, "gru.reset", p.gru.reset);
  add_gate(out, "gru.candidate", p.gru.candidate);
  add_dense(out, "sequence_dense", p.sequence_dense);
  if (arch == Arch::dnn1) {
    add_dense(out, "sequence_wide", p.sequence_wide);
  } else {
    add_dense(out, "categorical_wide", p.categorical_wide);
    add_dense(out, "categorical_narrow", p.categorical_narrow);
    add_dense(out, "merged", p.merged);
  }
  add_dense(out, "output", p.output);
  return out;
}

Model::Model(Arch arch, const ModelDims& dims) : arch_(arch), dims_(dims) {
  if (arch == Arch::dnn1) dims_.categorical = 0;
  check_dims(arch_, dims_);
  params_ = shaped_zeros(arch_, dims_);
}

Model Model::zeros(Arch arch, const ModelDims& dims) { return Model(arch, dims); }

Model Model::init(Arch arch, const ModelDims& dims, std::uint64_t seed) {
  Model m(arch, dims);
  std::mt19937_64 rng(seed);
  for (auto& [name, block] : m.blocks()) {
    if (block->rows() == 1 && name.ends_with(".bias")) continue;
    glorot_uniform(*block, block->rows(), block->cols(), rng);
  }
  return m;
}

std::size_t Model::parameter_count() const {
  auto copy = params_;
  std::size_t n = 0;
  for (const auto& [name, block] : parameter_blocks(copy, arch_)) n += block->size();
  return n;
}

ModelParameters Model::zero_gradients() const { return shaped_zeros(arch_, dims_); }

std::size_t expected_parameter_count(Arch arch, const ModelDims& d) {
  const auto dense = [](std::size_t in, std::size_t out) { return in * out + out; };
  const std::size_t gru = 3 * (d.input_dim * d.hidden + d.hidden * d.hidden + d.hidden);
  std::size_t n = gru + dense(d.hidden, kSequenceDenseUnits) + dense(kWideUnits, 1);
  if (arch == Arch::dnn1) {
    n += dense(kSequenceDenseUnits, kWideUnits);
  } else {
    n += dense(d.categorical, kWideUnits) + dense(kWideUnits, kCategoricalNarrowUnits) +
         dense(kSequenceDenseUnits + kCategoricalNarrowUnits, kWideUnits);
  }
  return n;
}

double Model::forward(const Matrix& sequence, std::span<const double> categorical, ForwardCache& cache) const {
  if (sequence.cols() != dims_.input_dim) {
    throw Error("models.input_dim", "sequence has " + std::to_string(sequence.cols()) + " features, model expects " +
                                        std::to_string(dims_.input_dim),
                {{"expected", dims_.input_dim}, {"found", sequence.cols()}});
  }
  if (arch_ == Arch::dnn2 && categorical.size() != dims_.categorical) {
    throw Error("models.categorical_dim",
                "categorical vector has " + std::to_string(categorical.size()) + " entries, model expects " +
                    std::to_string(dims_.categorical),
                {{"expected", dims_.categorical}, {"found", categorical.size()}});
  }
  const std::vector<double> h0(dims_.hidden, 0.0);
  const auto h = gru_forward(params_.gru, sequence, h0, cache.gru);
  const auto a = dense_forward(params_.sequence_dense, h, cache.sequence_dense);
  std::span<const double> wide;
  if (arch_ == Arch::dnn1) {
    wide = dense_forward(params_.sequence_wide, a, cache.sequence_wide);
  } else {
    const auto c1 = dense_forward(params_.categorical_wide, categorical, cache.categorical_wide);
    const auto c2 = dense_forward(params_.categorical_narrow, c1, cache.categorical_narrow);
    cache.merged_input.assign(a.begin(), a.end());
    cache.merged_input.insert(cache.merged_input.end(), c2.begin(), c2.end());
    wide = dense_forward(params_.merged, cache.merged_input, cache.merged);
  }
  const auto logit = dense_forward(params_.output, wide, cache.output);
  cache.probability = sigmoid(logit[0]);
  return cache.probability;
}

double Model::forward(const Matrix& sequence, std::span<const double> categorical) const {
  ForwardCache cache;
  return forward(sequence, categorical, cache);
}

double Model::forward(const EncodedExample& example) const { return forward(example.sequence, example.categorical); }

double Model::accumulate_gradients(const EncodedExample& example, ModelParameters& grads, ForwardCache& cache) const {
  const double p = forward(example.sequence, example.categorical, cache);
  const auto loss = bce_loss(p, example.label);
  const double dlogit[1] = {loss.grad_logit};
  const auto d_wide = dense_backward(params_.output, cache.output, dlogit, grads.output);
  std::vector<double> d_seq;
  if (arch_ == Arch::dnn1) {
    d_seq = dense_backward(params_.sequence_wide, cache.sequence_wide, d_wide, grads.sequence_wide);
  } else {
    const auto d_merged = dense_backward(params_.merged, cache.merged, d_wide, grads.merged);
    const std::span<const double> all(d_merged);
    d_seq.assign(all.begin(), all.begin() + kSequenceDenseUnits);
    const auto d_c2 = all.subspan(kSequenceDenseUnits);
    const auto d_c1 = dense_backward(params_.categorical_narrow, cache.categorical_narrow, d_c2,
                                     grads.categorical_narrow);
    dense_backward(params_.categorical_wide, cache.categorical_wide, d_c1, grads.categorical_wide);
  }
  const auto d_h = dense_backward(params_.sequence_dense, cache.sequence_dense, d_seq, grads.sequence_dense);
  gru_backward(params_.gru, cache.gru, d_h, grads.gru);
  return loss.loss;
}

bool operator==(const Model& a, const Model& b) {
  if (a.arch_ != b.arch_ || !(a.dims_ == b.dims_)) return false;
  auto pa = a.params_;
  auto pb = b.params_;
  const auto ba = parameter_blocks(pa, a.arch_);
  const auto bb = parameter_blocks(pb, b.arch_);
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (!(*ba[i].second == *bb[i].second)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("models.config", "epochs must be >= 1", {{"epochs", epochs}});
  if (batch_size < 1) throw Error("models.config", "batch_size must be >= 1", {{"batch_size", batch_size}});
  if (hidden < 1) throw Error("models.config", "hidden must be >= 1", {{"hidden", hidden}});
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw Error("models.config", "invalid Adam hyperparameters");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"hidden", c.hidden},
          {"seed", c.seed},
          {"adam",
           {{"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& a = j.at("adam");
  c.adam = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
            a.at("epsilon").get<double>()};
  return c;
}

std::vector<double> train(Model& model, std::span<const EncodedExample> examples, const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw Error("models.train", "empty training set");
  const bool has_pos = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.label == 1.0; });
  const bool has_neg = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.label == 0.0; });
  if (!has_pos || !has_neg) {
    throw Error("models.single_class", "training set must contain both classes",
                {{"positives", has_pos}, {"negatives", has_neg}});
  }

  auto grads = model.zero_gradients();
  const auto value_blocks = model.blocks();
  const auto grad_blocks = parameter_blocks(grads, model.arch());
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < value_blocks.size(); ++i) {
    refs.push_back({value_blocks[i].first, value_blocks[i].second, grad_blocks[i].second});
  }
  AdamState adam{config.adam, 0, {}, {}};
  ForwardCache cache;
  std::vector<std::size_t> order(examples.size());
  std::vector<double> history;
  history.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config.seed, epoch + 1));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (const auto& [name, g] : grad_blocks) g->fill(0.0);
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += model.accumulate_gradients(examples[order[i]], grads, cache);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (const auto& [name, g] : grad_blocks) {
        for (double& v : g->values()) v *= scale;
      }
      adam_step(refs, adam);
    }
    history.push_back(epoch_loss / static_cast<double>(examples.size()));
    if (!std::isfinite(history.back())) {
      throw Error("models.diverged", "training loss became non-finite", {{"epoch", epoch}});
    }
  }
  return history;
}

std::vector<double> predict(const Model& model, std::span<const EncodedExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  ForwardCache cache;
  for (const auto& e : examples) out.push_back(model.forward(e.sequence, e.categorical, cache));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string hex_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, ptr);
}

double parse_hex_double(const std::string& s, const std::string& block) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error("bundle.corrupt", "bad parameter value '" + s + "' in block " + block, {{"block", block}});
  }
  return v;
}

}  // namespace

nlohmann::json bundle_to_json(const ModelBundle& b) {
  auto params = b.model.parameters();
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [name, m] : parameter_blocks(params, b.model.arch())) {
    nlohmann::json data = nlohmann::json::array();
    for (double v : m->values()) data.push_back(hex_double(v));
    blocks.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"data", std::move(data)}});
  }
  const auto& d = b.model.dims();
  return {
      {"format", kBundleFormat},
      {"version", kBundleVersion},
      {"arch", arch_name(b.model.arch())},
      {"dims", {{"input_dim", d.input_dim}, {"hidden", d.hidden}, {"categorical", d.categorical}}},
      {"scheme", b.scheme.name()},
      {"train_config", to_json(b.config)},
      {"scaler", to_json(b.encoders.scaler)},
      {"vocab", to_json(b.encoders.vocab)},
      {"parameters", std::move(blocks)},
  };
}

ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kBundleFormat) {
      throw Error("bundle.format", "not a meterdown model bundle");
    }
    const int version = j.at("version").get<int>();
    if (version != kBundleVersion) {
      throw Error("bundle.version",
                  "bundle version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kBundleVersion) + ")",
                  {{"found", version}, {"expected", kBundleVersion}});
    }
    const auto arch = parse_arch(j.at("arch").get<std::string>());
    ModelDims dims;
    dims.input_dim = j.at("dims").at("input_dim").get<std::size_t>();
    dims.hidden = j.at("dims").at("hidden").get<std::size_t>();
    dims.categorical = j.at("dims").at("categorical").get<std::size_t>();

    ModelBundle b;
    b.model = Model::zeros(arch, dims);
    b.scheme = Scheme::parse(j.at("scheme").get<std::string>());
    b.config = train_config_from_json(j.at("train_config"));
    b.encoders.scaler = scaler_from_json(j.at("scaler"));
    b.encoders.vocab = vocab_from_json(j.at("vocab"));
    if (arch == Arch::dnn2 && b.encoders.vocab.dimension() != dims.categorical) {
      throw Error("bundle.corrupt", "vocabulary width does not match the model's categorical input");
    }

    const auto& stored = j.at("parameters");
    auto blocks = b.model.blocks();
    if (!stored.is_array() || stored.size() != blocks.size()) {
      throw Error("bundle.corrupt", "parameter block count mismatch",
                  {{"expected", blocks.size()}, {"found", stored.size()}});
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& s = stored[i];
      auto& [name, m] = blocks[i];
      const auto& data = s.at("data");
      if (s.at("name").get<std::string>() != name || s.at("rows").get<std::size_t>() != m->rows() ||
          s.at("cols").get<std::size_t>() != m->cols() || data.size() != m->size()) {
        throw Error("bundle.corrupt", "parameter block " + name + " has unexpected name or shape", {{"block", name}});
      }
      auto values = m->values();
      for (std::size_t k = 0; k < values.size(); ++k) values[k] = parse_hex_double(data[k].get<std::string>(), name);
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bundle.corrupt", std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io.open", "cannot write " + path.string(), {{"path", path.string()}});
  out << bundle_to_json(bundle).dump(1) << '\n';
  if (!out) throw Error("io.write", "failed writing " + path.string(), {{"path", path.string()}});
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open " + path.string(), {{"path", path.string()}});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bundle.corrupt", std::string("bundle is not valid JSON: ") + e.what(), {{"path", path.string()}});
  }
  return bundle_from_json(j);
}

}  // namespace meterdown
