#include "lab/encoder.hpp"

#include <cmath>

#include "lab/errors.hpp"
#include "lab/ops.hpp"
#include "lab/rng.hpp"
#include "lab/serialize.hpp"

namespace lab {

void EncoderConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || ff_dim == 0 || bins == 0 || stack_factor == 0) {
    throw UsageError("encoder config: all sizes must be positive");
  }
  if (model_dim % heads != 0) {
    throw UsageError("encoder config: model_dim " + std::to_string(model_dim) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"layers", c.layers}, {"model_dim", c.model_dim}, {"heads", c.heads},
          {"ff_dim", c.ff_dim}, {"bins", c.bins},           {"stack_factor", c.stack_factor}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.bins = j.value("bins", c.bins);
  c.stack_factor = j.value("stack_factor", c.stack_factor);
  c.validate();
  return c;
}

EncoderModel::EncoderModel(EncoderConfig config, ParamSet params) : config_(config), params_(std::move(params)) {
  config_.validate();
}

ParamSet EncoderModel::body_params() const {
  ParamSet body;
  for (const auto& p : params_.items()) {
    if (p.name.rfind("enc.", 0) == 0) body.add(p.name, p.value);
  }
  return body;
}

namespace {

std::string layer_key(std::size_t layer, const char* name) { return "enc.l" + std::to_string(layer) + "." + name; }

Tensor uniform_tensor(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void add_linear(ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t in, std::size_t out) {
  ps.add(prefix + ".w", uniform_tensor(rng, {in, out}, in));
  ps.add(prefix + ".b", uniform_tensor(rng, {out}, in));
}

void add_norm(ParamSet& ps, const std::string& prefix, std::size_t dim) {
  ps.add(prefix + ".g", Tensor(Shape{dim}, 1.0));
  ps.add(prefix + ".b", Tensor(Shape{dim}, 0.0));
}

Var linear(const BoundParams& p, const std::string& prefix, const Var& x) {
  return add(matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

Var norm(const BoundParams& p, const std::string& prefix, const Var& x) {
  return layer_norm(x, p[prefix + ".g"], p[prefix + ".b"]);
}

Var self_attention(const EncoderConfig& c, const BoundParams& p, std::size_t layer, const Var& h) {
  const std::size_t d = c.model_dim, dk = d / c.heads;
  const Var qkv = linear(p, "enc.l" + std::to_string(layer) + ".qkv", h);  // [L, 3d]
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> heads;
  heads.reserve(c.heads);
  for (std::size_t k = 0; k < c.heads; ++k) {
    const Var q = slice(qkv, 1, k * dk, (k + 1) * dk);
    const Var key = slice(qkv, 1, d + k * dk, d + (k + 1) * dk);
    const Var v = slice(qkv, 1, 2 * d + k * dk, 2 * d + (k + 1) * dk);
    const Var attn = softmax(scale(matmul(q, transpose(key)), inv_sqrt_dk));
    heads.push_back(matmul(attn, v));
  }
  return linear(p, layer_key(layer, "out"), concat(heads, 1));
}

}  // namespace

EncoderModel random_init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamSet ps;
  const std::size_t d = config.model_dim;
  add_linear(ps, rng, "enc.in", config.input_dim(), d);
  add_norm(ps, "enc.in_norm", d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    add_linear(ps, rng, layer_key(l, "qkv"), d, 3 * d);
    add_linear(ps, rng, layer_key(l, "out"), d, d);
    add_norm(ps, layer_key(l, "norm1"), d);
    add_linear(ps, rng, layer_key(l, "ff1"), d, config.ff_dim);
    add_linear(ps, rng, layer_key(l, "ff2"), config.ff_dim, d);
    add_norm(ps, layer_key(l, "norm2"), d);
  }
  add_linear(ps, rng, "head.fc", d, d);
  add_norm(ps, "head.norm", d);
  add_linear(ps, rng, "head.out", d, config.input_dim());
  return EncoderModel(config, std::move(ps));
}

Tensor sinusoidal_positions(std::size_t steps, std::size_t dim) {
  Tensor pe(Shape{steps, dim});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

std::vector<Var> encoder_forward(const EncoderConfig& c, const BoundParams& p, const Var& steps) {
  if (steps.shape().size() != 2 || steps.shape()[1] != c.input_dim()) {
    throw ShapeError("encoder: expected [steps, " + std::to_string(c.input_dim()) + "] input, got " +
                     shape_str(steps.shape()));
  }
  const std::size_t L = steps.shape()[0];
  std::vector<Var> hidden{steps};
  hidden.reserve(c.layers + 1);
  Var h = add(linear(p, "enc.in", steps), Var::leaf(sinusoidal_positions(L, c.model_dim)));
  h = norm(p, "enc.in_norm", h);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const Var a = norm(p, layer_key(l, "norm1"), add(h, self_attention(c, p, l, h)));
    const Var f = linear(p, layer_key(l, "ff2"), relu(linear(p, layer_key(l, "ff1"), a)));
    h = norm(p, layer_key(l, "norm2"), add(a, f));
    hidden.push_back(h);
  }
  return hidden;
}

Var reconstruction_head(const EncoderConfig& c, const BoundParams& p, const Var& hidden) {
  if (hidden.shape().size() != 2 || hidden.shape()[1] != c.model_dim) {
    throw ShapeError("reconstruction head: expected [steps, " + std::to_string(c.model_dim) + "], got " +
                     shape_str(hidden.shape()));
  }
  const Var z = norm(p, "head.norm", relu(linear(p, "head.fc", hidden)));
  return linear(p, "head.out", z);
}

Var stack_frames(const Var& spectrogram, std::size_t factor) {
  if (spectrogram.shape().size() != 2) {
    throw ShapeError("stack_frames: expected [frames, bins], got " + shape_str(spectrogram.shape()));
  }
  if (factor == 0) throw UsageError("stack_frames: factor must be >= 1");
  const std::size_t T = spectrogram.shape()[0], F = spectrogram.shape()[1];
  const std::size_t steps = (T + factor - 1) / factor;
  Var padded = spectrogram;
  if (steps * factor != T) padded = concat({spectrogram, Var::leaf(Tensor(Shape{steps * factor - T, F}))}, 0);
  return reshape(padded, Shape{steps, F * factor});
}

FrozenEncoder::FrozenEncoder(const EncoderModel& model) : config_(model.config()), bound_(model.params(), false) {}

std::vector<Var> FrozenEncoder::forward(const Var& spectrogram) const {
  if (spectrogram.shape().size() != 2 || spectrogram.shape()[1] != config_.bins) {
    throw ShapeError("encoder: expected [frames, " + std::to_string(config_.bins) + "] spectrogram, got " +
                     shape_str(spectrogram.shape()));
  }
  return encoder_forward(config_, bound_, stack_frames(spectrogram, config_.stack_factor));
}

std::vector<Tensor> FrozenEncoder::hidden_states(const Spectrogram& spec) const {
  auto vars = forward(Var::leaf(spec.values()));
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

Tensor FrozenEncoder::features(const Spectrogram& spec) const { return forward(Var::leaf(spec.values())).back().value(); }

Var FrozenEncoder::reconstruct(const Var& steps) const {
  return reconstruction_head(config_, bound_, encoder_forward(config_, bound_, steps).back());
}

std::vector<Tensor> encode(const EncoderModel& model, const Spectrogram& spec) {
  return FrozenEncoder(model).hidden_states(spec);
}

void save_encoder(const std::filesystem::path& path, const EncoderModel& model, const EncoderCheckpointInfo& info) {
  nlohmann::json meta{{"type", "encoder"}, {"config", to_json(model.config())}, {"seed", info.seed}, {"kind", info.kind}};
  save_checkpoint(path, meta, model.params());
}

EncoderModel load_encoder(const std::filesystem::path& path, const EncoderConfig* expected, EncoderCheckpointInfo* info) {
  auto ck = load_checkpoint(path);
  if (ck.meta.value("type", "") != "encoder") throw FormatError("encoder: " + path.string() + " is not an encoder checkpoint");
  const EncoderConfig config = encoder_config_from_json(ck.meta.at("config"));
  if (expected && !(config == *expected)) {
    throw UsageError("encoder: checkpoint " + path.string() + " has config " + to_json(config).dump() +
                     ", expected " + to_json(*expected).dump());
  }
  const EncoderModel reference = random_init_encoder(config, 0);
  for (const auto& p : reference.params().items()) {
    if (!ck.params.contains(p.name) || ck.params.at(p.name).value.shape() != p.value.shape()) {
      throw FormatError("encoder: checkpoint " + path.string() + " lacks a valid '" + p.name + "'");
    }
  }
  if (info) {
    info->seed = ck.meta.value("seed", std::uint64_t{0});
    info->kind = ck.meta.value("kind", "");
  }
  return EncoderModel(config, std::move(ck.params));
}

}  // namespace lab
