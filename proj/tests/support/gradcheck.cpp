#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lab/loss.hpp"
#include "lab/ops.hpp"
#include "lab/params.hpp"
#include "lab/rng.hpp"

namespace labtest {

using lab::Shape;
using lab::Tensor;
using lab::Var;

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
}

std::vector<double> numeric_gradient(const std::function<double(const Tensor&)>& loss, Tensor point,
                                     std::span<const std::size_t> coords, double h) {
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(point.numel());
    std::iota(all.begin(), all.end(), 0);
    coords = all;
  }
  std::vector<double> g;
  g.reserve(coords.size());
  for (std::size_t i : coords) {
    const double keep = point[i];
    point[i] = keep + h;
    const double up = loss(point);
    point[i] = keep - h;
    const double down = loss(point);
    point[i] = keep;
    g.push_back((up - down) / (2.0 * h));
  }
  return g;
}

GradCheck gradcheck(const Graph& graph, const std::vector<Tensor>& inputs, double h) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::leaf(t, true));
  lab::backward(graph(leaves));

  GradCheck worst;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto loss = [&](const Tensor& probe) {
      std::vector<Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) vars.push_back(Var::leaf(j == k ? probe : inputs[j]));
      return graph(vars).value().item();
    };
    const Tensor analytic = leaves[k].grad().is_null() ? Tensor(inputs[k].shape(), 0.0) : leaves[k].grad();
    const auto numeric = numeric_gradient(loss, inputs[k], {}, h);
    const double err = relative_error(analytic.data(), numeric);
    if (err > worst.error) worst = {err, k};
  }
  return worst;
}

Var weighted_sum(const Var& out, std::uint64_t seed) {
  return lab::sum(lab::mul(out, Var::leaf(random_tensor(out.shape(), seed ^ 0x5eedULL, 0.5, 1.5))));
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  lab::Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor spread_tensor(Shape shape, std::uint64_t seed, double gap) {
  lab::Rng rng(seed);
  Tensor t(std::move(shape));
  std::vector<double> mags(t.numel());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = gap * static_cast<double>(i + 1);
  rng.shuffle(mags);
  for (std::size_t i = 0; i < mags.size(); ++i) t[i] = rng.uniform() < 0.5 ? -mags[i] : mags[i];
  return t;
}

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) { return lab::derive_seed(seed, k); }

NamedCheck unary(std::string name, Shape shape, bool spread, std::function<Var(const Var&)> op) {
  return {name, [shape, spread, op](std::uint64_t seed) {
            const Tensor x = spread ? spread_tensor(shape, sub_seed(seed, 0)) : random_tensor(shape, sub_seed(seed, 0));
            return gradcheck([&](const std::vector<Var>& v) { return weighted_sum(op(v[0]), seed); }, {x});
          }};
}

NamedCheck binary(std::string name, Shape a, Shape b, std::function<Var(const Var&, const Var&)> op) {
  return {name, [a, b, op](std::uint64_t seed) {
            return gradcheck([&](const std::vector<Var>& v) { return weighted_sum(op(v[0], v[1]), seed); },
                             {random_tensor(a, sub_seed(seed, 0)), random_tensor(b, sub_seed(seed, 1))});
          }};
}

std::vector<NamedCheck> build_checks() {
  std::vector<NamedCheck> c;
  c.push_back(binary("add", {3, 4}, {3, 4}, lab::add));
  c.push_back(binary("add_broadcast", {2, 3, 4}, {4}, lab::add));
  c.push_back(binary("sub_broadcast", {3, 4}, {3, 1}, lab::sub));
  c.push_back(binary("mul", {3, 4}, {3, 4}, lab::mul));
  c.push_back(binary("mul_broadcast", {2, 3, 4}, {3, 1}, lab::mul));
  c.push_back({"maximum", [](std::uint64_t seed) {
                 const Tensor both = spread_tensor({2, 12}, sub_seed(seed, 0));
                 Tensor a({3, 4}), b({3, 4});
                 for (std::size_t i = 0; i < 12; ++i) a[i] = both[i], b[i] = both[12 + i];
                 return gradcheck([&](const std::vector<Var>& v) { return weighted_sum(lab::maximum(v[0], v[1]), seed); },
                                  {a, b});
               }});
  c.push_back(unary("scale", {3, 4}, false, [](const Var& x) { return lab::scale(x, -1.7); }));
  c.push_back(binary("matmul", {3, 4}, {4, 2}, lab::matmul));
  c.push_back({"conv2d", [](std::uint64_t seed) {
                 return gradcheck(
                     [&](const std::vector<Var>& v) {
                       return weighted_sum(lab::conv2d(v[0], v[1], v[2], {.stride = 1, .padding = 1}), seed);
                     },
                     {random_tensor({2, 5, 4}, sub_seed(seed, 0)), random_tensor({3, 2, 3, 3}, sub_seed(seed, 1)),
                      random_tensor({3}, sub_seed(seed, 2))});
               }});
  c.push_back({"conv2d_strided", [](std::uint64_t seed) {
                 return gradcheck(
                     [&](const std::vector<Var>& v) {
                       return weighted_sum(lab::conv2d(v[0], v[1], Var(), {.stride = 2, .padding = 0}), seed);
                     },
                     {random_tensor({1, 7, 6}, sub_seed(seed, 0)), random_tensor({2, 1, 3, 2}, sub_seed(seed, 1))});
               }});
  c.push_back(unary("max_pool2d", {2, 4, 6}, true, [](const Var& x) { return lab::max_pool2d(x, 2); }));
  c.push_back(unary("global_avg_pool", {3, 4, 5}, false, lab::global_avg_pool));
  c.push_back(unary("relu", {3, 5}, true, lab::relu));
  c.push_back(unary("sigmoid", {3, 5}, false, [](const Var& x) { return lab::sigmoid(lab::scale(x, 3.0)); }));
  c.push_back(unary("abs", {3, 5}, true, lab::abs));
  c.push_back(unary("softmax", {3, 5}, false, [](const Var& x) { return lab::softmax(lab::scale(x, 2.0)); }));
  c.push_back({"layer_norm", [](std::uint64_t seed) {
                 return gradcheck(
                     [&](const std::vector<Var>& v) { return weighted_sum(lab::layer_norm(v[0], v[1], v[2]), seed); },
                     {random_tensor({3, 6}, sub_seed(seed, 0), -2.0, 2.0), random_tensor({6}, sub_seed(seed, 1)),
                      random_tensor({6}, sub_seed(seed, 2))});
               }});
  c.push_back(unary("transpose", {3, 5}, false, lab::transpose));
  c.push_back(unary("reshape", {3, 4}, false, [](const Var& x) { return lab::reshape(x, {2, 6}); }));
  c.push_back(binary("concat_rows", {2, 3}, {4, 3}, [](const Var& a, const Var& b) { return lab::concat({a, b}, 0); }));
  c.push_back(binary("concat_cols", {3, 2}, {3, 4}, [](const Var& a, const Var& b) { return lab::concat({a, b}, 1); }));
  c.push_back(unary("slice", {4, 6}, false, [](const Var& x) { return lab::slice(x, 1, 1, 4); }));
  c.push_back({"sum", [](std::uint64_t seed) {
                 return gradcheck([](const std::vector<Var>& v) { return lab::sum(lab::mul(v[0], v[0])); },
                                  {random_tensor({3, 4}, seed)});
               }});
  c.push_back({"mean", [](std::uint64_t seed) {
                 return gradcheck([](const std::vector<Var>& v) { return lab::mean(lab::mul(v[0], v[0])); },
                                  {random_tensor({3, 4}, seed)});
               }});
  c.push_back({"cross_entropy", [](std::uint64_t seed) {
                 const int target = static_cast<int>(seed % 4);
                 return gradcheck([&](const std::vector<Var>& v) { return lab::cross_entropy(v[0], target); },
                                  {random_tensor({4}, seed, -3.0, 3.0)});
               }});
  c.push_back({"cross_entropy_batch", [](std::uint64_t seed) {
                 const std::vector<int> targets{static_cast<int>(seed % 3), 0, 2};
                 return gradcheck([&](const std::vector<Var>& v) { return lab::cross_entropy(v[0], targets); },
                                  {random_tensor({3, 3}, seed, -3.0, 3.0)});
               }});
  c.push_back({"l1_loss", [](std::uint64_t seed) {
                 const Tensor target = random_tensor({3, 4}, sub_seed(seed, 1));
                 Tensor pred = spread_tensor({3, 4}, sub_seed(seed, 0));
                 for (std::size_t i = 0; i < pred.numel(); ++i) pred[i] += target[i];
                 return gradcheck([&](const std::vector<Var>& v) { return lab::l1_loss(v[0], target); }, {pred});
               }});
  c.push_back({"l1_loss_sum", [](std::uint64_t seed) {
                 const Tensor pred = spread_tensor({2, 5}, seed);
                 return gradcheck(
                     [&](const std::vector<Var>& v) {
                       return lab::l1_loss(v[0], Tensor({2, 5}, 0.0), lab::Reduction::kSum);
                     },
                     {pred});
               }});
  c.push_back({"masked_l1_loss", [](std::uint64_t seed) {
                 const std::vector<bool> rows{true, false, true, false};
                 const Tensor pred = spread_tensor({4, 3}, seed);
                 return gradcheck(
                     [&](const std::vector<Var>& v) { return lab::masked_l1_loss(v[0], Tensor({4, 3}, 0.0), rows); },
                     {pred});
               }});
  return c;
}

}  // namespace

const std::vector<NamedCheck>& op_gradchecks() {
  static const std::vector<NamedCheck> checks = build_checks();
  return checks;
}

GradCheck classifier_gradcheck(lab::Architecture arch, std::uint64_t seed, std::size_t params_per_tensor) {
  const lab::InputGeometry geometry{16, 12};
  lab::ClassifierModel model = lab::build_classifier(arch, lab::InputMode::kRawSpectrogram, seed, geometry);
  model.set_input_norm({0.3, 1.7});
  const int label = static_cast<int>(seed % 2);
  const Tensor x = random_tensor({geometry.height, geometry.width}, lab::derive_seed(seed, "input"), -3.0, 3.0);

  auto loss_with = [&](const lab::ParamSet& params, const Var& input) {
    const lab::BoundParams bound(params, false);
    return lab::cross_entropy(model.forward(bound, input), label).value().item();
  };

  GradCheck worst;
  {
    const Var input = Var::leaf(x, true);
    const lab::BoundParams bound(model.params(), false);
    lab::backward(lab::cross_entropy(model.forward(bound, input), label));
    const auto numeric =
        numeric_gradient([&](const Tensor& probe) { return loss_with(model.params(), Var::leaf(probe)); }, x);
    worst = {relative_error(input.grad().data(), numeric), 0};
  }

  const lab::BoundParams bound(model.params(), true);
  lab::backward(lab::cross_entropy(model.forward(bound, Var::leaf(x)), label));
  const auto grads = bound.grads();
  lab::Rng pick(lab::derive_seed(seed, "coords"));
  for (std::size_t k = 0; k < model.params().size(); ++k) {
    const auto& p = model.params().items()[k];
    std::vector<std::size_t> coords;
    for (std::size_t j = 0; j < std::min(params_per_tensor, p.value.numel()); ++j) {
      coords.push_back(pick.uniform_index(p.value.numel()));
    }
    std::vector<double> analytic;
    for (std::size_t i : coords) analytic.push_back(grads[k][i]);
    lab::ParamSet probe_set = model.params();
    const auto numeric = numeric_gradient(
        [&](const Tensor& probe) {
          probe_set.items()[k].value = probe;
          return loss_with(probe_set, Var::leaf(x));
        },
        p.value, coords);
    const double err = relative_error(analytic, numeric);
    if (err > worst.error) worst = {err, k + 1};
  }
  return worst;
}

}  // namespace labtest
