#pragma once

// Small dense kernel for the GG-RNN: named parameter sets, affine / GRU /
// masked-softmax layers with hand-written backward passes, plain SGD and a
// central-difference gradient checker.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sfc/common.hpp"

namespace sfc::nn {

// Row-major dense matrix. Vectors are 1 x n rows.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// Named tensors (theta). Iteration order is the sorted name order.
class ParamSet {
 public:
  void add(const std::string& name, Tensor value) {
    if (tensors_.count(name)) throw ShapeError("duplicate parameter '" + name + "'");
    tensors_.emplace(name, std::move(value));
  }

  Tensor& operator[](const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor& operator[](const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeError("unknown parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  std::size_t size() const { return tensors_.size(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& [name, t] : tensors_) z.add(name, Tensor::Zero(t.rows(), t.cols()));
    return z;
  }

  bool same_layout(const ParamSet& o) const {
    if (tensors_.size() != o.tensors_.size()) return false;
    for (const auto& [name, t] : tensors_) {
      auto it = o.tensors_.find(name);
      if (it == o.tensors_.end() || it->second.rows() != t.rows() ||
          it->second.cols() != t.cols()) {
        return false;
      }
    }
    return true;
  }

  bool operator==(const ParamSet& o) const {
    if (!same_layout(o)) return false;
    for (const auto& [name, t] : tensors_) {
      if (t != o.tensors_.at(name)) return false;
    }
    return true;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

// Gradient accumulator; layout mirrors a ParamSet.
using GradSet = ParamSet;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError("shape mismatch: " + what);
}

// ---------------------------------------------------------------------------
// affine: y = x W + b (b broadcast over rows)

inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_shape(x.cols() == w.rows(), "affine x.cols != W.rows");
  check_shape(b.rows() == 1 && b.cols() == w.cols(), "affine bias");
  Tensor y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

struct AffineGrads {
  Tensor x, w, b;
};

inline AffineGrads affine_backward(const Tensor& grad_y, const Tensor& x, const Tensor& w) {
  check_shape(grad_y.rows() == x.rows() && grad_y.cols() == w.cols(), "affine_backward");
  return {grad_y * w.transpose(), x.transpose() * grad_y, grad_y.colwise().sum()};
}

// ---------------------------------------------------------------------------
// GRU cell
//   z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br)
//   c = tanh(x Wc + (r . h) Uc + bc),  h' = (1 - z) . h + z . c
// Operates row-wise, so a batch of B states is a B x D matrix.

inline void add_gru_params(ParamSet& p, const std::string& prefix, int input_dim, int hidden_dim,
                           Rng& rng) {
  auto uniform = [&](int rows, int cols, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(rows, cols);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = (2.0 * uniform_real(rng) - 1.0) * s;
    return t;
  };
  for (const char* g : {"z", "r", "c"}) {
    p.add(prefix + "W" + g, uniform(input_dim, hidden_dim, input_dim));
    p.add(prefix + "U" + g, uniform(hidden_dim, hidden_dim, hidden_dim));
    p.add(prefix + "b" + g, Tensor::Zero(1, hidden_dim));
  }
}

struct GruCache {
  Tensor x, h, z, r, c, rh;
};

inline Tensor gru_cell(const Tensor& h_prev, const Tensor& x_in, const ParamSet& p,
                       const std::string& prefix, GruCache* cache = nullptr) {
  const Tensor& wz = p[prefix + "Wz"];
  const Tensor& uz = p[prefix + "Uz"];
  check_shape(x_in.cols() == wz.rows(), "gru input width");
  check_shape(h_prev.cols() == uz.rows() && h_prev.rows() == x_in.rows(), "gru hidden");
  Tensor az = affine(x_in, wz, p[prefix + "bz"]) + h_prev * uz;
  Tensor ar = affine(x_in, p[prefix + "Wr"], p[prefix + "br"]) + h_prev * p[prefix + "Ur"];
  Tensor z = az.unaryExpr([](double v) { return sigmoid(v); });
  Tensor r = ar.unaryExpr([](double v) { return sigmoid(v); });
  Tensor rh = r.cwiseProduct(h_prev);
  Tensor ac = affine(x_in, p[prefix + "Wc"], p[prefix + "bc"]) + rh * p[prefix + "Uc"];
  Tensor c = ac.array().tanh().matrix();
  Tensor h_new = h_prev + z.cwiseProduct(c - h_prev);
  if (cache) *cache = {x_in, h_prev, std::move(z), std::move(r), std::move(c), std::move(rh)};
  return h_new;
}

struct GruInputGrads {
  Tensor h_prev, x;
};

// Accumulates parameter gradients into g and returns input gradients.
inline GruInputGrads gru_cell_backward(const Tensor& grad_h, const GruCache& k, const ParamSet& p,
                                       const std::string& prefix, GradSet& g) {
  const auto ones = Tensor::Ones(k.z.rows(), k.z.cols());
  Tensor gc = grad_h.cwiseProduct(k.z);
  Tensor gz = grad_h.cwiseProduct(k.c - k.h);
  Tensor gh = grad_h.cwiseProduct(ones - k.z);

  Tensor gac = gc.cwiseProduct(ones - k.c.cwiseProduct(k.c));
  g[prefix + "Wc"] += k.x.transpose() * gac;
  g[prefix + "Uc"] += k.rh.transpose() * gac;
  g[prefix + "bc"] += gac.colwise().sum();
  Tensor gx = gac * p[prefix + "Wc"].transpose();
  Tensor grh = gac * p[prefix + "Uc"].transpose();
  gh += grh.cwiseProduct(k.r);
  Tensor gr = grh.cwiseProduct(k.h);

  Tensor gar = gr.cwiseProduct(k.r.cwiseProduct(ones - k.r));
  g[prefix + "Wr"] += k.x.transpose() * gar;
  g[prefix + "Ur"] += k.h.transpose() * gar;
  g[prefix + "br"] += gar.colwise().sum();
  gx += gar * p[prefix + "Wr"].transpose();
  gh += gar * p[prefix + "Ur"].transpose();

  Tensor gaz = gz.cwiseProduct(k.z.cwiseProduct(ones - k.z));
  g[prefix + "Wz"] += k.x.transpose() * gaz;
  g[prefix + "Uz"] += k.h.transpose() * gaz;
  g[prefix + "bz"] += gaz.colwise().sum();
  gx += gaz * p[prefix + "Wz"].transpose();
  gh += gaz * p[prefix + "Uz"].transpose();
  return {std::move(gh), std::move(gx)};
}

// ---------------------------------------------------------------------------
// masked softmax over a vector of logits

inline std::vector<double> masked_softmax(std::span<const double> logits,
                                          std::span<const char> mask) {
  check_shape(logits.size() == mask.size(), "masked_softmax mask length");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits[i]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("masked_softmax: every entry is masked");
  }
  std::vector<double> p(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) sum += (p[i] = std::exp(logits[i] - mx));
  }
  for (double& v : p) v /= sum;
  return p;
}

// d log p[index] / d logits, zero on masked entries.
inline std::vector<double> masked_log_softmax_grad(std::span<const double> probs,
                                                   std::span<const char> mask, std::size_t index) {
  std::vector<double> g(probs.size(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (mask[i]) g[i] = (i == index ? 1.0 : 0.0) - probs[i];
  }
  return g;
}

// ---------------------------------------------------------------------------
// updates

enum class Direction { Ascend, Descend };

inline bool all_finite(const ParamSet& g) {
  for (const auto& [name, t] : g) {
    if (!t.allFinite()) return false;
  }
  return true;
}

// theta' = theta +/- alpha * g. Rejects (throws, leaving params untouched) on
// layout mismatch or non-finite gradient entries.
inline void sgd_update(ParamSet& params, const GradSet& grads, double alpha, Direction dir) {
  if (!params.same_layout(grads)) throw ShapeError("sgd_update: gradient layout mismatch");
  if (!all_finite(grads)) throw NumericError("sgd_update: non-finite gradient entry");
  const double step = dir == Direction::Ascend ? alpha : -alpha;
  for (auto& [name, t] : params) t += step * grads[name];
}

// ---------------------------------------------------------------------------
// finite differences

struct GradCheckEntry {
  std::string name;
  Eigen::Index index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckEntry> entries;
  bool pass = false;
  const GradCheckEntry* worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries) {
      if (!w || e.rel_err > w->rel_err) w = &e;
    }
    return w;
  }
};

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
// turning round-off into huge relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares `analytic` against central differences of f at every scalar of
// every parameter (or at most max_per_tensor evenly spaced scalars each).
inline GradCheckReport finite_diff_check(const std::function<double(const ParamSet&)>& f,
                                         const ParamSet& params, const GradSet& analytic, double h,
                                         double tolerance, Eigen::Index max_per_tensor = 0) {
  if (!params.same_layout(analytic)) throw ShapeError("finite_diff_check: layout mismatch");
  GradCheckReport rep;
  ParamSet probe = params;
  for (const auto& [name, t] : params) {
    const Eigen::Index n = t.size();
    const Eigen::Index stride =
        (max_per_tensor > 0 && n > max_per_tensor) ? (n + max_per_tensor - 1) / max_per_tensor : 1;
    for (Eigen::Index i = 0; i < n; i += stride) {
      double& slot = probe[name].data()[i];
      const double orig = slot;
      slot = orig + h;
      const double fp = f(probe);
      slot = orig - h;
      const double fm = f(probe);
      slot = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("finite_diff_check: non-finite objective at " + name);
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[name].data()[i];
      const double rel = relative_error(a, numeric);
      rep.entries.push_back({name, i, a, numeric, rel});
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
  }
  rep.pass = rep.max_rel_err <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// checkpoint (de)serialization of the tensors; callers add metadata.

inline nlohmann::ordered_json params_to_json(const ParamSet& p) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [name, t] : p) {
    std::vector<double> flat(t.data(), t.data() + t.size());
    out[name] = {{"shape", {t.rows(), t.cols()}}, {"data", flat}};
  }
  return out;
}

inline ParamSet params_from_json(const nlohmann::json& j) {
  ParamSet p;
  for (const auto& [name, item] : j.items()) {
    const auto shape = item.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = item.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(data.size())) {
      throw ParseError("tensor '" + name + "': data length does not match shape");
    }
    Tensor t(shape[0], shape[1]);
    std::copy(data.begin(), data.end(), t.data());
    if (!t.allFinite()) throw ParseError("tensor '" + name + "' has non-finite entries");
    p.add(name, std::move(t));
  }
  return p;
}

}  // namespace sfc::nn
