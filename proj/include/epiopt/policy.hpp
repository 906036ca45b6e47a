#pragma once

// One-hidden-layer ReLU network over observations, stored as a flat parameter
// vector so that gradient training and evolutionary mutation share it.
//
// Flat layout: W1 (hidden x input, row-major) | b1 (hidden) |
//              W2 (output x hidden, row-major) | b2 (output)

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "epiopt/env.hpp"
#include "epiopt/rng.hpp"

namespace epiopt {

struct MlpSpec {
  int input_dim = static_cast<int>(obs::kBaseDim);
  int hidden_dim = 64;
  int output_dim = kNumActions;

  std::size_t param_count() const noexcept {
    return static_cast<std::size_t>((input_dim + 1) * hidden_dim + (hidden_dim + 1) * output_dim);
  }
  bool operator==(const MlpSpec&) const = default;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Activations kept from a batch forward pass for backpropagation.
/// Columns are samples.
struct MlpCache {
  Eigen::MatrixXd hidden;  ///< post-ReLU, hidden x batch
  Eigen::MatrixXd output;  ///< output x batch
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::vector<double> flat) : spec_(spec), flat_(std::move(flat)) {
    if (flat_.size() != spec_.param_count())
      throw DimensionError("Mlp: parameter vector length does not match spec");
  }

  static Mlp zeros(const MlpSpec& spec) { return Mlp(spec, std::vector<double>(spec.param_count(), 0.0)); }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included.
  static Mlp initialized(const MlpSpec& spec, Rng& rng) {
    Mlp m = zeros(spec);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden_dim));
    const std::size_t layer1 = static_cast<std::size_t>((spec.input_dim + 1) * spec.hidden_dim);
    std::uniform_real_distribution<double> u1(-b1, b1), u2(-b2, b2);
    for (std::size_t i = 0; i < m.flat_.size(); ++i) m.flat_[i] = i < layer1 ? u1(rng) : u2(rng);
    return m;
  }

  const MlpSpec& spec() const noexcept { return spec_; }
  std::span<const double> params() const noexcept { return flat_; }
  std::span<double> params() noexcept { return flat_; }
  const std::vector<double>& flat() const noexcept { return flat_; }
  bool operator==(const Mlp&) const = default;

  ConstMatrixMap w1() const { return {flat_.data(), spec_.hidden_dim, spec_.input_dim}; }
  ConstVectorMap b1() const { return {flat_.data() + off_b1(), spec_.hidden_dim}; }
  ConstMatrixMap w2() const { return {flat_.data() + off_w2(), spec_.output_dim, spec_.hidden_dim}; }
  ConstVectorMap b2() const { return {flat_.data() + off_b2(), spec_.output_dim}; }

  std::vector<double> forward(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(spec_.input_dim))
      throw DimensionError("Mlp::forward: input dimension mismatch");
    const ConstVectorMap in(x.data(), spec_.input_dim);
    const Eigen::VectorXd h = (w1() * in + b1()).cwiseMax(0.0);
    const Eigen::VectorXd y = w2() * h + b2();
    return {y.data(), y.data() + y.size()};
  }

  /// Batch forward; `x` is input_dim x batch.
  void forward_batch(const Eigen::MatrixXd& x, MlpCache& cache) const {
    if (x.rows() != spec_.input_dim) throw DimensionError("Mlp::forward_batch: input dimension mismatch");
    cache.hidden = ((w1() * x).colwise() + b1()).cwiseMax(0.0);
    cache.output = (w2() * cache.hidden).colwise() + b2();
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    MlpCache c;
    forward_batch(x, c);
    return std::move(c.output);
  }

  /// Accumulates dLoss/dparams into `grad` given dLoss/doutput (output x batch).
  void backward_batch(const Eigen::MatrixXd& x, const MlpCache& cache, const Eigen::MatrixXd& d_out,
                      std::span<double> grad) const {
    if (grad.size() != flat_.size()) throw DimensionError("Mlp::backward_batch: gradient size mismatch");
    MatrixMap gw1(grad.data(), spec_.hidden_dim, spec_.input_dim);
    VectorMap gb1(grad.data() + off_b1(), spec_.hidden_dim);
    MatrixMap gw2(grad.data() + off_w2(), spec_.output_dim, spec_.hidden_dim);
    VectorMap gb2(grad.data() + off_b2(), spec_.output_dim);

    gw2.noalias() += d_out * cache.hidden.transpose();
    gb2 += d_out.rowwise().sum();
    Eigen::MatrixXd d_hidden = w2().transpose() * d_out;
    d_hidden = d_hidden.cwiseProduct((cache.hidden.array() > 0.0).cast<double>().matrix());
    gw1.noalias() += d_hidden * x.transpose();
    gb1 += d_hidden.rowwise().sum();
  }

 private:
  std::size_t off_b1() const noexcept { return static_cast<std::size_t>(spec_.hidden_dim * spec_.input_dim); }
  std::size_t off_w2() const noexcept { return off_b1() + static_cast<std::size_t>(spec_.hidden_dim); }
  std::size_t off_b2() const noexcept {
    return off_w2() + static_cast<std::size_t>(spec_.output_dim * spec_.hidden_dim);
  }

  MlpSpec spec_{};
  std::vector<double> flat_;
};

// ---------------------------------------------------------------------------
// Action selection

/// Index of the larger Q-value; ties go to no-lockdown.
inline Action act_greedy(std::span<const double> q) {
  if (q.size() != kNumActions) throw DimensionError("act_greedy: expected 2 Q-values");
  return q[1] > q[0] ? Action::kLockdown : Action::kNoLockdown;
}

inline Action act_epsilon(std::span<const double> q, double epsilon, Rng& rng) {
  if (uniform01(rng) < epsilon) return uniform01(rng) < 0.5 ? Action::kNoLockdown : Action::kLockdown;
  return act_greedy(q);
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kWeightFormatVersion = 1;
inline constexpr char kWeightMagic[8] = {'E', 'P', 'I', 'M', 'L', 'P', '0', '1'};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const Mlp& m) {
  return nlohmann::json{{"format", "epiopt-mlp"},
                        {"version", kWeightFormatVersion},
                        {"spec",
                         {{"input_dim", m.spec().input_dim},
                          {"hidden_dim", m.spec().hidden_dim},
                          {"output_dim", m.spec().output_dim},
                          {"activation", "relu"}}},
                        {"weights", m.flat()}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "epiopt-mlp") throw FormatError("not an epiopt-mlp document");
  if (j.at("version").get<int>() != kWeightFormatVersion) throw FormatError("unsupported weight version");
  MlpSpec spec;
  spec.input_dim = j.at("spec").at("input_dim").get<int>();
  spec.hidden_dim = j.at("spec").at("hidden_dim").get<int>();
  spec.output_dim = j.at("spec").at("output_dim").get<int>();
  auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != spec.param_count()) throw FormatError("weight count does not match spec");
  return Mlp(spec, std::move(w));
}

/// Binary form: magic, u32 version, u32 input/hidden/output, u64 count,
/// count little-endian doubles.
inline std::string serialize(const Mlp& m) {
  std::string out(kWeightMagic, sizeof kWeightMagic);
  auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  const std::uint32_t header[4] = {kWeightFormatVersion, static_cast<std::uint32_t>(m.spec().input_dim),
                                   static_cast<std::uint32_t>(m.spec().hidden_dim),
                                   static_cast<std::uint32_t>(m.spec().output_dim)};
  put(header, sizeof header);
  const std::uint64_t count = m.flat().size();
  put(&count, sizeof count);
  put(m.flat().data(), count * sizeof(double));
  return out;
}

inline Mlp deserialize(std::string_view bytes) {
  constexpr std::size_t kHeader = sizeof kWeightMagic + 4 * sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kWeightMagic, sizeof kWeightMagic) != 0)
    throw FormatError("not an epiopt binary weight file");
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + sizeof kWeightMagic, sizeof header);
  if (header[0] != kWeightFormatVersion) throw FormatError("unsupported weight version");
  std::uint64_t count = 0;
  std::memcpy(&count, bytes.data() + sizeof kWeightMagic + sizeof header, sizeof count);
  const MlpSpec spec{static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3])};
  if (count != spec.param_count()) throw FormatError("weight count does not match spec");
  if (bytes.size() != kHeader + count * sizeof(double)) throw FormatError("weight payload length mismatch");
  std::vector<double> w(count);
  std::memcpy(w.data(), bytes.data() + kHeader, count * sizeof(double));
  return Mlp(spec, std::move(w));
}

/// Accepts either the binary or the JSON form.
inline Mlp parse_weights(std::string_view bytes) {
  if (bytes.size() >= sizeof kWeightMagic && std::memcmp(bytes.data(), kWeightMagic, sizeof kWeightMagic) == 0)
    return deserialize(bytes);
  return mlp_from_json(nlohmann::json::parse(bytes));
}

}  // namespace epiopt
