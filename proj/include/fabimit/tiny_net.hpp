#pragma once

// Small fully-connected networks: ReLU hidden layers, identity output,
// minibatch Adam on an arbitrary differentiable loss, per-dimension input
// and output standardisation stored with the model, and a bit-exact binary
// file format.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <tuple>
#include <utility>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabimit/atomic_file.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/random.hpp"

namespace fabimit {

static_assert(std::endian::native == std::endian::little, "model files are written in host byte order");

// x_normalised = (x - mean) / scale
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Normalizer identity(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)}; }

  // Columns of `data` are samples. Rows without spread get `flat_scale`.
  static Normalizer fit(const Eigen::MatrixXd& data, double flat_scale = 1.0) {
    Normalizer n;
    n.mean = data.rowwise().mean();
    n.scale = ((data.colwise() - n.mean).array().square().rowwise().mean()).sqrt().matrix();
    for (Eigen::Index i = 0; i < n.scale.size(); ++i) {
      if (!(n.scale[i] > 1e-8)) n.scale[i] = flat_scale;
    }
    return n;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.colwise() - mean).array().colwise() / scale.array();
  }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const {
    return (z.array().colwise() * scale.array()).matrix().colwise() + mean;
  }
};

struct DenseNetwork {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;
  Normalizer input_norm;
  Normalizer output_norm;
  std::string tag;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  // He-uniform weights, zero biases.
  static DenseNetwork create(std::vector<int> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw std::invalid_argument("DenseNetwork: need at least input and output sizes");
    for (int s : sizes)
      if (s <= 0) throw std::invalid_argument("DenseNetwork: layer sizes must be positive");
    DenseNetwork net;
    net.layer_sizes = std::move(sizes);
    net.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
      const int in = net.layer_sizes[l], out = net.layer_sizes[l + 1];
      const double limit = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> u(-limit, limit);
      Eigen::MatrixXd w(out, in);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
      net.weights.push_back(std::move(w));
      net.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    net.input_norm = Normalizer::identity(net.layer_sizes.front());
    net.output_norm = Normalizer::identity(net.layer_sizes.back());
    return net;
  }

  // input -> 256 -> 256 -> output
  static DenseNetwork mlp(int input, int output, std::uint64_t seed, int hidden = 256, int depth = 2) {
    std::vector<int> sizes{input};
    for (int i = 0; i < depth; ++i) sizes.push_back(hidden);
    sizes.push_back(output);
    return create(std::move(sizes), seed);
  }

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }

  // Network-space forward pass on normalised inputs (columns are samples).
  Eigen::MatrixXd forward_normalised(const Eigen::MatrixXd& z0) const {
    Eigen::MatrixXd z = z0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Eigen::MatrixXd a = weights[l] * z;
      a.colwise() += biases[l];
      if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
      z = std::move(a);
    }
    return z;
  }

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_size()) throw std::invalid_argument("forward: input dimension mismatch");
    return output_norm.invert(forward_normalised(input_norm.apply(x)));
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    if (x.size() != input_size()) throw std::invalid_argument("forward: input dimension mismatch");
    return forward_batch(x);
  }
};

struct Gradients {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
};

// Backpropagates dL/dY (raw output units, columns are samples) to the
// parameters.
inline Gradients backward(const DenseNetwork& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_out) {
  const std::size_t L = net.weights.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] = net.input_norm.apply(x);
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd a = net.weights[l] * acts[l];
    a.colwise() += net.biases[l];
    if (l + 1 < L) a = a.cwiseMax(0.0);
    acts[l + 1] = std::move(a);
  }
  Gradients g;
  g.d_weights.resize(L);
  g.d_biases.resize(L);
  Eigen::MatrixXd delta = d_out.array().colwise() * net.output_norm.scale.array();
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) delta = (acts[l + 1].array() > 0.0).select(delta, 0.0);
    g.d_weights[l] = delta * acts[l].transpose();
    g.d_biases[l] = delta.rowwise().sum();
    if (l > 0) delta = net.weights[l].transpose() * delta;
  }
  return g;
}

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool fit_input_normalization = true;

  void validate() const {
    if (epochs <= 0 || batch_size <= 0) throw ConfigError("train: epochs and batch_size must be positive");
    if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be positive");
    if (!(validation_fraction > 0 && validation_fraction < 1)) {
      throw ConfigError("train: validation_fraction must lie in (0,1)");
    }
  }
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<Eigen::Index> train_indices;
  std::vector<Eigen::Index> val_indices;
};

// Loss functor contract:
//   double loss(const Eigen::MatrixXd& y, std::span<const Eigen::Index> ids,
//               Eigen::MatrixXd* d_y)
// `y` holds the raw network outputs for the samples `ids` (one column each);
// returns the mean loss over the batch and, when d_y is non-null, writes
// dLoss/dy into it.
namespace detail {

// Seeded train/validation split; consumes `rng` identically on every call.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> make_split(Eigen::Index n,
                                                                                  const TrainConfig& cfg, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::Index n_val = static_cast<Eigen::Index>(std::round(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
  return {std::vector<Eigen::Index>(order.begin() + n_val, order.end()),
          std::vector<Eigen::Index>(order.begin(), order.begin() + n_val)};
}

template <class Loss>
double evaluate_split(const DenseNetwork& net, const Eigen::MatrixXd& inputs, const std::vector<Eigen::Index>& ids,
                      Loss& loss) {
  if (ids.empty()) return 0.0;
  constexpr std::size_t kChunk = 2048;
  double total = 0.0;
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, ids.size() - start);
    Eigen::MatrixXd x(inputs.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) x.col(static_cast<Eigen::Index>(i)) = inputs.col(ids[start + i]);
    const Eigen::MatrixXd y = net.forward_batch(x);
    total += loss(y, std::span<const Eigen::Index>(ids.data() + start, n), nullptr) * static_cast<double>(n);
  }
  return total / static_cast<double>(ids.size());
}

}  // namespace detail

template <class Loss>
TrainReport train_with_loss(DenseNetwork& net, const Eigen::MatrixXd& inputs, Loss&& loss, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = inputs.cols();
  if (n < 2) throw std::invalid_argument("train: need at least two samples");
  if (inputs.rows() != net.input_size()) throw std::invalid_argument("train: input dimension mismatch");

  Rng rng(cfg.seed);
  TrainReport report;
  std::tie(report.train_indices, report.val_indices) = detail::make_split(n, cfg, rng);

  if (cfg.fit_input_normalization) {
    Eigen::MatrixXd train_x(inputs.rows(), static_cast<Eigen::Index>(report.train_indices.size()));
    for (std::size_t i = 0; i < report.train_indices.size(); ++i)
      train_x.col(static_cast<Eigen::Index>(i)) = inputs.col(report.train_indices[i]);
    net.input_norm = Normalizer::fit(train_x);
  }

  const std::size_t L = net.weights.size();
  std::vector<Eigen::MatrixXd> mw(L), vw(L);
  std::vector<Eigen::VectorXd> mb(L), vb(L);
  for (std::size_t l = 0; l < L; ++l) {
    mw[l] = Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols());
    vw[l] = mw[l];
    mb[l] = Eigen::VectorXd::Zero(net.biases[l].size());
    vb[l] = mb[l];
  }
  long long t = 0;
  std::vector<Eigen::Index> train_ids = report.train_indices;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_ids.begin(), train_ids.end(), rng);
    for (std::size_t start = 0; start < train_ids.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_ids.size() - start);
      Eigen::MatrixXd x(inputs.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) x.col(static_cast<Eigen::Index>(i)) = inputs.col(train_ids[start + i]);
      const Eigen::MatrixXd y = net.forward_batch(x);
      Eigen::MatrixXd dy;
      const double l = loss(y, std::span<const Eigen::Index>(train_ids.data() + start, b), &dy);
      if (!std::isfinite(l)) {
        std::ostringstream os;
        os << "train: non-finite loss at epoch " << epoch << ", batch starting at " << start << " (" << net.tag << ")";
        throw TrainingDiverged(os.str());
      }
      const Gradients g = backward(net, x, dy);
      ++t;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      const double step = cfg.learning_rate * std::sqrt(c2) / c1;
      for (std::size_t li = 0; li < L; ++li) {
        mw[li] = cfg.beta1 * mw[li] + (1.0 - cfg.beta1) * g.d_weights[li];
        vw[li] = cfg.beta2 * vw[li] + (1.0 - cfg.beta2) * g.d_weights[li].cwiseAbs2();
        net.weights[li].array() -= step * mw[li].array() / (vw[li].array().sqrt() + cfg.epsilon);
        mb[li] = cfg.beta1 * mb[li] + (1.0 - cfg.beta1) * g.d_biases[li];
        vb[li] = cfg.beta2 * vb[li] + (1.0 - cfg.beta2) * g.d_biases[li].cwiseAbs2();
        net.biases[li].array() -= step * mb[li].array() / (vb[li].array().sqrt() + cfg.epsilon);
      }
    }
    const double tr = detail::evaluate_split(net, inputs, report.train_indices, loss);
    const double va = detail::evaluate_split(net, inputs, report.val_indices, loss);
    if (!std::isfinite(tr) || !std::isfinite(va)) {
      std::ostringstream os;
      os << "train: non-finite loss after epoch " << epoch << " (" << net.tag << ")";
      throw TrainingDiverged(os.str());
    }
    report.train_loss.push_back(tr);
    report.val_loss.push_back(va);
  }
  return report;
}

// Mean squared error over all output components.
struct MseLoss {
  const Eigen::MatrixXd* targets;

  double operator()(const Eigen::MatrixXd& y, std::span<const Eigen::Index> ids, Eigen::MatrixXd* d_y) const {
    Eigen::MatrixXd diff(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.cols(); ++i) diff.col(i) = y.col(i) - targets->col(ids[static_cast<std::size_t>(i)]);
    const double denom = static_cast<double>(y.rows() * y.cols());
    if (d_y) *d_y = (2.0 / denom) * diff;
    return diff.squaredNorm() / denom;
  }
};

// Supervised MSE training. Output standardisation is fitted on the train
// split so the network works in unit scale.
inline TrainReport train(DenseNetwork& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         const TrainConfig& cfg) {
  if (targets.cols() != inputs.cols()) throw std::invalid_argument("train: input/target count mismatch");
  if (targets.rows() != net.output_size()) throw std::invalid_argument("train: target dimension mismatch");
  if (inputs.cols() >= 2) {
    // Same split train_with_loss will draw.
    Rng rng(cfg.seed);
    const auto train_ids = detail::make_split(inputs.cols(), cfg, rng).first;
    Eigen::MatrixXd ty(targets.rows(), static_cast<Eigen::Index>(train_ids.size()));
    for (std::size_t i = 0; i < train_ids.size(); ++i) ty.col(static_cast<Eigen::Index>(i)) = targets.col(train_ids[i]);
    // A target that never varies is reproduced exactly: its output is pinned to the mean.
    net.output_norm = Normalizer::fit(ty, 0.0);
  }
  return train_with_loss(net, inputs, MseLoss{&targets}, cfg);
}

// ---------------------------------------------------------------------------
// Model files
//
//   magic "FIMNET\0\0" | u32 version | u64 config_hash | u64 seed
//   u32 tag_length | tag bytes
//   u32 layer_count (sizes) | i32 sizes[layer_count]
//   f64 input mean[in] | f64 input scale[in] | f64 output mean[out] | f64 output scale[out]
//   per layer: f64 weights (column-major, out x in) | f64 biases[out]
//
// All integers and doubles little-endian.

inline constexpr char kNetMagic[8] = {'F', 'I', 'M', 'N', 'E', 'T', '\0', '\0'};
inline constexpr std::uint32_t kNetVersion = 1;

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("truncated file while reading ") + what);
  return v;
}

inline void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& is, double* p, std::size_t n, const char* what) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw FormatError(std::string("truncated file while reading ") + what);
}

}  // namespace detail

inline void write_network(std::ostream& os, const DenseNetwork& net) {
  using namespace detail;
  os.write(kNetMagic, sizeof(kNetMagic));
  write_pod(os, kNetVersion);
  write_pod(os, net.config_hash);
  write_pod(os, net.seed);
  write_pod(os, static_cast<std::uint32_t>(net.tag.size()));
  os.write(net.tag.data(), static_cast<std::streamsize>(net.tag.size()));
  write_pod(os, static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (int s : net.layer_sizes) write_pod(os, static_cast<std::int32_t>(s));
  write_doubles(os, net.input_norm.mean.data(), static_cast<std::size_t>(net.input_norm.mean.size()));
  write_doubles(os, net.input_norm.scale.data(), static_cast<std::size_t>(net.input_norm.scale.size()));
  write_doubles(os, net.output_norm.mean.data(), static_cast<std::size_t>(net.output_norm.mean.size()));
  write_doubles(os, net.output_norm.scale.data(), static_cast<std::size_t>(net.output_norm.scale.size()));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    write_doubles(os, net.weights[l].data(), static_cast<std::size_t>(net.weights[l].size()));
    write_doubles(os, net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
  }
}

inline DenseNetwork read_network(std::istream& is) {
  using namespace detail;
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is) throw FormatError("truncated file while reading magic");
  if (std::memcmp(magic, kNetMagic, sizeof(magic)) != 0) throw FormatError("not a network file (bad magic)");
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kNetVersion) {
    throw FormatError("unsupported network file version " + std::to_string(version) + " (expected " +
                      std::to_string(kNetVersion) + ")");
  }
  DenseNetwork net;
  net.config_hash = read_pod<std::uint64_t>(is, "config hash");
  net.seed = read_pod<std::uint64_t>(is, "seed");
  const auto tag_len = read_pod<std::uint32_t>(is, "tag length");
  if (tag_len > (1u << 16)) throw FormatError("implausible tag length");
  net.tag.resize(tag_len);
  is.read(net.tag.data(), tag_len);
  if (!is) throw FormatError("truncated file while reading tag");
  const auto count = read_pod<std::uint32_t>(is, "layer count");
  if (count < 2 || count > 64) throw FormatError("implausible layer count " + std::to_string(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = read_pod<std::int32_t>(is, "layer size");
    if (s <= 0 || s > (1 << 20)) throw FormatError("implausible layer size " + std::to_string(s));
    net.layer_sizes.push_back(s);
  }
  const int in = net.layer_sizes.front(), out = net.layer_sizes.back();
  net.input_norm = {Eigen::VectorXd(in), Eigen::VectorXd(in)};
  net.output_norm = {Eigen::VectorXd(out), Eigen::VectorXd(out)};
  read_doubles(is, net.input_norm.mean.data(), static_cast<std::size_t>(in), "input normalisation");
  read_doubles(is, net.input_norm.scale.data(), static_cast<std::size_t>(in), "input normalisation");
  read_doubles(is, net.output_norm.mean.data(), static_cast<std::size_t>(out), "output normalisation");
  read_doubles(is, net.output_norm.scale.data(), static_cast<std::size_t>(out), "output normalisation");
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    Eigen::MatrixXd w(net.layer_sizes[l + 1], net.layer_sizes[l]);
    Eigen::VectorXd b(net.layer_sizes[l + 1]);
    read_doubles(is, w.data(), static_cast<std::size_t>(w.size()), "weights");
    read_doubles(is, b.data(), static_cast<std::size_t>(b.size()), "biases");
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after network payload");
  return net;
}

inline void save(const DenseNetwork& net, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { write_network(os, net); }, true);
}

inline DenseNetwork load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("missing model file " + path.string());
  return read_network(is);
}

}  // namespace fabimit
