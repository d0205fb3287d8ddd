#include "vdo/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace vdo::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host-order doubles and assumes little-endian");

constexpr double kLayerNormEps = 1e-5;
constexpr char kMagic[8] = {'V', 'D', 'O', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

// log(1 - tanh(u)^2), stable for large |u|.
double log1m_tanh2(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  write_pod<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: implausible array length");
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return values;
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes, Head head, bool layer_norm)
    : sizes_(std::move(sizes)), head_(head), layer_norm_(layer_norm) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (const int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
  if (head_.kind == HeadKind::kGaussian && sizes_.back() % 2 != 0) {
    throw std::invalid_argument("Mlp: gaussian head needs an even output size");
  }
  Eigen::Index offset = 0;
  for (int l = 0; l < n_layers(); ++l) {
    Slice s;
    s.in = sizes_[static_cast<std::size_t>(l)];
    s.out = sizes_[static_cast<std::size_t>(l) + 1];
    s.w = offset;
    offset += static_cast<Eigen::Index>(s.in) * s.out;
    s.b = offset;
    offset += s.out;
    if (layer_norm_ && hidden(l)) {
      s.gamma = offset;
      offset += s.out;
      s.beta = offset;
      offset += s.out;
    }
    slices_.push_back(s);
  }
  params_ = Vector::Zero(offset);
  for (const auto& s : slices_) {
    if (s.gamma >= 0) params_.segment(s.gamma, s.out).setOnes();
  }
}

void Mlp::init(Rng& rng, double final_scale) {
  ++version_;
  for (int l = 0; l < n_layers(); ++l) {
    const auto& s = slices_[static_cast<std::size_t>(l)];
    double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    if (!hidden(l) && final_scale > 0.0) bound = final_scale;
    const Eigen::Index count = static_cast<Eigen::Index>(s.in) * s.out + s.out;
    for (Eigen::Index i = 0; i < count; ++i) params_[s.w + i] = uniform(rng, -bound, bound);
    if (s.gamma >= 0) {
      params_.segment(s.gamma, s.out).setOnes();
      params_.segment(s.beta, s.out).setZero();
    }
  }
}

void Mlp::set_params(const Vector& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("Mlp::set_params: size mismatch");
  ++version_;
  params_ = p;
}

Eigen::Map<Matrix> Mlp::weight(int layer) {
  ++version_;
  const auto& s = slices_.at(static_cast<std::size_t>(layer));
  return {params_.data() + s.w, s.out, s.in};
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  const auto& s = slices_.at(static_cast<std::size_t>(layer));
  return {params_.data() + s.w, s.out, s.in};
}

Eigen::Map<Vector> Mlp::bias(int layer) {
  ++version_;
  const auto& s = slices_.at(static_cast<std::size_t>(layer));
  return {params_.data() + s.b, s.out};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  const auto& s = slices_.at(static_cast<std::size_t>(layer));
  return {params_.data() + s.b, s.out};
}

Matrix Mlp::head_forward(const Matrix& raw) const {
  if (head_.kind == HeadKind::kSquashed) {
    const double half = 0.5 * (head_.hi - head_.lo);
    return ((raw.array().tanh() + 1.0) * half + head_.lo).matrix();
  }
  return raw;
}

Matrix Mlp::head_backward(const Cache& c, const Matrix& d_out) const {
  if (head_.kind == HeadKind::kSquashed) {
    const double half = 0.5 * (head_.hi - head_.lo);
    const auto t = c.raw.array().tanh();
    return (d_out.array() * (1.0 - t.square()) * half).matrix();
  }
  return d_out;
}

const Matrix& Mlp::forward(const Matrix& input, Cache& c) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input size mismatch");
  const auto L = static_cast<std::size_t>(n_layers());
  c.a.resize(L);
  c.z.resize(L);
  c.zhat.resize(L);
  c.inv_std.resize(L);
  c.a[0] = input;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = slices_[l];
    const Eigen::Map<const Matrix> W(params_.data() + s.w, s.out, s.in);
    const Eigen::Map<const Vector> b(params_.data() + s.b, s.out);
    Matrix& z = (l + 1 < L) ? c.z[l] : c.raw;
    z.noalias() = W * c.a[l];
    z.colwise() += b;
    if (l + 1 == L) break;
    Matrix& next = c.a[l + 1];
    if (s.gamma >= 0) {
      const Eigen::Map<const Vector> gamma(params_.data() + s.gamma, s.out);
      const Eigen::Map<const Vector> beta(params_.data() + s.beta, s.out);
      const RowVector mu = z.colwise().mean();
      Matrix& zhat = c.zhat[l];
      zhat = z.rowwise() - mu;
      c.inv_std[l] = (zhat.array().square().colwise().mean() + kLayerNormEps).rsqrt().matrix();
      zhat.array().rowwise() *= c.inv_std[l].array();
      next = ((zhat.array().colwise() * gamma.array()).colwise() + beta.array()).cwiseMax(0.0).matrix();
    } else {
      next = z.cwiseMax(0.0);
    }
  }
  c.out = head_forward(c.raw);
  c.owner = this;
  c.version = version_;
  return c.out;
}

Matrix Mlp::forward(const Matrix& input) const {
  Cache c;
  return forward(input, c);
}

void Mlp::backward(const Cache& c, const Matrix& d_out, Vector& grad, Matrix* d_input) const {
  backward_impl(c, d_out, &grad, d_input);
}

void Mlp::backward_input(const Cache& c, const Matrix& d_out, Matrix& d_input) const {
  backward_impl(c, d_out, nullptr, &d_input);
}

void Mlp::backward_impl(const Cache& c, const Matrix& d_out, Vector* grad, Matrix* d_input) const {
  if (c.owner != this || c.version != version_) {
    throw std::logic_error("Mlp::backward: cache does not belong to the current parameters");
  }
  if (d_out.rows() != c.out.rows() || d_out.cols() != c.out.cols()) {
    throw std::invalid_argument("Mlp::backward: output gradient shape mismatch");
  }
  if (grad != nullptr) grad->setZero(params_.size());
  Matrix delta = head_backward(c, d_out);
  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const auto& s = slices_[lu];
    if (hidden(l)) {
      // delta holds d/d(activation); push it through ReLU and normalisation
      // one sample (column) at a time.
      const Matrix& act = c.a[lu + 1];
      if (s.gamma >= 0) {
        const Eigen::Map<const Vector> gamma(params_.data() + s.gamma, s.out);
        const Matrix& zhat = c.zhat[lu];
        Vector dgamma = Vector::Zero(s.out);
        Vector dbeta = Vector::Zero(s.out);
        Vector dzhat(s.out);
        const double inv_n = 1.0 / static_cast<double>(s.out);
        for (Eigen::Index j = 0; j < delta.cols(); ++j) {
          auto d = delta.col(j).array();
          d *= (act.col(j).array() > 0.0).cast<double>();
          const auto zh = zhat.col(j).array();
          if (grad != nullptr) {
            dgamma.array() += d * zh;
            dbeta.array() += d;
          }
          dzhat.array() = d * gamma.array();
          const double mean_d = dzhat.sum() * inv_n;
          const double mean_dz = (dzhat.array() * zh).sum() * inv_n;
          d = c.inv_std[lu][j] * (dzhat.array() - mean_d - zh * mean_dz);
        }
        if (grad != nullptr) {
          grad->segment(s.gamma, s.out) = dgamma;
          grad->segment(s.beta, s.out) = dbeta;
        }
      } else {
        delta.array() *= (act.array() > 0.0).cast<double>();
      }
    }
    if (grad != nullptr) {
      Eigen::Map<Matrix> gW(grad->data() + s.w, s.out, s.in);
      gW.noalias() = delta * c.a[lu].transpose();
      grad->segment(s.b, s.out) = delta.rowwise().sum();
    }
    if (l > 0 || d_input != nullptr) {
      const Eigen::Map<const Matrix> W(params_.data() + s.w, s.out, s.in);
      Matrix prev;
      prev.noalias() = W.transpose() * delta;
      delta.swap(prev);
    }
  }
  if (d_input != nullptr) *d_input = std::move(delta);
}

std::vector<double> Mlp::params_row_major() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(params_.size()));
  for (int l = 0; l < n_layers(); ++l) {
    const auto& s = slices_[static_cast<std::size_t>(l)];
    const auto W = weight(l);
    for (int r = 0; r < s.out; ++r) {
      for (int col = 0; col < s.in; ++col) out.push_back(W(r, col));
    }
    for (int r = 0; r < s.out; ++r) out.push_back(params_[s.b + r]);
    if (s.gamma >= 0) {
      for (int r = 0; r < s.out; ++r) out.push_back(params_[s.gamma + r]);
      for (int r = 0; r < s.out; ++r) out.push_back(params_[s.beta + r]);
    }
  }
  return out;
}

void Mlp::set_params_row_major(const std::vector<double>& values) {
  if (static_cast<Eigen::Index>(values.size()) != params_.size()) {
    throw std::invalid_argument("Mlp::set_params_row_major: size mismatch");
  }
  ++version_;
  std::size_t k = 0;
  for (int l = 0; l < n_layers(); ++l) {
    const auto& s = slices_[static_cast<std::size_t>(l)];
    Eigen::Map<Matrix> W(params_.data() + s.w, s.out, s.in);
    for (int r = 0; r < s.out; ++r) {
      for (int col = 0; col < s.in; ++col) W(r, col) = values[k++];
    }
    for (int r = 0; r < s.out; ++r) params_[s.b + r] = values[k++];
    if (s.gamma >= 0) {
      for (int r = 0; r < s.out; ++r) params_[s.gamma + r] = values[k++];
      for (int r = 0; r < s.out; ++r) params_[s.beta + r] = values[k++];
    }
  }
}

StepResult adam_step(Vector& params, const Vector& grad, AdamState& st, double max_grad_norm) {
  if (grad.size() != params.size() || st.m.size() != params.size() || st.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  StepResult result;
  if (!grad.allFinite()) return result;
  result.grad_norm = grad.norm();
  const double scale = (max_grad_norm > 0.0 && result.grad_norm > max_grad_norm)
                           ? max_grad_norm / result.grad_norm
                           : 1.0;
  ++st.step;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * scale * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * (scale * scale) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  params.array() -= st.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + st.eps);
  result.applied = true;
  return result;
}

StepResult adam_step(Mlp& net, const Vector& grad, AdamState& state, double max_grad_norm) {
  return adam_step(net.mutable_params(), grad, state, max_grad_norm);
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.n_params() != online.n_params()) throw std::invalid_argument("soft_update: shape mismatch");
  if (tau == 1.0) {
    target.set_params(online.params());
    return;
  }
  auto& t = target.mutable_params();
  t = tau * online.params() + (1.0 - tau) * t;
}

SquashedSample squashed_sample(const Matrix& head_out, const Head& head, const Matrix& eps) {
  const Eigen::Index dim = head_out.rows() / 2;
  if (head_out.rows() != 2 * dim || eps.rows() != dim || eps.cols() != head_out.cols()) {
    throw std::invalid_argument("squashed_sample: shape mismatch");
  }
  SquashedSample s;
  s.mean = head_out.topRows(dim);
  const Matrix raw_ls = head_out.bottomRows(dim);
  s.log_std = raw_ls.cwiseMax(head.log_std_min).cwiseMin(head.log_std_max);
  s.clamped = (raw_ls.array() < head.log_std_min) || (raw_ls.array() > head.log_std_max);
  s.eps = eps;
  s.u = s.mean.array() + s.log_std.array().exp() * eps.array();
  s.action = (s.u.array().tanh() + 1.0) * 0.5;
  // log N(u; mean, std) minus log |d action / d u| = log((1 - tanh^2 u) / 2).
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  s.log_prob.resize(head_out.cols());
  for (Eigen::Index j = 0; j < head_out.cols(); ++j) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      lp += -0.5 * eps(i, j) * eps(i, j) - s.log_std(i, j) - half_log_2pi;
      lp -= log1m_tanh2(s.u(i, j)) - std::numbers::ln2;
    }
    s.log_prob[j] = lp;
  }
  return s;
}

SquashedSample squashed_sample(const Matrix& head_out, const Head& head, Rng& rng) {
  Matrix eps(head_out.rows() / 2, head_out.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j) {
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = standard_normal(rng);
  }
  return squashed_sample(head_out, head, eps);
}

Matrix squashed_mean_action(const Matrix& head_out) {
  const Eigen::Index dim = head_out.rows() / 2;
  return ((head_out.topRows(dim).array().tanh() + 1.0) * 0.5).matrix();
}

Matrix squashed_backward(const SquashedSample& s, const Matrix& d_action, const RowVector& d_log_prob) {
  const Eigen::Index dim = s.mean.rows();
  const Eigen::Index batch = s.mean.cols();
  Matrix d(2 * dim, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double t = std::tanh(s.u(i, j));
      // d/du of action and of log_prob (the Gaussian term is constant in u for fixed eps).
      const double du = d_action(i, j) * 0.5 * (1.0 - t * t) + d_log_prob[j] * 2.0 * t;
      d(i, j) = du;
      const double sigma_eps = std::exp(s.log_std(i, j)) * s.eps(i, j);
      d(dim + i, j) = s.clamped(i, j) ? 0.0 : du * sigma_eps - d_log_prob[j];
    }
  }
  return d;
}

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries,
                     const std::vector<CheckpointScalar>& scalars) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    const Mlp& net = *e.net;
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
    for (const int s : net.sizes()) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(net.head().kind));
    write_pod(out, net.head().lo);
    write_pod(out, net.head().hi);
    write_pod<std::uint8_t>(out, net.layer_norm() ? 1 : 0);
    write_doubles(out, net.params_row_major());
    write_pod<std::uint8_t>(out, e.adam != nullptr ? 1 : 0);
    if (e.adam != nullptr) {
      // Moments share the parameter layout, so they go through the same reordering.
      Mlp scratch = net;
      write_pod(out, e.adam->step);
      write_pod(out, e.adam->lr);
      scratch.set_params(e.adam->m);
      write_doubles(out, scratch.params_row_major());
      scratch.set_params(e.adam->v);
      write_doubles(out, scratch.params_row_major());
    }
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(scalars.size()));
  for (const auto& sc : scalars) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sc.name.size()));
    out.write(sc.name.data(), static_cast<std::streamsize>(sc.name.size()));
    write_pod(out, *sc.value);
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

void load_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries,
                     const std::vector<CheckpointScalar>& scalars) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  }
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<std::string> found;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = read_pod<std::uint32_t>(in);
    if (name_len > 4096) throw std::runtime_error("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto n_sizes = read_pod<std::uint32_t>(in);
    if (n_sizes > 64) throw std::runtime_error("checkpoint: implausible layer count");
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) s = static_cast<int>(read_pod<std::uint32_t>(in));
    const auto kind = read_pod<std::uint8_t>(in);
    const auto lo = read_pod<double>(in);
    const auto hi = read_pod<double>(in);
    const bool norm = read_pod<std::uint8_t>(in) != 0;
    const auto params = read_doubles(in);
    const bool has_adam = read_pod<std::uint8_t>(in) != 0;
    std::int64_t step = 0;
    double lr = 0.0;
    std::vector<double> m, v;
    if (has_adam) {
      step = read_pod<std::int64_t>(in);
      lr = read_pod<double>(in);
      m = read_doubles(in);
      v = read_doubles(in);
    }
    const CheckpointEntry* target = nullptr;
    for (const auto& e : entries) {
      if (e.name == name) target = &e;
    }
    if (target == nullptr) continue;
    found.push_back(name);
    Mlp& net = *target->net;
    if (net.sizes() != sizes || static_cast<std::uint8_t>(net.head().kind) != kind ||
        net.head().lo != lo || net.head().hi != hi || net.layer_norm() != norm) {
      throw std::runtime_error("checkpoint: network '" + name + "' has a different architecture");
    }
    net.set_params_row_major(params);
    if (target->adam != nullptr && has_adam) {
      Mlp scratch = net;
      target->adam->step = step;
      target->adam->lr = lr;
      scratch.set_params_row_major(m);
      target->adam->m = scratch.params();
      scratch.set_params_row_major(v);
      target->adam->v = scratch.params();
    }
  }
  const auto n_scalars = read_pod<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < n_scalars; ++k) {
    const auto name_len = read_pod<std::uint32_t>(in);
    if (name_len > 4096) throw std::runtime_error("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const double value = read_pod<double>(in);
    for (const auto& sc : scalars) {
      if (sc.name == name) {
        *sc.value = value;
        found.push_back(name);
      }
    }
  }
  for (const auto& sc : scalars) {
    if (std::find(found.begin(), found.end(), sc.name) == found.end()) {
      throw std::runtime_error("checkpoint: scalar '" + sc.name + "' missing from '" + path + "'");
    }
  }
  for (const auto& e : entries) {
    if (std::find(found.begin(), found.end(), e.name) == found.end()) {
      throw std::runtime_error("checkpoint: network '" + e.name + "' missing from '" + path + "'");
    }
  }
}

}  // namespace vdo::nn
