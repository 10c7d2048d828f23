#include "chemo/net.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chemo {

namespace {

std::pair<int, int> chunk_range(int batch, int chunks, int c) {
  const auto lo = static_cast<int>(static_cast<long long>(batch) * c / chunks);
  const auto hi = static_cast<int>(static_cast<long long>(batch) * (c + 1) / chunks);
  return {lo, hi};
}

void forward_rows(const Net& net, FwdCache& cache, int r0, int rows) {
  const int L = net.layers();
  for (int l = 0; l < L; ++l) {
    auto Z = (cache.a[l].middleRows(r0, rows) * net.W[l].transpose()).eval();
    Z.rowwise() += net.b[l].transpose();
    if (l + 1 < L) {
      cache.a[l + 1].middleRows(r0, rows) = Z.cwiseMax(0.0);
    } else if (net.head == Head::sigmoid) {
      cache.a[l + 1].middleRows(r0, rows) =
          Z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    } else {
      cache.a[l + 1].middleRows(r0, rows) = Z;
    }
  }
}

void backward_rows(const Net& net, const FwdCache& cache, const Eigen::MatrixXd& dOut,
                   Grads* g, Eigen::MatrixXd* dX, bool with_param_grads, int r0,
                   int rows) {
  const int L = net.layers();
  Eigen::MatrixXd dZ = dOut.middleRows(r0, rows);
  if (net.head == Head::sigmoid) {
    const auto y = cache.a[L].middleRows(r0, rows);
    dZ.array() *= y.array() * (1.0 - y.array());
  }
  for (int l = L - 1; l >= 0; --l) {
    if (with_param_grads) {
      g->W[l].noalias() += dZ.transpose() * cache.a[l].middleRows(r0, rows);
      g->b[l].noalias() += dZ.colwise().sum().transpose();
    }
    if (l > 0) {
      Eigen::MatrixXd dA = dZ * net.W[l];
      dA.array() *= (cache.a[l].middleRows(r0, rows).array() > 0.0).cast<double>();
      dZ = std::move(dA);
    } else if (dX != nullptr) {
      dX->middleRows(r0, rows) = dZ * net.W[0];
    }
  }
}

void check_forward_args(const Net& net, const Eigen::MatrixXd& X, int chunks) {
  if (net.W.empty()) throw std::invalid_argument("net: empty network");
  if (X.cols() != net.input_dim())
    throw std::invalid_argument("net: input width mismatch");
  if (chunks < 1) throw std::invalid_argument("net: chunks must be >= 1");
}

void init_cache(const Net& net, const Eigen::MatrixXd& X, FwdCache& cache) {
  const int L = net.layers();
  cache.a.resize(L + 1);
  cache.a[0] = X;
  for (int l = 0; l < L; ++l)
    cache.a[l + 1].resize(X.rows(), net.W[l].rows());
}

template <bool Parallel>
Eigen::MatrixXd forward_impl(const Net& net, const Eigen::MatrixXd& X,
                             FwdCache* cache, int chunks) {
  check_forward_args(net, X, chunks);
  FwdCache local;
  FwdCache& c = cache != nullptr ? *cache : local;
  init_cache(net, X, c);
  const int B = static_cast<int>(X.rows());
  const int n = std::min(chunks, std::max(B, 1));
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = chunk_range(B, n, i);
      if (hi > lo) forward_rows(net, c, lo, hi - lo);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = chunk_range(B, n, i);
      if (hi > lo) forward_rows(net, c, lo, hi - lo);
    }
  }
  return c.a.back();
}

template <bool Parallel>
Grads backward_impl(const Net& net, const FwdCache& cache, const Eigen::MatrixXd& dOut,
                    Eigen::MatrixXd* dX, int chunks, bool with_param_grads) {
  if (cache.a.size() != static_cast<size_t>(net.layers()) + 1)
    throw std::invalid_argument("net: cache does not match network");
  if (dOut.rows() != cache.a[0].rows() || dOut.cols() != net.output_dim())
    throw std::invalid_argument("net: dOut shape mismatch");
  if (chunks < 1) throw std::invalid_argument("net: chunks must be >= 1");
  const int B = static_cast<int>(dOut.rows());
  if (dX != nullptr) dX->resize(B, net.input_dim());
  const int n = std::min(chunks, std::max(B, 1));

  std::vector<Grads> partial(n);
  for (auto& g : partial)
    if (with_param_grads) g.set_zero_like(net);

  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = chunk_range(B, n, i);
      if (hi > lo)
        backward_rows(net, cache, dOut, &partial[i], dX, with_param_grads, lo, hi - lo);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const auto [lo, hi] = chunk_range(B, n, i);
      if (hi > lo)
        backward_rows(net, cache, dOut, &partial[i], dX, with_param_grads, lo, hi - lo);
    }
  }

  // Serial in-order reduction keeps the sum independent of thread timing.
  Grads total;
  total.set_zero_like(net);
  if (with_param_grads)
    for (int i = 0; i < n; ++i) total.add(partial[i]);
  return total;
}

}  // namespace

Net Net::make(int in, const std::vector<int>& hidden, int out, Head head,
              RngStream& rng, double final_scale) {
  if (in < 1 || out < 1) throw std::invalid_argument("net: bad dimensions");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("net: bad hidden width");
  Net net;
  net.head = head;
  std::vector<int> widths;
  widths.push_back(in);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l], fan_out = widths[l + 1];
    Eigen::MatrixXd W(fan_out, fan_in);
    const bool last = (l + 2 == widths.size());
    const double limit =
        (last && final_scale > 0.0) ? final_scale : std::sqrt(6.0 / fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) W(r, c) = rng.uniform(-limit, limit);
    net.W.push_back(std::move(W));
    net.b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

bool Net::finite() const {
  for (const auto& w : W)
    if (!w.allFinite()) return false;
  for (const auto& v : b)
    if (!v.allFinite()) return false;
  return true;
}

void Grads::set_zero_like(const Net& net) {
  W.resize(net.W.size());
  b.resize(net.b.size());
  for (size_t l = 0; l < net.W.size(); ++l) {
    W[l] = Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols());
    b[l] = Eigen::VectorXd::Zero(net.b[l].size());
  }
}

void Grads::add(const Grads& other) {
  for (size_t l = 0; l < W.size(); ++l) {
    W[l] += other.W[l];
    b[l] += other.b[l];
  }
}

double Grads::max_abs() const {
  double m = 0.0;
  for (const auto& w : W) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& v : b)
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

Eigen::MatrixXd forward(const Net& net, const Eigen::MatrixXd& X, FwdCache* cache,
                        int chunks) {
  return forward_impl<true>(net, X, cache, chunks);
}

Eigen::MatrixXd forward_serial(const Net& net, const Eigen::MatrixXd& X,
                               FwdCache* cache, int chunks) {
  return forward_impl<false>(net, X, cache, chunks);
}

Grads backward(const Net& net, const FwdCache& cache, const Eigen::MatrixXd& dOut,
               Eigen::MatrixXd* dX, int chunks, bool with_param_grads) {
  return backward_impl<true>(net, cache, dOut, dX, chunks, with_param_grads);
}

Grads backward_serial(const Net& net, const FwdCache& cache,
                      const Eigen::MatrixXd& dOut, Eigen::MatrixXd* dX, int chunks,
                      bool with_param_grads) {
  return backward_impl<false>(net, cache, dOut, dX, chunks, with_param_grads);
}

void Adam::init(const Net& net) {
  t = 0;
  mW.clear();
  vW.clear();
  mb.clear();
  vb.clear();
  for (size_t l = 0; l < net.W.size(); ++l) {
    mW.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    vW.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    mb.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
    vb.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
}

void Adam::step(Net& net, const Grads& g) {
  if (mW.size() != net.W.size())
    throw std::invalid_argument("adam: not initialized for this network");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (size_t l = 0; l < net.W.size(); ++l) {
    mW[l] = beta1 * mW[l] + (1.0 - beta1) * g.W[l];
    vW[l] = beta2 * vW[l] + (1.0 - beta2) * g.W[l].cwiseProduct(g.W[l]);
    net.W[l].array() -=
        lr * (mW[l].array() / bc1) / ((vW[l].array() / bc2).sqrt() + eps);
    mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.b[l];
    vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.b[l].cwiseProduct(g.b[l]);
    net.b[l].array() -=
        lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + eps);
  }
}

void blend_towards(Net& target, const Net& source, double tau) {
  if (target.W.size() != source.W.size())
    throw std::invalid_argument("blend: mismatched architectures");
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("blend: tau must be in (0,1]");
  for (size_t l = 0; l < target.W.size(); ++l) {
    target.W[l] = (1.0 - tau) * target.W[l] + tau * source.W[l];
    target.b[l] = (1.0 - tau) * target.b[l] + tau * source.b[l];
  }
}

std::string net_to_json(const Net& net) {
  nlohmann::json j;
  j["head"] = net.head == Head::sigmoid ? "sigmoid" : "linear";
  j["W"] = nlohmann::json::array();
  j["b"] = nlohmann::json::array();
  for (const auto& W : net.W) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < W.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < W.cols(); ++c) row.push_back(W(r, c));
      rows.push_back(std::move(row));
    }
    j["W"].push_back(std::move(rows));
  }
  for (const auto& b : net.b) {
    nlohmann::json v = nlohmann::json::array();
    for (int i = 0; i < b.size(); ++i) v.push_back(b(i));
    j["b"].push_back(std::move(v));
  }
  return j.dump();
}

Net net_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Net net;
  const std::string head = j.at("head").get<std::string>();
  if (head == "sigmoid")
    net.head = Head::sigmoid;
  else if (head == "linear")
    net.head = Head::linear;
  else
    throw std::invalid_argument("net: unknown head '" + head + "'");
  for (const auto& rows : j.at("W")) {
    const int R = static_cast<int>(rows.size());
    if (R == 0) throw std::invalid_argument("net: empty weight matrix");
    const int C = static_cast<int>(rows.at(0).size());
    Eigen::MatrixXd W(R, C);
    for (int r = 0; r < R; ++r) {
      if (static_cast<int>(rows.at(r).size()) != C)
        throw std::invalid_argument("net: ragged weight matrix");
      for (int c = 0; c < C; ++c) W(r, c) = rows.at(r).at(c).get<double>();
    }
    net.W.push_back(std::move(W));
  }
  for (const auto& vec : j.at("b")) {
    Eigen::VectorXd b(vec.size());
    for (size_t i = 0; i < vec.size(); ++i) b(static_cast<int>(i)) = vec.at(i).get<double>();
    net.b.push_back(std::move(b));
  }
  if (net.W.size() != net.b.size() || net.W.empty())
    throw std::invalid_argument("net: inconsistent layer counts");
  for (size_t l = 0; l < net.W.size(); ++l)
    if (net.W[l].rows() != net.b[l].size())
      throw std::invalid_argument("net: bias/weight shape mismatch");
  return net;
}

}  // namespace chemo
