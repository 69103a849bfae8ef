#include "terraprint/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "terraprint/csv.hpp"
#include "terraprint/rng.hpp"

namespace terraprint {
namespace {

using json = nlohmann::json;

constexpr double kSigmaFloor = 1e-12;

Eigen::VectorXd activate_vec(const Eigen::VectorXd& pre, Activation act) {
  if (act == Activation::relu) return pre.cwiseMax(0.0);
  return pre.array().tanh().matrix();
}

Eigen::MatrixXd activate_mat(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::relu) return pre.cwiseMax(0.0);
  return pre.array().tanh().matrix();
}

// Derivative of the activation, from pre- and post-activation values.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre,
                                const Eigen::MatrixXd& post, Activation act) {
  if (act == Activation::relu)
    return (pre.array() > 0.0).cast<double>().matrix();
  return (1.0 - post.array().square()).matrix();
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), long(v.size()));
}

// Column-wise mean and standard deviation; near-constant columns get sigma 1
// so standardization maps them to (numerically) zero instead of blowing up.
void column_stats(const Eigen::MatrixXd& m, Eigen::VectorXd& mean,
                  Eigen::VectorXd& sigma) {
  const long n = m.rows();
  mean = m.colwise().mean();
  sigma.resize(m.cols());
  for (long j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - mean[j]).square().sum() / double(n);
    const double sd = std::sqrt(var);
    sigma[j] = sd < kSigmaFloor ? 1.0 : sd;
  }
}

}  // namespace

Eigen::VectorXd PredictorNet::preprocess(const Eigen::VectorXd& z) const {
  const int d = input_dim();
  if (z.size() != d) throw std::invalid_argument("feature vector dimension mismatch");
  Eigen::VectorXd x = z;
  if (mean.size() == d) x -= mean;
  if (sigma.size() == d) x = x.cwiseQuotient(sigma.cwiseMax(kSigmaFloor));
  if (mask.size() == d) x = x.cwiseProduct(mask);
  return x;
}

Eigen::VectorXd PredictorNet::forward_raw(const Eigen::VectorXd& z) const {
  if (weights.empty() || weights.size() != biases.size())
    throw std::invalid_argument("predictor has no layers");
  Eigen::VectorXd a = preprocess(z);
  for (size_t l = 0; l + 1 < weights.size(); ++l)
    a = activate_vec(weights[l] * a + biases[l], activation);
  return weights.back() * a + biases.back();
}

DisturbanceVec PredictorNet::forward(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd y = forward_raw(z);
  if (y.size() != 6) throw std::invalid_argument("predictor output is not 6-dimensional");
  return DisturbanceVec::from_vector(y);
}

PredictorNet PredictorNet::zero(int d, const std::vector<std::string>& layout) {
  if (d <= 0) throw std::invalid_argument("feature dimension must be positive");
  const int h = 8;  // size is irrelevant: all parameters are zero
  PredictorNet net;
  net.weights = {Eigen::MatrixXd::Zero(h, d), Eigen::MatrixXd::Zero(h, h),
                 Eigen::MatrixXd::Zero(6, h)};
  net.biases = {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(h),
                Eigen::VectorXd::Zero(6)};
  net.mask = Eigen::VectorXd::Ones(d);
  net.mean = Eigen::VectorXd::Zero(d);
  net.sigma = Eigen::VectorXd::Ones(d);
  net.layout = layout;
  return net;
}

PredictorNet PredictorNet::initialized(int d, int h1, int h2, Activation act,
                                       std::uint64_t seed) {
  if (d <= 0 || h1 <= 0 || h2 <= 0)
    throw std::invalid_argument("layer sizes must be positive");
  PredictorNet net;
  net.activation = act;
  RngStream rng(seed);
  auto init_layer = [&](int rows, int cols) {
    // He scaling for relu, Glorot for tanh; biases start at zero.
    const double s = act == Activation::relu ? std::sqrt(2.0 / cols)
                                             : std::sqrt(2.0 / (rows + cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.normal(s);
    return w;
  };
  net.weights = {init_layer(h1, d), init_layer(h2, h1), init_layer(6, h2)};
  net.biases = {Eigen::VectorXd::Zero(h1), Eigen::VectorXd::Zero(h2),
                Eigen::VectorXd::Zero(6)};
  net.mask = Eigen::VectorXd::Ones(d);
  net.mean = Eigen::VectorXd::Zero(d);
  net.sigma = Eigen::VectorXd::Ones(d);
  return net;
}

void PredictorNet::save(const std::string& path) const {
  json j;
  j["layout"] = layout;
  j["activation"] = activation == Activation::relu ? "relu" : "tanh";
  j["mask"] = to_std(mask);
  j["standardization"]["mean"] = to_std(mean);
  j["standardization"]["sigma"] = to_std(sigma);
  j["layers"] = json::array();
  for (size_t l = 0; l < weights.size(); ++l) {
    json layer;
    layer["w"] = json::array();
    for (long r = 0; r < weights[l].rows(); ++r) {
      const Eigen::VectorXd row = weights[l].row(r).transpose();
      layer["w"].push_back(to_std(row));
    }
    layer["b"] = to_std(biases[l]);
    j["layers"].push_back(std::move(layer));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

PredictorNet PredictorNet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  json j;
  in >> j;

  PredictorNet net;
  net.layout = j.value("layout", std::vector<std::string>{});
  const std::string act = j.value("activation", "relu");
  if (act == "relu")
    net.activation = Activation::relu;
  else if (act == "tanh")
    net.activation = Activation::tanh_fn;
  else
    throw std::runtime_error("unknown activation in " + path + ": " + act);
  net.mask = from_std(j.at("mask").get<std::vector<double>>());
  net.mean = from_std(j.at("standardization").at("mean").get<std::vector<double>>());
  net.sigma = from_std(j.at("standardization").at("sigma").get<std::vector<double>>());
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("w").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::runtime_error("empty weight matrix in " + path);
    Eigen::MatrixXd w(long(rows.size()), long(rows.front().size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      if (long(rows[r].size()) != w.cols())
        throw std::runtime_error("ragged weight matrix in " + path);
      w.row(r) = from_std(rows[r]).transpose();
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(from_std(layer.at("b").get<std::vector<double>>()));
  }

  if (net.weights.empty()) throw std::runtime_error("no layers in " + path);
  const long d = net.weights.front().cols();
  if (net.mask.size() != d || net.mean.size() != d || net.sigma.size() != d)
    throw std::runtime_error("standardization/mask size mismatch in " + path);
  for (size_t l = 0; l < net.weights.size(); ++l) {
    if (net.biases[l].size() != net.weights[l].rows())
      throw std::runtime_error("bias size mismatch in " + path);
    if (l > 0 && net.weights[l].cols() != net.weights[l - 1].rows())
      throw std::runtime_error("layer shape chain mismatch in " + path);
  }
  return net;
}

int TrajectoryDataset::dim() const {
  return trajectories.empty() ? 0 : int(trajectories.front().features.cols());
}

void TrajectoryDataset::split_80_20(std::uint64_t seed) {
  const int n = int(trajectories.size());
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng(RngStream::derive(seed, 0x5971c3));
  for (int i = n - 1; i > 0; --i) {
    const int j = int(rng.integer() % std::uint64_t(i + 1));
    std::swap(ids[i], ids[j]);
  }
  int n_train = std::max(1, (4 * n) / 5);
  if (n_train >= n && n > 1) n_train = n - 1;
  train_ids.assign(ids.begin(), ids.begin() + n_train);
  val_ids.assign(ids.begin() + n_train, ids.end());
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(val_ids.begin(), val_ids.end());
}

void TrajectoryDataset::validate_split() const {
  if (train_ids.empty() || val_ids.empty())
    throw std::runtime_error("trajectory split has an empty side");
  std::set<int> seen;
  auto check = [&](const std::vector<int>& ids) {
    for (int id : ids) {
      if (id < 0 || id >= int(trajectories.size()))
        throw std::runtime_error("trajectory id out of range in split");
      if (!seen.insert(id).second)
        throw std::runtime_error("trajectory appears twice across the split");
    }
  };
  check(train_ids);
  check(val_ids);
}

void TrajectoryDataset::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json split;
  split["layout"] = layout;
  split["train_ids"] = train_ids;
  split["val_ids"] = val_ids;
  {
    std::ofstream out(fs::path(dir) / "split.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write split.json in " + dir);
    out << split.dump(2) << "\n";
  }

  const std::vector<std::string> target_names = {
      "target_dx", "target_dy", "target_dz",
      "target_rx", "target_ry", "target_rz"};
  for (size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& tr = trajectories[i];
    csv::Table t;
    t.header.push_back("t");
    for (long j = 0; j < tr.features.cols(); ++j)
      t.header.push_back(j < long(layout.size()) ? layout[j]
                                                 : "z" + std::to_string(j));
    t.header.insert(t.header.end(), target_names.begin(), target_names.end());
    t.rows.reserve(tr.features.rows());
    for (long r = 0; r < tr.features.rows(); ++r) {
      std::vector<double> row;
      row.reserve(size_t(1 + tr.features.cols() + 6));
      row.push_back(0.02 * double(r));  // 50 Hz sampling
      for (long j = 0; j < tr.features.cols(); ++j) row.push_back(tr.features(r, j));
      for (long j = 0; j < 6; ++j) row.push_back(tr.targets(r, j));
      t.rows.push_back(std::move(row));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%03zu.csv", i);
    csv::write((fs::path(dir) / name).string(), t);
  }
}

TrajectoryDataset TrajectoryDataset::load(const std::string& dir) {
  namespace fs = std::filesystem;
  TrajectoryDataset data;
  {
    std::ifstream in(fs::path(dir) / "split.json", std::ios::binary);
    if (!in) throw std::runtime_error("missing split.json in " + dir);
    json split;
    in >> split;
    data.layout = split.value("layout", std::vector<std::string>{});
    data.train_ids = split.value("train_ids", std::vector<int>{});
    data.val_ids = split.value("val_ids", std::vector<int>{});
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("traj_", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  for (const auto& file : files) {
    const csv::Table t = csv::read(file.string());
    if (t.header.size() < 8)
      throw std::runtime_error("trajectory file too narrow: " + file.string());
    const long d = long(t.header.size()) - 7;  // t + features + 6 targets
    Trajectory tr;
    tr.features.resize(long(t.rows.size()), d);
    tr.targets.resize(long(t.rows.size()), 6);
    for (size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r].size() != t.header.size())
        throw std::runtime_error("ragged row in " + file.string());
      for (long j = 0; j < d; ++j) tr.features(long(r), j) = t.rows[r][size_t(1 + j)];
      for (long j = 0; j < 6; ++j) tr.targets(long(r), j) = t.rows[r][size_t(1 + d + j)];
    }
    data.trajectories.push_back(std::move(tr));
  }
  return data;
}

TrainResult train_predictor(const TrajectoryDataset& data, const TrainHyper& hyper,
                            const Eigen::VectorXd& mask) {
  if (data.trajectories.size() < 2)
    throw std::invalid_argument("training needs at least two trajectories");
  data.validate_split();
  const int d = data.dim();
  if (d <= 0) throw std::invalid_argument("dataset has no features");

  auto stack = [&](const std::vector<int>& ids, Eigen::MatrixXd& X,
                   Eigen::MatrixXd& T) {
    long rows = 0;
    for (int id : ids) rows += data.trajectories[size_t(id)].features.rows();
    X.resize(rows, d);
    T.resize(rows, 6);
    long r = 0;
    for (int id : ids) {
      const Trajectory& tr = data.trajectories[size_t(id)];
      if (tr.features.cols() != d || tr.targets.cols() != 6 ||
          tr.targets.rows() != tr.features.rows())
        throw std::invalid_argument("inconsistent trajectory shapes");
      X.middleRows(r, tr.features.rows()) = tr.features;
      T.middleRows(r, tr.targets.rows()) = tr.targets;
      r += tr.features.rows();
    }
  };
  Eigen::MatrixXd Xtr, Ttr, Xva, Tva;
  stack(data.train_ids, Xtr, Ttr);
  stack(data.val_ids, Xva, Tva);
  if (Xtr.rows() == 0 || Xva.rows() == 0)
    throw std::invalid_argument("split side has no samples");

  Eigen::VectorXd in_mean, in_sigma, t_mean, t_sigma;
  column_stats(Xtr, in_mean, in_sigma);
  column_stats(Ttr, t_mean, t_sigma);

  PredictorNet net = PredictorNet::initialized(
      d, hyper.hidden1, hyper.hidden2, hyper.activation,
      RngStream::derive(hyper.seed, 0x11a7));
  net.mean = in_mean;
  net.sigma = in_sigma;
  net.mask = mask.size() == d ? mask : Eigen::VectorXd::Ones(d);
  net.layout = data.layout;

  TrainResult out;
  if (hyper.epochs <= 0) {
    // Untrained: hand back the initialization verbatim (standardized output
    // units, no target folding).
    out.net = std::move(net);
    return out;
  }

  // Inputs as standardized/masked columns, targets standardized per component.
  auto prep_inputs = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z(d, X.rows());
    for (long i = 0; i < X.rows(); ++i)
      Z.col(i) = net.preprocess(X.row(i).transpose());
    return Z;
  };
  auto prep_targets = [&](const Eigen::MatrixXd& T) {
    Eigen::MatrixXd S(6, T.rows());
    for (long i = 0; i < T.rows(); ++i)
      S.col(i) = (T.row(i).transpose() - t_mean).cwiseQuotient(t_sigma);
    return S;
  };
  const Eigen::MatrixXd Ztr = prep_inputs(Xtr);
  const Eigen::MatrixXd Zva = prep_inputs(Xva);
  const Eigen::MatrixXd Str = prep_targets(Ttr);
  const Eigen::MatrixXd Sva = prep_targets(Tva);

  auto forward_batch = [&](const Eigen::MatrixXd& Z, Eigen::MatrixXd& P1,
                           Eigen::MatrixXd& A1, Eigen::MatrixXd& P2,
                           Eigen::MatrixXd& A2) {
    P1 = (net.weights[0] * Z).colwise() + net.biases[0];
    A1 = activate_mat(P1, net.activation);
    P2 = (net.weights[1] * A1).colwise() + net.biases[1];
    A2 = activate_mat(P2, net.activation);
    return Eigen::MatrixXd(((net.weights[2] * A2).colwise() + net.biases[2]));
  };
  auto mean_loss = [&](const Eigen::MatrixXd& Z, const Eigen::MatrixXd& S) {
    Eigen::MatrixXd P1, A1, P2, A2;
    const Eigen::MatrixXd Y = forward_batch(Z, P1, A1, P2, A2);
    return 0.5 * (Y - S).squaredNorm() / double(Z.cols());
  };

  std::vector<Eigen::MatrixXd> vW(3);
  std::vector<Eigen::VectorXd> vb(3);
  for (int l = 0; l < 3; ++l) {
    vW[l] = Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols());
    vb[l] = Eigen::VectorXd::Zero(net.biases[l].size());
  }

  const long n = Ztr.cols();
  const long batch = std::max(1, hyper.batch);
  std::vector<long> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream shuffle_rng(RngStream::derive(hyper.seed, 0x5bdc1));

  // Curve entry 0 is the pre-training loss; one entry per epoch follows.
  out.train_loss.push_back(mean_loss(Ztr, Str));
  out.val_loss.push_back(mean_loss(Zva, Sva));
  double best_val = out.val_loss.back();
  auto best_weights = net.weights;
  auto best_biases = net.biases;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (long i = n - 1; i > 0; --i) {
      const long j = long(shuffle_rng.integer() % std::uint64_t(i + 1));
      std::swap(order[size_t(i)], order[size_t(j)]);
    }
    for (long start = 0; start < n; start += batch) {
      const long b = std::min(batch, n - start);
      Eigen::MatrixXd Zb(d, b), Sb(6, b);
      for (long k = 0; k < b; ++k) {
        Zb.col(k) = Ztr.col(order[size_t(start + k)]);
        Sb.col(k) = Str.col(order[size_t(start + k)]);
      }
      Eigen::MatrixXd P1, A1, P2, A2;
      const Eigen::MatrixXd Y = forward_batch(Zb, P1, A1, P2, A2);

      const Eigen::MatrixXd D3 = (Y - Sb) / double(b);
      const Eigen::MatrixXd D2 =
          (net.weights[2].transpose() * D3)
              .cwiseProduct(activation_grad(P2, A2, net.activation));
      const Eigen::MatrixXd D1 =
          (net.weights[1].transpose() * D2)
              .cwiseProduct(activation_grad(P1, A1, net.activation));

      Eigen::MatrixXd gW3 = D3 * A2.transpose();
      Eigen::MatrixXd gW2 = D2 * A1.transpose();
      Eigen::MatrixXd gW1 = D1 * Zb.transpose();
      Eigen::VectorXd gb3 = D3.rowwise().sum();
      Eigen::VectorXd gb2 = D2.rowwise().sum();
      Eigen::VectorXd gb1 = D1.rowwise().sum();

      if (hyper.grad_clip > 0.0) {
        const double norm = std::sqrt(
            gW1.squaredNorm() + gW2.squaredNorm() + gW3.squaredNorm() +
            gb1.squaredNorm() + gb2.squaredNorm() + gb3.squaredNorm());
        if (norm > hyper.grad_clip) {
          const double s = hyper.grad_clip / norm;
          gW1 *= s; gW2 *= s; gW3 *= s;
          gb1 *= s; gb2 *= s; gb3 *= s;
        }
      }
      if (hyper.weight_decay > 0.0) {
        gW1 += hyper.weight_decay * net.weights[0];
        gW2 += hyper.weight_decay * net.weights[1];
        gW3 += hyper.weight_decay * net.weights[2];
      }

      auto step = [&](int l, const Eigen::MatrixXd& gW, const Eigen::VectorXd& gb) {
        vW[size_t(l)] = hyper.momentum * vW[size_t(l)] - hyper.lr * gW;
        vb[size_t(l)] = hyper.momentum * vb[size_t(l)] - hyper.lr * gb;
        net.weights[size_t(l)] += vW[size_t(l)];
        net.biases[size_t(l)] += vb[size_t(l)];
      };
      step(0, gW1, gb1);
      step(1, gW2, gb2);
      step(2, gW3, gb3);
    }
    out.train_loss.push_back(mean_loss(Ztr, Str));
    out.val_loss.push_back(mean_loss(Zva, Sva));
    if (out.val_loss.back() < best_val) {
      best_val = out.val_loss.back();
      best_weights = net.weights;
      best_biases = net.biases;
    }
  }
  // Deploy the epoch that generalized best, not the last one.
  net.weights = best_weights;
  net.biases = best_biases;

  // Per-axis held-out MSE in variance-normalized units: 1.0 is what the best
  // constant predictor scores, so an axis near or above 1.0 carries no signal
  // the net actually captured — deploying it would emit pure babble. Such
  // axes are pinned to their training mean.
  {
    Eigen::MatrixXd P1, A1, P2, A2;
    const Eigen::MatrixXd Yva = forward_batch(Zva, P1, A1, P2, A2);
    const Eigen::MatrixXd R = Yva - Sva;
    out.axis_val_mse = R.array().square().rowwise().mean();
  }
  if (hyper.axis_gate > 0.0) {
    for (int a = 0; a < 6; ++a) {
      if (out.axis_val_mse[a] >= hyper.axis_gate) {
        net.weights[2].row(a).setZero();
        net.biases[2][a] = 0.0;
        out.axes_pinned.push_back(a);
      }
    }
  }

  // Fold the target standardization into the output layer so the returned net
  // predicts physical units directly.
  net.weights[2] = t_sigma.asDiagonal() * net.weights[2];
  net.biases[2] = t_sigma.cwiseProduct(net.biases[2]) + t_mean;
  out.net = std::move(net);
  return out;
}

Eigen::VectorXd select_features(const Eigen::MatrixXd& features,
                                const Eigen::MatrixXd& targets, double threshold,
                                double ridge, int max_iters) {
  if (threshold < 0.0) throw std::invalid_argument("threshold must be nonnegative");
  if (features.rows() != targets.rows() || features.rows() == 0)
    throw std::invalid_argument("feature/target row mismatch");
  const long d = features.cols();
  const long n = features.rows();

  Eigen::VectorXd mu, sd;
  column_stats(features, mu, sd);
  Eigen::MatrixXd X = features.rowwise() - mu.transpose();
  X.array().rowwise() /= sd.transpose().array();
  const Eigen::MatrixXd Y = targets.rowwise() - targets.colwise().mean();

  std::vector<long> active(static_cast<size_t>(d));
  std::iota(active.begin(), active.end(), 0);

  for (int iter = 0; iter < max_iters && !active.empty(); ++iter) {
    Eigen::MatrixXd Xa(n, long(active.size()));
    for (size_t k = 0; k < active.size(); ++k) Xa.col(long(k)) = X.col(active[k]);

    Eigen::MatrixXd W;
    if (ridge <= 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xa);
      if (qr.rank() < long(active.size()))
        throw std::runtime_error(
            "feature matrix is rank-deficient; use a positive ridge");
      W = qr.solve(Y);
    } else {
      const Eigen::MatrixXd G =
          Xa.transpose() * Xa +
          ridge * Eigen::MatrixXd::Identity(long(active.size()), long(active.size()));
      W = G.ldlt().solve(Xa.transpose() * Y);
    }

    std::vector<long> keep;
    keep.reserve(active.size());
    for (size_t k = 0; k < active.size(); ++k)
      if (W.row(long(k)).cwiseAbs().maxCoeff() >= threshold)
        keep.push_back(active[k]);
    if (keep.size() == active.size()) break;  // fixed point
    active = std::move(keep);
  }

  Eigen::VectorXd mask = Eigen::VectorXd::Zero(d);
  for (long id : active) mask[id] = 1.0;
  return mask;
}

Eigen::VectorXd select_features(const TrajectoryDataset& data, double threshold,
                                double ridge) {
  std::vector<int> ids = data.train_ids;
  if (ids.empty()) {
    ids.resize(data.trajectories.size());
    std::iota(ids.begin(), ids.end(), 0);
  }
  long rows = 0;
  for (int id : ids) rows += data.trajectories[size_t(id)].features.rows();
  const int d = data.dim();
  Eigen::MatrixXd X(rows, d), Y(rows, 6);
  long r = 0;
  for (int id : ids) {
    const Trajectory& tr = data.trajectories[size_t(id)];
    X.middleRows(r, tr.features.rows()) = tr.features;
    Y.middleRows(r, tr.targets.rows()) = tr.targets;
    r += tr.features.rows();
  }
  return select_features(X, Y, threshold, ridge);
}

Eigen::VectorXd analytic_gradient(const PredictorNet& net, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& target, double weight) {
  const size_t L = net.weights.size();
  const Eigen::VectorXd x = net.preprocess(z);

  std::vector<Eigen::VectorXd> pre(L), post(L);
  Eigen::VectorXd a = x;
  for (size_t l = 0; l < L; ++l) {
    pre[l] = net.weights[l] * a + net.biases[l];
    post[l] = l + 1 < L ? activate_vec(pre[l], net.activation) : pre[l];
    a = post[l];
  }
  if (a.size() != target.size())
    throw std::invalid_argument("target dimension mismatch");

  std::vector<Eigen::MatrixXd> gW(L);
  std::vector<Eigen::VectorXd> gb(L);
  Eigen::VectorXd delta = weight * (a - target);
  for (size_t l = L; l-- > 0;) {
    const Eigen::VectorXd& input = l == 0 ? x : post[l - 1];
    gW[l] = delta * input.transpose();
    gb[l] = delta;
    if (l > 0)
      delta = (net.weights[l].transpose() * delta)
                  .cwiseProduct(Eigen::VectorXd(
                      activation_grad(pre[l - 1], post[l - 1], net.activation)));
  }

  long total = 0;
  for (size_t l = 0; l < L; ++l) total += gW[l].size() + gb[l].size();
  Eigen::VectorXd flat(total);
  long at = 0;
  for (size_t l = 0; l < L; ++l) {
    for (long r = 0; r < gW[l].rows(); ++r)
      for (long c = 0; c < gW[l].cols(); ++c) flat[at++] = gW[l](r, c);
    for (long i = 0; i < gb[l].size(); ++i) flat[at++] = gb[l][i];
  }
  return flat;
}

double numerical_gradient_check(const PredictorNet& net, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& target, double h) {
  const Eigen::VectorXd analytic = analytic_gradient(net, z, target);
  auto loss = [&](const PredictorNet& n) {
    const Eigen::VectorXd e = n.forward_raw(z) - target;
    return 0.5 * e.squaredNorm();
  };

  PredictorNet probe = net;
  double worst = 0.0;
  long at = 0;
  auto check_param = [&](double& p) {
    const double saved = p;
    p = saved + h;
    const double lp = loss(probe);
    p = saved - h;
    const double lm = loss(probe);
    p = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic[at++];
    // Guarded relative error: parameters with near-zero gradient are compared
    // on an absolute scale instead of amplifying finite-difference noise.
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
    worst = std::max(worst, rel);
  };

  for (size_t l = 0; l < probe.weights.size(); ++l) {
    for (long r = 0; r < probe.weights[l].rows(); ++r)
      for (long c = 0; c < probe.weights[l].cols(); ++c)
        check_param(probe.weights[l](r, c));
    for (long i = 0; i < probe.biases[l].size(); ++i)
      check_param(probe.biases[l][i]);
  }
  return worst;
}

}  // namespace terraprint
