#ifndef TERRAPRINT_PREDICTOR_HPP
#define TERRAPRINT_PREDICTOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "terraprint/pose.hpp"

namespace terraprint {

enum class Activation { relu, tanh_fn };

// Feedforward disturbance predictor d -> h1 -> h2 -> 6. Inputs are masked and
// standardized inside forward(); outputs are physical units (m / rad per
// control step). A zero() net is the reactive baseline.
struct PredictorNet {
  std::vector<Eigen::MatrixXd> weights;  // [h1 x d, h2 x h1, 6 x h2]
  std::vector<Eigen::VectorXd> biases;
  Activation activation{Activation::relu};
  Eigen::VectorXd mask;   // 1 keeps a feature, 0 silences it entirely
  Eigen::VectorXd mean;   // input standardization
  Eigen::VectorXd sigma;
  std::vector<std::string> layout;

  int input_dim() const { return weights.empty() ? 0 : int(weights.front().cols()); }

  // Standardized-then-masked input, so a masked feature contributes exactly
  // zero regardless of its standardization statistics.
  Eigen::VectorXd preprocess(const Eigen::VectorXd& z) const;
  Eigen::VectorXd forward_raw(const Eigen::VectorXd& z) const;
  DisturbanceVec forward(const Eigen::VectorXd& z) const;

  static PredictorNet zero(int d, const std::vector<std::string>& layout = {});
  static PredictorNet initialized(int d, int h1, int h2, Activation act,
                                  std::uint64_t seed);

  void save(const std::string& path) const;
  static PredictorNet load(const std::string& path);
};

// One 50 Hz trajectory: rows are samples; targets are the disturbance
// increments measured 0.5 s ahead of each feature row.
struct Trajectory {
  Eigen::MatrixXd features;  // n x d
  Eigen::MatrixXd targets;   // n x 6
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<std::string> layout;

  int dim() const;
  // 80/20 split at the trajectory level, shuffled deterministically.
  void split_80_20(std::uint64_t seed);
  void validate_split() const;  // throws on overlap or empty side

  void save(const std::string& dir) const;
  static TrajectoryDataset load(const std::string& dir);
};

struct TrainHyper {
  double lr{0.02};
  double momentum{0.9};
  int epochs{60};
  int batch{128};
  std::uint64_t seed{1};
  int hidden1{128};
  int hidden2{64};
  Activation activation{Activation::relu};
  // Per-batch global gradient-norm ceiling; rare outlier rows (terrain
  // transitions) otherwise launch the momentum into divergence. <= 0 disables.
  double grad_clip{5.0};
  // L2 penalty on weights (not biases). Most target content is irreducible
  // contact noise; without decay the net memorizes it and emits babble on
  // fresh data.
  double weight_decay{1e-3};
  // A target axis whose held-out MSE stays above this fraction of its raw
  // variance carries no predictable signal; its output is pinned to the
  // training mean instead of deployed babble. <= 0 disables, >= 1 keeps all.
  double axis_gate{0.9};
};

struct TrainResult {
  PredictorNet net;
  std::vector<double> train_loss;  // per epoch, standardized-target MSE
  std::vector<double> val_loss;
  Eigen::VectorXd axis_val_mse;    // per target axis, variance-normalized
  std::vector<int> axes_pinned;    // axes replaced by their constant mean
};

// Mini-batch gradient descent with momentum on standardized inputs and
// targets; the target scaling is folded back into the output layer so the
// returned net emits physical units. Deterministic in hyper.seed.
TrainResult train_predictor(const TrajectoryDataset& data,
                            const TrainHyper& hyper,
                            const Eigen::VectorXd& mask = Eigen::VectorXd());

// Sequentially thresholded least squares on the (standardized) linear problem
// features -> targets. Returns the 0/1 feature mask. Throws when the design
// matrix is singular and ridge is zero.
Eigen::VectorXd select_features(const Eigen::MatrixXd& features,
                                const Eigen::MatrixXd& targets,
                                double threshold, double ridge,
                                int max_iters = 20);
Eigen::VectorXd select_features(const TrajectoryDataset& data,
                                double threshold, double ridge);

// Flattened analytic gradient of weight * (half squared prediction error) at
// (z, target), ordered layer by layer, weights before biases. The weight
// argument scales the loss (and hence the gradient) exactly.
Eigen::VectorXd analytic_gradient(const PredictorNet& net,
                                  const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& target,
                                  double weight = 1.0);

// Max relative error between analytic and central-difference gradients of the
// half-squared-error loss at (z, target), over every weight and bias.
double numerical_gradient_check(const PredictorNet& net,
                                const Eigen::VectorXd& z,
                                const Eigen::VectorXd& target,
                                double h = 1e-5);

}  // namespace terraprint

#endif
