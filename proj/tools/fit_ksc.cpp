// Fits the KSC biological-torque approximator to the plant's inverse
// dynamics on the nominal gait (all three protocol speeds, with state jitter
// around the gait manifold) and writes the parameter file consumed by the
// HTC controller.
//
// Usage: fit_ksc [output_path] [iterations]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exo/controllers.hpp"
#include "exo/dynamics.hpp"
#include "exo/random.hpp"
#include "exo/sim.hpp"

using namespace exo;
using dynamics::PlantModel;
using dynamics::PlantState;

namespace {

struct Dataset {
  Eigen::MatrixXd x;  // 9 x n
  Eigen::MatrixXd y;  // 4 x n
};

Dataset build_dataset(const PlantModel& model, int per_speed, Rng& rng) {
  const control::StrideTimeTable times = sim::default_stride_times();
  std::vector<Eigen::VectorXd> xs, ys;
  const sim::TrunkProfile trunk;
  for (double v : {0.4, 0.6, 0.8}) {
    const auto gait = sim::nominal_gait(v);
    const double period = times.period(v);
    for (int i = 0; i < per_speed; ++i) {
      const double phi = rng.uniform();
      PlantState s;
      trunk.apply(phi, 1.0 / period, s);
      for (int j = 0; j < 4; ++j) {
        s.q[j] = gait[j].eval(phi) + 0.03 * rng.gaussian();
        s.q_dot[j] = gait[j].deriv(phi) / period + 0.1 * rng.gaussian();
        s.q_ddot[j] = gait[j].deriv2(phi) / period / period;
      }
      s.gamma += 0.01 * rng.gaussian();
      const Vec4 tau = dynamics::gamma_torques(model, s).values;
      Eigen::VectorXd x(9);
      x << s.q[0], s.q[1], s.q[2], s.q[3], s.q_dot[0], s.q_dot[1], s.q_dot[2],
          s.q_dot[3], s.gamma;
      xs.push_back(x);
      ys.push_back(tau);
    }
  }
  Dataset d;
  d.x.resize(9, static_cast<Eigen::Index>(xs.size()));
  d.y.resize(4, static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.x.col(static_cast<Eigen::Index>(i)) = xs[i];
    d.y.col(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return d;
}

template <typename Mat>
struct Adam {
  double lr = 3e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Mat m, v;
  int t = 0;

  void init(const Mat& shape) {
    m = Mat::Zero(shape.rows(), shape.cols());
    v = m;
  }
  void step(Mat& w, const Mat& g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    w -= (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  }
};

}  // namespace

int main(int argc, char** argv) {
  const std::string out_path = argc > 1 ? argv[1] : "data/ksc_params.tsv";
  const int iterations = argc > 2 ? std::atoi(argv[2]) : 30000;

  const PlantModel model = PlantModel::default_model();
  Rng rng(20240617);
  const Dataset train = build_dataset(model, 1500, rng);
  const Eigen::Index n = train.x.cols();
  std::printf("dataset: %ld samples\n", static_cast<long>(n));

  control::KscNetwork net = control::KscNetwork::zeros(16);
  net.input_mean = train.x.rowwise().mean();
  net.input_scale =
      ((train.x.colwise() - net.input_mean).array().square().rowwise().sum() /
       static_cast<double>(n))
          .sqrt()
          .matrix();
  for (int i = 0; i < 9; ++i)
    if (net.input_scale[i] < 1e-6) net.input_scale[i] = 1.0;
  net.output_mean = train.y.rowwise().mean();
  net.output_scale =
      ((train.y.colwise() - net.output_mean).array().square().rowwise().sum() /
       static_cast<double>(n))
          .sqrt()
          .matrix();

  // Standardized copies.
  Eigen::MatrixXd xs = (train.x.colwise() - net.input_mean);
  xs.array().colwise() /= net.input_scale.array();
  Eigen::MatrixXd ys = (train.y.colwise() - net.output_mean);
  ys.array().colwise() /= net.output_scale.array();

  auto init_w = [&](Eigen::MatrixXd& w, double scale) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = scale * rng.gaussian();
  };
  init_w(net.w1, 0.4);
  init_w(net.w2, 0.25);
  init_w(net.w3, 0.25);

  Adam<Eigen::MatrixXd> a1, a2, a3;
  Adam<Eigen::VectorXd> ab1, ab2, ab3;
  a1.init(net.w1);
  a2.init(net.w2);
  a3.init(net.w3);
  ab1.init(net.b1);
  ab2.init(net.b2);
  ab3.init(net.b3);

  const int batch = 256;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd xb(9, batch), yb(4, batch);
    for (int i = 0; i < batch; ++i) {
      const auto idx = static_cast<Eigen::Index>(rng.integer() % n);
      xb.col(i) = xs.col(idx);
      yb.col(i) = ys.col(idx);
    }
    const Eigen::MatrixXd z1 = (net.w1 * xb).colwise() + net.b1;
    const Eigen::MatrixXd h1 = z1.array().tanh();
    const Eigen::MatrixXd z2 = (net.w2 * h1).colwise() + net.b2;
    const Eigen::MatrixXd h2 = z2.array().tanh();
    const Eigen::MatrixXd out = (net.w3 * h2).colwise() + net.b3;

    const Eigen::MatrixXd d_out = 2.0 * (out - yb) / batch;
    const Eigen::MatrixXd d_h2 =
        (net.w3.transpose() * d_out).cwiseProduct(
            (1.0 - h2.array().square()).matrix());
    const Eigen::MatrixXd d_h1 =
        (net.w2.transpose() * d_h2).cwiseProduct(
            (1.0 - h1.array().square()).matrix());

    a3.step(net.w3, d_out * h2.transpose());
    a2.step(net.w2, d_h2 * h1.transpose());
    a1.step(net.w1, d_h1 * xb.transpose());
    Eigen::VectorXd g;
    g = d_out.rowwise().sum();
    ab3.step(net.b3, g);
    g = d_h2.rowwise().sum();
    ab2.step(net.b2, g);
    g = d_h1.rowwise().sum();
    ab1.step(net.b1, g);

    if ((it + 1) % 5000 == 0) {
      const Eigen::MatrixXd full_h1 =
          ((net.w1 * xs).colwise() + net.b1).array().tanh();
      const Eigen::MatrixXd full_h2 =
          ((net.w2 * full_h1).colwise() + net.b2).array().tanh();
      const Eigen::MatrixXd full_out = (net.w3 * full_h2).colwise() + net.b3;
      const double mse = (full_out - ys).squaredNorm() / ys.size();
      std::printf("iter %6d  standardized mse %.5f\n", it + 1, mse);
    }
  }

  // Fit quality on the clean nominal gait per speed (spec check: <= 10% RMS).
  const control::StrideTimeTable times = sim::default_stride_times();
  const sim::TrunkProfile trunk;
  for (double v : {0.4, 0.6, 0.8}) {
    const auto gait = sim::nominal_gait(v);
    const double period = times.period(v);
    double err = 0.0, ref = 0.0;
    for (int i = 0; i < 400; ++i) {
      const double phi = i / 400.0;
      PlantState s;
      trunk.apply(phi, 1.0 / period, s);
      for (int j = 0; j < 4; ++j) {
        s.q[j] = gait[j].eval(phi);
        s.q_dot[j] = gait[j].deriv(phi) / period;
        s.q_ddot[j] = gait[j].deriv2(phi) / period / period;
      }
      const Vec4 target = dynamics::gamma_torques(model, s).values;
      const Vec4 pred = net.eval(s.q, s.q_dot, s.gamma);
      err += (pred - target).squaredNorm();
      ref += target.squaredNorm();
    }
    std::printf("speed %.1f: relative RMS %.4f\n", v, std::sqrt(err / ref));
  }

  net.save(out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}
