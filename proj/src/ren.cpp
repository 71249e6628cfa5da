#include "rpb/ren.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace rpb {

void RenDims::validate() const {
  if (state <= 0 || nonlinear <= 0 || input <= 0 || output <= 0) {
    throw DimensionMismatch("REN dimensions must be positive");
  }
}

namespace {

struct Blocks {
  Mat X, Y, B2, C2, D12, D21, D22;
};

Index x_size(const RenDims& d) { return 2 * d.state + d.nonlinear; }

Blocks unpack(const RenDims& d, const Vec& theta) {
  require_dim(theta.size(), ren_param_count(d), "REN parameter vector");
  Blocks b;
  Index off = 0;
  auto take = [&](Index rows, Index cols) {
    Mat m = Eigen::Map<const Mat>(theta.data() + off, rows, cols);
    off += rows * cols;
    return m;
  };
  const Index nx = x_size(d);
  b.X = take(nx, nx);
  b.Y = take(d.state, d.state);
  b.B2 = take(d.state, d.input);
  b.C2 = take(d.output, d.state);
  b.D12 = take(d.nonlinear, d.input);
  b.D21 = take(d.output, d.nonlinear);
  b.D22 = take(d.output, d.input);
  return b;
}

Vec pack(const RenDims& d, const Blocks& b) {
  Vec theta(ren_param_count(d));
  Index off = 0;
  auto put = [&](const Mat& m) {
    Eigen::Map<Mat>(theta.data() + off, m.rows(), m.cols()) = m;
    off += m.size();
  };
  put(b.X);
  put(b.Y);
  put(b.B2);
  put(b.C2);
  put(b.D12);
  put(b.D21);
  put(b.D22);
  return theta;
}

Mat strictly_lower(const Mat& m) {
  Mat out = m.triangularView<Eigen::StrictlyLower>();
  return out;
}

// Implicit-form quantities shared by realize() and realize_vjp().
struct Implicit {
  Mat H, E, F, B1, C1, D11;
  Vec lambda;
};

Implicit implicit_form(const RenDims& d, const Blocks& b, double epsilon) {
  const Index n = d.state, q = d.nonlinear;
  Implicit im;
  im.H = b.X.transpose() * b.X;
  im.H.diagonal().array() += epsilon;
  const Mat H11 = im.H.topLeftCorner(n, n);
  const Mat H33 = im.H.block(n + q, n + q, n, n);
  im.E = 0.5 * (H11 + H33 + b.Y - b.Y.transpose());
  im.F = im.H.block(n + q, 0, n, n);
  im.B1 = im.H.block(n + q, n, n, q);
  im.C1 = -im.H.block(n, 0, q, n);
  const Mat H22 = im.H.block(n, n, q, q);
  im.D11 = -strictly_lower(H22);
  im.lambda = 0.5 * H22.diagonal();
  return im;
}

}  // namespace

Index ren_param_count(const RenDims& d) {
  d.validate();
  const Index nx = x_size(d);
  return nx * nx + d.state * d.state + d.state * d.input + d.output * d.state +
         d.nonlinear * d.input + d.output * d.nonlinear + d.output * d.input;
}

RenFreeParams RenFreeParams::zeros(const RenDims& dims) {
  return RenFreeParams{dims, Vec::Zero(ren_param_count(dims))};
}

RenFreeParams RenFreeParams::gaussian(const RenDims& dims, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  RenFreeParams p = zeros(dims);
  for (Index i = 0; i < p.theta.size(); ++i) p.theta(i) = n(rng);
  return p;
}

RenRealization RenRealization::zeros(const RenDims& d) {
  d.validate();
  RenRealization r;
  r.dims = d;
  r.A = Mat::Zero(d.state, d.state);
  r.B1 = Mat::Zero(d.state, d.nonlinear);
  r.B2 = Mat::Zero(d.state, d.input);
  r.C1 = Mat::Zero(d.nonlinear, d.state);
  r.D11 = Mat::Zero(d.nonlinear, d.nonlinear);
  r.D12 = Mat::Zero(d.nonlinear, d.input);
  r.C2 = Mat::Zero(d.output, d.state);
  r.D21 = Mat::Zero(d.output, d.nonlinear);
  r.D22 = Mat::Zero(d.output, d.input);
  r.bx = Vec::Zero(d.state);
  r.bv = Vec::Zero(d.nonlinear);
  r.by = Vec::Zero(d.output);
  r.metric = Mat::Identity(d.state, d.state);
  r.multiplier = Vec::Ones(d.nonlinear);
  r.rate = 0.0;
  return r;
}

RenRealization realize(const RenFreeParams& params, double output_scale, double epsilon) {
  const RenDims& d = params.dims;
  const Blocks b = unpack(d, params.theta);
  const Implicit im = implicit_form(d, b, epsilon);
  const Index n = d.state, q = d.nonlinear;

  RenRealization r = RenRealization::zeros(d);
  r.output_scale = output_scale;

  const Eigen::PartialPivLU<Mat> lu(im.E);
  r.A = lu.solve(im.F);
  r.B1 = lu.solve(im.B1);
  r.B2 = lu.solve(b.B2);
  const Vec inv_lambda = im.lambda.cwiseInverse();
  r.C1 = inv_lambda.asDiagonal() * im.C1;
  r.D11 = inv_lambda.asDiagonal() * im.D11;
  r.D12 = inv_lambda.asDiagonal() * b.D12;
  r.C2 = b.C2;
  r.D21 = b.D21;
  r.D22 = b.D22;
  r.multiplier = im.lambda;

  // Metric E^T P^{-1} E with P = H33.
  const Mat P = im.H.block(n + q, n + q, n, n);
  const Eigen::LLT<Mat> llt(P);
  Mat metric = im.E.transpose() * llt.solve(im.E);
  r.metric = 0.5 * (metric + metric.transpose());

  // rate^2 = max generalized eigenvalue of (H11 - eps I, metric).
  Mat K = im.H.topLeftCorner(n, n);
  K.diagonal().array() -= epsilon;
  K = 0.5 * (K + K.transpose());
  const Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(K, r.metric);
  const double rho2 = ges.eigenvalues().maxCoeff();
  r.rate = std::sqrt(std::max(rho2, 0.0));
  return r;
}

RenGrad RenGrad::zeros(const RenDims& d) {
  RenGrad g;
  g.A = Mat::Zero(d.state, d.state);
  g.B1 = Mat::Zero(d.state, d.nonlinear);
  g.B2 = Mat::Zero(d.state, d.input);
  g.C1 = Mat::Zero(d.nonlinear, d.state);
  g.D11 = Mat::Zero(d.nonlinear, d.nonlinear);
  g.D12 = Mat::Zero(d.nonlinear, d.input);
  g.C2 = Mat::Zero(d.output, d.state);
  g.D21 = Mat::Zero(d.output, d.nonlinear);
  g.D22 = Mat::Zero(d.output, d.input);
  return g;
}

RenGrad& RenGrad::operator+=(const RenGrad& o) {
  A += o.A;
  B1 += o.B1;
  B2 += o.B2;
  C1 += o.C1;
  D11 += o.D11;
  D12 += o.D12;
  C2 += o.C2;
  D21 += o.D21;
  D22 += o.D22;
  return *this;
}

Vec realize_vjp(const RenFreeParams& params, const RenGrad& g, double epsilon) {
  const RenDims& d = params.dims;
  const Index n = d.state, q = d.nonlinear;
  const Blocks b = unpack(d, params.theta);
  const Implicit im = implicit_form(d, b, epsilon);

  const Eigen::PartialPivLU<Mat> lu(im.E);
  const Mat A = lu.solve(im.F);
  const Mat B1 = lu.solve(im.B1);
  const Mat B2 = lu.solve(b.B2);
  const Mat luT_inv = lu.inverse().transpose();  // E^{-T}, small

  // Z = E^{-1} G  =>  gG = E^{-T} gZ,  gE = -gG Z^T.
  const Mat gF = luT_inv * g.A;
  const Mat gB1i = luT_inv * g.B1;
  const Mat gB2f = luT_inv * g.B2;
  const Mat gE = -(gF * A.transpose() + gB1i * B1.transpose() + gB2f * B2.transpose());

  // R = diag(1/lambda) S  =>  gS = diag(1/lambda) gR,  glambda_i = -sum_j gR_ij R_ij / lambda_i.
  const Vec inv_lambda = im.lambda.cwiseInverse();
  const Mat C1 = inv_lambda.asDiagonal() * im.C1;
  const Mat D11 = inv_lambda.asDiagonal() * im.D11;
  const Mat D12 = inv_lambda.asDiagonal() * b.D12;
  const Mat gC1i = inv_lambda.asDiagonal() * g.C1;
  const Mat gD11i = inv_lambda.asDiagonal() * g.D11;
  const Mat gD12f = inv_lambda.asDiagonal() * g.D12;
  Vec g_lambda = -(g.C1.cwiseProduct(C1).rowwise().sum() + g.D11.cwiseProduct(D11).rowwise().sum() +
                   g.D12.cwiseProduct(D12).rowwise().sum());
  g_lambda = g_lambda.cwiseProduct(inv_lambda);

  Mat gH = Mat::Zero(im.H.rows(), im.H.cols());
  gH.topLeftCorner(n, n) += 0.5 * gE;
  gH.block(n + q, n + q, n, n) += 0.5 * gE;
  gH.block(n + q, 0, n, n) += gF;
  gH.block(n + q, n, n, q) += gB1i;
  gH.block(n, 0, q, n) -= gC1i;
  gH.block(n, n, q, q) -= strictly_lower(gD11i);
  gH.block(n, n, q, q).diagonal() += 0.5 * g_lambda;

  Blocks gb;
  gb.X = b.X * (gH + gH.transpose());
  gb.Y = 0.5 * (gE - gE.transpose());
  gb.B2 = gB2f;
  gb.C2 = g.C2;
  gb.D12 = gD12f;
  gb.D21 = g.D21;
  gb.D22 = g.D22;
  return pack(d, gb);
}

RenStepOut ren_step(const RenRealization& r, const Vec& xi, const Vec& u, RenStepCache* cache) {
  require_dim(xi.size(), r.dims.state, "REN state");
  require_dim(u.size(), r.dims.input, "REN input");
  const Index q = r.dims.nonlinear;
  const Vec base = r.C1 * xi + r.D12 * u + r.bv;
  Vec w(q);
  for (Index i = 0; i < q; ++i) {
    const double v = base(i) + (i > 0 ? r.D11.row(i).head(i).dot(w.head(i)) : 0.0);
    w(i) = std::tanh(v);
  }
  RenStepOut out;
  out.next_state = r.A * xi + r.B1 * w + r.B2 * u + r.bx;
  out.output = r.output_scale * (r.C2 * xi + r.D21 * w + r.D22 * u + r.by);
  if (cache) {
    cache->xi = xi;
    cache->u = u;
    cache->w = std::move(w);
  }
  return out;
}

RenStepAdjoint ren_step_vjp(const RenRealization& r, const RenStepCache& c, const Vec& g_output,
                            const Vec& g_next_state, RenGrad& grad) {
  const Index q = r.dims.nonlinear;
  const Vec gy = r.output_scale * g_output;
  grad.C2.noalias() += gy * c.xi.transpose();
  grad.D21.noalias() += gy * c.w.transpose();
  grad.D22.noalias() += gy * c.u.transpose();
  grad.A.noalias() += g_next_state * c.xi.transpose();
  grad.B1.noalias() += g_next_state * c.w.transpose();
  grad.B2.noalias() += g_next_state * c.u.transpose();

  Vec gw = r.D21.transpose() * gy + r.B1.transpose() * g_next_state;
  RenStepAdjoint adj;
  adj.xi = r.C2.transpose() * gy + r.A.transpose() * g_next_state;
  adj.u = r.D22.transpose() * gy + r.B2.transpose() * g_next_state;

  Vec gv(q);
  for (Index i = q - 1; i >= 0; --i) {
    gv(i) = gw(i) * (1.0 - c.w(i) * c.w(i));
    if (i > 0) {
      gw.head(i) += gv(i) * r.D11.row(i).head(i).transpose();
      grad.D11.row(i).head(i) += gv(i) * c.w.head(i).transpose();
    }
  }
  grad.C1.noalias() += gv * c.xi.transpose();
  grad.D12.noalias() += gv * c.u.transpose();
  adj.xi.noalias() += r.C1.transpose() * gv;
  adj.u.noalias() += r.D12.transpose() * gv;
  return adj;
}

Signal ren_rollout(const RenRealization& r, const Signal& input, const Vec* xi0) {
  require_dim(input.dim(), r.dims.input, "REN input signal");
  Vec xi = xi0 ? *xi0 : Vec::Zero(r.dims.state);
  Signal y(r.dims.output, input.horizon());
  for (Index t = 0; t <= input.horizon(); ++t) {
    RenStepOut o = ren_step(r, xi, input.at(t));
    y.at(t) = o.output;
    xi = std::move(o.next_state);
  }
  return y;
}

bool verify_contraction(const RenRealization& r, int trials, Index horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const Index ns = r.dims.state;
  auto metric_norm = [&](const Vec& v) { return std::sqrt(std::max(v.dot(r.metric * v), 0.0)); };
  const double bound = r.rate + 1e-6;
  for (int k = 0; k < trials; ++k) {
    Signal u = gaussian_signal(r.dims.input, horizon, 1.0, rng);
    Vec xa(ns), xb(ns);
    for (Index i = 0; i < ns; ++i) {
      xa(i) = 3.0 * n(rng);
      xb(i) = 3.0 * n(rng);
    }
    double prev = metric_norm(xa - xb);
    for (Index t = 0; t <= horizon; ++t) {
      xa = ren_step(r, xa, u.at(t)).next_state;
      xb = ren_step(r, xb, u.at(t)).next_state;
      const double cur = metric_norm(xa - xb);
      const double scale = metric_norm(xa) + metric_norm(xb) + 1.0;
      if (!std::isfinite(cur) || cur > bound * prev + 1e-12 * scale) return false;
      prev = cur;
    }
  }
  return true;
}

double empirical_incremental_gain(const RenRealization& r, int trials, Index horizon, double p,
                                  std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::mt19937_64 rng(seed);
  double best = 0.0;
  for (int k = 0; k < trials; ++k) {
    const Signal a = gaussian_signal(r.dims.input, horizon, 1.0, rng);
    const Signal b = gaussian_signal(r.dims.input, horizon, 1.0, rng);
    const double din = lp_norm(a - b, p);
    if (din == 0.0) continue;
    const double dout = lp_norm(ren_rollout(r, a) - ren_rollout(r, b), p);
    best = std::max(best, dout / din);
  }
  return best;
}

double incremental_gain_bound(const RenRealization& r) {
  if (!(r.rate < 1.0)) return std::numeric_limits<double>::infinity();
  const Index q = r.dims.nonlinear;
  // N = (I - |D11|)^{-1}; |D11| is strictly lower triangular so N is unit lower triangular.
  const Mat abs_d11 = r.D11.cwiseAbs();
  const Mat I = Mat::Identity(q, q);
  const Mat N = (I - abs_d11).triangularView<Eigen::UnitLower>().solve(I);
  auto op_norm = [](const Mat& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
  };
  const double lw_xi = op_norm(N * r.C1.cwiseAbs());
  const double lw_u = op_norm(N * r.D12.cwiseAbs());

  const Eigen::SelfAdjointEigenSolver<Mat> es(r.metric);
  const double lam_min = es.eigenvalues().minCoeff();
  if (!(lam_min > 0.0)) return std::numeric_limits<double>::infinity();
  const Mat sqrt_metric = es.operatorSqrt();

  const double a = op_norm(sqrt_metric * r.B2) + op_norm(sqrt_metric * r.B1) * lw_u;
  const double b = (op_norm(r.C2) + op_norm(r.D21) * lw_xi) / std::sqrt(lam_min);
  const double c = op_norm(r.D22) + op_norm(r.D21) * lw_u;
  return std::abs(r.output_scale) * (b * a / (1.0 - r.rate) + c);
}

double contraction_residual(const RenRealization& r) {
  const Index n = r.dims.state, q = r.dims.nonlinear;
  Mat AB(n, n + q);
  AB << r.A, r.B1;
  Mat M = AB.transpose() * r.metric * AB;
  M.topLeftCorner(n, n) -= r.rate * r.rate * r.metric;
  const Mat LC1 = r.multiplier.asDiagonal() * r.C1;
  const Mat LD11 = r.multiplier.asDiagonal() * r.D11;
  // 2 * S with S = [[0, C1^T L / 2], [L C1 / 2, (L D11 + D11^T L) / 2 - L]].
  M.block(n, 0, q, n) += LC1;
  M.block(0, n, n, q) += LC1.transpose();
  M.block(n, n, q, q) += LD11 + LD11.transpose();
  M.block(n, n, q, q).diagonal() -= 2.0 * r.multiplier;
  M = 0.5 * (M + M.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

RenOperator::RenOperator(RenRealization r) : r_(std::move(r)), xi_(Vec::Zero(r_.dims.state)) {}

void RenOperator::reset() { xi_.setZero(); }

Vec RenOperator::step(const Vec& input) {
  RenStepOut o = ren_step(r_, xi_, input);
  xi_ = std::move(o.next_state);
  return o.output;
}

}  // namespace rpb
