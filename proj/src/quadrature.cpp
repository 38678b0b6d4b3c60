#include "exitflow/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace exitflow {

namespace {

// Kronrod 15-point nodes on [-1,1] with embedded Gauss 7 rule.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double resg = 0.0, resk = 0.0;
  const double fc = f(c);
  resk = kWgk[7] * fc;
  resg = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double fsum = f(c - x) + f(c + x);
    resk += kWgk[j] * fsum;
    if (j % 2 == 1) resg += kWg[j / 2] * fsum;
  }
  Segment s;
  s.a = a;
  s.b = b;
  s.value = resk * h;
  s.error = std::abs((resk - resg) * h);
  return s;
}

}  // namespace

QuadResult adaptive_quadrature(const std::function<double(double)>& f, double a,
                               double b, double abs_tol, double rel_tol,
                               int max_subdivisions) {
  QuadResult out;
  if (!(b > a)) {
    out.converged = true;
    return out;
  }
  std::priority_queue<Segment> heap;
  heap.push(gk15(f, a, b));
  double total = heap.top().value;
  double err = heap.top().error;
  int splits = 0;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) &&
         splits < max_subdivisions) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = gk15(f, worst.a, mid);
    Segment right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }
  out.value = total;
  out.error = err;
  out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
  return out;
}

GaussRule gauss_laguerre(int n, double alpha) {
  // Jacobi matrix of the Laguerre recurrence: diag 2k+alpha+1,
  // off-diagonal sqrt(k(k+alpha)). Eigenvalues are the nodes; weights are
  // Gamma(alpha+1) times the squared first eigenvector components.
  Eigen::VectorXd diag(n), subdiag(n - 1);
  for (int k = 0; k < n; ++k) diag[k] = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) subdiag[k - 1] = std::sqrt(k * (k + alpha));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, subdiag);
  GaussRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(n);
  const double mu0 = std::tgamma(alpha + 1.0);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace exitflow
