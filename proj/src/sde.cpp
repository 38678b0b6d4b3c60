#include "exitflow/sde.hpp"

#include "exitflow/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace exitflow {

double default_dt(const SystemSpec& spec, double epsilon) {
  return std::min({1e-3, 0.02 / spec.lambdas[0],
                   0.1 * std::pow(epsilon, 2.0 / 3.0)});
}

double default_max_time(const SystemSpec& spec, double epsilon) {
  return 8.0 / spec.lambdas[spec.dim - 1] * std::log(1.0 / epsilon);
}

namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

struct StepResult {
  bool crossed = false;
  double theta = 0.0;
  int axis = -1;
  int sign = 0;
};

// Locate the crossing of the box boundary along the segment x -> xn.
StepResult box_crossing(const VectorXd& x, const VectorXd& xn, double L) {
  StepResult r;
  r.theta = 2.0;
  for (int j = 0; j < x.size(); ++j) {
    for (int s : {-1, 1}) {
      const double face = s * L;
      const double dx = xn[j] - x[j];
      if (s * xn[j] < L || dx * s <= 0.0) continue;
      const double th = (face - x[j]) / dx;
      if (th >= 0.0 && th < r.theta) {
        r.theta = th;
        r.axis = j;
        r.sign = s;
        r.crossed = true;
      }
    }
  }
  return r;
}

class Engine {
 public:
  Engine(const SystemSpec& spec, const DomainSpec& domain, const SimConfig& cfg)
      : spec_(spec), domain_(domain), cfg_(cfg) {
    dt_ = cfg.dt > 0.0 ? cfg.dt : default_dt(spec, cfg.epsilon);
    if (dt_ > 0.1 / spec.lambdas[0] + 1e-15)
      throw std::invalid_argument("dt exceeds the stability guard 0.1/lambda_1");
    max_time_ = cfg.max_time > 0.0 ? cfg.max_time : default_max_time(spec, cfg.epsilon);
    const double floor_time = 0.5 * default_max_time(spec, cfg.epsilon);
    if (max_time_ < floor_time - 1e-12)
      throw std::invalid_argument(
          "max_time is below (4/lambda_d) log(1/epsilon); exits happen on the "
          "(1/lambda) log scale");
    max_steps_ = static_cast<std::int64_t>(std::ceil(max_time_ / dt_));
    noise_scale_ = cfg.epsilon * std::sqrt(dt_) * spec.sigma0;
    x0_ = cfg.epsilon * spec.xi0;
    if (domain.level(x0_) >= 0.0)
      throw std::invalid_argument("initial point eps*xi0 lies outside the domain");
  }

  double dt() const { return dt_; }

  // Runs one trajectory; returns false when it never exits.
  bool run(std::int64_t tid, ExitSample& out) const {
    NormalStream ns(CounterRng(cfg_.seed, static_cast<std::uint64_t>(tid)));
    const int d = spec_.dim;
    const int n = spec_.noise_dim;
    VectorXd x = x0_, xn(d), bvec(d), eta(n);
    double level = domain_.level(x);
    out.path.clear();
    if (cfg_.record_paths) out.path.emplace_back(0.0, x);
    for (std::int64_t step = 0; step < max_steps_; ++step) {
      spec_.drift_into(x, bvec);
      for (int l = 0; l < n; ++l) eta[l] = ns.next();
      xn = x + dt_ * bvec;
      xn.noalias() += noise_scale_ * eta;
      const double level_n = domain_.level(xn);
      if (level_n >= 0.0) {
        fill_exit(tid, step, x, xn, level, level_n, out);
        if (cfg_.record_paths)
          out.path.emplace_back(out.time, VectorXd(out.location));
        return true;
      }
      x.swap(xn);
      level = level_n;
      if (cfg_.record_paths) out.path.emplace_back((step + 1) * dt_, x);
    }
    return false;
  }

 private:
  void fill_exit(std::int64_t tid, std::int64_t step, const VectorXd& x,
                 const VectorXd& xn, double level_in, double level_out,
                 ExitSample& out) const {
    double theta;
    if (domain_.kind == DomainSpec::Kind::Box) {
      const StepResult r = box_crossing(x, xn, domain_.half_side);
      theta = r.crossed ? r.theta : 1.0;
      out.location = x + theta * (xn - x);
      if (r.crossed) {
        for (int j = 0; j < out.location.size(); ++j)
          out.location[j] =
              std::clamp(out.location[j], -domain_.half_side, domain_.half_side);
        out.location[r.axis] = r.sign * domain_.half_side;  // exact projection
      }
      out.face_axis = r.axis;
      out.face_sign = r.sign;
    } else {
      theta = -level_in / (level_out - level_in);
      VectorXd p = x + theta * (xn - x);
      for (int it = 0; it < 3; ++it) {  // Newton projection onto {g = 0}
        const VectorXd g = domain_.gradient_fn(p);
        p -= domain_.level(p) / g.squaredNorm() * g;
      }
      out.location = p;
      out.face_axis = -1;
      out.face_sign = 0;
    }
    out.time = (static_cast<double>(step) + theta) * dt_;
    out.trajectory_id = tid;
    out.epsilon = cfg_.epsilon;
  }

  const SystemSpec& spec_;
  const DomainSpec& domain_;
  const SimConfig& cfg_;
  double dt_ = 0.0;
  double max_time_ = 0.0;
  std::int64_t max_steps_ = 0;
  MatrixXd noise_scale_;
  VectorXd x0_;
};

}  // namespace

SimStats simulate_exits(const SystemSpec& spec, const DomainSpec& domain,
                        const SimConfig& config, const ExitSink& sink) {
  const Engine engine(spec, domain, config);
  const std::int64_t total = config.n_trajectories;
  const int threads = resolve_threads(config.threads);
  SimStats stats;
  stats.trials = total;

  constexpr std::int64_t kChunk = 1024;
  const std::int64_t n_chunks = (total + kChunk - 1) / kChunk;

  struct Chunk {
    std::vector<ExitSample> exits;
    std::int64_t non_exited = 0;
  };

  std::atomic<std::int64_t> next_chunk{0};
  std::map<std::int64_t, Chunk> done;
  std::mutex mu;
  std::condition_variable cv;

  const auto worker = [&]() {
    for (;;) {
      const std::int64_t c = next_chunk.fetch_add(1);
      if (c >= n_chunks) return;
      const std::int64_t lo = c * kChunk;
      const std::int64_t hi = std::min(total, lo + kChunk);
      Chunk chunk;
      chunk.exits.reserve(hi - lo);
      ExitSample sample;
      for (std::int64_t tid = lo; tid < hi; ++tid) {
        if (engine.run(tid, sample))
          chunk.exits.push_back(sample);
        else
          ++chunk.non_exited;
      }
      std::lock_guard<std::mutex> lock(mu);
      done.emplace(c, std::move(chunk));
      cv.notify_one();
    }
  };

  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);

  // Drain chunks in order so the sink sees trajectory_id order regardless
  // of scheduling.
  std::int64_t emit = 0;
  while (emit < n_chunks) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done.count(emit) > 0; });
    Chunk chunk = std::move(done.begin()->second);
    done.erase(done.begin());
    lock.unlock();
    for (const ExitSample& s : chunk.exits) {
      ++stats.exited;
      if (sink) sink(s);
    }
    stats.non_exited += chunk.non_exited;
    ++emit;
  }
  for (auto& t : pool) t.join();
  return stats;
}

std::vector<ExitSample> simulate_exits_collect(const SystemSpec& spec,
                                               const DomainSpec& domain,
                                               const SimConfig& config,
                                               SimStats* stats) {
  std::vector<ExitSample> out;
  out.reserve(config.n_trajectories);
  const SimStats st = simulate_exits(spec, domain, config,
                                     [&](const ExitSample& s) { out.push_back(s); });
  if (stats) *stats = st;
  return out;
}

MatrixXd simulate_gaussian_limit(const SystemSpec& spec, double T,
                                 std::int64_t n_samples, std::uint64_t seed,
                                 int n_steps, int threads) {
  const int d = spec.dim;
  const int n = spec.noise_dim;
  const double h = T / n_steps;

  // Per-step integrals int_t^{t+h} e^{-lambda_j s} dW^l_s are jointly
  // Gaussian across j with covariance D_t Vhat D_t, independent across l
  // and across steps; increments are exact for any step size.
  MatrixXd vhat(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      const double lam = spec.lambdas[j] + spec.lambdas[k];
      vhat(j, k) = (1.0 - std::exp(-lam * h)) / lam;
    }
  const MatrixXd lhat = Eigen::LLT<MatrixXd>(vhat).matrixL();
  MatrixXd decay(d, n_steps);  // column m: e^{-lambda_j t_m}
  for (int m = 0; m < n_steps; ++m)
    decay.col(m) = (-spec.lambdas.array() * (m * h)).exp();

  MatrixXd samples(d, n_samples);
  const int nthreads = resolve_threads(threads);
  std::atomic<std::int64_t> next{0};
  constexpr std::int64_t kBlock = 4096;

  const auto worker = [&]() {
    VectorXd eta(d), g(d), z(d);
    for (;;) {
      const std::int64_t lo = next.fetch_add(kBlock);
      if (lo >= n_samples) return;
      const std::int64_t hi = std::min(n_samples, lo + kBlock);
      for (std::int64_t s = lo; s < hi; ++s) {
        NormalStream ns(CounterRng(seed, static_cast<std::uint64_t>(s)));
        z.setZero();
        for (int m = 0; m < n_steps; ++m) {
          for (int l = 0; l < n; ++l) {
            for (int j = 0; j < d; ++j) eta[j] = ns.next();
            g.noalias() = lhat * eta;
            g.array() *= decay.col(m).array();
            z.noalias() += spec.sigma0.col(l).cwiseProduct(g);
          }
        }
        samples.col(s) = z;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return samples;
}

FlowTrackingSummary flow_tracking_diagnostic(const SystemSpec& spec,
                                             const DomainSpec& domain, double L,
                                             const SimConfig& config) {
  FlowTrackingSummary out;
  out.epsilon = config.epsilon;
  const int d = spec.dim;
  const int n = spec.noise_dim;
  const double dt = config.dt > 0.0 ? config.dt : default_dt(spec, config.epsilon);
  const double max_time =
      config.max_time > 0.0 ? config.max_time : default_max_time(spec, config.epsilon);
  const auto max_steps = static_cast<std::int64_t>(std::ceil(max_time / dt));
  const MatrixXd noise_scale = config.epsilon * std::sqrt(dt) * spec.sigma0;

  std::vector<double> deviations;
  deviations.reserve(config.n_trajectories);

  VectorXd x(d), xn(d), bvec(d), eta(n), ref(d), k1(d), k2(d), k3(d), k4(d);
  for (std::int64_t tid = 0; tid < config.n_trajectories; ++tid) {
    NormalStream ns(CounterRng(config.seed, static_cast<std::uint64_t>(tid)));
    x = config.epsilon * spec.xi0;
    bool in_chart = true;
    bool tracked = false;
    double dev = 0.0;
    for (std::int64_t step = 0; step < max_steps; ++step) {
      spec.drift_into(x, bvec);
      for (int l = 0; l < n; ++l) eta[l] = ns.next();
      xn = x + dt * bvec;
      xn.noalias() += noise_scale * eta;
      if (in_chart && spec.to_linear(xn).cwiseAbs().maxCoeff() >= L) {
        in_chart = false;
        tracked = true;
        ref = xn;  // deterministic flow starts at the chart exit point
        dev = 0.0;
      } else if (!in_chart) {
        // One classical RK4 step of the reference flow per SDE step.
        spec.drift_into(ref, k1);
        spec.drift_into((ref + 0.5 * dt * k1).eval(), k2);
        spec.drift_into((ref + 0.5 * dt * k2).eval(), k3);
        spec.drift_into((ref + dt * k3).eval(), k4);
        ref += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        dev = std::max(dev, (xn - ref).cwiseAbs().maxCoeff());
      }
      if (domain.level(xn) >= 0.0) break;
      x.swap(xn);
      if (step + 1 == max_steps) tracked = false;
    }
    if (tracked)
      deviations.push_back(dev);
    else
      ++out.failed;
  }
  out.count = static_cast<std::int64_t>(deviations.size());
  if (!deviations.empty()) {
    std::sort(deviations.begin(), deviations.end());
    const auto q = [&](double frac) {
      const auto idx = static_cast<std::size_t>(frac * (deviations.size() - 1));
      return deviations[idx];
    };
    out.q50 = q(0.5);
    out.q90 = q(0.9);
    out.q99 = q(0.99);
    out.max = deviations.back();
  }
  return out;
}

}  // namespace exitflow
