// Acceptance suite: one check per criterion, each printed as a single
// pass/fail line with its runtime. Every tolerance is pinned here, in code.
// Monte Carlo gates run with fixed seeds; rerunning the binary reproduces
// every number bit for bit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rde/donsker.hpp"
#include "rde/ensemble.hpp"
#include "rde/experiments.hpp"
#include "rde/metrics.hpp"
#include "rde/recursion.hpp"
#include "test_support.hpp"

using namespace rde;

namespace {

unsigned g_threads = 0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using CriterionFn = std::function<Outcome()>;

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  CriterionFn run;
};

std::vector<double> eighth_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 8; ++k) g.push_back(k / 8.0);
  return g;
}

DistanceOptions chunked_options() {
  DistanceOptions opt;
  opt.chunk_size = 256;
  opt.threads = g_threads;
  return opt;
}

// -------------------------------------------------------------------------
// 1. covariance_exact vs exhaustive Rademacher enumeration, n <= 8.
// -------------------------------------------------------------------------

Outcome covariance_exactness() {
  Rng rng(Seed{11});
  double max_gap = 0.0;
  for (std::int64_t n = 1; n <= 8; ++n) {
    const std::size_t patterns = std::size_t{1} << n;
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 25; ++i) {
      const double s = rng.uniform01(), t = rng.uniform01();
      pts.emplace_back(std::min(s, t), std::max(s, t));
    }
    for (std::int64_t k = 0; k <= n; ++k)
      pts.emplace_back(static_cast<double>(k) / n, static_cast<double>(k) / n);
    for (const auto& [s, t] : pts) {
      double acc = 0.0;
      for (std::size_t bits = 0; bits < patterns; ++bits) {
        std::vector<double> inc(static_cast<std::size_t>(n));
        for (std::int64_t k = 0; k < n; ++k)
          inc[static_cast<std::size_t>(k)] = (bits >> k) & 1 ? 1.0 : -1.0;
        const Path path =
            random_walk_path(static_cast<std::size_t>(n), inc, PathKind::kPiecewiseLinear);
        acc += path.eval(s) * path.eval(t);
      }
      acc /= static_cast<double>(patterns);
      max_gap = std::max(max_gap, std::fabs(covariance_exact(n, s, t) - acc));
    }
  }
  Outcome out;
  out.pass = max_gap <= 1e-12;
  out.detail = "max |formula - enumeration| = " + std::to_string(max_gap);
  return out;
}

// -------------------------------------------------------------------------
// 2. Recursion identity: sampled recursion vs direct walk under the fdd
//    2-Wasserstein, below the 95th percentile of a 50-pair same-law null.
// -------------------------------------------------------------------------

Outcome recursion_identity() {
  const std::vector<double> grid = eighth_grid();
  const std::size_t m = 20000;
  const DistanceOptions opt = chunked_options();
  const RecursionSpec spec = donsker_spec(IncrementLaw::rademacher(), PathKind::kPiecewiseLinear);
  Outcome out;
  std::ostringstream detail;
  for (std::int64_t n : {std::int64_t{16}, std::int64_t{64}}) {
    const Seed seed = Seed{22}.child(static_cast<std::uint64_t>(n));
    const Ensemble rec = process_ensemble(spec, n, m, seed.child(0), g_threads);
    const Matrix a = grid_eval(rec, grid);
    const Matrix b = walk_fdd(static_cast<std::size_t>(n), IncrementLaw::rademacher(), grid, m,
                              seed.child(1), g_threads);
    const double stat = point_cloud_distance(a, b, 2.0, opt).value;
    const auto null_sampler = [&](Seed s) {
      return walk_fdd(static_cast<std::size_t>(n), IncrementLaw::rademacher(), grid, m, s,
                      g_threads);
    };
    const double q95 =
        NullBand::from(null_distances(null_sampler, 2.0, 50, seed.child(2), opt)).q95;
    detail << "n=" << n << ": stat=" << stat << " null95=" << q95 << "  ";
    out.pass = out.pass && stat <= q95;
  }
  out.detail = detail.str();
  return out;
}

// -------------------------------------------------------------------------
// 3. Wiener fixed point: one T application to a Brownian-grid ensemble is
//    indistinguishable from fresh Brownian marginals.
// -------------------------------------------------------------------------

Outcome wiener_fixed_point() {
  const std::vector<double> grid = eighth_grid();
  const std::size_t m = 20000;
  const DistanceOptions opt = chunked_options();
  const Seed seed{32};

  std::vector<std::optional<Path>> slots(m);
  parallel_for(m, g_threads, [&](std::size_t i) {
    slots[i] = linearized_bm(8, seed.child(0).child(i));
  });
  std::vector<Path> paths;
  paths.reserve(m);
  for (auto& s : slots) paths.push_back(std::move(*s));
  const Ensemble input = Ensemble::make(std::move(paths), EnsembleMeta{"bm8", seed.value, 0});
  const Ensemble mapped = iterate_T(wiener_map(2.0), input, m, seed.child(1), g_threads);

  const Matrix a = grid_eval(mapped, grid);
  const Matrix b = exact_bm_fdd(grid, m, seed.child(2), g_threads);
  const double stat = point_cloud_distance(a, b, 2.0, opt).value;
  const auto null_sampler = [&](Seed s) { return exact_bm_fdd(grid, m, s, g_threads); };
  const double q95 =
      NullBand::from(null_distances(null_sampler, 2.0, 50, seed.child(3), opt)).q95;
  Outcome out;
  out.pass = stat <= q95;
  out.detail = "stat=" + std::to_string(stat) + " null95=" + std::to_string(q95);
  return out;
}

// -------------------------------------------------------------------------
// 4. Contraction constants are exact.
// -------------------------------------------------------------------------

Outcome contraction_constants() {
  const ContractionReport wiener =
      contraction_constant(wiener_map(2.0), MetricOrder(3.0), 1, Seed{40});
  const double l_gap = std::fabs(wiener.L_hat - std::pow(2.0, -0.5));
  const RecursionSpec spec = donsker_spec(IncrementLaw::rademacher(), PathKind::kPiecewiseLinear);
  double rate_gap = 0.0;
  for (std::int64_t n : {std::int64_t{4}, std::int64_t{16}, std::int64_t{64},
                         std::int64_t{256}, std::int64_t{1024}}) {
    const double f = rate_factor(spec, MetricOrder(3.0), RateFunction::power(0.25), n, 1);
    rate_gap = std::max(rate_gap, std::fabs(f - std::pow(2.0, -0.25)));
  }
  Outcome out;
  out.pass = wiener.L_exact.has_value() && l_gap <= 1e-12 && rate_gap <= 1e-12;
  out.detail = "contraction gap = " + std::to_string(l_gap) +
               ", rate-factor gap (even n) = " + std::to_string(rate_gap);
  return out;
}

// -------------------------------------------------------------------------
// 5. Donsker marginal convergence: KS at t = 1 for n = 1024, and fdd
//    distance to Brownian marginals shrinking from n = 8 to n = 512.
// -------------------------------------------------------------------------

Outcome marginal_convergence() {
  const std::size_t m = 20000;
  const Seed seed{64};
  const Matrix t1 =
      walk_fdd(1024, IncrementLaw::rademacher(), {1.0}, m, seed.child(0), g_threads);
  const double ks = ks_statistic(t1.data, [](double x) { return normal_cdf(x); });
  const double ks_limit = 1.36 / std::sqrt(static_cast<double>(m)) * 1.5;

  const std::vector<double> grid = eighth_grid();
  const DistanceOptions opt = chunked_options();
  const auto distance_at = [&](std::size_t n) {
    const Matrix a =
        walk_fdd(n, IncrementLaw::rademacher(), grid, m, seed.child(1), g_threads);
    const Matrix b = exact_bm_fdd(grid, m, seed.child(2), g_threads);
    return point_cloud_distance(a, b, 2.0, opt).value;
  };
  const double d8 = distance_at(8);
  const double d512 = distance_at(512);

  Outcome out;
  out.pass = ks <= ks_limit && d512 < d8;
  std::ostringstream detail;
  detail << "KS=" << ks << " (limit " << ks_limit << "), fdd@8=" << d8 << ", fdd@512=" << d512;
  out.detail = detail.str();
  return out;
}

// -------------------------------------------------------------------------
// 6. Sup-moment convergence at n = 4096, m = 50000.
// -------------------------------------------------------------------------

Outcome sup_moment_convergence() {
  const std::size_t n = 4096, m = 50000;
  const Seed seed{60};
  std::vector<double> one_sided(m), two_sided(m);
  const IncrementLaw law = IncrementLaw::rademacher();
  parallel_for(m, g_threads, [&](std::size_t i) {
    Rng rng(seed.child(i));
    std::vector<double> inc(n);
    for (double& x : inc) x = law.sample(rng);
    const Path path = random_walk_path(n, inc, PathKind::kPiecewiseLinear);
    one_sided[i] = one_sided_max(path);
    two_sided[i] = sup_norm(path);
  });
  const double m1_one = mean(one_sided);
  const double m1_two = mean(two_sided);
  const double ref_one = std::sqrt(2.0 / 3.14159265358979323846);   // E max W
  const double ref_two = std::sqrt(3.14159265358979323846 / 2.0);   // E sup |W|
  const double rel_one = std::fabs(m1_one - ref_one) / ref_one;
  const double rel_two = std::fabs(m1_two - ref_two) / ref_two;
  Outcome out;
  out.pass = rel_one <= 0.02 && rel_two <= 0.03;
  std::ostringstream detail;
  detail << "E max = " << m1_one << " (ref " << ref_one << ", rel " << rel_one
         << "), E sup|.| = " << m1_two << " (ref " << ref_two << ", rel " << rel_two << ")";
  out.detail = detail.str();
  return out;
}

// -------------------------------------------------------------------------
// 7. Moment matching: S^n vs W^n passes at n = 64; S^4 vs exact Brownian
//    marginals fails the covariance condition detectably.
// -------------------------------------------------------------------------

Outcome moment_matching() {
  const std::size_t m = 20000;
  const std::vector<double> grid = eighth_grid();
  const Seed seed{70};
  const Ensemble sn = walk_ensemble(64, IncrementLaw::rademacher(), PathKind::kPiecewiseLinear, m,
                                    seed.child(0), g_threads);
  const Ensemble wn = walk_ensemble(64, IncrementLaw::standard_normal(),
                                    PathKind::kPiecewiseLinear, m, seed.child(1), g_threads);
  const MomentMatchReport matched = moment_match(sn, wn, MetricOrder(3.0), grid);

  const Ensemble s4 = walk_ensemble(4, IncrementLaw::rademacher(), PathKind::kPiecewiseLinear, m,
                                    seed.child(2), g_threads);
  std::vector<std::optional<Path>> slots(m);
  parallel_for(m, g_threads, [&](std::size_t i) {
    slots[i] = linearized_bm(8, seed.child(3).child(i));
  });
  std::vector<Path> bm;
  bm.reserve(m);
  for (auto& s : slots) bm.push_back(std::move(*s));
  const Ensemble exact_bm = Ensemble::make(std::move(bm), EnsembleMeta{"bm8", 0, 0});
  const MomentMatchReport mismatched = moment_match(s4, exact_bm, MetricOrder(3.0), grid);

  Outcome out;
  out.pass = matched.all_required_pass() && mismatched.cov_match.required &&
             !mismatched.cov_match.passed;
  std::ostringstream detail;
  detail << "matched: mean gap " << matched.max_mean_gap << ", cov gap " << matched.max_cov_gap
         << "; mismatch detected: " << (!mismatched.cov_match.passed ? "yes" : "no") << " (gap "
         << mismatched.max_cov_gap << ")";
  out.detail = detail.str();
  return out;
}

// -------------------------------------------------------------------------
// 8. Transport estimators equal permutation brute force for m <= 6.
// -------------------------------------------------------------------------

Outcome transport_oracle() {
  Rng rng(Seed{80});
  double max_gap = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t m = 2 + rng.uniform_index(5);  // 2..6
    const double p = (rep % 3 == 0) ? 1.0 : 2.0;

    std::vector<Path> pa, pb;
    for (std::size_t i = 0; i < m; ++i) {
      pa.push_back(testsupport::random_pl_path(rng, 4));
      pb.push_back(testsupport::random_pl_path(rng, 4));
    }
    const Ensemble a = Ensemble::make(pa, {});
    const Ensemble b = Ensemble::make(pb, {});
    std::vector<double> cost(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        cost[i * m + j] = std::pow(diff_sup_norm(a.samples[i], b.samples[j]), p);
    const double oracle_path =
        std::pow(testsupport::brute_force_min_cost(cost, m) / m, 1.0 / p);
    max_gap = std::max(max_gap, std::fabs(path_lp_distance(a, b, p).value - oracle_path));

    const std::vector<double> grid{0.25, 0.5, 0.9};
    const Matrix xa = grid_eval(a, grid);
    const Matrix xb = grid_eval(b, grid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double sq = 0.0;
        for (std::size_t d = 0; d < grid.size(); ++d) {
          const double diff = xa.row(i)[d] - xb.row(j)[d];
          sq += diff * diff;
        }
        cost[i * m + j] = std::pow(sq, 0.5 * p);
      }
    const double oracle_fdd =
        std::pow(testsupport::brute_force_min_cost(cost, m) / m, 1.0 / p);
    max_gap = std::max(max_gap, std::fabs(fdd_distance(a, b, grid, p).value - oracle_fdd));
  }
  Outcome out;
  out.pass = max_gap <= 1e-12;
  out.detail = "max |assignment - brute force| over 500 instances = " + std::to_string(max_gap);
  return out;
}

// -------------------------------------------------------------------------
// 9. L_p machinery against the quadrature oracle, with the order and
//    smoothed-functional properties.
// -------------------------------------------------------------------------

Outcome lp_machinery() {
  Rng rng(Seed{90});
  Outcome out;
  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Path f = testsupport::random_pl_path(rng);
    const int p = (i % 3 == 0) ? 2 : (i % 3 == 1 ? 4 : 8);
    const double direct = lp_norm(f, p);
    const double integral = testsupport::adaptive_quadrature(
        [&](double t) { return std::pow(f.eval(t), p); }, f.breakpoints(), 1e-14);
    const double oracle = std::pow(std::max(integral, 0.0), 1.0 / p);
    const double rel = std::fabs(direct - oracle) / std::max(oracle, 1e-30);
    worst_rel = std::max(worst_rel, rel);

    double prev = 0.0;
    for (int q : {2, 4, 8, 16}) {
      const double lq = lp_norm(f, q);
      out.pass = out.pass && lq <= sup_norm(f) + 1e-12 && lq >= prev - 1e-12;
      prev = lq;
    }

    const Path y = testsupport::random_pl_path(rng);
    const double psi = psi_smooth(f, y, 4);
    out.pass = out.pass && psi >= 1.0;
    if (diff_sup_norm(f, y) > 1e-9) out.pass = out.pass && psi > 1.0;
    out.pass = out.pass && psi_smooth(f, f, 4) == 1.0;
  }
  out.pass = out.pass && worst_rel <= 1e-8;
  out.detail = "worst quadrature relative gap = " + std::to_string(worst_rel);
  return out;
}

// -------------------------------------------------------------------------
// 10. bm-characterization: monotone approach to the Brownian null band.
// -------------------------------------------------------------------------

Outcome bm_characterization() {
  BmCharConfig cfg;
  cfg.ensemble_size = 20000;
  cfg.iterations = 8;
  cfg.seed = Seed{100};
  cfg.threads = g_threads;
  const BmCharReport report = run_bm_char_experiment(cfg);
  Outcome out;
  out.pass = report.decreasing_steps >= 6 && report.final_within_null;
  std::ostringstream detail;
  detail << "decreasing steps " << report.decreasing_steps << "/8, start "
         << report.distances.front() << ", final " << report.distances.back() << ", null95 "
         << report.null_q95;
  out.detail = detail.str();
  return out;
}

// -------------------------------------------------------------------------
// 11. Determinism: every experiment reruns byte-identically, independent of
//     the thread count.
// -------------------------------------------------------------------------

Outcome determinism() {
  Outcome out;
  std::ostringstream detail;

  ExperimentConfig donsker_cfg;
  donsker_cfg.n_values = {4, 8};
  donsker_cfg.ensemble_size = 500;
  donsker_cfg.zeta_size = 128;
  donsker_cfg.seed = Seed{110};
  const auto donsker_once = [&](unsigned threads) {
    ExperimentConfig c = donsker_cfg;
    c.threads = threads;
    const DonskerReport r = run_donsker_experiment(c);
    return r.to_json().dump() + r.to_csv();
  };
  const bool donsker_ok = donsker_once(1) == donsker_once(2) && donsker_once(1) == donsker_once(4);

  BmCharConfig bm_cfg;
  bm_cfg.ensemble_size = 400;
  bm_cfg.iterations = 2;
  bm_cfg.null_pairs = 5;
  bm_cfg.chunk_size = 128;
  bm_cfg.seed = Seed{111};
  const auto bm_once = [&](unsigned threads) {
    BmCharConfig c = bm_cfg;
    c.threads = threads;
    const BmCharReport r = run_bm_char_experiment(c);
    return r.to_json().dump() + r.to_csv();
  };
  const bool bm_ok = bm_once(1) == bm_once(2);

  SpatialConfig sp_cfg;
  sp_cfg.ensemble_size = 400;
  sp_cfg.iterations = 2;
  sp_cfg.null_pairs = 5;
  sp_cfg.chunk_size = 128;
  sp_cfg.seed = Seed{112};
  const auto sp_once = [&](unsigned threads) {
    SpatialConfig c = sp_cfg;
    c.threads = threads;
    const SpatialReport r = run_spatial_experiment(c);
    return r.to_json().dump() + r.to_csv();
  };
  const bool sp_ok = sp_once(1) == sp_once(2);

  RatesConfig rates_cfg;
  const auto rates_once = [&] {
    const RatesReport r = run_rates_experiment(rates_cfg);
    return r.to_json().dump() + r.to_csv();
  };
  const bool rates_ok = rates_once() == rates_once();

  // Ensemble files byte-identical across runs and thread counts.
  const RecursionSpec spec = donsker_spec(IncrementLaw::rademacher(), PathKind::kPiecewiseLinear);
  const auto simulate_once = [&](unsigned threads) {
    std::ostringstream os;
    write_jsonl(os, process_ensemble(spec, 16, 500, Seed{113}, threads));
    return os.str();
  };
  const bool simulate_ok = simulate_once(1) == simulate_once(2) &&
                           simulate_once(2) == simulate_once(4);

  out.pass = donsker_ok && bm_ok && sp_ok && rates_ok && simulate_ok;
  detail << "donsker " << (donsker_ok ? "ok" : "DIFFERS") << ", bm-char "
         << (bm_ok ? "ok" : "DIFFERS") << ", spatial " << (sp_ok ? "ok" : "DIFFERS") << ", rates "
         << (rates_ok ? "ok" : "DIFFERS") << ", simulate " << (simulate_ok ? "ok" : "DIFFERS");
  out.detail = detail.str();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  g_threads = effective_threads(0);
  for (int i = 1; i + 1 < argc; i += 2)
    if (std::string(argv[i]) == "--threads") g_threads = std::stoul(argv[i + 1]);

  const std::vector<Criterion> criteria{
      {1, "covariance exactness (enumeration oracle)", 1.0, covariance_exactness},
      {2, "recursion identity (fdd vs same-law null band)", 60.0, recursion_identity},
      {3, "Wiener fixed point under one T application", 30.0, wiener_fixed_point},
      {4, "contraction constants and rate factors", 1.0, contraction_constants},
      {5, "Donsker marginal convergence", 90.0, marginal_convergence},
      {6, "sup-moment convergence", 120.0, sup_moment_convergence},
      {7, "moment matching bands", 60.0, moment_matching},
      {8, "transport oracle equivalence", 10.0, transport_oracle},
      {9, "L_p machinery", 5.0, lp_machinery},
      {10, "bm-characterization experiment", 120.0, bm_characterization},
      {11, "determinism across reruns and thread counts", 300.0, determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = seconds <= c.budget_seconds;
    const bool pass = outcome.pass && in_budget;
    if (!pass) ++failures;
    std::printf("[%s] criterion %2d: %s (%.1f s%s) %s\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), seconds, in_budget ? "" : ", OVER BUDGET",
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
