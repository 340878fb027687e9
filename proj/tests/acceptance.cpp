// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dot/dot.hpp"

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(int number, const std::string& name,
               const std::function<bool(std::string&)>& body) {
  const auto start = Clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("criterion %2d %-4s %s%s%s [%.2f s]\n", number,
              ok ? "PASS" : "FAIL", name.c_str(), detail.empty() ? "" : " — ",
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++failures;
}

dot::Matrix random_matrix(int r, int c, dot::Rng& rng, double scale = 1.0) {
  dot::Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.gauss();
  return m;
}

// ---------------------------------------------------------------------------
// reference synthetic covariate-shift task

dot::SyntheticSpec reference_spec() {
  dot::SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 10;
  spec.separation = 4.0;
  spec.covariance_scale = 1.0;
  spec.shift_kind = "translation";
  spec.shift_magnitude = 6.0;
  spec.samples_per_class = 100;  // 300 samples per domain
  spec.seed = 0;
  return spec;
}

dot::TrainConfig reference_config(uint64_t seed = 0) {
  dot::TrainConfig cfg;
  cfg.seed = seed;
  return cfg;  // library defaults are the reference setting
}

struct ReferenceRuns {
  dot::DomainDataset source, target;
  dot::TrainResult dot_run;    // full objective, seed 0
  dot::TrainResult base_run;   // source-only (epochs = 0), seed 0
  double dot_acc = 0.0, base_acc = 0.0;
};

ReferenceRuns& reference_runs() {
  static ReferenceRuns runs = [] {
    ReferenceRuns r;
    auto pair = dot::synth_shifted_gaussians(reference_spec());
    r.source = std::move(pair.first);
    r.target = std::move(pair.second);
    r.dot_run = dot::train(r.source, r.target, reference_config());
    dot::TrainConfig base_cfg = reference_config();
    base_cfg.epochs = 0;
    r.base_run = dot::train(r.source, r.target, base_cfg);
    r.dot_acc = *r.dot_run.log.records.back().target_acc;
    r.base_acc = *r.base_run.log.records.back().target_acc;
    return r;
  }();
  return runs;
}

}  // namespace

int main() {
  criterion(1, "attention map matches the row-softmax oracle", [](std::string& d) {
    bool ok = true;
    double worst_sum = 0.0, worst_entry = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      dot::Rng rng(1000 + trial);
      const int ns = 1 + static_cast<int>(rng.below(16));
      const int nt = 1 + static_cast<int>(rng.below(16));
      const int d2 = 1 + static_cast<int>(rng.below(8));
      const dot::Matrix fs = random_matrix(ns, d2, rng, 1.5);
      const dot::Matrix ft = random_matrix(nt, d2, rng, 1.5);
      const dot::AttentionMap a = dot::attention_map(fs, ft);
      const double scale = std::sqrt(static_cast<double>(d2));
      for (int i = 0; i < ns; ++i) {
        double sum = 0.0, denom = 0.0;
        for (int j = 0; j < nt; ++j) {
          double z = 0.0;
          for (int k = 0; k < d2; ++k) z += fs(i, k) * ft(j, k);
          denom += std::exp(z / scale);
        }
        for (int j = 0; j < nt; ++j) {
          double z = 0.0;
          for (int k = 0; k < d2; ++k) z += fs(i, k) * ft(j, k);
          const double want = std::exp(z / scale) / denom;
          worst_entry = std::max(worst_entry, std::abs(a.matrix(i, j) - want));
          sum += a.matrix(i, j);
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }
    }
    ok = worst_sum < 1e-10 && worst_entry < 1e-12;
    std::ostringstream ss;
    ss << "max row-sum err " << worst_sum << ", max entry err " << worst_entry;
    d = ss.str();
    return ok;
  });

  criterion(2, "attention/OT bridge and sparsity ordering", [](std::string& d) {
    int sparsity_hits = 0;
    double worst_a = 0.0, worst_b = 0.0;
    const int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
      dot::Rng rng(2000 + trial);
      const int ns = 2 + static_cast<int>(rng.below(9));
      const int nt = 2 + static_cast<int>(rng.below(9));
      const int d2 = 2 + static_cast<int>(rng.below(5));
      const dot::Matrix fs = random_matrix(ns, d2, rng, 1.5);
      const dot::Matrix ft = random_matrix(nt, d2, rng, 1.5);
      const dot::AttentionMap a = dot::attention_map(fs, ft);
      const dot::ConsistencyReport rep =
          dot::attention_ot_consistency(a, fs, ft);
      worst_a = std::max(worst_a, rep.rownorm_max_discrepancy);
      if (rep.sparsity_plan >= rep.sparsity_attention) ++sparsity_hits;

      // barycentric mapping of the plan equals transport through its
      // row-normalization
      const auto s = dot::sinkhorn(dot::pairwise_sq_dist(fs, ft),
                                   dot::uniform_marginal(ns),
                                   dot::uniform_marginal(nt), rep.lambda);
      dot::Matrix rn = s.plan.matrix;
      const auto mass = dot::row_sums(rn);
      for (int i = 0; i < rn.rows(); ++i)
        for (int j = 0; j < rn.cols(); ++j) rn(i, j) /= mass[i];
      const dot::Matrix via_plan = dot::barycentric_map(s.plan, ft);
      const dot::Matrix via_att = dot::transport_features({rn, 1.0}, ft);
      worst_b = std::max(worst_b, dot::max_abs_diff(via_plan, via_att));
    }
    std::ostringstream ss;
    ss << "rownorm err " << worst_a << ", bridge err " << worst_b
       << ", sparsity order " << sparsity_hits << "/" << trials;
    d = ss.str();
    return worst_a < 1e-12 && worst_b < 1e-12 &&
           sparsity_hits >= static_cast<int>(0.9 * trials);
  });

  criterion(3, "sinkhorn tracks the exact transport cost", [](std::string& d) {
    double worst_rel = 0.0, worst_viol = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      dot::Rng rng(3000 + trial);
      const int ns = 2 + static_cast<int>(rng.below(7));
      const int nt = 2 + static_cast<int>(rng.below(7));
      const dot::Matrix m = dot::pairwise_sq_dist(random_matrix(ns, 2, rng),
                                                  random_matrix(nt, 2, rng));
      const auto exact = dot::exact_ot_small(m, dot::uniform_marginal(ns),
                                             dot::uniform_marginal(nt));
      const auto sink = dot::sinkhorn(m, dot::uniform_marginal(ns),
                                      dot::uniform_marginal(nt), 1e-2, 1e-8,
                                      200000);
      const double cost = dot::frobenius_dot(sink.plan.matrix, m);
      worst_rel = std::max(worst_rel,
                           std::abs(cost - exact.cost) / std::max(1e-12, exact.cost));
      worst_viol = std::max(worst_viol, sink.plan.marginal_violation());
    }
    std::ostringstream ss;
    ss << "max relative gap " << worst_rel << ", max marginal violation "
       << worst_viol;
    d = ss.str();
    return worst_rel < 1e-2 && worst_viol < 1e-7;
  });

  criterion(4, "objective gradient matches central differences", [](std::string& d) {
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      dot::Rng rng(4000 + seed);
      dot::TrainConfig cfg;
      cfg.hidden_dim = 6;
      cfg.proj_dim = 4;
      cfg.knn_k = 3;
      cfg.seed = seed;
      dot::ModelParams params = dot::make_model(5, 3, cfg);
      const dot::Matrix xs = random_matrix(8, 5, rng);
      const dot::Matrix xt = random_matrix(8, 5, rng);
      std::vector<int> ys(8);
      for (int i = 0; i < 8; ++i) ys[i] = i % 3;
      const dot::AdjacencyGraph wt =
          dot::knn_graph(dot::project(params.target_net, xt), cfg.knn_k);
      const double err = dot::grad_check(
          params.registry(),
          [&](dot::Tape& t, const std::vector<int>& handles) {
            return dot::build_objective(t, handles, params, xs, ys, xt, cfg, &wt)
                .loss;
          },
          1e-5);
      worst = std::max(worst, err);
    }
    std::ostringstream ss;
    ss << "max relative error " << worst << " over 5 seeds";
    d = ss.str();
    return worst < 1e-4;
  });

  criterion(5, "adaptation lift on the reference task", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    const double lift = r.dot_acc - r.base_acc;

    // no-shift control: the two pipelines agree
    dot::SyntheticSpec zero = reference_spec();
    zero.shift_magnitude = 0.0;
    auto [zsrc, ztgt] = dot::synth_shifted_gaussians(zero);
    const dot::TrainResult zdot = dot::train(zsrc, ztgt, reference_config());
    dot::TrainConfig base_cfg = reference_config();
    base_cfg.epochs = 0;
    const dot::TrainResult zbase = dot::train(zsrc, ztgt, base_cfg);
    const double zd = *zdot.log.records.back().target_acc;
    const double zb = *zbase.log.records.back().target_acc;

    std::ostringstream ss;
    ss << "dot " << r.dot_acc << " vs baseline " << r.base_acc << " (lift "
       << lift << "); zero-shift " << zd << " vs " << zb;
    d = ss.str();
    return lift >= 0.10 && std::abs(zd - zb) <= 0.02;
  });

  criterion(6, "w2 and scatter trends over the reference run", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    const auto& first = r.dot_run.log.records.front();
    const auto& last = r.dot_run.log.records.back();
    std::ostringstream ss;
    ss << "w2 " << first.w2 << " -> " << last.w2 << "; within_tgt "
       << first.scatter.within_tgt << " -> " << last.scatter.within_tgt
       << "; center_dist " << first.scatter.center_dist << " -> "
       << last.scatter.center_dist;
    d = ss.str();
    return last.w2 < first.w2 &&
           last.scatter.within_tgt < first.scatter.within_tgt &&
           last.scatter.center_dist < first.scatter.center_dist;
  });

  criterion(7, "transported features correlate more with the target", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    const double with_dot = r.dot_run.log.records.back().xcov_transported;
    // source-only protocol: one shared projection for both domains
    const double without_dot = r.base_run.log.records.back().xcov_raw;
    std::ostringstream ss;
    ss << "with DoT " << with_dot << " vs source-only " << without_dot;
    d = ss.str();
    return with_dot > without_dot;
  });

  criterion(8, "a-distances shrink under adaptation", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    const auto project_pair = [&](const dot::ModelParams& p, bool transported) {
      const dot::Matrix fs = dot::project(p.source_net, r.source.features);
      const dot::Matrix ft = dot::project(p.target_net, r.target.features);
      if (!transported) return std::make_pair(fs, ft);
      return std::make_pair(
          dot::transport_features(dot::attention_map(fs, ft), ft), ft);
    };
    const auto [fhat, ft_dot] = project_pair(r.dot_run.params, true);
    const auto [fs_base, ft_base] = project_pair(r.base_run.params, false);

    const double a_dot = dot::a_distance(fhat, ft_dot);
    const double a_base = dot::a_distance(fs_base, ft_base);
    const double ac_dot = dot::a_c_distance(fhat, r.source.labels, ft_dot,
                                            r.target.labels);
    const double ac_base = dot::a_c_distance(fs_base, r.source.labels, ft_base,
                                             r.target.labels);
    std::ostringstream ss;
    ss << "A " << a_dot << " vs " << a_base << "; A_C " << ac_dot << " vs "
       << ac_base;
    d = ss.str();
    return a_dot < a_base && ac_dot < ac_base && ac_dot <= a_dot + 0.1;
  });

  criterion(9, "ablation ordering across seeds 0-2", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    std::ostringstream ss;
    bool ok = true;
    for (uint64_t seed = 0; seed < 3; ++seed) {
      dot::TrainConfig base_cfg = reference_config(seed);
      base_cfg.epochs = 0;
      const double base =
          *dot::train(r.source, r.target, base_cfg).log.records.back().target_acc;

      dot::TrainConfig att_cfg = reference_config(seed);
      att_cfg.lambda1 = att_cfg.lambda2 = att_cfg.lambda3 = 0.0;
      const double att =
          *dot::train(r.source, r.target, att_cfg).log.records.back().target_acc;

      const double full =
          seed == 0 ? r.dot_acc
                    : *dot::train(r.source, r.target, reference_config(seed))
                           .log.records.back()
                           .target_acc;
      ss << "seed " << seed << ": base " << base << " att " << att << " full "
         << full << "; ";
      ok = ok && att >= base && full >= att - 0.005;
    }
    d = ss.str();
    return ok;
  });

  criterion(10, "identical seeds reproduce metrics.csv byte for byte", [](std::string& d) {
    ReferenceRuns& r = reference_runs();
    const dot::TrainResult rerun = dot::train(r.source, r.target, reference_config());
    const auto tmp = std::filesystem::temp_directory_path();
    const std::string p1 = (tmp / "dot_accept_m1.csv").string();
    const std::string p2 = (tmp / "dot_accept_m2.csv").string();
    dot::write_metrics_csv(r.dot_run.log, p1);
    dot::write_metrics_csv(rerun.log, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    const bool same = s1.str() == s2.str() && !s1.str().empty();
    d = same ? "identical" : "differs";
    return same;
  });

  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  else std::printf("all criteria passed\n");
  return failures == 0 ? 0 : 1;
}
