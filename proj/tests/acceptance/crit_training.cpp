#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "../support/tmpdir.hpp"
#include "criteria.hpp"
#include "mtnmt/experiments.hpp"

namespace acceptance {

namespace {

double metric(const mtnmt::ExperimentSummary& s, const std::string& system,
              const std::string& name) {
  for (const auto& row : s.rows) {
    if (row.system != system) continue;
    for (const auto& [k, v] : row.metrics)
      if (k == name) return v;
  }
  throw std::runtime_error("metric " + name + " missing for " + system);
}

}  // namespace

Outcome check_overfit() {
  test_support::TmpDir tmp("acc-overfit");
  auto s = mtnmt::run_experiment("toy-overfit", 1, tmp.path().string());
  return {s.passed, s.verdict};
}

Outcome check_zeroshot() {
  double base_sum = 0.0, mtl_sum = 0.0;
  std::vector<double> base, mtl;
  for (uint64_t seed : {1, 2, 3}) {
    test_support::TmpDir tmp("acc-zeroshot");
    auto s = mtnmt::run_experiment("toy-x2x-zeroshot", seed,
                                   tmp.path().string());
    base.push_back(metric(s, "mt-only", "lid_compliance_aa2bb"));
    mtl.push_back(metric(s, "+MTL", "lid_compliance_aa2bb"));
    base_sum += base.back();
    mtl_sum += mtl.back();
  }
  double base_mean = base_sum / 3.0, mtl_mean = mtl_sum / 3.0;
  bool pass = mtl_mean >= 0.80 && mtl_mean > base_mean;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "output-language compliance over seeds 1-3: joint %.4f "
                "(%.2f/%.2f/%.2f) vs plain %.4f (%.2f/%.2f/%.2f); joint "
                "must reach 0.80 and beat plain",
                mtl_mean, mtl[0], mtl[1], mtl[2], base_mean, base[0],
                base[1], base[2]);
  return {pass, buf};
}

Outcome check_mtl_gain() {
  double gain_sum = 0.0;
  std::vector<double> gains;
  for (uint64_t seed : {1, 2, 3}) {
    test_support::TmpDir tmp("acc-mtl");
    auto s = mtnmt::run_experiment("toy-mtl", seed, tmp.path().string());
    double g = metric(s, "+MTL", "valid_token_accuracy") -
               metric(s, "mt-only", "valid_token_accuracy");
    gains.push_back(g);
    gain_sum += g;
  }
  double mean = gain_sum / 3.0;
  bool pass = mean >= 0.02;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "low-resource accuracy gain over seeds 1-3: mean %+.4f "
                "(%+.3f/%+.3f/%+.3f), threshold +0.02",
                mean, gains[0], gains[1], gains[2]);
  return {pass, buf};
}

}  // namespace acceptance
