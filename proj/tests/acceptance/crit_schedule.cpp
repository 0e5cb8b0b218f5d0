#include <cmath>
#include <cstdio>
#include <string>

#include "criteria.hpp"
#include "mtnmt/rng.hpp"
#include "mtnmt/scheduling.hpp"

namespace acceptance {

namespace {

// Independent closed form: a linear ramp over the first `warm` positions,
// clamped at the final value from position warm+1 on.
double ramp_oracle(double v0, double vm, int warm, int64_t k) {
  if (k >= int64_t(warm) + 1) return vm;
  return v0 + (vm - v0) * (double(k - 1) / double(warm));
}

}  // namespace

Outcome check_schedule() {
  using namespace mtnmt;
  const double tol = 1e-12;
  double worst = 0.0;
  auto probe_t = [&](const TemperatureSchedule& s) {
    for (int64_t k = 1; k <= 50; ++k)
      worst = std::max(worst, std::fabs(temperature_at(s, k) -
                                        ramp_oracle(s.t0, s.tm, s.warmup, k)));
  };
  auto probe_r = [&](const NoiseSchedule& s) {
    for (int64_t k = 1; k <= 50; ++k)
      worst = std::max(worst, std::fabs(noise_ratio_at(s, k) -
                                        ramp_oracle(s.r0, s.rm, s.warmup, k)));
  };

  // the published settings
  probe_t({1.0, 5.0, 5});
  probe_r({0.10, 0.20, 5});
  probe_r({0.20, 0.40, 5});

  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    double t0 = 0.25 + 6.0 * rng.uniform_real();
    double tm = t0 + 8.0 * rng.uniform_real();
    int warm = 1 + int(rng.uniform_int(30));
    probe_t({t0, tm, warm});

    double r0 = 0.5 * rng.uniform_real();
    double rm = r0 + (0.95 - r0) * rng.uniform_real();
    probe_r({r0, rm, 1 + int(rng.uniform_int(30))});
  }

  char buf[128];
  std::snprintf(buf, sizeof buf,
                "max deviation %.2e over 100 random configs + published "
                "settings, k in [1,50] (tolerance %.0e)",
                worst, tol);
  return {worst <= tol, buf};
}

}  // namespace acceptance
