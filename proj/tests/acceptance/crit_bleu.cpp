#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "mtnmt/eval.hpp"

namespace acceptance {

Outcome check_bleu() {
  using mtnmt::bleu;
  struct Fixture {
    std::vector<std::string> hyp, ref;
    double want;
  };
  // reference scores from an established scorer at its defaults
  std::vector<Fixture> fixtures{
      {{"the cat on the mat"}, {"the cat sat on the mat"}, 40.936538},
      {{"It costs $5.20, right?"}, {"It costs $5.20 today, right?"},
       51.544868},
      {{"a b x y", "c d z w"}, {"a b p q", "c d r s"}, 22.590050},
  };

  double worst = 0.0;
  int bad = 0;
  for (const auto& f : fixtures) {
    double got = bleu(f.hyp, f.ref).score;
    double gap = std::fabs(got - f.want);
    worst = std::max(worst, gap);
    if (gap >= 0.1) ++bad;
  }

  auto self = bleu({"the quick brown fox jumps over the lazy dog"},
                   {"the quick brown fox jumps over the lazy dog"});
  bool identity_ok = self.score == 100.0 && self.brevity_penalty == 1.0;
  bool empty_ok = bleu({""}, {"some reference"}).score == 0.0;

  bool pass = bad == 0 && identity_ok && empty_ok;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%zu corpus fixtures within 0.1 (worst gap %.4f), identity "
                "run %s 100, empty hypothesis %s 0",
                fixtures.size(), worst, identity_ok ? "scores" : "MISSES",
                empty_ok ? "scores" : "MISSES");
  return {pass, buf};
}

}  // namespace acceptance
