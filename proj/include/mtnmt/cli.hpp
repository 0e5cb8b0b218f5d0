#pragma once

#include <iosfwd>

namespace mtnmt {

// Full command-line surface of the toolkit: prepare-data, train,
// backtranslate, translate, score-bleu, inspect-schedule, run-experiment.
// Returns the process exit code: 0 success, 1 usage error, 2 data error,
// 3 numerical failure, 4 acceptance-threshold failure. Human-readable output
// goes to `out` so callers can capture it.
int cli_main(int argc, const char* const* argv, std::ostream& out);

}  // namespace mtnmt
