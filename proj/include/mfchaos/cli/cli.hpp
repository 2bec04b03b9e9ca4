#pragma once

// Command-line front end.
//
//   mfchaos <validate|simulate|couple|scan-n|scan-t|lln|oracle>
//           --config <file> --out <dir> [--seed <u64>] [--threads <k|auto>]
//
// Exit codes: 0 success, 1 the model failed validation, 2 any other error
// (bad arguments or config, blow-up, I/O). Errors are also printed to stderr
// as one JSON object. Every command writes manifest.json and report.json to
// the output directory; commands with tabular output add results.csv.

#include <iosfwd>

namespace mfchaos {

const char* version();

int run(int argc, const char* const* argv);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfchaos
