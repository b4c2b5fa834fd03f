#pragma once

namespace dbdh {

/// Command-line entry point: prepare-hosts, embed-synthetic,
/// postprocess-wmss, make-manifest, train, eval, localize, profile.
/// Returns 0 on success, 1 on validation/usage errors, 2 on runtime
/// failures; errors are printed as single-line JSON diagnostics on stderr.
int dispatch(int argc, const char* const* argv);

}  // namespace dbdh
