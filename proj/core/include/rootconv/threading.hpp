#pragma once

namespace rootconv {

/// Bound on kernel-internal parallelism. 0 means "decide from hardware",
/// after consulting the ROOTCONV_THREADS environment variable.
/// Results are bitwise identical for any setting; this only trades speed.
void set_threads(int n);
int threads();

}  // namespace rootconv
