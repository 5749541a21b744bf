#pragma once

namespace rootconv {

/// Entry point behind the rootconv binary; exposed so tests can drive the
/// full command surface in-process. Returns 0 on success, 2 on usage
/// errors, 1 on runtime errors.
int cli_main(int argc, const char* const* argv);

}  // namespace rootconv
