#pragma once

#include "eegprompt/gateway.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace eegprompt {

// Hooks for embedding the CLI in tests. Null members fall back to
// std::cout, std::cerr, the httplib transport and a real sleep.
struct CliContext {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::function<std::unique_ptr<HttpTransport>()> transport;
  Sleeper sleeper;
};

// `args` excludes the program name. Returns the process exit code:
// 0 success, 1 sample-level failures, 2 configuration or IO error.
int run_cli(const std::vector<std::string>& args, const CliContext& context = {});

}  // namespace eegprompt
