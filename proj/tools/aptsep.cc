// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <string>
#include <vector>

#include "aptsep/cli/cli.h"

int main(int argc, char** argv) {
  return aptsep::cli::Run(std::vector<std::string>(argv + 1, argv + argc));
}
