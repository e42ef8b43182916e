#include <iostream>
#include <string>
#include <vector>

#include "roesl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const roesl::CliParse parsed = roesl::parse_cli(args);
  if (!parsed.options) {
    (parsed.exit_code == roesl::kExitOk ? std::cout : std::cerr) << parsed.message << "\n";
    return parsed.exit_code;
  }
  return roesl::run_command(*parsed.options);
}
