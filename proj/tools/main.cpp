#include <cstdlib>
#include <exception>
#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    return skbqa::cli::run(args, std::cout, std::cerr,
                           [](const char* name) { return std::getenv(name); });
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return skbqa::cli::kExitError;
  }
}
