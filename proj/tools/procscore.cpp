#include <iostream>

#include "procscore/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return procscore::cli::run(args, std::cout, std::cerr);
}
